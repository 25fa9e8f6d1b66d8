//! Local basic-graph-pattern evaluation by backtracking join.
//!
//! Patterns are matched as directed triples against the interned graph. At
//! every depth the engine picks the most selective remaining pattern (fewest
//! unbound variables, then smallest candidate edge list), so join order never
//! changes semantics, only cost. Variables bind bare ids; a variable may
//! range over entities or relations depending on position, with cross-domain
//! joins compared by id string.

use std::collections::BTreeSet;

use super::ast::{QueryAst, QueryForm, Term, TriplePattern};
use super::QueryError;
use crate::kg::KnowledgeGraph;
use crate::types::{EntityId, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dom {
    Ent,
    Rel,
}

type Val = (Dom, u32);

struct Solver<'a> {
    kg: &'a KnowledgeGraph,
    vars: Vec<String>,
}

impl<'a> Solver<'a> {
    fn new(kg: &'a KnowledgeGraph, patterns: &[TriplePattern]) -> Self {
        let mut vars = Vec::new();
        for pat in patterns {
            for term in pat.terms() {
                if let Some(name) = term.var_name() {
                    if !vars.iter().any(|v| v == name) {
                        vars.push(name.to_owned());
                    }
                }
            }
        }
        Solver {
            kg,
            vars,
        }
    }

    fn slot(&self, name: &str) -> usize {
        self.vars.iter().position(|v| v == name).expect("known var")
    }

    fn name_of(&self, val: Val) -> &str {
        match val.0 {
            Dom::Ent => self.kg.ent_name(val.1),
            Dom::Rel => self.kg.rel_name(val.1),
        }
    }

    /// Resolves a term to a concrete id index in the given domain, if fixed
    /// under the current binding. `Ok(None)` means the term is a free
    /// variable; `Err(())` means the term can never match (unknown constant
    /// or a cross-domain value with no counterpart).
    fn resolve(
        &self,
        term: &Term,
        dom: Dom,
        binding: &[Option<Val>],
    ) -> Result<Option<u32>, ()> {
        let name = match term {
            Term::Const(c) => c.as_str(),
            Term::Var(v) => match binding[self.slot(v)] {
                None => return Ok(None),
                Some(val) if val.0 == dom => return Ok(Some(val.1)),
                Some(val) => self.name_of(val),
            },
        };
        let idx = match dom {
            Dom::Ent => self.kg.ent_idx(name),
            Dom::Rel => self.kg.rel_idx(name),
        };
        idx.map(Some).ok_or(())
    }

    /// Upper bound on the candidate triples for a pattern under a binding.
    fn estimate(&self, pat: &TriplePattern, binding: &[Option<Val>]) -> usize {
        let s = self.resolve(&pat.subject, Dom::Ent, binding);
        let p = self.resolve(&pat.predicate, Dom::Rel, binding);
        let o = self.resolve(&pat.object, Dom::Ent, binding);
        let mut best = self.kg.num_triples();
        match s {
            Err(()) => return 0,
            Ok(Some(i)) => best = best.min(self.kg.outgoing(i).len()),
            Ok(None) => {}
        }
        match p {
            Err(()) => return 0,
            Ok(Some(i)) => best = best.min(self.kg.with_relation(i).len()),
            Ok(None) => {}
        }
        match o {
            Err(()) => return 0,
            Ok(Some(i)) => best = best.min(self.kg.incoming(i).len()),
            Ok(None) => {}
        }
        best
    }

    fn unbound_vars(&self, pat: &TriplePattern, binding: &[Option<Val>]) -> usize {
        let mut seen = BTreeSet::new();
        for term in pat.terms() {
            if let Some(v) = term.var_name() {
                if binding[self.slot(v)].is_none() {
                    seen.insert(v);
                }
            }
        }
        seen.len()
    }

    fn solve(&self, patterns: &[TriplePattern], mut on_solution: impl FnMut(&[Option<Val>])) {
        let mut binding: Vec<Option<Val>> = vec![None; self.vars.len()];
        let mut remaining: Vec<usize> = (0..patterns.len()).collect();
        self.recurse(patterns, &mut remaining, &mut binding, &mut on_solution);
    }

    fn recurse(
        &self,
        patterns: &[TriplePattern],
        remaining: &mut Vec<usize>,
        binding: &mut Vec<Option<Val>>,
        on_solution: &mut impl FnMut(&[Option<Val>]),
    ) {
        let Some(pick_pos) = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &pi)| {
                (
                    self.unbound_vars(&patterns[pi], binding),
                    self.estimate(&patterns[pi], binding),
                )
            })
            .map(|(pos, _)| pos)
        else {
            on_solution(binding);
            return;
        };
        let pat_idx = remaining.swap_remove(pick_pos);
        let pat = &patterns[pat_idx];

        let candidates = self.candidates(pat, binding);
        for ti in candidates {
            let [h, r, t] = self.kg.triple_ids(ti);
            let mut touched: Vec<usize> = Vec::new();
            if self.try_bind(&pat.subject, (Dom::Ent, h), binding, &mut touched)
                && self.try_bind(&pat.predicate, (Dom::Rel, r), binding, &mut touched)
                && self.try_bind(&pat.object, (Dom::Ent, t), binding, &mut touched)
            {
                self.recurse(patterns, remaining, binding, on_solution);
            }
            for slot in touched {
                binding[slot] = None;
            }
        }

        remaining.push(pat_idx);
        let pos = remaining.len() - 1;
        remaining.swap(pick_pos.min(pos), pos);
    }

    fn candidates(&self, pat: &TriplePattern, binding: &[Option<Val>]) -> Vec<u32> {
        let (Ok(s), Ok(p), Ok(o)) = (
            self.resolve(&pat.subject, Dom::Ent, binding),
            self.resolve(&pat.predicate, Dom::Rel, binding),
            self.resolve(&pat.object, Dom::Ent, binding),
        ) else {
            return Vec::new();
        };
        if let (Some(s), Some(p), Some(o)) = (s, p, o) {
            return if self.kg.has_triple_ids(s, p, o) {
                vec![self
                    .kg
                    .triple_index(s, p, o)
                    .expect("triple just found")]
            } else {
                Vec::new()
            };
        }
        let lists: [Option<&[u32]>; 3] = [
            s.map(|i| self.kg.outgoing(i)),
            p.map(|i| self.kg.with_relation(i)),
            o.map(|i| self.kg.incoming(i)),
        ];
        if let Some(driver) = lists
            .iter()
            .flatten()
            .min_by_key(|l| l.len())
        {
            driver.to_vec()
        } else {
            (0..self.kg.triple_count()).collect()
        }
    }

    fn try_bind(
        &self,
        term: &Term,
        val: Val,
        binding: &mut [Option<Val>],
        touched: &mut Vec<usize>,
    ) -> bool {
        match term {
            Term::Const(c) => c == self.name_of(val),
            Term::Var(v) => {
                let slot = self.slot(v);
                match binding[slot] {
                    None => {
                        binding[slot] = Some(val);
                        touched.push(slot);
                        true
                    }
                    Some(prev) => {
                        prev == val || self.name_of(prev) == self.name_of(val)
                    }
                }
            }
        }
    }
}

/// Distinct bindings of the single projected variable over all solutions.
pub fn eval_select(kg: &KnowledgeGraph, ast: &QueryAst) -> Result<BTreeSet<EntityId>, QueryError> {
    let QueryForm::Select { projected } = &ast.form else {
        return Err(QueryError::WrongForm { expected: "SELECT" });
    };
    if projected.len() != 1 {
        return Err(QueryError::ProjectionArity(projected.len()));
    }
    let var = &projected[0];
    let solver = Solver::new(kg, &ast.where_patterns);
    if !solver.vars.iter().any(|v| v == var) {
        return Err(QueryError::UnboundProjection(var.clone()));
    }
    let slot = solver.slot(var);
    let mut out = BTreeSet::new();
    solver.solve(&ast.where_patterns, |binding| {
        if let Some(val) = binding[slot] {
            out.insert(EntityId::new(solver.name_of(val).to_owned()));
        }
    });
    Ok(out)
}

/// Distinct union of the instantiated template over all solutions.
pub fn eval_construct(kg: &KnowledgeGraph, ast: &QueryAst) -> Result<BTreeSet<Triple>, QueryError> {
    let QueryForm::Construct { template } = &ast.form else {
        return Err(QueryError::WrongForm {
            expected: "CONSTRUCT",
        });
    };
    let solver = Solver::new(kg, &ast.where_patterns);
    for pat in template {
        for term in pat.terms() {
            if let Some(v) = term.var_name() {
                if !solver.vars.iter().any(|s| s == v) {
                    return Err(QueryError::UnboundTemplateVar(v.to_owned()));
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    solver.solve(&ast.where_patterns, |binding| {
        for pat in template {
            let part = |term: &Term| -> String {
                match term {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => solver
                        .name_of(binding[solver.slot(v)].expect("solution is total"))
                        .to_owned(),
                }
            };
            out.insert(Triple::new(
                part(&pat.subject),
                part(&pat.predicate),
                part(&pat.object),
            ));
        }
    });
    Ok(out)
}
