//! Query synthesis from an answer subgraph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::ast::{QueryAst, QueryForm, Term, TriplePattern};
use crate::types::{EntityId, Triple};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("cannot synthesize a query from an empty graph")]
    EmptyGraph,
    #[error("answer node {0} does not appear in the graph")]
    AnswerNotInGraph(String),
    #[error("graph is not connected")]
    Disconnected,
}

/// Builds the SELECT query encoding a connected answer graph: the answer
/// node becomes `?answer`, every other non-seed node becomes a fresh
/// variable (`v1`, `v2`, … by first appearance), seeds and relations stay
/// constants, and edge directions are preserved.
///
/// Patterns are emitted in breadth-first order from the answer with each
/// node's incident edges sorted by (relation, opposite endpoint, direction),
/// so synthesis is deterministic and synthesized queries are comparable
/// across runs.
pub fn synthesize_query(
    graph: &BTreeSet<Triple>,
    seeds: &BTreeSet<EntityId>,
    answer: &EntityId,
) -> Result<QueryAst, SynthError> {
    if graph.is_empty() {
        return Err(SynthError::EmptyGraph);
    }
    let edges: Vec<&Triple> = graph.iter().collect();
    let mut adj: BTreeMap<&EntityId, Vec<usize>> = BTreeMap::new();
    for (i, t) in edges.iter().enumerate() {
        adj.entry(&t.head).or_default().push(i);
        if t.tail != t.head {
            adj.entry(&t.tail).or_default().push(i);
        }
    }
    if !adj.contains_key(answer) {
        return Err(SynthError::AnswerNotInGraph(answer.as_str().to_owned()));
    }
    // Sort each incidence list by (relation, opposite endpoint, outgoing-first).
    for (node, list) in adj.iter_mut() {
        list.sort_by_key(|&i| {
            let t = edges[i];
            let outgoing = t.head == **node;
            let other = if outgoing { &t.tail } else { &t.head };
            (t.relation.clone(), other.clone(), !outgoing)
        });
    }

    let mut vars: BTreeMap<&EntityId, String> = BTreeMap::new();
    let mut next_var = 1usize;
    let mut emitted = vec![false; edges.len()];
    let mut visited: BTreeSet<&EntityId> = BTreeSet::from([answer]);
    let mut queue: VecDeque<&EntityId> = VecDeque::from([answer]);
    let mut patterns = Vec::with_capacity(edges.len());

    fn term_for<'g>(
        node: &'g EntityId,
        answer: &EntityId,
        seeds: &BTreeSet<EntityId>,
        vars: &mut BTreeMap<&'g EntityId, String>,
        next_var: &mut usize,
    ) -> Term {
        if node == answer {
            Term::var("answer")
        } else if seeds.contains(node) {
            Term::constant(node.as_str())
        } else {
            let name = vars.entry(node).or_insert_with(|| {
                let name = format!("v{next_var}");
                *next_var += 1;
                name
            });
            Term::var(name.clone())
        }
    }

    while let Some(u) = queue.pop_front() {
        for &i in &adj[u] {
            if emitted[i] {
                continue;
            }
            emitted[i] = true;
            let t = edges[i];
            let subject = term_for(&t.head, answer, seeds, &mut vars, &mut next_var);
            let object = term_for(&t.tail, answer, seeds, &mut vars, &mut next_var);
            patterns.push(TriplePattern::new(
                subject,
                Term::constant(t.relation.as_str()),
                object,
            ));
            let other = if *u == t.head { &t.tail } else { &t.head };
            if visited.insert(other) {
                queue.push_back(other);
            }
        }
    }

    if !emitted.iter().all(|&e| e) {
        return Err(SynthError::Disconnected);
    }

    Ok(QueryAst {
        form: QueryForm::Select {
            projected: vec!["answer".to_owned()],
        },
        where_patterns: patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::super::ast::to_construct;
    use super::super::eval::{eval_construct, eval_select};
    use super::super::parser::parse_query;
    use super::super::text::to_sparql_text;
    use super::*;
    use crate::kg::KnowledgeGraph;

    fn set(triples: &[(&str, &str, &str)]) -> BTreeSet<Triple> {
        triples
            .iter()
            .map(|(h, r, t)| Triple::new(*h, *r, *t))
            .collect()
    }

    fn seeds(ids: &[&str]) -> BTreeSet<EntityId> {
        ids.iter().map(|s| EntityId::new(*s)).collect()
    }

    #[test]
    fn single_triple_becomes_single_pattern() {
        let ast = synthesize_query(
            &set(&[("Q3720616", "P1303", "guitar")]),
            &seeds(&["Q3720616"]),
            &EntityId::new("guitar"),
        )
        .unwrap();
        assert_eq!(
            ast.where_patterns,
            vec![TriplePattern::new(
                Term::constant("Q3720616"),
                Term::constant("P1303"),
                Term::var("answer"),
            )]
        );
    }

    #[test]
    fn two_hop_path_gets_one_intermediate_variable() {
        let ast = synthesize_query(
            &set(&[("Q2911403", "P40", "aviv"), ("aviv", "P1303", "guitar")]),
            &seeds(&["Q2911403"]),
            &EntityId::new("guitar"),
        )
        .unwrap();
        assert_eq!(
            ast.where_patterns,
            vec![
                TriplePattern::new(
                    Term::var("v1"),
                    Term::constant("P1303"),
                    Term::var("answer"),
                ),
                TriplePattern::new(
                    Term::constant("Q2911403"),
                    Term::constant("P40"),
                    Term::var("v1"),
                ),
            ]
        );
    }

    #[test]
    fn directions_are_preserved() {
        let ast = synthesize_query(
            &set(&[("answer-side", "r", "s")]),
            &seeds(&["s"]),
            &EntityId::new("answer-side"),
        )
        .unwrap();
        assert_eq!(
            ast.where_patterns,
            vec![TriplePattern::new(
                Term::var("answer"),
                Term::constant("r"),
                Term::constant("s"),
            )]
        );
    }

    #[test]
    fn missing_answer_and_disconnection_error() {
        let g = set(&[("a", "r", "b"), ("c", "r", "d")]);
        assert_eq!(
            synthesize_query(&g, &seeds(&["a"]), &EntityId::new("zz")),
            Err(SynthError::AnswerNotInGraph("zz".to_owned()))
        );
        assert_eq!(
            synthesize_query(&g, &seeds(&["a"]), &EntityId::new("b")),
            Err(SynthError::Disconnected)
        );
        assert_eq!(
            synthesize_query(&BTreeSet::new(), &seeds(&[]), &EntityId::new("a")),
            Err(SynthError::EmptyGraph)
        );
    }

    #[test]
    fn synthesis_is_deterministic_and_round_trips() {
        let g = set(&[
            ("film", "P495", "Q38"),
            ("film", "P364", "Q150"),
            ("film", "P144", "Q769001"),
            ("film", "P57", "ans"),
        ]);
        let s = seeds(&["Q38", "Q150", "Q769001"]);
        let a = EntityId::new("ans");
        let q1 = synthesize_query(&g, &s, &a).unwrap();
        let q2 = synthesize_query(&g, &s, &a).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(parse_query(&to_sparql_text(&q1)).unwrap(), q1);
    }

    #[test]
    fn construct_of_synthesized_query_recovers_subgraph() {
        let kg = KnowledgeGraph::builder()
            .triple("film", "P495", "Q38")
            .triple("film", "P57", "ans")
            .triple("other", "P495", "Q38")
            .finish()
            .unwrap();
        let g = set(&[("film", "P495", "Q38"), ("film", "P57", "ans")]);
        let q = synthesize_query(&g, &seeds(&["Q38"]), &EntityId::new("ans")).unwrap();
        assert_eq!(
            eval_select(&kg, &q).unwrap(),
            seeds(&["ans"])
        );
        let f = eval_construct(&kg, &to_construct(&q)).unwrap();
        assert!(f.is_superset(&g));
    }
}
