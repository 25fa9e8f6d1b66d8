//! Query AST for the conjunctive fragment.

use std::collections::BTreeSet;

/// Position in a triple pattern: a bare constant id or a variable name
/// (stored without the `?` sigil).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(id: impl Into<String>) -> Self {
        Term::Const(id.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryForm {
    Select { projected: Vec<String> },
    Construct { template: Vec<TriplePattern> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub form: QueryForm,
    pub where_patterns: Vec<TriplePattern>,
}

impl QueryAst {
    pub fn is_select(&self) -> bool {
        matches!(self.form, QueryForm::Select { .. })
    }

    /// Distinct variable names mentioned in the where clause.
    pub fn where_variables(&self) -> BTreeSet<&str> {
        self.where_patterns
            .iter()
            .flat_map(|p| p.terms())
            .filter_map(|t| t.var_name())
            .collect()
    }
}

/// Converts a SELECT query into the CONSTRUCT query whose template is the
/// full where-pattern list; already-CONSTRUCT queries pass through unchanged
/// (idempotent).
pub fn to_construct(ast: &QueryAst) -> QueryAst {
    match &ast.form {
        QueryForm::Select { .. } => QueryAst {
            form: QueryForm::Construct {
                template: ast.where_patterns.clone(),
            },
            where_patterns: ast.where_patterns.clone(),
        },
        QueryForm::Construct { .. } => ast.clone(),
    }
}
