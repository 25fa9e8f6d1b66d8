//! Canonical query-text serialization.
//!
//! `parse_query(to_sparql_text(ast)) == ast` holds for every AST whose ids
//! match `[A-Za-z0-9_-]+`. Entity constants render with the `wd:` prefix,
//! predicate constants with `wdt:`.

use super::ast::{QueryAst, QueryForm, Term, TriplePattern};

fn term_text(term: &Term, predicate_position: bool) -> String {
    match term {
        Term::Var(v) => format!("?{v}"),
        Term::Const(c) if predicate_position => format!("wdt:{c}"),
        Term::Const(c) => format!("wd:{c}"),
    }
}

fn pattern_text(pat: &TriplePattern) -> String {
    format!(
        "{} {} {} .",
        term_text(&pat.subject, false),
        term_text(&pat.predicate, true),
        term_text(&pat.object, false)
    )
}

fn group_text(patterns: &[TriplePattern]) -> String {
    let body: Vec<String> = patterns.iter().map(pattern_text).collect();
    format!("{{ {} }}", body.join(" "))
}

/// Serializes an AST back to query text.
pub fn to_sparql_text(ast: &QueryAst) -> String {
    match &ast.form {
        QueryForm::Select { projected } => {
            let vars: Vec<String> = projected.iter().map(|v| format!("?{v}")).collect();
            format!(
                "SELECT {} WHERE {}",
                vars.join(" "),
                group_text(&ast.where_patterns)
            )
        }
        QueryForm::Construct { template } => format!(
            "CONSTRUCT {} WHERE {}",
            group_text(template),
            group_text(&ast.where_patterns)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_query;
    use super::*;

    #[test]
    fn select_round_trips() {
        let ast = parse_query(
            "SELECT ?answer WHERE { ?film wdt:P495 wd:Q38; wdt:P364 wd:Q150; \
             wdt:P144 wd:Q769001; wdt:P57 ?answer.}",
        )
        .unwrap();
        let text = to_sparql_text(&ast);
        assert_eq!(parse_query(&text).unwrap(), ast);
        assert_eq!(
            text,
            "SELECT ?answer WHERE { ?film wdt:P495 wd:Q38 . ?film wdt:P364 wd:Q150 . \
             ?film wdt:P144 wd:Q769001 . ?film wdt:P57 ?answer . }"
        );
    }

    #[test]
    fn construct_round_trips() {
        let ast = parse_query(
            "CONSTRUCT { ?a wdt:P1 ?b . } WHERE { ?a wdt:P1 ?b . wd:Q1 wdt:P2 ?a . }",
        )
        .unwrap();
        assert_eq!(parse_query(&to_sparql_text(&ast)).unwrap(), ast);
    }

    #[test]
    fn variable_predicate_round_trips() {
        let ast = parse_query("SELECT ?r WHERE { wd:Q1 ?r wd:Q2 . }").unwrap();
        assert_eq!(parse_query(&to_sparql_text(&ast)).unwrap(), ast);
    }
}
