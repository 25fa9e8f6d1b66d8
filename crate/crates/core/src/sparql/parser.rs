//! Lexer and recursive-descent parser for the conjunctive fragment.

use std::collections::HashMap;

use super::ast::{QueryAst, QueryForm, Term, TriplePattern};
use super::SparqlError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Keyword(Keyword),
    Var(String),
    /// `prefix:local` (local may be empty inside PREFIX declarations).
    PName(String, String),
    Bare(String),
    Iri(String),
    LBrace,
    RBrace,
    Dot,
    Semicolon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Keyword {
    Select,
    Construct,
    Where,
    Prefix,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "FILTER", "OPTIONAL", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH", "ORDER",
    "GROUP", "HAVING", "LIMIT", "OFFSET", "DISTINCT", "REDUCED", "ASK", "DESCRIBE", "INSERT",
    "DELETE", "EXISTS", "NOT", "AS",
];

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn syntax(&self, line: usize, col: usize, message: impl Into<String>) -> SparqlError {
        SparqlError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn unsupported(&self, line: usize, col: usize, feature: impl Into<String>) -> SparqlError {
        SparqlError::Unsupported {
            feature: feature.into(),
            line,
            col,
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, SparqlError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            if self.chars.peek() == Some(&'#') {
                while !matches!(self.chars.peek(), None | Some('\n')) {
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                return Ok(out);
            };
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ';' => {
                    self.bump();
                    Tok::Semicolon
                }
                '?' | '$' => {
                    self.bump();
                    let name = self.take_while(is_id_char);
                    if name.is_empty() {
                        return Err(self.syntax(line, col, "expected variable name after '?'"));
                    }
                    Tok::Var(name)
                }
                '<' => {
                    self.bump();
                    let mut iri = String::new();
                    loop {
                        match self.bump() {
                            Some('>') => break,
                            Some(ch) => iri.push(ch),
                            None => {
                                return Err(self.syntax(line, col, "unterminated IRI"));
                            }
                        }
                    }
                    Tok::Iri(iri)
                }
                '"' | '\'' => {
                    return Err(self.unsupported(line, col, "string literal"));
                }
                '/' | '|' | '+' | '*' | '^' => {
                    return Err(self.unsupported(line, col, "property path"));
                }
                '(' | ')' => {
                    return Err(self.unsupported(line, col, "parenthesized expression"));
                }
                ',' => {
                    return Err(self.unsupported(line, col, "object list"));
                }
                '@' => {
                    return Err(self.unsupported(line, col, "language-tagged literal"));
                }
                ch if is_id_char(ch) => {
                    let word = self.take_while(is_id_char);
                    let upper = word.to_ascii_uppercase();
                    if self.chars.peek() == Some(&':') {
                        self.bump();
                        let local = self.take_while(is_id_char);
                        Tok::PName(word, local)
                    } else if let Some(kw) = match upper.as_str() {
                        "SELECT" => Some(Keyword::Select),
                        "CONSTRUCT" => Some(Keyword::Construct),
                        "WHERE" => Some(Keyword::Where),
                        "PREFIX" => Some(Keyword::Prefix),
                        _ => None,
                    } {
                        Tok::Keyword(kw)
                    } else if UNSUPPORTED_KEYWORDS.contains(&upper.as_str()) {
                        return Err(self.unsupported(line, col, upper));
                    } else {
                        Tok::Bare(word)
                    }
                }
                other => {
                    return Err(self.syntax(line, col, format!("unexpected character {other:?}")));
                }
            };
            out.push(Spanned { tok, line, col });
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while matches!(self.chars.peek(), Some(&c) if pred(c)) {
            s.push(self.bump().unwrap());
        }
        s
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

impl Parser {
    fn new(toks: Vec<Spanned>) -> Self {
        let mut prefixes = HashMap::new();
        prefixes.insert("wd".to_owned(), String::new());
        prefixes.insert("wdt".to_owned(), String::new());
        Parser {
            toks,
            pos: 0,
            prefixes,
        }
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or_else(|| self.toks.last()) {
            Some(s) => (s.line, s.col),
            None => (1, 1),
        }
    }

    fn err(&self, message: impl Into<String>) -> SparqlError {
        let (line, col) = self.here();
        SparqlError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), SparqlError> {
        match self.next() {
            Some(s) if &s.tok == want => Ok(()),
            Some(s) => Err(SparqlError::Syntax {
                line: s.line,
                col: s.col,
                message: format!("expected {what}"),
            }),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn parse(mut self) -> Result<QueryAst, SparqlError> {
        while matches!(
            self.peek(),
            Some(Spanned {
                tok: Tok::Keyword(Keyword::Prefix),
                ..
            })
        ) {
            self.next();
            let name = match self.next() {
                Some(Spanned {
                    tok: Tok::PName(p, local),
                    ..
                }) if local.is_empty() => p,
                _ => return Err(self.err("expected prefix declaration name (e.g. `wd:`)")),
            };
            let iri = match self.next() {
                Some(Spanned {
                    tok: Tok::Iri(iri), ..
                }) => iri,
                _ => return Err(self.err("expected IRI in prefix declaration")),
            };
            self.prefixes.insert(name, iri);
        }

        let form = match self.next() {
            Some(Spanned {
                tok: Tok::Keyword(Keyword::Select),
                ..
            }) => {
                let mut projected = Vec::new();
                while let Some(Spanned { tok: Tok::Var(_), .. }) = self.peek() {
                    if let Some(Spanned {
                        tok: Tok::Var(name),
                        ..
                    }) = self.next()
                    {
                        projected.push(name);
                    }
                }
                if projected.is_empty() {
                    return Err(self.err("SELECT requires at least one projected variable"));
                }
                QueryForm::Select { projected }
            }
            Some(Spanned {
                tok: Tok::Keyword(Keyword::Construct),
                ..
            }) => {
                self.expect(&Tok::LBrace, "'{' opening the CONSTRUCT template")?;
                let template = self.parse_patterns()?;
                QueryForm::Construct { template }
            }
            _ => return Err(self.err("expected SELECT or CONSTRUCT")),
        };

        match self.next() {
            Some(Spanned {
                tok: Tok::Keyword(Keyword::Where),
                ..
            }) => {}
            _ => return Err(self.err("expected WHERE")),
        }
        self.expect(&Tok::LBrace, "'{' opening the where clause")?;
        let where_patterns = self.parse_patterns()?;
        if where_patterns.is_empty() {
            return Err(self.err("empty basic graph pattern"));
        }
        if let Some(s) = self.peek() {
            return Err(SparqlError::Syntax {
                line: s.line,
                col: s.col,
                message: "trailing input after query".to_owned(),
            });
        }

        if let QueryForm::Construct { template } = &form {
            for pat in template {
                if !where_patterns.contains(pat) {
                    return Err(SparqlError::Syntax {
                        line: 1,
                        col: 1,
                        message: "CONSTRUCT template pattern missing from where clause".to_owned(),
                    });
                }
            }
        }

        Ok(QueryAst {
            form,
            where_patterns,
        })
    }

    /// Parses triple patterns up to and including the closing brace.
    fn parse_patterns(&mut self) -> Result<Vec<TriplePattern>, SparqlError> {
        let mut patterns = Vec::new();
        loop {
            if matches!(self.peek(), Some(Spanned { tok: Tok::RBrace, .. })) {
                self.next();
                return Ok(patterns);
            }
            let subject = self.parse_term("subject")?;
            loop {
                let predicate = self.parse_term("predicate")?;
                let object = self.parse_term("object")?;
                patterns.push(TriplePattern::new(subject.clone(), predicate, object));
                match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::Semicolon) => {
                        self.next();
                    }
                    Some(Tok::Dot) => {
                        self.next();
                        break;
                    }
                    Some(Tok::RBrace) => break,
                    _ => return Err(self.err("expected '.', ';', or '}' after triple pattern")),
                }
            }
        }
    }

    fn parse_term(&mut self, position: &str) -> Result<Term, SparqlError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Var(name),
                ..
            }) => Ok(Term::Var(name)),
            Some(Spanned {
                tok: Tok::Bare(id), ..
            }) => Ok(Term::Const(id)),
            Some(Spanned {
                tok: Tok::PName(prefix, local),
                line,
                col,
            }) => {
                if !self.prefixes.contains_key(&prefix) {
                    return Err(SparqlError::Syntax {
                        line,
                        col,
                        message: format!("unknown prefix `{prefix}:`"),
                    });
                }
                if local.is_empty() {
                    return Err(SparqlError::Syntax {
                        line,
                        col,
                        message: format!("prefixed name `{prefix}:` has no local part"),
                    });
                }
                Ok(Term::Const(local))
            }
            Some(Spanned {
                tok: Tok::Iri(_),
                line,
                col,
            }) => Err(SparqlError::Unsupported {
                feature: "full IRI term (use prefixed or bare ids)".to_owned(),
                line,
                col,
            }),
            _ => Err(self.err(format!("expected {position} term"))),
        }
    }
}

/// Parses a query in the supported fragment.
pub fn parse_query(text: &str) -> Result<QueryAst, SparqlError> {
    let toks = Lexer::new(text).tokenize()?;
    Parser::new(toks).parse()
}
