//! Core identifier and triple types shared across the toolkit.
//!
//! Ids are opaque non-empty strings; Wikidata-style `Q…`/`P…` ids are
//! conventional, not enforced. Triples serialize as 3-element string arrays
//! to match the dataset record encoding.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

/// Opaque entity identifier (e.g. `Q45`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId::new(s)
    }
}

/// Opaque relation identifier (e.g. `P17`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(String);

impl RelationId {
    pub fn new(id: impl Into<String>) -> Self {
        RelationId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RelationId {
    fn from(s: &str) -> Self {
        RelationId::new(s)
    }
}

/// Directed subject-predicate-object triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        Triple {
            head: EntityId::new(head),
            relation: RelationId::new(relation),
            tail: EntityId::new(tail),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

impl Serialize for Triple {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(3)?;
        tup.serialize_element(self.head.as_str())?;
        tup.serialize_element(self.relation.as_str())?;
        tup.serialize_element(self.tail.as_str())?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for Triple {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TripleVisitor;

        impl<'de> Visitor<'de> for TripleVisitor {
            type Value = Triple;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a [head, relation, tail] string array")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Triple, A::Error> {
                let head: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let relation: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let tail: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(2, &self))?;
                if seq.next_element::<String>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Ok(Triple::new(head, relation, tail))
            }
        }

        deserializer.deserialize_seq(TripleVisitor)
    }
}

/// Traversal direction of an edge relative to a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The edge is walked head → tail.
    Forward,
    /// The edge is walked tail → head.
    Backward,
}

/// Formats a display string in the `Label (ID)` convention used by prompts
/// and dataset records.
pub fn format_labeled(label: &str, id: &str) -> String {
    format!("{label} ({id})")
}

/// Splits a `Label (ID)` string into its label and id parts.
///
/// Anchors on the final parenthesized token so labels containing parentheses
/// or hyphens survive the round trip. Returns `None` when no such token
/// exists.
pub fn parse_labeled(s: &str) -> Option<(&str, &str)> {
    let s = s.trim();
    let rest = s.strip_suffix(')')?;
    let open = rest.rfind('(')?;
    let id = &rest[open + 1..];
    let label = rest[..open].trim_end();
    if id.is_empty() || label.is_empty() {
        return None;
    }
    Some((label, id))
}

/// The id part of a `Label (ID)` string, or the whole string when it
/// carries no parenthesized id.
pub(crate) fn bare_id(s: &str) -> &str {
    parse_labeled(s).map(|(_, id)| id).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_serializes_as_string_array() {
        let t = Triple::new("Q1", "P2", "Q3");
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"["Q1","P2","Q3"]"#);
        let back: Triple = serde_json::from_str(r#"["Q1","P2","Q3"]"#).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn triple_rejects_wrong_arity() {
        assert!(serde_json::from_str::<Triple>(r#"["Q1","P2"]"#).is_err());
        assert!(serde_json::from_str::<Triple>(r#"["Q1","P2","Q3","Q4"]"#).is_err());
    }

    #[test]
    fn labeled_round_trip() {
        let s = format_labeled("Italy", "Q38");
        assert_eq!(s, "Italy (Q38)");
        assert_eq!(parse_labeled(&s), Some(("Italy", "Q38")));
    }

    #[test]
    fn labeled_handles_hyphens_and_parens() {
        assert_eq!(
            parse_labeled("Nieuw-Weerdinge (Q1993941)"),
            Some(("Nieuw-Weerdinge", "Q1993941"))
        );
        assert_eq!(
            parse_labeled("Munich (city) (Q1726)"),
            Some(("Munich (city)", "Q1726"))
        );
        assert_eq!(parse_labeled("no id here"), None);
        assert_eq!(parse_labeled("() (Q1)"), Some(("()", "Q1")));
    }
}
