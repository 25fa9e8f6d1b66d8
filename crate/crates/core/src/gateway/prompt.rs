//! Generation prompt construction: graph serialization, the instruction
//! template, and the few-shot example bank.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::provider::ChatMessage;
use super::GatewayError;
use crate::types::{format_labeled, Triple};

/// Serializes triples as `Label (QID)-label (PID)-Label (QID)` entries
/// joined by `;`, in sorted triple order. Every id must resolve to a label.
pub fn serialize_graph(
    triples: &BTreeSet<Triple>,
    label_of: impl Fn(&str) -> Option<String>,
) -> Result<String, GatewayError> {
    let mut entries = Vec::with_capacity(triples.len());
    for t in triples {
        let part = |id: &str| -> Result<String, GatewayError> {
            let label = label_of(id).ok_or_else(|| GatewayError::MissingLabel(id.to_owned()))?;
            Ok(format_labeled(&label, id))
        };
        entries.push(format!(
            "{}-{}-{}",
            part(t.head.as_str())?,
            part(t.relation.as_str())?,
            part(t.tail.as_str())?
        ));
    }
    Ok(entries.join(";"))
}

/// One worked example in the generation prompt: a serialized graph and the
/// reply the model is expected to imitate, tagged with the k and tree shape
/// it demonstrates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub k: usize,
    pub isomorphism: String,
    pub graph: String,
    pub reply: String,
}

/// Built-in example bank (currently one k=2 exemplar).
pub fn default_few_shots() -> &'static [FewShot] {
    static BANK: OnceLock<Vec<FewShot>> = OnceLock::new();
    BANK.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/few_shots.json"))
            .expect("bundled few-shot bank is valid")
    })
}

/// Loads an example bank from a JSON file shaped like the bundled one.
pub fn load_few_shots(path: impl AsRef<Path>) -> Result<Vec<FewShot>, GatewayError> {
    let text = std::fs::read_to_string(path).map_err(super::provider::ProviderError::from)?;
    serde_json::from_str(&text).map_err(|e| GatewayError::InvalidArgument(e.to_string()))
}

/// Picks the examples demonstrating the requested k; when none match, the
/// whole bank is used as generic guidance.
pub fn select_few_shots(bank: &[FewShot], k: usize) -> Vec<&FewShot> {
    let matching: Vec<&FewShot> = bank.iter().filter(|s| s.k == k).collect();
    if matching.is_empty() {
        bank.iter().collect()
    } else {
        matching
    }
}

fn instruction(k: usize) -> String {
    format!(
        "Based on the provided set of knowledge graph triples, please generate a question \
         that requires combining the information in exactly {k} of the provided triples for \
         answering. The answer should correspond to exactly one node in the provided graph, \
         be unique and not ambiguous. Make sure that all {k} of the selected triples are \
         required for answering the question and that they involve multiple different \
         entities. Respond only with\n\
         - 'Question:' the generated question,\n\
         - 'Nodes mentioned in the question:' a semicolon-separated list of the nodes that \
         are explicitly mentioned in the question,\n\
         - 'Answer:' the node corresponding to the correct answer with its QID,\n\
         - 'Triples used:' a semicolon-separated list of the triples used for answering the \
         question,\n\
         - 'SPARQL query:' a SPARQL query to return all answers of the question from the \
         Wikidata knowledge base."
    )
}

/// Builds the full generation transcript: instruction, few-shot user and
/// assistant pairs, and the final `Graph: …` message. Pure in its inputs.
pub fn build_generation_prompt(
    graph_serialized: &str,
    k: usize,
    few_shots: &[&FewShot],
) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(2 + 2 * few_shots.len());
    messages.push(ChatMessage::user(instruction(k)));
    for shot in few_shots {
        messages.push(ChatMessage::user(format!("Graph: {}", shot.graph)));
        messages.push(ChatMessage::assistant(shot.reply.clone()));
    }
    messages.push(ChatMessage::user(format!("Graph: {graph_serialized}")));
    messages
}

#[cfg(test)]
mod tests {
    use super::super::provider::Role;
    use super::*;

    fn labels(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: std::collections::BTreeMap<String, String> = pairs
            .iter()
            .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
            .collect();
        move |id: &str| map.get(id).cloned()
    }

    #[test]
    fn serializes_the_transcript_example_entry() {
        let triples = BTreeSet::from([Triple::new("Q1024001", "P17", "Q45")]);
        let label_of = labels(&[
            ("Q1024001", "Quiaios"),
            ("P17", "country"),
            ("Q45", "Portugal"),
        ]);
        assert_eq!(
            serialize_graph(&triples, label_of).unwrap(),
            "Quiaios (Q1024001)-country (P17)-Portugal (Q45)"
        );
    }

    #[test]
    fn serializes_empty_and_multiple_entries() {
        let label_of = labels(&[("a", "A"), ("b", "B"), ("c", "C"), ("r", "rel")]);
        assert_eq!(serialize_graph(&BTreeSet::new(), &label_of).unwrap(), "");
        let triples = BTreeSet::from([Triple::new("a", "r", "b"), Triple::new("b", "r", "c")]);
        assert_eq!(
            serialize_graph(&triples, &label_of).unwrap(),
            "A (a)-rel (r)-B (b);B (b)-rel (r)-C (c)"
        );
    }

    #[test]
    fn missing_label_is_an_error() {
        let triples = BTreeSet::from([Triple::new("a", "r", "b")]);
        match serialize_graph(&triples, labels(&[("a", "A"), ("r", "rel")])) {
            Err(GatewayError::MissingLabel(id)) => assert_eq!(id, "b"),
            other => panic!("expected missing label, got {other:?}"),
        }
    }

    #[test]
    fn prompt_shape_and_interpolation() {
        let zero_shot = build_generation_prompt("G", 2, &[]);
        assert_eq!(zero_shot.len(), 2);
        assert_eq!(zero_shot[0].role, Role::User);
        assert!(zero_shot[0].content.contains("exactly 2 of the provided triples"));
        assert!(zero_shot[0].content.contains("all 2 of the selected triples"));
        assert_eq!(zero_shot[1].content, "Graph: G");

        let shots = select_few_shots(default_few_shots(), 2);
        assert_eq!(shots.len(), 1);
        let with_shot = build_generation_prompt("G", 2, &shots);
        assert_eq!(with_shot.len(), 4);
        assert_eq!(with_shot[1].role, Role::User);
        assert!(with_shot[1].content.starts_with("Graph: Quiaios (Q1024001)"));
        assert_eq!(with_shot[2].role, Role::Assistant);
        assert!(with_shot[2].content.contains("Fernandes Costa die?"));

        // Pure function: identical inputs give identical bytes.
        assert_eq!(with_shot, build_generation_prompt("G", 2, &shots));
    }

    #[test]
    fn few_shot_selection_falls_back_to_whole_bank() {
        let bank = default_few_shots();
        assert_eq!(select_few_shots(bank, 2).len(), 1);
        assert_eq!(select_few_shots(bank, 4).len(), bank.len());
    }
}
