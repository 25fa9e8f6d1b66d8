//! Parsing of generation replies into structured candidate proposals.

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::types::{parse_labeled, EntityId, Triple};

/// An entity id together with the display label the model used for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEntity {
    pub id: EntityId,
    pub label: String,
}

/// A raw LLM proposal, parsed but not yet validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProposal {
    pub question: String,
    pub seeds: Vec<LabeledEntity>,
    pub answer: LabeledEntity,
    pub gt_triples: Vec<Triple>,
    pub sparql_text: String,
    pub k_requested: usize,
}

const SECTIONS: [&str; 5] = [
    "Question:",
    "Nodes mentioned in the question:",
    "Answer:",
    "Triples used:",
    "SPARQL query:",
];

/// Extracts the five labeled sections from a reply, in their canonical
/// order. Section content runs to the next section label (or reply end),
/// with surrounding whitespace and one trailing comma removed.
fn split_sections(reply: &str) -> Result<[&str; 5], GatewayError> {
    let mut positions = [0usize; 5];
    let mut search_from = 0usize;
    for (i, label) in SECTIONS.iter().enumerate() {
        let found = reply[search_from..]
            .find(label)
            .ok_or_else(|| GatewayError::MissingSection(label))?;
        positions[i] = search_from + found;
        search_from = positions[i] + label.len();
    }
    let mut sections = [""; 5];
    for i in 0..5 {
        let start = positions[i] + SECTIONS[i].len();
        let end = if i + 1 < 5 { positions[i + 1] } else { reply.len() };
        sections[i] = reply[start..end]
            .trim()
            .trim_end_matches(',')
            .trim_end();
    }
    Ok(sections)
}

fn parse_entity(section: &'static str, text: &str) -> Result<LabeledEntity, GatewayError> {
    let (label, id) = parse_labeled(text).ok_or_else(|| GatewayError::BadEntity {
        section,
        text: text.to_owned(),
    })?;
    Ok(LabeledEntity {
        id: EntityId::new(id),
        label: label.to_owned(),
    })
}

/// Parses one `Label (QID)-label (PID)-Label (QID)` entry. Splitting
/// anchors on the `)-` sequence closing each parenthesized id, so labels
/// containing plain hyphens survive.
fn parse_triple_entry(entry: &str) -> Result<Triple, GatewayError> {
    let parts: Vec<&str> = entry.split(")-").collect();
    if parts.len() != 3 {
        return Err(GatewayError::BadTriple {
            text: entry.to_owned(),
            reason: format!("expected 3 id anchors, found {}", parts.len()),
        });
    }
    let head = format!("{})", parts[0]);
    let relation = format!("{})", parts[1]);
    let bad = |text: &str| GatewayError::BadTriple {
        text: entry.to_owned(),
        reason: format!("no parenthesized id in {text:?}"),
    };
    let (_, head_id) = parse_labeled(&head).ok_or_else(|| bad(&head))?;
    let (_, rel_id) = parse_labeled(&relation).ok_or_else(|| bad(&relation))?;
    let (_, tail_id) = parse_labeled(parts[2]).ok_or_else(|| bad(parts[2]))?;
    Ok(Triple::new(head_id, rel_id, tail_id))
}

/// Parses a generation reply into a [`CandidateProposal`].
///
/// The requested k is recorded on the proposal; whether the proposal
/// actually uses k triples is checked during validation, not here.
pub fn parse_proposal(reply: &str, k_requested: usize) -> Result<CandidateProposal, GatewayError> {
    let [question, nodes, answer, triples, sparql] = split_sections(reply)?;

    let mut seeds = Vec::new();
    for entry in nodes.split(';') {
        let entry = entry.trim().trim_end_matches(',').trim_end();
        if entry.is_empty() {
            continue;
        }
        seeds.push(parse_entity("Nodes mentioned in the question:", entry)?);
    }

    let mut gt_triples = Vec::new();
    for entry in triples.split(';') {
        let entry = entry.trim().trim_end_matches(',').trim_end();
        if entry.is_empty() {
            continue;
        }
        gt_triples.push(parse_triple_entry(entry)?);
    }

    Ok(CandidateProposal {
        question: question.to_owned(),
        seeds,
        answer: parse_entity("Answer:", answer)?,
        gt_triples,
        sparql_text: sparql.to_owned(),
        k_requested,
    })
}
