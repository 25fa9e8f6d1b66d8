//! LLM gateway: prompt construction, chat-completion providers, proposal
//! parsing, paraphrasing, and answerability judging.
//!
//! All model traffic flows through [`ChatProvider`], with two built-ins: an
//! OpenAI-compatible HTTP client and a deterministic replay provider keyed
//! by request digest, so the whole pipeline runs offline in tests.

mod prompt;
mod proposal;
mod provider;

pub use prompt::{
    build_generation_prompt, default_few_shots, load_few_shots, select_few_shots,
    serialize_graph, FewShot,
};
pub use proposal::{parse_proposal, CandidateProposal, LabeledEntity};
pub use provider::{
    request_digest, ChatMessage, ChatProvider, Completion, HttpProvider, ProviderConfig,
    ProviderError, ReplayProvider, RequestParams, Role,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::evalkit::em_scores;
use crate::types::Triple;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("reply is missing the {0:?} section")]
    MissingSection(&'static str),
    #[error("could not parse an entity from {text:?} in the {section:?} section")]
    BadEntity {
        section: &'static str,
        text: String,
    },
    #[error("could not parse triple entry {text:?}: {reason}")]
    BadTriple { text: String, reason: String },
    #[error("no label available for id {0}")]
    MissingLabel(String),
    #[error("provider returned an empty reply")]
    EmptyReply,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Outcome of an answerability judgment: the verdict plus every raw reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub answerable: bool,
    pub transcript: Vec<String>,
}

/// Builds the paraphrase transcript for a question.
pub fn build_paraphrase_prompt(question: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You paraphrase questions to sound more natural and human-like while preserving \
             their exact meaning and answer.",
        ),
        ChatMessage::user(format!(
            "Paraphrase the following question in more natural terms. Respond with the \
             paraphrased question only.\n\nQuestion: {question}"
        )),
    ]
}

/// Builds the answerability-judge transcript for a question and its
/// serialized ground-truth triples.
pub fn build_judge_prompt(question: &str, triples_serialized: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You answer questions strictly from the provided knowledge graph triples. \
             Respond with the answer entity's label only.",
        ),
        ChatMessage::user(format!(
            "Triples: {triples_serialized}\n\nQuestion: {question}"
        )),
    ]
}

/// Front door for all model calls. Safe for concurrent callers; the
/// provider enforces its own in-flight cap.
pub struct Gateway {
    provider: Box<dyn ChatProvider>,
    generation_temperature: f64,
    judge_temperature: f64,
    few_shots: Vec<FewShot>,
}

impl Gateway {
    /// Wraps a provider with default sampling (generation 1.0, judging 0)
    /// and the bundled few-shot bank.
    pub fn new(provider: Box<dyn ChatProvider>) -> Self {
        Gateway {
            provider,
            generation_temperature: 1.0,
            judge_temperature: 0.0,
            few_shots: default_few_shots().to_vec(),
        }
    }

    pub fn with_generation_temperature(mut self, temperature: f64) -> Self {
        self.generation_temperature = temperature;
        self
    }

    pub fn with_judge_temperature(mut self, temperature: f64) -> Self {
        self.judge_temperature = temperature;
        self
    }

    pub fn with_few_shots(mut self, bank: Vec<FewShot>) -> Self {
        self.few_shots = bank;
        self
    }

    /// Sends the generation prompt for a serialized seed graph and returns
    /// the raw reply (parsing is the caller's next step).
    pub fn complete_generation(
        &self,
        graph_serialized: &str,
        k: usize,
    ) -> Result<Completion, GatewayError> {
        let shots = select_few_shots(&self.few_shots, k);
        let messages = build_generation_prompt(graph_serialized, k, &shots);
        let params = RequestParams {
            temperature: self.generation_temperature,
        };
        Ok(self.provider.complete(&messages, &params)?)
    }

    /// Produces a more natural rendering of a question. The caller keeps
    /// the original question; an error here never overwrites it.
    pub fn paraphrase(&self, question: &str) -> Result<String, GatewayError> {
        let messages = build_paraphrase_prompt(question);
        let params = RequestParams {
            temperature: self.generation_temperature,
        };
        let reply = self.provider.complete(&messages, &params)?;
        let text = reply.content.trim().to_owned();
        if text.is_empty() {
            return Err(GatewayError::EmptyReply);
        }
        Ok(text)
    }

    /// Asks the judge model to answer the question from its ground-truth
    /// triples, `tries` independent times. Answerable only when every reply
    /// exact-matches some gold label. Provider failures abort the judgment
    /// rather than counting as misses.
    pub fn judge_answerability(
        &self,
        question: &str,
        gt_triples: &BTreeSet<Triple>,
        label_of: impl Fn(&str) -> Option<String>,
        gold_labels: &[String],
        tries: u32,
    ) -> Result<JudgeOutcome, GatewayError> {
        if tries == 0 {
            return Err(GatewayError::InvalidArgument(
                "tries must be at least 1".to_owned(),
            ));
        }
        if gold_labels.is_empty() {
            return Err(GatewayError::InvalidArgument(
                "gold label list must be non-empty".to_owned(),
            ));
        }
        let serialized = serialize_graph(gt_triples, label_of)?;
        let messages = build_judge_prompt(question, &serialized);
        let params = RequestParams {
            temperature: self.judge_temperature,
        };
        let mut transcript = Vec::with_capacity(tries as usize);
        let mut answerable = true;
        for _ in 0..tries {
            let reply = self.provider.complete(&messages, &params)?;
            let (hit, _) = em_scores(&reply.content, gold_labels)
                .expect("gold labels checked non-empty above");
            answerable &= hit;
            transcript.push(reply.content);
        }
        Ok(JudgeOutcome {
            answerable,
            transcript,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn replay_gateway(entries: Vec<(Vec<ChatMessage>, Vec<&str>)>) -> Gateway {
        let map: BTreeMap<String, Vec<String>> = entries
            .into_iter()
            .map(|(messages, replies)| {
                (
                    request_digest(&messages),
                    replies.into_iter().map(str::to_owned).collect(),
                )
            })
            .collect();
        Gateway::new(Box::new(ReplayProvider::new(map)))
    }

    #[test]
    fn paraphrase_returns_scripted_reply_verbatim() {
        let question = "On which continent is Palmer Land located?";
        let gateway = replay_gateway(vec![(
            build_paraphrase_prompt(question),
            vec!["Which continent is Palmer Land situated on?"],
        )]);
        assert_eq!(
            gateway.paraphrase(question).unwrap(),
            "Which continent is Palmer Land situated on?"
        );
    }

    #[test]
    fn empty_paraphrase_reply_is_an_error() {
        let gateway = replay_gateway(vec![(build_paraphrase_prompt("q?"), vec!["  \n "])]);
        assert!(matches!(
            gateway.paraphrase("q?"),
            Err(GatewayError::EmptyReply)
        ));
    }

    fn judge_fixture(replies: Vec<&str>) -> (Gateway, BTreeSet<Triple>) {
        let triples = BTreeSet::from([Triple::new("Q1", "P17", "Q45")]);
        let serialized = "One (Q1)-country (P17)-Portugal (Q45)";
        let gateway = replay_gateway(vec![(
            build_judge_prompt("Where is One?", serialized),
            replies,
        )]);
        (gateway, triples)
    }

    fn labels(id: &str) -> Option<String> {
        Some(
            match id {
                "Q1" => "One",
                "P17" => "country",
                "Q45" => "Portugal",
                other => other,
            }
            .to_owned(),
        )
    }

    #[test]
    fn judging_is_a_conjunction_over_tries() {
        let gold = vec!["Portugal".to_owned()];
        let cases = [
            (vec!["Portugal", "The answer is Portugal."], true),
            (vec!["Portugal", "Spain"], false),
            (vec!["Spain", "Portugal"], false),
            (vec!["Spain", "France"], false),
        ];
        for (replies, expected) in cases {
            let (gateway, triples) = judge_fixture(replies.clone());
            let outcome = gateway
                .judge_answerability("Where is One?", &triples, labels, &gold, 2)
                .unwrap();
            assert_eq!(outcome.answerable, expected, "replies {replies:?}");
            assert_eq!(outcome.transcript.len(), 2);
        }
    }

    #[test]
    fn judge_provider_failure_is_an_error_not_a_verdict() {
        let (gateway, triples) = judge_fixture(vec!["Portugal"]);
        // Different question → different digest → replay miss.
        let err = gateway
            .judge_answerability("Unknown?", &triples, labels, &["Portugal".to_owned()], 2)
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::Provider(ProviderError::ReplayMiss { .. })
        ));
    }

    #[test]
    fn judge_rejects_zero_tries_and_empty_gold() {
        let (gateway, triples) = judge_fixture(vec!["Portugal"]);
        assert!(matches!(
            gateway.judge_answerability("q", &triples, labels, &["x".to_owned()], 0),
            Err(GatewayError::InvalidArgument(_))
        ));
        assert!(matches!(
            gateway.judge_answerability("q", &triples, labels, &[], 2),
            Err(GatewayError::InvalidArgument(_))
        ));
    }

    #[test]
    fn generation_uses_few_shots_and_returns_raw_reply() {
        let shots = select_few_shots(default_few_shots(), 2);
        let messages = build_generation_prompt("A (a)-r (r)-B (b)", 2, &shots);
        let gateway = replay_gateway(vec![(messages, vec!["raw reply"])]);
        let completion = gateway.complete_generation("A (a)-r (r)-B (b)", 2).unwrap();
        assert_eq!(completion.content, "raw reply");
    }
}
