//! Candidate pipeline: sample a seed graph, prompt for a proposal, validate
//! it against the knowledge graph, and enrich what survives.
//!
//! Validation is a fixed gauntlet. The proposal's query is parsed, its
//! answer set and full answer subgraph are computed locally, the claimed
//! answer, ground-truth triples, and seeds are checked against them, and the
//! ground-truth subgraph must form a valid answer tree. Accepted candidates
//! are enriched with their isomorphism code, hop count, and redundancy
//! report. Every rejected candidate carries exactly one primary reason plus
//! human-readable detail, so pipeline runs can be audited after the fact.
//!
//! [`run_pipeline`] is deterministic for a fixed master seed and replay
//! bank: candidate i derives its RNG seed from SHA-256 over the master seed
//! and i, and accounting follows candidate-index order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::thread;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::{parse_proposal, serialize_graph, CandidateProposal, Gateway, GatewayError};
use crate::kg::{sample_seed_graph, KgError, KnowledgeGraph, SamplerConfig, Subgraph};
use crate::sparql::{
    eval_construct, eval_select, parse_query, to_construct, QueryError, SparqlError,
};
use crate::taxonomy::{
    analyze_redundancy, check_tree_constraints, isomorphism_code, n_hops, AnswerTree,
    IsomorphismCode, TaxonomyError, TestType, TreeViolation,
};
use crate::types::{EntityId, Triple};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Sparql(#[from] SparqlError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Why a candidate was discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    /// The provider reply could not be parsed into a proposal.
    ParseFailure,
    /// The claimed answer is not a binding of the answer variable.
    AnswerNotInAnswerSet,
    /// A claimed ground-truth triple is absent from the full answer subgraph.
    TripleNotEntailed,
    /// A seed entity does not appear in the full answer subgraph.
    SeedNotInFullSubgraph,
    /// The query text uses features outside the conjunctive fragment.
    QueryUnsupported,
    /// The query parsed but could not be evaluated.
    QueryExecutionError,
    /// The ground-truth subgraph is not a valid answer tree.
    TreeConstraintViolation,
    /// A ground-truth triple no longer exists in the current snapshot.
    StaleFact,
    /// The judge model failed to answer from the ground-truth triples.
    AnswerabilityFailed,
    /// The normalized question text duplicates an accepted datapoint.
    Duplicate,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RejectionReason::ParseFailure => "ParseFailure",
            RejectionReason::AnswerNotInAnswerSet => "AnswerNotInAnswerSet",
            RejectionReason::TripleNotEntailed => "TripleNotEntailed",
            RejectionReason::SeedNotInFullSubgraph => "SeedNotInFullSubgraph",
            RejectionReason::QueryUnsupported => "QueryUnsupported",
            RejectionReason::QueryExecutionError => "QueryExecutionError",
            RejectionReason::TreeConstraintViolation => "TreeConstraintViolation",
            RejectionReason::StaleFact => "StaleFact",
            RejectionReason::AnswerabilityFailed => "AnswerabilityFailed",
            RejectionReason::Duplicate => "Duplicate",
        };
        f.write_str(name)
    }
}

/// A discarded candidate: one primary reason plus detail text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRejection {
    pub reason: RejectionReason,
    pub detail: String,
}

impl CandidateRejection {
    fn new(reason: RejectionReason, detail: impl Into<String>) -> Self {
        CandidateRejection {
            reason,
            detail: detail.into(),
        }
    }
}

/// A rejection as logged by [`run_pipeline`], tagged with the candidate
/// index it accounts for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub candidate_index: u64,
    pub reason: RejectionReason,
    pub detail: String,
}

/// A candidate that survived validation, enriched with taxonomy fields.
///
/// Invariants on the validating KG: the answer is in its answer set, the
/// ground-truth subgraph is contained in the full answer subgraph, every
/// seed appears in the full answer subgraph, the ground-truth subgraph is a
/// valid answer tree (seeds are leaves, the answer is not a seed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedDatapoint {
    pub id: u64,
    pub question: String,
    /// More natural rendering of the question; equals `question` until the
    /// paraphrase step rewrites it.
    pub paraphrased_question: String,
    pub seeds: BTreeSet<EntityId>,
    pub answer_node: EntityId,
    pub gt_subgraph: BTreeSet<Triple>,
    pub sparql_text: String,
    /// Answer set per evaluation KG name.
    pub answer_set: BTreeMap<String, BTreeSet<EntityId>>,
    /// Full answer subgraph per evaluation KG name.
    pub full_answer_subgraph: BTreeMap<String, BTreeSet<Triple>>,
    pub n_hops: usize,
    pub graph_isomorphism: IsomorphismCode,
    pub redundant: bool,
    pub minimal_graph_isomorphism: Option<IsomorphismCode>,
    /// Witness subquery text keyed by sorted seed ids joined by `-`.
    pub minimal_seeds_and_queries: BTreeMap<String, String>,
    /// Generalization tags; empty until split design assigns them.
    pub test_type: BTreeSet<TestType>,
}

impl ValidatedDatapoint {
    /// Evaluates the stored query against another KG snapshot and records
    /// its answer set and full answer subgraph under `kg_name`. Constants
    /// missing from that snapshot simply yield empty results.
    pub fn evaluate_on(&mut self, kg_name: &str, kg: &KnowledgeGraph) -> Result<(), PipelineError> {
        let ast = parse_query(&self.sparql_text)?;
        let answers = eval_select(kg, &ast)?;
        let full = eval_construct(kg, &to_construct(&ast))?;
        self.answer_set.insert(kg_name.to_owned(), answers);
        self.full_answer_subgraph.insert(kg_name.to_owned(), full);
        Ok(())
    }
}

/// Structural filter toggles applied after the entailment checks.
///
/// All filters default to on, which is what the datapoint invariants
/// assume. Disabling one only skips the corresponding explicit check;
/// enrichment still requires an encodable answer tree and rejects anything
/// it cannot encode, with the enrichment error as detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationFilters {
    pub reject_disconnected: bool,
    pub reject_cycles: bool,
    pub reject_hanging_branches: bool,
    pub reject_self_answering: bool,
}

impl Default for ValidationFilters {
    fn default() -> Self {
        ValidationFilters {
            reject_disconnected: true,
            reject_cycles: true,
            reject_hanging_branches: true,
            reject_self_answering: true,
        }
    }
}

impl ValidationFilters {
    fn enforces(&self, violation: &TreeViolation) -> bool {
        match violation {
            TreeViolation::Empty | TreeViolation::AnswerNotInTree => true,
            TreeViolation::SeedNotLeaf(_) => true,
            TreeViolation::Disconnected => self.reject_disconnected,
            TreeViolation::Cycle => self.reject_cycles,
            TreeViolation::HangingLeaf(_) => self.reject_hanging_branches,
            TreeViolation::AnswerAmongSeeds => self.reject_self_answering,
        }
    }
}

/// Pipeline orchestration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Key under which the validating KG's answer set and full answer
    /// subgraph are recorded.
    pub kg_name: String,
    /// Seed-graph sampler node limit.
    pub node_limit: usize,
    /// Seed-graph sampler edge limit.
    pub edge_limit: usize,
    /// Master seed; candidate i derives its own seed from SHA-256 over
    /// (master_seed, i), so runs replay byte-identically.
    pub master_seed: u64,
    /// Relative weight of requesting k = 1, 2, … ground-truth edges; at
    /// most six entries.
    pub k_weights: Vec<f64>,
    /// Maximum number of candidates attempted before giving up.
    pub candidate_budget: usize,
    /// Worker threads for generation and validation. With more than one
    /// worker, up to workers - 1 surplus generation calls may be issued and
    /// discarded when the target is reached mid-wave, and a replay bank
    /// serving several candidates from one digest may interleave replies
    /// across the wave. The default of 1 gives strict sequential semantics.
    pub workers: usize,
    /// Rewrite accepted questions with the paraphrase prompt. A paraphrase
    /// failure keeps the original question and logs a warning.
    pub paraphrase: bool,
    /// Gate accepted candidates on the answerability judge. Judge provider
    /// failures abort the run.
    pub judge: bool,
    /// Independent judge tries; all must exact-match a gold label.
    pub judge_tries: u32,
    pub filters: ValidationFilters,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kg_name: "wikidata".to_owned(),
            node_limit: 16,
            edge_limit: 32,
            master_seed: 0,
            k_weights: vec![1.0; 6],
            candidate_budget: 1000,
            workers: 1,
            paraphrase: true,
            judge: false,
            judge_tries: 2,
            filters: ValidationFilters::default(),
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::InvalidArgument(msg.to_owned()));
        if self.kg_name.is_empty() {
            return bad("kg_name must be non-empty");
        }
        if self.node_limit == 0 || self.edge_limit == 0 {
            return bad("node_limit and edge_limit must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.k_weights.is_empty() || self.k_weights.len() > 6 {
            return bad("k_weights must hold between 1 and 6 entries");
        }
        if self.k_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("k_weights must be finite and non-negative");
        }
        if self.k_weights.iter().sum::<f64>() <= 0.0 {
            return bad("k_weights must not sum to zero");
        }
        if self.judge && self.judge_tries == 0 {
            return bad("judge_tries must be at least 1 when judging is enabled");
        }
        Ok(())
    }
}

/// Where a generated proposal came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Hex SHA-256 of the serialized seed graph shown to the model.
    pub seed_graph_id: String,
    /// RNG seed that drove the start pick and the sampler walk.
    pub rng_seed: u64,
    pub start_entity: EntityId,
    pub seed_graph: Subgraph,
}

/// A parsed proposal together with how it was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedCandidate {
    pub proposal: CandidateProposal,
    pub provenance: Provenance,
}

/// Result of one [`run_pipeline`] call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub accepted: Vec<ValidatedDatapoint>,
    pub rejections: Vec<Rejection>,
    /// Candidates that reached accounting; equals accepted + rejections.
    pub attempted: usize,
    /// True when the candidate budget ran out before the target was met.
    pub budget_exhausted: bool,
    pub warnings: Vec<String>,
}

/// Samples a seed graph, prompts the model, and parses the reply into a raw
/// proposal. The start entity is drawn uniformly from the graph using the
/// same seed that drives the sampler walk, so the whole step replays from
/// `sampler_cfg.rng_seed` alone.
pub fn generate_candidate(
    kg: &KnowledgeGraph,
    sampler_cfg: &SamplerConfig,
    k: usize,
    gateway: &Gateway,
) -> Result<GeneratedCandidate, PipelineError> {
    if k == 0 {
        return Err(PipelineError::InvalidArgument(
            "k must be at least 1".to_owned(),
        ));
    }
    if kg.num_entities() == 0 {
        return Err(PipelineError::InvalidArgument(
            "knowledge graph has no entities".to_owned(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(sampler_cfg.rng_seed);
    let start_pos = (rng.next_u64() % kg.num_entities() as u64) as usize;
    let start = kg.entities().nth(start_pos).expect("index within range");

    let seed_graph = sample_seed_graph(kg, &start, sampler_cfg)?;
    let serialized = serialize_graph(&seed_graph.triples, |id| Some(kg.label(id).to_owned()))?;
    let completion = gateway.complete_generation(&serialized, k)?;
    let proposal = parse_proposal(&completion.content, k)?;
    Ok(GeneratedCandidate {
        proposal,
        provenance: Provenance {
            seed_graph_id: hex::encode(Sha256::digest(serialized.as_bytes())),
            rng_seed: sampler_cfg.rng_seed,
            start_entity: start,
            seed_graph,
        },
    })
}

/// Validates a proposal against the knowledge graph.
///
/// The checks run in a fixed order and the first failure wins: query parse,
/// answer-set membership, ground-truth entailment in the full answer
/// subgraph, seed containment, tree constraints, then isomorphism and
/// redundancy enrichment. The returned datapoint records the answer set and
/// full answer subgraph under `kg_name` and carries id 0 until the caller
/// assigns one.
pub fn validate_candidate(
    kg: &KnowledgeGraph,
    kg_name: &str,
    proposal: &CandidateProposal,
    filters: &ValidationFilters,
) -> Result<ValidatedDatapoint, CandidateRejection> {
    use RejectionReason::*;

    let ast = match parse_query(&proposal.sparql_text) {
        Ok(ast) => ast,
        Err(err) => return Err(CandidateRejection::new(QueryUnsupported, err.to_string())),
    };
    let answers = eval_select(kg, &ast)
        .map_err(|err| CandidateRejection::new(QueryExecutionError, err.to_string()))?;
    let answer = &proposal.answer.id;
    if !answers.contains(answer) {
        return Err(CandidateRejection::new(
            AnswerNotInAnswerSet,
            format!(
                "answer {answer} is not among the {} answers of the query",
                answers.len()
            ),
        ));
    }

    let full = eval_construct(kg, &to_construct(&ast))
        .map_err(|err| CandidateRejection::new(QueryExecutionError, err.to_string()))?;
    let gt: BTreeSet<Triple> = proposal.gt_triples.iter().cloned().collect();
    let missing: Vec<String> = gt
        .iter()
        .filter(|t| !full.contains(t))
        .map(|t| format!("({} {} {})", t.head, t.relation, t.tail))
        .collect();
    if !missing.is_empty() {
        return Err(CandidateRejection::new(
            TripleNotEntailed,
            format!(
                "ground-truth triples missing from the full answer subgraph: {}",
                missing.join(", ")
            ),
        ));
    }

    let full_nodes: BTreeSet<&EntityId> = full.iter().flat_map(|t| [&t.head, &t.tail]).collect();
    let seeds: BTreeSet<EntityId> = proposal.seeds.iter().map(|s| s.id.clone()).collect();
    let stray: Vec<&str> = seeds
        .iter()
        .filter(|s| !full_nodes.contains(s))
        .map(EntityId::as_str)
        .collect();
    if !stray.is_empty() {
        return Err(CandidateRejection::new(
            SeedNotInFullSubgraph,
            format!(
                "seeds not in the full answer subgraph: {}",
                stray.join(", ")
            ),
        ));
    }

    let tree = AnswerTree {
        edges: gt.clone(),
        seeds: seeds.clone(),
        answer: answer.clone(),
    };
    let enforced: Vec<String> = check_tree_constraints(&tree)
        .iter()
        .filter(|v| filters.enforces(v))
        .map(ToString::to_string)
        .collect();
    if !enforced.is_empty() {
        return Err(CandidateRejection::new(
            TreeConstraintViolation,
            enforced.join("; "),
        ));
    }

    let code = isomorphism_code(&tree).map_err(enrichment_rejection)?;
    let hops = n_hops(&tree);
    let redundancy = analyze_redundancy(kg, &tree, &answers).map_err(enrichment_rejection)?;

    Ok(ValidatedDatapoint {
        id: 0,
        question: proposal.question.clone(),
        paraphrased_question: proposal.question.clone(),
        seeds,
        answer_node: answer.clone(),
        gt_subgraph: gt,
        sparql_text: proposal.sparql_text.clone(),
        answer_set: BTreeMap::from([(kg_name.to_owned(), answers)]),
        full_answer_subgraph: BTreeMap::from([(kg_name.to_owned(), full)]),
        n_hops: hops,
        graph_isomorphism: code,
        redundant: redundancy.redundant,
        minimal_graph_isomorphism: redundancy.minimal_isomorphism,
        minimal_seeds_and_queries: redundancy.minimal_queries,
        test_type: BTreeSet::new(),
    })
}

fn enrichment_rejection(err: TaxonomyError) -> CandidateRejection {
    let reason = match err {
        TaxonomyError::Constraint(_) => RejectionReason::TreeConstraintViolation,
        _ => RejectionReason::QueryExecutionError,
    };
    CandidateRejection::new(reason, err.to_string())
}

/// True (keep) iff every ground-truth triple still exists in the given
/// snapshot. Datapoints validated against an older KG can encode facts a
/// newer dump has dropped; this is the staleness check for them.
pub fn filter_stale(dp: &ValidatedDatapoint, kg_current: &KnowledgeGraph) -> bool {
    dp.gt_subgraph.iter().all(|t| kg_current.contains_triple(t))
}

/// Runs generate, validate, paraphrase, and optionally judge until
/// `target_count` candidates are accepted or the candidate budget runs out.
///
/// Candidate i is fully determined by the master seed and the provider, so
/// re-running with the same configuration and replay bank reproduces the
/// outcome byte for byte. Questions duplicating an already accepted one
/// (case-folded, whitespace-collapsed) are rejected as [`Duplicate`].
/// A target of zero returns immediately without any provider call; an
/// exhausted budget returns the partial output with a warning.
///
/// [`Duplicate`]: RejectionReason::Duplicate
pub fn run_pipeline(
    kg: &KnowledgeGraph,
    cfg: &PipelineConfig,
    gateway: &Gateway,
    target_count: usize,
) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let mut outcome = PipelineOutcome::default();
    if target_count == 0 {
        return Ok(outcome);
    }

    let budget = cfg.candidate_budget as u64;
    let mut accepted_questions: BTreeMap<String, u64> = BTreeMap::new();
    let mut next_index = 0u64;

    'waves: while outcome.accepted.len() < target_count && next_index < budget {
        let wave_end = next_index.saturating_add(cfg.workers as u64).min(budget);
        let indices: Vec<u64> = (next_index..wave_end).collect();
        next_index = wave_end;

        for (idx, result) in run_wave(kg, cfg, gateway, &indices) {
            let validated = match result {
                Ok(validated) => validated,
                Err(err) => match rejection_class(&err) {
                    Some(reason) => {
                        outcome.rejections.push(Rejection {
                            candidate_index: idx,
                            reason,
                            detail: err.to_string(),
                        });
                        continue;
                    }
                    None => return Err(err),
                },
            };
            let mut dp = match validated {
                Ok(dp) => dp,
                Err(rejection) => {
                    outcome.rejections.push(Rejection {
                        candidate_index: idx,
                        reason: rejection.reason,
                        detail: rejection.detail,
                    });
                    continue;
                }
            };

            let key = normalize_question(&dp.question);
            if let Some(&prior) = accepted_questions.get(&key) {
                outcome.rejections.push(Rejection {
                    candidate_index: idx,
                    reason: RejectionReason::Duplicate,
                    detail: format!("normalized question duplicates accepted datapoint {prior}"),
                });
                continue;
            }

            dp.id = idx;
            if cfg.paraphrase {
                match gateway.paraphrase(&dp.question) {
                    Ok(text) => dp.paraphrased_question = text,
                    Err(err) => outcome.warnings.push(format!(
                        "candidate {idx}: paraphrase failed ({err}); keeping the original question"
                    )),
                }
            }
            if cfg.judge {
                let gold = vec![kg.label(dp.answer_node.as_str()).to_owned()];
                let judged = gateway.judge_answerability(
                    &dp.paraphrased_question,
                    &dp.gt_subgraph,
                    |id| Some(kg.label(id).to_owned()),
                    &gold,
                    cfg.judge_tries,
                )?;
                if !judged.answerable {
                    outcome.rejections.push(Rejection {
                        candidate_index: idx,
                        reason: RejectionReason::AnswerabilityFailed,
                        detail: format!(
                            "judge missed the gold answer within {} tries: {}",
                            cfg.judge_tries,
                            judged.transcript.join(" / ")
                        ),
                    });
                    continue;
                }
            }

            accepted_questions.insert(key, idx);
            outcome.accepted.push(dp);
            if outcome.accepted.len() == target_count {
                break 'waves;
            }
        }
    }

    outcome.attempted = outcome.accepted.len() + outcome.rejections.len();
    if outcome.accepted.len() < target_count {
        outcome.budget_exhausted = true;
        outcome.warnings.push(format!(
            "candidate budget {} exhausted with {} of {} accepted",
            cfg.candidate_budget,
            outcome.accepted.len(),
            target_count
        ));
    }
    Ok(outcome)
}

type CandidateResult = Result<Result<ValidatedDatapoint, CandidateRejection>, PipelineError>;

fn run_wave(
    kg: &KnowledgeGraph,
    cfg: &PipelineConfig,
    gateway: &Gateway,
    indices: &[u64],
) -> Vec<(u64, CandidateResult)> {
    if indices.len() == 1 {
        return vec![(indices[0], process_candidate(kg, cfg, gateway, indices[0]))];
    }
    thread::scope(|scope| {
        let handles: Vec<_> = indices
            .iter()
            .map(|&idx| scope.spawn(move || (idx, process_candidate(kg, cfg, gateway, idx))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pipeline worker panicked"))
            .collect()
    })
}

fn process_candidate(
    kg: &KnowledgeGraph,
    cfg: &PipelineConfig,
    gateway: &Gateway,
    index: u64,
) -> CandidateResult {
    let mut rng = ChaCha20Rng::seed_from_u64(candidate_seed(cfg.master_seed, index));
    let k_dist = WeightedIndex::new(&cfg.k_weights)
        .map_err(|err| PipelineError::InvalidArgument(format!("k_weights: {err}")))?;
    let k = k_dist.sample(&mut rng) + 1;
    let sampler_cfg = SamplerConfig {
        node_limit: cfg.node_limit,
        edge_limit: cfg.edge_limit,
        rng_seed: rng.next_u64(),
    };
    let generated = generate_candidate(kg, &sampler_cfg, k, gateway)?;
    Ok(validate_candidate(
        kg,
        &cfg.kg_name,
        &generated.proposal,
        &cfg.filters,
    ))
}

/// Reply-parse failures reject the candidate; anything else (transport,
/// replay miss, missing labels) aborts the run.
fn rejection_class(err: &PipelineError) -> Option<RejectionReason> {
    match err {
        PipelineError::Gateway(
            GatewayError::MissingSection(_)
            | GatewayError::BadEntity { .. }
            | GatewayError::BadTriple { .. }
            | GatewayError::EmptyReply,
        ) => Some(RejectionReason::ParseFailure),
        _ => None,
    }
}

fn candidate_seed(master_seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_be_bytes());
    hasher.update(index.to_be_bytes());
    let digest = hasher.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest holds 8 bytes"))
}

fn normalize_question(question: &str) -> String {
    question
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
