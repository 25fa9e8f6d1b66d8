//! Answer-tree taxonomy: structural constraints, canonical isomorphism
//! codes, hop counting, redundancy analysis, and generalization tagging.
//!
//! Ground-truth answer subgraphs are trees whose leaves are the seed
//! entities plus (possibly) the answer node. Two questions share a graph
//! type when their trees are isomorphic as labeled graphs with nodes
//! labeled seed/answer/intermediate; the canonical code captures exactly
//! that equivalence as a bracketed string such as `((1)(1))(2)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::KnowledgeGraph;
use crate::sparql::{
    eval_select, synthesize_query, to_sparql_text, QueryAst, QueryError, SynthError,
};
use crate::types::{EntityId, RelationId, Triple};

/// Ground-truth answer subgraph with its seed entities and answer node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerTree {
    pub edges: BTreeSet<Triple>,
    pub seeds: BTreeSet<EntityId>,
    pub answer: EntityId,
}

impl AnswerTree {
    pub fn new(
        edges: impl IntoIterator<Item = Triple>,
        seeds: impl IntoIterator<Item = EntityId>,
        answer: EntityId,
    ) -> Self {
        AnswerTree {
            edges: edges.into_iter().collect(),
            seeds: seeds.into_iter().collect(),
            answer,
        }
    }

    /// Distinct nodes appearing as an endpoint of some edge.
    pub fn nodes(&self) -> BTreeSet<&EntityId> {
        self.edges
            .iter()
            .flat_map(|t| [&t.head, &t.tail])
            .collect()
    }

    /// Distinct relations appearing on some edge.
    pub fn relations(&self) -> BTreeSet<&RelationId> {
        self.edges.iter().map(|t| &t.relation).collect()
    }

    fn adjacency(&self) -> BTreeMap<&EntityId, Vec<(&EntityId, &Triple)>> {
        let mut adj: BTreeMap<&EntityId, Vec<(&EntityId, &Triple)>> = BTreeMap::new();
        for t in &self.edges {
            adj.entry(&t.head).or_default().push((&t.tail, t));
            if t.head != t.tail {
                adj.entry(&t.tail).or_default().push((&t.head, t));
            }
        }
        adj
    }
}

/// A broken [`AnswerTree`] invariant. Violations are data, not errors:
/// candidate filtering records them as rejection details.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeViolation {
    /// The graph has no edges.
    Empty,
    /// The graph is not connected.
    Disconnected,
    /// The graph contains a cycle (including self-loops and parallel edges).
    Cycle,
    /// A degree-1 node is neither a seed nor the answer.
    HangingLeaf(EntityId),
    /// A seed entity is absent from the graph or not a leaf in it.
    SeedNotLeaf(EntityId),
    /// The answer node is listed among the seeds.
    AnswerAmongSeeds,
    /// The answer node does not appear in the graph.
    AnswerNotInTree,
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::Empty => f.write_str("empty graph"),
            TreeViolation::Disconnected => f.write_str("disconnected graph"),
            TreeViolation::Cycle => f.write_str("graph contains a cycle"),
            TreeViolation::HangingLeaf(e) => {
                write!(f, "leaf {e} is neither a seed nor the answer")
            }
            TreeViolation::SeedNotLeaf(e) => write!(f, "seed {e} is not a leaf of the graph"),
            TreeViolation::AnswerAmongSeeds => f.write_str("answer node is also a seed"),
            TreeViolation::AnswerNotInTree => f.write_str("answer node is not in the graph"),
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("tree constraints violated: {}", format_violations(.0))]
    Constraint(Vec<TreeViolation>),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

fn format_violations(violations: &[TreeViolation]) -> String {
    let texts: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    texts.join("; ")
}

/// Checks every [`AnswerTree`] invariant and reports each violation found.
/// An empty list means the tree is a valid answer subgraph.
pub fn check_tree_constraints(tree: &AnswerTree) -> Vec<TreeViolation> {
    let mut violations = Vec::new();
    if tree.seeds.contains(&tree.answer) {
        violations.push(TreeViolation::AnswerAmongSeeds);
    }
    if tree.edges.is_empty() {
        violations.push(TreeViolation::Empty);
        return violations;
    }

    let adj = tree.adjacency();
    if !adj.contains_key(&tree.answer) {
        violations.push(TreeViolation::AnswerNotInTree);
    }

    // Undirected components via BFS over distinct endpoints.
    let mut seen: BTreeSet<&EntityId> = BTreeSet::new();
    let mut components = 0usize;
    for start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([*start]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in &adj[u] {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
    }
    if components > 1 {
        violations.push(TreeViolation::Disconnected);
    }
    // A forest has exactly nodes - components edges; anything more means a
    // cycle somewhere (self-loops and parallel edges included).
    if tree.edges.len() > adj.len() - components {
        violations.push(TreeViolation::Cycle);
    }

    // Multigraph degree: self-loops count twice, so their node is not a leaf.
    let mut degree: BTreeMap<&EntityId, usize> = BTreeMap::new();
    for t in &tree.edges {
        *degree.entry(&t.head).or_default() += 1;
        *degree.entry(&t.tail).or_default() += 1;
    }
    for (node, d) in &degree {
        if *d == 1 && **node != tree.answer && !tree.seeds.contains(node) {
            violations.push(TreeViolation::HangingLeaf((*node).clone()));
        }
    }
    for seed in &tree.seeds {
        if degree.get(seed) != Some(&1) {
            violations.push(TreeViolation::SeedNotLeaf(seed.clone()));
        }
    }
    violations.sort();
    violations
}

fn require_valid(tree: &AnswerTree) -> Result<(), TaxonomyError> {
    let violations = check_tree_constraints(tree);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(TaxonomyError::Constraint(violations))
    }
}

/// One node of a parsed isomorphism code: a path of `length` edges ending
/// either at a leaf (no children) or at a branching node (≥2 children).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeNode {
    pub length: usize,
    pub children: Vec<CodeNode>,
}

impl CodeNode {
    /// Regenerates this node's bracketed text. The path length is omitted
    /// when it is 1 and children are present, mirroring the published
    /// notation (`((1)(1))`, not `(1(1)(1))`).
    pub fn text(&self) -> String {
        let inner: String = self.children.iter().map(CodeNode::text).collect();
        if self.children.is_empty() {
            format!("({})", self.length)
        } else if self.length == 1 {
            format!("({inner})")
        } else {
            format!("({}{inner})", self.length)
        }
    }

    /// Maximum root-to-leaf edge count through this node.
    pub fn height(&self) -> usize {
        self.length + self.children.iter().map(CodeNode::height).max().unwrap_or(0)
    }

    /// Number of leaves in this node's subtree.
    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(CodeNode::leaf_count).sum()
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid isomorphism code at byte {pos}: {reason}")]
pub struct CodeError {
    pub pos: usize,
    pub reason: String,
}

/// Canonical string identifier of an answer-tree shape (e.g. `((1)(1))(1)`).
///
/// Equal codes identify isomorphic trees under seed/answer/intermediate
/// node labeling; distinct codes identify non-isomorphic trees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IsomorphismCode(String);

impl IsomorphismCode {
    /// Parses and validates a code string. The parsed shape regenerates the
    /// input exactly; no canonical re-sorting is applied.
    pub fn parse(text: &str) -> Result<Self, CodeError> {
        parse_code_nodes(text)?;
        Ok(IsomorphismCode(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Root-level encodings, in the order they appear in the string.
    pub fn nodes(&self) -> Vec<CodeNode> {
        parse_code_nodes(&self.0).expect("constructed codes are always well formed")
    }

    /// Maximum seed-to-answer distance recoverable from the code alone.
    pub fn max_depth(&self) -> usize {
        self.nodes().iter().map(CodeNode::height).max().unwrap_or(0)
    }
}

impl fmt::Display for IsomorphismCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn parse_code_nodes(text: &str) -> Result<Vec<CodeNode>, CodeError> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let nodes = parse_node_list(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(CodeError {
            pos,
            reason: "trailing characters after code".to_owned(),
        });
    }
    if nodes.is_empty() {
        return Err(CodeError {
            pos: 0,
            reason: "empty code".to_owned(),
        });
    }
    Ok(nodes)
}

fn parse_node_list(bytes: &[u8], pos: &mut usize) -> Result<Vec<CodeNode>, CodeError> {
    let mut nodes = Vec::new();
    while *pos < bytes.len() && bytes[*pos] == b'(' {
        nodes.push(parse_node(bytes, pos)?);
    }
    Ok(nodes)
}

fn parse_node(bytes: &[u8], pos: &mut usize) -> Result<CodeNode, CodeError> {
    debug_assert_eq!(bytes[*pos], b'(');
    *pos += 1;
    let digit_start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    let digits = &bytes[digit_start..*pos];
    let children = parse_node_list(bytes, pos)?;
    if *pos >= bytes.len() || bytes[*pos] != b')' {
        return Err(CodeError {
            pos: *pos,
            reason: "expected ')'".to_owned(),
        });
    }
    *pos += 1;
    let length = if digits.is_empty() {
        if children.is_empty() {
            return Err(CodeError {
                pos: digit_start,
                reason: "group has neither a path length nor children".to_owned(),
            });
        }
        1
    } else {
        let text = std::str::from_utf8(digits).expect("ascii digits");
        let n: usize = text.parse().map_err(|_| CodeError {
            pos: digit_start,
            reason: "path length out of range".to_owned(),
        })?;
        if n == 0 {
            return Err(CodeError {
                pos: digit_start,
                reason: "path length must be positive".to_owned(),
            });
        }
        n
    };
    Ok(CodeNode { length, children })
}

struct Encoding {
    node: CodeNode,
    text: String,
    composite: bool,
}

/// Canonical sibling order: branching encodings before pure paths, then
/// taller subtrees, then more leaves, then lexicographically greater text.
fn sort_canonical(children: &mut [Encoding]) {
    children.sort_by(|a, b| {
        b.composite
            .cmp(&a.composite)
            .then(b.node.height().cmp(&a.node.height()))
            .then(b.node.leaf_count().cmp(&a.node.leaf_count()))
            .then(b.text.cmp(&a.text))
    });
}

fn encode_branch<'a>(
    adj: &BTreeMap<&'a EntityId, Vec<(&'a EntityId, &'a Triple)>>,
    mut prev: &'a EntityId,
    mut cur: &'a EntityId,
) -> Encoding {
    let mut steps = 1usize;
    loop {
        let onward: Vec<&EntityId> = adj[cur]
            .iter()
            .map(|(n, _)| *n)
            .filter(|n| *n != prev)
            .collect();
        match onward.len() {
            0 => {
                let node = CodeNode {
                    length: steps,
                    children: Vec::new(),
                };
                let text = node.text();
                return Encoding {
                    node,
                    text,
                    composite: false,
                };
            }
            1 => {
                prev = cur;
                cur = onward[0];
                steps += 1;
            }
            _ => {
                let mut children: Vec<Encoding> = onward
                    .into_iter()
                    .map(|next| encode_branch(adj, cur, next))
                    .collect();
                sort_canonical(&mut children);
                let node = CodeNode {
                    length: steps,
                    children: children.into_iter().map(|e| e.node).collect(),
                };
                let text = node.text();
                return Encoding {
                    node,
                    text,
                    composite: true,
                };
            }
        }
    }
}

/// Computes the canonical isomorphism code of a valid answer tree.
///
/// The tree is rooted at the answer node; each outgoing direction is walked
/// to the nearest leaf or branching node, yielding `(n)` for a pure path of
/// n edges or `(k …)` for a path of k edges into a branching node whose
/// child encodings follow (k omitted when 1). Root-level encodings are
/// juxtaposed in canonical order.
pub fn isomorphism_code(tree: &AnswerTree) -> Result<IsomorphismCode, TaxonomyError> {
    require_valid(tree)?;
    let adj = tree.adjacency();
    let mut roots: Vec<Encoding> = adj[&tree.answer]
        .iter()
        .map(|(next, _)| encode_branch(&adj, &tree.answer, next))
        .collect();
    sort_canonical(&mut roots);
    let text: String = roots.iter().map(|e| e.text.as_str()).collect();
    Ok(IsomorphismCode(text))
}

/// Maximum tree distance from any seed to the answer.
///
/// Expects a valid tree; unreachable seeds (which a valid tree cannot have)
/// are ignored rather than reported.
pub fn n_hops(tree: &AnswerTree) -> usize {
    let adj = tree.adjacency();
    let mut dist: BTreeMap<&EntityId, usize> = BTreeMap::new();
    if adj.contains_key(&tree.answer) {
        dist.insert(&tree.answer, 0);
        let mut queue = VecDeque::from([&tree.answer]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for (v, _) in &adj[u] {
                if !dist.contains_key(v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    tree.seeds
        .iter()
        .filter_map(|s| dist.get(s).copied())
        .max()
        .unwrap_or(0)
}

/// Answer-set evaluation of a SELECT query, abstracted so redundancy
/// analysis can run against the local engine or a test double.
pub trait SelectEvaluator {
    fn select(&self, query: &QueryAst) -> Result<BTreeSet<EntityId>, QueryError>;
}

impl SelectEvaluator for KnowledgeGraph {
    fn select(&self, query: &QueryAst) -> Result<BTreeSet<EntityId>, QueryError> {
        eval_select(self, query)
    }
}

/// Outcome of redundancy analysis over an answer tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RedundancyReport {
    /// True when some proper seed subset already yields the full answer set.
    pub redundant: bool,
    /// All minimum-cardinality witness subsets, in deterministic order.
    pub minimal_seed_sets: Vec<BTreeSet<EntityId>>,
    /// Subquery text per witness, keyed by the sorted seed ids joined by `-`.
    pub minimal_queries: BTreeMap<String, String>,
    /// Isomorphism code of the first witness's subtree.
    pub minimal_isomorphism: Option<IsomorphismCode>,
}

/// Key under which a witness seed set is reported: sorted ids joined by `-`.
pub fn seed_set_key(seeds: &BTreeSet<EntityId>) -> String {
    let ids: Vec<&str> = seeds.iter().map(EntityId::as_str).collect();
    ids.join("-")
}

/// Decides whether a question contains redundant seed information.
///
/// Enumerates non-empty proper seed subsets in increasing cardinality
/// (lexicographic within each size). For each subset S′ the subtree is the
/// union of tree paths from S′ to the answer; its synthesized query is
/// evaluated and the subset is a witness when its answer set equals
/// `answers` exactly. All witnesses of the first (minimum) cardinality with
/// any hit are collected; larger sizes are not explored.
pub fn analyze_redundancy<E: SelectEvaluator>(
    evaluator: &E,
    tree: &AnswerTree,
    answers: &BTreeSet<EntityId>,
) -> Result<RedundancyReport, TaxonomyError> {
    require_valid(tree)?;

    // Parent pointers toward the answer; valid trees reach every seed.
    let adj = tree.adjacency();
    let mut parent: BTreeMap<&EntityId, (&EntityId, &Triple)> = BTreeMap::new();
    let mut seen: BTreeSet<&EntityId> = BTreeSet::from([&tree.answer]);
    let mut queue = VecDeque::from([&tree.answer]);
    while let Some(u) = queue.pop_front() {
        for (v, t) in &adj[u] {
            if seen.insert(v) {
                parent.insert(v, (u, t));
                queue.push_back(v);
            }
        }
    }
    let path_to_answer = |seed: &EntityId| -> BTreeSet<Triple> {
        let mut edges = BTreeSet::new();
        let mut cur = seed;
        while cur != &tree.answer {
            let (up, t) = parent[cur];
            edges.insert((*t).clone());
            cur = up;
        }
        edges
    };

    let seeds: Vec<&EntityId> = tree.seeds.iter().collect();
    let mut report = RedundancyReport::default();
    for size in 1..seeds.len() {
        for combo in combinations(seeds.len(), size) {
            let subset: BTreeSet<EntityId> =
                combo.iter().map(|&i| seeds[i].clone()).collect();
            let mut edges: BTreeSet<Triple> = BTreeSet::new();
            for seed in &subset {
                edges.extend(path_to_answer(seed));
            }
            let query = synthesize_query(&edges, &subset, &tree.answer)?;
            if evaluator.select(&query)? != *answers {
                continue;
            }
            if report.minimal_isomorphism.is_none() {
                let subtree = AnswerTree {
                    edges: edges.clone(),
                    seeds: subset.clone(),
                    answer: tree.answer.clone(),
                };
                report.minimal_isomorphism = Some(isomorphism_code(&subtree)?);
            }
            report
                .minimal_queries
                .insert(seed_set_key(&subset), to_sparql_text(&query));
            report.minimal_seed_sets.push(subset);
        }
        if !report.minimal_seed_sets.is_empty() {
            report.redundant = true;
            break;
        }
    }
    Ok(report)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(n, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(n, k, 0, &mut current, &mut out);
    out
}

/// Generalization category of a test question relative to train statistics.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TestType {
    InDistribution,
    UnseenGraphType,
    UnseenRelationType,
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestType::InDistribution => "in_distribution",
            TestType::UnseenGraphType => "unseen_graph_type",
            TestType::UnseenRelationType => "unseen_relation_type",
        })
    }
}

/// Tags a test question's generalization requirements. The two "unseen"
/// tags are independent; `in_distribution` applies exactly when neither
/// holds.
pub fn tag_test_type(
    code: &IsomorphismCode,
    relations: &BTreeSet<RelationId>,
    train_iso_set: &BTreeSet<IsomorphismCode>,
    train_relation_set: &BTreeSet<RelationId>,
) -> BTreeSet<TestType> {
    let mut tags = BTreeSet::new();
    if !train_iso_set.contains(code) {
        tags.insert(TestType::UnseenGraphType);
    }
    if relations.iter().any(|r| !train_relation_set.contains(r)) {
        tags.insert(TestType::UnseenRelationType);
    }
    if tags.is_empty() {
        tags.insert(TestType::InDistribution);
    }
    tags
}
