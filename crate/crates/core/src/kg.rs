//! Immutable knowledge graph storage and the seed-graph / neighborhood
//! sampling primitives built on top of it.
//!
//! Graphs load from UTF-8 TSV sources: one `head<TAB>relation<TAB>tail` line
//! per triple, plus optional `id<TAB>label` files. Ids are interned and
//! re-indexed lexicographically at build time so all iteration orders (and
//! therefore sampling and join behavior) are independent of input file order.
//! After [`KgBuilder::finish`] the graph is immutable and safe to share
//! across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{EntityId, RelationId, Triple};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {kind} row at line {line}: {reason}")]
    Malformed {
        kind: &'static str,
        line: usize,
        reason: String,
    },
    #[error("label rows reference unknown ids: {}", ids.join(", "))]
    DanglingLabels { ids: Vec<String> },
    #[error("unknown entity id: {0}")]
    UnknownEntity(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A node set together with the triples induced on it. Produced by the seed
/// sampler and by k-hop extraction; consumed by prompting and PageRank.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub nodes: BTreeSet<EntityId>,
    pub triples: BTreeSet<Triple>,
}

/// Limits for [`sample_seed_graph`]. The loop stops as soon as either limit
/// is reached (checked before each expansion), so the final triple batch may
/// overshoot `edge_limit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub node_limit: usize,
    pub edge_limit: usize,
    pub rng_seed: u64,
}

/// Incremental builder; ids may arrive in any order and duplicate triples
/// collapse to one.
#[derive(Debug, Default)]
pub struct KgBuilder {
    triples: BTreeSet<(String, String, String)>,
    labels: BTreeMap<String, String>,
}

impl KgBuilder {
    pub fn triple(
        mut self,
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        self.add_triple(head.into(), relation.into(), tail.into());
        self
    }

    pub fn label(mut self, id: impl Into<String>, label: impl Into<String>) -> Self {
        self.add_label(id.into(), label.into());
        self
    }

    pub fn add_triple(&mut self, head: String, relation: String, tail: String) {
        self.triples.insert((head, relation, tail));
    }

    pub fn add_label(&mut self, id: String, label: String) {
        self.labels.insert(id, label);
    }

    /// Reads `head<TAB>relation<TAB>tail` rows.
    pub fn read_triples(&mut self, reader: impl BufRead) -> Result<(), KgError> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let row = line.strip_suffix('\r').unwrap_or(&line);
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != 3 {
                return Err(KgError::Malformed {
                    kind: "triple",
                    line: i + 1,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(KgError::Malformed {
                    kind: "triple",
                    line: i + 1,
                    reason: "empty id field".to_owned(),
                });
            }
            self.add_triple(
                fields[0].to_owned(),
                fields[1].to_owned(),
                fields[2].to_owned(),
            );
        }
        Ok(())
    }

    /// Reads `id<TAB>label` rows. Referenced ids are validated against the
    /// registered entities and relations when the graph is finished.
    pub fn read_labels(&mut self, reader: impl BufRead) -> Result<(), KgError> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let row = line.strip_suffix('\r').unwrap_or(&line);
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != 2 {
                return Err(KgError::Malformed {
                    kind: "label",
                    line: i + 1,
                    reason: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields[0].is_empty() {
                return Err(KgError::Malformed {
                    kind: "label",
                    line: i + 1,
                    reason: "empty id field".to_owned(),
                });
            }
            self.add_label(fields[0].to_owned(), fields[1].to_owned());
        }
        Ok(())
    }

    pub fn finish(self) -> Result<KnowledgeGraph, KgError> {
        for (h, r, t) in &self.triples {
            if h.is_empty() || r.is_empty() || t.is_empty() {
                return Err(KgError::InvalidArgument(format!(
                    "empty id in triple ({h:?}, {r:?}, {t:?})"
                )));
            }
        }

        let mut ent_names: Vec<String> = self
            .triples
            .iter()
            .flat_map(|(h, _, t)| [h.clone(), t.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        ent_names.sort_unstable();
        let mut rel_names: Vec<String> = self
            .triples
            .iter()
            .map(|(_, r, _)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        rel_names.sort_unstable();

        let ent_index: HashMap<String, u32> = ent_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        let rel_index: HashMap<String, u32> = rel_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();

        let mut triples: Vec<[u32; 3]> = self
            .triples
            .iter()
            .map(|(h, r, t)| [ent_index[h], rel_index[r], ent_index[t]])
            .collect();
        triples.sort_unstable();

        let mut ent_labels: Vec<Option<String>> = vec![None; ent_names.len()];
        let mut rel_labels: Vec<Option<String>> = vec![None; rel_names.len()];
        let mut dangling: Vec<String> = Vec::new();
        for (id, label) in &self.labels {
            let mut known = false;
            if let Some(&i) = ent_index.get(id) {
                ent_labels[i as usize] = Some(label.clone());
                known = true;
            }
            if let Some(&i) = rel_index.get(id) {
                rel_labels[i as usize] = Some(label.clone());
                known = true;
            }
            if !known {
                dangling.push(id.clone());
            }
        }
        if !dangling.is_empty() {
            return Err(KgError::DanglingLabels { ids: dangling });
        }

        let n = ent_names.len();
        let m = rel_names.len();
        let mut inc_pairs = Vec::with_capacity(triples.len() * 2);
        let mut out_pairs = Vec::with_capacity(triples.len());
        let mut in_pairs = Vec::with_capacity(triples.len());
        let mut rel_pairs = Vec::with_capacity(triples.len());
        for (i, &[h, r, t]) in triples.iter().enumerate() {
            let i = i as u32;
            inc_pairs.push((h, i));
            if t != h {
                inc_pairs.push((t, i));
            }
            out_pairs.push((h, i));
            in_pairs.push((t, i));
            rel_pairs.push((r, i));
        }
        let (inc_off, inc) = csr(n, &inc_pairs);
        let (out_off, out) = csr(n, &out_pairs);
        let (in_off, in_) = csr(n, &in_pairs);
        let (rel_off, rel_tr) = csr(m, &rel_pairs);

        Ok(KnowledgeGraph {
            ent_names,
            ent_index,
            rel_names,
            rel_index,
            triples,
            ent_labels,
            rel_labels,
            inc_off,
            inc,
            out_off,
            out,
            in_off,
            in_,
            rel_off,
            rel_tr,
        })
    }
}

fn csr(buckets: usize, pairs: &[(u32, u32)]) -> (Vec<u32>, Vec<u32>) {
    let mut off = vec![0u32; buckets + 1];
    for &(b, _) in pairs {
        off[b as usize + 1] += 1;
    }
    for i in 0..buckets {
        off[i + 1] += off[i];
    }
    let mut cursor: Vec<u32> = off[..buckets].to_vec();
    let mut vals = vec![0u32; pairs.len()];
    for &(b, v) in pairs {
        vals[cursor[b as usize] as usize] = v;
        cursor[b as usize] += 1;
    }
    (off, vals)
}

/// Immutable, fully indexed knowledge graph.
#[derive(Debug)]
pub struct KnowledgeGraph {
    ent_names: Vec<String>,
    ent_index: HashMap<String, u32>,
    rel_names: Vec<String>,
    rel_index: HashMap<String, u32>,
    /// Distinct `[head, relation, tail]` id triples, sorted.
    triples: Vec<[u32; 3]>,
    ent_labels: Vec<Option<String>>,
    rel_labels: Vec<Option<String>>,
    inc_off: Vec<u32>,
    inc: Vec<u32>,
    out_off: Vec<u32>,
    out: Vec<u32>,
    in_off: Vec<u32>,
    in_: Vec<u32>,
    rel_off: Vec<u32>,
    rel_tr: Vec<u32>,
}

/// Loads a graph from one triple stream plus any number of label streams.
pub fn load_kg<R: BufRead, L: BufRead>(
    triples: R,
    labels: impl IntoIterator<Item = L>,
) -> Result<KnowledgeGraph, KgError> {
    let mut b = KgBuilder::default();
    b.read_triples(triples)?;
    for l in labels {
        b.read_labels(l)?;
    }
    b.finish()
}

impl KnowledgeGraph {
    pub fn builder() -> KgBuilder {
        KgBuilder::default()
    }

    pub fn from_paths(
        triple_path: impl AsRef<Path>,
        label_paths: &[impl AsRef<Path>],
    ) -> Result<Self, KgError> {
        let mut b = KgBuilder::default();
        let tp = triple_path.as_ref();
        b.read_triples(BufReader::new(File::open(tp)?))
            .map_err(|e| annotate(e, tp))?;
        for lp in label_paths {
            let lp = lp.as_ref();
            b.read_labels(BufReader::new(File::open(lp)?))
                .map_err(|e| annotate(e, lp))?;
        }
        b.finish()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn num_entities(&self) -> usize {
        self.ent_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.rel_names.len()
    }

    pub fn contains_entity(&self, id: &EntityId) -> bool {
        self.ent_index.contains_key(id.as_str())
    }

    pub fn contains_relation(&self, id: &RelationId) -> bool {
        self.rel_index.contains_key(id.as_str())
    }

    pub fn contains_triple(&self, triple: &Triple) -> bool {
        let (Some(&h), Some(&r), Some(&t)) = (
            self.ent_index.get(triple.head.as_str()),
            self.rel_index.get(triple.relation.as_str()),
            self.ent_index.get(triple.tail.as_str()),
        ) else {
            return false;
        };
        self.triples.binary_search(&[h, r, t]).is_ok()
    }

    /// Number of incident triples (head or tail), counting multiplicity;
    /// a self-loop counts once.
    pub fn degree(&self, x: &EntityId) -> Result<usize, KgError> {
        let i = self.require_ent(x)?;
        Ok(self.incident(i).len())
    }

    /// Distinct opposite endpoints over incident triples; contains `x` only
    /// if a self-loop exists.
    pub fn neighbors(&self, x: &EntityId) -> Result<BTreeSet<EntityId>, KgError> {
        let i = self.require_ent(x)?;
        Ok(self
            .neighbor_indices(i)
            .into_iter()
            .map(|n| EntityId::new(self.ent_names[n as usize].clone()))
            .collect())
    }

    /// Display label for any id; unknown or unlabeled ids label themselves.
    pub fn label<'a>(&'a self, id: &'a str) -> &'a str {
        if let Some(&i) = self.ent_index.get(id) {
            if let Some(l) = &self.ent_labels[i as usize] {
                return l;
            }
        }
        if let Some(&i) = self.rel_index.get(id) {
            if let Some(l) = &self.rel_labels[i as usize] {
                return l;
            }
        }
        id
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.ent_names.iter().map(|n| EntityId::new(n.clone()))
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.rel_names.iter().map(|n| RelationId::new(n.clone()))
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().map(|&[h, r, t]| {
            Triple::new(
                self.ent_names[h as usize].clone(),
                self.rel_names[r as usize].clone(),
                self.ent_names[t as usize].clone(),
            )
        })
    }

    fn require_ent(&self, x: &EntityId) -> Result<u32, KgError> {
        self.ent_index
            .get(x.as_str())
            .copied()
            .ok_or_else(|| KgError::UnknownEntity(x.as_str().to_owned()))
    }

    pub(crate) fn ent_idx(&self, id: &str) -> Option<u32> {
        self.ent_index.get(id).copied()
    }

    pub(crate) fn rel_idx(&self, id: &str) -> Option<u32> {
        self.rel_index.get(id).copied()
    }

    pub(crate) fn ent_name(&self, i: u32) -> &str {
        &self.ent_names[i as usize]
    }

    pub(crate) fn rel_name(&self, i: u32) -> &str {
        &self.rel_names[i as usize]
    }

    pub(crate) fn triple_ids(&self, idx: u32) -> [u32; 3] {
        self.triples[idx as usize]
    }

    pub(crate) fn triple_count(&self) -> u32 {
        self.triples.len() as u32
    }

    pub(crate) fn materialize(&self, idx: u32) -> Triple {
        let [h, r, t] = self.triple_ids(idx);
        Triple::new(
            self.ent_names[h as usize].clone(),
            self.rel_names[r as usize].clone(),
            self.ent_names[t as usize].clone(),
        )
    }

    pub(crate) fn incident(&self, x: u32) -> &[u32] {
        &self.inc[self.inc_off[x as usize] as usize..self.inc_off[x as usize + 1] as usize]
    }

    pub(crate) fn outgoing(&self, x: u32) -> &[u32] {
        &self.out[self.out_off[x as usize] as usize..self.out_off[x as usize + 1] as usize]
    }

    pub(crate) fn incoming(&self, x: u32) -> &[u32] {
        &self.in_[self.in_off[x as usize] as usize..self.in_off[x as usize + 1] as usize]
    }

    pub(crate) fn with_relation(&self, r: u32) -> &[u32] {
        &self.rel_tr[self.rel_off[r as usize] as usize..self.rel_off[r as usize + 1] as usize]
    }

    pub(crate) fn has_triple_ids(&self, h: u32, r: u32, t: u32) -> bool {
        self.triples.binary_search(&[h, r, t]).is_ok()
    }

    pub(crate) fn triple_index(&self, h: u32, r: u32, t: u32) -> Option<u32> {
        self.triples.binary_search(&[h, r, t]).ok().map(|i| i as u32)
    }

    pub(crate) fn neighbor_indices(&self, x: u32) -> BTreeSet<u32> {
        self.incident(x)
            .iter()
            .map(|&ti| {
                let [h, _, t] = self.triple_ids(ti);
                if h == x {
                    t
                } else {
                    h
                }
            })
            .collect()
    }

    /// Multi-source BFS out to depth `k`; returns per-entity distances
    /// (`u32::MAX` = unreached) and the indices of every triple with an
    /// endpoint at distance ≤ k−1.
    pub(crate) fn khop_indices(&self, seeds: &[u32], k: u32) -> (Vec<u32>, Vec<u32>) {
        let mut dist = vec![u32::MAX; self.ent_names.len()];
        let mut queue = std::collections::VecDeque::new();
        for &s in seeds {
            if dist[s as usize] == u32::MAX {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        let mut tris = BTreeSet::new();
        while let Some(x) = queue.pop_front() {
            let d = dist[x as usize];
            if d >= k {
                continue;
            }
            for &ti in self.incident(x) {
                tris.insert(ti);
                let [h, _, t] = self.triple_ids(ti);
                let o = if h == x { t } else { h };
                if dist[o as usize] == u32::MAX {
                    dist[o as usize] = d + 1;
                    queue.push_back(o);
                }
            }
        }
        (dist, tris.into_iter().collect())
    }
}

fn annotate(e: KgError, path: &Path) -> KgError {
    match e {
        KgError::Malformed { kind, line, reason } => KgError::Malformed {
            kind,
            line,
            reason: format!("{}: {}", path.display(), reason),
        },
        other => other,
    }
}

fn inv_degree_weight(kg: &KnowledgeGraph, x: u32) -> f64 {
    let d = kg.incident(x).len();
    if d == 0 {
        0.0
    } else {
        (1.0 / d as f64).exp()
    }
}

fn softmax_pick<R: Rng>(rng: &mut R, candidates: &[u32], weights: &[f64]) -> Option<u32> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random_range(0.0..total);
    let mut last = None;
    for (&c, &w) in candidates.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        last = Some(c);
        if x < w {
            return Some(c);
        }
        x -= w;
    }
    last
}

/// Random-walk seed-graph sampler.
///
/// Starting from `start`, repeatedly picks a visited node to expand with
/// probability proportional to softmax of inverse degree, then picks one of
/// its unvisited neighbors the same way and admits every triple between the
/// newcomer and the visited set (both directions). Stops at the configured
/// node/edge limits or when no visited node has an unseen neighbor.
/// Deterministic for a fixed graph, start, and `rng_seed`.
pub fn sample_seed_graph(
    kg: &KnowledgeGraph,
    start: &EntityId,
    cfg: &SamplerConfig,
) -> Result<Subgraph, KgError> {
    if cfg.node_limit == 0 || cfg.edge_limit == 0 {
        return Err(KgError::InvalidArgument(
            "node_limit and edge_limit must be ≥ 1".to_owned(),
        ));
    }
    let start_i = kg
        .ent_idx(start.as_str())
        .ok_or_else(|| KgError::UnknownEntity(start.as_str().to_owned()))?;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
    let mut nodes: BTreeSet<u32> = BTreeSet::from([start_i]);
    let mut tris: BTreeSet<u32> = BTreeSet::new();

    while nodes.len() < cfg.node_limit && tris.len() < cfg.edge_limit {
        let exhausted = !nodes.iter().any(|&x| {
            kg.incident(x).iter().any(|&ti| {
                let [h, _, t] = kg.triple_ids(ti);
                let o = if h == x { t } else { h };
                !nodes.contains(&o)
            })
        });
        if exhausted {
            break;
        }

        let visited: Vec<u32> = nodes.iter().copied().collect();
        let weights: Vec<f64> = visited.iter().map(|&x| inv_degree_weight(kg, x)).collect();
        let Some(z) = softmax_pick(&mut rng, &visited, &weights) else {
            break;
        };
        let fresh: Vec<u32> = kg
            .neighbor_indices(z)
            .into_iter()
            .filter(|o| !nodes.contains(o))
            .collect();
        if fresh.is_empty() {
            continue;
        }
        let weights: Vec<f64> = fresh.iter().map(|&x| inv_degree_weight(kg, x)).collect();
        let Some(n) = softmax_pick(&mut rng, &fresh, &weights) else {
            continue;
        };
        for &ti in kg.incident(n) {
            let [h, _, t] = kg.triple_ids(ti);
            let o = if h == n { t } else { h };
            if nodes.contains(&o) {
                tris.insert(ti);
            }
        }
        nodes.insert(n);
    }

    Ok(Subgraph {
        nodes: nodes
            .into_iter()
            .map(|i| EntityId::new(kg.ent_name(i).to_owned()))
            .collect(),
        triples: tris.into_iter().map(|ti| kg.materialize(ti)).collect(),
    })
}

/// Undirected k-hop neighborhood of a seed set: every triple lying on a path
/// of at most `k` edges from a seed (both endpoints within distance `k`),
/// plus the seeds themselves as nodes.
pub fn khop_neighborhood(
    kg: &KnowledgeGraph,
    seeds: &BTreeSet<EntityId>,
    k: u32,
) -> Result<Subgraph, KgError> {
    if k == 0 {
        return Err(KgError::InvalidArgument("k must be ≥ 1".to_owned()));
    }
    let mut seed_idx = Vec::with_capacity(seeds.len());
    for s in seeds {
        seed_idx.push(
            kg.ent_idx(s.as_str())
                .ok_or_else(|| KgError::UnknownEntity(s.as_str().to_owned()))?,
        );
    }
    let (_, tris) = kg.khop_indices(&seed_idx, k);
    let mut nodes: BTreeSet<EntityId> = seeds.clone();
    let mut triples = BTreeSet::new();
    for ti in tris {
        let t = kg.materialize(ti);
        nodes.insert(t.head.clone());
        nodes.insert(t.tail.clone());
        triples.insert(t);
    }
    Ok(Subgraph { nodes, triples })
}
