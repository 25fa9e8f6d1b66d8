//! Question-specific retrieval graphs, shortest-path analytics, and
//! supervision exports.
//!
//! Retrieval graphs start from the full undirected k-hop neighborhood of
//! the seed entities and are pruned to the edges connecting the nodes with
//! the top Personalized PageRank scores. Ground-truth edges dropped by
//! pruning are re-added so perfect retrieval stays possible, and confounder
//! edges along seed-anchored paths matching the ground-truth metapaths are
//! added to keep the task challenging. Shortest-path analytics quantify how
//! far minimal seed-to-answer paths diverge from the ground-truth subgraph
//! (shortcuts and parallel paths), and supervision exports emit either the
//! ground-truth paths or the shortest paths as retriever training targets.
//!
//! Answer sets and full answer subgraphs are recomputed on the knowledge
//! graph passed to each operation by evaluating the datapoint's stored
//! query, so the same datapoint can be analyzed against any snapshot;
//! constants missing from the snapshot simply produce empty results.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{khop_neighborhood, KgError, KnowledgeGraph, Subgraph};
use crate::pipeline::ValidatedDatapoint;
use crate::sparql::{eval_construct, eval_select, parse_query, to_construct};
use crate::types::{EntityId, RelationId, Triple};

const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid analysis argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Kg(#[from] KgError),
}

/// Traversal orientation of one metapath or relation-path step relative to
/// the stored triple: `Forward` walks head to tail, `Backward` tail to head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Relation/direction sequence of a path, as walked from its start node.
pub type Metapath = Vec<(RelationId, Direction)>;

/// Knobs for retrieval-graph construction and the PageRank run inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalGraphConfig {
    /// Neighborhood depth; questions needing more hops deepen it to their
    /// hop count so the ground truth is always inside the neighborhood.
    pub hop_depth: u32,
    /// Keep edges whose endpoints both rank in this many top-scored nodes.
    pub top_nodes: usize,
    /// Maximum edges kept by pruning; mandated re-adds and confounders may
    /// push the final count above it.
    pub edge_cap: usize,
    pub damping: f64,
    pub ppr_tolerance: f64,
    pub ppr_max_iters: usize,
    /// Confounder instances enumerated per metapath before truncating.
    pub metapath_cap: usize,
}

impl Default for RetrievalGraphConfig {
    fn default() -> Self {
        RetrievalGraphConfig {
            hop_depth: 3,
            top_nodes: 2500,
            edge_cap: 30_000,
            damping: 0.85,
            ppr_tolerance: 1e-8,
            ppr_max_iters: 100,
            metapath_cap: 512,
        }
    }
}

impl RetrievalGraphConfig {
    fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: &str| Err(AnalysisError::InvalidArgument(msg.to_owned()));
        if self.hop_depth == 0 {
            return bad("hop_depth must be at least 1");
        }
        if self.top_nodes == 0 || self.edge_cap == 0 || self.metapath_cap == 0 {
            return bad("top_nodes, edge_cap, and metapath_cap must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie strictly between 0 and 1");
        }
        if !(self.ppr_tolerance > 0.0) || !self.ppr_tolerance.is_finite() {
            return bad("ppr_tolerance must be a positive real");
        }
        if self.ppr_max_iters == 0 {
            return bad("ppr_max_iters must be at least 1");
        }
        Ok(())
    }
}

/// How an edge earned its place in a retrieval graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeProvenance {
    /// Survived PageRank pruning and the edge cap.
    PrunedKept,
    /// Ground-truth edge dropped by pruning and re-added.
    ReaddedGt,
    /// Added by metapath confounder enumeration.
    Confounder,
}

/// Question-specific graph for retrievers, with per-edge provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalGraph {
    pub edges: BTreeMap<Triple, EdgeProvenance>,
    /// True when any confounder metapath hit the enumeration cap.
    pub truncated: bool,
}

impl RetrievalGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> BTreeSet<EntityId> {
        self.edges
            .keys()
            .flat_map(|t| [t.head.clone(), t.tail.clone()])
            .collect()
    }
}

/// Edges on paths realizing one metapath from one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetapathInstances {
    pub triples: BTreeSet<Triple>,
    /// Total complete instances, counted even when enumeration truncates.
    pub instances: u64,
    /// True when only the first `cap` instances contributed triples.
    pub truncated: bool,
}

/// Per-seed shortest-path facts relative to the ground-truth path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPathStats {
    pub seed: EntityId,
    /// Length of the unique tree path from this seed to the answer node.
    pub gt_path_length: usize,
    /// Graph distance from this seed to the answer node; `None` when
    /// unreachable (or either endpoint is absent from the graph).
    pub sp_length: Option<usize>,
    /// True when the shortest path is strictly shorter than the
    /// ground-truth path.
    pub shortcut: bool,
    /// Number of distinct minimal-length paths to the answer node.
    pub parallel_path_count: u64,
}

/// Overlap between ground-truth triples and shortest-path triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub per_seed: Vec<SeedPathStats>,
    /// 100 · |G ∩ SP| / |G|.
    pub pct_gt_in_sp: f64,
    /// 100 · |SP ∩ G| / |SP|; 100 when the SP set is empty.
    pub pct_sp_in_gt: f64,
    pub n_gt_triples: usize,
    pub n_sp_triples: usize,
}

/// Which paths a supervision export teaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisionMode {
    Gt,
    Sp,
}

/// Relation paths and triples for one (seed, answer) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionTarget {
    pub seed: EntityId,
    pub answer: EntityId,
    /// Deduplicated, sorted relation/direction sequences.
    pub relation_paths: Vec<Metapath>,
    pub triples: BTreeSet<Triple>,
}

/// Supervision targets for one datapoint, in stable order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionExport {
    pub mode: SupervisionMode,
    /// Sorted by (seed, answer).
    pub targets: Vec<SupervisionTarget>,
    /// Union of all target triples: G in GT mode, the SP set in SP mode.
    pub triples: BTreeSet<Triple>,
}

/// Personalized PageRank over the undirected multigraph, with the teleport
/// vector uniform over `seeds`.
///
/// Power iteration runs until the L1 change drops below `cfg.ppr_tolerance`
/// or `cfg.ppr_max_iters` is reached; dangling mass is redistributed to the
/// teleport vector, so scores always sum to 1 up to float error and every
/// seed keeps at least (1 − damping) / |seeds|.
pub fn personalized_pagerank(
    graph: &Subgraph,
    seeds: &BTreeSet<EntityId>,
    cfg: &RetrievalGraphConfig,
) -> Result<BTreeMap<EntityId, f64>, AnalysisError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(AnalysisError::InvalidArgument(
            "seed set must be non-empty".to_owned(),
        ));
    }
    let nodes: Vec<&EntityId> = graph.nodes.iter().collect();
    let index: BTreeMap<&EntityId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    for seed in seeds {
        if !index.contains_key(seed) {
            return Err(AnalysisError::InvalidArgument(format!(
                "seed {seed} is not a node of the graph"
            )));
        }
    }

    let n = nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &graph.triples {
        let (h, tl) = match (index.get(&t.head), index.get(&t.tail)) {
            (Some(&h), Some(&tl)) => (h, tl),
            _ => {
                return Err(AnalysisError::InvalidArgument(format!(
                    "triple ({} {} {}) has an endpoint outside the graph nodes",
                    t.head, t.relation, t.tail
                )))
            }
        };
        adj[h].push(tl);
        adj[tl].push(h);
    }

    let mut teleport = vec![0.0; n];
    let share = 1.0 / seeds.len() as f64;
    for seed in seeds {
        teleport[index[seed]] = share;
    }

    let d = cfg.damping;
    let mut scores = teleport.clone();
    for _ in 0..cfg.ppr_max_iters {
        let dangling: f64 = (0..n)
            .filter(|&i| adj[i].is_empty())
            .map(|i| scores[i])
            .sum();
        let mut next = vec![0.0; n];
        for u in 0..n {
            if adj[u].is_empty() {
                continue;
            }
            let share = scores[u] / adj[u].len() as f64;
            for &v in &adj[u] {
                next[v] += share;
            }
        }
        let mut delta = 0.0;
        for i in 0..n {
            let value = (1.0 - d) * teleport[i] + d * (next[i] + dangling * teleport[i]);
            delta += (value - scores[i]).abs();
            next[i] = value;
        }
        scores = next;
        if delta < cfg.ppr_tolerance {
            break;
        }
    }
    Ok(nodes
        .into_iter()
        .cloned()
        .zip(scores)
        .collect())
}

/// Builds the question-specific retrieval graph for a validated datapoint.
///
/// Pipeline: take the undirected k-hop neighborhood of the seeds (depth =
/// `cfg.hop_depth`, deepened to the question's hop count), score it with
/// personalized PageRank, keep edges whose endpoints both rank in the top
/// `cfg.top_nodes` (ties: score descending, then id), enforce `cfg.edge_cap`
/// by endpoint-score sum (ties: lexicographic triple), re-add any dropped
/// edges of the full answer subgraph, then add confounder edges along
/// seed-anchored paths matching each seed's ground-truth metapath. The full
/// answer subgraph is recomputed on `kg` from the stored query, so the
/// output always contains it.
pub fn build_retrieval_graph(
    kg: &KnowledgeGraph,
    dp: &ValidatedDatapoint,
    cfg: &RetrievalGraphConfig,
) -> Result<RetrievalGraph, AnalysisError> {
    cfg.validate()?;
    let depth = cfg.hop_depth.max(dp.n_hops as u32);
    let neighborhood = khop_neighborhood(kg, &dp.seeds, depth)?;
    let scores = personalized_pagerank(&neighborhood, &dp.seeds, cfg)?;

    let mut ranked: Vec<(&EntityId, f64)> = scores.iter().map(|(n, s)| (n, *s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(cfg.top_nodes);
    let top: BTreeSet<&EntityId> = ranked.into_iter().map(|(n, _)| n).collect();

    let mut kept: Vec<&Triple> = neighborhood
        .triples
        .iter()
        .filter(|t| top.contains(&t.head) && top.contains(&t.tail))
        .collect();
    if kept.len() > cfg.edge_cap {
        kept.sort_by(|a, b| {
            let ra = scores[&a.head] + scores[&a.tail];
            let rb = scores[&b.head] + scores[&b.tail];
            rb.total_cmp(&ra).then_with(|| a.cmp(b))
        });
        kept.truncate(cfg.edge_cap);
    }
    let mut edges: BTreeMap<Triple, EdgeProvenance> = kept
        .into_iter()
        .map(|t| (t.clone(), EdgeProvenance::PrunedKept))
        .collect();

    let full = full_answer_subgraph(kg, dp)?;
    for t in full {
        edges.entry(t).or_insert(EdgeProvenance::ReaddedGt);
    }

    let mut truncated = false;
    for (seed, path) in gt_paths(dp)? {
        let metapath: Metapath = path
            .iter()
            .map(|(t, dir)| (t.relation.clone(), *dir))
            .collect();
        let found = enumerate_metapath_instances(kg, &seed, &metapath, cfg.metapath_cap);
        truncated |= found.truncated;
        for t in found.triples {
            edges.entry(t).or_insert(EdgeProvenance::Confounder);
        }
    }
    Ok(RetrievalGraph { edges, truncated })
}

/// Enumerates the edges on paths from `seed` that realize `metapath`
/// exactly, step by step.
///
/// At most `cap` complete instances contribute edges; enumeration is
/// deterministic (sorted-triple order) and sets `truncated` when more
/// instances exist. An unknown seed, relation, or empty metapath yields no
/// instances.
pub fn enumerate_metapath_instances(
    kg: &KnowledgeGraph,
    seed: &EntityId,
    metapath: &[(RelationId, Direction)],
    cap: usize,
) -> MetapathInstances {
    let empty = MetapathInstances {
        triples: BTreeSet::new(),
        instances: 0,
        truncated: false,
    };
    let seed_idx = match kg.ent_idx(seed.as_str()) {
        Some(idx) => idx,
        None => return empty,
    };
    if metapath.is_empty() {
        return empty;
    }

    // Forward sweep: per-level matching edges as (from, triple, to).
    let mut levels: Vec<Vec<(u32, u32, u32)>> = Vec::with_capacity(metapath.len());
    let mut frontier = BTreeSet::from([seed_idx]);
    for (relation, direction) in metapath {
        let rel_idx = match kg.rel_idx(relation.as_str()) {
            Some(idx) => idx,
            None => return empty,
        };
        let mut level = Vec::new();
        let mut next = BTreeSet::new();
        for &u in &frontier {
            let candidates = match direction {
                Direction::Forward => kg.outgoing(u),
                Direction::Backward => kg.incoming(u),
            };
            for &ti in candidates {
                let [h, r, t] = kg.triple_ids(ti);
                if r != rel_idx {
                    continue;
                }
                let v = match direction {
                    Direction::Forward => t,
                    Direction::Backward => h,
                };
                level.push((u, ti, v));
                next.insert(v);
            }
        }
        if level.is_empty() {
            return empty;
        }
        levels.push(level);
        frontier = next;
    }

    // Backward prune so every surviving edge lies on a complete instance.
    let mut alive: BTreeSet<u32> = frontier;
    for level in levels.iter_mut().rev() {
        level.retain(|(_, _, v)| alive.contains(v));
        level.sort_by_key(|&(u, ti, _)| (u, ti));
        alive = level.iter().map(|&(u, _, _)| u).collect();
    }

    // Instance count per level node, folded back to front.
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for (depth, level) in levels.iter().enumerate().rev() {
        let mut here: BTreeMap<u32, u64> = BTreeMap::new();
        for &(u, _, v) in level {
            let below = if depth + 1 == levels.len() {
                1
            } else {
                counts.get(&v).copied().unwrap_or(0)
            };
            *here.entry(u).or_insert(0) = here
                .get(&u)
                .copied()
                .unwrap_or(0)
                .saturating_add(below);
        }
        counts = here;
    }
    let instances = counts.get(&seed_idx).copied().unwrap_or(0);

    let mut triples = BTreeSet::new();
    if instances as u128 <= cap as u128 {
        for level in &levels {
            for &(_, ti, _) in level {
                triples.insert(kg.materialize(ti));
            }
        }
        return MetapathInstances {
            triples,
            instances,
            truncated: false,
        };
    }

    // Over the cap: depth-first in sorted order, keep the first `cap`
    // complete instances' edges.
    let by_from: Vec<BTreeMap<u32, Vec<(u32, u32)>>> = levels
        .iter()
        .map(|level| {
            let mut map: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
            for &(u, ti, v) in level {
                map.entry(u).or_default().push((ti, v));
            }
            map
        })
        .collect();
    let mut stack: Vec<u32> = Vec::with_capacity(metapath.len());
    let mut taken = 0usize;
    fn dfs(
        by_from: &[BTreeMap<u32, Vec<(u32, u32)>>],
        depth: usize,
        node: u32,
        stack: &mut Vec<u32>,
        taken: &mut usize,
        cap: usize,
        out: &mut BTreeSet<u32>,
    ) {
        if depth == by_from.len() {
            *taken += 1;
            out.extend(stack.iter().copied());
            return;
        }
        let Some(edges) = by_from[depth].get(&node) else {
            return;
        };
        for &(ti, v) in edges {
            if *taken >= cap {
                return;
            }
            stack.push(ti);
            dfs(by_from, depth + 1, v, stack, taken, cap, out);
            stack.pop();
        }
    }
    let mut out = BTreeSet::new();
    dfs(&by_from, 0, seed_idx, &mut stack, &mut taken, cap, &mut out);
    MetapathInstances {
        triples: out.into_iter().map(|ti| kg.materialize(ti)).collect(),
        instances,
        truncated: true,
    }
}

/// All minimal-length paths between two entities, each path reported as its
/// original directed triples in walk order.
///
/// Search is undirected unless `directed` is set. Returns `(None, [])` when
/// the answer is unreachable; identical endpoints give length 0 and one
/// empty path.
#[allow(clippy::type_complexity)]
pub fn all_shortest_paths(
    kg: &KnowledgeGraph,
    seed: &EntityId,
    answer: &EntityId,
    directed: bool,
) -> Result<(Option<usize>, Vec<Vec<Triple>>), AnalysisError> {
    let s = kg
        .ent_idx(seed.as_str())
        .ok_or_else(|| KgError::UnknownEntity(seed.as_str().to_owned()))?;
    let a = kg
        .ent_idx(answer.as_str())
        .ok_or_else(|| KgError::UnknownEntity(answer.as_str().to_owned()))?;

    let ds = bfs_dist(kg, s, directed, false);
    if ds[a as usize] == UNREACHED {
        return Ok((None, Vec::new()));
    }
    let da = bfs_dist(kg, a, directed, true);
    let total = ds[a as usize];

    let mut paths = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    enumerate_paths(kg, s, a, 0, total, &da, directed, &mut stack, &mut paths);
    let paths = paths
        .into_iter()
        .map(|p| p.into_iter().map(|ti| kg.materialize(ti)).collect())
        .collect();
    Ok((Some(total as usize), paths))
}

/// Shortest-path overlap statistics for a validated datapoint.
///
/// The SP triple set is the union, over every (seed, answer) pair with the
/// answer drawn from the query's answer set on `kg`, of all triples lying
/// on some minimal-length path. Per-seed stats are taken against the
/// datapoint's answer node. Search is undirected unless `directed` is set.
pub fn sp_gt_overlap(
    kg: &KnowledgeGraph,
    dp: &ValidatedDatapoint,
    directed: bool,
) -> Result<OverlapStats, AnalysisError> {
    let answers = answer_set(kg, dp)?;
    let gt_lengths: BTreeMap<EntityId, usize> = gt_paths(dp)?
        .into_iter()
        .map(|(seed, path)| (seed, path.len()))
        .collect();

    let mut sp_triples: BTreeSet<u32> = BTreeSet::new();
    let mut per_seed = Vec::with_capacity(dp.seeds.len());
    for seed in &dp.seeds {
        let gt_path_length = gt_lengths[seed];
        let seed_idx = kg.ent_idx(seed.as_str());
        let answer_idx = kg.ent_idx(dp.answer_node.as_str());

        let (sp_length, parallel_path_count) = match (seed_idx, answer_idx) {
            (Some(s), Some(a)) => {
                let ds = bfs_dist(kg, s, directed, false);
                if ds[a as usize] == UNREACHED {
                    (None, 0)
                } else {
                    (Some(ds[a as usize] as usize), count_paths(kg, s, a, directed))
                }
            }
            _ => (None, 0),
        };
        per_seed.push(SeedPathStats {
            seed: seed.clone(),
            gt_path_length,
            sp_length,
            shortcut: sp_length.is_some_and(|sp| sp < gt_path_length),
            parallel_path_count,
        });

        if let Some(s) = seed_idx {
            for answer in &answers {
                if let Some(a) = kg.ent_idx(answer.as_str()) {
                    sp_triples.extend(pair_sp_triples(kg, s, a, directed));
                }
            }
        }
    }

    let sp: BTreeSet<Triple> = sp_triples.into_iter().map(|ti| kg.materialize(ti)).collect();
    let overlap = dp.gt_subgraph.intersection(&sp).count();
    let pct = |num: usize, den: usize| {
        if den == 0 {
            100.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    Ok(OverlapStats {
        per_seed,
        pct_gt_in_sp: pct(overlap, dp.gt_subgraph.len()),
        pct_sp_in_gt: pct(overlap, sp.len()),
        n_gt_triples: dp.gt_subgraph.len(),
        n_sp_triples: sp.len(),
    })
}

/// Exports retriever supervision targets for a datapoint.
///
/// GT mode emits, per seed, the unique tree path to the answer node as a
/// relation/direction sequence plus its triples; the export union is the
/// ground-truth subgraph. SP mode enumerates all minimal-length paths per
/// (seed, answer) pair, with answers drawn from the query's answer set on
/// `kg`; unreachable pairs yield empty targets. Output order is stable.
pub fn export_supervision(
    dp: &ValidatedDatapoint,
    kg: &KnowledgeGraph,
    mode: SupervisionMode,
    directed: bool,
) -> Result<SupervisionExport, AnalysisError> {
    let mut targets = Vec::new();
    let mut union = BTreeSet::new();
    match mode {
        SupervisionMode::Gt => {
            for (seed, path) in gt_paths(dp)? {
                let relation_path: Metapath = path
                    .iter()
                    .map(|(t, dir)| (t.relation.clone(), *dir))
                    .collect();
                let triples: BTreeSet<Triple> = path.into_iter().map(|(t, _)| t).collect();
                targets.push(SupervisionTarget {
                    seed,
                    answer: dp.answer_node.clone(),
                    relation_paths: vec![relation_path],
                    triples,
                });
            }
            union = dp.gt_subgraph.clone();
        }
        SupervisionMode::Sp => {
            let answers = answer_set(kg, dp)?;
            for seed in &dp.seeds {
                for answer in &answers {
                    let (_, paths) = all_shortest_paths(kg, seed, answer, directed)?;
                    let mut relation_paths: Vec<Metapath> = paths
                        .iter()
                        .map(|path| oriented_metapath(seed, path))
                        .collect();
                    relation_paths.sort();
                    relation_paths.dedup();
                    let triples: BTreeSet<Triple> =
                        paths.into_iter().flatten().collect();
                    union.extend(triples.iter().cloned());
                    targets.push(SupervisionTarget {
                        seed: seed.clone(),
                        answer: answer.clone(),
                        relation_paths,
                        triples,
                    });
                }
            }
        }
    }
    Ok(SupervisionExport {
        mode,
        targets,
        triples: union,
    })
}

/// BFS distances from `start`; `reverse` flips edge direction in directed
/// mode and is ignored otherwise.
fn bfs_dist(kg: &KnowledgeGraph, start: u32, directed: bool, reverse: bool) -> Vec<u32> {
    let mut dist = vec![UNREACHED; kg.num_entities()];
    dist[start as usize] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize];
        let edges = if directed {
            if reverse {
                kg.incoming(u)
            } else {
                kg.outgoing(u)
            }
        } else {
            kg.incident(u)
        };
        for &ti in edges {
            let [h, _, t] = kg.triple_ids(ti);
            let v = if directed {
                if reverse {
                    h
                } else {
                    t
                }
            } else if h == u {
                t
            } else {
                h
            };
            if dist[v as usize] == UNREACHED {
                dist[v as usize] = d + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Depth-first walk over the shortest-path DAG, guided by distances to the
/// answer so only productive branches are explored.
#[allow(clippy::too_many_arguments)]
fn enumerate_paths(
    kg: &KnowledgeGraph,
    u: u32,
    answer: u32,
    depth: u32,
    total: u32,
    da: &[u32],
    directed: bool,
    stack: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if depth == total {
        if u == answer {
            out.push(stack.clone());
        }
        return;
    }
    let remaining = total - depth - 1;
    let edges = if directed {
        kg.outgoing(u)
    } else {
        kg.incident(u)
    };
    // CSR slices are sorted by triple index, so the walk is deterministic.
    for &ti in edges {
        let [h, _, t] = kg.triple_ids(ti);
        let v = if directed {
            t
        } else if h == u {
            t
        } else {
            h
        };
        if da[v as usize] != remaining {
            continue;
        }
        stack.push(ti);
        enumerate_paths(kg, v, answer, depth + 1, total, da, directed, stack, out);
        stack.pop();
    }
}

/// Number of distinct minimal-length paths between two reachable entities,
/// counting parallel edges separately; saturates at u64::MAX.
fn count_paths(kg: &KnowledgeGraph, s: u32, a: u32, directed: bool) -> u64 {
    let ds = bfs_dist(kg, s, directed, false);
    if ds[a as usize] == UNREACHED {
        return 0;
    }
    let mut order: Vec<u32> = (0..kg.num_entities() as u32)
        .filter(|&v| ds[v as usize] != UNREACHED && ds[v as usize] <= ds[a as usize])
        .collect();
    order.sort_by_key(|&v| ds[v as usize]);
    let mut count = vec![0u64; kg.num_entities()];
    count[s as usize] = 1;
    for &u in &order {
        if count[u as usize] == 0 {
            continue;
        }
        let edges = if directed {
            kg.outgoing(u)
        } else {
            kg.incident(u)
        };
        for &ti in edges {
            let [h, _, t] = kg.triple_ids(ti);
            let v = if directed {
                t
            } else if h == u {
                t
            } else {
                h
            };
            if ds[v as usize] == ds[u as usize] + 1 {
                count[v as usize] = count[v as usize].saturating_add(count[u as usize]);
            }
        }
    }
    count[a as usize]
}

/// Triples lying on some minimal-length path from `s` to `a`: an edge
/// qualifies iff the distances through it add up to the pair distance.
fn pair_sp_triples(kg: &KnowledgeGraph, s: u32, a: u32, directed: bool) -> BTreeSet<u32> {
    let ds = bfs_dist(kg, s, directed, false);
    if ds[a as usize] == UNREACHED {
        return BTreeSet::new();
    }
    let da = bfs_dist(kg, a, directed, true);
    let total = ds[a as usize];
    let on_sp = |x: u32, y: u32| {
        ds[x as usize] != UNREACHED
            && da[y as usize] != UNREACHED
            && ds[x as usize] + 1 + da[y as usize] == total
    };
    (0..kg.triple_count())
        .filter(|&ti| {
            let [h, _, t] = kg.triple_ids(ti);
            on_sp(h, t) || (!directed && on_sp(t, h))
        })
        .collect()
}

/// The query's answer set on `kg`, recomputed from the stored text.
fn answer_set(
    kg: &KnowledgeGraph,
    dp: &ValidatedDatapoint,
) -> Result<BTreeSet<EntityId>, AnalysisError> {
    let ast = parse_query(&dp.sparql_text)
        .map_err(|err| AnalysisError::InvalidArgument(format!("datapoint query: {err}")))?;
    eval_select(kg, &ast)
        .map_err(|err| AnalysisError::InvalidArgument(format!("datapoint query: {err}")))
}

/// The query's full answer subgraph on `kg`, recomputed from the stored
/// text.
fn full_answer_subgraph(
    kg: &KnowledgeGraph,
    dp: &ValidatedDatapoint,
) -> Result<BTreeSet<Triple>, AnalysisError> {
    let ast = parse_query(&dp.sparql_text)
        .map_err(|err| AnalysisError::InvalidArgument(format!("datapoint query: {err}")))?;
    eval_construct(kg, &to_construct(&ast))
        .map_err(|err| AnalysisError::InvalidArgument(format!("datapoint query: {err}")))
}

/// Unique tree path from every seed to the answer node over the
/// ground-truth subgraph, as (triple, traversal direction) steps.
fn gt_paths(
    dp: &ValidatedDatapoint,
) -> Result<BTreeMap<EntityId, Vec<(Triple, Direction)>>, AnalysisError> {
    let mut adjacency: BTreeMap<&EntityId, Vec<(&Triple, &EntityId, Direction)>> = BTreeMap::new();
    for t in &dp.gt_subgraph {
        adjacency
            .entry(&t.head)
            .or_default()
            .push((t, &t.tail, Direction::Forward));
        adjacency
            .entry(&t.tail)
            .or_default()
            .push((t, &t.head, Direction::Backward));
    }

    let mut paths = BTreeMap::new();
    for seed in &dp.seeds {
        let mut parent: BTreeMap<&EntityId, (&Triple, &EntityId, Direction)> = BTreeMap::new();
        let mut queue = VecDeque::from([seed]);
        let mut seen = BTreeSet::from([seed]);
        while let Some(u) = queue.pop_front() {
            if *u == dp.answer_node {
                break;
            }
            for &(t, v, dir) in adjacency.get(u).into_iter().flatten() {
                if seen.insert(v) {
                    parent.insert(v, (t, u, dir));
                    queue.push_back(v);
                }
            }
        }
        let mut steps = Vec::new();
        let mut node = &dp.answer_node;
        while node != seed {
            let &(t, prev, dir) = parent.get(node).ok_or_else(|| {
                AnalysisError::InvalidArgument(format!(
                    "ground-truth subgraph does not connect seed {seed} to the answer"
                ))
            })?;
            steps.push((t.clone(), dir));
            node = prev;
        }
        steps.reverse();
        paths.insert(seed.clone(), steps);
    }
    Ok(paths)
}

/// Relation/direction sequence of a path as walked from `start`.
fn oriented_metapath(start: &EntityId, path: &[Triple]) -> Metapath {
    let mut current = start.clone();
    path.iter()
        .map(|t| {
            if t.head == current {
                current = t.tail.clone();
                (t.relation.clone(), Direction::Forward)
            } else {
                current = t.head.clone();
                (t.relation.clone(), Direction::Backward)
            }
        })
        .collect()
}
