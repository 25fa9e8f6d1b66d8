//! Command-line entry point tying the library modules together.
//!
//! Every subcommand is a thin composition of library operations: it loads
//! inputs, calls into the crate, and writes files or delimiter-separated
//! tables. Failures print a single machine-readable JSON object to stderr;
//! exit code 2 marks usage or configuration errors, 1 any other failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kgqa_core::analysis::{
    build_retrieval_graph, export_supervision, sp_gt_overlap, EdgeProvenance, SupervisionExport,
    SupervisionMode,
};
use kgqa_core::config::{AppConfig, ConfigError};
use kgqa_core::evalkit::{
    aggregate_report, answer_node_scores, em_scores, read_retrieval_results, triple_scores,
    DatapointMeta, EvalRecord, GroupBy, RetrievalResult, TripleMatchMode,
};
use kgqa_core::gateway::{Gateway, HttpProvider, ReplayProvider};
use kgqa_core::kg::KnowledgeGraph;
use kgqa_core::pipeline::run_pipeline;
use kgqa_core::records::{read_records, write_records, DatapointRecord};
use kgqa_core::sparql::{eval_construct, eval_select, parse_query, to_construct};
use kgqa_core::split::{design_split, validate_split};
use kgqa_core::stats::dataset_stats;
use kgqa_core::taxonomy::{analyze_redundancy, isomorphism_code, n_hops, AnswerTree};
use kgqa_core::types::{parse_labeled, EntityId, Triple};

#[derive(Parser)]
#[command(
    name = "kgqa",
    version,
    about = "Dataset generation, validation, analysis, and evaluation for KGQA benchmarks"
)]
struct Cli {
    /// Configuration file (TOML). Command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate validated datapoints from a knowledge graph.
    Generate(GenerateArgs),
    /// Audit a record file, optionally re-checking every field against a KG.
    Validate(ValidateArgs),
    /// Recompute isomorphism codes and hop counts for a record file.
    Classify(InOutArgs),
    /// Recompute redundancy fields for a record file against a KG.
    Redundancy(RedundancyArgs),
    /// Build pruned per-question retrieval graphs.
    BuildRetrievalGraphs(BuildGraphsArgs),
    /// Compare shortest paths against ground-truth paths.
    AnalyzePaths(AnalyzePathsArgs),
    /// Export supervision targets for retriever training.
    ExportSupervision(ExportSupervisionArgs),
    /// Design a train/test split, or audit one with --check.
    Split(SplitArgs),
    /// Print dataset statistics for a record file.
    Stats(StatsArgs),
    /// Score retrieval results against a dataset and aggregate a report.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct KgArgs {
    /// Knowledge-graph triples file (TSV: head, relation, tail).
    #[arg(long = "kg-triples")]
    kg_triples: PathBuf,
    /// Label file (TSV: id, label); repeatable.
    #[arg(long = "kg-labels")]
    kg_labels: Vec<PathBuf>,
}

impl KgArgs {
    fn load(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::from_paths(&self.kg_triples, &self.kg_labels)
            .with_context(|| format!("loading knowledge graph {}", self.kg_triples.display()))
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Number of accepted datapoints to produce.
    #[arg(long)]
    target: usize,
    /// Output record file (one JSON object per line).
    #[arg(long)]
    out: PathBuf,
    /// Optional rejection log (one JSON object per line).
    #[arg(long)]
    rejections: Option<PathBuf>,
    /// Replay bank serving scripted replies instead of HTTP calls.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Master seed for deterministic candidate derivation.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Candidate budget before giving up.
    #[arg(long)]
    budget: Option<usize>,
    /// Seed-graph sampler node limit.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Seed-graph sampler edge limit.
    #[arg(long)]
    edge_limit: Option<usize>,
    /// Key under which this KG's answers are recorded.
    #[arg(long = "kg-name")]
    kg_name: Option<String>,
    /// Rewrite accepted questions with the paraphrase prompt.
    #[arg(long, overrides_with = "no_paraphrase")]
    paraphrase: bool,
    #[arg(long, hide_short_help = true)]
    no_paraphrase: bool,
    /// Gate accepted candidates on the answerability judge.
    #[arg(long, overrides_with = "no_judge")]
    judge: bool,
    #[arg(long, hide_short_help = true)]
    no_judge: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Record file to audit.
    #[arg(long = "in")]
    input: PathBuf,
    /// Knowledge-graph triples file; enables content re-checking.
    #[arg(long = "kg-triples")]
    kg_triples: Option<PathBuf>,
    /// Label file; repeatable.
    #[arg(long = "kg-labels")]
    kg_labels: Vec<PathBuf>,
    /// Answer column to compare against the KG.
    #[arg(long = "kg-name")]
    kg_name: Option<String>,
    /// Write the per-record table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InOutArgs {
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output record file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RedundancyArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output record file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildGraphsArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file (one JSON graph per line).
    #[arg(long)]
    out: PathBuf,
    /// Neighborhood hop depth.
    #[arg(long)]
    hop_depth: Option<u32>,
    /// Node budget for PageRank pruning.
    #[arg(long)]
    top_nodes: Option<usize>,
    /// Edge cap after pruning.
    #[arg(long)]
    edge_cap: Option<usize>,
    /// Confounder instance cap per metapath.
    #[arg(long)]
    metapath_cap: Option<usize>,
}

#[derive(Args)]
struct AnalyzePathsArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Respect edge direction instead of walking undirected.
    #[arg(long)]
    directed: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportSupervisionArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file (one JSON export per line).
    #[arg(long)]
    out: PathBuf,
    /// Which paths to teach.
    #[arg(long, value_enum, default_value_t = ModeArg::Gt)]
    mode: ModeArg,
    /// Respect edge direction instead of walking undirected.
    #[arg(long)]
    directed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gt,
    Sp,
}

#[derive(Args)]
struct SplitArgs {
    /// Pool of records to partition (design mode).
    #[arg(long = "in", conflicts_with = "check", required_unless_present = "check")]
    input: Option<PathBuf>,
    /// Train records: output in design mode, input with --check.
    #[arg(long)]
    train: PathBuf,
    /// Test records: output in design mode, input with --check.
    #[arg(long)]
    test: PathBuf,
    /// Audit existing train/test files instead of designing a split.
    #[arg(long)]
    check: bool,
    /// Write the design report here as well as stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Size of the train relation vocabulary.
    #[arg(long)]
    top_k: Option<usize>,
    /// Minimum questions per populated test cell.
    #[arg(long)]
    min_per_category: Option<usize>,
    /// Isomorphism code reserved for test; repeatable.
    #[arg(long = "reserved-iso")]
    reserved_iso: Vec<String>,
    /// Allow redundant questions in test.
    #[arg(long)]
    allow_redundant_test: bool,
    /// Drop the answer-disjointness requirement.
    #[arg(long)]
    no_answer_disjointness: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Input record file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Emit the statistics as one JSON object instead of tables.
    #[arg(long)]
    json: bool,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset record file the results refer to.
    #[arg(long)]
    dataset: PathBuf,
    /// Retrieval results (one JSON object per line).
    #[arg(long)]
    results: PathBuf,
    /// Baseline results for delta columns.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Grouping for the report rows.
    #[arg(long, value_enum, default_value_t = GroupByArg::None)]
    group_by: GroupByArg,
    /// Count inverted edges as matches when scoring triples.
    #[arg(long)]
    inverse_tolerant: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    #[value(name = "none")]
    None,
    #[value(name = "isomorphism")]
    Isomorphism,
    #[value(name = "n_hops")]
    NHops,
    #[value(name = "test_type")]
    TestType,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> GroupBy {
        match g {
            GroupByArg::None => GroupBy::None,
            GroupByArg::Isomorphism => GroupBy::Isomorphism,
            GroupByArg::NHops => GroupBy::NHops,
            GroupByArg::TestType => GroupBy::TestType,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.downcast_ref::<ConfigError>().is_some();
            eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    match cli.command {
        Command::Generate(args) => cmd_generate(cfg, args),
        Command::Validate(args) => cmd_validate(cfg, args),
        Command::Classify(args) => cmd_classify(args),
        Command::Redundancy(args) => cmd_redundancy(args),
        Command::BuildRetrievalGraphs(args) => cmd_build_graphs(cfg, args),
        Command::AnalyzePaths(args) => cmd_analyze_paths(args),
        Command::ExportSupervision(args) => cmd_export_supervision(args),
        Command::Split(args) => cmd_split(cfg, args),
        Command::Stats(args) => cmd_stats(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

/// The id part of a `Label (ID)` field, or the whole field without one.
fn bare(text: &str) -> &str {
    parse_labeled(text).map(|(_, id)| id).unwrap_or(text)
}

fn bare_triple(t: &[String; 3]) -> Triple {
    Triple::new(bare(&t[0]), bare(&t[1]), bare(&t[2]))
}

/// Rebuilds the answer tree of a record from its labeled fields.
fn record_tree(rec: &DatapointRecord) -> AnswerTree {
    AnswerTree::new(
        rec.answer_subgraph.iter().map(bare_triple),
        rec.seed_entities.iter().map(|s| EntityId::new(bare(s))),
        EntityId::new(bare(&rec.answer_node)),
    )
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(cfg: AppConfig, args: GenerateArgs) -> Result<()> {
    let kg = args.kg.load()?;
    let mut pcfg = cfg.pipeline;
    if let Some(seed) = args.seed {
        pcfg.master_seed = seed;
    }
    if let Some(workers) = args.workers {
        pcfg.workers = workers;
    }
    if let Some(budget) = args.budget {
        pcfg.candidate_budget = budget;
    }
    if let Some(node_limit) = args.node_limit {
        pcfg.node_limit = node_limit;
    }
    if let Some(edge_limit) = args.edge_limit {
        pcfg.edge_limit = edge_limit;
    }
    if let Some(name) = args.kg_name {
        pcfg.kg_name = name;
    }
    if args.paraphrase {
        pcfg.paraphrase = true;
    } else if args.no_paraphrase {
        pcfg.paraphrase = false;
    }
    if args.judge {
        pcfg.judge = true;
    } else if args.no_judge {
        pcfg.judge = false;
    }

    let provider: Box<dyn kgqa_core::gateway::ChatProvider> = match &args.replay {
        Some(path) => Box::new(
            ReplayProvider::from_file(path)
                .with_context(|| format!("loading replay bank {}", path.display()))?,
        ),
        None => Box::new(HttpProvider::new(cfg.provider.clone())?),
    };
    let gateway =
        Gateway::new(provider).with_generation_temperature(cfg.provider.temperature);

    let outcome = run_pipeline(&kg, &pcfg, &gateway, args.target)?;

    let records: Vec<DatapointRecord> = outcome
        .accepted
        .iter()
        .map(|dp| DatapointRecord::from_datapoint(dp, |id| Some(kg.label(id).to_owned())))
        .collect();
    write_records(&records, &args.out)?;
    if let Some(path) = &args.rejections {
        write_jsonl(path, &outcome.rejections)?;
    }

    let mut by_reason: BTreeMap<String, usize> = BTreeMap::new();
    for r in &outcome.rejections {
        let key = serde_json::to_value(r.reason)?
            .as_str()
            .unwrap_or("other")
            .to_owned();
        *by_reason.entry(key).or_default() += 1;
    }
    println!(
        "{}",
        serde_json::json!({
            "accepted": outcome.accepted.len(),
            "attempted": outcome.attempted,
            "budget_exhausted": outcome.budget_exhausted,
            "rejections": by_reason,
            "warnings": outcome.warnings,
        })
    );
    Ok(())
}

fn cmd_validate(cfg: AppConfig, args: ValidateArgs) -> Result<()> {
    let records = read_records(&args.input)?;
    let kg = match &args.kg_triples {
        Some(path) => Some(
            KnowledgeGraph::from_paths(path, &args.kg_labels)
                .with_context(|| format!("loading knowledge graph {}", path.display()))?,
        ),
        None => None,
    };
    let kg_name = args.kg_name.unwrap_or(cfg.pipeline.kg_name);

    let mut table = String::from("id\tstatus\tdetail\n");
    let mut failures = 0usize;
    for rec in &records {
        match validate_record(rec, kg.as_ref(), &kg_name) {
            Ok(()) => table.push_str(&format!("{}\tok\t\n", rec.id)),
            Err(detail) => {
                failures += 1;
                table.push_str(&format!("{}\tfail\t{detail}\n", rec.id));
            }
        }
    }
    write_text(args.out.as_deref(), &table)?;
    if failures > 0 {
        bail!("{failures} of {} records failed validation", records.len());
    }
    Ok(())
}

/// Structural checks always run; content checks need a KG.
fn validate_record(
    rec: &DatapointRecord,
    kg: Option<&KnowledgeGraph>,
    kg_name: &str,
) -> std::result::Result<(), String> {
    let dp = rec.to_datapoint().map_err(|e| e.to_string())?;
    let Some(kg) = kg else {
        return Ok(());
    };

    for t in &dp.gt_subgraph {
        if !kg.contains_triple(t) {
            return Err(format!(
                "ground-truth triple ({} {} {}) is not in the graph",
                t.head.as_str(),
                t.relation.as_str(),
                t.tail.as_str()
            ));
        }
    }
    let ast = parse_query(&dp.sparql_text).map_err(|e| e.to_string())?;
    let answers = eval_select(kg, &ast).map_err(|e| e.to_string())?;
    if !answers.contains(&dp.answer_node) {
        return Err(format!(
            "answer {} is not among the query's {} answers",
            dp.answer_node.as_str(),
            answers.len()
        ));
    }
    if let Some(stored) = rec.all_answers.get(kg_name) {
        let stored: BTreeSet<&str> = stored.iter().map(|s| bare(s)).collect();
        let computed: BTreeSet<&str> = answers.iter().map(EntityId::as_str).collect();
        if stored != computed {
            return Err(format!(
                "stored {} answers disagree with the {} recomputed ones",
                stored.len(),
                computed.len()
            ));
        }
    }
    if let Some(stored) = rec.full_answer_subgraph.get(kg_name) {
        let stored: BTreeSet<Triple> = stored.iter().map(bare_triple).collect();
        let computed = eval_construct(kg, &to_construct(&ast)).map_err(|e| e.to_string())?;
        if stored != computed {
            return Err(format!(
                "stored full answer subgraph ({} triples) disagrees with the recomputed one ({})",
                stored.len(),
                computed.len()
            ));
        }
    }
    let tree = record_tree(rec);
    let code = isomorphism_code(&tree).map_err(|e| e.to_string())?;
    if code.as_str() != rec.graph_isomorphism {
        return Err(format!(
            "stored isomorphism {} disagrees with recomputed {}",
            rec.graph_isomorphism,
            code.as_str()
        ));
    }
    if n_hops(&tree) != rec.n_hops {
        return Err(format!(
            "stored n_hops {} disagrees with recomputed {}",
            rec.n_hops,
            n_hops(&tree)
        ));
    }
    let redundancy = analyze_redundancy(kg, &tree, &answers).map_err(|e| e.to_string())?;
    if redundancy.redundant != rec.redundant {
        return Err(format!(
            "stored redundancy flag {} disagrees with recomputed {}",
            rec.redundant, redundancy.redundant
        ));
    }
    Ok(())
}

fn cmd_classify(args: InOutArgs) -> Result<()> {
    let mut records = read_records(&args.input)?;
    for rec in &mut records {
        let tree = record_tree(rec);
        let code = isomorphism_code(&tree)
            .with_context(|| format!("classifying record {}", rec.id))?;
        rec.graph_isomorphism = code.as_str().to_owned();
        rec.n_hops = n_hops(&tree);
    }
    write_records(&records, &args.out)?;
    Ok(())
}

fn cmd_redundancy(args: RedundancyArgs) -> Result<()> {
    let kg = args.kg.load()?;
    let mut records = read_records(&args.input)?;
    for rec in &mut records {
        let tree = record_tree(rec);
        let ast = parse_query(&rec.sparql_query)
            .with_context(|| format!("parsing the query of record {}", rec.id))?;
        let answers = eval_select(&kg, &ast)
            .with_context(|| format!("evaluating the query of record {}", rec.id))?;
        let report = analyze_redundancy(&kg, &tree, &answers)
            .with_context(|| format!("analyzing record {}", rec.id))?;
        rec.redundant = report.redundant;
        rec.minimal_graph_isomorphism =
            report.minimal_isomorphism.map(|c| c.as_str().to_owned());
        rec.minimal_seeds_and_queries = report.minimal_queries;
    }
    write_records(&records, &args.out)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct GraphRow {
    id: u64,
    truncated: bool,
    n_nodes: usize,
    n_edges: usize,
    edges: Vec<(Triple, EdgeProvenance)>,
}

fn cmd_build_graphs(cfg: AppConfig, args: BuildGraphsArgs) -> Result<()> {
    let kg = args.kg.load()?;
    let mut rcfg = cfg.retrieval;
    if let Some(v) = args.hop_depth {
        rcfg.hop_depth = v;
    }
    if let Some(v) = args.top_nodes {
        rcfg.top_nodes = v;
    }
    if let Some(v) = args.edge_cap {
        rcfg.edge_cap = v;
    }
    if let Some(v) = args.metapath_cap {
        rcfg.metapath_cap = v;
    }

    let records = read_records(&args.input)?;
    let mut rows = Vec::with_capacity(records.len());
    for rec in &records {
        let dp = rec.to_datapoint()?;
        let graph = build_retrieval_graph(&kg, &dp, &rcfg)
            .with_context(|| format!("building the graph of record {}", rec.id))?;
        rows.push(GraphRow {
            id: rec.id,
            truncated: graph.truncated,
            n_nodes: graph.nodes().len(),
            n_edges: graph.num_edges(),
            edges: graph.edges.into_iter().collect(),
        });
    }
    write_jsonl(&args.out, &rows)
}

fn cmd_analyze_paths(args: AnalyzePathsArgs) -> Result<()> {
    let kg = args.kg.load()?;
    let records = read_records(&args.input)?;
    let mut table = String::from(
        "id\tseed\tgt_path_length\tsp_length\tshortcut\tparallel_paths\t\
         pct_gt_in_sp\tpct_sp_in_gt\tn_gt_triples\tn_sp_triples\n",
    );
    for rec in &records {
        let dp = rec.to_datapoint()?;
        let stats = sp_gt_overlap(&kg, &dp, args.directed)
            .with_context(|| format!("analyzing record {}", rec.id))?;
        for seed in &stats.per_seed {
            let sp = seed.sp_length.map(|v| v.to_string()).unwrap_or_default();
            table.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{}\n",
                rec.id,
                seed.seed.as_str(),
                seed.gt_path_length,
                sp,
                seed.shortcut,
                seed.parallel_path_count,
                stats.pct_gt_in_sp,
                stats.pct_sp_in_gt,
                stats.n_gt_triples,
                stats.n_sp_triples,
            ));
        }
    }
    write_text(args.out.as_deref(), &table)
}

#[derive(serde::Serialize)]
struct ExportRow {
    id: u64,
    #[serde(flatten)]
    export: SupervisionExport,
}

fn cmd_export_supervision(args: ExportSupervisionArgs) -> Result<()> {
    let kg = args.kg.load()?;
    let mode = match args.mode {
        ModeArg::Gt => SupervisionMode::Gt,
        ModeArg::Sp => SupervisionMode::Sp,
    };
    let records = read_records(&args.input)?;
    let mut rows = Vec::with_capacity(records.len());
    for rec in &records {
        let dp = rec.to_datapoint()?;
        let export = export_supervision(&dp, &kg, mode, args.directed)
            .with_context(|| format!("exporting record {}", rec.id))?;
        rows.push(ExportRow { id: rec.id, export });
    }
    write_jsonl(&args.out, &rows)
}

fn cmd_split(cfg: AppConfig, args: SplitArgs) -> Result<()> {
    let mut constraints = cfg.split;
    if let Some(k) = args.top_k {
        constraints.relation_train_top_k = k;
    }
    if let Some(min) = args.min_per_category {
        constraints.min_per_category = min;
    }
    if !args.reserved_iso.is_empty() {
        constraints.reserved_test_iso_codes = args.reserved_iso.iter().cloned().collect();
    }
    if args.allow_redundant_test {
        constraints.test_nonredundant_only = false;
    }
    if args.no_answer_disjointness {
        constraints.answer_disjointness = false;
    }

    if args.check {
        let train = read_records(&args.train)?;
        let test = read_records(&args.test)?;
        let violations = validate_split(&train, &test, &constraints);
        println!("{}", serde_json::to_string_pretty(&violations)?);
        if !violations.is_empty() {
            bail!("split violates {} constraints", violations.len());
        }
        return Ok(());
    }

    let pool = read_records(args.input.as_ref().expect("clap enforces --in"))?;
    let split = design_split(&pool, &constraints)?;
    write_records(&split.train, &args.train)?;
    write_records(&split.test, &args.test)?;
    let report = serde_json::json!({
        "train": split.train.len(),
        "test": split.test.len(),
        "dropped_cells": split.report.dropped_cells,
        "excluded_ids": split.report.excluded_ids,
        "warnings": split.report.warnings,
    });
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{report:#}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{report}");
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let records = read_records(&args.input)?;
    let stats = dataset_stats(&records);
    if args.json {
        let text = format!("{}\n", serde_json::to_string_pretty(&stats)?);
        return write_text(args.out.as_deref(), &text);
    }
    let fmt_mean = |m: Option<f64>| m.map(|v| format!("{v:.4}")).unwrap_or_default();
    let mut text = String::new();
    text.push_str(&format!("questions\t{}\n", stats.questions));
    text.push_str(&format!("unique_relations\t{}\n", stats.unique_relations));
    text.push_str(&format!("unique_entities\t{}\n", stats.unique_entities));
    text.push_str(&format!("unique_iso_codes\t{}\n", stats.unique_iso_codes));
    text.push_str(&format!("redundant\t{}\n", stats.redundant));
    text.push_str(&format!(
        "avg_seed_entities\t{}\n",
        fmt_mean(stats.avg_seed_entities)
    ));
    text.push_str(&format!("avg_hops\t{}\n", fmt_mean(stats.avg_hops)));
    text.push_str(&format!("avg_answers\t{}\n", fmt_mean(stats.avg_answers)));
    text.push_str(&format!("avg_gt_edges\t{}\n", fmt_mean(stats.avg_gt_edges)));
    text.push_str("\nrelation\tcount\n");
    for (rel, n) in &stats.relation_counts {
        text.push_str(&format!("{rel}\t{n}\n"));
    }
    text.push_str("\nisomorphism\tcount\n");
    for (code, n) in &stats.iso_code_counts {
        text.push_str(&format!("{code}\t{n}\n"));
    }
    write_text(args.out.as_deref(), &text)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let records = read_records(&args.dataset)?;
    let results = read_retrieval_results(BufReader::new(
        File::open(&args.results)
            .with_context(|| format!("opening {}", args.results.display()))?,
    ))?;
    let mode = if args.inverse_tolerant {
        TripleMatchMode::InverseTolerant
    } else {
        TripleMatchMode::DirectedExact
    };

    let by_id: BTreeMap<String, &DatapointRecord> =
        records.iter().map(|r| (r.id.to_string(), r)).collect();
    let meta: BTreeMap<String, DatapointMeta> = records
        .iter()
        .map(|r| {
            (
                r.id.to_string(),
                DatapointMeta {
                    id: r.id.to_string(),
                    isomorphism: r.graph_isomorphism.clone(),
                    n_hops: r.n_hops,
                    test_types: r.test_type.iter().map(|t| t.to_string()).collect(),
                },
            )
        })
        .collect();

    let scored = score_results(&results, &by_id, mode)?;
    let baseline = match &args.baseline {
        Some(path) => {
            let rows = read_retrieval_results(BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            ))?;
            Some(score_results(&rows, &by_id, mode)?)
        }
        None => None,
    };
    let report = aggregate_report(&scored, &meta, args.group_by.into(), baseline.as_deref())?;
    write_text(args.out.as_deref(), &report.to_tsv())
}

/// Scores each retrieval result against its dataset record.
fn score_results(
    results: &[RetrievalResult],
    by_id: &BTreeMap<String, &DatapointRecord>,
    mode: TripleMatchMode,
) -> Result<Vec<EvalRecord>> {
    let unknown: Vec<&str> = results
        .iter()
        .filter(|r| !by_id.contains_key(&r.question_id))
        .map(|r| r.question_id.as_str())
        .collect();
    if !unknown.is_empty() {
        bail!("results reference unknown question ids: {}", unknown.join(", "));
    }

    let mut out = Vec::with_capacity(results.len());
    for result in results {
        let rec = by_id[&result.question_id];
        let gold = parse_labeled(&rec.answer_node)
            .map(|(label, _)| label.to_owned())
            .unwrap_or_else(|| rec.answer_node.clone());
        let haystack = match &result.model_answers {
            Some(answers) => format!("{} {}", result.model_output, answers.join(" ")),
            None => result.model_output.clone(),
        };
        let (em_hit, em_recall) = em_scores(&haystack, &[gold])?;

        let target: BTreeSet<Triple> = rec.answer_subgraph.iter().map(bare_triple).collect();
        let (recall, precision, f1) = triple_scores(&result.retrieved_triples, &target, mode);

        let mut answers: BTreeSet<EntityId> = rec
            .all_answers
            .values()
            .flatten()
            .map(|a| EntityId::new(bare(a)))
            .collect();
        if answers.is_empty() {
            answers.insert(EntityId::new(bare(&rec.answer_node)));
        }
        let (answer_hit, answer_recall) =
            answer_node_scores(&result.retrieved_triples, &answers)?;

        out.push(EvalRecord {
            question_id: result.question_id.clone(),
            em_hit,
            em_recall,
            gt_triple_recall: recall,
            gt_triple_precision: precision,
            gt_triple_f1: f1,
            answer_hit,
            answer_recall,
            n_retrieved: result.retrieved_triples.len(),
        });
    }
    Ok(out)
}
