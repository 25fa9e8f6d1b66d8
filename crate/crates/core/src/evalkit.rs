//! Scoring of model outputs and retrieved subgraphs, with grouped report
//! aggregation.
//!
//! Exact match is substring-after-normalization: outputs are case-folded,
//! stripped of braces, and whitespace-collapsed before gold labels are
//! looked up as contiguous substrings. Triple scores are set-intersection
//! counts over distinct triples, either direction-exact or tolerant of
//! inverted edges.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{EntityId, Triple};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold label list is empty")]
    EmptyGold,
    #[error("answer set is empty")]
    EmptyAnswers,
    #[error("records reference unknown question ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("line {line}: {source}")]
    BadRecordLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One system's retrieval and answer output for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub question_id: String,
    pub retrieved_triples: Vec<Triple>,
    pub model_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_answers: Option<Vec<String>>,
}

/// Reads one JSON record per line.
pub fn read_retrieval_results(reader: impl BufRead) -> Result<Vec<RetrievalResult>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|source| EvalError::BadRecordLine { line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Per-question metric vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub em_hit: bool,
    pub em_recall: f64,
    pub gt_triple_recall: f64,
    pub gt_triple_precision: f64,
    pub gt_triple_f1: f64,
    pub answer_hit: bool,
    pub answer_recall: f64,
    pub n_retrieved: usize,
}

/// Case-folds, strips braces, and collapses whitespace runs to single
/// spaces.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase().replace(['{', '}'], " ");
    let words: Vec<&str> = lowered.split_whitespace().collect();
    words.join(" ")
}

/// Exact-match hit and recall of gold labels inside free-form output.
///
/// A gold label matches when its normalization occurs as a contiguous
/// substring of the normalized output. Recall is the matched fraction of
/// distinct gold labels.
pub fn em_scores(model_output: &str, gold_labels: &[String]) -> Result<(bool, f64), EvalError> {
    if gold_labels.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let haystack = normalize(model_output);
    let golds: BTreeSet<String> = gold_labels.iter().map(|g| normalize(g)).collect();
    let matched = golds.iter().filter(|g| haystack.contains(g.as_str())).count();
    Ok((matched > 0, matched as f64 / golds.len() as f64))
}

/// Triple match semantics for [`triple_scores`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleMatchMode {
    /// Triples match only with identical direction.
    DirectedExact,
    /// Endpoints are compared unordered, so inverted edges still match.
    InverseTolerant,
}

fn match_key(t: &Triple, mode: TripleMatchMode) -> (String, String, String) {
    let h = t.head.as_str().to_owned();
    let r = t.relation.as_str().to_owned();
    let tl = t.tail.as_str().to_owned();
    match mode {
        TripleMatchMode::DirectedExact => (h, r, tl),
        TripleMatchMode::InverseTolerant => {
            if h <= tl {
                (h, r, tl)
            } else {
                (tl, r, h)
            }
        }
    }
}

/// Recall, precision, and F1 of retrieved triples against a target set.
/// Recall counts matched target triples over the whole target set, so
/// inverse-normalized matching can only raise it; precision is over
/// distinct (mode-normalized) retrieved triples.
pub fn triple_scores(
    retrieved: &[Triple],
    target: &BTreeSet<Triple>,
    mode: TripleMatchMode,
) -> (f64, f64, f64) {
    let retrieved_keys: BTreeSet<_> = retrieved.iter().map(|t| match_key(t, mode)).collect();
    let target_keys: BTreeSet<_> = target.iter().map(|t| match_key(t, mode)).collect();
    let matched_targets = target
        .iter()
        .filter(|t| retrieved_keys.contains(&match_key(t, mode)))
        .count();
    let intersection = retrieved_keys.intersection(&target_keys).count();
    let recall = if target.is_empty() {
        0.0
    } else {
        matched_targets as f64 / target.len() as f64
    };
    let precision = if retrieved_keys.is_empty() {
        0.0
    } else {
        intersection as f64 / retrieved_keys.len() as f64
    };
    let f1 = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    };
    (recall, precision, f1)
}

/// Hit and recall of answer nodes among the endpoints of retrieved triples.
pub fn answer_node_scores(
    retrieved: &[Triple],
    answers: &BTreeSet<EntityId>,
) -> Result<(bool, f64), EvalError> {
    if answers.is_empty() {
        return Err(EvalError::EmptyAnswers);
    }
    let nodes: BTreeSet<&EntityId> = retrieved
        .iter()
        .flat_map(|t| [&t.head, &t.tail])
        .collect();
    let covered = answers.iter().filter(|a| nodes.contains(a)).count();
    Ok((covered > 0, covered as f64 / answers.len() as f64))
}

/// Join metadata for grouping records during aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapointMeta {
    pub id: String,
    pub isomorphism: String,
    pub n_hops: usize,
    pub test_types: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    None,
    Isomorphism,
    NHops,
    TestType,
}

/// One aggregated row: means of every metric over the group's records.
/// Rates and hits are on percent scale; `n_retrieved` is a plain mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub group: String,
    pub size: usize,
    pub em_hit: f64,
    pub em_recall: f64,
    pub gt_triple_recall: f64,
    pub gt_triple_precision: f64,
    pub gt_triple_f1: f64,
    pub answer_hit: f64,
    pub answer_recall: f64,
    pub n_retrieved: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_delta_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub group_by: GroupBy,
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Tab-separated table with a header row, suitable for direct printing.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "group\tsize\tem_hit\tem_recall\tgt_triple_recall\tgt_triple_precision\t\
             gt_triple_f1\tanswer_hit\tanswer_recall\tn_retrieved\tem_delta_vs_baseline\n",
        );
        for row in &self.rows {
            let delta = row
                .em_delta_vs_baseline
                .map(|d| format!("{d:.4}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
                row.group,
                row.size,
                row.em_hit,
                row.em_recall,
                row.gt_triple_recall,
                row.gt_triple_precision,
                row.gt_triple_f1,
                row.answer_hit,
                row.answer_recall,
                row.n_retrieved,
                delta,
            ));
        }
        out
    }
}

fn groups_of(meta: &DatapointMeta, group_by: GroupBy) -> Vec<String> {
    match group_by {
        GroupBy::None => vec!["all".to_owned()],
        GroupBy::Isomorphism => vec![meta.isomorphism.clone()],
        GroupBy::NHops => vec![meta.n_hops.to_string()],
        GroupBy::TestType => {
            if meta.test_types.is_empty() {
                vec!["untagged".to_owned()]
            } else {
                meta.test_types.clone()
            }
        }
    }
}

fn join_groups<'r>(
    records: &'r [EvalRecord],
    meta: &BTreeMap<String, DatapointMeta>,
    group_by: GroupBy,
) -> Result<BTreeMap<String, Vec<&'r EvalRecord>>, EvalError> {
    let unknown: Vec<String> = records
        .iter()
        .filter(|r| !meta.contains_key(&r.question_id))
        .map(|r| r.question_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownIds(unknown));
    }
    let mut grouped: BTreeMap<String, Vec<&EvalRecord>> = BTreeMap::new();
    for record in records {
        for group in groups_of(&meta[&record.question_id], group_by) {
            grouped.entry(group).or_default().push(record);
        }
    }
    Ok(grouped)
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// Aggregates per-question records into per-group metric means.
///
/// Every record (and baseline record) must join to `meta` by question id.
/// With a baseline, each row carries the difference between the group's EM
/// hit rate and the baseline's on the same grouping.
pub fn aggregate_report(
    records: &[EvalRecord],
    meta: &BTreeMap<String, DatapointMeta>,
    group_by: GroupBy,
    baseline: Option<&[EvalRecord]>,
) -> Result<Report, EvalError> {
    let grouped = join_groups(records, meta, group_by)?;
    let baseline_em: BTreeMap<String, f64> = match baseline {
        Some(base) => join_groups(base, meta, group_by)?
            .into_iter()
            .map(|(group, rs)| {
                let n = rs.len();
                let em = mean(rs.iter().map(|r| f64::from(r.em_hit as u8) * 100.0), n);
                (group, em)
            })
            .collect(),
        None => BTreeMap::new(),
    };

    let rows = grouped
        .into_iter()
        .map(|(group, rs)| {
            let n = rs.len();
            let em_hit = mean(rs.iter().map(|r| f64::from(r.em_hit as u8) * 100.0), n);
            ReportRow {
                em_delta_vs_baseline: baseline
                    .is_some()
                    .then(|| em_hit - baseline_em.get(&group).copied().unwrap_or(0.0)),
                group,
                size: n,
                em_hit,
                em_recall: mean(rs.iter().map(|r| r.em_recall * 100.0), n),
                gt_triple_recall: mean(rs.iter().map(|r| r.gt_triple_recall * 100.0), n),
                gt_triple_precision: mean(rs.iter().map(|r| r.gt_triple_precision * 100.0), n),
                gt_triple_f1: mean(rs.iter().map(|r| r.gt_triple_f1 * 100.0), n),
                answer_hit: mean(rs.iter().map(|r| f64::from(r.answer_hit as u8) * 100.0), n),
                answer_recall: mean(rs.iter().map(|r| r.answer_recall * 100.0), n),
                n_retrieved: mean(rs.iter().map(|r| r.n_retrieved as f64), n),
            }
        })
        .collect();
    Ok(Report { group_by, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triples(specs: &[(&str, &str, &str)]) -> Vec<Triple> {
        specs.iter().map(|(h, r, t)| Triple::new(*h, *r, *t)).collect()
    }

    #[test]
    fn normalize_folds_case_braces_and_whitespace() {
        assert_eq!(normalize("The answer is {Portugal}"), "the answer is portugal");
        assert_eq!(normalize("  A\t B \n C "), "a b c");
        assert_eq!(normalize("{X}{Y}"), "x y");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn em_examples() {
        let gold = vec!["Portugal".to_owned()];
        assert_eq!(em_scores("The answer is {Portugal}", &gold).unwrap(), (true, 1.0));

        let gold2 = vec!["Fernando Cerchio".to_owned(), "Henri Decoin".to_owned()];
        let (hit, recall) =
            em_scores("The film was directed by Fernando Cerchio.", &gold2).unwrap();
        assert!(hit);
        assert_eq!(recall, 0.5);

        assert_eq!(em_scores("", &gold).unwrap(), (false, 0.0));
        assert!(matches!(em_scores("x", &[]), Err(EvalError::EmptyGold)));
    }

    #[test]
    fn triple_score_examples() {
        let target: BTreeSet<Triple> = triples(&[
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "r", "d"),
            ("d", "r", "e"),
        ])
        .into_iter()
        .collect();

        let exact: Vec<Triple> = target.iter().cloned().collect();
        assert_eq!(
            triple_scores(&exact, &target, TripleMatchMode::DirectedExact),
            (1.0, 1.0, 1.0)
        );

        let mut retrieved = triples(&[("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d")]);
        for i in 0..197 {
            retrieved.push(Triple::new(format!("x{i}"), "r", format!("y{i}")));
        }
        let (recall, precision, f1) =
            triple_scores(&retrieved, &target, TripleMatchMode::DirectedExact);
        assert_eq!(recall, 0.75);
        assert_eq!(precision, 0.015);
        assert!((f1 - 2.0 * 0.75 * 0.015 / 0.765).abs() < 1e-12);

        assert_eq!(
            triple_scores(&[], &target, TripleMatchMode::DirectedExact),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn inverse_tolerant_counts_reversed_edges() {
        let target: BTreeSet<Triple> = triples(&[("a", "r", "b")]).into_iter().collect();
        let reversed = triples(&[("b", "r", "a")]);
        assert_eq!(
            triple_scores(&reversed, &target, TripleMatchMode::DirectedExact).0,
            0.0
        );
        assert_eq!(
            triple_scores(&reversed, &target, TripleMatchMode::InverseTolerant),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn inverse_duplicate_targets_do_not_deflate_recall() {
        // Both directions of a-b sit in the target; collapsing them under
        // inverse matching must not shrink the recall denominator.
        let target: BTreeSet<Triple> =
            triples(&[("a", "r", "b"), ("b", "r", "a"), ("c", "r", "d")])
                .into_iter()
                .collect();
        let retrieved = triples(&[("a", "r", "b"), ("b", "r", "a")]);
        let (exact, _, _) = triple_scores(&retrieved, &target, TripleMatchMode::DirectedExact);
        let (inv, _, _) = triple_scores(&retrieved, &target, TripleMatchMode::InverseTolerant);
        assert_eq!(exact, 2.0 / 3.0);
        assert_eq!(inv, 2.0 / 3.0);
        assert!(inv >= exact);
    }

    #[test]
    fn answer_node_examples() {
        let answers = BTreeSet::from([EntityId::new("a1"), EntityId::new("a2")]);
        let retrieved = triples(&[("x", "r", "a1")]);
        assert_eq!(answer_node_scores(&retrieved, &answers).unwrap(), (true, 0.5));
        assert_eq!(answer_node_scores(&[], &answers).unwrap(), (false, 0.0));
        assert!(matches!(
            answer_node_scores(&retrieved, &BTreeSet::new()),
            Err(EvalError::EmptyAnswers)
        ));
    }

    fn record(id: &str, em: bool, recall: f64, n: usize) -> EvalRecord {
        EvalRecord {
            question_id: id.to_owned(),
            em_hit: em,
            em_recall: if em { 1.0 } else { 0.0 },
            gt_triple_recall: recall,
            gt_triple_precision: recall / 2.0,
            gt_triple_f1: recall / 1.5,
            answer_hit: em,
            answer_recall: if em { 1.0 } else { 0.0 },
            n_retrieved: n,
        }
    }

    fn meta_map(entries: &[(&str, &str, usize, &[&str])]) -> BTreeMap<String, DatapointMeta> {
        entries
            .iter()
            .map(|(id, iso, hops, tags)| {
                (
                    (*id).to_owned(),
                    DatapointMeta {
                        id: (*id).to_owned(),
                        isomorphism: (*iso).to_owned(),
                        n_hops: *hops,
                        test_types: tags.iter().map(|t| (*t).to_owned()).collect(),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn single_record_report_scales_to_percent() {
        let meta = meta_map(&[("q1", "(1)", 1, &["in_distribution"])]);
        let records = vec![record("q1", true, 0.5, 10)];
        let report = aggregate_report(&records, &meta, GroupBy::None, None).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.group, "all");
        assert_eq!(row.size, 1);
        assert_eq!(row.em_hit, 100.0);
        assert_eq!(row.gt_triple_recall, 50.0);
        assert_eq!(row.n_retrieved, 10.0);
        assert_eq!(row.em_delta_vs_baseline, None);
    }

    #[test]
    fn grouped_means_and_recombination() {
        let meta = meta_map(&[
            ("q1", "(1)", 1, &["in_distribution"]),
            ("q2", "(1)", 1, &["in_distribution"]),
            ("q3", "(2)", 2, &["unseen_graph_type"]),
        ]);
        let records = vec![
            record("q1", true, 1.0, 5),
            record("q2", false, 0.5, 15),
            record("q3", true, 0.0, 40),
        ];
        let by_iso = aggregate_report(&records, &meta, GroupBy::Isomorphism, None).unwrap();
        assert_eq!(by_iso.rows.len(), 2);
        let one = by_iso.rows.iter().find(|r| r.group == "(1)").unwrap();
        assert_eq!(one.size, 2);
        assert_eq!(one.em_hit, 50.0);
        assert_eq!(one.gt_triple_recall, 75.0);
        assert_eq!(one.n_retrieved, 10.0);

        // Weighted recombination of subgroup means equals the global mean.
        let all = aggregate_report(&records, &meta, GroupBy::None, None).unwrap();
        let global = all.rows[0].gt_triple_recall;
        let recombined: f64 = by_iso
            .rows
            .iter()
            .map(|r| r.gt_triple_recall * r.size as f64)
            .sum::<f64>()
            / records.len() as f64;
        assert!((global - recombined).abs() < 1e-9);
    }

    #[test]
    fn baseline_deltas_and_join_errors() {
        let meta = meta_map(&[("q1", "(1)", 1, &["in_distribution"])]);
        let records = vec![record("q1", true, 1.0, 5)];
        let baseline = vec![record("q1", false, 0.0, 0)];
        let report =
            aggregate_report(&records, &meta, GroupBy::None, Some(&baseline)).unwrap();
        assert_eq!(report.rows[0].em_delta_vs_baseline, Some(100.0));

        let stray = vec![record("zz", true, 1.0, 1)];
        match aggregate_report(&stray, &meta, GroupBy::None, None) {
            Err(EvalError::UnknownIds(ids)) => assert_eq!(ids, vec!["zz".to_owned()]),
            other => panic!("expected join error, got {other:?}"),
        }
    }

    #[test]
    fn test_type_groups_can_overlap() {
        let meta = meta_map(&[(
            "q1",
            "(1)",
            1,
            &["unseen_graph_type", "unseen_relation_type"],
        )]);
        let records = vec![record("q1", true, 1.0, 1)];
        let report = aggregate_report(&records, &meta, GroupBy::TestType, None).unwrap();
        let groups: Vec<&str> = report.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, vec!["unseen_graph_type", "unseen_relation_type"]);
    }

    #[test]
    fn retrieval_results_round_trip_jsonl() {
        let r = RetrievalResult {
            question_id: "q1".to_owned(),
            retrieved_triples: triples(&[("a", "r", "b")]),
            model_output: "b".to_owned(),
            model_answers: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        let parsed = read_retrieval_results(line.as_bytes()).unwrap();
        assert_eq!(parsed, vec![r]);
        assert!(read_retrieval_results("{bad json".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn em_is_monotone_under_appending(
            base in "[a-z {}]{0,30}",
            extra in "[a-z {}]{0,30}",
            gold in proptest::collection::vec("[a-z]{1,6}", 1..4),
        ) {
            let (hit1, rec1) = em_scores(&base, &gold).unwrap();
            let longer = format!("{base} {extra}");
            let (hit2, rec2) = em_scores(&longer, &gold).unwrap();
            prop_assert!(hit2 as u8 >= hit1 as u8);
            prop_assert!(rec2 >= rec1 - 1e-12);
        }

        #[test]
        fn triple_count_consistency(
            retrieved in proptest::collection::vec((0u8..6, 0u8..3, 0u8..6), 0..20),
            target in proptest::collection::vec((0u8..6, 0u8..3, 0u8..6), 0..8),
            inverse in proptest::bool::ANY,
        ) {
            let retrieved: Vec<Triple> = retrieved
                .into_iter()
                .map(|(h, r, t)| Triple::new(format!("e{h}"), format!("r{r}"), format!("e{t}")))
                .collect();
            let target: BTreeSet<Triple> = target
                .into_iter()
                .map(|(h, r, t)| Triple::new(format!("e{h}"), format!("r{r}"), format!("e{t}")))
                .collect();
            let mode = if inverse {
                TripleMatchMode::InverseTolerant
            } else {
                TripleMatchMode::DirectedExact
            };
            let (recall, precision, f1) = triple_scores(&retrieved, &target, mode);
            let rk: BTreeSet<_> = retrieved.iter().map(|t| super::match_key(t, mode)).collect();
            let tk: BTreeSet<_> = target.iter().map(|t| super::match_key(t, mode)).collect();
            let inter = rk.intersection(&tk).count() as f64;
            let matched = target
                .iter()
                .filter(|t| rk.contains(&super::match_key(t, mode)))
                .count() as f64;
            prop_assert!((precision * rk.len() as f64 - inter).abs() < 1e-9);
            prop_assert!((recall * target.len() as f64 - matched).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&f1));

            // Inverse tolerance never lowers recall.
            let (exact_recall, _, _) =
                triple_scores(&retrieved, &target, TripleMatchMode::DirectedExact);
            let (inv_recall, _, _) =
                triple_scores(&retrieved, &target, TripleMatchMode::InverseTolerant);
            prop_assert!(inv_recall >= exact_recall - 1e-12);
        }
    }
}
