//! Dataset-level statistics over record collections.
//!
//! [`dataset_stats`] folds a record list into the overview numbers used to
//! describe a dataset release: question and uniqueness counts, per-question
//! means, and frequency tables for relations and isomorphism codes. Means
//! are absent rather than zero on an empty input.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::records::DatapointRecord;
use crate::types::bare_id;

/// Overview statistics for a set of dataset records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    /// Number of records.
    pub questions: usize,
    /// Distinct relation ids across ground-truth subgraphs.
    pub unique_relations: usize,
    /// Distinct entity ids across seeds, answer nodes, and ground-truth
    /// subgraph endpoints.
    pub unique_entities: usize,
    /// Distinct isomorphism codes.
    pub unique_iso_codes: usize,
    /// Number of records flagged redundant.
    pub redundant: usize,
    /// Mean number of seed entities per question.
    pub avg_seed_entities: Option<f64>,
    /// Mean number of hops per question.
    pub avg_hops: Option<f64>,
    /// Mean number of distinct answers per question, counting answer ids
    /// from every per-KG answer column.
    pub avg_answers: Option<f64>,
    /// Mean number of ground-truth edges per question.
    pub avg_gt_edges: Option<f64>,
    /// Relation frequencies (one count per ground-truth triple), most
    /// frequent first, ties toward the smaller id.
    pub relation_counts: Vec<(String, usize)>,
    /// Isomorphism-code frequencies (one count per record), most frequent
    /// first, ties toward the smaller code.
    pub iso_code_counts: Vec<(String, usize)>,
}

/// Folds records into a [`DatasetStats`] report.
pub fn dataset_stats(records: &[DatapointRecord]) -> DatasetStats {
    let mut relations: BTreeMap<String, usize> = BTreeMap::new();
    let mut iso_codes: BTreeMap<String, usize> = BTreeMap::new();
    let mut entities: BTreeSet<String> = BTreeSet::new();
    let mut redundant = 0usize;
    let mut seed_total = 0usize;
    let mut hop_total = 0usize;
    let mut answer_total = 0usize;
    let mut edge_total = 0usize;

    for rec in records {
        *iso_codes.entry(rec.graph_isomorphism.clone()).or_default() += 1;
        if rec.redundant {
            redundant += 1;
        }
        seed_total += rec.seed_entities.len();
        hop_total += rec.n_hops;
        edge_total += rec.answer_subgraph.len();
        let answers: BTreeSet<&str> = rec
            .all_answers
            .values()
            .flatten()
            .map(|a| bare_id(a))
            .collect();
        answer_total += answers.len();
        for seed in &rec.seed_entities {
            entities.insert(bare_id(seed).to_owned());
        }
        entities.insert(bare_id(&rec.answer_node).to_owned());
        for triple in &rec.answer_subgraph {
            entities.insert(bare_id(&triple[0]).to_owned());
            entities.insert(bare_id(&triple[2]).to_owned());
            *relations.entry(bare_id(&triple[1]).to_owned()).or_default() += 1;
        }
    }

    let mean = |total: usize| {
        (!records.is_empty()).then(|| total as f64 / records.len() as f64)
    };
    let ranked = |counts: BTreeMap<String, usize>| {
        let mut items: Vec<(String, usize)> = counts.into_iter().collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items
    };

    DatasetStats {
        questions: records.len(),
        unique_relations: relations.len(),
        unique_entities: entities.len(),
        unique_iso_codes: iso_codes.len(),
        redundant,
        avg_seed_entities: mean(seed_total),
        avg_hops: mean(hop_total),
        avg_answers: mean(answer_total),
        avg_gt_edges: mean(edge_total),
        relation_counts: ranked(relations),
        iso_code_counts: ranked(iso_codes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::b4_record;
    use std::collections::BTreeMap;

    #[test]
    fn single_published_record() {
        let stats = dataset_stats(&[b4_record()]);
        assert_eq!(stats.questions, 1);
        assert_eq!(stats.avg_hops, Some(2.0));
        assert_eq!(stats.avg_gt_edges, Some(4.0));
        assert_eq!(stats.redundant, 1);
        assert_eq!(stats.avg_seed_entities, Some(3.0));
        assert_eq!(stats.avg_answers, Some(2.0));
        assert_eq!(stats.unique_relations, 4);
        assert_eq!(stats.unique_entities, 5);
        assert_eq!(stats.unique_iso_codes, 1);
        assert_eq!(stats.iso_code_counts, vec![("((1)(1)(1))".into(), 1)]);
        assert_eq!(
            stats.relation_counts,
            vec![
                ("P144".into(), 1),
                ("P364".into(), 1),
                ("P495".into(), 1),
                ("P57".into(), 1),
            ]
        );
    }

    #[test]
    fn empty_dataset_reports_absent_means() {
        let stats = dataset_stats(&[]);
        assert_eq!(stats.questions, 0);
        assert_eq!(stats.unique_relations, 0);
        assert_eq!(stats.unique_entities, 0);
        assert_eq!(stats.unique_iso_codes, 0);
        assert_eq!(stats.redundant, 0);
        assert_eq!(stats.avg_seed_entities, None);
        assert_eq!(stats.avg_hops, None);
        assert_eq!(stats.avg_answers, None);
        assert_eq!(stats.avg_gt_edges, None);
        assert!(stats.relation_counts.is_empty());
        assert!(stats.iso_code_counts.is_empty());
    }

    #[test]
    fn frequency_tables_rank_by_count_then_id() {
        let mut a = b4_record();
        a.answer_subgraph = vec![
            ["H (Q1)".into(), "R (P2)".into(), "T (Q2)".into()],
            ["H (Q1)".into(), "R (P2)".into(), "T (Q3)".into()],
            ["H (Q1)".into(), "R (P1)".into(), "T (Q4)".into()],
        ];
        a.graph_isomorphism = "(2)".into();
        let mut b = b4_record();
        b.id = 2;
        b.answer_subgraph = vec![
            ["H (Q1)".into(), "R (P1)".into(), "T (Q5)".into()],
            ["H (Q1)".into(), "R (P3)".into(), "T (Q6)".into()],
        ];
        b.graph_isomorphism = "(1)".into();
        let stats = dataset_stats(&[a, b]);
        assert_eq!(
            stats.relation_counts,
            vec![("P1".into(), 2), ("P2".into(), 2), ("P3".into(), 1)]
        );
        assert_eq!(
            stats.iso_code_counts,
            vec![("(1)".into(), 1), ("(2)".into(), 1)]
        );
    }

    #[test]
    fn entity_ids_deduplicate_across_labels() {
        let mut a = b4_record();
        a.seed_entities = vec!["Paris (Q90)".into()];
        a.answer_node = "France (Q142)".into();
        a.answer_subgraph = vec![[
            "Paris (Q90)".into(),
            "country (P17)".into(),
            "France (Q142)".into(),
        ]];
        let mut b = b4_record();
        b.id = 2;
        b.seed_entities = vec!["Paname (Q90)".into()];
        b.answer_node = "French Republic (Q142)".into();
        b.answer_subgraph = vec![[
            "Paname (Q90)".into(),
            "pays (P17)".into(),
            "French Republic (Q142)".into(),
        ]];
        let stats = dataset_stats(&[a, b]);
        assert_eq!(stats.unique_entities, 2);
        assert_eq!(stats.unique_relations, 1);
    }

    #[test]
    fn means_match_an_independent_fold() {
        let mut records = Vec::new();
        for i in 0..7u64 {
            let mut r = b4_record();
            r.id = i;
            r.n_hops = (i as usize % 3) + 1;
            r.seed_entities = (0..=(i as usize % 2))
                .map(|s| format!("Seed (Q{}{s})", 100 + i))
                .collect();
            r.answer_subgraph = (0..(i as usize % 4) + 1)
                .map(|e| {
                    [
                        format!("H (Q{}{e})", 200 + i),
                        "R (P1)".into(),
                        format!("T (Q{}{e})", 300 + i),
                    ]
                })
                .collect();
            r.all_answers = BTreeMap::from([
                ("kg_a".to_owned(), vec![format!("Q{}", 400 + i), "Q400".into()]),
                ("kg_b".to_owned(), vec![format!("Q{}", 400 + i)]),
            ]);
            records.push(r);
        }
        let stats = dataset_stats(&records);
        let n = records.len() as f64;
        let sum_of = |f: &dyn Fn(&DatapointRecord) -> usize| {
            records.iter().map(|r| f(r) as f64).sum::<f64>()
        };
        let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() < 1e-12;
        assert!(close(stats.avg_hops, sum_of(&|r| r.n_hops) / n));
        assert!(close(
            stats.avg_seed_entities,
            sum_of(&|r| r.seed_entities.len()) / n
        ));
        assert!(close(
            stats.avg_gt_edges,
            sum_of(&|r| r.answer_subgraph.len()) / n
        ));
        let distinct_answers = |r: &DatapointRecord| {
            r.all_answers
                .values()
                .flatten()
                .map(|a| a.as_str())
                .collect::<BTreeSet<_>>()
                .len()
        };
        assert!(close(stats.avg_answers, sum_of(&distinct_answers) / n));
    }
}
