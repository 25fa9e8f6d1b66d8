//! Train/test split design and validation.
//!
//! [`design_split`] partitions a record pool into train and test sets under
//! the dataset constraints: test answer nodes never appear as train answer
//! nodes, relations outside the top-k frequency set are confined to test,
//! reserved isomorphism codes are confined to test, test questions are
//! non-redundant, and every populated test cell (one per isomorphism code
//! and generalization category) holds at least a minimum number of
//! questions or is dropped. [`validate_split`] re-checks each constraint
//! independently, so a designed split can be audited by machinery that
//! shares none of the designer's bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::DatapointRecord;
use crate::taxonomy::TestType;
use crate::types::bare_id;

/// Constraints a designed split must satisfy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConstraints {
    /// Size of the relation vocabulary reserved for train; relations outside
    /// the top-k by frequency may only appear in test.
    pub relation_train_top_k: usize,
    /// Minimum number of test questions per populated (isomorphism code,
    /// category) cell.
    pub min_per_category: usize,
    /// Whether redundant questions are barred from test.
    pub test_nonredundant_only: bool,
    /// Isomorphism codes that may only appear in test.
    pub reserved_test_iso_codes: BTreeSet<String>,
    /// Whether train and test answer nodes must be disjoint.
    pub answer_disjointness: bool,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        SplitConstraints {
            relation_train_top_k: 200,
            min_per_category: 45,
            test_nonredundant_only: true,
            reserved_test_iso_codes: BTreeSet::new(),
            answer_disjointness: true,
        }
    }
}

impl SplitConstraints {
    /// Rejects threshold values that make the constraint set meaningless.
    pub fn validate(&self) -> Result<(), SplitError> {
        if self.relation_train_top_k == 0 {
            return Err(SplitError::Constraints(
                "relation_train_top_k must be at least 1".into(),
            ));
        }
        if self.min_per_category == 0 {
            return Err(SplitError::Constraints(
                "min_per_category must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Errors raised by split design.
#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split constraints: {0}")]
    Constraints(String),
}

/// A test cell removed because it could not reach the per-category minimum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedCell {
    pub iso: String,
    pub category: TestType,
    pub size: usize,
}

/// Bookkeeping emitted alongside a designed split.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SplitReport {
    /// Cells dropped for falling short of the per-category minimum.
    pub dropped_cells: Vec<DroppedCell>,
    /// Records that could not be placed on either side without violating a
    /// constraint, in ascending id order.
    pub excluded_ids: Vec<u64>,
    /// Non-fatal irregularities encountered during design.
    pub warnings: Vec<String>,
}

/// A designed split: train and test record sets plus the design report.
#[derive(Debug, Clone)]
pub struct DesignedSplit {
    pub train: Vec<DatapointRecord>,
    pub test: Vec<DatapointRecord>,
    pub report: SplitReport,
}

/// A single constraint breach found by [`validate_split`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitViolation {
    /// An answer node id appears on both sides of the split.
    AnswerOverlap {
        answer: String,
        train_ids: Vec<u64>,
        test_ids: Vec<u64>,
    },
    /// A relation outside the top-k vocabulary appears in train.
    RelationLeak { relation: String, train_ids: Vec<u64> },
    /// A reserved isomorphism code appears in train.
    ReservedIsoInTrain { iso: String, train_ids: Vec<u64> },
    /// A redundant question was assigned to test.
    RedundantInTest { id: u64 },
    /// A populated test cell falls short of the per-category minimum.
    UnderfullCell {
        iso: String,
        category: TestType,
        size: usize,
    },
    /// A record's stored test_type tags disagree with the recomputed ones.
    TagMismatch {
        id: u64,
        expected: Vec<TestType>,
        actual: Vec<TestType>,
    },
}

impl fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitViolation::AnswerOverlap {
                answer,
                train_ids,
                test_ids,
            } => write!(
                f,
                "answer {answer} appears in train records {train_ids:?} and test records {test_ids:?}"
            ),
            SplitViolation::RelationLeak {
                relation,
                train_ids,
            } => write!(
                f,
                "relation {relation} is reserved for test but appears in train records {train_ids:?}"
            ),
            SplitViolation::ReservedIsoInTrain { iso, train_ids } => write!(
                f,
                "reserved isomorphism code {iso} appears in train records {train_ids:?}"
            ),
            SplitViolation::RedundantInTest { id } => {
                write!(f, "redundant record {id} was assigned to test")
            }
            SplitViolation::UnderfullCell {
                iso,
                category,
                size,
            } => write!(
                f,
                "test cell ({iso}, {category}) holds {size} questions, below the per-category minimum"
            ),
            SplitViolation::TagMismatch {
                id,
                expected,
                actual,
            } => {
                let fmt_tags = |tags: &[TestType]| {
                    tags.iter()
                        .map(TestType::to_string)
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                write!(
                    f,
                    "record {id} test_type mismatch: expected [{}], found [{}]",
                    fmt_tags(expected),
                    fmt_tags(actual)
                )
            }
        }
    }
}

/// The set of relation ids a record's ground-truth subgraph uses.
fn record_relations(rec: &DatapointRecord) -> BTreeSet<String> {
    rec.answer_subgraph
        .iter()
        .map(|t| bare_id(&t[1]).to_owned())
        .collect()
}

/// The record's answer node id.
fn record_answer(rec: &DatapointRecord) -> String {
    bare_id(&rec.answer_node).to_owned()
}

/// The k most frequent relations over the given records, counting one
/// occurrence per ground-truth triple. Ties break toward the
/// lexicographically smaller relation id.
fn top_k_relations<'a>(
    records: impl IntoIterator<Item = &'a DatapointRecord>,
    k: usize,
) -> BTreeSet<String> {
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for rec in records {
        for triple in &rec.answer_subgraph {
            *freq.entry(bare_id(&triple[1]).to_owned()).or_default() += 1;
        }
    }
    let mut items: Vec<(String, usize)> = freq.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().take(k).map(|(rel, _)| rel).collect()
}

/// Recomputes a test record's generalization tags against the realized
/// train isomorphism and relation sets.
fn expected_tags(
    rec: &DatapointRecord,
    train_iso: &BTreeSet<String>,
    train_rels: &BTreeSet<String>,
) -> BTreeSet<TestType> {
    let mut tags = BTreeSet::new();
    if !train_iso.contains(&rec.graph_isomorphism) {
        tags.insert(TestType::UnseenGraphType);
    }
    if record_relations(rec).iter().any(|r| !train_rels.contains(r)) {
        tags.insert(TestType::UnseenRelationType);
    }
    if tags.is_empty() {
        tags.insert(TestType::InDistribution);
    }
    tags
}

/// Collapses a tag set to the single category used for cell accounting.
/// Unseen graph type wins over unseen relation type because it is a
/// property of the whole isomorphism class rather than of one question.
fn cell_category(tags: &BTreeSet<TestType>) -> TestType {
    if tags.contains(&TestType::UnseenGraphType) {
        TestType::UnseenGraphType
    } else if tags.contains(&TestType::UnseenRelationType) {
        TestType::UnseenRelationType
    } else {
        TestType::InDistribution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Open,
    Train,
    Test,
    Excluded,
}

/// Greedily assigns a validated record pool to train and test.
///
/// Pass order: reserved isomorphism codes are sent to test, each
/// (isomorphism, category) cell is filled to the per-category minimum with
/// non-redundant questions, records using out-of-vocabulary relations are
/// forced to test, and the remainder becomes train. A repair loop then
/// re-enforces the relation budget over the surviving records, resolves
/// answer-node collisions (movable test records migrate to train, otherwise
/// the conflicting train records are excluded), and drops test cells that
/// ended up below the minimum. Records that fit neither side are excluded
/// and reported. The output always satisfies [`validate_split`] under the
/// same constraints unless the repair loop hits its safety cap, which is
/// reported as a warning.
pub fn design_split(
    pool: &[DatapointRecord],
    constraints: &SplitConstraints,
) -> Result<DesignedSplit, SplitError> {
    constraints.validate()?;
    let mut slot = vec![Slot::Open; pool.len()];
    let mut report = SplitReport::default();
    let test_eligible =
        |rec: &DatapointRecord| !(constraints.test_nonredundant_only && rec.redundant);
    let reserved = |rec: &DatapointRecord| {
        constraints
            .reserved_test_iso_codes
            .contains(&rec.graph_isomorphism)
    };

    // Reserved isomorphism codes may only appear in test; redundant ones
    // cannot go there either, so they drop out entirely.
    for (i, rec) in pool.iter().enumerate() {
        if reserved(rec) {
            slot[i] = if test_eligible(rec) {
                Slot::Test
            } else {
                Slot::Excluded
            };
        }
    }

    // Fill each prospective (isomorphism, category) cell with exactly the
    // minimum, smallest ids first. The category is provisional here: the
    // realized train sets do not exist yet, so out-of-vocabulary relation
    // use over the whole surviving pool stands in for unseen_relation_type.
    let pool_top_k = top_k_relations(
        pool.iter()
            .enumerate()
            .filter(|(i, _)| slot[*i] != Slot::Excluded)
            .map(|(_, rec)| rec),
        constraints.relation_train_top_k,
    );
    let uses_out_rel = |rec: &DatapointRecord, top_k: &BTreeSet<String>| {
        record_relations(rec).iter().any(|r| !top_k.contains(r))
    };
    let mut groups: BTreeMap<(String, TestType), Vec<usize>> = BTreeMap::new();
    for (i, rec) in pool.iter().enumerate() {
        if slot[i] != Slot::Open || !test_eligible(rec) {
            continue;
        }
        let category = if uses_out_rel(rec, &pool_top_k) {
            TestType::UnseenRelationType
        } else {
            TestType::InDistribution
        };
        groups
            .entry((rec.graph_isomorphism.clone(), category))
            .or_default()
            .push(i);
    }
    for members in groups.into_values() {
        if members.len() < constraints.min_per_category {
            continue;
        }
        let mut members = members;
        members.sort_by_key(|&i| (pool[i].id, i));
        for &i in members.iter().take(constraints.min_per_category) {
            slot[i] = Slot::Test;
        }
    }

    // Out-of-vocabulary relations are confined to test; redundant users of
    // such relations fit neither side.
    for (i, rec) in pool.iter().enumerate() {
        if slot[i] == Slot::Open && uses_out_rel(rec, &pool_top_k) {
            slot[i] = if test_eligible(rec) {
                Slot::Test
            } else {
                Slot::Excluded
            };
        }
    }
    for s in slot.iter_mut() {
        if *s == Slot::Open {
            *s = Slot::Train;
        }
    }

    // Repair until every constraint holds simultaneously. Each iteration
    // applies at most one class of fix and recomputes from scratch, so the
    // checks always see current state.
    let cap = pool.len() * 4 + 16;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > cap {
            report.warnings.push(format!(
                "split repair did not stabilize within {cap} passes; the result may violate constraints"
            ));
            break;
        }

        // Relation budget over the records that remain in the dataset.
        let top_k = top_k_relations(
            pool.iter()
                .enumerate()
                .filter(|(i, _)| matches!(slot[*i], Slot::Train | Slot::Test))
                .map(|(_, rec)| rec),
            constraints.relation_train_top_k,
        );
        let mut changed = false;
        for (i, rec) in pool.iter().enumerate() {
            if slot[i] == Slot::Train && uses_out_rel(rec, &top_k) {
                slot[i] = if test_eligible(rec) {
                    Slot::Test
                } else {
                    Slot::Excluded
                };
                changed = true;
            }
        }
        if changed {
            continue;
        }

        // Answer-node disjointness. A conflicting answer moves wholesale to
        // whichever side can legally keep it: test holders migrate to train
        // when every one of them may appear there, otherwise the train
        // holders are excluded.
        if constraints.answer_disjointness {
            let mut train_by: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            let mut test_by: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, rec) in pool.iter().enumerate() {
                match slot[i] {
                    Slot::Train => train_by.entry(record_answer(rec)).or_default().push(i),
                    Slot::Test => test_by.entry(record_answer(rec)).or_default().push(i),
                    _ => {}
                }
            }
            for (answer, test_members) in &test_by {
                let Some(train_members) = train_by.get(answer) else {
                    continue;
                };
                let movable = test_members.iter().all(|&i| {
                    !reserved(&pool[i]) && !uses_out_rel(&pool[i], &top_k)
                });
                if movable {
                    for &i in test_members {
                        slot[i] = Slot::Train;
                    }
                } else {
                    for &i in train_members {
                        slot[i] = Slot::Excluded;
                    }
                }
                changed = true;
            }
            if changed {
                continue;
            }
        }

        // Per-category minimum: drop the first underfull populated cell and
        // route its members out of test.
        let train_iso: BTreeSet<String> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| slot[*i] == Slot::Train)
            .map(|(_, rec)| rec.graph_isomorphism.clone())
            .collect();
        let train_rels: BTreeSet<String> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| slot[*i] == Slot::Train)
            .flat_map(|(_, rec)| record_relations(rec))
            .collect();
        let mut cells: BTreeMap<(String, TestType), Vec<usize>> = BTreeMap::new();
        for (i, rec) in pool.iter().enumerate() {
            if slot[i] != Slot::Test {
                continue;
            }
            let tags = expected_tags(rec, &train_iso, &train_rels);
            cells
                .entry((rec.graph_isomorphism.clone(), cell_category(&tags)))
                .or_default()
                .push(i);
        }
        let underfull = cells
            .into_iter()
            .find(|(_, members)| !members.is_empty() && members.len() < constraints.min_per_category);
        if let Some(((iso, category), members)) = underfull {
            report.dropped_cells.push(DroppedCell {
                iso,
                category,
                size: members.len(),
            });
            let remaining_test_answers: BTreeSet<String> = pool
                .iter()
                .enumerate()
                .filter(|(i, _)| slot[*i] == Slot::Test && !members.contains(i))
                .map(|(_, rec)| record_answer(rec))
                .collect();
            for &i in &members {
                let rec = &pool[i];
                let collides = constraints.answer_disjointness
                    && remaining_test_answers.contains(&record_answer(rec));
                slot[i] = if reserved(rec) || uses_out_rel(rec, &top_k) || collides {
                    Slot::Excluded
                } else {
                    Slot::Train
                };
            }
            continue;
        }

        break;
    }

    // Materialize, rewriting tags from the realized train sets.
    let train_iso: BTreeSet<String> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| slot[*i] == Slot::Train)
        .map(|(_, rec)| rec.graph_isomorphism.clone())
        .collect();
    let train_rels: BTreeSet<String> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| slot[*i] == Slot::Train)
        .flat_map(|(_, rec)| record_relations(rec))
        .collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, rec) in pool.iter().enumerate() {
        match slot[i] {
            Slot::Train => {
                let mut out = rec.clone();
                out.test_type = Vec::new();
                train.push(out);
            }
            Slot::Test => {
                let mut out = rec.clone();
                out.test_type = expected_tags(rec, &train_iso, &train_rels)
                    .into_iter()
                    .collect();
                test.push(out);
            }
            Slot::Excluded => report.excluded_ids.push(rec.id),
            Slot::Open => unreachable!("every record was assigned"),
        }
    }
    report.excluded_ids.sort_unstable();
    Ok(DesignedSplit {
        train,
        test,
        report,
    })
}

/// Checks each split constraint independently and returns every breach.
/// An empty list means the split is compliant.
pub fn validate_split(
    train: &[DatapointRecord],
    test: &[DatapointRecord],
    constraints: &SplitConstraints,
) -> Vec<SplitViolation> {
    let mut out = Vec::new();

    if constraints.answer_disjointness {
        let mut train_by: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for rec in train {
            train_by.entry(record_answer(rec)).or_default().push(rec.id);
        }
        let mut test_by: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for rec in test {
            test_by.entry(record_answer(rec)).or_default().push(rec.id);
        }
        for (answer, test_ids) in &test_by {
            if let Some(train_ids) = train_by.get(answer) {
                out.push(SplitViolation::AnswerOverlap {
                    answer: answer.clone(),
                    train_ids: train_ids.clone(),
                    test_ids: test_ids.clone(),
                });
            }
        }
    }

    let top_k = top_k_relations(
        train.iter().chain(test.iter()),
        constraints.relation_train_top_k,
    );
    let mut leaks: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for rec in train {
        for rel in record_relations(rec) {
            if !top_k.contains(&rel) {
                leaks.entry(rel).or_default().push(rec.id);
            }
        }
    }
    for (relation, mut train_ids) in leaks {
        train_ids.sort_unstable();
        train_ids.dedup();
        out.push(SplitViolation::RelationLeak {
            relation,
            train_ids,
        });
    }

    let mut reserved_hits: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for rec in train {
        if constraints
            .reserved_test_iso_codes
            .contains(&rec.graph_isomorphism)
        {
            reserved_hits
                .entry(rec.graph_isomorphism.clone())
                .or_default()
                .push(rec.id);
        }
    }
    for (iso, train_ids) in reserved_hits {
        out.push(SplitViolation::ReservedIsoInTrain { iso, train_ids });
    }

    if constraints.test_nonredundant_only {
        for rec in test {
            if rec.redundant {
                out.push(SplitViolation::RedundantInTest { id: rec.id });
            }
        }
    }

    let train_iso: BTreeSet<String> = train
        .iter()
        .map(|rec| rec.graph_isomorphism.clone())
        .collect();
    let train_rels: BTreeSet<String> =
        train.iter().flat_map(record_relations).collect();
    let mut cells: BTreeMap<(String, TestType), usize> = BTreeMap::new();
    for rec in test {
        let tags = expected_tags(rec, &train_iso, &train_rels);
        *cells
            .entry((rec.graph_isomorphism.clone(), cell_category(&tags)))
            .or_default() += 1;
    }
    for ((iso, category), size) in cells {
        if size < constraints.min_per_category {
            out.push(SplitViolation::UnderfullCell {
                iso,
                category,
                size,
            });
        }
    }

    for rec in test {
        let expected = expected_tags(rec, &train_iso, &train_rels);
        let actual: BTreeSet<TestType> = rec.test_type.iter().copied().collect();
        if actual != expected {
            out.push(SplitViolation::TagMismatch {
                id: rec.id,
                expected: expected.into_iter().collect(),
                actual: rec.test_type.clone(),
            });
        }
    }
    for rec in train {
        if !rec.test_type.is_empty() {
            out.push(SplitViolation::TagMismatch {
                id: rec.id,
                expected: Vec::new(),
                actual: rec.test_type.clone(),
            });
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rec(
        id: u64,
        iso: &str,
        relations: &[&str],
        answer: &str,
        redundant: bool,
    ) -> DatapointRecord {
        DatapointRecord {
            id,
            question: format!("question {id}?"),
            paraphrased_question: format!("question {id}, rephrased?"),
            seed_entities: vec!["Seed (Q1)".into()],
            answer_node: format!("Answer ({answer})"),
            answer_subgraph: relations
                .iter()
                .map(|rel| {
                    [
                        "Head (Q1)".into(),
                        format!("Relation ({rel})"),
                        format!("Answer ({answer})"),
                    ]
                })
                .collect(),
            sparql_query: "SELECT ?x WHERE { }".into(),
            all_answers: BTreeMap::new(),
            full_answer_subgraph: BTreeMap::new(),
            n_hops: relations.len(),
            graph_isomorphism: iso.into(),
            redundant,
            minimal_graph_isomorphism: None,
            minimal_seeds_and_queries: BTreeMap::new(),
            test_type: Vec::new(),
        }
    }

    fn constraints(k: usize, min: usize, reserved: &[&str]) -> SplitConstraints {
        SplitConstraints {
            relation_train_top_k: k,
            min_per_category: min,
            reserved_test_iso_codes: reserved.iter().map(|s| s.to_string()).collect(),
            ..SplitConstraints::default()
        }
    }

    fn ids(records: &[DatapointRecord]) -> BTreeSet<u64> {
        records.iter().map(|r| r.id).collect()
    }

    #[test]
    fn zero_thresholds_are_rejected() {
        let pool = vec![rec(1, "(1)", &["P1"], "Q10", false)];
        let mut c = constraints(0, 1, &[]);
        assert!(matches!(
            design_split(&pool, &c),
            Err(SplitError::Constraints(_))
        ));
        c.relation_train_top_k = 1;
        c.min_per_category = 0;
        assert!(matches!(
            design_split(&pool, &c),
            Err(SplitError::Constraints(_))
        ));
    }

    #[test]
    fn empty_pool_yields_empty_split() {
        let split = design_split(&[], &constraints(5, 2, &[])).unwrap();
        assert!(split.train.is_empty());
        assert!(split.test.is_empty());
        assert_eq!(split.report, SplitReport::default());
    }

    #[test]
    fn reserved_iso_lands_entirely_in_test() {
        let mut pool = vec![
            rec(1, "(2)", &["P1"], "Q11", false),
            rec(2, "(2)", &["P1"], "Q12", false),
            rec(3, "(2)", &["P1"], "Q13", false),
        ];
        for i in 0..6 {
            pool.push(rec(10 + i, "(1)", &["P1"], &format!("Q{}", 20 + i), false));
        }
        let c = constraints(5, 2, &["(2)"]);
        let split = design_split(&pool, &c).unwrap();
        assert!(split.test.iter().filter(|r| r.graph_isomorphism == "(2)").count() == 3);
        assert!(split.train.iter().all(|r| r.graph_isomorphism != "(2)"));
        for r in split.test.iter().filter(|r| r.graph_isomorphism == "(2)") {
            assert!(r.test_type.contains(&TestType::UnseenGraphType));
        }
        assert!(validate_split(&split.train, &split.test, &c).is_empty());
    }

    #[test]
    fn redundant_records_never_reach_test() {
        let mut pool = vec![
            rec(1, "(2)", &["P1"], "Q11", true),
            rec(2, "(1)", &["P1"], "Q12", true),
        ];
        for i in 0..6 {
            pool.push(rec(10 + i, "(1)", &["P1"], &format!("Q{}", 20 + i), false));
        }
        let c = constraints(5, 2, &["(2)"]);
        let split = design_split(&pool, &c).unwrap();
        assert!(split.test.iter().all(|r| !r.redundant));
        // The reserved redundant record fits neither side.
        assert_eq!(split.report.excluded_ids, vec![1]);
        // The unreserved redundant record is still usable for train.
        assert!(ids(&split.train).contains(&2));
        assert!(validate_split(&split.train, &split.test, &c).is_empty());
    }

    #[test]
    fn out_of_vocabulary_relation_forces_test() {
        // P1 dominates the frequency table; with k = 1 every P9 user must
        // end up in test tagged unseen_relation_type.
        let mut pool = Vec::new();
        for i in 0..8 {
            pool.push(rec(i, "(1)", &["P1"], &format!("Q{}", 20 + i), false));
        }
        pool.push(rec(50, "(1)", &["P9"], "Q50", false));
        let c = constraints(1, 1, &[]);
        let split = design_split(&pool, &c).unwrap();
        let urt: Vec<&DatapointRecord> = split
            .test
            .iter()
            .filter(|r| r.test_type.contains(&TestType::UnseenRelationType))
            .collect();
        assert_eq!(urt.len(), 1);
        assert_eq!(urt[0].id, 50);
        assert!(split.train.iter().all(|r| !record_relations(r).contains("P9")));
        assert!(validate_split(&split.train, &split.test, &c).is_empty());
    }

    #[test]
    fn underfull_reserved_cell_is_dropped_and_reported() {
        let mut pool = vec![
            rec(1, "(3)", &["P1"], "Q11", false),
            rec(2, "(3)", &["P1"], "Q12", false),
        ];
        for i in 0..10 {
            pool.push(rec(10 + i, "(1)", &["P1"], &format!("Q{}", 20 + i), false));
        }
        let c = constraints(5, 5, &["(3)"]);
        let split = design_split(&pool, &c).unwrap();
        assert_eq!(split.report.dropped_cells.len(), 1);
        let dropped = &split.report.dropped_cells[0];
        assert_eq!(dropped.iso, "(3)");
        assert_eq!(dropped.category, TestType::UnseenGraphType);
        assert_eq!(dropped.size, 2);
        // Reserved records cannot fall back to train, so they drop out.
        assert_eq!(split.report.excluded_ids, vec![1, 2]);
        assert!(validate_split(&split.train, &split.test, &c).is_empty());
    }

    #[test]
    fn shared_answers_are_repaired() {
        // Nine (1)-records; the fill pass takes the two smallest ids into
        // test, and id 1 shares its answer with train record 7.
        let mut pool = Vec::new();
        for i in 1..=9 {
            let answer = if i == 7 { "Q11".to_string() } else { format!("Q{}", 10 + i) };
            pool.push(rec(i, "(1)", &["P1"], &answer, false));
        }
        let c = constraints(5, 2, &[]);
        let split = design_split(&pool, &c).unwrap();
        assert!(validate_split(&split.train, &split.test, &c).is_empty());
        let train_answers: BTreeSet<String> =
            split.train.iter().map(record_answer).collect();
        let test_answers: BTreeSet<String> =
            split.test.iter().map(record_answer).collect();
        assert!(train_answers.is_disjoint(&test_answers));
        assert_eq!(
            ids(&split.train).len() + ids(&split.test).len()
                + split.report.excluded_ids.len(),
            9
        );
    }

    #[test]
    fn combined_unseen_tags_are_emitted_together() {
        let train = vec![rec(1, "(1)", &["P1"], "Q11", false)];
        let test = vec![{
            let mut r = rec(2, "(2)", &["P9"], "Q12", false);
            r.test_type = vec![TestType::UnseenGraphType, TestType::UnseenRelationType];
            r
        }];
        let c = constraints(1, 1, &[]);
        assert!(validate_split(&train, &test, &c).is_empty());
    }

    #[test]
    fn validator_flags_answer_overlap() {
        let train = vec![rec(1, "(1)", &["P1"], "Q11", false)];
        let test = vec![{
            let mut r = rec(2, "(1)", &["P1"], "Q11", false);
            r.test_type = vec![TestType::InDistribution];
            r
        }];
        let got = validate_split(&train, &test, &constraints(5, 1, &[]));
        assert_eq!(
            got,
            vec![SplitViolation::AnswerOverlap {
                answer: "Q11".into(),
                train_ids: vec![1],
                test_ids: vec![2],
            }]
        );
    }

    #[test]
    fn validator_flags_relation_leak() {
        // P1 appears twice, P9 once; with k = 1 only P1 is in vocabulary.
        let train = vec![
            rec(1, "(1)", &["P1"], "Q11", false),
            rec(2, "(1)", &["P1", "P9"], "Q12", false),
        ];
        let test = vec![{
            let mut r = rec(3, "(1)", &["P1"], "Q13", false);
            r.test_type = vec![TestType::InDistribution];
            r
        }];
        let got = validate_split(&train, &test, &constraints(1, 1, &[]));
        assert_eq!(
            got,
            vec![SplitViolation::RelationLeak {
                relation: "P9".into(),
                train_ids: vec![2],
            }]
        );
    }

    #[test]
    fn validator_flags_reserved_iso_in_train() {
        let train = vec![rec(1, "(2)", &["P1"], "Q11", false)];
        let test = vec![{
            let mut r = rec(2, "(1)", &["P1"], "Q12", false);
            r.test_type = vec![TestType::UnseenGraphType];
            r
        }];
        let got = validate_split(&train, &test, &constraints(5, 1, &["(2)"]));
        assert_eq!(
            got,
            vec![SplitViolation::ReservedIsoInTrain {
                iso: "(2)".into(),
                train_ids: vec![1],
            }]
        );
    }

    #[test]
    fn validator_flags_redundant_in_test() {
        let train = vec![rec(1, "(1)", &["P1"], "Q11", false)];
        let test = vec![{
            let mut r = rec(2, "(1)", &["P1"], "Q12", true);
            r.test_type = vec![TestType::InDistribution];
            r
        }];
        let got = validate_split(&train, &test, &constraints(5, 1, &[]));
        assert_eq!(got, vec![SplitViolation::RedundantInTest { id: 2 }]);
    }

    #[test]
    fn validator_flags_underfull_cell() {
        let train = vec![rec(1, "(1)", &["P1"], "Q11", false)];
        let test = vec![{
            let mut r = rec(2, "(1)", &["P1"], "Q12", false);
            r.test_type = vec![TestType::InDistribution];
            r
        }];
        let got = validate_split(&train, &test, &constraints(5, 2, &[]));
        assert_eq!(
            got,
            vec![SplitViolation::UnderfullCell {
                iso: "(1)".into(),
                category: TestType::InDistribution,
                size: 1,
            }]
        );
    }

    #[test]
    fn validator_flags_tag_mismatch() {
        let train = vec![rec(1, "(1)", &["P1"], "Q11", false)];
        let test = vec![rec(2, "(2)", &["P1"], "Q12", false)];
        let got = validate_split(&train, &test, &constraints(5, 1, &[]));
        assert_eq!(
            got,
            vec![SplitViolation::TagMismatch {
                id: 2,
                expected: vec![TestType::UnseenGraphType],
                actual: vec![],
            }]
        );
        let mut tagged_train = train.clone();
        tagged_train[0].test_type = vec![TestType::InDistribution];
        let got = validate_split(&tagged_train, &[], &constraints(5, 1, &[]));
        assert_eq!(
            got,
            vec![SplitViolation::TagMismatch {
                id: 1,
                expected: vec![],
                actual: vec![TestType::InDistribution],
            }]
        );
    }

    #[test]
    fn compliant_split_passes() {
        let train = vec![
            rec(1, "(1)", &["P1"], "Q11", false),
            rec(2, "(1)", &["P1"], "Q12", true),
        ];
        let test = vec![
            {
                let mut r = rec(3, "(1)", &["P1"], "Q13", false);
                r.test_type = vec![TestType::InDistribution];
                r
            },
            {
                let mut r = rec(4, "(2)", &["P1"], "Q14", false);
                r.test_type = vec![TestType::UnseenGraphType];
                r
            },
        ];
        let c = constraints(5, 1, &["(2)"]);
        assert!(validate_split(&train, &test, &c).is_empty());
    }

    #[test]
    fn designed_splits_pass_validation_on_random_pools() {
        let isos = ["(1)", "(2)", "(1)(1)", "((1)(1))", "(2)(1)", "(3)"];
        let rels = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8"];
        for seed in 0..12u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let size = rng.random_range(40..160);
            let mut pool = Vec::with_capacity(size);
            for id in 0..size as u64 {
                let iso = isos[rng.random_range(0..isos.len())];
                let n_rels = rng.random_range(1..=3);
                let relations: Vec<&str> = (0..n_rels)
                    .map(|_| rels[rng.random_range(0..rels.len())])
                    .collect();
                let answer = format!("Q{}", rng.random_range(100..140));
                pool.push(rec(id, iso, &relations, &answer, rng.random_range(0..5) == 0));
            }
            let reserved: Vec<&str> = isos
                .iter()
                .copied()
                .filter(|_| rng.random_range(0..4) == 0)
                .collect();
            let c = constraints(
                rng.random_range(3..=8),
                rng.random_range(2..=4),
                &reserved,
            );
            let split = design_split(&pool, &c).unwrap();
            assert!(
                split.report.warnings.is_empty(),
                "seed {seed}: {:?}",
                split.report.warnings
            );
            let violations = validate_split(&split.train, &split.test, &c);
            assert!(violations.is_empty(), "seed {seed}: {violations:?}");
            // Every record is accounted for exactly once.
            let mut seen: Vec<u64> = ids(&split.train)
                .into_iter()
                .chain(ids(&split.test))
                .chain(split.report.excluded_ids.iter().copied())
                .collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..size as u64).collect::<Vec<_>>());
        }
    }
}
