//! Dataset record (de)serialization in the published schema.
//!
//! Records are stored one JSON object per line, UTF-8, with a stable key
//! order. Entity-facing fields render entities as `Label (ID)`; the per-KG
//! answer sets and full answer subgraphs are keyed by the user-chosen KG
//! name through dynamic `all_answers_<kg>` / `full_answer_subgraph_<kg>`
//! field pairs and hold bare ids. Reading is strict: unknown or missing
//! fields are schema errors naming the field, the line, and the record id
//! when it can be recovered.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::pipeline::ValidatedDatapoint;
use crate::taxonomy::{IsomorphismCode, TestType};
use crate::types::{EntityId, Triple};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}{id}: {detail}", id = match record_id { Some(v) => format!(" (record {v})"), None => String::new() })]
    Schema {
        line: usize,
        record_id: Option<u64>,
        detail: String,
    },
    #[error("record {id}: bad {field}: {reason}")]
    Field {
        id: u64,
        field: &'static str,
        reason: String,
    },
}

/// One dataset record, mirroring the published field set exactly.
///
/// `all_answers` and `full_answer_subgraph` are keyed by KG name and
/// flatten into `all_answers_<kg>` / `full_answer_subgraph_<kg>` fields on
/// disk. `minimal_graph_isomorphism` serializes as null and
/// `minimal_seeds_and_queries` as an empty object when the question is not
/// redundant; `test_type` is empty for train questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatapointRecord {
    pub id: u64,
    pub question: String,
    pub paraphrased_question: String,
    /// Seed entities as `Label (ID)`, in sorted id order.
    pub seed_entities: Vec<String>,
    /// Answer node as `Label (ID)`.
    pub answer_node: String,
    /// Ground-truth triples as labeled 3-element lists.
    pub answer_subgraph: Vec<[String; 3]>,
    pub sparql_query: String,
    /// Bare answer ids per KG name.
    pub all_answers: BTreeMap<String, Vec<String>>,
    /// Bare-id triples per KG name.
    pub full_answer_subgraph: BTreeMap<String, Vec<[String; 3]>>,
    pub n_hops: usize,
    pub graph_isomorphism: String,
    pub redundant: bool,
    pub minimal_graph_isomorphism: Option<String>,
    pub minimal_seeds_and_queries: BTreeMap<String, String>,
    pub test_type: Vec<TestType>,
}

const ANSWERS_PREFIX: &str = "all_answers_";
const SUBGRAPH_PREFIX: &str = "full_answer_subgraph_";

impl DatapointRecord {
    /// Renders a validated datapoint as a record, labeling entities and
    /// relations through `label_of`; ids without a label label themselves.
    pub fn from_datapoint(
        dp: &ValidatedDatapoint,
        label_of: impl Fn(&str) -> Option<String>,
    ) -> DatapointRecord {
        let labeled = |id: &str| {
            let label = label_of(id).unwrap_or_else(|| id.to_owned());
            format!("{label} ({id})")
        };
        let labeled_triple =
            |t: &Triple| [labeled(t.head.as_str()), labeled(t.relation.as_str()), labeled(t.tail.as_str())];
        let bare_triple = |t: &Triple| {
            [
                t.head.as_str().to_owned(),
                t.relation.as_str().to_owned(),
                t.tail.as_str().to_owned(),
            ]
        };
        DatapointRecord {
            id: dp.id,
            question: dp.question.clone(),
            paraphrased_question: dp.paraphrased_question.clone(),
            seed_entities: dp.seeds.iter().map(|s| labeled(s.as_str())).collect(),
            answer_node: labeled(dp.answer_node.as_str()),
            answer_subgraph: dp.gt_subgraph.iter().map(labeled_triple).collect(),
            sparql_query: dp.sparql_text.clone(),
            all_answers: dp
                .answer_set
                .iter()
                .map(|(kg, answers)| {
                    (
                        kg.clone(),
                        answers.iter().map(|a| a.as_str().to_owned()).collect(),
                    )
                })
                .collect(),
            full_answer_subgraph: dp
                .full_answer_subgraph
                .iter()
                .map(|(kg, triples)| (kg.clone(), triples.iter().map(bare_triple).collect()))
                .collect(),
            n_hops: dp.n_hops,
            graph_isomorphism: dp.graph_isomorphism.as_str().to_owned(),
            redundant: dp.redundant,
            minimal_graph_isomorphism: dp
                .minimal_graph_isomorphism
                .as_ref()
                .map(|c| c.as_str().to_owned()),
            minimal_seeds_and_queries: dp.minimal_seeds_and_queries.clone(),
            test_type: dp.test_type.iter().copied().collect(),
        }
    }

    /// Recovers the structured datapoint from a record, stripping labels
    /// back to ids. This is a data mapping, not a re-validation.
    pub fn to_datapoint(&self) -> Result<ValidatedDatapoint, RecordError> {
        let field_err = |field: &'static str, reason: String| RecordError::Field {
            id: self.id,
            field,
            reason,
        };
        let entity = |field: &'static str, text: &str| {
            parse_labeled(text)
                .map(|(_, id)| EntityId::new(id))
                .ok_or_else(|| field_err(field, format!("`{text}` is not `Label (ID)`")))
        };
        let seeds = self
            .seed_entities
            .iter()
            .map(|s| entity("seed_entities", s))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let gt_subgraph = self
            .answer_subgraph
            .iter()
            .map(|[h, r, t]| {
                let strip = |text: &str| {
                    parse_labeled(text)
                        .map(|(_, id)| id)
                        .ok_or_else(|| {
                            field_err("answer_subgraph", format!("`{text}` is not `Label (ID)`"))
                        })
                };
                Ok(Triple::new(strip(h)?, strip(r)?, strip(t)?))
            })
            .collect::<Result<BTreeSet<_>, RecordError>>()?;
        let code = |field: &'static str, text: &str| {
            IsomorphismCode::parse(text).map_err(|err| field_err(field, err.to_string()))
        };
        Ok(ValidatedDatapoint {
            id: self.id,
            question: self.question.clone(),
            paraphrased_question: self.paraphrased_question.clone(),
            seeds,
            answer_node: entity("answer_node", &self.answer_node)?,
            gt_subgraph,
            sparql_text: self.sparql_query.clone(),
            answer_set: self
                .all_answers
                .iter()
                .map(|(kg, answers)| {
                    (
                        kg.clone(),
                        answers.iter().map(EntityId::new).collect(),
                    )
                })
                .collect(),
            full_answer_subgraph: self
                .full_answer_subgraph
                .iter()
                .map(|(kg, triples)| {
                    (
                        kg.clone(),
                        triples
                            .iter()
                            .map(|[h, r, t]| Triple::new(h.clone(), r.clone(), t.clone()))
                            .collect(),
                    )
                })
                .collect(),
            n_hops: self.n_hops,
            graph_isomorphism: code("graph_isomorphism", &self.graph_isomorphism)?,
            redundant: self.redundant,
            minimal_graph_isomorphism: self
                .minimal_graph_isomorphism
                .as_deref()
                .map(|c| code("minimal_graph_isomorphism", c))
                .transpose()?,
            minimal_seeds_and_queries: self.minimal_seeds_and_queries.clone(),
            test_type: self.test_type.iter().copied().collect(),
        })
    }
}

/// Splits `Label (ID)` into label and id; the id is the parenthesized
/// suffix and may not itself contain parentheses.
fn parse_labeled(text: &str) -> Option<(String, String)> {
    let open = text.rfind(" (")?;
    let id = text[open + 2..].strip_suffix(')')?;
    if id.is_empty() || id.contains('(') || id.contains(')') {
        return None;
    }
    Some((text[..open].to_owned(), id.to_owned()))
}

impl Serialize for DatapointRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("id", &self.id)?;
        map.serialize_entry("question", &self.question)?;
        map.serialize_entry("paraphrased_question", &self.paraphrased_question)?;
        map.serialize_entry("seed_entities", &self.seed_entities)?;
        map.serialize_entry("answer_node", &self.answer_node)?;
        map.serialize_entry("answer_subgraph", &self.answer_subgraph)?;
        map.serialize_entry("sparql_query", &self.sparql_query)?;
        let kg_names: BTreeSet<&String> = self
            .all_answers
            .keys()
            .chain(self.full_answer_subgraph.keys())
            .collect();
        for kg in kg_names {
            if let Some(answers) = self.all_answers.get(kg) {
                map.serialize_entry(&format!("{ANSWERS_PREFIX}{kg}"), answers)?;
            }
            if let Some(triples) = self.full_answer_subgraph.get(kg) {
                map.serialize_entry(&format!("{SUBGRAPH_PREFIX}{kg}"), triples)?;
            }
        }
        map.serialize_entry("n_hops", &self.n_hops)?;
        map.serialize_entry("graph_isomorphism", &self.graph_isomorphism)?;
        map.serialize_entry("redundant", &self.redundant)?;
        map.serialize_entry("minimal_graph_isomorphism", &self.minimal_graph_isomorphism)?;
        map.serialize_entry("minimal_seeds_and_queries", &self.minimal_seeds_and_queries)?;
        map.serialize_entry("test_type", &self.test_type)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for DatapointRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RecordVisitor;

        impl<'de> Visitor<'de> for RecordVisitor {
            type Value = DatapointRecord;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a datapoint record object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut id = None;
                let mut question = None;
                let mut paraphrased_question = None;
                let mut seed_entities = None;
                let mut answer_node = None;
                let mut answer_subgraph = None;
                let mut sparql_query = None;
                let mut all_answers: BTreeMap<String, Vec<String>> = BTreeMap::new();
                let mut full_answer_subgraph: BTreeMap<String, Vec<[String; 3]>> = BTreeMap::new();
                let mut n_hops = None;
                let mut graph_isomorphism = None;
                let mut redundant = None;
                let mut minimal_graph_isomorphism = None;
                let mut minimal_seeds_and_queries = None;
                let mut test_type = None;

                fn set<T, E: de::Error>(
                    slot: &mut Option<T>,
                    field: &'static str,
                    value: T,
                ) -> Result<(), E> {
                    if slot.is_some() {
                        return Err(de::Error::duplicate_field(field));
                    }
                    *slot = Some(value);
                    Ok(())
                }

                while let Some(key) = access.next_key::<String>()? {
                    match key.as_str() {
                        "id" => set(&mut id, "id", access.next_value()?)?,
                        "question" => set(&mut question, "question", access.next_value()?)?,
                        "paraphrased_question" => set(
                            &mut paraphrased_question,
                            "paraphrased_question",
                            access.next_value()?,
                        )?,
                        "seed_entities" => {
                            set(&mut seed_entities, "seed_entities", access.next_value()?)?
                        }
                        "answer_node" => set(&mut answer_node, "answer_node", access.next_value()?)?,
                        "answer_subgraph" => {
                            set(&mut answer_subgraph, "answer_subgraph", access.next_value()?)?
                        }
                        "sparql_query" => set(&mut sparql_query, "sparql_query", access.next_value()?)?,
                        "n_hops" => set(&mut n_hops, "n_hops", access.next_value()?)?,
                        "graph_isomorphism" => set(
                            &mut graph_isomorphism,
                            "graph_isomorphism",
                            access.next_value()?,
                        )?,
                        "redundant" => set(&mut redundant, "redundant", access.next_value()?)?,
                        "minimal_graph_isomorphism" => set(
                            &mut minimal_graph_isomorphism,
                            "minimal_graph_isomorphism",
                            access.next_value()?,
                        )?,
                        "minimal_seeds_and_queries" => set(
                            &mut minimal_seeds_and_queries,
                            "minimal_seeds_and_queries",
                            access.next_value()?,
                        )?,
                        "test_type" => set(&mut test_type, "test_type", access.next_value()?)?,
                        key if key.starts_with(SUBGRAPH_PREFIX) => {
                            let kg = key[SUBGRAPH_PREFIX.len()..].to_owned();
                            if full_answer_subgraph
                                .insert(kg, access.next_value()?)
                                .is_some()
                            {
                                return Err(de::Error::custom(format!("duplicate field `{key}`")));
                            }
                        }
                        key if key.starts_with(ANSWERS_PREFIX) => {
                            let kg = key[ANSWERS_PREFIX.len()..].to_owned();
                            if all_answers.insert(kg, access.next_value()?).is_some() {
                                return Err(de::Error::custom(format!("duplicate field `{key}`")));
                            }
                        }
                        other => {
                            return Err(de::Error::custom(format!("unknown field `{other}`")))
                        }
                    }
                }

                Ok(DatapointRecord {
                    id: id.ok_or_else(|| de::Error::missing_field("id"))?,
                    question: question.ok_or_else(|| de::Error::missing_field("question"))?,
                    paraphrased_question: paraphrased_question
                        .ok_or_else(|| de::Error::missing_field("paraphrased_question"))?,
                    seed_entities: seed_entities
                        .ok_or_else(|| de::Error::missing_field("seed_entities"))?,
                    answer_node: answer_node
                        .ok_or_else(|| de::Error::missing_field("answer_node"))?,
                    answer_subgraph: answer_subgraph
                        .ok_or_else(|| de::Error::missing_field("answer_subgraph"))?,
                    sparql_query: sparql_query
                        .ok_or_else(|| de::Error::missing_field("sparql_query"))?,
                    all_answers,
                    full_answer_subgraph,
                    n_hops: n_hops.ok_or_else(|| de::Error::missing_field("n_hops"))?,
                    graph_isomorphism: graph_isomorphism
                        .ok_or_else(|| de::Error::missing_field("graph_isomorphism"))?,
                    redundant: redundant.ok_or_else(|| de::Error::missing_field("redundant"))?,
                    minimal_graph_isomorphism: minimal_graph_isomorphism
                        .ok_or_else(|| de::Error::missing_field("minimal_graph_isomorphism"))?,
                    minimal_seeds_and_queries: minimal_seeds_and_queries
                        .ok_or_else(|| de::Error::missing_field("minimal_seeds_and_queries"))?,
                    test_type: test_type.ok_or_else(|| de::Error::missing_field("test_type"))?,
                })
            }
        }

        deserializer.deserialize_map(RecordVisitor)
    }
}

/// Reads a record-per-line file; blank lines are skipped and an empty file
/// yields an empty list.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DatapointRecord>, RecordError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatapointRecord>(&line) {
            Ok(record) => records.push(record),
            Err(err) => {
                let record_id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|id| id.as_u64()));
                return Err(RecordError::Schema {
                    line: n + 1,
                    record_id,
                    detail: err.to_string(),
                });
            }
        }
    }
    Ok(records)
}

/// Writes records one JSON object per line with stable key order.
pub fn write_records(
    records: &[DatapointRecord],
    path: impl AsRef<Path>,
) -> Result<(), RecordError> {
    let mut writer = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// The published example record, shared across module tests.
#[cfg(test)]
pub(crate) fn b4_record() -> DatapointRecord {
    let t = |h: &str, r: &str, t: &str| [h.to_owned(), r.to_owned(), t.to_owned()];
    DatapointRecord {
        id: 40513,
        question: "Who directed the Italian film, originally in French, that is based on \
                   'The Vicomte of Bragelonne: Ten Years Later'?"
            .to_owned(),
        paraphrased_question: "Who was the director of the Italian film, originally in \
                               French, inspired by 'The Vicomte of Bragelonne: Ten Years \
                               Later'?"
            .to_owned(),
        seed_entities: vec![
            "French (Q150)".to_owned(),
            "Italy (Q38)".to_owned(),
            "The Vicomte of Bragelonne: Ten Years Later (Q769001)".to_owned(),
        ],
        answer_node: "Fernando Cerchio (Q503508)".to_owned(),
        answer_subgraph: vec![
            t(
                "Le Vicomte de Bragelonne (Q3228085)",
                "based on (P144)",
                "The Vicomte of Bragelonne: Ten Years Later (Q769001)",
            ),
            t(
                "Le Vicomte de Bragelonne (Q3228085)",
                "original language of film or TV show (P364)",
                "French (Q150)",
            ),
            t(
                "Le Vicomte de Bragelonne (Q3228085)",
                "country of origin (P495)",
                "Italy (Q38)",
            ),
            t(
                "Le Vicomte de Bragelonne (Q3228085)",
                "director (P57)",
                "Fernando Cerchio (Q503508)",
            ),
        ],
        sparql_query: "SELECT ?answer WHERE { ?film wdt:P495 wd:Q38; wdt:P364 wd:Q150; \
                       wdt:P144 wd:Q769001; wdt:P57 ?answer.}"
            .to_owned(),
        all_answers: BTreeMap::from([
            (
                "wikidata".to_owned(),
                vec!["Q503508".to_owned(), "Q679016".to_owned()],
            ),
            ("wikikg2".to_owned(), vec!["Q503508".to_owned()]),
        ]),
        full_answer_subgraph: BTreeMap::from([
            (
                "wikidata".to_owned(),
                vec![
                    t("Q2260875", "P144", "Q769001"),
                    t("Q2260875", "P364", "Q150"),
                    t("Q2260875", "P495", "Q38"),
                    t("Q2260875", "P57", "Q679016"),
                    t("Q3228085", "P144", "Q769001"),
                    t("Q3228085", "P364", "Q150"),
                    t("Q3228085", "P495", "Q38"),
                    t("Q3228085", "P57", "Q503508"),
                ],
            ),
            (
                "wikikg2".to_owned(),
                vec![
                    t("Q3228085", "P144", "Q769001"),
                    t("Q3228085", "P364", "Q150"),
                    t("Q3228085", "P495", "Q38"),
                    t("Q3228085", "P57", "Q503508"),
                ],
            ),
        ]),
        n_hops: 2,
        graph_isomorphism: "((1)(1)(1))".to_owned(),
        redundant: true,
        minimal_graph_isomorphism: Some("((1)(1))".to_owned()),
        minimal_seeds_and_queries: BTreeMap::from([(
            "Q150-Q769001".to_owned(),
            "SELECT ?answer WHERE { ?a wdt:P364 wd:Q150. ?a wdt:P57 ?answer. ?a wdt:P144 \
             wd:Q769001.}"
                .to_owned(),
        )]),
        test_type: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn record_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let records = vec![b4_record()];
        write_records(&records, &path).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn serialized_keys_keep_schema_order() {
        let json = serde_json::to_string(&b4_record()).unwrap();
        let keys = [
            "\"id\"",
            "\"question\"",
            "\"paraphrased_question\"",
            "\"seed_entities\"",
            "\"answer_node\"",
            "\"answer_subgraph\"",
            "\"sparql_query\"",
            "\"all_answers_wikidata\"",
            "\"full_answer_subgraph_wikidata\"",
            "\"all_answers_wikikg2\"",
            "\"full_answer_subgraph_wikikg2\"",
            "\"n_hops\"",
            "\"graph_isomorphism\"",
            "\"redundant\"",
            "\"minimal_graph_isomorphism\"",
            "\"minimal_seeds_and_queries\"",
            "\"test_type\"",
        ];
        let positions: Vec<usize> = keys
            .iter()
            .map(|k| json.find(k).unwrap_or_else(|| panic!("missing key {k}")))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{json}");
    }

    #[test]
    fn missing_field_is_a_schema_error_with_line_and_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut value = serde_json::to_value(b4_record()).unwrap();
        value.as_object_mut().unwrap().remove("sparql_query");
        std::fs::write(&path, format!("{value}\n")).unwrap();
        let err = read_records(&path).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("sparql_query"), "{text}");
        assert!(text.contains("line 1"), "{text}");
        assert!(text.contains("40513"), "{text}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut value = serde_json::to_value(b4_record()).unwrap();
        value
            .as_object_mut()
            .unwrap()
            .insert("bogus".to_owned(), serde_json::json!(1));
        std::fs::write(&path, format!("{value}\n")).unwrap();
        let err = read_records(&path).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn empty_and_blank_files_read_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_records(&path).unwrap().is_empty());
        std::fs::write(&path, "\n\n").unwrap();
        assert!(read_records(&path).unwrap().is_empty());
    }

    #[test]
    fn datapoint_conversion_round_trips() {
        let dp = b4_record().to_datapoint().unwrap();
        assert_eq!(dp.id, 40513);
        assert_eq!(dp.seeds.len(), 3);
        assert!(dp.seeds.contains(&EntityId::new("Q769001")));
        assert_eq!(dp.answer_node, EntityId::new("Q503508"));
        assert_eq!(dp.gt_subgraph.len(), 4);
        assert!(dp
            .gt_subgraph
            .contains(&Triple::new("Q3228085", "P57", "Q503508")));
        assert_eq!(dp.answer_set["wikikg2"], BTreeSet::from([EntityId::new("Q503508")]));
        assert_eq!(dp.graph_isomorphism.as_str(), "((1)(1)(1))");

        // Labels self-derive from ids, so the reverse mapping restores the
        // bare-id fields exactly.
        let record = DatapointRecord::from_datapoint(&dp, |_| None);
        assert_eq!(record.to_datapoint().unwrap(), dp);
        assert_eq!(record.all_answers, b4_record().all_answers);
        assert_eq!(record.full_answer_subgraph, b4_record().full_answer_subgraph);
        assert_eq!(record.seed_entities[0], "Q150 (Q150)");
    }

    #[test]
    fn labeled_rendering_uses_lookup() {
        let dp = b4_record().to_datapoint().unwrap();
        let labels: BTreeMap<&str, &str> = BTreeMap::from([
            ("Q38", "Italy"),
            ("Q150", "French"),
            ("Q769001", "The Vicomte of Bragelonne: Ten Years Later"),
            ("Q503508", "Fernando Cerchio"),
            ("Q3228085", "Le Vicomte de Bragelonne"),
            ("P144", "based on"),
            ("P364", "original language of film or TV show"),
            ("P495", "country of origin"),
            ("P57", "director"),
        ]);
        let record =
            DatapointRecord::from_datapoint(&dp, |id| labels.get(id).map(|l| (*l).to_owned()));
        assert_eq!(record.seed_entities, b4_record().seed_entities);
        assert_eq!(record.answer_node, "Fernando Cerchio (Q503508)");
        assert_eq!(record.answer_subgraph, b4_record().answer_subgraph);
    }

    #[test]
    fn malformed_labeled_entity_is_a_field_error() {
        let mut record = b4_record();
        record.answer_node = "no id here".to_owned();
        let err = record.to_datapoint().unwrap_err();
        assert!(matches!(
            err,
            RecordError::Field {
                id: 40513,
                field: "answer_node",
                ..
            }
        ));

        assert_eq!(parse_labeled("A (b) (Q1)"), Some(("A (b)".to_owned(), "Q1".to_owned())));
        assert_eq!(parse_labeled("A ()"), None);
        assert_eq!(parse_labeled("A"), None);
    }

    #[test]
    fn fuzzed_records_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let word = |rng: &mut ChaCha20Rng| -> String {
            let len = rng.random_range(1..=8);
            (0..len)
                .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
                .collect()
        };
        let mut records = Vec::new();
        for i in 0..50u64 {
            let kgs = rng.random_range(0..=3usize);
            let mut all_answers = BTreeMap::new();
            let mut full = BTreeMap::new();
            for k in 0..kgs {
                let name = format!("kg{k}");
                all_answers.insert(
                    name.clone(),
                    (0..rng.random_range(0..4)).map(|_| word(&mut rng)).collect(),
                );
                full.insert(
                    name,
                    (0..rng.random_range(0..4))
                        .map(|_| [word(&mut rng), word(&mut rng), word(&mut rng)])
                        .collect(),
                );
            }
            records.push(DatapointRecord {
                id: i,
                question: format!("{} {}?", word(&mut rng), word(&mut rng)),
                paraphrased_question: word(&mut rng),
                seed_entities: (0..rng.random_range(1..4))
                    .map(|_| format!("{} (Q{})", word(&mut rng), rng.random_range(0..999)))
                    .collect(),
                answer_node: format!("{} (Q{})", word(&mut rng), rng.random_range(0..999)),
                answer_subgraph: vec![[word(&mut rng), word(&mut rng), word(&mut rng)]],
                sparql_query: word(&mut rng),
                all_answers,
                full_answer_subgraph: full,
                n_hops: rng.random_range(1..5),
                graph_isomorphism: "(1)".to_owned(),
                redundant: rng.random_range(0..2) == 1,
                minimal_graph_isomorphism: if rng.random_range(0..2) == 1 {
                    Some("(1)".to_owned())
                } else {
                    None
                },
                minimal_seeds_and_queries: BTreeMap::new(),
                test_type: match rng.random_range(0..3) {
                    0 => vec![],
                    1 => vec![TestType::InDistribution],
                    _ => vec![TestType::UnseenGraphType, TestType::UnseenRelationType],
                },
            });
        }
        write_records(&records, &path).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }
}
