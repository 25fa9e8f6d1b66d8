//! Exercises the C surface end to end from Rust.

use std::ffi::{c_char, CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use kgqa_ffi::{
    kgqa_classify_tree, kgqa_kg_construct, kgqa_kg_contains_triple, kgqa_kg_free, kgqa_kg_label,
    kgqa_kg_load, kgqa_kg_num_entities, kgqa_kg_num_relations, kgqa_kg_num_triples,
    kgqa_kg_select, kgqa_last_error, kgqa_string_free, kgqa_version, KgqaKg, KgqaStatus,
};
use tempfile::TempDir;

fn cstring(text: &str) -> CString {
    CString::new(text).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(kgqa_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

/// Takes ownership of an out-string and frees the C allocation.
unsafe fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let text = CStr::from_ptr(ptr).to_str().unwrap().to_owned();
    kgqa_string_free(ptr);
    text
}

fn kg_files(dir: &TempDir) -> (PathBuf, PathBuf) {
    let triples = dir.path().join("graph.tsv");
    fs::write(
        &triples,
        "Q3228085\tP144\tQ769001\n\
         Q3228085\tP364\tQ150\n\
         Q3228085\tP495\tQ38\n\
         Q3228085\tP57\tQ503508\n\
         Q2260875\tP144\tQ769001\n\
         Q2260875\tP364\tQ150\n\
         Q2260875\tP495\tQ38\n\
         Q2260875\tP57\tQ679016\n",
    )
    .unwrap();
    let labels = dir.path().join("labels.tsv");
    fs::write(&labels, "Q503508\tFernando Cerchio\nP57\tdirector\n").unwrap();
    (triples, labels)
}

unsafe fn load(triples: &Path, labels: &Path) -> *mut KgqaKg {
    let triples = cstring(triples.to_str().unwrap());
    let labels = cstring(labels.to_str().unwrap());
    let label_ptrs = [labels.as_ptr()];
    let mut kg: *mut KgqaKg = ptr::null_mut();
    let status = kgqa_kg_load(triples.as_ptr(), label_ptrs.as_ptr(), 1, &mut kg);
    assert_eq!(status, KgqaStatus::Ok, "load failed: {}", last_error());
    assert!(!kg.is_null());
    kg
}

#[test]
fn version_matches_the_crate() {
    let version = unsafe { CStr::from_ptr(kgqa_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_query_and_free_roundtrip() {
    let dir = TempDir::new().unwrap();
    let (triples, labels) = kg_files(&dir);
    unsafe {
        let kg = load(&triples, &labels);
        assert_eq!(kgqa_kg_num_entities(kg), 7);
        assert_eq!(kgqa_kg_num_relations(kg), 4);
        assert_eq!(kgqa_kg_num_triples(kg), 8);

        let (h, r, t) = (cstring("Q3228085"), cstring("P57"), cstring("Q503508"));
        let mut present = false;
        let status = kgqa_kg_contains_triple(kg, h.as_ptr(), r.as_ptr(), t.as_ptr(), &mut present);
        assert_eq!(status, KgqaStatus::Ok);
        assert!(present);
        let inverted =
            kgqa_kg_contains_triple(kg, t.as_ptr(), r.as_ptr(), h.as_ptr(), &mut present);
        assert_eq!(inverted, KgqaStatus::Ok);
        assert!(!present, "direction matters");

        let mut out: *mut c_char = ptr::null_mut();
        let id = cstring("Q503508");
        assert_eq!(kgqa_kg_label(kg, id.as_ptr(), &mut out), KgqaStatus::Ok);
        assert_eq!(take_string(out), "Fernando Cerchio");
        let unlabeled = cstring("Q769001");
        assert_eq!(kgqa_kg_label(kg, unlabeled.as_ptr(), &mut out), KgqaStatus::Ok);
        assert_eq!(take_string(out), "Q769001", "falls back to the id");

        let query = cstring(
            "SELECT ?answer WHERE { ?film wdt:P495 wd:Q38; wdt:P364 wd:Q150; \
             wdt:P144 wd:Q769001; wdt:P57 ?answer.}",
        );
        assert_eq!(kgqa_kg_select(kg, query.as_ptr(), &mut out), KgqaStatus::Ok);
        let answers: Vec<String> = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(answers, ["Q503508", "Q679016"]);

        assert_eq!(kgqa_kg_construct(kg, query.as_ptr(), &mut out), KgqaStatus::Ok);
        let subgraph: Vec<[String; 3]> = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(subgraph.len(), 8);

        kgqa_kg_free(kg);
        kgqa_kg_free(ptr::null_mut());
        kgqa_string_free(ptr::null_mut());
    }
}

#[test]
fn classify_tree_reports_code_and_hops() {
    let tree = cstring(
        r#"{
            "triples": [
                ["Q3228085", "P144", "Q769001"],
                ["Q3228085", "P364", "Q150"],
                ["Q3228085", "P495", "Q38"],
                ["Q3228085", "P57", "Q503508"]
            ],
            "seeds": ["Q150", "Q38", "Q769001"],
            "answer": "Q503508"
        }"#,
    );
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { kgqa_classify_tree(tree.as_ptr(), &mut out) };
    assert_eq!(status, KgqaStatus::Ok, "classify failed: {}", last_error());
    let result: serde_json::Value = serde_json::from_str(&unsafe { take_string(out) }).unwrap();
    assert_eq!(result["isomorphism"], "((1)(1)(1))");
    assert_eq!(result["n_hops"], 2);
}

#[test]
fn failures_set_status_and_message() {
    let mut out: *mut c_char = ptr::null_mut();
    unsafe {
        let mut kg: *mut KgqaKg = ptr::null_mut();
        let status = kgqa_kg_load(ptr::null(), ptr::null(), 0, &mut kg);
        assert_eq!(status, KgqaStatus::NullArgument);
        assert!(last_error().contains("triples_path"));

        let missing = cstring("/nonexistent/graph.tsv");
        let status = kgqa_kg_load(missing.as_ptr(), ptr::null(), 0, &mut kg);
        assert_eq!(status, KgqaStatus::Io);
        assert!(kg.is_null(), "out stays untouched on failure");

        let bad_utf8 = CString::new([0xffu8, 0xfe]).unwrap();
        let status = kgqa_kg_load(bad_utf8.as_ptr(), ptr::null(), 0, &mut kg);
        assert_eq!(status, KgqaStatus::InvalidUtf8);
        assert!(last_error().contains("UTF-8"));

        let not_json = cstring("not json");
        assert_eq!(
            kgqa_classify_tree(not_json.as_ptr(), &mut out),
            KgqaStatus::Parse
        );

        let detached = cstring(
            r#"{"triples": [["A", "r", "B"]], "seeds": ["C"], "answer": "B"}"#,
        );
        assert_eq!(
            kgqa_classify_tree(detached.as_ptr(), &mut out),
            KgqaStatus::Eval
        );
        assert!(!last_error().is_empty());
    }
}

#[test]
fn malformed_graph_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.tsv");
    fs::write(&path, "only\ttwo\n").unwrap();
    let triples = cstring(path.to_str().unwrap());
    let mut kg: *mut KgqaKg = ptr::null_mut();
    let status = unsafe { kgqa_kg_load(triples.as_ptr(), ptr::null(), 0, &mut kg) };
    assert_eq!(status, KgqaStatus::Parse);
    assert!(last_error().contains("line 1"), "got: {}", last_error());
}

#[test]
fn bad_query_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let (triples, labels) = kg_files(&dir);
    unsafe {
        let kg = load(&triples, &labels);
        let mut out: *mut c_char = ptr::null_mut();
        let query = cstring("SELECT WHERE {");
        assert_eq!(
            kgqa_kg_select(kg, query.as_ptr(), &mut out),
            KgqaStatus::Parse
        );
        kgqa_kg_free(kg);
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kgqa.h");
    let text = fs::read_to_string(&header).expect("header generated at build time");
    for symbol in [
        "typedef struct KgqaKg KgqaKg;",
        "KGQA_STATUS_OK",
        "kgqa_kg_load",
        "kgqa_classify_tree",
        "kgqa_string_free",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    let status = Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror"])
        .arg(&header)
        .status()
        .expect("cc is available");
    assert!(status.success(), "header does not compile as C99");
}
