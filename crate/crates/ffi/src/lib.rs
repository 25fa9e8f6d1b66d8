//! C ABI over the core toolkit.
//!
//! Knowledge graphs travel across the boundary as opaque [`KgqaKg`]
//! pointers; every fallible call returns a [`KgqaStatus`] and records a
//! thread-local message readable through [`kgqa_last_error`]. Strings
//! handed out by this library must be released with [`kgqa_string_free`],
//! graphs with [`kgqa_kg_free`]. Structured results are JSON, which keeps
//! the surface to plain C strings.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Deserialize;

use kgqa_core::kg::{KgError, KnowledgeGraph};
use kgqa_core::sparql::{eval_construct, eval_select, parse_query, to_construct};
use kgqa_core::taxonomy::{isomorphism_code, n_hops, AnswerTree};
use kgqa_core::types::{EntityId, Triple};

/// Result of a fallible call. Anything but `Ok` leaves a message in
/// [`kgqa_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgqaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Reading an input file failed.
    Io = 3,
    /// An input could not be parsed (TSV row, query text, or JSON).
    Parse = 4,
    /// A well-formed request failed to evaluate.
    Eval = 5,
    /// The library panicked; the handle may be in an unusable state.
    Internal = 6,
}

/// An immutable, loaded knowledge graph.
pub struct KgqaKg {
    inner: KnowledgeGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn fail(status: KgqaStatus, message: impl std::fmt::Display) -> KgqaStatus {
    set_error(message);
    status
}

/// Runs a closure, turning panics into `Internal` instead of unwinding
/// across the C boundary.
fn guarded(body: impl FnOnce() -> KgqaStatus) -> KgqaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(KgqaStatus::Internal, "internal panic"),
    }
}

/// # Safety
/// `text` must be null or a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(text: *const c_char, name: &str) -> Result<&'a str, KgqaStatus> {
    if text.is_null() {
        return Err(fail(
            KgqaStatus::NullArgument,
            format!("{name} must not be null"),
        ));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail(KgqaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn give_string(text: String, out: *mut *mut c_char) -> KgqaStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            KgqaStatus::Ok
        }
        Err(_) => fail(KgqaStatus::Eval, "result contains an interior NUL byte"),
    }
}

fn kg_status(err: &KgError) -> KgqaStatus {
    match err {
        KgError::Io(_) => KgqaStatus::Io,
        _ => KgqaStatus::Parse,
    }
}

/// The library version as a static string; never freed.
#[no_mangle]
pub extern "C" fn kgqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The message of the last failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn kgqa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a knowledge graph from a triples TSV and optional label TSVs.
///
/// # Safety
/// `triples_path` must be a valid NUL-terminated string; `label_paths`
/// must point to `n_label_paths` such strings (it may be null when the
/// count is zero); `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_load(
    triples_path: *const c_char,
    label_paths: *const *const c_char,
    n_label_paths: usize,
    out: *mut *mut KgqaKg,
) -> KgqaStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KgqaStatus::NullArgument, "out must not be null");
        }
        if label_paths.is_null() && n_label_paths > 0 {
            return fail(
                KgqaStatus::NullArgument,
                "label_paths must not be null when n_label_paths > 0",
            );
        }
        let triples = match utf8_arg(triples_path, "triples_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut labels = Vec::with_capacity(n_label_paths);
        for i in 0..n_label_paths {
            match utf8_arg(*label_paths.add(i), "label_paths") {
                Ok(s) => labels.push(s),
                Err(status) => return status,
            }
        }
        match KnowledgeGraph::from_paths(triples, &labels) {
            Ok(kg) => {
                *out = Box::into_raw(Box::new(KgqaKg { inner: kg }));
                KgqaStatus::Ok
            }
            Err(err) => fail(kg_status(&err), err),
        }
    })
}

/// Releases a graph returned by [`kgqa_kg_load`]. Null is a no-op.
///
/// # Safety
/// `kg` must be null or a pointer from [`kgqa_kg_load`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_free(kg: *mut KgqaKg) {
    if !kg.is_null() {
        drop(Box::from_raw(kg));
    }
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `text` must be null or a string pointer this library handed out.
#[no_mangle]
pub unsafe extern "C" fn kgqa_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// # Safety
/// `kg` must be null or a live graph pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_num_entities(kg: *const KgqaKg) -> u64 {
    kg.as_ref().map_or(0, |kg| kg.inner.num_entities() as u64)
}

/// # Safety
/// `kg` must be null or a live graph pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_num_relations(kg: *const KgqaKg) -> u64 {
    kg.as_ref().map_or(0, |kg| kg.inner.num_relations() as u64)
}

/// # Safety
/// `kg` must be null or a live graph pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_num_triples(kg: *const KgqaKg) -> u64 {
    kg.as_ref().map_or(0, |kg| kg.inner.num_triples() as u64)
}

/// Sets `out` to whether the exact directed triple is in the graph.
///
/// # Safety
/// `kg` must be a live graph pointer, the strings valid and
/// NUL-terminated, and `out` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_contains_triple(
    kg: *const KgqaKg,
    head: *const c_char,
    relation: *const c_char,
    tail: *const c_char,
    out: *mut bool,
) -> KgqaStatus {
    guarded(|| {
        let Some(kg) = kg.as_ref() else {
            return fail(KgqaStatus::NullArgument, "kg must not be null");
        };
        if out.is_null() {
            return fail(KgqaStatus::NullArgument, "out must not be null");
        }
        let (head, relation, tail) = match (
            utf8_arg(head, "head"),
            utf8_arg(relation, "relation"),
            utf8_arg(tail, "tail"),
        ) {
            (Ok(h), Ok(r), Ok(t)) => (h, r, t),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        *out = kg.inner.contains_triple(&Triple::new(head, relation, tail));
        KgqaStatus::Ok
    })
}

/// Returns the label of `id` through `out`, or `id` itself when the
/// graph has no label for it.
///
/// # Safety
/// `kg` must be a live graph pointer, `id` a valid NUL-terminated
/// string, and `out` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_label(
    kg: *const KgqaKg,
    id: *const c_char,
    out: *mut *mut c_char,
) -> KgqaStatus {
    guarded(|| {
        let Some(kg) = kg.as_ref() else {
            return fail(KgqaStatus::NullArgument, "kg must not be null");
        };
        if out.is_null() {
            return fail(KgqaStatus::NullArgument, "out must not be null");
        }
        let id = match utf8_arg(id, "id") {
            Ok(s) => s,
            Err(status) => return status,
        };
        give_string(kg.inner.label(id).to_owned(), out)
    })
}

/// Evaluates a SELECT query and returns the sorted answer ids as a JSON
/// array of strings through `out_json`.
///
/// # Safety
/// `kg` must be a live graph pointer, `query` a valid NUL-terminated
/// string, and `out_json` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_select(
    kg: *const KgqaKg,
    query: *const c_char,
    out_json: *mut *mut c_char,
) -> KgqaStatus {
    guarded(|| {
        let Some(kg) = kg.as_ref() else {
            return fail(KgqaStatus::NullArgument, "kg must not be null");
        };
        if out_json.is_null() {
            return fail(KgqaStatus::NullArgument, "out_json must not be null");
        }
        let query = match utf8_arg(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ast = match parse_query(query) {
            Ok(ast) => ast,
            Err(err) => return fail(KgqaStatus::Parse, err),
        };
        let answers = match eval_select(&kg.inner, &ast) {
            Ok(answers) => answers,
            Err(err) => return fail(KgqaStatus::Eval, err),
        };
        let ids: Vec<&str> = answers.iter().map(EntityId::as_str).collect();
        give_string(serde_json::to_string(&ids).expect("string array"), out_json)
    })
}

/// Evaluates the CONSTRUCT form of a query and returns the matched
/// triples as a JSON array of `[head, relation, tail]` arrays.
///
/// # Safety
/// `kg` must be a live graph pointer, `query` a valid NUL-terminated
/// string, and `out_json` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_kg_construct(
    kg: *const KgqaKg,
    query: *const c_char,
    out_json: *mut *mut c_char,
) -> KgqaStatus {
    guarded(|| {
        let Some(kg) = kg.as_ref() else {
            return fail(KgqaStatus::NullArgument, "kg must not be null");
        };
        if out_json.is_null() {
            return fail(KgqaStatus::NullArgument, "out_json must not be null");
        }
        let query = match utf8_arg(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ast = match parse_query(query) {
            Ok(ast) => ast,
            Err(err) => return fail(KgqaStatus::Parse, err),
        };
        let triples = match eval_construct(&kg.inner, &to_construct(&ast)) {
            Ok(triples) => triples,
            Err(err) => return fail(KgqaStatus::Eval, err),
        };
        give_string(
            serde_json::to_string(&triples).expect("triple array"),
            out_json,
        )
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeInput {
    triples: Vec<[String; 3]>,
    seeds: Vec<String>,
    answer: String,
}

/// Classifies an answer tree given as JSON
/// `{"triples": [[h,r,t],...], "seeds": [...], "answer": "..."}` and
/// returns `{"isomorphism": "...", "n_hops": N}` through `out_json`.
///
/// # Safety
/// `tree_json` must be a valid NUL-terminated string and `out_json` a
/// valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn kgqa_classify_tree(
    tree_json: *const c_char,
    out_json: *mut *mut c_char,
) -> KgqaStatus {
    guarded(|| {
        if out_json.is_null() {
            return fail(KgqaStatus::NullArgument, "out_json must not be null");
        }
        let text = match utf8_arg(tree_json, "tree_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let input: TreeInput = match serde_json::from_str(text) {
            Ok(input) => input,
            Err(err) => return fail(KgqaStatus::Parse, err),
        };
        let tree = AnswerTree::new(
            input
                .triples
                .iter()
                .map(|[h, r, t]| Triple::new(h.as_str(), r.as_str(), t.as_str())),
            input.seeds.iter().map(|s| EntityId::new(s.as_str())),
            EntityId::new(input.answer.as_str()),
        );
        let code = match isomorphism_code(&tree) {
            Ok(code) => code,
            Err(err) => return fail(KgqaStatus::Eval, err),
        };
        let result = serde_json::json!({
            "isomorphism": code.as_str(),
            "n_hops": n_hops(&tree),
        });
        give_string(result.to_string(), out_json)
    })
}
