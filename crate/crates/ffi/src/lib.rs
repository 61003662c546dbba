//! C ABI over the spanlink dictionary matcher and span model.
//!
//! Handles are opaque pointers created by `sl_*_load`/`sl_*_from_*` calls and
//! released with the matching `sl_*_free`. Every fallible call returns an
//! [`SlStatus`]; on failure the message is available from
//! [`sl_last_error_message`] on the same thread. Strings returned through out
//! parameters are owned by the caller and must be released with
//! [`sl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde_json::json;
use spanlink::corpus::{PubtatorRecord, RawDocument};
use spanlink::lexicon::parse_medic;
use spanlink::matcher::{NgramConfig, SynonymIndex};
use spanlink::pipeline::{predict_documents, prepare_document};
use spanlink::spanmodel::{read_checkpoint, SpanModel};
use spanlink::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid configuration or argument value.
    Config = 3,
    /// Malformed or inconsistent input data, or an I/O failure.
    Data = 4,
    /// Non-finite values during computation.
    Numeric = 5,
    /// The requested concept id is not in the dictionary.
    NotFound = 6,
    /// A panic was caught at the boundary.
    Internal = 7,
}

impl From<&Error> for SlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => SlStatus::Config,
            Error::Numeric(_) => SlStatus::Numeric,
            _ => SlStatus::Data,
        }
    }
}

/// A dictionary matcher: TF-IDF synonym index over a concept inventory.
pub struct SlMatcher {
    index: SynonymIndex,
}

/// A trained span model bound to the matcher it was trained with.
pub struct SlModel {
    model: SpanModel,
    index: SynonymIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg);
    status
}

fn fail_with(e: Error) -> SlStatus {
    fail(SlStatus::from(&e), e.to_string())
}

/// Runs `f` with panics converted into [`SlStatus::Internal`] and clears the
/// last error on success.
fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SlStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(SlStatus::Internal, "panic inside spanlink"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SlStatus> {
    if p.is_null() {
        return Err(fail(SlStatus::NullArgument, format!("{what} is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string valid for this call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(SlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn out_string(out: *mut *mut c_char, s: String) -> SlStatus {
    match CString::new(s) {
        Ok(c) => {
            // SAFETY: `out` was checked non-null by the caller of this helper.
            unsafe { *out = c.into_raw() };
            SlStatus::Ok
        }
        Err(_) => fail(SlStatus::Internal, "output contains a NUL byte"),
    }
}

fn load_index(path: &str) -> Result<SynonymIndex, Error> {
    SynonymIndex::read_from(BufReader::new(File::open(Path::new(path))?))
}

/// Message of the last failed call on this thread, or null if the last call
/// succeeded. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw in `out_string`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Builds a matcher from MEDIC TSV text with the default n-gram settings.
///
/// # Safety
/// `medic_tsv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_from_medic_text(
    medic_tsv: *const c_char,
    out: *mut *mut SlMatcher,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is null");
        }
        let text = match unsafe { str_arg(medic_tsv, "medic_tsv") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        let built = parse_medic(text, "medic")
            .and_then(|inv| SynonymIndex::from_inventory(&inv, NgramConfig::default()));
        match built {
            Ok(index) => {
                // SAFETY: checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(SlMatcher { index })) };
                SlStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Loads a matcher from a dictionary file written by `spanlink build-dict`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_load(
    path: *const c_char,
    out: *mut *mut SlMatcher,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is null");
        }
        let path = match unsafe { str_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_index(path) {
            Ok(index) => {
                // SAFETY: checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(SlMatcher { index })) };
                SlStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_free(m: *mut SlMatcher) {
    if !m.is_null() {
        // SAFETY: produced by Box::into_raw in a constructor above.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Number of concepts in the matcher's inventory, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_concept_count(m: *const SlMatcher) -> usize {
    // SAFETY: live handle per contract.
    unsafe { m.as_ref() }.map_or(0, |m| m.index.concept_count())
}

/// Dictionary similarity between `text` and the best synonym of `cui`.
///
/// # Safety
/// `m` must be a live handle; strings NUL-terminated; `out_score` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_dict_score(
    m: *const SlMatcher,
    text: *const c_char,
    cui: *const c_char,
    out_score: *mut f64,
) -> SlStatus {
    guard(|| {
        // SAFETY: live handle per contract.
        let Some(m) = (unsafe { m.as_ref() }) else {
            return fail(SlStatus::NullArgument, "matcher is null");
        };
        if out_score.is_null() {
            return fail(SlStatus::NullArgument, "out_score is null");
        }
        let (text, cui) = match unsafe { (str_arg(text, "text"), str_arg(cui, "cui")) } {
            (Ok(t), Ok(c)) => (t, c),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let Some(concept) = m.index.resolve_cui(cui) else {
            return fail(SlStatus::NotFound, format!("unknown concept id {cui}"));
        };
        // SAFETY: checked non-null above.
        unsafe { *out_score = m.index.dict_score(text, concept) };
        SlStatus::Ok
    })
}

/// The `k` best concepts for `text` as a JSON array of
/// `{"cui": ..., "score": ...}`, best first. Zero-similarity concepts are
/// never listed.
///
/// # Safety
/// `m` must be a live handle; `text` NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_matcher_top_k(
    m: *const SlMatcher,
    text: *const c_char,
    k: usize,
    out_json: *mut *mut c_char,
) -> SlStatus {
    guard(|| {
        // SAFETY: live handle per contract.
        let Some(m) = (unsafe { m.as_ref() }) else {
            return fail(SlStatus::NullArgument, "matcher is null");
        };
        if out_json.is_null() {
            return fail(SlStatus::NullArgument, "out_json is null");
        }
        let text = match unsafe { str_arg(text, "text") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        let hits: Vec<_> = m
            .index
            .top_k(text, k)
            .into_iter()
            .map(|(c, s)| json!({"cui": m.index.concept_cui(c).unwrap_or_default(), "score": s}))
            .collect();
        out_string(out_json, serde_json::Value::Array(hits).to_string())
    })
}

/// Loads a baseline-encoder checkpoint together with the dictionary file it
/// was trained with.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_model_load(
    checkpoint_path: *const c_char,
    dictionary_path: *const c_char,
    out: *mut *mut SlModel,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is null");
        }
        let (ck, dict) = match unsafe {
            (
                str_arg(checkpoint_path, "checkpoint_path"),
                str_arg(dictionary_path, "dictionary_path"),
            )
        } {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let loaded = (|| {
            let ck = read_checkpoint(BufReader::new(File::open(ck)?))?;
            let index = load_index(dict)?;
            if ck.inventory_hash != index.inventory_hash() {
                return Err(Error::Config(
                    "checkpoint was trained with a different dictionary".into(),
                ));
            }
            if !ck.model.encoder.is_trainable() {
                return Err(Error::Config(
                    "precomputed-embedding checkpoints are not supported here".into(),
                ));
            }
            Ok(SlModel {
                model: ck.model,
                index,
            })
        })();
        match loaded {
            Ok(m) => {
                // SAFETY: checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(m)) };
                SlStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sl_model_free(m: *mut SlModel) {
    if !m.is_null() {
        // SAFETY: produced by Box::into_raw in `sl_model_load`.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Recognizes and normalizes disease mentions in one document. The result is
/// a JSON array of `{"start", "end", "text", "cui", "score", "context",
/// "dict"}` with character offsets into `title + " " + abstract`.
///
/// # Safety
/// `m` must be a live handle; strings NUL-terminated (`abstract_text` may be
/// empty); `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_model_predict(
    m: *const SlModel,
    title: *const c_char,
    abstract_text: *const c_char,
    out_json: *mut *mut c_char,
) -> SlStatus {
    guard(|| {
        // SAFETY: live handle per contract.
        let Some(m) = (unsafe { m.as_ref() }) else {
            return fail(SlStatus::NullArgument, "model is null");
        };
        if out_json.is_null() {
            return fail(SlStatus::NullArgument, "out_json is null");
        }
        let (title, abstract_text) = match unsafe {
            (
                str_arg(title, "title"),
                str_arg(abstract_text, "abstract_text"),
            )
        } {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let record = PubtatorRecord {
            document: RawDocument {
                doc_id: "0".into(),
                title: title.into(),
                abstract_text: abstract_text.into(),
            },
            mentions: Vec::new(),
        };
        let preds = prepare_document(record, None)
            .and_then(|doc| predict_documents(&m.model, &m.index, &[doc]));
        match preds {
            Ok(preds) => {
                let items: Vec<_> = preds
                    .iter()
                    .map(|p| {
                        json!({
                            "start": p.char_start,
                            "end": p.char_end,
                            "text": p.surface,
                            "cui": p.cui,
                            "score": p.combined,
                            "context": p.context,
                            "dict": p.dict,
                        })
                    })
                    .collect();
                out_string(out_json, serde_json::Value::Array(items).to_string())
            }
            Err(e) => fail_with(e),
        }
    })
}
