//! C ABI over the lptrace pipeline.
//!
//! A session collects program sources and `#const` overrides, then runs
//! into a result that owns the rendered output. Every handle is opaque and
//! must be released with its `_free` function. Functions return an
//! [`LptStatus`]; on failure a message is available from
//! [`lpt_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lptrace::pipeline::{self, Options, Source};
use lptrace::render::{render, Format, RenderOptions};
use lptrace::syntax::{parse_const_override, Term};
use lptrace::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LptStatus {
    Ok = 0,
    /// The run succeeded and the program has no answer set.
    Unsatisfiable = 1,
    NullArgument = 2,
    InvalidUtf8 = 3,
    /// Lexical, syntax, annotation or safety error, or an unsupported construct.
    ParseError = 4,
    TranslationError = 5,
    /// Arithmetic failure during grounding.
    EvalError = 6,
    InvalidArgument = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LptFormat {
    Text = 0,
    Structured = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LptOptions {
    /// Number of answer sets to compute; 0 means all.
    pub models: u32,
    pub auto_trace: bool,
    pub format: LptFormat,
    /// Explanations kept per atom; 0 means no cap.
    pub max_expls: u32,
    pub show_model: bool,
}

/// Sources and constant overrides waiting to be run.
pub struct LptSession {
    sources: Vec<Source>,
    consts: BTreeMap<String, Term>,
}

/// Rendered output of one run.
pub struct LptResult {
    output: CString,
    answers: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LptStatus {
    match e {
        Error::Lex { .. }
        | Error::Syntax { .. }
        | Error::Unsupported { .. }
        | Error::Annotation { .. }
        | Error::AnnotationBinding { .. }
        | Error::AnnotationArity { .. }
        | Error::Safety { .. } => LptStatus::ParseError,
        Error::Translation { .. } => LptStatus::TranslationError,
        Error::Eval { .. } => LptStatus::EvalError,
        Error::Io { .. } => LptStatus::InvalidArgument,
        Error::NoSupport { .. } | Error::Internal(_) => LptStatus::Internal,
    }
}

fn fail(e: Error) -> LptStatus {
    set_error(e.to_string());
    status_of(&e)
}

/// Runs `f`, turning a panic into [`LptStatus::Panic`].
fn guard(f: impl FnOnce() -> LptStatus) -> LptStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("panic inside lptrace");
        LptStatus::Panic
    })
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, LptStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(LptStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        LptStatus::InvalidUtf8
    })
}

#[no_mangle]
pub extern "C" fn lpt_options_default() -> LptOptions {
    LptOptions {
        models: 0,
        auto_trace: false,
        format: LptFormat::Text,
        max_expls: 0,
        show_model: false,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lpt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn lpt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn lpt_session_new() -> *mut LptSession {
    Box::into_raw(Box::new(LptSession {
        sources: Vec::new(),
        consts: BTreeMap::new(),
    }))
}

/// # Safety
/// `session` must be null or a pointer from [`lpt_session_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn lpt_session_free(session: *mut LptSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Appends a source; sources are concatenated in the order added. `name`
/// is used in diagnostics.
///
/// # Safety
/// `session` must be a live session; `name` and `text` NUL-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn lpt_session_add_source(
    session: *mut LptSession,
    name: *const c_char,
    text: *const c_char,
) -> LptStatus {
    guard(|| {
        let Some(s) = session.as_mut() else {
            set_error("session is null");
            return LptStatus::NullArgument;
        };
        let (name, text) = match (str_arg(name, "name"), str_arg(text, "text")) {
            (Ok(n), Ok(t)) => (n, t),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        s.sources.push(Source::new(name, text));
        LptStatus::Ok
    })
}

/// Overrides `#const name`, as `-c name=value` does on the command line.
///
/// # Safety
/// `session` must be a live session; `name` and `value` NUL-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn lpt_session_set_const(
    session: *mut LptSession,
    name: *const c_char,
    value: *const c_char,
) -> LptStatus {
    guard(|| {
        let Some(s) = session.as_mut() else {
            set_error("session is null");
            return LptStatus::NullArgument;
        };
        let (name, value) = match (str_arg(name, "name"), str_arg(value, "value")) {
            (Ok(n), Ok(v)) => (n, v),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        match parse_const_override(&format!("{name}={value}")) {
            Ok((n, v)) => {
                s.consts.insert(n, v);
                LptStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                LptStatus::InvalidArgument
            }
        }
    })
}

/// Parses, solves and explains the session's program. On `Ok` and
/// `Unsatisfiable`, `*out` receives a result to release with
/// [`lpt_result_free`]; otherwise `*out` is set to null. `options` may be
/// null for the defaults.
///
/// # Safety
/// `session` must be a live session, `options` null or valid, and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpt_session_run(
    session: *const LptSession,
    options: *const LptOptions,
    out: *mut *mut LptResult,
) -> LptStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return LptStatus::NullArgument;
        }
        *out = ptr::null_mut();
        let Some(s) = session.as_ref() else {
            set_error("session is null");
            return LptStatus::NullArgument;
        };
        let o = options.as_ref().copied().unwrap_or_else(|| lpt_options_default());
        if s.sources.is_empty() {
            set_error("no sources added");
            return LptStatus::InvalidArgument;
        }
        let opts = Options {
            models: o.models as usize,
            auto_trace: o.auto_trace,
            consts: s.consts.clone(),
            max_expls: (o.max_expls > 0).then_some(o.max_expls as usize),
        };
        let answers = match pipeline::run_sources(&s.sources, &opts) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let format = match o.format {
            LptFormat::Text => Format::Text,
            LptFormat::Structured => Format::Structured,
        };
        let text = if answers.is_empty() && format == Format::Text {
            "UNSATISFIABLE\n".to_string()
        } else {
            render(
                &answers,
                RenderOptions {
                    format,
                    show_model: o.show_model,
                },
            )
        };
        let Ok(output) = CString::new(text) else {
            set_error("output contains a NUL byte");
            return LptStatus::Internal;
        };
        let status = if answers.is_empty() {
            LptStatus::Unsatisfiable
        } else {
            LptStatus::Ok
        };
        *out = Box::into_raw(Box::new(LptResult {
            output,
            answers: answers.len(),
        }));
        status
    })
}

/// Rendered output, owned by `result`. Null if `result` is null.
///
/// # Safety
/// `result` must be null or a live result.
#[no_mangle]
pub unsafe extern "C" fn lpt_result_output(result: *const LptResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.output.as_ptr())
}

/// # Safety
/// `result` must be null or a live result.
#[no_mangle]
pub unsafe extern "C" fn lpt_result_answer_count(result: *const LptResult) -> usize {
    result.as_ref().map_or(0, |r| r.answers)
}

/// # Safety
/// `result` must be null or a pointer from [`lpt_session_run`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn lpt_result_free(result: *mut LptResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
