use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lptrace_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = lpt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

/// Runs `src` and returns status and output.
fn run(src: &str, opts: &LptOptions) -> (LptStatus, Option<String>, usize) {
    unsafe {
        let s = lpt_session_new();
        assert_eq!(
            lpt_session_add_source(s, c("t.lp").as_ptr(), c(src).as_ptr()),
            LptStatus::Ok
        );
        let mut r = ptr::null_mut();
        let status = lpt_session_run(s, opts, &mut r);
        let out = (!r.is_null()).then(|| CStr::from_ptr(lpt_result_output(r)).to_str().unwrap().to_string());
        let n = lpt_result_answer_count(r);
        lpt_result_free(r);
        lpt_session_free(s);
        (status, out, n)
    }
}

#[test]
fn explains_a_program() {
    let (status, out, n) = run("%!trace_rule {\"fact\"}\np.", &lpt_options_default());
    assert_eq!(status, LptStatus::Ok);
    assert_eq!(n, 1);
    assert_eq!(out.unwrap(), "Answer: 1\n>> p\t[1]\n  *\n  |__\"fact\"\n\n\n");
}

#[test]
fn structured_and_limits() {
    let opts = LptOptions {
        models: 1,
        format: LptFormat::Structured,
        show_model: true,
        ..lpt_options_default()
    };
    let (status, out, n) = run("a :- not b. b :- not a.", &opts);
    assert_eq!((status, n), (LptStatus::Ok, 1));
    let v: serde_json::Value = serde_json::from_str(&out.unwrap()).unwrap();
    assert_eq!(v["format_version"], "1");
}

#[test]
fn unsatisfiable_still_gives_output() {
    let (status, out, n) = run("p. :- p.", &lpt_options_default());
    assert_eq!((status, n), (LptStatus::Unsatisfiable, 0));
    assert_eq!(out.as_deref(), Some("UNSATISFIABLE\n"));
}

#[test]
fn errors_map_to_codes() {
    let (status, out, _) = run("p(X) :- not q(X).", &lpt_options_default());
    assert_eq!(status, LptStatus::ParseError);
    assert!(out.is_none());
    assert!(last_error().contains("t.lp:1:1"), "{}", last_error());

    assert_eq!(run("{ p }.", &lpt_options_default()).0, LptStatus::ParseError);
    assert_eq!(
        run("%!trace_rule {\"x\"}\n:- p.", &lpt_options_default()).0,
        LptStatus::TranslationError
    );
    assert_eq!(run("p(a+1).", &lpt_options_default()).0, LptStatus::EvalError);
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        assert_eq!(
            lpt_session_add_source(ptr::null_mut(), ptr::null(), ptr::null()),
            LptStatus::NullArgument
        );
        let s = lpt_session_new();
        assert_eq!(
            lpt_session_add_source(s, c("a").as_ptr(), ptr::null()),
            LptStatus::NullArgument
        );
        let bad = [0xffu8, 0];
        assert_eq!(
            lpt_session_add_source(s, c("a").as_ptr(), bad.as_ptr().cast()),
            LptStatus::InvalidUtf8
        );
        assert_eq!(
            lpt_session_set_const(s, c("n").as_ptr(), c("X").as_ptr()),
            LptStatus::InvalidArgument
        );
        let mut r = ptr::null_mut();
        assert_eq!(lpt_session_run(s, ptr::null(), &mut r), LptStatus::InvalidArgument);
        assert!(r.is_null());
        assert_eq!(
            lpt_session_run(s, ptr::null(), ptr::null_mut()),
            LptStatus::NullArgument
        );
        lpt_session_free(s);
        lpt_session_free(ptr::null_mut());
        lpt_result_free(ptr::null_mut());
        assert!(lpt_result_output(ptr::null()).is_null());
    }
}

#[test]
fn error_cleared_by_next_call() {
    run("p(X).", &lpt_options_default());
    assert!(!lpt_last_error_message().is_null());
    run("p.", &lpt_options_default());
    assert!(lpt_last_error_message().is_null());
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(lpt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = include_dir().join("lptrace.h");
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++11")] {
        let status = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", std, "-x", lang])
            .arg(&header)
            .status()
            .expect("run cc");
        assert!(status.success(), "{lang}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    // the test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblptrace_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c"))
        .arg("-I")
        .arg(include_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run cc");
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains(">> p(3)\t[8]"));
}
