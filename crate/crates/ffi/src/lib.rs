//! C ABI over the planspace engine.
//!
//! Objects are opaque handles created by `ps_*_new` and released with the
//! matching `ps_*_free`. Structured data crosses the boundary as UTF-8 JSON
//! strings. Every fallible call returns a [`PsStatus`]; on failure the
//! message and the engine error code of the calling thread are available
//! through [`ps_last_error_message`] and [`ps_last_error_code`]. Strings
//! returned through out-parameters are owned by the caller and released
//! with [`ps_string_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use planspace::mugs::{answer_question, MugsCatalog, Question};
use planspace::planner::SearchConfig;
use planspace::properties::{PlanProperty, PropId};
use planspace::session::{
    plan_selection, PlanOutcome, Project, Session, SessionContext, SessionError, StudyConfig, StudyRecord,
    SystemClock, Clock,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    /// Parsing or grounding failed.
    Task = 4,
    /// A property did not parse or resolve.
    Property = 5,
    /// The selection has no plan; the MUGS are in the output JSON.
    Unsolvable = 6,
    /// A study limit was hit.
    Limit = 7,
    /// Any other engine error; see the error code string.
    Engine = 8,
    Panic = 9,
}

/// A grounded task with its plan properties.
pub struct PsProject {
    project: Project,
}

/// Minimal unsolvable subsets of a project's soft properties.
pub struct PsCatalog {
    catalog: MugsCatalog,
}

/// An iterative-planning session.
pub struct PsSession {
    session: Session,
    ctx: Arc<SessionContext>,
}

thread_local! {
    static LAST_ERROR: RefCell<(CString, CString)> = RefCell::new((CString::default(), CString::default()));
}

struct Error {
    status: PsStatus,
    code: String,
    message: String,
}

impl Error {
    fn new(status: PsStatus, code: &str, message: impl ToString) -> Self {
        Error { status, code: code.to_string(), message: message.to_string() }
    }
}

impl From<SessionError> for Error {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::Pddl(_) => PsStatus::Task,
            SessionError::Property(_) => PsStatus::Property,
            _ if e.is_limit() => PsStatus::Limit,
            _ => PsStatus::Engine,
        };
        Error::new(status, e.code(), &e)
    }
}

fn sanitize(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed")
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> PsStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err(Error::new(PsStatus::Panic, "PANIC", "internal panic")));
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = (CString::default(), CString::default()));
            PsStatus::Ok
        }
        Err(err) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = (sanitize(&err.code), sanitize(&err.message)));
            err.status
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(Error::new(PsStatus::NullArgument, "NULL_ARGUMENT", format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Error::new(PsStatus::InvalidUtf8, "INVALID_UTF8", format!("{name} is not UTF-8")))
}

unsafe fn json<T: serde::de::DeserializeOwned>(p: *const c_char, name: &str) -> Result<T, Error> {
    serde_json::from_str(text(p, name)?).map_err(|e| Error::new(PsStatus::InvalidJson, "INVALID_JSON", format!("{name}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| Error::new(PsStatus::NullArgument, "NULL_ARGUMENT", format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or_else(|| Error::new(PsStatus::NullArgument, "NULL_ARGUMENT", format!("{name} is null")))
}

fn to_json(value: &impl serde::Serialize) -> *mut c_char {
    sanitize(&serde_json::to_string(value).expect("serializable")).into_raw()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().1.as_ptr())
}

/// Engine error code (e.g. `UNKNOWN_ATOM`) of the last failed call.
#[no_mangle]
pub extern "C" fn ps_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().0.as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Grounds `domain`/`problem` (PDDL text) and attaches the properties in
/// `properties_json` (a JSON array).
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_project_new(
    domain: *const c_char,
    problem: *const c_char,
    properties_json: *const c_char,
    out: *mut *mut PsProject,
) -> PsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let mut project = Project::new("ffi", "ffi", text(domain, "domain")?, text(problem, "problem")?)?;
        for p in json::<Vec<PlanProperty>>(properties_json, "properties_json")? {
            project.add_property(p)?;
        }
        *out = Box::into_raw(Box::new(PsProject { project }));
        Ok(())
    })
}

/// # Safety
/// `project` must be null or a handle from [`ps_project_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ps_project_free(project: *mut PsProject) {
    if !project.is_null() {
        drop(Box::from_raw(project));
    }
}

/// Plans for the properties in `hard_ids_json` (JSON array of ids) plus
/// the global hard ones. Writes the outcome JSON to `out_json` in both the
/// solved and the unsolvable case; the latter returns
/// [`PsStatus::Unsolvable`].
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_plan(project: *const PsProject, hard_ids_json: *const c_char, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = ptr::null_mut();
        let project = handle(project, "project")?;
        let hard: BTreeSet<PropId> = json(hard_ids_json, "hard_ids_json")?;
        let set = project.project.property_set()?;
        let outcome = plan_selection(&set, &hard, &SearchConfig::default())?;
        *out = to_json(&outcome);
        match outcome {
            PlanOutcome::Solved { .. } => Ok(()),
            PlanOutcome::Unsolvable { .. } => Err(Error::new(PsStatus::Unsolvable, "UNSOLVABLE", "selection is unsolvable")),
            PlanOutcome::ResourceLimit => Err(Error::new(PsStatus::Engine, "PLANNER_RESOURCE_LIMIT", "planner hit its resource limit")),
        }
    })
}

/// Computes all minimal unsolvable subsets of the project's soft properties.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_mugs_compute(project: *const PsProject, out: *mut *mut PsCatalog) -> PsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let project = handle(project, "project")?;
        let ctx = SessionContext::for_project(&project.project, SearchConfig::default())?;
        let catalog = ctx.catalog()?.clone();
        *out = Box::into_raw(Box::new(PsCatalog { catalog }));
        Ok(())
    })
}

/// Number of subsets in the catalog; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_catalog_len(catalog: *const PsCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.catalog.mugs.len())
}

/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_catalog_to_json(catalog: *const PsCatalog, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = to_json(&handle(catalog, "catalog")?.catalog);
        Ok(())
    })
}

/// # Safety
/// `catalog` must be null or a handle from [`ps_mugs_compute`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ps_catalog_free(catalog: *mut PsCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Answers "why not `asked`?" for a plan satisfying `satisfied`; both are
/// JSON arrays of ids. `max_size` of 0 means unlimited.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_answer_question(
    catalog: *const PsCatalog,
    asked_json: *const c_char,
    satisfied_json: *const c_char,
    max_size: usize,
    out_json: *mut *mut c_char,
) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = ptr::null_mut();
        let catalog = handle(catalog, "catalog")?;
        let q = Question { asked: json(asked_json, "asked_json")?, satisfied: json(satisfied_json, "satisfied_json")? };
        let answer = answer_question(&q, &catalog.catalog, (max_size > 0).then_some(max_size)).map_err(SessionError::from)?;
        *out = to_json(&answer);
        Ok(())
    })
}

/// Starts a session on a project. `config_json` may be null for the
/// default study configuration.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_session_new(project: *const PsProject, config_json: *const c_char, out: *mut *mut PsSession) -> PsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let project = handle(project, "project")?;
        let config: StudyConfig = if config_json.is_null() { StudyConfig::default() } else { json(config_json, "config_json")? };
        let ctx = Arc::new(SessionContext::for_project(&project.project, SearchConfig::default())?);
        let session = Session::start("ffi", &ctx, config, &SystemClock)?;
        *out = Box::into_raw(Box::new(PsSession { session, ctx }));
        Ok(())
    })
}

/// Submits a selection (JSON array of ids) and writes the iteration JSON.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_session_submit(session: *mut PsSession, selected_json: *const c_char, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = ptr::null_mut();
        let s = out_ptr(session, "session")?;
        let selected: BTreeSet<PropId> = json(selected_json, "selected_json")?;
        let it = s.session.submit_iteration(&s.ctx, &selected, &SystemClock)?;
        *out = to_json(it);
        Ok(())
    })
}

/// Asks why the current plan does not satisfy `asked_json`.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_session_ask(session: *mut PsSession, asked_json: *const c_char, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        *out = ptr::null_mut();
        let s = out_ptr(session, "session")?;
        let asked: BTreeSet<PropId> = json(asked_json, "asked_json")?;
        let answer = s.session.ask_question(&s.ctx, &asked, &SystemClock)?;
        *out = to_json(&answer);
        Ok(())
    })
}

/// Writes the study record of the session.
///
/// # Safety
/// Pointers must be valid as described in the module docs.
#[no_mangle]
pub unsafe extern "C" fn ps_session_export(session: *const PsSession, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        let s = handle(session, "session")?;
        *out = to_json(&StudyRecord::from_session(&s.session, SystemClock.now_ms()));
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a handle from [`ps_session_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ps_session_free(session: *mut PsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOMAIN: &str = planspace::fixtures::NOMYSTERY_DOMAIN;
    const PROBLEM: &str = planspace::fixtures::MICRO_PROBLEM;
    const PROPS: &str = r#"[
        {"id":"1","nl_text":"p at l2","kind":"GOAL_FACT","formula":"(at p l2)","global_hard":true,"utility":0},
        {"id":"2","nl_text":"t at l1","kind":"GOAL_FACT","formula":"(at t l1)","utility":2},
        {"id":"3","nl_text":"t at l2","kind":"GOAL_FACT","formula":"(at t l2)","utility":1}]"#;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take(p: *mut c_char) -> serde_json::Value {
        let v = serde_json::from_str(CStr::from_ptr(p).to_str().unwrap()).unwrap();
        ps_string_free(p);
        v
    }

    unsafe fn project() -> *mut PsProject {
        let mut p = ptr::null_mut();
        assert_eq!(ps_project_new(c(DOMAIN).as_ptr(), c(PROBLEM).as_ptr(), c(PROPS).as_ptr(), &mut p), PsStatus::Ok);
        p
    }

    #[test]
    fn plan_and_unsolvable() {
        unsafe {
            let p = project();
            let mut out = ptr::null_mut();
            assert_eq!(ps_plan(p, c(r#"["3"]"#).as_ptr(), &mut out), PsStatus::Ok);
            assert_eq!(take(out)["cost"], 3);
            assert_eq!(ps_plan(p, c(r#"["2"]"#).as_ptr(), &mut out), PsStatus::Unsolvable);
            assert_eq!(take(out)["mugs"], serde_json::json!([["2"]]));
            ps_project_free(p);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let mut p = ptr::null_mut();
            let bad = c(r#"[{"id":"1","nl_text":"x","kind":"GOAL_FACT","formula":"(at q l2)"}]"#);
            assert_eq!(ps_project_new(c(DOMAIN).as_ptr(), c(PROBLEM).as_ptr(), bad.as_ptr(), &mut p), PsStatus::Property);
            assert!(p.is_null());
            assert_eq!(CStr::from_ptr(ps_last_error_code()).to_str().unwrap(), "UNKNOWN_ATOM");
            assert_eq!(ps_project_new(ptr::null(), c(PROBLEM).as_ptr(), bad.as_ptr(), &mut p), PsStatus::NullArgument);
            assert_eq!(ps_project_new(c(DOMAIN).as_ptr(), c(PROBLEM).as_ptr(), c("[").as_ptr(), &mut p), PsStatus::InvalidJson);
            assert_eq!(ps_catalog_len(ptr::null()), 0);
        }
    }

    #[test]
    fn catalog_and_session() {
        unsafe {
            let p = project();
            let mut cat = ptr::null_mut();
            assert_eq!(ps_mugs_compute(p, &mut cat), PsStatus::Ok);
            assert_eq!(ps_catalog_len(cat), 1);
            let mut out = ptr::null_mut();
            assert_eq!(ps_answer_question(cat, c(r#"["2"]"#).as_ptr(), c(r#"["3"]"#).as_ptr(), 0, &mut out), PsStatus::Ok);
            assert_eq!(take(out)["entries"][0]["tradeoff"], serde_json::json!([]));

            let mut s = ptr::null_mut();
            let config = c(r#"{"questions_enabled":false,"max_iterations":1}"#);
            assert_eq!(ps_session_new(p, config.as_ptr(), &mut s), PsStatus::Ok);
            assert_eq!(ps_session_submit(s, c("[]").as_ptr(), &mut out), PsStatus::Ok);
            assert_eq!(take(out)["index"], 1);
            assert_eq!(ps_session_submit(s, c("[]").as_ptr(), &mut out), PsStatus::Limit);
            assert_eq!(CStr::from_ptr(ps_last_error_code()).to_str().unwrap(), "ITERATION_LIMIT");
            assert_eq!(ps_session_ask(s, c(r#"["2"]"#).as_ptr(), &mut out), PsStatus::Limit);
            assert_eq!(ps_session_export(s, &mut out), PsStatus::Ok);
            assert_eq!(take(out)["utility_series"].as_array().unwrap().len(), 1);
            ps_session_free(s);
            ps_catalog_free(cat);
            ps_project_free(p);
        }
    }
}
