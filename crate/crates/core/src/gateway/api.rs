use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use super::jobs::{JobKind, JobQueue, JobRecord};
use super::{ApiError, Store};
use crate::mugs::{compute_mugs, MugsOptions, PlannerOracle, Strategy};
use crate::planner::SearchConfig;
use crate::properties::{PlanProperty, PropId, PropertyTemplate};
use crate::session::{
    build_demo, demo_content_hash, plan_selection, Clock, Demo, DemoOptions, Project, Session, SessionContext,
    StudyConfig, StudyRecord, SCHEMA_VERSION,
};

type Reply = Result<(StatusCode, Json<Value>), ApiError>;

struct Inner {
    store: Arc<Store>,
    clock: Arc<dyn Clock>,
    jobs: JobQueue,
    contexts: Mutex<HashMap<String, Arc<SessionContext>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    projects: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(store: Store, clock: Arc<dyn Clock>, workers: usize, backlog: usize) -> AppState {
        let store = Arc::new(store);
        let jobs = JobQueue::new(store.clone(), clock.clone(), workers, backlog);
        AppState(Arc::new(Inner {
            store,
            clock,
            jobs,
            contexts: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            projects: Mutex::new(()),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.0.store
    }

    fn load<T: DeserializeOwned>(&self, kind: &str, what: &str, id: &str) -> Result<T, ApiError> {
        self.0.store.get(kind, id)?.ok_or_else(|| ApiError::not_found(what, id))
    }

    fn context(&self, demo_id: &str) -> Result<Arc<SessionContext>, ApiError> {
        if let Some(ctx) = self.0.contexts.lock().unwrap_or_else(|e| e.into_inner()).get(demo_id) {
            return Ok(ctx.clone());
        }
        let demo: Demo = self.load("demos", "demo", demo_id)?;
        let ctx = Arc::new(SessionContext::for_demo(&demo)?);
        self.0.contexts.lock().unwrap_or_else(|e| e.into_inner()).insert(demo_id.to_string(), ctx.clone());
        Ok(ctx)
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.0.sessions.lock().unwrap_or_else(|e| e.into_inner()).entry(id.to_string()).or_default().clone()
    }

    /// Runs `f` on a session with exclusive access and persists the result.
    /// Blocking work (planner calls) runs off the async runtime.
    async fn with_session<R: Serialize + Send + 'static>(
        &self,
        id: String,
        f: impl FnOnce(&mut Session, &SessionContext, &dyn Clock) -> Result<R, ApiError> + Send + 'static,
    ) -> Result<R, ApiError> {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let lock = state.session_lock(&id);
            let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
            let mut session: Session = state.load("sessions", "session", &id)?;
            let demo_id = session.demo_id.clone().ok_or_else(|| ApiError::bad_request("session has no demo"))?;
            let ctx = state.context(&demo_id)?;
            let before = session.clone();
            let out = f(&mut session, &ctx, state.0.clock.as_ref());
            if session != before {
                state.0.store.put("sessions", &id, &session)?;
            }
            out
        })
        .await
        .map_err(|e| ApiError::new(500, "INTERNAL", e.to_string()))?
    }

    fn mutate_project<R>(&self, id: &str, f: impl FnOnce(&mut Project) -> Result<R, ApiError>) -> Result<R, ApiError> {
        let _guard = self.0.projects.lock().unwrap_or_else(|e| e.into_inner());
        let mut project: Project = self.load("projects", "project", id)?;
        let out = f(&mut project)?;
        self.0.store.put("projects", id, &project)?;
        Ok(out)
    }
}

/// Adds `schema_version` to object payloads that lack one.
fn versioned(value: impl Serialize) -> Json<Value> {
    let mut v = serde_json::to_value(value).expect("payloads serialize");
    if let Value::Object(map) = &mut v {
        map.entry("schema_version").or_insert(json!(SCHEMA_VERSION));
    }
    Json(v)
}

fn ok(value: impl Serialize) -> Reply {
    Ok((StatusCode::OK, versioned(value)))
}

fn created(value: impl Serialize) -> Reply {
    Ok((StatusCode::CREATED, versioned(value)))
}

fn accepted(job: JobRecord) -> Reply {
    Ok((StatusCode::ACCEPTED, versioned(job)))
}

/// Parses a JSON request body. An empty body reads as `{}`. A
/// `schema_version` other than the current one is refused.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let v: Value = if bytes.iter().all(u8::is_ascii_whitespace) {
        json!({})
    } else {
        serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))?
    };
    if let Some(sv) = v.get("schema_version") {
        if sv != &json!(SCHEMA_VERSION) {
            let mut e = ApiError::new(400, "SCHEMA_VERSION", "unsupported schema_version");
            e.details = json!({ "supported": SCHEMA_VERSION, "got": sv });
            return Err(e);
        }
    }
    serde_json::from_value(v).map_err(|e| ApiError::bad_request(e.to_string()))
}

pub fn router(state: AppState, web_root: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/properties", post(add_property))
        .route("/projects/{id}/templates/{tid}/instantiate", post(instantiate))
        .route("/projects/{id}/jobs/plan", post(plan_job))
        .route("/projects/{id}/jobs/mugs", post(mugs_job))
        .route("/projects/{id}/demo", post(demo_job))
        .route("/jobs/{id}", get(get_job))
        .route("/demos/{id}", get(get_demo))
        .route("/demos/{id}/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/iterations", post(submit_iteration))
        .route("/sessions/{id}/questions", post(ask_question))
        .route("/sessions/{id}/why-unsolvable", post(why_unsolvable))
        .route("/sessions/{id}/events", post(log_event))
        .route("/sessions/{id}/log", get(session_log));
    let app = Router::new().nest("/api/v1", api).with_state(state);
    match web_root {
        Some(root) => app.fallback_service(ServeDir::new(root)),
        None => app,
    }
}

async fn health() -> Reply {
    ok(json!({ "status": "ok", "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") }))
}

#[derive(Deserialize)]
struct NewProject {
    #[serde(default)]
    name: String,
    domain: String,
    problem: String,
    #[serde(default)]
    properties: Vec<PlanProperty>,
    #[serde(default)]
    templates: Vec<PropertyTemplate>,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    action_texts: BTreeMap<String, String>,
}

async fn create_project(State(s): State<AppState>, bytes: Bytes) -> Reply {
    let req: NewProject = body(&bytes)?;
    let mut project = Project::new("pending", req.name, req.domain, req.problem)?;
    for t in &req.templates {
        t.check().map_err(crate::session::SessionError::from)?;
    }
    project.templates = req.templates;
    project.image = req.image;
    project.action_texts = req.action_texts;
    for p in req.properties {
        project.add_property(p)?;
    }
    let project = s.0.store.insert("projects", "project", |id| Project { id: id.to_string(), ..project })?;
    created(project)
}

async fn get_project(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    ok(s.load::<Project>("projects", "project", &id)?)
}

async fn add_property(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let mut v: Value = body(&bytes)?;
    let property = s.mutate_project(&id, |project| {
        if let Value::Object(map) = &mut v {
            map.remove("schema_version");
            map.entry("id").or_insert_with(|| json!(project.next_property_id()));
        }
        let p: PlanProperty = serde_json::from_value(v).map_err(|e| ApiError::bad_request(e.to_string()))?;
        project.add_property(p.clone())?;
        Ok(p)
    })?;
    created(property)
}

#[derive(Deserialize)]
struct Instantiate {
    #[serde(default)]
    bindings: BTreeMap<String, String>,
    #[serde(default)]
    id: Option<PropId>,
    #[serde(default)]
    utility: Option<u32>,
}

async fn instantiate(State(s): State<AppState>, UrlPath((id, tid)): UrlPath<(String, String)>, bytes: Bytes) -> Reply {
    let req: Instantiate = body(&bytes)?;
    let property = s.mutate_project(&id, |project| {
        let mut p = project.instantiate(&tid, &req.bindings, req.id)?;
        if let Some(u) = req.utility {
            p.utility = Some(u);
            let stored = project.properties.iter_mut().find(|q| q.id == p.id).expect("just added");
            stored.utility = Some(u);
        }
        Ok(p)
    })?;
    created(property)
}

#[derive(Deserialize)]
struct PlanRequest {
    #[serde(default)]
    hard_ids: BTreeSet<PropId>,
    #[serde(default)]
    search: SearchConfig,
}

async fn plan_job(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let req: PlanRequest = body(&bytes)?;
    let project: Project = s.load("projects", "project", &id)?;
    let set = project.property_set()?;
    if let Some(bad) = req.hard_ids.iter().find(|h| set.property(h).is_none()) {
        return Err(crate::session::SessionError::UnknownProperty(bad.clone()).into());
    }
    let job = s.0.jobs.submit(
        JobKind::Plan,
        &id,
        Box::new(move || {
            let outcome = plan_selection(&set, &req.hard_ids, &req.search)?;
            Ok(serde_json::to_value(outcome).expect("serializable"))
        }),
    )?;
    accepted(job)
}

async fn mugs_job(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    let project: Project = s.load("projects", "project", &id)?;
    let set = project.property_set()?;
    let options = DemoOptions::default();
    let job = s.0.jobs.submit(
        JobKind::Mugs,
        &id,
        Box::new(move || {
            let oracle = PlannerOracle::new(&set, options.oracle_search.clone()).map_err(crate::session::SessionError::from)?;
            let universe: Vec<PropId> = set.selectable().into_iter().collect();
            let catalog = compute_mugs(&universe, &oracle, &MugsOptions { strategy: Strategy::BottomUp, parallel: true })
                .map_err(crate::session::SessionError::from)?;
            Ok(serde_json::to_value(catalog).expect("serializable"))
        }),
    )?;
    accepted(job)
}

async fn demo_job(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    let project: Project = s.load("projects", "project", &id)?;
    let options = DemoOptions::default();
    let hash = demo_content_hash(&project, &options);
    let demo_id = format!("demo-{}", &hash[..16]);
    if s.0.store.get::<Value>("demos", &demo_id)?.is_some() {
        let job = s.0.jobs.completed(JobKind::DemoBuild, &id, json!({ "demo_id": demo_id, "reused": true }))?;
        return accepted(job);
    }
    let store = s.0.store.clone();
    let job = s.0.jobs.submit(
        JobKind::DemoBuild,
        &id,
        Box::new(move || {
            let demo = build_demo(&project, &options)?;
            store.put("demos", &demo.id, &demo)?;
            Ok(json!({ "demo_id": demo.id, "reused": false, "mugs": demo.catalog.mugs.len() }))
        }),
    )?;
    accepted(job)
}

async fn get_job(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    ok(s.load::<JobRecord>("jobs", "job", &id)?)
}

async fn get_demo(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    ok(s.load::<Demo>("demos", "demo", &id)?)
}

#[derive(Deserialize)]
struct NewSession {
    #[serde(default)]
    study_config: Option<StudyConfig>,
}

async fn create_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let req: NewSession = body(&bytes)?;
    let demo: Demo = s.load("demos", "demo", &id)?;
    let ctx = s.context(&id)?;
    let config = req.study_config.unwrap_or(demo.study_defaults);
    config.validate()?;
    let session = Session::start("pending", &ctx, config, s.0.clock.as_ref())?;
    let session = s.0.store.insert("sessions", "session", |sid| Session { id: sid.to_string(), ..session })?;
    created(session)
}

async fn get_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    ok(s.load::<Session>("sessions", "session", &id)?)
}

#[derive(Deserialize)]
struct IterationRequest {
    #[serde(default)]
    selected_ids: BTreeSet<PropId>,
}

async fn submit_iteration(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let req: IterationRequest = body(&bytes)?;
    let it = s
        .with_session(id, move |session, ctx, clock| Ok(session.submit_iteration(ctx, &req.selected_ids, clock)?.clone()))
        .await?;
    created(it)
}

#[derive(Deserialize)]
struct QuestionRequest {
    asked_ids: BTreeSet<PropId>,
}

async fn ask_question(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let req: QuestionRequest = body(&bytes)?;
    let answer = s.with_session(id, move |session, ctx, clock| Ok(session.ask_question(ctx, &req.asked_ids, clock)?)).await?;
    ok(answer)
}

async fn why_unsolvable(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    let explanation = s.with_session(id, |session, _, clock| Ok(session.ask_why_unsolvable(clock)?)).await?;
    ok(explanation)
}

#[derive(Deserialize)]
struct EventRequest {
    kind: String,
    #[serde(default)]
    part: Option<String>,
    #[serde(default)]
    data: Value,
}

async fn log_event(State(s): State<AppState>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> Reply {
    let req: EventRequest = body(&bytes)?;
    if req.kind.is_empty() {
        return Err(ApiError::bad_request("event kind must not be empty"));
    }
    let event = s.with_session(id, move |session, _, clock| Ok(session.log(&req.kind, req.part, req.data, clock).clone())).await?;
    created(event)
}

async fn session_log(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply {
    let session: Session = s.load("sessions", "session", &id)?;
    ok(StudyRecord::from_session(&session, s.0.clock.now_ms()))
}
