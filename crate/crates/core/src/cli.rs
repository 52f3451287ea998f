//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on domain errors, 2 on usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::gateway::{self, ServeConfig, Store};
use crate::mugs::{certify, compute_mugs, MugsOptions, PlannerOracle, Strategy};
use crate::pddl;
use crate::planner::SearchConfig;
use crate::properties::{PlanProperty, PropId, PropertySet};
use crate::session::{build_demo, plan_selection, Clock, DemoOptions, PlanOutcome, Project, Session, StudyRecord, SystemClock};
use crate::task::{apply_action, Bound, Plan};

#[derive(Debug, Parser)]
#[command(name = "planspace", version, about = "Iterative oversubscription planning with conflict explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground a task and print size statistics.
    Ground(TaskArgs),
    /// Plan for a selection of properties.
    Plan(PlanArgs),
    /// Compute all minimal unsolvable subsets of the soft properties.
    Mugs(MugsArgs),
    /// Evaluate properties on a plan file.
    CheckProperty(CheckArgs),
    /// Demo management.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Study data export.
    #[command(subcommand)]
    Study(StudyCommand),
}

#[derive(Debug, Args)]
struct TaskArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
}

#[derive(Debug, Args)]
struct PropertyArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// JSON array of plan properties.
    #[arg(long)]
    properties: PathBuf,
    /// Cost bound; unbounded when omitted.
    #[arg(long)]
    bound: Option<u64>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    props: PropertyArgs,
    /// Properties to enforce in addition to the global hard ones.
    #[arg(long, value_delimiter = ',')]
    hard: Vec<String>,
    /// Trade optimality for speed.
    #[arg(long)]
    satisficing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    TopDown,
    BottomUp,
}

#[derive(Debug, Args)]
struct MugsArgs {
    #[command(flatten)]
    props: PropertyArgs,
    #[arg(long, value_enum, default_value = "bottom-up")]
    strategy: StrategyArg,
    /// Re-verify every subset of the result with the planner.
    #[arg(long)]
    certify: bool,
    /// Use cost-optimal instead of greedy search for oracle calls.
    #[arg(long)]
    optimal: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    props: PropertyArgs,
    /// Plan file with one ground action per line, e.g. `(drive t a b)`.
    #[arg(long)]
    plan: PathBuf,
    /// Properties to check; all when omitted.
    #[arg(long, value_delimiter = ',')]
    id: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum DemoCommand {
    /// Precompute the conflict catalog of a project.
    Build(DemoBuildArgs),
}

#[derive(Debug, Args)]
struct DemoBuildArgs {
    /// Project JSON document.
    #[arg(long, conflicts_with_all = ["domain", "problem", "properties"])]
    project: Option<PathBuf>,
    #[arg(long, requires_all = ["problem", "properties"])]
    domain: Option<PathBuf>,
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    properties: Option<PathBuf>,
    /// Write the demo into this store as well.
    #[arg(long, env = "PLANSPACE_STORE")]
    store: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_certify: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "PLANSPACE_STORE", default_value = "planspace-store")]
    store: PathBuf,
    #[arg(long, env = "PLANSPACE_PORT", default_value_t = gateway::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Static web UI bundle served at `/`.
    #[arg(long)]
    web_root: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long, default_value_t = 64)]
    backlog: usize,
}

#[derive(Debug, Subcommand)]
enum StudyCommand {
    /// Export the record of one session.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, env = "PLANSPACE_STORE", default_value = "planspace-store")]
    store: PathBuf,
    #[arg(long)]
    session: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported as exit code 1.
struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: &str, message: impl Display) -> Self {
        Failure { code: code.to_string(), message: message.to_string() }
    }
}

macro_rules! domain_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.code(), &e)
            }
        }
    )*};
}

domain_error!(
    crate::pddl::PddlError,
    crate::properties::PropertyError,
    crate::mugs::MugsError,
    crate::session::SessionError,
    crate::gateway::GatewayError
);

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error [{}]: {}", f.code, f.message);
            1
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ground(a) => {
            let (domain, problem) = (read(&a.domain)?, read(&a.problem)?);
            let g = pddl::load(&domain, &problem)?.2;
            emit(&g.report, None)
        }
        Command::Plan(a) => plan(a),
        Command::Mugs(a) => mugs(a),
        Command::CheckProperty(a) => check_property(a),
        Command::Demo(DemoCommand::Build(a)) => demo_build(a),
        Command::Serve(a) => serve(a),
        Command::Study(StudyCommand::Export(a)) => export(a),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("IO_ERROR", format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::new("INVALID_JSON", format!("{}: {e}", path.display())))
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    write_out(&text, out)
}

fn write_out(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::new("IO_ERROR", format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::new("IO_ERROR", e))
        }
    }
}

fn property_set(a: &PropertyArgs) -> Result<PropertySet, Failure> {
    let (domain, problem) = (read(&a.task.domain)?, read(&a.task.problem)?);
    let mut g = pddl::load(&domain, &problem)?.2;
    if let Some(b) = a.bound {
        g.task.bound = Bound::Finite(b);
    }
    let properties: Vec<PlanProperty> = read_json(&a.properties)?;
    Ok(PropertySet::new(g.task, &g.atoms, properties)?)
}

fn prop_ids(raw: &[String], set: &PropertySet) -> Result<BTreeSet<PropId>, Failure> {
    raw.iter()
        .map(|s| {
            let id = PropId::new(s.trim());
            set.property(&id).map(|_| id.clone()).ok_or_else(|| Failure::new("UNKNOWN_PROPERTY", format!("unknown property {id}")))
        })
        .collect()
}

fn format_set(s: &BTreeSet<PropId>) -> String {
    let ids: Vec<&str> = s.iter().map(PropId::as_str).collect();
    format!("{{{}}}", ids.join(", "))
}

fn plan(a: PlanArgs) -> Result<(), Failure> {
    let set = property_set(&a.props)?;
    let hard = prop_ids(&a.hard, &set)?;
    let config = SearchConfig { satisficing: a.satisficing, ..SearchConfig::default() };
    let outcome = plan_selection(&set, &hard, &config)?;
    match &outcome {
        PlanOutcome::Solved { .. } => emit(&outcome, None),
        PlanOutcome::Unsolvable { mugs } => {
            let mut msg = String::from("selection is unsolvable; minimal conflicts:\n");
            for m in mugs {
                msg.push_str(&format!("  {}\n", format_set(m)));
            }
            if mugs.is_empty() {
                msg.push_str("  the global hard properties alone\n");
            }
            Err(Failure::new("UNSOLVABLE", msg.trim_end()))
        }
        PlanOutcome::ResourceLimit => Err(Failure::new("PLANNER_RESOURCE_LIMIT", "planner hit its resource limit")),
    }
}

fn mugs(a: MugsArgs) -> Result<(), Failure> {
    let set = property_set(&a.props)?;
    let config = SearchConfig { satisficing: !a.optimal, ..SearchConfig::default() };
    let oracle = PlannerOracle::new(&set, config)?;
    let strategy = match a.strategy {
        StrategyArg::TopDown => Strategy::TopDown,
        StrategyArg::BottomUp => Strategy::BottomUp,
    };
    let universe: Vec<PropId> = set.selectable().into_iter().collect();
    let catalog = compute_mugs(&universe, &oracle, &MugsOptions { strategy, parallel: true })?;
    if a.certify {
        let failures = certify(&catalog, &oracle);
        if let Some(f) = failures.first() {
            return Err(Failure::new("CERTIFICATION_FAILED", format!("{}: {}", format_set(&f.mugs), f.reason)));
        }
    }
    emit(&catalog, None)
}

fn check_property(a: CheckArgs) -> Result<(), Failure> {
    let set = property_set(&a.props)?;
    let ids = if a.id.is_empty() { set.ids() } else { prop_ids(&a.id, &set)? };
    let text = read(&a.plan)?;
    let task = &set.base;
    let mut steps = Vec::new();
    let mut state = task.initial.clone();
    for (n, line) in text.lines().enumerate() {
        let line = line.split(';').next().unwrap_or("").trim().to_lowercase();
        if line.is_empty() {
            continue;
        }
        let action = task
            .action_by_name(&line)
            .ok_or_else(|| Failure::new("UNKNOWN_ACTION", format!("line {}: no action {line}", n + 1)))?;
        state = apply_action(&state, action)
            .map_err(|_| Failure::new("INVALID_PLAN", format!("line {}: {line} is not applicable", n + 1)))?;
        steps.push(action.id);
    }
    let plan = Plan::new(task, steps).map_err(|e| Failure::new("INVALID_PLAN", e))?;
    let mut out = BTreeMap::new();
    for id in ids {
        out.insert(id.clone(), set.evaluate(&id, &plan)?);
    }
    emit(&serde_json::json!({ "cost": plan.cost, "properties": out }), None)
}

fn demo_build(a: DemoBuildArgs) -> Result<(), Failure> {
    let project = match (&a.project, &a.domain, &a.problem, &a.properties) {
        (Some(path), ..) => read_json::<Project>(path)?,
        (None, Some(d), Some(p), Some(props)) => {
            let mut project = Project::new("cli", "cli", read(d)?, read(p)?)?;
            for prop in read_json::<Vec<PlanProperty>>(props)? {
                project.add_property(prop)?;
            }
            project
        }
        _ => return Err(Failure::new("USAGE", "either --project or --domain, --problem and --properties are required")),
    };
    let options = DemoOptions { certify: !a.no_certify, ..DemoOptions::default() };
    let demo = build_demo(&project, &options)?;
    if let Some(root) = &a.store {
        let store = Store::open(root)?;
        store.put("demos", &demo.id, &demo)?;
        eprintln!("stored {} in {}", demo.id, root.display());
    }
    emit(&demo, a.out.as_deref())
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let config = ServeConfig {
        store: a.store,
        host: a.host,
        port: a.port,
        web_root: a.web_root,
        workers: a.workers.max(1),
        backlog: a.backlog,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new("IO_ERROR", e))?;
    runtime.block_on(async {
        let (listener, state) = gateway::bind(&config).await?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Failure::new("IO_ERROR", e))?);
        let app = gateway::router(state, config.web_root.as_deref());
        axum::serve(listener, app).await.map_err(|e| Failure::new("IO_ERROR", e))
    })
}

fn export(a: ExportArgs) -> Result<(), Failure> {
    let store = Store::open(&a.store)?;
    let session: Session = store
        .get("sessions", &a.session)?
        .ok_or_else(|| Failure::new("SESSION_NOT_FOUND", format!("no session with id {}", a.session)))?;
    let record = StudyRecord::from_session(&session, SystemClock.now_ms());
    match a.format {
        Format::Json => emit(&record, a.out.as_deref()),
        Format::Csv => write_out(&record.to_csv(), a.out.as_deref()),
    }
}
