use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Iteration, ManualClock, Session, SessionContext, SessionError, StudyConfig, SCHEMA_VERSION};
use super::state::Event;
use crate::properties::PropId;

/// Everything a study needs from one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub schema_version: u32,
    pub session_id: String,
    pub demo_id: Option<String>,
    pub project_id: String,
    pub config: StudyConfig,
    pub started_at: u64,
    pub exported_at: u64,
    pub iterations: Vec<Iteration>,
    pub events: Vec<Event>,
    pub dwell_ms: BTreeMap<String, u64>,
    /// One entry per iteration; `None` for unsolvable ones.
    pub utility_series: Vec<Option<u32>>,
    pub question_counts: Vec<usize>,
    pub best_utility: Option<u32>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    iteration: u32,
    status: &'a str,
    utility: Option<u32>,
    questions: usize,
    cost: Option<u64>,
    selected: String,
}

impl StudyRecord {
    pub fn from_session(session: &Session, exported_at: u64) -> StudyRecord {
        let utility_series: Vec<Option<u32>> = session.iterations.iter().map(Iteration::utility).collect();
        StudyRecord {
            schema_version: SCHEMA_VERSION,
            session_id: session.id.clone(),
            demo_id: session.demo_id.clone(),
            project_id: session.project_id.clone(),
            config: session.config,
            started_at: session.started_at,
            exported_at,
            iterations: session.iterations.clone(),
            events: session.events.clone(),
            dwell_ms: session.dwell_times(exported_at),
            best_utility: utility_series.iter().flatten().copied().max(),
            utility_series,
            question_counts: session.iterations.iter().map(|i| i.questions.len()).collect(),
        }
    }

    /// Per-iteration utility and question counts, for plotting.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for it in &self.iterations {
            let (status, cost) = match &it.result {
                super::IterationResult::Plan { cost, .. } => ("SOLVED", Some(*cost)),
                super::IterationResult::Unsolvable { .. } => ("UNSOLVABLE", None),
            };
            let selected: Vec<&str> = it.selected.iter().map(PropId::as_str).collect();
            w.serialize(CsvRow {
                iteration: it.index,
                status,
                utility: it.utility(),
                questions: it.questions.len(),
                cost,
                selected: selected.join(" "),
            })
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv is utf-8")
    }

    /// The record with every wall-clock field zeroed, for comparing runs.
    pub fn without_timestamps(&self) -> StudyRecord {
        let mut r = self.clone();
        r.started_at = 0;
        r.exported_at = 0;
        for it in &mut r.iterations {
            it.started_at = 0;
            it.finished_at = 0;
            for q in &mut it.questions {
                q.at = 0;
            }
        }
        for e in &mut r.events {
            e.at = 0;
        }
        r.dwell_ms.clear();
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayMismatch {
    pub iteration: u32,
    pub message: String,
}

/// Re-runs the recorded selections and questions against `ctx` and reports
/// every iteration whose outcome differs from the record.
pub fn replay(record: &StudyRecord, ctx: &SessionContext) -> Result<Vec<ReplayMismatch>, SessionError> {
    let clock = ManualClock::new(record.started_at);
    let mut session = Session::start(record.session_id.clone(), ctx, record.config, &clock)?;
    let mut out = Vec::new();
    for recorded in &record.iterations {
        clock.set(recorded.started_at);
        let it = session.submit_iteration(ctx, &recorded.selected, &clock)?.clone();
        if it.result != recorded.result {
            out.push(ReplayMismatch { iteration: recorded.index, message: "iteration result differs".into() });
        }
        for q in &recorded.questions {
            clock.set(q.at);
            let asked: BTreeSet<PropId> = q.asked.clone();
            match session.ask_question(ctx, &asked, &clock) {
                Ok(a) if a == q.answer => {}
                Ok(_) => out.push(ReplayMismatch { iteration: recorded.index, message: "answer differs".into() }),
                Err(e) => out.push(ReplayMismatch { iteration: recorded.index, message: format!("question failed: {e}") }),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::SearchConfig;
    use crate::properties::{ids, PlanProperty};
    use crate::session::{Clock, Project};

    fn ctx() -> SessionContext {
        let mut p = Project::new("m", "micro", fixtures::NOMYSTERY_DOMAIN, fixtures::MICRO_PROBLEM).unwrap();
        p.properties = vec![
            PlanProperty::goal_fact("1", "p at l2", "(at p l2)").with_utility(0).globally_hard(),
            PlanProperty::goal_fact("2", "t back at l1", "(at t l1)").with_utility(2),
            PlanProperty::goal_fact("3", "t at l2", "(at t l2)").with_utility(1),
        ];
        SessionContext::for_project(&p, SearchConfig::default()).unwrap()
    }

    fn scripted(clock: &ManualClock) -> Session {
        let ctx = ctx();
        let mut s = Session::start("s", &ctx, StudyConfig::default(), clock).unwrap();
        for sel in [ids::<u32>([]), ids([2u32]), ids([3u32])] {
            clock.advance(1000);
            s.submit_iteration(&ctx, &sel, clock).unwrap();
        }
        clock.advance(10);
        s.ask_question(&ctx, &ids([2u32]), clock).unwrap();
        s
    }

    #[test]
    fn fresh_session_record() {
        let clock = ManualClock::new(0);
        let s = Session::start("s", &ctx(), StudyConfig::default(), &clock).unwrap();
        let r = StudyRecord::from_session(&s, 10);
        assert!(r.iterations.is_empty());
        assert!(r.dwell_ms.values().all(|&d| d == 0));
        assert_eq!(r.to_csv(), "");
    }

    #[test]
    fn series_and_csv() {
        let clock = ManualClock::new(0);
        let s = scripted(&clock);
        let r = StudyRecord::from_session(&s, clock.now_ms());
        assert_eq!(r.utility_series, vec![Some(1), None, Some(1)]);
        assert_eq!(r.question_counts, vec![0, 0, 1]);
        assert_eq!(r.best_utility, Some(1));
        let idx: Vec<u32> = r.iterations.iter().map(|i| i.index).collect();
        assert_eq!(idx, [1, 2, 3]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,status,utility,questions,cost,selected");
        assert_eq!(lines[2], "2,UNSOLVABLE,,0,,2");
        let back: StudyRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn replay_reproduces() {
        let clock = ManualClock::new(0);
        let r = StudyRecord::from_session(&scripted(&clock), clock.now_ms());
        assert!(replay(&r, &ctx()).unwrap().is_empty());
        let mut tampered = r.clone();
        if let crate::session::IterationResult::Plan { cost, .. } = &mut tampered.iterations[0].result {
            *cost += 1;
        }
        assert_eq!(replay(&tampered, &ctx()).unwrap().len(), 1);
    }

    #[test]
    fn timestamps_stripped() {
        let a = ManualClock::new(0);
        let b = ManualClock::new(12345);
        let ra = StudyRecord::from_session(&scripted(&a), a.now_ms()).without_timestamps();
        let rb = StudyRecord::from_session(&scripted(&b), b.now_ms()).without_timestamps();
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    }
}
