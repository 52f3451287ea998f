use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Project, SessionError, StudyConfig, SCHEMA_VERSION};
use crate::mugs::{certify, compute_mugs, MugsCatalog, MugsOptions, PlannerOracle, Strategy};
use crate::planner::SearchConfig;
use crate::properties::{PlanProperty, PropertySet};
use crate::task::canonical_json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoOptions {
    /// Search used for plans shown to users.
    pub search: SearchConfig,
    /// Search used by the solvability oracle.
    pub oracle_search: SearchConfig,
    pub mugs: MugsOptions,
    pub certify: bool,
    pub study_defaults: StudyConfig,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            search: SearchConfig::default(),
            oracle_search: SearchConfig { satisficing: true, ..SearchConfig::default() },
            mugs: MugsOptions { strategy: Strategy::BottomUp, parallel: true },
            certify: true,
            study_defaults: StudyConfig::with_questions(),
        }
    }
}

/// A project frozen for study participants, with all conflicts precomputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub schema_version: u32,
    pub id: String,
    pub project_id: String,
    pub name: String,
    pub content_hash: String,
    pub domain: String,
    pub problem: String,
    pub properties: Vec<PlanProperty>,
    pub catalog: MugsCatalog,
    pub image: Option<String>,
    pub action_texts: BTreeMap<String, String>,
    pub search: SearchConfig,
    pub study_defaults: StudyConfig,
}

impl Demo {
    pub fn property_set(&self) -> Result<PropertySet, SessionError> {
        let g = crate::pddl::load(&self.domain, &self.problem)?.2;
        Ok(PropertySet::new(g.task, &g.atoms, self.properties.clone())?)
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    domain: &'a str,
    problem: &'a str,
    properties: &'a [PlanProperty],
    search: &'a SearchConfig,
    oracle_search: &'a SearchConfig,
}

/// Hash of everything the catalog depends on. Two builds with the same hash
/// produce the same catalog.
pub fn demo_content_hash(project: &Project, options: &DemoOptions) -> String {
    let input = HashInput {
        domain: &project.domain,
        problem: &project.problem,
        properties: &project.properties,
        search: &options.search,
        oracle_search: &options.oracle_search,
    };
    hex::encode(Sha256::digest(canonical_json(&input).as_bytes()))
}

pub fn build_demo(project: &Project, options: &DemoOptions) -> Result<Demo, SessionError> {
    let set = project.property_set()?;
    let oracle = PlannerOracle::new(&set, options.oracle_search.clone())?;
    let universe: Vec<_> = set.selectable().into_iter().collect();
    let catalog = compute_mugs(&universe, &oracle, &options.mugs)?;
    if options.certify {
        if let Some(f) = certify(&catalog, &oracle).first() {
            let members: Vec<&str> = f.mugs.iter().map(|p| p.as_str()).collect();
            return Err(SessionError::CertificationFailed(format!("{{{}}}: {}", members.join(","), f.reason)));
        }
    }
    let hash = demo_content_hash(project, options);
    Ok(Demo {
        schema_version: SCHEMA_VERSION,
        id: format!("demo-{}", &hash[..16]),
        project_id: project.id.clone(),
        name: project.name.clone(),
        content_hash: hash,
        domain: project.domain.clone(),
        problem: project.problem.clone(),
        properties: project.properties.clone(),
        catalog,
        image: project.image.clone(),
        action_texts: project.action_texts.clone(),
        search: options.search.clone(),
        study_defaults: options.study_defaults,
    })
}
