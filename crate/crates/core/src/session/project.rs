use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{SessionError, SCHEMA_VERSION};
use crate::pddl::{self, Grounding};
use crate::properties::{instantiate_template, PlanProperty, PropId, PropertyError, PropertySet, PropertyTemplate, ResolvedProperty};

/// A planning task together with the plan properties defined over it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub domain: String,
    pub problem: String,
    #[serde(default)]
    pub properties: Vec<PlanProperty>,
    #[serde(default)]
    pub templates: Vec<PropertyTemplate>,
    /// Path or URL of a picture of the task, shown by the UI.
    #[serde(default)]
    pub image: Option<String>,
    /// Display text per action schema, e.g. "drive" -> "{0} drives from {1} to {2}".
    #[serde(default)]
    pub action_texts: BTreeMap<String, String>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Project {
    /// Creates a project and checks that the task grounds.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        domain: impl Into<String>,
        problem: impl Into<String>,
    ) -> Result<Self, SessionError> {
        let p = Project {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            name: name.into(),
            domain: domain.into(),
            problem: problem.into(),
            properties: Vec::new(),
            templates: Vec::new(),
            image: None,
            action_texts: BTreeMap::new(),
        };
        p.ground()?;
        Ok(p)
    }

    pub fn ground(&self) -> Result<Grounding, SessionError> {
        Ok(pddl::load(&self.domain, &self.problem)?.2)
    }

    pub fn global_hard(&self) -> BTreeSet<PropId> {
        self.properties.iter().filter(|p| p.global_hard).map(|p| p.id.clone()).collect()
    }

    pub fn property_set(&self) -> Result<PropertySet, SessionError> {
        let g = self.ground()?;
        Ok(PropertySet::new(g.task, &g.atoms, self.properties.clone())?)
    }

    /// Adds a property after resolving it against the grounded task.
    pub fn add_property(&mut self, property: PlanProperty) -> Result<(), SessionError> {
        if self.properties.iter().any(|p| p.id == property.id) {
            return Err(PropertyError::DuplicateId(property.id).into());
        }
        let g = self.ground()?;
        ResolvedProperty::resolve(&property, &g.atoms)?;
        let mut set = self.properties.clone();
        set.push(property.clone());
        PropertySet::new(g.task, &g.atoms, set)?;
        self.properties.push(property);
        Ok(())
    }

    /// Smallest positive integer id not yet taken.
    pub fn next_property_id(&self) -> PropId {
        let taken: BTreeSet<&str> = self.properties.iter().map(|p| p.id.as_str()).collect();
        (1u32..).map(PropId::from).find(|id| !taken.contains(id.as_str())).expect("unbounded range")
    }

    pub fn instantiate(
        &mut self,
        template_id: &str,
        bindings: &BTreeMap<String, String>,
        id: Option<PropId>,
    ) -> Result<PlanProperty, SessionError> {
        let template = self
            .templates
            .iter()
            .find(|t| t.id == template_id)
            .ok_or_else(|| PropertyError::UnknownProperty(PropId::new(template_id)))?
            .clone();
        let g = self.ground()?;
        let id = id.unwrap_or_else(|| self.next_property_id());
        let property = instantiate_template(&template, bindings, &g.atoms, id)?;
        self.add_property(property.clone())?;
        Ok(property)
    }
}
