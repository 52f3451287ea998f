use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::formula::substitute_tokens;
use super::property::{PlanProperty, PropId, PropertyKind, ResolvedProperty};
use super::PropertyError;
use crate::pddl::{canonical_name, GroundAtomTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateVariable {
    /// Placeholder name without the leading `$`.
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

/// Parameterized property. Placeholders are `$NAME` tokens in the sentence,
/// the formula skeleton, action-set entries and constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyTemplate {
    pub id: String,
    pub nl_pattern: String,
    pub kind: PropertyKind,
    pub formula: String,
    #[serde(default)]
    pub action_sets: BTreeMap<String, Vec<String>>,
    pub variables: Vec<TemplateVariable>,
    /// Static atoms that must hold for the bindings, e.g. `(connected $L1 $L2)`.
    #[serde(default)]
    pub constraints: Vec<String>,
    /// Display text per object; unlisted objects show with `-` as spaces.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

fn placeholders(text: &str) -> BTreeSet<String> {
    text.split(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == ',' || c == '.')
        .filter_map(|t| t.strip_prefix('$'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

impl PropertyTemplate {
    /// Every placeholder used anywhere must be a declared variable.
    pub fn check(&self) -> Result<(), PropertyError> {
        let declared: BTreeSet<String> = self.variables.iter().map(|v| v.name.clone()).collect();
        let mut used = placeholders(&self.nl_pattern);
        used.extend(placeholders(&self.formula));
        for entries in self.action_sets.values() {
            for e in entries {
                used.extend(placeholders(e));
            }
        }
        for c in &self.constraints {
            used.extend(placeholders(c));
        }
        if let Some(missing) = used.difference(&declared).next() {
            return Err(PropertyError::TypeMismatch(format!(
                "template {}: placeholder ${missing} is not declared",
                self.id
            )));
        }
        Ok(())
    }

    fn label<'a>(&'a self, object: &'a str) -> String {
        self.labels.get(object).cloned().unwrap_or_else(|| object.replace('-', " "))
    }
}

/// Fills a template with objects. Bindings are checked against object types
/// and the static constraints, and the result must resolve on the grounding.
pub fn instantiate_template(
    template: &PropertyTemplate,
    bindings: &BTreeMap<String, String>,
    atoms: &GroundAtomTable,
    id: PropId,
) -> Result<PlanProperty, PropertyError> {
    template.check()?;
    let mut values = BTreeMap::new();
    for var in &template.variables {
        let object = bindings
            .get(&var.name)
            .ok_or_else(|| PropertyError::TypeMismatch(format!("no binding for ${}", var.name)))?
            .to_ascii_lowercase();
        let types = atoms
            .object_types
            .get(&object)
            .ok_or_else(|| PropertyError::TypeMismatch(format!("unknown object {object}")))?;
        if !types.contains(&var.ty.to_ascii_lowercase()) {
            return Err(PropertyError::TypeMismatch(format!(
                "${} expects {}, got {object}",
                var.name, var.ty
            )));
        }
        values.insert(var.name.clone(), object);
    }
    if let Some(extra) = bindings.keys().find(|k| !values.contains_key(*k)) {
        return Err(PropertyError::TypeMismatch(format!("unknown placeholder ${extra}")));
    }
    let lookup = |name: &str| values.get(name).cloned();
    for c in &template.constraints {
        let ground = substitute_tokens(c, &lookup);
        let key = canonical_name(&ground).unwrap_or(ground.clone());
        if !atoms.static_atoms.contains(&key) {
            return Err(PropertyError::ConstraintViolated(key));
        }
    }
    let label_lookup = |name: &str| values.get(name).map(|o| template.label(o));
    let nl_text = substitute_words(&template.nl_pattern, &label_lookup);
    let property = PlanProperty {
        id,
        nl_text,
        kind: template.kind,
        formula: substitute_tokens(&template.formula, &lookup),
        action_sets: template
            .action_sets
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|e| substitute_tokens(e, &lookup)).collect()))
            .collect(),
        utility: None,
        global_hard: false,
    };
    ResolvedProperty::resolve(&property, atoms)?;
    Ok(property)
}

/// Like token substitution but placeholders may end in punctuation.
fn substitute_words(text: &str, lookup: &impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('$') {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 1..];
        let end = tail.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(tail.len());
        let name = &tail[..end];
        match lookup(name) {
            Some(v) if !name.is_empty() => out.push_str(&v),
            _ => {
                out.push('$');
                out.push_str(name);
            }
        }
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}
