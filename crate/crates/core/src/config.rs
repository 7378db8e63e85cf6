//! JSON scenario configuration.
//!
//! ```json
//! {
//!   "version": 1,
//!   "spaces": { "urn": ["R", "B"] },
//!   "urns": {
//!     "ellsberg": { "space": "urn", "members": [[0.5, 0.5], [0.3, 0.7]], "values": [1, 0] }
//!   },
//!   "phis": {
//!     "swap": { "model": "pair", "values": [0, 1, 1, 0] },
//!     "id": { "urn": "ellsberg", "values": [0, 1] }
//!   },
//!   "models": {
//!     "pair": { "urns": ["ellsberg", "ellsberg"], "phis": ["id", "id"], "peng_phi": "swap" }
//!   }
//! }
//! ```
//!
//! A `phi` tabulated on an urn lists one value per distinct value of that
//! urn's variable, in ascending order. A `phi` on a model lists one value
//! per point of the model's value grid (row-major, last urn fastest). A
//! model with a `joint` entry uses those rows as an explicit joint law on
//! the product of its urns' spaces; otherwise it uses the product law.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comonotone::{BoundedFn, GridFunction};
use crate::independence::{range_axis, JointLaw, Urn, UrnModel};
use crate::measure::{CredalSet, FiniteSpace, RandomVariable};
use crate::wlln::WllnScenario;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spaces: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub urns: BTreeMap<String, UrnConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phis: BTreeMap<String, PhiConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub models: BTreeMap<String, ModelConfig>,
    #[serde(default, skip_serializing_if = "WllnConfig::is_empty")]
    pub wlln: WllnConfig,
    #[serde(default, skip_serializing_if = "OutputConfig::is_default")]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnConfig {
    pub space: String,
    pub members: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub urns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phis: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peng_phi: Option<String>,
}

/// Exact lower-probability sequence for `n` draws from one urn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub name: String,
    pub urn: String,
    pub epsilon: f64,
    pub n_list: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WllnConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<WllnScenario>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exact: Vec<ExactConfig>,
}

impl WllnConfig {
    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty() && self.exact.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Svg
    }

    pub fn svg(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Seed of the sampled function tuples in independence checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of sampled function tuples in independence checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl OutputConfig {
    pub fn is_default(&self) -> bool {
        *self == OutputConfig::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Reference,
    Invariant,
}

/// One problem found while validating a parsed document.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{} violation(s): {}", .0.len(), summarize(.0))]
    Violations(Vec<Violation>),
}

fn summarize(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{}: {}", x.path, x.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "io",
            ConfigError::Parse(_) => "parse",
            ConfigError::Schema(_) => "schema",
            ConfigError::Violations(v) if v.iter().any(|x| x.kind == ViolationKind::Reference) => {
                "reference"
            }
            ConfigError::Violations(_) => "invariant",
        }
    }
}

/// A validated configuration with its domain objects built.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub raw: ScenarioConfig,
    pub spaces: BTreeMap<String, FiniteSpace>,
    pub urns: BTreeMap<String, Urn>,
    pub models: BTreeMap<String, LoadedModel>,
}

#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub model: UrnModel,
    /// One function per urn, when configured.
    pub phis: Option<Vec<BoundedFn>>,
    pub peng_phi: Option<GridFunction>,
}

impl ScenarioConfig {
    /// Parses without cross-reference or invariant checks.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg: ScenarioConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Schema(format!(
                "unsupported version {}, expected {CONFIG_VERSION}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Canonical pretty JSON (maps in key order).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// Validates every section and builds the domain objects, collecting
    /// all violations rather than stopping at the first.
    pub fn load(self) -> Result<LoadedConfig, ConfigError> {
        let mut v = Vec::new();
        let mut push = |kind, path: String, message: String| {
            v.push(Violation {
                kind,
                path,
                message,
            })
        };

        let mut spaces = BTreeMap::new();
        for (name, labels) in &self.spaces {
            match FiniteSpace::new(labels.iter().cloned()) {
                Ok(s) => {
                    spaces.insert(name.clone(), s);
                }
                Err(e) => push(
                    ViolationKind::Invariant,
                    format!("spaces.{name}"),
                    e.to_string(),
                ),
            }
        }

        let mut urns = BTreeMap::new();
        for (name, u) in &self.urns {
            let path = format!("urns.{name}");
            let Some(space) = spaces.get(&u.space) else {
                if !self.spaces.contains_key(&u.space) {
                    push(
                        ViolationKind::Reference,
                        format!("{path}.space"),
                        format!("unknown space {:?}", u.space),
                    );
                }
                continue;
            };
            let mut ok = true;
            if u.members.is_empty() {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.members"),
                    "no members".into(),
                );
                ok = false;
            }
            let mut members = Vec::new();
            for (k, row) in u.members.iter().enumerate() {
                match crate::measure::ProbabilityVector::new(space, row.clone()) {
                    Ok(p) => members.push(p),
                    Err(e) => {
                        push(
                            ViolationKind::Invariant,
                            format!("{path}.members[{k}]"),
                            e.to_string(),
                        );
                        ok = false;
                    }
                }
            }
            let x = RandomVariable::new(space, u.values.clone());
            if let Err(e) = &x {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.values"),
                    e.to_string(),
                );
                ok = false;
            }
            if ok {
                let credal = CredalSet::new(space, members).expect("checked rows");
                urns.insert(
                    name.clone(),
                    Urn::new(credal, x.expect("checked")).expect("same space"),
                );
            }
        }

        let urn_phi = |name: &str,
                       push: &mut dyn FnMut(ViolationKind, String, String)|
         -> Option<(String, BoundedFn)> {
            let p = &self.phis[name];
            let path = format!("phis.{name}");
            let urn_name = p.urn.as_ref()?;
            let urn = urns.get(urn_name)?;
            let axis = range_axis(&urn.range());
            match BoundedFn::new(&axis, p.values.clone()) {
                Ok(f) => Some((urn_name.clone(), f)),
                Err(e) => {
                    push(
                        ViolationKind::Invariant,
                        format!("{path}.values"),
                        e.to_string(),
                    );
                    None
                }
            }
        };

        for (name, p) in &self.phis {
            let path = format!("phis.{name}");
            match (&p.urn, &p.model) {
                (Some(_), Some(_)) | (None, None) => push(
                    ViolationKind::Invariant,
                    path.clone(),
                    "exactly one of `urn` and `model` must be set".into(),
                ),
                (Some(u), None) if !self.urns.contains_key(u) => push(
                    ViolationKind::Reference,
                    format!("{path}.urn"),
                    format!("unknown urn {u:?}"),
                ),
                (None, Some(m)) if !self.models.contains_key(m) => push(
                    ViolationKind::Reference,
                    format!("{path}.model"),
                    format!("unknown model {m:?}"),
                ),
                (Some(_), None) => {
                    urn_phi(name, &mut push);
                }
                _ => {}
            }
        }

        let mut models = BTreeMap::new();
        for (name, m) in &self.models {
            let path = format!("models.{name}");
            let mut members = Vec::new();
            let mut ok = true;
            if m.urns.is_empty() {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.urns"),
                    "no urns".into(),
                );
                ok = false;
            }
            for (k, u) in m.urns.iter().enumerate() {
                match urns.get(u) {
                    Some(urn) => members.push(urn.clone()),
                    None => {
                        if !self.urns.contains_key(u) {
                            push(
                                ViolationKind::Reference,
                                format!("{path}.urns[{k}]"),
                                format!("unknown urn {u:?}"),
                            );
                        }
                        ok = false;
                    }
                }
            }
            if !m.phis.is_empty() && m.phis.len() != m.urns.len() {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.phis"),
                    format!("expected {} functions, got {}", m.urns.len(), m.phis.len()),
                );
                ok = false;
            }
            let mut phis = Vec::new();
            for (k, phi) in m.phis.iter().enumerate() {
                match self.phis.get(phi) {
                    None => {
                        push(
                            ViolationKind::Reference,
                            format!("{path}.phis[{k}]"),
                            format!("unknown phi {phi:?}"),
                        );
                        ok = false;
                    }
                    Some(p) if p.urn.as_deref() != m.urns.get(k).map(String::as_str) => {
                        push(
                            ViolationKind::Reference,
                            format!("{path}.phis[{k}]"),
                            format!("phi {phi:?} is not tabulated on urn {:?}", m.urns.get(k)),
                        );
                        ok = false;
                    }
                    Some(_) => match urn_phi(phi, &mut |_, _, _| {}) {
                        Some((_, f)) => phis.push(f),
                        None => ok = false,
                    },
                }
            }
            if let Some(peng) = &m.peng_phi {
                match self.phis.get(peng) {
                    None => {
                        push(
                            ViolationKind::Reference,
                            format!("{path}.peng_phi"),
                            format!("unknown phi {peng:?}"),
                        );
                        ok = false;
                    }
                    Some(p) if p.model.as_deref() != Some(name.as_str()) => {
                        push(
                            ViolationKind::Reference,
                            format!("{path}.peng_phi"),
                            format!("phi {peng:?} is not tabulated on model {name:?}"),
                        );
                        ok = false;
                    }
                    Some(_) => {}
                }
            }
            if !ok {
                continue;
            }
            let law = match &m.joint {
                Some(rows) => JointLaw::Explicit(rows.clone()),
                None => JointLaw::Product,
            };
            let model = match UrnModel::build(members, law) {
                Ok(model) => model,
                Err(e) => {
                    push(ViolationKind::Invariant, path.clone(), e.to_string());
                    continue;
                }
            };
            let peng_phi = match &m.peng_phi {
                Some(peng) => {
                    match GridFunction::new(model.range_axes(), self.phis[peng].values.clone()) {
                        Ok(f) => Some(f),
                        Err(e) => {
                            push(
                                ViolationKind::Invariant,
                                format!("phis.{peng}.values"),
                                e.to_string(),
                            );
                            continue;
                        }
                    }
                }
                None => None,
            };
            models.insert(
                name.clone(),
                LoadedModel {
                    model,
                    phis: (!phis.is_empty()).then_some(phis),
                    peng_phi,
                },
            );
        }

        let mut names = std::collections::BTreeSet::new();
        for (k, s) in self.wlln.scenarios.iter().enumerate() {
            let path = format!("wlln.scenarios[{k}]");
            for message in s.violations() {
                push(ViolationKind::Invariant, path.clone(), message);
            }
            if !names.insert(s.name.clone()) {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.name"),
                    format!("duplicate scenario name {:?}", s.name),
                );
            }
        }
        for (k, e) in self.wlln.exact.iter().enumerate() {
            let path = format!("wlln.exact[{k}]");
            if !self.urns.contains_key(&e.urn) {
                push(
                    ViolationKind::Reference,
                    format!("{path}.urn"),
                    format!("unknown urn {:?}", e.urn),
                );
            }
            if !(e.epsilon >= 0.0 && e.epsilon.is_finite()) {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.epsilon"),
                    "epsilon must be finite and nonnegative".into(),
                );
            }
            if e.n_list.is_empty()
                || e.n_list.contains(&0)
                || e.n_list.windows(2).any(|w| w[0] >= w[1])
            {
                push(
                    ViolationKind::Invariant,
                    format!("{path}.n_list"),
                    "n_list must be nonempty, positive and strictly ascending".into(),
                );
            }
        }
        if let Some(t) = self.output.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                push(
                    ViolationKind::Invariant,
                    "output.tolerance".into(),
                    "tolerance must be finite and nonnegative".into(),
                );
            }
        }

        if v.is_empty() {
            Ok(LoadedConfig {
                raw: self,
                spaces,
                urns,
                models,
            })
        } else {
            Err(ConfigError::Violations(v))
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    ScenarioConfig::parse(text)?.load()
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
