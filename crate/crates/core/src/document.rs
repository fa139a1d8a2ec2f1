//! JSON system documents and versioned report envelopes.
//!
//! ```json
//! {
//!   "name": "HELIX", "m": 3, "T": 6.283185307179586, "R": 0.5,
//!   "metric": {"1,1": "1", "2,2": "1", "3,3": "1"},
//!   "alpha": ["1", "0", "x2"],
//!   "flags": {"gamma_nullhomologous": true, "gamma_contractible": true},
//!   "exterior_alpha_bound": 1.0
//! }
//! ```
//!
//! Metric keys are 1-based `"i,j"`; missing entries take identity values, and
//! giving both `"i,j"` and `"j,i"` with different expressions is an error.
//! Optional construction directives: `construct`, `bump`, `beta`, `exterior`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog;
use crate::chartgeom::{ChartFrame, CovectorField, GeomError, MetricField, SystemChart, TopologyFlags};
use crate::constructor::{BumpProfile, ConstructKind, ConstructOptions};
use crate::exec::Exec;
use crate::fieldexpr::{parse, Expr, ParseError, MAX_DIM};
use crate::sampling::GridSpec;

pub const SCHEMA_VERSION: u32 = 1;
pub const CATALOG_PREFIX: &str = "catalog:";

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed system document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown catalog system `{0}`")]
    UnknownCatalog(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("expression error at `{path}`: {source}")]
    Expr { path: String, source: ParseError },
    #[error("chart audit failed: {0}")]
    Geom(#[from] GeomError),
}

impl DocumentError {
    /// Field path for structured error reports.
    pub fn path(&self) -> Option<&str> {
        match self {
            DocumentError::Config { path, .. } | DocumentError::Expr { path, .. } => Some(path),
            _ => None,
        }
    }
}

fn config(path: impl Into<String>, message: impl Into<String>) -> DocumentError {
    DocumentError::Config {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub name: String,
    pub m: usize,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<String>>,
    #[serde(default)]
    pub flags: TopologyFlags,
    #[serde(default)]
    pub exterior_alpha_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<ConstructKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<BumpProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior: Option<ExteriorDocument>,
}

/// A construction requested by a document.
#[derive(Debug, Clone)]
pub struct Directive {
    pub kind: ConstructKind,
    pub options: ConstructOptions,
}

#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: SystemChart,
    pub directive: Option<Directive>,
}

fn metric_key(i: usize, j: usize) -> String {
    format!("{},{}", i + 1, j + 1)
}

fn parse_key(key: &str, m: usize, path: &str) -> Result<(usize, usize), DocumentError> {
    let bad = || config(format!("{path}.\"{key}\""), format!("metric keys are \"i,j\" with 1 <= i, j <= {m}"));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if !(1..=m).contains(&i) || !(1..=m).contains(&j) {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn parse_field(src: &str, m: usize, path: String) -> Result<Expr, DocumentError> {
    parse(src, m).map_err(|source| DocumentError::Expr { path, source })
}

fn metric_from_map(map: &BTreeMap<String, String>, m: usize, path: &str) -> Result<MetricField, DocumentError> {
    let mut upper: BTreeMap<(usize, usize), (String, Expr)> = BTreeMap::new();
    for (key, src) in map {
        let (i, j) = parse_key(key, m, path)?;
        let field_path = format!("{path}.\"{key}\"");
        let expr = parse_field(src, m, field_path.clone())?;
        let slot = (i.min(j), i.max(j));
        if let Some((other_key, other)) = upper.get(&slot) {
            if *other != expr {
                return Err(config(
                    field_path,
                    format!("conflicts with \"{other_key}\"; the metric must be symmetric"),
                ));
            }
            continue;
        }
        upper.insert(slot, (key.clone(), expr));
    }
    Ok(MetricField::from_fn(m, |i, j| match upper.get(&(i, j)) {
        Some((_, e)) => e.clone(),
        None => Expr::constant(if i == j { 1.0 } else { 0.0 }),
    }))
}

fn alpha_from_list(list: &[String], m: usize, path: &str) -> Result<CovectorField, DocumentError> {
    if list.len() != m {
        return Err(config(path, format!("expected {m} components, got {}", list.len())));
    }
    let comps = list
        .iter()
        .enumerate()
        .map(|(k, src)| parse_field(src, m, format!("{path}[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CovectorField::new(comps))
}

impl SystemDocument {
    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialise")
    }

    /// Document holding exactly the fields of `sys`.
    pub fn from_system(sys: &SystemChart) -> Self {
        let metric = sys
            .metric
            .entries()
            .map(|((i, j), e)| (metric_key(i, j), e.to_string()))
            .collect();
        SystemDocument {
            name: sys.frame.name.clone(),
            m: sys.dim(),
            period: sys.frame.period,
            radius: sys.frame.radius,
            metric: Some(metric),
            alpha: Some(sys.alpha.components().iter().map(|e| e.to_string()).collect()),
            flags: sys.frame.flags,
            exterior_alpha_bound: sys.frame.exterior_alpha_bound,
            construct: None,
            bump: None,
            beta: None,
            exterior: None,
        }
    }

    /// Validate and build the system. The positive-definiteness audit runs
    /// on `audit` when given.
    pub fn into_loaded(self, audit: Option<GridSpec>) -> Result<LoadedSystem, DocumentError> {
        let m = self.m;
        if !(3..=MAX_DIM).contains(&m) {
            return Err(config("m", format!("dimension must be in 3..={MAX_DIM}")));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(config("T", "period must be positive and finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(config("R", "chart radius must be positive and finite"));
        }
        if let Some(b) = self.exterior_alpha_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(config("exterior_alpha_bound", "bound must be non-negative and finite"));
            }
        }
        let metric = match &self.metric {
            Some(map) => metric_from_map(map, m, "metric")?,
            None => MetricField::identity(m),
        };
        let alpha = match &self.alpha {
            Some(list) => alpha_from_list(list, m, "alpha")?,
            None => CovectorField::zero(m),
        };
        let system = SystemChart {
            frame: ChartFrame {
                name: self.name.clone(),
                dim: m,
                period: self.period,
                radius: self.radius,
                flags: self.flags,
                exterior_alpha_bound: self.exterior_alpha_bound,
            },
            metric,
            alpha,
        };
        if let Some(grid) = audit {
            system.check_positive_definite(grid, Exec::default())?;
        }

        let directive = match self.construct {
            None => {
                for (key, present) in [
                    ("bump", self.bump.is_some()),
                    ("beta", self.beta.is_some()),
                    ("exterior", self.exterior.is_some()),
                ] {
                    if present {
                        return Err(config(key, "only meaningful together with `construct`"));
                    }
                }
                None
            }
            Some(kind) => {
                if let Some(bump) = &self.bump {
                    bump.validate(self.radius)
                        .map_err(|e| config("bump", e.to_string()))?;
                }
                if let Some(beta) = self.beta {
                    if !(beta > 0.0 && beta.is_finite()) {
                        return Err(config("beta", "beta must be positive and finite"));
                    }
                }
                let ext = self.exterior.clone().unwrap_or_default();
                let exterior_metric = ext
                    .metric
                    .as_ref()
                    .map(|map| metric_from_map(map, m, "exterior.metric"))
                    .transpose()?;
                let exterior_alpha = ext
                    .alpha
                    .as_ref()
                    .map(|list| alpha_from_list(list, m, "exterior.alpha"))
                    .transpose()?;
                Some(Directive {
                    kind,
                    options: ConstructOptions {
                        profile: self.bump,
                        beta: self.beta,
                        exterior_metric,
                        exterior_alpha,
                    },
                })
            }
        };
        Ok(LoadedSystem { system, directive })
    }
}

/// A `catalog:NAME` reference or a path to a JSON document.
pub fn load_source(source: &str) -> Result<LoadedSystem, DocumentError> {
    if let Some(name) = source.strip_prefix(CATALOG_PREFIX) {
        let system = catalog::by_name(name).ok_or_else(|| DocumentError::UnknownCatalog(name.to_string()))?;
        return Ok(LoadedSystem { system, directive: None });
    }
    load_path(Path::new(source))
}

pub fn load_path(path: &Path) -> Result<LoadedSystem, DocumentError> {
    let text = std::fs::read_to_string(path).map_err(|source| DocumentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SystemDocument::from_json(&text)?.into_loaded(Some(GridSpec::default()))
}

/// Versioned wrapper around every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope<T> {
    pub schema_version: u32,
    pub command: String,
    pub system: String,
    pub seed: Option<u64>,
    pub report: T,
}

impl<T> ReportEnvelope<T> {
    pub fn new(command: &str, system: &str, seed: Option<u64>, report: T) -> Self {
        ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            system: system.to_string(),
            seed,
            report,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HELIX: &str = r#"{
        "name": "H", "m": 3, "T": 6.283185307179586, "R": 0.5,
        "metric": {"1,1": "1", "2,2": "1", "3,3": "1"},
        "alpha": ["1", "0", "x2"],
        "flags": {"gamma_nullhomologous": true, "gamma_contractible": true},
        "exterior_alpha_bound": 1.0
    }"#;

    #[test]
    fn document_matches_catalog() {
        let loaded = SystemDocument::from_json(HELIX).unwrap().into_loaded(Some(GridSpec::default())).unwrap();
        let mut reference = catalog::helix();
        reference.frame.name = "H".into();
        assert_eq!(loaded.system, reference);
        assert!(loaded.directive.is_none());
    }

    #[test]
    fn catalog_sources() {
        assert_eq!(load_source("catalog:FLAT").unwrap().system, catalog::flat());
        assert!(matches!(load_source("catalog:NOPE"), Err(DocumentError::UnknownCatalog(_))));
    }

    #[test]
    fn symmetry_conflict_is_rejected() {
        let text = HELIX.replace(r#""3,3": "1""#, r#""3,3": "1", "1,2": "0.1*x2", "2,1": "0.2*x2""#);
        let err = SystemDocument::from_json(&text).unwrap().into_loaded(None).unwrap_err();
        match err {
            DocumentError::Config { path, .. } => assert!(path.starts_with("metric."), "{path}"),
            other => panic!("{other}"),
        }
        let text = HELIX.replace(r#""3,3": "1""#, r#""3,3": "1", "1,2": "0.1*x2", "2,1": "0.1 * x2""#);
        assert!(SystemDocument::from_json(&text).unwrap().into_loaded(None).is_ok());
    }

    #[test]
    fn unknown_keys_and_bad_fields() {
        let text = HELIX.replace(r#""name": "H","#, r#""name": "H", "colour": 1,"#);
        assert!(matches!(SystemDocument::from_json(&text), Err(DocumentError::Json(_))));
        let text = HELIX.replace(r#""x2"]"#, r#""x4"]"#);
        match SystemDocument::from_json(&text).unwrap().into_loaded(None) {
            Err(DocumentError::Expr { path, .. }) => assert_eq!(path, "alpha[2]"),
            other => panic!("{other:?}"),
        }
        let text = HELIX.replace(r#""R": 0.5"#, r#""R": -1"#);
        assert!(matches!(
            SystemDocument::from_json(&text).unwrap().into_loaded(None),
            Err(DocumentError::Config { .. })
        ));
    }

    #[test]
    fn indefinite_metric_fails_audit() {
        let text = HELIX.replace(r#""1,1": "1""#, r#""1,1": "x2""#);
        assert!(matches!(
            SystemDocument::from_json(&text).unwrap().into_loaded(Some(GridSpec::default())),
            Err(DocumentError::Geom(GeomError::NotPositiveDefinite { .. }))
        ));
    }

    #[test]
    fn round_trip_of_constructed_system() {
        let sys = crate::constructor::rescaled(&catalog::wavy()).unwrap();
        let doc = SystemDocument::from_system(&sys).to_json();
        let back = SystemDocument::from_json(&doc).unwrap().into_loaded(None).unwrap().system;
        for p in [[0.1, 0.05, 0.0], [2.0, -0.2, 0.3], [4.0, 0.33, -0.12]] {
            assert_eq!(sys.metric_at(&p).unwrap(), back.metric_at(&p).unwrap());
            assert_eq!(sys.alpha.value_at(&p).unwrap(), back.alpha.value_at(&p).unwrap());
        }
    }
}
