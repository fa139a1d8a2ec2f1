use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use maglab::constructor::ConstructError;
use maglab::document::{DocumentError, SCHEMA_VERSION};
use maglab::flow::FlowError;
use maglab::mane::ManeError;
use maglab::sampling::GridSpec;
use serde::Serialize;
use serde_json::json;

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    let [t, x] = parts.as_slice() else {
        return Err(format!("expected `T,X`, got `{s}`"));
    };
    let t: usize = t.parse().map_err(|e| format!("grid times: {e}"))?;
    let x: usize = x.parse().map_err(|e| format!("grid points: {e}"))?;
    if t == 0 || x == 0 {
        return Err("grid densities must be positive".into());
    }
    Ok(GridSpec { t_samples: t, x_samples: x })
}

/// Shortest round-trip decimal; empty for missing values.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => serde_json::Number::from_f64(v).map(|n| n.to_string()).unwrap_or_default(),
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

fn target(out: Option<&Path>, file: &str) -> Result<Option<PathBuf>> {
    let Some(dir) = out else { return Ok(None) };
    fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    Ok(Some(dir.join(file)))
}

pub fn write_json<T: Serialize>(out: Option<&Path>, file: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match target(out, file)? {
        Some(path) => fs::write(&path, text).with_context(|| format!("cannot write `{}`", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn write_csv(out: Option<&Path>, file: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    match target(out, file)? {
        Some(path) => fs::write(&path, bytes).with_context(|| format!("cannot write `{}`", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn kind(err: &anyhow::Error) -> (&'static str, Option<String>) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DocumentError>() {
            let kind = match e {
                DocumentError::Io { .. } => "io",
                DocumentError::Json(_) | DocumentError::Config { .. } | DocumentError::UnknownCatalog(_) => "config",
                DocumentError::Expr { .. } => "expression",
                DocumentError::Geom(_) => "geometry",
            };
            return (kind, e.path().map(str::to_string));
        }
        if cause.is::<ConstructError>() {
            return ("construction", None);
        }
        if cause.is::<ManeError>() {
            return ("mane", None);
        }
        if cause.is::<FlowError>() {
            return ("flow", None);
        }
    }
    ("usage", None)
}

pub fn error_report(command: &str, err: &anyhow::Error) -> String {
    let (kind, path) = kind(err);
    let messages: Vec<String> = err.chain().map(|c| c.to_string()).collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "error": {
            "kind": kind,
            "path": path,
            "message": messages.join(": "),
        }
    })
    .to_string()
}
