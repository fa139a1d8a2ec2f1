use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use maglab::catalog;
use maglab::chartgeom::SystemChart;
use maglab::constructor::{self, BumpProfile, ConstructOptions};
use maglab::document::{self, ReportEnvelope, SystemDocument};
use maglab::exec::Exec;
use maglab::flow::{self, IntegratorConfig, Method, State};
use maglab::mane::{self, CriticalValue, LowerBoundAudit, MeasureReport, SweepTable};
use maglab::verifier::{self, Classification, VerificationReport, VerifyConfig};
use serde::Serialize;

use crate::output::{cell, write_csv, write_json};
use crate::{
    BuildArgs, CatalogArgs, Command, Common, IntegrateArgs, Integration, ManeArgs, MeasureArgs, SweepArgs, VerifyArgs,
};

const LOWER_BOUND_TOL: f64 = 1e-10;
const MEASURE_TOL: f64 = 1e-12;
const FIBER_TOL: f64 = 1e-14;

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Verify(_) => "verify",
        Command::Build(_) => "build",
        Command::Integrate(_) => "integrate",
        Command::Sweep(_) => "sweep",
        Command::Mane(_) => "mane",
        Command::Measure(_) => "measure",
        Command::Catalog(_) => "catalog",
    }
}

/// Runs one command. `Ok(false)` means it completed but a check failed.
pub fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Verify(a) => verify(a),
        Command::Build(a) => build(a),
        Command::Integrate(a) => integrate(a),
        Command::Sweep(a) => sweep(a),
        Command::Mane(a) => mane_cmd(a),
        Command::Measure(a) => measure(a),
        Command::Catalog(a) => catalog_cmd(a),
    }
}

impl Common {
    fn source(&self) -> Result<&str> {
        self.source
            .as_deref()
            .or(self.system.as_deref())
            .context("no system given; pass `catalog:NAME` or a document path")
    }

    fn config(&self) -> Result<VerifyConfig> {
        if !(self.tol > 0.0) || !(self.margin_tol > 0.0) {
            bail!("tolerances must be positive");
        }
        if self.samples == 0 {
            bail!("--samples must be positive");
        }
        Ok(VerifyConfig {
            axis_samples: self.samples,
            tol: self.tol,
            margin_tol: self.margin_tol,
            grid: self.grid.unwrap_or_default(),
            exec: if self.sequential { Exec::Sequential } else { Exec::default() },
        })
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// The described system: construction directive applied, then the
    /// optional rescaling.
    fn load(&self, cfg: &VerifyConfig) -> Result<SystemChart> {
        let loaded = document::load_source(self.source()?)?;
        let mut sys = match loaded.directive {
            Some(d) => constructor::construct(d.kind, &loaded.system, &d.options, cfg)?.system,
            None => loaded.system,
        };
        if self.rescale {
            sys = constructor::rescaled(&sys)?;
        }
        Ok(sys)
    }
}

impl Integration {
    fn config(&self) -> Result<IntegratorConfig> {
        if let Some(h) = self.h {
            if !(h > 0.0) {
                bail!("--h must be positive");
            }
        }
        if !(self.rtol > 0.0) {
            bail!("--rtol must be positive");
        }
        Ok(IntegratorConfig {
            method: if self.adaptive { Method::Adaptive } else { Method::Rk4 },
            h: self.h,
            rtol: self.rtol,
        })
    }
}

fn verify(a: VerifyArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let sys = a.common.load(&cfg)?;
    let report = verifier::classify_with(&sys, &cfg);
    let ok = report.at_least(a.require.into());
    let env = ReportEnvelope::new("verify", &sys.frame.name, None, report);
    write_json(a.common.out(), "verify.json", &env)?;
    Ok(ok)
}

#[derive(Serialize)]
struct BuildReport {
    provenance: String,
    output: String,
    certified_radius: f64,
    period_scale: f64,
    beta: Option<f64>,
    verification: VerificationReport,
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

fn build(a: BuildArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let loaded = document::load_source(a.common.source()?)?;
    let mut input = loaded.system;
    if a.common.rescale {
        input = constructor::rescaled(&input)?;
    }
    let (doc_kind, mut opts) = match loaded.directive {
        Some(d) => (Some(d.kind), d.options),
        None => (None, ConstructOptions::default()),
    };
    let kind = a
        .kind
        .map(Into::into)
        .or(doc_kind)
        .context("no construction given; pass --kind or set `construct` in the document")?;
    if a.r0.is_some() || a.r1.is_some() {
        let base = opts.profile.unwrap_or_else(|| BumpProfile::default_for(input.frame.radius));
        opts.profile = Some(BumpProfile::new(
            a.r0.unwrap_or(base.r0),
            a.r1.unwrap_or(base.r1),
            input.frame.radius,
        )?);
    }
    if a.beta.is_some() {
        opts.beta = a.beta;
    }
    let report = constructor::construct(kind, &input, &opts, &cfg)?;
    let dir = a.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    let path = dir.join(format!("{}.json", slug(&report.system.frame.name)));
    std::fs::write(&path, SystemDocument::from_system(&report.system).to_json() + "\n")
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    let ok = report.verification.at_least(a.require.into());
    let body = BuildReport {
        provenance: report.provenance,
        output: path.display().to_string(),
        certified_radius: report.certified_radius,
        period_scale: report.period_scale,
        beta: report.beta,
        verification: report.verification,
    };
    let env = ReportEnvelope::new("build", &report.system.frame.name, None, body);
    write_json(a.common.out(), "build.json", &env)?;
    Ok(ok)
}

#[derive(Serialize)]
struct IntegrateSummary {
    method: Method,
    step: f64,
    steps: usize,
    rejected_steps: usize,
    duration: f64,
    energy_drift: f64,
}

fn integrate(a: IntegrateArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let icfg = a.integration.config()?;
    let sys = a.common.load(&cfg)?;
    let core = flow::core_orbit_start(&sys, 1.0);
    let s0 = State::new(a.p.clone().unwrap_or(core.p), a.v.clone().unwrap_or(core.v));
    if s0.p.len() != sys.dim() || s0.v.len() != sys.dim() {
        bail!("--p and --v need {} components", sys.dim());
    }
    let duration = a.duration.unwrap_or(sys.frame.period);
    if !(duration > 0.0) {
        bail!("--duration must be positive");
    }
    let traj = flow::integrate(&sys, &s0, duration, &icfg)?;
    let rows: Vec<Vec<String>> = flow::trajectory_rows(&sys, &traj)?
        .into_iter()
        .map(|r| r.into_iter().map(|v| cell(Some(v))).collect())
        .collect();
    write_csv(a.common.out(), "trajectory.csv", &flow::trajectory_header(sys.dim()), &rows)?;
    if a.common.out.is_some() {
        let summary = IntegrateSummary {
            method: traj.method,
            step: traj.step,
            steps: traj.len().saturating_sub(1),
            rejected_steps: traj.rejected_steps,
            duration,
            energy_drift: flow::energy_drift(&sys, &traj)?,
        };
        let env = ReportEnvelope::new("integrate", &sys.frame.name, None, summary);
        write_json(a.common.out(), "integrate.json", &env)?;
    }
    Ok(true)
}

fn sweep_rows(table: &SweepTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                cell(Some(r.r)),
                cell(Some(r.kappa_r)),
                cell(Some(r.predicted_action)),
                cell(Some(r.quadrature_action)),
                cell(Some(r.closure_residual)),
                cell(r.mixing_weight),
            ]
        })
        .collect()
}

fn sweep(a: SweepArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let icfg = a.integration.config()?;
    let sys = a.common.load(&cfg)?;
    let table = mane::action_sweep(&sys, &a.r, &icfg, &cfg)?;
    let header: Vec<String> = SweepTable::COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(a.common.out(), "sweep.csv", &header, &sweep_rows(&table))?;
    let ok = table.rows.iter().all(|r| r.closure_residual <= cfg.tol);
    if a.common.out.is_some() {
        let env = ReportEnvelope::new("sweep", &sys.frame.name, None, table);
        write_json(a.common.out(), "sweep.json", &env)?;
    }
    Ok(ok)
}

#[derive(Serialize)]
struct ManeReport {
    critical: CriticalValue,
    lower_bound: LowerBoundAudit,
}

fn mane_cmd(a: ManeArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let sys = a.common.load(&cfg)?;
    let critical = mane::c0(&sys, &cfg)?;
    let lower_bound = mane::lower_bound_audit(&sys, a.audit_samples, a.common.seed, &cfg)?;
    let ok = lower_bound.min_value >= -LOWER_BOUND_TOL;
    let env = ReportEnvelope::new("mane", &sys.frame.name, Some(a.common.seed), ManeReport { critical, lower_bound });
    write_json(a.common.out(), "mane.json", &env)?;
    Ok(ok)
}

fn measure(a: MeasureArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    let icfg = a.integration.config()?;
    let sys = a.common.load(&cfg)?;
    let reports = a
        .r
        .iter()
        .map(|&r| mane::measure_mix(&sys, r, &icfg, &cfg, a.audit_samples, a.common.seed))
        .collect::<Result<Vec<MeasureReport>, _>>()?;
    let ok = reports.iter().all(|m| {
        m.mixing_weight > 0.0
            && m.mixing_weight < 1.0
            && m.nu_action.abs() <= MEASURE_TOL
            && m.lambda_ze_residual <= MEASURE_TOL
            && m.fiber_symmetry <= FIBER_TOL
    });
    let env = ReportEnvelope::new("measure", &sys.frame.name, Some(a.common.seed), reports);
    write_json(a.common.out(), "measure.json", &env)?;
    Ok(ok)
}

#[derive(Serialize)]
struct CatalogEntry {
    name: &'static str,
    source: String,
    description: &'static str,
    classification: Classification,
}

fn catalog_cmd(a: CatalogArgs) -> Result<bool> {
    if let Some(name) = a.name {
        let name = name.strip_prefix(document::CATALOG_PREFIX).unwrap_or(&name);
        let sys = catalog::by_name(name).with_context(|| format!("unknown catalog system `{name}`"))?;
        let doc = SystemDocument::from_system(&sys);
        write_json(a.out.as_deref(), &format!("{}.json", slug(&sys.frame.name)), &doc)?;
        return Ok(true);
    }
    let entries: Vec<CatalogEntry> = catalog::NAMES
        .iter()
        .map(|&name| {
            let sys = catalog::by_name(name).expect("catalog name");
            CatalogEntry {
                name,
                source: format!("{}{name}", document::CATALOG_PREFIX),
                description: catalog::description(name).unwrap_or(""),
                classification: verifier::classify(&sys).classification,
            }
        })
        .collect();
    let env = ReportEnvelope::new("catalog", "catalog", None, entries);
    write_json(a.out.as_deref(), "catalog.json", &env)?;
    Ok(true)
}
