//! Command-line front end: `agm <command> --scenario <file> [flags]`.

pub mod report;
pub mod scenario;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::agmap::deform;
use crate::audit::{run_checks, AuditOptions, AuditReport, CheckId};
use crate::curvature::CurvatureMode;
use crate::invariants::{t1, t2hat, weyl_from, SpaceData, T2Reading, TraceReading};
use crate::paths::{ag_defect, integrate_geodesic, write_csv, Defect};
use crate::tensor::{max_abs_diff, DiffMode};

pub use report::Report;
pub use scenario::{load_scenario, parse_scenario, LoadError, Scenario};

use report::{
    real, reals, readings_meta, CheckEntry, ExtraInvariants, GridMeta, InvariantEntry, MaybeTensor, Meta, PathEntry,
    Summary, TensorEntry,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// `ω` counts as symmetric below this asymmetry.
const OMEGA_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Reciprocity and basic-equation residuals (A1-A3).
    Check,
    /// Every identity of the derivation audit.
    Audit,
    /// Invariant tensors at the requested points.
    Invariants,
    /// Geodesics of the source connection and their defect in the target.
    Path,
    /// Rewrite a generator scenario in explicit form.
    Gen,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Audit => "audit",
            Command::Invariants => "invariants",
            Command::Path => "path",
            Command::Gen => "gen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ModeArg {
    #[default]
    Exact,
    Fd,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "agm", version, about = "Audit almost geodesic mappings of non-symmetric affine connection spaces")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Finite-difference step (overrides the scenario's `fd_step`).
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Curvature convention (overrides the scenario's `curvature_mode`).
    #[arg(long)]
    pub curvature: Option<CurvatureMode>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation point for `invariants`, e.g. `--point=0.1,-0.2`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    /// Also evaluate the `t1` and `t2hat` candidates in `invariants`.
    #[arg(long)]
    pub extra: bool,
    /// CSV file for `path` samples; further curves get `.1`, `.2`, ... before
    /// the extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("{0}")]
    Compute(String),
}

/// Output of one command: the bytes to write and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub body: String,
    pub exit: u8,
}

/// Parses arguments, runs the command, writes its output; returns the exit
/// code.
pub fn main_with(args: Args) -> u8 {
    match execute(&args) {
        Ok(out) => {
            let written = match &args.out {
                Some(path) => fs::write(path, &out.body).map_err(|source| CliError::Write {
                    path: path.display().to_string(),
                    source,
                }),
                None => io::stdout().write_all(out.body.as_bytes()).map_err(|source| CliError::Write {
                    path: "<stdout>".into(),
                    source,
                }),
            };
            match written {
                Ok(()) => out.exit,
                Err(err) => {
                    eprintln!("agm: {err}");
                    EXIT_USAGE
                }
            }
        }
        Err(err) => {
            eprintln!("agm: {err}");
            EXIT_USAGE
        }
    }
}

pub fn execute(args: &Args) -> Result<Outcome, CliError> {
    let scenario = load_scenario(&args.scenario)?;
    run_command(args.command, &scenario, args)
}

pub fn run_command(cmd: Command, s: &Scenario, args: &Args) -> Result<Outcome, CliError> {
    if let Some(h) = args.fd_step {
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::Usage(format!("--fd-step must be positive, got {h}")));
        }
    }
    if let Some(p) = &args.point {
        if p.len() != s.dim() {
            return Err(CliError::Usage(format!("--point needs {} coordinates, got {}", s.dim(), p.len())));
        }
    }
    let mode = s.mode(args.mode == ModeArg::Fd, args.fd_step);
    let options = AuditOptions {
        mode,
        curvature: args.curvature.unwrap_or(s.curvature),
        tolerances: s.tolerances_for(mode),
        readings: s.readings,
    };
    let meta = Meta {
        tool: "agm",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name().to_string(),
        scenario_digest: s.digest.clone(),
        mode: if mode.is_exact() { "exact" } else { "fd" },
        fd_step: match mode {
            DiffMode::Fd(h) => Some(real(h)),
            DiffMode::Exact => None,
        },
        curvature: options.curvature.name(),
        theta: s.instance.theta.index(),
        grid: GridMeta {
            count: s.grid.len(),
            seed: s.grid.seed(),
        },
        readings: readings_meta(&s.readings),
    };
    let report = match cmd {
        Command::Gen => {
            let file = scenario::materialize(s);
            let mut body = serde_json::to_string_pretty(&file).expect("scenario serializes");
            body.push('\n');
            return Ok(Outcome { body, exit: EXIT_PASS });
        }
        Command::Check => audit_report(meta, s, &options, Some(&[CheckId::A1, CheckId::A2, CheckId::A3]))?,
        Command::Audit => audit_report(meta, s, &options, None)?,
        Command::Invariants => invariants_report(meta, s, &options, args)?,
        Command::Path => path_report(meta, s, args)?,
    };
    let exit = if report.summary.status == "pass" { EXIT_PASS } else { EXIT_FAIL };
    Ok(Outcome {
        body: render(&report),
        exit,
    })
}

pub fn render(report: &Report) -> String {
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    body
}

fn audit_summary(rep: &AuditReport<f64>) -> Summary {
    let failed = rep.checks.iter().filter(|c| !c.pass).count();
    match rep.localize_failure() {
        None => Summary {
            status: "pass",
            total: rep.checks.len(),
            failed,
            first_failure: None,
            message: "all pass".into(),
        },
        Some(c) => Summary {
            status: "fail",
            total: rep.checks.len(),
            failed,
            first_failure: Some(c.id.to_string()),
            message: format!(
                "{} fails ({}): residual {} > {}",
                c.id,
                c.eq_ref,
                real(c.residual),
                real(c.tolerance)
            ),
        },
    }
}

fn audit_report(
    meta: Meta,
    s: &Scenario,
    options: &AuditOptions<f64>,
    only: Option<&[CheckId]>,
) -> Result<Report, CliError> {
    let rep = run_checks(&s.connection, &s.instance, &s.grid, options, only)
        .map_err(|e| CliError::Compute(e.to_string()))?;
    Ok(Report {
        meta,
        checks: rep.checks.iter().map(CheckEntry::from).collect(),
        summary: audit_summary(&rep),
        invariants: None,
        paths: None,
    })
}

fn invariants_report(
    meta: Meta,
    s: &Scenario,
    options: &AuditOptions<f64>,
    args: &Args,
) -> Result<Report, CliError> {
    let points: Vec<Vec<f64>> = match &args.point {
        Some(p) => vec![p.clone()],
        None if !s.points.is_empty() => s.points.clone(),
        None => vec![vec![0.0; s.dim()]],
    };
    let lbar = deform(&s.connection, &s.instance).map_err(|e| CliError::Compute(e.to_string()))?;
    let src = SpaceData::new(s.connection.clone(), s.instance.clone());
    let dst = SpaceData::new(lbar, s.instance.inverse());
    let reading = options.readings.weyl_trace.unwrap_or(TraceReading::Plain);
    let entries = points
        .par_iter()
        .map(|x| {
            let (p, q) = (src.at(x, options.mode), dst.at(x, options.mode));
            let w = weyl_from(&p.curvature(options.curvature), &p.f_script(), reading);
            let wb = weyl_from(&q.curvature(options.curvature), &q.f_script(), reading);
            let omega = p.omega();
            let asym = max_abs_diff(omega, &omega.swap_slots(1, 2)).expect("same shape").0;
            let gap = |a, b| real(max_abs_diff(a, b).expect("same shape").0);
            let extra = args.extra.then(|| ExtraInvariants {
                t1: match t1(&s.connection, &s.instance, x) {
                    Ok(t) => MaybeTensor::Tensor(TensorEntry::new(&t, 1)),
                    Err(e) => MaybeTensor::Undefined { undefined: e.to_string() },
                },
                t2hat: T2Reading::ALL
                    .iter()
                    .map(|&r| {
                        let t = t2hat(&s.connection, &s.instance, x, r, options.mode);
                        (r.name(), TensorEntry::new(&t, 1))
                    })
                    .collect::<BTreeMap<_, _>>(),
            });
            InvariantEntry {
                point: reals(x),
                thomas: TensorEntry::new(&p.thomas, 1),
                u: TensorEntry::new(&p.u, 1),
                f_script: TensorEntry::new(&p.f_script(), 1),
                weyl: TensorEntry::new(&w, 1),
                omega_asymmetry: real(asym),
                omega_symmetric: asym <= OMEGA_SYMMETRY_TOL,
                thomas_gap: gap(&q.thomas, &p.thomas),
                weyl_gap: gap(&wb, &w),
                extra,
            }
        })
        .collect::<Vec<_>>();
    Ok(Report {
        meta,
        checks: Vec::new(),
        summary: Summary {
            status: "pass",
            total: 0,
            failed: 0,
            first_failure: None,
            message: format!("{} point(s) evaluated", entries.len()),
        },
        invariants: Some(entries),
        paths: None,
    })
}

fn csv_path(base: &Path, k: usize) -> PathBuf {
    if k == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{k}"),
    };
    base.with_file_name(name)
}

fn path_report(meta: Meta, s: &Scenario, args: &Args) -> Result<Report, CliError> {
    if s.paths.is_empty() {
        return Err(CliError::Usage("the scenario has no `paths` block".into()));
    }
    let lbar = deform(&s.connection, &s.instance).map_err(|e| CliError::Compute(e.to_string()))?;
    let theta = s.instance.theta;
    let bounds = s.grid.bounds();
    let results: Vec<_> = s
        .paths
        .par_iter()
        .map(|p| {
            let samples = integrate_geodesic(&s.connection, &p.x0, &p.l0, p.t_end, p.steps, Some(bounds))
                .map_err(|e| e.to_string())?;
            let defect = ag_defect(&lbar, &samples, theta).map_err(|e| e.to_string())?;
            Ok::<_, String>((samples, defect))
        })
        .collect();
    let mut entries = Vec::new();
    for (k, (p, res)) in s.paths.iter().zip(results).enumerate() {
        let mut entry = PathEntry {
            x0: reals(&p.x0),
            l0: reals(&p.l0),
            t_end: real(p.t_end),
            steps: p.steps,
            status: "error",
            max_defect: None,
            tolerance: real(p.tolerance),
            error: None,
            csv: None,
        };
        match res {
            Err(e) => entry.error = Some(e),
            Ok((samples, defect)) => {
                entry.status = match (&defect, defect.max()) {
                    (Defect::Vacuous, _) => "vacuous",
                    (_, Some(d)) if d <= p.tolerance => "pass",
                    (_, None) => "pass",
                    _ => "fail",
                };
                entry.max_defect = defect.max().map(real);
                if let Some(base) = &args.csv {
                    let path = csv_path(base, k);
                    let mut buf = Vec::new();
                    write_csv(&mut buf, &samples, &defect).expect("in-memory write");
                    fs::write(&path, buf).map_err(|source| CliError::Write {
                        path: path.display().to_string(),
                        source,
                    })?;
                    entry.csv = Some(path.display().to_string());
                }
            }
        }
        entries.push(entry);
    }
    let failed = entries.iter().filter(|e| matches!(e.status, "fail" | "error")).count();
    let first = entries.iter().position(|e| matches!(e.status, "fail" | "error"));
    Ok(Report {
        meta,
        checks: Vec::new(),
        summary: Summary {
            status: if failed == 0 { "pass" } else { "fail" },
            total: entries.len(),
            failed,
            first_failure: first.map(|k| format!("paths[{k}]")),
            message: match first {
                None if entries.iter().all(|e| e.status == "vacuous") => {
                    "all curves vacuous: the span condition is empty for N < 3".into()
                }
                None => "all pass".into(),
                Some(k) => format!("paths[{k}]: {}", entries[k].error.clone().unwrap_or_else(|| "defect above tolerance".into())),
            },
        },
        invariants: None,
        paths: Some(entries),
    })
}
