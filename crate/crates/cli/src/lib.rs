use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagpack_core::certify::{
    certify_all, summary_table, CertifyOptions, PackingCertificate, TimeMode, INTEGRALITY_TOL, SYMPLECTIC_TOL,
};
use lagpack_core::ledger::{surgery_tables, tables_csv, tables_markdown, LedgerError};
use lagpack_core::lplus::{build_lplus, default_margin, lplus_report, LPlus, LPlusError};
use lagpack_core::moves::{compose_schedule, compose_schedule_unchecked, MovesError, PackedConfiguration, IMAGE_NAMES};
use lagpack_core::params::{check_inequalities, solve_with, ConstraintSlack, ParamSet, ParamsError, SolveOptions};
use num_rational::Rational64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "lagpack.report/1";

#[derive(Debug, Parser)]
#[command(name = "lagpack", version, about = "Build and certify integral Lagrangian torus packings")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a feasible parameter set.
    Solve(SolveArgs),
    /// Build the packing from a parameter file and certify it.
    Verify(VerifyArgs),
    /// Print the homology ledger tables.
    Tables(TablesArgs),
    /// Fit the extra torus and report its geometry.
    Lplus(LplusArgs),
    /// Write sampled tori as CSV.
    Trace(TraceArgs),
    /// Run everything and bundle the artifacts.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value = "params.json")]
    pub out: PathBuf,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = SolveOptions::default().budget)]
    pub budget: usize,
    #[arg(long, default_value_t = SolveOptions::default().seed)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct CertArgs {
    /// Grid size N per axis.
    #[arg(long = "grid-n", short = 'N', default_value_t = 4096)]
    pub grid_n: usize,
    /// Quadrature points n for line integrals.
    #[arg(long = "quadrature-n", short = 'n', default_value_t = 1 << 17)]
    pub quadrature_n: usize,
    /// Sample M times per sweep instead of minimizing over time exactly.
    #[arg(long = "time-samples", short = 'M')]
    pub time_samples: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub symplectic_points: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Margin of the extra torus inside its window (default: a quarter of the largest possible).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Skip the feasibility gate and certify anyway.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "params.json")]
    pub params: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub cert: CertArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Md,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub eps_num: i64,
    #[arg(long, default_value_t = 10)]
    pub eps_den: i64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LplusArgs {
    #[arg(long, default_value = "params.json")]
    pub params: PathBuf,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long = "quadrature-n", short = 'n', default_value_t = 1 << 17)]
    pub quadrature_n: usize,
    #[arg(long, default_value = "lplus.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value = "params.json")]
    pub params: PathBuf,
    #[arg(long, default_value = "trace")]
    pub out_dir: PathBuf,
    /// Samples per angle.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "params.json")]
    pub params: PathBuf,
    #[arg(long, default_value = "report")]
    pub out_dir: PathBuf,
    /// Ledger dimension included in the bundle.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[command(flatten)]
    pub cert: CertArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("infeasible parameters: {}", .failing.join(", "))]
    Infeasible { failing: Vec<String> },
    #[error("certificate not verified: {}", .failing.join(", "))]
    NotVerified { failing: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible { .. } | CliError::NotVerified { .. } => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Infeasible { .. } => "infeasible",
            CliError::NotVerified { .. } => "not_verified",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let failing = match self {
            CliError::Infeasible { failing } | CliError::NotVerified { failing } => failing.clone(),
            _ => Vec::new(),
        };
        json!({"error": self.kind(), "message": self.to_string(), "failing": failing, "exit_code": self.exit_code()})
            .to_string()
    }
}

fn failing_ids(v: &[ConstraintSlack]) -> Vec<String> {
    v.iter().filter(|c| !c.holds()).map(|c| c.id.to_string()).collect()
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        match e {
            ParamsError::Infeasible(v) => CliError::Infeasible { failing: failing_ids(&v) },
            ParamsError::SolveFailed { trace, .. } => CliError::Infeasible { failing: failing_ids(&trace) },
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<MovesError> for CliError {
    fn from(e: MovesError) -> Self {
        match e {
            MovesError::Infeasible(v) => CliError::Infeasible { failing: failing_ids(&v) },
            MovesError::Params(p) => p.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<LPlusError> for CliError {
    fn from(e: LPlusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn pow2(name: &str, v: usize) -> Result<(), CliError> {
    if v >= 16 && v.is_power_of_two() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{name} must be a power of two >= 16, got {v}")))
    }
}

impl CertArgs {
    fn options(&self) -> Result<CertifyOptions, CliError> {
        pow2("N", self.grid_n)?;
        pow2("n", self.quadrature_n)?;
        if let Some(m) = self.time_samples {
            pow2("M", m)?;
        }
        if self.symplectic_points == 0 {
            return Err(CliError::Input("symplectic-points must be positive".into()));
        }
        Ok(CertifyOptions {
            grid_n: self.grid_n,
            quadrature_n: self.quadrature_n,
            time_mode: self.time_samples.map_or(TimeMode::Exact, TimeMode::Sampled),
            symplectic_points: self.symplectic_points,
            seed: self.seed,
            ..CertifyOptions::default()
        })
    }
}

/// Reads `LAGPACK_THREADS` and sizes the global pool; returns the cap.
pub fn configure_threads() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var("LAGPACK_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("LAGPACK_THREADS must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(Some(n))
}

fn read_params(path: &Path) -> Result<ParamSet, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let p: ParamSet = serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })?;
    p.validate()?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })
}

fn write_all(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    for (path, body) in files {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            prepare_dir(parent)?;
        }
        fs::write(path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(())
}

fn schedule(p: &ParamSet, force: bool) -> Result<PackedConfiguration, CliError> {
    Ok(if force { compose_schedule_unchecked(p)? } else { compose_schedule(p)? })
}

fn lplus_for(p: &ParamSet, margin: Option<f64>) -> Result<LPlus, CliError> {
    Ok(build_lplus(p, margin.unwrap_or_else(|| default_margin(p)))?)
}

struct Verified {
    params: ParamSet,
    cert: PackingCertificate,
    lplus: LPlus,
}

fn run_verify(params: &Path, cert: &CertArgs) -> Result<Verified, CliError> {
    let opts = cert.options()?;
    let p = read_params(params)?;
    let cfg = schedule(&p, cert.force)?;
    let lp = lplus_for(&p, cert.margin)?;
    Ok(Verified { params: p, cert: certify_all(&cfg, &lp, &opts), lplus: lp })
}

fn verdict(v: &Verified) -> Result<(), CliError> {
    if v.cert.theorem_verified {
        return Ok(());
    }
    let mut failing = failing_ids(&check_inequalities(&v.params));
    failing.extend(v.cert.failing.iter().cloned());
    Err(CliError::NotVerified { failing })
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn file_stem(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase()
}

fn lplus_csv(lp: &LPlus, n: usize) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("s1,s2,theta1,r1,theta2,r2\n");
    for i in 0..n {
        for j in 0..n {
            let (s1, s2) = (i as f64 / n as f64, j as f64 / n as f64);
            let q = lp.point(s1, s2);
            let _ = writeln!(out, "{s1:.16e},{s2:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", q.theta1, q.r1, q.theta2, q.r2);
        }
    }
    out
}

/// Executes one command; returns text for stdout. Artifacts are written
/// only after all computation has finished.
pub fn run(config: &RunConfig) -> Result<String, CliError> {
    match &config.command {
        Command::Solve(a) => {
            let opts = SolveOptions { budget: a.budget, seed: a.seed, ..SolveOptions::default() };
            let p = solve_with(a.eps, &opts)?;
            write_all(&[(a.out.clone(), to_json(&p))])?;
            let b = lagpack_core::params::binding(&p);
            Ok(format!("wrote {} (min slack {:.4e} at {})\n", a.out.display(), b.slack, b.id))
        }
        Command::Verify(a) => {
            let v = run_verify(&a.params, &a.cert)?;
            let summary = summary_table(&v.cert);
            write_all(&[
                (a.out_dir.join("certificate.json"), to_json(&v.cert)),
                (a.out_dir.join("summary.txt"), summary.clone()),
            ])?;
            verdict(&v)?;
            Ok(summary)
        }
        Command::Tables(a) => {
            if a.eps_den == 0 {
                return Err(CliError::Input("eps-den must be nonzero".into()));
            }
            let tables = surgery_tables(a.d, a.k, a.l, Rational64::new(a.eps_num, a.eps_den))?;
            let body = match a.format {
                TableFormat::Csv => tables_csv(&tables),
                TableFormat::Md => tables_markdown(&tables),
            };
            match &a.out {
                Some(path) => {
                    write_all(&[(path.clone(), body)])?;
                    Ok(format!("wrote {}\n", path.display()))
                }
                None => Ok(body),
            }
        }
        Command::Lplus(a) => {
            pow2("n", a.quadrature_n)?;
            let p = read_params(&a.params)?;
            let lp = lplus_for(&p, a.margin)?;
            let rep = lplus_report(&p, &lp, a.quadrature_n).map_err(|e| CliError::Input(e.to_string()))?;
            write_all(&[(a.out.clone(), to_json(&rep))])?;
            Ok(format!(
                "wrote {} (exponents {:.3}, {:.3}; window margin {:.4e})\n",
                a.out.display(),
                rep.factors[0].p,
                rep.factors[1].p,
                rep.window_margin
            ))
        }
        Command::Trace(a) => {
            pow2("samples", a.samples)?;
            let p = read_params(&a.params)?;
            let cfg = schedule(&p, a.force)?;
            let lp = lplus_for(&p, a.margin)?;
            let mut files = Vec::new();
            for (img, name) in cfg.images.iter().zip(IMAGE_NAMES) {
                files.push((a.out_dir.join(format!("{}.csv", file_stem(name))), img.to_csv(a.samples)));
            }
            files.push((a.out_dir.join("phig_l12.csv"), cfg.phi_g_l12.to_csv(a.samples)));
            files.push((a.out_dir.join("phih_l11.csv"), cfg.phi_h_l11.to_csv(a.samples)));
            files.push((a.out_dir.join("lplus.csv"), lplus_csv(&lp, a.samples)));
            files.push((a.out_dir.join("schedule.json"), to_json(&cfg.metadata_json())));
            write_all(&files)?;
            Ok(format!("wrote {} files to {}\n", files.len(), a.out_dir.display()))
        }
        Command::Report(a) => {
            let v = run_verify(&a.params, &a.cert)?;
            let lrep = lplus_report(&v.params, &v.lplus, a.cert.quadrature_n).map_err(|e| CliError::Input(e.to_string()))?;
            let tables = surgery_tables(a.d, 0, 0, Rational64::new(1, 10))?;
            let summary = summary_table(&v.cert);
            let tables_name = format!("tables_d{}.csv", a.d);
            let report = json!({
                "schema": REPORT_SCHEMA,
                "version": env!("CARGO_PKG_VERSION"),
                "git_hash": git_hash(),
                "params": v.params,
                "constraints": check_inequalities(&v.params),
                "tolerances": {"integrality": INTEGRALITY_TOL, "symplectic": SYMPLECTIC_TOL},
                "options": v.cert.options,
                "theorem_verified": v.cert.theorem_verified,
                "global_min_margin": v.cert.global_min_margin,
                "global_margin_lower_bound": v.cert.global_margin_lower_bound,
                "counts": v.cert.counts,
                "failing": v.cert.failing,
                "lplus": lrep,
                "artifacts": ["certificate.json", "summary.txt", "lplus.json", tables_name],
            });
            write_all(&[
                (a.out_dir.join("certificate.json"), to_json(&v.cert)),
                (a.out_dir.join("summary.txt"), summary.clone()),
                (a.out_dir.join("lplus.json"), to_json(&lrep)),
                (a.out_dir.join(&tables_name), tables_csv(&tables)),
                (a.out_dir.join("report.json"), to_json(&report)),
            ])?;
            verdict(&v)?;
            Ok(summary)
        }
    }
}
