use std::io::Write;
use std::path::{Path, PathBuf};

use hinf_core::analysis::{certify_attenuation, metrics_report, min_gamma, AnalysisError, GammaCertificate};
use hinf_core::linalg::complement_basis;
use hinf_core::protocol::{integrate, ProtocolError, Scenario};

use crate::artifacts::{
    self, CertificateDoc, Manifest, RunStatus, CERTIFICATE_FILE, MANIFEST_FILE, METRICS_FILE, TRACE_FILE,
};
use crate::error::CliError;
use crate::scenario_file;

pub const DEFAULT_A_MAX: f64 = 1e3;
pub const DEFAULT_GRID: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Search settings for the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub a_max: f64,
    pub grid: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { a_max: DEFAULT_A_MAX, grid: DEFAULT_GRID }
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

fn certify(s: &Scenario, opts: SearchOptions) -> Result<GammaCertificate, CliError> {
    if s.n() < 2 {
        return Err(CliError::Precondition(format!("the certificate needs at least two agents, got {}", s.n())));
    }
    certify_attenuation(s.graph(), &s.gains(), s.weights(), opts.a_max, opts.grid).map_err(precondition)
}

fn precondition(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::GraphNotConnected(l2) => {
            CliError::Precondition(format!("graph is not connected (algebraic connectivity {l2:e})"))
        }
        other => other.into(),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

/// Prints the certificate. The caller decides the exit status from
/// `feasible`.
pub fn check(path: &Path, opts: SearchOptions, out: &mut dyn Write) -> Result<GammaCertificate, CliError> {
    let (_, s) = scenario_file::load(path)?;
    let cert = certify(&s, opts)?;
    print_certificate(&cert, out).map_err(stdout_err)?;
    Ok(cert)
}

fn print_certificate(c: &GammaCertificate, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "lambda2        {:.12e}", c.lambda2)?;
    writeln!(out, "kbar           {:.12e}", c.kbar)?;
    writeln!(out, "kbar^2/l2^2    {:.12e}", c.a_lower_bound)?;
    writeln!(out, "a              {:.12e}", c.a)?;
    for i in 0..3 {
        let label = if i == 0 { "Gamma" } else { "" };
        let row = c.gamma_matrix.rows()[i].iter().map(|v| format!("{v:>20.12e}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "{label:<14} [{row} ]")?;
    }
    let eig = c.eigenvalues.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(", ");
    writeln!(out, "eigenvalues    [{eig}]")?;
    writeln!(out, "verdict        {}", c.verdict)?;
    Ok(())
}

/// Outcome of a completed `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub out_dir: PathBuf,
    pub rows: usize,
    pub certificate: GammaCertificate,
}

/// Integrates the scenario and writes the four run artifacts to `out_dir`.
///
/// On divergence the partial trace is written with a truncation marker, the
/// manifest status is `diverged` and [`CliError::Diverged`] is returned.
pub fn simulate(
    path: &Path,
    out_dir: &Path,
    opts: SearchOptions,
    out: &mut dyn Write,
) -> Result<SimulateOutcome, CliError> {
    let (bytes, s) = scenario_file::load(path)?;
    let cert = certify(&s, opts)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let (trace, diverged_at) = match integrate(&s) {
        Ok(trace) => (trace, None),
        Err(ProtocolError::Diverged { time, partial }) => (*partial, Some(time)),
        Err(e) => return Err(CliError::Runtime(e.to_string())),
    };

    let target = s.target_set();
    let u1 = complement_basis(s.n()).map_err(AnalysisError::from)?;
    let report = match metrics_report(&trace, &target, s.weights(), cert.a, &u1) {
        Ok(r) => Some(r),
        // a diverged trace may be too large for the monitors; keep the header
        Err(_) if diverged_at.is_some() => None,
        Err(e) => return Err(e.into()),
    };

    write_file(out_dir, TRACE_FILE, &artifacts::trace_csv(&trace, diverged_at))?;
    write_file(out_dir, METRICS_FILE, &artifacts::metrics_csv(report.as_ref()))?;
    let doc = CertificateDoc::new(&cert, s.weights(), opts.a_max, opts.grid);
    write_file(out_dir, CERTIFICATE_FILE, &artifacts::to_json(&doc))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        input_sha256: artifacts::sha256_hex(&bytes),
        dt: s.dt(),
        horizon: s.horizon(),
        rows: trace.len(),
        status: if diverged_at.is_some() { RunStatus::Diverged } else { RunStatus::Complete },
        diverged_at,
        files: [TRACE_FILE, METRICS_FILE, CERTIFICATE_FILE].map(String::from).to_vec(),
    };
    write_file(out_dir, MANIFEST_FILE, &artifacts::to_json(&manifest))?;

    if let Some(time) = diverged_at {
        return Err(CliError::Diverged { time, dir: out_dir.to_path_buf() });
    }
    writeln!(out, "wrote {} rows to {} (certificate: {})", trace.len(), out_dir.display(), cert.verdict)
        .map_err(stdout_err)?;
    Ok(SimulateOutcome { out_dir: out_dir.to_path_buf(), rows: trace.len(), certificate: cert })
}

/// Smallest certifiable `gamma` for the scenario's graph, gains and `c1, c2`.
pub fn gamma_min(path: &Path, tol: f64, opts: SearchOptions, out: &mut dyn Write) -> Result<f64, CliError> {
    let (_, s) = scenario_file::load(path)?;
    if s.n() < 2 {
        return Err(CliError::Precondition(format!("the certificate needs at least two agents, got {}", s.n())));
    }
    let w = s.weights();
    let gamma = match min_gamma(s.graph(), &s.gains(), w.c1(), w.c2(), opts.a_max, opts.grid, tol) {
        Ok(g) => g,
        Err(AnalysisError::InfeasibleConfiguration { ceiling }) => {
            return Err(CliError::Infeasible(format!(
                "no certifiable gamma below {ceiling:e} with a <= {:e}",
                opts.a_max
            )))
        }
        Err(e) => return Err(precondition(e)),
    };
    writeln!(out, "{gamma:.12e}").map_err(stdout_err)?;
    Ok(gamma)
}

/// What `report` extracts from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: Manifest,
    /// Last metrics row, `None` when no metrics were recorded.
    pub final_metrics: Option<[f64; 7]>,
    pub verdict: String,
    pub diverged: bool,
}

fn read_artifact(dir: &Path, name: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| CliError::io(path, e))
}

pub fn report(dir: &Path, out: &mut dyn Write) -> Result<RunSummary, CliError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(CliError::MissingManifest(dir.to_path_buf()));
    }
    let artifact_err = |name: &str, message: String| CliError::Artifact { path: dir.join(name), message };
    let manifest: Manifest = serde_json::from_str(&read_artifact(dir, MANIFEST_FILE)?)
        .map_err(|e| artifact_err(MANIFEST_FILE, e.to_string()))?;
    let cert: CertificateDoc = serde_json::from_str(&read_artifact(dir, CERTIFICATE_FILE)?)
        .map_err(|e| artifact_err(CERTIFICATE_FILE, e.to_string()))?;
    let final_metrics =
        artifacts::last_metrics_row(&read_artifact(dir, METRICS_FILE)?).map_err(|m| artifact_err(METRICS_FILE, m))?;
    let truncated = read_artifact(dir, TRACE_FILE)?
        .lines()
        .last()
        .is_some_and(|l| l.starts_with(artifacts::TRUNCATION_MARKER));
    let diverged = truncated || manifest.status == RunStatus::Diverged;

    let summary = RunSummary { manifest, final_metrics, verdict: cert.verdict, diverged };
    print_summary(&summary, out).map_err(stdout_err)?;
    Ok(summary)
}

fn print_summary(s: &RunSummary, out: &mut dyn Write) -> std::io::Result<()> {
    let m = &s.manifest;
    writeln!(out, "scenario             {} (sha256 {})", m.scenario, m.input_sha256)?;
    writeln!(out, "grid                 dt = {:e}, T = {}, rows = {}", m.dt, m.horizon, m.rows)?;
    match s.final_metrics {
        Some(r) => {
            writeln!(out, "final t              {:.6e}", r[0])?;
            writeln!(out, "final J              {:.6e}", r[1])?;
            writeln!(out, "final V              {:.6e}", r[4])?;
            writeln!(out, "consensus error      {:.6e}", r[5])?;
            writeln!(out, "constraint distance  {:.6e}", r[6])?;
        }
        None => writeln!(out, "metrics              unavailable")?,
    }
    writeln!(out, "certificate          {}", s.verdict)?;
    match m.diverged_at {
        Some(t) if s.diverged => writeln!(out, "divergence           yes, at t = {t:e}")?,
        _ if s.diverged => writeln!(out, "divergence           yes")?,
        _ => writeln!(out, "divergence           no")?,
    }
    Ok(())
}
