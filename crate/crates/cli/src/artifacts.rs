//! On-disk run artifacts: `trace.csv`, `metrics.csv`, `certificate.json` and
//! `manifest.json`.
//!
//! CSV values use `{:.16e}` (17 significant digits), which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;

use hinf_core::analysis::{GammaCertificate, MetricsReport};
use hinf_core::protocol::Trace;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// First token of the last trace line when integration stopped early.
pub const TRUNCATION_MARKER: &str = "# truncated";

pub const METRICS_HEADER: [&str; 7] = ["t", "J", "V1", "V2", "V", "consensus_error", "constraint_distance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// File name of the scenario, without directories.
    pub scenario: String,
    pub input_sha256: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub rows: usize,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diverged_at: Option<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub lambda2: f64,
    pub kbar: f64,
    pub a_lower_bound: f64,
    pub a: f64,
    pub a_max: f64,
    pub grid: usize,
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub gamma_matrix: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub margin: f64,
    pub verdict: String,
    pub feasible: bool,
    pub a_constraint_satisfied: bool,
}

impl CertificateDoc {
    pub fn new(cert: &GammaCertificate, weights: &hinf_core::OutputWeights, a_max: f64, grid: usize) -> Self {
        let mut gamma_matrix = [[0.0; 3]; 3];
        for (i, row) in gamma_matrix.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = cert.gamma_matrix.get(i, j);
            }
        }
        Self {
            lambda2: cert.lambda2,
            kbar: cert.kbar,
            a_lower_bound: cert.a_lower_bound,
            a: cert.a,
            a_max,
            grid,
            c1: weights.c1(),
            c2: weights.c2(),
            gamma: weights.gamma(),
            gamma_matrix,
            eigenvalues: cert.eigenvalues,
            margin: cert.margin,
            verdict: cert.verdict.as_str().to_string(),
            feasible: cert.feasible,
            a_constraint_satisfied: cert.a_constraint_satisfied,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

/// Header `t, x_{i}_{d}.., w_{i}_{d}..`, one row per grid time.
pub fn trace_csv(trace: &Trace, diverged_at: Option<f64>) -> String {
    let (n, m) = trace.states.first().map_or((0, 0), |x| (x.n(), x.m()));
    let mut out = String::from("t");
    for prefix in ["x", "w"] {
        for i in 0..n {
            for d in 0..m {
                write!(out, ",{prefix}_{i}_{d}").unwrap();
            }
        }
    }
    out.push('\n');
    for ((t, x), w) in trace.times.iter().zip(&trace.states).zip(&trace.disturbances) {
        push_row(&mut out, std::iter::once(*t).chain(x.as_flat().iter().copied()).chain(w.as_flat().iter().copied()));
    }
    if let Some(t) = diverged_at {
        writeln!(out, "{TRUNCATION_MARKER} at t = {t:.16e}").unwrap();
    }
    out
}

pub fn metrics_csv(report: Option<&MetricsReport>) -> String {
    let mut out = METRICS_HEADER.join(",");
    out.push('\n');
    if let Some(r) = report {
        for k in 0..r.times.len() {
            push_row(
                &mut out,
                [r.times[k], r.j[k], r.v1[k], r.v2[k], r.v[k], r.consensus_error[k], r.constraint_distance[k]],
            );
        }
    }
    out
}

/// Last data row of a metrics table, keyed by the header.
pub fn last_metrics_row(csv: &str) -> Result<Option<[f64; 7]>, String> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or("empty metrics table")?;
    if header.split(',').ne(METRICS_HEADER) {
        return Err(format!("unexpected metrics header `{header}`"));
    }
    let Some(last) = lines.rev().find(|l| !l.is_empty()) else {
        return Ok(None);
    };
    let mut row = [0.0; 7];
    let mut fields = last.split(',');
    for slot in row.iter_mut() {
        let field = fields.next().ok_or_else(|| format!("short metrics row `{last}`"))?;
        *slot = field.parse().map_err(|e| format!("bad number `{field}`: {e}"))?;
    }
    Ok(Some(row))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact documents always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use hinf_core::protocol::AgentStates;

    #[test]
    fn trace_layout() {
        let x = AgentStates::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let w = AgentStates::from_rows(&[vec![0.5, 0.0], vec![0.0, -0.5]]).unwrap();
        let trace = Trace { times: vec![0.0], states: vec![x.clone()], inputs: vec![x], disturbances: vec![w] };
        let csv = trace_csv(&trace, None);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_0_0,x_0_1,x_1_0,x_1_1,w_0_0,w_0_1,w_1_0,w_1_1");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.5, 0.0, 0.0, -0.5]);
        assert!(trace_csv(&trace, Some(1.0)).lines().last().unwrap().starts_with(TRUNCATION_MARKER));
    }

    #[test]
    fn decimal_form_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format!("{v:.16e}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn last_row_parsed() {
        let csv = "t,J,V1,V2,V,consensus_error,constraint_distance\n0,0,0,0,0,0,0\n1,2,3,4,5,6,7\n";
        assert_eq!(last_metrics_row(csv).unwrap(), Some([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]));
        assert_eq!(last_metrics_row("t,J,V1,V2,V,consensus_error,constraint_distance\n").unwrap(), None);
        assert!(last_metrics_row("t,J\n").is_err());
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
