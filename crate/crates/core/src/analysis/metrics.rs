//! Time series computed along a trace.

use super::{AnalysisError, OutputWeights};
use crate::convex::{self, ConvexSetSpec};
use crate::linalg::ComplementBasis;
use crate::protocol::{AgentStates, Trace};

/// Per-sample geometry shared by every monitor.
struct Sample {
    /// `‖x_i - P_X(x_i)‖²` per agent.
    violation_sq: Vec<f64>,
    /// `Σ ‖x_i - x̄‖²`.
    disagreement_sq: f64,
}

impl Sample {
    fn new(x: &AgentStates, target: &ConvexSetSpec) -> Result<Self, AnalysisError> {
        let violation_sq = x
            .rows()
            .map(|row| {
                let p = convex::project(target, row)?;
                Ok(row.iter().zip(&p.point).map(|(a, b)| (a - b).powi(2)).sum())
            })
            .collect::<Result<Vec<f64>, AnalysisError>>()?;
        let mean = x.mean();
        let disagreement_sq = x
            .rows()
            .map(|row| row.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        Ok(Self { violation_sq, disagreement_sq })
    }

    fn violation_total(&self) -> f64 {
        self.violation_sq.iter().sum()
    }
}

fn samples(trace: &Trace, target: &ConvexSetSpec) -> Result<Vec<Sample>, AnalysisError> {
    trace.states.iter().map(|x| Sample::new(x, target)).collect()
}

fn squared_norm(x: &AgentStates) -> f64 {
    x.as_flat().iter().map(|v| v * v).sum()
}

/// Trapezoid-rule running integral of `integrand` over `times`.
fn cumulative_trapezoid(times: &[f64], integrand: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    if !times.is_empty() {
        out.push(0.0);
    }
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (integrand[k] + integrand[k - 1]);
        out.push(acc);
    }
    out
}

fn index_integrand(samples: &[Sample], trace: &Trace, w: &OutputWeights) -> Vec<f64> {
    let (c1, c2, g) = (w.c1(), w.c2(), w.gamma());
    samples
        .iter()
        .zip(&trace.disturbances)
        .map(|(s, dist)| c1 * c1 * s.violation_total() + c2 * c2 * s.disagreement_sq - g * g * squared_norm(dist))
        .collect()
}

/// `J(t) = ∫_0^t (zᵀz - γ² wᵀw) ds` by the trapezoid rule on the trace grid,
/// with `zᵀz = c1² ‖x̃‖² + c2² Σ‖x_i - x̄‖²`.
pub fn performance_index(trace: &Trace, target: &ConvexSetSpec, w: &OutputWeights) -> Result<Vec<f64>, AnalysisError> {
    let samples = samples(trace, target)?;
    Ok(cumulative_trapezoid(&trace.times, &index_integrand(&samples, trace, w)))
}

/// `V1`, `V2` and `V = 2a V1 + V2` along a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v: Vec<f64>,
}

/// Largest relative disagreement tolerated between the two `V2` routes.
const V2_AGREEMENT_TOL: f64 = 1e-9;

/// `½ ‖U1ᵀ X‖_F²`, with `U1ᵀ` acting on each state coordinate separately.
fn reduced_disagreement(x: &AgentStates, u1: &ComplementBasis) -> f64 {
    (0..x.m())
        .map(|d| u1.project(&x.column(d)).iter().map(|y| y * y).sum::<f64>())
        .sum::<f64>()
        * 0.5
}

fn check_u1(trace: &Trace, u1: &ComplementBasis) -> Result<(), AnalysisError> {
    match trace.states.first() {
        Some(x) if x.n() != u1.n() => Err(AnalysisError::InvalidParameter(format!(
            "complement basis has n = {}, trace has {} agents",
            u1.n(),
            x.n()
        ))),
        _ => Ok(()),
    }
}

fn lyapunov_from_samples(
    samples: &[Sample],
    trace: &Trace,
    a: f64,
    u1: &ComplementBasis,
) -> Result<LyapunovSeries, AnalysisError> {
    let mut series = LyapunovSeries {
        v1: Vec::with_capacity(samples.len()),
        v2: Vec::with_capacity(samples.len()),
        v: Vec::with_capacity(samples.len()),
    };
    for ((s, x), &t) in samples.iter().zip(&trace.states).zip(&trace.times) {
        let v1 = 0.5 * s.violation_total();
        let v2 = 0.5 * s.disagreement_sq;
        let reduced = reduced_disagreement(x, u1);
        if (v2 - reduced).abs() > V2_AGREEMENT_TOL * (1.0 + v2) {
            return Err(AnalysisError::DisagreementMismatch { time: t, direct: v2, reduced });
        }
        series.v1.push(v1);
        series.v2.push(v2);
        series.v.push(2.0 * a * v1 + v2);
    }
    Ok(series)
}

/// Lyapunov monitors `V1 = ½ Σ‖x_i - P_X(x_i)‖²`, `V2 = ½ Σ‖x_i - x̄‖²` and
/// `V = 2a V1 + V2`.
///
/// `V2` is also evaluated in the reduced coordinates `y = U1ᵀ x`; the two
/// values must agree, otherwise an error is returned.
pub fn lyapunov_monitors(
    trace: &Trace,
    target: &ConvexSetSpec,
    a: f64,
    u1: &ComplementBasis,
) -> Result<LyapunovSeries, AnalysisError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!("a must be positive, got {a}")));
    }
    check_u1(trace, u1)?;
    lyapunov_from_samples(&samples(trace, target)?, trace, a, u1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusSeries {
    /// `max_{i,j} ‖x_i - x_j‖`
    pub consensus_error: Vec<f64>,
    /// `max_i dist(x_i, X)`
    pub constraint_distance: Vec<f64>,
}

fn max_pairwise_distance(x: &AgentStates) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..x.n() {
        for j in (i + 1)..x.n() {
            let d = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            best = best.max(d);
        }
    }
    best.sqrt()
}

fn consensus_from_samples(samples: &[Sample], trace: &Trace) -> ConsensusSeries {
    ConsensusSeries {
        consensus_error: trace.states.iter().map(max_pairwise_distance).collect(),
        constraint_distance: samples
            .iter()
            .map(|s| s.violation_sq.iter().copied().fold(0.0, f64::max).sqrt())
            .collect(),
    }
}

pub fn consensus_metrics(trace: &Trace, target: &ConvexSetSpec) -> Result<ConsensusSeries, AnalysisError> {
    Ok(consensus_from_samples(&samples(trace, target)?, trace))
}

/// `(‖x̃‖, ‖y‖, ‖w‖)` at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiNorms {
    pub violation: f64,
    pub disagreement: f64,
    pub disturbance: f64,
}

impl XiNorms {
    pub fn as_array(&self) -> [f64; 3] {
        [self.violation, self.disagreement, self.disturbance]
    }
}

/// Every monitored series on the trace grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub times: Vec<f64>,
    pub j: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v: Vec<f64>,
    pub consensus_error: Vec<f64>,
    pub constraint_distance: Vec<f64>,
    pub xi_norms: Vec<XiNorms>,
}

/// Computes all monitors with a single projection pass over the trace.
pub fn metrics_report(
    trace: &Trace,
    target: &ConvexSetSpec,
    weights: &OutputWeights,
    a: f64,
    u1: &ComplementBasis,
) -> Result<MetricsReport, AnalysisError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!("a must be positive, got {a}")));
    }
    check_u1(trace, u1)?;
    let samples = samples(trace, target)?;
    let j = cumulative_trapezoid(&trace.times, &index_integrand(&samples, trace, weights));
    let lyap = lyapunov_from_samples(&samples, trace, a, u1)?;
    let consensus = consensus_from_samples(&samples, trace);
    let xi_norms = samples
        .iter()
        .zip(&trace.states)
        .zip(&trace.disturbances)
        .map(|((s, x), w)| XiNorms {
            violation: s.violation_total().sqrt(),
            disagreement: (2.0 * reduced_disagreement(x, u1)).sqrt(),
            disturbance: squared_norm(w).sqrt(),
        })
        .collect();
    Ok(MetricsReport {
        times: trace.times.clone(),
        j,
        v1: lyap.v1,
        v2: lyap.v2,
        v: lyap.v,
        consensus_error: consensus.consensus_error,
        constraint_distance: consensus.constraint_distance,
        xi_norms,
    })
}

/// Step where `V` grew by more than `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovIncrease {
    pub time: f64,
    pub delta: f64,
}

/// Reports every grid step on which `v` increases by more than `threshold`.
pub fn lyapunov_increases(times: &[f64], v: &[f64], threshold: f64) -> Vec<LyapunovIncrease> {
    v.windows(2)
        .zip(times.iter().skip(1))
        .filter(|(pair, _)| pair[1] - pair[0] > threshold)
        .map(|(pair, &time)| LyapunovIncrease { time, delta: pair[1] - pair[0] })
        .collect()
}
