//! Post-processing of parameter sets and traces: controlled output,
//! performance index, the 3x3 certificate matrix and Lyapunov monitors.

mod certificate;
mod metrics;

use thiserror::Error;

use crate::convex::{self, ConvexError, ConvexSetSpec};
use crate::graph::GraphError;
use crate::linalg::LinalgError;
use crate::protocol::AgentStates;

pub use certificate::{
    certify_attenuation, gamma_matrix, min_gamma, schur_feasibility, schur_complement, GammaCertificate, Verdict,
    DEFINITENESS_TOL, MIN_GAMMA_CEILING,
};
pub use metrics::{
    consensus_metrics, lyapunov_increases, lyapunov_monitors, metrics_report, performance_index, ConsensusSeries,
    LyapunovIncrease, LyapunovSeries, MetricsReport, XiNorms,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("graph is not connected (algebraic connectivity {0})")]
    GraphNotConnected(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no feasible gamma found below {ceiling}")]
    InfeasibleConfiguration { ceiling: f64 },
    #[error("V2 at t = {time}: sum-of-squares {direct} disagrees with reduced-coordinate value {reduced}")]
    DisagreementMismatch { time: f64, direct: f64, reduced: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// Output weights `c1`, `c2` and the attenuation level `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputWeights {
    c1: f64,
    c2: f64,
    gamma: f64,
}

impl OutputWeights {
    pub fn new(c1: f64, c2: f64, gamma: f64) -> Result<Self, AnalysisError> {
        for (name, v) in [("c1", c1), ("c2", c2), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AnalysisError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { c1, c2, gamma })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, AnalysisError> {
        Self::new(self.c1, self.c2, gamma)
    }

    pub fn with_c1(&self, c1: f64) -> Result<Self, AnalysisError> {
        Self::new(c1, self.c2, self.gamma)
    }
}

/// Controlled output split into its constraint-violation part
/// `z1 = c1 (x_i - P_X(x_i))_i` and its disagreement part `z2 = c2 (x_i - x̄)_i`,
/// both stacked agent-major.
pub fn controlled_output(
    x: &AgentStates,
    target: &ConvexSetSpec,
    weights: &OutputWeights,
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let mean = x.mean();
    let mut z1 = Vec::with_capacity(x.n() * x.m());
    let mut z2 = Vec::with_capacity(x.n() * x.m());
    for row in x.rows() {
        let proj = convex::project(target, row)?;
        z1.extend(row.iter().zip(&proj.point).map(|(xi, p)| weights.c1 * (xi - p)));
        z2.extend(row.iter().zip(&mean).map(|(xi, xb)| weights.c2 * (xi - xb)));
    }
    Ok((z1, z2))
}
