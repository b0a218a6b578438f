//! Closed-loop consensus dynamics.
//!
//! Each agent is a single integrator `x_i' = u_i + w_i` driven by
//!
//! ```text
//! u_i = sum_{j in N_i} a_ij (x_j - x_i) + k_i (P_{X_i}(x_i) - x_i)
//! ```
//!
//! where `P_{X_i}` projects onto the agent's private constraint set. The
//! system is integrated with classical fixed-step RK4 on a uniform grid.

use std::f64::consts::PI;

use statrs::function::erf::erf;
use thiserror::Error;

use crate::analysis::OutputWeights;
use crate::convex::{self, ConvexError, ConvexSetSpec};
use crate::graph::Graph;
use crate::linalg::norm;

/// States with any agent norm above this abort the integration.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },
    #[error("state has shape {got_n}x{got_m}, expected {n}x{m}")]
    ShapeMismatch { n: usize, m: usize, got_n: usize, got_m: usize },
    #[error("trajectory diverged at t = {time}")]
    Diverged { time: f64, partial: Box<Trace> },
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

fn invalid(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::InvalidScenario(msg.into())
}

/// Dense `n x m` array of per-agent vectors, agent-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStates {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl AgentStates {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, data: vec![0.0; n * m] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProtocolError> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(ProtocolError::ShapeMismatch { n, m, got_n: n, got_m: bad.len() });
        }
        Ok(Self { n, m, data: rows.iter().flatten().copied().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.m.max(1)).take(self.n)
    }

    /// Agent-major flat view `[x_{0,0}, .., x_{0,m-1}, x_{1,0}, ..]`.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Column `d` across agents.
    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.m + d]).collect()
    }

    /// Agent average, accumulated as offsets from agent 0 so that identical
    /// rows average to themselves exactly.
    pub fn mean(&self) -> Vec<f64> {
        let base = self.row(0);
        let mut offset = vec![0.0; self.m];
        for row in self.rows().skip(1) {
            for ((acc, v), b) in offset.iter_mut().zip(row).zip(base) {
                *acc += v - b;
            }
        }
        base.iter().zip(&offset).map(|(b, o)| b + o / self.n as f64).collect()
    }

    /// `self + s * other`.
    fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            n: self.n,
            m: self.m,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    fn is_bounded(&self) -> bool {
        self.rows().all(|r| {
            let nr = norm(r);
            nr.is_finite() && nr <= DIVERGENCE_BOUND
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    gain: f64,
    constraint: ConvexSetSpec,
    x0: Vec<f64>,
}

impl AgentConfig {
    pub fn new(gain: f64, constraint: ConvexSetSpec, x0: Vec<f64>) -> Result<Self, ProtocolError> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(invalid(format!("gain must be positive, got {gain}")));
        }
        if x0.len() != constraint.dim() {
            return Err(invalid(format!(
                "initial state has {} components but constraint lives in R^{}",
                x0.len(),
                constraint.dim()
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial state must be finite"));
        }
        Ok(Self { gain, constraint, x0 })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn constraint(&self) -> &ConvexSetSpec {
        &self.constraint
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }
}

/// Square-integrable exogenous input of one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec {
    Zero,
    /// `amplitude * exp(-rate t)`
    DecayingExp { amplitude: Vec<f64>, rate: f64 },
    /// `amplitude * sin(2 pi freq t)` on `[t_on, t_off]`, zero elsewhere.
    SinePulse { amplitude: Vec<f64>, freq: f64, t_on: f64, t_off: f64 },
    /// `amplitude * exp(-((t - center) / width)^2 / 2)`
    GaussianPulse { amplitude: Vec<f64>, center: f64, width: f64 },
}

impl DisturbanceSpec {
    pub fn amplitude(&self) -> Option<&[f64]> {
        match self {
            Self::Zero => None,
            Self::DecayingExp { amplitude, .. }
            | Self::SinePulse { amplitude, .. }
            | Self::GaussianPulse { amplitude, .. } => Some(amplitude),
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), ProtocolError> {
        if let Some(a) = self.amplitude() {
            if a.len() != m {
                return Err(invalid(format!("disturbance amplitude has {} components, expected {m}", a.len())));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(invalid("disturbance amplitude must be finite"));
            }
        }
        match *self {
            Self::Zero => Ok(()),
            Self::DecayingExp { rate, .. } if !(rate.is_finite() && rate > 0.0) => {
                Err(invalid(format!("decay rate must be positive, got {rate}")))
            }
            Self::SinePulse { freq, t_on, t_off, .. }
                if !(freq.is_finite() && t_on.is_finite() && t_off.is_finite() && t_on <= t_off) =>
            {
                Err(invalid("sine pulse needs finite freq and t_on <= t_off"))
            }
            Self::GaussianPulse { center, width, .. } if !(center.is_finite() && width.is_finite() && width > 0.0) => {
                Err(invalid(format!("gaussian pulse width must be positive, got {width}")))
            }
            _ => Ok(()),
        }
    }

    /// Scalar envelope multiplying the amplitude vector.
    fn envelope(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::DecayingExp { rate, .. } => (-rate * t).exp(),
            Self::SinePulse { freq, t_on, t_off, .. } => {
                if t >= t_on && t <= t_off {
                    (2.0 * PI * freq * t).sin()
                } else {
                    0.0
                }
            }
            Self::GaussianPulse { center, width, .. } => {
                let s = (t - center) / width;
                (-0.5 * s * s).exp()
            }
        }
    }

    /// `w(t)` written into `out`.
    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        match self.amplitude() {
            None => out.iter_mut().for_each(|v| *v = 0.0),
            Some(a) => {
                let e = self.envelope(t);
                out.iter_mut().zip(a).for_each(|(o, ai)| *o = ai * e);
            }
        }
    }

    pub fn sample(&self, t: f64, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        self.sample_into(t, &mut out);
        out
    }
}

/// Closed-form `∫_0^T ||w(s)||^2 ds`; `horizon` may be `f64::INFINITY`.
pub fn disturbance_l2_norm_sq(spec: &DisturbanceSpec, horizon: f64) -> f64 {
    let amp_sq = spec.amplitude().map_or(0.0, |a| a.iter().map(|v| v * v).sum());
    if amp_sq == 0.0 || horizon <= 0.0 {
        return 0.0;
    }
    match *spec {
        DisturbanceSpec::Zero => 0.0,
        DisturbanceSpec::DecayingExp { rate, .. } => {
            amp_sq * (1.0 - (-2.0 * rate * horizon).exp()) / (2.0 * rate)
        }
        DisturbanceSpec::SinePulse { freq, t_on, t_off, .. } => {
            let lo = t_on.max(0.0);
            let hi = t_off.min(horizon);
            if hi <= lo || freq == 0.0 {
                return 0.0;
            }
            // antiderivative of sin^2(2 pi f s)
            let anti = |s: f64| s / 2.0 - (4.0 * PI * freq * s).sin() / (8.0 * PI * freq);
            amp_sq * (anti(hi) - anti(lo))
        }
        DisturbanceSpec::GaussianPulse { center, width, .. } => {
            let upper = if horizon.is_infinite() { 1.0 } else { erf((horizon - center) / width) };
            amp_sq * width * PI.sqrt() / 2.0 * (upper + erf(center / width))
        }
    }
}

/// A complete experiment: network, agents, disturbances, output weights and
/// integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    graph: Graph,
    agents: Vec<AgentConfig>,
    disturbances: Vec<DisturbanceSpec>,
    weights: OutputWeights,
    dt: f64,
    horizon: f64,
    steps: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Scenario {
    /// `horizon` must be an integer multiple of `dt` (relative slack 1e-9).
    pub fn new(
        graph: Graph,
        agents: Vec<AgentConfig>,
        disturbances: Vec<DisturbanceSpec>,
        weights: OutputWeights,
        dt: f64,
        horizon: f64,
    ) -> Result<Self, ProtocolError> {
        let n = graph.n();
        if agents.len() != n {
            return Err(invalid(format!("graph has {n} nodes but {} agents were given", agents.len())));
        }
        if disturbances.len() != n {
            return Err(invalid(format!(
                "graph has {n} nodes but {} disturbances were given",
                disturbances.len()
            )));
        }
        let m = agents[0].x0.len();
        if let Some((i, _)) = agents.iter().enumerate().find(|(_, a)| a.x0.len() != m) {
            return Err(invalid(format!("agent {i} has a different state dimension than agent 0 ({m})")));
        }
        for (i, d) in disturbances.iter().enumerate() {
            d.validate(m).map_err(|e| invalid(format!("disturbance {i}: {e}")))?;
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= dt) {
            return Err(invalid(format!("horizon T = {horizon} must be finite and at least dt = {dt}")));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if (steps - ratio).abs() > 1e-9 * ratio {
            return Err(invalid(format!("horizon T = {horizon} is not an integer multiple of dt = {dt}")));
        }
        let adjacency = graph.adjacency();
        Ok(Self { graph, agents, disturbances, weights, dt, horizon, steps: steps as usize, adjacency })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentConfig] {
        &self.agents
    }

    pub fn disturbances(&self) -> &[DisturbanceSpec] {
        &self.disturbances
    }

    pub fn weights(&self) -> &OutputWeights {
        &self.weights
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of RK4 steps; the grid has `steps + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn m(&self) -> usize {
        self.agents[0].x0.len()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.gain).collect()
    }

    /// `k̄ = max k_i`.
    pub fn kbar(&self) -> f64 {
        self.agents.iter().map(|a| a.gain).fold(0.0, f64::max)
    }

    /// Target set `X`, the intersection of every agent's constraint.
    pub fn target_set(&self) -> ConvexSetSpec {
        ConvexSetSpec::new_intersection(self.agents.iter().map(|a| a.constraint.clone()).collect())
            .expect("agents share one dimension")
    }

    pub fn initial_state(&self) -> AgentStates {
        AgentStates {
            n: self.n(),
            m: self.m(),
            data: self.agents.iter().flat_map(|a| a.x0.iter().copied()).collect(),
        }
    }

    /// Copy with the time grid replaced.
    pub fn with_grid(&self, dt: f64, horizon: f64) -> Result<Self, ProtocolError> {
        Self::new(
            self.graph.clone(),
            self.agents.clone(),
            self.disturbances.clone(),
            self.weights,
            dt,
            horizon,
        )
    }

    fn check_state(&self, x: &AgentStates) -> Result<(), ProtocolError> {
        if x.n != self.n() || x.m != self.m() {
            return Err(ProtocolError::ShapeMismatch { n: self.n(), m: self.m(), got_n: x.n, got_m: x.m });
        }
        Ok(())
    }
}

/// Sampled trajectory on the uniform grid `0, dt, .., T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<AgentStates>,
    /// Control inputs `u_i` at each grid time.
    pub inputs: Vec<AgentStates>,
    /// Disturbances `w_i` at each grid time.
    pub disturbances: Vec<AgentStates>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &AgentStates {
        self.states.last().expect("trace holds at least the initial state")
    }
}

/// Control law for agent `i`.
pub fn control_input(i: usize, x: &AgentStates, scenario: &Scenario) -> Result<Vec<f64>, ProtocolError> {
    scenario.check_state(x)?;
    if i >= scenario.n() {
        return Err(ProtocolError::AgentOutOfRange { index: i, n: scenario.n() });
    }
    let mut u = vec![0.0; x.m];
    write_control_input(i, x, scenario, &mut u)?;
    Ok(u)
}

fn write_control_input(i: usize, x: &AgentStates, scenario: &Scenario, u: &mut [f64]) -> Result<(), ProtocolError> {
    let xi = x.row(i);
    u.iter_mut().for_each(|v| *v = 0.0);
    for &(j, a_ij) in &scenario.adjacency[i] {
        for ((ud, xj), xi) in u.iter_mut().zip(x.row(j)).zip(xi) {
            *ud += a_ij * (xj - xi);
        }
    }
    let agent = &scenario.agents[i];
    let proj = convex::project(&agent.constraint, xi)?;
    for ((ud, p), xi) in u.iter_mut().zip(&proj.point).zip(xi) {
        *ud += agent.gain * (p - xi);
    }
    Ok(())
}

fn control_inputs(x: &AgentStates, scenario: &Scenario) -> Result<AgentStates, ProtocolError> {
    let mut u = AgentStates::zeros(x.n, x.m);
    for i in 0..x.n {
        let m = x.m;
        write_control_input(i, x, scenario, &mut u.data[i * m..(i + 1) * m])?;
    }
    Ok(u)
}

fn disturbance_sample(t: f64, scenario: &Scenario) -> AgentStates {
    let (n, m) = (scenario.n(), scenario.m());
    let mut w = AgentStates::zeros(n, m);
    for (i, d) in scenario.disturbances.iter().enumerate() {
        d.sample_into(t, w.row_mut(i));
    }
    w
}

/// Closed-loop right-hand side `x_i' = u_i + w_i(t)`.
pub fn vector_field(t: f64, x: &AgentStates, scenario: &Scenario) -> Result<AgentStates, ProtocolError> {
    scenario.check_state(x)?;
    Ok(control_inputs(x, scenario)?.add(&disturbance_sample(t, scenario)))
}

/// How a single grid step is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepMode {
    /// One classical RK4 step per grid interval.
    Plain,
    /// Classical RK4, but a grid step in which some agent crosses a face of
    /// its constraint set is split at the crossing time (located by
    /// bisection), so every RK4 sub-step sees a smooth right-hand side.
    #[default]
    SwitchLocated,
}

/// Sub-steps allowed per grid step before falling back to a plain step.
const MAX_SWITCHES_PER_STEP: usize = 4;
const SWITCH_BISECTIONS: usize = 60;

fn rk4_step(
    x: &AgentStates,
    t: f64,
    h: f64,
    k1: &AgentStates,
    scenario: &Scenario,
) -> Result<AgentStates, ProtocolError> {
    let half = t + 0.5 * h;
    let k2 = vector_field(half, &x.axpy(0.5 * h, k1), scenario)?;
    let k3 = vector_field(half, &x.axpy(0.5 * h, &k2), scenario)?;
    let k4 = vector_field(t + h, &x.axpy(h, &k3), scenario)?;
    let mut next = x.clone();
    for idx in 0..next.data.len() {
        next.data[idx] += h / 6.0 * (k1.data[idx] + 2.0 * k2.data[idx] + 2.0 * k3.data[idx] + k4.data[idx]);
    }
    Ok(next)
}

fn face_signature(x: &AgentStates, scenario: &Scenario) -> Vec<u8> {
    let mut sig = Vec::new();
    for (i, agent) in scenario.agents.iter().enumerate() {
        convex::face_signature(&agent.constraint, x.row(i), &mut sig);
    }
    sig
}

fn located_step(
    x: &AgentStates,
    t: f64,
    h: f64,
    k1: &AgentStates,
    scenario: &Scenario,
) -> Result<AgentStates, ProtocolError> {
    let mut cur = x.clone();
    let mut cur_k1 = k1.clone();
    let mut t_cur = t;
    let t_end = t + h;
    for _ in 0..MAX_SWITCHES_PER_STEP {
        let remaining = t_end - t_cur;
        let trial = rk4_step(&cur, t_cur, remaining, &cur_k1, scenario)?;
        let sig = face_signature(&cur, scenario);
        if face_signature(&trial, scenario) == sig {
            return Ok(trial);
        }
        // smallest sub-step whose endpoint has left the current face
        let (mut lo, mut hi) = (0.0, remaining);
        for _ in 0..SWITCH_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if face_signature(&rk4_step(&cur, t_cur, mid, &cur_k1, scenario)?, scenario) == sig {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi >= remaining {
            return Ok(trial);
        }
        cur = rk4_step(&cur, t_cur, hi, &cur_k1, scenario)?;
        t_cur += hi;
        cur_k1 = vector_field(t_cur, &cur, scenario)?;
    }
    rk4_step(&cur, t_cur, t_end - t_cur, &cur_k1, scenario)
}

/// Classical RK4 on the scenario grid with boundary crossings located inside
/// each step (see [`StepMode::SwitchLocated`]).
pub fn integrate(scenario: &Scenario) -> Result<Trace, ProtocolError> {
    integrate_with(scenario, StepMode::default())
}

/// Integrates on the uniform grid `0, dt, .., T`. Disturbances are evaluated
/// analytically at every stage time.
pub fn integrate_with(scenario: &Scenario, mode: StepMode) -> Result<Trace, ProtocolError> {
    let dt = scenario.dt;
    let capacity = scenario.steps + 1;
    let mut trace = Trace {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        inputs: Vec::with_capacity(capacity),
        disturbances: Vec::with_capacity(capacity),
    };

    let mut x = scenario.initial_state();
    for k in 0..=scenario.steps {
        let t = k as f64 * dt;
        let u = control_inputs(&x, scenario)?;
        let w = disturbance_sample(t, scenario);
        let k1 = u.add(&w);
        trace.times.push(t);
        trace.states.push(x.clone());
        trace.inputs.push(u);
        trace.disturbances.push(w);
        if k == scenario.steps {
            break;
        }

        // step to the exact grid time so that grid errors do not accumulate
        let h = (k + 1) as f64 * dt - t;
        let next = match mode {
            StepMode::Plain => rk4_step(&x, t, h, &k1, scenario)?,
            StepMode::SwitchLocated => located_step(&x, t, h, &k1, scenario)?,
        };
        if !next.is_bounded() {
            return Err(ProtocolError::Diverged { time: (k + 1) as f64 * dt, partial: Box::new(trace) });
        }
        x = next;
    }
    Ok(trace)
}
