//! JSON scenario documents.
//!
//! ```json
//! {
//!   "graph": { "n": 2, "edges": [[0, 1, 1.0]] },
//!   "agents": [
//!     { "k": 1.0, "x0": [-1.0], "constraint": { "type": "box", "lo": [0.0], "hi": [2.0] } },
//!     { "k": 1.0, "x0": [4.0], "constraint": { "type": "box", "lo": [1.0], "hi": [3.0] } }
//!   ],
//!   "disturbances": [{ "type": "zero" }, { "type": "decaying_exp", "amplitude": [0.5], "rate": 1.0 }],
//!   "weights": { "c1": 0.1, "c2": 0.1, "gamma": 1.0 },
//!   "sim": { "dt": 0.001, "T": 30.0 }
//! }
//! ```
//!
//! `disturbances` may be omitted, meaning no agent is disturbed.

use std::path::Path;

use hinf_core::convex::ConvexSetSpec;
use hinf_core::graph::Graph;
use hinf_core::protocol::{AgentConfig, DisturbanceSpec, Scenario};
use hinf_core::OutputWeights;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphSection,
    pub agents: Vec<AgentSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<DisturbanceSection>,
    pub weights: WeightsSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n: usize,
    /// `[i, j, weight]` triples.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub k: f64,
    pub x0: Vec<f64>,
    pub constraint: SetSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSection {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `normal · x <= offset`
    Halfspace { normal: Vec<f64>, offset: f64 },
    Intersection { members: Vec<SetSection> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSection {
    Zero,
    DecayingExp { amplitude: Vec<f64>, rate: f64 },
    SinePulse { amplitude: Vec<f64>, freq: f64, t_on: f64, t_off: f64 },
    GaussianPulse { amplitude: Vec<f64>, center: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Parses a document. `file` only labels diagnostics.
pub fn parse(bytes: &[u8], file: &Path) -> Result<ScenarioFile, CliError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let parsed: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        let path = e.path().to_string();
        let message = without_position(inner);
        let message = if path == "." { message } else { format!("at `{path}`: {message}") };
        CliError::Syntax { file: file.to_path_buf(), line: inner.line(), column: inner.column(), message }
    })?;
    de.end().map_err(|e| CliError::Syntax {
        file: file.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: without_position(&e),
    })?;
    Ok(parsed)
}

/// serde_json appends " at line L column C"; the diagnostic prefix already has it.
fn without_position(e: &serde_json::Error) -> String {
    let full = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    full.strip_suffix(&suffix).map_or_else(|| full.clone(), str::to_string)
}

/// Reads, parses and validates a scenario file, returning its raw bytes too.
pub fn load(path: &Path) -> Result<(Vec<u8>, Scenario), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let scenario = parse(&bytes, path)?.to_scenario(path)?;
    Ok((bytes, scenario))
}

impl ScenarioFile {
    pub fn to_scenario(&self, file: &Path) -> Result<Scenario, CliError> {
        let invalid = |field: String, message: String| CliError::Invalid { file: file.to_path_buf(), field, message };
        let n = self.graph.n;

        let graph = Graph::new(n, self.graph.edges.iter().copied()).map_err(|e| {
            use hinf_core::graph::GraphError as G;
            let field = match e {
                G::NodeOutOfRange { index, .. }
                | G::SelfLoop { index, .. }
                | G::DuplicateEdge { index, .. }
                | G::BadWeight { index, .. } => format!("graph.edges[{index}]"),
                _ => "graph.n".to_string(),
            };
            invalid(field, e.to_string())
        })?;

        if self.agents.len() != n {
            return Err(invalid("agents".into(), format!("expected {n} agents, found {}", self.agents.len())));
        }
        let mut agents = Vec::with_capacity(n);
        for (i, a) in self.agents.iter().enumerate() {
            if !(a.k.is_finite() && a.k > 0.0) {
                return Err(invalid(format!("agents[{i}].k"), format!("gain must be positive, got {}", a.k)));
            }
            let constraint = a.constraint.to_spec(&format!("agents[{i}].constraint"), &invalid)?;
            let agent = AgentConfig::new(a.k, constraint, a.x0.clone())
                .map_err(|e| invalid(format!("agents[{i}].x0"), e.to_string()))?;
            agents.push(agent);
        }
        let m = agents.first().map_or(0, |a| a.x0().len());
        if let Some(i) = agents.iter().position(|a| a.x0().len() != m) {
            return Err(invalid(format!("agents[{i}].x0"), format!("state dimension differs from agent 0 ({m})")));
        }

        let disturbances = if self.disturbances.is_empty() {
            vec![DisturbanceSpec::Zero; n]
        } else if self.disturbances.len() != n {
            return Err(invalid(
                "disturbances".into(),
                format!("expected {n} entries (or none), found {}", self.disturbances.len()),
            ));
        } else {
            let mut out = Vec::with_capacity(n);
            for (i, d) in self.disturbances.iter().enumerate() {
                let spec = d.to_spec();
                spec.validate(m).map_err(|e| invalid(format!("disturbances[{i}]"), e.to_string()))?;
                out.push(spec);
            }
            out
        };

        let w = self.weights;
        let weights =
            OutputWeights::new(w.c1, w.c2, w.gamma).map_err(|e| invalid("weights".into(), e.to_string()))?;

        Scenario::new(graph, agents, disturbances, weights, self.sim.dt, self.sim.horizon)
            .map_err(|e| invalid("sim".into(), e.to_string()))
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            graph: GraphSection { n: s.n(), edges: s.graph().edges().iter().map(|e| (e.i, e.j, e.weight)).collect() },
            agents: s
                .agents()
                .iter()
                .map(|a| AgentSection {
                    k: a.gain(),
                    x0: a.x0().to_vec(),
                    constraint: SetSection::from_spec(a.constraint()),
                })
                .collect(),
            disturbances: s.disturbances().iter().map(DisturbanceSection::from_spec).collect(),
            weights: WeightsSection { c1: s.weights().c1(), c2: s.weights().c2(), gamma: s.weights().gamma() },
            sim: SimSection { dt: s.dt(), horizon: s.horizon() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario model always serializes")
    }
}

impl SetSection {
    fn to_spec(
        &self,
        field: &str,
        invalid: &dyn Fn(String, String) -> CliError,
    ) -> Result<ConvexSetSpec, CliError> {
        let built = match self {
            Self::Box { lo, hi } => ConvexSetSpec::new_box(lo.clone(), hi.clone()),
            Self::Ball { center, radius } => ConvexSetSpec::new_ball(center.clone(), *radius),
            Self::Halfspace { normal, offset } => ConvexSetSpec::new_halfspace(normal.clone(), *offset),
            Self::Intersection { members } => {
                let specs = members
                    .iter()
                    .enumerate()
                    .map(|(j, s)| s.to_spec(&format!("{field}.members[{j}]"), invalid))
                    .collect::<Result<Vec<_>, _>>()?;
                ConvexSetSpec::new_intersection(specs)
            }
        };
        built.map_err(|e| invalid(field.to_string(), e.to_string()))
    }

    fn from_spec(spec: &ConvexSetSpec) -> Self {
        match spec {
            ConvexSetSpec::Box(b) => Self::Box { lo: b.lo().to_vec(), hi: b.hi().to_vec() },
            ConvexSetSpec::Ball(b) => Self::Ball { center: b.center().to_vec(), radius: b.radius() },
            ConvexSetSpec::Halfspace(h) => Self::Halfspace { normal: h.normal().to_vec(), offset: h.offset() },
            ConvexSetSpec::Intersection(s) => Self::Intersection { members: s.members().iter().map(Self::from_spec).collect() },
        }
    }
}

impl DisturbanceSection {
    fn to_spec(&self) -> DisturbanceSpec {
        match self.clone() {
            Self::Zero => DisturbanceSpec::Zero,
            Self::DecayingExp { amplitude, rate } => DisturbanceSpec::DecayingExp { amplitude, rate },
            Self::SinePulse { amplitude, freq, t_on, t_off } => {
                DisturbanceSpec::SinePulse { amplitude, freq, t_on, t_off }
            }
            Self::GaussianPulse { amplitude, center, width } => {
                DisturbanceSpec::GaussianPulse { amplitude, center, width }
            }
        }
    }

    fn from_spec(spec: &DisturbanceSpec) -> Self {
        match spec.clone() {
            DisturbanceSpec::Zero => Self::Zero,
            DisturbanceSpec::DecayingExp { amplitude, rate } => Self::DecayingExp { amplitude, rate },
            DisturbanceSpec::SinePulse { amplitude, freq, t_on, t_off } => {
                Self::SinePulse { amplitude, freq, t_on, t_off }
            }
            DisturbanceSpec::GaussianPulse { amplitude, center, width } => {
                Self::GaussianPulse { amplitude, center, width }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_AGENT: &str = r#"{
        "graph": { "n": 2, "edges": [[0, 1, 1.0]] },
        "agents": [
            { "k": 1.0, "x0": [-1.0], "constraint": { "type": "box", "lo": [0.0], "hi": [2.0] } },
            { "k": 1.0, "x0": [4.0], "constraint": { "type": "box", "lo": [1.0], "hi": [3.0] } }
        ],
        "weights": { "c1": 0.1, "c2": 0.1, "gamma": 1.0 },
        "sim": { "dt": 0.001, "T": 30.0 }
    }"#;

    fn file() -> &'static Path {
        Path::new("test.json")
    }

    #[test]
    fn parses_minimal_document() {
        let s = parse(TWO_AGENT.as_bytes(), file()).unwrap().to_scenario(file()).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.m(), 1);
        assert_eq!(s.steps(), 30_000);
        assert!(s.disturbances().iter().all(|d| *d == DisturbanceSpec::Zero));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse(b"{\n  \"graph\": {\n    \"n\": 2,,\n", file()).unwrap_err();
        match err {
            CliError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 12)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let doc = TWO_AGENT.replace("\"k\": 1.0, \"x0\": [4.0]", "\"k\": 1.0, \"gain\": 2.0, \"x0\": [4.0]");
        let err = parse(doc.as_bytes(), file()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("agents[1]") && msg.contains("gain"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_set_tag_rejected() {
        let doc = TWO_AGENT.replacen("\"type\": \"box\"", "\"type\": \"ellipsoid\"", 1);
        assert!(parse(doc.as_bytes(), file()).is_err());
    }

    #[test]
    fn bad_gain_addressed_by_field() {
        let doc = TWO_AGENT.replacen("\"k\": 1.0", "\"k\": -1.0", 1);
        let err = parse(doc.as_bytes(), file()).unwrap().to_scenario(file()).unwrap_err();
        match &err {
            CliError::Invalid { field, .. } => assert_eq!(field, "agents[0].k"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn nested_set_error_addressed_by_field() {
        let doc = TWO_AGENT.replacen(
            "{ \"type\": \"box\", \"lo\": [1.0], \"hi\": [3.0] }",
            "{ \"type\": \"intersection\", \"members\": [{ \"type\": \"ball\", \"center\": [0.0], \"radius\": 1.0 }, { \"type\": \"ball\", \"center\": [0.0], \"radius\": 0.0 }] }",
            1,
        );
        let err = parse(doc.as_bytes(), file()).unwrap().to_scenario(file()).unwrap_err();
        match err {
            CliError::Invalid { field, .. } => assert_eq!(field, "agents[1].constraint.members[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edge_errors_addressed_by_index() {
        let doc = TWO_AGENT.replace("[[0, 1, 1.0]]", "[[0, 1, 1.0], [1, 1, 2.0]]");
        let err = parse(doc.as_bytes(), file()).unwrap().to_scenario(file()).unwrap_err();
        match err {
            CliError::Invalid { field, .. } => assert_eq!(field, "graph.edges[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_disturbance_count_rejected() {
        let doc = TWO_AGENT.replace("\"weights\"", "\"disturbances\": [{ \"type\": \"zero\" }],\n\"weights\"");
        let err = parse(doc.as_bytes(), file()).unwrap().to_scenario(file()).unwrap_err();
        assert!(matches!(err, CliError::Invalid { ref field, .. } if field == "disturbances"));
    }

    #[test]
    fn horizon_must_be_grid_multiple() {
        let doc = TWO_AGENT.replace("\"T\": 30.0", "\"T\": 0.0015");
        let err = parse(doc.as_bytes(), file()).unwrap().to_scenario(file()).unwrap_err();
        assert!(matches!(err, CliError::Invalid { ref field, .. } if field == "sim"));
    }
}
