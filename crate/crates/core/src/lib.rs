//! Simulation and analysis toolkit for H-infinity consensus of single-integrator
//! multi-agent networks whose agents each project onto their own convex
//! constraint set.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: small dense symmetric eigensolver and definiteness tests.
//! * [`graph`]: weighted undirected graphs, Laplacians, algebraic connectivity.
//! * [`convex`]: convex constraint sets and their metric projections.
//! * [`protocol`]: the closed-loop consensus dynamics and an RK4 integrator.
//! * [`analysis`]: controlled output, performance index, the 3x3 LMI
//!   certificate, and Lyapunov monitors along traces.

pub mod analysis;
pub mod convex;
pub mod graph;
pub mod linalg;
pub mod protocol;

pub use analysis::{GammaCertificate, MetricsReport, OutputWeights, Verdict};
pub use convex::{ConvexSetSpec, ProjectionResult};
pub use graph::Graph;
pub use linalg::{ComplementBasis, EigenDecomposition, SymMatrix};
pub use protocol::{AgentConfig, AgentStates, DisturbanceSpec, Scenario, Trace};
