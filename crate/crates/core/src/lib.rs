//! Slice-in-slice scheduling model for 5G network slices.
//!
//! - [`graph`]: service-dependency cliques, degree-ordered greedy coloring,
//!   chromatic polynomials and brute-force clique/chromatic oracles.
//! - [`capacity`]: service caps, the load-variance bound, the Cantelli SLA
//!   bound and vanishing-variance checks.
//! - [`stochastic`]: seeded Monte Carlo estimates under a single-factor
//!   allocation model.
//! - [`allocation`]: Poisson/Rayleigh objective and the per-service resource
//!   estimator.
//! - [`simulator`]: the sequential admission loop.
//! - [`config`], [`report`]: scenario files in, CSV and summary files out.
//! - [`verify`], [`oracle`]: property suites against independent oracles.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod capacity;
pub mod config;
pub mod graph;
pub mod oracle;
pub mod report;
pub mod simulator;
pub mod stochastic;
pub mod verify;

pub use allocation::{AllocationModelParams, LambdaWeighting, ServiceState};
pub use capacity::{BoundParams, VarianceBreakdown};
pub use config::{parse_config, parse_config_with_default_seed, ConfigError};
pub use graph::{Coloring, DependencyGraph, LayeredPartite};
pub use simulator::{run_scenario, ScenarioConfig, SimulationError, SimulationReport};
pub use stochastic::{FactorModel, McEstimate};
