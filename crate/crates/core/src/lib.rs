//! Monte Carlo laboratory for two-colour randomly reinforced urns.
//!
//! An urn holds `X` black and `Y` white mass. At each step a colour is drawn
//! with probability proportional to its mass and reinforced by a random
//! amount from that colour's law. The crate simulates reproducible ensembles
//! of such urns, tracks the Doob decomposition `Z = Z_0 + M + A` of the
//! black proportion, and checks the limit behaviour of `Z` statistically.
//!
//! ```
//! use rru_core::{ExperimentConfig, ReinforcementSpec, run_ensemble};
//!
//! let cfg = ExperimentConfig::new(
//!     1.0,
//!     1.0,
//!     ReinforcementSpec::two_point(2.0, 1.0),
//!     ReinforcementSpec::point_mass(1.0, 1.0),
//!     1_000,
//!     16,
//!     7,
//! );
//! let ens = run_ensemble(&cfg, 2).unwrap();
//! assert_eq!(ens.summary.final_z.len(), 16);
//! ```

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod dist;
pub mod ensemble;
pub mod output;
pub mod rng;
pub mod urn;

pub use analytics::{AnalyticsError, TestReport, TheoryTargets};
pub use config::{ConfigError, ExperimentConfig, VerifySettings};
pub use coupling::{run_coupled, run_coupled_ensemble, CoupledTrace, CouplingError};
pub use dist::{CouplingMode, Dist, DistError, ReinforcementSpec};
pub use ensemble::{estimate_moment, run_ensemble, Ensemble, EnsembleError, EnsembleSummary};
pub use urn::{astar, astar_bounds, run_path, PathTrace, UrnError, UrnLaw, UrnState};
