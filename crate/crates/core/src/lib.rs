//! Strong approximation of Itô SDEs with superlinearly growing, one-sided
//! Lipschitz drift and commutative noise.
//!
//! - [`brownian`]: reproducible Wiener increments and coarsening.
//! - [`model`]: SDE definitions, Milstein coefficients, commutativity and
//!   Lipschitz diagnostics, builtin problems.
//! - [`schemes`]: explicit Euler, tamed Euler, Milstein and tamed Milstein.
//! - [`harness`]: coupled-path RMS errors, order fits, moments, efficiency.
//! - [`cli`]: configuration and CSV output for the binary.

pub mod brownian;
pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod schemes;

pub use brownian::{derive_path_seed, pair_products, BrownianGrid};
pub use error::{GridError, HarnessError, ModelError, SchemeError};
pub use harness::{
    efficiency_benchmark, fit_log_log, fit_order, moment_probe, reference_endpoint,
    strong_error_table, strong_error_tables, ConvergenceReport, ErrorRow, ErrorTable, Execution,
    ExperimentConfig,
};
pub use model::{
    builtin_model, builtin_models, check_commutativity, gbm_exact_endpoint, l_operator,
    probe_assumptions, SdeModel,
};
pub use schemes::{integrate_path, step, tame, PathOptions, SchemeKind, Trajectory};
