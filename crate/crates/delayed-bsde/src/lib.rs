//! Numerical laboratory for backward stochastic differential equations whose
//! generator depends on the time-delayed past of the solution and whose
//! terminal data is merely integrable.
//!
//! The crate is organised as a pipeline:
//!
//! - [`delay`] — uniform time grids, discrete delay measures snapped to the
//!   grid, and segment frames that expose the past of a process with the
//!   frozen-before-zero extension convention.
//! - [`stochastics`] — reproducible Brownian ensembles (per-path RNG streams,
//!   chunked deterministic reductions) and least-squares conditional
//!   expectation on polynomial or piecewise bases.
//! - [`model`] — terminal conditions (including heavy-tailed ones that are
//!   integrable but not square-integrable), generator specifications,
//!   assumption probes, and the portfolio-insurance construction.
//! - [`solver`] — the backward Picard scheme, truncation ladders for
//!   integrable-only data, stopping-family norms, and uniqueness probes.
//! - [`estimates`] — the closed-form constants of the a priori bounds, the
//!   smallness advisory, and Monte Carlo checks of the bounds themselves.
//! - [`cli`] — TOML experiment configs, the artifact-writing runner, and
//!   directory comparison for reproducibility audits.
//!
//! See the crate `examples/` directory for one runnable walkthrough per
//! capability; the `delayed-bsde` binary wraps [`cli`] for batch use.

pub mod cli;
pub mod delay;
pub mod error;
pub mod estimates;
pub mod model;
pub mod solver;
pub mod stochastics;

pub use delay::{delay_average, Channel, DelayMeasure, SegmentFrame, TimeGrid};
pub use error::{Error, Result};
pub use model::{DelayedProblem, GeneratorSpec, MarketModel, TerminalCondition};
pub use solver::{backward_sweep, picard_solve, truncation_ladder, DiscreteSolution};
pub use stochastics::{simulate, PathEnsemble, RegressionBasis};
