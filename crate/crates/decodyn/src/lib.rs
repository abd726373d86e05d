//! Desk-scale laboratory for the decoding dynamics of parallel (any-order)
//! language-model decoders.
//!
//! Everything here operates on explicit, exactly-enumerable objects — decoding
//! traces, dense joint probability tables, dense Markov transition matrices,
//! and small constraint puzzles — so that every quantity can be checked against
//! an independent brute-force route instead of being estimated.
//!
//! The crate is organized around six subsystems:
//!
//! - [`trace`]: the canonical decoding-trace record (per-token finalization
//!   step + block index) and its JSONL wire format.
//! - [`metrics`]: average finalization parallelism (AFP), Kendall's tau over
//!   finalization order, per-block trajectories, grouped aggregates, and
//!   label-order statistics.
//! - [`dist`]: exact discrete-distribution toolkit — marginals, entropy,
//!   total correlation, KL divergence, and the factorization-gap
//!   decomposition for product-form approximations.
//! - [`chain`]: the thresholded-editing Markov chain — per-site predictors,
//!   confidence/edit-set selection, dense transition kernels, Dobrushin
//!   influence coefficients, stationary distributions, contraction and
//!   mixing-time checks, and invariance certification.
//! - [`sim`]: a toy block decoder over explicit table models that emits
//!   decoding traces under autoregressive, top-1, threshold, and accept-all
//!   schedules.
//! - [`runtime`]: the parallelism-vs-editing runtime trade-off (editing
//!   rounds from a contraction coefficient, and the no-slowdown comparison
//!   against a sequential baseline).
//! - [`puzzles`]: Sudoku and cross-math generators with uniqueness oracles,
//!   plus easiest-first and left-to-right solvers that emit decoding traces.
//!
//! The [`verify`] module bundles the full property suite behind the
//! `verify-theory` subcommand of the `decodyn` binary; [`cli`] implements the
//! binary itself. Each major capability also has a runnable demo under
//! `examples/`.

pub mod chain;
pub mod cli;
pub mod dist;
pub mod metrics;
pub mod puzzles;
pub mod runtime;
pub mod sim;
pub mod trace;
pub mod util;
pub mod verify;

pub use dist::{Divergence, GapReport, JointTable, ProductFamily};
pub use metrics::Rational;
pub use trace::{Correctness, DecodingTrace, StepScope, TraceCorpus, TraceToken};

/// Version string embedded in every emitted report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default seed used by the CLI when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1729;
