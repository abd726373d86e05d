//! The thresholded-editing Markov chain.
//!
//! One chain step looks at the whole current sequence, scores every site with
//! a confidence (the max of its predictive distribution), selects an edit set,
//! and resamples the selected sites independently from their per-site
//! predictive distributions while freezing everything else. This module builds
//! that chain explicitly — dense `V^L x V^L` transition matrices — and
//! analyzes it: Dobrushin influence coefficients, stationary distributions
//! via power iteration, geometric-contraction and mixing-time checks, and
//! invariance certification against a candidate distribution.

mod analysis;
mod kernel;
mod predictor;

pub use analysis::{
    contraction_check, dobrushin, influence_to_text, invariance_check, mixing_time, stationary,
    ChainVerificationReport, ContractionOutcome, ContractionReport, DobrushinReport,
    MixingOutcome, MixingReport, StationaryResult, DEFAULT_ITERATION_CAP, DEFAULT_POWER_TOLERANCE,
};
pub use kernel::{build_kernel, edit_set, EditKernel, EditSelection, SelectionPolicy};
pub use predictor::{confidence, Predictor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("distribution error: {0}")]
    Dist(#[from] crate::dist::DistError),
    #[error("state space of {states} states exceeds the dense cap")]
    StateSpaceTooLarge { states: usize },
    #[error("fixed policy references site {site}, but length is {length}")]
    FixedSiteOutOfRange { site: usize, length: usize },
    #[error("perturbation magnitude must lie in [0, 1] (got {0})")]
    BadMagnitude(f64),
    #[error("threshold must be finite (got {0})")]
    BadThreshold(f64),
    #[error("power iteration did not converge within {iterations} iterations (last TV gap {last_gap:e})")]
    NoConvergence { iterations: usize, last_gap: f64 },
    #[error("candidate shape ({0}, {1}) does not match kernel shape ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
}
