//! Per-site predictors: deterministic maps from a full sequence to one
//! predictive distribution per site.

use rand::Rng;

use crate::chain::ChainError;
use crate::dist::{JointTable, ProductFamily};
use crate::util::{mix_seed, rng_for};

/// A deterministic predictor recipe. Given the current sequence, each recipe
/// returns `L` distributions over the vocabulary, one per site.
#[derive(Debug, Clone)]
pub enum Predictor {
    /// Exact conditionals of a reference joint: site `i` gets
    /// `P(v | all other sites of the current sequence)`.
    FullConditional { joint: JointTable },
    /// The site marginals of a reference joint, independent of the sequence.
    MeanField {
        vocab_size: usize,
        context_id: String,
        marginals: Vec<Vec<f64>>,
    },
    /// A base recipe mixed with seeded pseudo-random noise per (state, site).
    Perturbed {
        base: Box<Predictor>,
        seed: u64,
        magnitude: f64,
    },
    /// A fixed list of distributions, independent of the sequence.
    Constant {
        context_id: String,
        site_dists: Vec<Vec<f64>>,
    },
}

impl Predictor {
    pub fn full_conditional(joint: JointTable) -> Self {
        Predictor::FullConditional { joint }
    }

    pub fn mean_field(joint: &JointTable) -> Result<Self, ChainError> {
        let marginals = (0..joint.length())
            .map(|i| joint.site_marginal(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Predictor::MeanField {
            vocab_size: joint.vocab_size(),
            context_id: joint.context_id().to_string(),
            marginals,
        })
    }

    pub fn perturbed(base: Predictor, seed: u64, magnitude: f64) -> Result<Self, ChainError> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(ChainError::BadMagnitude(magnitude));
        }
        Ok(Predictor::Perturbed {
            base: Box::new(base),
            seed,
            magnitude,
        })
    }

    pub fn constant(site_dists: Vec<Vec<f64>>, context_id: &str) -> Result<Self, ChainError> {
        // reuse the product-family validation: each row sums to one
        ProductFamily::new(site_dists.clone())?;
        Ok(Predictor::Constant {
            context_id: context_id.to_string(),
            site_dists,
        })
    }

    /// `(vocab_size, length)` of the sequences this predictor scores.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Predictor::FullConditional { joint } => (joint.vocab_size(), joint.length()),
            Predictor::MeanField {
                vocab_size,
                marginals,
                ..
            } => (*vocab_size, marginals.len()),
            Predictor::Perturbed { base, .. } => base.shape(),
            Predictor::Constant { site_dists, .. } => (site_dists[0].len(), site_dists.len()),
        }
    }

    pub fn context_id(&self) -> &str {
        match self {
            Predictor::FullConditional { joint } => joint.context_id(),
            Predictor::MeanField { context_id, .. } => context_id,
            Predictor::Perturbed { base, .. } => base.context_id(),
            Predictor::Constant { context_id, .. } => context_id,
        }
    }

    /// Short tag for reports, so chains built from different recipes never
    /// get conflated in emitted artifacts.
    pub fn describe(&self) -> String {
        match self {
            Predictor::FullConditional { .. } => "full_conditional".to_string(),
            Predictor::MeanField { .. } => "mean_field".to_string(),
            Predictor::Perturbed {
                base,
                seed,
                magnitude,
            } => format!("perturbed({}, seed={seed}, magnitude={magnitude})", base.describe()),
            Predictor::Constant { .. } => "constant".to_string(),
        }
    }

    /// The per-site predictive distributions at `state`.
    pub fn site_distributions(&self, state: &[usize]) -> Vec<Vec<f64>> {
        match self {
            Predictor::FullConditional { joint } => full_conditionals(joint, state),
            Predictor::MeanField { marginals, .. } => marginals.clone(),
            Predictor::Perturbed {
                base,
                seed,
                magnitude,
            } => {
                let (vocab, length) = base.shape();
                let mut dists = base.site_distributions(state);
                let state_index = state.iter().fold(0usize, |acc, &v| acc * vocab + v);
                for (site, dist) in dists.iter_mut().enumerate().take(length) {
                    let mut rng = rng_for(mix_seed(*seed, state_index as u64), site as u64);
                    let mut noise: Vec<f64> =
                        (0..vocab).map(|_| rng.random_range(0.5..1.5)).collect();
                    let noise_sum: f64 = noise.iter().sum();
                    for n in &mut noise {
                        *n /= noise_sum;
                    }
                    for (q, n) in dist.iter_mut().zip(&noise) {
                        *q = (1.0 - magnitude) * *q + magnitude * n;
                    }
                }
                dists
            }
            Predictor::Constant { site_dists, .. } => site_dists.clone(),
        }
    }
}

fn full_conditionals(joint: &JointTable, state: &[usize]) -> Vec<Vec<f64>> {
    let vocab = joint.vocab_size();
    let length = joint.length();
    debug_assert_eq!(state.len(), length);
    let base_index = joint.index_of(state);
    let mut dists = Vec::with_capacity(length);
    let mut stride = 1usize;
    let mut strides = vec![0usize; length];
    for i in (0..length).rev() {
        strides[i] = stride;
        stride *= vocab;
    }
    for i in 0..length {
        let origin = base_index - state[i] * strides[i];
        let mut dist: Vec<f64> = (0..vocab)
            .map(|v| joint.probs()[origin + v * strides[i]])
            .collect();
        let sum: f64 = dist.iter().sum();
        if sum > 0.0 {
            for p in &mut dist {
                *p /= sum;
            }
        } else {
            // zero-probability conditioning context: fall back to uniform so
            // the chain stays well-defined
            dist = vec![1.0 / vocab as f64; vocab];
        }
        dists.push(dist);
    }
    dists
}

/// Per-site confidence: the max of each predictive distribution.
pub fn confidence(predictor: &Predictor, state: &[usize]) -> Vec<f64> {
    predictor
        .site_distributions(state)
        .iter()
        .map(|dist| dist.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}
