//! Toy block decoder over explicit table models.
//!
//! The model is a dense joint table over the whole sequence; decoding walks
//! blocks left to right and, inside each block, repeatedly computes the exact
//! conditional of every masked position given all committed tokens, then
//! finalizes an update set in parallel. Conditionals are exact marginals of
//! the table, so the traces isolate scheduling dynamics from model error.
//! Committed tokens never change; re-editing is the chain module's business.
//!
//! Model text format: a line `B <block_size>`, then the joint-table text
//! format (`V L` header plus `V^L` probabilities).

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dist::{DistError, JointTable};
use crate::trace::{DecodingTrace, StepScope, TraceCorpus, TraceError, TraceToken};
use crate::util::{mix_seed, rng_for};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("distribution error: {0}")]
    Dist(#[from] DistError),
    #[error("trace error: {0}")]
    Trace(#[from] TraceError),
    #[error("block size {block} must divide the sequence length {length}")]
    BlockSizeMismatch { length: usize, block: usize },
    #[error("threshold mode needs tau strictly inside (0,1); got {0} (use accept_all for tau = 0)")]
    BadThreshold(f64),
    #[error("no masked position reached the threshold at step {step} and forced progress is disabled")]
    Deadlock { step: u64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model parse error: {0}")]
    Parse(String),
}

/// A joint table plus a block size that divides its length.
#[derive(Debug, Clone)]
pub struct TableModel {
    master: JointTable,
    block_size: usize,
}

impl TableModel {
    pub fn new(master: JointTable, block_size: usize) -> Result<Self, SimError> {
        if block_size == 0 || master.length() % block_size != 0 {
            return Err(SimError::BlockSizeMismatch {
                length: master.length(),
                block: block_size,
            });
        }
        Ok(TableModel { master, block_size })
    }

    pub fn master(&self) -> &JointTable {
        &self.master
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.master.length() / self.block_size
    }

    /// Exact conditional table of the next block given a committed prefix.
    pub fn block_conditional(&self, prefix: &[usize]) -> Result<JointTable, SimError> {
        let v = self.master.vocab_size();
        let l = self.master.length();
        let b = self.block_size;
        debug_assert!(prefix.len() % b == 0 && prefix.len() + b <= l);
        let block_cells = v.pow(b as u32);
        let mut table = vec![0.0; block_cells];
        let mut state = vec![0usize; l];
        for (idx, &p) in self.master.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut rem = idx;
            for i in (0..l).rev() {
                state[i] = rem % v;
                rem /= v;
            }
            if state[..prefix.len()] != *prefix {
                continue;
            }
            let block_idx = state[prefix.len()..prefix.len() + b]
                .iter()
                .fold(0, |acc, &d| acc * v + d);
            table[block_idx] += p;
        }
        let total: f64 = table.iter().sum();
        if total > 0.0 {
            for cell in &mut table {
                *cell /= total;
            }
        } else {
            // unreachable prefix; fall back to uniform so the decoder stays total
            table = vec![1.0 / block_cells as f64; block_cells];
        }
        Ok(JointTable::new(
            v,
            b,
            table,
            format!("{}|prefix{:?}", self.master.context_id(), prefix),
        )?)
    }

    pub fn to_text(&self) -> String {
        format!("B {}\n{}", self.block_size, self.master.to_text())
    }

    pub fn from_text(text: &str, context_id: &str) -> Result<Self, SimError> {
        let rest = text.trim_start();
        let mut lines = rest.splitn(2, '\n');
        let header = lines.next().unwrap_or_default();
        let mut parts = header.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("B"), Some(num)) => {
                let block_size: usize = num
                    .parse()
                    .map_err(|e| SimError::Parse(format!("bad block size {num:?}: {e}")))?;
                let body = lines.next().ok_or_else(|| {
                    SimError::Parse("missing joint table after B header".to_string())
                })?;
                let master = JointTable::from_text(body, context_id)?;
                TableModel::new(master, block_size)
            }
            _ => Err(SimError::Parse(
                "expected leading \"B <block_size>\" header line".to_string(),
            )),
        }
    }

    pub fn read_file(path: &Path, context_id: &str) -> Result<Self, SimError> {
        let text = fs::read_to_string(path)?;
        TableModel::from_text(&text, context_id)
    }
}

/// Seeded random table model with full support; handy for schedule studies.
pub fn random_model(
    vocab: usize,
    length: usize,
    block_size: usize,
    seed: u64,
) -> Result<TableModel, SimError> {
    let cells = crate::dist::checked_cells(vocab, length)?;
    let mut rng = rng_for(seed, 0x7AB1E);
    let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    let master = JointTable::new(vocab, length, probs, format!("model-{seed}"))?;
    TableModel::new(master, block_size)
}

/// Which positions get finalized each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    /// Finalize every masked position whose top conditional probability is at
    /// least `tau_conf`; when none qualifies and forced progress is on, the
    /// single most confident position is finalized so decoding terminates.
    Threshold(f64),
    /// Finalize every masked position of the block in one step (the tau = 0
    /// limit, kept as its own mode for clarity).
    AcceptAll,
    /// Finalize exactly the most confident masked position per step.
    Top1,
    /// Finalize the leftmost masked position per step.
    ArBaseline,
}

impl DecodeMode {
    pub fn tag(&self) -> String {
        match self {
            DecodeMode::Threshold(tau) => format!("threshold_{tau}"),
            DecodeMode::AcceptAll => "accept_all".to_string(),
            DecodeMode::Top1 => "top1".to_string(),
            DecodeMode::ArBaseline => "ar_baseline".to_string(),
        }
    }
}

/// How finalized positions pick their value from the conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChooseRule {
    /// Argmax of the conditional; ties break to the lowest token value.
    GreedyArgmax,
    /// Sample from the conditional with a seeded stream.
    Sample { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub choose: ChooseRule,
    pub forced_progress: bool,
}

impl DecodeConfig {
    pub fn new(mode: DecodeMode) -> Self {
        DecodeConfig {
            mode,
            choose: ChooseRule::GreedyArgmax,
            forced_progress: true,
        }
    }

    pub fn with_choose(mut self, choose: ChooseRule) -> Self {
        self.choose = choose;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if let DecodeMode::Threshold(tau) = self.mode {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(SimError::BadThreshold(tau));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let choose = match self.choose {
            ChooseRule::GreedyArgmax => "greedy".to_string(),
            ChooseRule::Sample { seed } => format!("sample(seed={seed})"),
        };
        format!(
            "mode={} choose={} forced_progress={}",
            self.mode.tag(),
            choose,
            self.forced_progress
        )
    }
}

/// Decode one sequence; returns the committed tokens and the trace.
///
/// Within a step, every finalized position draws from the conditional
/// computed *before* any of this step's commitments — the update set is
/// treated as conditionally independent given the committed state. The
/// threshold applies to the raw conditional max probability.
pub fn decode(
    model: &TableModel,
    config: &DecodeConfig,
    context_id: &str,
) -> Result<(Vec<usize>, DecodingTrace), SimError> {
    config.validate()?;
    let v = model.master().vocab_size();
    let l = model.master().length();
    let b = model.block_size();
    let mut rng = match config.choose {
        ChooseRule::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        ChooseRule::GreedyArgmax => None,
    };

    let mut committed: Vec<Option<usize>> = vec![None; l];
    let mut steps = vec![0u64; l];
    let mut global_step = 0u64;

    for block in 0..model.num_blocks() {
        let start = block * b;
        let prefix: Vec<usize> = committed[..start].iter().map(|c| c.unwrap()).collect();
        let block_table = model.block_conditional(&prefix)?;

        loop {
            let masked: Vec<usize> = (0..b).filter(|i| committed[start + i].is_none()).collect();
            if masked.is_empty() {
                break;
            }
            // per-masked-position conditionals via one scan over the block table
            let mut weights = vec![vec![0.0; v]; masked.len()];
            let mut local = vec![0usize; b];
            for (idx, &p) in block_table.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut rem = idx;
                for i in (0..b).rev() {
                    local[i] = rem % v;
                    rem /= v;
                }
                let consistent = (0..b).all(|i| match committed[start + i] {
                    Some(val) => local[i] == val,
                    None => true,
                });
                if !consistent {
                    continue;
                }
                for (mi, &pos) in masked.iter().enumerate() {
                    weights[mi][local[pos]] += p;
                }
            }
            let mut conditionals = Vec::with_capacity(masked.len());
            for w in &weights {
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    conditionals.push(w.iter().map(|x| x / total).collect::<Vec<f64>>());
                } else {
                    conditionals.push(vec![1.0 / v as f64; v]);
                }
            }
            let confidences: Vec<f64> = conditionals
                .iter()
                .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect();

            let argmax_conf = || -> usize {
                let mut best = 0;
                for (i, c) in confidences.iter().enumerate() {
                    if *c > confidences[best] {
                        best = i;
                    }
                }
                best
            };
            let update: Vec<usize> = match config.mode {
                DecodeMode::Threshold(tau) => {
                    let passing: Vec<usize> = (0..masked.len())
                        .filter(|&i| confidences[i] >= tau)
                        .collect();
                    if passing.is_empty() {
                        if !config.forced_progress {
                            return Err(SimError::Deadlock {
                                step: global_step + 1,
                            });
                        }
                        vec![argmax_conf()]
                    } else {
                        passing
                    }
                }
                DecodeMode::AcceptAll => (0..masked.len()).collect(),
                DecodeMode::Top1 => vec![argmax_conf()],
                DecodeMode::ArBaseline => vec![0],
            };

            global_step += 1;
            for &mi in &update {
                let pos = start + masked[mi];
                let dist = &conditionals[mi];
                let value = match &mut rng {
                    None => {
                        let mut best = 0;
                        for (val, p) in dist.iter().enumerate() {
                            if *p > dist[best] {
                                best = val;
                            }
                        }
                        best
                    }
                    Some(rng) => {
                        let u: f64 = rng.random_range(0.0..1.0);
                        let mut acc = 0.0;
                        let mut chosen = v - 1;
                        for (val, p) in dist.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                chosen = val;
                                break;
                            }
                        }
                        chosen
                    }
                };
                committed[pos] = Some(value);
                steps[pos] = global_step;
            }
        }
    }

    let sequence: Vec<usize> = committed.into_iter().map(|c| c.unwrap()).collect();
    let tokens: Vec<TraceToken> = sequence
        .iter()
        .enumerate()
        .map(|(pos, &val)| {
            TraceToken::new(pos, steps[pos], (pos / b) as u32).with_text(&val.to_string())
        })
        .collect();
    let trace = DecodingTrace::new(context_id, tokens, StepScope::Global)?
        .with_domain_tag(config.mode.tag());
    Ok((sequence, trace))
}

/// Decode one trace per context; deterministic for a fixed seed. Sampling
/// contexts get independent child seeds derived from `(seed, index)`.
pub fn batch_decode(
    model: &TableModel,
    config: &DecodeConfig,
    contexts: &[String],
    seed: u64,
) -> Result<TraceCorpus, SimError> {
    let mut traces = Vec::with_capacity(contexts.len());
    for (index, context) in contexts.iter().enumerate() {
        let per_context = match config.choose {
            ChooseRule::Sample { .. } => DecodeConfig {
                choose: ChooseRule::Sample {
                    seed: mix_seed(seed, index as u64),
                },
                ..*config
            },
            ChooseRule::GreedyArgmax => *config,
        };
        let (_, trace) = decode(model, &per_context, context)?;
        traces.push(trace);
    }
    Ok(TraceCorpus::new(
        traces,
        format!("simulator seed={seed} {}", config.describe()),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ProductFamily;
    use crate::metrics::{afp, block_trajectories, kendall_tau, Rational};

    fn model(seed: u64) -> TableModel {
        random_model(2, 6, 3, seed).unwrap()
    }

    #[test]
    fn ar_baseline_gives_unit_metrics() {
        let (_, trace) = decode(
            &model(1),
            &DecodeConfig::new(DecodeMode::ArBaseline),
            "ctx",
        )
        .unwrap();
        let steps = trace.steps();
        assert_eq!(afp(&steps).unwrap(), Rational::new(1, 1));
        assert_eq!(kendall_tau(&steps).unwrap(), 1.0);
    }

    #[test]
    fn accept_all_finalizes_each_block_in_one_step() {
        let (_, trace) =
            decode(&model(2), &DecodeConfig::new(DecodeMode::AcceptAll), "ctx").unwrap();
        for traj in block_trajectories(&trace).unwrap() {
            assert_eq!(traj.afp, Rational::new(3, 1));
        }
        assert_eq!(trace.steps(), vec![1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn top1_finalizes_one_token_per_step() {
        let (_, trace) = decode(&model(3), &DecodeConfig::new(DecodeMode::Top1), "ctx").unwrap();
        assert_eq!(afp(&trace.steps()).unwrap(), Rational::new(1, 1));
    }

    #[test]
    fn point_mass_model_decodes_its_sequence() {
        let mut probs = vec![0.0; 16];
        probs[0b1011] = 1.0; // sequence (1,0,1,1)
        let master = JointTable::new(2, 4, probs, "pm").unwrap();
        let model = TableModel::new(master, 2).unwrap();
        let (seq, trace) = decode(&model, &DecodeConfig::new(DecodeMode::Top1), "ctx").unwrap();
        assert_eq!(seq, vec![1, 0, 1, 1]);
        assert_eq!(afp(&trace.steps()).unwrap(), Rational::new(1, 1));
    }

    #[test]
    fn threshold_validates_range() {
        assert!(matches!(
            decode(&model(4), &DecodeConfig::new(DecodeMode::Threshold(0.0)), "c"),
            Err(SimError::BadThreshold(_))
        ));
        assert!(matches!(
            decode(&model(4), &DecodeConfig::new(DecodeMode::Threshold(1.0)), "c"),
            Err(SimError::BadThreshold(_))
        ));
    }

    #[test]
    fn forced_progress_always_terminates_at_high_threshold() {
        let (_, trace) = decode(
            &model(5),
            &DecodeConfig::new(DecodeMode::Threshold(0.999999)),
            "ctx",
        )
        .unwrap();
        // an unreachable threshold degenerates into one forced commit per step
        assert_eq!(afp(&trace.steps()).unwrap(), Rational::new(1, 1));
    }

    #[test]
    fn accept_all_greedy_equals_product_family_argmax_per_block() {
        let model = model(6);
        let (seq, _) = decode(&model, &DecodeConfig::new(DecodeMode::AcceptAll), "ctx").unwrap();
        // block 0: mean-field argmaxes of the unconditioned block table
        let block0 = model.block_conditional(&[]).unwrap();
        let family0 = ProductFamily::from_marginals(&block0).unwrap();
        assert_eq!(seq[..3], family0.argmax_profile()[..]);
        // block 1: conditioned on the committed first block
        let block1 = model.block_conditional(&seq[..3]).unwrap();
        let family1 = ProductFamily::from_marginals(&block1).unwrap();
        assert_eq!(seq[3..], family1.argmax_profile()[..]);
    }

    #[test]
    fn batch_decode_is_deterministic() {
        let model = model(7);
        let config = DecodeConfig::new(DecodeMode::Threshold(0.6))
            .with_choose(ChooseRule::Sample { seed: 11 });
        let contexts: Vec<String> = (0..10).map(|i| format!("ctx{i}")).collect();
        let a = batch_decode(&model, &config, &contexts, 99).unwrap();
        let b = batch_decode(&model, &config, &contexts, 99).unwrap();
        assert_eq!(crate::trace::emit_corpus(&a), crate::trace::emit_corpus(&b));
        // a different master seed draws different samples
        let c = batch_decode(&model, &config, &contexts, 100).unwrap();
        assert_ne!(crate::trace::emit_corpus(&a), crate::trace::emit_corpus(&c));
    }

    #[test]
    fn empty_context_list_gives_empty_corpus() {
        let corpus = batch_decode(
            &model(8),
            &DecodeConfig::new(DecodeMode::AcceptAll),
            &[],
            1,
        )
        .unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn traces_carry_mode_tags_for_grouping() {
        let model = model(9);
        let (_, a) = decode(&model, &DecodeConfig::new(DecodeMode::Top1), "a").unwrap();
        let (_, b) = decode(&model, &DecodeConfig::new(DecodeMode::AcceptAll), "b").unwrap();
        let corpus = TraceCorpus::new(vec![a, b], "mixed").unwrap();
        let groups =
            crate::metrics::aggregate(&corpus, &crate::metrics::GroupingSpec::default()).unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn model_text_round_trips() {
        let model = model(10);
        let text = model.to_text();
        let back = TableModel::from_text(&text, model.master().context_id()).unwrap();
        assert_eq!(back.block_size(), model.block_size());
        assert_eq!(back.master(), model.master());
    }

    #[test]
    fn block_size_must_divide_length() {
        let joint = JointTable::uniform(2, 6, "u").unwrap();
        assert!(matches!(
            TableModel::new(joint, 4),
            Err(SimError::BlockSizeMismatch { .. })
        ));
    }

    #[test]
    fn raising_threshold_never_raises_afp_on_sample_models() {
        for seed in 0..5u64 {
            let model = model(seed + 40);
            let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
            let mut last = f64::INFINITY;
            for tau in grid {
                let (_, trace) =
                    decode(&model, &DecodeConfig::new(DecodeMode::Threshold(tau)), "c").unwrap();
                let a = afp(&trace.steps()).unwrap().to_f64();
                assert!(
                    a <= last + 1e-12,
                    "seed {seed}: afp rose from {last} to {a} at tau {tau}"
                );
                last = a;
            }
        }
    }
}
