//! Finalization-order metrics: AFP, Kendall's tau, per-block trajectories,
//! grouped aggregates, and label-order statistics.
//!
//! AFP (average finalization parallelism) is sequence length divided by the
//! number of distinct steps that finalize at least one token; it is kept as an
//! exact rational. Kendall's tau correlates token position with finalization
//! step: with `n(n-1)/2` in the denominator, strictly concordant pairs count
//! +1, strictly discordant pairs -1, and tied pairs contribute zero to both
//! counts. Tau is undefined for fewer than two tokens and reported as an
//! explicit marker, never silently coerced to 0 or 1.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::trace::{Correctness, DecodingTrace, StepScope, TraceCorpus};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("afp is undefined for an empty step list")]
    EmptySteps,
    #[error("kendall tau is undefined for {n} tokens (need at least 2)")]
    UndefinedTau { n: usize },
    #[error("trace {0} must be normalized to global step scope first")]
    ScopeNotGlobal(String),
}

/// Exact non-negative rational, always stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Average finalization parallelism: `n / |distinct steps|`, in `[1, n]`.
pub fn afp(steps: &[u64]) -> Result<Rational, MetricsError> {
    if steps.is_empty() {
        return Err(MetricsError::EmptySteps);
    }
    let mut distinct: Vec<u64> = steps.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(Rational::new(steps.len() as u64, distinct.len() as u64))
}

/// Kendall's tau between token position and finalization step.
///
/// Runs in `O(n log n)` via merge-sort inversion counting; ties in the step
/// values are counted separately so they contribute to neither side.
pub fn kendall_tau(steps: &[u64]) -> Result<f64, MetricsError> {
    let n = steps.len();
    if n < 2 {
        return Err(MetricsError::UndefinedTau { n });
    }
    let discordant = count_inversions(steps);
    let tied = count_tied_pairs(steps);
    let total = n as u64 * (n as u64 - 1) / 2;
    let concordant = total - discordant - tied;
    Ok((concordant as f64 - discordant as f64) / total as f64)
}

/// Number of pairs `i < j` with `steps[i] > steps[j]` (strict inversions).
fn count_inversions(steps: &[u64]) -> u64 {
    fn merge_count(buf: &mut [u64], scratch: &mut [u64]) -> u64 {
        let n = buf.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = 0;
        {
            let (left, right) = buf.split_at_mut(mid);
            inv += merge_count(left, &mut scratch[..mid]);
            inv += merge_count(right, &mut scratch[mid..]);
        }
        let (mut i, mut j, mut k) = (0, mid, 0);
        while i < mid || j < n {
            if i < mid && (j >= n || buf[i] <= buf[j]) {
                scratch[k] = buf[i];
                i += 1;
            } else {
                // buf[j] < buf[i..mid]: each remaining left element forms an inversion
                inv += (mid - i) as u64;
                scratch[k] = buf[j];
                j += 1;
            }
            k += 1;
        }
        buf.copy_from_slice(&scratch[..n]);
        inv
    }
    let mut buf = steps.to_vec();
    let mut scratch = vec![0u64; buf.len()];
    merge_count(&mut buf, &mut scratch)
}

fn count_tied_pairs(steps: &[u64]) -> u64 {
    let mut sorted = steps.to_vec();
    sorted.sort_unstable();
    let mut tied = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            tied += run * (run - 1) / 2;
            run = 1;
        }
    }
    tied + run * (run - 1) / 2
}

/// Per-block metric series for one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrajectory {
    pub block_index: u32,
    pub afp: Rational,
    /// `None` iff the block holds fewer than two tokens.
    pub tau: Option<f64>,
    pub token_count: usize,
}

/// Compute one [`BlockTrajectory`] per block, in block order. Requires a
/// globally-scoped trace; metrics inside a block use only that block's pairs.
pub fn block_trajectories(trace: &DecodingTrace) -> Result<Vec<BlockTrajectory>, MetricsError> {
    if trace.step_scope() != StepScope::Global {
        return Err(MetricsError::ScopeNotGlobal(trace.sample_id().to_string()));
    }
    let tokens = trace.tokens();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let block = tokens[i].block_index;
        let mut j = i;
        while j < tokens.len() && tokens[j].block_index == block {
            j += 1;
        }
        let steps: Vec<u64> = tokens[i..j].iter().map(|t| t.finalize_step).collect();
        let tau = if steps.len() < 2 {
            None
        } else {
            Some(kendall_tau(&steps)?)
        };
        out.push(BlockTrajectory {
            block_index: block,
            afp: afp(&steps)?,
            tau,
            token_count: steps.len(),
        });
        i = j;
    }
    Ok(out)
}

/// Grouping key for corpus aggregation: domain, correctness, repetition flag,
/// and an optional block-count bucket label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub domain_tag: Option<String>,
    pub correctness: Correctness,
    pub repetitive: bool,
    pub block_bucket: Option<String>,
}

/// Optional block-count bucketing for [`aggregate`]. Buckets are inclusive
/// ranges; traces outside every bucket land in a shared `"unbucketed"` label.
#[derive(Debug, Clone, Default)]
pub struct GroupingSpec {
    pub block_buckets: Option<Vec<(u32, u32)>>,
}

impl GroupingSpec {
    fn bucket_label(&self, block_count: usize) -> Option<String> {
        let buckets = self.block_buckets.as_ref()?;
        for (lo, hi) in buckets {
            if (*lo as usize) <= block_count && block_count <= (*hi as usize) {
                return Some(format!("{lo}-{hi}"));
            }
        }
        Some("unbucketed".to_string())
    }

    /// Parse a spec like `"1-2,3-4"`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut buckets = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (lo, hi) = part
                .split_once('-')
                .ok_or_else(|| format!("bucket {part:?} is not of the form LO-HI"))?;
            let lo: u32 = lo.trim().parse().map_err(|e| format!("bucket {part:?}: {e}"))?;
            let hi: u32 = hi.trim().parse().map_err(|e| format!("bucket {part:?}: {e}"))?;
            if lo > hi {
                return Err(format!("bucket {part:?} has lo > hi"));
            }
            buckets.push((lo, hi));
        }
        Ok(GroupingSpec {
            block_buckets: Some(buckets),
        })
    }
}

/// Aggregate over one group of traces. Means are unweighted over traces;
/// traces with undefined tau are excluded from `mean_tau` and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub key: GroupKey,
    pub mean_afp: f64,
    /// `None` when every member trace had undefined tau.
    pub mean_tau: Option<f64>,
    pub count: usize,
    pub excluded_tau_count: usize,
}

/// Deterministic grouped means over a corpus. Output is sorted by group key.
pub fn aggregate(
    corpus: &TraceCorpus,
    spec: &GroupingSpec,
) -> Result<Vec<GroupSummary>, MetricsError> {
    struct Acc {
        afp_sum: f64,
        tau_sum: f64,
        tau_count: usize,
        count: usize,
    }
    let mut groups: BTreeMap<GroupKey, Acc> = BTreeMap::new();
    for trace in &corpus.traces {
        if trace.step_scope() != StepScope::Global {
            return Err(MetricsError::ScopeNotGlobal(trace.sample_id().to_string()));
        }
        let steps = trace.steps();
        let trace_afp = afp(&steps)?.to_f64();
        let trace_tau = if steps.len() < 2 {
            None
        } else {
            Some(kendall_tau(&steps)?)
        };
        let key = GroupKey {
            domain_tag: trace.domain_tag().map(str::to_string),
            correctness: trace.correctness(),
            repetitive: trace.repetitive(),
            block_bucket: spec.bucket_label(trace.block_count()),
        };
        let acc = groups.entry(key).or_insert(Acc {
            afp_sum: 0.0,
            tau_sum: 0.0,
            tau_count: 0,
            count: 0,
        });
        acc.afp_sum += trace_afp;
        if let Some(tau) = trace_tau {
            acc.tau_sum += tau;
            acc.tau_count += 1;
        }
        acc.count += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(key, acc)| GroupSummary {
            key,
            mean_afp: acc.afp_sum / acc.count as f64,
            mean_tau: if acc.tau_count > 0 {
                Some(acc.tau_sum / acc.tau_count as f64)
            } else {
                None
            },
            count: acc.count,
            excluded_tau_count: acc.count - acc.tau_count,
        })
        .collect())
}

/// Corpus-wide ordering statistic for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStat {
    pub label: String,
    pub avg_local_step: f64,
    pub total_count: u64,
}

/// Result of [`label_avg_local_step`]: rows sorted ascending by average local
/// step (label as tiebreak), plus the number of unlabeled tokens skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub rows: Vec<LabelStat>,
    pub skipped_unlabeled: u64,
}

/// Mean local step per label over the whole corpus.
///
/// The local step of a token is the dense rank of its finalize step among the
/// distinct steps of its block, starting at 1, so tokens finalized together
/// share a rank.
pub fn label_avg_local_step(corpus: &TraceCorpus) -> Result<LabelTable, MetricsError> {
    let mut sums: BTreeMap<String, (f64, u64)> = BTreeMap::new();
    let mut skipped = 0u64;
    for trace in &corpus.traces {
        let tokens = trace.tokens();
        let mut i = 0;
        while i < tokens.len() {
            let block = tokens[i].block_index;
            let mut j = i;
            while j < tokens.len() && tokens[j].block_index == block {
                j += 1;
            }
            let mut distinct: Vec<u64> = tokens[i..j].iter().map(|t| t.finalize_step).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let rank_of = |step: u64| -> u64 {
                distinct.binary_search(&step).expect("step present") as u64 + 1
            };
            for t in &tokens[i..j] {
                match &t.label {
                    Some(label) => {
                        let entry = sums.entry(label.clone()).or_insert((0.0, 0));
                        entry.0 += rank_of(t.finalize_step) as f64;
                        entry.1 += 1;
                    }
                    None => skipped += 1,
                }
            }
            i = j;
        }
    }
    let mut rows: Vec<LabelStat> = sums
        .into_iter()
        .map(|(label, (sum, count))| LabelStat {
            label,
            avg_local_step: sum / count as f64,
            total_count: count,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.avg_local_step
            .partial_cmp(&b.avg_local_step)
            .unwrap()
            .then_with(|| a.label.cmp(&b.label))
    });
    Ok(LabelTable {
        rows,
        skipped_unlabeled: skipped,
    })
}
