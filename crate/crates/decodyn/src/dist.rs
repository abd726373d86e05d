//! Exact discrete-distribution toolkit over dense joint tables.
//!
//! A [`JointTable`] stores a full probability table over `V^L` sequences,
//! indexed lexicographically (site 0 most significant). Everything is computed
//! by exact enumeration — marginals, entropies (natural log), total
//! correlation, KL divergence — so the factorization-gap identity can be
//! checked to floating-point precision rather than estimated.
//!
//! Text format: a header line `V L`, then `V^L` probability values in
//! lexicographic order, whitespace-separated.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Hard cap on dense table cells; beyond this, exact enumeration stops being
/// a desk-scale tool and the constructor refuses.
pub const MAX_TABLE_CELLS: usize = 200_000;

/// Tolerance for "sums to one" checks on stored tables.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("vocab size must be >= 2 (got {0})")]
    VocabTooSmall(usize),
    #[error("length must be >= 1 (got {0})")]
    LengthTooSmall(usize),
    #[error("table needs {expected} entries for V={vocab} L={length}, got {got}")]
    WrongCellCount {
        vocab: usize,
        length: usize,
        expected: usize,
        got: usize,
    },
    #[error("table size {0} exceeds the dense cap of {MAX_TABLE_CELLS} cells")]
    CapExceeded(usize),
    #[error("probabilities must be non-negative (entry {index} is {value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("site set must be a non-empty subset of 0..{length}")]
    BadSiteSet { length: usize },
    #[error("total correlation needs at least two sites")]
    SingleSite,
    #[error("shape mismatch: ({0}, {1}) vs ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("product family has {got} sites, table has {expected}")]
    FamilySiteMismatch { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// KL divergence result: a typed marker instead of a bare infinity so that
/// property suites can assert on support violations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Finite(f64),
    /// `p` puts mass where `q` has none.
    Infinite,
}

impl Divergence {
    pub fn is_finite(&self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(*v),
            Divergence::Infinite => None,
        }
    }

    /// Finite value, panicking on the infinite marker. Use in contexts where
    /// support compatibility was already established.
    pub fn expect_finite(&self) -> f64 {
        self.finite().expect("divergence is infinite")
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{v}"),
            Divergence::Infinite => write!(f, "inf"),
        }
    }
}

/// Dense joint distribution over `V^L` sequences for one frozen conditioning
/// context. All conditioning (prompt, partial sequence, anything else) is
/// collapsed into `context_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    vocab_size: usize,
    length: usize,
    probs: Vec<f64>,
    context_id: String,
}

pub fn checked_cells(vocab: usize, length: usize) -> Result<usize, DistError> {
    let mut cells: usize = 1;
    for _ in 0..length {
        cells = cells
            .checked_mul(vocab)
            .filter(|c| *c <= MAX_TABLE_CELLS)
            .ok_or(DistError::CapExceeded(usize::MAX))?;
    }
    Ok(cells)
}

impl JointTable {
    pub fn new(
        vocab_size: usize,
        length: usize,
        probs: Vec<f64>,
        context_id: impl Into<String>,
    ) -> Result<Self, DistError> {
        if vocab_size < 2 {
            return Err(DistError::VocabTooSmall(vocab_size));
        }
        if length < 1 {
            return Err(DistError::LengthTooSmall(length));
        }
        let cells = checked_cells(vocab_size, length)?;
        if probs.len() != cells {
            return Err(DistError::WrongCellCount {
                vocab: vocab_size,
                length,
                expected: cells,
                got: probs.len(),
            });
        }
        let mut sum = 0.0;
        for (index, &value) in probs.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(DistError::NegativeEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistError::NotNormalized(sum));
        }
        Ok(JointTable {
            vocab_size,
            length,
            probs,
            context_id: context_id.into(),
        })
    }

    pub fn uniform(vocab_size: usize, length: usize, context_id: &str) -> Result<Self, DistError> {
        let cells = checked_cells(vocab_size.max(2), length.max(1))?;
        JointTable::new(
            vocab_size,
            length,
            vec![1.0 / cells as f64; cells],
            context_id,
        )
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn context_id(&self) -> &str {
        &self.context_id
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    /// Lexicographic index of a sequence (site 0 most significant).
    pub fn index_of(&self, state: &[usize]) -> usize {
        debug_assert_eq!(state.len(), self.length);
        state.iter().fold(0, |acc, &v| {
            debug_assert!(v < self.vocab_size);
            acc * self.vocab_size + v
        })
    }

    /// Inverse of [`index_of`].
    pub fn state_of(&self, mut index: usize) -> Vec<usize> {
        let mut state = vec![0usize; self.length];
        for i in (0..self.length).rev() {
            state[i] = index % self.vocab_size;
            index /= self.vocab_size;
        }
        state
    }

    /// Exact marginal over a non-empty subset of sites (kept in increasing
    /// site order).
    pub fn marginal(&self, site_set: &[usize]) -> Result<JointTable, DistError> {
        let mut sites: Vec<usize> = site_set.to_vec();
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() || sites.iter().any(|s| *s >= self.length) {
            return Err(DistError::BadSiteSet {
                length: self.length,
            });
        }
        let sub_len = sites.len();
        let sub_cells = checked_cells(self.vocab_size, sub_len)?;
        let mut sub = vec![0.0; sub_cells];
        let mut state = vec![0usize; self.length];
        for (idx, &p) in self.probs.iter().enumerate() {
            // decode idx once per cell
            let mut rem = idx;
            for i in (0..self.length).rev() {
                state[i] = rem % self.vocab_size;
                rem /= self.vocab_size;
            }
            let sub_idx = sites.iter().fold(0, |acc, &s| acc * self.vocab_size + state[s]);
            sub[sub_idx] += p;
        }
        JointTable::new(self.vocab_size, sub_len, sub, self.context_id.clone())
    }

    /// Single-site marginal as a plain vector.
    pub fn site_marginal(&self, site: usize) -> Result<Vec<f64>, DistError> {
        Ok(self.marginal(&[site])?.probs)
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    /// Total correlation: sum of site entropies minus the joint entropy.
    /// Non-negative; zero exactly when the sites are independent.
    pub fn total_correlation(&self) -> Result<f64, DistError> {
        if self.length < 2 {
            return Err(DistError::SingleSite);
        }
        let mut site_entropy_sum = 0.0;
        for i in 0..self.length {
            site_entropy_sum += entropy_of(&self.site_marginal(i)?);
        }
        Ok(site_entropy_sum - self.entropy())
    }

    /// Serialize to the `V L` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vocab_size, self.length);
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{p}"));
        }
        out.push('\n');
        out
    }

    /// Parse the `V L` text format.
    pub fn from_text(text: &str, context_id: &str) -> Result<Self, DistError> {
        let mut tokens = text.split_whitespace();
        let vocab: usize = tokens
            .next()
            .ok_or_else(|| DistError::Parse("missing V".into()))?
            .parse()
            .map_err(|e| DistError::Parse(format!("bad V: {e}")))?;
        let length: usize = tokens
            .next()
            .ok_or_else(|| DistError::Parse("missing L".into()))?
            .parse()
            .map_err(|e| DistError::Parse(format!("bad L: {e}")))?;
        let probs: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| DistError::Parse(format!("bad probability {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        JointTable::new(vocab, length, probs, context_id)
    }

    pub fn read_file(path: &Path, context_id: &str) -> Result<Self, DistError> {
        let text = fs::read_to_string(path)?;
        JointTable::from_text(&text, context_id)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), DistError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn entropy_of(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Per-site distributions `q_i` over the vocabulary, one for each site of a
/// site set; the product-form approximation of a joint.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFamily {
    vocab_size: usize,
    site_dists: Vec<Vec<f64>>,
}

impl ProductFamily {
    pub fn new(site_dists: Vec<Vec<f64>>) -> Result<Self, DistError> {
        if site_dists.is_empty() {
            return Err(DistError::LengthTooSmall(0));
        }
        let vocab_size = site_dists[0].len();
        if vocab_size < 2 {
            return Err(DistError::VocabTooSmall(vocab_size));
        }
        for dist in &site_dists {
            if dist.len() != vocab_size {
                return Err(DistError::ShapeMismatch(vocab_size, 1, dist.len(), 1));
            }
            let mut sum = 0.0;
            for (index, &value) in dist.iter().enumerate() {
                if value < 0.0 || !value.is_finite() {
                    return Err(DistError::NegativeEntry { index, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(DistError::NotNormalized(sum));
            }
        }
        Ok(ProductFamily {
            vocab_size,
            site_dists,
        })
    }

    /// The true marginals of a joint, as a product family.
    pub fn from_marginals(joint: &JointTable) -> Result<Self, DistError> {
        let dists = (0..joint.length())
            .map(|i| joint.site_marginal(i))
            .collect::<Result<Vec<_>, _>>()?;
        ProductFamily::new(dists)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_sites(&self) -> usize {
        self.site_dists.len()
    }

    pub fn site_dists(&self) -> &[Vec<f64>] {
        &self.site_dists
    }

    /// Materialize the product distribution as a joint table.
    pub fn to_joint(&self, context_id: &str) -> Result<JointTable, DistError> {
        let length = self.site_dists.len();
        let cells = checked_cells(self.vocab_size, length)?;
        let mut probs = vec![0.0; cells];
        let mut state = vec![0usize; length];
        for (idx, slot) in probs.iter_mut().enumerate() {
            let mut rem = idx;
            for i in (0..length).rev() {
                state[i] = rem % self.vocab_size;
                rem /= self.vocab_size;
            }
            *slot = state
                .iter()
                .enumerate()
                .map(|(i, &v)| self.site_dists[i][v])
                .product();
        }
        // renormalize the last cell against accumulated rounding so the table
        // invariant holds exactly enough; the drift is at most a few ulps
        let sum: f64 = probs.iter().sum();
        if sum > 0.0 {
            for p in &mut probs {
                *p /= sum;
            }
        }
        JointTable::new(self.vocab_size, length, probs, context_id)
    }

    /// Per-site argmax profile, ties broken to the lowest value index.
    pub fn argmax_profile(&self) -> Vec<usize> {
        self.site_dists
            .iter()
            .map(|d| {
                let mut best = 0;
                for (i, p) in d.iter().enumerate() {
                    if *p > d[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// KL divergence between two equal-length discrete distributions.
pub fn kl_dists(p: &[f64], q: &[f64]) -> Divergence {
    debug_assert_eq!(p.len(), q.len());
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Divergence::Infinite;
            }
            sum += pi * (pi / qi).ln();
        }
    }
    Divergence::Finite(sum)
}

/// KL divergence between joint tables of identical shape.
pub fn kl(p: &JointTable, q: &JointTable) -> Result<Divergence, DistError> {
    if p.vocab_size != q.vocab_size || p.length != q.length {
        return Err(DistError::ShapeMismatch(
            p.vocab_size,
            p.length,
            q.vocab_size,
            q.length,
        ));
    }
    Ok(kl_dists(&p.probs, &q.probs))
}

/// The factorization-gap decomposition for one (joint, product family) pair:
///
/// `KL(P || prod q_i)  =  TC(P)  +  sum_i KL(P_i || q_i)`
///
/// `kl_joint` is computed directly against the materialized product table, so
/// the identity is a genuine cross-check, not an algebraic restatement.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub kl_joint: Divergence,
    pub tc: f64,
    pub marginal_kl_sum: Divergence,
    /// `kl_joint - tc - marginal_kl_sum` when all terms are finite.
    pub residual: Option<f64>,
}

pub fn factorization_gap(
    true_joint: &JointTable,
    family: &ProductFamily,
) -> Result<GapReport, DistError> {
    if family.num_sites() != true_joint.length() {
        return Err(DistError::FamilySiteMismatch {
            expected: true_joint.length(),
            got: family.num_sites(),
        });
    }
    if family.vocab_size() != true_joint.vocab_size() {
        return Err(DistError::ShapeMismatch(
            true_joint.vocab_size(),
            true_joint.length(),
            family.vocab_size(),
            family.num_sites(),
        ));
    }
    let product = family.to_joint(true_joint.context_id())?;
    let kl_joint = kl(true_joint, &product)?;
    let tc = true_joint.total_correlation()?;
    let mut marginal_sum = 0.0;
    let mut marginal_finite = true;
    for i in 0..true_joint.length() {
        match kl_dists(&true_joint.site_marginal(i)?, &family.site_dists()[i]) {
            Divergence::Finite(v) => marginal_sum += v,
            Divergence::Infinite => marginal_finite = false,
        }
    }
    let marginal_kl_sum = if marginal_finite {
        Divergence::Finite(marginal_sum)
    } else {
        Divergence::Infinite
    };
    let residual = match (kl_joint, marginal_kl_sum) {
        (Divergence::Finite(k), Divergence::Finite(m)) => Some(k - tc - m),
        _ => None,
    };
    Ok(GapReport {
        kl_joint,
        tc,
        marginal_kl_sum,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The correlated-bit table P(00)=P(11)=0.45, P(01)=P(10)=0.05.
    pub(crate) fn correlated_bits() -> JointTable {
        JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").unwrap()
    }

    #[test]
    fn uniform_marginal_is_uniform() {
        let joint = JointTable::uniform(2, 2, "u").unwrap();
        assert_eq!(joint.site_marginal(0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn marginal_sums_cells() {
        let joint = JointTable::new(2, 2, vec![0.5, 0.0, 0.0, 0.5], "c").unwrap();
        assert_eq!(joint.site_marginal(1).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn marginal_of_all_sites_is_identity() {
        let joint = correlated_bits();
        let m = joint.marginal(&[0, 1]).unwrap();
        assert_eq!(m.probs(), joint.probs());
    }

    #[test]
    fn marginal_of_empty_set_is_error() {
        let joint = correlated_bits();
        assert!(matches!(
            joint.marginal(&[]),
            Err(DistError::BadSiteSet { .. })
        ));
    }

    #[test]
    fn entropy_of_uniform_four_outcomes() {
        let joint = JointTable::uniform(2, 2, "u").unwrap();
        assert!((joint.entropy() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_of_point_mass_is_zero() {
        let joint = JointTable::new(2, 1, vec![1.0, 0.0], "pm").unwrap();
        assert_eq!(joint.entropy(), 0.0);
    }

    #[test]
    fn entropy_direct_formula() {
        let joint = JointTable::new(2, 1, vec![0.9, 0.1], "b").unwrap();
        let expected = -(0.9f64 * 0.9f64.ln() + 0.1f64 * 0.1f64.ln());
        assert!((joint.entropy() - expected).abs() < 1e-15);
        assert!((joint.entropy() - 0.3250829733914482).abs() < 1e-12);
    }

    #[test]
    fn tc_of_independent_product_is_zero() {
        let family = ProductFamily::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let joint = family.to_joint("ind").unwrap();
        assert!(joint.total_correlation().unwrap().abs() < 1e-14);
    }

    #[test]
    fn tc_of_perfectly_correlated_bits_is_ln_two() {
        let joint = JointTable::new(2, 2, vec![0.5, 0.0, 0.0, 0.5], "c").unwrap();
        assert!((joint.total_correlation().unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn tc_of_correlated_bits_matches_entropy_evaluation() {
        let joint = correlated_bits();
        // oracle: H0 + H1 - Hjoint by direct formula
        let h_site = -(0.5f64 * 0.5f64.ln()) * 2.0;
        let h_joint = -(2.0 * 0.45 * 0.45f64.ln() + 2.0 * 0.05 * 0.05f64.ln());
        let expected = 2.0 * h_site - h_joint;
        let tc = joint.total_correlation().unwrap();
        assert!((tc - expected).abs() < 1e-14);
        assert!((tc - 0.3680642071684971).abs() < 1e-12);
    }

    #[test]
    fn tc_single_site_is_error() {
        let joint = JointTable::new(2, 1, vec![0.5, 0.5], "s").unwrap();
        assert!(matches!(
            joint.total_correlation(),
            Err(DistError::SingleSite)
        ));
    }

    #[test]
    fn kl_identity_is_zero() {
        let joint = correlated_bits();
        assert_eq!(kl(&joint, &joint).unwrap(), Divergence::Finite(0.0));
    }

    #[test]
    fn kl_point_mass_vs_uniform() {
        let d = kl_dists(&[1.0, 0.0], &[0.5, 0.5]);
        assert!((d.expect_finite() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_support_violation_is_marked_infinite() {
        assert_eq!(kl_dists(&[0.5, 0.5], &[1.0, 0.0]), Divergence::Infinite);
    }

    #[test]
    fn gap_with_true_marginals_equals_tc() {
        let joint = correlated_bits();
        let family = ProductFamily::from_marginals(&joint).unwrap();
        let report = factorization_gap(&joint, &family).unwrap();
        let tc = joint.total_correlation().unwrap();
        assert!((report.kl_joint.expect_finite() - tc).abs() < 1e-12);
        assert!((report.kl_joint.expect_finite() - 0.3680642071684971).abs() < 1e-12);
        assert!(report.marginal_kl_sum.expect_finite().abs() < 1e-12);
        assert!(report.residual.unwrap().abs() < 1e-10);
    }

    #[test]
    fn gap_of_independent_joint_with_true_marginals_is_zero() {
        let family = ProductFamily::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let joint = family.to_joint("ind").unwrap();
        let report = factorization_gap(&joint, &ProductFamily::from_marginals(&joint).unwrap()).unwrap();
        assert!(report.kl_joint.expect_finite().abs() < 1e-12);
        assert!(report.tc.abs() < 1e-12);
        assert!(report.marginal_kl_sum.expect_finite().abs() < 1e-12);
    }

    #[test]
    fn gap_of_independent_joint_with_perturbed_family() {
        // V=3, L=2 independent joint; perturbed q makes kl_joint equal the
        // marginal KL sum while tc stays zero.
        let p0 = vec![0.5, 0.3, 0.2];
        let p1 = vec![0.1, 0.6, 0.3];
        let joint = ProductFamily::new(vec![p0.clone(), p1.clone()])
            .unwrap()
            .to_joint("ind")
            .unwrap();
        let q = ProductFamily::new(vec![vec![0.4, 0.4, 0.2], vec![0.2, 0.5, 0.3]]).unwrap();
        let report = factorization_gap(&joint, &q).unwrap();
        assert!(report.tc.abs() < 1e-12);
        assert!(
            (report.kl_joint.expect_finite() - report.marginal_kl_sum.expect_finite()).abs()
                < 1e-10
        );
        assert!(report.residual.unwrap().abs() < 1e-10);
    }

    #[test]
    fn text_format_round_trips() {
        let joint = correlated_bits();
        let text = joint.to_text();
        let back = JointTable::from_text(&text, "corr").unwrap();
        assert_eq!(back, joint);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            checked_cells(10, 6),
            Err(DistError::CapExceeded(_))
        ));
    }

    #[test]
    fn index_round_trip() {
        let joint = JointTable::uniform(3, 3, "u").unwrap();
        for idx in 0..joint.num_states() {
            let state = joint.state_of(idx);
            assert_eq!(joint.index_of(&state), idx);
        }
    }

    mod properties {
        use super::*;
        use crate::util::rng_for;
        use proptest::prelude::*;
        use rand::Rng;

        pub(crate) fn random_joint(vocab: usize, length: usize, seed: u64) -> JointTable {
            let mut rng = rng_for(seed, 0);
            let cells = checked_cells(vocab, length).unwrap();
            let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= sum;
            }
            JointTable::new(vocab, length, probs, format!("rand-{seed}")).unwrap()
        }

        fn random_family(vocab: usize, sites: usize, seed: u64) -> ProductFamily {
            let mut rng = rng_for(seed, 1);
            let dists = (0..sites)
                .map(|_| {
                    let mut d: Vec<f64> = (0..vocab).map(|_| rng.random_range(0.05..1.0)).collect();
                    let s: f64 = d.iter().sum();
                    for v in &mut d {
                        *v /= s;
                    }
                    d
                })
                .collect();
            ProductFamily::new(dists).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn gap_identity_holds(seed in 0u64..10_000, vocab in 2usize..=4, length in 2usize..=3) {
                let joint = random_joint(vocab, length, seed);
                let family = random_family(vocab, length, seed);
                let report = factorization_gap(&joint, &family).unwrap();
                prop_assert!(report.residual.unwrap().abs() <= 1e-10);
                prop_assert!(report.kl_joint.expect_finite() >= report.tc - 1e-12);
            }

            #[test]
            fn tc_nonnegative_and_zero_iff_product(seed in 0u64..10_000) {
                let joint = random_joint(3, 2, seed);
                let tc = joint.total_correlation().unwrap();
                prop_assert!(tc >= -1e-14);
                // the product of its marginals always has tc ~ 0
                let product = ProductFamily::from_marginals(&joint).unwrap().to_joint("p").unwrap();
                prop_assert!(product.total_correlation().unwrap().abs() <= 1e-10);
                // tc == 0 iff joint == product of marginals
                let distance: f64 = joint
                    .probs()
                    .iter()
                    .zip(product.probs())
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                if tc.abs() <= 1e-12 {
                    prop_assert!(distance <= 1e-8);
                }
                if distance <= 1e-14 {
                    prop_assert!(tc.abs() <= 1e-10);
                }
            }

            #[test]
            fn true_marginals_minimize_kl(seed in 0u64..10_000) {
                let joint = random_joint(2, 3, seed);
                let best = factorization_gap(&joint, &ProductFamily::from_marginals(&joint).unwrap())
                    .unwrap()
                    .kl_joint
                    .expect_finite();
                let other = factorization_gap(&joint, &random_family(2, 3, seed.wrapping_add(7)))
                    .unwrap()
                    .kl_joint
                    .expect_finite();
                prop_assert!(other >= best - 1e-12);
            }

            #[test]
            fn entropy_is_additive_over_independent_sites(seed in 0u64..10_000) {
                let family = random_family(3, 3, seed);
                let joint = family.to_joint("ind").unwrap();
                let site_sum: f64 = (0..3)
                    .map(|i| {
                        let d = &family.site_dists()[i];
                        -d.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
                    })
                    .sum();
                prop_assert!((joint.entropy() - site_sum).abs() <= 1e-10);
            }
        }
    }
}
