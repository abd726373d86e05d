//! Edit-set selection and dense transition kernels.

use crate::chain::predictor::{confidence, Predictor};
use crate::chain::ChainError;
use crate::dist::{checked_cells, JointTable};

/// How the edit set is chosen from the per-site confidences.
///
/// `Threshold` is the reference rule: re-edit every site whose confidence
/// passes the threshold. `Top1`, `Full`, `Fixed`, and `RandomScanSingleton`
/// are instrumentation policies used to construct chains with known behavior
/// (single-site Gibbs scans, synchronous updates, frozen probes); kernels
/// record their policy so reports never conflate the two kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    /// `{ i : s_i >= tau }`. The operating regime is `tau` in `(0,1)`;
    /// degenerate values are legal probes (`tau <= 0` edits every site,
    /// `tau > 1` edits none).
    Threshold(f64),
    /// The single most confident site; ties break to the lowest index.
    Top1,
    /// Every site, every step.
    Full,
    /// A fixed site set, independent of confidence.
    Fixed(Vec<usize>),
    /// One uniformly chosen site per step; the kernel is the mixture over
    /// the `L` singleton choices, which keeps the chain time-homogeneous.
    RandomScanSingleton,
}

impl SelectionPolicy {
    pub fn fixed(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        SelectionPolicy::Fixed(sites)
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, SelectionPolicy::RandomScanSingleton)
    }

    pub fn describe(&self) -> String {
        match self {
            SelectionPolicy::Threshold(tau) => format!("threshold({tau})"),
            SelectionPolicy::Top1 => "top1".to_string(),
            SelectionPolicy::Full => "full".to_string(),
            SelectionPolicy::Fixed(sites) => format!("fixed({sites:?})"),
            SelectionPolicy::RandomScanSingleton => "random_scan_singleton".to_string(),
        }
    }

    fn validate(&self, length: usize) -> Result<(), ChainError> {
        match self {
            SelectionPolicy::Threshold(tau) if !tau.is_finite() => {
                Err(ChainError::BadThreshold(*tau))
            }
            SelectionPolicy::Fixed(sites) => {
                for &site in sites {
                    if site >= length {
                        return Err(ChainError::FixedSiteOutOfRange { site, length });
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// The edit set induced by a policy at one state: either a single set
/// (deterministic policies) or a weighted mixture (randomized policies).
#[derive(Debug, Clone, PartialEq)]
pub enum EditSelection {
    Single(Vec<usize>),
    Mixture(Vec<(Vec<usize>, f64)>),
}

impl EditSelection {
    /// The deterministic edit set, if there is exactly one.
    pub fn single(&self) -> Option<&[usize]> {
        match self {
            EditSelection::Single(set) => Some(set),
            EditSelection::Mixture(_) => None,
        }
    }

    /// Weighted view over the component sets (weight 1 for a single set).
    pub fn weighted_sets(&self) -> Vec<(&[usize], f64)> {
        match self {
            EditSelection::Single(set) => vec![(set.as_slice(), 1.0)],
            EditSelection::Mixture(sets) => {
                sets.iter().map(|(set, w)| (set.as_slice(), *w)).collect()
            }
        }
    }
}

/// Select the edit set from per-site confidences.
pub fn edit_set(confidences: &[f64], policy: &SelectionPolicy) -> EditSelection {
    match policy {
        SelectionPolicy::Threshold(tau) => EditSelection::Single(
            confidences
                .iter()
                .enumerate()
                .filter(|(_, s)| **s >= *tau)
                .map(|(i, _)| i)
                .collect(),
        ),
        SelectionPolicy::Top1 => {
            let mut best = 0;
            for (i, s) in confidences.iter().enumerate() {
                if *s > confidences[best] {
                    best = i;
                }
            }
            EditSelection::Single(vec![best])
        }
        SelectionPolicy::Full => EditSelection::Single((0..confidences.len()).collect()),
        SelectionPolicy::Fixed(sites) => EditSelection::Single(sites.clone()),
        SelectionPolicy::RandomScanSingleton => {
            let l = confidences.len();
            EditSelection::Mixture((0..l).map(|i| (vec![i], 1.0 / l as f64)).collect())
        }
    }
}

/// Dense row-stochastic transition matrix of a thresholded-editing chain,
/// together with the configuration that generated it.
#[derive(Debug, Clone)]
pub struct EditKernel {
    vocab_size: usize,
    length: usize,
    rows: Vec<Vec<f64>>,
    policy: SelectionPolicy,
    predictor_desc: String,
    context_id: String,
}

impl EditKernel {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    pub fn policy(&self) -> &SelectionPolicy {
        &self.policy
    }

    pub fn predictor_desc(&self) -> &str {
        &self.predictor_desc
    }

    pub fn context_id(&self) -> &str {
        &self.context_id
    }

    /// Short configuration id for provenance in reports.
    pub fn config_id(&self) -> String {
        format!(
            "{}+{}@{}x{}",
            self.predictor_desc,
            self.policy.describe(),
            self.vocab_size,
            self.length
        )
    }

    /// One chain step applied to a distribution (row vector times matrix).
    pub fn step_distribution(&self, dist: &[f64]) -> Vec<f64> {
        debug_assert_eq!(dist.len(), self.num_states());
        let n = self.num_states();
        let mut out = vec![0.0; n];
        for (s, mass) in dist.iter().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            for (t, p) in self.rows[s].iter().enumerate() {
                if *p != 0.0 {
                    out[t] += mass * p;
                }
            }
        }
        out
    }

    /// Lexicographic decode of a state index.
    pub fn state_of(&self, mut index: usize) -> Vec<usize> {
        let mut state = vec![0usize; self.length];
        for i in (0..self.length).rev() {
            state[i] = index % self.vocab_size;
            index /= self.vocab_size;
        }
        state
    }

    /// Export in the joint-table text format extended with a `rows` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("rows {}\n{} {}\n", self.num_states(), self.vocab_size, self.length);
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Build the dense transition kernel for a (predictor, policy) pair.
///
/// The row of a state `y` places probability `w * prod_{i in S} q_i(y'_i | y)`
/// on every `y'` that agrees with `y` outside `S`, for each weighted edit set
/// `(S, w)` the policy selects at `y`.
pub fn build_kernel(
    predictor: &Predictor,
    policy: &SelectionPolicy,
    context_id: &str,
) -> Result<EditKernel, ChainError> {
    let (vocab, length) = predictor.shape();
    policy.validate(length)?;
    let n_states = checked_cells(vocab, length)
        .map_err(|_| ChainError::StateSpaceTooLarge { states: usize::MAX })?;

    let mut strides = vec![0usize; length];
    let mut stride = 1usize;
    for i in (0..length).rev() {
        strides[i] = stride;
        stride *= vocab;
    }

    let mut rows = Vec::with_capacity(n_states);
    let mut state = vec![0usize; length];
    for index in 0..n_states {
        let mut rem = index;
        for i in (0..length).rev() {
            state[i] = rem % vocab;
            rem /= vocab;
        }
        let dists = predictor.site_distributions(&state);
        let conf: Vec<f64> = dists
            .iter()
            .map(|d| d.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let selection = edit_set(&conf, policy);

        let mut row = vec![0.0; n_states];
        for (set, weight) in selection.weighted_sets() {
            if set.is_empty() {
                row[index] += weight;
                continue;
            }
            // enumerate all completions of the edit set
            let base = index - set.iter().map(|&i| state[i] * strides[i]).sum::<usize>();
            let mut assignment = vec![0usize; set.len()];
            loop {
                let mut target = base;
                let mut prob = weight;
                for (k, &site) in set.iter().enumerate() {
                    target += assignment[k] * strides[site];
                    prob *= dists[site][assignment[k]];
                }
                if prob != 0.0 {
                    row[target] += prob;
                }
                // odometer increment
                let mut k = set.len();
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    assignment[k] += 1;
                    if assignment[k] < vocab {
                        break;
                    }
                    assignment[k] = 0;
                    if k == 0 {
                        k = usize::MAX;
                        break;
                    }
                }
                if k == usize::MAX {
                    break;
                }
            }
        }
        rows.push(row);
    }

    Ok(EditKernel {
        vocab_size: vocab,
        length,
        rows,
        policy: policy.clone(),
        predictor_desc: predictor.describe(),
        context_id: context_id.to_string(),
    })
}

/// The per-site one-step marginal update laws at a state: the resampling
/// distribution where the site is edited, a point mass at the current value
/// where it is frozen, mixed over the policy's weighted edit sets.
pub fn marginal_update_laws(
    predictor: &Predictor,
    policy: &SelectionPolicy,
    state: &[usize],
) -> Vec<Vec<f64>> {
    let (vocab, length) = predictor.shape();
    let dists = predictor.site_distributions(state);
    let conf = confidence(predictor, state);
    let selection = edit_set(&conf, policy);
    let mut laws = vec![vec![0.0; vocab]; length];
    for (set, weight) in selection.weighted_sets() {
        for (site, law) in laws.iter_mut().enumerate() {
            if set.contains(&site) {
                for (v, q) in law.iter_mut().zip(&dists[site]) {
                    *v += weight * q;
                }
            } else {
                law[state[site]] += weight;
            }
        }
    }
    laws
}

/// Check that a candidate joint matches the kernel's shape.
pub(crate) fn check_shape(kernel: &EditKernel, candidate: &JointTable) -> Result<(), ChainError> {
    if candidate.vocab_size() != kernel.vocab_size() || candidate.length() != kernel.length() {
        return Err(ChainError::ShapeMismatch(
            candidate.vocab_size(),
            candidate.length(),
            kernel.vocab_size(),
            kernel.length(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{JointTable, ProductFamily};

    fn correlated_bits() -> JointTable {
        JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").unwrap()
    }

    #[test]
    fn threshold_selects_by_inequality() {
        let sel = edit_set(&[0.9, 0.3], &SelectionPolicy::Threshold(0.5));
        assert_eq!(sel.single().unwrap(), &[0]);
    }

    #[test]
    fn zero_threshold_selects_every_site() {
        let sel = edit_set(&[0.2, 0.5, 0.01], &SelectionPolicy::Threshold(0.0));
        assert_eq!(sel.single().unwrap(), &[0, 1, 2]);
    }

    #[test]
    fn top1_breaks_ties_to_lowest_index() {
        let sel = edit_set(&[0.6, 0.6], &SelectionPolicy::Top1);
        assert_eq!(sel.single().unwrap(), &[0]);
    }

    #[test]
    fn random_scan_is_a_uniform_singleton_mixture() {
        let sel = edit_set(&[0.5, 0.5], &SelectionPolicy::RandomScanSingleton);
        match sel {
            EditSelection::Mixture(sets) => {
                assert_eq!(sets, vec![(vec![0], 0.5), (vec![1], 0.5)]);
            }
            EditSelection::Single(_) => panic!("expected mixture"),
        }
    }

    #[test]
    fn full_policy_constant_predictor_gives_rank_one_kernel() {
        let site_dists = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
        let product = ProductFamily::new(site_dists.clone())
            .unwrap()
            .to_joint("p")
            .unwrap();
        let predictor = Predictor::constant(site_dists, "ctx").unwrap();
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        for s in 0..kernel.num_states() {
            for (t, p) in kernel.row(s).iter().enumerate() {
                assert!((p - product.probs()[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_threshold_gives_identity_kernel() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Threshold(1.5), "ctx").unwrap();
        for s in 0..kernel.num_states() {
            for (t, p) in kernel.row(s).iter().enumerate() {
                let expected = if s == t { 1.0 } else { 0.0 };
                assert_eq!(*p, expected);
            }
        }
    }

    #[test]
    fn random_scan_gibbs_kernel_matches_hand_mixed_single_site_moves() {
        // Mix the two single-site resampling kernels by hand and compare.
        let joint = correlated_bits();
        let predictor = Predictor::full_conditional(joint.clone());
        let kernel = build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();

        // conditional of `site` given the other site, straight from the table
        let cond = |site: usize, state: &[usize]| -> Vec<f64> {
            let mut dist = vec![0.0; 2];
            for (v, slot) in dist.iter_mut().enumerate() {
                let mut s = state.to_vec();
                s[site] = v;
                *slot = joint.probs()[joint.index_of(&s)];
            }
            let sum: f64 = dist.iter().sum();
            dist.into_iter().map(|p| p / sum).collect()
        };

        for s_idx in 0..4 {
            let state = kernel.state_of(s_idx);
            let mut expected = vec![0.0; 4];
            for site in 0..2 {
                let dist = cond(site, &state);
                for v in 0..2 {
                    let mut target = state.clone();
                    target[site] = v;
                    expected[joint.index_of(&target)] += 0.5 * dist[v];
                }
            }
            for t in 0..4 {
                assert!(
                    (kernel.row(s_idx)[t] - expected[t]).abs() < 1e-12,
                    "row {s_idx} col {t}: {} vs {}",
                    kernel.row(s_idx)[t],
                    expected[t]
                );
            }
        }
    }

    #[test]
    fn rows_are_stochastic_and_respect_frozen_coordinates() {
        let joint = correlated_bits();
        let predictor = Predictor::full_conditional(joint);
        let policy = SelectionPolicy::Threshold(0.85);
        let kernel = build_kernel(&predictor, &policy, "ctx").unwrap();
        for s in 0..kernel.num_states() {
            let sum: f64 = kernel.row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
            // mass only on states that agree with s off the edit set
            let state = kernel.state_of(s);
            let conf = confidence(&predictor, &state);
            let set = edit_set(&conf, &policy);
            let set = set.single().unwrap();
            for (t, p) in kernel.row(s).iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let target = kernel.state_of(t);
                for i in 0..2 {
                    if !set.contains(&i) {
                        assert_eq!(state[i], target[i], "frozen coordinate moved");
                    }
                }
            }
        }
    }

    #[test]
    fn fixed_policy_validates_site_range() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let err = build_kernel(&predictor, &SelectionPolicy::fixed(vec![5]), "ctx").unwrap_err();
        assert!(matches!(err, ChainError::FixedSiteOutOfRange { site: 5, .. }));
    }

    #[test]
    fn marginal_update_law_mixes_freeze_and_edit() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let laws = marginal_update_laws(&predictor, &SelectionPolicy::RandomScanSingleton, &[0, 0]);
        // site 0: half resampled from (0.9, 0.1), half frozen at 0
        assert!((laws[0][0] - (0.5 * 0.9 + 0.5)).abs() < 1e-12);
        assert!((laws[0][1] - 0.5 * 0.1).abs() < 1e-12);
    }
}
