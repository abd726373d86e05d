//! Chain analysis: influence coefficients, stationary distributions,
//! contraction and mixing checks, and invariance certification.

use serde::Serialize;

use crate::chain::kernel::{check_shape, marginal_update_laws, EditKernel, SelectionPolicy};
use crate::chain::predictor::Predictor;
use crate::chain::ChainError;
use crate::dist::{checked_cells, JointTable};
use crate::util::{geometric_rounds, rng_for, total_variation};

use rand::Rng;

/// Default tolerance for power iteration.
pub const DEFAULT_POWER_TOLERANCE: f64 = 1e-12;
/// Default iteration cap for power iteration.
pub const DEFAULT_ITERATION_CAP: usize = 100_000;

/// Worst-case influence coefficients `influence[i][j]`: how much flipping
/// site `j` of the conditioning state can move the one-step marginal update
/// law at site `i`, in total variation, maximized over all state pairs that
/// agree everywhere except `j`. The diagonal is zero by convention; `alpha`
/// is the largest off-diagonal row sum.
#[derive(Debug, Clone, Serialize)]
pub struct DobrushinReport {
    pub influence: Vec<Vec<f64>>,
    pub alpha: f64,
}

/// Exhaustive influence-coefficient computation.
///
/// Every pair of states differing at exactly one site is enumerated; nothing
/// is sampled, so the coefficients are exact up to floating point.
pub fn dobrushin(
    predictor: &Predictor,
    policy: &SelectionPolicy,
) -> Result<DobrushinReport, ChainError> {
    let (vocab, length) = predictor.shape();
    let n_states = checked_cells(vocab, length)
        .map_err(|_| ChainError::StateSpaceTooLarge { states: usize::MAX })?;

    // Precompute the update laws once per state; the pair loop then only
    // reads them.
    let mut laws: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_states);
    let mut state = vec![0usize; length];
    for index in 0..n_states {
        let mut rem = index;
        for i in (0..length).rev() {
            state[i] = rem % vocab;
            rem /= vocab;
        }
        laws.push(marginal_update_laws(predictor, policy, &state));
    }

    let mut strides = vec![0usize; length];
    let mut stride = 1usize;
    for i in (0..length).rev() {
        strides[i] = stride;
        stride *= vocab;
    }

    let mut influence = vec![vec![0.0; length]; length];
    for j in 0..length {
        for index in 0..n_states {
            let digit = (index / strides[j]) % vocab;
            for other in digit + 1..vocab {
                let partner = index + (other - digit) * strides[j];
                for i in 0..length {
                    if i == j {
                        continue;
                    }
                    let tv = total_variation(&laws[index][i], &laws[partner][i]);
                    if tv > influence[i][j] {
                        influence[i][j] = tv;
                    }
                }
            }
        }
    }

    let alpha = influence
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0, f64::max);
    Ok(DobrushinReport { influence, alpha })
}

/// Result of the power-iteration fixed-point search.
#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub distribution: JointTable,
    pub iterations: usize,
    /// Whether a second run from a random start agreed within 10x tolerance.
    /// Reducible kernels (the identity, frozen coordinates) are legal inputs,
    /// so uniqueness is certified empirically rather than assumed.
    pub unique: bool,
    pub warning: Option<String>,
}

fn power_iterate(
    kernel: &EditKernel,
    start: Vec<f64>,
    tolerance: f64,
    cap: usize,
) -> Result<(Vec<f64>, usize), ChainError> {
    let mut current = start;
    for iteration in 1..=cap {
        let next = kernel.step_distribution(&current);
        let gap = total_variation(&next, &current);
        current = next;
        if gap < tolerance {
            return Ok((current, iteration));
        }
    }
    let next = kernel.step_distribution(&current);
    Err(ChainError::NoConvergence {
        iterations: cap,
        last_gap: total_variation(&next, &current),
    })
}

/// Fixed point by power iteration from the uniform distribution, with a
/// dual-start agreement check from a seeded random distribution.
pub fn stationary(kernel: &EditKernel, tolerance: f64) -> Result<StationaryResult, ChainError> {
    let n = kernel.num_states();
    let uniform = vec![1.0 / n as f64; n];
    let (from_uniform, iterations) =
        power_iterate(kernel, uniform, tolerance, DEFAULT_ITERATION_CAP)?;

    let mut rng = rng_for(0x5EED, n as u64);
    let mut random_start: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = random_start.iter().sum();
    for p in &mut random_start {
        *p /= sum;
    }
    let (from_random, _) = power_iterate(kernel, random_start, tolerance, DEFAULT_ITERATION_CAP)?;

    let disagreement = total_variation(&from_uniform, &from_random);
    let unique = disagreement <= 10.0 * tolerance;
    let warning = if unique {
        None
    } else {
        Some(format!(
            "dual-start fixed points disagree by {disagreement:e} TV; stationary distribution may not be unique"
        ))
    };

    // final defensive renormalization against drift accumulated over many steps
    let total: f64 = from_uniform.iter().sum();
    let probs: Vec<f64> = from_uniform.iter().map(|p| p / total).collect();
    Ok(StationaryResult {
        distribution: JointTable::new(
            kernel.vocab_size(),
            kernel.length(),
            probs,
            kernel.context_id().to_string(),
        )?,
        iterations,
        unique,
        warning,
    })
}

/// Per-initial, per-step record of the geometric-contraction inequality
/// `TV(Q_k, Q_inf) <= alpha^k TV(Q_0, Q_inf) + 1e-9`.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub alpha: f64,
    pub k_max: usize,
    pub holds: bool,
    /// Largest observed `TV(Q_k, Q_inf) / (alpha^k TV(Q_0, Q_inf))`.
    pub worst_ratio: f64,
    pub violations: usize,
    pub stationary_unique: bool,
}

/// Outcome of [`contraction_check`]; the check is skipped (not failed) when
/// `alpha >= 1`, where the geometric bound claims nothing.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ContractionOutcome {
    Skipped { alpha: f64 },
    Checked(ContractionReport),
}

const CONTRACTION_SLACK: f64 = 1e-9;

pub fn contraction_check(
    kernel: &EditKernel,
    alpha: f64,
    initials: &[Vec<f64>],
    k_max: usize,
) -> Result<ContractionOutcome, ChainError> {
    if alpha >= 1.0 {
        return Ok(ContractionOutcome::Skipped { alpha });
    }
    let st = stationary(kernel, DEFAULT_POWER_TOLERANCE)?;
    let q_inf = st.distribution.probs();

    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0usize;
    for q0 in initials {
        let d0 = total_variation(q0, q_inf);
        let mut q = q0.clone();
        let mut alpha_k = 1.0;
        for _k in 1..=k_max {
            q = kernel.step_distribution(&q);
            alpha_k *= alpha;
            let dk = total_variation(&q, q_inf);
            let bound = alpha_k * d0;
            if dk > bound + CONTRACTION_SLACK {
                violations += 1;
            }
            // the ratio is only meaningful while the distance is above the
            // additive slack; beyond that both sides sit in rounding noise
            if dk > CONTRACTION_SLACK {
                if bound > 0.0 {
                    let ratio = dk / bound;
                    if ratio > worst_ratio {
                        worst_ratio = ratio;
                    }
                } else {
                    worst_ratio = f64::INFINITY;
                }
            }
        }
    }
    Ok(ContractionOutcome::Checked(ContractionReport {
        alpha,
        k_max,
        holds: violations == 0,
        worst_ratio,
        violations,
        stationary_unique: st.unique,
    }))
}

/// Empirical and geometric mixing times to within `delta` total variation,
/// worst case over all point-mass initial states.
#[derive(Debug, Clone, Serialize)]
pub struct MixingReport {
    pub delta: f64,
    /// Smallest `k` with worst-case `TV(Q_k, Q_inf) <= delta`; `bound + 1`
    /// when even the bound's horizon did not reach `delta`.
    pub empirical: usize,
    /// `ceil(ln(D0/delta) / ln(1/alpha))` with `D0` the largest initial TV.
    pub bound: usize,
    pub d0: f64,
    pub within_bound: bool,
}

/// Outcome of [`mixing_time`]; skipped when `alpha >= 1`.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MixingOutcome {
    Skipped { alpha: f64 },
    Checked(MixingReport),
}

pub fn mixing_time(
    kernel: &EditKernel,
    alpha: f64,
    delta: f64,
) -> Result<MixingOutcome, ChainError> {
    if !(0.0..1.0).contains(&alpha) {
        return Ok(MixingOutcome::Skipped { alpha });
    }
    let st = stationary(kernel, DEFAULT_POWER_TOLERANCE)?;
    let q_inf = st.distribution.probs();
    let n = kernel.num_states();

    // evolve every point-mass initial at once: row s of `fronts` is the law
    // of the chain started at state s
    let mut fronts: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            row[s] = 1.0;
            row
        })
        .collect();
    let worst = |fronts: &[Vec<f64>]| -> f64 {
        fronts
            .iter()
            .map(|f| total_variation(f, q_inf))
            .fold(0.0, f64::max)
    };

    let d0 = worst(&fronts);
    if d0 <= delta {
        return Ok(MixingOutcome::Checked(MixingReport {
            delta,
            empirical: 0,
            bound: 0,
            d0,
            within_bound: true,
        }));
    }
    let bound = geometric_rounds(alpha, d0, delta) as usize;
    let mut empirical = bound + 1;
    for k in 1..=bound {
        for front in fronts.iter_mut() {
            *front = kernel.step_distribution(front);
        }
        if worst(&fronts) <= delta {
            empirical = k;
            break;
        }
    }
    Ok(MixingOutcome::Checked(MixingReport {
        delta,
        empirical,
        bound,
        d0,
        within_bound: empirical <= bound,
    }))
}

/// Invariance defect of a candidate distribution: `TV(candidate * K, candidate)`.
/// Zero (to tolerance) certifies that the kernel leaves the candidate fixed.
pub fn invariance_check(kernel: &EditKernel, candidate: &JointTable) -> Result<f64, ChainError> {
    check_shape(kernel, candidate)?;
    let stepped = kernel.step_distribution(candidate.probs());
    Ok(total_variation(&stepped, candidate.probs()))
}

/// The JSON verification record emitted per analyzed chain configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ChainVerificationReport {
    pub config_id: String,
    pub alpha: f64,
    pub empirical_mixing: Option<usize>,
    pub bound_mixing: Option<usize>,
    pub worst_contraction_ratio: Option<f64>,
    pub invariance_defect: f64,
}

/// Export an `L x L` influence matrix in the text matrix format.
pub fn influence_to_text(report: &DobrushinReport) -> String {
    let l = report.influence.len();
    let mut out = format!("rows {l}\ncols {l}\n");
    for row in &report.influence {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::kernel::build_kernel;
    use crate::dist::ProductFamily;

    fn correlated_bits() -> JointTable {
        JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").unwrap()
    }

    #[test]
    fn constant_predictor_has_zero_influence_under_any_deterministic_policy() {
        let predictor = Predictor::constant(vec![vec![0.7, 0.3], vec![0.4, 0.6]], "c").unwrap();
        for policy in [
            SelectionPolicy::Full,
            SelectionPolicy::Top1,
            SelectionPolicy::Threshold(0.5),
            SelectionPolicy::fixed(vec![1]),
        ] {
            let report = dobrushin(&predictor, &policy).unwrap();
            assert_eq!(report.alpha, 0.0, "policy {}", policy.describe());
            for row in &report.influence {
                assert!(row.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn independent_joint_full_conditionals_have_zero_influence() {
        let joint = ProductFamily::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]])
            .unwrap()
            .to_joint("ind")
            .unwrap();
        let predictor = Predictor::full_conditional(joint);
        let report = dobrushin(&predictor, &SelectionPolicy::Full).unwrap();
        assert!(report.alpha < 1e-12);
    }

    #[test]
    fn correlated_bits_full_policy_influence_is_exactly_point_eight() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let report = dobrushin(&predictor, &SelectionPolicy::Full).unwrap();
        assert_eq!(report.influence[0][1], 0.8);
        assert_eq!(report.influence[1][0], 0.8);
        assert_eq!(report.influence[0][0], 0.0);
        assert_eq!(report.alpha, 0.8);
    }

    #[test]
    fn identity_kernel_stationary_warns_about_non_uniqueness() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Threshold(2.0), "ctx").unwrap();
        let st = stationary(&kernel, 1e-12).unwrap();
        assert!(!st.unique);
        assert!(st.warning.is_some());
        // the uniform start is returned unchanged
        for p in st.distribution.probs() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_kernel_reaches_the_product_in_one_step() {
        let dists = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
        let product = ProductFamily::new(dists.clone()).unwrap().to_joint("p").unwrap();
        let predictor = Predictor::constant(dists, "c").unwrap();
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        let st = stationary(&kernel, 1e-12).unwrap();
        assert!(st.unique);
        assert!(total_variation(st.distribution.probs(), product.probs()) < 1e-12);
    }

    #[test]
    fn random_scan_gibbs_recovers_the_joint() {
        let joint = correlated_bits();
        let predictor = Predictor::full_conditional(joint.clone());
        let kernel = build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();
        let st = stationary(&kernel, 1e-12).unwrap();
        assert!(st.unique);
        assert!(total_variation(st.distribution.probs(), joint.probs()) < 1e-8);
    }

    #[test]
    fn contraction_from_the_stationary_distribution_is_trivial() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        let st = stationary(&kernel, 1e-12).unwrap();
        let outcome =
            contraction_check(&kernel, 0.8, &[st.distribution.probs().to_vec()], 10).unwrap();
        match outcome {
            ContractionOutcome::Checked(report) => {
                assert!(report.holds);
            }
            ContractionOutcome::Skipped { .. } => panic!("alpha < 1 must be checked"),
        }
    }

    #[test]
    fn contraction_skips_when_alpha_is_one_or_more() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        let outcome = contraction_check(&kernel, 1.0, &[vec![1.0, 0.0, 0.0, 0.0]], 5).unwrap();
        assert!(matches!(outcome, ContractionOutcome::Skipped { .. }));
    }

    #[test]
    fn synchronous_correlated_bits_chain_contracts_at_its_alpha() {
        // the worked instance: alpha = 0.8, point-mass initials, k <= 50
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        let initials: Vec<Vec<f64>> = (0..4)
            .map(|s| {
                let mut d = vec![0.0; 4];
                d[s] = 1.0;
                d
            })
            .collect();
        match contraction_check(&kernel, 0.8, &initials, 50).unwrap() {
            ContractionOutcome::Checked(report) => {
                assert!(report.holds, "worst ratio {}", report.worst_ratio);
                assert!(report.worst_ratio <= 1.0 + 1e-9);
            }
            ContractionOutcome::Skipped { .. } => panic!("must be checked"),
        }
    }

    #[test]
    fn random_scan_freezing_defeats_the_off_diagonal_alpha_bound() {
        // Random-scan on the correlated-bit joint: the off-diagonal influence
        // sum is 0.4, but a frozen disagreeing coordinate carries weight that
        // no off-diagonal coefficient sees. Exact arithmetic: from the point
        // mass at (0,0), TV(Q_1, Q_inf) = 0.45 > 0.4 * 0.55. The faithful
        // check therefore reports violations for this configuration.
        let joint = correlated_bits();
        let predictor = Predictor::full_conditional(joint.clone());
        let kernel = build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();
        let report = dobrushin(&predictor, &SelectionPolicy::RandomScanSingleton).unwrap();
        assert!((report.alpha - 0.4).abs() < 1e-12);
        let q0 = vec![1.0, 0.0, 0.0, 0.0];
        match contraction_check(&kernel, report.alpha, &[q0], 3).unwrap() {
            ContractionOutcome::Checked(r) => {
                assert!(!r.holds);
                assert!(r.worst_ratio > 1.0);
            }
            ContractionOutcome::Skipped { .. } => panic!("alpha 0.4 must be checked"),
        }
    }

    #[test]
    fn random_scan_mixing_exceeds_the_off_diagonal_bound() {
        // same root cause as the contraction counterexample: the true decay
        // rate of the random-scan chain is governed by the freeze
        // probability, not by alpha = 0.4, so the geometric horizon derived
        // from alpha is too short and the faithful check reports it
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel =
            build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();
        let report = dobrushin(&predictor, &SelectionPolicy::RandomScanSingleton).unwrap();
        match mixing_time(&kernel, report.alpha, 1e-3).unwrap() {
            MixingOutcome::Checked(m) => {
                assert!(!m.within_bound, "{m:?}");
                assert!(m.empirical > m.bound);
            }
            MixingOutcome::Skipped { .. } => panic!("alpha 0.4 must be checked"),
        }
    }

    #[test]
    fn kernel_and_influence_text_exports_have_row_headers() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        let text = kernel.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("rows 4"));
        assert_eq!(lines.next(), Some("2 2"));
        assert_eq!(text.lines().count(), 2 + 4);
        // each exported row parses back to a stochastic vector
        for line in text.lines().skip(2) {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            assert_eq!(row.len(), 4);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        let report = dobrushin(&predictor, &SelectionPolicy::Full).unwrap();
        let text = influence_to_text(&report);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("rows 2"));
        assert_eq!(lines.next(), Some("cols 2"));
    }

    #[test]
    fn mixing_time_zero_when_already_mixed() {
        let dists = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let predictor = Predictor::constant(dists, "c").unwrap();
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        // delta = 1 exceeds any initial TV distance
        match mixing_time(&kernel, 0.5, 1.0).unwrap() {
            MixingOutcome::Checked(report) => {
                assert_eq!(report.empirical, 0);
                assert_eq!(report.bound, 0);
            }
            MixingOutcome::Skipped { .. } => panic!(),
        }
    }

    #[test]
    fn mixing_time_of_synchronous_chain_respects_bound() {
        let predictor = Predictor::full_conditional(correlated_bits());
        let kernel = build_kernel(&predictor, &SelectionPolicy::Full, "ctx").unwrap();
        for delta in [1e-1, 1e-2, 1e-3] {
            match mixing_time(&kernel, 0.8, delta).unwrap() {
                MixingOutcome::Checked(report) => {
                    assert!(report.within_bound, "delta {delta}: {report:?}");
                }
                MixingOutcome::Skipped { .. } => panic!(),
            }
        }
    }

    #[test]
    fn invariance_of_gibbs_chain_on_its_joint() {
        let joint = correlated_bits();
        let predictor = Predictor::full_conditional(joint.clone());
        let kernel = build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();
        assert!(invariance_check(&kernel, &joint).unwrap() < 1e-10);
    }

    #[test]
    fn invariance_of_mean_field_chain_on_independent_joint() {
        let family = ProductFamily::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let joint = family.to_joint("ind").unwrap();
        let predictor = Predictor::mean_field(&joint).unwrap();
        for tau in [0.1, 0.5, 0.75, 0.9] {
            let kernel =
                build_kernel(&predictor, &SelectionPolicy::Threshold(tau), "ctx").unwrap();
            assert!(
                invariance_check(&kernel, &joint).unwrap() < 1e-10,
                "tau {tau}"
            );
        }
    }

    #[test]
    fn perturbed_predictor_breaks_invariance() {
        let joint = correlated_bits();
        let base = Predictor::full_conditional(joint.clone());
        let predictor = Predictor::perturbed(base, 3, 0.4).unwrap();
        let kernel = build_kernel(&predictor, &SelectionPolicy::RandomScanSingleton, "ctx").unwrap();
        let defect = invariance_check(&kernel, &joint).unwrap();
        assert!(defect > 1e-6, "expected a visible defect, got {defect}");
    }
}
