//! The end-to-end property suite behind the `verify-theory` subcommand.
//!
//! Each criterion function checks one verifiable consequence of the theory at
//! a pinned tolerance and returns a pass/fail record with the measured
//! extremes. Oracles are independent routes: pair enumeration for the rank
//! metrics, direct table arithmetic for the information quantities, the
//! counting solvers for puzzle uniqueness.
//!
//! The contraction/mixing criterion runs on chain families where the
//! geometric bound holds exhaustively (the unit tests in `chain::analysis`
//! pin exact counterexamples outside those families — notably the random-scan
//! chain, whose bound violation is re-measured here and attached to the
//! report as a documented counterexample rather than hidden).

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::chain::{
    build_kernel, confidence, contraction_check, dobrushin, edit_set, invariance_check,
    mixing_time, stationary, ChainVerificationReport, ContractionOutcome, EditKernel,
    MixingOutcome, Predictor, SelectionPolicy,
};
use crate::dist::{checked_cells, factorization_gap, kl_dists, JointTable, ProductFamily};
use crate::metrics::{afp, block_trajectories, kendall_tau, Rational};
use crate::puzzles::{
    count_crossmath_solutions, count_sudoku_solutions, generate_crossmath, generate_sudoku,
    solve_any_order, solve_left_to_right, to_decoding_trace,
};
use crate::runtime::{AlphaEntry, RuntimeSpec};
use crate::sim::{decode, random_model, DecodeConfig, DecodeMode};
use crate::util::{mix_seed, rng_for, total_variation};

/// One acceptance criterion outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} {:<22} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

/// A measured violation of the stated geometric bound on a configuration
/// outside the verified families; kept in the report so the finding stays
/// visible.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRecord {
    pub config_id: String,
    pub description: String,
    pub alpha: f64,
    pub observed_tv_k1: f64,
    pub claimed_bound_k1: f64,
    pub violates_bound: bool,
}

/// Full verification report, embedded in `verify_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub version: String,
    pub seed: u64,
    pub all_passed: bool,
    pub criteria: Vec<CriterionResult>,
    pub chain_configurations: Vec<ChainVerificationReport>,
    pub documented_counterexamples: Vec<CounterexampleRecord>,
}

pub(crate) fn random_joint(vocab: usize, length: usize, seed: u64, stream: u64) -> JointTable {
    let mut rng = rng_for(seed, stream);
    let cells = checked_cells(vocab, length).expect("shape under cap");
    let mut probs: Vec<f64> = (0..cells).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    JointTable::new(vocab, length, probs, format!("joint-{stream}")).expect("valid joint")
}

pub(crate) fn random_family(vocab: usize, sites: usize, seed: u64, stream: u64) -> ProductFamily {
    let mut rng = rng_for(seed, stream);
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
    ProductFamily::new(dists).expect("valid family")
}

/// Up to `count` point-mass initials over `n` states (all of them when the
/// space is small), deterministically chosen.
fn point_mass_initials(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let states: Vec<usize> = if n <= count {
        (0..n).collect()
    } else {
        let mut rng = rng_for(seed, 0x901);
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < count {
            chosen.insert(rng.random_range(0..n));
        }
        chosen.into_iter().collect()
    };
    states
        .into_iter()
        .map(|s| {
            let mut d = vec![0.0; n];
            d[s] = 1.0;
            d
        })
        .collect()
}

/// Diagonal-heavy symmetric two-site table: `P(a,a) = strength / V`,
/// off-diagonal mass uniform.
fn symmetric_pair_joint(vocab: usize, strength: f64) -> JointTable {
    let cells = vocab * vocab;
    let diag = strength / vocab as f64;
    let off = (1.0 - strength) / (cells - vocab) as f64;
    let mut probs = vec![off; cells];
    for a in 0..vocab {
        probs[a * vocab + a] = diag;
    }
    JointTable::new(vocab, 2, probs, format!("sym-{vocab}")).expect("valid joint")
}

// --- criterion 1 -----------------------------------------------------------

pub fn criterion_factorization_gap(seed: u64) -> CriterionResult {
    let shapes = [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3)];
    let mut max_residual: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut passed = true;
    for i in 0..1000u64 {
        let (v, l) = shapes[(i % shapes.len() as u64) as usize];
        let joint = random_joint(v, l, seed, mix_seed(1, i));
        let family = random_family(v, l, seed, mix_seed(2, i));
        let report = factorization_gap(&joint, &family).expect("compatible shapes");
        let residual = report.residual.expect("full support").abs();
        let margin = report.kl_joint.expect_finite() - report.tc;
        max_residual = max_residual.max(residual);
        min_margin = min_margin.min(margin);
        if residual > 1e-10 || margin < -1e-12 {
            passed = false;
        }
    }
    CriterionResult {
        id: 1,
        name: "factorization-gap",
        passed,
        details: format!(
            "1000 joints: max |KL - TC - sum KL_i| = {max_residual:.3e}, min KL - TC = {min_margin:.3e}"
        ),
    }
}

// --- criterion 2 -----------------------------------------------------------

fn afp_oracle(steps: &[u64]) -> (u64, u64) {
    let distinct: std::collections::BTreeSet<u64> = steps.iter().copied().collect();
    (steps.len() as u64, distinct.len() as u64)
}

fn tau_oracle(steps: &[u64]) -> f64 {
    let n = steps.len();
    let (mut concordant, mut discordant) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            if steps[i] < steps[j] {
                concordant += 1;
            } else if steps[i] > steps[j] {
                discordant += 1;
            }
        }
    }
    (concordant as f64 - discordant as f64) / ((n * (n - 1) / 2) as f64)
}

pub fn criterion_metric_exactness(seed: u64) -> CriterionResult {
    let mut rng = rng_for(seed, 0x3E7);
    let mut worst_tau_gap: f64 = 0.0;
    let mut passed = true;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=50usize);
        let steps: Vec<u64> = (0..n).map(|_| rng.random_range(1..=n as u64)).collect();
        let (num, den) = afp_oracle(&steps);
        if afp(&steps).expect("non-empty") != Rational::new(num, den) {
            passed = false;
        }
        let gap = (kendall_tau(&steps).expect("n >= 2") - tau_oracle(&steps)).abs();
        worst_tau_gap = worst_tau_gap.max(gap);
        if gap > 1e-12 {
            passed = false;
        }
        // fixed points on the strictly increasing variant
        let increasing: Vec<u64> = (1..=n as u64).collect();
        if afp(&increasing).expect("non-empty") != Rational::new(1, 1)
            || kendall_tau(&increasing).expect("n >= 2") != 1.0
        {
            passed = false;
        }
    }
    CriterionResult {
        id: 2,
        name: "metric-exactness",
        passed,
        details: format!("10000 step lists (n <= 50): worst |tau - oracle| = {worst_tau_gap:.3e}"),
    }
}

// --- criterion 3 -----------------------------------------------------------

fn sample_predictor(vocab: usize, length: usize, seed: u64, stream: u64, which: u64) -> Predictor {
    match which % 4 {
        0 => Predictor::full_conditional(random_joint(vocab, length, seed, stream)),
        1 => Predictor::mean_field(&random_joint(vocab, length, seed, stream)).expect("marginals"),
        2 => Predictor::constant(
            random_family(vocab, length, seed, stream).site_dists().to_vec(),
            "const",
        )
        .expect("valid dists"),
        _ => Predictor::perturbed(
            Predictor::mean_field(&random_joint(vocab, length, seed, stream)).expect("marginals"),
            mix_seed(seed, stream),
            0.35,
        )
        .expect("magnitude in range"),
    }
}

fn sample_policy(length: usize, seed: u64, stream: u64) -> SelectionPolicy {
    let mut rng = rng_for(seed, stream);
    match rng.random_range(0..5u32) {
        0 => SelectionPolicy::Threshold(rng.random_range(0.0..1.0)),
        1 => SelectionPolicy::Top1,
        2 => SelectionPolicy::Full,
        3 => {
            let count = rng.random_range(1..=length);
            let mut sites: Vec<usize> = (0..length).collect();
            for i in 0..count {
                let j = rng.random_range(i..length);
                sites.swap(i, j);
            }
            SelectionPolicy::fixed(sites[..count].to_vec())
        }
        _ => SelectionPolicy::RandomScanSingleton,
    }
}

/// In-slice mass of one kernel row: probability on states that agree with the
/// source outside some selected edit set. Everything else is leakage.
fn in_slice_mass(
    kernel: &EditKernel,
    predictor: &Predictor,
    policy: &SelectionPolicy,
    state_idx: usize,
) -> (f64, f64) {
    let vocab = kernel.vocab_size();
    let length = kernel.length();
    let mut strides = vec![0usize; length];
    let mut stride = 1;
    for s in (0..length).rev() {
        strides[s] = stride;
        stride *= vocab;
    }
    let row = kernel.row(state_idx);
    let row_sum: f64 = row.iter().sum();
    let state = kernel.state_of(state_idx);
    let selection = edit_set(&confidence(predictor, &state), policy);
    // union of the allowed slices, via a visited mask to avoid double counts
    let mut seen = vec![false; row.len()];
    let mut in_slice = 0.0;
    for (set, _weight) in selection.weighted_sets() {
        let base = state_idx - set.iter().map(|&s| state[s] * strides[s]).sum::<usize>();
        if set.is_empty() {
            if !seen[state_idx] {
                seen[state_idx] = true;
                in_slice += row[state_idx];
            }
            continue;
        }
        let mut assignment = vec![0usize; set.len()];
        loop {
            let target: usize = base
                + set
                    .iter()
                    .zip(&assignment)
                    .map(|(&s, &a)| a * strides[s])
                    .sum::<usize>();
            if !seen[target] {
                seen[target] = true;
                in_slice += row[target];
            }
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
    (row_sum, row_sum - in_slice)
}

pub fn criterion_kernel_soundness(seed: u64) -> CriterionResult {
    let shapes: &[(usize, usize)] = &[
        (2, 2),
        (2, 3),
        (2, 4),
        (2, 5),
        (2, 6),
        (2, 8),
        (2, 10),
        (2, 12),
        (3, 2),
        (3, 3),
        (3, 4),
        (3, 5),
        (3, 7),
        (4, 2),
        (4, 3),
        (4, 4),
        (4, 6),
        (5, 3),
        (6, 2),
        (6, 4),
        (8, 3),
        (16, 2),
        (16, 3),
        (64, 2),
    ];
    let mut worst_row_gap: f64 = 0.0;
    let mut worst_leak: f64 = 0.0;
    let mut passed = true;
    for i in 0..100u64 {
        let (vocab, length) = shapes[(i % shapes.len() as u64) as usize];
        let n_states = checked_cells(vocab, length).expect("under cap");
        debug_assert!(n_states <= 4096);
        let predictor = sample_predictor(vocab, length, seed, mix_seed(3, i), i);
        let policy = sample_policy(length, seed, mix_seed(4, i));
        let kernel = build_kernel(&predictor, &policy, "soundness").expect("buildable");
        for state_idx in 0..n_states {
            let (row_sum, leak) = in_slice_mass(&kernel, &predictor, &policy, state_idx);
            let gap = (row_sum - 1.0).abs();
            worst_row_gap = worst_row_gap.max(gap);
            worst_leak = worst_leak.max(leak);
            if gap > 1e-10 || leak > 1e-10 {
                passed = false;
            }
        }
    }
    CriterionResult {
        id: 3,
        name: "kernel-soundness",
        passed,
        details: format!(
            "100 kernels (V^L <= 4096): worst |row sum - 1| = {worst_row_gap:.3e}, worst off-slice mass = {worst_leak:.3e}"
        ),
    }
}

// --- criterion 4 -----------------------------------------------------------

struct ChainProbe {
    config_id: String,
    kernel: EditKernel,
    alpha: f64,
    reference: Option<JointTable>,
}

fn contraction_families(seed: u64) -> Vec<ChainProbe> {
    let mut probes = Vec::new();

    // the worked correlated-bit instance
    let worked = JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").expect("table");
    let predictor = Predictor::full_conditional(worked.clone());
    let report = dobrushin(&predictor, &SelectionPolicy::Full).expect("enumerable");
    probes.push(ChainProbe {
        config_id: "worked:full_conditional+full@2x2".to_string(),
        kernel: build_kernel(&predictor, &SelectionPolicy::Full, "corr").expect("buildable"),
        alpha: report.alpha,
        reference: Some(worked),
    });

    // symmetric two-site pairs across vocab sizes and seeded strengths
    let mut rng = rng_for(seed, 0xC047);
    for vocab in [2usize, 3] {
        for k in 0..3 {
            let strength = rng.random_range(0.40..0.97);
            let joint = symmetric_pair_joint(vocab, strength);
            let predictor = Predictor::full_conditional(joint.clone());
            let report = dobrushin(&predictor, &SelectionPolicy::Full).expect("enumerable");
            probes.push(ChainProbe {
                config_id: format!("symmetric-pair:v{vocab}-{k}"),
                kernel: build_kernel(&predictor, &SelectionPolicy::Full, joint.context_id())
                    .expect("buildable"),
                alpha: report.alpha,
                reference: Some(joint),
            });
        }
    }

    // rank-one chains: constant predictors under the full policy
    for (i, (vocab, length)) in [(2usize, 5usize), (3, 3), (4, 2), (2, 8)].iter().enumerate() {
        let family = random_family(*vocab, *length, seed, mix_seed(5, i as u64));
        let predictor =
            Predictor::constant(family.site_dists().to_vec(), "const").expect("valid dists");
        let report = dobrushin(&predictor, &SelectionPolicy::Full).expect("enumerable");
        probes.push(ChainProbe {
            config_id: format!("rank-one:constant+full@{vocab}x{length}"),
            kernel: build_kernel(&predictor, &SelectionPolicy::Full, "const").expect("buildable"),
            alpha: report.alpha,
            reference: Some(family.to_joint("const").expect("under cap")),
        });
    }

    // mean-field predictors with an always-edit threshold (tau = 1/V)
    for (i, (vocab, length)) in [(2usize, 3usize), (3, 2), (2, 4), (4, 2)].iter().enumerate() {
        let joint = random_joint(*vocab, *length, seed, mix_seed(6, i as u64));
        let predictor = Predictor::mean_field(&joint).expect("marginals");
        let policy = SelectionPolicy::Threshold(1.0 / *vocab as f64);
        let report = dobrushin(&predictor, &policy).expect("enumerable");
        probes.push(ChainProbe {
            config_id: format!("mean-field:threshold(1/V)@{vocab}x{length}"),
            kernel: build_kernel(&predictor, &policy, joint.context_id()).expect("buildable"),
            alpha: report.alpha,
            reference: Some(
                ProductFamily::from_marginals(&joint)
                    .expect("marginals")
                    .to_joint(joint.context_id())
                    .expect("under cap"),
            ),
        });
    }

    probes
}

pub fn criterion_contraction_mixing(
    seed: u64,
) -> (
    CriterionResult,
    Vec<ChainVerificationReport>,
    Vec<CounterexampleRecord>,
) {
    let mut passed = true;
    let mut details = String::new();
    let mut chain_reports = Vec::new();

    // the exact worked values come first
    let worked = JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").expect("table");
    let worked_report =
        dobrushin(&Predictor::full_conditional(worked), &SelectionPolicy::Full).expect("enumerable");
    let exact = worked_report.influence[0][1] == 0.8
        && worked_report.influence[1][0] == 0.8
        && worked_report.alpha == 0.8;
    if !exact {
        passed = false;
    }
    let _ = write!(
        details,
        "worked instance A01={} A10={} alpha={}; ",
        worked_report.influence[0][1], worked_report.influence[1][0], worked_report.alpha
    );

    let mut checked = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for probe in contraction_families(seed) {
        if probe.alpha >= 1.0 {
            continue;
        }
        checked += 1;
        let n = probe.kernel.num_states();
        let initials = point_mass_initials(n, 20, mix_seed(seed, checked as u64));
        let contraction =
            contraction_check(&probe.kernel, probe.alpha, &initials, 50).expect("analyzable");
        let ratio = match &contraction {
            ContractionOutcome::Checked(r) => {
                if !r.holds {
                    passed = false;
                }
                worst_ratio = worst_ratio.max(r.worst_ratio);
                r.worst_ratio
            }
            ContractionOutcome::Skipped { .. } => unreachable!("alpha < 1"),
        };
        let mut empirical = None;
        let mut bound = None;
        for delta in [1e-1, 1e-2, 1e-3] {
            match mixing_time(&probe.kernel, probe.alpha, delta).expect("analyzable") {
                MixingOutcome::Checked(m) => {
                    if !m.within_bound {
                        passed = false;
                    }
                    if delta == 1e-3 {
                        empirical = Some(m.empirical);
                        bound = Some(m.bound);
                    }
                }
                MixingOutcome::Skipped { .. } => unreachable!("alpha < 1"),
            }
        }
        let invariance_defect = match &probe.reference {
            Some(reference) => invariance_check(&probe.kernel, reference).expect("same shape"),
            None => 0.0,
        };
        chain_reports.push(ChainVerificationReport {
            config_id: probe.config_id,
            alpha: probe.alpha,
            empirical_mixing: empirical,
            bound_mixing: bound,
            worst_contraction_ratio: Some(ratio),
            invariance_defect,
        });
    }
    let _ = write!(
        details,
        "{checked} configurations, k <= 50, deltas 1e-1/1e-2/1e-3, worst contraction ratio {worst_ratio:.6}"
    );

    // documented counterexample: random-scan freezing defeats the
    // off-diagonal coefficient at k = 1
    let joint = JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "corr").expect("table");
    let predictor = Predictor::full_conditional(joint.clone());
    let policy = SelectionPolicy::RandomScanSingleton;
    let report = dobrushin(&predictor, &policy).expect("enumerable");
    let kernel = build_kernel(&predictor, &policy, "corr").expect("buildable");
    let q1 = kernel.step_distribution(&[1.0, 0.0, 0.0, 0.0]);
    let observed = total_variation(&q1, joint.probs());
    let d0 = total_variation(&[1.0, 0.0, 0.0, 0.0], joint.probs());
    let claimed = report.alpha * d0;
    let counterexamples = vec![CounterexampleRecord {
        config_id: kernel.config_id(),
        description: "random-scan singleton editing on the correlated-bit table: a frozen \
                      coordinate carries its own disagreement, which the off-diagonal \
                      influence sum does not see; the geometric TV bound fails at k = 1"
            .to_string(),
        alpha: report.alpha,
        observed_tv_k1: observed,
        claimed_bound_k1: claimed,
        violates_bound: observed > claimed + 1e-9,
    }];

    (
        CriterionResult {
            id: 4,
            name: "contraction-mixing",
            passed,
            details,
        },
        chain_reports,
        counterexamples,
    )
}

// --- criterion 5 -----------------------------------------------------------

pub fn criterion_exact_recovery(seed: u64) -> (CriterionResult, Vec<ChainVerificationReport>) {
    let mut passed = true;
    let mut worst_tv: f64 = 0.0;
    let mut chain_reports = Vec::new();
    let shapes = [(2usize, 2usize), (2, 3), (3, 2), (4, 2), (3, 3)];

    // construction 1: conditionally independent joint + mean-field predictor.
    // thresholds at or below 1/V keep every site edited in every state (a
    // larger threshold can freeze sites permanently and lose uniqueness).
    for i in 0..25u64 {
        let (v, l) = shapes[(i % shapes.len() as u64) as usize];
        let family = random_family(v, l, seed, mix_seed(7, i));
        let joint = family.to_joint("independent").expect("under cap");
        let predictor = Predictor::mean_field(&joint).expect("marginals");
        for tau in [0.02, 1.0 / v as f64] {
            let kernel = build_kernel(&predictor, &SelectionPolicy::Threshold(tau), "recovery")
                .expect("buildable");
            let st = stationary(&kernel, 1e-12).expect("converges");
            let tv = total_variation(st.distribution.probs(), joint.probs());
            worst_tv = worst_tv.max(tv);
            if tv > 1e-8 || !st.unique {
                passed = false;
            }
        }
    }

    // construction 2: random-scan singleton + full conditionals on 50 random
    // joints (single-site edit sets realize the true block conditionals)
    for i in 0..50u64 {
        let (v, l) = shapes[(i % shapes.len() as u64) as usize];
        let joint = random_joint(v, l, seed, mix_seed(8, i));
        let predictor = Predictor::full_conditional(joint.clone());
        let policy = SelectionPolicy::RandomScanSingleton;
        let kernel = build_kernel(&predictor, &policy, joint.context_id()).expect("buildable");
        let st = stationary(&kernel, 1e-12).expect("converges");
        let tv = total_variation(st.distribution.probs(), joint.probs());
        worst_tv = worst_tv.max(tv);
        if tv > 1e-8 || !st.unique {
            passed = false;
        }
        if i < 5 {
            let report = dobrushin(&predictor, &policy).expect("enumerable");
            let defect = invariance_check(&kernel, &joint).expect("same shape");
            chain_reports.push(ChainVerificationReport {
                config_id: format!("recovery:gibbs-{i}@{v}x{l}"),
                alpha: report.alpha,
                empirical_mixing: None,
                bound_mixing: None,
                worst_contraction_ratio: None,
                invariance_defect: defect,
            });
        }
    }

    (
        CriterionResult {
            id: 5,
            name: "exact-recovery",
            passed,
            details: format!(
                "25 mean-field + 50 Gibbs constructions: worst TV(stationary, reference) = {worst_tv:.3e}"
            ),
        },
        chain_reports,
    )
}

// --- criterion 6 -----------------------------------------------------------

pub fn criterion_one_step_gap(seed: u64) -> CriterionResult {
    let shapes = [(2usize, 2usize), (2, 3), (3, 2), (4, 2), (3, 3), (4, 3)];
    let mut worst_gap: f64 = 0.0;
    let mut passed = true;
    for i in 0..100u64 {
        let (v, l) = shapes[(i % shapes.len() as u64) as usize];
        let joint = random_joint(v, l, seed, mix_seed(9, i));
        let predictor = Predictor::mean_field(&joint).expect("marginals");
        let kernel = build_kernel(&predictor, &SelectionPolicy::Threshold(0.0), "one-step")
            .expect("buildable");
        // one step from two different initials lands on the same product law
        let n = kernel.num_states();
        let uniform = vec![1.0 / n as f64; n];
        let mut start = vec![0.0; n];
        start[(mix_seed(seed, i) as usize) % n] = 1.0;
        let one_step = kernel.step_distribution(&uniform);
        let other = kernel.step_distribution(&start);
        if total_variation(&one_step, &other) > 1e-12 {
            passed = false;
        }
        let kl = kl_dists(joint.probs(), &one_step).expect_finite();
        let tc = joint.total_correlation().expect("multi-site");
        let gap = (kl - tc).abs();
        worst_gap = worst_gap.max(gap);
        if gap > 1e-10 {
            passed = false;
        }
    }
    CriterionResult {
        id: 6,
        name: "one-step-mean-field",
        passed,
        details: format!("100 joints: worst |KL(P*, Q1) - TC(P*)| = {worst_gap:.3e}"),
    }
}

// --- criterion 7 -----------------------------------------------------------

pub fn criterion_decoder_schedules(seed: u64) -> CriterionResult {
    let shapes = [
        (2usize, 6usize, 2usize),
        (2, 6, 3),
        (3, 6, 2),
        (2, 8, 4),
        (3, 8, 2),
    ];
    let mut passed = true;
    let mut monotone_checked = 0usize;
    for i in 0..20u64 {
        let (v, l, b) = shapes[(i % shapes.len() as u64) as usize];
        let model = random_model(v, l, b, mix_seed(seed, 0xA000 + i)).expect("valid model");

        let (_, ar) =
            decode(&model, &DecodeConfig::new(DecodeMode::ArBaseline), "ar").expect("decodes");
        let steps = ar.steps();
        if afp(&steps).expect("non-empty") != Rational::new(1, 1)
            || kendall_tau(&steps).expect("n >= 2") != 1.0
        {
            passed = false;
        }

        let (_, aa) =
            decode(&model, &DecodeConfig::new(DecodeMode::AcceptAll), "aa").expect("decodes");
        for traj in block_trajectories(&aa).expect("global scope") {
            if traj.afp != Rational::new(b as u64, 1) {
                passed = false;
            }
        }

        let (_, top1) =
            decode(&model, &DecodeConfig::new(DecodeMode::Top1), "t1").expect("decodes");
        if afp(&top1.steps()).expect("non-empty") != Rational::new(1, 1) {
            passed = false;
        }

        let mut last = f64::INFINITY;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let (_, trace) = decode(&model, &DecodeConfig::new(DecodeMode::Threshold(tau)), "th")
                .expect("decodes");
            let a = afp(&trace.steps()).expect("non-empty").to_f64();
            if a > last + 1e-12 {
                passed = false;
            }
            last = a;
            monotone_checked += 1;
        }
    }
    CriterionResult {
        id: 7,
        name: "decoder-schedules",
        passed,
        details: format!(
            "20 models: ar/top1 AFP = 1, accept-all per-block AFP = B, {monotone_checked} grid points monotone"
        ),
    }
}

// --- criterion 8 -----------------------------------------------------------

pub fn criterion_runtime_model() -> CriterionResult {
    let build = |m0: u64| -> RuntimeSpec {
        let mut spec = RuntimeSpec::new([(1, 1.0), (4, 1.0), (8, 1.0)], m0).expect("valid spec");
        spec.set_alpha(
            1,
            AlphaEntry {
                alpha: 0.5,
                provenance: "worked example".to_string(),
            },
        )
        .expect("alpha in range");
        spec
    };
    let fast_baseline = build(8).no_slowdown(1, 0.01).expect("evaluable");
    let slow_baseline = build(4).no_slowdown(1, 0.01).expect("evaluable");
    let passed = fast_baseline.k_rounds == 7
        && fast_baseline.no_slowdown
        && slow_baseline.k_rounds == 7
        && !slow_baseline.no_slowdown;
    CriterionResult {
        id: 8,
        name: "runtime-model",
        passed,
        details: format!(
            "alpha 0.5, delta 0.01: rounds = {}, m0 = 8 -> no_slowdown {}, m0 = 4 -> no_slowdown {}",
            fast_baseline.k_rounds, fast_baseline.no_slowdown, slow_baseline.no_slowdown
        ),
    }
}

// --- criterion 9 -----------------------------------------------------------

pub fn criterion_puzzles(seed: u64) -> CriterionResult {
    let mut passed = true;
    let mut seq_tau_sum = 0.0;
    let mut seq_tau_count = 0usize;
    let mut wave_afp_sum = 0.0;
    let mut wave_afp_count = 0usize;
    let mut unique_sudoku = 0usize;
    let mut unique_crossmath = 0usize;

    for i in 0..150u64 {
        let target = 24 + ((i * 7) % 32) as usize;
        let generated = match generate_sudoku(mix_seed(seed, 0x51_0000 + i), target) {
            Ok(g) => g,
            Err(_) => {
                passed = false;
                continue;
            }
        };
        if count_sudoku_solutions(&generated.puzzle, 2).unwrap_or(0) == 1 {
            unique_sudoku += 1;
        } else {
            passed = false;
        }
        if !generated.solution.verify_solution() {
            passed = false;
        }

        let l2r = solve_left_to_right(&generated.puzzle);
        let seq = solve_any_order(&generated.puzzle, false);
        let wave = solve_any_order(&generated.puzzle, true);
        match (l2r, seq, wave) {
            (Ok((l2r_vals, l2r_trace)), Ok((seq_vals, seq_trace)), Ok((wave_vals, wave_trace))) => {
                for vals in [&l2r_vals, &seq_vals, &wave_vals] {
                    match generated.puzzle.filled_with(vals) {
                        Ok(full) if full.verify_solution() => {}
                        _ => passed = false,
                    }
                }
                let l2r_steps = to_decoding_trace(&l2r_trace, "l2r").expect("non-empty").steps();
                if kendall_tau(&l2r_steps).expect("n >= 2") != 1.0
                    || afp(&l2r_steps).expect("non-empty") != Rational::new(1, 1)
                {
                    passed = false;
                }
                let seq_steps = to_decoding_trace(&seq_trace, "seq").expect("non-empty").steps();
                seq_tau_sum += kendall_tau(&seq_steps).expect("n >= 2");
                seq_tau_count += 1;
                let wave_steps = to_decoding_trace(&wave_trace, "wave")
                    .expect("non-empty")
                    .steps();
                wave_afp_sum += afp(&wave_steps).expect("non-empty").to_f64();
                wave_afp_count += 1;
            }
            _ => passed = false,
        }
    }

    let operand_bounds = [12i64, 25, 50, 99];
    for i in 0..150u64 {
        let n = operand_bounds[(i % 4) as usize];
        let generated = match generate_crossmath(mix_seed(seed, 0xC2_0000 + i), n) {
            Ok(g) => g,
            Err(_) => {
                passed = false;
                continue;
            }
        };
        if count_crossmath_solutions(&generated.puzzle, 2).unwrap_or(0) == 1 {
            unique_crossmath += 1;
        } else {
            passed = false;
        }
        if !generated.solution.verify_solution() {
            passed = false;
        }
        match solve_left_to_right(&generated.puzzle) {
            Ok((vals, trace)) => {
                match generated.puzzle.filled_with(&vals) {
                    Ok(full) if full.verify_solution() => {}
                    _ => passed = false,
                }
                if trace.entries.len() >= 2 {
                    let steps = to_decoding_trace(&trace, "l2r").expect("non-empty").steps();
                    if kendall_tau(&steps).expect("n >= 2") != 1.0 {
                        passed = false;
                    }
                }
            }
            Err(_) => passed = false,
        }
    }

    let mean_seq_tau = seq_tau_sum / seq_tau_count.max(1) as f64;
    let mean_wave_afp = wave_afp_sum / wave_afp_count.max(1) as f64;
    if mean_seq_tau >= 1.0 || mean_wave_afp <= 1.0 {
        passed = false;
    }
    CriterionResult {
        id: 9,
        name: "puzzles",
        passed,
        details: format!(
            "unique {unique_sudoku}/150 sudoku, {unique_crossmath}/150 cross-math; easiest-first mean tau = {mean_seq_tau:.4}, wave mean AFP = {mean_wave_afp:.4}"
        ),
    }
}

// --- criterion 10 ----------------------------------------------------------

/// Determinism: run a set of subcommands twice with identical configs into
/// the same directory and compare every produced byte.
pub fn criterion_determinism(seed: u64, scratch: &Path) -> CriterionResult {
    let mut passed = true;
    let mut checked_files = 0usize;
    let mut details = String::new();

    let runs: Vec<(&str, Vec<String>)> = {
        let dir = |name: &str| {
            scratch
                .join(name)
                .to_str()
                .expect("utf-8 path")
                .to_string()
        };
        vec![
            (
                "simulate",
                vec![
                    "simulate".into(),
                    "--out-dir".into(),
                    dir("simulate"),
                    "--vocab".into(),
                    "2".into(),
                    "--length".into(),
                    "6".into(),
                    "--block-size".into(),
                    "3".into(),
                    "--mode".into(),
                    "threshold".into(),
                    "--tau".into(),
                    "0.6".into(),
                    "--models".into(),
                    "6".into(),
                    "--seed".into(),
                    seed.to_string(),
                ],
            ),
            (
                "puzzle-sudoku",
                vec![
                    "puzzle".into(),
                    "--kind".into(),
                    "sudoku".into(),
                    "--count".into(),
                    "3".into(),
                    "--out-dir".into(),
                    dir("puzzle-sudoku"),
                    "--seed".into(),
                    seed.to_string(),
                ],
            ),
            (
                "puzzle-crossmath",
                vec![
                    "puzzle".into(),
                    "--kind".into(),
                    "crossmath".into(),
                    "--count".into(),
                    "3".into(),
                    "--out-dir".into(),
                    dir("puzzle-crossmath"),
                    "--seed".into(),
                    seed.to_string(),
                ],
            ),
            (
                "runtime",
                vec![
                    "runtime".into(),
                    "--input".into(),
                    scratch
                        .join("runtime_spec.txt")
                        .to_str()
                        .expect("utf-8 path")
                        .to_string(),
                    "--m".into(),
                    "1".into(),
                    "--delta".into(),
                    "0.01".into(),
                    "--out-dir".into(),
                    dir("runtime"),
                ],
            ),
        ]
    };

    // fixture input for the runtime subcommand
    if std::fs::create_dir_all(scratch).is_err() {
        return CriterionResult {
            id: 10,
            name: "determinism",
            passed: false,
            details: "could not create scratch directory".to_string(),
        };
    }
    let spec_text = "t_step 1 1.0\nt_step 8 1.0\nm0 8\nd0 1.0\nalpha 1 0.5\n";
    if std::fs::write(scratch.join("runtime_spec.txt"), spec_text).is_err() {
        passed = false;
    }

    // metrics needs an input corpus: produce one deterministically first
    let metrics_input = scratch.join("metrics_input.jsonl");
    {
        let model = random_model(2, 6, 3, mix_seed(seed, 0xF00D)).expect("valid model");
        let contexts: Vec<String> = (0..6).map(|i| format!("ctx{i:02}")).collect();
        let corpus = crate::sim::batch_decode(
            &model,
            &DecodeConfig::new(DecodeMode::Threshold(0.6)),
            &contexts,
            seed,
        )
        .expect("decodes");
        crate::trace::write_traces(&metrics_input, &corpus).expect("writable scratch");
    }
    let mut runs = runs;
    runs.push((
        "metrics",
        vec![
            "metrics".into(),
            "--input".into(),
            metrics_input.to_str().expect("utf-8 path").to_string(),
            "--out-dir".into(),
            scratch
                .join("metrics")
                .to_str()
                .expect("utf-8 path")
                .to_string(),
            "--bucket".into(),
            "1-2,3-4".into(),
        ],
    ));

    for (name, args) in &runs {
        let first = crate::cli::execute_for_test(args);
        let snapshot = snapshot_dir(&scratch.join(name));
        let second = crate::cli::execute_for_test(args);
        let resnapshot = snapshot_dir(&scratch.join(name));
        if first != 0 || second != 0 {
            passed = false;
            let _ = write!(details, "{name}: nonzero exit; ");
            continue;
        }
        checked_files += snapshot.len();
        if snapshot != resnapshot || snapshot.is_empty() {
            passed = false;
            let _ = write!(details, "{name}: outputs differ between runs; ");
        }
    }

    let _ = write!(details, "{checked_files} files byte-compared across double runs");
    CriterionResult {
        id: 10,
        name: "determinism",
        passed,
        details,
    }
}

fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let Ok(entries) = std::fs::read_dir(dir) else {
        return files;
    };
    let mut paths: Vec<_> = entries.flatten().map(|e| e.path()).collect();
    paths.sort();
    for path in paths {
        if path.is_file() {
            if let Ok(bytes) = std::fs::read(&path) {
                files.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
            }
        }
    }
    files
}

/// Run the whole suite. `scratch` hosts the determinism double-runs.
pub fn run_all(seed: u64, scratch: &Path) -> VerifyReport {
    let mut criteria = Vec::new();
    let mut chain_configurations = Vec::new();

    criteria.push(criterion_factorization_gap(seed));
    criteria.push(criterion_metric_exactness(seed));
    criteria.push(criterion_kernel_soundness(seed));
    let (c4, mut reports, counterexamples) = criterion_contraction_mixing(seed);
    criteria.push(c4);
    chain_configurations.append(&mut reports);
    let (c5, mut reports) = criterion_exact_recovery(seed);
    criteria.push(c5);
    chain_configurations.append(&mut reports);
    criteria.push(criterion_one_step_gap(seed));
    criteria.push(criterion_decoder_schedules(seed));
    criteria.push(criterion_runtime_model());
    criteria.push(criterion_puzzles(seed));
    criteria.push(criterion_determinism(seed, scratch));

    let all_passed = criteria.iter().all(|c| c.passed);
    VerifyReport {
        version: crate::VERSION.to_string(),
        seed,
        all_passed,
        criteria,
        chain_configurations,
        documented_counterexamples: counterexamples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // cheap criteria run in unit tests; the heavy ones live in the
    // integration acceptance suite
    #[test]
    fn runtime_criterion_passes() {
        assert!(criterion_runtime_model().passed);
    }

    #[test]
    fn one_step_gap_criterion_passes() {
        let result = criterion_one_step_gap(crate::DEFAULT_SEED);
        assert!(result.passed, "{}", result.details);
    }

    #[test]
    fn counterexample_is_reported_as_violating() {
        let (_, _, counterexamples) = criterion_contraction_mixing(crate::DEFAULT_SEED);
        assert_eq!(counterexamples.len(), 1);
        assert!(counterexamples[0].violates_bound);
        assert!((counterexamples[0].alpha - 0.4).abs() < 1e-12);
    }
}
