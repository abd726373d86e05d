//! The parallelism-vs-editing runtime trade-off, fed by a measured
//! contraction coefficient.
//!
//! Measures alpha on the synchronous correlated-bit chain, bridges it into a
//! runtime spec, and evaluates the no-slowdown comparison against sequential
//! baselines of different depths.
//!
//! Run with: cargo run --example runtime_tradeoff

use decodyn::chain::{dobrushin, Predictor, SelectionPolicy};
use decodyn::dist::JointTable;
use decodyn::runtime::{measured_alpha_bridge, RuntimeSpec};

fn main() {
    let joint = JointTable::new(2, 2, vec![0.45, 0.05, 0.05, 0.45], "correlated-bits")
        .expect("valid table");
    let predictor = Predictor::full_conditional(joint);
    let report = dobrushin(&predictor, &SelectionPolicy::Full).expect("enumerable");
    let entry = measured_alpha_bridge(&report, "full_conditional+full@2x2").expect("alpha < 1");
    println!(
        "measured alpha = {} (provenance: {})",
        entry.alpha, entry.provenance
    );

    // constant per-stage time: the editing rounds compete directly with the
    // baseline's stage count
    for m0 in [4u64, 8, 16, 32] {
        let mut spec =
            RuntimeSpec::new([(1, 1.0), (m0, 1.0)], m0).expect("monotone step times");
        spec.set_alpha(1, entry.clone()).expect("alpha in range");
        for delta in [1e-1, 1e-2, 1e-3] {
            let report = spec.no_slowdown(1, delta).expect("evaluable");
            println!(
                "m0 = {m0:>2}, delta = {delta:>5}: {} rounds, t_edit = {:>4}, t_base = {:>4} -> no slowdown: {}",
                report.k_rounds, report.t_edit, report.t_base, report.no_slowdown
            );
        }
    }

    // cheaper parallel stages shift the break-even point
    let mut spec = RuntimeSpec::new([(1, 0.25), (8, 1.0)], 8).expect("monotone step times");
    spec.set_alpha(1, entry).expect("alpha in range");
    let report = spec.no_slowdown(1, 1e-3).expect("evaluable");
    println!("\nwith t_step(1) = 0.25 t_step(8):");
    println!("  {}", report.binding_inequality);
}
