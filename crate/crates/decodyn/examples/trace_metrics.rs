//! Trace ingestion and finalization-order metrics.
//!
//! Builds a tiny JSONL corpus in memory (one left-to-right sample, one
//! parallel sample with per-block step numbering, one repetitive sample),
//! normalizes it, and prints AFP, Kendall's tau, per-block trajectories,
//! grouped aggregates, and the label-order table.
//!
//! Run with: cargo run --example trace_metrics

use decodyn::metrics::{afp, aggregate, block_trajectories, kendall_tau, label_avg_local_step, GroupingSpec};
use decodyn::trace::parse_corpus;

const CORPUS: &str = r#"
{"sample_id":"ar-like","step_scope":"global","domain_tag":"math","correct":true,"tokens":[{"position":0,"finalize_step":1,"block_index":0,"label":"NUM"},{"position":1,"finalize_step":2,"block_index":0,"label":"SYM"},{"position":2,"finalize_step":3,"block_index":0,"label":"NUM"},{"position":3,"finalize_step":4,"block_index":1,"label":"PUNCT"},{"position":4,"finalize_step":5,"block_index":1,"label":"NUM"}]}
{"sample_id":"parallel","step_scope":"per_block","domain_tag":"math","correct":true,"tokens":[{"position":0,"finalize_step":1,"block_index":0,"label":"PUNCT"},{"position":1,"finalize_step":1,"block_index":0,"label":"NUM"},{"position":2,"finalize_step":2,"block_index":0,"label":"ADJ"},{"position":3,"finalize_step":1,"block_index":1,"label":"PUNCT"},{"position":4,"finalize_step":1,"block_index":1,"label":"NUM"}]}
{"sample_id":"looping","step_scope":"global","domain_tag":"math","correct":false,"repetitive":true,"tokens":[{"position":0,"finalize_step":1,"block_index":0},{"position":1,"finalize_step":1,"block_index":0},{"position":2,"finalize_step":1,"block_index":0},{"position":3,"finalize_step":1,"block_index":0}]}
"#;

fn main() {
    let corpus = parse_corpus(CORPUS.trim(), "inline demo").expect("well-formed corpus");
    let corpus = corpus.normalized().expect("normalizable");

    println!("per-trace metrics");
    for trace in &corpus.traces {
        let steps = trace.steps();
        let tau = kendall_tau(&steps)
            .map(|t| format!("{t:.4}"))
            .unwrap_or_else(|_| "undefined".to_string());
        println!(
            "  {:<9} n={} AFP={} tau={}",
            trace.sample_id(),
            trace.len(),
            afp(&steps).expect("non-empty"),
            tau
        );
        for traj in block_trajectories(trace).expect("global scope") {
            println!(
                "    block {}: {} tokens, AFP={}, tau={}",
                traj.block_index,
                traj.token_count,
                traj.afp,
                traj.tau
                    .map(|t| format!("{t:.4}"))
                    .unwrap_or_else(|| "undefined".to_string()),
            );
        }
    }

    println!("\ngrouped aggregates (repetitive samples form their own bucket)");
    let groups = aggregate(&corpus, &GroupingSpec::default()).expect("normalized");
    for g in &groups {
        println!(
            "  domain={:?} correctness={} repetitive={}  mean AFP={:.4} mean tau={:?} count={}",
            g.key.domain_tag, g.key.correctness, g.key.repetitive, g.mean_afp, g.mean_tau, g.count
        );
    }

    println!("\nlabel ordering (mean dense rank of the finalize step inside a block)");
    let table = label_avg_local_step(&corpus).expect("computable");
    for row in &table.rows {
        println!(
            "  {:<6} avg local step {:.3} ({} occurrences)",
            row.label, row.avg_local_step, row.total_count
        );
    }
    println!("  unlabeled tokens skipped: {}", table.skipped_unlabeled);
}
