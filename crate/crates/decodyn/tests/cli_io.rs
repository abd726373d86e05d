//! CLI behavior: exit-code families, error surfacing, file formats.

use std::process::Command;

fn decodyn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_decodyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = decodyn(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("USAGE"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = decodyn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_trace_file_reports_line_number_with_metrics_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    let good = r#"{"sample_id":"a","step_scope":"global","tokens":[{"position":0,"finalize_step":1,"block_index":0}]}"#;
    std::fs::write(&input, format!("{good}\n{{not json\n")).unwrap();
    let out = decodyn(&[
        "metrics",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(10));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr was: {stderr}");
}

#[test]
fn metrics_emits_group_and_label_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("traces.jsonl");
    let line = r#"{"sample_id":"a","step_scope":"global","domain_tag":"math","correct":true,"tokens":[{"position":0,"finalize_step":1,"block_index":0,"label":"NUM"},{"position":1,"finalize_step":1,"block_index":0,"label":"PUNCT"},{"position":2,"finalize_step":2,"block_index":0,"label":"ADJ"}]}"#;
    std::fs::write(&input, format!("{line}\n")).unwrap();
    let out = decodyn(&[
        "metrics",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--bucket",
        "1-2,3-4",
    ]);
    assert!(out.status.success());
    let groups = std::fs::read_to_string(dir.path().join("groups.csv")).unwrap();
    assert!(groups.contains(
        "domain_tag,correctness,repetitive,block_bucket,mean_afp,mean_tau,count,excluded_tau_count"
    ));
    assert!(groups.contains("math,correct,false,1-2,1.5,"));
    let labels = std::fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    // dense ranks: NUM and PUNCT share rank 1, ADJ takes rank 2; sorted ascending
    let data: Vec<&str> = labels.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data, vec!["label,avg_local_step,total_count", "NUM,1,1", "PUNCT,1,1", "ADJ,2,1"]);
}

#[test]
fn simulate_ar_baseline_summary_shows_unit_afp() {
    let dir = tempfile::tempdir().unwrap();
    let out = decodyn(&[
        "simulate",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--mode",
        "ar-baseline",
        "--vocab",
        "2",
        "--length",
        "6",
        "--block-size",
        "3",
        "--models",
        "4",
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["mean_afp"], 1.0);
    assert_eq!(summary["mean_tau"], 1.0);
    // the trace file round-trips through the library parser
    let corpus =
        decodyn::trace::ingest_traces(&dir.path().join("traces.jsonl")).expect("valid JSONL");
    assert_eq!(corpus.len(), 4);
}

#[test]
fn simulate_rejects_bad_mode_with_family_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = decodyn(&[
        "simulate",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--mode",
        "psychic",
    ]);
    assert_eq!(out.status.code(), Some(20));
}

#[test]
fn puzzle_outputs_parse_back_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = decodyn(&[
        "puzzle",
        "--kind",
        "sudoku",
        "--count",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--givens",
        "32",
    ]);
    assert!(out.status.success());
    for i in 0..2 {
        let puzzle = decodyn::puzzles::SudokuGrid::parse(
            &std::fs::read_to_string(dir.path().join(format!("puzzle_{i:03}.txt"))).unwrap(),
        )
        .unwrap();
        let solution = decodyn::puzzles::SudokuGrid::parse(
            &std::fs::read_to_string(dir.path().join(format!("solution_{i:03}.txt"))).unwrap(),
        )
        .unwrap();
        assert!(puzzle.givens() >= 32);
        assert!(solution.verify_solution());
        assert_eq!(
            decodyn::puzzles::count_sudoku_solutions(&puzzle, 2).unwrap(),
            1
        );
    }
    let corpus =
        decodyn::trace::ingest_traces(&dir.path().join("traces.jsonl")).expect("valid JSONL");
    assert_eq!(corpus.len(), 6); // 2 puzzles x 3 strategies
}

#[test]
fn crossmath_puzzle_files_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = decodyn(&[
        "puzzle",
        "--kind",
        "crossmath",
        "--count",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--max-operand",
        "25",
    ]);
    assert!(out.status.success());
    for i in 0..2 {
        let solution = decodyn::puzzles::CrossMathGrid::parse(
            &std::fs::read_to_string(dir.path().join(format!("solution_{i:03}.txt"))).unwrap(),
            25,
        )
        .unwrap();
        assert!(solution.verify_solution());
    }
}

#[test]
fn runtime_report_carries_the_binding_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(&spec, "t_step 1 1.0\nt_step 8 1.0\nm0 8\nd0 1.0\nalpha 1 0.5\n").unwrap();
    let out = decodyn(&[
        "runtime",
        "--input",
        spec.to_str().unwrap(),
        "--m",
        "1",
        "--delta",
        "0.01",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("runtime_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["report"]["k_rounds"], 7);
    assert_eq!(report["report"]["no_slowdown"], true);
    assert!(report["report"]["binding_inequality"]
        .as_str()
        .unwrap()
        .contains("<="));
    assert_eq!(report["version"], decodyn::VERSION);
}

#[test]
fn runtime_m0_flag_overrides_the_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(
        &spec,
        "t_step 1 1.0\nt_step 4 1.0\nt_step 8 1.0\nm0 8\nd0 1.0\nalpha 1 0.5\n",
    )
    .unwrap();
    let out = decodyn(&[
        "runtime",
        "--input",
        spec.to_str().unwrap(),
        "--m",
        "1",
        "--delta",
        "0.01",
        "--m0",
        "4",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("runtime_report.json")).unwrap(),
    )
    .unwrap();
    // 7 rounds against a 4-stage baseline is a slowdown
    assert_eq!(report["report"]["no_slowdown"], false);
    assert_eq!(report["report"]["t_base"], 4.0);
}

#[test]
fn runtime_missing_alpha_exits_with_family_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(&spec, "t_step 1 1.0\nt_step 8 1.0\nm0 8\n").unwrap();
    let out = decodyn(&[
        "runtime",
        "--input",
        spec.to_str().unwrap(),
        "--m",
        "1",
        "--delta",
        "0.01",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(50));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no contraction coefficient"));
}
