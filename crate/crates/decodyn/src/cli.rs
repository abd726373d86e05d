//! The `decodyn` binary: five subcommands wiring the library into
//! reproducible experiments. Outputs are files; every report embeds the
//! resolved configuration and the crate version, and identical configurations
//! produce byte-identical outputs.
//!
//! Exit codes: 0 success, 2 usage error, then one family per subcommand —
//! 10 metrics, 20 simulate, 30/31 verify-theory (31 = property failure),
//! 40 puzzle, 50 runtime.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::metrics::{aggregate, label_avg_local_step, GroupingSpec};
use crate::puzzles::{
    count_crossmath_solutions, count_sudoku_solutions, generate_crossmath, generate_sudoku,
    solve_any_order, solve_left_to_right, to_decoding_trace, SolveTrace,
};
use crate::runtime::RuntimeSpec;
use crate::sim::{decode, random_model, ChooseRule, DecodeConfig, DecodeMode};
use crate::trace::{emit_corpus, ingest_traces, TraceCorpus};
use crate::{DEFAULT_SEED, VERSION};

pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

const USAGE: &str = "\
decodyn — desk-scale laboratory for parallel decoding dynamics

USAGE:
  decodyn <subcommand> [flags]

SUBCOMMANDS:
  metrics        compute grouped AFP/tau tables and label-order statistics
                 from a trace file
                 --input FILE --out-dir DIR [--bucket \"1-2,3-4\"]
  simulate       decode random table models under a schedule and emit traces
                 --out-dir DIR [--vocab 3] [--length 8] [--block-size 4]
                 [--mode threshold|accept-all|top1|ar-baseline] [--tau 0.75]
                 [--choose greedy|sample] [--models 10] [--seed N]
  verify-theory  run the full property suite and write verify_report.json
                 --out-dir DIR [--seed N]
  puzzle         generate puzzles, solve them three ways, emit traces
                 --kind sudoku|crossmath --out-dir DIR [--count 10]
                 [--givens 30] [--max-operand 25] [--seed N]
  runtime        evaluate the no-slowdown trade-off from a spec file
                 --input FILE --m M --delta D [--m0 N] --out-dir DIR

Common flags: --seed (default 1729), --out-dir (default \".\")
";

struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags, String> {
        let mut values = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let key = &args[i];
            let Some(name) = key.strip_prefix("--") else {
                return Err(format!("unexpected argument {key:?}"));
            };
            let value = args
                .get(i + 1)
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            values.insert(name.to_string(), value.clone());
            i += 2;
        }
        Ok(Flags { values })
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.values.get(key).map(String::as_str).unwrap_or(default)
    }

    fn required(&self, key: &str) -> Result<&str, String> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| format!("missing required flag --{key}"))
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, String> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("--{key} {v:?}: {e}")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, String> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("--{key} {v:?}: {e}")),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, String> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("--{key} {v:?}: {e}")),
        }
    }

    fn i64_or(&self, key: &str, default: i64) -> Result<i64, String> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("--{key} {v:?}: {e}")),
        }
    }

    fn seed(&self) -> Result<u64, String> {
        self.u64_or("seed", DEFAULT_SEED)
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str_or("out-dir", "."))
    }
}

/// Entry point used by `main`; prints failures to stderr.
pub fn run(args: &[String]) -> i32 {
    match execute(args) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("{}", failure.message);
            failure.code
        }
    }
}

/// Quiet execution for in-process determinism checks.
pub fn execute_for_test(args: &[String]) -> i32 {
    match execute(args) {
        Ok(()) => 0,
        Err(failure) => failure.code,
    }
}

fn execute(args: &[String]) -> Result<(), CliFailure> {
    let Some(subcommand) = args.first() else {
        return Err(CliFailure {
            code: 2,
            message: USAGE.to_string(),
        });
    };
    let flags = Flags::parse(&args[1..]).map_err(|message| CliFailure {
        code: 2,
        message: format!("{message}\n\n{USAGE}"),
    })?;
    match subcommand.as_str() {
        "metrics" => cmd_metrics(&flags).map_err(|m| failure(10, "metrics", m)),
        "simulate" => cmd_simulate(&flags).map_err(|m| failure(20, "simulate", m)),
        "verify-theory" => cmd_verify_theory(&flags),
        "puzzle" => cmd_puzzle(&flags).map_err(|m| failure(40, "puzzle", m)),
        "runtime" => cmd_runtime(&flags).map_err(|m| failure(50, "runtime", m)),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CliFailure {
            code: 2,
            message: format!("unknown subcommand {other:?}\n\n{USAGE}"),
        }),
    }
}

fn failure(code: i32, module: &str, message: String) -> CliFailure {
    CliFailure {
        code,
        message: format!("{module}: {message}"),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

fn write_file(path: &Path, content: &str) -> Result<(), String> {
    fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// --- metrics ----------------------------------------------------------------

fn cmd_metrics(flags: &Flags) -> Result<(), String> {
    let input = PathBuf::from(flags.required("input")?);
    let out_dir = flags.out_dir();
    ensure_dir(&out_dir)?;
    let spec = match flags.values.get("bucket") {
        Some(text) => GroupingSpec::parse(text)?,
        None => GroupingSpec::default(),
    };
    let config = json!({
        "subcommand": "metrics",
        "input": input.display().to_string(),
        "out_dir": out_dir.display().to_string(),
        "bucket": flags.values.get("bucket"),
    });

    let corpus = ingest_traces(&input).map_err(|e| e.to_string())?;
    let corpus = corpus.normalized().map_err(|e| e.to_string())?;
    let groups = aggregate(&corpus, &spec).map_err(|e| e.to_string())?;
    let labels = label_avg_local_step(&corpus).map_err(|e| e.to_string())?;

    let mut group_csv = String::new();
    let _ = writeln!(group_csv, "# decodyn v{VERSION}");
    let _ = writeln!(group_csv, "# config: {config}");
    let _ = writeln!(
        group_csv,
        "domain_tag,correctness,repetitive,block_bucket,mean_afp,mean_tau,count,excluded_tau_count"
    );
    for g in &groups {
        let _ = writeln!(
            group_csv,
            "{},{},{},{},{},{},{},{}",
            g.key.domain_tag.as_deref().unwrap_or(""),
            g.key.correctness,
            g.key.repetitive,
            g.key.block_bucket.as_deref().unwrap_or(""),
            fmt_f64(g.mean_afp),
            g.mean_tau.map(fmt_f64).unwrap_or_default(),
            g.count,
            g.excluded_tau_count
        );
    }
    write_file(&out_dir.join("groups.csv"), &group_csv)?;

    let mut label_csv = String::new();
    let _ = writeln!(label_csv, "# decodyn v{VERSION}");
    let _ = writeln!(label_csv, "# config: {config}");
    let _ = writeln!(label_csv, "# skipped_unlabeled: {}", labels.skipped_unlabeled);
    let _ = writeln!(label_csv, "label,avg_local_step,total_count");
    for row in &labels.rows {
        let _ = writeln!(
            label_csv,
            "{},{},{}",
            row.label,
            fmt_f64(row.avg_local_step),
            row.total_count
        );
    }
    write_file(&out_dir.join("labels.csv"), &label_csv)?;
    Ok(())
}

// --- simulate ---------------------------------------------------------------

fn cmd_simulate(flags: &Flags) -> Result<(), String> {
    let out_dir = flags.out_dir();
    ensure_dir(&out_dir)?;
    let vocab = flags.usize_or("vocab", 3)?;
    let length = flags.usize_or("length", 8)?;
    let block_size = flags.usize_or("block-size", 4)?;
    let models = flags.usize_or("models", 10)?;
    let seed = flags.seed()?;
    let tau = flags.f64_or("tau", 0.75)?;
    let mode_name = flags.str_or("mode", "threshold");
    let mode = match mode_name {
        "threshold" => DecodeMode::Threshold(tau),
        "accept-all" => DecodeMode::AcceptAll,
        "top1" => DecodeMode::Top1,
        "ar-baseline" => DecodeMode::ArBaseline,
        other => return Err(format!("unknown mode {other:?}")),
    };
    let choose_name = flags.str_or("choose", "greedy");
    let config_json = json!({
        "subcommand": "simulate",
        "out_dir": out_dir.display().to_string(),
        "vocab": vocab,
        "length": length,
        "block_size": block_size,
        "mode": mode_name,
        "tau": tau,
        "choose": choose_name,
        "models": models,
        "seed": seed,
    });

    let mut traces = Vec::with_capacity(models);
    let mut afp_sum = 0.0;
    let mut tau_sum = 0.0;
    let mut tau_count = 0usize;
    for i in 0..models {
        let model_seed = crate::util::mix_seed(seed, i as u64);
        let model = random_model(vocab, length, block_size, model_seed).map_err(|e| e.to_string())?;
        let choose = match choose_name {
            "greedy" => ChooseRule::GreedyArgmax,
            "sample" => ChooseRule::Sample {
                seed: crate::util::mix_seed(seed, 0x5A17 + i as u64),
            },
            other => return Err(format!("unknown choose rule {other:?}")),
        };
        let config = DecodeConfig {
            mode,
            choose,
            forced_progress: true,
        };
        let (_, trace) =
            decode(&model, &config, &format!("model{i:03}")).map_err(|e| e.to_string())?;
        let steps = trace.steps();
        afp_sum += crate::metrics::afp(&steps).map_err(|e| e.to_string())?.to_f64();
        if steps.len() >= 2 {
            tau_sum += crate::metrics::kendall_tau(&steps).map_err(|e| e.to_string())?;
            tau_count += 1;
        }
        traces.push(trace);
    }
    let corpus = TraceCorpus::new(traces, format!("decodyn simulate seed={seed}"))
        .map_err(|e| e.to_string())?;
    write_file(&out_dir.join("traces.jsonl"), &emit_corpus(&corpus))?;

    let groups = aggregate(&corpus, &GroupingSpec::default()).map_err(|e| e.to_string())?;
    let summary = json!({
        "version": VERSION,
        "config": config_json,
        "traces": corpus.len(),
        "mean_afp": afp_sum / models.max(1) as f64,
        "mean_tau": if tau_count > 0 { Some(tau_sum / tau_count as f64) } else { None },
        "groups": groups.iter().map(|g| json!({
            "domain_tag": g.key.domain_tag,
            "correctness": g.key.correctness.to_string(),
            "repetitive": g.key.repetitive,
            "mean_afp": g.mean_afp,
            "mean_tau": g.mean_tau,
            "count": g.count,
            "excluded_tau_count": g.excluded_tau_count,
        })).collect::<Vec<_>>(),
    });
    write_file(
        &out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("serializable")),
    )?;
    Ok(())
}

// --- puzzle -----------------------------------------------------------------

struct SolvedPuzzle {
    index: usize,
    unique: bool,
    traces: Vec<(String, SolveTrace)>,
    all_valid: bool,
}

fn cmd_puzzle(flags: &Flags) -> Result<(), String> {
    let out_dir = flags.out_dir();
    ensure_dir(&out_dir)?;
    let kind = flags.required("kind")?.to_string();
    let count = flags.usize_or("count", 10)?;
    let seed = flags.seed()?;
    let givens = flags.usize_or("givens", 30)?;
    let max_operand = flags.i64_or("max-operand", 25)?;
    let config_json = json!({
        "subcommand": "puzzle",
        "kind": kind,
        "count": count,
        "out_dir": out_dir.display().to_string(),
        "givens": givens,
        "max_operand": max_operand,
        "seed": seed,
    });

    let mut solved = Vec::with_capacity(count);
    for i in 0..count {
        let puzzle_seed = crate::util::mix_seed(seed, i as u64);
        let record = match kind.as_str() {
            "sudoku" => {
                let generated = generate_sudoku(puzzle_seed, givens).map_err(|e| e.to_string())?;
                write_file(
                    &out_dir.join(format!("puzzle_{i:03}.txt")),
                    &generated.puzzle.to_text(),
                )?;
                write_file(
                    &out_dir.join(format!("solution_{i:03}.txt")),
                    &generated.solution.to_text(),
                )?;
                let unique =
                    count_sudoku_solutions(&generated.puzzle, 2).map_err(|e| e.to_string())? == 1;
                let mut traces = Vec::new();
                let mut all_valid = true;
                for (tag, result) in [
                    ("left_to_right", solve_left_to_right(&generated.puzzle)),
                    ("easiest_first", solve_any_order(&generated.puzzle, false)),
                    ("easiest_first_wave", solve_any_order(&generated.puzzle, true)),
                ] {
                    let (values, trace) = result.map_err(|e| e.to_string())?;
                    let full = generated.puzzle.filled_with(&values).map_err(|e| e.to_string())?;
                    all_valid &= full.verify_solution();
                    traces.push((tag.to_string(), trace));
                }
                SolvedPuzzle {
                    index: i,
                    unique,
                    traces,
                    all_valid,
                }
            }
            "crossmath" => {
                let generated =
                    generate_crossmath(puzzle_seed, max_operand).map_err(|e| e.to_string())?;
                write_file(
                    &out_dir.join(format!("puzzle_{i:03}.txt")),
                    &generated.puzzle.to_text(),
                )?;
                write_file(
                    &out_dir.join(format!("solution_{i:03}.txt")),
                    &generated.solution.to_text(),
                )?;
                let unique = count_crossmath_solutions(&generated.puzzle, 2)
                    .map_err(|e| e.to_string())?
                    == 1;
                let mut traces = Vec::new();
                let mut all_valid = true;
                for (tag, result) in [
                    ("left_to_right", solve_left_to_right(&generated.puzzle)),
                    ("easiest_first", solve_any_order(&generated.puzzle, false)),
                    ("easiest_first_wave", solve_any_order(&generated.puzzle, true)),
                ] {
                    let (values, trace) = result.map_err(|e| e.to_string())?;
                    let full = generated.puzzle.filled_with(&values).map_err(|e| e.to_string())?;
                    all_valid &= full.verify_solution();
                    traces.push((tag.to_string(), trace));
                }
                SolvedPuzzle {
                    index: i,
                    unique,
                    traces,
                    all_valid,
                }
            }
            other => return Err(format!("unknown puzzle kind {other:?}")),
        };
        solved.push(record);
    }

    let mut decoding_traces = Vec::new();
    let mut per_strategy: BTreeMap<String, (f64, usize, f64)> = BTreeMap::new();
    for record in &solved {
        for (tag, trace) in &record.traces {
            if trace.entries.is_empty() {
                continue;
            }
            let sample_id = format!("{kind}-{:03}/{tag}", record.index);
            let dec = to_decoding_trace(trace, &sample_id).map_err(|e| e.to_string())?;
            let steps = dec.steps();
            let entry = per_strategy.entry(tag.clone()).or_insert((0.0, 0, 0.0));
            entry.0 += crate::metrics::afp(&steps).map_err(|e| e.to_string())?.to_f64();
            entry.1 += 1;
            if steps.len() >= 2 {
                entry.2 += crate::metrics::kendall_tau(&steps).map_err(|e| e.to_string())?;
            }
            decoding_traces.push(dec);
        }
    }
    let corpus = TraceCorpus::new(
        decoding_traces,
        format!("decodyn puzzle kind={kind} seed={seed}"),
    )
    .map_err(|e| e.to_string())?;
    write_file(&out_dir.join("traces.jsonl"), &emit_corpus(&corpus))?;

    let all_unique = solved.iter().all(|r| r.unique);
    let all_valid = solved.iter().all(|r| r.all_valid);
    let summary = json!({
        "version": VERSION,
        "config": config_json,
        "count": count,
        "all_unique": all_unique,
        "all_solutions_valid": all_valid,
        "strategies": per_strategy.iter().map(|(tag, (afp_sum, n, tau_sum))| json!({
            "strategy": tag,
            "mean_afp": afp_sum / (*n).max(1) as f64,
            "mean_tau": tau_sum / (*n).max(1) as f64,
            "traces": n,
        })).collect::<Vec<_>>(),
    });
    write_file(
        &out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("serializable")),
    )?;

    if !all_unique {
        return Err("a generated puzzle failed the uniqueness oracle".to_string());
    }
    if !all_valid {
        return Err("a solver output failed the constraint verifier".to_string());
    }
    Ok(())
}

// --- runtime ----------------------------------------------------------------

fn cmd_runtime(flags: &Flags) -> Result<(), String> {
    let input = PathBuf::from(flags.required("input")?);
    let out_dir = flags.out_dir();
    ensure_dir(&out_dir)?;
    let m = flags.u64_or("m", 1)?;
    let delta = flags.f64_or("delta", 0.01)?;
    let config_json = json!({
        "subcommand": "runtime",
        "input": input.display().to_string(),
        "out_dir": out_dir.display().to_string(),
        "m": m,
        "delta": delta,
        "m0": flags.values.get("m0"),
    });
    let mut spec = RuntimeSpec::read_file(&input).map_err(|e| e.to_string())?;
    if let Some(m0) = flags.values.get("m0") {
        let m0: u64 = m0.parse().map_err(|e| format!("--m0 {m0:?}: {e}"))?;
        spec = spec.with_m0(m0).map_err(|e| e.to_string())?;
    }
    let report = spec.no_slowdown(m, delta).map_err(|e| e.to_string())?;
    let payload = json!({
        "version": VERSION,
        "config": config_json,
        "report": report,
    });
    write_file(
        &out_dir.join("runtime_report.json"),
        &format!("{}\n", serde_json::to_string_pretty(&payload).expect("serializable")),
    )?;
    Ok(())
}

// --- verify-theory ----------------------------------------------------------

fn cmd_verify_theory(flags: &Flags) -> Result<(), CliFailure> {
    let out_dir = flags.out_dir();
    ensure_dir(&out_dir).map_err(|m| failure(30, "verify-theory", m))?;
    let seed = flags.seed().map_err(|m| failure(30, "verify-theory", m))?;
    let scratch = out_dir.join("determinism");
    let report = crate::verify::run_all(seed, &scratch);
    for criterion in &report.criteria {
        println!("{}", criterion.summary_line());
    }
    let payload = serde_json::to_string_pretty(&report).expect("serializable");
    write_file(&out_dir.join("verify_report.json"), &format!("{payload}\n"))
        .map_err(|m| failure(30, "verify-theory", m))?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.id, c.name))
            .collect();
        Err(CliFailure {
            code: 31,
            message: format!("verify-theory: criteria failed: {}", failed.join(", ")),
        })
    }
}
