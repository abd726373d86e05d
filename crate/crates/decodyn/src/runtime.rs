//! Parallelism-vs-editing runtime trade-off.
//!
//! Everything here is exact arithmetic over a user-supplied abstract cost
//! model: per-stage wall times by stage count `m`, measured contraction
//! coefficients by `m`, and a target accuracy. No wall-clock measurement
//! happens anywhere — throughput numbers are deliberately out of scope.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::chain::DobrushinReport;
use crate::util::geometric_rounds;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("per-stage times must be positive (t_step({m}) = {value})")]
    NonPositiveTime { m: u64, value: f64 },
    #[error("t_step must be non-decreasing in the stage count: t_step({m1}) = {t1} > t_step({m2}) = {t2}")]
    StepTimeNotMonotone { m1: u64, t1: f64, m2: u64, t2: f64 },
    #[error("baseline stage count {0} is missing from the t_step table")]
    MissingBaseline(u64),
    #[error("no t_step entry for m = {0}")]
    MissingStepTime(u64),
    #[error("no contraction coefficient recorded for m = {0}")]
    AlphaUnavailable(u64),
    #[error("contraction coefficient {alpha} for m = {m} is outside [0, 1)")]
    AlphaOutOfRange { m: u64, alpha: f64 },
    #[error("alpha {0} from the measurement is not < 1; the geometric bound does not apply")]
    AlphaNotContractive(f64),
    #[error("delta must satisfy 0 < delta (got {0})")]
    BadDelta(f64),
    #[error("d0 must be positive (got {0})")]
    BadD0(f64),
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A contraction coefficient with provenance (which kernel configuration it
/// was measured on).
#[derive(Debug, Clone, Serialize)]
pub struct AlphaEntry {
    pub alpha: f64,
    pub provenance: String,
}

/// Abstract runtime model: per-stage times, a baseline stage count, measured
/// contraction coefficients, and the initial TV distance `d0` (default 1, the
/// maximum possible).
#[derive(Debug, Clone)]
pub struct RuntimeSpec {
    t_step: BTreeMap<u64, f64>,
    m0: u64,
    alpha_of_m: BTreeMap<u64, AlphaEntry>,
    d0: f64,
}

impl RuntimeSpec {
    /// Stage times must be positive and non-decreasing in `m`: one stage of a
    /// more parallel run (smaller `m`) never costs more than one stage of a
    /// less parallel run.
    pub fn new(t_step: impl IntoIterator<Item = (u64, f64)>, m0: u64) -> Result<Self, RuntimeError> {
        let t_step: BTreeMap<u64, f64> = t_step.into_iter().collect();
        for (&m, &t) in &t_step {
            if t <= 0.0 || !t.is_finite() {
                return Err(RuntimeError::NonPositiveTime { m, value: t });
            }
        }
        let entries: Vec<(&u64, &f64)> = t_step.iter().collect();
        for pair in entries.windows(2) {
            let (&m1, &t1) = pair[0];
            let (&m2, &t2) = pair[1];
            if t1 > t2 {
                return Err(RuntimeError::StepTimeNotMonotone { m1, t1, m2, t2 });
            }
        }
        if !t_step.contains_key(&m0) {
            return Err(RuntimeError::MissingBaseline(m0));
        }
        Ok(RuntimeSpec {
            t_step,
            m0,
            alpha_of_m: BTreeMap::new(),
            d0: 1.0,
        })
    }

    pub fn with_d0(mut self, d0: f64) -> Result<Self, RuntimeError> {
        if d0 <= 0.0 || !d0.is_finite() {
            return Err(RuntimeError::BadD0(d0));
        }
        self.d0 = d0;
        Ok(self)
    }

    /// Re-point the baseline at another stage count from the table.
    pub fn with_m0(mut self, m0: u64) -> Result<Self, RuntimeError> {
        if !self.t_step.contains_key(&m0) {
            return Err(RuntimeError::MissingBaseline(m0));
        }
        self.m0 = m0;
        Ok(self)
    }

    pub fn set_alpha(&mut self, m: u64, entry: AlphaEntry) -> Result<(), RuntimeError> {
        if !(0.0..1.0).contains(&entry.alpha) {
            return Err(RuntimeError::AlphaOutOfRange {
                m,
                alpha: entry.alpha,
            });
        }
        self.alpha_of_m.insert(m, entry);
        Ok(())
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn m0(&self) -> u64 {
        self.m0
    }

    pub fn t_step(&self, m: u64) -> Result<f64, RuntimeError> {
        self.t_step
            .get(&m)
            .copied()
            .ok_or(RuntimeError::MissingStepTime(m))
    }

    pub fn alpha(&self, m: u64) -> Result<&AlphaEntry, RuntimeError> {
        self.alpha_of_m
            .get(&m)
            .ok_or(RuntimeError::AlphaUnavailable(m))
    }

    /// Editing rounds needed to reach TV accuracy `delta` at stage count `m`:
    /// the explicit geometric bound `ceil(ln(d0/delta) / ln(1/alpha(m)))`.
    /// Zero when `delta >= d0`; one when `alpha(m) = 0`.
    pub fn edit_rounds(&self, m: u64, delta: f64) -> Result<u64, RuntimeError> {
        if delta <= 0.0 || !delta.is_finite() {
            return Err(RuntimeError::BadDelta(delta));
        }
        let alpha = self.alpha(m)?.alpha;
        Ok(geometric_rounds(alpha, self.d0, delta))
    }

    /// Evaluate the no-slowdown comparison: editing at stage count `m` versus
    /// the one-pass baseline at `m0`.
    pub fn no_slowdown(&self, m: u64, delta: f64) -> Result<TradeoffReport, RuntimeError> {
        let k_rounds = self.edit_rounds(m, delta)?;
        let t_m = self.t_step(m)?;
        let t_m0 = self.t_step(self.m0)?;
        let t_edit = k_rounds as f64 * t_m;
        let t_base = self.m0 as f64 * t_m0;
        let no_slowdown = t_edit <= t_base;
        let mut binding_inequality = String::new();
        let _ = write!(
            binding_inequality,
            "k_rounds({m}, delta={delta}) * t_step({m}) = {k_rounds} * {t_m} = {t_edit} {} m0 * t_step(m0) = {} * {t_m0} = {t_base}",
            if no_slowdown { "<=" } else { ">" },
            self.m0,
        );
        Ok(TradeoffReport {
            m,
            delta,
            alpha: self.alpha(m)?.alpha,
            k_rounds,
            t_edit,
            t_base,
            no_slowdown,
            binding_inequality,
        })
    }

    /// Parse the runtime-spec file format: lines of `t_step <m> <value>`,
    /// `alpha <m> <value>`, `m0 <value>`, `d0 <value>`. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, RuntimeError> {
        let mut t_step = Vec::new();
        let mut alphas = Vec::new();
        let mut m0 = None;
        let mut d0 = 1.0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            let bad = |what: &str| {
                RuntimeError::Parse(format!("line {}: {what}: {line:?}", lineno + 1))
            };
            match key {
                "t_step" => {
                    let m: u64 = parts
                        .next()
                        .ok_or_else(|| bad("missing m"))?
                        .parse()
                        .map_err(|_| bad("bad m"))?;
                    let value: f64 = parts
                        .next()
                        .ok_or_else(|| bad("missing value"))?
                        .parse()
                        .map_err(|_| bad("bad value"))?;
                    t_step.push((m, value));
                }
                "alpha" => {
                    let m: u64 = parts
                        .next()
                        .ok_or_else(|| bad("missing m"))?
                        .parse()
                        .map_err(|_| bad("bad m"))?;
                    let value: f64 = parts
                        .next()
                        .ok_or_else(|| bad("missing value"))?
                        .parse()
                        .map_err(|_| bad("bad value"))?;
                    alphas.push((m, value));
                }
                "m0" => {
                    m0 = Some(
                        parts
                            .next()
                            .ok_or_else(|| bad("missing value"))?
                            .parse()
                            .map_err(|_| bad("bad value"))?,
                    );
                }
                "d0" => {
                    d0 = parts
                        .next()
                        .ok_or_else(|| bad("missing value"))?
                        .parse()
                        .map_err(|_| bad("bad value"))?;
                }
                other => return Err(RuntimeError::Parse(format!("unknown key {other:?}"))),
            }
        }
        let m0 = m0.ok_or_else(|| RuntimeError::Parse("missing m0 line".to_string()))?;
        let mut spec = RuntimeSpec::new(t_step, m0)?.with_d0(d0)?;
        for (m, alpha) in alphas {
            spec.set_alpha(
                m,
                AlphaEntry {
                    alpha,
                    provenance: "spec file".to_string(),
                },
            )?;
        }
        Ok(spec)
    }

    pub fn read_file(path: &Path) -> Result<Self, RuntimeError> {
        let text = fs::read_to_string(path)?;
        RuntimeSpec::parse(&text)
    }
}

/// One evaluated no-slowdown comparison, with the full arithmetic recorded.
#[derive(Debug, Clone, Serialize)]
pub struct TradeoffReport {
    pub m: u64,
    pub delta: f64,
    pub alpha: f64,
    pub k_rounds: u64,
    pub t_edit: f64,
    pub t_base: f64,
    pub no_slowdown: bool,
    pub binding_inequality: String,
}

/// Bridge a measured Dobrushin coefficient into a runtime-spec alpha entry.
/// Rejects non-contractive measurements.
pub fn measured_alpha_bridge(
    report: &DobrushinReport,
    kernel_config_id: &str,
) -> Result<AlphaEntry, RuntimeError> {
    if report.alpha >= 1.0 {
        return Err(RuntimeError::AlphaNotContractive(report.alpha));
    }
    Ok(AlphaEntry {
        alpha: report.alpha,
        provenance: kernel_config_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_const_time() -> RuntimeSpec {
        let mut spec = RuntimeSpec::new([(1, 1.0), (4, 1.0), (8, 1.0)], 8).unwrap();
        spec.set_alpha(
            1,
            AlphaEntry {
                alpha: 0.5,
                provenance: "test".to_string(),
            },
        )
        .unwrap();
        spec
    }

    #[test]
    fn edit_rounds_worked_example() {
        assert_eq!(spec_const_time().edit_rounds(1, 0.01).unwrap(), 7);
    }

    #[test]
    fn edit_rounds_zero_when_delta_reaches_d0() {
        assert_eq!(spec_const_time().edit_rounds(1, 1.0).unwrap(), 0);
    }

    #[test]
    fn edit_rounds_slow_contraction_example() {
        let mut spec = RuntimeSpec::new([(1, 1.0)], 1).unwrap();
        spec.set_alpha(
            1,
            AlphaEntry {
                alpha: 0.9,
                provenance: "test".to_string(),
            },
        )
        .unwrap();
        assert_eq!(spec.edit_rounds(1, 0.1).unwrap(), 22);
    }

    #[test]
    fn no_slowdown_flips_with_the_baseline() {
        let report = spec_const_time().no_slowdown(1, 0.01).unwrap();
        assert_eq!(report.k_rounds, 7);
        assert!((report.t_edit - 7.0).abs() < 1e-12);
        assert!((report.t_base - 8.0).abs() < 1e-12);
        assert!(report.no_slowdown);

        let mut spec = RuntimeSpec::new([(1, 1.0), (4, 1.0)], 4).unwrap();
        spec.set_alpha(
            1,
            AlphaEntry {
                alpha: 0.5,
                provenance: "test".to_string(),
            },
        )
        .unwrap();
        let report = spec.no_slowdown(1, 0.01).unwrap();
        assert!(!report.no_slowdown);
        assert!((report.t_base - 4.0).abs() < 1e-12);
    }

    #[test]
    fn step_times_must_not_decrease_with_m() {
        // a more parallel run (smaller m) with a *more* expensive stage
        // violates the cost-model assumption
        let err = RuntimeSpec::new([(1, 2.0), (8, 1.0)], 8).unwrap_err();
        assert!(matches!(err, RuntimeError::StepTimeNotMonotone { .. }));
    }

    #[test]
    fn alpha_zero_means_one_round() {
        let mut spec = RuntimeSpec::new([(1, 1.0)], 1).unwrap();
        spec.set_alpha(
            1,
            AlphaEntry {
                alpha: 0.0,
                provenance: "rank-one kernel".to_string(),
            },
        )
        .unwrap();
        assert_eq!(spec.edit_rounds(1, 0.5).unwrap(), 1);
    }

    #[test]
    fn missing_alpha_is_an_unsupported_configuration() {
        let spec = spec_const_time();
        assert!(matches!(
            spec.edit_rounds(4, 0.01),
            Err(RuntimeError::AlphaUnavailable(4))
        ));
    }

    #[test]
    fn bridge_rejects_non_contractive_alpha() {
        let report = DobrushinReport {
            influence: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            alpha: 1.0,
        };
        assert!(matches!(
            measured_alpha_bridge(&report, "cfg"),
            Err(RuntimeError::AlphaNotContractive(_))
        ));
    }

    #[test]
    fn bridge_records_provenance() {
        let report = DobrushinReport {
            influence: vec![vec![0.0, 0.8], vec![0.8, 0.0]],
            alpha: 0.8,
        };
        let entry = measured_alpha_bridge(&report, "gibbs-corr").unwrap();
        assert_eq!(entry.alpha, 0.8);
        assert_eq!(entry.provenance, "gibbs-corr");
    }

    #[test]
    fn spec_file_round_trip() {
        let text = "# runtime model\nt_step 1 1.0\nt_step 8 1.0\nm0 8\nd0 1.0\nalpha 1 0.5\n";
        let spec = RuntimeSpec::parse(text).unwrap();
        let report = spec.no_slowdown(1, 0.01).unwrap();
        assert!(report.no_slowdown);
        assert_eq!(report.k_rounds, 7);
    }

    #[test]
    fn rounds_grow_logarithmically_in_precision() {
        let spec = spec_const_time();
        let mut last = spec.edit_rounds(1, 0.2).unwrap();
        let mut delta = 0.2;
        // halving delta adds at most ceil(ln 2 / ln(1/alpha)) + 1 rounds
        let step_cap = ((2.0f64.ln() / 2.0f64.ln()).ceil() as u64) + 1;
        for _ in 0..10 {
            delta /= 2.0;
            let rounds = spec.edit_rounds(1, delta).unwrap();
            assert!(rounds >= last);
            assert!(rounds - last <= step_cap);
            last = rounds;
        }
    }

    #[test]
    fn faster_stages_never_flip_no_slowdown_off() {
        // halving t_step(m) at fixed alpha keeps (or gains) the verdict
        for t in [1.0, 0.5, 0.25] {
            let mut spec = RuntimeSpec::new([(1, t), (8, 1.0)], 8).unwrap();
            spec.set_alpha(
                1,
                AlphaEntry {
                    alpha: 0.5,
                    provenance: "test".to_string(),
                },
            )
            .unwrap();
            assert!(spec.no_slowdown(1, 0.01).unwrap().no_slowdown);
        }
    }

    #[test]
    fn t_edit_equals_rounds_times_step_time() {
        let report = spec_const_time().no_slowdown(1, 0.001).unwrap();
        assert_eq!(report.t_edit, report.k_rounds as f64 * 1.0);
    }
}
