//! Falsification harness: Monte-Carlo and exhaustive tail estimates
//! checked against the theoretical bounds.
//!
//! A bound is violated at `t` when the lower Clopper–Pearson limit of the
//! empirical tail (or the exact tail) exceeds it. Monte-Carlo exceedances
//! are counted against `t + h`, where `h` is the half-width of the
//! expectation estimate.

pub mod stats;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::applications::{metric_tail, psi_diameter, MetricForm};
use crate::bounds::{tail, BoundKind, TailBoundResult};
use crate::entropy::ProductTable;
use crate::error::{Error, Result};
use crate::functions::{proxy_profile_at, Expectation, FunctionSpec, L2P_ORDER};
use crate::orlicz::Alpha;
use crate::rng::{self, tag};

pub use stats::clopper_pearson;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_CP_LEVEL: f64 = 0.999;
pub const MIN_SAMPLES: usize = 10_000;
pub const NEGATIVE_CONTROL_LABEL: &str = "thm2-halved";
pub const NEGATIVE_CONTROL_NOTE: &str = "negative control: thm2 bound halved";
/// Relative tolerance when comparing an exact tail with a bound.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub t_grid: Vec<f64>,
    pub exceed_counts: Vec<u64>,
    pub sample_count: usize,
    pub mean_estimate: Expectation,
    /// Added to every `t` before counting exceedances.
    pub threshold_shift: f64,
    pub cp_level: f64,
}

impl TailEstimate {
    pub fn empirical(&self) -> Vec<f64> {
        self.exceed_counts.iter().map(|&k| k as f64 / self.sample_count as f64).collect()
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.exceed_counts
            .iter()
            .map(|&k| clopper_pearson(k, self.sample_count as u64, self.cp_level))
            .collect()
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must be non-empty"));
    }
    for (i, &t) in t_grid.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::param(format!("t_grid[{i}]"), format!("must be positive and finite, got {t}")));
        }
        if i > 0 && t <= t_grid[i - 1] {
            return Err(Error::param("t_grid", "must be strictly ascending"));
        }
    }
    Ok(())
}

/// Smallest gap between grid points, counting the gap from 0 to the first.
fn min_spacing(t_grid: &[f64]) -> f64 {
    t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(t_grid[0], f64::min)
}

/// `t_lo, …, t_hi` in `steps` equal increments.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 1 || !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::param("t_grid", format!("need 0 < lo <= hi and steps >= 1, got {lo}:{hi}:{steps}")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())
}

pub fn estimate_tail(fspec: &FunctionSpec, t_grid: &[f64], n: usize, seed: u64) -> Result<TailEstimate> {
    estimate_tail_with_threads(fspec, t_grid, n, seed, None)
}

/// Exceedance counts of `f(X) − E f` over `t + h` for `n` draws. The
/// expectation uses its own streams with the same budget `n`.
pub fn estimate_tail_with_threads(
    fspec: &FunctionSpec,
    t_grid: &[f64],
    n: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<TailEstimate> {
    check_grid(t_grid)?;
    if n < MIN_SAMPLES {
        return Err(Error::param("n", format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let f = fspec.prepare()?;
    let mean = f.expectation(n, seed, threads)?;
    let limit = min_spacing(t_grid) / 10.0;
    if mean.half_width > limit {
        return Err(Error::ExpectationBudget { half_width: mean.half_width, limit });
    }
    let shifted: Vec<f64> = t_grid.iter().map(|t| t + mean.half_width).collect();
    let len = f.point_len();
    let shards = rng::map_shards(seed, tag::MAIN, n, threads, |_, m, r| {
        // hist[j] = draws exceeding exactly the first j thresholds
        let mut hist = vec![0u64; shifted.len() + 1];
        let mut x = vec![0.0; len];
        for _ in 0..m {
            f.draw_point(r, &mut x);
            let dev = f.eval(&x).expect("point has the prepared shape") - mean.value;
            hist[shifted.partition_point(|&t| dev > t)] += 1;
        }
        hist
    });
    let mut hist = vec![0u64; shifted.len() + 1];
    for h in shards {
        for (a, b) in hist.iter_mut().zip(h) {
            *a += b;
        }
    }
    let mut counts = vec![0u64; t_grid.len()];
    let mut acc = 0;
    for j in (0..t_grid.len()).rev() {
        acc += hist[j + 1];
        counts[j] = acc;
    }
    Ok(TailEstimate {
        t_grid: t_grid.to_vec(),
        exceed_counts: counts,
        sample_count: n,
        mean_estimate: mean,
        threshold_shift: mean.half_width,
        cp_level: DEFAULT_CP_LEVEL,
    })
}

/// Exact `Pr{f − E f > t}` by enumerating a product table.
pub fn exact_tail_enumeration(pt: &ProductTable, t_grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(t_grid)?;
    let mean = pt.mean();
    let joint = pt.joint();
    Ok(t_grid
        .iter()
        .map(|&t| crate::numeric::kahan_sum(joint.iter().filter(|(v, _)| v - mean > t).map(|(_, p)| p)))
        .collect())
}

/// One bound evaluated along the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub label: String,
    pub results: Vec<TailBoundResult>,
}

impl BoundSeries {
    pub fn new(kind: BoundKind, results: Vec<TailBoundResult>) -> Self {
        BoundSeries { label: kind.as_str().to_string(), results }
    }
}

/// The thm2 series with every probability halved: a knowingly false bound.
pub fn negative_control(thm2: &BoundSeries) -> BoundSeries {
    BoundSeries {
        label: NEGATIVE_CONTROL_LABEL.into(),
        results: thm2
            .results
            .iter()
            .map(|r| TailBoundResult {
                prob: 0.5 * r.prob,
                ln_prob: r.ln_prob - std::f64::consts::LN_2,
                note: Some(NEGATIVE_CONTROL_NOTE.into()),
                ..r.clone()
            })
            .collect(),
    }
}

/// Evaluate the requested bound kinds for `fspec` on a grid. `p` is the
/// moment order for the `L_{2p}` bounds (default 2); `thm6` needs a
/// `MetricLipschitz` spec.
pub fn bound_series(
    fspec: &FunctionSpec,
    kinds: &[BoundKind],
    t_grid: &[f64],
    p: Option<f64>,
    metric_form: MetricForm,
) -> Result<Vec<BoundSeries>> {
    check_grid(t_grid)?;
    let p = p.unwrap_or(L2P_ORDER);
    let profile = proxy_profile_at(fspec, p)?;
    kinds
        .iter()
        .map(|&kind| {
            let results = if kind == BoundKind::Thm6 {
                let FunctionSpec::MetricLipschitz { lipschitz, coordinate_dists, .. } = fspec else {
                    return Err(Error::Unsupported("thm6 needs a MetricLipschitz function".into()));
                };
                let diam: Vec<f64> = coordinate_dists
                    .iter()
                    .map(|c| Ok(psi_diameter(c, Alpha::Psi1)?.value))
                    .collect::<Result<_>>()?;
                t_grid
                    .iter()
                    .map(|&t| metric_tail(*lipschitz, &diam, t, metric_form))
                    .collect::<Result<_>>()?
            } else {
                let pk = kind.needs_p().then_some(p);
                t_grid.iter().map(|&t| tail(kind, &profile, pk, t)).collect::<Result<_>>()?
            };
            Ok(BoundSeries::new(kind, results))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Sound,
    Violation,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Sound => "SOUND",
            Verdict::Violation => "VIOLATION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub label: String,
    pub prob: f64,
    /// `ln(bound / empirical)`, absent when the empirical tail is 0.
    pub log_tightness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    pub empirical: f64,
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub bounds: Vec<BoundCell>,
    pub verdict: Verdict,
}

/// Empirical or exact tails to be checked.
#[derive(Debug, Clone, PartialEq)]
pub enum TailSource<'a> {
    Estimate(&'a TailEstimate),
    Exact { t_grid: &'a [f64], tails: &'a [f64] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_estimate: Option<Expectation>,
    pub threshold_shift: f64,
    pub bound_labels: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub verdict: Verdict,
}

/// Compare tails with bounds row by row. Digest and seed are left empty
/// for the caller to fill.
pub fn check_bounds(source: TailSource<'_>, bounds: &[BoundSeries]) -> Result<VerificationReport> {
    let (t_grid, lower_upper, empirical, exact): (&[f64], Vec<(f64, f64)>, Vec<f64>, bool) = match source {
        TailSource::Estimate(est) => (&est.t_grid, est.intervals(), est.empirical(), false),
        TailSource::Exact { t_grid, tails } => {
            if tails.len() != t_grid.len() {
                return Err(Error::LengthMismatch { what: "tails/t_grid", left: tails.len(), right: t_grid.len() });
            }
            (t_grid, tails.iter().map(|&v| (v, v)).collect(), tails.to_vec(), true)
        }
    };
    for s in bounds {
        if s.results.len() != t_grid.len() {
            return Err(Error::LengthMismatch { what: "bound series/t_grid", left: s.results.len(), right: t_grid.len() });
        }
        if s.results.iter().zip(t_grid).any(|(r, t)| r.t != *t) {
            return Err(Error::param(format!("bounds.{}", s.label), "t values do not match the grid"));
        }
    }
    let rows: Vec<ReportRow> = t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (lo, hi) = lower_upper[j];
            let emp = empirical[j];
            let cells: Vec<BoundCell> = bounds
                .iter()
                .map(|s| {
                    let r = &s.results[j];
                    let violated = if exact { lo > r.prob * (1.0 + EXACT_TOL) + f64::MIN_POSITIVE } else { lo > r.prob };
                    BoundCell {
                        label: s.label.clone(),
                        prob: r.prob,
                        log_tightness: (emp > 0.0).then(|| r.ln_prob - emp.ln()),
                        note: r.note.clone(),
                        verdict: if violated { Verdict::Violation } else { Verdict::Sound },
                    }
                })
                .collect();
            let verdict = if cells.iter().any(|c| c.verdict == Verdict::Violation) {
                Verdict::Violation
            } else {
                Verdict::Sound
            };
            ReportRow { t, empirical: emp, cp_lower: lo, cp_upper: hi, bounds: cells, verdict }
        })
        .collect();
    let verdict = if rows.iter().any(|r| r.verdict == Verdict::Violation) { Verdict::Violation } else { Verdict::Sound };
    let (sample_count, cp_level, mean_estimate, threshold_shift) = match source {
        TailSource::Estimate(est) => (Some(est.sample_count), Some(est.cp_level), Some(est.mean_estimate), est.threshold_shift),
        TailSource::Exact { .. } => (None, None, None, 0.0),
    };
    Ok(VerificationReport {
        tool_version: TOOL_VERSION.into(),
        config_digest: String::new(),
        seed: None,
        sample_count,
        cp_level,
        mean_estimate,
        threshold_shift,
        bound_labels: bounds.iter().map(|s| s.label.clone()).collect(),
        rows,
        verdict,
    })
}

/// Everything that determines a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub function: FunctionSpec,
    pub bounds: Vec<BoundKind>,
    pub t_grid: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub metric_form: MetricForm,
    #[serde(default)]
    pub negative_control: bool,
}

/// Hex SHA-256 of the compact JSON serialization (object keys sorted).
pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config).map_err(|e| Error::param("config", e.to_string()))?;
    let bytes = serde_json::to_vec(&value).map_err(|e| Error::param("config", e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Estimate, evaluate bounds and check. The negative control replaces
/// nothing; it adds a halved thm2 column.
pub fn run_verification(cfg: &VerifyConfig, threads: Option<usize>) -> Result<VerificationReport> {
    if cfg.bounds.is_empty() {
        return Err(Error::param("bounds", "must name at least one bound kind"));
    }
    let est = estimate_tail_with_threads(&cfg.function, &cfg.t_grid, cfg.n, cfg.seed, threads)?;
    let mut series = bound_series(&cfg.function, &cfg.bounds, &cfg.t_grid, cfg.p, cfg.metric_form)?;
    if cfg.negative_control {
        let thm2 = match series.iter().find(|s| s.label == BoundKind::Thm2.as_str()) {
            Some(s) => s.clone(),
            None => bound_series(&cfg.function, &[BoundKind::Thm2], &cfg.t_grid, cfg.p, cfg.metric_form)?.remove(0),
        };
        series.push(negative_control(&thm2));
    }
    let mut report = check_bounds(TailSource::Estimate(&est), &series)?;
    report.config_digest = config_digest(cfg)?;
    report.seed = Some(cfg.seed);
    Ok(report)
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

impl VerificationReport {
    /// Columns `t, empirical, cp_lo, cp_hi`, one per bound, `verdict`.
    /// Floats use the shortest round-trip decimal form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,empirical,cp_lo,cp_hi");
        for l in &self.bound_labels {
            out.push(',');
            out.push_str(l);
        }
        out.push_str(",verdict\n");
        for r in &self.rows {
            let mut cols = vec![fmt_float(r.t), fmt_float(r.empirical), fmt_float(r.cp_lower), fmt_float(r.cp_upper)];
            cols.extend(r.bounds.iter().map(|c| fmt_float(c.prob)));
            cols.push(r.verdict.as_str().into());
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec::*;
    use crate::entropy::FiniteDist;

    fn sum_exp(n: usize) -> FunctionSpec {
        FunctionSpec::Sum { components: vec![Exponential { rate: 1.0 }; n] }
    }

    #[test]
    fn constant_never_exceeds() {
        let est = estimate_tail(&FunctionSpec::Constant { value: 3.0 }, &[0.1, 1.0], 20_000, 1).unwrap();
        assert_eq!(est.exceed_counts, vec![0, 0]);
    }

    #[test]
    fn single_rademacher_half() {
        let f = FunctionSpec::Sum { components: vec![Rademacher] };
        let est = estimate_tail(&f, &[0.5], 100_000, 3).unwrap();
        let (lo, hi) = est.intervals()[0];
        assert!(lo < 0.5 && 0.5 < hi);
    }

    #[test]
    fn counts_are_monotone_and_thread_independent() {
        let grid = linear_grid(0.5, 8.0, 12).unwrap();
        let a = estimate_tail_with_threads(&sum_exp(10), &grid, 50_000, 7, Some(1)).unwrap();
        let b = estimate_tail_with_threads(&sum_exp(10), &grid, 50_000, 7, Some(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.exceed_counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_grids_and_budgets() {
        assert!(estimate_tail(&sum_exp(2), &[1.0, 0.5], 20_000, 1).is_err());
        assert!(estimate_tail(&sum_exp(2), &[1.0], 100, 1).is_err());
        // Monte-Carlo mean with a grid far finer than its half-width
        let f = FunctionSpec::VectorNormOfSum {
            vec: crate::dist::VectorSpec::iid(2, Exponential { rate: 1.0 }),
            n: 3,
            centered: false,
        };
        assert!(matches!(
            estimate_tail(&f, &[1.0, 1.0001], 10_000, 1),
            Err(Error::ExpectationBudget { .. })
        ));
    }

    #[test]
    fn enumeration_examples() {
        let bit = FiniteDist::uniform(vec![0.0, 1.0]).unwrap();
        let pt = ProductTable::from_fn(vec![bit.clone(), bit.clone()], |x| x[0] + x[1]).unwrap();
        assert_eq!(exact_tail_enumeration(&pt, &[0.5]).unwrap(), vec![0.25]);
        assert_eq!(exact_tail_enumeration(&pt, &[1.5]).unwrap(), vec![0.0]);
        let flat = ProductTable::from_fn(vec![bit.clone(), bit], |_| 2.0).unwrap();
        assert_eq!(exact_tail_enumeration(&flat, &[0.1, 0.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn trivial_bound_is_sound_and_halved_exact_is_not() {
        let grid = [0.5, 1.0];
        let tails = [0.3, 0.1];
        let one = BoundSeries {
            label: "one".into(),
            results: grid
                .iter()
                .map(|&t| TailBoundResult { kind: BoundKind::Thm2, t, prob: 1.0, ln_prob: 0.0, note: None })
                .collect(),
        };
        let r = check_bounds(TailSource::Exact { t_grid: &grid, tails: &tails }, &[one]).unwrap();
        assert_eq!(r.verdict, Verdict::Sound);
        let half = BoundSeries {
            label: "half-exact".into(),
            results: grid
                .iter()
                .zip(&tails)
                .map(|(&t, &p)| TailBoundResult { kind: BoundKind::Thm2, t, prob: p / 2.0, ln_prob: (p / 2.0).ln(), note: None })
                .collect(),
        };
        let r = check_bounds(TailSource::Exact { t_grid: &grid, tails: &tails }, &[half]).unwrap();
        assert_eq!(r.verdict, Verdict::Violation);
    }

    #[test]
    fn csv_layout() {
        let cfg = VerifyConfig {
            function: sum_exp(3),
            bounds: vec![BoundKind::Thm2, BoundKind::BoundedDifference],
            t_grid: vec![1.0, 2.0],
            n: 10_000,
            seed: 5,
            p: None,
            metric_form: MetricForm::Statement,
            negative_control: false,
        };
        let r = run_verification(&cfg, Some(2)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,empirical,cp_lo,cp_hi,thm2,bounded-difference,verdict");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1.0");
        assert_eq!(first[5], "1.0");
        assert_eq!(r.config_digest.len(), 64);
        assert_eq!(r.config_digest, config_digest(&cfg).unwrap());
    }
}
