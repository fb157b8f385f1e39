//! Moment-based sub-Gaussian and sub-exponential norms
//!
//! ```text
//! ‖Z‖_ψ1 = sup_{p≥1} ‖Z‖_p / p        ‖Z‖_ψ2 = sup_{p≥1} ‖Z‖_p / √p
//! ```
//!
//! The supremum is taken over a log-spaced grid on `[1, p_max]`, refined by
//! golden-section search around the discrete argmax. The grid value is only
//! trusted when the ratio is nonincreasing over the last octave.

use std::cell::RefCell;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::finite::FiniteDist;
use crate::numeric::golden_section_max;

/// Which Orlicz norm: `ψ1` (sub-exponential) or `ψ2` (sub-Gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Alpha {
    Psi1,
    Psi2,
}

impl Alpha {
    pub fn exponent(self) -> f64 {
        match self {
            Alpha::Psi1 => 1.0,
            Alpha::Psi2 => 2.0,
        }
    }
}

impl TryFrom<u8> for Alpha {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Alpha::Psi1),
            2 => Ok(Alpha::Psi2),
            _ => Err(Error::param("alpha", format!("must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Alpha> for u8 {
    fn from(a: Alpha) -> u8 {
        match a {
            Alpha::Psi1 => 1,
            Alpha::Psi2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AnalyticGrid,
    Empirical,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrliczEstimate {
    pub alpha: Alpha,
    pub value: f64,
    pub p_star: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub p_max: f64,
    pub per_octave: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { p_max: 256.0, per_octave: 16 }
    }
}

impl GridOptions {
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.p_max, self.per_octave)
    }
}

/// Log-spaced points on `[1, p_max]`, `per_octave` per doubling, both ends included.
pub fn log_grid(p_max: f64, per_octave: usize) -> Vec<f64> {
    if p_max <= 1.0 {
        return vec![1.0];
    }
    let octaves = p_max.log2();
    let n = ((octaves * per_octave as f64).ceil() as usize).max(1);
    let mut g: Vec<f64> = (0..=n).map(|i| (octaves * i as f64 / n as f64).exp2()).collect();
    g[0] = 1.0;
    g[n] = p_max;
    g
}

fn ratio_from_log_moment(lm: f64, p: f64, alpha: Alpha) -> f64 {
    if lm == f64::NEG_INFINITY {
        return 0.0;
    }
    (lm / p - p.ln() / alpha.exponent()).exp()
}

/// Supremum of `exp(log_moment(p)/p) / p^{1/α}` over the grid, refined by
/// golden-section search, plus any `extra` points in `[1, p_max]`.
pub fn sup_ratio<F>(log_moment: F, alpha: Alpha, opts: GridOptions, extra: &[f64]) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(opts.p_max >= 1.0) {
        return Err(Error::param("p_max", format!("must be at least 1, got {}", opts.p_max)));
    }
    if opts.per_octave < 8 {
        return Err(Error::param("grid_density", "need at least 8 points per octave"));
    }
    let grid = opts.grid();
    let ratios: Vec<f64> = grid
        .iter()
        .map(|&p| Ok(ratio_from_log_moment(log_moment(p)?, p, alpha)))
        .collect::<Result<_>>()?;

    let half = opts.p_max / 2.0;
    for (i, w) in ratios.windows(2).enumerate() {
        if grid[i] >= half && w[1] > w[0] * (1.0 + 1e-12) {
            return Err(Error::PMaxTooSmall { alpha: alpha.into(), p_max: opts.p_max });
        }
    }

    let (imax, &rmax) = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty grid");
    let mut best = (grid[imax], rmax);
    if rmax > 0.0 && grid.len() > 1 {
        let lo = grid[imax.saturating_sub(1)];
        let hi = grid[(imax + 1).min(grid.len() - 1)];
        let err = RefCell::new(None);
        let (p, r) = golden_section_max(
            |p| match log_moment(p) {
                Ok(lm) => ratio_from_log_moment(lm, p, alpha),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            lo,
            hi,
            1e-10,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        if r > best.1 {
            best = (p, r);
        }
    }
    for &p in extra {
        if p >= 1.0 && p <= opts.p_max {
            let r = ratio_from_log_moment(log_moment(p)?, p, alpha);
            if r > best.1 {
                best = (p, r);
            }
        }
    }
    Ok((best.1, best.0))
}

/// Moment-grid Orlicz norm of a catalogue distribution.
pub fn psi_norm(spec: &DistributionSpec, alpha: Alpha, opts: GridOptions) -> Result<OrliczEstimate> {
    spec.validate()?;
    let (value, p_star) = sup_ratio(|p| spec.log_abs_moment(p), alpha, opts, &[])?;
    Ok(OrliczEstimate { alpha, value, p_star, method: Method::AnalyticGrid, warning: None })
}

/// Exact-moment Orlicz norm of a finite-support variable. The grid is
/// extended by doubling `p_max` until the tail is certified.
pub fn psi_norm_finite(d: &FiniteDist, alpha: Alpha) -> Result<OrliczEstimate> {
    psi_norm_finite_with(d, alpha, &[])
}

pub fn psi_norm_finite_with(d: &FiniteDist, alpha: Alpha, extra: &[f64]) -> Result<OrliczEstimate> {
    let mut opts = GridOptions::default();
    loop {
        match sup_ratio(|p| Ok(d.log_abs_moment(p)), alpha, opts, extra) {
            Ok((value, p_star)) => {
                return Ok(OrliczEstimate { alpha, value, p_star, method: Method::AnalyticGrid, warning: None })
            }
            Err(Error::PMaxTooSmall { .. }) if opts.p_max < 1_048_576.0 => opts.p_max *= 2.0,
            Err(e) => return Err(e),
        }
    }
}

pub const EMPIRICAL_WARNING: &str = "empirical high-order moments are biased downward; value is not an upper bound";

/// Plug-in estimate from samples. `p_max` defaults to, and may not exceed,
/// `ln(sample count)`.
pub fn psi_norm_empirical(samples: &[f64], alpha: Alpha, p_max: Option<f64>) -> Result<OrliczEstimate> {
    if samples.is_empty() {
        return Err(Error::param("samples", "must be non-empty"));
    }
    if samples.len() < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {}", samples.len())));
    }
    let cap = (samples.len() as f64).ln();
    let p_max = p_max.unwrap_or(cap);
    if p_max > cap {
        return Err(Error::Precondition(format!("p_max {p_max} exceeds ln(sample count) = {cap:.4}")));
    }
    let abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    let m = abs.iter().copied().fold(0.0, f64::max);
    let n = samples.len() as f64;
    let log_moment = |p: f64| -> Result<f64> {
        if m == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let s: f64 = abs.iter().map(|&a| (a / m).powf(p)).sum();
        Ok((s / n).ln() + p * m.ln())
    };
    let opts = GridOptions { p_max: p_max.max(1.0), per_octave: 16 };
    let grid = opts.grid();
    let mut best = (1.0, 0.0);
    for &p in &grid {
        let r = ratio_from_log_moment(log_moment(p)?, p, alpha);
        if r > best.1 {
            best = (p, r);
        }
    }
    if best.1 > 0.0 && grid.len() > 1 {
        let i = grid.iter().position(|&p| p == best.0).unwrap_or(0);
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let (p, r) = golden_section_max(
            |p| ratio_from_log_moment(log_moment(p).unwrap_or(f64::NEG_INFINITY), p, alpha),
            lo,
            hi,
            1e-8,
        );
        if r > best.1 {
            best = (p, r);
        }
    }
    Ok(OrliczEstimate {
        alpha,
        value: best.1,
        p_star: best.0,
        method: Method::Empirical,
        warning: Some(EMPIRICAL_WARNING.to_string()),
    })
}

/// `‖X − E X‖_ψα ≤ 2‖X‖_ψα`.
pub fn centering_bound(psi_value: f64) -> f64 {
    2.0 * psi_value
}

/// Both sides of `‖E[φ(X,X′)|X]‖_ψα ≤ ‖φ(X,X′)‖_ψα` for iid `X, X′` with
/// the given finite marginal and `φ` given as a `m × m` table.
pub fn conditional_contraction_check(marginal: &FiniteDist, phi: &[Vec<f64>], alpha: Alpha) -> Result<(f64, f64)> {
    let m = marginal.len();
    if phi.len() != m || phi.iter().any(|row| row.len() != m) {
        return Err(Error::param("phi", format!("table must be {m} x {m}")));
    }
    let probs = marginal.probs();
    let cond: Vec<f64> = phi
        .iter()
        .map(|row| crate::numeric::kahan_sum(row.iter().zip(probs).map(|(v, p)| v * p)))
        .collect();
    let lhs_dist = FiniteDist::new(cond, probs.to_vec())?;
    let mut vals = Vec::with_capacity(m * m);
    let mut joint = Vec::with_capacity(m * m);
    for (i, row) in phi.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            vals.push(*v);
            joint.push(probs[i] * probs[j]);
        }
    }
    let s: f64 = crate::numeric::kahan_sum(joint.iter().copied());
    for p in &mut joint {
        *p /= s;
    }
    let rhs_dist = FiniteDist::new(vals, joint)?;
    let lhs = psi_norm_finite(&lhs_dist, alpha)?;
    // evaluating the right side at the left side's maximiser keeps the
    // comparison pointwise in p
    let rhs = psi_norm_finite_with(&rhs_dist, alpha, &[lhs.p_star])?;
    Ok((lhs.value, rhs.value))
}

/// Closed-form bounds for a centered variable with `|X| ≤ 1` and
/// `Pr{|X| > ε} ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentratedBounds {
    pub eps: f64,
    pub psi1_bound: f64,
}

impl ConcentratedBounds {
    /// `‖X‖_p ≤ 2ε^{1/p}`.
    pub fn lp_bound(&self, p: f64) -> f64 {
        2.0 * self.eps.powf(1.0 / p)
    }
}

pub fn concentrated_variable_bounds(eps: f64) -> Result<ConcentratedBounds> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", format!("must lie in (0, 1), got {eps}")));
    }
    Ok(ConcentratedBounds { eps, psi1_bound: 2.0 / (E * (1.0 / eps).ln()) })
}

/// `‖Z²‖_ψ1 ≤ 2‖Z‖²_ψ2`.
pub fn square_psi1_from_psi2(psi2_value: f64) -> f64 {
    2.0 * psi2_value * psi2_value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfCheck {
    pub beta: f64,
    pub mgf: f64,
    pub bound: f64,
}

impl MgfCheck {
    pub fn holds(&self) -> bool {
        self.mgf <= self.bound * (1.0 + 1e-9)
    }
}

/// `E[e^{βZ}]` against `exp(4e β² ‖Z‖²_ψ2)` for a centered `Z`.
pub fn mgf_bound_check(spec: &DistributionSpec, beta: f64) -> Result<MgfCheck> {
    let psi2 = psi_norm(spec, Alpha::Psi2, GridOptions::default())?.value;
    mgf_bound_check_with(spec, beta, psi2)
}

pub fn mgf_bound_check_with(spec: &DistributionSpec, beta: f64, psi2: f64) -> Result<MgfCheck> {
    let mean = spec.mean()?;
    if mean.abs() > 1e-9 {
        return Err(Error::Precondition(format!("distribution must be centered, mean is {mean}")));
    }
    let mgf = spec.mgf(beta)?;
    let bound = (4.0 * E * beta * beta * psi2 * psi2).exp();
    Ok(MgfCheck { beta, mgf, bound })
}
