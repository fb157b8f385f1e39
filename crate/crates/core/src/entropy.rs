//! Exact entropy calculus on finite-support variables.
//!
//! `S(Y) = E_Y[Y] − ln E[e^Y]` with the tilted expectation
//! `E_Y[Z] = E[Z e^Y] / E[e^Y]`, together with the integral representations
//! of the log-MGF and of `S` itself, subadditivity over product spaces and
//! the entropy bounds used by the tail theorems.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

pub use crate::finite::FiniteDist;

use crate::error::{Error, Result};
use crate::numeric::{integrate, kahan_sum, log_sum_exp, QuadOptions};
use crate::orlicz::{psi_norm_finite, Alpha};

/// Largest product-space cardinality that will be enumerated.
pub const ENUMERATION_CAP: usize = 1_000_000;

const SMALL_RANGE: f64 = 50.0;

/// `e^y − 1 − y` without cancellation near zero.
fn expm1_minus_x(y: f64) -> f64 {
    if y.abs() < 0.05 {
        let mut term = y * y / 2.0;
        let mut s = term;
        for k in 3..=12 {
            term *= y / k as f64;
            s += term;
        }
        s
    } else {
        y.exp_m1() - y
    }
}

/// `ln E[e^{Y − E Y}]`.
fn centered_log_mgf(d: &FiniteDist, mean: f64) -> f64 {
    let span = d.iter().map(|(v, _)| (v - mean).abs()).fold(0.0, f64::max);
    if span < SMALL_RANGE {
        let b = kahan_sum(d.iter().map(|(v, p)| p * expm1_minus_x(v - mean)));
        b.ln_1p()
    } else {
        let terms: Vec<f64> = d
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, p)| p.ln() + (v - mean))
            .collect();
        log_sum_exp(&terms)
    }
}

/// `ln E[e^Y]`.
pub fn log_mgf(d: &FiniteDist) -> f64 {
    let m = d.mean();
    m + centered_log_mgf(d, m)
}

/// `S(Y) = E_Y[Y] − ln E[e^Y]`.
pub fn entropy(d: &FiniteDist) -> f64 {
    let m = d.mean();
    let span = d.iter().map(|(v, _)| (v - m).abs()).fold(0.0, f64::max);
    if span == 0.0 {
        return 0.0;
    }
    if span < SMALL_RANGE {
        // with Y' = Y − EY:  E[Y' e^{Y'}] = E[Y' (e^{Y'} − 1)],  E[e^{Y'}] = 1 + E[e^{Y'} − 1 − Y']
        let a = kahan_sum(d.iter().map(|(v, p)| p * (v - m) * (v - m).exp_m1()));
        let b = kahan_sum(d.iter().map(|(v, p)| p * expm1_minus_x(v - m)));
        a / (1.0 + b) - b.ln_1p()
    } else {
        let w = tilt_weights(d);
        let tilted_mean = kahan_sum(d.values().iter().zip(&w).map(|(v, w)| w * (v - m)));
        tilted_mean - centered_log_mgf(d, m)
    }
}

fn tilt_weights(d: &FiniteDist) -> Vec<f64> {
    let logs: Vec<f64> = d
        .iter()
        .map(|(v, p)| if p > 0.0 { p.ln() + v } else { f64::NEG_INFINITY })
        .collect();
    let z = log_sum_exp(&logs);
    logs.iter().map(|l| (l - z).exp()).collect()
}

/// `E_Y[g] = E[g e^Y] / E[e^Y]`, with `g` aligned to the support of `Y`.
pub fn tilted_expect(d: &FiniteDist, g: &[f64]) -> Result<f64> {
    if g.len() != d.len() {
        return Err(Error::LengthMismatch { what: "g/support", left: g.len(), right: d.len() });
    }
    let w = tilt_weights(d);
    Ok(kahan_sum(w.iter().zip(g).map(|(w, g)| w * g)))
}

/// Variance of `Y` under the tilt `e^{sY}`.
fn tilted_variance(d: &FiniteDist, s: f64) -> f64 {
    let tilt = d.scaled(s);
    let w = tilt_weights(&tilt);
    let mu = kahan_sum(w.iter().zip(d.values()).map(|(w, v)| w * v));
    kahan_sum(w.iter().zip(d.values()).map(|(w, v)| w * (v - mu) * (v - mu)))
}

/// Both sides of `ln E[e^{β(Y − EY)}] = β ∫₀^β S(γY)/γ² dγ`.
pub fn log_mgf_via_entropy(d: &FiniteDist, beta: f64, tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if !beta.is_finite() {
        return Err(Error::param("beta", "must be finite"));
    }
    if beta == 0.0 {
        return Ok((0.0, 0.0));
    }
    let m = d.mean();
    let direct = centered_log_mgf(&d.scaled(beta), beta * m);
    let half_var = d.variance() / 2.0;
    let opts = QuadOptions { abs_tol: tol / (10.0 * beta.abs()), rel_tol: 1e-12, max_segments: 4000 };
    let integral = integrate(
        |g| if g.abs() < 1e-6 { half_var } else { entropy(&d.scaled(g)) / (g * g) },
        0.0,
        beta,
        &[],
        opts,
    )?;
    Ok((direct, beta * integral))
}

/// `∫₀¹ ∫ₜ¹ Var_{sY}(Y) ds dt`, evaluated as a nested quadrature.
pub fn fluctuation_entropy(d: &FiniteDist, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if d.variance() == 0.0 {
        return Ok(0.0);
    }
    let inner_opts = QuadOptions { abs_tol: tol / 100.0, rel_tol: 1e-13, max_segments: 2000 };
    let outer_opts = QuadOptions { abs_tol: tol / 10.0, rel_tol: 1e-12, max_segments: 2000 };
    let mut inner_err = None;
    let v = integrate(
        |t| match integrate(|s| tilted_variance(d, s), t, 1.0, &[], inner_opts) {
            Ok(x) => x,
            Err(e) => {
                inner_err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        &[],
        outer_opts,
    )?;
    match inner_err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProductTable {
    #[serde(default)]
    n: Option<usize>,
    coordinate_supports: Vec<FiniteDist>,
    f_table: Vec<f64>,
}

/// A function tabulated on the full product of independent finite
/// coordinates. Points are indexed row-major: the first coordinate varies
/// slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProductTable", into = "RawProductTable")]
pub struct ProductTable {
    supports: Vec<FiniteDist>,
    table: Vec<f64>,
    strides: Vec<usize>,
}

impl TryFrom<RawProductTable> for ProductTable {
    type Error = Error;
    fn try_from(raw: RawProductTable) -> Result<Self> {
        if let Some(n) = raw.n {
            if n != raw.coordinate_supports.len() {
                return Err(Error::LengthMismatch { what: "n/coordinate_supports", left: n, right: raw.coordinate_supports.len() });
            }
        }
        ProductTable::new(raw.coordinate_supports, raw.f_table)
    }
}

impl From<ProductTable> for RawProductTable {
    fn from(p: ProductTable) -> Self {
        RawProductTable { n: Some(p.supports.len()), coordinate_supports: p.supports, f_table: p.table }
    }
}

fn product_size(supports: &[FiniteDist]) -> Result<usize> {
    let mut size: usize = 1;
    for s in supports {
        size = size.saturating_mul(s.len());
    }
    if size > ENUMERATION_CAP {
        return Err(Error::CapExceeded { size, cap: ENUMERATION_CAP });
    }
    Ok(size)
}

impl ProductTable {
    pub fn new(supports: Vec<FiniteDist>, table: Vec<f64>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::param("coordinate_supports", "need at least one coordinate"));
        }
        let size = product_size(&supports)?;
        if table.len() != size {
            return Err(Error::LengthMismatch { what: "f_table/product size", left: table.len(), right: size });
        }
        if let Some(i) = table.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("f_table[{i}]"), "must be finite"));
        }
        let mut strides = vec![1; supports.len()];
        for k in (0..supports.len() - 1).rev() {
            strides[k] = strides[k + 1] * supports[k + 1].len();
        }
        Ok(ProductTable { supports, table, strides })
    }

    /// Tabulate `f` over every point of the product of the supports' values.
    pub fn from_fn(supports: Vec<FiniteDist>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let size = product_size(&supports)?;
        let mut table = Vec::with_capacity(size);
        let mut x = vec![0.0; supports.len()];
        for i in 0..size {
            let mut rem = i;
            for k in (0..supports.len()).rev() {
                let m = supports[k].len();
                x[k] = supports[k].values()[rem % m];
                rem /= m;
            }
            table.push(f(&x));
        }
        ProductTable::new(supports, table)
    }

    pub fn n(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[FiniteDist] {
        &self.supports
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn cardinality(&self) -> usize {
        self.table.len()
    }

    /// Support index of coordinate `k` at flat point `i`.
    pub fn coord_index(&self, i: usize, k: usize) -> usize {
        (i / self.strides[k]) % self.supports[k].len()
    }

    /// Probability of flat point `i`.
    pub fn point_prob(&self, i: usize) -> f64 {
        (0..self.n()).map(|k| self.supports[k].probs()[self.coord_index(i, k)]).product()
    }

    /// Law of `f(X)`.
    pub fn joint(&self) -> FiniteDist {
        let probs: Vec<f64> = (0..self.cardinality()).map(|i| self.point_prob(i)).collect();
        let s = kahan_sum(probs.iter().copied());
        let probs = probs.into_iter().map(|p| p / s).collect();
        FiniteDist::new(self.table.clone(), probs).expect("product of valid marginals")
    }

    /// Law of `f_k(X)(x)`: coordinate `k` resampled at base point `i`,
    /// centered by its conditional mean.
    pub fn conditional_version(&self, k: usize, i: usize) -> FiniteDist {
        let base = i - self.coord_index(i, k) * self.strides[k];
        let marg = &self.supports[k];
        let vals: Vec<f64> = (0..marg.len()).map(|j| self.table[base + j * self.strides[k]]).collect();
        let mean = kahan_sum(vals.iter().zip(marg.probs()).map(|(v, p)| v * p));
        FiniteDist::new(vals.into_iter().map(|v| v - mean).collect(), marg.probs().to_vec())
            .expect("marginal probabilities already validated")
    }

    pub fn mean(&self) -> f64 {
        kahan_sum((0..self.cardinality()).map(|i| self.point_prob(i) * self.table[i]))
    }
}

/// `S_{γf,k}(x)` for every coordinate `k` (outer index) and flat point `x`
/// (inner index).
pub fn conditional_entropy_table(pt: &ProductTable, gamma: f64) -> Result<Vec<Vec<f64>>> {
    if !gamma.is_finite() {
        return Err(Error::param("gamma", "must be finite"));
    }
    Ok((0..pt.n())
        .map(|k| {
            (0..pt.cardinality())
                .map(|i| entropy(&pt.conditional_version(k, i).scaled(gamma)))
                .collect()
        })
        .collect())
}

/// `E_{γf(X)}[Σ_k S_{γf,k}(X)] − S(γf(X))`.
pub fn subadditivity_gap(pt: &ProductTable, gamma: f64) -> Result<f64> {
    let cond = conditional_entropy_table(pt, gamma)?;
    let summed: Vec<f64> = (0..pt.cardinality()).map(|i| kahan_sum(cond.iter().map(|row| row[i]))).collect();
    let joint = pt.joint().scaled(gamma);
    Ok(tilted_expect(&joint, &summed)? - entropy(&joint))
}

/// Entropy next to its sub-Gaussian bounds:
/// `ln E[e^{2βY}]` and `16e β² ‖Y‖²_ψ2`, both for the centered `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubGaussianEntropy {
    pub s: f64,
    pub bound_i: f64,
    pub bound_ii: f64,
    pub bound: f64,
}

pub fn entropy_bound_subgaussian(d: &FiniteDist, beta: f64) -> Result<SubGaussianEntropy> {
    if !beta.is_finite() {
        return Err(Error::param("beta", "must be finite"));
    }
    let c = d.centered();
    let s = entropy(&c.scaled(beta));
    let bound_i = centered_log_mgf(&c.scaled(2.0 * beta), 0.0).max(0.0);
    let psi2 = psi_norm_finite(&c, Alpha::Psi2)?.value;
    let bound_ii = 16.0 * E * beta * beta * psi2 * psi2;
    Ok(SubGaussianEntropy { s, bound_i, bound_ii, bound: bound_i.min(bound_ii) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBound {
    pub s: f64,
    pub bound: f64,
}

impl EntropyBound {
    pub fn slack(&self) -> f64 {
        self.bound - self.s
    }
}

const MEAN_TOL: f64 = 1e-12;

fn require_centered(d: &FiniteDist) -> Result<()> {
    let m = d.mean();
    if m.abs() > MEAN_TOL {
        return Err(Error::HypothesisNotMet(format!("E[Y] = {m:e}, expected 0")));
    }
    Ok(())
}

/// `S(Y) ≤ e²‖Y‖²_ψ1 / (1 − e‖Y‖_ψ1)²` for centered `Y` with `‖Y‖_ψ1 < 1/e`.
pub fn entropy_bound_subexponential(d: &FiniteDist) -> Result<EntropyBound> {
    require_centered(d)?;
    let psi1 = psi_norm_finite(d, Alpha::Psi1)?.value;
    if !(E * psi1 < 1.0) {
        return Err(Error::HypothesisNotMet(format!("‖Y‖_ψ1 = {psi1} is not below 1/e")));
    }
    let bound = (E * psi1).powi(2) / (1.0 - E * psi1).powi(2);
    Ok(EntropyBound { s: entropy(d), bound })
}

/// `S(Y) ≤ ‖Y²‖_p / (2(1 − e a)²)` with `a = q‖Y‖_ψ1`, or `a = √q‖Y‖_ψ2`
/// for the sub-Gaussian variant, where `1/p + 1/q = 1`.
pub fn entropy_bound_holder(d: &FiniteDist, p: f64, variant: Alpha) -> Result<EntropyBound> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    require_centered(d)?;
    let q = p / (p - 1.0);
    let a = match variant {
        Alpha::Psi1 => q * psi_norm_finite(d, Alpha::Psi1)?.value,
        Alpha::Psi2 => q.sqrt() * psi_norm_finite(d, Alpha::Psi2)?.value,
    };
    if !(E * a < 1.0) {
        return Err(Error::HypothesisNotMet(format!("scaled norm {a} is not below 1/e")));
    }
    let sq_norm = (d.log_abs_moment(2.0 * p) / p).exp();
    Ok(EntropyBound { s: entropy(d), bound: sq_norm / (2.0 * (1.0 - E * a).powi(2)) })
}
