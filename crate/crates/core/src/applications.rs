//! Closed-form application bounds: vector sums, principal subspaces,
//! generalization of Lipschitz classes and Lipschitz functions on metric
//! spaces with ψ-diameters.
//!
//! Out-of-domain calls are errors naming the failing inequality; nothing
//! is clamped.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::bounds::{eval_denominator, BoundKind, Denominator, TailBoundResult};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::finite::FiniteDist;
use crate::orlicz::{psi_norm, psi_norm_empirical, psi_norm_finite, sup_ratio, Alpha, GridOptions, Method};
use crate::rng::{self, tag};

/// Pairs drawn for the empirical diameter fallback.
pub const DIAMETER_PAIRS: usize = 1_000_000;
const DIAMETER_SEED: u64 = 0xd1a_3e7e5;

/// `Δ_α = ‖|X − X′|‖_ψα` for independent copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiDiameter {
    pub alpha: Alpha,
    pub value: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Named application bounds, used as identifiers in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Application {
    VectorI,
    VectorIi,
    VectorIii,
    Psa,
    Rademacher,
    Regression,
    Metric,
}

/// Which denominator the metric bound uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricForm {
    /// `4e·L²·ΣΔ² + 2e·maxΔ·t`, as displayed with the statement.
    #[default]
    Statement,
    /// `4e²·L²·ΣΔ² + 2e·L·maxΔ·t`, the general bound applied to `L·Δ`.
    ProofConsistent,
}

fn log_inv(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(-delta.ln())
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::param(name, format!("must be nonnegative and finite, got {v}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok(n as f64)
}

/// `n ≥ ln(1/δ)`, with a relative slack of `1e−12` for `δ = e^{−n}`.
fn require_n_covers(n: f64, l: f64) -> Result<()> {
    if n < l * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("n >= ln(1/delta) fails: n = {n}, ln(1/delta) = {l}")));
    }
    Ok(())
}

/// `ln(1/δ) ≥ ln 2`, i.e. `δ ≤ 1/2`.
fn require_half(delta: f64) -> Result<()> {
    if delta > 0.5 {
        return Err(Error::Precondition(format!("delta <= 1/2 fails: delta = {delta}")));
    }
    Ok(())
}

/// Deviation of `‖Σ X_k‖` above its mean at confidence `1 − δ`:
/// `4e·√(Σψ_k²·ln(1/δ)) + 4e·max ψ_k·ln(1/δ)`.
pub fn vector_bound_i(psi1_per_coord: &[f64], delta: f64) -> Result<f64> {
    let l = log_inv(delta)?;
    if psi1_per_coord.is_empty() {
        return Err(Error::param("psi1_per_coord", "must be non-empty"));
    }
    for (i, &v) in psi1_per_coord.iter().enumerate() {
        nonneg(&format!("psi1_per_coord[{i}]"), v)?;
    }
    let sq: f64 = psi1_per_coord.iter().map(|v| v * v).sum();
    let max = psi1_per_coord.iter().copied().fold(0.0, f64::max);
    Ok(4.0 * E * (sq * l).sqrt() + 4.0 * E * max * l)
}

/// `‖(1/n)ΣX_i − E X‖ ≤ 8e·ψ₁·√(2 ln(1/δ)/n)` for `n ≥ ln(1/δ) ≥ ln 2`.
pub fn vector_bound_ii(psi1: f64, n: usize, delta: f64) -> Result<f64> {
    nonneg("psi1", psi1)?;
    let nf = check_n(n)?;
    let l = log_inv(delta)?;
    require_half(delta)?;
    require_n_covers(nf, l)?;
    Ok(8.0 * E * psi1 * (2.0 * l / nf).sqrt())
}

/// `2‖‖X − E X‖‖_{2p}·√(2 ln(1/δ)/n) + 4e·q·ψ₁·ln(1/δ)/n` for `δ ≤ 1/2`, `q = p/(p−1)`.
pub fn vector_bound_iii(l2p_centered: f64, psi1: f64, p: f64, n: usize, delta: f64) -> Result<f64> {
    nonneg("l2p_centered", l2p_centered)?;
    nonneg("psi1", psi1)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    let nf = check_n(n)?;
    let l = log_inv(delta)?;
    require_half(delta)?;
    let q = p / (p - 1.0);
    Ok(2.0 * l2p_centered * (2.0 * l / nf).sqrt() + 4.0 * E * q * psi1 * l / nf)
}

/// Uniform reconstruction-error deviation over `d`-dimensional projections:
/// `16e(√d + 1)·ψ₂²·√(2 ln(2/δ)/n)` with `ψ₂ = ‖‖X‖‖_ψ2`.
pub fn psa_bound(psi2_of_norm: f64, d: usize, n: usize, delta: f64) -> Result<f64> {
    nonneg("psi2_of_norm", psi2_of_norm)?;
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    let nf = check_n(n)?;
    let l = log_inv(delta)?;
    require_half(delta)?;
    require_n_covers(nf, l)?;
    let df = d as f64;
    Ok(16.0 * E * (df.sqrt() + 1.0) * psi2_of_norm * psi2_of_norm * (2.0 * (2.0 / delta).ln() / nf).sqrt())
}

/// `E[𝓡] + 16e·L·ψ₁·√(ln(1/δ)/n)` for `n ≥ ln(1/δ)`.
pub fn rademacher_generalization_bound(rad_expectation: f64, lipschitz: f64, psi1_of_norm: f64, n: usize, delta: f64) -> Result<f64> {
    nonneg("rad_expectation", rad_expectation)?;
    nonneg("lipschitz", lipschitz)?;
    nonneg("psi1_of_norm", psi1_of_norm)?;
    let nf = check_n(n)?;
    let l = log_inv(delta)?;
    require_n_covers(nf, l)?;
    Ok(rad_expectation + 16.0 * E * lipschitz * psi1_of_norm * (l / nf).sqrt())
}

/// The explicit Rademacher complexity bound `(8/√n)(L·ψ₁(X) + ψ₁(Z))`.
pub fn regression_rademacher_bound(lipschitz: f64, psi1_x: f64, psi1_z: f64, n: usize) -> Result<f64> {
    nonneg("lipschitz", lipschitz)?;
    nonneg("psi1_x", psi1_x)?;
    nonneg("psi1_z", psi1_z)?;
    Ok(8.0 / check_n(n)?.sqrt() * (lipschitz * psi1_x + psi1_z))
}

/// `(8/√n)(L·ψ₁(X) + ψ₁(Z))(1 + 2e·√ln(1/δ))` for `n ≥ ln(1/δ)`.
pub fn regression_bound(lipschitz: f64, psi1_x: f64, psi1_z: f64, n: usize, delta: f64) -> Result<f64> {
    let rad = regression_rademacher_bound(lipschitz, psi1_x, psi1_z, n)?;
    let l = log_inv(delta)?;
    require_n_covers(n as f64, l)?;
    Ok(rad * (1.0 + 2.0 * E * l.sqrt()))
}

/// `(a, b)` of the metric bound.
pub fn metric_denominator(lipschitz: f64, diameters: &[f64], form: MetricForm) -> Result<Denominator> {
    nonneg("lipschitz", lipschitz)?;
    if diameters.is_empty() {
        return Err(Error::param("diameters", "must be non-empty"));
    }
    for (i, &v) in diameters.iter().enumerate() {
        nonneg(&format!("diameters[{i}]"), v)?;
    }
    let sq: f64 = diameters.iter().map(|v| v * v).sum();
    let max = diameters.iter().copied().fold(0.0, f64::max);
    let l2 = lipschitz * lipschitz;
    Ok(match form {
        MetricForm::Statement => Denominator { a: 4.0 * E * l2 * sq, b: 2.0 * E * max },
        MetricForm::ProofConsistent => Denominator { a: 4.0 * E * E * l2 * sq, b: 2.0 * E * lipschitz * max },
    })
}

/// `Pr{f − E f > t}` for `f` `L`-Lipschitz in each coordinate with ψ₁-diameters `Δ_i`.
pub fn metric_tail(lipschitz: f64, diameters: &[f64], t: f64, form: MetricForm) -> Result<TailBoundResult> {
    eval_denominator(BoundKind::Thm6, metric_denominator(lipschitz, diameters, form)?, t)
}

/// Law of `|X − X′|` for a finite support, atoms merged.
fn finite_difference_law(values: &[f64], probs: &[f64]) -> Result<FiniteDist> {
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(values.len() * values.len());
    for (x, p) in values.iter().zip(probs) {
        for (y, q) in values.iter().zip(probs) {
            if p * q > 0.0 {
                atoms.push(((x - y).abs(), p * q));
            }
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (v, p) in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    let total: f64 = merged.iter().map(|a| a.1).sum();
    FiniteDist::new(merged.iter().map(|a| a.0).collect(), merged.iter().map(|a| a.1 / total).collect())
}

/// `Δ_α(μ)` for the metric `|x − y|`. Exact on finite supports, closed
/// form for Gaussian, exponential and uniform laws (and their shifts and
/// scalings), otherwise an empirical estimate from [`DIAMETER_PAIRS`]
/// independent pairs, flagged with a warning.
pub fn psi_diameter(spec: &DistributionSpec, alpha: Alpha) -> Result<PsiDiameter> {
    use DistributionSpec::*;
    spec.validate()?;
    if let Some((values, probs)) = spec.finite_support() {
        let est = psi_norm_finite(&finite_difference_law(&values, &probs)?, alpha)?;
        return Ok(PsiDiameter { alpha, value: est.value, method: Method::AnalyticGrid, warning: None });
    }
    let analytic = |value: f64| Ok(PsiDiameter { alpha, value, method: Method::AnalyticGrid, warning: None });
    match spec {
        Shifted { base, .. } | Centered { base } => psi_diameter(base, alpha),
        Scaled { base, factor } => {
            let d = psi_diameter(base, alpha)?;
            Ok(PsiDiameter { value: factor.abs() * d.value, ..d })
        }
        Gaussian { sd, .. } => {
            analytic(psi_norm(&Gaussian { mean: 0.0, sd: std::f64::consts::SQRT_2 * sd }, alpha, GridOptions::default())?.value)
        }
        Exponential { rate } => analytic(psi_norm(&Exponential { rate: *rate }, alpha, GridOptions::default())?.value),
        UniformInterval { lo, hi } => {
            let w = hi - lo;
            if w == 0.0 {
                return analytic(0.0);
            }
            // E|X − X′|^p = 2w^p / ((p + 1)(p + 2))
            let lm = |p: f64| Ok(2f64.ln() + p * w.ln() - (p + 1.0).ln() - (p + 2.0).ln());
            analytic(sup_ratio(lm, alpha, GridOptions::default(), &[])?.0)
        }
        _ => {
            let sampler = spec.sampler()?;
            let diffs = rng::map_shards(DIAMETER_SEED, tag::DIAMETER, DIAMETER_PAIRS, None, |_, len, r| {
                (0..len).map(|_| sampler.draw(r) - sampler.draw(r)).collect::<Vec<_>>()
            })
            .concat();
            let est = psi_norm_empirical(&diffs, alpha, None)?;
            Ok(PsiDiameter { alpha, value: est.value, method: Method::Empirical, warning: est.warning })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{invert_tail, thm2_tail, ProxyProfile};
    use DistributionSpec::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn vector_i_identical_entries() {
        let (c, n, delta) = (0.7, 9usize, 0.05);
        let l = -f64::ln(delta);
        let want = 4.0 * E * c * ((n as f64 * l).sqrt() + l);
        assert!(close(vector_bound_i(&vec![c; n], delta).unwrap(), want, 1e-14));
        assert!(vector_bound_i(&[1.0], 1.0 - 1e-15).unwrap() < 1e-6);
    }

    #[test]
    fn vector_i_matches_thm2_inversion_on_doubled_profile() {
        let psi = [0.3, 1.2, 0.8, 2.0];
        let doubled = ProxyProfile::from_psi1(psi.iter().map(|v| 2.0 * v).collect());
        for delta in [0.5, 0.1, 1e-6] {
            let inv = invert_tail(BoundKind::Thm2, &doubled, None, delta).unwrap();
            assert!(close(vector_bound_i(&psi, delta).unwrap(), inv.additive, 1e-12));
        }
    }

    #[test]
    fn vector_ii_examples() {
        let v = vector_bound_ii(1.0, 100, 0.01).unwrap();
        assert!(close(v, 8.0 * E * (2.0 * 100f64.ln() / 100.0).sqrt(), 1e-14));
        assert!((v - 6.60).abs() < 0.01);
        assert!(close(vector_bound_ii(1.0, 1, 0.5).unwrap(), 8.0 * E * (2.0 * 2f64.ln()).sqrt(), 1e-14));
        let ratio = vector_bound_ii(1.0, 50, 0.1).unwrap() / vector_bound_ii(1.0, 100, 0.1).unwrap();
        assert!(close(ratio, 2f64.sqrt(), 1e-14));
        assert!(matches!(vector_bound_ii(1.0, 2, 0.01), Err(Error::Precondition(_))));
        assert!(matches!(vector_bound_ii(1.0, 100, 0.6), Err(Error::Precondition(_))));
    }

    #[test]
    fn vector_iii_domain_and_comparison() {
        assert!(vector_bound_iii(1.0, 1.0, 2.0, 10, 0.5).unwrap().is_finite());
        assert!(matches!(vector_bound_iii(1.0, 1.0, 2.0, 10, 0.6), Err(Error::Precondition(_))));
        let iii = vector_bound_iii(0.1, 1.0, 2.0, 10_000, 0.01).unwrap();
        let ii = vector_bound_ii(1.0, 10_000, 0.01).unwrap();
        assert!(iii < ii);
    }

    #[test]
    fn psa_examples() {
        let v = psa_bound(1.0, 1, 100, 0.02).unwrap();
        assert!(close(v, 32.0 * E * (2.0 * 100f64.ln() / 100.0).sqrt(), 1e-14));
        let (psi2, d, n, delta) = (0.9f64, 4, 500, 0.05f64);
        let half = delta / 2.0;
        let term = |scale: f64| 8.0 * E * scale * (2.0 * psi2 * psi2) * (2.0 * (1.0 / half).ln() / n as f64).sqrt();
        let recomposed = term((d as f64).sqrt()) + term(1.0);
        assert!(close(psa_bound(psi2, d, n, delta).unwrap(), recomposed, 1e-12));
    }

    #[test]
    fn rademacher_and_regression() {
        let delta = (-3.0f64).exp();
        assert!(close(rademacher_generalization_bound(0.0, 1.0, 1.0, 3, delta).unwrap(), 16.0 * E, 1e-12));
        let a = rademacher_generalization_bound(0.5, 2.0, 1.0, 40, 0.1).unwrap() - 0.5;
        let b = rademacher_generalization_bound(0.0, 1.0, 1.0, 40, 0.1).unwrap();
        assert!(close(a, 2.0 * b, 1e-14));
        let r = regression_bound(1.0, 1.0, 0.0, 100, 1.0 / E).unwrap();
        assert!(close(r, 0.8 * (1.0 + 2.0 * E), 1e-14));
        assert!(close(regression_bound(1.0, 0.3, 0.7, 50, 0.1).unwrap(), regression_bound(1.0, 0.7, 0.3, 50, 0.1).unwrap(), 1e-14));
        assert!(matches!(regression_bound(1.0, 1.0, 1.0, 2, 0.01), Err(Error::Precondition(_))));
    }

    #[test]
    fn metric_tail_forms() {
        let r = metric_tail(1.0, &[0.0, 0.0], 1.0, MetricForm::Statement).unwrap();
        assert_eq!(r.prob, 0.0);
        assert!(r.note.is_some());
        let (n, c) = (5, 0.4);
        let r = metric_tail(1.0, &vec![c; n], 1.0, MetricForm::Statement).unwrap();
        assert!(close(r.prob, (-1.0 / (4.0 * E * n as f64 * c * c + 2.0 * E * c)).exp(), 1e-14));
        let pc = metric_tail(1.7, &vec![c; n], 2.0, MetricForm::ProofConsistent).unwrap();
        let thm2 = thm2_tail(&ProxyProfile::uniform(n, 1.7 * c), 2.0).unwrap();
        assert!(close(pc.prob, thm2.prob, 1e-14));
    }

    #[test]
    fn diameters() {
        assert_eq!(psi_diameter(&FiniteSupport { values: vec![3.0], probs: vec![1.0] }, Alpha::Psi1).unwrap().value, 0.0);
        // |X − X′| ∈ {0, 2} w.p. 1/2 each: sup_p 2·2^{−1/p}/p is attained at p = 1
        let rad = psi_diameter(&Rademacher, Alpha::Psi1).unwrap().value;
        assert!(close(rad, 1.0, 1e-12));
        let g = psi_diameter(&Gaussian { mean: 1.0, sd: 2.0 }, Alpha::Psi2).unwrap().value;
        let scaled = psi_diameter(&Gaussian { mean: 0.0, sd: 1.0 }.scaled(-2.0), Alpha::Psi2).unwrap().value;
        assert!(close(g, scaled, 1e-9));
        let e = psi_diameter(&Exponential { rate: 1.0 }, Alpha::Psi1).unwrap();
        assert!(close(e.value, 1.0, 1e-6));
    }

    #[test]
    fn uniform_diameter_matches_monte_carlo_moments() {
        // E|X − X′|² = w²/6 for uniform width w
        let w = 3.0f64;
        let lm2 = 2f64.ln() + 2.0 * w.ln() - 3f64.ln() - 4f64.ln();
        assert!(close(lm2.exp(), w * w / 6.0, 1e-14));
        let d = psi_diameter(&UniformInterval { lo: 1.0, hi: 4.0 }, Alpha::Psi1).unwrap();
        assert!(d.value > 0.0 && d.value <= w);
    }
}
