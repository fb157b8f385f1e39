//! Catalogue of scalar and vector random sources.
//!
//! A [`DistributionSpec`] is a declarative description: a base law
//! (Gaussian, exponential, uniform, Poisson, chi-squared or a finite
//! support) optionally wrapped in shifts, scalings, squaring and centering.
//! Moments are computed in log space so that `‖X‖_p` stays representable
//! for large `p`: closed forms where they exist, exact sums on discrete
//! supports, and adaptive quadrature otherwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::{golden_section_max, integrate, kahan_sum, log_sum_exp, QuadOptions};
use crate::rng;

/// Tolerance on the total mass of a finite support.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DistributionSpec {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Rademacher,
    UniformInterval { lo: f64, hi: f64 },
    Poisson { rate: f64 },
    ChiSquared { dof: u32 },
    /// `+1` and `-1` with probability `eps/2` each, `0` otherwise.
    TwoPointEps { eps: f64 },
    FiniteSupport { values: Vec<f64>, probs: Vec<f64> },
    Shifted { base: Box<DistributionSpec>, offset: f64 },
    Scaled { base: Box<DistributionSpec>, factor: f64 },
    SquareOf { base: Box<DistributionSpec> },
    Centered { base: Box<DistributionSpec> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Euclidean,
}

/// A random vector with independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpec {
    pub dim: usize,
    pub components: Vec<DistributionSpec>,
    #[serde(default)]
    pub norm_kind: NormKind,
}

impl VectorSpec {
    pub fn iid(dim: usize, component: DistributionSpec) -> Self {
        VectorSpec {
            dim,
            components: vec![component; dim],
            norm_kind: NormKind::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.components.len() != self.dim {
            return Err(Error::param(
                "components",
                format!("expected {} components, got {}", self.dim, self.components.len()),
            ));
        }
        for (i, c) in self.components.iter().enumerate() {
            c.validate().map_err(|e| prefix_field(e, &format!("components[{i}]")))?;
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<VectorSampler> {
        self.validate()?;
        Ok(VectorSampler {
            coords: self
                .components
                .iter()
                .map(DistributionSpec::sampler)
                .collect::<Result<_>>()?,
        })
    }

    /// True when every coordinate is the same centered Gaussian; the
    /// Euclidean norm is then a scaled chi variable.
    pub fn iid_centered_gaussian_sd(&self) -> Option<f64> {
        let mut sd = None;
        for c in &self.components {
            match c {
                DistributionSpec::Gaussian { mean, sd: s } if *mean == 0.0 => match sd {
                    None => sd = Some(*s),
                    Some(prev) if prev == *s => {}
                    _ => return None,
                },
                _ => return None,
            }
        }
        sd
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Elementary transformation applied to a base draw.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Affine { scale: f64, shift: f64 },
    Square,
}

fn apply_ops(ops: &[Op], mut x: f64) -> f64 {
    for op in ops {
        x = match *op {
            Op::Affine { scale, shift } => scale * x + shift,
            Op::Square => x * x,
        };
    }
    x
}

fn push_affine(ops: &mut Vec<Op>, scale: f64, shift: f64) {
    if let Some(Op::Affine { scale: s, shift: b }) = ops.last_mut() {
        *b = scale * *b + shift;
        *s *= scale;
    } else {
        ops.push(Op::Affine { scale, shift });
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    ChiSquared { dof: u32 },
    Poisson { rate: f64 },
    Atoms { values: Vec<f64>, probs: Vec<f64> },
}

impl Base {
    fn mean(&self) -> f64 {
        match self {
            Base::Gaussian { mean, .. } => *mean,
            Base::Exponential { rate } => 1.0 / rate,
            Base::Uniform { lo, hi } => 0.5 * (lo + hi),
            Base::ChiSquared { dof } => *dof as f64,
            Base::Poisson { rate } => *rate,
            Base::Atoms { values, probs } => {
                kahan_sum(values.iter().zip(probs).map(|(v, p)| v * p))
            }
        }
    }
}

struct Flat {
    base: Base,
    ops: Vec<Op>,
}

impl Flat {
    /// `Some((a, b))` when the transformation is `x ↦ a·x + b`.
    fn affine(&self) -> Option<(f64, f64)> {
        match self.ops.as_slice() {
            [] => Some((1.0, 0.0)),
            [Op::Affine { scale, shift }] => Some((*scale, *shift)),
            _ => None,
        }
    }
}

impl DistributionSpec {
    pub fn shifted(self, offset: f64) -> Self {
        DistributionSpec::Shifted { base: Box::new(self), offset }
    }
    pub fn scaled(self, factor: f64) -> Self {
        DistributionSpec::Scaled { base: Box::new(self), factor }
    }
    pub fn squared(self) -> Self {
        DistributionSpec::SquareOf { base: Box::new(self) }
    }
    pub fn centered(self) -> Self {
        DistributionSpec::Centered { base: Box::new(self) }
    }

    /// Check parameters, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        use DistributionSpec::*;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match self {
            Gaussian { mean, sd } => {
                finite("Gaussian.mean", *mean)?;
                if !(*sd > 0.0 && sd.is_finite()) {
                    return Err(Error::param("Gaussian.sd", format!("must be positive, got {sd}")));
                }
            }
            Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::param("Exponential.rate", format!("must be positive, got {rate}")));
                }
            }
            Rademacher => {}
            UniformInterval { lo, hi } => {
                finite("UniformInterval.lo", *lo)?;
                finite("UniformInterval.hi", *hi)?;
                if lo >= hi {
                    return Err(Error::param("UniformInterval.hi", format!("must exceed lo ({lo}), got {hi}")));
                }
            }
            Poisson { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::param("Poisson.rate", format!("must be positive, got {rate}")));
                }
            }
            ChiSquared { dof } => {
                if *dof == 0 {
                    return Err(Error::param("ChiSquared.dof", "must be a positive integer"));
                }
            }
            TwoPointEps { eps } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::param("TwoPointEps.eps", format!("must lie in (0, 1), got {eps}")));
                }
            }
            FiniteSupport { values, probs } => validate_finite(values, probs)
                .map_err(|e| prefix_field(e, "FiniteSupport"))?,
            Shifted { base, offset } => {
                finite("Shifted.offset", *offset)?;
                base.validate().map_err(|e| prefix_field(e, "Shifted.base"))?;
            }
            Scaled { base, factor } => {
                finite("Scaled.factor", *factor)?;
                base.validate().map_err(|e| prefix_field(e, "Scaled.base"))?;
            }
            SquareOf { base } => base.validate().map_err(|e| prefix_field(e, "SquareOf.base"))?,
            Centered { base } => base.validate().map_err(|e| prefix_field(e, "Centered.base"))?,
        }
        Ok(())
    }

    fn flatten(&self) -> Result<Flat> {
        use DistributionSpec::*;
        Ok(match self {
            Gaussian { mean, sd } => Flat { base: Base::Gaussian { mean: *mean, sd: *sd }, ops: vec![] },
            Exponential { rate } => Flat { base: Base::Exponential { rate: *rate }, ops: vec![] },
            UniformInterval { lo, hi } => Flat { base: Base::Uniform { lo: *lo, hi: *hi }, ops: vec![] },
            Poisson { rate } => Flat { base: Base::Poisson { rate: *rate }, ops: vec![] },
            ChiSquared { dof } => Flat { base: Base::ChiSquared { dof: *dof }, ops: vec![] },
            Rademacher => Flat {
                base: Base::Atoms { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] },
                ops: vec![],
            },
            TwoPointEps { eps } => Flat {
                base: Base::Atoms {
                    values: vec![-1.0, 0.0, 1.0],
                    probs: vec![eps / 2.0, 1.0 - eps, eps / 2.0],
                },
                ops: vec![],
            },
            FiniteSupport { values, probs } => Flat {
                base: Base::Atoms { values: values.clone(), probs: probs.clone() },
                ops: vec![],
            },
            Shifted { base, offset } => {
                let mut f = base.flatten()?;
                push_affine(&mut f.ops, 1.0, *offset);
                f
            }
            Scaled { base, factor } => {
                let mut f = base.flatten()?;
                push_affine(&mut f.ops, *factor, 0.0);
                f
            }
            SquareOf { base } => {
                let mut f = base.flatten()?;
                f.ops.push(Op::Square);
                f
            }
            Centered { base } => {
                let m = base.mean()?;
                let mut f = base.flatten()?;
                push_affine(&mut f.ops, 1.0, -m);
                f
            }
        })
    }

    /// Analytic mean.
    pub fn mean(&self) -> Result<f64> {
        use DistributionSpec::*;
        self.validate()?;
        Ok(match self {
            Shifted { base, offset } => base.mean()? + offset,
            Scaled { base, factor } => factor * base.mean()?,
            Centered { .. } => 0.0,
            SquareOf { base } => base.log_abs_moment(2.0)?.exp(),
            other => other.flatten()?.base.mean(),
        })
    }

    /// `E[X²] − (E X)²`.
    pub fn variance(&self) -> Result<f64> {
        let m = self.mean()?;
        Ok((self.log_abs_moment(2.0)?.exp() - m * m).max(0.0))
    }

    /// Smallest closed interval known to contain the support; unbounded
    /// ends are infinite.
    pub fn support_interval(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let flat = self.flatten()?;
        let (mut lo, mut hi) = match &flat.base {
            Base::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Base::Exponential { .. } | Base::ChiSquared { .. } | Base::Poisson { .. } => (0.0, f64::INFINITY),
            Base::Uniform { lo, hi } => (*lo, *hi),
            Base::Atoms { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (v, _)| (l.min(*v), h.max(*v))),
        };
        for op in &flat.ops {
            (lo, hi) = match *op {
                Op::Affine { scale, shift } => {
                    if scale == 0.0 {
                        (shift, shift)
                    } else {
                        let (a, b) = (scale * lo + shift, scale * hi + shift);
                        (a.min(b), a.max(b))
                    }
                }
                Op::Square => {
                    let top = (lo * lo).max(hi * hi);
                    let bottom = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { (lo * lo).min(hi * hi) };
                    (bottom, top)
                }
            };
        }
        Ok((lo, hi))
    }

    /// `sup X − inf X`, infinite for unbounded laws.
    pub fn range(&self) -> Result<f64> {
        let (lo, hi) = self.support_interval()?;
        Ok(hi - lo)
    }

    /// Exact atoms and probabilities when the law has finite support.
    pub fn finite_support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let flat = self.flatten().ok()?;
        match flat.base {
            Base::Atoms { values, probs } => Some((
                values.iter().map(|&v| apply_ops(&flat.ops, v)).collect(),
                probs,
            )),
            _ => None,
        }
    }

    /// `ln E|X|^p` for `p > 0`.
    pub fn log_abs_moment(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::param("p", format!("must be positive and finite, got {p}")));
        }
        let flat = self.flatten()?;
        if let Some((a, b)) = flat.affine() {
            if b == 0.0 {
                let scale = if a == 0.0 { f64::NEG_INFINITY } else { p * a.abs().ln() };
                if let Some(v) = base_log_abs_moment_closed(&flat.base, p) {
                    return Ok(scale + v);
                }
            }
        }
        log_expect(&flat, &|y: f64| p * y.abs().ln())
    }

    /// `(E|X|^p)^{1/p}`; requires `p ≥ 1`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::param("p", format!("must be at least 1, got {p}")));
        }
        Ok((self.log_abs_moment(p)? / p).exp())
    }

    /// `ln E[e^{βX}]`; divergence is an error.
    pub fn log_mgf(&self, beta: f64) -> Result<f64> {
        self.validate()?;
        if beta == 0.0 {
            return Ok(0.0);
        }
        let flat = self.flatten()?;
        if let Some((a, b)) = flat.affine() {
            if let Some(v) = base_log_mgf_closed(&flat.base, a * beta) {
                return v.map(|v| v + beta * b);
            }
        }
        log_expect(&flat, &|y: f64| beta * y)
    }

    pub fn mgf(&self, beta: f64) -> Result<f64> {
        Ok(self.log_mgf(beta)?.exp())
    }

    /// Compile into a sampler; centering offsets are computed once here.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let flat = self.flatten()?;
        let base = match flat.base {
            Base::Gaussian { mean, sd } => BaseSampler::Normal(
                rand_distr::Normal::new(mean, sd).map_err(|e| Error::param("Gaussian.sd", e.to_string()))?,
            ),
            Base::Exponential { rate } => BaseSampler::Exp(
                rand_distr::Exp::new(rate).map_err(|e| Error::param("Exponential.rate", e.to_string()))?,
            ),
            Base::Uniform { lo, hi } => BaseSampler::Uniform { lo, width: hi - lo },
            Base::ChiSquared { dof } => BaseSampler::ChiSquared(
                rand_distr::ChiSquared::new(dof as f64)
                    .map_err(|e| Error::param("ChiSquared.dof", e.to_string()))?,
            ),
            Base::Poisson { rate } => BaseSampler::Poisson(
                rand_distr::Poisson::new(rate).map_err(|e| Error::param("Poisson.rate", e.to_string()))?,
            ),
            Base::Atoms { values, probs } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                BaseSampler::Atoms { values, cdf }
            }
        };
        Ok(Sampler { base, ops: flat.ops })
    }
}

fn validate_finite(values: &[f64], probs: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::param("values", "must be non-empty"));
    }
    if values.len() != probs.len() {
        return Err(Error::param(
            "probs",
            format!("length {} differs from values length {}", probs.len(), values.len()),
        ));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::param(format!("values[{i}]"), "must be finite"));
    }
    if let Some(i) = probs.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::param(format!("probs[{i}]"), "must be nonnegative"));
    }
    let total = kahan_sum(probs.iter().copied());
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::param("probs", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

fn base_log_abs_moment_closed(base: &Base, p: f64) -> Option<f64> {
    use std::f64::consts::{LN_2, PI};
    match base {
        Base::Gaussian { mean, sd } if *mean == 0.0 => {
            Some(p * sd.ln() + 0.5 * p * LN_2 + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln())
        }
        Base::Exponential { rate } => Some(ln_gamma(p + 1.0) - p * rate.ln()),
        Base::ChiSquared { dof } => {
            let k = *dof as f64 / 2.0;
            Some(p * LN_2 + ln_gamma(k + p) - ln_gamma(k))
        }
        Base::Uniform { lo, hi } => {
            // E|X|^p = (sgn(hi)|hi|^{p+1} - sgn(lo)|lo|^{p+1}) / ((p+1)(hi-lo))
            let q = p + 1.0;
            let denom = q.ln() + (hi - lo).ln();
            let num = if *lo >= 0.0 {
                q * hi.ln() + ln_one_minus((lo / hi).powf(q))
            } else if *hi <= 0.0 {
                q * (-lo).ln() + ln_one_minus((hi / lo).powf(q))
            } else {
                log_sum_exp(&[q * hi.ln(), q * (-lo).ln()])
            };
            Some(num - denom)
        }
        Base::Atoms { values, probs } => Some(log_sum_exp(
            &values
                .iter()
                .zip(probs)
                .filter(|(_, &pr)| pr > 0.0)
                .map(|(v, pr)| pr.ln() + p * v.abs().ln())
                .collect::<Vec<_>>(),
        )),
        _ => None,
    }
}

fn ln_one_minus(x: f64) -> f64 {
    (-x).ln_1p()
}

/// Closed-form log-MGF of a base law at `t`; `None` when there is no closed
/// form, `Some(Err)` when the MGF diverges.
fn base_log_mgf_closed(base: &Base, t: f64) -> Option<Result<f64>> {
    if t == 0.0 {
        return Some(Ok(0.0));
    }
    Some(match base {
        Base::Gaussian { mean, sd } => Ok(t * mean + 0.5 * t * t * sd * sd),
        Base::Exponential { rate } => {
            if t < *rate {
                Ok(-(-t / rate).ln_1p())
            } else {
                Err(Error::Divergent(format!("exponential MGF at {t} >= rate {rate}")))
            }
        }
        Base::Uniform { lo, hi } => {
            let m = (t * lo).max(t * hi);
            let d = t.abs() * (hi - lo);
            Ok(m + (-(-d).exp_m1()).ln() - d.ln())
        }
        Base::Poisson { rate } => Ok(rate * t.exp_m1()),
        Base::ChiSquared { dof } => {
            if t < 0.5 {
                Ok(-0.5 * *dof as f64 * (-2.0 * t).ln_1p())
            } else {
                Err(Error::Divergent(format!("chi-squared MGF at {t} >= 1/2")))
            }
        }
        Base::Atoms { values, probs } => Ok(log_sum_exp(
            &values
                .iter()
                .zip(probs)
                .filter(|(_, &pr)| pr > 0.0)
                .map(|(v, pr)| pr.ln() + t * v)
                .collect::<Vec<_>>(),
        )),
    })
}

/// `ln E[h(Y)]` for a positive function given through `ln h`.
fn log_expect(flat: &Flat, log_h: &dyn Fn(f64) -> f64) -> Result<f64> {
    let ops = &flat.ops;
    match &flat.base {
        Base::Atoms { values, probs } => Ok(log_sum_exp(
            &values
                .iter()
                .zip(probs)
                .filter(|(_, &pr)| pr > 0.0)
                .map(|(&v, pr)| pr.ln() + log_h(apply_ops(ops, v)))
                .collect::<Vec<_>>(),
        )),
        Base::Poisson { rate } => poisson_log_expect(*rate, ops, log_h),
        Base::Gaussian { mean, sd } => {
            let (mean, sd) = (*mean, *sd);
            let c = -0.5 * (2.0 * std::f64::consts::PI).ln();
            continuous_log_integral(Domain::Line, &|u| mean + sd * u, &|u| c - 0.5 * u * u, ops, log_h)
        }
        Base::Exponential { rate } => {
            let rate = *rate;
            continuous_log_integral(Domain::HalfLine, &|u| u / rate, &|u| -u, ops, log_h)
        }
        Base::Uniform { lo, hi } => {
            let (lo, w) = (*lo, hi - lo);
            continuous_log_integral(Domain::Unit, &|u| lo + w * u, &|_| 0.0, ops, log_h)
        }
        Base::ChiSquared { dof } => {
            // x = u², density of u is 2u·f(u²) ∝ u^{k-1} e^{-u²/2}
            let k = *dof as f64;
            let c = std::f64::consts::LN_2 - 0.5 * k * std::f64::consts::LN_2 - ln_gamma(0.5 * k);
            let w = move |u: f64| {
                let poly = if *dof == 1 { 0.0 } else { (k - 1.0) * u.ln() };
                c + poly - 0.5 * u * u
            };
            continuous_log_integral(Domain::HalfLine, &|u| u * u, &w, ops, log_h)
        }
    }
}

fn poisson_log_expect(rate: f64, ops: &[Op], log_h: &dyn Fn(f64) -> f64) -> Result<f64> {
    const CUT: f64 = 60.0;
    const K_MAX: u64 = 10_000_000;
    let ln_rate = rate.ln();
    let floor_k = rate + 10.0 * rate.sqrt() + 10.0;
    let mut terms = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    let mut k: u64 = 0;
    loop {
        let kf = k as f64;
        let term = kf * ln_rate - rate - ln_gamma(kf + 1.0) + log_h(apply_ops(ops, kf));
        if term == f64::INFINITY || term.is_nan() {
            return Err(Error::Divergent("Poisson series term is not finite".into()));
        }
        terms.push(term);
        best = best.max(term);
        if kf > floor_k && term < best - CUT && term <= prev {
            break;
        }
        prev = term;
        k += 1;
        if k > K_MAX {
            return Err(Error::Divergent("Poisson series did not decay".into()));
        }
    }
    Ok(log_sum_exp(&terms))
}

#[derive(Debug, Clone, Copy)]
enum Domain {
    Line,
    HalfLine,
    Unit,
}

fn half_line_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=2048).map(|j| j as f64 / 32.0).collect();
    let mut u = 64.0;
    while u < 1e6 {
        u *= 1.02;
        g.push(u);
    }
    g
}

fn candidate_grid(domain: Domain) -> Vec<f64> {
    match domain {
        Domain::Unit => (0..=2048).map(|j| j as f64 / 2048.0).collect(),
        Domain::HalfLine => half_line_grid(),
        Domain::Line => {
            let h = half_line_grid();
            let mut g: Vec<f64> = h.iter().rev().map(|u| -u).collect();
            g.extend(h.into_iter().skip(1));
            g
        }
    }
}

/// `ln ∫ exp(w(u) + ln h(g(x(u)))) du` over the domain, integrated after
/// normalising by the maximum of the log-integrand.
fn continuous_log_integral(
    domain: Domain,
    x_of_u: &dyn Fn(f64) -> f64,
    log_w: &dyn Fn(f64) -> f64,
    ops: &[Op],
    log_h: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    const CUT: f64 = 60.0;
    let log_f = |u: f64| -> f64 {
        let v = log_w(u) + log_h(apply_ops(ops, x_of_u(u)));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let grid = candidate_grid(domain);
    let vals: Vec<f64> = grid.iter().map(|&u| log_f(u)).collect();
    if vals.contains(&f64::INFINITY) {
        return Err(Error::Divergent("integrand is infinite".into()));
    }
    let (imax, &lmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if lmax == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let thr = lmax - CUT;
    let first = vals.iter().position(|&v| v >= thr).unwrap_or(imax);
    let last = vals.iter().rposition(|&v| v >= thr).unwrap_or(imax);
    let unbounded_left = matches!(domain, Domain::Line);
    let unbounded_right = !matches!(domain, Domain::Unit);
    if (unbounded_right && last == grid.len() - 1) || (unbounded_left && first == 0) {
        return Err(Error::Divergent("integrand does not decay on the real line".into()));
    }
    let lo = grid[first.saturating_sub(1)];
    let hi = grid[(last + 1).min(grid.len() - 1)];

    // Refine the peak so the normalisation does not overflow.
    let a = grid[imax.saturating_sub(1)];
    let b = grid[(imax + 1).min(grid.len() - 1)];
    let (ustar, lpeak) = golden_section_max(log_f, a, b, 1e-12);
    let lref = lmax.max(lpeak);

    // Breakpoints: the peak and every sign change of the transformed value.
    let mut breaks = vec![ustar];
    let value = |u: f64| apply_ops(ops, x_of_u(u));
    for w in grid.windows(2) {
        if w[1] <= lo || w[0] >= hi {
            continue;
        }
        let (mut l, mut r) = (w[0], w[1]);
        let (vl, vr) = (value(l), value(r));
        if vl == 0.0 {
            breaks.push(l);
            continue;
        }
        if vl.signum() != vr.signum() && vr != 0.0 {
            for _ in 0..100 {
                let m = 0.5 * (l + r);
                if value(m).signum() == vl.signum() {
                    l = m;
                } else {
                    r = m;
                }
            }
            breaks.push(0.5 * (l + r));
        }
    }
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_segments: 4000,
    };
    let integral = integrate(|u| (log_f(u) - lref).exp(), lo, hi, &breaks, opts)?;
    if integral <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(lref + integral.ln())
}

#[derive(Debug, Clone)]
enum BaseSampler {
    Normal(rand_distr::Normal<f64>),
    Exp(rand_distr::Exp<f64>),
    Uniform { lo: f64, width: f64 },
    ChiSquared(rand_distr::ChiSquared<f64>),
    Poisson(rand_distr::Poisson<f64>),
    Atoms { values: Vec<f64>, cdf: Vec<f64> },
}

/// Compiled sampler for a [`DistributionSpec`].
#[derive(Debug, Clone)]
pub struct Sampler {
    base: BaseSampler,
    ops: Vec<Op>,
}

impl Sampler {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        use rand_distr::Distribution;
        let x = match &self.base {
            BaseSampler::Normal(d) => d.sample(rng),
            BaseSampler::Exp(d) => d.sample(rng),
            BaseSampler::Uniform { lo, width } => lo + width * rng.random::<f64>(),
            BaseSampler::ChiSquared(d) => d.sample(rng),
            BaseSampler::Poisson(d) => d.sample(rng),
            BaseSampler::Atoms { values, cdf } => {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i]
            }
        };
        apply_ops(&self.ops, x)
    }
}

#[derive(Debug, Clone)]
pub struct VectorSampler {
    coords: Vec<Sampler>,
}

impl VectorSampler {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.coords) {
            *o = s.draw(rng);
        }
    }
}

/// Draw `count` values; bit-identical for identical `(spec, seed, count)`
/// regardless of the worker count.
pub fn sample(spec: &DistributionSpec, seed: u64, count: usize) -> Result<Vec<f64>> {
    sample_with_threads(spec, seed, count, None)
}

pub fn sample_with_threads(
    spec: &DistributionSpec,
    seed: u64,
    count: usize,
    threads: Option<usize>,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let s = spec.sampler()?;
    Ok(rng::map_shards(seed, rng::tag::MAIN, count, threads, |_, len, r| {
        (0..len).map(|_| s.draw(r)).collect::<Vec<_>>()
    })
    .concat())
}

/// Draw `count` vectors, returned row-major (`count × dim`).
pub fn sample_vectors(spec: &VectorSpec, seed: u64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let s = spec.sampler()?;
    let d = s.dim();
    Ok(rng::map_shards(seed, rng::tag::MAIN, count, None, |_, len, r| {
        let mut out = vec![0.0; len * d];
        for row in out.chunks_mut(d) {
            s.draw_into(r, row);
        }
        out
    })
    .concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use DistributionSpec::*;

    fn exp1() -> DistributionSpec {
        Exponential { rate: 1.0 }
    }

    #[test]
    fn rademacher_samples_are_signs() {
        let xs = sample(&Rademacher, 7, 4).unwrap();
        assert_eq!(xs.len(), 4);
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn point_mass_samples_are_constant() {
        let spec = FiniteSupport { values: vec![0.0], probs: vec![1.0] };
        assert_eq!(sample(&spec, 123, 10).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn exponential_sample_mean() {
        let xs = sample(&exp1(), 1, 1_000_000).unwrap();
        let m = kahan_sum(xs.iter().copied()) / xs.len() as f64;
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn sampling_is_deterministic_across_threads() {
        let spec = Gaussian { mean: 1.0, sd: 2.0 }.centered().squared();
        let a = sample_with_threads(&spec, 99, 40_000, Some(1)).unwrap();
        let b = sample_with_threads(&spec, 99, 40_000, Some(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, sample(&spec, 99, 40_000).unwrap());
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let e = Gaussian { mean: 0.0, sd: -1.0 }.validate().unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { ref field, .. } if field == "Gaussian.sd"));
        let e = FiniteSupport { values: vec![0.0, 1.0], probs: vec![0.5, 0.6] }
            .validate()
            .unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { ref field, .. } if field == "FiniteSupport.probs"));
        let e = exp1().scaled(2.0).shifted(1.0).centered();
        assert!(e.validate().is_ok());
        let bad = Exponential { rate: 0.0 }.centered();
        let e = bad.validate().unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { ref field, .. } if field == "Centered.base.Exponential.rate"));
        assert!(sample(&Rademacher, 0, 0).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        assert_eq!(Rademacher.lp_norm(3.0).unwrap(), 1.0);
        assert!((exp1().lp_norm(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-13);
        let two = FiniteSupport { values: vec![0.0, 2.0], probs: vec![0.5, 0.5] };
        assert!((two.lp_norm(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(Rademacher.lp_norm(0.5).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(Rademacher.mean().unwrap(), 0.0);
        assert_eq!(Exponential { rate: 2.0 }.mean().unwrap(), 0.5);
        assert_eq!(exp1().centered().mean().unwrap(), 0.0);
        let sq = Gaussian { mean: 1.0, sd: 2.0 }.squared();
        assert!((sq.mean().unwrap() - 5.0).abs() < 1e-9);
        assert!((Poisson { rate: 3.0 }.mean().unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        // Shifting by zero forces the numeric path.
        let cases = [
            Gaussian { mean: 0.0, sd: 1.5 },
            exp1(),
            UniformInterval { lo: -1.0, hi: 3.0 },
            ChiSquared { dof: 1 },
            ChiSquared { dof: 4 },
        ];
        for spec in cases {
            for p in [1.0, 2.0, 3.5, 8.0, 64.0] {
                let closed = spec.log_abs_moment(p).unwrap();
                let forced = Centered { base: Box::new(spec.clone()) }
                    .shifted(spec.mean().unwrap())
                    .log_abs_moment(p)
                    .unwrap();
                assert!(
                    ((closed - forced) / closed.abs().max(1.0)).abs() < 1e-9,
                    "{spec:?} p={p}: {closed} vs {forced}"
                );
            }
        }
    }

    #[test]
    fn centered_exponential_first_moment() {
        // E|X - 1| = 2/e for X ~ Exp(1)
        let v = exp1().centered().lp_norm(1.0).unwrap();
        assert!((v - 2.0 / std::f64::consts::E).abs() < 1e-10, "{v}");
        // E(X - 1)^4 = 9
        let v = exp1().centered().lp_norm(4.0).unwrap();
        assert!((v - 9f64.powf(0.25)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn support_intervals() {
        assert_eq!(UniformInterval { lo: 1.0, hi: 3.0 }.scaled(-2.0).range().unwrap(), 4.0);
        assert_eq!(UniformInterval { lo: -1.0, hi: 2.0 }.squared().support_interval().unwrap(), (0.0, 4.0));
        assert_eq!(Rademacher.centered().range().unwrap(), 2.0);
        assert_eq!(exp1().range().unwrap(), f64::INFINITY);
        assert_eq!(exp1().scaled(0.0).range().unwrap(), 0.0);
        assert!((exp1().variance().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_p_moments_stay_finite() {
        let v = Gaussian { mean: 0.5, sd: 1.0 }.log_abs_moment(256.0).unwrap();
        // reference value from 30-digit quadrature
        assert!((v - 589.381394471012).abs() < 1e-8, "{v}");
        let v = exp1().centered().lp_norm(256.0).unwrap();
        // ‖X-1‖_p ≈ ‖X‖_p for large p
        let w = exp1().lp_norm(256.0).unwrap();
        assert!((v / w - 1.0).abs() < 0.01);
    }

    #[test]
    fn mgf_closed_forms_and_divergence() {
        let g = Gaussian { mean: 0.0, sd: 1.0 };
        assert!((g.mgf(1.0).unwrap() - 0.5f64.exp()).abs() < 1e-14);
        assert!((Rademacher.mgf(2.0).unwrap() - 2f64.cosh()).abs() < 1e-14);
        assert!(matches!(exp1().mgf(1.5), Err(Error::Divergent(_))));
        assert!(matches!(exp1().centered().mgf(1.0), Err(Error::Divergent(_))));
        // E e^{βZ²} = (1-2β)^{-1/2}, numeric path
        let v = g.clone().squared().mgf(0.2).unwrap();
        assert!((v - (1.0f64 - 0.4).powf(-0.5)).abs() < 1e-9, "{v}");
        assert!(matches!(g.squared().mgf(0.6), Err(Error::Divergent(_))));
        let u = UniformInterval { lo: 0.0, hi: 1.0 }.centered();
        let v = u.mgf(2.0).unwrap();
        let exact = (2f64.exp() - 1.0) / 2.0 * (-1f64).exp();
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn poisson_moments_by_series() {
        let p = Poisson { rate: 2.0 };
        // E X^2 = λ + λ²
        assert!((p.lp_norm(2.0).unwrap() - 6f64.sqrt()).abs() < 1e-12);
        let c = p.centered();
        // E (X-λ)^2 = λ
        assert!((c.lp_norm(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_point_eps_norms() {
        for eps in [0.5, 0.1, 0.01, (-5f64).exp()] {
            let s = TwoPointEps { eps };
            assert_eq!(s.mean().unwrap(), 0.0);
            for p in [1.0, 2.0, 7.0] {
                let v = s.lp_norm(p).unwrap();
                assert!((v - eps.powf(1.0 / p)).abs() < 1e-14);
                assert!(v <= 2.0 * eps.powf(1.0 / p));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = exp1().scaled(-3.0).centered();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<DistributionSpec>(&s).unwrap(), spec);
        let r: DistributionSpec = serde_json::from_str(r#"{"kind":"Rademacher"}"#).unwrap();
        assert_eq!(r, Rademacher);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"kind":"Exponential","rate":1,"x":2}"#).is_err());
    }

    #[test]
    fn vector_sampling_shape() {
        let v = VectorSpec::iid(3, Gaussian { mean: 0.0, sd: 1.0 });
        let xs = sample_vectors(&v, 5, 10).unwrap();
        assert_eq!(xs.len(), 30);
        let bad = VectorSpec { dim: 2, components: vec![Rademacher], norm_kind: NormKind::Euclidean };
        assert!(bad.validate().is_err());
        assert_eq!(v.iid_centered_gaussian_sd(), Some(1.0));
    }
}
