//! Test functions `f(X₁, …, X_n)` of independent coordinates.
//!
//! A point is stored flat: `n` coordinates of `coord_dim` reals each.
//! [`FunctionSpec::prepare`] compiles a spec once (samplers, projection
//! frames, inner expectations) into a [`PreparedFunction`] that evaluates,
//! samples and builds conditional versions.

pub mod hs;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::applications::psi_diameter;
use crate::bounds::{L2pProxy, ProxyProfile};
use crate::dist::{DistributionSpec, Sampler, VectorSampler, VectorSpec};
use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, log_sum_exp, CompensatedSum};
use crate::orlicz::{sup_ratio, Alpha, GridOptions};
use crate::rng::{self, tag};

/// Samples used for every inner expectation without a closed form.
pub const INNER_SAMPLES: usize = 100_000;
/// Fixed seed for inner expectations that are part of a function's definition.
const DEFINITION_SEED: u64 = 0x0c0f_fee0;
/// Two-sided 99.9% standard normal quantile.
pub const Z_999: f64 = 3.290_526_731_491_926;
/// Default moment order `p` of the `L_{2p}` proxies.
pub const L2P_ORDER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Loss {
    Absolute,
    /// `max(0, 1 − r)`
    Hinge,
    /// `r²/2` for `|r| ≤ κ`, `κ(|r| − κ/2)` beyond; slope at most `κ ≤ 1`.
    Huber { kappa: f64 },
}

impl Loss {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Loss::Absolute => r.abs(),
            Loss::Hinge => (1.0 - r).max(0.0),
            Loss::Huber { kappa } => {
                if r.abs() <= kappa {
                    0.5 * r * r
                } else {
                    kappa * (r.abs() - 0.5 * kappa)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Loss::Huber { kappa } = *self {
            if !(kappa > 0.0 && kappa <= 1.0) {
                return Err(Error::param("loss.kappa", format!("must lie in (0, 1], got {kappa}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProjectionNet {
    /// Projection matrices given row by row.
    Explicit { projections: Vec<Vec<Vec<f64>>> },
    /// `count` uniformly random `d`-frames.
    Random { count: usize, seed: u64 },
}

/// A function that is 1-Lipschitz in each coordinate for `|x − y|`, scaled by `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LipschitzForm {
    /// `L Σ |x_i|`
    SumAbs,
    /// `L max x_i`
    Max,
    /// `L Σ clamp(x_i, −c, c)`
    SumClipped { clip: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// `Σ x_i`
    Sum {
        components: Vec<DistributionSpec>,
    },
    /// `‖Σ (x_i − μ)‖` with `μ = E X` when `centered`, else `μ = 0`.
    VectorNormOfSum {
        vec: VectorSpec,
        n: usize,
        #[serde(default)]
        centered: bool,
    },
    /// `max_w (1/n) Σ_i [ℓ(⟨w, x_i⟩ − z_i) − E ℓ(⟨w, X⟩ − Z)]`
    SupLinearLoss {
        weights: Vec<Vec<f64>>,
        lipschitz: f64,
        loss: Loss,
        input: VectorSpec,
        output: DistributionSpec,
        n: usize,
    },
    /// `max_P (1/n) Σ_i [E ℓ(P, X) − ℓ(P, x_i)]`, `ℓ(P, x) = ‖Px − x‖²`
    PsaReconstruction {
        ambient_dim: usize,
        subspace_dim: usize,
        projection_net: ProjectionNet,
        input: VectorSpec,
        n: usize,
    },
    MetricLipschitz {
        lipschitz: f64,
        coordinate_dists: Vec<DistributionSpec>,
        form: LipschitzForm,
    },
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter { field: format!("{p}.{field}"), reason },
        other => other,
    }
}

fn positive_count(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param(name, "must be at least 1"));
    }
    Ok(())
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl FunctionSpec {
    pub fn validate(&self) -> Result<()> {
        use FunctionSpec::*;
        match self {
            Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::param("Constant.value", "must be finite"));
                }
            }
            Sum { components } => {
                positive_count("Sum.components", components.len())?;
                for (i, c) in components.iter().enumerate() {
                    c.validate().map_err(|e| prefix(e, &format!("Sum.components[{i}]")))?;
                }
            }
            VectorNormOfSum { vec, n, .. } => {
                positive_count("VectorNormOfSum.n", *n)?;
                vec.validate().map_err(|e| prefix(e, "VectorNormOfSum.vec"))?;
            }
            SupLinearLoss { weights, lipschitz, loss, input, output, n } => {
                positive_count("SupLinearLoss.n", *n)?;
                positive_count("SupLinearLoss.weights", weights.len())?;
                input.validate().map_err(|e| prefix(e, "SupLinearLoss.input"))?;
                output.validate().map_err(|e| prefix(e, "SupLinearLoss.output"))?;
                loss.validate().map_err(|e| prefix(e, "SupLinearLoss"))?;
                if !(*lipschitz >= 0.0 && lipschitz.is_finite()) {
                    return Err(Error::param("SupLinearLoss.lipschitz", "must be nonnegative and finite"));
                }
                for (i, w) in weights.iter().enumerate() {
                    if w.len() != input.dim {
                        return Err(Error::param(
                            format!("SupLinearLoss.weights[{i}]"),
                            format!("has {} entries, input dim is {}", w.len(), input.dim),
                        ));
                    }
                    if w.iter().any(|x| !x.is_finite()) || euclid(w) > lipschitz * (1.0 + 1e-12) {
                        return Err(Error::param(
                            format!("SupLinearLoss.weights[{i}]"),
                            format!("norm {} exceeds lipschitz {lipschitz}", euclid(w)),
                        ));
                    }
                }
            }
            PsaReconstruction { ambient_dim, subspace_dim, projection_net, input, n } => {
                positive_count("PsaReconstruction.n", *n)?;
                positive_count("PsaReconstruction.subspace_dim", *subspace_dim)?;
                input.validate().map_err(|e| prefix(e, "PsaReconstruction.input"))?;
                if input.dim != *ambient_dim {
                    return Err(Error::param(
                        "PsaReconstruction.input.dim",
                        format!("must equal ambient_dim {ambient_dim}, got {}", input.dim),
                    ));
                }
                if subspace_dim > ambient_dim {
                    return Err(Error::param("PsaReconstruction.subspace_dim", "exceeds ambient_dim"));
                }
                match projection_net {
                    ProjectionNet::Explicit { projections } => {
                        positive_count("PsaReconstruction.projection_net.projections", projections.len())?;
                    }
                    ProjectionNet::Random { count, .. } => positive_count("PsaReconstruction.projection_net.count", *count)?,
                }
            }
            MetricLipschitz { lipschitz, coordinate_dists, form } => {
                positive_count("MetricLipschitz.coordinate_dists", coordinate_dists.len())?;
                if !(*lipschitz >= 0.0 && lipschitz.is_finite()) {
                    return Err(Error::param("MetricLipschitz.lipschitz", "must be nonnegative and finite"));
                }
                if let LipschitzForm::SumClipped { clip } = form {
                    if !(*clip > 0.0 && clip.is_finite()) {
                        return Err(Error::param("MetricLipschitz.form.clip", "must be positive and finite"));
                    }
                }
                for (i, c) in coordinate_dists.iter().enumerate() {
                    c.validate().map_err(|e| prefix(e, &format!("MetricLipschitz.coordinate_dists[{i}]")))?;
                }
            }
        }
        Ok(())
    }

    /// Number of independent coordinates.
    pub fn n(&self) -> usize {
        use FunctionSpec::*;
        match self {
            Constant { .. } => 1,
            Sum { components } => components.len(),
            VectorNormOfSum { n, .. } | SupLinearLoss { n, .. } | PsaReconstruction { n, .. } => *n,
            MetricLipschitz { coordinate_dists, .. } => coordinate_dists.len(),
        }
    }

    /// Reals per coordinate.
    pub fn coord_dim(&self) -> usize {
        use FunctionSpec::*;
        match self {
            Constant { .. } => 0,
            Sum { .. } | MetricLipschitz { .. } => 1,
            VectorNormOfSum { vec, .. } => vec.dim,
            SupLinearLoss { input, .. } => input.dim + 1,
            PsaReconstruction { input, .. } => input.dim,
        }
    }

    pub fn prepare(&self) -> Result<PreparedFunction> {
        PreparedFunction::new(self)
    }
}

#[derive(Debug, Clone)]
enum CoordSampler {
    Empty,
    Scalar(Sampler),
    Vector(VectorSampler),
    Pair(VectorSampler, Sampler),
}

impl CoordSampler {
    fn draw(&self, r: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        match self {
            CoordSampler::Empty => {}
            CoordSampler::Scalar(s) => out[0] = s.draw(r),
            CoordSampler::Vector(v) => v.draw_into(r, out),
            CoordSampler::Pair(v, s) => {
                let d = v.dim();
                v.draw_into(r, &mut out[..d]);
                out[d] = s.draw(r);
            }
        }
    }
}

#[derive(Debug, Clone)]
enum NetTerms {
    Linear { weights: Vec<Vec<f64>>, loss: Loss },
    /// orthonormal columns of each projection's range
    Psa { frames: Vec<Vec<Vec<f64>>> },
}

impl NetTerms {
    fn len(&self) -> usize {
        match self {
            NetTerms::Linear { weights, .. } => weights.len(),
            NetTerms::Psa { frames } => frames.len(),
        }
    }

    fn term(&self, j: usize, c: &[f64]) -> f64 {
        match self {
            NetTerms::Linear { weights, loss } => {
                let w = &weights[j];
                let d = w.len();
                let dot: f64 = w.iter().zip(&c[..d]).map(|(a, b)| a * b).sum();
                loss.eval(dot - c[d])
            }
            NetTerms::Psa { frames } => {
                let total: f64 = c.iter().map(|x| x * x).sum();
                let kept: f64 = frames[j]
                    .iter()
                    .map(|b| {
                        let s: f64 = b.iter().zip(c).map(|(u, v)| u * v).sum();
                        s * s
                    })
                    .sum();
                -(total - kept)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Constant(f64),
    Sum,
    VectorNorm { shift: Vec<f64> },
    /// `max_j ((1/n) Σ_i term_j(c_i) + offsets_j)`
    Net { terms: NetTerms, offsets: Vec<f64> },
    Metric { lipschitz: f64, form: LipschitzForm },
}

/// A compiled [`FunctionSpec`].
#[derive(Debug, Clone)]
pub struct PreparedFunction {
    spec: FunctionSpec,
    n: usize,
    coord_dim: usize,
    coords: Vec<CoordSampler>,
    body: Body,
}

fn vector_mean(v: &VectorSpec) -> Result<Vec<f64>> {
    v.components.iter().map(|c| c.mean()).collect()
}

fn psa_frames(ambient: usize, d: usize, net: &ProjectionNet) -> Result<Vec<Vec<Vec<f64>>>> {
    let mats = match net {
        ProjectionNet::Explicit { projections } => projections
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                if rows.len() != ambient || rows.iter().any(|r| r.len() != ambient) {
                    return Err(Error::param(
                        format!("projection_net.projections[{i}]"),
                        format!("must be {ambient} x {ambient}"),
                    ));
                }
                let m = nalgebra::DMatrix::from_fn(ambient, ambient, |r, c| rows[r][c]);
                hs::frame_from_projection(&m, d).map_err(|e| prefix(e, &format!("projection_net.projections[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?,
        ProjectionNet::Random { count, seed } => (0..*count)
            .map(|j| hs::random_frame(ambient, d, &mut rng::stream(*seed, tag::PROJECTIONS + j as u64)))
            .collect(),
    };
    Ok(mats
        .iter()
        .map(|f| f.column_iter().map(|c| c.iter().copied().collect()).collect())
        .collect())
}

/// `E ℓ(P, X) = tr((I − P) Σ₂)`, `Σ₂ = diag(var) + μμᵀ`.
fn psa_expected_loss(frame: &[Vec<f64>], mean: &[f64], var: &[f64]) -> f64 {
    let total: f64 = kahan_sum(mean.iter().zip(var).map(|(m, v)| v + m * m));
    let kept: f64 = kahan_sum(frame.iter().map(|b| {
        let diag: f64 = b.iter().zip(var).map(|(u, v)| u * u * v).sum();
        let proj: f64 = b.iter().zip(mean).map(|(u, m)| u * m).sum();
        diag + proj * proj
    }));
    total - kept
}

impl PreparedFunction {
    fn new(spec: &FunctionSpec) -> Result<Self> {
        use FunctionSpec::*;
        spec.validate()?;
        let n = spec.n();
        let (coords, body) = match spec {
            Constant { value } => (vec![CoordSampler::Empty], Body::Constant(*value)),
            Sum { components } => (
                components.iter().map(|c| c.sampler().map(CoordSampler::Scalar)).collect::<Result<_>>()?,
                Body::Sum,
            ),
            VectorNormOfSum { vec, n, centered } => {
                let shift = if *centered { vector_mean(vec)? } else { vec![0.0; vec.dim] };
                (vec![CoordSampler::Vector(vec.sampler()?); *n], Body::VectorNorm { shift })
            }
            SupLinearLoss { weights, loss, input, output, n, .. } => {
                let coord = CoordSampler::Pair(input.sampler()?, output.sampler()?);
                let terms = NetTerms::Linear { weights: weights.clone(), loss: *loss };
                let d = input.dim + 1;
                let sums = rng::map_shards(DEFINITION_SEED, tag::INNER_MEAN, INNER_SAMPLES, None, |_, len, r| {
                    let mut c = vec![0.0; d];
                    let mut acc = vec![CompensatedSum::new(); terms.len()];
                    for _ in 0..len {
                        coord.draw(r, &mut c);
                        for (j, a) in acc.iter_mut().enumerate() {
                            a.add(terms.term(j, &c));
                        }
                    }
                    acc.iter().map(CompensatedSum::value).collect::<Vec<_>>()
                });
                let offsets = (0..terms.len())
                    .map(|j| -kahan_sum(sums.iter().map(|s| s[j])) / INNER_SAMPLES as f64)
                    .collect();
                (vec![coord; *n], Body::Net { terms, offsets })
            }
            PsaReconstruction { ambient_dim, subspace_dim, projection_net, input, n } => {
                let frames = psa_frames(*ambient_dim, *subspace_dim, projection_net)?;
                let mean = vector_mean(input)?;
                let var: Vec<f64> = input.components.iter().map(|c| c.variance()).collect::<Result<_>>()?;
                let offsets = frames.iter().map(|f| psa_expected_loss(f, &mean, &var)).collect();
                (vec![CoordSampler::Vector(input.sampler()?); *n], Body::Net { terms: NetTerms::Psa { frames }, offsets })
            }
            MetricLipschitz { lipschitz, coordinate_dists, form } => (
                coordinate_dists.iter().map(|c| c.sampler().map(CoordSampler::Scalar)).collect::<Result<_>>()?,
                Body::Metric { lipschitz: *lipschitz, form: *form },
            ),
        };
        Ok(PreparedFunction { spec: spec.clone(), n, coord_dim: spec.coord_dim(), coords, body })
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn point_len(&self) -> usize {
        self.n * self.coord_dim
    }

    /// Draw coordinate `k` into `out` (length `coord_dim`).
    pub fn draw_coord(&self, k: usize, r: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        self.coords[k].draw(r, out);
    }

    /// Draw a full point into `out` (length `n·coord_dim`).
    pub fn draw_point(&self, r: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        if self.coord_dim == 0 {
            return;
        }
        for (k, c) in out.chunks_mut(self.coord_dim).enumerate() {
            self.coords[k].draw(r, c);
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.point_len() {
            return Err(Error::LengthMismatch { what: "point/n*coord_dim", left: x.len(), right: self.point_len() });
        }
        Ok(())
    }

    /// `f(x)` for a flat point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn coord<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.coord_dim..(i + 1) * self.coord_dim]
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Constant(v) => *v,
            Body::Sum => x.iter().sum(),
            Body::VectorNorm { shift } => {
                let mut s = vec![0.0; self.coord_dim];
                for i in 0..self.n {
                    for ((a, v), m) in s.iter_mut().zip(self.coord(x, i)).zip(shift) {
                        *a += v - m;
                    }
                }
                euclid(&s)
            }
            Body::Net { terms, offsets } => {
                let inv = 1.0 / self.n as f64;
                (0..terms.len())
                    .map(|j| (0..self.n).map(|i| terms.term(j, self.coord(x, i))).sum::<f64>() * inv + offsets[j])
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Body::Metric { lipschitz, form } => {
                lipschitz
                    * match form {
                        LipschitzForm::SumAbs => x.iter().map(|v| v.abs()).sum(),
                        LipschitzForm::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        LipschitzForm::SumClipped { clip } => x.iter().map(|v| v.clamp(-clip, *clip)).sum(),
                    }
            }
        }
    }

    /// `f` as a function of coordinate `k` alone, the others fixed at `x`.
    pub fn conditional(&self, x: &[f64], k: usize) -> Result<Conditional<'_>> {
        self.check_point(x)?;
        if k >= self.n {
            return Err(Error::param("k", format!("coordinate {k} out of range for n = {}", self.n)));
        }
        let others = (0..self.n).filter(|&i| i != k);
        let state = match &self.body {
            Body::Constant(v) => CondState::Scalar(*v),
            Body::Sum => CondState::Scalar(others.map(|i| x[i]).sum()),
            Body::VectorNorm { shift } => {
                let mut s = vec![0.0; self.coord_dim];
                for i in others {
                    for ((a, v), m) in s.iter_mut().zip(self.coord(x, i)).zip(shift) {
                        *a += v - m;
                    }
                }
                CondState::Vector(s)
            }
            Body::Net { terms, .. } => {
                let others: Vec<usize> = others.collect();
                CondState::Vector(
                    (0..terms.len())
                        .map(|j| others.iter().map(|&i| terms.term(j, self.coord(x, i))).sum())
                        .collect(),
                )
            }
            Body::Metric { form, .. } => CondState::Scalar(match form {
                LipschitzForm::SumAbs => others.map(|i| x[i].abs()).sum(),
                LipschitzForm::Max => others.map(|i| x[i]).fold(f64::NEG_INFINITY, f64::max),
                LipschitzForm::SumClipped { clip } => others.map(|i| x[i].clamp(-clip, *clip)).sum(),
            }),
        };
        Ok(Conditional { f: self, state })
    }

    /// Closed-form `E[f(X)]` when one is available.
    pub fn closed_form_mean(&self) -> Result<Option<f64>> {
        use FunctionSpec::*;
        Ok(match &self.spec {
            Constant { value } => Some(*value),
            Sum { components } => Some(kahan_sum(components.iter().map(|c| c.mean()).collect::<Result<Vec<_>>>()?)),
            VectorNormOfSum { vec, n, centered } => {
                gaussian_sd(vec, *centered).map(|sd| chi_mean(vec.dim, sd * (*n as f64).sqrt()))
            }
            MetricLipschitz { lipschitz, coordinate_dists, form: LipschitzForm::SumAbs } => Some(
                lipschitz * kahan_sum(coordinate_dists.iter().map(|c| c.lp_norm(1.0)).collect::<Result<Vec<_>>>()?),
            ),
            _ => None,
        })
    }

    /// Draw `count` values of `f(X)` from streams `base + shard`.
    pub fn sample(&self, seed: u64, base: u64, count: usize, threads: Option<usize>) -> Vec<f64> {
        if let Body::Constant(v) = self.body {
            return vec![v; count];
        }
        let len = self.point_len();
        rng::map_shards(seed, base, count, threads, |_, m, r| {
            let mut x = vec![0.0; len];
            (0..m)
                .map(|_| {
                    self.draw_point(r, &mut x);
                    self.eval_unchecked(&x)
                })
                .collect::<Vec<_>>()
        })
        .concat()
    }

    /// `E[f(X)]` in closed form, else a Monte-Carlo mean over `budget`
    /// draws from the expectation streams with a 99.9% normal half-width.
    pub fn expectation(&self, budget: usize, seed: u64, threads: Option<usize>) -> Result<Expectation> {
        if let Some(v) = self.closed_form_mean()? {
            return Ok(Expectation { value: v, half_width: 0.0, method: ExpectationMethod::ClosedForm, samples: 0 });
        }
        if budget < 10_000 {
            return Err(Error::param("budget", format!("need at least 10000 samples, got {budget}")));
        }
        let xs = self.sample(seed, tag::EXPECTATION, budget, threads);
        let (mean, sd) = mean_sd(&xs);
        Ok(Expectation {
            value: mean,
            half_width: Z_999 * sd / (budget as f64).sqrt(),
            method: ExpectationMethod::MonteCarlo,
            samples: budget,
        })
    }
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = kahan_sum(xs.iter().copied()) / n;
    let var = kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
enum CondState {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// `c ↦ f(x₁, …, c, …, x_n)` with every coordinate but one fixed.
#[derive(Debug, Clone)]
pub struct Conditional<'a> {
    f: &'a PreparedFunction,
    state: CondState,
}

impl Conditional<'_> {
    pub fn eval(&self, c: &[f64]) -> f64 {
        match (&self.f.body, &self.state) {
            (Body::Constant(v), _) => *v,
            (Body::Sum, CondState::Scalar(rest)) => rest + c[0],
            (Body::VectorNorm { shift }, CondState::Vector(rest)) => {
                rest.iter().zip(c).zip(shift).map(|((r, v), m)| (r + v - m).powi(2)).sum::<f64>().sqrt()
            }
            (Body::Net { terms, offsets }, CondState::Vector(rest)) => {
                let inv = 1.0 / self.f.n as f64;
                (0..terms.len())
                    .map(|j| (rest[j] + terms.term(j, c)) * inv + offsets[j])
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            (Body::Metric { lipschitz, form }, CondState::Scalar(rest)) => {
                lipschitz
                    * match form {
                        LipschitzForm::SumAbs => rest + c[0].abs(),
                        LipschitzForm::Max => rest.max(c[0]),
                        LipschitzForm::SumClipped { clip } => rest + c[0].clamp(-clip, *clip),
                    }
            }
            _ => unreachable!("state built for this body"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    pub half_width: f64,
    pub method: ExpectationMethod,
    pub samples: usize,
}

/// `f(x)` for a flat point.
pub fn eval(fspec: &FunctionSpec, x: &[f64]) -> Result<f64> {
    fspec.prepare()?.eval(x)
}

/// `count` iid draws of `f(X)`.
pub fn sample_f(fspec: &FunctionSpec, seed: u64, count: usize) -> Result<Vec<f64>> {
    sample_f_with_threads(fspec, seed, count, None)
}

pub fn sample_f_with_threads(fspec: &FunctionSpec, seed: u64, count: usize, threads: Option<usize>) -> Result<Vec<f64>> {
    positive_count("count", count)?;
    Ok(fspec.prepare()?.sample(seed, tag::MAIN, count, threads))
}

pub fn expectation(fspec: &FunctionSpec, budget: usize, seed: u64) -> Result<Expectation> {
    fspec.prepare()?.expectation(budget, seed, None)
}

/// Draws of `f_k(X)(x) = f(…, X_k, …) − E f(…, X′_k, …)` at base point `x`
/// (coordinate `k` counted from 0). The conditional mean is exact for sums
/// and constants, else an inner Monte-Carlo of [`INNER_SAMPLES`] draws.
pub fn conditional_version_samples(fspec: &FunctionSpec, k: usize, x: &[f64], seed: u64, count: usize) -> Result<Vec<f64>> {
    positive_count("count", count)?;
    let f = fspec.prepare()?;
    let cond = f.conditional(x, k)?;
    let exact_mean = match fspec {
        FunctionSpec::Constant { value } => Some(*value),
        FunctionSpec::Sum { components } => match &cond.state {
            CondState::Scalar(rest) => Some(rest + components[k].mean()?),
            CondState::Vector(_) => None,
        },
        _ => None,
    };
    let d = f.coord_dim();
    let draw = |base: u64, seed: u64, m: usize| {
        rng::map_shards(seed, base, m, None, |_, len, r| {
            let mut c = vec![0.0; d];
            (0..len)
                .map(|_| {
                    f.draw_coord(k, r, &mut c);
                    cond.eval(&c)
                })
                .collect::<Vec<_>>()
        })
        .concat()
    };
    let mean = match exact_mean {
        Some(m) => m,
        None => {
            let inner = draw(tag::INNER_MEAN, rng::derive_seed(seed, k as u64), INNER_SAMPLES);
            kahan_sum(inner.iter().copied()) / INNER_SAMPLES as f64
        }
    };
    Ok(draw(tag::MAIN, seed, count).into_iter().map(|v| v - mean).collect())
}

/// Common `sd` when every coordinate is Gaussian with that `sd`, and is
/// centered either by its law or by the function.
fn gaussian_sd(v: &VectorSpec, centered: bool) -> Option<f64> {
    let mut sd = None;
    for c in &v.components {
        match c {
            DistributionSpec::Gaussian { mean, sd: s } if centered || *mean == 0.0 => match sd {
                None => sd = Some(*s),
                Some(prev) if prev == *s => {}
                _ => return None,
            },
            _ => return None,
        }
    }
    sd
}

/// `E‖Y‖` for `Y ~ N(0, s² I_d)`.
fn chi_mean(d: usize, s: f64) -> f64 {
    s * 2f64.sqrt() * (ln_gamma((d as f64 + 1.0) / 2.0) - ln_gamma(d as f64 / 2.0)).exp()
}

fn centered_components(v: &VectorSpec, centered: bool) -> Vec<DistributionSpec> {
    v.components
        .iter()
        .map(|c| if centered { c.clone().centered() } else { c.clone() })
        .collect()
}

/// `ln E‖Y‖^p` for `Y = X − μ` (or `X`), exact for iid centered Gaussian
/// coordinates, otherwise the upper bound `‖‖Y‖‖_p ≤ (Σ_j ‖Y_j‖²_{max(p,2)})^{1/2}`.
fn norm_log_moment(v: &VectorSpec, centered: bool, p: f64) -> Result<f64> {
    if let Some(sd) = gaussian_sd(v, centered) {
        let d = v.dim as f64;
        return Ok(p * sd.ln() + 0.5 * p * 2f64.ln() + ln_gamma((d + p) / 2.0) - ln_gamma(d / 2.0));
    }
    let pp = p.max(2.0);
    let terms: Vec<f64> = centered_components(v, centered)
        .iter()
        .map(|c| Ok(2.0 * c.log_abs_moment(pp)? / pp))
        .collect::<Result<_>>()?;
    Ok(0.5 * p * log_sum_exp(&terms))
}

/// `ln E‖X‖^{2p}`, exact for iid centered Gaussian coordinates, otherwise
/// from `‖‖X‖²‖_p ≤ Σ_j ‖X_j‖²_{2p}`.
fn norm_sq_log_moment(v: &VectorSpec, p: f64) -> Result<f64> {
    if let Some(sd) = gaussian_sd(v, false) {
        let d = v.dim as f64;
        return Ok(2.0 * p * sd.ln() + p * 2f64.ln() + ln_gamma(d / 2.0 + p) - ln_gamma(d / 2.0));
    }
    let pp = p.max(1.0);
    let terms: Vec<f64> = v
        .components
        .iter()
        .map(|c| Ok(c.log_abs_moment(2.0 * pp)? / pp))
        .collect::<Result<_>>()?;
    Ok(p * log_sum_exp(&terms))
}

/// `None` when the moment ratio is still increasing at `p_max`, which for
/// the catalogue means the variable is not sub-Gaussian.
fn optional_psi<F: Fn(f64) -> Result<f64>>(log_moment: F, alpha: Alpha) -> Result<Option<f64>> {
    match sup_ratio(log_moment, alpha, GridOptions::default(), &[]) {
        Ok((v, _)) => Ok(Some(v)),
        Err(Error::PMaxTooSmall { .. }) if alpha == Alpha::Psi2 => Ok(None),
        Err(e) => Err(e),
    }
}

/// `ψ_α(‖X − μ‖)` (or of `‖X‖`), an upper bound unless the coordinates are iid centered Gaussian.
pub fn norm_psi(v: &VectorSpec, centered: bool, alpha: Alpha) -> Result<Option<f64>> {
    optional_psi(|p| norm_log_moment(v, centered, p), alpha)
}

/// `ψ_α(‖X‖²)`, an upper bound unless the coordinates are iid centered Gaussian.
pub fn norm_sq_psi(v: &VectorSpec, alpha: Alpha) -> Result<Option<f64>> {
    optional_psi(|p| norm_sq_log_moment(v, p), alpha)
}

fn scalar_psi(c: &DistributionSpec, alpha: Alpha) -> Result<Option<f64>> {
    optional_psi(|p| c.log_abs_moment(p), alpha)
}

fn vector_diameter(v: &VectorSpec) -> Result<f64> {
    let r: Vec<f64> = v.components.iter().map(|c| c.range()).collect::<Result<_>>()?;
    Ok(euclid(&r))
}

fn collect_optional(xs: Vec<Option<f64>>) -> Option<Vec<f64>> {
    xs.into_iter().collect()
}

/// Analytic worst-case per-coordinate norms of the conditional versions,
/// with `L_{2p}` proxies at `p = 2`.
pub fn proxy_profile(fspec: &FunctionSpec) -> Result<ProxyProfile> {
    proxy_profile_at(fspec, L2P_ORDER)
}

/// [`proxy_profile`] with `L_{2p}` proxies at moment order `p > 1`.
pub fn proxy_profile_at(fspec: &FunctionSpec, p: f64) -> Result<ProxyProfile> {
    use FunctionSpec::*;
    fspec.validate()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    let n = fspec.n();
    let l2p = |values: Vec<f64>| Some(L2pProxy { p, values });
    let q = 2.0 * p;
    let profile = match fspec {
        Constant { .. } => ProxyProfile {
            n,
            psi1_per_coord: vec![0.0],
            psi2_per_coord: Some(vec![0.0]),
            l2p_per_coord: l2p(vec![0.0]),
            ranges: Some(vec![0.0]),
        },
        Sum { components } => {
            let centered: Vec<DistributionSpec> = components.iter().map(|c| c.clone().centered()).collect();
            let psi1 = centered
                .iter()
                .map(|c| Ok(scalar_psi(c, Alpha::Psi1)?.expect("psi1 errors propagate")))
                .collect::<Result<_>>()?;
            let psi2 = centered.iter().map(|c| scalar_psi(c, Alpha::Psi2)).collect::<Result<Vec<_>>>()?;
            ProxyProfile {
                n,
                psi1_per_coord: psi1,
                psi2_per_coord: collect_optional(psi2),
                l2p_per_coord: l2p(centered.iter().map(|c| c.lp_norm(q)).collect::<Result<_>>()?),
                ranges: Some(components.iter().map(|c| c.range()).collect::<Result<_>>()?),
            }
        }
        VectorNormOfSum { vec, n, centered } => {
            let psi1 = 2.0 * norm_psi(vec, *centered, Alpha::Psi1)?.expect("psi1 errors propagate");
            let psi2 = norm_psi(vec, *centered, Alpha::Psi2)?.map(|v| 2.0 * v);
            let lq = 2.0 * (norm_log_moment(vec, *centered, q)? / q).exp();
            ProxyProfile {
                n: *n,
                psi1_per_coord: vec![psi1; *n],
                psi2_per_coord: psi2.map(|v| vec![v; *n]),
                l2p_per_coord: l2p(vec![lq; *n]),
                ranges: Some(vec![vector_diameter(vec)?; *n]),
            }
        }
        SupLinearLoss { lipschitz, input, output, n, .. } => {
            let scale = 2.0 / *n as f64;
            let combine = |x: Option<f64>, z: Option<f64>| Some(scale * (lipschitz * x? + z?));
            let psi1 = combine(norm_psi(input, false, Alpha::Psi1)?, scalar_psi(output, Alpha::Psi1)?)
                .expect("psi1 errors propagate");
            let psi2 = combine(norm_psi(input, false, Alpha::Psi2)?, scalar_psi(output, Alpha::Psi2)?);
            let lq = scale
                * (lipschitz * (norm_log_moment(input, true, q)? / q).exp() + output.clone().centered().lp_norm(q)?);
            let range = (lipschitz * vector_diameter(input)? + output.range()?) / *n as f64;
            ProxyProfile {
                n: *n,
                psi1_per_coord: vec![psi1; *n],
                psi2_per_coord: psi2.map(|v| vec![v; *n]),
                l2p_per_coord: l2p(vec![lq; *n]),
                ranges: Some(vec![range; *n]),
            }
        }
        PsaReconstruction { input, n, .. } => {
            let scale = 2.0 / *n as f64;
            let psi1 = scale * norm_sq_psi(input, Alpha::Psi1)?.expect("psi1 errors propagate");
            let psi2 = norm_sq_psi(input, Alpha::Psi2)?.map(|v| scale * v);
            let lq = scale * (norm_sq_log_moment(input, q)? / q).exp();
            let sup_sq: f64 = input
                .components
                .iter()
                .map(|c| {
                    let (lo, hi) = c.support_interval()?;
                    Ok((lo * lo).max(hi * hi))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            ProxyProfile {
                n: *n,
                psi1_per_coord: vec![psi1; *n],
                psi2_per_coord: psi2.map(|v| vec![v; *n]),
                l2p_per_coord: l2p(vec![lq; *n]),
                ranges: Some(vec![sup_sq / *n as f64; *n]),
            }
        }
        MetricLipschitz { lipschitz, coordinate_dists, .. } => {
            let psi1 = coordinate_dists
                .iter()
                .map(|c| Ok(lipschitz * psi_diameter(c, Alpha::Psi1)?.value))
                .collect::<Result<_>>()?;
            let psi2 = coordinate_dists
                .iter()
                .map(|c| match psi_diameter(c, Alpha::Psi2) {
                    Ok(d) => Ok(Some(lipschitz * d.value)),
                    Err(Error::PMaxTooSmall { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            let lq = coordinate_dists
                .iter()
                .map(|c| Ok(2.0 * lipschitz * c.clone().centered().lp_norm(q)?))
                .collect::<Result<_>>()?;
            ProxyProfile {
                n,
                psi1_per_coord: psi1,
                psi2_per_coord: collect_optional(psi2),
                l2p_per_coord: l2p(lq),
                ranges: Some(coordinate_dists.iter().map(|c| Ok(lipschitz * c.range()?)).collect::<Result<_>>()?),
            }
        }
    };
    profile.validate()?;
    Ok(profile)
}
