//! Exact finite-support random variables.

use serde::{Deserialize, Serialize};

use crate::dist::PROB_SUM_TOL;
use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, log_sum_exp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiniteDist {
    values: Vec<f64>,
    probs: Vec<f64>,
}

/// A real random variable taking finitely many values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFiniteDist", into = "RawFiniteDist")]
pub struct FiniteDist {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawFiniteDist> for FiniteDist {
    type Error = Error;
    fn try_from(raw: RawFiniteDist) -> Result<Self> {
        FiniteDist::new(raw.values, raw.probs)
    }
}

impl From<FiniteDist> for RawFiniteDist {
    fn from(d: FiniteDist) -> Self {
        RawFiniteDist { values: d.values, probs: d.probs }
    }
}

impl FiniteDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("values", "must be non-empty"));
        }
        if values.len() != probs.len() {
            return Err(Error::LengthMismatch { what: "values/probs", left: values.len(), right: probs.len() });
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
        Ok(FiniteDist { values, probs })
    }

    /// Equal weights on the given values.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        FiniteDist::new(values, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(v: f64) -> Self {
        FiniteDist { values: vec![v], probs: vec![1.0] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        kahan_sum(self.iter().map(|(v, p)| v * p))
    }

    /// `E[g(Y)]` for a function given on the support.
    pub fn expect_with(&self, g: impl Fn(f64) -> f64) -> f64 {
        kahan_sum(self.iter().map(|(v, p)| p * g(v)))
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> FiniteDist {
        FiniteDist { values: self.values.iter().map(|&v| g(v)).collect(), probs: self.probs.clone() }
    }

    pub fn scaled(&self, c: f64) -> FiniteDist {
        self.map(|v| c * v)
    }

    pub fn shifted(&self, c: f64) -> FiniteDist {
        self.map(|v| v + c)
    }

    pub fn centered(&self) -> FiniteDist {
        let m = self.mean();
        self.shifted(-m)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect_with(|v| (v - m) * (v - m))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().filter(|(_, p)| *p > 0.0).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }

    /// `ln E|Y|^p`.
    pub fn log_abs_moment(&self, p: f64) -> f64 {
        let terms: Vec<f64> = self
            .iter()
            .filter(|(_, pr)| *pr > 0.0)
            .map(|(v, pr)| pr.ln() + p * v.abs().ln())
            .collect();
        log_sum_exp(&terms)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.log_abs_moment(p) / p).exp()
    }
}
