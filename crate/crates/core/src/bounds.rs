//! Tail bounds for `Pr{f(X) − E f(X′) > t}` and their inversion.
//!
//! Every bound has the shape `exp(−t² / (a + b·t))` where `a` is the
//! variance proxy term and `b` the scale proxy term:
//!
//! | kind                | a                | b              |
//! |---------------------|------------------|----------------|
//! | `thm1`              | `32e·V₂`         | 0              |
//! | `thm2`              | `4e²·V₁`         | `2e·M₁`        |
//! | `thm3`              | `2·V_2p`         | `2e·q·M₁`      |
//! | `thm3-psi2-variant` | `2·V_2p`         | `2e·√q·M₂`     |
//! | `bounded-difference`| `Σr²/2`          | 0              |

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::golden_section_max;

pub const DEGENERATE_NOTE: &str = "degenerate: f is a.s. constant";
pub const INAPPLICABLE_NOTE: &str = "baseline inapplicable: infinite range";
pub const TWO_SIDED_NOTE: &str = "two-sided: twice the one-sided bound";

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|xs| xs.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw: Option<Vec<Option<f64>>> = Option::deserialize(d)?;
        Ok(raw.map(|xs| xs.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect()))
    }
}

/// Per-coordinate `L_{2p}` proxies with their moment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2pProxy {
    pub p: f64,
    pub values: Vec<f64>,
}

/// Worst-case per-coordinate norms of the conditional versions `f_k(X)(x)`.
/// Ranges serialize infinite entries as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyProfile {
    pub n: usize,
    pub psi1_per_coord: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi2_per_coord: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2p_per_coord: Option<L2pProxy>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "inf_as_null")]
    pub ranges: Option<Vec<f64>>,
}

fn sum_sq(xs: &[f64]) -> f64 {
    crate::numeric::kahan_sum(xs.iter().map(|x| x * x))
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

impl ProxyProfile {
    pub fn from_psi1(psi1: Vec<f64>) -> Self {
        ProxyProfile { n: psi1.len(), psi1_per_coord: psi1, psi2_per_coord: None, l2p_per_coord: None, ranges: None }
    }

    /// `n` identical coordinates.
    pub fn uniform(n: usize, psi1: f64) -> Self {
        Self::from_psi1(vec![psi1; n])
    }

    pub fn with_psi2(mut self, psi2: Vec<f64>) -> Self {
        self.psi2_per_coord = Some(psi2);
        self
    }

    pub fn with_l2p(mut self, p: f64, values: Vec<f64>) -> Self {
        self.l2p_per_coord = Some(L2pProxy { p, values });
        self
    }

    pub fn with_ranges(mut self, ranges: Vec<f64>) -> Self {
        self.ranges = Some(ranges);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        let check = |name: &str, xs: &[f64], allow_inf: bool| -> Result<()> {
            if xs.len() != self.n {
                return Err(Error::param(name, format!("has {} entries, expected n = {}", xs.len(), self.n)));
            }
            for (i, x) in xs.iter().enumerate() {
                let ok = *x >= 0.0 && (allow_inf || x.is_finite());
                if !ok {
                    return Err(Error::param(format!("{name}[{i}]"), format!("must be nonnegative and finite, got {x}")));
                }
            }
            Ok(())
        };
        check("psi1_per_coord", &self.psi1_per_coord, false)?;
        if let Some(v) = &self.psi2_per_coord {
            check("psi2_per_coord", v, false)?;
        }
        if let Some(l) = &self.l2p_per_coord {
            if !(l.p > 1.0 && l.p.is_finite()) {
                return Err(Error::param("l2p_per_coord.p", format!("must exceed 1, got {}", l.p)));
            }
            check("l2p_per_coord.values", &l.values, false)?;
        }
        if let Some(r) = &self.ranges {
            check("ranges", r, true)?;
        }
        Ok(())
    }

    /// `Σ ψ₁²`.
    pub fn v1(&self) -> f64 {
        sum_sq(&self.psi1_per_coord)
    }

    /// `max ψ₁`.
    pub fn m1(&self) -> f64 {
        max_of(&self.psi1_per_coord)
    }

    /// `Σ ψ₂²`, if present.
    pub fn v2(&self) -> Option<f64> {
        self.psi2_per_coord.as_deref().map(sum_sq)
    }

    /// `max ψ₂`, if present.
    pub fn m2(&self) -> Option<f64> {
        self.psi2_per_coord.as_deref().map(max_of)
    }

    /// `Σ ‖·‖²_{2p}` and its `p`, if present.
    pub fn v2p(&self) -> Option<(f64, f64)> {
        self.l2p_per_coord.as_ref().map(|l| (l.p, sum_sq(&l.values)))
    }

    /// Scale every entry by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |xs: &Vec<f64>| xs.iter().map(|x| x * c).collect::<Vec<_>>();
        ProxyProfile {
            n: self.n,
            psi1_per_coord: s(&self.psi1_per_coord),
            psi2_per_coord: self.psi2_per_coord.as_ref().map(s),
            l2p_per_coord: self.l2p_per_coord.as_ref().map(|l| L2pProxy { p: l.p, values: s(&l.values) }),
            ranges: self.ranges.as_ref().map(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Thm1,
    Thm2,
    Thm3,
    Thm3Psi2Variant,
    BoundedDifference,
    Thm6,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::Thm1,
        BoundKind::Thm2,
        BoundKind::Thm3,
        BoundKind::Thm3Psi2Variant,
        BoundKind::BoundedDifference,
        BoundKind::Thm6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Thm1 => "thm1",
            BoundKind::Thm2 => "thm2",
            BoundKind::Thm3 => "thm3",
            BoundKind::Thm3Psi2Variant => "thm3-psi2-variant",
            BoundKind::BoundedDifference => "bounded-difference",
            BoundKind::Thm6 => "thm6",
        }
    }

    pub fn needs_p(self) -> bool {
        matches!(self, BoundKind::Thm3 | BoundKind::Thm3Psi2Variant)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param("bounds", format!("unknown bound kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundResult {
    pub kind: BoundKind,
    pub t: f64,
    pub prob: f64,
    pub ln_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The `(a, b)` in `exp(−t²/(a + b·t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Denominator {
    pub a: f64,
    pub b: f64,
}

fn conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

fn thm3_parts(profile: &ProxyProfile, p: f64) -> Result<(f64, f64)> {
    let q = conjugate(p)?;
    let (lp, v2p) = profile
        .v2p()
        .ok_or_else(|| Error::Precondition("profile has no l2p_per_coord".into()))?;
    if (lp - p).abs() > 1e-12 * p {
        return Err(Error::param("p", format!("profile l2p proxies are for p = {lp}, requested {p}")));
    }
    Ok((q, v2p))
}

/// `(a, b)` for a bound kind. `Ok(None)` marks an inapplicable baseline.
pub fn denominator(kind: BoundKind, profile: &ProxyProfile, p: Option<f64>) -> Result<Option<Denominator>> {
    profile.validate()?;
    let need_p = || p.ok_or_else(|| Error::param("p", format!("{kind} needs a moment order p")));
    let d = match kind {
        BoundKind::Thm1 => {
            let v2 = profile
                .v2()
                .ok_or_else(|| Error::Precondition("thm1 needs psi2_per_coord".into()))?;
            Denominator { a: 32.0 * E * v2, b: 0.0 }
        }
        BoundKind::Thm6 => {
            return Err(Error::Unsupported("thm6 is built from diameters; use applications::metric_tail".into()))
        }
        BoundKind::Thm2 => Denominator { a: 4.0 * E * E * profile.v1(), b: 2.0 * E * profile.m1() },
        BoundKind::Thm3 => {
            let (q, v2p) = thm3_parts(profile, need_p()?)?;
            Denominator { a: 2.0 * v2p, b: 2.0 * E * q * profile.m1() }
        }
        BoundKind::Thm3Psi2Variant => {
            let (q, v2p) = thm3_parts(profile, need_p()?)?;
            let m2 = profile
                .m2()
                .ok_or_else(|| Error::Precondition("thm3-psi2-variant needs psi2_per_coord".into()))?;
            Denominator { a: 2.0 * v2p, b: 2.0 * E * q.sqrt() * m2 }
        }
        BoundKind::BoundedDifference => {
            let r = profile
                .ranges
                .as_ref()
                .ok_or_else(|| Error::Precondition("bounded-difference needs ranges".into()))?;
            if r.iter().any(|x| x.is_infinite()) {
                return Ok(None);
            }
            Denominator { a: sum_sq(r) / 2.0, b: 0.0 }
        }
    };
    Ok(Some(d))
}

/// Evaluate `exp(−t²/(a + b·t))` for a denominator.
pub fn eval_denominator(kind: BoundKind, d: Denominator, t: f64) -> Result<TailBoundResult> {
    check_t(t)?;
    let den = d.a + d.b * t;
    if den == 0.0 {
        return Ok(TailBoundResult {
            kind,
            t,
            prob: 0.0,
            ln_prob: f64::NEG_INFINITY,
            note: Some(DEGENERATE_NOTE.into()),
        });
    }
    let ln_prob = -(t * t) / den;
    Ok(TailBoundResult { kind, t, prob: ln_prob.exp().min(1.0), ln_prob, note: None })
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Evaluate a bound of the given kind at deviation `t`.
pub fn tail(kind: BoundKind, profile: &ProxyProfile, p: Option<f64>, t: f64) -> Result<TailBoundResult> {
    check_t(t)?;
    match denominator(kind, profile, p)? {
        Some(d) => eval_denominator(kind, d, t),
        None => Ok(TailBoundResult { kind, t, prob: 1.0, ln_prob: 0.0, note: Some(INAPPLICABLE_NOTE.into()) }),
    }
}

/// `exp(−t²/(32e·V₂))`.
pub fn thm1_tail(profile: &ProxyProfile, t: f64) -> Result<TailBoundResult> {
    tail(BoundKind::Thm1, profile, None, t)
}

/// `exp(−t²/(4e²·V₁ + 2e·M₁·t))`.
pub fn thm2_tail(profile: &ProxyProfile, t: f64) -> Result<TailBoundResult> {
    tail(BoundKind::Thm2, profile, None, t)
}

/// `exp(−t²/(2·V_2p + 2e·q·M₁·t))`, or with `√q·M₂` for the sub-Gaussian variant.
pub fn thm3_tail(profile: &ProxyProfile, p: f64, t: f64, variant: crate::orlicz::Alpha) -> Result<TailBoundResult> {
    let kind = match variant {
        crate::orlicz::Alpha::Psi1 => BoundKind::Thm3,
        crate::orlicz::Alpha::Psi2 => BoundKind::Thm3Psi2Variant,
    };
    tail(kind, profile, Some(p), t)
}

/// `exp(−2t²/Σr²)`; probability 1 when a range is infinite.
pub fn bounded_difference_tail(profile: &ProxyProfile, t: f64) -> Result<TailBoundResult> {
    tail(BoundKind::BoundedDifference, profile, None, t)
}

/// `min(1, 2·prob)` for `Pr{|f − Ef| > t}`.
pub fn two_sided(r: &TailBoundResult) -> TailBoundResult {
    let ln_prob = (r.ln_prob + 2f64.ln()).min(0.0);
    TailBoundResult {
        kind: r.kind,
        t: r.t,
        prob: (2.0 * r.prob).min(1.0),
        ln_prob,
        note: Some(match &r.note {
            Some(n) => format!("{TWO_SIDED_NOTE}; {n}"),
            None => TWO_SIDED_NOTE.into(),
        }),
    }
}

/// Deviation `t` at which a bound equals `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub kind: BoundKind,
    pub delta: f64,
    /// positive root of `t² = L·(a + b·t)`, `L = ln(1/δ)`
    pub exact: f64,
    /// `√(a·L) + b·L`
    pub additive: f64,
}

pub fn invert_denominator(kind: BoundKind, d: Denominator, delta: f64) -> Result<Inversion> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let l = -delta.ln();
    let bl = d.b * l;
    let exact = (bl + (bl * bl + 4.0 * d.a * l).sqrt()) / 2.0;
    let additive = (d.a * l).sqrt() + bl;
    Ok(Inversion { kind, delta, exact, additive })
}

pub fn invert_tail(kind: BoundKind, profile: &ProxyProfile, p: Option<f64>, delta: f64) -> Result<Inversion> {
    match denominator(kind, profile, p)? {
        Some(d) => invert_denominator(kind, d, delta),
        None => Err(Error::Precondition(INAPPLICABLE_NOTE.into())),
    }
}

pub const OPTIMIZATION_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationCheck {
    pub rhs: f64,
    pub grid_min: f64,
    pub beta_min: f64,
}

impl OptimizationCheck {
    pub fn holds(&self) -> bool {
        self.grid_min <= self.rhs + 1e-9
    }
}

/// `inf_{β∈[0,1/b)} (−βt + Cβ²/(1 − bβ))` on a uniform grid of
/// [`OPTIMIZATION_GRID`] points, refined by golden-section search between
/// the neighbours of the grid argmin, against `−t²/(2(2C + bt))`.
pub fn optimization_lemma(c: f64, b: f64, t: f64) -> Result<OptimizationCheck> {
    for (name, v) in [("C", c), ("b", b), ("t", t)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    let g = |beta: f64| -beta * t + c * beta * beta / (1.0 - b * beta);
    let h = 1.0 / (b * OPTIMIZATION_GRID as f64);
    let (imin, vmin) = (0..OPTIMIZATION_GRID)
        .map(|i| (i, g(i as f64 * h)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty grid");
    let lo = imin.saturating_sub(1) as f64 * h;
    let hi = ((imin + 1) as f64 * h).min((OPTIMIZATION_GRID as f64 - 0.5) * h);
    let (beta, neg) = golden_section_max(|x| -g(x), lo, hi, 1e-14);
    let (beta_min, grid_min) = if -neg < vmin { (beta, -neg) } else { (imin as f64 * h, vmin) };
    Ok(OptimizationCheck { rhs: -t * t / (2.0 * (2.0 * c + b * t)), grid_min, beta_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orlicz::Alpha;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn thm1_examples() {
        let n = 7;
        let prof = ProxyProfile::uniform(n, 1.0).with_psi2(vec![1.0; n]);
        let r = thm1_tail(&prof, 3.0).unwrap();
        assert!(close(r.prob, (-9.0 / (32.0 * E * n as f64)).exp(), 1e-15));
        assert!(thm1_tail(&prof, 1e-9).unwrap().prob > 1.0 - 1e-15);
        let one = ProxyProfile::uniform(1, 1.0).with_psi2(vec![1.0]);
        // exp(−1/(32e)) computed at 30 digits
        assert!(close(thm1_tail(&one, 1.0).unwrap().prob, 0.988_569_596_640_663_5, 1e-15));
        assert!(thm1_tail(&ProxyProfile::uniform(1, 1.0), 1.0).is_err());
    }

    #[test]
    fn degenerate_profile() {
        let prof = ProxyProfile::uniform(3, 0.0).with_psi2(vec![0.0; 3]);
        for r in [thm1_tail(&prof, 1.0).unwrap(), thm2_tail(&prof, 1.0).unwrap()] {
            assert_eq!(r.prob, 0.0);
            assert_eq!(r.note.as_deref(), Some(DEGENERATE_NOTE));
        }
    }

    #[test]
    fn thm2_examples() {
        let prof = ProxyProfile::uniform(1, 1.0);
        let r = thm2_tail(&prof, 1.0).unwrap();
        assert!(close(r.prob, (-1.0 / (4.0 * E * E + 2.0 * E)).exp(), 1e-15));
        assert!((r.prob - 0.9718).abs() < 1e-4);
        let t = 1e7;
        let r = thm2_tail(&prof, t).unwrap();
        assert!(close(-r.ln_prob * 2.0 * E / t, 1.0, 1e-5));

        let single = ProxyProfile::uniform(1, crate::orlicz::centering_bound(1.0));
        let r = thm2_tail(&single, 2.5).unwrap();
        assert!(close(r.prob, (-6.25 / (16.0 * E * E + 4.0 * E * 2.5)).exp(), 1e-15));
    }

    #[test]
    fn thm3_examples() {
        let prof = ProxyProfile::uniform(1, 1.0).with_l2p(2.0, vec![1.0]);
        let r = thm3_tail(&prof, 2.0, 1.0, Alpha::Psi1).unwrap();
        assert!(close(r.prob, (-1.0 / (2.0 + 4.0 * E)).exp(), 1e-15));
        assert!(thm3_tail(&prof, 1.0, 1.0, Alpha::Psi1).is_err());
        assert!(thm3_tail(&prof, 3.0, 1.0, Alpha::Psi1).is_err());
        assert!(thm3_tail(&prof, 2.0, 1.0, Alpha::Psi2).is_err());

        let n = 10;
        let prof = ProxyProfile::uniform(n, 1.0).with_l2p(2.0, vec![0.1; n]);
        let t3 = thm3_tail(&prof, 2.0, 0.5, Alpha::Psi1).unwrap();
        let t2 = thm2_tail(&prof, 0.5).unwrap();
        assert!(t3.prob < t2.prob);

        let prof = prof.with_psi2(vec![1.0; n]);
        let v = thm3_tail(&prof, 2.0, 1.0, Alpha::Psi2).unwrap();
        let want = (-1.0 / (2.0 * 0.1 + 2.0 * E * 2f64.sqrt())).exp();
        assert!(close(v.prob, want, 1e-14));
    }

    #[test]
    fn bounded_difference_examples() {
        let prof = ProxyProfile::uniform(1, 1.0).with_ranges(vec![1.0]);
        assert!(close(bounded_difference_tail(&prof, 1.0).unwrap().prob, (-2f64).exp(), 1e-15));
        let prof = ProxyProfile::uniform(2, 1.0).with_ranges(vec![1.0, f64::INFINITY]);
        let r = bounded_difference_tail(&prof, 5.0).unwrap();
        assert_eq!(r.prob, 1.0);
        assert_eq!(r.note.as_deref(), Some(INAPPLICABLE_NOTE));
        assert!(invert_tail(BoundKind::BoundedDifference, &prof, None, 0.1).is_err());
    }

    #[test]
    fn inversion() {
        let prof = ProxyProfile::from_psi1(vec![0.5, 1.0, 2.0]).with_psi2(vec![1.0; 3]);
        for kind in [BoundKind::Thm1, BoundKind::Thm2] {
            let inv = invert_tail(kind, &prof, None, 0.05).unwrap();
            assert!(inv.exact <= inv.additive * (1.0 + 1e-15));
            let back = tail(kind, &prof, None, inv.exact).unwrap();
            assert!(close(back.prob, 0.05, 1e-10));
        }
        let inv = invert_tail(BoundKind::Thm1, &prof, None, 0.05).unwrap();
        assert!(close(inv.exact, (32.0 * E * 3.0 * 20f64.ln()).sqrt(), 1e-14));
        let inv = invert_tail(BoundKind::Thm2, &prof, None, 1.0 - 1e-12).unwrap();
        assert!(inv.exact < 2e-5);
        assert!(invert_tail(BoundKind::Thm2, &prof, None, 1.0).is_err());
        assert!(invert_tail(BoundKind::Thm2, &prof, None, 0.0).is_err());
    }

    #[test]
    fn two_sided_doubles() {
        let prof = ProxyProfile::uniform(1, 1.0);
        let r = thm2_tail(&prof, 10.0).unwrap();
        let d = two_sided(&r);
        assert!(close(d.prob, 2.0 * r.prob, 1e-15));
        let r = thm2_tail(&prof, 0.01).unwrap();
        assert_eq!(two_sided(&r).prob, 1.0);
    }

    #[test]
    fn optimization_examples() {
        let r = optimization_lemma(1.0, 1.0, 1.0).unwrap();
        assert!(close(r.rhs, -1.0 / 6.0, 1e-15));
        let g03 = -0.3 + 0.09 / 0.7;
        assert!(g03 <= r.rhs);
        assert!(r.grid_min <= g03 + 1e-12);
        let r = optimization_lemma(1.0, 1.0, 1e-9).unwrap();
        assert!(r.rhs.abs() < 1e-17 && r.grid_min.abs() < 1e-17);
        assert!(optimization_lemma(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn kinds_round_trip() {
        for k in BoundKind::ALL {
            assert_eq!(k.as_str().parse::<BoundKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), serde_json::json!(k.as_str()));
        }
        assert!("thm4".parse::<BoundKind>().is_err());
    }

    #[test]
    fn profile_json_uses_null_for_infinite_ranges() {
        let prof = ProxyProfile::uniform(2, 1.0).with_ranges(vec![2.0, f64::INFINITY]);
        let s = serde_json::to_string(&prof).unwrap();
        assert!(s.contains("\"ranges\":[2.0,null]"), "{s}");
        let back: ProxyProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, prof);
        assert!(serde_json::from_str::<ProxyProfile>(r#"{"n":1,"psi1_per_coord":[1],"extra":1}"#).is_err());
        let bad = ProxyProfile { n: 2, ..ProxyProfile::uniform(1, 1.0) };
        assert!(bad.validate().is_err());
    }
}
