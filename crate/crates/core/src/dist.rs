//! Marginal laws represented through their quantile functions, and the
//! averaged-quantile functional R_I.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_prob, Error, Result};
use crate::quad;

/// Width of the end buffers near 0 and 1 handled analytically on the
/// quadrature path.
pub const EPS_END: f64 = 1e-9;
pub const TAU_QUAD_CLOSED: f64 = 1e-10;
pub const TAU_QUAD_ADAPTIVE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    Pareto { shape: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Triangular { low: f64, mode: f64, high: f64 },
    /// F(x) = x^k on [0, 1].
    PowerLaw { exponent: f64 },
    PointMass { value: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn phi(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

impl Family {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            Family::Uniform { low, high } if !(finite(&[low, high]) && low < high) => bad("uniform needs low < high"),
            Family::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => bad("exponential rate must be positive"),
            Family::Pareto { shape, scale } if !(finite(&[shape, scale]) && shape > 0.0 && scale > 0.0) => {
                bad("pareto shape and scale must be positive")
            }
            Family::Normal { mean, sd } if !(finite(&[mean, sd]) && sd > 0.0) => bad("normal sd must be positive"),
            Family::Lognormal { mu, sigma } if !(finite(&[mu, sigma]) && sigma > 0.0) => bad("lognormal sigma must be positive"),
            Family::Triangular { low, mode, high } if !(finite(&[low, mode, high]) && low <= mode && mode <= high && low < high) => {
                bad("triangular needs low <= mode <= high, low < high")
            }
            Family::PowerLaw { exponent } if !(exponent.is_finite() && exponent > 0.0) => bad("power law exponent must be positive"),
            Family::PointMass { value } if !value.is_finite() => bad("point mass must be finite"),
            _ => Ok(()),
        }
    }

    /// Quantile on [0, 1]; endpoints give the support bounds (possibly infinite).
    fn quantile(&self, p: f64) -> f64 {
        match *self {
            Family::Uniform { low, high } => low + (high - low) * p,
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::Pareto { shape, scale } => scale * (1.0 - p).powf(-1.0 / shape),
            Family::Normal { mean, sd } => {
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    mean + sd * std_normal().inverse_cdf(p)
                }
            }
            Family::Lognormal { mu, sigma } => {
                if p <= 0.0 {
                    0.0
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    (mu + sigma * std_normal().inverse_cdf(p)).exp()
                }
            }
            Family::Triangular { low, mode, high } => {
                let fc = (mode - low) / (high - low);
                if p <= fc {
                    low + (p * (high - low) * (mode - low)).sqrt()
                } else {
                    high - ((1.0 - p) * (high - low) * (high - mode)).sqrt()
                }
            }
            Family::PowerLaw { exponent } => p.powf(1.0 / exponent),
            Family::PointMass { value } => value,
        }
    }

    fn upper_mean_finite(&self) -> bool {
        !matches!(*self, Family::Pareto { shape, .. } if shape <= 1.0)
    }

    /// Exact integral of the quantile over [p1, p2] ⊂ [0, 1].
    fn integral_closed(&self, p1: f64, p2: f64) -> Result<f64> {
        let w = p2 - p1;
        if w <= 0.0 {
            return Ok(0.0);
        }
        // antiderivative differences cancel badly on tiny windows
        if !matches!(self, Family::PointMass { .. } | Family::Uniform { .. })
            && w < 1e-4 * p1.min(1.0 - p2)
        {
            return Ok(quad::gauss_legendre5(|p| self.quantile(p), p1, p2));
        }
        let v = match *self {
            Family::Uniform { low, high } => w * (low + (high - low) * 0.5 * (p1 + p2)),
            Family::Exponential { rate } => {
                let h = |p: f64| {
                    let c = 1.0 - p;
                    if c <= 0.0 {
                        0.0
                    } else {
                        c * c.ln() - c
                    }
                };
                (h(p2) - h(p1)) / rate
            }
            Family::Pareto { shape, scale } => {
                if p2 >= 1.0 && shape <= 1.0 {
                    return Err(Error::NonIntegrableTail(format!("pareto shape {shape} has infinite mean")));
                }
                if shape == 1.0 {
                    scale * ((1.0 - p1).ln() - (1.0 - p2).ln())
                } else {
                    let e = 1.0 - 1.0 / shape;
                    scale * ((1.0 - p1).powf(e) - (1.0 - p2).powf(e)) / e
                }
            }
            Family::Normal { mean, sd } => {
                let z = |p: f64| (self.quantile(p) - mean) / sd;
                mean * w + sd * (phi(z(p1)) - phi(z(p2)))
            }
            Family::Lognormal { mu, sigma } => {
                let n = std_normal();
                let cdf_shift = |p: f64| {
                    if p <= 0.0 {
                        0.0
                    } else if p >= 1.0 {
                        1.0
                    } else {
                        n.cdf(n.inverse_cdf(p) - sigma)
                    }
                };
                (mu + 0.5 * sigma * sigma).exp() * (cdf_shift(p2) - cdf_shift(p1))
            }
            Family::Triangular { low, mode, high } => {
                let fc = (mode - low) / (high - low);
                let left = |a: f64, b: f64| {
                    low * (b - a) + ((high - low) * (mode - low)).sqrt() * (2.0 / 3.0) * (b.powf(1.5) - a.powf(1.5))
                };
                let right = |a: f64, b: f64| {
                    high * (b - a)
                        - ((high - low) * (high - mode)).sqrt() * (2.0 / 3.0) * ((1.0 - a).powf(1.5) - (1.0 - b).powf(1.5))
                };
                if p2 <= fc {
                    left(p1, p2)
                } else if p1 >= fc {
                    right(p1, p2)
                } else {
                    left(p1, fc) + right(fc, p2)
                }
            }
            Family::PowerLaw { exponent } => {
                let e = 1.0 + 1.0 / exponent;
                (p2.powf(e) - p1.powf(e)) / e
            }
            Family::PointMass { value } => value * w,
        };
        Ok(v)
    }

    fn integral_quadrature(&self, p1: f64, p2: f64) -> Result<f64> {
        if p2 >= 1.0 && !self.upper_mean_finite() {
            return Err(Error::NonIntegrableTail("infinite upper mean".into()));
        }
        let lo = p1.max(EPS_END);
        let hi = p2.min(1.0 - EPS_END);
        if hi <= lo {
            return self.integral_closed(p1, p2);
        }
        let mut v = quad::adaptive(|p| self.quantile(p), lo, hi, TAU_QUAD_ADAPTIVE * 1e-2);
        if p1 < lo {
            v += self.integral_closed(p1, lo)?;
        }
        if p2 > hi {
            v += self.integral_closed(hi, p2)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Empirical {
    values: Vec<f64>,
    /// prefix[k] = sum of the k smallest values
    prefix: Vec<f64>,
}

impl Empirical {
    fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("empirical sample is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("empirical sample has non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        // Neumaier summation keeps long prefixes accurate
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &v in &values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            prefix.push(sum + comp);
        }
        Ok(Empirical { values, prefix })
    }

    fn m(&self) -> usize {
        self.values.len()
    }

    fn scaled_index(&self, p: f64) -> f64 {
        let u = p * self.m() as f64;
        let r = u.round();
        if (u - r).abs() <= 1e-9 * self.m() as f64 {
            r
        } else {
            u
        }
    }

    fn q_left(&self, p: f64) -> f64 {
        let u = self.scaled_index(p);
        let k = (u.ceil() as usize).clamp(1, self.m());
        self.values[k - 1]
    }

    fn q_right(&self, p: f64) -> f64 {
        let u = self.scaled_index(p);
        let k = (u.floor() as usize).min(self.m() - 1);
        self.values[k]
    }

    fn integral(&self, p1: f64, p2: f64) -> f64 {
        let m = self.m();
        let u1 = self.scaled_index(p1).clamp(0.0, m as f64);
        let u2 = self.scaled_index(p2).clamp(0.0, m as f64);
        if u2 <= u1 {
            return 0.0;
        }
        let j1 = (u1.floor() as usize).min(m - 1);
        let j2 = (u2.floor() as usize).min(m);
        let mf = m as f64;
        if j1 == j2 || (j2 == j1 + 1 && u2 == j2 as f64) {
            return self.values[j1] * (u2 - u1) / mf;
        }
        let mut acc = self.values[j1] * ((j1 + 1) as f64 - u1);
        acc += self.prefix[j2] - self.prefix[j1 + 1];
        if j2 < m {
            acc += self.values[j2] * (u2 - j2 as f64);
        }
        acc / mf
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Parametric(Family),
    Empirical(Empirical),
}

impl Base {
    fn q_left(&self, p: f64) -> f64 {
        match self {
            Base::Parametric(f) => f.quantile(p),
            Base::Empirical(e) => e.q_left(p),
        }
    }
    fn q_right(&self, p: f64) -> f64 {
        match self {
            Base::Parametric(Family::PointMass { value }) => *value,
            Base::Parametric(f) => f.quantile(p),
            Base::Empirical(e) => e.q_right(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityDirection {
    Increasing,
    Decreasing,
    /// Flat density (uniform piece); counts as both increasing and decreasing.
    Constant,
}

impl DensityDirection {
    fn flipped(self) -> Self {
        match self {
            DensityDirection::Increasing => DensityDirection::Decreasing,
            DensityDirection::Decreasing => DensityDirection::Increasing,
            DensityDirection::Constant => DensityDirection::Constant,
        }
    }
    fn satisfies(self, wanted: DensityDirection) -> bool {
        self == wanted || self == DensityDirection::Constant
    }
}

/// A declared density direction beyond (upper) or below (lower) the
/// `threshold`-quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailDeclaration {
    pub threshold: f64,
    pub direction: DensityDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailMonotonicity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<TailDeclaration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<TailDeclaration>,
}

impl TailMonotonicity {
    /// Density declared monotone in `direction` on the whole support.
    pub fn on_support(direction: DensityDirection) -> Self {
        TailMonotonicity {
            upper: Some(TailDeclaration { threshold: 0.0, direction }),
            lower: Some(TailDeclaration { threshold: 1.0, direction }),
        }
    }

    /// Whether the density is declared `direction` on the quantile range [p, 1].
    pub fn beyond(&self, p: f64, direction: DensityDirection) -> bool {
        let up = self.upper.is_some_and(|d| d.threshold <= p && d.direction.satisfies(direction));
        let low = self.lower.is_some_and(|d| d.threshold >= 1.0 && d.direction.satisfies(direction));
        up || low
    }

    /// Whether the density is declared `direction` on the quantile range [0, p].
    pub fn below(&self, p: f64, direction: DensityDirection) -> bool {
        let low = self.lower.is_some_and(|d| d.threshold >= p && d.direction.satisfies(direction));
        let up = self.upper.is_some_and(|d| d.threshold <= 0.0 && d.direction.satisfies(direction));
        low || up
    }

    fn restrict_upper(&self, r: f64) -> Self {
        let map = |p: f64| (p - r) / (1.0 - r);
        TailMonotonicity {
            upper: self.upper.map(|d| TailDeclaration { threshold: map(d.threshold).max(0.0), ..d }),
            lower: self.lower.filter(|d| d.threshold > r).map(|d| TailDeclaration { threshold: map(d.threshold), ..d }),
        }
    }

    fn restrict_lower(&self, r: f64) -> Self {
        TailMonotonicity {
            lower: self.lower.map(|d| TailDeclaration { threshold: (d.threshold / r).min(1.0), ..d }),
            upper: self.upper.filter(|d| d.threshold < r).map(|d| TailDeclaration { threshold: d.threshold / r, ..d }),
        }
    }

    fn negated(&self) -> Self {
        let flip = |d: TailDeclaration| TailDeclaration { threshold: 1.0 - d.threshold, direction: d.direction.flipped() };
        TailMonotonicity { upper: self.lower.map(flip), lower: self.upper.map(flip) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    TailUpper { r: f64 },
    TailLower { r: f64 },
    Negate,
    Shift { by: f64 },
    Scale { by: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Parametric,
    Empirical,
    Transformed,
}

/// Quantile-function view of a marginal law.
///
/// Internally every law is `shift + scale * q_base(offset + slope * t)`;
/// negation flips the sign of both `scale` and `slope`, so left and right
/// quantiles of the base swap exactly when `scale < 0`.
#[derive(Clone, PartialEq)]
pub struct Distribution {
    base: Arc<Base>,
    offset: f64,
    slope: f64,
    scale: f64,
    shift: f64,
    tail: TailMonotonicity,
    continuous: bool,
    history: Vec<Transform>,
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match &*self.base {
            Base::Parametric(fam) => format!("{fam:?}"),
            Base::Empirical(e) => format!("Empirical(m={})", e.m()),
        };
        f.debug_struct("Distribution")
            .field("base", &base)
            .field("history", &self.history)
            .field("tail", &self.tail)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationMethod {
    #[default]
    ClosedForm,
    Quadrature,
}

impl Distribution {
    fn from_base(base: Base, continuous: bool) -> Self {
        Distribution {
            base: Arc::new(base),
            offset: 0.0,
            slope: 1.0,
            scale: 1.0,
            shift: 0.0,
            tail: TailMonotonicity::default(),
            continuous,
            history: Vec::new(),
        }
    }

    pub fn parametric(family: Family) -> Result<Self> {
        family.validate()?;
        let continuous = !matches!(family, Family::PointMass { .. });
        Ok(Self::from_base(Base::Parametric(family), continuous))
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        Self::parametric(Family::Uniform { low, high })
    }
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::parametric(Family::Exponential { rate })
    }
    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        Self::parametric(Family::Pareto { shape, scale })
    }
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::parametric(Family::Normal { mean, sd })
    }
    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::parametric(Family::Lognormal { mu, sigma })
    }
    pub fn triangular(low: f64, mode: f64, high: f64) -> Result<Self> {
        Self::parametric(Family::Triangular { low, mode, high })
    }
    pub fn power_law(exponent: f64) -> Result<Self> {
        Self::parametric(Family::PowerLaw { exponent })
    }
    pub fn point_mass(value: f64) -> Result<Self> {
        Self::parametric(Family::PointMass { value })
    }

    /// Equal-weight empirical law of `values` (sorted internally).
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Ok(Self::from_base(Base::Empirical(Empirical::new(values)?), false))
    }

    pub fn with_tail(mut self, tail: TailMonotonicity) -> Self {
        self.tail = tail;
        self
    }

    /// Declare (or retract) continuity of the quantile function.
    pub fn with_continuous(mut self, continuous: bool) -> Self {
        self.continuous = continuous;
        self
    }

    pub fn tail_monotonicity(&self) -> &TailMonotonicity {
        &self.tail
    }

    pub fn continuous_quantile(&self) -> bool {
        self.continuous
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.history
    }

    pub fn kind(&self) -> Kind {
        if !self.history.is_empty() {
            Kind::Transformed
        } else if matches!(*self.base, Base::Empirical(_)) {
            Kind::Empirical
        } else {
            Kind::Parametric
        }
    }

    pub fn family(&self) -> Option<Family> {
        match &*self.base {
            Base::Parametric(f) => Some(*f),
            Base::Empirical(_) => None,
        }
    }

    /// Sorted atoms of the underlying empirical sample, if any.
    pub fn sample(&self) -> Option<&[f64]> {
        match &*self.base {
            Base::Empirical(e) => Some(&e.values),
            Base::Parametric(_) => None,
        }
    }

    fn base_range(&self) -> (f64, f64) {
        let a = self.offset;
        let b = self.offset + self.slope;
        (a.min(b).max(0.0), a.max(b).min(1.0))
    }

    /// The value of a degenerate law.
    pub fn constant_value(&self) -> Option<f64> {
        match &*self.base {
            Base::Parametric(Family::PointMass { value }) => Some(self.shift + self.scale * value),
            Base::Empirical(e) if e.values[0] == e.values[e.m() - 1] => Some(self.shift + self.scale * e.values[0]),
            _ => None,
        }
    }

    pub fn mean_finite(&self) -> bool {
        match &*self.base {
            Base::Empirical(_) => true,
            Base::Parametric(f) => f.upper_mean_finite() || self.base_range().1 < 1.0,
        }
    }

    #[inline]
    pub(crate) fn ql(&self, t: f64) -> f64 {
        let p = (self.offset + self.slope * t).clamp(0.0, 1.0);
        if self.scale > 0.0 {
            self.shift + self.scale * self.base.q_left(p)
        } else {
            self.shift + self.scale * self.base.q_right(p)
        }
    }

    #[inline]
    pub(crate) fn qr(&self, t: f64) -> f64 {
        let p = (self.offset + self.slope * t).clamp(0.0, 1.0);
        if self.scale > 0.0 {
            self.shift + self.scale * self.base.q_right(p)
        } else {
            self.shift + self.scale * self.base.q_left(p)
        }
    }

    /// Left quantile q^-_t for t in (0, 1].
    pub fn quantile_left(&self, t: f64) -> Result<f64> {
        check_prob(t, true, false, "(0, 1]")?;
        Ok(self.ql(t))
    }

    /// Right quantile q^+_t for t in [0, 1).
    pub fn quantile_right(&self, t: f64) -> Result<f64> {
        check_prob(t, false, true, "[0, 1)")?;
        Ok(self.qr(t))
    }

    /// Integral of the left quantile over [t1, t2] ⊂ [0, 1].
    pub fn integral(&self, t1: f64, t2: f64) -> Result<f64> {
        self.integral_with(t1, t2, IntegrationMethod::ClosedForm)
    }

    pub fn integral_with(&self, t1: f64, t2: f64, method: IntegrationMethod) -> Result<f64> {
        if t2 <= t1 {
            return Ok(0.0);
        }
        let pa = (self.offset + self.slope * t1).clamp(0.0, 1.0);
        let pb = (self.offset + self.slope * t2).clamp(0.0, 1.0);
        let (p1, p2) = if pa <= pb { (pa, pb) } else { (pb, pa) };
        let base = match (&*self.base, method) {
            (Base::Empirical(e), _) => e.integral(p1, p2),
            (Base::Parametric(f), IntegrationMethod::ClosedForm) => f.integral_closed(p1, p2)?,
            (Base::Parametric(f), IntegrationMethod::Quadrature) => f.integral_quadrature(p1, p2)?,
        };
        let v = self.shift * (t2 - t1) + self.scale / self.slope.abs() * base;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonIntegrableTail(format!("integral over [{t1}, {t2}] is not finite")))
        }
    }

    pub fn mean(&self) -> Result<f64> {
        self.integral(0.0, 1.0)
    }

    /// Law of q^-_U with U uniform on [r, 1].
    pub fn tail_upper(&self, r: f64) -> Result<Self> {
        check_prob(r, false, true, "[0, 1)")?;
        if r == 0.0 {
            return Ok(self.clone());
        }
        let mut d = self.clone();
        d.offset = self.offset + self.slope * r;
        d.slope = self.slope * (1.0 - r);
        d.tail = self.tail.restrict_upper(r);
        d.history.push(Transform::TailUpper { r });
        Ok(d)
    }

    /// Law of q^-_V with V uniform on [0, r].
    pub fn tail_lower(&self, r: f64) -> Result<Self> {
        check_prob(r, true, false, "(0, 1]")?;
        if r == 1.0 {
            return Ok(self.clone());
        }
        let mut d = self.clone();
        d.slope = self.slope * r;
        d.tail = self.tail.restrict_lower(r);
        d.history.push(Transform::TailLower { r });
        Ok(d)
    }

    /// Law of -X.
    pub fn negate(&self) -> Self {
        let mut d = self.clone();
        d.offset = self.offset + self.slope;
        d.slope = -self.slope;
        d.scale = -self.scale;
        d.shift = -self.shift;
        d.tail = self.tail.negated();
        if d.history.last() == Some(&Transform::Negate) {
            d.history.pop();
        } else {
            d.history.push(Transform::Negate);
        }
        d
    }

    pub fn shifted(&self, by: f64) -> Self {
        let mut d = self.clone();
        d.shift += by;
        d.history.push(Transform::Shift { by });
        d
    }

    /// Law of k·X for k > 0.
    pub fn scaled(&self, by: f64) -> Result<Self> {
        if !(by.is_finite() && by > 0.0) {
            return Err(Error::InvalidParams("scale factor must be positive".into()));
        }
        let mut d = self.clone();
        d.scale *= by;
        d.shift *= by;
        d.history.push(Transform::Scale { by });
        Ok(d)
    }

    /// Essential supremum q^-_1 (may be +inf).
    pub fn ess_sup(&self) -> f64 {
        self.ql(1.0)
    }

    /// Essential infimum q^+_0 (may be -inf).
    pub fn ess_inf(&self) -> f64 {
        self.qr(0.0)
    }

    /// Mass of the half-open interval [x, y) (x <= y).
    pub fn mass_in(&self, x: f64, y: f64) -> f64 {
        (self.cdf_strict(y) - self.cdf_strict(x)).max(0.0)
    }

    /// Mass of (x, y].
    pub fn mass_in_left_open(&self, x: f64, y: f64) -> f64 {
        (self.cdf(y) - self.cdf(x)).max(0.0)
    }

    /// P(X <= x), found by bisection on the quantile function.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.ql(1.0) <= x {
            return 1.0;
        }
        // largest t with q^-_t <= x
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if self.qr(0.0) > x {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ql(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.snap(lo)
    }

    /// P(X < x).
    pub fn cdf_strict(&self, x: f64) -> f64 {
        if self.qr(0.0) >= x {
            return 0.0;
        }
        if self.ql(1.0) < x {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ql(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.snap(hi)
    }

    fn snap(&self, t: f64) -> f64 {
        if let Base::Empirical(e) = &*self.base {
            let m = e.m() as f64 * self.slope.abs();
            let k = (t * m).round();
            if (t * m - k).abs() < 1e-6 {
                return k / m;
            }
        }
        t
    }

    /// Finite-difference spot check of the declared density direction on the
    /// quantile range [from, to]; returns warnings, never fails.
    pub fn density_slope_check(&self, from: f64, to: f64, direction: DensityDirection) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.kind() == Kind::Empirical || to <= from {
            return warnings;
        }
        let k = 64;
        let h = (to - from) / k as f64;
        let mut dens = Vec::with_capacity(k);
        for j in 0..k {
            let u = from + (j as f64 + 0.5) * h;
            let e = h * 0.25;
            let dq = (self.ql(u + e) - self.ql(u - e)) / (2.0 * e);
            dens.push(if dq > 0.0 { 1.0 / dq } else { f64::INFINITY });
        }
        for w in dens.windows(2) {
            let rel = 1e-6 * w[0].abs().max(w[1].abs());
            let bad = match direction {
                DensityDirection::Increasing => w[1] < w[0] - rel,
                DensityDirection::Decreasing => w[1] > w[0] + rel,
                DensityDirection::Constant => (w[1] - w[0]).abs() > 1e3 * rel,
            };
            if bad {
                warnings.push(format!(
                    "density does not look {direction:?} on quantile range [{from}, {to}]"
                ));
                break;
            }
        }
        warnings
    }

    /// True when `t` lies on an atom boundary of an empirical law, where the
    /// left and right quantiles may differ.
    pub fn at_atom_boundary(&self, t: f64) -> bool {
        match &*self.base {
            Base::Empirical(_) => self.ql(t.max(f64::MIN_POSITIVE)) != self.qr(t.min(1.0 - f64::EPSILON)),
            Base::Parametric(Family::PointMass { .. }) => false,
            Base::Parametric(_) => false,
        }
    }
}

/// Finite union of closed subintervals of [0, 1], sorted and merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
    total_length: f64,
}

impl IntervalSet {
    /// Build from parts; degenerate parts (a == b) are dropped, overlapping or
    /// touching parts merged.
    pub fn new(parts: &[(f64, f64)]) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for &(a, b) in parts {
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > 1.0 || a > b {
                return Err(Error::InvalidProbability { value: if a < 0.0 || !a.is_finite() { a } else { b }, expected: "interval inside [0, 1]" });
            }
            if b > a {
                v.push((a, b));
            }
        }
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let total_length: f64 = merged.iter().map(|(a, b)| b - a).sum();
        if merged.is_empty() || total_length <= 0.0 {
            return Err(Error::EmptyIntervalSet);
        }
        Ok(IntervalSet { intervals: merged, total_length })
    }

    pub fn single(a: f64, b: f64) -> Result<Self> {
        Self::new(&[(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }
}

/// R_I(d): the average of the left quantile over I.
pub fn avg_quantile(d: &Distribution, set: &IntervalSet) -> Result<f64> {
    avg_quantile_with(d, set, IntegrationMethod::ClosedForm)
}

pub fn avg_quantile_with(d: &Distribution, set: &IntervalSet, method: IntegrationMethod) -> Result<f64> {
    if let Some(c) = d.constant_value() {
        return Ok(c);
    }
    let mut acc = 0.0;
    for &(a, b) in set.intervals() {
        acc += d.integral_with(a, b, method)?;
    }
    Ok(acc / set.total_length())
}

/// R over a raw list of parts, treating a zero-measure union as contributing
/// nothing (returns 0). Used where a coefficient multiplies R over a set that
/// may collapse.
pub(crate) fn avg_quantile_or_zero(d: &Distribution, parts: &[(f64, f64)]) -> Result<f64> {
    match IntervalSet::new(parts) {
        Ok(set) => avg_quantile(d, &set),
        Err(Error::EmptyIntervalSet) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// R_{[r, r+s]}(d).
pub fn rvar(d: &Distribution, r: f64, s: f64) -> Result<f64> {
    check_window(r, s)?;
    avg_quantile(d, &IntervalSet::single(r, (r + s).min(1.0))?)
}

pub(crate) fn check_window(r: f64, s: f64) -> Result<()> {
    check_prob(r, false, true, "[0, 1)")?;
    if !(s > 0.0 && r + s <= 1.0 + 1e-12) {
        return Err(Error::InvalidProbability { value: s, expected: "s > 0 with r + s <= 1" });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IqdVariant {
    Plus,
    Minus,
}

/// Inter-quantile difference: q^+_{1-r} - q^-_r (plus) or q^-_{1-r} - q^+_r (minus).
pub fn iqd(d: &Distribution, r: f64, variant: IqdVariant) -> Result<f64> {
    match variant {
        IqdVariant::Plus => {
            if !(r > 0.0 && r <= 0.5) {
                return Err(Error::InvalidProbability { value: r, expected: "(0, 1/2]" });
            }
            Ok(d.qr(1.0 - r) - d.ql(r))
        }
        IqdVariant::Minus => {
            if !(r >= 0.0 && r < 0.5) {
                return Err(Error::InvalidProbability { value: r, expected: "[0, 1/2)" });
            }
            Ok(d.ql(1.0 - r) - d.qr(r))
        }
    }
}
