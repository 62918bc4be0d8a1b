//! Bounds on sup/inf of averaged-quantile functionals of X_1 + ... + X_n over
//! all couplings with fixed marginals.

use serde::{Deserialize, Serialize};

use crate::dist::{avg_quantile_or_zero, check_window, DensityDirection, Distribution, IqdVariant};
use crate::error::{Error, Result};
use crate::simplex::{optimize, Goal, SearchConfig, SimplexConstraint, SimplexPoint};

pub use crate::simplex::evaluate_batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    CertifiedByCondition,
    CertifiedByOracle,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub argpoint: Option<SimplexPoint>,
    pub sharp: Sharpness,
    pub condition_note: String,
    pub oracle_gap: Option<f64>,
    /// Optimum on the excluded face β_0 = 0.
    pub boundary: bool,
    /// Which formula produced the value.
    pub formula: String,
    /// Sub-bounds for composite functionals (IRD, quantile differences).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<BoundResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BoundResult {
    fn new(value: f64, formula: &str) -> Self {
        BoundResult {
            value,
            argpoint: None,
            sharp: Sharpness::Unknown,
            condition_note: String::new(),
            oracle_gap: None,
            boundary: false,
            formula: formula.to_string(),
            components: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Record an oracle estimate; marks the bound certified when the gap is
    /// within `tau`. Returns whether it was certified.
    pub fn certify_with_oracle(&mut self, oracle_value: f64, tau: f64) -> bool {
        let gap = self.value - oracle_value;
        self.oracle_gap = Some(gap);
        if gap.abs() <= tau {
            self.sharp = Sharpness::CertifiedByOracle;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// R_{[r, r+s]}
    Rvar { r: f64, s: f64 },
    /// R_{[r2, s2]} - R_{[r1, s1]}
    Ird { r1: f64, s1: f64, r2: f64, s2: f64 },
    /// q^+_s - q^-_r
    QuantileDiff { r: f64, s: f64 },
    Iqd { r: f64, variant: IqdVariant },
}

#[derive(Debug, Clone)]
pub struct BoundProblem {
    pub marginals: Vec<Distribution>,
    pub direction: Direction,
    pub functional: Functional,
}

impl BoundProblem {
    pub fn new(marginals: Vec<Distribution>, direction: Direction, functional: Functional) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::ConstraintViolation("at least one marginal required".into()));
        }
        match functional {
            Functional::Rvar { r, s } => check_problem(&marginals, r, s)?,
            Functional::Ird { r1, s1, r2, s2 } => check_ird(&marginals, r1, s1, r2, s2)?,
            Functional::QuantileDiff { r, s } => check_qdiff(r, s)?,
            Functional::Iqd { r, .. } => {
                if !(r > 0.0 && r <= 0.5) {
                    return Err(Error::InvalidProbability { value: r, expected: "(0, 1/2]" });
                }
            }
        }
        if direction == Direction::Inf && !matches!(functional, Functional::Rvar { .. }) {
            return Err(Error::ConstraintViolation("only RVaR has an inf bound".into()));
        }
        Ok(BoundProblem { marginals, direction, functional })
    }

    pub fn solve(&self, cfg: &SearchConfig) -> Result<BoundResult> {
        let ms = &self.marginals;
        match (self.functional, self.direction) {
            (Functional::Rvar { r, s }, Direction::Sup) => upper_bound_rvar(ms, r, s, cfg),
            (Functional::Rvar { r, s }, Direction::Inf) => lower_bound_rvar(ms, r, s, cfg),
            (Functional::Ird { r1, s1, r2, s2 }, _) => ird_sup(ms, r1, s1, r2, s2, cfg),
            (Functional::QuantileDiff { r, s }, _) => quantile_diff_sup(ms, r, s, cfg),
            (Functional::Iqd { r, variant }, _) => iqd_sup(ms, r, variant, cfg),
        }
    }
}

fn check_problem(ms: &[Distribution], r: f64, s: f64) -> Result<()> {
    if ms.is_empty() {
        return Err(Error::ConstraintViolation("at least one marginal required".into()));
    }
    check_window(r, s)?;
    if (r == 0.0 || r + s >= 1.0) && ms.iter().any(|d| !d.mean_finite()) {
        return Err(Error::ConstraintViolation(
            "window touches 0 or 1: every marginal needs a finite mean".into(),
        ));
    }
    Ok(())
}

fn check_ird(ms: &[Distribution], r1: f64, s1: f64, r2: f64, s2: f64) -> Result<()> {
    if !(0.0 <= r1 && r1 < s1 && s1 <= r2 && r2 < s2 && s2 <= 1.0) {
        return Err(Error::ConstraintViolation("windows need 0 <= r1 < s1 <= r2 < s2 <= 1".into()));
    }
    check_problem(ms, r1, s1 - r1)?;
    check_problem(ms, r2, s2 - r2)
}

fn check_qdiff(r: f64, s: f64) -> Result<()> {
    if !(0.0 < r && r <= s && s < 1.0) {
        return Err(Error::ConstraintViolation("quantile difference needs 0 < r <= s < 1".into()));
    }
    Ok(())
}

fn sum_terms<F>(ms: &[Distribution], p: &SimplexPoint, term: F) -> f64
where
    F: Fn(&Distribution, f64, f64) -> Result<f64>,
{
    let mut acc = 0.0;
    for (d, &b) in ms.iter().zip(&p.betas) {
        match term(d, b, p.beta0) {
            Ok(v) => acc += v,
            Err(_) => return f64::NAN,
        }
    }
    acc
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Objective of the extended upper convolution bound at a feasible point of
/// (1-r)Δ_n with β_0 >= 1-r-s.
pub fn upper_objective(ms: &[Distribution], r: f64, s: f64, p: &SimplexPoint) -> f64 {
    let c = ((1.0 - r - p.beta0) / s).clamp(0.0, 1.0);
    sum_terms(ms, p, |d, b, b0| {
        let mid = if c < 1.0 {
            (1.0 - c) * avg_quantile_or_zero(d, &[(clamp01(r + b), clamp01(r + b + b0))])?
        } else {
            0.0
        };
        let out = if c > 0.0 {
            c * avg_quantile_or_zero(d, &[(r, clamp01(r + b)), (clamp01(r + b + b0), 1.0)])?
        } else {
            0.0
        };
        Ok(mid + out)
    })
}

/// Objective of the extended lower convolution bound on (r+s)Δ_n, β_0 >= r.
pub fn lower_objective(ms: &[Distribution], r: f64, s: f64, p: &SimplexPoint) -> f64 {
    let top = r + s;
    let c = ((top - p.beta0) / s).clamp(0.0, 1.0);
    sum_terms(ms, p, |d, b, b0| {
        let mid = if c < 1.0 {
            (1.0 - c) * avg_quantile_or_zero(d, &[(clamp01(top - b - b0), clamp01(top - b))])?
        } else {
            0.0
        };
        let out = if c > 0.0 {
            c * avg_quantile_or_zero(d, &[(0.0, clamp01(top - b - b0)), (clamp01(top - b), clamp01(top))])?
        } else {
            0.0
        };
        Ok(mid + out)
    })
}

/// Σ R_{[1-β_i-β_0, 1-β_i]}(μ_i).
pub fn bllw_upper_objective(ms: &[Distribution], p: &SimplexPoint) -> f64 {
    sum_terms(ms, p, |d, b, b0| avg_quantile_or_zero(d, &[(clamp01(1.0 - b - b0), clamp01(1.0 - b))]))
}

/// Σ R_{[β_i, β_i+β_0]}(μ_i).
pub fn bllw_lower_objective(ms: &[Distribution], p: &SimplexPoint) -> f64 {
    sum_terms(ms, p, |d, b, b0| avg_quantile_or_zero(d, &[(clamp01(b), clamp01(b + b0))]))
}

/// Right-hand side of the general RVaR inequality for explicit (α, β).
pub fn new_rvar_rhs(ms: &[Distribution], r: f64, s: f64, alphas: &[f64], betas: &[f64]) -> Result<f64> {
    check_problem(ms, r, s)?;
    let n = ms.len();
    if alphas.len() != n || betas.len() != n {
        return Err(Error::ConstraintViolation(format!("need {n} alphas and {n} betas")));
    }
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::ConstraintViolation("alpha_i >= 0".into()));
    }
    if betas.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::ConstraintViolation("beta_i > 0".into()));
    }
    let sa: f64 = alphas.iter().sum();
    let mb = betas.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12;
    if sa + mb > 1.0 - r + tol {
        return Err(Error::ConstraintViolation("sum alpha + max beta <= 1 - r".into()));
    }
    if sa > s + tol {
        return Err(Error::ConstraintViolation("sum alpha <= s".into()));
    }
    let mut acc = 0.0;
    for ((d, &a), &b) in ms.iter().zip(alphas).zip(betas) {
        let c = (1.0 - r - b) / s;
        let outer = avg_quantile_or_zero(d, &[(r, clamp01(r + a)), (clamp01(r + a + b), 1.0)])?;
        let inner = avg_quantile_or_zero(d, &[(clamp01(r + a), clamp01(r + a + b))])?;
        acc += c * outer + (1.0 - c) * inner;
    }
    Ok(acc)
}

/// Σ R_{[r, r+α_i] ∪ [1-s+α_i, 1]}(μ_i) with Σ α_i = s.
pub fn simplified_rhs(ms: &[Distribution], r: f64, s: f64, alphas: &[f64]) -> Result<f64> {
    check_problem(ms, r, s)?;
    if alphas.len() != ms.len() {
        return Err(Error::ConstraintViolation(format!("need {} alphas", ms.len())));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0 - r)) {
        return Err(Error::ConstraintViolation("alpha_i in (0, 1 - r)".into()));
    }
    let sa: f64 = alphas.iter().sum();
    if (sa - s).abs() > 1e-12 {
        return Err(Error::ConstraintViolation("sum alpha = s".into()));
    }
    let mut acc = 0.0;
    for (d, &a) in ms.iter().zip(alphas) {
        acc += avg_quantile_or_zero(d, &[(r, clamp01(r + a)), (clamp01(1.0 - s + a), 1.0)])?;
    }
    Ok(acc)
}

fn run_opt<F>(objective: F, c: SimplexConstraint, goal: Goal, cfg: &SearchConfig, formula: &str) -> Result<BoundResult>
where
    F: Fn(&SimplexPoint) -> f64 + Sync,
{
    let opt = optimize(objective, &c, goal, cfg)?;
    let mut res = BoundResult::new(opt.value, formula);
    res.argpoint = Some(opt.point);
    res.boundary = opt.boundary;
    Ok(res)
}

fn all_mean_finite(ms: &[Distribution]) -> bool {
    ms.iter().all(|d| d.mean_finite())
}

/// Upper-tail mass condition Σ μ_i[q^+_r, q^-_1) <= 1 - r; `None` when some
/// marginal is unbounded above.
pub fn upper_mass_condition(ms: &[Distribution], r: f64) -> Option<(bool, f64)> {
    let mut total = 0.0;
    for d in ms {
        let top = d.ess_sup();
        if !top.is_finite() {
            return None;
        }
        total += d.mass_in(d.qr(r), top);
    }
    Some((total <= 1.0 - r + 1e-12, total))
}

/// Lower-tail mass condition Σ μ_i(q^+_0, q^-_{r+s}] <= r + s.
pub fn lower_mass_condition(ms: &[Distribution], t: f64) -> Option<(bool, f64)> {
    let mut total = 0.0;
    for d in ms {
        let bottom = d.ess_inf();
        if !bottom.is_finite() {
            return None;
        }
        total += d.mass_in_left_open(bottom, d.ql(t));
    }
    Some((total <= t + 1e-12, total))
}

fn upper_sharpness(ms: &[Distribution], r: f64, res: &mut BoundResult) {
    if ms.len() == 1 {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "single marginal: the bound is the marginal's own value".into();
        return;
    }
    if !all_mean_finite(ms) {
        res.condition_note = "some marginal has infinite mean; equality cases not available".into();
        return;
    }
    if ms.iter().all(|d| d.tail_monotonicity().beyond(r, DensityDirection::Increasing)) {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = format!("every marginal declares an increasing density beyond its {r}-quantile");
        for d in ms {
            res.warnings.extend(d.density_slope_check(r, 1.0 - 1e-6, DensityDirection::Increasing));
        }
        return;
    }
    match upper_mass_condition(ms, r) {
        Some((true, m)) => {
            res.sharp = Sharpness::CertifiedByCondition;
            res.condition_note = format!("upper-tail mass condition holds: {m} <= {}", 1.0 - r);
        }
        Some((false, m)) => {
            res.condition_note = format!("no declared increasing density; upper-tail mass {m} exceeds {}", 1.0 - r);
        }
        None => {
            res.condition_note = "no declared increasing density; mass condition not checkable (unbounded support)".into();
        }
    }
}

fn lower_sharpness(ms: &[Distribution], t: f64, res: &mut BoundResult) {
    if ms.len() == 1 {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "single marginal: the bound is the marginal's own value".into();
        return;
    }
    if !all_mean_finite(ms) {
        res.condition_note = "some marginal has infinite mean; equality cases not available".into();
        return;
    }
    if ms.iter().all(|d| d.tail_monotonicity().below(t, DensityDirection::Decreasing)) {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = format!("every marginal declares a decreasing density below its {t}-quantile");
        for d in ms {
            res.warnings.extend(d.density_slope_check(1e-6, t, DensityDirection::Decreasing));
        }
        return;
    }
    match lower_mass_condition(ms, t) {
        Some((true, m)) => {
            res.sharp = Sharpness::CertifiedByCondition;
            res.condition_note = format!("lower-tail mass condition holds: {m} <= {t}");
        }
        Some((false, m)) => {
            res.condition_note = format!("no declared decreasing density; lower-tail mass {m} exceeds {t}");
        }
        None => {
            res.condition_note = "no declared decreasing density; mass condition not checkable (unbounded support)".into();
        }
    }
}

/// Extended convolution upper bound on sup R_{[r, r+s]} of the sum.
pub fn upper_bound_rvar(ms: &[Distribution], r: f64, s: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    check_problem(ms, r, s)?;
    let scale = 1.0 - r;
    let c = SimplexConstraint::new(ms.len(), scale, (1.0 - r - s).max(0.0), true)?;
    let mut res = run_opt(|p| upper_objective(ms, r, s, p), c, Goal::Minimize, cfg, "extended_upper")?;
    upper_sharpness(ms, r, &mut res);
    Ok(res)
}

/// Extended convolution lower bound on inf R_{[r, r+s]} of the sum.
pub fn lower_bound_rvar(ms: &[Distribution], r: f64, s: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    check_problem(ms, r, s)?;
    let c = SimplexConstraint::new(ms.len(), (r + s).min(1.0), r, true)?;
    let mut res = run_opt(|p| lower_objective(ms, r, s, p), c, Goal::Maximize, cfg, "extended_lower")?;
    lower_sharpness(ms, (r + s).min(1.0), &mut res);
    Ok(res)
}

/// Classical convolution upper bound (comparison only).
pub fn bllw_upper(ms: &[Distribution], r: f64, s: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    check_problem(ms, r, s)?;
    let c = SimplexConstraint::new(ms.len(), 1.0 - r, s, true)?;
    let mut res = run_opt(|p| bllw_upper_objective(ms, p), c, Goal::Minimize, cfg, "convolution_upper")?;
    if ms.len() == 1 {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "single marginal".into();
    } else if all_mean_finite(ms) && ms.iter().all(|d| d.tail_monotonicity().beyond(r, DensityDirection::Decreasing)) {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = format!("every marginal declares a decreasing density beyond its {r}-quantile");
    } else {
        res.condition_note = "comparison bound; no equality condition declared".into();
    }
    Ok(res)
}

/// Classical convolution lower bound (comparison only).
pub fn bllw_lower(ms: &[Distribution], r: f64, s: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    check_problem(ms, r, s)?;
    let t = (r + s).min(1.0);
    let c = SimplexConstraint::new(ms.len(), t, s, true)?;
    let mut res = run_opt(|p| bllw_lower_objective(ms, p), c, Goal::Maximize, cfg, "convolution_lower")?;
    if ms.len() == 1 {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "single marginal".into();
    } else if all_mean_finite(ms) && ms.iter().all(|d| d.tail_monotonicity().below(t, DensityDirection::Increasing)) {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = format!("every marginal declares an increasing density below its {t}-quantile");
    } else {
        res.condition_note = "comparison bound; no equality condition declared".into();
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnResult {
    pub value: f64,
    /// The defining inequality held with equality (within tolerance) at every
    /// scanned point.
    pub equality_everywhere: bool,
    /// No scanned point satisfied the inequality (value is 1/n by convention).
    pub empty: bool,
}

fn cn_gap(d: &Distribution, n: usize, x: f64) -> (f64, f64) {
    let nf = n as f64;
    let a = (nf - 1.0) * x;
    let b = 1.0 - x;
    let lhs = ((nf - 1.0) * d.ql(a.max(f64::MIN_POSITIVE)) + d.ql(b)) / nf;
    let rhs = avg_quantile_or_zero(d, &[(a, b)]).unwrap_or(f64::NAN);
    (lhs - rhs, 1e-11 * (1.0 + lhs.abs() + rhs.abs()))
}

/// c_n(μ) = inf{x ∈ (0, 1/n) : ((n-1) q_{(n-1)x} + q_{1-x}) / n <= R_{[(n-1)x, 1-x]}}, inf ∅ = 1/n.
pub fn c_n(d: &Distribution, n: usize) -> f64 {
    c_n_detailed(d, n).value
}

pub fn c_n_detailed(d: &Distribution, n: usize) -> CnResult {
    let n = n.max(2);
    let top = 1.0 / n as f64;
    let grid = 4000usize;
    let holds = |x: f64| {
        let (g, tol) = cn_gap(d, n, x);
        (g <= tol, g.abs() <= tol)
    };
    let mut all_equal = true;
    let mut first: Option<usize> = None;
    for k in 1..grid {
        let x = top * k as f64 / grid as f64;
        let (h, eq) = holds(x);
        all_equal &= eq;
        if h && first.is_none() {
            first = Some(k);
        }
    }
    let value = match first {
        None => top,
        Some(k) => {
            let hi0 = top * k as f64 / grid as f64;
            if k > 1 {
                let (mut lo, mut hi) = (top * (k - 1) as f64 / grid as f64, hi0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid).0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            } else {
                // walk geometrically toward 0
                let mut x = hi0;
                let mut last_ok = hi0;
                for _ in 0..60 {
                    x *= 0.5;
                    if holds(x).0 {
                        last_ok = x;
                    } else {
                        break;
                    }
                }
                if last_ok < 1e-15 {
                    0.0
                } else if holds(last_ok * 0.5).0 {
                    0.0
                } else {
                    let (mut lo, mut hi) = (last_ok * 0.5, last_ok);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if holds(mid).0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                }
            }
        }
    };
    CnResult { value, equality_everywhere: all_equal, empty: first.is_none() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoResult {
    pub value: f64,
    pub c_n_literal: f64,
    pub c_n_transformed: f64,
    /// Which threshold check admitted the closed form: "literal", "transformed"
    /// or "degenerate".
    pub gate: String,
}

/// Closed form n·R_{[r, r+s/n] ∪ [1-s+s/n, 1]}(μ) for n identical marginals with
/// an increasing density.
pub fn homo_upper(d: &Distribution, n: usize, r: f64, s: f64) -> Result<HomoResult> {
    check_problem(std::slice::from_ref(d), r, s)?;
    if n < 2 {
        return Err(Error::InvalidParams("n must be at least 2".into()));
    }
    let nf = n as f64;
    let value = nf * avg_quantile_or_zero(d, &[(r, r + s / nf), (1.0 - s + s / nf, 1.0)])?;
    if let Some(c) = d.constant_value() {
        return Ok(HomoResult { value: nf * c, c_n_literal: 0.0, c_n_transformed: 0.0, gate: "degenerate".into() });
    }
    if !d.tail_monotonicity().beyond(0.0, DensityDirection::Increasing) {
        return Err(Error::ConditionNotMet {
            condition: "increasing density on the support must be declared".into(),
            required: 1.0,
            actual: 0.0,
        });
    }
    let ratio = s / (1.0 - r);
    let lit = c_n(d, n);
    let trans = c_n(&d.tail_upper(r)?.negate(), n);
    gate(value, ratio, nf, lit, trans)
}

/// Closed form n·R_{[0,(n-1)s/n] ∪ [r+(n-1)s/n, r+s]}(μ) for n identical marginals
/// with a decreasing density.
pub fn homo_lower(d: &Distribution, n: usize, r: f64, s: f64) -> Result<HomoResult> {
    check_problem(std::slice::from_ref(d), r, s)?;
    if n < 2 {
        return Err(Error::InvalidParams("n must be at least 2".into()));
    }
    let nf = n as f64;
    let k = (nf - 1.0) * s / nf;
    let value = nf * avg_quantile_or_zero(d, &[(0.0, k), (r + k, r + s)])?;
    if let Some(c) = d.constant_value() {
        return Ok(HomoResult { value: nf * c, c_n_literal: 0.0, c_n_transformed: 0.0, gate: "degenerate".into() });
    }
    if !d.tail_monotonicity().below(1.0, DensityDirection::Decreasing) {
        return Err(Error::ConditionNotMet {
            condition: "decreasing density on the support must be declared".into(),
            required: 1.0,
            actual: 0.0,
        });
    }
    let ratio = s / (r + s);
    let lit = c_n(&d.negate(), n);
    let trans = c_n(&d.tail_lower((r + s).min(1.0))?, n);
    gate(value, ratio, nf, lit, trans)
}

fn gate(value: f64, ratio: f64, nf: f64, lit: f64, trans: f64) -> Result<HomoResult> {
    let tol = 1e-12;
    let g = if ratio <= nf * lit + tol {
        "literal"
    } else if ratio <= nf * trans + tol {
        "transformed"
    } else {
        return Err(Error::ConditionNotMet {
            condition: "window ratio must not exceed n * c_n".into(),
            required: ratio,
            actual: nf * lit.max(trans),
        });
    };
    Ok(HomoResult { value, c_n_literal: lit, c_n_transformed: trans, gate: g.into() })
}

fn all_beyond(ms: &[Distribution], p: f64, dir: DensityDirection) -> bool {
    ms.iter().all(|d| d.tail_monotonicity().beyond(p, dir))
}

fn all_below(ms: &[Distribution], p: f64, dir: DensityDirection) -> bool {
    ms.iter().all(|d| d.tail_monotonicity().below(p, dir))
}

/// Upper bound on sup over couplings of R_{[r2,s2]} - R_{[r1,s1]} of the sum.
/// The two one-sided components are chosen from the declared tail densities.
pub fn ird_sup(ms: &[Distribution], r1: f64, s1: f64, r2: f64, s2: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    check_ird(ms, r1, s1, r2, s2)?;
    let (rs, ss) = (r2, s2 - r2);
    let upper = if all_beyond(ms, r2, DensityDirection::Decreasing) {
        bllw_upper(ms, rs, ss, cfg)?
    } else if all_beyond(ms, r2, DensityDirection::Increasing) {
        upper_bound_rvar(ms, rs, ss, cfg)?
    } else {
        let a = upper_bound_rvar(ms, rs, ss, cfg)?;
        let b = bllw_upper(ms, rs, ss, cfg)?;
        let mut best = if b.value < a.value { b } else { a };
        best.formula = format!("min({})", best.formula);
        best
    };
    let (rl, sl) = (r1, s1 - r1);
    let lower = if all_below(ms, s1, DensityDirection::Increasing) {
        bllw_lower(ms, rl, sl, cfg)?
    } else if all_below(ms, s1, DensityDirection::Decreasing) {
        lower_bound_rvar(ms, rl, sl, cfg)?
    } else {
        let a = lower_bound_rvar(ms, rl, sl, cfg)?;
        let b = bllw_lower(ms, rl, sl, cfg)?;
        let mut best = if b.value > a.value { b } else { a };
        best.formula = format!("max({})", best.formula);
        best
    };
    let mut res = BoundResult::new(upper.value - lower.value, "ird");
    if upper.sharp != Sharpness::Unknown && lower.sharp != Sharpness::Unknown {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "both one-sided components are sharp".into();
    } else {
        res.condition_note = "at least one one-sided component is not certified".into();
    }
    res.components = vec![upper, lower];
    Ok(res)
}

/// Smallest β_0 used for quantile-limit objectives, relative to the scale.
const QDIFF_FLOOR: f64 = 1e-9;

/// Upper bound on sup over couplings of q^+_s - q^-_r of the sum.
pub fn quantile_diff_sup(ms: &[Distribution], r: f64, s: f64, cfg: &SearchConfig) -> Result<BoundResult> {
    if ms.is_empty() {
        return Err(Error::ConstraintViolation("at least one marginal required".into()));
    }
    check_qdiff(r, s)?;
    let cu = SimplexConstraint::new(ms.len(), 1.0 - s, QDIFF_FLOOR * (1.0 - s), true)?;
    let mut upper = run_opt(|p| bllw_upper_objective(ms, p), cu, Goal::Minimize, cfg, "quantile_upper")?;
    let cl = SimplexConstraint::new(ms.len(), r, QDIFF_FLOOR * r, true)?;
    let mut lower = run_opt(|p| bllw_lower_objective(ms, p), cl, Goal::Maximize, cfg, "quantile_lower")?;
    let n1 = ms.len() == 1;
    let mono = |dir: DensityDirection| all_beyond(ms, s, dir);
    let mono_low = |dir: DensityDirection| all_below(ms, r, dir);
    let upper_ok = n1 || mono(DensityDirection::Increasing) || mono(DensityDirection::Decreasing);
    let lower_ok = n1 || mono_low(DensityDirection::Increasing) || mono_low(DensityDirection::Decreasing);
    for (c, ok) in [(&mut upper, upper_ok), (&mut lower, lower_ok)] {
        if ok {
            c.sharp = Sharpness::CertifiedByCondition;
            c.condition_note = "monotone densities declared in the tail".into();
        }
    }
    let mut res = BoundResult::new(upper.value - lower.value, "quantile_diff");
    if upper_ok && lower_ok {
        res.sharp = Sharpness::CertifiedByCondition;
        res.condition_note = "densities monotone in one direction in both tails".into();
    } else {
        res.condition_note = "no tail monotonicity declared; valid upper bound only".into();
    }
    res.components = vec![upper, lower];
    Ok(res)
}

/// Upper bound on sup IQD_r of the sum (plus or minus variant).
pub fn iqd_sup(ms: &[Distribution], r: f64, variant: IqdVariant, cfg: &SearchConfig) -> Result<BoundResult> {
    let (lo, hi) = match variant {
        IqdVariant::Plus => {
            if !(r > 0.0 && r <= 0.5) {
                return Err(Error::InvalidProbability { value: r, expected: "(0, 1/2]" });
            }
            (r, 1.0 - r)
        }
        IqdVariant::Minus => {
            if !(r > 0.0 && r < 0.5) {
                return Err(Error::InvalidProbability { value: r, expected: "(0, 1/2)" });
            }
            (r, 1.0 - r)
        }
    };
    let mut res = quantile_diff_sup(ms, lo, hi, cfg)?;
    res.formula = format!("iqd_{variant:?}").to_lowercase();
    if variant == IqdVariant::Minus && !ms.iter().all(|d| d.continuous_quantile()) {
        res.sharp = Sharpness::Unknown;
        res.condition_note = "left/right quantile equality needs continuous quantiles; not declared".into();
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{rvar, TailMonotonicity};

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn new_rhs_examples() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let v = new_rvar_rhs(&[u.clone()], 0.0, 0.5, &[0.5], &[0.5]).unwrap();
        assert!((v - 0.25).abs() < 1e-15, "{v}");
        let v2 = new_rvar_rhs(&[u.clone(), u.clone()], 0.0, 0.5, &[0.25, 0.25], &[0.5, 0.5]).unwrap();
        assert!((v2 - 1.0).abs() < 1e-15);
        let pm = [Distribution::point_mass(1.5).unwrap(), Distribution::point_mass(-0.25).unwrap()];
        let v3 = new_rvar_rhs(&pm, 0.2, 0.3, &[0.1, 0.1], &[0.4, 0.3]).unwrap();
        assert!((v3 - 1.25).abs() < 1e-15);
        assert!(new_rvar_rhs(&[u.clone()], 0.0, 0.5, &[0.6], &[0.3]).is_err());
    }

    #[test]
    fn simplified_rhs_examples() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let v = simplified_rhs(&[u.clone(), u.clone()], 0.0, 0.2, &[0.1, 0.1]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let e = Distribution::exponential(1.0).unwrap();
        let single = simplified_rhs(&[e.clone()], 0.3, 0.4, &[0.4]).unwrap();
        assert!((single - rvar(&e, 0.3, 0.4).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn es_collapse_two_exponentials() {
        let e = Distribution::exponential(1.0).unwrap();
        let res = upper_bound_rvar(&[e.clone(), e.clone()], 0.5, 0.5, &cfg()).unwrap();
        let want = 2.0 * (1.0 + std::f64::consts::LN_2);
        assert!((res.value - want).abs() < 1e-9, "{}", res.value);
    }

    #[test]
    fn single_marginal_upper_is_own_rvar() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let res = upper_bound_rvar(&[u.clone()], 0.0, 0.5, &cfg()).unwrap();
        assert!((res.value - 0.25).abs() < 1e-9, "{}", res.value);
        let res = bllw_upper(&[u.clone()], 0.2, 0.3, &cfg()).unwrap();
        assert!((res.value - rvar(&u, 0.2, 0.3).unwrap()).abs() < 1e-9);
        let res = bllw_lower(&[u.clone()], 0.2, 0.3, &cfg()).unwrap();
        assert!((res.value - rvar(&u, 0.2, 0.3).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn point_masses() {
        let pm = vec![Distribution::point_mass(2.0).unwrap(), Distribution::point_mass(3.0).unwrap()];
        for f in [upper_bound_rvar, lower_bound_rvar, bllw_upper, bllw_lower] {
            let res = f(&pm, 0.3, 0.4, &cfg()).unwrap();
            assert!((res.value - 5.0).abs() < 1e-12);
        }
        assert!(ird_sup(&pm, 0.1, 0.3, 0.5, 0.9, &cfg()).unwrap().value.abs() < 1e-12);
        assert!(quantile_diff_sup(&pm, 0.25, 0.75, &cfg()).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn bllw_uniform_feasible_point() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let ms = [u.clone(), u.clone()];
        let p = SimplexPoint::new(0.5, vec![0.25, 0.25], 1.0).unwrap();
        assert!((bllw_upper_objective(&ms, &p) - 1.0).abs() < 1e-15);
        assert!(bllw_upper(&ms, 0.0, 0.5, &cfg()).unwrap().value <= 1.0 + 1e-12);
    }

    #[test]
    fn cn_values() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let cu = c_n_detailed(&u, 2);
        assert_eq!(cu.value, 0.0);
        assert!(cu.equality_everywhere);
        assert_eq!(c_n(&Distribution::point_mass(1.0).unwrap(), 3), 0.0);
        let e = Distribution::exponential(1.0).unwrap();
        let ce = c_n_detailed(&e, 2);
        assert_eq!(ce.value, 0.5);
        assert!(ce.empty);
        let x2 = Distribution::power_law(2.0).unwrap();
        assert_eq!(c_n(&x2, 2), 0.0);
        assert_eq!(c_n(&x2.tail_upper(0.5).unwrap().negate(), 2), 0.5);
    }

    #[test]
    fn homo_upper_power_law() {
        let x2 = Distribution::power_law(2.0)
            .unwrap()
            .with_tail(TailMonotonicity::on_support(DensityDirection::Increasing));
        let h = homo_upper(&x2, 2, 0.5, 0.25).unwrap();
        let want = 2.0 * (2.0 / 3.0) * ((0.625f64.powf(1.5) - 0.5f64.powf(1.5)) + (1.0 - 0.875f64.powf(1.5))) / 0.25;
        assert!((h.value - want).abs() < 1e-13);
        assert_eq!(h.gate, "transformed");
        let general = upper_bound_rvar(&[x2.clone(), x2.clone()], 0.5, 0.25, &cfg()).unwrap();
        assert!((general.value - h.value).abs() < 5e-3, "{} vs {}", general.value, h.value);
        assert!(matches!(
            homo_upper(&Distribution::power_law(2.0).unwrap(), 2, 0.5, 0.25),
            Err(Error::ConditionNotMet { .. })
        ));
        let pm = homo_upper(&Distribution::point_mass(1.5).unwrap(), 3, 0.1, 0.2).unwrap();
        assert_eq!(pm.value, 4.5);
    }

    #[test]
    fn lower_duality() {
        let e = Distribution::exponential(1.0).unwrap();
        let ms = vec![e.clone(), Distribution::uniform(0.0, 2.0).unwrap()];
        let neg: Vec<_> = ms.iter().map(|d| d.negate()).collect();
        let (r, s) = (0.2, 0.5);
        let lo = lower_bound_rvar(&ms, r, s, &cfg()).unwrap();
        let up = upper_bound_rvar(&neg, 1.0 - r - s, s, &cfg()).unwrap();
        assert!((lo.value + up.value).abs() < 1e-8, "{} vs {}", lo.value, -up.value);
    }

    #[test]
    fn bernoulli_lower_is_one() {
        let b = Distribution::empirical(vec![0.0, 1.0]).unwrap();
        let res = lower_bound_rvar(&[b.clone(), b.clone()], 0.5, 0.5, &cfg()).unwrap();
        assert!((res.value - 1.0).abs() < 1e-12, "{}", res.value);
        assert_eq!(res.sharp, Sharpness::CertifiedByCondition);
        let up = upper_bound_rvar(&[b.clone(), b.clone()], 0.5, 0.5, &cfg()).unwrap();
        assert!((up.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ird_identity_exponential() {
        let e = Distribution::exponential(1.0)
            .unwrap()
            .with_tail(TailMonotonicity::on_support(DensityDirection::Decreasing));
        let ms = vec![e.clone(), e.clone()];
        let res = ird_sup(&ms, 0.0, 0.5, 0.5, 1.0, &cfg()).unwrap();
        let (u, l) = (&res.components[0], &res.components[1]);
        assert_eq!(res.value, u.value - l.value);
        assert!((u.value - 2.0 * (1.0 + std::f64::consts::LN_2)).abs() < 1e-8);
        assert!((l.value - 2.0 * (1.0 - std::f64::consts::LN_2)).abs() < 1e-8, "{}", l.value);
    }

    #[test]
    fn quantile_diff_single_marginal() {
        let e = Distribution::exponential(1.0).unwrap();
        let res = quantile_diff_sup(&[e.clone()], 0.25, 0.75, &cfg()).unwrap();
        let want = 4f64.ln() - (4.0f64 / 3.0).ln();
        assert!((res.value - want).abs() < 1e-6, "{} vs {want}", res.value);
    }

    #[test]
    fn quantile_diff_uniforms() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let res = quantile_diff_sup(&[u.clone(), u.clone()], 0.25, 0.75, &cfg()).unwrap();
        assert!((res.value - 1.5).abs() < 1e-6, "{}", res.value);
    }
}
