//! Derivative-free search over a scaled simplex with a lower bound on the
//! first coordinate: {(β_0, β_1..β_n) >= 0 : Σ = scale, β_0 >= beta0_min}.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConstraint {
    pub n: usize,
    pub scale: f64,
    pub beta0_min: f64,
    /// β_0 = 0 is excluded from the feasible set (searched in the closure,
    /// reported through `Optimum::boundary`).
    pub beta0_open: bool,
}

impl SimplexConstraint {
    pub fn new(n: usize, scale: f64, beta0_min: f64, beta0_open: bool) -> Result<Self> {
        let c = SimplexConstraint { n, scale, beta0_min, beta0_open };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InfeasibleConstraint("n must be at least 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InfeasibleConstraint(format!("scale {} must be positive", self.scale)));
        }
        if !(self.beta0_min >= 0.0 && self.beta0_min <= self.scale + SUM_TOL) {
            return Err(Error::InfeasibleConstraint(format!(
                "beta0_min {} outside [0, scale = {}]",
                self.beta0_min, self.scale
            )));
        }
        Ok(())
    }

    fn free_mass(&self) -> f64 {
        (self.scale - self.beta0_min).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub beta0: f64,
    pub betas: Vec<f64>,
    pub scale: f64,
}

impl SimplexPoint {
    /// Validated point of the open simplex: β_0 > 0, β_i >= 0, sum = scale.
    pub fn new(beta0: f64, betas: Vec<f64>, scale: f64) -> Result<Self> {
        let p = SimplexPoint { beta0, betas, scale };
        if !(beta0 > 0.0) {
            return Err(Error::ConstraintViolation(format!("beta0 = {beta0} must be positive")));
        }
        p.check_closure()?;
        Ok(p)
    }

    /// (β_0, β_1, ..., β_n)
    pub fn coords(&self) -> Vec<f64> {
        std::iter::once(self.beta0).chain(self.betas.iter().copied()).collect()
    }

    /// Point of the closed simplex (β_0 may be 0).
    pub fn closure(beta0: f64, betas: Vec<f64>, scale: f64) -> Result<Self> {
        let p = SimplexPoint { beta0, betas, scale };
        p.check_closure()?;
        Ok(p)
    }

    fn check_closure(&self) -> Result<()> {
        if !(self.beta0 >= 0.0) || self.betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::ConstraintViolation("coordinates must be nonnegative".into()));
        }
        let sum = self.beta0 + self.betas.iter().sum::<f64>();
        if (sum - self.scale).abs() > SUM_TOL * self.scale.max(1.0) {
            return Err(Error::ConstraintViolation(format!("coordinates sum to {sum}, expected {}", self.scale)));
        }
        Ok(())
    }

    pub fn satisfies(&self, c: &SimplexConstraint) -> bool {
        self.betas.len() == c.n
            && (self.scale - c.scale).abs() <= SUM_TOL * c.scale.max(1.0)
            && self.beta0 >= c.beta0_min - SUM_TOL
            && self.check_closure().is_ok()
    }

    pub fn n(&self) -> usize {
        self.betas.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Grid points per free coordinate (endpoints included) when n <= 3.
    pub coarse_grid_resolution: usize,
    /// Latin-hypercube sample count when n > 3.
    pub lhs_samples: usize,
    pub refine_rounds: usize,
    pub local_polish: bool,
    pub tau_opt: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            coarse_grid_resolution: 12,
            lhs_samples: 5000,
            refine_rounds: 4,
            local_polish: true,
            tau_opt: 1e-8,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid_resolution < 2 {
            return Err(Error::InvalidParams("coarse_grid_resolution must be >= 2".into()));
        }
        if self.lhs_samples == 0 {
            return Err(Error::InvalidParams("lhs_samples must be positive".into()));
        }
        if !(self.tau_opt > 0.0) {
            return Err(Error::InvalidParams("tau_opt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub point: SimplexPoint,
    pub value: f64,
    /// Optimum sits on the excluded face β_0 = 0.
    pub boundary: bool,
    pub evaluations: usize,
    /// Best value after the coarse stage and after each refine round.
    pub round_best: Vec<f64>,
}

/// Evaluate an objective over many points, in parallel, preserving order.
pub fn evaluate_batch<F>(objective: &F, points: &[SimplexPoint]) -> Vec<f64>
where
    F: Fn(&SimplexPoint) -> f64 + Sync,
{
    points.par_iter().map(objective).collect()
}

#[derive(Clone)]
struct Cand {
    y: Vec<f64>,
    // minimisation key; NaN mapped to +inf
    key: f64,
}

fn better(a: &Cand, b: &Cand) -> bool {
    a.key < b.key || (a.key == b.key && lex_less(&a.y, &b.y))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

struct Search<'a, F> {
    objective: &'a F,
    c: SimplexConstraint,
    sign: f64,
    evaluations: usize,
}

impl<'a, F> Search<'a, F>
where
    F: Fn(&SimplexPoint) -> f64 + Sync,
{
    fn to_point(&self, y: &[f64]) -> SimplexPoint {
        let mut coords: Vec<f64> = y.to_vec();
        coords[0] += self.c.beta0_min;
        // push the rounding residual onto the largest coordinate
        let resid = self.c.scale - coords.iter().sum::<f64>();
        if resid != 0.0 {
            let (k, _) = coords.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            coords[k] = (coords[k] + resid).max(0.0);
        }
        SimplexPoint { beta0: coords[0], betas: coords[1..].to_vec(), scale: self.c.scale }
    }

    fn eval_many(&mut self, ys: Vec<Vec<f64>>) -> Vec<Cand> {
        self.evaluations += ys.len();
        let pts: Vec<SimplexPoint> = ys.iter().map(|y| self.to_point(y)).collect();
        let vals = evaluate_batch(self.objective, &pts);
        ys.into_iter()
            .zip(vals)
            .map(|(y, v)| {
                let key = self.sign * v;
                Cand { y, key: if key.is_nan() { f64::INFINITY } else { key } }
            })
            .collect()
    }

    /// All moves of mass `delta` from coordinate j to coordinate i, clipped.
    fn neighbours(&self, y: &[f64], deltas: &[f64]) -> Vec<Vec<f64>> {
        let k = y.len();
        let mut out = Vec::new();
        for &delta in deltas {
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let d = delta.min(y[j]);
                    if d <= 0.0 {
                        continue;
                    }
                    let mut z = y.to_vec();
                    z[i] += d;
                    z[j] -= d;
                    if d == y[j] {
                        z[j] = 0.0;
                    }
                    out.push(z);
                }
            }
        }
        out
    }
}

fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for k in 0..=total {
        cur.push(k);
        compositions(total - k, parts - 1, out, cur);
        cur.pop();
    }
}

fn coarse_points(c: &SimplexConstraint, cfg: &SearchConfig) -> Vec<Vec<f64>> {
    let mass = c.free_mass();
    let k = c.n + 1;
    let mut pts = Vec::new();
    if c.n <= 3 {
        let steps = cfg.coarse_grid_resolution - 1;
        let mut comps = Vec::new();
        compositions(steps, k, &mut comps, &mut Vec::new());
        for comp in comps {
            pts.push(comp.iter().map(|&q| mass * q as f64 / steps as f64).collect());
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let s = cfg.lhs_samples;
        let mut strata: Vec<Vec<usize>> = (0..k)
            .map(|_| {
                let mut v: Vec<usize> = (0..s).collect();
                v.shuffle(&mut rng);
                v
            })
            .collect();
        for j in 0..s {
            let mut e: Vec<f64> = strata
                .iter_mut()
                .map(|col| {
                    let u = (col[j] as f64 + rng.random::<f64>()) / s as f64;
                    -(1.0 - u).max(1e-300).ln()
                })
                .collect();
            let tot: f64 = e.iter().sum();
            for x in e.iter_mut() {
                *x *= mass / tot;
            }
            pts.push(e);
        }
        for v in 0..k {
            let mut e = vec![0.0; k];
            e[v] = mass;
            pts.push(e);
        }
        pts.push(vec![mass / k as f64; k]);
    }
    pts
}

/// Minimise or maximise `objective` over the closure of the constrained
/// simplex. Deterministic for a fixed configuration.
pub fn optimize<F>(objective: F, c: &SimplexConstraint, goal: Goal, cfg: &SearchConfig) -> Result<Optimum>
where
    F: Fn(&SimplexPoint) -> f64 + Sync,
{
    c.check()?;
    cfg.validate()?;
    let mut s = Search {
        objective: &objective,
        c: *c,
        sign: if goal == Goal::Minimize { 1.0 } else { -1.0 },
        evaluations: 0,
    };
    let mass = c.free_mass();
    let coarse = s.eval_many(coarse_points(c, cfg));
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&a, &b| {
        if better(&coarse[a], &coarse[b]) {
            std::cmp::Ordering::Less
        } else if better(&coarse[b], &coarse[a]) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let mut pool: Vec<Cand> = order.iter().take(4).map(|&i| coarse[i].clone()).collect();
    let mut best = pool[0].clone();
    let mut round_best = vec![s.sign * best.key];

    let spacing = if c.n <= 3 {
        mass / (cfg.coarse_grid_resolution - 1) as f64
    } else {
        mass / (cfg.lhs_samples as f64).powf(1.0 / c.n as f64)
    };
    let mut radius = spacing;
    for _ in 0..cfg.refine_rounds {
        if mass <= 0.0 {
            break;
        }
        for cand in pool.iter_mut() {
            let nb = s.neighbours(&cand.y, &[radius, 0.5 * radius]);
            for z in s.eval_many(nb) {
                if better(&z, cand) {
                    *cand = z;
                }
            }
            if better(cand, &best) {
                best = cand.clone();
            }
        }
        round_best.push(s.sign * best.key);
        radius *= 0.5;
    }

    if cfg.local_polish && mass > 0.0 {
        let mut h = radius;
        let floor = 1e-13 * mass.max(f64::MIN_POSITIVE);
        let budget = s.evaluations + 200_000;
        while h > floor && s.evaluations < budget {
            let nb = s.neighbours(&best.y, &[h]);
            let mut improved = false;
            let mut step_best = best.clone();
            for z in s.eval_many(nb) {
                if better(&z, &step_best) {
                    step_best = z;
                }
            }
            if step_best.key < best.key {
                let gain = best.key - step_best.key;
                best = step_best;
                improved = true;
                if gain < cfg.tau_opt * 1e-4 && h < 1e-9 * mass {
                    break;
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        round_best.push(s.sign * best.key);
    }

    let point = s.to_point(&best.y);
    let value = s.sign * best.key;
    if !value.is_finite() {
        return Err(Error::OptimizerFailure { reason: "objective not finite at any candidate".into(), best: value });
    }
    debug_assert!(point.satisfies(c));
    let boundary = c.beta0_open && point.beta0 <= 0.0;
    Ok(Optimum { point, value, boundary, evaluations: s.evaluations, round_best })
}

/// Euclidean projection onto {x >= 0, Σx = scale}, then β_0 clamped to
/// [beta0_min, scale] with the remaining mass spread proportionally.
pub fn project(raw: &[f64], c: &SimplexConstraint) -> Result<SimplexPoint> {
    c.check()?;
    if raw.len() != c.n + 1 {
        return Err(Error::ConstraintViolation(format!("expected {} coordinates, got {}", c.n + 1, raw.len())));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConstraintViolation("non-finite coordinate".into()));
    }
    let mut u = raw.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in u.iter().enumerate() {
        cum += v;
        let t = (cum - c.scale) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = raw.iter().map(|v| (v - theta).max(0.0)).collect();
    if x[0] < c.beta0_min {
        x[0] = c.beta0_min;
        let rest = c.scale - c.beta0_min;
        let tot: f64 = x[1..].iter().sum();
        for v in x[1..].iter_mut() {
            *v = if tot > 0.0 { *v * rest / tot } else { rest / c.n as f64 };
        }
    }
    let resid = c.scale - x.iter().sum::<f64>();
    let (k, _) = x.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    x[k] += resid;
    SimplexPoint::closure(x[0], x[1..].to_vec(), c.scale)
}
