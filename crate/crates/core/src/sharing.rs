//! Risk sharing among agents whose preferences are averages of quantiles over
//! I_i = [0, β_i] ∪ [1-β+β_i, 1].
//!
//! Everything lives on an equal-weight space of m atoms. Masses are integer
//! multiples of 1/m, so every R-value is a finite sum and is computed in
//! exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, IntervalSet};
use crate::error::{Error, Result};

pub type Rational = BigRational;

fn rat(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidParams(format!("non-finite value {x}")))
}

fn int(k: usize) -> Rational {
    Rational::from_integer(BigInt::from(k))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Cap on tie resolutions examined by `verify_dependence`.
pub const TIE_CANDIDATE_CAP: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SharingProblem {
    total: Vec<Rational>,
    total_f64: Vec<f64>,
    /// m·β_i
    counts: Vec<usize>,
    /// order[k] = atom holding rank k of the total (ties by index)
    order: Vec<usize>,
}

impl SharingProblem {
    pub fn new(total: Vec<f64>, betas: &[f64]) -> Result<Self> {
        let m = total.len();
        if m == 0 {
            return Err(Error::ShapeMismatch("empty total sample".into()));
        }
        if betas.is_empty() {
            return Err(Error::InvalidParams("at least one agent".into()));
        }
        let mut counts = Vec::with_capacity(betas.len());
        for &b in betas {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidProbability { value: b, expected: "beta_i in (0,1)" });
            }
            let k = (b * m as f64).round();
            if (b * m as f64 - k).abs() > 1e-9 * m as f64 || k < 1.0 {
                return Err(Error::NonIntegralMass { mass: b, m });
            }
            counts.push(k as usize);
        }
        let kb: usize = counts.iter().sum();
        if kb >= m {
            return Err(Error::InvalidProbability { value: kb as f64 / m as f64, expected: "beta in (0,1)" });
        }
        let exact = total.iter().map(|&x| rat(x)).collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| total[a].total_cmp(&total[b]).then(a.cmp(&b)));
        Ok(SharingProblem { total: exact, total_f64: total, counts, order })
    }

    pub fn m(&self) -> usize {
        self.total.len()
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> &[f64] {
        &self.total_f64
    }

    pub fn betas(&self) -> Vec<f64> {
        self.counts.iter().map(|&k| k as f64 / self.m() as f64).collect()
    }

    pub fn beta(&self) -> f64 {
        self.beta_count() as f64 / self.m() as f64
    }

    fn beta_count(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Rank of each atom under U_X.
    pub fn u_rank(&self) -> Vec<usize> {
        let mut rank = vec![0; self.m()];
        for (k, &a) in self.order.iter().enumerate() {
            rank[a] = k;
        }
        rank
    }

    fn max_total(&self) -> f64 {
        self.total_f64[*self.order.last().unwrap()]
    }

    /// Rank windows (in atoms) making up I_i.
    fn agent_windows(&self, i: usize) -> [(usize, usize); 2] {
        let m = self.m();
        let k = self.counts[i];
        [(0, k), (m - (self.beta_count() - k), m)]
    }

    /// A = lowest mβ atoms; A_i consecutive blocks in rank order.
    fn partition(&self) -> Vec<Vec<usize>> {
        let mut off = 0;
        self.counts
            .iter()
            .map(|&k| {
                let block = self.order[off..off + k].to_vec();
                off += k;
                block
            })
            .collect()
    }
}

/// Average over rank windows of a sample sorted ascending.
fn window_avg(sorted: &[Rational], windows: &[(usize, usize)]) -> Rational {
    let mut acc = Rational::zero();
    let mut count = 0;
    for &(a, b) in windows {
        for v in &sorted[a..b] {
            acc += v;
        }
        count += b - a;
    }
    if count == 0 {
        return Rational::zero();
    }
    acc / int(count)
}

fn sorted(v: &[Rational]) -> Vec<Rational> {
    let mut s = v.to_vec();
    s.sort();
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllocationMeta {
    OptimalT { t: f64 },
    Sequence { mu_m: f64 },
    Custom,
}

#[derive(Debug, Clone)]
pub struct Allocation {
    parts: Vec<Vec<Rational>>,
    pub meta: AllocationMeta,
}

impl Allocation {
    /// Parts must sum to the total atom by atom, exactly.
    pub fn from_exact_parts(p: &SharingProblem, parts: Vec<Vec<Rational>>, meta: AllocationMeta) -> Result<Self> {
        if parts.len() != p.n() || parts.iter().any(|v| v.len() != p.m()) {
            return Err(Error::ShapeMismatch(format!("expected {} parts of length {}", p.n(), p.m())));
        }
        for j in 0..p.m() {
            let s: Rational = parts.iter().map(|v| &v[j]).sum();
            if s != p.total[j] {
                return Err(Error::ConstraintViolation(format!("parts do not sum to the total at atom {j}")));
            }
        }
        Ok(Allocation { parts, meta })
    }

    /// Float parts; the last one is replaced by the exact residual so the
    /// sum constraint holds.
    pub fn from_parts(p: &SharingProblem, parts: &[Vec<f64>]) -> Result<Self> {
        if parts.len() != p.n() || parts.iter().any(|v| v.len() != p.m()) {
            return Err(Error::ShapeMismatch(format!("expected {} parts of length {}", p.n(), p.m())));
        }
        let mut exact: Vec<Vec<Rational>> = Vec::with_capacity(p.n());
        for v in &parts[..p.n() - 1] {
            exact.push(v.iter().map(|&x| rat(x)).collect::<Result<_>>()?);
        }
        let last: Vec<Rational> = (0..p.m())
            .map(|j| exact.iter().fold(p.total[j].clone(), |acc, v| acc - &v[j]))
            .collect();
        let given = parts[p.n() - 1].iter().map(|&x| rat(x)).collect::<Result<Vec<_>>>()?;
        let slack: f64 = last.iter().zip(&given).map(|(a, b)| to_f64(&(a - b).abs())).fold(0.0, f64::max);
        if slack > 1e-9 * (1.0 + p.total_f64.iter().fold(0.0f64, |a, x| a.max(x.abs()))) {
            return Err(Error::ConstraintViolation("parts do not sum to the total".into()));
        }
        exact.push(last);
        Ok(Allocation { parts: exact, meta: AllocationMeta::Custom })
    }

    pub fn parts_exact(&self) -> &[Vec<Rational>] {
        &self.parts
    }

    pub fn parts(&self) -> Vec<Vec<f64>> {
        self.parts.iter().map(|v| v.iter().map(to_f64).collect()).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidParams(format!("csv: {e}"));
        let header: Vec<String> = (1..=self.parts.len()).map(|i| format!("x{i}")).collect();
        w.write_record(&header).map_err(io)?;
        let m = self.parts[0].len();
        for j in 0..m {
            w.write_record(self.parts.iter().map(|v| format!("{:?}", to_f64(&v[j])))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParams(format!("csv: {e}")))
    }
}

pub fn inf_convolution_exact(p: &SharingProblem) -> Rational {
    window_avg(&sorted(&p.total), &[(0, p.beta_count())])
}

/// □ R_{I_i}(X) = R_{[0,β]}(X).
pub fn inf_convolution(p: &SharingProblem) -> f64 {
    to_f64(&inf_convolution_exact(p))
}

/// Smallest admissible t for the optimal allocation.
pub fn t_threshold(p: &SharingProblem) -> f64 {
    p.max_total().max(0.0)
}

pub fn default_t(p: &SharingProblem) -> f64 {
    t_threshold(p) + 1.0
}

/// X_i = (X - t)1_{A_i} + (X/n)1_{A^c} + (t/(n-1))1_{A \ A_i}.
fn build(p: &SharingProblem, t: &Rational) -> Vec<Vec<Rational>> {
    let n = p.n();
    let m = p.m();
    let blocks = p.partition();
    let mut owner = vec![None; m];
    for (i, b) in blocks.iter().enumerate() {
        for &a in b {
            owner[a] = Some(i);
        }
    }
    let nn = int(n);
    let share = if n > 1 { t / int(n - 1) } else { Rational::zero() };
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| match owner[j] {
                    Some(o) if o == i => &p.total[j] - t,
                    Some(_) => share.clone(),
                    None => &p.total[j] / &nn,
                })
                .collect()
        })
        .collect()
}

pub fn optimal_allocation(p: &SharingProblem, t: Option<f64>) -> Result<Allocation> {
    let t = t.unwrap_or_else(|| default_t(p));
    let min = t_threshold(p);
    if !(t >= min) || !t.is_finite() {
        return Err(Error::InvalidT { value: t, minimum: min });
    }
    let parts = build(p, &rat(t)?);
    Ok(Allocation { parts, meta: AllocationMeta::OptimalT { t } })
}

/// (q^-_β(X) ∨ max_i q^-_{1-β+β_i}(X))_+
pub fn sequence_threshold(p: &SharingProblem) -> f64 {
    let m = p.m();
    // q^-_{k/m} is the k-th smallest atom
    let x = |k: usize| p.total_f64[p.order[k.max(1) - 1]];
    let kb = p.beta_count();
    let mut v = x(kb);
    for &ki in &p.counts {
        v = v.max(x(m - kb + ki));
    }
    v.max(0.0)
}

/// (1/m) Σ (x - a)_+
pub fn stop_loss_exact(p: &SharingProblem, a: &Rational) -> Rational {
    let s: Rational = p.total.iter().filter(|x| *x > a).map(|x| x - a).sum();
    s / int(p.m())
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub allocation: Allocation,
    pub exposure: Rational,
    /// R_{[0,β]}(X) + (1/β)·stop-loss at a_m.
    pub predicted: Rational,
    pub a_m: Rational,
}

pub fn allocation_sequence(p: &SharingProblem, mu_m: f64) -> Result<SequenceResult> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidParams("the allocation sequence needs at least two agents".into()));
    }
    let min = sequence_threshold(p);
    if !(mu_m >= min) || !mu_m.is_finite() {
        return Err(Error::InvalidT { value: mu_m, minimum: min });
    }
    let mr = rat(mu_m)?;
    let parts = build(p, &mr);
    let allocation = Allocation { parts, meta: AllocationMeta::Sequence { mu_m } };
    let exposure = evaluate_allocation_exact(p, &allocation)?;
    let a_m = &mr * int(n) / int(n - 1);
    let beta = int(p.beta_count()) / int(p.m());
    let predicted = inf_convolution_exact(p) + stop_loss_exact(p, &a_m) / beta;
    Ok(SequenceResult { allocation, exposure, predicted, a_m })
}

pub fn evaluate_allocation_exact(p: &SharingProblem, a: &Allocation) -> Result<Rational> {
    if a.parts.len() != p.n() || a.parts.iter().any(|v| v.len() != p.m()) {
        return Err(Error::ShapeMismatch(format!("expected {} parts of length {}", p.n(), p.m())));
    }
    Ok((0..p.n()).map(|i| window_avg(&sorted(&a.parts[i]), &p.agent_windows(i))).sum())
}

/// Σ_i R_{I_i}(X_i).
pub fn evaluate_allocation(p: &SharingProblem, a: &Allocation) -> Result<f64> {
    evaluate_allocation_exact(p, a).map(|v| to_f64(&v))
}

#[derive(Debug, Clone)]
pub struct DualResult {
    /// R_{[β,1]}(X)
    pub value: Rational,
    /// (E[X] - β R_{[0,β]}(X)) / (1 - β)
    pub identity_value: Rational,
    pub allocation: Allocation,
    /// Σ R_{[β_i, 1-β+β_i]}(X_i) for the allocation
    pub achieved: Rational,
}

/// sup Σ R_{[β_i, 1-β+β_i]}(X_i) over allocations.
pub fn dual_sup(p: &SharingProblem) -> Result<DualResult> {
    let m = p.m();
    let kb = p.beta_count();
    let xs = sorted(&p.total);
    let value = window_avg(&xs, &[(kb, m)]);
    let mean = window_avg(&xs, &[(0, m)]);
    let beta = int(kb) / int(m);
    let one = Rational::from_integer(1.into());
    let identity_value = (mean - &beta * window_avg(&xs, &[(0, kb)])) / (&one - &beta);
    let allocation = optimal_allocation(p, None)?;
    let achieved = (0..p.n())
        .map(|i| {
            let k = p.counts[i];
            window_avg(&sorted(&allocation.parts[i]), &[(k, m - kb + k)])
        })
        .sum();
    Ok(DualResult { value, identity_value, allocation, achieved })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionParams {
    pub lambda: f64,
    pub beta_i: f64,
    pub beta: f64,
}

impl DistortionParams {
    pub fn new(lambda: f64, beta_i: f64, beta: f64) -> Result<Self> {
        let p = DistortionParams { lambda, beta_i, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidParams(format!("lambda {} outside [0,1)", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParams(format!("beta {} outside (0,1)", self.beta)));
        }
        if !(self.beta_i > 0.0 && self.beta_i < self.beta) {
            return Err(Error::InvalidParams(format!("beta_i {} outside (0, beta)", self.beta_i)));
        }
        Ok(())
    }
}

/// g_{λ,i}(s). The two indicator pieces meet at s = 1-β_i; the first is taken
/// on [0, 1-β_i) so g stays continuous there.
pub fn distortion_g(s: f64, p: &DistortionParams) -> Result<f64> {
    p.validate()?;
    crate::error::check_prob(s, false, false, "s in [0,1]")?;
    if s < 1.0 - p.beta_i {
        Ok(p.lambda * s + (1.0 - p.lambda) / p.beta * s.min(p.beta - p.beta_i))
    } else {
        // λs + (1-λ)(s-1+β)/β rewritten so that g(1) = 1 exactly
        Ok(s - (1.0 - p.lambda) * (1.0 - s) * (1.0 - p.beta) / p.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionValue {
    /// λE[X] + (1-λ)R_{I_i}(X)
    pub identity: f64,
    /// ∫ q_{1-s}(X) dg(s), slopes read off g itself
    pub direct: f64,
}

pub fn distortion_value(d: &Distribution, p: &DistortionParams) -> Result<DistortionValue> {
    p.validate()?;
    let i_set = IntervalSet::new(&[(0.0, p.beta_i), (1.0 - p.beta + p.beta_i, 1.0)])?;
    let identity = p.lambda * d.mean()? + (1.0 - p.lambda) * crate::dist::avg_quantile(d, &i_set)?;
    let mut knots = vec![0.0, p.beta - p.beta_i, 1.0 - p.beta_i, 1.0];
    knots.dedup();
    let mut direct = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (distortion_g(b, p)? - distortion_g(a, p)?) / (b - a);
        direct += slope * d.integral(1.0 - b, 1.0 - a)?;
    }
    Ok(DistortionValue { identity, direct })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceCase {
    I,
    Ii,
    None,
    /// tie resolutions disagree between (i) and (ii)
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub holds: bool,
    pub case: DependenceCase,
    pub theta: Option<f64>,
    /// every (i)/(ii) classification seen among witnessing tie resolutions
    pub classifications: Vec<(DependenceCase, Option<f64>)>,
    pub candidates_tested: usize,
    /// false when the tie cap cut the search short
    pub exhaustive: bool,
}

/// Forced members plus tie groups from which an exact count must be drawn.
struct RankSet {
    forced: Vec<bool>,
    groups: Vec<(Vec<usize>, usize)>,
}

impl RankSet {
    fn accepts(&self, s: &[bool]) -> bool {
        let mut in_group = vec![false; s.len()];
        for (g, c) in &self.groups {
            let hits = g.iter().filter(|&&a| s[a]).count();
            if hits != *c {
                return false;
            }
            for &a in g {
                in_group[a] = true;
            }
        }
        (0..s.len()).all(|a| in_group[a] || s[a] == self.forced[a])
    }
}

/// Sets attainable as the union of rank windows [0,k1) and [m-k2, m) of `v`
/// under some tie resolution.
fn rank_set(v: &[Rational], k1: usize, k2: usize) -> RankSet {
    let m = v.len();
    let xs = sorted(v);
    let mut forced = vec![false; m];
    let mut groups = Vec::new();
    let lo = (k1 > 0).then(|| xs[k1 - 1].clone());
    let hi = (k2 > 0).then(|| xs[m - k2].clone());
    let count_lt = |t: &Rational| v.iter().filter(|x| *x < t).count();
    let count_gt = |t: &Rational| v.iter().filter(|x| *x > t).count();
    match (&lo, &hi) {
        (Some(l), Some(h)) if l == h => {
            for (a, x) in v.iter().enumerate() {
                forced[a] = x != l && (x < l || x > h);
            }
            let g: Vec<usize> = (0..m).filter(|&a| v[a] == *l).collect();
            groups.push((g, k1 - count_lt(l) + k2 - count_gt(h)));
        }
        _ => {
            if let Some(l) = &lo {
                for (a, x) in v.iter().enumerate() {
                    forced[a] |= x < l;
                }
                groups.push(((0..m).filter(|&a| v[a] == *l).collect(), k1 - count_lt(l)));
            }
            if let Some(h) = &hi {
                for (a, x) in v.iter().enumerate() {
                    forced[a] |= x > h;
                }
                groups.push(((0..m).filter(|&a| v[a] == *h).collect(), k2 - count_gt(h)));
            }
        }
    }
    RankSet { forced, groups }
}

/// Enumerates k-subsets of `items` in lexicographic order, stopping after
/// `cap`; returns whether enumeration completed.
fn for_each_subset(items: &[usize], k: usize, cap: usize, mut f: impl FnMut(&[usize]) -> bool) -> (usize, bool) {
    let n = items.len();
    if k > n {
        return (0, true);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut seen = 0;
    loop {
        if seen >= cap {
            return (seen, false);
        }
        seen += 1;
        let pick: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
        if !f(&pick) {
            return (seen, true);
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else { return (seen, true) };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Largest number of atoms of `s` covered by disjoint lower-window sets
/// {U_{X_i} ∈ [0, β_i]}, via augmenting paths.
fn max_lower_cover(p: &SharingProblem, a: &Allocation, s: &[bool]) -> usize {
    let m = p.m();
    let n = p.n();
    // eligible[i]: atoms that may sit in agent i's lower window
    let mut forced_owner: Vec<Option<usize>> = vec![None; m];
    let mut need = vec![0usize; n];
    let mut eligible: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let k = p.counts[i];
        let v = &a.parts[i];
        let xs = sorted(v);
        let l = &xs[k - 1];
        let below: Vec<usize> = (0..m).filter(|&j| v[j] < *l).collect();
        for &j in &below {
            if !s[j] {
                continue;
            }
            forced_owner[j].get_or_insert(i);
        }
        need[i] = k - below.len();
        eligible[i] = (0..m).filter(|&j| v[j] == *l && s[j]).collect();
    }
    let mut matched: Vec<Option<usize>> = vec![None; m];
    let mut load = vec![0usize; n];
    fn augment(
        i: usize,
        eligible: &[Vec<usize>],
        matched: &mut [Option<usize>],
        load: &mut [usize],
        blocked: &[bool],
        seen: &mut [bool],
    ) -> bool {
        for &j in &eligible[i] {
            if blocked[j] || seen[j] {
                continue;
            }
            seen[j] = true;
            match matched[j] {
                None => {
                    matched[j] = Some(i);
                    load[i] += 1;
                    return true;
                }
                Some(o) => {
                    if augment(o, eligible, matched, load, blocked, seen) {
                        load[o] -= 1;
                        matched[j] = Some(i);
                        load[i] += 1;
                        return true;
                    }
                }
            }
        }
        false
    }
    let blocked: Vec<bool> = forced_owner.iter().map(|o| o.is_some()).collect();
    for i in 0..n {
        for _ in 0..need[i] {
            let mut seen = vec![false; m];
            if !augment(i, &eligible, &mut matched, &mut load, &blocked, &mut seen) {
                break;
            }
        }
    }
    blocked.iter().filter(|b| **b).count() + matched.iter().filter(|o| o.is_some()).count()
}

/// Searches tie resolutions for ranks witnessing
/// {U_X ∈ [0,β]} = {U_{X_i} ∈ I_i} for all i.
pub fn verify_dependence(p: &SharingProblem, a: &Allocation) -> Result<DependenceReport> {
    if a.parts.len() != p.n() || a.parts.iter().any(|v| v.len() != p.m()) {
        return Err(Error::ShapeMismatch(format!("expected {} parts of length {}", p.n(), p.m())));
    }
    let m = p.m();
    let kb = p.beta_count();
    let agents: Vec<RankSet> = (0..p.n()).map(|i| rank_set(&a.parts[i], p.counts[i], kb - p.counts[i])).collect();
    let xs = rank_set(&p.total, kb, 0);
    let base: Vec<usize> = (0..m).filter(|&j| xs.forced[j]).collect();
    let (group, need) = xs.groups.first().cloned().unwrap_or_default();

    let mut classifications: Vec<(DependenceCase, Option<f64>)> = Vec::new();
    let mut holds = false;
    let (tested, exhaustive) = for_each_subset(&group, need, TIE_CANDIDATE_CAP, |pick| {
        let mut s = vec![false; m];
        for &j in base.iter().chain(pick) {
            s[j] = true;
        }
        if agents.iter().all(|r| r.accepts(&s)) {
            holds = true;
            let covered = max_lower_cover(p, a, &s);
            let entry = if covered >= kb {
                (DependenceCase::I, None)
            } else {
                (DependenceCase::Ii, Some((kb - covered) as f64 / m as f64))
            };
            if !classifications.contains(&entry) {
                classifications.push(entry);
            }
        }
        true
    });
    let (case, theta) = match classifications.as_slice() {
        [] => (DependenceCase::None, None),
        [only] => *only,
        many if many.iter().all(|c| c.0 == DependenceCase::I) => (DependenceCase::I, None),
        _ => (DependenceCase::Ambiguous, None),
    };
    Ok(DependenceReport { holds, case, theta, classifications, candidates_tested: tested, exhaustive })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> SharingProblem {
        SharingProblem::new((1..=10).map(f64::from).collect(), &[0.1, 0.1]).unwrap()
    }

    #[test]
    fn inf_convolution_examples() {
        assert_eq!(inf_convolution(&ten()), 1.5);
        let c = SharingProblem::new(vec![2.5; 10], &[0.1, 0.3]).unwrap();
        assert_eq!(inf_convolution(&c), 2.5);
    }

    #[test]
    fn non_integral_mass() {
        let e = SharingProblem::new(vec![1.0; 7], &[0.1]).unwrap_err();
        assert!(matches!(e, Error::NonIntegralMass { .. }));
    }

    #[test]
    fn optimal_allocation_ten() {
        let p = ten();
        let a = optimal_allocation(&p, Some(10.0)).unwrap();
        let parts = a.parts();
        assert_eq!(parts[0][..4], [-9.0, 10.0, 1.5, 2.0]);
        assert_eq!(parts[1][..4], [10.0, -8.0, 1.5, 2.0]);
        assert_eq!(parts[0][9], 5.0);
        let r1 = window_avg(&sorted(&a.parts[0]), &p.agent_windows(0));
        let r2 = window_avg(&sorted(&a.parts[1]), &p.agent_windows(1));
        assert_eq!((to_f64(&r1), to_f64(&r2)), (0.5, 1.0));
        assert_eq!(evaluate_allocation_exact(&p, &a).unwrap(), inf_convolution_exact(&p));
        let b = optimal_allocation(&p, Some(11.0)).unwrap();
        assert_eq!(evaluate_allocation_exact(&p, &b).unwrap(), inf_convolution_exact(&p));
        assert!(matches!(optimal_allocation(&p, Some(9.0)), Err(Error::InvalidT { .. })));
    }

    #[test]
    fn keep_everything_dominates() {
        let p = ten();
        let keep = Allocation::from_parts(&p, &[p.total().to_vec(), vec![0.0; 10]]).unwrap();
        let v = evaluate_allocation(&p, &keep).unwrap();
        assert_eq!(v, 5.5);
        assert!(v >= inf_convolution(&p));
        let r = verify_dependence(&p, &keep).unwrap();
        assert!(!r.holds);
        assert_eq!(r.case, DependenceCase::None);
    }

    #[test]
    fn dependence_of_optimal() {
        let p = ten();
        let a = optimal_allocation(&p, None).unwrap();
        let r = verify_dependence(&p, &a).unwrap();
        assert!(r.holds && r.exhaustive);
        assert_eq!(r.case, DependenceCase::I);
    }

    #[test]
    fn constant_total() {
        let p = SharingProblem::new(vec![3.0; 10], &[0.1, 0.1]).unwrap();
        let a = Allocation::from_parts(&p, &[vec![1.0; 10], vec![2.0; 10]]).unwrap();
        assert_eq!(evaluate_allocation(&p, &a).unwrap(), 3.0);
        assert!(verify_dependence(&p, &a).unwrap().holds);
        let d = dual_sup(&p).unwrap();
        assert_eq!(to_f64(&d.value), 3.0);
    }

    #[test]
    fn dual_ten() {
        let d = dual_sup(&ten()).unwrap();
        assert_eq!(to_f64(&d.value), 6.5);
        assert_eq!(d.value, d.identity_value);
        assert_eq!(d.achieved, d.value);
    }

    #[test]
    fn sequence_bounded_total() {
        let p = ten();
        let s = allocation_sequence(&p, 10.0).unwrap();
        assert_eq!(s.exposure, inf_convolution_exact(&p));
        assert_eq!(s.exposure, s.predicted);
        assert!(allocation_sequence(&p, 0.5).is_err());
    }

    #[test]
    fn distortion_examples() {
        let p = DistortionParams::new(0.0, 0.1, 0.2).unwrap();
        assert_eq!(distortion_g(0.0, &p).unwrap(), 0.0);
        assert_eq!(distortion_g(1.0, &p).unwrap(), 1.0);
        assert!((distortion_g(0.05, &p).unwrap() - 0.25).abs() < 1e-15);
        assert!((distortion_g(0.5, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((distortion_g(0.95, &p).unwrap() - 0.75).abs() < 1e-15);
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let v = distortion_value(&u, &p).unwrap();
        assert!((v.identity - 0.5).abs() < 1e-12 && (v.direct - 0.5).abs() < 1e-10);
        let q = DistortionParams::new(0.3, 0.05, 0.15).unwrap();
        let e = Distribution::exponential(2.0).unwrap();
        let v = distortion_value(&e, &q).unwrap();
        assert!((v.identity - v.direct).abs() < 1e-10, "{v:?}");
        assert!(DistortionParams::new(0.5, 0.2, 0.2).is_err());
    }
}
