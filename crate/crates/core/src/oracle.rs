//! Numerical estimates of extreme values of risk functionals of the sum over
//! couplings of discretised marginals.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Direction;
use crate::dist::{avg_quantile, Distribution, IntervalSet, IqdVariant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaConfig {
    pub m: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for RaConfig {
    fn default() -> Self {
        RaConfig { m: 1000, max_sweeps: 200, tol: 1e-9, restarts: 5, seed: 0 }
    }
}

impl RaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParams("oracle m must be at least 2".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParams("at least one restart".into()));
        }
        Ok(())
    }
}

/// m equal-mass joint scenarios; stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoupling {
    columns: Vec<Vec<f64>>,
}

impl DiscreteCoupling {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.first().map(|c| c.len()).unwrap_or(0);
        if m == 0 || columns.iter().any(|c| c.len() != m) {
            return Err(Error::ShapeMismatch("columns must be nonempty and of equal length".into()));
        }
        Ok(DiscreteCoupling { columns })
    }

    pub fn m(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[j]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        row_sums(&self.columns)
    }

    /// Whether every sorted column equals the matching grid exactly.
    pub fn preserves_marginals(&self, grids: &[Vec<f64>]) -> bool {
        grids.len() == self.n()
            && self.columns.iter().zip(grids).all(|(c, g)| {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s == *g
            })
    }

    /// The law of the row sums.
    pub fn sum_distribution(&self) -> Distribution {
        Distribution::empirical(self.row_sums()).expect("finite row sums")
    }

    pub fn evaluate(&self, f: &SampleFunctional) -> f64 {
        f.evaluate(&self.row_sums())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=self.n()).map(|i| format!("x{i}")).collect();
        let io = |e: csv::Error| Error::InvalidParams(format!("csv: {e}"));
        w.write_record(&header).map_err(io)?;
        for j in 0..self.m() {
            w.write_record(self.row(j).iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParams(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?;
        self.write_csv(f)
    }

    fn lex_key(&self) -> impl Iterator<Item = f64> + '_ {
        self.columns.iter().flat_map(|c| c.iter().copied())
    }
}

fn row_sums(cols: &[Vec<f64>]) -> Vec<f64> {
    let m = cols[0].len();
    let mut s = vec![0.0; m];
    for c in cols {
        for (acc, v) in s.iter_mut().zip(c) {
            *acc += v;
        }
    }
    s
}

/// Risk functionals evaluated on an equal-weight sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleFunctional {
    Rvar { r: f64, s: f64 },
    QuantileLower { t: f64 },
    QuantileUpper { t: f64 },
    Ird { r1: f64, s1: f64, r2: f64, s2: f64 },
    QuantileDiff { r: f64, s: f64 },
    Iqd { r: f64, variant: IqdVariant },
}

impl SampleFunctional {
    pub fn evaluate(&self, sample: &[f64]) -> f64 {
        let d = Distribution::empirical(sample.to_vec()).expect("finite sample");
        let window = |a: f64, b: f64| avg_quantile(&d, &IntervalSet::single(a, b.min(1.0)).expect("window")).expect("finite");
        match *self {
            SampleFunctional::Rvar { r, s } => window(r, r + s),
            SampleFunctional::QuantileLower { t } => d.ql(t),
            SampleFunctional::QuantileUpper { t } => d.qr(t),
            SampleFunctional::Ird { r1, s1, r2, s2 } => window(r2, s2) - window(r1, s1),
            SampleFunctional::QuantileDiff { r, s } => d.qr(s) - d.ql(r),
            SampleFunctional::Iqd { r, variant } => crate::dist::iqd(&d, r, variant).expect("valid r"),
        }
    }
}

/// Midpoint-quantile atoms q^-_{(j-1/2)/m}, sorted ascending.
pub fn discretize(d: &Distribution, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be positive".into()));
    }
    let mut v = Vec::with_capacity(m);
    for j in 1..=m {
        let t = (j as f64 - 0.5) / m as f64;
        let q = d.ql(t);
        if !q.is_finite() {
            return Err(Error::NonFiniteQuantile(t));
        }
        v.push(q);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn discretize_all(ms: &[Distribution], m: usize) -> Result<Vec<Vec<f64>>> {
    ms.iter().map(|d| discretize(d, m)).collect()
}

/// A uniformly random permutation coupling of the given sorted grids.
pub fn random_coupling(grids: &[Vec<f64>], rng: &mut ChaCha8Rng) -> DiscreteCoupling {
    let columns = grids
        .iter()
        .map(|g| {
            let mut c = g.clone();
            c.shuffle(rng);
            c
        })
        .collect();
    DiscreteCoupling { columns }
}

fn block_les(sums: &[f64], w: f64) -> f64 {
    let mut s = sums.to_vec();
    s.sort_by(f64::total_cmp);
    let d = Distribution::empirical(s).expect("finite");
    avg_quantile(&d, &IntervalSet::single(0.0, w.min(1.0)).expect("w > 0")).expect("finite")
}

/// One antitone rearrangement sweep; returns whether any column changed.
fn ra_sweep(cols: &mut [Vec<f64>], sums: &mut [f64]) -> bool {
    let k = sums.len();
    let mut changed = false;
    let mut order: Vec<usize> = (0..k).collect();
    for col in cols.iter_mut() {
        let others: Vec<f64> = (0..k).map(|i| sums[i] - col[i]).collect();
        order.sort_by(|&a, &b| others[b].total_cmp(&others[a]).then(a.cmp(&b)));
        let mut vals = col.clone();
        vals.sort_by(f64::total_cmp);
        for (rank, &row) in order.iter().enumerate() {
            let v = vals[rank];
            if col[row] != v {
                changed = true;
                col[row] = v;
            }
        }
        for i in 0..k {
            sums[i] = others[i] + col[i];
        }
    }
    changed
}

/// Pairwise exchanges inside one column that raise the block's lower
/// average over `w`; accepts only exact improvements.
fn exchange_pass(cols: &mut [Vec<f64>], sums: &mut [f64], w: f64, current: &mut f64) -> bool {
    let k = sums.len();
    let cut = ((w * k as f64).ceil() as usize).clamp(1, k);
    let mut improved = false;
    for c in 0..cols.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
        // try lifting the lowest in-window rows using rows just above the cut
        let inside: Vec<usize> = idx[..cut].iter().copied().take(8).collect();
        let outside: Vec<usize> = idx[cut.min(k)..].iter().copied().take(32).collect();
        for &a in &inside {
            for &b in &outside {
                if cols[c][b] <= cols[c][a] {
                    continue;
                }
                let (va, vb) = (cols[c][a], cols[c][b]);
                sums[a] += vb - va;
                sums[b] += va - vb;
                let v = block_les(sums, w);
                if v > *current {
                    cols[c][a] = vb;
                    cols[c][b] = va;
                    *current = v;
                    improved = true;
                    break;
                }
                sums[a] -= vb - va;
                sums[b] -= va - vb;
            }
        }
    }
    improved
}

/// Arrange `block` (sorted columns of equal length) to make the lower average
/// of row sums over [0, w] large.
fn ra_block_les(block: &[Vec<f64>], w: f64, cfg: &RaConfig, restart: usize) -> Vec<Vec<f64>> {
    let k = block[0].len();
    let mut cols: Vec<Vec<f64>> = block.to_vec();
    if cols.len() == 1 || k <= 1 {
        return cols;
    }
    if restart > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(restart as u64));
        for c in cols.iter_mut().skip(1) {
            c.shuffle(&mut rng);
        }
    }
    let mut sums = row_sums(&cols);
    let mut current = block_les(&sums, w);
    for _ in 0..cfg.max_sweeps {
        let changed = ra_sweep(&mut cols, &mut sums);
        let v = block_les(&sums, w);
        let gain = v - current;
        current = current.max(v);
        if !changed || gain <= cfg.tol {
            break;
        }
    }
    for _ in 0..cfg.max_sweeps {
        if !exchange_pass(&mut cols, &mut sums, w, &mut current) {
            break;
        }
    }
    cols
}

/// Coupling of sorted `grids` aimed at a large R_{[a, b]} of the row sums:
/// rows below a are comonotone, the rest rearranged.
fn arrange_sup(grids: &[Vec<f64>], a: f64, b: f64, cfg: &RaConfig, restart: usize) -> Vec<Vec<f64>> {
    let m = grids[0].len();
    let k_lo = ((a * m as f64) + 1e-9).floor() as usize;
    let k_lo = k_lo.min(m - 1);
    let block: Vec<Vec<f64>> = grids.iter().map(|g| g[k_lo..].to_vec()).collect();
    let w = ((b - a) * m as f64 / (m - k_lo) as f64).clamp(1e-12, 1.0);
    let arranged = ra_block_les(&block, w, cfg, restart);
    grids
        .iter()
        .zip(arranged)
        .map(|(g, tail)| {
            let mut c = g[..k_lo].to_vec();
            c.extend(tail);
            c
        })
        .collect()
}

fn best_of(cands: Vec<(f64, DiscreteCoupling)>, dir: Direction) -> (f64, DiscreteCoupling) {
    let mut it = cands.into_iter();
    let mut best = it.next().expect("at least one candidate");
    for c in it {
        let better = match dir {
            Direction::Sup => c.0 > best.0,
            Direction::Inf => c.0 < best.0,
        };
        let tie = c.0 == best.0 && c.1.lex_key().partial_cmp(best.1.lex_key()) == Some(std::cmp::Ordering::Less);
        if better || tie {
            best = c;
        }
    }
    best
}

fn sup_window_grids(grids: &[Vec<f64>], a: f64, b: f64, cfg: &RaConfig) -> (f64, DiscreteCoupling) {
    let f = SampleFunctional::Rvar { r: a, s: b - a };
    let cands: Vec<(f64, DiscreteCoupling)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let c = DiscreteCoupling { columns: arrange_sup(grids, a, b, cfg, k) };
            (c.evaluate(&f), c)
        })
        .collect();
    best_of(cands, Direction::Sup)
}

fn negate_grids(grids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    grids.iter().map(|g| g.iter().rev().map(|v| -v).collect()).collect()
}

fn inf_window_grids(grids: &[Vec<f64>], a: f64, b: f64, cfg: &RaConfig) -> (f64, DiscreteCoupling) {
    let (_, c) = sup_window_grids(&negate_grids(grids), 1.0 - b, 1.0 - a, cfg);
    let columns: Vec<Vec<f64>> = c.columns.iter().map(|col| col.iter().map(|v| -v).collect()).collect();
    let c = DiscreteCoupling { columns };
    (c.evaluate(&SampleFunctional::Rvar { r: a, s: b - a }), c)
}

/// Rearrangement estimate of sup R_{[r, r+s]} of the sum.
pub fn ra_sup_rvar(ms: &[Distribution], r: f64, s: f64, cfg: &RaConfig) -> Result<(f64, DiscreteCoupling)> {
    cfg.validate()?;
    crate::dist::check_window(r, s)?;
    let grids = discretize_all(ms, cfg.m)?;
    Ok(sup_window_grids(&grids, r, (r + s).min(1.0), cfg))
}

/// Rearrangement estimate of inf R_{[r, r+s]} of the sum.
pub fn ra_inf_rvar(ms: &[Distribution], r: f64, s: f64, cfg: &RaConfig) -> Result<(f64, DiscreteCoupling)> {
    cfg.validate()?;
    crate::dist::check_window(r, s)?;
    let grids = discretize_all(ms, cfg.m)?;
    Ok(inf_window_grids(&grids, r, (r + s).min(1.0), cfg))
}

pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Exact extreme of `f` over all permutation couplings of the sorted columns
/// (column 0 held fixed).
pub fn exhaustive_extreme_grids(
    grids: &[Vec<f64>],
    f: &SampleFunctional,
    dir: Direction,
) -> Result<(f64, DiscreteCoupling)> {
    let n = grids.len();
    let m = grids.first().map(|g| g.len()).unwrap_or(0);
    if n == 0 || m == 0 || grids.iter().any(|g| g.len() != m) {
        return Err(Error::ShapeMismatch("grids must be nonempty and of equal length".into()));
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    let count = fact.powi(n as i32 - 1);
    if m > 8 || n > 3 || count > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge(format!("{m}!^{} = {count} couplings (m <= 8, n <= 3)", n - 1)));
    }
    let perms = permutations(m);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let total = perms.len().pow(n as u32 - 1);
    let mut sums = vec![0.0; m];
    for code in 0..total {
        let mut c = code;
        sums.copy_from_slice(&grids[0]);
        for g in &grids[1..] {
            let p = &perms[c % perms.len()];
            c /= perms.len();
            for (j, &pj) in p.iter().enumerate() {
                sums[j] += g[pj];
            }
        }
        let v = f.evaluate(&sums);
        let take = match (&best, dir) {
            (None, _) => true,
            (Some((b, _)), Direction::Sup) => v > *b,
            (Some((b, _)), Direction::Inf) => v < *b,
        };
        if take {
            best = Some((v, vec![code]));
        }
    }
    let (v, code) = best.expect("at least one coupling");
    let mut c = code[0];
    let mut columns = vec![grids[0].clone()];
    for g in &grids[1..] {
        let p = &perms[c % perms.len()];
        c /= perms.len();
        columns.push(p.iter().map(|&pj| g[pj]).collect());
    }
    Ok((v, DiscreteCoupling { columns }))
}

pub fn exhaustive_extreme(
    ms: &[Distribution],
    f: &SampleFunctional,
    dir: Direction,
    m: usize,
) -> Result<(f64, DiscreteCoupling)> {
    let grids = discretize_all(ms, m)?;
    exhaustive_extreme_grids(&grids, f, dir)
}

/// All permutations of 0..m in lexicographic order.
fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailSpec {
    Comonotone,
    /// Alternate columns reversed (counter-monotone for two marginals).
    Antithetic,
    /// Rearranged to minimise (lower block) or maximise (upper block) the
    /// average quantile of the sum over `window`, in global probability units.
    RaOptimized { window: Option<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerSpec {
    pub lower: TailSpec,
    pub upper: TailSpec,
}

/// Three-block coupling: lower block (probability r) built from the
/// μ^{r-} atoms, a comonotone body, and an upper block (1 - s) from the μ^{s+}
/// atoms.
pub fn corner_coupling(
    ms: &[Distribution],
    r: f64,
    s: f64,
    spec: CornerSpec,
    cfg: &RaConfig,
) -> Result<DiscreteCoupling> {
    cfg.validate()?;
    if !(0.0 < r && r <= s && s < 1.0) {
        return Err(Error::ConstraintViolation("corner coupling needs 0 < r <= s < 1".into()));
    }
    let m = cfg.m;
    let grids = discretize_all(ms, m)?;
    let kr = (r * m as f64).round() as usize;
    let ks = (s * m as f64).round() as usize;
    if kr == 0 || ks >= m {
        return Err(Error::ConstraintViolation("blocks need at least one atom; raise m".into()));
    }
    let block = |lo: usize, hi: usize| -> Vec<Vec<f64>> { grids.iter().map(|g| g[lo..hi].to_vec()).collect() };
    let arrange = |cols: Vec<Vec<f64>>, spec: TailSpec, lo_p: f64, hi_p: f64, sup: bool| -> Result<Vec<Vec<f64>>> {
        Ok(match spec {
            TailSpec::Comonotone => cols,
            TailSpec::Antithetic => cols
                .into_iter()
                .enumerate()
                .map(|(i, mut c)| {
                    if i % 2 == 1 {
                        c.reverse();
                    }
                    c
                })
                .collect(),
            TailSpec::RaOptimized { window } => {
                let (a, b) = window.unwrap_or((lo_p, hi_p));
                if !(lo_p - 1e-12 <= a && a < b && b <= hi_p + 1e-12) {
                    return Err(Error::ConstraintViolation(format!(
                        "window [{a}, {b}] must lie inside the block [{lo_p}, {hi_p}]"
                    )));
                }
                let la = ((a - lo_p) / (hi_p - lo_p)).clamp(0.0, 1.0);
                let lb = ((b - lo_p) / (hi_p - lo_p)).clamp(0.0, 1.0);
                if sup {
                    sup_window_grids(&cols, la, lb, cfg).1.columns
                } else {
                    inf_window_grids(&cols, la, lb, cfg).1.columns
                }
            }
        })
    };
    let low = arrange(block(0, kr), spec.lower, 0.0, r, false)?;
    let body = block(kr, ks);
    let up = arrange(block(ks, m), spec.upper, s, 1.0, true)?;
    let columns = (0..ms.len())
        .map(|i| {
            let mut c = low[i].clone();
            c.extend_from_slice(&body[i]);
            c.extend_from_slice(&up[i]);
            c
        })
        .collect();
    Ok(DiscreteCoupling { columns })
}

/// max of lower-block row sums and min of upper-block row sums for a coupling
/// laid out as by `corner_coupling`.
pub fn block_extremes(c: &DiscreteCoupling, r: f64, s: f64) -> (f64, f64) {
    let m = c.m();
    let kr = (r * m as f64).round() as usize;
    let ks = (s * m as f64).round() as usize;
    let sums = c.row_sums();
    let low_max = sums[..kr].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let up_min = sums[ks..].iter().cloned().fold(f64::INFINITY, f64::min);
    (low_max, up_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern() -> Distribution {
        Distribution::empirical(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn discretize_examples() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(discretize(&u, 4).unwrap(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(discretize(&Distribution::point_mass(2.0).unwrap(), 3).unwrap(), vec![2.0; 3]);
        let e = discretize(&Distribution::exponential(1.0).unwrap(), 2).unwrap();
        assert!((e[0] + 0.75f64.ln()).abs() < 1e-15 && (e[1] + 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn permutations_enumerated() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn bernoulli_es() {
        let ms = [bern(), bern()];
        let cfg = RaConfig { m: 2, ..RaConfig::default() };
        assert_eq!(ra_sup_rvar(&ms, 0.5, 0.5, &cfg).unwrap().0, 2.0);
        assert_eq!(ra_inf_rvar(&ms, 0.5, 0.5, &cfg).unwrap().0, 1.0);
        let f = SampleFunctional::Rvar { r: 0.5, s: 0.5 };
        assert_eq!(exhaustive_extreme(&ms, &f, Direction::Sup, 2).unwrap().0, 2.0);
        assert_eq!(exhaustive_extreme(&ms, &f, Direction::Inf, 2).unwrap().0, 1.0);
    }

    #[test]
    fn three_bernoulli_quantile() {
        let ms = [bern(), bern(), bern()];
        let f = SampleFunctional::QuantileUpper { t: 0.5 };
        assert_eq!(exhaustive_extreme(&ms, &f, Direction::Sup, 2).unwrap().0, 3.0);
    }

    #[test]
    fn too_large_instance() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let f = SampleFunctional::Rvar { r: 0.0, s: 1.0 };
        assert!(matches!(
            exhaustive_extreme(&[u.clone(), u.clone(), u.clone()], &f, Direction::Sup, 8),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn point_masses_both_directions() {
        let ms = [Distribution::point_mass(1.0).unwrap(), Distribution::point_mass(2.5).unwrap()];
        let cfg = RaConfig { m: 50, ..RaConfig::default() };
        assert_eq!(ra_sup_rvar(&ms, 0.2, 0.3, &cfg).unwrap().0, 3.5);
        assert_eq!(ra_inf_rvar(&ms, 0.2, 0.3, &cfg).unwrap().0, 3.5);
    }

    #[test]
    fn uniform_es_sup() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let cfg = RaConfig { m: 400, ..RaConfig::default() };
        let (v, c) = ra_sup_rvar(&[u.clone(), u.clone()], 0.5, 0.5, &cfg).unwrap();
        assert!((v - 1.5).abs() < 1e-2);
        let grids = discretize_all(&[u.clone(), u], 400).unwrap();
        assert!(c.preserves_marginals(&grids));
    }

    #[test]
    fn ra_matches_exhaustive_small() {
        let e = Distribution::exponential(1.0).unwrap();
        let u = Distribution::uniform(0.0, 2.0).unwrap();
        let ms = [e, u];
        let cfg = RaConfig { m: 6, restarts: 8, ..RaConfig::default() };
        for &(r, s) in &[(0.0, 0.5), (0.5, 0.5), (1.0 / 3.0, 1.0 / 3.0)] {
            let f = SampleFunctional::Rvar { r, s };
            let (ex_sup, _) = exhaustive_extreme(&ms, &f, Direction::Sup, 6).unwrap();
            let (ex_inf, _) = exhaustive_extreme(&ms, &f, Direction::Inf, 6).unwrap();
            let (ra_sup, _) = ra_sup_rvar(&ms, r, s, &cfg).unwrap();
            let (ra_inf, _) = ra_inf_rvar(&ms, r, s, &cfg).unwrap();
            assert!(ra_sup <= ex_sup + 1e-12 && ra_inf >= ex_inf - 1e-12);
        }
    }

    #[test]
    fn corner_blocks() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let cfg = RaConfig { m: 100, ..RaConfig::default() };
        let spec = CornerSpec { lower: TailSpec::Comonotone, upper: TailSpec::Comonotone };
        let c = corner_coupling(&[u.clone()], 0.3, 0.6, spec, &cfg).unwrap();
        let f = SampleFunctional::Ird { r1: 0.0, s1: 0.3, r2: 0.6, s2: 1.0 };
        let own = f.evaluate(&discretize(&u, 100).unwrap());
        assert_eq!(c.evaluate(&f), own);

        let ms = [u.clone(), u.clone()];
        let spec = CornerSpec { lower: TailSpec::Antithetic, upper: TailSpec::Antithetic };
        let c = corner_coupling(&ms, 0.3, 0.6, spec, &cfg).unwrap();
        assert!(c.preserves_marginals(&discretize_all(&ms, 100).unwrap()));
        let (lo, hi) = block_extremes(&c, 0.3, 0.6);
        assert!(lo <= hi);
    }

    #[test]
    fn csv_export() {
        let c = DiscreteCoupling::new(vec![vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2\n1.0,0.5\n2.0,-1.0\n");
    }
}
