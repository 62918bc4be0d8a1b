use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use robustrisk::bounds::{self, BoundResult, Sharpness};
use robustrisk::dist::IqdVariant;
use robustrisk::oracle::{self, RaConfig};
use robustrisk::sharing::{self, DependenceCase};
use robustrisk::simplex::SearchConfig;
use robustrisk::{avg_quantile, rvar, Distribution, IntervalSet};

create_exception!(robustrisk_py, RobustRiskError, PyValueError);

fn err(e: robustrisk::Error) -> PyErr {
    RobustRiskError::new_err(format!("[{}] {e}", e.code()))
}

#[pyclass(name = "Distribution", module = "robustrisk_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: Distribution,
}

fn wrap(r: robustrisk::Result<Distribution>) -> PyResult<PyDistribution> {
    r.map(|inner| PyDistribution { inner }).map_err(err)
}

#[pymethods]
impl PyDistribution {
    #[staticmethod]
    fn uniform(low: f64, high: f64) -> PyResult<Self> {
        wrap(Distribution::uniform(low, high))
    }

    #[staticmethod]
    fn exponential(rate: f64) -> PyResult<Self> {
        wrap(Distribution::exponential(rate))
    }

    #[staticmethod]
    fn pareto(shape: f64, scale: f64) -> PyResult<Self> {
        wrap(Distribution::pareto(shape, scale))
    }

    #[staticmethod]
    fn normal(mean: f64, sd: f64) -> PyResult<Self> {
        wrap(Distribution::normal(mean, sd))
    }

    #[staticmethod]
    fn lognormal(mu: f64, sigma: f64) -> PyResult<Self> {
        wrap(Distribution::lognormal(mu, sigma))
    }

    #[staticmethod]
    fn triangular(low: f64, mode: f64, high: f64) -> PyResult<Self> {
        wrap(Distribution::triangular(low, mode, high))
    }

    /// F(x) = x^k on [0, 1].
    #[staticmethod]
    fn power_law(exponent: f64) -> PyResult<Self> {
        wrap(Distribution::power_law(exponent))
    }

    #[staticmethod]
    fn point_mass(value: f64) -> PyResult<Self> {
        wrap(Distribution::point_mass(value))
    }

    #[staticmethod]
    fn empirical(values: Vec<f64>) -> PyResult<Self> {
        wrap(Distribution::empirical(values))
    }

    fn quantile_left(&self, t: f64) -> PyResult<f64> {
        self.inner.quantile_left(t).map_err(err)
    }

    fn quantile_right(&self, t: f64) -> PyResult<f64> {
        self.inner.quantile_right(t).map_err(err)
    }

    fn integral(&self, t1: f64, t2: f64) -> PyResult<f64> {
        self.inner.integral(t1, t2).map_err(err)
    }

    fn mean(&self) -> PyResult<f64> {
        self.inner.mean().map_err(err)
    }

    /// Average of the left quantile over [r, r+s].
    fn rvar(&self, r: f64, s: f64) -> PyResult<f64> {
        rvar(&self.inner, r, s).map_err(err)
    }

    /// Average of the left quantile over a union of intervals.
    fn avg_quantile(&self, intervals: Vec<(f64, f64)>) -> PyResult<f64> {
        let set = IntervalSet::new(&intervals).map_err(err)?;
        avg_quantile(&self.inner, &set).map_err(err)
    }

    fn negate(&self) -> Self {
        PyDistribution { inner: self.inner.negate() }
    }

    fn tail_upper(&self, r: f64) -> PyResult<Self> {
        wrap(self.inner.tail_upper(r))
    }

    fn tail_lower(&self, r: f64) -> PyResult<Self> {
        wrap(self.inner.tail_lower(r))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "BoundResult", module = "robustrisk_py", frozen, get_all)]
struct PyBoundResult {
    value: f64,
    sharp: String,
    formula: String,
    condition_note: String,
    oracle_gap: Option<f64>,
    boundary: bool,
    beta0: Option<f64>,
    betas: Option<Vec<f64>>,
    components: Vec<f64>,
    warnings: Vec<String>,
}

#[pymethods]
impl PyBoundResult {
    fn __repr__(&self) -> String {
        format!("BoundResult(value={}, sharp='{}', formula='{}')", self.value, self.sharp, self.formula)
    }
}

impl From<BoundResult> for PyBoundResult {
    fn from(b: BoundResult) -> Self {
        let sharp = match b.sharp {
            Sharpness::CertifiedByCondition => "certified_by_condition",
            Sharpness::CertifiedByOracle => "certified_by_oracle",
            Sharpness::Unknown => "unknown",
        };
        PyBoundResult {
            value: b.value,
            sharp: sharp.to_string(),
            formula: b.formula,
            condition_note: b.condition_note,
            oracle_gap: b.oracle_gap,
            boundary: b.boundary,
            beta0: b.argpoint.as_ref().map(|p| p.beta0),
            betas: b.argpoint.map(|p| p.betas),
            components: b.components.iter().map(|c| c.value).collect(),
            warnings: b.warnings,
        }
    }
}

fn marginals(ms: &[PyRef<'_, PyDistribution>]) -> Vec<Distribution> {
    ms.iter().map(|d| d.inner.clone()).collect()
}

fn search(seed: u64, lhs_samples: usize, refine_rounds: usize) -> SearchConfig {
    SearchConfig { seed, lhs_samples, refine_rounds, ..SearchConfig::default() }
}

type Bounder = fn(&[Distribution], f64, f64, &SearchConfig) -> robustrisk::Result<BoundResult>;

fn bound_with(py: Python<'_>, f: Bounder, ms: Vec<Distribution>, r: f64, s: f64, cfg: SearchConfig) -> PyResult<PyBoundResult> {
    py.detach(|| f(&ms, r, s, &cfg)).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (marginals, r, s, seed=0, lhs_samples=5000, refine_rounds=4))]
fn upper_bound_rvar(
    py: Python<'_>,
    marginals: Vec<PyRef<'_, PyDistribution>>,
    r: f64,
    s: f64,
    seed: u64,
    lhs_samples: usize,
    refine_rounds: usize,
) -> PyResult<PyBoundResult> {
    bound_with(py, bounds::upper_bound_rvar, self::marginals(&marginals), r, s, search(seed, lhs_samples, refine_rounds))
}

#[pyfunction]
#[pyo3(signature = (marginals, r, s, seed=0, lhs_samples=5000, refine_rounds=4))]
fn lower_bound_rvar(
    py: Python<'_>,
    marginals: Vec<PyRef<'_, PyDistribution>>,
    r: f64,
    s: f64,
    seed: u64,
    lhs_samples: usize,
    refine_rounds: usize,
) -> PyResult<PyBoundResult> {
    bound_with(py, bounds::lower_bound_rvar, self::marginals(&marginals), r, s, search(seed, lhs_samples, refine_rounds))
}

#[pyfunction]
fn bllw_upper(py: Python<'_>, marginals: Vec<PyRef<'_, PyDistribution>>, r: f64, s: f64) -> PyResult<PyBoundResult> {
    bound_with(py, bounds::bllw_upper, self::marginals(&marginals), r, s, SearchConfig::default())
}

#[pyfunction]
fn bllw_lower(py: Python<'_>, marginals: Vec<PyRef<'_, PyDistribution>>, r: f64, s: f64) -> PyResult<PyBoundResult> {
    bound_with(py, bounds::bllw_lower, self::marginals(&marginals), r, s, SearchConfig::default())
}

#[pyfunction]
fn ird_sup(
    py: Python<'_>,
    marginals: Vec<PyRef<'_, PyDistribution>>,
    r1: f64,
    s1: f64,
    r2: f64,
    s2: f64,
) -> PyResult<PyBoundResult> {
    let ms = self::marginals(&marginals);
    py.detach(|| bounds::ird_sup(&ms, r1, s1, r2, s2, &SearchConfig::default())).map(Into::into).map_err(err)
}

#[pyfunction]
fn quantile_diff_sup(py: Python<'_>, marginals: Vec<PyRef<'_, PyDistribution>>, r: f64, s: f64) -> PyResult<PyBoundResult> {
    bound_with(py, bounds::quantile_diff_sup, self::marginals(&marginals), r, s, SearchConfig::default())
}

/// variant: "plus" or "minus"
#[pyfunction]
#[pyo3(signature = (marginals, r, variant="plus"))]
fn iqd_sup(py: Python<'_>, marginals: Vec<PyRef<'_, PyDistribution>>, r: f64, variant: &str) -> PyResult<PyBoundResult> {
    let v = match variant {
        "plus" => IqdVariant::Plus,
        "minus" => IqdVariant::Minus,
        other => return Err(RobustRiskError::new_err(format!("unknown variant '{other}'"))),
    };
    let ms = self::marginals(&marginals);
    py.detach(|| bounds::iqd_sup(&ms, r, v, &SearchConfig::default())).map(Into::into).map_err(err)
}

#[pyfunction]
fn c_n(d: PyRef<'_, PyDistribution>, n: usize) -> f64 {
    bounds::c_n(&d.inner, n)
}

/// Returns (value, columns) with columns[i] the i-th marginal's atoms.
#[pyfunction]
#[pyo3(signature = (marginals, r, s, m=1000, restarts=5, seed=0))]
fn ra_sup_rvar(
    py: Python<'_>,
    marginals: Vec<PyRef<'_, PyDistribution>>,
    r: f64,
    s: f64,
    m: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let ms = self::marginals(&marginals);
    let cfg = RaConfig { m, restarts, seed, ..RaConfig::default() };
    let (v, c) = py.detach(|| oracle::ra_sup_rvar(&ms, r, s, &cfg)).map_err(err)?;
    Ok((v, c.columns().to_vec()))
}

#[pyfunction]
#[pyo3(signature = (marginals, r, s, m=1000, restarts=5, seed=0))]
fn ra_inf_rvar(
    py: Python<'_>,
    marginals: Vec<PyRef<'_, PyDistribution>>,
    r: f64,
    s: f64,
    m: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let ms = self::marginals(&marginals);
    let cfg = RaConfig { m, restarts, seed, ..RaConfig::default() };
    let (v, c) = py.detach(|| oracle::ra_inf_rvar(&ms, r, s, &cfg)).map_err(err)?;
    Ok((v, c.columns().to_vec()))
}

#[pyclass(name = "SharingProblem", module = "robustrisk_py", frozen)]
struct PySharingProblem {
    inner: sharing::SharingProblem,
}

#[pymethods]
impl PySharingProblem {
    #[new]
    fn new(total: Vec<f64>, betas: Vec<f64>) -> PyResult<Self> {
        sharing::SharingProblem::new(total, &betas).map(|inner| PySharingProblem { inner }).map_err(err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn betas(&self) -> Vec<f64> {
        self.inner.betas()
    }

    fn inf_convolution(&self) -> f64 {
        sharing::inf_convolution(&self.inner)
    }

    #[pyo3(signature = (t=None))]
    fn optimal_allocation(&self, t: Option<f64>) -> PyResult<PyAllocation> {
        sharing::optimal_allocation(&self.inner, t).map(|inner| PyAllocation { inner }).map_err(err)
    }

    /// Returns (allocation, exposure, predicted exposure).
    fn allocation_sequence(&self, m_param: f64) -> PyResult<(PyAllocation, f64, f64)> {
        let s = sharing::allocation_sequence(&self.inner, m_param).map_err(err)?;
        Ok((PyAllocation { inner: s.allocation }, sharing::to_f64(&s.exposure), sharing::to_f64(&s.predicted)))
    }

    /// Allocation from explicit parts (the last part absorbs rounding).
    fn allocation(&self, parts: Vec<Vec<f64>>) -> PyResult<PyAllocation> {
        sharing::Allocation::from_parts(&self.inner, &parts).map(|inner| PyAllocation { inner }).map_err(err)
    }

    fn evaluate(&self, a: PyRef<'_, PyAllocation>) -> PyResult<f64> {
        sharing::evaluate_allocation(&self.inner, &a.inner).map_err(err)
    }

    fn verify_dependence<'py>(&self, py: Python<'py>, a: PyRef<'_, PyAllocation>) -> PyResult<Bound<'py, PyDict>> {
        let r = sharing::verify_dependence(&self.inner, &a.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("holds", r.holds)?;
        let case = match r.case {
            DependenceCase::I => "i",
            DependenceCase::Ii => "ii",
            DependenceCase::None => "none",
            DependenceCase::Ambiguous => "ambiguous",
        };
        d.set_item("case", case)?;
        d.set_item("theta", r.theta)?;
        d.set_item("exhaustive", r.exhaustive)?;
        d.set_item("candidates_tested", r.candidates_tested)?;
        Ok(d)
    }

    /// sup Σ R_{[β_i, 1-β+β_i]}(X_i)
    fn dual_sup(&self) -> PyResult<f64> {
        sharing::dual_sup(&self.inner).map(|d| sharing::to_f64(&d.value)).map_err(err)
    }
}

#[pyclass(name = "Allocation", module = "robustrisk_py", frozen)]
struct PyAllocation {
    inner: sharing::Allocation,
}

#[pymethods]
impl PyAllocation {
    #[getter]
    fn parts(&self) -> Vec<Vec<f64>> {
        self.inner.parts()
    }
}

#[pyfunction]
fn distortion_g(s: f64, lam: f64, beta_i: f64, beta: f64) -> PyResult<f64> {
    let p = sharing::DistortionParams::new(lam, beta_i, beta).map_err(err)?;
    sharing::distortion_g(s, &p).map_err(err)
}

/// Returns (identity route, direct route).
#[pyfunction]
fn distortion_value(d: PyRef<'_, PyDistribution>, lam: f64, beta_i: f64, beta: f64) -> PyResult<(f64, f64)> {
    let p = sharing::DistortionParams::new(lam, beta_i, beta).map_err(err)?;
    let v = sharing::distortion_value(&d.inner, &p).map_err(err)?;
    Ok((v.identity, v.direct))
}

#[pymodule]
fn robustrisk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("RobustRiskError", m.py().get_type::<RobustRiskError>())?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyBoundResult>()?;
    m.add_class::<PySharingProblem>()?;
    m.add_class::<PyAllocation>()?;
    m.add_function(wrap_pyfunction!(upper_bound_rvar, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_rvar, m)?)?;
    m.add_function(wrap_pyfunction!(bllw_upper, m)?)?;
    m.add_function(wrap_pyfunction!(bllw_lower, m)?)?;
    m.add_function(wrap_pyfunction!(ird_sup, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_diff_sup, m)?)?;
    m.add_function(wrap_pyfunction!(iqd_sup, m)?)?;
    m.add_function(wrap_pyfunction!(c_n, m)?)?;
    m.add_function(wrap_pyfunction!(ra_sup_rvar, m)?)?;
    m.add_function(wrap_pyfunction!(ra_inf_rvar, m)?)?;
    m.add_function(wrap_pyfunction!(distortion_g, m)?)?;
    m.add_function(wrap_pyfunction!(distortion_value, m)?)?;
    Ok(())
}
