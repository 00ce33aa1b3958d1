//! Python bindings. Matrices cross the boundary as float64 numpy arrays with
//! genes in rows and subjects in columns.

use latent_adjust::baselines::{eigenstrat, raw_regress, sva, SvaOptions};
use latent_adjust::eval;
use latent_adjust::pipeline::estimate_rank as core_estimate_rank;
use latent_adjust::rank_estimate::RankConfig;
use latent_adjust::simgen::{generate, SimScenario};
use latent_adjust::{leapp as core_leapp, DataMatrix, GeneResult, LeappConfig, LeappError, StudyDesign};
use nalgebra::{DMatrix, DVector};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: LeappError) -> PyErr {
    match e {
        LeappError::SingularDesign
        | LeappError::ZeroSpread
        | LeappError::Infeasible
        | LeappError::NumericalFailure(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(a: &PyReadonlyArray2<f64>) -> DMatrix<f64> {
    let v = a.as_array();
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[[i, j]])
}

fn vector(a: &PyReadonlyArray1<f64>) -> DVector<f64> {
    let v = a.as_array();
    DVector::from_iterator(v.len(), v.iter().copied())
}

fn array2<'py>(py: Python<'py>, m: &DMatrix<f64>) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn(m.shape(), |(i, j)| m[(i, j)]).into_pyarray(py)
}

fn array1<'py>(py: Python<'py>, v: &DVector<f64>) -> Bound<'py, PyArray1<f64>> {
    PyArray1::from_slice(py, v.as_slice())
}

fn inputs(
    y: &PyReadonlyArray2<f64>,
    g: &PyReadonlyArray1<f64>,
    x: Option<&PyReadonlyArray2<f64>>,
    center: bool,
) -> PyResult<(DataMatrix, StudyDesign)> {
    let y = DataMatrix::new(matrix(y)).map_err(to_py)?;
    let d = StudyDesign::new(vector(g), x.map(matrix), None);
    let d = if center { d.centered_normalized() } else { d.normalized() }.map_err(to_py)?;
    Ok((y, d))
}

fn gene_dict<'py>(py: Python<'py>, genes: &GeneResult) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("t_stat", array1(py, &genes.t_stat))?;
    out.set_item("p_value", array1(py, &genes.p_value))?;
    out.set_item("rank", genes.rank.clone())?;
    if let Some(gamma) = &genes.gamma_hat {
        out.set_item("gamma_hat", array1(py, gamma))?;
    }
    if let Some(tau) = genes.tau_hat {
        out.set_item("tau_hat", tau)?;
    }
    Ok(out)
}

/// Fits the latent-adjusted model and returns per-gene statistics.
///
/// `g` is centered and scaled to unit length unless `center=False`.
/// With `k=None` the latent rank is chosen by parallel analysis.
#[pyfunction]
#[pyo3(signature = (y, g, x=None, k=None, sparse=true, center=true, seed=0))]
#[allow(clippy::too_many_arguments)]
fn leapp<'py>(
    py: Python<'py>,
    y: PyReadonlyArray2<f64>,
    g: PyReadonlyArray1<f64>,
    x: Option<PyReadonlyArray2<f64>>,
    k: Option<usize>,
    sparse: bool,
    center: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (y, d) = inputs(&y, &g, x.as_ref(), center)?;
    let cfg = LeappConfig {
        k,
        rank: RankConfig { seed, ..RankConfig::default() },
        sparse_gamma: sparse,
        ..LeappConfig::default()
    };
    let fit = py.detach(|| core_leapp(&y, &d, &cfg)).map_err(to_py)?;
    let out = gene_dict(py, &fit.genes)?;
    out.set_item("k_hat", fit.k_hat)?;
    out.set_item("rank_estimated", fit.rank_estimated)?;
    out.set_item("u_hat", array2(py, &fit.latent.u_hat))?;
    out.set_item("sigma_hat", array1(py, &fit.latent.sigma_hat))?;
    Ok(out)
}

/// One of the comparison methods: `"raw"`, `"eigenstrat"` or `"sva"`.
/// The latter two need a latent rank `k >= 1`.
#[pyfunction]
#[pyo3(signature = (method, y, g, x=None, k=None, center=true))]
fn baseline<'py>(
    py: Python<'py>,
    method: &str,
    y: PyReadonlyArray2<f64>,
    g: PyReadonlyArray1<f64>,
    x: Option<PyReadonlyArray2<f64>>,
    k: Option<usize>,
    center: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let (y, d) = inputs(&y, &g, x.as_ref(), center)?;
    let need_k = || k.ok_or_else(|| PyValueError::new_err(format!("{method} needs k")));
    let genes = match method.to_ascii_lowercase().as_str() {
        "raw" => raw_regress(&y, &d),
        "eigenstrat" => {
            let k = need_k()?;
            py.detach(|| eigenstrat(&y, &d, k))
        }
        "sva" => {
            let k = need_k()?;
            py.detach(|| sva(&y, &d, k, &SvaOptions::default()).map(|f| f.genes))
        }
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    }
    .map_err(to_py)?;
    gene_dict(py, &genes)
}

/// Latent rank chosen by parallel analysis.
#[pyfunction]
#[pyo3(signature = (y, g, x=None, center=true, seed=0))]
fn estimate_rank(
    py: Python<'_>,
    y: PyReadonlyArray2<f64>,
    g: PyReadonlyArray1<f64>,
    x: Option<PyReadonlyArray2<f64>>,
    center: bool,
    seed: u64,
) -> PyResult<usize> {
    let (y, d) = inputs(&y, &g, x.as_ref(), center)?;
    let cfg = RankConfig { seed, ..RankConfig::default() };
    py.detach(|| core_estimate_rank(&y, &d, &cfg)).map_err(to_py)
}

/// Draws one synthetic data set. Returns `y`, `g` and the truth
/// (`gamma`, `sigma`, `u`, `v`, `nonnull`).
#[pyfunction]
#[pyo3(signature = (n=60, n_genes=1000, snr=1.0, lnr=2.0, rho=0.5, pi=0.1, k=1, seed=0, gamma_seed=None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    n_genes: usize,
    snr: f64,
    lnr: f64,
    rho: f64,
    pi: f64,
    k: usize,
    seed: u64,
    gamma_seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = SimScenario { n, n_genes, snr, lnr, rho, pi, k, seed, gamma_seed };
    let (y, d, truth) = generate(&sc).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("y", array2(py, y.values()))?;
    out.set_item("g", array1(py, &d.g))?;
    out.set_item("gamma", array1(py, &truth.gamma))?;
    out.set_item("sigma", array1(py, &truth.sigma))?;
    out.set_item("u", array2(py, &truth.u))?;
    out.set_item("v", array2(py, &truth.v))?;
    out.set_item("nonnull", truth.nonnull_mask.clone())?;
    Ok(out)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, truth: Vec<bool>) -> PyResult<f64> {
    eval::roc_auc(&scores, &truth).map(|r| r.auc).map_err(to_py)
}

#[pyfunction]
fn precision_at(scores: Vec<f64>, truth: Vec<bool>, h: usize) -> PyResult<f64> {
    eval::precision_at(&scores, &truth, h).map_err(to_py)
}

/// Resemblance curve of the columns of an `N × M` p-value matrix, as
/// `(alpha, intersections, union)` rows while the union stays within `u_max`.
#[pyfunction]
#[pyo3(signature = (pvals, u_max=700))]
fn resemblance(pvals: PyReadonlyArray2<f64>, u_max: u64) -> PyResult<Vec<(f64, u64, u64)>> {
    let m = matrix(&pvals);
    let lists: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    let pts = eval::resemblance_until(&lists, u_max).map_err(to_py)?;
    Ok(pts.into_iter().map(|p| (p.alpha, p.intersections, p.union)).collect())
}

#[pymodule(name = "latent_adjust")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(leapp, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rank, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at, m)?)?;
    m.add_function(wrap_pyfunction!(resemblance, m)?)?;
    Ok(())
}
