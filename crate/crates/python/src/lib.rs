//! Python bindings. Matrices cross the boundary as lists of rows of Python
//! `complex` values.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use corrfade::dof::sweep::trial_rng;
use corrfade::dof::{self, DecoderKind, DofConfig, SchemeOptions};
use corrfade::mimo::{self, MimoTrainingPlan};
use corrfade::{simo, CMatrix, Error, RecoveryReport, C64};

create_exception!(corrfade, DecodeError, PyException);

type Rows = Vec<Vec<C64>>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_) | Error::InvalidProfile(_) | Error::DimensionMismatch(_) | Error::NonPositiveSnr(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => DecodeError::new_err(other.to_string()),
    }
}

pub fn matrix_from_rows(rows: &Rows) -> corrfade::Result<CMatrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("expected a non-empty rectangular list of rows".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn rows_from_matrix(m: &CMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A `Q x T` whitening matrix.
#[pyclass(name = "Profile", from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: corrfade::CorrelationProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    fn new(rows: Rows) -> PyResult<Self> {
        let inner = corrfade::CorrelationProfile::new(matrix_from_rows(&rows).map_err(to_py)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn two_innovation_example(alpha: C64, beta: C64) -> PyResult<Self> {
        let inner = corrfade::CorrelationProfile::two_innovation_example(alpha, beta).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn block_fading(t: usize) -> PyResult<Self> {
        let inner = corrfade::CorrelationProfile::block_fading(t).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn random(q: usize, t: usize, seed: u64) -> PyResult<Self> {
        let mut rng = trial_rng(seed, 0);
        let inner = corrfade::CorrelationProfile::random(&mut rng, q, t).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn block_len(&self) -> usize {
        self.inner.block_len()
    }

    fn matrix(&self) -> Rows {
        rows_from_matrix(self.inner.matrix())
    }

    /// `A^H A`.
    fn correlation(&self) -> Rows {
        rows_from_matrix(&self.inner.correlation())
    }

    fn __repr__(&self) -> String {
        format!("Profile(Q={}, T={})", self.inner.rank(), self.inner.block_len())
    }
}

fn report_dict<'py>(py: Python<'py>, report: &RecoveryReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("passed", report.passed)?;
    let failures = report
        .failures
        .iter()
        .map(|f| {
            let fd = PyDict::new(py);
            fd.set_item("name", &f.name)?;
            fd.set_item("indices", f.indices.clone())?;
            fd.set_item("magnitude", f.magnitude)?;
            Ok(fd)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("failures", failures)?;
    d.set_item("notes", report.notes.clone())?;
    Ok(d)
}

#[pyfunction]
fn check_recovery_conditions_simo<'py>(py: Python<'py>, profile: &PyProfile) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &simo::check_recovery_conditions_simo(&profile.inner))
}

#[pyfunction]
fn check_recovery_conditions_mimo<'py>(py: Python<'py>, profile: &PyProfile, n_t: usize) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &mimo::check_recovery_conditions_mimo(&profile.inner, n_t))
}

/// Payload followed by the unit pilot, as a `1 x T` block.
#[pyfunction]
fn encode_simo(payload: Vec<C64>) -> Rows {
    rows_from_matrix(simo::encode_simo(&payload).matrix())
}

/// `n_t x (T - n_t)` payload into an `n_t x T` block with identity training.
#[pyfunction]
fn encode_mimo(payload: Rows, profile: &PyProfile) -> PyResult<Rows> {
    let payload = matrix_from_rows(&payload).map_err(to_py)?;
    let plan = MimoTrainingPlan::for_profile(&profile.inner, payload.nrows()).map_err(to_py)?;
    Ok(rows_from_matrix(plan.encode(&payload).map_err(to_py)?.matrix()))
}

/// Sends `x` through one fading draw; `snr=None` is noiseless.
#[pyfunction]
#[pyo3(signature = (x, profile, n_r, snr=None, seed=0))]
fn transmit(x: Rows, profile: &PyProfile, n_r: usize, snr: Option<f64>, seed: u64) -> PyResult<Rows> {
    let x = matrix_from_rows(&x).map_err(to_py)?;
    let block = corrfade::TransmitBlock::new(x, Vec::new()).map_err(to_py)?;
    let mut rng = trial_rng(seed, 0);
    let fading = corrfade::sample_fading(&profile.inner, block.n_t(), n_r, &mut rng).map_err(to_py)?;
    let rx = corrfade::ReceivedBlock::observe(&block, &fading, snr.unwrap_or(f64::INFINITY), &mut rng).map_err(to_py)?;
    Ok(rows_from_matrix(&rx.y_noisy))
}

#[pyfunction]
fn decode_simo(y: Rows, profile: &PyProfile) -> PyResult<Vec<C64>> {
    simo::decode_simo(&matrix_from_rows(&y).map_err(to_py)?, &profile.inner).map_err(to_py)
}

#[pyfunction]
fn decode_simo_reduced(y: Rows, profile: &PyProfile) -> PyResult<Vec<C64>> {
    simo::decode_simo_reduced(&matrix_from_rows(&y).map_err(to_py)?, &profile.inner).map_err(to_py)
}

#[pyfunction]
fn decode_mimo(y: Rows, profile: &PyProfile, n_t: usize) -> PyResult<Rows> {
    let plan = MimoTrainingPlan::for_profile(&profile.inner, n_t).map_err(to_py)?;
    let x = mimo::decode_mimo(&matrix_from_rows(&y).map_err(to_py)?, &profile.inner, &plan).map_err(to_py)?;
    Ok(rows_from_matrix(&x))
}

/// Returns `(B, pivots)` with the pivot columns of `B` equal to the identity.
#[pyfunction]
fn canonical_form(r: Rows) -> PyResult<(Rows, Vec<usize>)> {
    let canon = corrfade::canonical_form(&matrix_from_rows(&r).map_err(to_py)?, corrfade::PivotPolicy::FixedLeading)
        .map_err(to_py)?;
    Ok((rows_from_matrix(canon.matrix()), canon.pivots().to_vec()))
}

#[pyfunction]
fn subspace_distance(u: Rows, v: Rows) -> PyResult<f64> {
    corrfade::subspace_distance(&matrix_from_rows(&u).map_err(to_py)?, &matrix_from_rows(&v).map_err(to_py)?)
        .map_err(to_py)
}

/// Runs an SNR sweep and returns `(table_csv, slope)`; `slope` is `None`
/// when fewer than three grid points decode reliably. `sigma0=None`
/// calibrates end to end at 80 dB.
#[pyfunction]
#[pyo3(signature = (profile, decoder, n_t, n_r, snr_grid_db, trials, seed=0, delta=0.05, epsilon=0.05, sigma0=None, error_ceiling=0.05))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    profile: &PyProfile,
    decoder: &str,
    n_t: usize,
    n_r: usize,
    snr_grid_db: Vec<f64>,
    trials: usize,
    seed: u64,
    delta: f64,
    epsilon: f64,
    sigma0: Option<f64>,
    error_ceiling: f64,
) -> PyResult<(String, Option<f64>)> {
    let kind: DecoderKind = decoder.parse().map_err(to_py)?;
    let scheme = dof::Scheme::new(kind, profile.inner.clone(), n_t, n_r, SchemeOptions::default()).map_err(to_py)?;
    py.detach(|| {
        let sigma0 = match sigma0 {
            Some(s) => s,
            None => dof::calibrate_effective_sigma0(&scheme, 2000, epsilon, dof::db_to_linear(80.0), seed)?,
        };
        let config = DofConfig {
            delta,
            sigma0,
            epsilon,
            snr_grid: snr_grid_db.iter().map(|&d| dof::db_to_linear(d)).collect(),
            trials_per_point: trials,
            noiseless: false,
        };
        let table = dof::run_sweep(&config, &scheme, seed)?;
        Ok((table.to_csv(), dof::estimate_dof(&table, error_ceiling).ok()))
    })
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "corrfade")]
fn corrfade_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add("DecodeError", m.py().get_type::<DecodeError>())?;
    m.add_function(wrap_pyfunction!(check_recovery_conditions_simo, m)?)?;
    m.add_function(wrap_pyfunction!(check_recovery_conditions_mimo, m)?)?;
    m.add_function(wrap_pyfunction!(encode_simo, m)?)?;
    m.add_function(wrap_pyfunction!(encode_mimo, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(decode_simo, m)?)?;
    m.add_function(wrap_pyfunction!(decode_simo_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(decode_mimo, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_form, m)?)?;
    m.add_function(wrap_pyfunction!(subspace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
