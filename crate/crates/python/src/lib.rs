//! Python bindings. Series are plain lists of floats; datasets are lists of
//! equal-length series.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use ttw::{LabeledDataset, SincWindow, TtwError};

type Rows = Vec<Vec<f64>>;

fn to_py(e: TtwError) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn dataset(rows: Vec<Vec<f64>>) -> PyResult<LabeledDataset> {
    LabeledDataset::unlabeled(rows).map_err(to_py)
}

fn window(half_width: usize) -> PyResult<SincWindow> {
    SincWindow::new(half_width).map_err(to_py)
}

/// Optimizer and model settings.
#[pyclass(name = "TrainConfig", from_py_object)]
#[derive(Clone)]
pub struct PyTrainConfig {
    inner: ttw::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (k=8, iterations=100, step_size=0.01, window_half_width=10, seed=0, exact_gradient=false, stop_rel_change=None))]
    fn new(
        k: usize,
        iterations: usize,
        step_size: f64,
        window_half_width: usize,
        seed: u64,
        exact_gradient: bool,
        stop_rel_change: Option<f64>,
    ) -> PyResult<Self> {
        let inner = ttw::TrainConfig {
            k,
            iterations,
            step_size,
            window_half_width,
            seed,
            gradient: if exact_gradient {
                ttw::GradientMode::Exact
            } else {
                ttw::GradientMode::Printed
            },
            stop_rel_change,
            ..ttw::TrainConfig::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn step_size(&self) -> f64 {
        self.inner.step_size
    }

    #[getter]
    fn window_half_width(&self) -> usize {
        self.inner.window_half_width
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(k={}, iterations={}, step_size={}, window_half_width={})",
            self.inner.k, self.inner.iterations, self.inner.step_size, self.inner.window_half_width
        )
    }
}

fn config(cfg: Option<PyTrainConfig>) -> ttw::TrainConfig {
    cfg.map(|c| c.inner).unwrap_or_default()
}

/// Centroid, synchronized signals, warps and loss trace of one alignment.
#[pyclass(name = "AlignmentResult", frozen)]
pub struct PyAlignmentResult {
    inner: ttw::AlignmentResult,
}

#[pymethods]
impl PyAlignmentResult {
    #[getter]
    fn centroid(&self) -> Vec<f64> {
        self.inner.centroid.values().to_vec()
    }

    #[getter]
    fn synchronized(&self) -> Vec<Vec<f64>> {
        self.inner
            .synchronized
            .iter()
            .map(|s| s.values().to_vec())
            .collect()
    }

    #[getter]
    fn warps(&self) -> Vec<Vec<f64>> {
        self.inner.warps.matrix().to_rows()
    }

    #[getter]
    fn coefficients(&self) -> Vec<Vec<f64>> {
        self.inner.coefficients.matrix().to_rows()
    }

    #[getter]
    fn loss_trace(&self) -> Vec<f64> {
        self.inner.loss_trace.clone()
    }

    #[getter]
    fn endpoint_violations(&self) -> usize {
        self.inner.endpoint_violations
    }

    /// Writes the result as JSON.
    fn save(&self, path: &str) -> PyResult<()> {
        ttw::save_result(&self.inner, path, ttw::OutputFormat::Json)
            .map(|_| ())
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ttw::load_result(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }
}

#[pyfunction]
fn sinc(u: f64) -> f64 {
    ttw::sinc(u)
}

/// Reads `x` at the 1-based fractional positions `tau`.
#[pyfunction]
#[pyo3(signature = (x, tau, half_width=10))]
fn warp_signal(x: Vec<f64>, tau: Vec<f64>, half_width: usize) -> PyResult<Vec<f64>> {
    Ok(ttw::warp_signal(&x, &tau, window(half_width)?))
}

/// Returns `(distance, path)`; the path holds 1-based index pairs.
#[pyfunction]
fn dtw_distance(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let r = ttw::dtw_distance(&x, &y).map_err(to_py)?;
    Ok((r.distance, r.path))
}

#[pyfunction]
fn dtw_sum(candidate: Vec<f64>, rows: Vec<Vec<f64>>) -> PyResult<f64> {
    ttw::dtw_sum(&candidate, &dataset(rows)?).map_err(to_py)
}

#[pyfunction]
fn average_avg(rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(ttw::average_avg(&dataset(rows)?).values().to_vec())
}

#[pyfunction]
#[pyo3(signature = (rows, config=None))]
fn average_ttw(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    config: Option<PyTrainConfig>,
) -> PyResult<Vec<f64>> {
    let data = dataset(rows)?;
    let cfg = self::config(config);
    py.detach(|| ttw::average_ttw(&data, &cfg))
        .map(|(c, _)| c.values().to_vec())
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rows, config=None))]
fn train(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    config: Option<PyTrainConfig>,
) -> PyResult<PyAlignmentResult> {
    let data = dataset(rows)?;
    let cfg = self::config(config);
    py.detach(|| ttw::train(&data, &cfg))
        .map(|inner| PyAlignmentResult { inner })
        .map_err(to_py)
}

/// Returns `(best_k, [(k, dtw_sum), ...])`.
#[pyfunction]
#[pyo3(signature = (rows, grid=None, config=None))]
fn tune_k(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    grid: Option<Vec<usize>>,
    config: Option<PyTrainConfig>,
) -> PyResult<(usize, Vec<(usize, f64)>)> {
    let data = dataset(rows)?;
    let grid = grid.unwrap_or_else(|| ttw::pipeline::DEFAULT_K_GRID.to_vec());
    let cfg = self::config(config);
    let t = py
        .detach(|| ttw::tune_k(&data, &grid, &cfg))
        .map_err(to_py)?;
    Ok((
        t.best_k,
        t.scores.iter().map(|s| (s.k, s.dtw_sum)).collect(),
    ))
}

/// Loads a UCR-style file; returns `(rows, labels)`.
#[pyfunction]
#[pyo3(signature = (path, znormalize=false))]
fn load_ucr(path: &str, znormalize: bool) -> PyResult<(Rows, Option<Vec<i64>>)> {
    let (data, _) = ttw::load_ucr(path, ttw::LoadOptions { znormalize }).map_err(to_py)?;
    Ok((
        data.rows().into_iter().map(<[f64]>::to_vec).collect(),
        data.labels().map(<[i64]>::to_vec),
    ))
}

#[pymodule]
fn pyttw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyAlignmentResult>()?;
    m.add_function(wrap_pyfunction!(sinc, m)?)?;
    m.add_function(wrap_pyfunction!(warp_signal, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_sum, m)?)?;
    m.add_function(wrap_pyfunction!(average_avg, m)?)?;
    m.add_function(wrap_pyfunction!(average_ttw, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(tune_k, m)?)?;
    m.add_function(wrap_pyfunction!(load_ucr, m)?)?;
    Ok(())
}
