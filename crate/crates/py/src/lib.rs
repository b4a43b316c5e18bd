//! Python bindings: reservoirs, readouts, datasets and the trial runner.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use magnon_rc::aor::{AnnSpec, AorConfig};
use magnon_rc::data::{IrisClasses, IrisFeatures};
use magnon_rc::experiment::{ExperimentConfig, MemorySpec};
use magnon_rc::psm::PsmConfig;
use magnon_rc::readout::{FeatureMatrix, ReadoutMethod};

create_exception!(magnon_rc, MagnonError, PyException);

fn err(e: magnon_rc::Error) -> PyErr {
    MagnonError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    Ok(FeatureMatrix::from_rows(rows).map_err(err)?.matrix().clone())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyfunction]
fn encode_amplitude(value: f64, frequency: f64, t: f64) -> PyResult<f64> {
    magnon_rc::excitation::encode_amplitude(value, frequency, t).map_err(err)
}

#[pyfunction]
fn encode_phase(value: f64, frequency: f64, t: f64) -> PyResult<f64> {
    magnon_rc::excitation::encode_phase(value, frequency, t).map_err(err)
}

/// Amplification gain of a network given by its flat parameter list.
#[pyfunction]
fn ann_forward(params: Vec<f64>, prev_outputs: Vec<f64>) -> PyResult<f64> {
    let ann = AnnSpec::from_params(&params).map_err(err)?;
    magnon_rc::aor::ann_forward(&ann, &prev_outputs).map_err(err)
}

/// Seeded network parameters in w1 (row-major), b1, w2, b2 order.
#[pyfunction]
fn ann_params(seed: u64) -> Vec<f64> {
    AnnSpec::seeded(seed).params()
}

/// Auto-oscillation ring, relaxed once at construction.
#[pyclass(module = "magnon_rc")]
struct Aor {
    inner: magnon_rc::aor::Aor,
}

#[pymethods]
impl Aor {
    /// `config` is an experiment TOML whose `aor` section is used; the
    /// coarse desk grid otherwise.
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(py: Python<'_>, config: Option<&str>) -> PyResult<Self> {
        let cfg = match config {
            Some(text) => ExperimentConfig::from_toml(text).map_err(err)?.aor,
            None => AorConfig::desk(),
        };
        let inner = py.detach(|| magnon_rc::aor::Aor::new(cfg)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Per-interval dicts of `input`, `output`, `diff` samples and `ann_gain`.
    #[pyo3(signature = (inputs, ann_params = None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        inputs: Vec<f64>,
        ann_params: Option<Vec<f64>>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let ann = match ann_params {
            Some(p) => AnnSpec::from_params(&p).map_err(err)?,
            None => AnnSpec::seeded(self.inner.config().seed),
        };
        let trace = py.detach(|| self.inner.run(&inputs, &ann)).map_err(err)?;
        trace
            .records
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("input", &r.input)?;
                d.set_item("output", &r.output)?;
                d.set_item("diff", &r.diff)?;
                d.set_item("ann_gain", r.ann_gain)?;
                Ok(d)
            })
            .collect()
    }

    /// `[input | output | diff]` rows, one per input.
    fn features(&self, py: Python<'_>, inputs: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let ann = AnnSpec::seeded(self.inner.config().seed);
        let trace = py.detach(|| self.inner.run(&inputs, &ann)).map_err(err)?;
        Ok(magnon_rc::aor::trace_features(&trace))
    }

    /// Memory and parity test accuracy per delay as `(delay, memory, parity)`.
    #[pyo3(signature = (j_max = 5, n_train = 200, n_test = 200, seed = 0))]
    fn memory(
        &self,
        py: Python<'_>,
        j_max: usize,
        n_train: usize,
        n_test: usize,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, Option<f64>)>> {
        let ann = AnnSpec::seeded(self.inner.config().seed);
        let spec = MemorySpec {
            j_max,
            n_train,
            n_test,
            seed,
            ..MemorySpec::default()
        };
        let curve = py
            .detach(|| magnon_rc::experiment::memory_benchmark(&self.inner, &ann, &spec))
            .map_err(err)?;
        Ok(curve.points.iter().map(|p| (p.delay, p.memory, p.parity)).collect())
    }
}

/// Scattering guide with two input channels.
#[pyclass(module = "magnon_rc")]
struct Psm {
    inner: magnon_rc::psm::Psm,
}

#[pymethods]
impl Psm {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(py: Python<'_>, config: Option<&str>) -> PyResult<Self> {
        let cfg = match config {
            Some(text) => ExperimentConfig::from_toml(text).map_err(err)?.psm,
            None => PsmConfig::desk(),
        };
        let inner = py.detach(|| magnon_rc::psm::Psm::new(cfg)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Samples as `[channel][interval][sample]`.
    fn run(&self, py: Python<'_>, pairs: Vec<(f64, f64)>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(py.detach(|| self.inner.run(&pairs)).map_err(err)?.samples)
    }

    fn features(&self, py: Python<'_>, pairs: Vec<(f64, f64)>) -> PyResult<Vec<f64>> {
        let t = py.detach(|| self.inner.run(&pairs)).map_err(err)?;
        Ok(magnon_rc::psm::psm_features(&t))
    }

    /// Spot centres and radii in cells: `(x, y, radius, ms_reduction)`.
    fn spots(&self) -> Vec<(f64, f64, f64, f64)> {
        let dx = self.inner.config().film.cell_size;
        self.inner
            .geometry()
            .spots
            .spots
            .iter()
            .map(|s| (s.x as f64, s.y as f64, s.radius / dx, s.ms_reduction))
            .collect()
    }
}

#[pyfunction]
fn pinv(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&magnon_rc::readout::pinv(&matrix(&x)?).map_err(err)?))
}

/// Least-squares weights (features × outputs).
#[pyfunction]
fn fit_linear(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let x = FeatureMatrix::new(matrix(&x)?).map_err(err)?;
    let m = magnon_rc::readout::fit_linear(&x, &matrix(&y)?).map_err(err)?;
    Ok(rows(&m.w))
}

#[pyfunction]
fn evaluate_scores(scores: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    Ok(magnon_rc::readout::evaluate_scores(&matrix(&scores)?, &labels))
}

/// Fits `method` on the training rows and returns test accuracy (percent).
#[pyfunction]
#[pyo3(signature = (method, x_train, y_train, x_test, y_test, n_classes, seed = 0))]
fn fit_evaluate(
    method: &str,
    x_train: Vec<Vec<f64>>,
    y_train: Vec<usize>,
    x_test: Vec<Vec<f64>>,
    y_test: Vec<usize>,
    n_classes: usize,
    seed: u64,
) -> PyResult<f64> {
    let method = match method {
        "linear" => ReadoutMethod::Linear,
        "ensemble" => ReadoutMethod::Ensemble,
        "mlp" => ReadoutMethod::Mlp,
        m => return Err(MagnonError::new_err(format!("unknown readout {m:?}"))),
    };
    let xtr = FeatureMatrix::from_rows(&x_train).map_err(err)?;
    let xte = FeatureMatrix::from_rows(&x_test).map_err(err)?;
    let cfg = magnon_rc::readout::ReadoutConfig::default();
    let model = magnon_rc::readout::fit_readout(method, &xtr, &y_train, n_classes, &cfg, seed).map_err(err)?;
    magnon_rc::readout::evaluate(&model, &xte, &y_test).map_err(err)
}

/// Forward differences of a Python callable: exactly len(params) + 1 calls.
#[pyfunction]
fn param_shift_grad(f: Bound<'_, PyAny>, params: Vec<f64>, delta: f64) -> PyResult<Vec<f64>> {
    let mut failure: Option<PyErr> = None;
    let out = magnon_rc::readout::param_shift_grad(
        |p| match f.call1((p.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => Ok(v),
            Err(e) => {
                failure = Some(e);
                Err(magnon_rc::Error::Config("callable raised".into()))
            }
        },
        &params,
        delta,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    out.map_err(err)
}

/// `(features, labels)` for an iris class subset, as (length, 1 − width).
#[pyfunction]
#[pyo3(signature = (path, classes = "setosa-versicolor", features = "petal"))]
fn load_iris(path: PathBuf, classes: &str, features: &str) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let c: IrisClasses = classes.parse().map_err(err)?;
    let f: IrisFeatures = features.parse().map_err(err)?;
    let d = magnon_rc::data::load_iris(&path, c, f, false).map_err(err)?;
    Ok((d.features, d.labels))
}

#[pyfunction]
fn load_statlog(path: PathBuf) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = magnon_rc::data::load_statlog(&path, false).map_err(err)?;
    Ok((d.data.features, d.data.labels))
}

/// `(scaled moves, next-move labels)`.
#[pyfunction]
#[pyo3(signature = (path, has_header = true))]
fn load_stock(path: PathBuf, has_header: bool) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let d = magnon_rc::data::load_stock(&path, has_header).map_err(err)?;
    Ok((d.data.features.into_iter().flatten().collect(), d.data.labels))
}

#[pyfunction]
#[pyo3(signature = (seed, n_samples, n_classes = 3, n_features = 4))]
fn gen_dimred(
    seed: u64,
    n_samples: usize,
    n_classes: usize,
    n_features: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let (d, _) = magnon_rc::data::gen_dimred(seed, n_samples, n_classes, n_features).map_err(err)?;
    Ok((d.features, d.labels))
}

/// Runs an experiment TOML and returns its per-trial rows as dicts.
#[pyfunction]
#[pyo3(signature = (config, base_dir = "."))]
fn run_experiment<'py>(py: Python<'py>, config: &str, base_dir: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(err)?;
    let base = PathBuf::from(base_dir);
    let outcome = py
        .detach(|| magnon_rc::experiment::run_experiment(&cfg, &base, None))
        .map_err(err)?;
    outcome
        .report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", &r.method)?;
            d.set_item("encoding", &r.encoding)?;
            d.set_item("ann_flag", r.ann_flag)?;
            d.set_item("split", r.split)?;
            d.set_item("trial", r.trial)?;
            d.set_item("accuracy", r.accuracy)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "magnon_rc")]
fn bindings(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MagnonError", m.py().get_type::<MagnonError>())?;
    m.add_class::<Aor>()?;
    m.add_class::<Psm>()?;
    m.add_function(wrap_pyfunction!(encode_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(encode_phase, m)?)?;
    m.add_function(wrap_pyfunction!(ann_forward, m)?)?;
    m.add_function(wrap_pyfunction!(ann_params, m)?)?;
    m.add_function(wrap_pyfunction!(pinv, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scores, m)?)?;
    m.add_function(wrap_pyfunction!(fit_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(param_shift_grad, m)?)?;
    m.add_function(wrap_pyfunction!(load_iris, m)?)?;
    m.add_function(wrap_pyfunction!(load_statlog, m)?)?;
    m.add_function(wrap_pyfunction!(load_stock, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dimred, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
