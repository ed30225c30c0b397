//! Python bindings: repeating units, feature sets, prediction sessions and
//! the matched-pair analysis.

use std::path::PathBuf;

use numpy::ndarray::{Array1, Array2};
use numpy::{IntoPyArray, PyArray1, PyArray2};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use periodic_rips::curvature::ProfileParams;
use periodic_rips::hsmp::{generate_weights, load_weights, ModelConfig};
use periodic_rips::pipeline::{self, FeaturizeOptions, FeaturizedUnit, Predictor, DEFAULT_CUTOFFS};
use periodic_rips::polymer::{parse_repeating_unit, RepeatingUnit};
use periodic_rips::stats::{self, Comparison};
use periodic_rips::tensor::Matrix;
use periodic_rips::{Error, ErrorKind};

create_exception!(periodic_rips_py, PeriodicRipsError, PyValueError, "Base class of all errors raised here.");
create_exception!(periodic_rips_py, ParseError, PeriodicRipsError, "Unreadable or malformed input.");
create_exception!(periodic_rips_py, ValidationError, PeriodicRipsError, "Input violating a precondition.");
create_exception!(periodic_rips_py, VersionError, PeriodicRipsError, "Schema or format version mismatch.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Parse => ParseError::new_err(msg),
        ErrorKind::Validation => ValidationError::new_err(msg),
        ErrorKind::Version => VersionError::new_err(msg),
    }
}

fn err<E: Into<Error>>(e: E) -> PyErr {
    to_py(e.into())
}

fn array2<'py>(py: Python<'py>, m: &Matrix<f64>) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_vec((m.rows(), m.cols()), m.data().to_vec()).expect("matrix shape").into_pyarray(py)
}

/// One repeating unit with its coordinate frames.
#[pyclass(name = "RepeatingUnit", module = "periodic_rips_py", frozen)]
struct PyUnit {
    inner: RepeatingUnit,
}

#[pymethods]
impl PyUnit {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_repeating_unit(text.as_bytes()).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(err)?;
        Ok(Self { inner: parse_repeating_unit(&bytes).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.inner.meta().name.clone()
    }

    #[getter]
    fn family(&self) -> Option<String> {
        self.inner.meta().family.clone()
    }

    #[getter]
    fn substitution_key(&self) -> Option<String> {
        self.inner.meta().substitution_key.clone()
    }

    #[getter]
    fn atom_count(&self) -> usize {
        self.inner.atom_count()
    }

    #[getter]
    fn frame_count(&self) -> usize {
        self.inner.frame_count()
    }

    /// Atom indices of the non-anchor atoms; these are the complex vertices.
    fn chemical_atoms(&self) -> Vec<usize> {
        self.inner.chemical_atoms()
    }

    #[pyo3(signature = (periodic = true))]
    fn distance_matrix<'py>(&self, py: Python<'py>, periodic: bool) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let d = py.detach(|| pipeline::distance_matrix(&self.inner, periodic)).map_err(to_py)?;
        Ok(Array2::from_shape_vec((d.n(), d.n()), d.values().to_vec()).expect("square").into_pyarray(py))
    }

    fn relabeled(&self, perm: Vec<usize>) -> PyResult<Self> {
        if perm.len() != self.inner.atom_count() {
            return Err(ValidationError::new_err(format!("permutation of length {} for {} atoms", perm.len(), self.inner.atom_count())));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(ValidationError::new_err("not a permutation"));
            }
        }
        Ok(Self { inner: self.inner.relabeled(&perm).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "RepeatingUnit(name={:?}, atoms={}, frames={})",
            self.inner.meta().name.as_deref().unwrap_or(""),
            self.inner.atom_count(),
            self.inner.frame_count()
        )
    }
}

/// Per-level simplex features of one unit together with its filtration.
#[pyclass(name = "Features", module = "periodic_rips_py", frozen)]
struct PyFeatures {
    inner: FeaturizedUnit,
}

#[pymethods]
impl PyFeatures {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self { inner: FeaturizedUnit::from_bytes(data).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::from_bytes(&std::fs::read(&path).map_err(err)?)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes(&[]))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, self.inner.to_bytes(&[])).map_err(err)
    }

    #[getter]
    fn cutoffs(&self) -> Vec<f64> {
        self.inner.filtration.cutoffs()
    }

    #[getter]
    fn schema_version(&self) -> String {
        self.inner.schema_version.clone()
    }

    #[getter]
    fn periodic(&self) -> bool {
        self.inner.periodic
    }

    fn __len__(&self) -> usize {
        self.inner.levels.len()
    }

    /// Dict with `epsilon` and the `vertex`, `edge` and `triangle` arrays of one level.
    fn level<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyDict>> {
        let set = self
            .inner
            .levels
            .get(i)
            .ok_or_else(|| ValidationError::new_err(format!("level {i} out of range")))?;
        let d = PyDict::new(py);
        d.set_item("epsilon", set.epsilon)?;
        d.set_item("vertex", array2(py, &set.vertex))?;
        d.set_item("edge", array2(py, &set.edge))?;
        d.set_item("triangle", array2(py, &set.triangle))?;
        Ok(d)
    }

    /// Vertex tuples of the simplices of one dimension, in feature-row order.
    fn simplices(&self, level: usize, dim: usize) -> PyResult<Vec<Vec<usize>>> {
        let c = self
            .inner
            .filtration
            .levels()
            .get(level)
            .ok_or_else(|| ValidationError::new_err(format!("level {level} out of range")))?;
        if dim > c.max_dim() {
            return Err(ValidationError::new_err(format!("dimension {dim} above {}", c.max_dim())));
        }
        Ok(c.simplices(dim).iter().map(|s| s.vertices().to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Features(levels={}, cutoffs={:?})", self.inner.levels.len(), self.inner.filtration.cutoffs())
    }
}

enum Input {
    Unit(RepeatingUnit),
    Features(FeaturizedUnit),
}

fn extract_input(obj: &Bound<'_, PyAny>) -> PyResult<Input> {
    if let Ok(u) = obj.extract::<PyRef<'_, PyUnit>>() {
        return Ok(Input::Unit(u.inner.clone()));
    }
    if let Ok(f) = obj.extract::<PyRef<'_, PyFeatures>>() {
        return Ok(Input::Features(f.inner.clone()));
    }
    let path: PathBuf = obj.extract()?;
    let bytes = std::fs::read(&path).map_err(err)?;
    if path.extension().is_some_and(|e| e == "features") {
        Ok(Input::Features(FeaturizedUnit::from_bytes(&bytes).map_err(to_py)?))
    } else {
        Ok(Input::Unit(parse_repeating_unit(&bytes).map_err(err)?))
    }
}

fn extract_unit(obj: &Bound<'_, PyAny>) -> PyResult<RepeatingUnit> {
    match extract_input(obj)? {
        Input::Unit(u) => Ok(u),
        Input::Features(_) => Err(ValidationError::new_err("expected a repeating unit, got features")),
    }
}

/// Featurizes a unit (a `RepeatingUnit` or a path to its JSON document).
#[pyfunction]
#[pyo3(signature = (unit, cutoffs = None, periodic = true, delta = 0.25, steps = 5, temperature = 10.0))]
fn featurize_unit(
    py: Python<'_>,
    unit: &Bound<'_, PyAny>,
    cutoffs: Option<Vec<f64>>,
    periodic: bool,
    delta: f64,
    steps: usize,
    temperature: f64,
) -> PyResult<PyFeatures> {
    let unit = extract_unit(unit)?;
    let options = FeaturizeOptions {
        cutoffs: cutoffs.unwrap_or_else(|| DEFAULT_CUTOFFS.to_vec()),
        profile: ProfileParams { delta, steps, temperature, ..ProfileParams::default() },
        periodic,
        edge_weights: None,
    };
    let inner = py.detach(|| pipeline::featurize_unit(&unit, &options)).map_err(to_py)?;
    Ok(PyFeatures { inner })
}

/// Loaded model weights ready for inference. Safe to share across threads.
#[pyclass(name = "Session", module = "periodic_rips_py", frozen)]
struct PySession {
    inner: Predictor,
}

impl PySession {
    fn run(&self, input: Input, periodic: bool) -> Result<f64, Error> {
        match input {
            Input::Unit(u) => self.inner.predict_unit(&u, periodic),
            Input::Features(f) => self.inner.predict_features(&f),
        }
    }
}

#[pymethods]
impl PySession {
    /// Session over seed-generated weights, for testing.
    #[staticmethod]
    #[pyo3(signature = (seed, hidden_dim = 768, heads = 12))]
    fn from_seed(seed: u64, hidden_dim: usize, heads: usize) -> PyResult<Self> {
        let weights = generate_weights(&ModelConfig::with_width(hidden_dim, heads), seed).map_err(err)?;
        Ok(Self { inner: Predictor::new(weights).map_err(to_py)? })
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let w = self.inner.weights();
        let c = w.config();
        let d = PyDict::new(py);
        d.set_item("hidden_dim", c.hidden_dim)?;
        d.set_item("heads", c.heads)?;
        d.set_item("cutoffs", c.cutoffs.clone())?;
        d.set_item("schedule", c.schedule_string())?;
        d.set_item("schema_version", c.schema_version.clone())?;
        d.set_item("seed", w.seed())?;
        Ok(d)
    }

    /// Prediction for a unit, a `Features` object, or a path to either.
    #[pyo3(signature = (item, periodic = true))]
    fn predict(&self, py: Python<'_>, item: &Bound<'_, PyAny>, periodic: bool) -> PyResult<f64> {
        let input = extract_input(item)?;
        py.detach(|| self.run(input, periodic)).map_err(to_py)
    }

    /// Predictions for many inputs, computed in parallel; raises on the first failure.
    #[pyo3(signature = (items, periodic = true))]
    fn predict_batch(&self, py: Python<'_>, items: Vec<Bound<'_, PyAny>>, periodic: bool) -> PyResult<Vec<f64>> {
        let inputs = items.iter().map(extract_input).collect::<PyResult<Vec<_>>>()?;
        py.detach(|| {
            use rayon::prelude::*;
            inputs.into_par_iter().map(|i| self.run(i, periodic)).collect::<Result<Vec<_>, _>>()
        })
        .map_err(to_py)
    }

    /// Dict with `atom_embeddings`, `polymer_embedding` and `prediction`.
    #[pyo3(signature = (item, periodic = true))]
    fn forward<'py>(&self, py: Python<'py>, item: &Bound<'py, PyAny>, periodic: bool) -> PyResult<Bound<'py, PyDict>> {
        let input = extract_input(item)?;
        let out = py
            .detach(|| -> Result<_, Error> {
                let features = match input {
                    Input::Features(f) => f,
                    Input::Unit(u) => pipeline::featurize_unit(&u, &self.inner.featurize_options(periodic))?,
                };
                Ok(self.inner.model().forward(&features.levels, &features.filtration)?)
            })
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("atom_embeddings", array2(py, &out.atom_embeddings))?;
        let pooled: Bound<'py, PyArray1<f64>> = Array1::from_vec(out.polymer_embedding).into_pyarray(py);
        d.set_item("polymer_embedding", pooled)?;
        d.set_item("prediction", out.prediction)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let c = self.inner.weights().config();
        format!("Session(hidden_dim={}, heads={}, schedule={:?})", c.hidden_dim, c.heads, c.schedule_string())
    }
}

/// Loads a weight file into an inference session.
#[pyfunction]
fn load_session(py: Python<'_>, path: PathBuf) -> PyResult<PySession> {
    let inner = py
        .detach(|| -> Result<_, Error> { Predictor::new(load_weights(&path)?) })
        .map_err(to_py)?;
    Ok(PySession { inner })
}

/// Prediction of one input under `session` (a `Session` or a weight-file path).
#[pyfunction]
#[pyo3(signature = (session, item, periodic = true))]
fn predict(py: Python<'_>, session: &Bound<'_, PyAny>, item: &Bound<'_, PyAny>, periodic: bool) -> PyResult<f64> {
    if let Ok(s) = session.extract::<PyRef<'_, PySession>>() {
        return s.predict(py, item, periodic);
    }
    load_session(py, session.extract()?)?.predict(py, item, periodic)
}

/// Runs the matched-pair analysis over a predictions CSV; one dict per row.
#[pyfunction]
#[pyo3(signature = (predictions, comparison = "all", level = 0.99))]
fn analyze<'py>(py: Python<'py>, predictions: PathBuf, comparison: &str, level: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let which: Comparison = comparison.parse().map_err(|e: stats::StatsError| ValidationError::new_err(e.to_string()))?;
    let file = std::fs::File::open(&predictions).map_err(err)?;
    let records = stats::read_predictions(file).map_err(err)?;
    let analysis = stats::analyze(&records, which, level).map_err(err)?;
    analysis
        .rows
        .iter()
        .map(|row| {
            let r = &row.result;
            let d = PyDict::new(py);
            d.set_item("comparison", &row.comparison)?;
            d.set_item("n", r.n)?;
            d.set_item("mean_delta", r.mean)?;
            d.set_item("ci", r.ci)?;
            d.set_item("statistic", r.statistic)?;
            d.set_item("p_raw", r.p_value)?;
            d.set_item("p_holm", r.adjusted_p)?;
            d.set_item("method", r.method.as_str())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn periodic_rips_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA_VERSION", periodic_rips::features::SCHEMA_VERSION)?;
    m.add_class::<PyUnit>()?;
    m.add_class::<PyFeatures>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(featurize_unit, m)?)?;
    m.add_function(wrap_pyfunction!(load_session, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add("PeriodicRipsError", py.get_type::<PeriodicRipsError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("VersionError", py.get_type::<VersionError>())?;
    Ok(())
}
