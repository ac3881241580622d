//! Python bindings: POVMs, noise, measurement channels, reference states,
//! sampling, estimation and the fidelity tools.

use icshadow::channel::measurement_channel;
use icshadow::estimator::estimate_all;
use icshadow::states::{disordered_heisenberg, QuantumState};
use icshadow::PauliAxis;
use icshadow::{
    builtin_povm, noise_adjoint_povm, sample, sample_noisy, sample_noisy_state, validate_povm,
    DenseState, Error, EstimatorMethod, MpsState, PauliObservable, SnapshotRule, C64,
};
use nalgebra::{DMatrix, DVector};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyArrayMethods, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for icshadow::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_numpy<'py>(py: Python<'py>, m: &DMatrix<C64>) -> Bound<'py, PyArray2<C64>> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)]).into_pyarray(py)
}

fn from_numpy(a: &PyReadonlyArray2<'_, C64>) -> DMatrix<C64> {
    let v = a.as_array();
    DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)])
}

fn parse_observable(text: &str) -> PyResult<PauliObservable> {
    text.parse().py()
}

fn parse_rule(m: Option<f64>) -> SnapshotRule {
    m.map_or(SnapshotRule::Limit, SnapshotRule::Power)
}

/// A single-qubit POVM.
#[pyclass(name = "Povm", module = "icshadow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPovm(icshadow::Povm);

#[pymethods]
impl PyPovm {
    /// One of `pauli6`, `pauli4`, `tetra`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        builtin_povm(name).py().map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        icshadow::Povm::from_json(text).py().map(Self)
    }

    /// Unvalidated POVM from a `(k, 2, 2)` complex array.
    #[staticmethod]
    fn from_elements(name: &str, elements: Vec<PyReadonlyArray2<'_, C64>>) -> PyResult<Self> {
        let mats = elements
            .iter()
            .map(|e| {
                let m = from_numpy(e);
                if m.shape() != (2, 2) {
                    return Err(PyValueError::new_err("POVM elements must be 2×2"));
                }
                Ok(icshadow::Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self(icshadow::Povm::from_elements(name, mats)))
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    fn element<'py>(&self, py: Python<'py>, a: usize) -> PyResult<Bound<'py, PyArray2<C64>>> {
        if a >= self.0.k() {
            return Err(PyValueError::new_err(format!("outcome {a} out of range")));
        }
        let m = self.0.element(a);
        Ok(to_numpy(py, &DMatrix::from_fn(2, 2, |r, c| m[(r, c)])))
    }

    /// Outcome probabilities on a 2×2 density matrix.
    fn probabilities(&self, rho: PyReadonlyArray2<'_, C64>) -> PyResult<Vec<f64>> {
        let m = from_numpy(&rho);
        if m.shape() != (2, 2) {
            return Err(PyValueError::new_err("expected a 2×2 matrix"));
        }
        Ok(self.0.probabilities(&icshadow::Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])))
    }

    /// Violated invariants, empty when valid.
    fn validate(&self) -> Vec<String> {
        validate_povm(&self.0).iter().map(|v| v.to_string()).collect()
    }

    fn with_noise(&self, noise: &PyNoise) -> PyResult<Self> {
        noise_adjoint_povm(&self.0, &noise.0).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    fn __repr__(&self) -> String {
        format!("Povm({:?}, k={})", self.0.name(), self.0.k())
    }
}

/// A single-qubit noise channel.
#[pyclass(name = "NoiseModel", module = "icshadow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNoise(icshadow::NoiseModel);

#[pymethods]
impl PyNoise {
    #[staticmethod]
    fn depolarizing(q: f64) -> PyResult<Self> {
        icshadow::NoiseModel::depolarizing(q).py().map(Self)
    }

    /// `ρ ↦ (1 - 4p/3)ρ + (4p/3)·I/2`.
    #[staticmethod]
    fn depolarizing_p(p: f64) -> PyResult<Self> {
        icshadow::NoiseModel::depolarizing_p(p).py().map(Self)
    }

    #[staticmethod]
    fn amplitude_damping(gamma: f64) -> PyResult<Self> {
        icshadow::NoiseModel::amplitude_damping(gamma).py().map(Self)
    }

    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Option<Self>> {
        Ok(icshadow::NoiseModel::parse(spec).py()?.map(Self))
    }

    #[getter]
    fn descriptor(&self) -> String {
        self.0.descriptor()
    }

    fn __repr__(&self) -> String {
        format!("NoiseModel({:?})", self.0.descriptor())
    }
}

/// The measurement channel of a POVM, optionally preceded by noise.
#[pyclass(name = "MeasurementChannel", module = "icshadow", frozen)]
struct PyChannel(icshadow::MeasurementChannel);

#[pymethods]
impl PyChannel {
    /// `m` selects the snapshot rule `λ^m`; `None` means the top eigenvector.
    #[new]
    #[pyo3(signature = (povm, noise=None, m=None))]
    fn new(povm: &PyPovm, noise: Option<&PyNoise>, m: Option<f64>) -> PyResult<Self> {
        measurement_channel(&povm.0, parse_rule(m), noise.map(|n| &n.0)).py().map(Self)
    }

    /// 4×4 Bloch matrix of the forward channel.
    fn forward(&self) -> [[f64; 4]; 4] {
        let m = self.0.forward().matrix();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    fn inverse(&self) -> [[f64; 4]; 4] {
        let m = self.0.inverse().matrix();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    /// `Φ[axis][a]`, the inverse-channel weight of outcome `a` on `axis`.
    fn factors(&self, axis: &str) -> PyResult<Vec<f64>> {
        let axis: PauliAxis = axis.parse().py()?;
        Ok(self.0.factor_table().factors(axis).to_vec())
    }

    /// `(2 max|Φ|^k)²`.
    fn bound_constant(&self, k: usize) -> f64 {
        icshadow::bound_constant(&self.0.factor_table(), k)
    }

    #[getter]
    fn povm(&self) -> PyPovm {
        PyPovm(self.0.povm().clone())
    }
}

enum Inner {
    Mps(MpsState),
    Dense(DenseState),
}

/// A reference state that can be measured.
#[pyclass(name = "State", module = "icshadow", frozen)]
struct PyState(Inner);

#[pymethods]
impl PyState {
    #[staticmethod]
    fn ghz(n: usize) -> PyResult<Self> {
        Ok(Self(Inner::Mps(icshadow::ghz(n).py()?)))
    }

    /// Product of pure qubits given by unit Bloch vectors.
    #[staticmethod]
    fn product(bloch: Vec<[f64; 3]>) -> PyResult<Self> {
        Ok(Self(Inner::Mps(icshadow::product_state(&bloch).py()?)))
    }

    #[staticmethod]
    fn from_mps_json(text: &str) -> PyResult<Self> {
        Ok(Self(Inner::Mps(MpsState::from_json(text).py()?)))
    }

    #[staticmethod]
    fn pure(amplitudes: PyReadonlyArray1<'_, C64>) -> PyResult<Self> {
        let v = amplitudes.as_array();
        let v = DVector::from_iterator(v.len(), v.iter().copied());
        Ok(Self(Inner::Dense(DenseState::pure(v).py()?)))
    }

    #[staticmethod]
    fn density(matrix: PyReadonlyArray2<'_, C64>) -> PyResult<Self> {
        Ok(Self(Inner::Dense(DenseState::mixed(from_numpy(&matrix)).py()?)))
    }

    /// Ground state of `J Σ z z + h Σ x` on an open chain.
    #[staticmethod]
    fn tfim_ground_state(n: usize, j: f64, h: f64) -> PyResult<Self> {
        let ham = icshadow::SpinHamiltonian::tfim(n, j, h).py()?;
        Ok(Self(Inner::Dense(icshadow::ground_state(&ham).py()?.state)))
    }

    /// Ground state of the disordered Heisenberg chain drawn with `seed`.
    #[staticmethod]
    fn heisenberg_ground_state(n: usize, seed: u64) -> PyResult<Self> {
        let (ham, _) = disordered_heisenberg(n, seed).py()?;
        Ok(Self(Inner::Dense(icshadow::ground_state(&ham).py()?.state)))
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        match &self.0 {
            Inner::Mps(m) => m.num_qubits(),
            Inner::Dense(d) => QuantumState::num_qubits(d),
        }
    }

    /// Exact `⟨O⟩` for an observable like `"z0 z3"`.
    fn expectation(&self, observable: &str) -> PyResult<f64> {
        let obs = parse_observable(observable)?;
        match &self.0 {
            Inner::Mps(m) => icshadow::exact_expectation(m, &obs),
            Inner::Dense(d) => icshadow::exact_expectation(d, &obs),
        }
        .py()
    }

    /// State vector (pure states on at most 14 qubits).
    fn amplitudes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyArray1<C64>>> {
        let dense = match &self.0 {
            Inner::Mps(m) => m.to_dense().py()?,
            Inner::Dense(d) => d.clone(),
        };
        let v = dense
            .amplitudes()
            .ok_or_else(|| PyValueError::new_err("state is mixed"))?;
        Ok(PyArray1::from_iter(py, v.iter().copied()))
    }

    /// `count` records. With `noisy_state`, `noise` is part of the state and
    /// is not inverted by the estimator.
    #[pyo3(signature = (povm, count, seed, noise=None, noisy_state=false))]
    fn sample(
        &self,
        py: Python<'_>,
        povm: &PyPovm,
        count: usize,
        seed: u64,
        noise: Option<&PyNoise>,
        noisy_state: bool,
    ) -> PyResult<PyEnsemble> {
        let noise = noise.map(|n| n.0.clone());
        let povm = povm.0.clone();
        let run = |s: &(dyn Fn() -> icshadow::Result<icshadow::ShadowEnsemble> + Sync)| py.detach(|| s());
        let e = match (&self.0, noise, noisy_state) {
            (Inner::Mps(m), None, _) => run(&|| sample(m, &povm, count, seed)),
            (Inner::Dense(d), None, _) => run(&|| sample(d, &povm, count, seed)),
            (Inner::Mps(m), Some(n), false) => run(&|| sample_noisy(m, &povm, &n, count, seed)),
            (Inner::Dense(d), Some(n), false) => run(&|| sample_noisy(d, &povm, &n, count, seed)),
            (Inner::Mps(m), Some(n), true) => run(&|| sample_noisy_state(m, &povm, &n, count, seed)),
            (Inner::Dense(d), Some(n), true) => run(&|| sample_noisy_state(d, &povm, &n, count, seed)),
        };
        e.py().map(PyEnsemble)
    }
}

/// Measurement records.
#[pyclass(name = "ShadowEnsemble", module = "icshadow", skip_from_py_object)]
#[derive(Clone)]
struct PyEnsemble(icshadow::ShadowEnsemble);

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        icshadow::ShadowEnsemble::load(path).py().map(Self)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    #[getter]
    fn povm(&self) -> &str {
        self.0.povm()
    }

    #[getter]
    fn noise(&self) -> Option<&str> {
        self.0.noise()
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.0.seeds().to_vec()
    }

    /// `(N, n)` array of outcome indices.
    fn outcomes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyArray2<u8>>> {
        let flat = PyArray1::from_slice(py, self.0.outcomes());
        flat.reshape([self.0.len(), self.0.num_qubits()])
    }

    fn merge(&mut self, other: &PyEnsemble) -> PyResult<()> {
        self.0.merge(&other.0).py()
    }

    fn slice(&self, start: usize, stop: usize) -> PyResult<Self> {
        if start > stop || stop > self.0.len() {
            return Err(PyValueError::new_err("slice out of range"));
        }
        Ok(Self(self.0.slice(start..stop)))
    }
}

fn method(batches: Option<usize>) -> EstimatorMethod {
    batches.map_or(EstimatorMethod::Mean, |b| EstimatorMethod::MedianOfMeans { batches: b })
}

/// `(value, std_error)` for each observable. `batches` switches to median
/// of means.
#[pyfunction]
#[pyo3(signature = (ensemble, channel, observables, batches=None))]
fn estimate(
    ensemble: &PyEnsemble,
    channel: &PyChannel,
    observables: Vec<String>,
    batches: Option<usize>,
) -> PyResult<Vec<(f64, f64)>> {
    let obs = observables
        .iter()
        .map(|o| parse_observable(o))
        .collect::<PyResult<Vec<_>>>()?;
    let est = estimate_all(&ensemble.0, &obs, &channel.0.factor_table(), method(batches)).py()?;
    Ok(est.iter().map(|e| (e.value, e.std_error)).collect())
}

/// `⌈B ln(2L/δ) / (2ε²)⌉`.
#[pyfunction]
fn required_samples(b: f64, l: usize, epsilon: f64, delta: f64) -> PyResult<u64> {
    icshadow::required_samples(b, l, epsilon, delta).py()
}

/// Dense hypothesis state (n ≤ 8) as a complex matrix.
#[pyfunction]
fn hypothesis_state<'py>(py: Python<'py>, ensemble: &PyEnsemble, channel: &PyChannel) -> PyResult<Bound<'py, PyArray2<C64>>> {
    let sigma = icshadow::hypothesis_state(&ensemble.0, &channel.0).py()?;
    Ok(to_numpy(py, sigma.matrix()))
}

/// Closest density matrix in Frobenius norm.
#[pyfunction]
fn project_to_physical<'py>(py: Python<'py>, sigma: PyReadonlyArray2<'py, C64>) -> PyResult<Bound<'py, PyArray2<C64>>> {
    Ok(to_numpy(py, &icshadow::project_to_physical(&from_numpy(&sigma)).py()?))
}

#[pyfunction]
fn simplex_project(values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(icshadow::simplex_project(&values).py()?.into_values())
}

/// `⟨ψ|σ|ψ⟩`.
#[pyfunction]
fn fidelity_pure(sigma: PyReadonlyArray2<'_, C64>, target: PyReadonlyArray1<'_, C64>) -> PyResult<f64> {
    let t = target.as_array();
    let t = DVector::from_iterator(t.len(), t.iter().copied());
    icshadow::fidelity_pure(&from_numpy(&sigma), &t).py()
}

#[pymodule]
#[pyo3(name = "icshadow")]
fn icshadow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPovm>()?;
    m.add_class::<PyNoise>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(required_samples, m)?)?;
    m.add_function(wrap_pyfunction!(hypothesis_state, m)?)?;
    m.add_function(wrap_pyfunction!(project_to_physical, m)?)?;
    m.add_function(wrap_pyfunction!(simplex_project, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_pure, m)?)?;
    Ok(())
}
