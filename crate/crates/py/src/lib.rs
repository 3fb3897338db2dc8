//! Python bindings: circuits, networks, plans, plan search, batched
//! amplitudes, emulation and XEB.

use multitensor::multieval::{emulate as emulate_plan, evaluate_bitstrings, EvalOptions};
use multitensor::network::group_by_pattern;
use multitensor::optimizer::{anneal_from, SearchConfig};
use multitensor::xeb;
use multitensor::{
    build_assignments, parse_circuit, to_diagram, AnnotatedPlan, Circuit, CostConfig, Error,
    Multiplicity, NetworkDiagram, Plan, Workload,
};
use num_complex::Complex64;
use pyo3::exceptions::{PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::sync::Arc;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::MemoryCapExceeded { .. } => PyMemoryError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Circuit", frozen, module = "pymultitensor")]
struct PyCircuit {
    inner: Circuit,
}

#[pymethods]
impl PyCircuit {
    /// Parses the plain-text circuit format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_circuit(text)
            .map(|inner| PyCircuit { inner })
            .map_err(to_py)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    #[getter]
    fn num_gates(&self) -> usize {
        self.inner.gates().len()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(n_qubits={}, gates={})",
            self.inner.n_qubits(),
            self.inner.gates().len()
        )
    }
}

/// The tensor network of a circuit.
#[pyclass(name = "Network", frozen, module = "pymultitensor")]
struct PyNetwork {
    inner: NetworkDiagram,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (circuit, fuse = false))]
    fn new(circuit: &PyCircuit, fuse: bool) -> PyResult<Self> {
        to_diagram(&circuit.inner, fuse)
            .map(|inner| PyNetwork { inner })
            .map_err(to_py)
    }

    #[getter]
    fn num_slots(&self) -> usize {
        self.inner.num_slots()
    }

    #[getter]
    fn num_legs(&self) -> usize {
        self.inner.num_legs()
    }

    #[getter]
    fn open_legs(&self) -> Vec<u32> {
        self.inner.open_legs().to_vec()
    }

    #[getter]
    fn closed_legs(&self) -> Vec<u32> {
        self.inner.closed_legs().collect()
    }

    /// Leg ids of every slot.
    fn slot_legs(&self) -> Vec<Vec<u32>> {
        self.inner
            .slots()
            .iter()
            .map(|s| s.legs().iter().map(|l| l.id).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(slots={}, legs={})",
            self.inner.num_slots(),
            self.inner.num_legs()
        )
    }
}

/// A contraction tree plus the sliced legs.
#[pyclass(name = "Plan", module = "pymultitensor", from_py_object)]
#[derive(Clone)]
struct PyPlan {
    inner: Plan,
}

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Plan::parse(text)
            .map(|inner| PyPlan { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn left_deep(num_slots: usize) -> PyResult<Self> {
        Plan::left_deep(num_slots)
            .map(|inner| PyPlan { inner })
            .map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn expr(&self) -> String {
        self.inner.tree.to_expr()
    }

    #[getter]
    fn sliced(&self) -> Vec<u32> {
        self.inner.sliced.clone()
    }

    #[setter]
    fn set_sliced(&mut self, legs: Vec<u32>) {
        self.inner.sliced = legs;
    }

    #[getter]
    fn num_leaves(&self) -> usize {
        self.inner.tree.num_leaves()
    }

    fn __eq__(&self, other: &PyPlan) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan({:?}, sliced={:?})",
            self.inner.tree.to_expr(),
            self.inner.sliced
        )
    }
}

#[pyclass(name = "CostConfig", module = "pymultitensor", from_py_object)]
#[derive(Clone)]
struct PyCostConfig {
    inner: CostConfig,
}

#[pymethods]
impl PyCostConfig {
    #[new]
    #[pyo3(signature = (alpha = 16.0, beta = 8.0, m_max = 8.0 * (1u64 << 30) as f64, p = 4.0, k = 1, bytes_per_scalar = 16))]
    fn new(
        alpha: f64,
        beta: f64,
        m_max: f64,
        p: f64,
        k: u64,
        bytes_per_scalar: u64,
    ) -> PyResult<Self> {
        let inner = CostConfig {
            alpha,
            beta,
            m_max,
            p,
            k,
            bytes_per_scalar,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyCostConfig { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn m_max(&self) -> f64 {
        self.inner.m_max
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn k(&self) -> u64 {
        self.inner.k
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "SearchConfig", module = "pymultitensor", from_py_object)]
#[derive(Clone)]
struct PySearchConfig {
    inner: SearchConfig,
}

#[pymethods]
impl PySearchConfig {
    #[new]
    #[pyo3(signature = (steps = 1_000_000, temp_init = 2.0, temp_final = 0.01, slice_interval = 100_000, seed = 0, chains = 1))]
    fn new(
        steps: u64,
        temp_init: f64,
        temp_final: f64,
        slice_interval: u64,
        seed: u64,
        chains: usize,
    ) -> PyResult<Self> {
        let inner = SearchConfig {
            steps,
            temp_init,
            temp_final,
            slice_interval,
            seed,
            chains,
        };
        inner.validate().map_err(to_py)?;
        Ok(PySearchConfig { inner })
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn workload_for(d: &NetworkDiagram, requests: &[String]) -> Result<Workload, Error> {
    let groups = group_by_pattern(d, requests);
    let [(batch, _)] = &groups[..] else {
        return Err(Error::InvalidConfig(
            "requests must share one '*' pattern".into(),
        ));
    };
    let a = build_assignments(d, requests, batch)?;
    Workload::from_assignments(d, &a)
}

fn annotate(
    network: &PyNetwork,
    plan: Plan,
    requests: Option<&[String]>,
    k: u64,
    cost: Option<&PyCostConfig>,
    exact: bool,
) -> Result<AnnotatedPlan, Error> {
    let d = &network.inner;
    let (workload, k) = match requests {
        Some(r) if !r.is_empty() => (workload_for(d, r)?, r.len() as u64),
        Some(_) => return Err(Error::Empty("no requests")),
        None => (Workload::from_request_count(d, &[])?, k),
    };
    let mode = if exact {
        Multiplicity::Exact
    } else {
        Multiplicity::Bound
    };
    let cfg = cost.map_or_else(CostConfig::default, |c| c.inner).with_k(k);
    AnnotatedPlan::new(Arc::new(workload), plan, cfg, mode)
}

/// Anneals from the left-deep plan. Returns `(plan, objective)`.
#[pyfunction]
#[pyo3(signature = (network, requests = None, k = 1, cost = None, search = None, exact = false))]
fn optimize(
    py: Python<'_>,
    network: &PyNetwork,
    requests: Option<Vec<String>>,
    k: u64,
    cost: Option<PyCostConfig>,
    search: Option<PySearchConfig>,
    exact: bool,
) -> PyResult<(PyPlan, f64)> {
    let initial = Plan::left_deep(network.inner.num_slots()).map_err(to_py)?;
    let ap = annotate(
        network,
        initial,
        requests.as_deref(),
        k,
        cost.as_ref(),
        exact,
    )
    .map_err(to_py)?;
    let sc = search.map_or_else(SearchConfig::default, |s| s.inner);
    let out = py.detach(|| anneal_from(&ap, &sc)).map_err(to_py)?;
    Ok((PyPlan { inner: out.plan }, out.objective))
}

/// Cost-model annotations of a plan.
#[pyfunction]
#[pyo3(signature = (network, plan, requests = None, k = 1, cost = None, exact = false))]
fn analyze<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    plan: &PyPlan,
    requests: Option<Vec<String>>,
    k: u64,
    cost: Option<PyCostConfig>,
    exact: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let ap = annotate(
        network,
        plan.inner.clone(),
        requests.as_deref(),
        k,
        cost.as_ref(),
        exact,
    )
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("total_cost", ap.total_cost().map_err(to_py)?)?;
    out.set_item("total_rw", ap.total_rw().map_err(to_py)?)?;
    out.set_item("memory_estimate", ap.memory_estimate())?;
    out.set_item("max_node_size", ap.max_node_size())?;
    out.set_item("slices", ap.slices())?;
    match ap.objective() {
        Ok(f) => out.set_item("objective", f)?,
        Err(Error::Empty(_)) => out.set_item("objective", 0.0)?,
        Err(e) => return Err(to_py(e)),
    }
    let kt: Vec<u64> = ap.tree().internal_nodes().map(|n| ap.kt(n)).collect();
    out.set_item("kt", kt)?;
    Ok(out)
}

fn eval_options(memory_cap: Option<u64>) -> EvalOptions {
    EvalOptions {
        memory_cap,
        ..EvalOptions::default()
    }
}

/// `(bitstring, amplitude)` rows for every request in order; `*` positions
/// expand to one row per value.
#[pyfunction]
#[pyo3(signature = (network, plan, requests, workers = 1, memory_cap = None))]
fn amplitudes(
    py: Python<'_>,
    network: &PyNetwork,
    plan: &PyPlan,
    requests: Vec<String>,
    workers: usize,
    memory_cap: Option<u64>,
) -> PyResult<Vec<(String, Complex64)>> {
    let opts = eval_options(memory_cap);
    let rows = py
        .detach(|| evaluate_bitstrings(&network.inner, &plan.inner, &requests, workers, &opts))
        .map_err(to_py)?;
    Ok(rows.into_iter().flatten().collect())
}

/// Shape-only evaluation of fully fixed requests: exact counters and peak
/// bytes.
#[pyfunction]
#[pyo3(signature = (network, plan, requests, memory_cap = None))]
fn emulate<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    plan: &PyPlan,
    requests: Vec<String>,
    memory_cap: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = &network.inner;
    let groups = group_by_pattern(d, &requests);
    let [(batch, _)] = &groups[..] else {
        return Err(PyValueError::new_err("requests must share one '*' pattern"));
    };
    let a = build_assignments(d, &requests, batch).map_err(to_py)?;
    let r = emulate_plan(&plan.inner, &a, &eval_options(memory_cap)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mults", r.counters.mults)?;
    out.set_item("adds", r.counters.adds)?;
    out.set_item("flops", r.counters.flops())?;
    out.set_item("rw", r.counters.rw)?;
    out.set_item("peak_bytes", r.peak_bytes)?;
    out.set_item("distinct", r.distinct)?;
    out.set_item("contractions", r.node_contractions)?;
    Ok(out)
}

/// `(2^n / k) * sum(p) - 1`.
#[pyfunction]
fn linear_xeb(n: usize, probs: Vec<f64>) -> PyResult<f64> {
    xeb::linear_xeb(n, &probs).map_err(to_py)
}

/// Mean of per-instance fidelities with `sigma = 1/sqrt(k)`.
#[pyfunction]
fn summarize<'py>(py: Python<'py>, values: Vec<f64>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let inst: Vec<(String, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, &f)| (i.to_string(), f))
        .collect();
    let r = xeb::summarize(&inst, k).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mean", r.mean)?;
    out.set_item("sigma", r.sigma)?;
    out.set_item("text", r.summary_text())?;
    Ok(out)
}

#[pymodule]
fn pymultitensor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyCostConfig>()?;
    m.add_class::<PySearchConfig>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(emulate, m)?)?;
    m.add_function(wrap_pyfunction!(linear_xeb, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    Ok(())
}
