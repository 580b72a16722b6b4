//! Python bindings: `import bindcap_py`.
//!
//! Information is in nats and rates in Hz, as in the Rust crate. Policies are
//! plain lists of floats `[p_0, ..., p_{n-1}]`.

use bindcap::{
    BirthDeathChannel, CapacityResult, ChannelSpec, FeedbackPolicy, OptimizerConfig, ReceptorKinetics, SimulationConfig,
};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: bindcap::Error) -> PyErr {
    match e {
        bindcap::Error::Consistency(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn policy(probs: Vec<f64>) -> PyResult<FeedbackPolicy> {
    FeedbackPolicy::new(probs).map_err(to_py)
}

/// Per-receptor binding rates at low/high concentration and the unbinding rate.
#[pyclass(name = "ReceptorKinetics", module = "bindcap_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKinetics(ReceptorKinetics);

#[pymethods]
impl PyKinetics {
    #[new]
    fn new(alpha_low: f64, alpha_high: f64, beta: f64) -> PyResult<Self> {
        ReceptorKinetics::new(alpha_low, alpha_high, beta)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn alpha_low(&self) -> f64 {
        self.0.alpha_low()
    }

    #[getter]
    fn alpha_high(&self) -> f64 {
        self.0.alpha_high()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    /// Per-receptor IID information rate factor at input probability `p`.
    fn psi(&self, p: f64) -> f64 {
        bindcap::psi(&self.0, p)
    }

    fn __repr__(&self) -> String {
        format!(
            "ReceptorKinetics(alpha_low={}, alpha_high={}, beta={})",
            self.0.alpha_low(),
            self.0.alpha_high(),
            self.0.beta()
        )
    }
}

/// Birth-death receptor channel on states `0..=n`.
#[pyclass(name = "Channel", module = "bindcap_py", frozen, skip_from_py_object)]
struct PyChannel(BirthDeathChannel);

fn capacity_dict<'py>(py: Python<'py>, res: &CapacityResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("capacity", res.capacity)?;
    d.set_item("argmax", res.argmax.probs().to_vec())?;
    d.set_item("p_star", res.iid_p)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("evaluations", res.evaluations)?;
    d.set_item("converged", res.converged)?;
    Ok(d)
}

#[pymethods]
impl PyChannel {
    #[staticmethod]
    fn independent(n: usize, kinetics: &PyKinetics) -> PyResult<Self> {
        BirthDeathChannel::independent(n, kinetics.0).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn cooperative(n: usize, kinetics: &PyKinetics) -> PyResult<Self> {
        BirthDeathChannel::cooperative(n, kinetics.0).map(Self).map_err(to_py)
    }

    /// Explicit rates: `up_high[k]`, `up_low[k]` for k -> k+1 and `down[k-1]` for k -> k-1.
    #[staticmethod]
    fn custom(up_high: Vec<f64>, up_low: Vec<f64>, down: Vec<f64>) -> PyResult<Self> {
        BirthDeathChannel::custom(up_high, up_low, down)
            .map(Self)
            .map_err(to_py)
    }

    /// Builds a channel from a TOML channel document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ChannelSpec::parse(text)
            .and_then(|s| s.build())
            .map(Self)
            .map_err(to_py)
    }

    fn to_toml(&self) -> String {
        ChannelSpec::from_channel(&self.0).to_toml()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    /// Largest time step for which the discretized channel is valid.
    fn max_tau(&self) -> f64 {
        self.0.max_tau()
    }

    fn stationary(&self, policy_probs: Vec<f64>) -> PyResult<Vec<f64>> {
        let st = bindcap::stationary(&self.0, &policy(policy_probs)?).map_err(to_py)?;
        Ok(st.probs().to_vec())
    }

    /// Continuous-time MI rate (nats/s).
    fn mi_rate(&self, policy_probs: Vec<f64>) -> PyResult<f64> {
        bindcap::mi_rate_continuous_limit(&self.0, &policy(policy_probs)?)
            .map(|r| r.value())
            .map_err(to_py)
    }

    /// Closed-form IID rate for independent receptors (nats/s).
    fn mi_rate_iid(&self, p: f64) -> PyResult<f64> {
        bindcap::mi_rate_iid(&self.0, p).map(|r| r.value()).map_err(to_py)
    }

    /// Exact MI per step of the discretized channel (nats/step).
    fn mi_rate_discrete(&self, policy_probs: Vec<f64>, tau: f64) -> PyResult<f64> {
        bindcap::mi_rate_discrete(&self.0, &policy(policy_probs)?, tau)
            .map(|r| r.value())
            .map_err(to_py)
    }

    fn capacity_iid<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let res = py
            .detach(|| bindcap::capacity_iid(&self.0, &OptimizerConfig::default()))
            .map_err(to_py)?;
        capacity_dict(py, &res)
    }

    fn capacity_feedback<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let res = py
            .detach(|| bindcap::capacity_feedback(&self.0, &OptimizerConfig::default()))
            .map_err(to_py)?;
        capacity_dict(py, &res)
    }

    /// Simulates the discretized channel and returns the plug-in MI estimate.
    #[pyo3(signature = (policy_probs, steps, tau, seed=1, burn_in=0))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        policy_probs: Vec<f64>,
        steps: usize,
        tau: f64,
        seed: u64,
        burn_in: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let pol = policy(policy_probs)?;
        let cfg = SimulationConfig {
            steps,
            tau,
            seed,
            burn_in,
        };
        let est = py
            .detach(|| bindcap::simulate_trajectory(&self.0, &pol, &cfg).and_then(|t| bindcap::estimate_mi(&t)))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mi_per_second", est.mi_per_second)?;
        d.set_item("mi_per_step", est.mi_per_step)?;
        d.set_item("stderr", est.stderr)?;
        d.set_item("transitions", est.counts.total())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Channel(kind={}, n={})", self.0.kind(), self.0.n())
    }
}

/// `-p ln p`.
#[pyfunction]
fn partial_entropy(p: f64) -> PyResult<f64> {
    bindcap::partial_entropy(p).map_err(to_py)
}

/// Entropy of the three-outcome law `(p, q, 1 - p - q)`.
#[pyfunction]
fn triple_entropy(p: f64, q: f64) -> PyResult<f64> {
    bindcap::triple_entropy(p, q).map_err(to_py)
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    bindcap::binary_entropy(p).map_err(to_py)
}

/// Binomial occupancy law of `n` independent receptors.
#[pyfunction]
fn binomial_occupancy(n: usize, alpha_bar: f64, beta: f64) -> Vec<f64> {
    bindcap::binomial_occupancy(n, alpha_bar, beta)
}

#[pymodule]
fn bindcap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKinetics>()?;
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(partial_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(triple_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_occupancy, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
