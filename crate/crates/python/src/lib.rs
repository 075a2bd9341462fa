//! Python module `rdsjump`.
//!
//! States are passed as an `int` for single-species networks or a list of
//! counts in species order; results come back in the same shape.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rdsjump_core::attractor::{self, StabilizationRule};
use rdsjump_core::oracle;
use rdsjump_core::stationary::{self, DEFAULT_STATIONARY_TOL};
use rdsjump_core::twopoint::{self, SyncConfig};
use rdsjump_core::{rds, Builtin, Error, NoiseFiber, PairClass, PullbackConfig, ReactionNetwork, State};

create_exception!(rdsjump, RdsJumpError, PyException, "Failure inside the rdsjump engine.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        other => RdsJumpError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for rdsjump_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[derive(FromPyObject)]
enum StateArg {
    Scalar(u64),
    Counts(Vec<u64>),
}

impl StateArg {
    fn state(&self) -> State {
        match self {
            StateArg::Scalar(x) => State::scalar(*x),
            StateArg::Counts(v) => State::new(v.clone()),
        }
    }

    fn mirror<'py>(&self, py: Python<'py>, s: &State) -> PyResult<Bound<'py, PyAny>> {
        match (self, s.as_scalar()) {
            (StateArg::Scalar(_), Some(x)) => Ok(x.into_pyobject(py)?.into_any()),
            _ => Ok(s.counts().to_vec().into_pyobject(py)?.into_any()),
        }
    }
}

/// Immutable reaction network with mass-action propensities.
#[pyclass(name = "ReactionNetwork", module = "rdsjump", frozen)]
pub struct PyReactionNetwork {
    inner: ReactionNetwork,
}

#[pymethods]
impl PyReactionNetwork {
    /// `birth_death` or `schloegl`; `rates` defaults to the reference constants.
    #[staticmethod]
    #[pyo3(signature = (name, rates=None))]
    fn builtin(name: &str, rates: Option<Vec<f64>>) -> PyResult<Self> {
        let b: Builtin = name.parse().py()?;
        let rates = rates.unwrap_or_else(|| b.default_rates().to_vec());
        Ok(PyReactionNetwork {
            inner: ReactionNetwork::builtin(b, &rates).py()?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (gamma1=10.0, gamma2=1.0))]
    fn birth_death(gamma1: f64, gamma2: f64) -> PyResult<Self> {
        Self::builtin("birth_death", Some(vec![gamma1, gamma2]))
    }

    #[staticmethod]
    #[pyo3(signature = (gamma1=6.0, gamma2=3.5, gamma3=0.4, gamma4=0.0105))]
    fn schloegl(gamma1: f64, gamma2: f64, gamma3: f64, gamma4: f64) -> PyResult<Self> {
        Self::builtin("schloegl", Some(vec![gamma1, gamma2, gamma3, gamma4]))
    }

    /// Parses a JSON definition with `species` and `reactions`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyReactionNetwork {
            inner: ReactionNetwork::from_json_str(text).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().py()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn species(&self) -> Vec<String> {
        self.inner.species().to_vec()
    }

    #[getter]
    fn reaction_count(&self) -> usize {
        self.inner.reaction_count()
    }

    fn propensities(&self, x: StateArg) -> PyResult<Vec<f64>> {
        self.inner.propensities(&x.state()).py()
    }

    /// `[(dx, probability), ...]` for one embedded step of a single-species network.
    fn jump_law(&self, x: u64) -> PyResult<Vec<(i64, f64)>> {
        self.inner.jump_law(x).py()
    }

    fn up_probability(&self, x: u64) -> PyResult<f64> {
        self.inner.up_probability(x).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "ReactionNetwork(name={:?}, species={:?}, reactions={})",
            self.inner.name(),
            self.inner.species(),
            self.inner.reaction_count()
        )
    }
}

/// One realization of the driving noise, addressed by a seed and an offset.
#[pyclass(name = "NoiseFiber", module = "rdsjump", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyNoiseFiber {
    inner: NoiseFiber,
}

#[pymethods]
impl PyNoiseFiber {
    #[new]
    fn new(seed: u64) -> Self {
        PyNoiseFiber {
            inner: NoiseFiber::new(seed),
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn offset(&self) -> i64 {
        self.inner.offset()
    }

    /// Reaction selector `q_n` in (0, 1).
    fn q(&self, n: i64) -> f64 {
        self.inner.q(n)
    }

    /// Waiting-time variate `r_n` in (0, 1).
    fn r(&self, n: i64) -> f64 {
        self.inner.r(n)
    }

    fn shift(&self, m: i64) -> PyResult<Self> {
        Ok(PyNoiseFiber {
            inner: self.inner.shift(m).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("NoiseFiber(seed={}, offset={})", self.inner.seed(), self.inner.offset())
    }
}

/// 0-based index of the reaction selected by `q` at `x`.
#[pyfunction]
fn kappa(net: &PyReactionNetwork, x: StateArg, q: f64) -> PyResult<usize> {
    rds::kappa(&net.inner, &x.state(), q).py()
}

#[pyfunction]
fn tau(net: &PyReactionNetwork, x: StateArg, r: f64) -> PyResult<f64> {
    rds::tau(&net.inner, &x.state(), r).py()
}

/// `phi^n` of the embedded chain.
#[pyfunction]
fn phi<'py>(py: Python<'py>, net: &PyReactionNetwork, fiber: &PyNoiseFiber, n: u64, x: StateArg) -> PyResult<Bound<'py, PyAny>> {
    let y = rds::phi(&net.inner, &fiber.inner, n, &x.state()).py()?;
    x.mirror(py, &y)
}

/// `psi^n` of the augmented chain: returns `(state, time)`.
#[pyfunction]
#[pyo3(signature = (net, fiber, n, x, t=0.0))]
fn psi<'py>(
    py: Python<'py>,
    net: &PyReactionNetwork,
    fiber: &PyNoiseFiber,
    n: u64,
    x: StateArg,
    t: f64,
) -> PyResult<(Bound<'py, PyAny>, f64)> {
    let p = rds::psi(&net.inner, &fiber.inner, n, &x.state(), t).py()?;
    Ok((x.mirror(py, &p.state)?, p.time))
}

/// Jump times `[T_0, T_1, ...]` and states `[X_0, X_1, ...]`, stopped after
/// `steps` jumps or at `t_end`.
#[pyfunction]
#[pyo3(signature = (net, fiber, x0, steps=None, t_end=None))]
fn trajectory<'py>(
    py: Python<'py>,
    net: &PyReactionNetwork,
    fiber: &PyNoiseFiber,
    x0: StateArg,
    steps: Option<u64>,
    t_end: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<Bound<'py, PyAny>>)> {
    let start = x0.state();
    let traj = match (steps, t_end) {
        (None, Some(t)) => rds::trajectory_ct(&net.inner, &fiber.inner, &start, t),
        (Some(n), None) => rds::trajectory_steps(&net.inner, &fiber.inner, &start, n),
        _ => return Err(PyValueError::new_err("give exactly one of steps or t_end")),
    }
    .py()?;
    let mut times = vec![traj.initial_time];
    times.extend(&traj.jump_times);
    let states = std::iter::once(&traj.initial_state)
        .chain(&traj.states)
        .map(|s| x0.mirror(py, s))
        .collect::<PyResult<_>>()?;
    Ok((times, states))
}

/// `[(x_n, y_n), ...]` for `n = 0..=n_max` under common noise.
#[pyfunction]
fn two_point_trajectory(net: &PyReactionNetwork, fiber: &PyNoiseFiber, x0: u64, y0: u64, n_max: u64) -> PyResult<Vec<(u64, u64)>> {
    let path = twopoint::two_point_trajectory(&net.inner, &fiber.inner, &State::scalar(x0), &State::scalar(y0), n_max).py()?;
    Ok(path.iter().map(|p| (p.x.counts()[0], p.y.counts()[0])).collect())
}

/// Coupled one-step law from `(x, y)` keyed by `(dx, dy)`.
#[pyfunction]
fn pair_transition_probs(net: &PyReactionNetwork, x: u64, y: u64) -> PyResult<Vec<((i64, i64), f64)>> {
    Ok(twopoint::pair_transition_probs(&net.inner, x, y).py()?.as_array().to_vec())
}

#[pyfunction]
#[pyo3(signature = (net, fiber, x0, y0, n_max=100_000))]
fn detect_synchronization<'py>(
    py: Python<'py>,
    net: &PyReactionNetwork,
    fiber: &PyNoiseFiber,
    x0: u64,
    y0: u64,
    n_max: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SyncConfig::with_n_max(n_max);
    let r = twopoint::detect_synchronization(&net.inner, &fiber.inner, &State::scalar(x0), &State::scalar(y0), &cfg).py()?;
    let d = PyDict::new(py);
    d.set_item("synchronized", r.synchronized())?;
    d.set_item("tau_d", r.tau_d)?;
    d.set_item("n0", r.n0)?;
    d.set_item("t_sync_x", r.t_sync_x)?;
    d.set_item("t_sync_y", r.t_sync_y)?;
    d.set_item("delay", r.delay)?;
    d.set_item("meeting_state", r.meeting_state.as_ref().and_then(State::as_scalar))?;
    d.set_item("steps_run", r.steps_run)?;
    d.set_item("invariant_violations", r.invariants.violations())?;
    Ok(d)
}

/// One dict per pair with synchronization frequency and mean statistics.
#[pyfunction]
#[pyo3(signature = (net, seeds, pairs, n_max=100_000))]
fn sync_sweep<'py>(
    py: Python<'py>,
    net: &PyReactionNetwork,
    seeds: Vec<u64>,
    pairs: Vec<(u64, u64)>,
    n_max: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = SyncConfig::with_n_max(n_max);
    let inner = &net.inner;
    let rows = py.detach(|| twopoint::sync_sweep(inner, &seeds, &pairs, &cfg)).py()?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("x0", r.x0)?;
            d.set_item("y0", r.y0)?;
            d.set_item("runs", r.runs)?;
            d.set_item("synchronized", r.synchronized)?;
            d.set_item("sync_frequency", r.sync_frequency)?;
            d.set_item("hit_thick_diagonal", r.hit_thick_diagonal)?;
            d.set_item("mean_tau_d", r.mean_tau_d)?;
            d.set_item("mean_n0", r.mean_n0)?;
            d.set_item("mean_delay", r.mean_delay)?;
            d.set_item("invariant_violations", r.invariants.violations())?;
            Ok(d)
        })
        .collect()
}

/// Stationary law of the truncated one-point (`"one"`) or two-point
/// (`"two-diag"`, `"two-off"`) chain as `(states, weights)`.
#[pyfunction]
#[pyo3(signature = (net, nmax, which="one", tol=DEFAULT_STATIONARY_TOL))]
fn stationary_distribution(net: &PyReactionNetwork, nmax: u64, which: &str, tol: f64) -> PyResult<(Vec<Vec<u64>>, Vec<f64>)> {
    let chain = match which {
        "one" => stationary::build_one_point_chain(&net.inner, nmax),
        "two-diag" => stationary::build_two_point_chain(&net.inner, nmax, PairClass::Diagonal),
        "two-off" => stationary::build_two_point_chain(&net.inner, nmax, PairClass::off_diagonal()),
        other => return Err(PyValueError::new_err(format!("unknown chain `{other}`"))),
    }
    .py()?;
    let rho = stationary::stationary_distribution(&chain, tol).py()?;
    Ok((rho.states, rho.weights))
}

/// `(terms, partial_sums, converged_at)` of the stationary product series.
#[pyfunction]
fn zeta_partial_sums(net: &PyReactionNetwork, xmax: u64) -> PyResult<(Vec<f64>, Vec<f64>, Option<u64>)> {
    let z = stationary::zeta_partial_sums(&net.inner, xmax).py()?;
    Ok((z.terms, z.partial_sums, z.converged_at))
}

fn pullback_cfg(net: &ReactionNetwork, n_max: u64, window: u64, rule: &str, ceiling: Option<u64>) -> PyResult<PullbackConfig> {
    let rule = match rule {
        "bracketed" => StabilizationRule::Bracketed,
        "window" => StabilizationRule::Window,
        other => return Err(PyValueError::new_err(format!("unknown stabilization rule `{other}`"))),
    };
    PullbackConfig {
        rule,
        ceiling,
        ..PullbackConfig::new(n_max, window)
    }
    .resolved(net)
    .py()
}

/// `(value, stabilization_depth, converged)` of the pullback from `x`.
#[pyfunction]
#[pyo3(signature = (net, fiber, x, n_max=10_000, window=10, rule="bracketed", ceiling=None))]
fn pullback_point(
    net: &PyReactionNetwork,
    fiber: &PyNoiseFiber,
    x: u64,
    n_max: u64,
    window: u64,
    rule: &str,
    ceiling: Option<u64>,
) -> PyResult<(u64, u64, bool)> {
    let cfg = pullback_cfg(&net.inner, n_max, window, rule, ceiling)?;
    let r = attractor::pullback_point(&net.inner, &fiber.inner, x, &cfg).py()?;
    Ok((r.value, r.stabilization_depth, r.converged))
}

/// `(a0, a1, stabilization_depth, converged)` of the attractor fiber.
#[pyfunction]
#[pyo3(signature = (net, fiber, n_max=10_000, window=10, rule="bracketed", ceiling=None))]
fn attractor_fiber(
    net: &PyReactionNetwork,
    fiber: &PyNoiseFiber,
    n_max: u64,
    window: u64,
    rule: &str,
    ceiling: Option<u64>,
) -> PyResult<(u64, u64, u64, bool)> {
    let cfg = pullback_cfg(&net.inner, n_max, window, rule, ceiling)?;
    let f = attractor::attractor_fiber(&net.inner, &fiber.inner, &cfg).py()?;
    Ok((f.a0, f.a1, f.stabilization_depth, f.converged))
}

/// Mean of `(delta_a0 + delta_a1) / 2` over seeds: `(states, weights, tv_to_rho)`,
/// with `rho` the one-point stationary law truncated at `reference_nmax`.
#[pyfunction]
#[pyo3(signature = (net, seeds, n_max=10_000, window=10, reference_nmax=200))]
fn sample_measure(
    py: Python<'_>,
    net: &PyReactionNetwork,
    seeds: Vec<u64>,
    n_max: u64,
    window: u64,
    reference_nmax: u64,
) -> PyResult<(Vec<u64>, Vec<f64>, Option<f64>)> {
    let cfg = pullback_cfg(&net.inner, n_max, window, "bracketed", None)?;
    let inner = &net.inner;
    let report = py
        .detach(|| {
            let chain = stationary::build_one_point_chain(inner, reference_nmax)?;
            let rho = stationary::stationary_distribution(&chain, DEFAULT_STATIONARY_TOL)?;
            attractor::sample_measure_stats(inner, &seeds, &cfg, Some(&rho))
        })
        .py()?;
    let states = report.measure.states.iter().map(|s| s[0]).collect();
    Ok((states, report.measure.weights, report.tv_to_reference))
}

/// Values of the recursion from `p0` up to `x_max`.
#[pyfunction]
fn lemma_recursion(alpha: f64, d: i64, p0: f64, x_max: usize) -> PyResult<Vec<f64>> {
    Ok(oracle::lemma_recursion(alpha, d, p0, x_max).py()?.values)
}

/// `[(root, "stable" | "unstable" | "degenerate"), ...]` in increasing order.
#[pyfunction]
#[pyo3(signature = (model, rates=None))]
fn rre_equilibria(model: &str, rates: Option<Vec<f64>>) -> PyResult<Vec<(f64, &'static str)>> {
    let b: Builtin = model.parse().py()?;
    let rates = rates.unwrap_or_else(|| b.default_rates().to_vec());
    Ok(oracle::rre_equilibria(b, &rates)
        .py()?
        .into_iter()
        .map(|e| {
            let s = match e.stability {
                oracle::Stability::Stable => "stable",
                oracle::Stability::Unstable => "unstable",
                oracle::Stability::Degenerate => "degenerate",
            };
            (e.root, s)
        })
        .collect())
}

/// `(times, concentrations)` of the RK4 solution.
#[pyfunction]
#[pyo3(signature = (model, c0, t_end, rates=None, dt=1e-3))]
fn rre_integrate(model: &str, c0: f64, t_end: f64, rates: Option<Vec<f64>>, dt: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let b: Builtin = model.parse().py()?;
    let rates = rates.unwrap_or_else(|| b.default_rates().to_vec());
    let path = oracle::rre_integrate(b, &rates, c0, t_end, dt).py()?;
    Ok((path.times, path.values))
}

/// Birth-death stationary law on `0..=n` from the product formula.
#[pyfunction]
fn birth_death_stationary_product(gamma1: f64, gamma2: f64, n: u64) -> PyResult<Vec<f64>> {
    Ok(oracle::birth_death_stationary_product(gamma1, gamma2, n).py()?.weights)
}

#[pymodule]
pub fn rdsjump(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("RdsJumpError", m.py().get_type::<RdsJumpError>())?;
    m.add_class::<PyReactionNetwork>()?;
    m.add_class::<PyNoiseFiber>()?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(pair_transition_probs, m)?)?;
    m.add_function(wrap_pyfunction!(detect_synchronization, m)?)?;
    m.add_function(wrap_pyfunction!(sync_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_partial_sums, m)?)?;
    m.add_function(wrap_pyfunction!(pullback_point, m)?)?;
    m.add_function(wrap_pyfunction!(attractor_fiber, m)?)?;
    m.add_function(wrap_pyfunction!(sample_measure, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_recursion, m)?)?;
    m.add_function(wrap_pyfunction!(rre_equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(rre_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(birth_death_stationary_product, m)?)?;
    Ok(())
}
