//! Python bindings for `optrf`.
//!
//! Empirical distributions cross the boundary as lists of grid indices;
//! frequencies and distributions come back as flat lists in row-major order.

use std::collections::HashMap;
use std::path::PathBuf;

use optrf::experiment::{compare_m_requirements, run_experiment, ExperimentConfig, Overrides};
use optrf::grid::{ingest_samples, EmpiricalDist, GridDomain};
use optrf::kernels::{gram_reconstructed, p_tau, KernelSpec};
use optrf::learn::SamplerKind;
use optrf::oracle::{degree_of_freedom, optimized_distribution, symmetrized_sigma};
use optrf::qsim::{CostLedger, FeatureSampler, Tier};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: optrf::Error) -> PyErr {
    match e {
        optrf::Error::Io(_) | optrf::Error::Numeric(_) | optrf::Error::Degenerate(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A periodic lattice `{0, .., side-1}^dim`.
#[pyclass(name = "Domain", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyDomain(GridDomain);

#[pymethods]
impl PyDomain {
    #[new]
    fn new(dim: usize, side: usize) -> PyResult<Self> {
        GridDomain::new(dim, side).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn side(&self) -> usize {
        self.0.side()
    }

    fn __len__(&self) -> usize {
        self.0.size()
    }

    fn index(&self, coords: Vec<usize>) -> PyResult<usize> {
        self.0.index(&coords).map_err(to_py)
    }

    fn coords(&self, index: usize) -> PyResult<Vec<usize>> {
        self.0.check_index(index).map_err(to_py)?;
        Ok(self.0.coords(index))
    }

    /// Centered frequency of a grid index, in cycles per period.
    fn frequency(&self, index: usize) -> PyResult<Vec<f64>> {
        self.0.check_index(index).map_err(to_py)?;
        Ok(self.0.frequency(index))
    }

    fn __repr__(&self) -> String {
        format!("Domain(dim={}, side={})", self.0.dim(), self.0.side())
    }
}

/// A translation-invariant kernel with bandwidth `gamma`.
#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(KernelSpec);

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn gaussian(gamma: f64) -> PyResult<Self> {
        KernelSpec::gaussian(gamma).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn laplacian(gamma: f64) -> PyResult<Self> {
        KernelSpec::laplacian(gamma).map(Self).map_err(to_py)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// Fourier weights over every grid frequency.
    fn weights(&self, domain: &PyDomain) -> PyResult<Vec<f64>> {
        self.0.q_tau_vector(&domain.0).map_err(to_py)
    }

    /// The data-independent feature law.
    fn baseline_law(&self, domain: &PyDomain) -> PyResult<Vec<f64>> {
        Ok(p_tau(&self.0, &domain.0).map_err(to_py)?.probs().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, gamma={})", self.0.family(), self.0.gamma())
    }
}

fn empirical(domain: &PyDomain, points: &[usize]) -> PyResult<EmpiricalDist> {
    ingest_samples(&domain.0, points).map_err(to_py)
}

/// Exact data-optimized feature law for the sample `points`.
#[pyfunction]
fn optimized_law(
    kernel: &PyKernel,
    domain: &PyDomain,
    points: Vec<usize>,
    eps: f64,
) -> PyResult<Vec<f64>> {
    let qhat = empirical(domain, &points)?;
    let dist = optimized_distribution(&kernel.0, &domain.0, &qhat, eps).map_err(to_py)?;
    Ok(dist.probs.probs().to_vec())
}

/// Effective number of features `d(eps)` for the sample `points`.
#[pyfunction]
fn degrees_of_freedom(
    kernel: &PyKernel,
    domain: &PyDomain,
    points: Vec<usize>,
    eps: f64,
) -> PyResult<f64> {
    let qhat = empirical(domain, &points)?;
    let gram = gram_reconstructed(&kernel.0, &domain.0).map_err(to_py)?;
    let sigma = symmetrized_sigma(&gram, &qhat).map_err(to_py)?;
    degree_of_freedom(&sigma, eps).map_err(to_py)
}

fn ledger_dict(ledger: CostLedger) -> HashMap<&'static str, f64> {
    HashMap::from([
        ("rho_queries", ledger.oracle_rho_queries as f64),
        ("tau_queries", ledger.oracle_tau_queries as f64),
        ("qft_applications", ledger.qft_applications as f64),
        ("qsvt_repetitions", ledger.qsvt_repetitions as f64),
        ("success_probability", ledger.amp_success_prob),
        (
            "amplification_rounds",
            ledger.amp_repetition_estimate as f64,
        ),
    ])
}

/// Simulated quantum sampler; the state is prepared once and measured per draw.
#[pyclass(name = "FeatureSampler", frozen)]
struct PyFeatureSampler(FeatureSampler);

#[pymethods]
impl PyFeatureSampler {
    #[new]
    #[pyo3(signature = (kernel, domain, points, eps, tier = "oracle", delta = 0.01))]
    fn new(
        kernel: &PyKernel,
        domain: &PyDomain,
        points: Vec<usize>,
        eps: f64,
        tier: &str,
        delta: f64,
    ) -> PyResult<Self> {
        let tier = match tier {
            "oracle" => Tier::Oracle,
            "circuit" => Tier::Circuit,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown tier `{other}`; use oracle or circuit"
                )))
            }
        };
        let qhat = empirical(domain, &points)?;
        FeatureSampler::new(&kernel.0, &domain.0, &qhat, eps, tier, delta)
            .map(Self)
            .map_err(to_py)
    }

    /// Exact law of one draw.
    fn law(&self) -> Vec<f64> {
        self.0.law()
    }

    /// Resource counts of one prepare-and-measure cycle.
    fn ledger(&self) -> HashMap<&'static str, f64> {
        ledger_dict(self.0.ledger())
    }

    /// `count` frequency indices, reproducible for a given seed.
    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, py: Python<'_>, count: usize, seed: u64) -> PyResult<Vec<usize>> {
        py.detach(|| {
            let mut rng = optrf::seeded_rng(seed, 1);
            (0..count)
                .map(|_| self.0.sample(&mut rng).map(|(v, _)| v))
                .collect::<optrf::Result<Vec<_>>>()
        })
        .map_err(to_py)
    }
}

fn load(path: PathBuf, overrides: &Overrides) -> PyResult<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(&path).map_err(to_py)?;
    config.apply(overrides);
    Ok(config)
}

/// Runs one configured experiment and returns its headline metrics.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None, seed = None, tier = None))]
fn run(
    py: Python<'_>,
    config: PathBuf,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    tier: Option<&str>,
) -> PyResult<HashMap<&'static str, Py<PyAny>>> {
    let tier = tier
        .map(|t| t.parse::<SamplerKind>())
        .transpose()
        .map_err(to_py)?;
    let config = load(
        config,
        &Overrides {
            output_dir,
            seed,
            tier,
        },
    )?;
    let report = py.detach(|| run_experiment(&config)).map_err(to_py)?;
    let m = &report.metrics;
    Ok(HashMap::from([
        (
            "final_error",
            m.final_error.into_pyobject(py)?.into_any().unbind(),
        ),
        ("m", m.m.into_pyobject(py)?.into_any().unbind()),
        (
            "tier",
            m.sampler.name().into_pyobject(py)?.into_any().unbind(),
        ),
        ("q_min", m.q_min.into_pyobject(py)?.into_any().unbind()),
        ("d_eps", m.d_eps.into_pyobject(py)?.into_any().unbind()),
        (
            "features",
            report
                .model
                .features
                .clone()
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        ),
        (
            "coefficients",
            report
                .model
                .coefficients
                .clone()
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        ),
        (
            "empirical_tv",
            report.empirical_tv.into_pyobject(py)?.into_any().unbind(),
        ),
    ]))
}

/// Sweeps M for the configured tier and the baseline; returns median M per tier.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None))]
fn compare(
    py: Python<'_>,
    config: PathBuf,
    output_dir: Option<PathBuf>,
) -> PyResult<HashMap<String, Option<f64>>> {
    let config = load(
        config,
        &Overrides {
            output_dir,
            ..Overrides::default()
        },
    )?;
    let report = py
        .detach(|| compare_m_requirements(&config))
        .map_err(to_py)?;
    Ok(report
        .summaries
        .iter()
        .map(|s| (s.sampler.name().to_string(), s.median_m))
        .collect())
}

/// Built-in invariant checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn selftest() -> Vec<(&'static str, bool, String)> {
    optrf::selftest::run_all()
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn optrf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyFeatureSampler>()?;
    m.add_function(wrap_pyfunction!(optimized_law, m)?)?;
    m.add_function(wrap_pyfunction!(degrees_of_freedom, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
