//! Regression with sampled random features fitted by projected SGD.
//!
//! The model is `f_hat(x) = sum_m alpha_m e^{-2 pi i v_m . x}` with real
//! coefficients. Each SGD step reads one fresh example and one uniformly
//! chosen feature, so a step costs `O(M D)` regardless of the data size.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::grid::{
    ingest_samples, sample_dataset, DatasetSpec, EmpiricalDist, GridDomain, RkhsFunction,
};
use crate::kernels::{gram_reconstructed, p_tau, KernelSpec, ProbVector};
use crate::oracle::{degree_of_freedom, optimized_distribution, symmetrized_sigma};
use crate::qsim::{CostLedger, FeatureSampler, Tier};
use crate::C64;

/// Sampled features and their fitted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub features: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Ratio of the sampling law to `P` at each feature.
    pub q_values: Vec<f64>,
}

impl Model {
    pub fn new(features: Vec<usize>, coefficients: Vec<f64>, q_values: Vec<f64>) -> Result<Self> {
        if features.len() != coefficients.len() || features.len() != q_values.len() {
            return Err(argument("model fields must have equal lengths"));
        }
        Ok(Self {
            features,
            coefficients,
            q_values,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Smallest sampling weight among the features.
    pub fn q_min(&self) -> f64 {
        self.q_values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn predict(&self, domain: &GridDomain, x: usize) -> C64 {
        self.features
            .iter()
            .zip(&self.coefficients)
            .map(|(&v, &a)| feature(domain, v, x) * a)
            .sum()
    }
}

/// `e^{-2 pi i v . x}`
pub fn feature(domain: &GridDomain, v: usize, x: usize) -> C64 {
    let turns = domain.phase_units(v, x) as f64 / domain.side() as f64;
    C64::from_polar(1.0, -2.0 * PI * turns)
}

fn check_features(domain: &GridDomain, features: &[usize]) -> Result<()> {
    if features.is_empty() {
        return Err(argument("at least one feature is required"));
    }
    features.iter().try_for_each(|&v| domain.check_index(v))
}

/// Unbiased estimate of the gradient of the squared error from one example
/// and one feature index `m`.
///
/// Component `j` is `-2 Re[e^{-2 pi i v_j.x} (y - M alpha_m e^{2 pi i v_m.x})]`.
pub fn gradient_estimate(
    domain: &GridDomain,
    alpha: &[f64],
    sample: (usize, f64),
    m: usize,
    features: &[usize],
) -> Result<Vec<f64>> {
    check_features(domain, features)?;
    if alpha.len() != features.len() {
        return Err(Error::Shape {
            expected: features.len(),
            actual: alpha.len(),
        });
    }
    if m >= features.len() {
        return Err(argument(format!(
            "feature index {m} outside 0..{}",
            features.len()
        )));
    }
    let (x, y) = sample;
    domain.check_index(x)?;
    let residual = C64::new(y, 0.0)
        - feature(domain, features[m], x).conj() * (features.len() as f64 * alpha[m]);
    Ok(features
        .iter()
        .map(|&v| -2.0 * (feature(domain, v, x) * residual).re)
        .collect())
}

/// Exact gradient of `sum_x p(x) |f(x) - f_hat(x)|^2` with respect to `alpha`.
pub fn exact_gradient(
    domain: &GridDomain,
    alpha: &[f64],
    features: &[usize],
    target: &[f64],
    density: &ProbVector,
) -> Result<Vec<f64>> {
    check_features(domain, features)?;
    let mut grad = vec![0.0; features.len()];
    for x in 0..domain.size() {
        let p = density.probs()[x];
        if p == 0.0 {
            continue;
        }
        let model: C64 = features
            .iter()
            .zip(alpha)
            .map(|(&v, &a)| feature(domain, v, x) * a)
            .sum();
        let residual = C64::new(target[x], 0.0) - model;
        for (g, &v) in grad.iter_mut().zip(features) {
            *g -= 2.0 * p * (feature(domain, v, x).conj() * residual).re;
        }
    }
    Ok(grad)
}

/// Euclidean projection onto the ball of the given radius.
pub fn project_ball(alpha: &[f64], radius: f64) -> Vec<f64> {
    let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm <= radius {
        alpha.to_vec()
    } else {
        alpha.iter().map(|a| a * radius / norm).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `eta = D / (L sqrt(T))` at every step.
    ConstantHorizon,
    /// `eta_t = D / (L sqrt(t))`.
    Decaying,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub radius: f64,
    pub seed: u64,
    /// Failure probability the iteration count is chosen against.
    pub delta_fail: f64,
    /// Upper bound on `|y|`, used in the gradient-norm bound.
    pub target_bound: f64,
    /// Weight of an optional `ridge * |alpha|^2` penalty.
    pub ridge: f64,
}

impl SgdConfig {
    /// `c / sqrt(M q_min)`
    pub fn radius_for(constant: f64, m: usize, q_min: f64) -> f64 {
        constant / (m as f64 * q_min).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(argument("SGD needs at least one iteration"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(argument(format!(
                "ball radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.target_bound.is_finite() && self.target_bound >= 0.0 && self.ridge >= 0.0) {
            return Err(argument(
                "target bound and ridge weight must be nonnegative",
            ));
        }
        Ok(())
    }

    /// Step size at 1-based iteration `t` for `m` features.
    pub fn step_size(&self, t: usize, m: usize) -> f64 {
        let m = m as f64;
        let diameter = 2.0 * self.radius;
        let lipschitz =
            2.0 * m.sqrt() * (self.target_bound + m * self.radius) + 2.0 * self.ridge * self.radius;
        let horizon = match self.schedule {
            StepSchedule::ConstantHorizon => self.iterations,
            StepSchedule::Decaying => t,
        };
        diameter / (lipschitz * (horizon as f64).sqrt())
    }
}

/// Projected SGD from `alpha = 0`, one stream example per step.
pub fn sgd<I>(
    domain: &GridDomain,
    data_stream: I,
    features: &[usize],
    config: &SgdConfig,
) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    check_features(domain, features)?;
    config.validate()?;
    let m = features.len();
    let mut rng = crate::seeded_rng(config.seed, 2);
    let mut stream = data_stream.into_iter();
    let mut alpha = vec![0.0; m];
    for t in 1..=config.iterations {
        let sample = stream.next().ok_or_else(|| {
            Error::Data(format!(
                "data stream ended after {} of {} steps",
                t - 1,
                config.iterations
            ))
        })?;
        let j = rng.random_range(0..m);
        let grad = gradient_estimate(domain, &alpha, sample, j, features)?;
        let eta = config.step_size(t, m);
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a -= eta * (g + 2.0 * config.ridge * *a);
        }
        alpha = project_ball(&alpha, config.radius);
    }
    Ok(alpha)
}

/// `sum_x p(x) |f(x) - f_hat(x)|^2` over the grid.
pub fn generalization_error(f: &RkhsFunction, model: &Model, density: &ProbVector) -> f64 {
    let domain = f.domain();
    (0..domain.size())
        .map(|x| {
            let p = density.probs()[x];
            if p == 0.0 {
                0.0
            } else {
                p * (C64::new(f.evaluate(x), 0.0) - model.predict(domain, x)).norm_sqr()
            }
        })
        .sum()
}

/// `m` IID draws from the data-independent law `P`.
pub fn baseline_features<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    domain: &GridDomain,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(argument("M must be at least 1"));
    }
    let law = WeightedIndex::new(p_tau(kernel, domain)?.probs())
        .map_err(|e| Error::Numeric(format!("cannot sample P: {e}")))?;
    Ok((0..m).map(|_| law.sample(rng)).collect())
}

/// Where features come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Inverse-CDF draws from the exact optimized distribution.
    Exact,
    /// Measurements of the oracle-tier state.
    OracleSim,
    /// Measurements of the circuit-tier state.
    CircuitSim,
    /// Draws from `P`, ignoring the data.
    Baseline,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Exact,
        SamplerKind::OracleSim,
        SamplerKind::CircuitSim,
        SamplerKind::Baseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Exact => "exact",
            SamplerKind::OracleSim => "oracle-sim",
            SamplerKind::CircuitSim => "circuit-sim",
            SamplerKind::Baseline => "baseline",
        }
    }

    /// Whether the sampler targets the data-optimized law.
    pub fn is_optimized(&self) -> bool {
        *self != SamplerKind::Baseline
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                argument(format!(
                    "unknown tier `{s}`; expected exact, oracle-sim, circuit-sim or baseline"
                ))
            })
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A ready-to-draw feature sampler of any kind.
#[derive(Debug, Clone)]
pub struct FeatureSource {
    kind: SamplerKind,
    law: Vec<f64>,
    table: WeightedIndex<f64>,
    quantum: Option<FeatureSampler>,
}

impl FeatureSource {
    pub fn new(
        kind: SamplerKind,
        kernel: &KernelSpec,
        domain: &GridDomain,
        qhat: &EmpiricalDist,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        let (law, quantum) = match kind {
            SamplerKind::Baseline => (p_tau(kernel, domain)?.probs().to_vec(), None),
            SamplerKind::Exact => (
                optimized_distribution(kernel, domain, qhat, eps)?
                    .probs
                    .probs()
                    .to_vec(),
                None,
            ),
            SamplerKind::OracleSim | SamplerKind::CircuitSim => {
                let tier = if kind == SamplerKind::CircuitSim {
                    Tier::Circuit
                } else {
                    Tier::Oracle
                };
                let sampler = FeatureSampler::new(kernel, domain, qhat, eps, tier, delta)?;
                (sampler.law(), Some(sampler))
            }
        };
        let table = WeightedIndex::new(&law)
            .map_err(|e| Error::Numeric(format!("cannot sample feature law: {e}")))?;
        Ok(Self {
            kind,
            law,
            table,
            quantum,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// Exact law of a single draw.
    pub fn law(&self) -> &[f64] {
        &self.law
    }

    /// One feature and the cost of producing it.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, CostLedger)> {
        match &self.quantum {
            Some(sampler) => sampler.sample(rng),
            None => Ok((self.table.sample(rng), CostLedger::exact())),
        }
    }
}

/// One end-to-end learning run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub kernel: KernelSpec,
    pub dataset: DatasetSpec,
    /// Examples drawn; must cover the SGD iterations.
    pub n: usize,
    pub sampler: SamplerKind,
    pub eps: f64,
    pub delta: f64,
    pub m: usize,
    pub iterations: usize,
    pub radius_const: f64,
    pub schedule: StepSchedule,
    pub ridge: f64,
    pub delta_fail: f64,
    pub seed: u64,
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub seed: u64,
    pub m: usize,
    pub eps: f64,
    pub sampler: SamplerKind,
    pub iterations: usize,
    pub final_error: f64,
    pub q_min: f64,
    pub d_eps: f64,
    pub rho_queries_total: u64,
    /// One ledger per sampled feature.
    pub ledgers: Vec<CostLedger>,
}

impl Metrics {
    pub const CSV_HEADER: [&'static str; 9] = [
        "seed",
        "M",
        "eps",
        "tier",
        "T",
        "final_error",
        "q_min",
        "d_eps",
        "rho_queries_total",
    ];

    pub fn csv_record(&self) -> [String; 9] {
        [
            self.seed.to_string(),
            self.m.to_string(),
            self.eps.to_string(),
            self.sampler.name().to_string(),
            self.iterations.to_string(),
            self.final_error.to_string(),
            self.q_min.to_string(),
            self.d_eps.to_string(),
            self.rho_queries_total.to_string(),
        ]
    }
}

/// Samples features, fits them by SGD and scores the fit exactly.
pub fn learn_pipeline(config: &PipelineConfig) -> Result<(Model, Metrics)> {
    if config.m == 0 {
        return Err(argument("M must be at least 1"));
    }
    if config.n < config.iterations {
        return Err(Error::Data(format!(
            "N = {} examples cannot feed T = {} steps",
            config.n, config.iterations
        )));
    }
    let spec = &config.dataset;
    let domain = spec.domain;
    let kernel = &config.kernel;
    let data = sample_dataset(spec, config.n, spec.seed)?;
    let qhat = ingest_samples(&domain, &data.points())?;
    let mut rng = crate::seeded_rng(config.seed, 1);

    let source = FeatureSource::new(
        config.sampler,
        kernel,
        &domain,
        &qhat,
        config.eps,
        config.delta,
    )?;
    let (features, ledgers): (Vec<usize>, Vec<CostLedger>) = (0..config.m)
        .map(|_| source.draw(&mut rng))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let q_values = if config.sampler.is_optimized() {
        // weights are read from the exact oracle even for simulated tiers
        let q_star = optimized_distribution(kernel, &domain, &qhat, config.eps)?
            .q_star(&p_tau(kernel, &domain)?);
        features.iter().map(|&v| q_star[v]).collect()
    } else {
        vec![1.0; config.m]
    };

    let mut model = Model::new(features, vec![0.0; config.m], q_values)?;
    let sgd_config = SgdConfig {
        iterations: config.iterations,
        schedule: config.schedule,
        radius: SgdConfig::radius_for(config.radius_const, config.m, model.q_min()),
        seed: config.seed,
        delta_fail: config.delta_fail,
        target_bound: spec
            .target
            .values()
            .iter()
            .fold(0.0, |m: f64, y| m.max(y.abs())),
        ridge: config.ridge,
    };
    model.coefficients = sgd(
        &domain,
        data.pairs.iter().copied(),
        &model.features,
        &sgd_config,
    )?;

    let sigma = symmetrized_sigma(&gram_reconstructed(kernel, &domain)?, &qhat)?;
    let metrics = Metrics {
        seed: config.seed,
        m: config.m,
        eps: config.eps,
        sampler: config.sampler,
        iterations: config.iterations,
        final_error: generalization_error(&spec.target, &model, &spec.density),
        q_min: model.q_min(),
        d_eps: degree_of_freedom(&sigma, config.eps)?,
        rho_queries_total: ledgers.iter().map(|l| l.oracle_rho_queries).sum(),
        ledgers,
    };
    Ok((model, metrics))
}
