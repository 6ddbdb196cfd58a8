//! Config-driven experiments: single runs and optimized-vs-baseline sweeps.
//!
//! Configs are TOML. Every run writes a `manifest.toml` echoing the fully
//! resolved config, and identical configs give byte-identical outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    ingest_samples, planted_target, sample_dataset, synth_target, DatasetSpec, GridDomain,
};
use crate::kernels::{p_tau, KernelFamily, KernelSpec, ProbVector, DEFAULT_THETA_TERMS};
use crate::learn::{
    learn_pipeline, FeatureSource, Metrics, Model, PipelineConfig, SamplerKind, StepSchedule,
};
use crate::qsim::{CostLedger, DEFAULT_DELTA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Gaussian,
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: FamilyName,
    pub gamma: f64,
    #[serde(default = "default_theta_terms")]
    pub theta_terms: usize,
}

fn default_theta_terms() -> usize {
    DEFAULT_THETA_TERMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lipschitz_f: f64,
    #[serde(default)]
    pub lipschitz_q: f64,
    #[serde(default)]
    pub density: DensityConfig,
    pub target: TargetConfig,
}

/// True data density over the grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    #[default]
    Uniform,
    /// `exp(-d^2 / width^2)` in the periodic distance `d` to `center`.
    Bump { center: Vec<usize>, width: f64 },
    /// Unnormalized weights in row-major order.
    Weights { weights: Vec<f64> },
}

/// Target function, normalized to RKHS norm at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    /// `sum_j a_j cos(2 pi v_j . x)`; frequencies are lattice coordinates.
    Planted {
        frequencies: Vec<Vec<usize>>,
        amplitudes: Vec<f64>,
    },
    /// `sum_j b_j k(x, c_j)` over grid points.
    Centers {
        points: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_tier")]
    pub tier: SamplerKind,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Draws behind the empirical column of `distribution.csv`.
    #[serde(default = "default_dist_samples")]
    pub dist_samples: usize,
}

fn default_tier() -> SamplerKind {
    SamplerKind::Exact
}

fn default_eps() -> f64 {
    0.01
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_dist_samples() -> usize {
    10_000
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            tier: default_tier(),
            eps: default_eps(),
            delta: default_delta(),
            dist_samples: default_dist_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    /// Feature counts for `compare`; empty means `[m]`.
    #[serde(default)]
    pub m_sweep: Vec<usize>,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_radius_const")]
    pub radius_const: f64,
    /// First seed; `compare` uses `seed .. seed + repetitions`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_schedule")]
    pub schedule: StepSchedule,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_delta_fail")]
    pub delta_fail: f64,
    /// Error level that counts as learned in `compare`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_m() -> usize {
    8
}

fn default_t() -> usize {
    1000
}

fn default_radius_const() -> f64 {
    4.0
}

fn default_repetitions() -> usize {
    1
}

fn default_schedule() -> StepSchedule {
    StepSchedule::ConstantHorizon
}

fn default_delta_fail() -> f64 {
    0.05
}

fn default_threshold() -> f64 {
    0.05
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            m: default_m(),
            m_sweep: Vec::new(),
            t: default_t(),
            radius_const: default_radius_const(),
            seed: 0,
            repetitions: default_repetitions(),
            schedule: default_schedule(),
            ridge: 0.0,
            delta_fail: default_delta_fail(),
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("optrf-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

/// Command-line replacements applied after parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tier: Option<SamplerKind>,
}

/// Domain, kernel and dataset built from a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub domain: GridDomain,
    pub kernel: KernelSpec,
    pub dataset: DatasetSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate(origin)?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text, path)
    }

    /// The resolved config as TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("every config field is representable in TOML")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(dir) = &overrides.output_dir {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = overrides.seed {
            self.learner.seed = seed;
        }
        if let Some(tier) = overrides.tier {
            self.sampler.tier = tier;
        }
    }

    /// Feature counts swept by `compare`.
    pub fn sweep(&self) -> Vec<usize> {
        if self.learner.m_sweep.is_empty() {
            vec![self.learner.m]
        } else {
            self.learner.m_sweep.clone()
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let first = self.learner.seed;
        (0..self.learner.repetitions as u64).map(move |i| first + i)
    }

    fn validate(&self, origin: &Path) -> Result<()> {
        let fail = |key: &str, message: String| Error::Config {
            path: origin.to_path_buf(),
            message: format!("`{key}`: {message}"),
        };
        let positive = |key: &str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(fail(key, format!("must be positive, got {value}")))
            }
        };
        positive("kernel.gamma", self.kernel.gamma)?;
        positive("sampler.eps", self.sampler.eps)?;
        positive("learner.radius_const", self.learner.radius_const)?;
        positive("learner.threshold", self.learner.threshold)?;
        if !(self.sampler.delta > 0.0 && self.sampler.delta < 1.0) {
            return Err(fail(
                "sampler.delta",
                format!("must lie in (0, 1), got {}", self.sampler.delta),
            ));
        }
        if !(self.learner.delta_fail > 0.0 && self.learner.delta_fail < 1.0) {
            return Err(fail("learner.delta_fail", "must lie in (0, 1)".into()));
        }
        if !(self.learner.ridge >= 0.0
            && self.dataset.lipschitz_f >= 0.0
            && self.dataset.lipschitz_q >= 0.0)
        {
            return Err(fail(
                "learner.ridge",
                "ridge and Lipschitz constants must be nonnegative".into(),
            ));
        }
        if self.learner.m == 0 || self.learner.m_sweep.contains(&0) {
            return Err(fail(
                "learner.m",
                "feature counts must be at least 1".into(),
            ));
        }
        if self.learner.t == 0 {
            return Err(fail("learner.t", "must be at least 1".into()));
        }
        if self.learner.t > self.dataset.n {
            return Err(fail(
                "learner.t",
                format!(
                    "{} steps need at least as many examples, but dataset.n = {}",
                    self.learner.t, self.dataset.n
                ),
            ));
        }
        if self.learner.repetitions == 0 {
            return Err(fail("learner.repetitions", "must be at least 1".into()));
        }
        if self.sampler.dist_samples == 0 {
            return Err(fail("sampler.dist_samples", "must be at least 1".into()));
        }
        self.resolve()
            .map(|_| ())
            .map_err(|e| fail("dataset", e.to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let domain = GridDomain::new(self.domain.dim, self.domain.side)?;
        let family = match self.kernel.family {
            FamilyName::Gaussian => KernelFamily::Gaussian,
            FamilyName::Laplacian => KernelFamily::Laplacian,
        };
        let kernel = KernelSpec::new(family, self.kernel.gamma)?
            .with_theta_terms(self.kernel.theta_terms)?;
        let density = match &self.dataset.density {
            DensityConfig::Uniform => ProbVector::uniform(domain.size()),
            DensityConfig::Bump { center, width } => bump_density(&domain, center, *width)?,
            DensityConfig::Weights { weights } => {
                if weights.len() != domain.size() {
                    return Err(Error::Shape {
                        expected: domain.size(),
                        actual: weights.len(),
                    });
                }
                ProbVector::new(weights.clone())?
            }
        };
        let indices = |points: &[Vec<usize>]| {
            points
                .iter()
                .map(|p| domain.index(p))
                .collect::<Result<Vec<_>>>()
        };
        let target = match &self.dataset.target {
            TargetConfig::Planted {
                frequencies,
                amplitudes,
            } => planted_target(&domain, &kernel, &indices(frequencies)?, amplitudes)?,
            TargetConfig::Centers { points, weights } => {
                synth_target(&domain, &kernel, &indices(points)?, weights)?
            }
        };
        let dataset = DatasetSpec::new(
            density,
            target,
            self.dataset.lipschitz_f,
            self.dataset.lipschitz_q,
            self.dataset.seed,
        )?;
        Ok(Resolved {
            domain,
            kernel,
            dataset,
        })
    }

    fn pipeline(
        &self,
        resolved: &Resolved,
        sampler: SamplerKind,
        m: usize,
        seed: u64,
    ) -> PipelineConfig {
        PipelineConfig {
            kernel: resolved.kernel.clone(),
            dataset: resolved.dataset.clone(),
            n: self.dataset.n,
            sampler,
            eps: self.sampler.eps,
            delta: self.sampler.delta,
            m,
            iterations: self.learner.t,
            radius_const: self.learner.radius_const,
            schedule: self.learner.schedule,
            ridge: self.learner.ridge,
            delta_fail: self.learner.delta_fail,
            seed,
        }
    }
}

fn bump_density(domain: &GridDomain, center: &[usize], width: f64) -> Result<ProbVector> {
    if center.len() != domain.dim() {
        return Err(Error::Shape {
            expected: domain.dim(),
            actual: center.len(),
        });
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Argument(format!(
            "bump width must be positive, got {width}"
        )));
    }
    let side = domain.side();
    let weights = (0..domain.size())
        .map(|x| {
            let dist_sq: f64 = domain
                .coords(x)
                .iter()
                .zip(center)
                .map(|(&a, &c)| {
                    let gap = a.abs_diff(c % side);
                    gap.min(side - gap).pow(2) as f64
                })
                .sum();
            (-dist_sq / (width * width)).exp()
        })
        .collect();
    ProbVector::new(weights)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_manifest(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut out = create(dir, "manifest.toml")?;
    out.write_all(config.to_toml().as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Files and headline numbers of one `run`.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub model: Model,
    pub metrics: Metrics,
    /// TV between the empirical feature histogram and the tier's target law.
    pub empirical_tv: f64,
}

pub const RUN_FILES: [&str; 5] = [
    "features.csv",
    "distribution.csv",
    "metrics.csv",
    "ledger.csv",
    "manifest.toml",
];

/// Runs one pipeline at `learner.m` features and `learner.seed`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let resolved = config.resolve()?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let tier = config.sampler.tier;
    let seed = config.learner.seed;
    let (model, metrics) =
        learn_pipeline(&config.pipeline(&resolved, tier, config.learner.m, seed))?;
    let domain = resolved.domain;

    let mut out = csv::Writer::from_writer(create(dir, "features.csv")?);
    let mut header = vec!["index".to_string(), "v_index".to_string()];
    header.extend((0..domain.dim()).map(|d| format!("v_{d}")));
    header.extend(["coefficient", "q_value"].map(String::from));
    out.write_record(&header)?;
    for (i, ((&v, &a), &q)) in model
        .features
        .iter()
        .zip(&model.coefficients)
        .zip(&model.q_values)
        .enumerate()
    {
        let mut row = vec![i.to_string(), v.to_string()];
        row.extend(domain.frequency(v).iter().map(|c| c.to_string()));
        row.push(a.to_string());
        row.push(q.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;

    // the learner draws the same dataset from the same seed
    let data = sample_dataset(&resolved.dataset, config.dataset.n, resolved.dataset.seed)?;
    let qhat = ingest_samples(&domain, &data.points())?;
    let base = p_tau(&resolved.kernel, &domain)?;
    let aim = if tier.is_optimized() {
        FeatureSource::new(
            SamplerKind::Exact,
            &resolved.kernel,
            &domain,
            &qhat,
            config.sampler.eps,
            config.sampler.delta,
        )?
        .law()
        .to_vec()
    } else {
        base.probs().to_vec()
    };
    let source = FeatureSource::new(
        tier,
        &resolved.kernel,
        &domain,
        &qhat,
        config.sampler.eps,
        config.sampler.delta,
    )?;
    let mut rng = crate::seeded_rng(seed, 3);
    let mut counts = vec![0usize; domain.size()];
    for _ in 0..config.sampler.dist_samples {
        counts[source.draw(&mut rng)?.0] += 1;
    }
    let empirical: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / config.sampler.dist_samples as f64)
        .collect();
    let mut out = csv::Writer::from_writer(create(dir, "distribution.csv")?);
    let mut header = vec!["v_index".to_string()];
    header.extend((0..domain.dim()).map(|d| format!("v_{d}")));
    header.extend(["exact", "tier_law", "empirical", "p_tau"].map(String::from));
    out.write_record(&header)?;
    for v in 0..domain.size() {
        let mut row = vec![v.to_string()];
        row.extend(domain.frequency(v).iter().map(|c| c.to_string()));
        row.extend([aim[v], source.law()[v], empirical[v], base.probs()[v]].map(|p| p.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;

    let mut out = csv::Writer::from_writer(create(dir, "metrics.csv")?);
    out.write_record(Metrics::CSV_HEADER)?;
    out.write_record(metrics.csv_record())?;
    out.flush()?;

    CostLedger::write_csv(&metrics.ledgers, create(dir, "ledger.csv")?)?;
    write_manifest(config, dir)?;

    Ok(RunReport {
        files: RUN_FILES.iter().map(|f| dir.join(f)).collect(),
        empirical_tv: crate::total_variation(&empirical, &aim),
        model,
        metrics,
    })
}

/// Median feature count to reach the threshold for one sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSummary {
    pub sampler: SamplerKind,
    /// `None` when the median seed never reaches the threshold.
    pub median_m: Option<f64>,
    pub seeds_reached: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<Metrics>,
    pub summaries: Vec<SamplerSummary>,
    pub files: Vec<PathBuf>,
}

/// Median where `None` ranks above every value; even counts average the
/// middle pair.
pub fn median_reached(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by_key(|v| v.unwrap_or(usize::MAX));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid].map(|v| v as f64)
    } else {
        Some((sorted[mid - 1]? + sorted[mid]?) as f64 / 2.0)
    }
}

/// Sweeps `M` for the configured tier and the baseline over all seeds.
pub fn compare_m_requirements(config: &ExperimentConfig) -> Result<CompareReport> {
    let resolved = config.resolve()?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let mut samplers = vec![config.sampler.tier];
    if config.sampler.tier != SamplerKind::Baseline {
        samplers.push(SamplerKind::Baseline);
    }
    let sweep = config.sweep();
    let seeds: Vec<u64> = config.seeds().collect();
    let mut jobs = Vec::new();
    for &s in &samplers {
        for &m in &sweep {
            jobs.extend(seeds.iter().map(|&seed| (s, m, seed)));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(s, m, seed)| {
            learn_pipeline(&config.pipeline(&resolved, s, m, seed)).map(|(_, metrics)| metrics)
        })
        .collect::<Result<Vec<_>>>()?;

    let threshold = config.learner.threshold;
    let mut summaries = Vec::new();
    let mut curve = Vec::new();
    for &s in &samplers {
        let of = |m: usize, seed: u64| {
            rows.iter()
                .find(|r| r.sampler == s && r.m == m && r.seed == seed)
                .expect("every job produced a row")
        };
        let reached: Vec<Option<usize>> = seeds
            .iter()
            .map(|&seed| {
                sweep
                    .iter()
                    .copied()
                    .find(|&m| of(m, seed).final_error <= threshold)
            })
            .collect();
        summaries.push(SamplerSummary {
            sampler: s,
            median_m: median_reached(&reached),
            seeds_reached: reached.iter().flatten().count(),
            seeds: seeds.len(),
        });
        for &m in &sweep {
            let mut errors: Vec<f64> = seeds.iter().map(|&seed| of(m, seed).final_error).collect();
            errors.sort_by(f64::total_cmp);
            let mid = errors.len() / 2;
            let median = if errors.len() % 2 == 1 {
                errors[mid]
            } else {
                0.5 * (errors[mid - 1] + errors[mid])
            };
            curve.push((s, m, median));
        }
    }

    let mut out = csv::Writer::from_writer(create(dir, "comparison.csv")?);
    out.write_record(Metrics::CSV_HEADER)?;
    for row in &rows {
        out.write_record(row.csv_record())?;
    }
    out.flush()?;

    let mut out = csv::Writer::from_writer(create(dir, "curve.csv")?);
    out.write_record(["tier", "M", "median_error"])?;
    for (s, m, e) in &curve {
        out.write_record([s.name().to_string(), m.to_string(), e.to_string()])?;
    }
    out.flush()?;

    let mut out = csv::Writer::from_writer(create(dir, "summary.csv")?);
    out.write_record([
        "tier",
        "threshold",
        "median_m_to_threshold",
        "seeds_reached",
        "seeds",
    ])?;
    for s in &summaries {
        out.write_record([
            s.sampler.name().to_string(),
            threshold.to_string(),
            s.median_m
                .map_or_else(|| "unreached".to_string(), |m| m.to_string()),
            s.seeds_reached.to_string(),
            s.seeds.to_string(),
        ])?;
    }
    out.flush()?;
    write_manifest(config, dir)?;

    Ok(CompareReport {
        rows,
        summaries,
        files: [
            "comparison.csv",
            "curve.csv",
            "summary.csv",
            "manifest.toml",
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect(),
    })
}
