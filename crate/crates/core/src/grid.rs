//! The periodic lattice, empirical data distributions, RKHS targets and
//! synthetic datasets.
//!
//! Points of `{0, .., G-1}^D` and frequencies of `V_G = {0, 1/G, ..}^D` share
//! one row-major enumeration: axis 0 is the most significant digit.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{argument, Error, Result};
use crate::kernels::{periodic_kernel_values, KernelSpec, ProbVector};

/// Default cap on the number of grid points `G^D`.
pub const DEFAULT_MAX_SIZE: usize = 4096;

/// Environment variable that overrides [`DEFAULT_MAX_SIZE`].
pub const MAX_SIZE_ENV: &str = "OPTRF_MAX_DIM";

/// Cap on `G^D` in effect for this process.
pub fn size_cap() -> usize {
    std::env::var(MAX_SIZE_ENV)
        .ok()
        .and_then(|raw| raw.trim().parse::<usize>().ok())
        .filter(|&cap| cap > 0)
        .unwrap_or(DEFAULT_MAX_SIZE)
}

/// The lattice `{0, .., G-1}^D` together with its frequency lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDomain {
    dim: usize,
    side: usize,
    size: usize,
}

impl GridDomain {
    /// Domain with `side^dim` points, bounded by [`size_cap`].
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        Self::with_cap(dim, side, size_cap())
    }

    pub fn with_cap(dim: usize, side: usize, cap: usize) -> Result<Self> {
        if dim == 0 {
            return Err(argument("dimension D must be at least 1"));
        }
        if side < 2 {
            return Err(argument(format!("side G must be at least 2, got {side}")));
        }
        let mut size = 1usize;
        for _ in 0..dim {
            size = match size.checked_mul(side) {
                Some(s) if s <= cap => s,
                _ => {
                    return Err(Error::Size {
                        size: side.checked_pow(dim as u32).unwrap_or(usize::MAX),
                        cap,
                    })
                }
            };
        }
        Ok(Self { dim, side, size })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of grid points, `G^D`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major index of integer coordinates.
    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: coords.len(),
            });
        }
        coords.iter().try_fold(0usize, |acc, &c| {
            if c >= self.side {
                Err(Error::Domain(format!(
                    "coordinate {c} outside 0..{}",
                    self.side
                )))
            } else {
                Ok(acc * self.side + c)
            }
        })
    }

    /// Integer coordinates of a row-major index.
    pub fn coords(&self, index: usize) -> Vec<usize> {
        debug_assert!(index < self.size);
        let mut out = vec![0; self.dim];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.side;
            rest /= self.side;
        }
        out
    }

    /// Frequency `v_G = index / G` as real coordinates.
    pub fn frequency(&self, index: usize) -> Vec<f64> {
        let g = self.side as f64;
        self.coords(index)
            .into_iter()
            .map(|c| c as f64 / g)
            .collect()
    }

    /// Checks that a row-major index lies on the grid.
    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.size {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "index {index} outside 0..{}",
                self.size
            )))
        }
    }

    /// `(v . x) mod G` for two row-major indices, computed exactly.
    ///
    /// The phase of `e^{-2 pi i v.x / G}` is this value divided by `G`.
    pub fn phase_units(&self, v: usize, x: usize) -> usize {
        let (mut v, mut x) = (v, x);
        let mut acc = 0usize;
        for _ in 0..self.dim {
            acc = (acc + (v % self.side) * (x % self.side)) % self.side;
            v /= self.side;
            x /= self.side;
        }
        acc
    }

    /// Index of `a - b` with per-axis wraparound.
    pub fn difference(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        let mut out = 0usize;
        let mut place = 1usize;
        for _ in 0..self.dim {
            let d = (a % self.side + self.side - b % self.side) % self.side;
            out += d * place;
            place *= self.side;
            a /= self.side;
            b /= self.side;
        }
        out
    }

    /// Nearest grid point to real coordinates; ties go to the smaller index.
    pub fn nearest(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: point.len(),
            });
        }
        let coords = point
            .iter()
            .map(|&p| {
                if !p.is_finite() || p < -0.5 || p > self.side as f64 - 0.5 {
                    return Err(Error::Domain(format!("coordinate {p} not near the grid")));
                }
                let below = p.floor();
                let c = if p - below > 0.5 { below + 1.0 } else { below };
                Ok(c.max(0.0) as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        self.index(&coords)
    }
}

/// Empirical distribution `n(x)/N` of observed grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    counts: Vec<usize>,
    total: usize,
    weights: Vec<f64>,
}

impl EmpiricalDist {
    /// Weights of a count vector over the whole grid.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(argument("empirical distribution needs at least one sample"));
        }
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            counts,
            total,
            weights,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of ingested samples `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Counts grid points given as row-major indices.
pub fn ingest_samples(domain: &GridDomain, points: &[usize]) -> Result<EmpiricalDist> {
    if points.is_empty() {
        return Err(argument("no samples to ingest"));
    }
    let mut counts = vec![0usize; domain.size()];
    for &p in points {
        domain.check_index(p)?;
        counts[p] += 1;
    }
    EmpiricalDist::from_counts(counts)
}

/// `f(x) = sum_j beta_j k(x, c_j)` in the RKHS of a periodic kernel.
#[derive(Debug, Clone)]
pub struct RkhsFunction {
    domain: GridDomain,
    kernel: KernelSpec,
    centers: Vec<usize>,
    weights: Vec<f64>,
    rkhs_norm: f64,
    values: Vec<f64>,
}

impl RkhsFunction {
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rkhs_norm(&self) -> f64 {
        self.rkhs_norm
    }

    /// `f(x)` at a row-major grid index.
    pub fn evaluate(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// `f` tabulated over the whole grid.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Builds a target from centers and raw weights, scaled so the RKHS norm is
/// `min(1, original)`.
pub fn synth_target(
    domain: &GridDomain,
    kernel: &KernelSpec,
    centers: &[usize],
    raw_weights: &[f64],
) -> Result<RkhsFunction> {
    if centers.len() != raw_weights.len() {
        return Err(Error::Shape {
            expected: centers.len(),
            actual: raw_weights.len(),
        });
    }
    if raw_weights.iter().all(|&w| w == 0.0) {
        return Err(argument("target weights are all zero"));
    }
    if raw_weights.iter().any(|w| !w.is_finite()) {
        return Err(argument("target weights must be finite"));
    }
    for &c in centers {
        domain.check_index(c)?;
    }
    let row = periodic_kernel_values(kernel, domain)?;
    let gram = |a: usize, b: usize| row[domain.difference(a, b)];

    let mut norm_sq = 0.0;
    for (i, &ci) in centers.iter().enumerate() {
        for (j, &cj) in centers.iter().enumerate() {
            norm_sq += raw_weights[i] * raw_weights[j] * gram(ci, cj);
        }
    }
    let norm = norm_sq.max(0.0).sqrt();
    if norm <= 1e-12 {
        return Err(argument("target is the zero function"));
    }
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    let weights: Vec<f64> = raw_weights.iter().map(|w| w * scale).collect();
    let values = (0..domain.size())
        .map(|x| {
            centers
                .iter()
                .zip(&weights)
                .map(|(&c, &w)| w * gram(x, c))
                .sum()
        })
        .collect();
    Ok(RkhsFunction {
        domain: *domain,
        kernel: kernel.clone(),
        centers: centers.to_vec(),
        weights,
        rkhs_norm: norm * scale,
        values,
    })
}

/// Target `sum_j a_j cos(2 pi v_j . x)` over planted frequencies, written as
/// a kernel expansion over every grid point and normalized like
/// [`synth_target`].
pub fn planted_target(
    domain: &GridDomain,
    kernel: &KernelSpec,
    frequencies: &[usize],
    amplitudes: &[f64],
) -> Result<RkhsFunction> {
    if frequencies.len() != amplitudes.len() {
        return Err(Error::Shape {
            expected: frequencies.len(),
            actual: amplitudes.len(),
        });
    }
    for &v in frequencies {
        domain.check_index(v)?;
    }
    let n = domain.size();
    let side = domain.side() as f64;
    let values = DVector::from_fn(n, |x, _| {
        frequencies
            .iter()
            .zip(amplitudes)
            .map(|(&v, &a)| a * (2.0 * PI * domain.phase_units(v, x) as f64 / side).cos())
            .sum::<f64>()
    });
    let row = periodic_kernel_values(kernel, domain)?;
    let gram = DMatrix::from_fn(n, n, |a, b| row[domain.difference(a, b)]);
    let weights = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("kernel Gram matrix is not positive definite".into()))?
        .solve(&values);
    let centers: Vec<usize> = (0..n).collect();
    synth_target(domain, kernel, &centers, weights.as_slice())
}

/// Everything needed to draw a synthetic dataset.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub domain: GridDomain,
    pub density: ProbVector,
    pub target: RkhsFunction,
    pub lipschitz_f: f64,
    pub lipschitz_q: f64,
    pub seed: u64,
    /// Product of every effective per-axis rescaling applied so far.
    pub scale: f64,
}

impl DatasetSpec {
    pub fn new(
        density: ProbVector,
        target: RkhsFunction,
        lipschitz_f: f64,
        lipschitz_q: f64,
        seed: u64,
    ) -> Result<Self> {
        let domain = *target.domain();
        if density.len() != domain.size() {
            return Err(Error::Shape {
                expected: domain.size(),
                actual: density.len(),
            });
        }
        if !(lipschitz_f >= 0.0 && lipschitz_q >= 0.0) {
            return Err(argument("Lipschitz constants must be nonnegative"));
        }
        Ok(Self {
            domain,
            density,
            target,
            lipschitz_f,
            lipschitz_q,
            seed,
            scale: 1.0,
        })
    }
}

/// Stretches the data by `r` per axis: `G -> rG`.
///
/// Each old cell's mass is split evenly over the new cells that map back to
/// it, kernel bandwidth stretches with the data, and target centers move to
/// `r c` so that `f_r(r x) = f(x)`.
pub fn rescale(spec: &DatasetSpec, r: f64) -> Result<DatasetSpec> {
    const TOLERANCE: f64 = 1e-9;
    if !(r.is_finite() && r > 1.0) {
        return Err(argument(format!("rescale factor must exceed 1, got {r}")));
    }
    let old = spec.domain;
    let stretched = r * old.side() as f64;
    let new_side = stretched.round();
    if (stretched - new_side).abs() > TOLERANCE || new_side as usize <= old.side() {
        return Err(argument(format!(
            "r*G = {stretched} is not an integer larger than G = {}",
            old.side()
        )));
    }
    let new_side = new_side as usize;
    let domain = GridDomain::new(old.dim(), new_side)?;
    let effective = new_side as f64 / old.side() as f64;

    let parent = |z: usize| -> usize {
        let coords: Vec<usize> = domain
            .coords(z)
            .into_iter()
            .map(|c| c * old.side() / new_side)
            .collect();
        old.index(&coords)
            .expect("parent cell lies on the old grid")
    };
    let parents: Vec<usize> = (0..domain.size()).map(parent).collect();
    let mut children = vec![0usize; old.size()];
    for &p in &parents {
        children[p] += 1;
    }
    let density = ProbVector::new(
        parents
            .iter()
            .map(|&p| spec.density.probs()[p] / children[p] as f64)
            .collect(),
    )?;

    let kernel = spec.target.kernel().rescaled(effective)?;
    let centers = spec
        .target
        .centers()
        .iter()
        .map(|&c| {
            let moved: Vec<f64> = old
                .coords(c)
                .into_iter()
                .map(|x| x as f64 * effective)
                .collect();
            domain.nearest(&moved)
        })
        .collect::<Result<Vec<_>>>()?;
    let target = synth_target(&domain, &kernel, &centers, spec.target.weights())?;

    Ok(DatasetSpec {
        domain,
        density,
        target,
        lipschitz_f: spec.lipschitz_f / effective,
        lipschitz_q: spec.lipschitz_q / (effective * effective),
        seed: spec.seed,
        scale: spec.scale * effective,
    })
}

/// Noiseless examples `(x_n, f(x_n))` drawn IID from the spec's density.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<(usize, f64)>,
    pub spec: DatasetSpec,
}

impl Dataset {
    pub fn points(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(x, _)| x).collect()
    }

    /// Writes `x_0,..,x_{D-1},y` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let domain = &self.spec.domain;
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..domain.dim()).map(|d| format!("x_{d}")).collect();
        header.push("y".into());
        out.write_record(&header)?;
        for &(x, y) in &self.pairs {
            let mut row: Vec<String> = domain.coords(x).iter().map(|c| c.to_string()).collect();
            row.push(y.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads `(index, y)` pairs written by [`Dataset::write_csv`].
pub fn read_dataset_csv<R: Read>(domain: &GridDomain, reader: R) -> Result<Vec<(usize, f64)>> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input.headers()?.clone();
    if headers.len() != domain.dim() + 1 {
        return Err(Error::Shape {
            expected: domain.dim() + 1,
            actual: headers.len(),
        });
    }
    let mut pairs = Vec::new();
    for record in input.records() {
        let record = record?;
        let coords = record
            .iter()
            .take(domain.dim())
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Data(format!("bad coordinate: {e}")))?;
        let y = record[domain.dim()]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Data(format!("bad label: {e}")))?;
        pairs.push((domain.index(&coords)?, y));
    }
    Ok(pairs)
}

/// Draws `n` IID examples; a pure function of `(spec, n, seed)`.
pub fn sample_dataset(spec: &DatasetSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(argument("dataset size N must be at least 1"));
    }
    let sampler = WeightedIndex::new(spec.density.probs())
        .map_err(|e| argument(format!("density cannot be sampled: {e}")))?;
    let mut rng = crate::seeded_rng(seed, 0);
    let pairs = (0..n)
        .map(|_| {
            let x = sampler.sample(&mut rng);
            (x, spec.target.evaluate(x))
        })
        .collect();
    Ok(Dataset {
        pairs,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplace() -> KernelSpec {
        KernelSpec::laplacian(1.0).unwrap()
    }

    #[test]
    fn planted_target_is_proportional_to_cosines() {
        let d = GridDomain::new(1, 16).unwrap();
        let f = planted_target(&d, &laplace(), &[3, 5], &[1.0, -0.5]).unwrap();
        assert!(f.rkhs_norm() <= 1.0 + 1e-12);
        let raw = |x: usize| {
            let t = 2.0 * std::f64::consts::PI * x as f64 / 16.0;
            (3.0 * t).cos() - 0.5 * (5.0 * t).cos()
        };
        let ratio = f.evaluate(1) / raw(1);
        for x in 0..16 {
            assert_abs_diff_eq!(f.evaluate(x), ratio * raw(x), epsilon = 1e-10);
        }
        assert!(planted_target(&d, &laplace(), &[3], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn domain_basics() {
        let d = GridDomain::new(1, 4).unwrap();
        assert_eq!(d.size(), 4);
        let freqs: Vec<f64> = (0..4).map(|i| d.frequency(i)[0]).collect();
        assert_eq!(freqs, vec![0.0, 0.25, 0.5, 0.75]);

        let d2 = GridDomain::new(2, 4).unwrap();
        assert_eq!(d2.size(), 16);
        assert_eq!(d2.index(&[1, 2]).unwrap(), 6);
        assert_eq!(d2.coords(6), vec![1, 2]);

        assert_eq!(GridDomain::with_cap(3, 16, 4096).unwrap().size(), 4096);
        assert!(matches!(
            GridDomain::with_cap(3, 17, 4096),
            Err(Error::Size { .. })
        ));
        assert!(matches!(GridDomain::new(0, 4), Err(Error::Argument(_))));
        assert!(matches!(GridDomain::new(1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn phases_and_differences() {
        let d = GridDomain::new(2, 4).unwrap();
        let v = d.index(&[1, 3]).unwrap();
        let x = d.index(&[2, 3]).unwrap();
        assert_eq!(d.phase_units(v, x), (2 + 9) % 4);
        let diff = d.difference(v, x);
        assert_eq!(d.coords(diff), vec![3, 0]);
    }

    #[test]
    fn nearest_breaks_ties_downward() {
        let d = GridDomain::new(1, 8).unwrap();
        assert_eq!(d.nearest(&[2.5]).unwrap(), 2);
        assert_eq!(d.nearest(&[2.51]).unwrap(), 3);
        assert_eq!(d.nearest(&[-0.5]).unwrap(), 0);
        assert!(d.nearest(&[7.6]).is_err());
    }

    #[test]
    fn ingest_counts() {
        let d = GridDomain::new(1, 4).unwrap();
        let q = ingest_samples(&d, &[0, 0, 1, 3]).unwrap();
        assert_eq!(q.weights(), &[0.5, 0.25, 0.0, 0.25]);
        let point = ingest_samples(&d, &[2]).unwrap();
        assert_eq!(point.weights(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(ingest_samples(&d, &[]), Err(Error::Argument(_))));
        assert!(matches!(ingest_samples(&d, &[4]), Err(Error::Domain(_))));
    }

    #[test]
    fn ingest_tracks_generating_density() {
        let d = GridDomain::new(1, 8).unwrap();
        let density: Vec<f64> = (1..=8).map(|i| i as f64 / 36.0).collect();
        let target = synth_target(&d, &laplace(), &[0], &[1.0]).unwrap();
        let spec = DatasetSpec::new(
            ProbVector::new(density.clone()).unwrap(),
            target,
            0.0,
            0.0,
            7,
        )
        .unwrap();
        let data = sample_dataset(&spec, 10_000, 7).unwrap();
        let q = ingest_samples(&d, &data.points()).unwrap();
        for (a, b) in q.weights().iter().zip(&density) {
            assert!((a - b).abs() <= 0.02);
        }
    }

    #[test]
    fn single_center_norm() {
        let d = GridDomain::new(1, 8).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let f = synth_target(&d, &k, &[3], &[1.0]).unwrap();
        let kcc = periodic_kernel_values(&k, &d).unwrap()[0];
        assert!(kcc >= 1.0);
        let raw = kcc.sqrt();
        assert_abs_diff_eq!(f.rkhs_norm(), raw.min(1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.weights()[0], 1.0 / raw.max(1.0), epsilon = 1e-12);

        let small = synth_target(&d, &k, &[3], &[0.1]).unwrap();
        assert_abs_diff_eq!(small.rkhs_norm(), 0.1 * raw, epsilon = 1e-12);

        let wide = KernelSpec::laplacian(1.0).unwrap();
        let g = synth_target(&d, &wide, &[3], &[1.0]).unwrap();
        let kcc = periodic_kernel_values(&wide, &d).unwrap()[0];
        assert!(kcc > 1.0);
        assert_abs_diff_eq!(g.rkhs_norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.evaluate(3), kcc.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_targets_rejected() {
        let d = GridDomain::new(1, 8).unwrap();
        assert!(synth_target(&d, &laplace(), &[1], &[0.0]).is_err());
        assert!(synth_target(&d, &laplace(), &[2, 2], &[1.0, -1.0]).is_err());
    }

    fn uniform_spec(side: usize) -> DatasetSpec {
        let d = GridDomain::new(1, side).unwrap();
        let target = synth_target(&d, &laplace(), &[1, 2], &[0.5, -0.25]).unwrap();
        let density = ProbVector::uniform(d.size());
        DatasetSpec::new(density, target, 1.0, 0.16, 3).unwrap()
    }

    #[test]
    fn rescale_bookkeeping() {
        let spec = uniform_spec(4);
        let doubled = rescale(&spec, 2.0).unwrap();
        assert_eq!(doubled.domain.side(), 8);
        assert_abs_diff_eq!(doubled.lipschitz_f, 0.5, epsilon = 1e-15);
        let quad = rescale(&spec, 4.0).unwrap();
        assert_abs_diff_eq!(quad.lipschitz_q, 0.01, epsilon = 1e-15);
        assert!(matches!(
            rescale(&spec, 1.0 + 1e-12),
            Err(Error::Argument(_))
        ));
        assert!(matches!(rescale(&spec, 1.1), Err(Error::Argument(_))));
    }

    #[test]
    fn rescale_preserves_target_on_stretched_points() {
        let spec = uniform_spec(4);
        let r = rescale(&spec, 3.0).unwrap();
        for x in 0..4 {
            assert_abs_diff_eq!(
                r.target.evaluate(3 * x),
                spec.target.evaluate(x),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            r.target.rkhs_norm(),
            spec.target.rkhs_norm(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(r.density.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dataset_determinism_and_point_mass() {
        let spec = uniform_spec(8);
        let a = sample_dataset(&spec, 50, 1).unwrap();
        let b = sample_dataset(&spec, 50, 1).unwrap();
        assert_eq!(a.pairs, b.pairs);

        let mut mass = vec![0.0; 8];
        mass[3] = 1.0;
        let point = DatasetSpec::new(
            ProbVector::new(mass).unwrap(),
            spec.target.clone(),
            0.0,
            0.0,
            0,
        )
        .unwrap();
        let data = sample_dataset(&point, 5, 9).unwrap();
        assert!(data
            .pairs
            .iter()
            .all(|&(x, y)| x == 3 && y == spec.target.evaluate(3)));
    }

    #[test]
    fn uniform_frequencies() {
        let spec = uniform_spec(8);
        let data = sample_dataset(&spec, 10_000, 1).unwrap();
        let q = ingest_samples(&spec.domain, &data.points()).unwrap();
        assert!(q.weights().iter().all(|w| (w - 0.125).abs() <= 0.02));
    }

    #[test]
    fn csv_round_trip() {
        let spec = uniform_spec(8);
        let data = sample_dataset(&spec, 20, 2).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,y\n"));
        let back = read_dataset_csv(&spec.domain, buf.as_slice()).unwrap();
        assert_eq!(back, data.pairs);
    }
}
