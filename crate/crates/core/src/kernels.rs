//! Translation-invariant kernels on the periodic grid.
//!
//! A kernel enters the rest of the crate only through its Fourier weight
//! `Q(v)` on the frequency lattice. Two factorizations of the Gram matrix are
//! provided: the DFT sandwich `F diag(Q) F^dagger`, and a brute-force
//! periodized sum of the closed-form kernel that serves as its oracle.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{argument, Error, Result};
use crate::grid::GridDomain;
use crate::C64;

/// Default truncation of the theta series.
pub const DEFAULT_THETA_TERMS: usize = 64;

/// Default lattice radius of [`gram_periodized`].
pub const DEFAULT_PERIOD_RADIUS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `k(u) = exp(-gamma |u|_2^2)`
    Gaussian,
    /// `k(u) = exp(-gamma |u|_1)`
    Laplacian,
    /// Fourier weight supplied directly.
    CustomWeight,
}

/// User-supplied Fourier weight over frequency coordinates.
///
/// Must be even, `w(v) = w(-v)`, for the kernel to be real.
type WeightFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomWeight(Arc<WeightFn>);

impl CustomWeight {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomWeight(..)")
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
    theta_terms: usize,
    custom: Option<CustomWeight>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if family == KernelFamily::CustomWeight {
            return Err(argument("custom kernels are built with KernelSpec::custom"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(argument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            family,
            gamma,
            theta_terms: DEFAULT_THETA_TERMS,
            custom: None,
        })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn laplacian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, gamma)
    }

    pub fn custom(weight: CustomWeight) -> Self {
        Self {
            family: KernelFamily::CustomWeight,
            gamma: 1.0,
            theta_terms: DEFAULT_THETA_TERMS,
            custom: Some(weight),
        }
    }

    /// Flat weight `Q = 1`, whose Gram matrix is the identity.
    pub fn delta() -> Self {
        Self::custom(CustomWeight::new(|_| 1.0))
    }

    pub fn with_theta_terms(mut self, terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(argument("theta_terms must be at least 1"));
        }
        self.theta_terms = terms;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta_terms(&self) -> usize {
        self.theta_terms
    }

    /// Fourier weight `Q(v)` at real frequency coordinates.
    pub fn q_tau_weight(&self, v: &[f64]) -> Result<f64> {
        let value = match self.family {
            KernelFamily::Gaussian => v
                .iter()
                .map(|&c| theta(PI * c, self.gamma, self.theta_terms))
                .product(),
            KernelFamily::Laplacian => {
                let (s, c) = (self.gamma.sinh(), self.gamma.cosh());
                v.iter().map(|&x| s / (c - (2.0 * PI * x).cos())).product()
            }
            KernelFamily::CustomWeight => {
                let w = self
                    .custom
                    .as_ref()
                    .expect("custom family carries a weight");
                (w.0)(v)
            }
        };
        if value.is_finite() && value > 0.0 {
            Ok(value)
        } else {
            Err(Error::Kernel(format!(
                "Fourier weight {value} at {v:?} is not positive"
            )))
        }
    }

    /// `Q(v)` for every frequency, in row-major order.
    pub fn q_tau_vector(&self, domain: &GridDomain) -> Result<Vec<f64>> {
        (0..domain.size())
            .map(|i| self.q_tau_weight(&domain.frequency(i)))
            .collect()
    }

    /// Largest Fourier weight; attained at zero for the closed-form families.
    pub fn q_tau_max(&self, domain: &GridDomain) -> Result<f64> {
        match self.family {
            KernelFamily::CustomWeight => Ok(self
                .q_tau_vector(domain)?
                .into_iter()
                .fold(f64::MIN, f64::max)),
            _ => self.q_tau_weight(&vec![0.0; domain.dim()]),
        }
    }

    /// Closed-form kernel `k(u)` at a real displacement.
    pub fn kernel_value(&self, u: &[f64]) -> Result<f64> {
        match self.family {
            KernelFamily::Gaussian => {
                Ok((-self.gamma * u.iter().map(|x| x * x).sum::<f64>()).exp())
            }
            KernelFamily::Laplacian => {
                Ok((-self.gamma * u.iter().map(|x| x.abs()).sum::<f64>()).exp())
            }
            KernelFamily::CustomWeight => Err(Error::Unsupported(
                "custom Fourier weights have no closed-form kernel".into(),
            )),
        }
    }

    /// Kernel with `k_r(r u) = k(u)`.
    pub fn rescaled(&self, r: f64) -> Result<Self> {
        let gamma = match self.family {
            KernelFamily::Gaussian => self.gamma / (r * r),
            KernelFamily::Laplacian => self.gamma / r,
            KernelFamily::CustomWeight => {
                return Err(Error::Unsupported(
                    "custom kernels cannot be rescaled".into(),
                ))
            }
        };
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }
}

/// `1 + 2 sum_{n=1}^{terms} q^{n^2} cos(2 n u)` with nome `q = e^{-gamma}`.
///
/// Below `gamma = pi` the series is summed in its Poisson-dual form
/// `sqrt(pi/gamma) sum_k e^{-(u - k pi)^2 / gamma}`, whose terms are all
/// positive; the direct form cancels to roundoff for wide kernels.
fn theta(u: f64, gamma: f64, terms: usize) -> f64 {
    if gamma >= PI {
        return 1.0
            + 2.0
                * (1..=terms)
                    .map(|n| {
                        let n = n as f64;
                        (-gamma * n * n).exp() * (2.0 * n * u).cos()
                    })
                    .sum::<f64>();
    }
    let nearest = (u / PI).round();
    let terms = terms as i64;
    (PI / gamma).sqrt()
        * (-terms..=terms)
            .map(|k| {
                let shift = u - (nearest + k as f64) * PI;
                (-shift * shift / gamma).exp()
            })
            .sum::<f64>()
}

/// A probability vector over grid or frequency indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and normalizes the sum to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(argument("probability vector is empty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(argument("probabilities must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(argument("probability vector has zero mass"));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_variation(&self, other: &ProbVector) -> f64 {
        crate::total_variation(&self.0, &other.0)
    }
}

/// `P(v) = Q(v) / sum Q`, the data-independent feature law.
pub fn p_tau(kernel: &KernelSpec, domain: &GridDomain) -> Result<ProbVector> {
    ProbVector::new(kernel.q_tau_vector(domain)?)
}

/// A square complex matrix acting on one register.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    entries: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Numeric("operator has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let d: Vec<C64> = diagonal.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self {
            entries: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "comparing operators of unequal size"
        );
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..=i).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let product = self.entries.adjoint() * &self.entries;
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let expect = if i == j { 1.0 } else { 0.0 };
                (product[(i, j)] - C64::new(expect, 0.0)).norm() <= tol
            })
        })
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.entries
            .clone()
            .singular_values()
            .iter()
            .fold(0.0, |acc, &s| acc.max(s))
    }

    /// Writes `row,col,re,im` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["row", "col", "re", "im"])?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.get(i, j);
                out.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Unitary `<v|F|x> = G^{-D/2} exp(-2 pi i v.x / G)`.
pub fn dft_matrix(domain: &GridDomain) -> DenseOperator {
    let n = domain.size();
    let g = domain.side();
    let scale = (n as f64).sqrt().recip();
    let roots: Vec<C64> = (0..g)
        .map(|k| C64::from_polar(scale, -2.0 * PI * k as f64 / g as f64))
        .collect();
    let entries = DMatrix::from_fn(n, n, |v, x| roots[domain.phase_units(v, x)]);
    DenseOperator { entries }
}

/// Gram matrix `F diag(Q) F^dagger` of the periodized kernel.
///
/// `F` is unitary, so the diagonal holds the raw weights `Q(v)`; the `G^{-D}`
/// normalization lives inside `F`.
pub fn gram_reconstructed(kernel: &KernelSpec, domain: &GridDomain) -> Result<DenseOperator> {
    let f = dft_matrix(domain);
    sandwich(kernel, domain, f.entries(), &f.entries.adjoint())
}

/// The opposite ordering `F^dagger diag(Q) F`; equal for even weights.
pub fn gram_reconstructed_adjoint(
    kernel: &KernelSpec,
    domain: &GridDomain,
) -> Result<DenseOperator> {
    let f = dft_matrix(domain);
    sandwich(kernel, domain, &f.entries.adjoint(), f.entries())
}

fn sandwich(
    kernel: &KernelSpec,
    domain: &GridDomain,
    left: &DMatrix<C64>,
    right: &DMatrix<C64>,
) -> Result<DenseOperator> {
    let q = kernel.q_tau_vector(domain)?;
    let mut scaled = left.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::new(q[j], 0.0);
    }
    Ok(DenseOperator {
        entries: scaled * right,
    })
}

/// `k(delta)` for every grid displacement, from the Fourier weights.
///
/// Equal to the first column of [`gram_reconstructed`] in O(n^2) time.
pub fn periodic_kernel_values(kernel: &KernelSpec, domain: &GridDomain) -> Result<Vec<f64>> {
    let q = kernel.q_tau_vector(domain)?;
    let g = domain.side() as f64;
    let n = domain.size() as f64;
    Ok((0..domain.size())
        .map(|delta| {
            q.iter()
                .enumerate()
                .map(|(v, &w)| w * (2.0 * PI * domain.phase_units(v, delta) as f64 / g).cos())
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Brute-force `k(x', x) = sum_{|n|_inf <= n_max} k(x' - x - G n)`.
pub fn gram_periodized(
    kernel: &KernelSpec,
    domain: &GridDomain,
    n_max: usize,
) -> Result<DenseOperator> {
    if n_max == 0 {
        return Err(argument("n_max must be at least 1"));
    }
    kernel.kernel_value(&[0.0])?;
    let dim = domain.dim();
    let side = domain.side() as i64;
    let width = 2 * n_max + 1;
    let shifts = width.pow(dim as u32);

    // The sum depends only on the signed per-axis offset x' - x.
    let span = (2 * side - 1) as usize;
    let mut cache = vec![f64::NAN; span.pow(dim as u32)];
    let mut offset = vec![0f64; dim];
    let mut value_at = |raw: &[i64]| -> Result<f64> {
        let key = raw
            .iter()
            .fold(0usize, |acc, &d| acc * span + (d + side - 1) as usize);
        if cache[key].is_nan() {
            let mut total = 0.0;
            for s in 0..shifts {
                let mut rest = s;
                for d in (0..dim).rev() {
                    let n = (rest % width) as i64 - n_max as i64;
                    rest /= width;
                    offset[d] = (raw[d] - side * n) as f64;
                }
                total += kernel.kernel_value(&offset)?;
            }
            cache[key] = total;
        }
        Ok(cache[key])
    };

    let n = domain.size();
    let coords: Vec<Vec<i64>> = (0..n)
        .map(|i| domain.coords(i).into_iter().map(|c| c as i64).collect())
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    let mut raw = vec![0i64; dim];
    for a in 0..n {
        for b in 0..n {
            for d in 0..dim {
                raw[d] = coords[a][d] - coords[b][d];
            }
            entries[(a, b)] = C64::new(value_at(&raw)?, 0.0);
        }
    }
    Ok(DenseOperator { entries })
}
