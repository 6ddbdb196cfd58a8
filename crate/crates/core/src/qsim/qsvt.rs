//! Polynomial inverse square root of a block-encoded operator.
//!
//! The transform is applied to the eigenvalues of the encoded Hermitian
//! block and embedded in a one-qubit unitary dilation; the number of
//! block-encoding uses a phase-factor circuit would need equals the degree.

use nalgebra::{DMatrix, SymmetricEigen};

use super::block::BlockEncoding;
use super::circuit::{Circuit, Gate};
use crate::error::{argument, Error, Result};
use crate::kernels::DenseOperator;
use crate::C64;

/// Points in the uniform grid used to measure the sup error.
pub const SUP_GRID: usize = 10_000;

const MAX_DEGREE: usize = 100_000;

/// Chebyshev approximant of `scale * x^{-1/2}` on `[domain_min, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvSqrtPoly {
    coefficients: Vec<f64>,
    domain_min: f64,
    scale: f64,
    sup_error: f64,
}

impl InvSqrtPoly {
    /// Lowest-degree interpolant whose grid sup error is at most `delta`.
    ///
    /// The scale `(1 - delta)/sqrt(kappa)` keeps `|p| <= 1` on the interval.
    pub fn fit(kappa: f64, delta: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 1.0) {
            return Err(argument(format!("kappa must be at least 1, got {kappa}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(argument(format!("delta must lie in (0, 1), got {delta}")));
        }
        let domain_min = kappa.recip();
        let scale = (1.0 - delta) / kappa.sqrt();
        for degree in 0..=MAX_DEGREE {
            let mut poly = Self {
                coefficients: interpolate(|x| scale / x.sqrt(), domain_min, degree),
                domain_min,
                scale,
                sup_error: 0.0,
            };
            poly.sup_error = poly.grid_error();
            if poly.sup_error <= delta {
                return Ok(poly);
            }
        }
        Err(Error::Numeric(format!(
            "no polynomial up to degree {MAX_DEGREE} reaches {delta}"
        )))
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `1/kappa`
    pub fn domain_min(&self) -> f64 {
        self.domain_min
    }

    /// The constant `c` in `c * x^{-1/2}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sup_error(&self) -> f64 {
        self.sup_error
    }

    /// Clenshaw evaluation at `x` in `[domain_min, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let t = to_unit(x, self.domain_min);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coefficients[0]
    }

    /// Max `|p(x) - scale x^{-1/2}|` over [`SUP_GRID`] uniform points.
    pub fn grid_error(&self) -> f64 {
        let a = self.domain_min;
        (0..SUP_GRID)
            .map(|i| {
                let x = if SUP_GRID == 1 {
                    a
                } else {
                    a + (1.0 - a) * i as f64 / (SUP_GRID - 1) as f64
                };
                (self.evaluate(x) - self.scale / x.sqrt()).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn to_unit(x: f64, a: f64) -> f64 {
    if 1.0 - a <= f64::EPSILON {
        0.0
    } else {
        ((2.0 * x - (1.0 + a)) / (1.0 - a)).clamp(-1.0, 1.0)
    }
}

/// Coefficients of the degree-`d` interpolant at Chebyshev points of the first kind.
fn interpolate(f: impl Fn(f64) -> f64, a: f64, degree: usize) -> Vec<f64> {
    let nodes = degree + 1;
    let m = nodes as f64;
    let samples: Vec<f64> = (0..nodes)
        .map(|k| {
            let t = (std::f64::consts::PI * (k as f64 + 0.5) / m).cos();
            f(0.5 * ((1.0 - a) * t + (1.0 + a)))
        })
        .collect();
    (0..nodes)
        .map(|j| {
            let sum: f64 = samples
                .iter()
                .enumerate()
                .map(|(k, s)| s * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / m).cos())
                .sum();
            if j == 0 {
                sum / m
            } else {
                2.0 * sum / m
            }
        })
        .collect()
}

/// Eigenvalues may sit this far outside `[1/kappa, 1]` before it is an error.
const SPECTRUM_SLACK: f64 = 1e-12;

/// Block encoding of `c A^{-1/2}` for the Hermitian operator `A` encoded by `be`.
///
/// The output layout is `[system, ancilla qubit]` with the dilation
/// `[[B, S], [S, -B]]`, `B = p(A)`, `S = sqrt(I - B^2)`.
pub fn qsvt_inv_sqrt(
    be: &BlockEncoding,
    kappa: f64,
    delta: f64,
) -> Result<(BlockEncoding, InvSqrtPoly)> {
    let a = be.encoded();
    if !a.is_hermitian(1e-10) {
        return Err(argument("inverse square root needs a Hermitian block"));
    }
    let eig = SymmetricEigen::new(a.entries().clone());
    let floor = kappa.recip();
    let lowest = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let highest = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lowest < floor - SPECTRUM_SLACK {
        return Err(Error::Condition {
            min_eigenvalue: lowest,
            floor,
        });
    }
    if highest > 1.0 + SPECTRUM_SLACK {
        return Err(argument(format!("eigenvalue {highest} exceeds 1")));
    }
    let poly = InvSqrtPoly::fit(kappa, delta)?;

    let n = a.dim();
    let lambdas: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|l| l.clamp(floor, 1.0))
        .collect();
    let func = |g: &dyn Fn(f64) -> f64| -> DMatrix<C64> {
        let mut scaled = eig.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::new(g(lambdas[j]), 0.0);
        }
        scaled * eig.eigenvectors.adjoint()
    };
    let values: Vec<f64> = lambdas.iter().map(|&l| poly.evaluate(l)).collect();
    if let Some(bad) = values.iter().find(|p| p.abs() > 1.0) {
        return Err(Error::Numeric(format!(
            "polynomial value {bad} leaves the unit interval"
        )));
    }
    let b = func(&|l| poly.evaluate(l));
    let s = func(&|l| (1.0 - poly.evaluate(l).powi(2)).max(0.0).sqrt());
    let dilation = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (i, p) = (r / 2, r % 2);
        let (j, q) = (c / 2, c % 2);
        match (p, q) {
            (0, 0) => b[(i, j)],
            (1, 1) => -b[(i, j)],
            _ => s[(i, j)],
        }
    });
    let mut circuit = Circuit::new(vec![n, 2]);
    circuit.push(Gate::Operator {
        registers: vec![0, 1],
        matrix: dilation,
    })?;
    let encoding = BlockEncoding::from_circuit(circuit, 1.0, 1, delta)?;
    let target = DenseOperator::new(func(&|l| poly.scale() / l.sqrt()))?;
    encoding.verify(&target)?;
    Ok((encoding, poly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diagonal_encoding(diag: &[f64]) -> BlockEncoding {
        let n = diag.len();
        // a dilation of the diagonal itself, so the block is exact
        let matrix = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (i, p) = (r / 2, r % 2);
            let (j, q) = (c / 2, c % 2);
            if i != j {
                return C64::new(0.0, 0.0);
            }
            let (x, y) = (diag[i], (1.0 - diag[i] * diag[i]).sqrt());
            C64::new(
                match (p, q) {
                    (0, 0) => x,
                    (1, 1) => -x,
                    _ => y,
                },
                0.0,
            )
        });
        let mut c = Circuit::new(vec![n, 2]);
        c.push(Gate::Operator {
            registers: vec![0, 1],
            matrix,
        })
        .unwrap();
        BlockEncoding::from_circuit(c, 1.0, 1, 0.0).unwrap()
    }

    #[test]
    fn sup_error_and_bound() {
        for kappa in [2.0, 4.0, 8.0, 16.0] {
            let p = InvSqrtPoly::fit(kappa, 1e-3).unwrap();
            assert!(p.sup_error() <= 1e-3);
            assert!(p.grid_error() <= 1e-3);
            assert_abs_diff_eq!(p.evaluate(1.0 / kappa), 1.0 - 1e-3, epsilon = 1e-3);
        }
        // one degree less misses the tolerance, so the fit is minimal
        let p = InvSqrtPoly::fit(4.0, 1e-3).unwrap();
        let shorter = InvSqrtPoly {
            coefficients: interpolate(|x| p.scale / x.sqrt(), p.domain_min, p.degree() - 1),
            ..p.clone()
        };
        assert!(shorter.grid_error() > 1e-3);
    }

    #[test]
    fn identity_maps_to_scale() {
        let be = diagonal_encoding(&[1.0, 1.0, 1.0]);
        let (out, poly) = qsvt_inv_sqrt(&be, 4.0, 1e-3).unwrap();
        let expect = DenseOperator::from_real_diagonal(&[poly.scale(); 3]);
        assert!(out.block().max_abs_diff(&expect) <= 1e-3);
        assert!(out.unitary().unwrap().is_unitary(1e-12));
    }

    #[test]
    fn diagonal_transform() {
        let be = diagonal_encoding(&[1.0, 0.25]);
        let (out, poly) = qsvt_inv_sqrt(&be, 4.0, 1e-3).unwrap();
        let c = poly.scale();
        assert!((out.block().get(0, 0).re - c).abs() <= 1e-3 * c.max(1.0));
        assert!((out.block().get(1, 1).re - 2.0 * c).abs() <= 1e-3 * (2.0 * c).max(1.0));
        assert!(out.block().get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn spectrum_below_floor_rejected() {
        let be = diagonal_encoding(&[1.0, 0.1]);
        assert!(matches!(
            qsvt_inv_sqrt(&be, 4.0, 1e-3),
            Err(Error::Condition { .. })
        ));
    }

    #[test]
    fn degree_scaling() {
        let degrees: Vec<usize> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&k| InvSqrtPoly::fit(k, 1e-3).unwrap().degree())
            .collect();
        for w in degrees.windows(2) {
            assert!(w[1] as f64 / w[0] as f64 <= 2.5);
        }
    }
}
