//! Exact classical evaluation of the regularized covariance, the optimized
//! feature distribution and the degree of freedom.
//!
//! Everything the simulator produces is checked against these values.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::grid::{EmpiricalDist, GridDomain};
use crate::kernels::{dft_matrix, gram_reconstructed, DenseOperator, KernelSpec, ProbVector};
use crate::C64;

/// Eigenvalues above `-CLIP` are treated as roundoff and clipped to zero.
const CLIP: f64 = 1e-10;

fn check_len(k: &DenseOperator, qhat: &EmpiricalDist) -> Result<()> {
    if k.dim() == qhat.len() {
        Ok(())
    } else {
        Err(Error::Shape {
            expected: k.dim(),
            actual: qhat.len(),
        })
    }
}

fn scale_rows_cols(k: &DenseOperator, left: &[f64], right: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(k.dim(), k.dim(), |i, j| k.get(i, j) * (left[i] * right[j]))
}

/// Empirical covariance `k diag(q)`.
pub fn sigma_hat(k: &DenseOperator, qhat: &EmpiricalDist) -> Result<DenseOperator> {
    check_len(k, qhat)?;
    let ones = vec![1.0; k.dim()];
    DenseOperator::new(scale_rows_cols(k, &ones, qhat.weights()))
}

/// Hermitian form `sqrt(q) k sqrt(q)`, isospectral with `k diag(q)`.
pub fn symmetrized_sigma(k: &DenseOperator, qhat: &EmpiricalDist) -> Result<DenseOperator> {
    check_len(k, qhat)?;
    let root: Vec<f64> = qhat.weights().iter().map(|w| w.sqrt()).collect();
    DenseOperator::new(scale_rows_cols(k, &root, &root))
}

/// `(1/Q_max) sqrt(q) k sqrt(q) + (eps/Q_max) I`.
#[derive(Debug, Clone)]
pub struct SigmaEps {
    pub matrix: DenseOperator,
    pub epsilon: f64,
    pub q_max: f64,
    /// `1 + Q_max / eps`, bounding the condition number of the normalized form.
    pub kappa: f64,
}

impl SigmaEps {
    /// The matrix divided by `1 + eps/Q_max`, with spectrum inside `[1/kappa, 1]`.
    pub fn normalized(&self) -> DenseOperator {
        let scale = 1.0 + self.epsilon / self.q_max;
        DenseOperator::new(self.matrix.entries().map(|z| z / scale))
            .expect("scaling keeps entries finite")
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = SymmetricEigen::new(self.matrix.entries().clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

pub fn sigma_eps(
    k: &DenseOperator,
    qhat: &EmpiricalDist,
    eps: f64,
    q_max: f64,
) -> Result<SigmaEps> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(argument(format!("eps must be positive, got {eps}")));
    }
    if !(q_max.is_finite() && q_max > 0.0) {
        return Err(argument(format!("Q_max must be positive, got {q_max}")));
    }
    let mut matrix = symmetrized_sigma(k, qhat)?.into_entries() / C64::new(q_max, 0.0);
    for i in 0..matrix.nrows() {
        matrix[(i, i)] += eps / q_max;
    }
    Ok(SigmaEps {
        matrix: DenseOperator::new(matrix)?,
        epsilon: eps,
        q_max,
        kappa: 1.0 + q_max / eps,
    })
}

/// Which route produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Exact,
    OracleTier,
    CircuitTier,
}

/// The optimized feature law `Q*_eps(v) P(v)` over frequency indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedDist {
    pub probs: ProbVector,
    pub epsilon: f64,
    pub provenance: Provenance,
}

impl OptimizedDist {
    /// Reweighting `Q*_eps = probs / P` against the data-independent law.
    pub fn q_star(&self, p_tau: &ProbVector) -> Vec<f64> {
        self.probs
            .probs()
            .iter()
            .zip(p_tau.probs())
            .map(|(p, b)| p / b)
            .collect()
    }

    /// Writes `v_index, v_0.., prob, p_tau, q_star` rows.
    pub fn write_csv<W: Write>(
        &self,
        domain: &GridDomain,
        p_tau: &ProbVector,
        writer: W,
    ) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["v_index".to_string()];
        header.extend((0..domain.dim()).map(|d| format!("v_{d}")));
        header.extend(["prob", "p_tau", "q_star"].map(String::from));
        out.write_record(&header)?;
        let q_star = self.q_star(p_tau);
        for v in 0..domain.size() {
            let mut row = vec![v.to_string()];
            row.extend(domain.frequency(v).iter().map(|c| c.to_string()));
            row.push(self.probs.probs()[v].to_string());
            row.push(p_tau.probs()[v].to_string());
            row.push(q_star[v].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn to_probabilities(raw: Vec<f64>) -> Result<ProbVector> {
    let scale = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cleaned = raw
        .into_iter()
        .map(|p| {
            if p >= 0.0 {
                Ok(p)
            } else if p >= -1e-12 * scale.max(1.0) {
                Ok(0.0)
            } else {
                Err(Error::Numeric(format!("negative leverage score {p}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ProbVector::new(cleaned)
}

/// Diagonal of `sqrt(Q/Q_max) F^dagger sqrt(q) Sigma_eps^{-1} sqrt(q) F sqrt(Q/Q_max)`,
/// normalized, via a Cholesky solve.
pub fn optimized_distribution(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
) -> Result<OptimizedDist> {
    let k = gram_reconstructed(kernel, domain)?;
    let q = kernel.q_tau_vector(domain)?;
    let q_max = kernel.q_tau_max(domain)?;
    let sigma = sigma_eps(&k, qhat, eps, q_max)?;

    let f = dft_matrix(domain);
    let root_q: Vec<f64> = qhat.weights().iter().map(|w| w.sqrt()).collect();
    let root_tau: Vec<f64> = q.iter().map(|w| (w / q_max).sqrt()).collect();
    let weighted = scale_rows_cols(&f, &root_q, &root_tau);

    let chol = Cholesky::new(sigma.matrix.entries().clone())
        .ok_or_else(|| Error::Numeric("regularized covariance is not positive definite".into()))?;
    let solved = chol.solve(&weighted);
    let raw = (0..domain.size())
        .map(|v| {
            weighted
                .column(v)
                .iter()
                .zip(solved.column(v).iter())
                .map(|(w, y)| (w.conj() * y).re)
                .sum()
        })
        .collect();
    Ok(OptimizedDist {
        probs: to_probabilities(raw)?,
        epsilon: eps,
        provenance: Provenance::Exact,
    })
}

/// The same distribution through the non-symmetric covariance `k diag(q)`:
/// diagonal of `sqrt(Q) F^dagger q ((1/Q_max) k q + (eps/Q_max) I)^{-1} F sqrt(Q)`.
pub fn optimized_distribution_unsymmetrized(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
) -> Result<OptimizedDist> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(argument(format!("eps must be positive, got {eps}")));
    }
    let k = gram_reconstructed(kernel, domain)?;
    let q = kernel.q_tau_vector(domain)?;
    let q_max = kernel.q_tau_max(domain)?;
    let mut system = sigma_hat(&k, qhat)?.into_entries() / C64::new(q_max, 0.0);
    for i in 0..system.nrows() {
        system[(i, i)] += eps / q_max;
    }
    let f = dft_matrix(domain);
    let ones = vec![1.0; domain.size()];
    let root_tau: Vec<f64> = q.iter().map(|w| w.sqrt()).collect();
    let rhs = scale_rows_cols(&f, &ones, &root_tau);
    let solved = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("covariance system is singular".into()))?;
    let weights = qhat.weights();
    let raw = (0..domain.size())
        .map(|v| {
            (0..domain.size())
                .map(|x| (rhs[(x, v)].conj() * solved[(x, v)] * weights[x]).re)
                .sum()
        })
        .collect();
    Ok(OptimizedDist {
        probs: to_probabilities(raw)?,
        epsilon: eps,
        provenance: Provenance::Exact,
    })
}

/// Real eigenvalues of a Hermitian PSD operator, roundoff clipped at zero.
pub fn psd_eigenvalues(sigma: &DenseOperator) -> Result<Vec<f64>> {
    if !sigma.is_hermitian(1e-10) {
        return Err(argument("degree of freedom needs a Hermitian operator"));
    }
    SymmetricEigen::new(sigma.entries().clone())
        .eigenvalues
        .iter()
        .map(|&l| {
            if l >= 0.0 {
                Ok(l)
            } else if l >= -CLIP {
                Ok(0.0)
            } else {
                Err(Error::Numeric(format!("eigenvalue {l} is negative")))
            }
        })
        .collect()
}

/// `d(eps) = sum_i l_i / (l_i + eps)` over the eigenvalues of `sigma`.
pub fn degree_of_freedom(sigma: &DenseOperator, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(argument(format!("eps must be positive, got {eps}")));
    }
    Ok(psd_eigenvalues(sigma)?.iter().map(|l| l / (l + eps)).sum())
}

/// One inverse-CDF draw from the exact distribution.
pub fn reference_sample<R: Rng + ?Sized>(dist: &OptimizedDist, rng: &mut R) -> usize {
    WeightedIndex::new(dist.probs.probs())
        .expect("a probability vector has positive mass")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ingest_samples;
    use crate::kernels::p_tau;
    use approx::assert_abs_diff_eq;

    fn setup() -> (KernelSpec, GridDomain, EmpiricalDist) {
        let d = GridDomain::new(1, 8).unwrap();
        let q = ingest_samples(&d, &[0, 1, 1, 2, 5, 5, 5, 7]).unwrap();
        (KernelSpec::laplacian(1.0).unwrap(), d, q)
    }

    #[test]
    fn sigma_hat_identity_and_trace() {
        let (kernel, d, q) = setup();
        let s = sigma_hat(&DenseOperator::identity(8), &q).unwrap();
        assert_eq!(s, DenseOperator::from_real_diagonal(q.weights()));

        let k = gram_reconstructed(&kernel, &d).unwrap();
        let s = sigma_hat(&k, &q).unwrap();
        let trace: f64 = (0..8).map(|i| s.get(i, i).re).sum();
        assert_abs_diff_eq!(trace, k.get(0, 0).re, epsilon = 1e-12);

        let point = ingest_samples(&d, &[3]).unwrap();
        let s = sigma_hat(&k, &point).unwrap();
        for j in (0..8).filter(|&j| j != 3) {
            assert!((0..8).all(|i| s.get(i, j).norm() == 0.0));
        }
        assert!(s.get(3, 3).norm() > 0.0);

        let short = ingest_samples(&GridDomain::new(1, 4).unwrap(), &[0]).unwrap();
        assert!(matches!(sigma_hat(&k, &short), Err(Error::Shape { .. })));
    }

    #[test]
    fn sigma_eps_uniform_delta() {
        let d = GridDomain::new(1, 4).unwrap();
        let q = ingest_samples(&d, &[0, 1, 2, 3]).unwrap();
        let s = sigma_eps(&DenseOperator::identity(4), &q, 1.0, 1.0).unwrap();
        let expect = DenseOperator::from_real_diagonal(&[1.25; 4]);
        assert!(s.matrix.max_abs_diff(&expect) < 1e-15);
        assert!(matches!(
            sigma_eps(&DenseOperator::identity(4), &q, 0.0, 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn sigma_eps_spectrum_bounds() {
        let (kernel, d, q) = setup();
        let k = gram_reconstructed(&kernel, &d).unwrap();
        let q_max = kernel.q_tau_max(&d).unwrap();
        for eps in [0.01, 0.1, 1.0] {
            let s = sigma_eps(&k, &q, eps, q_max).unwrap();
            assert!(s.matrix.is_hermitian(1e-12));
            let values = s.eigenvalues();
            assert!(values[0] >= eps / q_max - 1e-12);
            let scale = 1.0 + eps / q_max;
            assert!(values.last().unwrap() / scale <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn huge_eps_is_dominated_by_identity() {
        let (kernel, d, q) = setup();
        let k = gram_reconstructed(&kernel, &d).unwrap();
        let q_max = kernel.q_tau_max(&d).unwrap();
        let s = sigma_eps(&k, &q, 1e8 * q_max, q_max).unwrap();
        let reference = DenseOperator::from_real_diagonal(&[1e8; 8]);
        assert!(s.matrix.max_abs_diff(&reference) / 1e8 <= 1e-7);
    }

    #[test]
    fn routes_agree() {
        let (kernel, d, q) = setup();
        for eps in [0.01, 0.3] {
            let a = optimized_distribution(&kernel, &d, &q, eps).unwrap();
            let b = optimized_distribution_unsymmetrized(&kernel, &d, &q, eps).unwrap();
            for (x, y) in a.probs.probs().iter().zip(b.probs.probs()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn point_mass_with_flat_weight_is_uniform() {
        let d = GridDomain::new(1, 8).unwrap();
        let q = ingest_samples(&d, &[5]).unwrap();
        let dist = optimized_distribution(&KernelSpec::delta(), &d, &q, 0.2).unwrap();
        for p in dist.probs.probs() {
            assert_abs_diff_eq!(*p, 0.125, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_eps_recovers_p_tau() {
        let (kernel, d, q) = setup();
        let q_max = kernel.q_tau_max(&d).unwrap();
        let dist = optimized_distribution(&kernel, &d, &q, 1e8 * q_max).unwrap();
        let base = p_tau(&kernel, &d).unwrap();
        assert!(dist.probs.total_variation(&base) <= 1e-6);
        let q_star = dist.q_star(&base);
        assert!(q_star.iter().all(|w| w.is_finite() && *w > 0.0));
    }

    #[test]
    fn degree_of_freedom_examples() {
        let sigma = DenseOperator::from_real_diagonal(&[1.0, 0.1]);
        assert_abs_diff_eq!(
            degree_of_freedom(&sigma, 0.1).unwrap(),
            1.0 / 1.1 + 0.5,
            epsilon = 1e-14
        );
        assert!(degree_of_freedom(&sigma, 1e12).unwrap() < 1e-11);
        let rank_one = DenseOperator::from_real_diagonal(&[0.5, 0.0, 0.0]);
        assert_abs_diff_eq!(
            degree_of_freedom(&rank_one, 1e-12).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        let negative = DenseOperator::from_real_diagonal(&[1.0, -1e-6]);
        assert!(matches!(
            degree_of_freedom(&negative, 0.1),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn reference_sampling() {
        let d = GridDomain::new(1, 4).unwrap();
        let point = OptimizedDist {
            probs: ProbVector::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
            epsilon: 1.0,
            provenance: Provenance::Exact,
        };
        let mut rng = crate::seeded_rng(0, 0);
        assert!((0..100).all(|_| reference_sample(&point, &mut rng) == 2));

        let uniform = OptimizedDist {
            probs: ProbVector::uniform(d.size()),
            ..point
        };
        let mut rng = crate::seeded_rng(3, 0);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[reference_sample(&uniform, &mut rng)] += 1;
        }
        assert!(counts
            .iter()
            .all(|&c| (c as f64 / 1e5 - 0.25).abs() <= 0.01));

        let mut a = crate::seeded_rng(9, 0);
        let mut b = crate::seeded_rng(9, 0);
        let xs: Vec<usize> = (0..50)
            .map(|_| reference_sample(&uniform, &mut a))
            .collect();
        let ys: Vec<usize> = (0..50)
            .map(|_| reference_sample(&uniform, &mut b))
            .collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn csv_columns() {
        let (kernel, d, q) = setup();
        let dist = optimized_distribution(&kernel, &d, &q, 0.1).unwrap();
        let mut buf = Vec::new();
        dist.write_csv(&d, &p_tau(&kernel, &d).unwrap(), &mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("v_index,v_0,prob,p_tau,q_star\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
