//! Preparation of the two-register sampling state and feature draws.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::block::{be_sigma_eps, be_sqrt_qtau};
use super::qsvt::qsvt_inv_sqrt;
use super::state::{measure_register, qft_apply, state_prep_oracle, Statevector};
use super::CostLedger;
use crate::error::{argument, Result};
use crate::grid::{EmpiricalDist, GridDomain};
use crate::kernels::{dft_matrix, gram_reconstructed, KernelSpec};
use crate::oracle::sigma_eps;
use crate::C64;

/// Register holding the inverse-covariance factor.
pub const DATA_REGISTER: usize = 0;
/// Register measured to obtain a feature.
pub const FEATURE_REGISTER: usize = 1;

/// Default end-to-end precision of the circuit tier.
pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    /// Matrix functions evaluated by exact eigendecomposition.
    Oracle,
    /// Composed block encodings with post-selection.
    Circuit,
}

/// Builds the two-register state whose feature-register marginal is the
/// optimized distribution.
///
/// Register 0 carries `Sigma_eps^{-1/2}`, register 1 carries
/// `sqrt(Q/Q_max) F^dagger sqrt(q)`, both indexed over the grid.
pub fn prepare_psi(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
    tier: Tier,
    delta: f64,
) -> Result<(Statevector, CostLedger)> {
    match tier {
        Tier::Oracle => Ok((
            prepare_oracle(kernel, domain, qhat, eps)?,
            CostLedger::exact(),
        )),
        Tier::Circuit => prepare_circuit(kernel, domain, qhat, eps, delta),
    }
}

fn prepare_oracle(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
) -> Result<Statevector> {
    let n = domain.size();
    let q_max = kernel.q_tau_max(domain)?;
    let sigma = sigma_eps(&gram_reconstructed(kernel, domain)?, qhat, eps, q_max)?;
    let eig = SymmetricEigen::new(sigma.matrix.into_entries());
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::new(eig.eigenvalues[j].recip().sqrt(), 0.0);
    }
    let inv_root = scaled * eig.eigenvectors.adjoint();

    let q = kernel.q_tau_vector(domain)?;
    let f = dft_matrix(domain);
    // right[v, x] = sqrt(Q_v/Q_max) conj(F[x, v]) sqrt(q_x)
    let right = DMatrix::from_fn(n, n, |v, x| {
        f.get(x, v).conj() * ((q[v] / q_max).sqrt() * qhat.weights()[x].sqrt())
    });
    let psi = inv_root * right.transpose();
    let mut amplitudes: Vec<C64> = Vec::with_capacity(n * n);
    for a in 0..n {
        amplitudes.extend(psi.row(a).iter().copied());
    }
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut amplitudes {
        *z /= norm;
    }
    Statevector::from_amplitudes(amplitudes, &[n, n])
}

fn prepare_circuit(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
    delta: f64,
) -> Result<(Statevector, CostLedger)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(argument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = domain.size();
    let q_max = kernel.q_tau_max(domain)?;
    let kappa = 1.0 + q_max / eps;
    // The polynomial error is relative to a block whose smallest value is
    // c = (1 - delta)/sqrt(kappa); this keeps the state error within delta.
    let inner = delta / (2.0 * kappa.sqrt());

    let weight = be_sqrt_qtau(kernel, domain, inner)?;
    let covariance = be_sigma_eps(kernel, domain, qhat, eps, inner)?;
    let (inverse_root, poly) = qsvt_inv_sqrt(&covariance, kappa, inner)?;

    // registers: X, X', weight flag, weight spare, transform qubit
    let mut state = Statevector::zero(&[n, n, 2, 2, 2])?;
    state.apply_operator(&[FEATURE_REGISTER], state_prep_oracle(qhat).entries())?;
    state.apply_mod_add(FEATURE_REGISTER, DATA_REGISTER, false)?;
    state = qft_apply(state, FEATURE_REGISTER, domain, true)?;
    weight
        .circuit()
        .apply_mapped(&mut state, &[FEATURE_REGISTER, 2, 3])?;
    let p_weight = state.postselect(&[(2, 0), (3, 0)])?;
    inverse_root
        .circuit()
        .apply_mapped(&mut state, &[DATA_REGISTER, 4])?;
    let p_transform = state.postselect(&[(2, 0), (3, 0), (4, 0)])?;
    let prepared = state.restrict(&[(2, 0), (3, 0), (4, 0)])?;

    let degree = poly.degree() as u64;
    let success = p_weight * p_transform;
    let ledger = CostLedger {
        oracle_rho_queries: 1 + 2 * degree,
        oracle_tau_queries: 2 + 2 * degree,
        qft_applications: 1 + 2 * degree,
        qsvt_repetitions: degree,
        amp_success_prob: success,
        amp_repetition_estimate: (1.0 / success.sqrt()).ceil() as u64,
    };
    Ok((prepared, ledger))
}

/// A prepared state reused for many independent prepare-and-measure cycles.
///
/// Preparation is deterministic, so each draw measures a fresh copy.
#[derive(Debug, Clone)]
pub struct FeatureSampler {
    state: Statevector,
    ledger: CostLedger,
}

impl FeatureSampler {
    pub fn new(
        kernel: &KernelSpec,
        domain: &GridDomain,
        qhat: &EmpiricalDist,
        eps: f64,
        tier: Tier,
        delta: f64,
    ) -> Result<Self> {
        let (state, ledger) = prepare_psi(kernel, domain, qhat, eps, tier, delta)?;
        Ok(Self { state, ledger })
    }

    pub fn state(&self) -> &Statevector {
        &self.state
    }

    /// Cost of one prepare-and-measure cycle.
    pub fn ledger(&self) -> CostLedger {
        self.ledger
    }

    /// The law each draw follows: the feature-register marginal.
    pub fn law(&self) -> Vec<f64> {
        self.state
            .marginal(FEATURE_REGISTER)
            .expect("prepared states have a feature register")
    }

    /// One feature as a row-major frequency index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, CostLedger)> {
        let v = measure_register(self.state.clone(), FEATURE_REGISTER, rng)?;
        Ok((v, self.ledger))
    }
}

/// Prepares, measures once and returns the feature index with its cost.
#[allow(clippy::too_many_arguments)]
pub fn sample_feature<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
    tier: Tier,
    delta: f64,
    rng: &mut R,
) -> Result<(usize, CostLedger)> {
    FeatureSampler::new(kernel, domain, qhat, eps, tier, delta)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ingest_samples;
    use crate::kernels::p_tau;
    use crate::oracle::optimized_distribution;
    use crate::total_variation;

    fn setup() -> (KernelSpec, GridDomain, EmpiricalDist) {
        let d = GridDomain::new(1, 8).unwrap();
        let q = ingest_samples(&d, &[0, 1, 1, 2, 4, 4, 4, 6, 7, 7]).unwrap();
        (KernelSpec::laplacian(1.0).unwrap(), d, q)
    }

    #[test]
    fn oracle_marginal_is_optimized_distribution() {
        let (k, d, q) = setup();
        for eps in [0.01, 0.1, 1.0] {
            let (psi, ledger) = prepare_psi(&k, &d, &q, eps, Tier::Oracle, DEFAULT_DELTA).unwrap();
            assert_eq!(ledger.amp_success_prob, 1.0);
            let exact = optimized_distribution(&k, &d, &q, eps).unwrap();
            let marginal = psi.marginal(FEATURE_REGISTER).unwrap();
            assert!(total_variation(&marginal, exact.probs.probs()) <= 1e-10);
        }
    }

    #[test]
    fn circuit_tier_tracks_oracle_tier() {
        let (k, d, q) = setup();
        let (oracle, _) = prepare_psi(&k, &d, &q, 0.1, Tier::Oracle, 0.02).unwrap();
        let (circuit, ledger) = prepare_psi(&k, &d, &q, 0.1, Tier::Circuit, 0.02).unwrap();
        assert!(circuit.fidelity(&oracle) >= 1.0 - 0.02);
        assert!((circuit.norm() - 1.0).abs() < 1e-10);
        let degree = ledger.qsvt_repetitions;
        assert!(degree > 0);
        assert_eq!(ledger.oracle_rho_queries, 1 + 2 * degree);
        assert_eq!(
            ledger.amp_repetition_estimate,
            (1.0 / ledger.amp_success_prob.sqrt()).ceil() as u64
        );
    }

    #[test]
    fn huge_eps_gives_p_tau() {
        let (k, d, q) = setup();
        let q_max = k.q_tau_max(&d).unwrap();
        let (psi, _) = prepare_psi(&k, &d, &q, 1e8 * q_max, Tier::Oracle, DEFAULT_DELTA).unwrap();
        let base = p_tau(&k, &d).unwrap();
        assert!(total_variation(&psi.marginal(FEATURE_REGISTER).unwrap(), base.probs()) <= 1e-6);
    }

    #[test]
    fn point_mass_data_register_is_pure() {
        let (k, d, _) = setup();
        let q = ingest_samples(&d, &[3]).unwrap();
        let (psi, _) = prepare_psi(&k, &d, &q, 0.1, Tier::Oracle, DEFAULT_DELTA).unwrap();
        // the amplitude matrix psi[a, x'] has rank one
        let m = DMatrix::from_row_slice(8, 8, psi.amplitudes());
        let s = m.singular_values();
        let mut sorted: Vec<f64> = s.iter().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!(sorted[1] < 1e-12 * sorted[0]);
    }

    #[test]
    fn sampler_is_deterministic() {
        let (k, d, q) = setup();
        let sampler = FeatureSampler::new(&k, &d, &q, 0.1, Tier::Oracle, DEFAULT_DELTA).unwrap();
        let mut a = crate::seeded_rng(4, 1);
        let mut b = crate::seeded_rng(4, 1);
        let xs: Vec<usize> = (0..20).map(|_| sampler.sample(&mut a).unwrap().0).collect();
        let ys: Vec<usize> = (0..20).map(|_| sampler.sample(&mut b).unwrap().0).collect();
        assert_eq!(xs, ys);
        let mut c = crate::seeded_rng(4, 1);
        let (v, _) = sample_feature(&k, &d, &q, 0.1, Tier::Oracle, DEFAULT_DELTA, &mut c).unwrap();
        assert_eq!(v, xs[0]);
    }
}
