//! Block encodings of the kernel weight and of the regularized covariance.
//!
//! Both are built the same way: a circuit `U` whose flag qubit reads `|0>`
//! with probability `<psi|E|psi>` for the target operator `E`, turned into a
//! block encoding `U^dagger CNOT(flag -> spare) U` with one spare qubit.
//! Rotation angles that the reference construction computes in fixed-point
//! arithmetic registers are applied here as exact controlled rotations.

use nalgebra::DMatrix;

use super::circuit::{identity2, pauli_x, rotation, Circuit, Gate};
use super::state::{state_prep_oracle, Statevector};
use crate::error::{Error, Result};
use crate::grid::{EmpiricalDist, GridDomain};
use crate::kernels::{dft_matrix, gram_reconstructed, DenseOperator, KernelSpec};
use crate::oracle::sigma_eps;
use crate::C64;

/// Slack for residuals that are exact up to roundoff.
const ROUNDOFF: f64 = 1e-12;

/// A unitary on `system (x) ancillas` whose all-zero ancilla block encodes
/// `target / alpha`.
#[derive(Debug, Clone)]
pub struct BlockEncoding {
    circuit: Circuit,
    alpha: f64,
    ancilla_qubits: usize,
    delta: f64,
    block: DenseOperator,
}

impl BlockEncoding {
    /// Wraps a circuit whose register 0 is the system; every other register
    /// is an ancilla starting in `|0>`.
    pub fn from_circuit(
        circuit: Circuit,
        alpha: f64,
        ancilla_qubits: usize,
        delta: f64,
    ) -> Result<Self> {
        let block = extract_block(&circuit)?;
        Ok(Self {
            circuit,
            alpha,
            ancilla_qubits,
            delta,
            block,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.ancilla_qubits
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn target_dim(&self) -> usize {
        self.circuit.layout()[0]
    }

    /// `(I (x) <0|) U (I (x) |0>)`
    pub fn block(&self) -> &DenseOperator {
        &self.block
    }

    /// The scaled block `alpha * block`.
    pub fn encoded(&self) -> DenseOperator {
        DenseOperator::new(self.block.entries().map(|z| z * self.alpha)).expect("finite block")
    }

    /// The full unitary; dimension is the product of all registers.
    pub fn unitary(&self) -> Result<DenseOperator> {
        self.circuit.to_dense()
    }

    /// `|| target - alpha * block ||` in operator norm.
    pub fn residual(&self, target: &DenseOperator) -> f64 {
        let diff = target.entries() - self.encoded().entries();
        DenseOperator::new(diff)
            .expect("finite difference")
            .operator_norm()
    }

    pub fn verify(&self, target: &DenseOperator) -> Result<()> {
        let residual = self.residual(target);
        if residual <= self.delta + ROUNDOFF {
            Ok(())
        } else {
            Err(Error::Construction {
                residual,
                delta: self.delta,
            })
        }
    }

    /// Probability that every ancilla reads `0` after running on `|psi>|0>`.
    pub fn success_probability(&self, psi: &[C64]) -> Result<f64> {
        let layout = self.circuit.layout();
        let rest: usize = layout[1..].iter().product();
        let mut amps = vec![C64::new(0.0, 0.0); self.circuit.dim()];
        for (i, a) in psi.iter().enumerate() {
            amps[i * rest] = *a;
        }
        let mut state = Statevector::from_amplitudes(amps, layout)?;
        self.circuit.apply(&mut state)?;
        Ok((0..layout[0])
            .map(|i| state.amplitudes()[i * rest].norm_sqr())
            .sum())
    }
}

fn extract_block(circuit: &Circuit) -> Result<DenseOperator> {
    let layout = circuit.layout();
    let n = layout[0];
    let rest: usize = layout[1..].iter().product();
    let mut entries = DMatrix::zeros(n, n);
    let mut values = vec![0; layout.len()];
    for j in 0..n {
        values[0] = j;
        let mut state = Statevector::basis(layout, &values)?;
        circuit.apply(&mut state)?;
        for i in 0..n {
            entries[(i, j)] = state.amplitudes()[i * rest];
        }
    }
    DenseOperator::new(entries)
}

/// `U^dagger CNOT(flag -> spare) U`, the spare qubit appended last.
fn povm_to_block(povm: &Circuit, flag: usize) -> Result<Circuit> {
    let mut layout = povm.layout().to_vec();
    layout.push(2);
    let spare = layout.len() - 1;
    let lift = |c: &Circuit| -> Result<Circuit> {
        let mut out = Circuit::new(layout.clone());
        for g in c.gates() {
            out.push(g.clone())?;
        }
        Ok(out)
    };
    let mut out = lift(povm)?;
    out.push(Gate::Controlled {
        controls: vec![flag],
        target: spare,
        table: vec![identity2(), pauli_x()],
    })?;
    out.extend(&lift(&povm.adjoint())?)?;
    Ok(out)
}

fn qubits_for(dim: usize) -> usize {
    dim.next_power_of_two().trailing_zeros() as usize
}

fn weight_ratios(kernel: &KernelSpec, domain: &GridDomain) -> Result<Vec<f64>> {
    let q = kernel.q_tau_vector(domain)?;
    let q_max = kernel.q_tau_max(domain)?;
    q.iter()
        .map(|w| {
            let r = w / q_max;
            if r > 0.0 && r <= 1.0 + ROUNDOFF {
                Ok(r.min(1.0))
            } else {
                Err(Error::Encoding(format!("weight ratio {r} outside (0, 1]")))
            }
        })
        .collect()
}

/// Block encoding of `diag(sqrt(Q / Q_max))` on the frequency register.
///
/// Layout `[system, flag, spare]`: the flag is rotated by
/// `arccos((Q/Q_max)^{1/4})`, so it reads `0` with probability
/// `<psi|sqrt(Q/Q_max)|psi>`, and the spare qubit turns that POVM into a block.
pub fn be_sqrt_qtau(kernel: &KernelSpec, domain: &GridDomain, delta: f64) -> Result<BlockEncoding> {
    let ratios = weight_ratios(kernel, domain)?;
    let mut povm = Circuit::new(vec![domain.size(), 2]);
    povm.push(Gate::Controlled {
        controls: vec![0],
        target: 1,
        table: ratios
            .iter()
            .map(|r| rotation(r.powf(0.25).acos()))
            .collect(),
    })?;
    let encoding = BlockEncoding::from_circuit(povm_to_block(&povm, 1)?, 1.0, 2, delta)?;
    let roots: Vec<f64> = ratios.iter().map(|r| r.sqrt()).collect();
    encoding.verify(&DenseOperator::from_real_diagonal(&roots))?;
    Ok(encoding)
}

/// Flag circuit on `[X, X', A, B]` whose flag `B` reads `0` with probability
/// `<psi|((eps/Q_max) + (1/Q_max) sqrt(q) F diag(Q) F^dagger sqrt(q))|psi> / (1 + eps/Q_max)`.
///
/// `ratios` are `Q/Q_max` per frequency; `eps_ratio` is `eps/Q_max`.
pub(crate) fn sigma_eps_povm(
    domain: &GridDomain,
    ratios: &[f64],
    rho: &DenseOperator,
    eps_ratio: f64,
) -> Result<Circuit> {
    let n = domain.size();
    let mut povm = Circuit::new(vec![n, n, 2, 2]);
    let branch = (eps_ratio / (1.0 + eps_ratio)).sqrt().acos();
    povm.push(Gate::ModAdd {
        source: 0,
        target: 1,
        subtract: false,
    })?;
    povm.push(Gate::Operator {
        registers: vec![0],
        matrix: dft_matrix(domain).adjoint().into_entries(),
    })?;
    povm.push(Gate::Operator {
        registers: vec![1],
        matrix: rho.adjoint().into_entries(),
    })?;
    povm.push(Gate::Operator {
        registers: vec![2],
        matrix: DMatrix::from_fn(2, 2, |i, j| rotation(branch)[(i, j)]),
    })?;
    // joint control value is (v * n + x') * 2 + a
    let mut table = Vec::with_capacity(n * n * 2);
    for v in 0..n {
        let weighted = rotation(ratios[v].sqrt().acos());
        for x in 0..n {
            table.push(identity2());
            table.push(if x == 0 { weighted } else { pauli_x() });
        }
    }
    povm.push(Gate::Controlled {
        controls: vec![0, 1, 2],
        target: 3,
        table,
    })?;
    Ok(povm)
}

/// Block encoding of `Sigma_eps / (1 + eps/Q_max)`.
///
/// Layout `[X, X', A, B, C]`; `X'` doubles as the copy register that the
/// data oracle is uncomputed on.
pub fn be_sigma_eps(
    kernel: &KernelSpec,
    domain: &GridDomain,
    qhat: &EmpiricalDist,
    eps: f64,
    delta: f64,
) -> Result<BlockEncoding> {
    let ratios = weight_ratios(kernel, domain)?;
    let q_max = kernel.q_tau_max(domain)?;
    let target = sigma_eps(&gram_reconstructed(kernel, domain)?, qhat, eps, q_max)?.normalized();
    let povm = sigma_eps_povm(domain, &ratios, &state_prep_oracle(qhat), eps / q_max)?;
    let ancillas = qubits_for(domain.size()) + 3;
    let encoding = BlockEncoding::from_circuit(povm_to_block(&povm, 3)?, 1.0, ancillas, delta)?;
    encoding.verify(&target)?;
    Ok(encoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ingest_samples;
    use crate::kernels::CustomWeight;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_weight_is_identity() {
        let d = GridDomain::new(1, 4).unwrap();
        let be = be_sqrt_qtau(&KernelSpec::delta(), &d, 1e-12).unwrap();
        assert!(be.block().max_abs_diff(&DenseOperator::identity(4)) < 1e-14);
        assert_eq!(be.ancilla_qubits(), 2);
        assert!(be.unitary().unwrap().is_unitary(1e-12));
    }

    #[test]
    fn laplacian_weight_block() {
        let d = GridDomain::new(1, 4).unwrap();
        let lap = KernelSpec::laplacian(1.0).unwrap();
        let be = be_sqrt_qtau(&lap, &d, 1e-12).unwrap();
        let q = lap.q_tau_vector(&d).unwrap();
        let roots: Vec<f64> = q.iter().map(|w| (w / q[0]).sqrt()).collect();
        assert!(
            be.block()
                .max_abs_diff(&DenseOperator::from_real_diagonal(&roots))
                <= 1e-12
        );
    }

    #[test]
    fn sqrt_weight_success_probability() {
        let d = GridDomain::new(1, 4).unwrap();
        let kernel =
            KernelSpec::custom(CustomWeight::new(|v| if v[0] == 0.0 { 1.0 } else { 0.25 }));
        let be = be_sqrt_qtau(&kernel, &d, 1e-12).unwrap();
        // the flag alone reads 0 with probability <psi|sqrt(Q/Q_max)|psi>
        let mut povm = Circuit::new(vec![4, 2]);
        for g in be.circuit().gates().iter().take(1) {
            povm.push(g.clone()).unwrap();
        }
        let mut s = Statevector::from_amplitudes(
            (0..8)
                .map(|i| C64::new(if i % 2 == 0 { 0.5 } else { 0.0 }, 0.0))
                .collect(),
            &[4, 2],
        )
        .unwrap();
        povm.apply(&mut s).unwrap();
        let expect = (1.0 + 3.0 * 0.5) / 4.0;
        assert_abs_diff_eq!(s.marginal(1).unwrap()[0], expect, epsilon = 1e-14);
    }

    #[test]
    fn delta_kernel_sigma_block() {
        let d = GridDomain::new(1, 4).unwrap();
        let q = ingest_samples(&d, &[0, 1, 1, 3]).unwrap();
        let be = be_sigma_eps(&KernelSpec::delta(), &d, &q, 1.0, 1e-12).unwrap();
        let expect: Vec<f64> = q.weights().iter().map(|w| (w + 1.0) / 2.0).collect();
        assert!(
            be.block()
                .max_abs_diff(&DenseOperator::from_real_diagonal(&expect))
                < 1e-13
        );
        assert!(be.unitary().unwrap().is_unitary(1e-12));
        assert_eq!(be.ancilla_qubits(), 5);
    }

    #[test]
    fn sigma_success_probability() {
        let d = GridDomain::new(1, 4).unwrap();
        let lap = KernelSpec::laplacian(1.0).unwrap();
        let q = ingest_samples(&d, &[0, 2, 2, 3, 3, 3]).unwrap();
        let eps = 0.3;
        let be = be_sigma_eps(&lap, &d, &q, eps, 1e-12).unwrap();
        let q_max = lap.q_tau_max(&d).unwrap();
        let sigma = sigma_eps(&gram_reconstructed(&lap, &d).unwrap(), &q, eps, q_max).unwrap();
        let psi: Vec<C64> = [0.1, -0.5, 0.7, 0.2]
            .iter()
            .zip([0.3, 0.0, -0.2, 0.1])
            .map(|(&re, im)| C64::new(re, im))
            .collect();
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|a| a / norm).collect();
        let v = nalgebra::DVector::from_column_slice(&psi);
        let expect = (v.adjoint() * sigma.matrix.entries() * &v)[(0, 0)].re / (1.0 + eps / q_max);

        // the flag circuit alone (before the spare qubit) has this flag-0 probability
        let ratios = weight_ratios(&lap, &d).unwrap();
        let povm = sigma_eps_povm(&d, &ratios, &state_prep_oracle(&q), eps / q_max).unwrap();
        let mut amps = vec![C64::new(0.0, 0.0); povm.dim()];
        for (i, a) in psi.iter().enumerate() {
            amps[i * 16] = *a;
        }
        let mut s = Statevector::from_amplitudes(amps, povm.layout()).unwrap();
        povm.apply(&mut s).unwrap();
        assert_abs_diff_eq!(s.marginal(3).unwrap()[0], expect, epsilon = 1e-13);
        // and the block encoding reproduces it as <psi|block|psi>
        let via_block = (v.adjoint() * be.block().entries() * &v)[(0, 0)].re;
        assert_abs_diff_eq!(via_block, expect, epsilon = 1e-13);
    }

    #[test]
    fn epsilon_branch_alone() {
        let d = GridDomain::new(1, 4).unwrap();
        let q = ingest_samples(&d, &[1]).unwrap();
        let eps_ratio = 0.4;
        let povm = sigma_eps_povm(&d, &[0.0; 4], &state_prep_oracle(&q), eps_ratio).unwrap();
        let be =
            BlockEncoding::from_circuit(povm_to_block(&povm, 3).unwrap(), 1.0, 5, 0.0).unwrap();
        let level = eps_ratio / (1.0 + eps_ratio);
        assert!(
            be.block()
                .max_abs_diff(&DenseOperator::from_real_diagonal(&[level; 4]))
                < 1e-14
        );
    }

    #[test]
    fn verification_rejects_tight_delta() {
        let d = GridDomain::new(1, 4).unwrap();
        let be = be_sqrt_qtau(&KernelSpec::delta(), &d, 0.0).unwrap();
        let wrong = DenseOperator::from_real_diagonal(&[0.9; 4]);
        assert!(matches!(be.verify(&wrong), Err(Error::Construction { .. })));
    }
}
