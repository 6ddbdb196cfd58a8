//! Dense statevectors over a tuple of registers.
//!
//! Amplitudes are stored row-major over the register tuple, so register 0
//! is the most significant digit of the flat index.

use nalgebra::{DMatrix, Matrix2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::grid::{EmpiricalDist, GridDomain};
use crate::kernels::{dft_matrix, DenseOperator};
use crate::C64;

/// Post-selection below this probability is treated as degenerate.
pub const MIN_POSTSELECT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<C64>,
    shape: Vec<usize>,
}

impl Statevector {
    /// All registers in `|0>`.
    pub fn zero(shape: &[usize]) -> Result<Self> {
        Self::basis(shape, &vec![0; shape.len()])
    }

    /// The product basis state with the given register values.
    pub fn basis(shape: &[usize], values: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if values.len() != shape.len() {
            return Err(Error::Shape {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        let len = shape.iter().product();
        let mut amplitudes = vec![C64::new(0.0, 0.0); len];
        let mut index = 0;
        for (&v, &d) in values.iter().zip(shape) {
            if v >= d {
                return Err(Error::Domain(format!("register value {v} outside 0..{d}")));
            }
            index = index * d + v;
        }
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            shape: shape.to_vec(),
        })
    }

    /// Wraps amplitudes that must already have unit norm.
    pub fn from_amplitudes(amplitudes: Vec<C64>, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if amplitudes.len() != len {
            return Err(Error::Shape {
                expected: len,
                actual: amplitudes.len(),
            });
        }
        let state = Self {
            amplitudes,
            shape: shape.to_vec(),
        };
        if (state.norm() - 1.0).abs() > 1e-10 {
            return Err(argument(format!("state norm {} is not 1", state.norm())));
        }
        Ok(state)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `|<self|other>|^2`
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        assert_eq!(self.shape, other.shape, "fidelity of mismatched states");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for r in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * self.shape[r + 1];
        }
        strides
    }

    fn check_register(&self, register: usize) -> Result<usize> {
        self.shape.get(register).copied().ok_or_else(|| {
            argument(format!(
                "no register {register} in a {}-register state",
                self.shape.len()
            ))
        })
    }

    fn digit(&self, strides: &[usize], index: usize, register: usize) -> usize {
        (index / strides[register]) % self.shape[register]
    }

    /// Flat indices whose digits on `registers` are all zero.
    fn bases(&self, strides: &[usize], registers: &[usize]) -> Vec<usize> {
        (0..self.amplitudes.len())
            .filter(|&i| registers.iter().all(|&r| self.digit(strides, i, r) == 0))
            .collect()
    }

    /// Applies `matrix` to the joint space of `registers`, listed most
    /// significant first.
    pub fn apply_operator(&mut self, registers: &[usize], matrix: &DMatrix<C64>) -> Result<()> {
        let mut sub = 1;
        for (i, &r) in registers.iter().enumerate() {
            sub *= self.check_register(r)?;
            if registers[..i].contains(&r) {
                return Err(argument(format!("register {r} listed twice")));
            }
        }
        if matrix.nrows() != sub || matrix.ncols() != sub {
            return Err(Error::Shape {
                expected: sub,
                actual: matrix.nrows(),
            });
        }
        let strides = self.strides();
        let offsets: Vec<usize> = (0..sub)
            .map(|j| {
                let mut rest = j;
                let mut offset = 0;
                for &r in registers.iter().rev() {
                    offset += (rest % self.shape[r]) * strides[r];
                    rest /= self.shape[r];
                }
                offset
            })
            .collect();
        let mut gathered = vec![C64::new(0.0, 0.0); sub];
        for base in self.bases(&strides, registers) {
            for (g, &o) in gathered.iter_mut().zip(&offsets) {
                *g = self.amplitudes[base + o];
            }
            for (row, &o) in offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (col, g) in gathered.iter().enumerate() {
                    acc += matrix[(row, col)] * g;
                }
                self.amplitudes[base + o] = acc;
            }
        }
        Ok(())
    }

    /// `|s, t> -> |s, t +/- s mod dim(t)>`, the register-level CNOT.
    pub fn apply_mod_add(&mut self, source: usize, target: usize, subtract: bool) -> Result<()> {
        self.check_register(source)?;
        let dim = self.check_register(target)?;
        if source == target {
            return Err(argument("modular add needs distinct registers"));
        }
        let strides = self.strides();
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let s = self.digit(&strides, i, source) % dim;
            let t = self.digit(&strides, i, target);
            let moved = if subtract {
                (t + dim - s) % dim
            } else {
                (t + s) % dim
            };
            out[i - t * strides[target] + moved * strides[target]] = a;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Applies `table[c]` to the qubit `target`, where `c` is the joint value
    /// of `controls` (most significant first).
    pub fn apply_controlled(
        &mut self,
        controls: &[usize],
        target: usize,
        table: &[Matrix2<C64>],
    ) -> Result<()> {
        if self.check_register(target)? != 2 {
            return Err(argument("controlled target must be a qubit"));
        }
        let mut combos = 1;
        for &c in controls {
            combos *= self.check_register(c)?;
            if c == target {
                return Err(argument("target cannot also be a control"));
            }
        }
        if table.len() != combos {
            return Err(Error::Shape {
                expected: combos,
                actual: table.len(),
            });
        }
        let strides = self.strides();
        let step = strides[target];
        for base in self.bases(&strides, &[target]) {
            let combo = controls.iter().fold(0, |acc, &c| {
                acc * self.shape[c] + self.digit(&strides, base, c)
            });
            let m = &table[combo];
            let (a0, a1) = (self.amplitudes[base], self.amplitudes[base + step]);
            self.amplitudes[base] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
            self.amplitudes[base + step] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
        }
        Ok(())
    }

    /// Probability of each value of one register.
    pub fn marginal(&self, register: usize) -> Result<Vec<f64>> {
        let dim = self.check_register(register)?;
        let strides = self.strides();
        let mut probs = vec![0.0; dim];
        for (i, a) in self.amplitudes.iter().enumerate() {
            probs[self.digit(&strides, i, register)] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Projects registers onto fixed values and renormalizes; returns the
    /// probability of the outcome.
    pub fn postselect(&mut self, fixed: &[(usize, usize)]) -> Result<f64> {
        for &(r, v) in fixed {
            if v >= self.check_register(r)? {
                return Err(Error::Domain(format!("register {r} has no value {v}")));
            }
        }
        let strides = self.strides();
        let mut p = 0.0;
        for i in 0..self.amplitudes.len() {
            if fixed.iter().all(|&(r, v)| self.digit(&strides, i, r) == v) {
                p += self.amplitudes[i].norm_sqr();
            } else {
                self.amplitudes[i] = C64::new(0.0, 0.0);
            }
        }
        if p < MIN_POSTSELECT {
            return Err(Error::Degenerate(p));
        }
        let scale = p.sqrt().recip();
        for a in &mut self.amplitudes {
            *a *= scale;
        }
        Ok(p)
    }

    /// The state of the remaining registers once `fixed` hold the given values.
    ///
    /// Meaningful after [`Statevector::postselect`] on the same registers.
    pub fn restrict(&self, fixed: &[(usize, usize)]) -> Result<Statevector> {
        for &(r, _) in fixed {
            self.check_register(r)?;
        }
        let strides = self.strides();
        let amplitudes: Vec<C64> = (0..self.amplitudes.len())
            .filter(|&i| fixed.iter().all(|&(r, v)| self.digit(&strides, i, r) == v))
            .map(|i| self.amplitudes[i])
            .collect();
        let shape: Vec<usize> = (0..self.shape.len())
            .filter(|r| !fixed.iter().any(|&(f, _)| f == *r))
            .map(|r| self.shape[r])
            .collect();
        Statevector::from_amplitudes(amplitudes, &shape)
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        Err(argument("register dimensions must be positive"))
    } else {
        Ok(())
    }
}

/// Applies `F_D` (or its inverse) to one register.
pub fn qft_apply(
    mut state: Statevector,
    register: usize,
    domain: &GridDomain,
    inverse: bool,
) -> Result<Statevector> {
    let dim = state.check_register(register)?;
    if dim != domain.size() {
        return Err(Error::Shape {
            expected: domain.size(),
            actual: dim,
        });
    }
    let f = dft_matrix(domain);
    let matrix = if inverse { f.adjoint() } else { f };
    state.apply_operator(&[register], matrix.entries())?;
    Ok(state)
}

/// Samples one register value with its marginal probability.
///
/// The state is consumed: each prepared state yields one sample.
pub fn measure_register<R: Rng + ?Sized>(
    state: Statevector,
    register: usize,
    rng: &mut R,
) -> Result<usize> {
    let probs = state.marginal(register)?;
    let law = WeightedIndex::new(&probs)
        .map_err(|e| Error::Numeric(format!("unmeasurable state: {e}")))?;
    Ok(law.sample(rng))
}

/// Unitary whose first column is `sqrt(q)`; the rest is completed by
/// Gram-Schmidt against the standard basis.
pub fn state_prep_oracle(qhat: &EmpiricalDist) -> DenseOperator {
    let n = qhat.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    columns.push(qhat.weights().iter().map(|w| w.sqrt()).collect());
    for e in 0..n {
        if columns.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        // two passes keep the completion orthonormal to roundoff
        for _ in 0..2 {
            for c in &columns {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, a) in v.iter_mut().zip(c) {
                    *x -= dot * a;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            columns.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let entries = DMatrix::from_fn(n, n, |i, j| C64::new(columns[j][i], 0.0));
    DenseOperator::new(entries).expect("completion is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ingest_samples;
    use approx::assert_abs_diff_eq;

    #[test]
    fn oracle_first_column() {
        let d = GridDomain::new(1, 4).unwrap();
        let point = state_prep_oracle(&ingest_samples(&d, &[0]).unwrap());
        assert!(point.max_abs_diff(&DenseOperator::identity(4)) < 1e-15);

        let uniform = state_prep_oracle(&ingest_samples(&d, &[0, 1, 2, 3]).unwrap());
        for i in 0..4 {
            assert_abs_diff_eq!(uniform.get(i, 0).re, 0.5, epsilon = 1e-15);
        }
        assert!(uniform.is_unitary(1e-12));

        let q = ingest_samples(&d, &[0, 0, 1, 3, 3, 3]).unwrap();
        let o = state_prep_oracle(&q);
        assert!(o.is_unitary(1e-12));
        for i in 0..4 {
            assert_abs_diff_eq!(o.get(i, 0).norm_sqr(), q.weights()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn qft_examples() {
        let d = GridDomain::new(1, 4).unwrap();
        let s = qft_apply(Statevector::zero(&[4]).unwrap(), 0, &d, false).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a - C64::new(0.5, 0.0)).norm() < 1e-15));

        let d2 = GridDomain::new(2, 4).unwrap();
        let x = 9;
        let s = qft_apply(Statevector::basis(&[16], &[x]).unwrap(), 0, &d2, false).unwrap();
        for v in 0..16 {
            let phase = -2.0 * std::f64::consts::PI * d2.phase_units(v, x) as f64 / 4.0;
            assert!((s.amplitudes()[v] - C64::from_polar(0.25, phase)).norm() < 1e-14);
        }
        let back = qft_apply(s, 0, &d2, true).unwrap();
        assert!((back.amplitudes()[x] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(qft_apply(Statevector::zero(&[8]).unwrap(), 0, &d, false).is_err());
    }

    #[test]
    fn operator_on_inner_register() {
        let mut s = Statevector::basis(&[3, 2, 2], &[2, 1, 0]).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| C64::new(v, 0.0)));
        s.apply_operator(&[2], &x).unwrap();
        assert_eq!(s, Statevector::basis(&[3, 2, 2], &[2, 1, 1]).unwrap());
        s.apply_operator(&[1], &x).unwrap();
        assert_eq!(s, Statevector::basis(&[3, 2, 2], &[2, 0, 1]).unwrap());
    }

    #[test]
    fn joint_operator_matches_kronecker_order() {
        // swap on two qubits listed in reverse order is still a swap
        let swap = DMatrix::from_fn(4, 4, |i, j| {
            let (a, b) = (j / 2, j % 2);
            C64::new(if i == b * 2 + a { 1.0 } else { 0.0 }, 0.0)
        });
        let mut s = Statevector::basis(&[2, 2, 2], &[1, 0, 0]).unwrap();
        s.apply_operator(&[2, 0], &swap).unwrap();
        assert_eq!(s, Statevector::basis(&[2, 2, 2], &[0, 0, 1]).unwrap());
    }

    #[test]
    fn modular_add_round_trip() {
        let mut s = Statevector::basis(&[5, 5], &[3, 4]).unwrap();
        s.apply_mod_add(0, 1, false).unwrap();
        assert_eq!(s, Statevector::basis(&[5, 5], &[3, 2]).unwrap());
        s.apply_mod_add(0, 1, true).unwrap();
        assert_eq!(s, Statevector::basis(&[5, 5], &[3, 4]).unwrap());
    }

    #[test]
    fn postselect_and_restrict() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = vec![
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(h, 0.0),
        ];
        let mut s = Statevector::from_amplitudes(amps, &[2, 2]).unwrap();
        for p in s.marginal(0).unwrap() {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        }
        let p = s.postselect(&[(1, 1)]).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        let rest = s.restrict(&[(1, 1)]).unwrap();
        assert_eq!(rest.shape(), &[2]);
        assert_abs_diff_eq!(rest.amplitudes()[1].re, 1.0, epsilon = 1e-15);

        let mut zero = Statevector::zero(&[2]).unwrap();
        assert!(matches!(
            zero.postselect(&[(0, 1)]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn measurement() {
        let mut rng = crate::seeded_rng(5, 0);
        let product = Statevector::basis(&[4, 3], &[2, 1]).unwrap();
        assert!((0..50).all(|_| measure_register(product.clone(), 0, &mut rng).unwrap() == 2));

        let uniform = qft_apply(
            Statevector::zero(&[4]).unwrap(),
            0,
            &GridDomain::new(1, 4).unwrap(),
            false,
        )
        .unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[measure_register(uniform.clone(), 0, &mut rng).unwrap()] += 1;
        }
        assert!(counts
            .iter()
            .all(|&c| (c as f64 / 1e5 - 0.25).abs() <= 0.01));
    }
}
