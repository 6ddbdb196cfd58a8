//! Gate lists over a fixed register layout.

use nalgebra::{DMatrix, Matrix2};

use super::state::Statevector;
use crate::error::{argument, Error, Result};
use crate::kernels::DenseOperator;
use crate::C64;

/// `[[cos t, -sin t], [sin t, cos t]]`
pub fn rotation(theta: f64) -> Matrix2<C64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    )
}

pub fn pauli_x() -> Matrix2<C64> {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    Matrix2::new(o, l, l, o)
}

pub fn identity2() -> Matrix2<C64> {
    Matrix2::identity()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Dense unitary on the joint space of the listed registers.
    Operator {
        registers: Vec<usize>,
        matrix: DMatrix<C64>,
    },
    /// `|s, t> -> |s, t + s>` (or `t - s`) modulo the target dimension.
    ModAdd {
        source: usize,
        target: usize,
        subtract: bool,
    },
    /// Qubit gate chosen by the joint value of the control registers.
    Controlled {
        controls: Vec<usize>,
        target: usize,
        table: Vec<Matrix2<C64>>,
    },
}

impl Gate {
    fn adjoint(&self) -> Gate {
        match self {
            Gate::Operator { registers, matrix } => Gate::Operator {
                registers: registers.clone(),
                matrix: matrix.adjoint(),
            },
            Gate::ModAdd {
                source,
                target,
                subtract,
            } => Gate::ModAdd {
                source: *source,
                target: *target,
                subtract: !subtract,
            },
            Gate::Controlled {
                controls,
                target,
                table,
            } => Gate::Controlled {
                controls: controls.clone(),
                target: *target,
                table: table.iter().map(|m| m.adjoint()).collect(),
            },
        }
    }

    fn remap(&self, map: &[usize]) -> Gate {
        match self {
            Gate::Operator { registers, matrix } => Gate::Operator {
                registers: registers.iter().map(|&r| map[r]).collect(),
                matrix: matrix.clone(),
            },
            Gate::ModAdd {
                source,
                target,
                subtract,
            } => Gate::ModAdd {
                source: map[*source],
                target: map[*target],
                subtract: *subtract,
            },
            Gate::Controlled {
                controls,
                target,
                table,
            } => Gate::Controlled {
                controls: controls.iter().map(|&r| map[r]).collect(),
                target: map[*target],
                table: table.clone(),
            },
        }
    }

    fn apply(&self, state: &mut Statevector) -> Result<()> {
        match self {
            Gate::Operator { registers, matrix } => state.apply_operator(registers, matrix),
            Gate::ModAdd {
                source,
                target,
                subtract,
            } => state.apply_mod_add(*source, *target, *subtract),
            Gate::Controlled {
                controls,
                target,
                table,
            } => state.apply_controlled(controls, *target, table),
        }
    }
}

/// An ordered gate list acting on registers of fixed dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    layout: Vec<usize>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(layout: Vec<usize>) -> Self {
        Self {
            layout,
            gates: Vec::new(),
        }
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn dim(&self) -> usize {
        self.layout.iter().product()
    }

    fn register_dim(&self, r: usize) -> Result<usize> {
        self.layout
            .get(r)
            .copied()
            .ok_or_else(|| argument(format!("circuit has no register {r}")))
    }

    /// Appends a gate after checking it against the layout.
    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        match &gate {
            Gate::Operator { registers, matrix } => {
                let mut dim = 1;
                for &r in registers {
                    dim *= self.register_dim(r)?;
                }
                if matrix.nrows() != dim || matrix.ncols() != dim {
                    return Err(Error::Shape {
                        expected: dim,
                        actual: matrix.nrows(),
                    });
                }
            }
            Gate::ModAdd { source, target, .. } => {
                self.register_dim(*source)?;
                self.register_dim(*target)?;
            }
            Gate::Controlled {
                controls,
                target,
                table,
            } => {
                if self.register_dim(*target)? != 2 {
                    return Err(argument("controlled target must be a qubit"));
                }
                let mut combos = 1;
                for &c in controls {
                    combos *= self.register_dim(c)?;
                }
                if table.len() != combos {
                    return Err(Error::Shape {
                        expected: combos,
                        actual: table.len(),
                    });
                }
            }
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends every gate of `other`, which must share the layout.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.layout != self.layout {
            return Err(argument("cannot join circuits with different layouts"));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(self)
    }

    /// Gates reversed and conjugated.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            layout: self.layout.clone(),
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }

    /// Runs the circuit on a state with exactly this layout.
    pub fn apply(&self, state: &mut Statevector) -> Result<()> {
        if state.shape() != self.layout.as_slice() {
            return Err(argument("state shape differs from circuit layout"));
        }
        self.gates.iter().try_for_each(|g| g.apply(state))
    }

    /// Runs the circuit with circuit register `i` bound to state register `map[i]`.
    pub fn apply_mapped(&self, state: &mut Statevector, map: &[usize]) -> Result<()> {
        if map.len() != self.layout.len() {
            return Err(Error::Shape {
                expected: self.layout.len(),
                actual: map.len(),
            });
        }
        for (i, &m) in map.iter().enumerate() {
            if state.shape().get(m) != Some(&self.layout[i]) {
                return Err(argument(format!(
                    "state register {m} does not match circuit register {i}"
                )));
            }
        }
        self.gates
            .iter()
            .try_for_each(|g| g.remap(map).apply(state))
    }

    /// The full unitary, column by column; exponential in the layout size.
    pub fn to_dense(&self) -> Result<DenseOperator> {
        let n = self.dim();
        let mut entries = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut amps = vec![C64::new(0.0, 0.0); n];
            amps[j] = C64::new(1.0, 0.0);
            let mut state = Statevector::from_amplitudes(amps, &self.layout)?;
            self.apply(&mut state)?;
            entries.set_column(j, &nalgebra::DVector::from_column_slice(state.amplitudes()));
        }
        DenseOperator::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_inverts() {
        let mut c = Circuit::new(vec![3, 3, 2]);
        let shift = DMatrix::from_fn(3, 3, |i, j| {
            C64::new(if i == (j + 1) % 3 { 1.0 } else { 0.0 }, 0.0)
        });
        c.push(Gate::Operator {
            registers: vec![0],
            matrix: shift,
        })
        .unwrap();
        c.push(Gate::ModAdd {
            source: 0,
            target: 1,
            subtract: false,
        })
        .unwrap();
        c.push(Gate::Controlled {
            controls: vec![1],
            target: 2,
            table: vec![rotation(0.3), pauli_x(), rotation(-1.1)],
        })
        .unwrap();
        let mut round = c.clone();
        round.extend(&c.adjoint()).unwrap();
        let u = round.to_dense().unwrap();
        assert!(u.max_abs_diff(&DenseOperator::identity(18)) < 1e-14);
        assert!(c.to_dense().unwrap().is_unitary(1e-13));
    }

    #[test]
    fn push_validates() {
        let mut c = Circuit::new(vec![4, 2]);
        assert!(c
            .push(Gate::Controlled {
                controls: vec![1],
                target: 0,
                table: vec![identity2(); 2]
            })
            .is_err());
        assert!(c
            .push(Gate::Controlled {
                controls: vec![0],
                target: 1,
                table: vec![identity2(); 3]
            })
            .is_err());
        assert!(c
            .push(Gate::Operator {
                registers: vec![2],
                matrix: DMatrix::identity(2, 2)
            })
            .is_err());
    }

    #[test]
    fn mapped_application() {
        let mut c = Circuit::new(vec![2]);
        c.push(Gate::Operator {
            registers: vec![0],
            matrix: DMatrix::from_fn(2, 2, |i, j| pauli_x()[(i, j)]),
        })
        .unwrap();
        let mut s = Statevector::zero(&[3, 2]).unwrap();
        c.apply_mapped(&mut s, &[1]).unwrap();
        assert_eq!(s, Statevector::basis(&[3, 2], &[0, 1]).unwrap());
        assert!(c.apply_mapped(&mut s, &[0]).is_err());
    }
}
