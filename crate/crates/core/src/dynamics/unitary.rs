use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinspace::{check_dim, Operator, QuantumState};

/// Largest `|A - A^dagger|` tolerated before an operator is rejected as
/// non-Hermitian, relative to its largest entry.
const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) fn hermiticity_defect(op: &Operator) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..op.nrows() {
        for c in r..op.ncols() {
            worst = worst.max((op[(r, c)] - op[(c, r)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn check_hermitian(op: &Operator) -> Result<()> {
    check_dim(op.nrows(), op.ncols())?;
    let scale = op.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermiticity_defect(op);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Spectral decomposition of a Hermitian generator, reused for `exp(-i H t)`
/// at any `t`.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigenvalues: Vec<f64>,
    eigenvectors: Operator,
}

impl Propagator {
    pub fn new(h: &Operator) -> Result<Self> {
        check_hermitian(h)?;
        let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0).ok_or_else(|| {
            Error::InvalidParameter("eigendecomposition did not converge".into())
        })?;
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `exp(-i H t)` as a dense matrix.
    pub fn evolution_operator(&self, t: f64) -> Operator {
        let phases = DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        let mut scaled = self.eigenvectors.clone();
        for (mut col, phase) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *phase;
        }
        scaled * self.eigenvectors.adjoint()
    }

    pub fn apply(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        check_dim(self.dim(), state.dim())?;
        let coeffs = self.eigenvectors.adjoint() * state.amplitudes();
        let evolved = DVector::from_iterator(
            self.dim(),
            coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
        );
        QuantumState::from_amplitudes(&self.eigenvectors * evolved)
    }
}

/// `exp(-i H t) |psi>` through the eigendecomposition of `H`.
pub fn unitary_propagate(initial: &QuantumState, h: &Operator, t: f64) -> Result<QuantumState> {
    Propagator::new(h)?.apply(initial, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{expectation, one_body_purity};
    use crate::spinspace::{angular_momentum_operators, build_hamiltonian, fock_state, ModelParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_time_is_identity() {
        let ops = angular_momentum_operators(10).unwrap();
        let h = build_hamiltonian(&ModelParams::new(10, 1.0, 0.0), &ops).unwrap();
        let psi = crate::spinspace::coherent_state(10, 0.4, 1.0).unwrap();
        let out = unitary_propagate(&psi, &h, 0.0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes().iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn diagonal_hamiltonian_gives_pure_phases() {
        let ops = angular_momentum_operators(8).unwrap();
        let u = 0.37;
        let h = Operator::from_fn(9, 9, |r, c| {
            if r == c {
                ops.jz_sq[(r, c)] * u
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let psi = crate::spinspace::maximally_uncertain_estimate(8, 3).unwrap();
        let t = 2.3;
        let out = unitary_propagate(&psi, &h, t).unwrap();
        for i in 0..9 {
            let m = i as f64 - 4.0;
            let want = psi.amplitudes()[i] * Complex64::from_polar(1.0, -u * m * m * t);
            assert_abs_diff_eq!((out.amplitudes()[i] - want).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn rabi_oscillation_of_the_imbalance() {
        let n = 100;
        let params = ModelParams::new(n, 0.0, 0.0).with_bias(0.0);
        let ops = angular_momentum_operators(n).unwrap();
        let h = build_hamiltonian(&params, &ops).unwrap();
        let prop = Propagator::new(&h).unwrap();
        let psi0 = fock_state(n, 50.0).unwrap();
        for step in 0..=40 {
            let t = step as f64 * 10.0 * 2.0 * PI / 40.0;
            let psi = prop.apply(&psi0, t).unwrap();
            assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(expectation(&psi, &ops.jz).unwrap(), 50.0 * t.cos(), epsilon = 1e-8);
            assert_abs_diff_eq!(one_body_purity(&psi, &ops).unwrap(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn rejects_non_hermitian_generators() {
        let ops = angular_momentum_operators(3).unwrap();
        assert!(matches!(
            Propagator::new(&ops.jplus),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn evolution_operator_is_unitary() {
        let ops = angular_momentum_operators(20).unwrap();
        let h = build_hamiltonian(&ModelParams::new(20, 1.0, 0.0), &ops).unwrap();
        let u = Propagator::new(&h).unwrap().evolution_operator(0.77);
        let defect = (&u * u.adjoint() - Operator::identity(21, 21))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(defect < 1e-12);
    }
}
