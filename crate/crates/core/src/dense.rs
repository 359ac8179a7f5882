//! Dense matrices and exact diagonalization for small registers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::pauli::{i_pow, OperatorSum};
use crate::scalar::{EigenReal, Real};
use crate::state::StateVector;

/// Default register cap for dense construction (4096 x 4096 matrices).
pub const DEFAULT_DENSE_CAP: usize = 12;

/// Amplitudes below this magnitude are skipped when fixing the global phase.
const PHASE_ANCHOR_TOL: f64 = 1e-8;

pub fn dense_matrix<T: Real>(h: &OperatorSum<T>) -> Result<DMatrix<Complex<T>>> {
    dense_matrix_capped(h, DEFAULT_DENSE_CAP)
}

/// `Σ_k c_k P_k` as a `2^n x 2^n` matrix in the qubit-0-most-significant basis.
pub fn dense_matrix_capped<T: Real>(h: &OperatorSum<T>, cap: usize) -> Result<DMatrix<Complex<T>>> {
    let n = h.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let dim = 1usize << n;
    let mut m = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
    for t in h.terms() {
        for b in 0..dim {
            let (row, phase) = t.string.act_on_basis::<T>(b);
            m[(row, b)] += t.coeff * phase;
        }
    }
    Ok(m)
}

/// Dense real matrix when every element is real, which holds for the spin
/// chains here (no odd powers of `Y`, real couplings).
fn real_dense<T: Real>(h: &OperatorSum<T>) -> Option<DMatrix<T>> {
    let dim = 1usize << h.n();
    let mut m = DMatrix::from_element(dim, dim, T::zero());
    for t in h.terms() {
        let c = t.coeff * i_pow::<T>(t.string.y_count());
        if c.im != T::zero() {
            return None;
        }
        for b in 0..dim {
            let (row, phase) = t.string.act_on_basis::<T>(b);
            let v = t.coeff * phase;
            m[(row, b)] = m[(row, b)] + v.re;
        }
    }
    Some(m)
}

/// `H|psi>` without forming a matrix.
pub fn operator_apply<T: Real>(h: &OperatorSum<T>, psi: &StateVector<T>) -> Result<Vec<Complex<T>>> {
    if h.n() != psi.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: psi.n() });
    }
    let amps = psi.amplitudes();
    let mut out = vec![Complex::new(T::zero(), T::zero()); amps.len()];
    for t in h.terms() {
        for (b, a) in amps.iter().enumerate() {
            let (row, phase) = t.string.act_on_basis::<T>(b);
            out[row] = out[row] + t.coeff * phase * a;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GroundState<T> {
    pub energy: T,
    pub state: StateVector<T>,
    /// `E_1 - E_0`; zero for a one-dimensional space.
    pub gap: T,
}

pub fn ground_state<T: EigenReal>(h: &OperatorSum<T>) -> Result<GroundState<T>> {
    ground_state_capped(h, DEFAULT_DENSE_CAP)
}

/// Lowest eigenpair of a Hermitian operator by full dense diagonalization.
///
/// The returned vector has its first amplitude of magnitude above `1e-8` made
/// real and positive. Within a degenerate ground space the eigenvector listed
/// first by the solver is returned.
pub fn ground_state_capped<T: EigenReal>(h: &OperatorSum<T>, cap: usize) -> Result<GroundState<T>> {
    let n = h.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let scale = Float::max(T::one(), h.coeff_l1());
    if !h.is_hermitian_within(T::norm_tol() * scale) {
        return Err(Error::NotHermitian(h.max_imag().as_f64()));
    }

    let (values, vector): (Vec<T>, Vec<Complex<T>>) = match real_dense(h) {
        Some(m) => {
            let eig = SymmetricEigen::try_new(m, T::default_epsilon(), 0)
                .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
            let k = argmin(eig.eigenvalues.as_slice());
            let v = eig.eigenvectors.column(k).iter().map(|&x| Complex::new(x, T::zero())).collect();
            (eig.eigenvalues.as_slice().to_vec(), v)
        }
        None => {
            let m = dense_matrix_capped(h, cap)?;
            let eig = SymmetricEigen::try_new(m, T::default_epsilon(), 0)
                .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
            let k = argmin(eig.eigenvalues.as_slice());
            (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors.column(k).iter().copied().collect())
        }
    };

    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let energy = sorted[0];
    let gap = if sorted.len() > 1 { sorted[1] - sorted[0] } else { T::zero() };

    let mut state = StateVector::normalized(vector)?;
    fix_phase(&mut state);

    let hpsi = operator_apply(h, &state)?;
    let residual = hpsi
        .iter()
        .zip(state.amplitudes())
        .fold(T::zero(), |acc, (hv, v)| acc + (*hv - *v * energy).norm_sqr());
    let residual = Float::sqrt(residual);
    let tol = T::epsilon() * T::of(1e4) * scale;
    if !(residual < tol) {
        return Err(Error::Numerical(format!("ground-state residual {residual} exceeds {tol}")));
    }
    Ok(GroundState { energy, state, gap })
}

fn argmin<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

fn fix_phase<T: Real>(state: &mut StateVector<T>) {
    let anchor = state.amplitudes().iter().find(|a| a.norm() > T::of(PHASE_ANCHOR_TOL)).copied();
    if let Some(a) = anchor {
        let rot = a.conj() / a.norm();
        for x in state.amplitudes_mut() {
            *x = *x * rot;
        }
    }
}
