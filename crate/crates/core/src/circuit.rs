//! Parameterized circuits of Pauli rotations with adjoint-mode gradients.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dense::operator_apply;
use crate::error::{Error, Result};
use crate::pauli::{i_pow, OperatorSum, PauliString};
use crate::scalar::Real;
use crate::state::StateVector;

/// `exp(-i * scale * theta[param] * G)`, where `G` is the Pauli generator,
/// optionally restricted to the subspace where `control` reads `|1>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub generator: PauliString,
    pub control: Option<usize>,
    pub scale: f64,
    pub param: usize,
}

impl Gate {
    /// `exp(-i theta P / 2)`.
    pub fn rotation(generator: PauliString, param: usize) -> Self {
        Gate { generator, control: None, scale: 0.5, param }
    }

    /// `exp(-i theta P / 2)` applied when `control` is `|1>`.
    pub fn controlled(control: usize, generator: PauliString, param: usize) -> Self {
        Gate { generator, control: Some(control), scale: 0.5, param }
    }

    /// `exp(-i theta G)`.
    pub fn evolution(generator: PauliString, param: usize) -> Self {
        Gate { generator, control: None, scale: 1.0, param }
    }

    fn control_mask(&self) -> usize {
        self.control.map_or(0, |c| 1usize << (self.generator.n() - 1 - c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n: usize,
    num_params: usize,
    gates: Vec<Gate>,
}

#[inline]
fn parity_sign<T: Real>(bits: usize) -> T {
    if bits.count_ones() % 2 == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// In-place `exp(-i phi G_c)` with `G_c = |1><1|_c (x) P` (or `P` when
/// `cmask == 0`).
fn rotate<T: Real>(amps: &mut [Complex<T>], p: &PauliString, cmask: usize, phi: T) {
    let (c, s) = (phi.cos(), phi.sin());
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    // -i sin(phi) * i^y, the off-identity coefficient before the Z sign
    let m = Complex::new(T::zero(), -s) * i_pow::<T>(p.y_count());
    if x == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            if b & cmask == cmask {
                *a = *a * c + *a * m * parity_sign::<T>(b & z);
            }
        }
        return;
    }
    let top = 1usize << (usize::BITS - 1 - x.leading_zeros());
    for b in 0..amps.len() {
        if b & top != 0 || b & cmask != cmask {
            continue;
        }
        let b2 = b ^ x;
        let (a, a2) = (amps[b], amps[b2]);
        amps[b] = a * c + a2 * m * parity_sign::<T>(b2 & z);
        amps[b2] = a2 * c + a * m * parity_sign::<T>(b & z);
    }
}

/// `<lambda| G_c |phi>`.
fn generator_matrix_element<T: Real>(
    lambda: &[Complex<T>],
    phi: &[Complex<T>],
    p: &PauliString,
    cmask: usize,
) -> Complex<T> {
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    let mut acc = Complex::new(T::zero(), T::zero());
    for (b, a) in phi.iter().enumerate() {
        if b & cmask == cmask {
            acc += lambda[b ^ x].conj() * *a * parity_sign::<T>(b & z);
        }
    }
    acc * i_pow::<T>(p.y_count())
}

impl Circuit {
    pub fn new(n: usize, num_params: usize) -> Self {
        Circuit { n, num_params, gates: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        if gate.generator.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: gate.generator.n() });
        }
        if gate.param >= self.num_params {
            return Err(Error::InvalidArgument(format!(
                "gate parameter {} out of range for {} parameters",
                gate.param, self.num_params
            )));
        }
        if gate.generator.is_identity() {
            return Err(Error::InvalidArgument("identity generator".into()));
        }
        if let Some(c) = gate.control {
            if c >= self.n || gate.generator.get(c) != crate::pauli::Pauli::I {
                return Err(Error::InvalidArgument(format!("control qubit {c} overlaps the generator")));
            }
        }
        self.gates.push(gate);
        Ok(self)
    }

    fn check<T: Real>(&self, theta: &[T], psi: &StateVector<T>) -> Result<()> {
        if theta.len() != self.num_params {
            return Err(Error::DimensionMismatch { expected: self.num_params, found: theta.len() });
        }
        psi.check_n(self.n)
    }

    /// Output state `U(theta)|psi>`.
    pub fn run<T: Real>(&self, theta: &[T], psi: &StateVector<T>) -> Result<StateVector<T>> {
        self.check(theta, psi)?;
        let mut out = psi.clone();
        let amps = out.amplitudes_mut();
        for g in &self.gates {
            rotate(amps, &g.generator, g.control_mask(), T::of(g.scale) * theta[g.param]);
        }
        Ok(out)
    }

    /// Value and parameter gradient of `<psi(theta)| O |psi(theta)>` for a
    /// Hermitian `O` supplied through `observable`, which maps the output state
    /// to `(value, O|out>)`.
    pub fn gradient_with<T, F>(&self, theta: &[T], psi: &StateVector<T>, observable: F) -> Result<(T, Vec<T>)>
    where
        T: Real,
        F: FnOnce(&StateVector<T>) -> Result<(T, Vec<Complex<T>>)>,
    {
        let out = self.run(theta, psi)?;
        let (value, mut lambda) = observable(&out)?;
        if lambda.len() != out.dim() {
            return Err(Error::DimensionMismatch { expected: out.dim(), found: lambda.len() });
        }
        let mut phi = out.into_amplitudes();
        let mut grad = vec![T::zero(); self.num_params];
        let two = T::of(2.0);
        for g in self.gates.iter().rev() {
            let cmask = g.control_mask();
            let scale = T::of(g.scale);
            let zk = generator_matrix_element(&lambda, &phi, &g.generator, cmask);
            grad[g.param] = grad[g.param] + two * scale * zk.im;
            let back = -scale * theta[g.param];
            rotate(&mut phi, &g.generator, cmask, back);
            rotate(&mut lambda, &g.generator, cmask, back);
        }
        Ok((value, grad))
    }

    /// Value and gradient of `<psi(theta)| h |psi(theta)>`.
    pub fn expectation_gradient<T: Real>(
        &self,
        theta: &[T],
        psi: &StateVector<T>,
        h: &OperatorSum<T>,
    ) -> Result<(T, Vec<T>)> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian(h.max_imag().as_f64()));
        }
        self.gradient_with(theta, psi, |out| {
            let lambda = operator_apply(h, out)?;
            let v = out
                .amplitudes()
                .iter()
                .zip(&lambda)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (a, l)| acc + a.conj() * *l);
            Ok((v.re, lambda))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliTerm};
    use crate::state::expectation;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn rx_on_zero_gives_cos_expectation() {
        let mut c = Circuit::new(1, 1);
        c.push(Gate::rotation(ps("X"), 0)).unwrap();
        let z = OperatorSum::from_term(PauliTerm::real(ps("Z"), 1.0));
        for &t in &[0.0, 0.3, 1.2, -2.5] {
            let (v, g) = c.expectation_gradient(&[t], &StateVector::zero_state(1), &z).unwrap();
            assert_abs_diff_eq!(v, f64::cos(t), epsilon = 1e-14);
            assert_abs_diff_eq!(g[0], -f64::sin(t), epsilon = 1e-14);
        }
    }

    #[test]
    fn evolution_uses_full_angle() {
        let mut c = Circuit::new(1, 1);
        c.push(Gate::evolution(ps("Y"), 0)).unwrap();
        let z = OperatorSum::from_term(PauliTerm::real(ps("Z"), 1.0));
        let (v, g) = c.expectation_gradient(&[0.4], &StateVector::zero_state(1), &z).unwrap();
        assert_abs_diff_eq!(v, f64::cos(0.8), epsilon = 1e-14);
        assert_abs_diff_eq!(g[0], -2.0 * f64::sin(0.8), epsilon = 1e-14);
    }

    #[test]
    fn controlled_rotation_acts_only_on_one_branch() {
        let mut c = Circuit::new(2, 1);
        c.push(Gate::controlled(0, PauliString::single(2, 1, Pauli::X), 0)).unwrap();
        let pi = std::f64::consts::PI;
        let off = c.run(&[pi], &StateVector::basis(2, 0b00)).unwrap();
        assert_abs_diff_eq!(off.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        let on = c.run(&[pi], &StateVector::basis(2, 0b10)).unwrap();
        assert_abs_diff_eq!(on.amplitudes()[0b11].norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn control_overlapping_generator_is_rejected() {
        let mut c = Circuit::new(2, 1);
        assert!(c.push(Gate::controlled(1, ps("ZX"), 0)).is_err());
        assert!(c.push(Gate::rotation(ps("II"), 0)).is_err());
        assert!(c.push(Gate::rotation(ps("XX"), 1)).is_err());
    }

    #[test]
    fn zero_angles_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = Circuit::new(3, 2);
        c.push(Gate::rotation(ps("XYZ"), 0)).unwrap();
        c.push(Gate::controlled(2, ps("YXI"), 1)).unwrap();
        let psi = StateVector::<f64>::random(3, &mut rng);
        assert_eq!(c.run(&[0.0, 0.0], &psi).unwrap(), psi);
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = Circuit::new(3, 3);
        for (s, p) in [("XIZ", 0), ("IYY", 1), ("ZZI", 2), ("YXZ", 0)] {
            c.push(Gate::rotation(ps(s), p)).unwrap();
        }
        c.push(Gate::controlled(0, ps("IXY"), 2)).unwrap();
        let h = OperatorSum::from_terms(
            3,
            [PauliTerm::real(ps("ZII"), 0.7), PauliTerm::real(ps("XXI"), -0.3), PauliTerm::real(ps("IYZ"), 1.1)],
        )
        .unwrap();
        let psi = StateVector::<f64>::random(3, &mut rng);
        let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (v, g) = c.expectation_gradient(&theta, &psi, &h).unwrap();
        assert_abs_diff_eq!(v, expectation(&h, &c.run(&theta, &psi).unwrap()).unwrap(), epsilon = 1e-12);
        for k in 0..3 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += 1e-5;
            tm[k] -= 1e-5;
            let fp = expectation(&h, &c.run(&tp, &psi).unwrap()).unwrap();
            let fm = expectation(&h, &c.run(&tm, &psi).unwrap()).unwrap();
            assert_abs_diff_eq!(g[k], (fp - fm) / 2e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn runs_in_single_precision() {
        let mut c = Circuit::new(2, 1);
        c.push(Gate::rotation(ps("XY"), 0)).unwrap();
        let out = c.run(&[0.5f32], &StateVector::<f32>::zero_state(2)).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-6);
    }
}
