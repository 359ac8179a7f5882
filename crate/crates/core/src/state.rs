//! Pure-state vectors and the operations that act on them.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{OperatorSum, PauliString, PauliTerm};
use crate::scalar::Real;

/// `2^n` complex amplitudes; qubit 0 is the most significant index bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    n: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// Validated constructor: length `2^n` and unit norm within tolerance.
    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let s = Self::from_raw(amplitudes)?;
        let norm = s.norm_sqr().sqrt();
        if (norm - T::one()).abs() > T::norm_tol() {
            return Err(Error::Numerical(format!("state norm {norm} is not 1")));
        }
        Ok(s)
    }

    /// Scales the amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let mut s = Self::from_raw(amplitudes)?;
        let norm = s.norm_sqr().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        for a in &mut s.amplitudes {
            *a = *a / norm;
        }
        Ok(s)
    }

    /// Unchecked norm; length must still be a power of two.
    pub(crate) fn from_raw(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("{len} amplitudes is not a power of two")));
        }
        Ok(Self { n: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn basis(n: usize, index: usize) -> Self {
        assert!(index < 1 << n, "basis index out of range");
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Self { n, amplitudes }
    }

    pub fn zero_state(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// Haar-random state from normalized complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self
    where
        StandardNormal: Distribution<T>,
    {
        let amps = (0..1usize << n)
            .map(|_| Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is nonzero")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |a, c| a + c.norm_sqr())
    }

    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_n(other.n)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn check_n(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    /// Converts amplitudes to another precision.
    pub fn cast<U: Real>(&self) -> StateVector<U> {
        StateVector {
            n: self.n,
            amplitudes: self
                .amplitudes
                .iter()
                .map(|a| Complex::new(U::of(a.re.as_f64()), U::of(a.im.as_f64())))
                .collect(),
        }
    }
}

/// `coeff * P|psi>`. The result is unit-norm only when `|coeff| = 1`.
pub fn pauli_apply<T: Real>(term: &PauliTerm<T>, psi: &StateVector<T>) -> Result<StateVector<T>> {
    psi.check_n(term.n())?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); psi.dim()];
    for (b, a) in psi.amplitudes.iter().enumerate() {
        let (target, phase) = term.string.act_on_basis::<T>(b);
        out[target] = phase * term.coeff * a;
    }
    StateVector::from_raw(out)
}

/// `<psi|P|psi>` for a Hermitian string; real up to rounding.
pub(crate) fn string_expectation<T: Real>(s: &PauliString, amps: &[Complex<T>]) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (b, a) in amps.iter().enumerate() {
        let (target, phase) = s.act_on_basis::<T>(b);
        acc = acc + amps[target].conj() * phase * a;
    }
    acc
}

/// `<psi|H|psi>` for Hermitian `H`.
pub fn expectation<T: Real>(h: &OperatorSum<T>, psi: &StateVector<T>) -> Result<T> {
    psi.check_n(h.n())?;
    let scale = T::one().max(h.coeff_l1());
    if !h.is_hermitian_within(T::norm_tol() * scale) {
        return Err(Error::NotHermitian(h.max_imag().as_f64()));
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    for t in h.terms() {
        acc = acc + t.coeff * string_expectation(&t.string, &psi.amplitudes);
    }
    if acc.im.abs() > T::norm_tol() * scale {
        return Err(Error::Numerical(format!("expectation has imaginary part {}", acc.im)));
    }
    Ok(acc.re)
}

/// Outcome distribution of measuring `qubits` (in the given order, the first
/// being the most significant outcome bit) in the computational basis.
pub fn marginal_probs<T: Real>(psi: &StateVector<T>, qubits: &[usize]) -> Result<Vec<T>> {
    let n = psi.n;
    if qubits.is_empty() {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    let mut seen = 0u64;
    for &q in qubits {
        if q >= n {
            return Err(Error::InvalidSubset(format!("qubit {q} out of range for {n} qubits")));
        }
        if seen & (1 << q) != 0 {
            return Err(Error::InvalidSubset(format!("qubit {q} repeated")));
        }
        seen |= 1 << q;
    }
    let k = qubits.len();
    let shifts: Vec<usize> = qubits.iter().map(|&q| n - 1 - q).collect();
    let mut probs = vec![T::zero(); 1 << k];
    for (b, a) in psi.amplitudes.iter().enumerate() {
        let mut outcome = 0usize;
        for &s in &shifts {
            outcome = (outcome << 1) | ((b >> s) & 1);
        }
        probs[outcome] = probs[outcome] + a.norm_sqr();
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn term(s: &str) -> PauliTerm<f64> {
        PauliTerm::real(s.parse().unwrap(), 1.0)
    }

    #[test]
    fn z_on_zero_is_eigenstate() {
        let out = pauli_apply(&term("Z"), &StateVector::zero_state(1)).unwrap();
        assert_eq!(out.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn xx_flips_both_bits() {
        let out = pauli_apply(&term("XX"), &StateVector::zero_state(2)).unwrap();
        assert_eq!(out, StateVector::basis(2, 3));
    }

    #[test]
    fn y_on_zero_gives_i_one() {
        let out = pauli_apply(&term("Y"), &StateVector::zero_state(1)).unwrap();
        assert_eq!(out.amplitudes(), &[c(0.0, 0.0), c(0.0, 1.0)]);
    }

    #[test]
    fn pauli_apply_rejects_wrong_size() {
        assert!(matches!(
            pauli_apply(&term("XX"), &StateVector::<f64>::zero_state(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn simple_expectations() {
        let z = OperatorSum::from_term(term("Z"));
        assert_eq!(expectation(&z, &StateVector::zero_state(1)).unwrap(), 1.0);
        let x = OperatorSum::from_term(term("X"));
        let plus = StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(expectation(&x, &plus).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let h = OperatorSum::from_term(PauliTerm::new("Z".parse().unwrap(), c(0.0, 1.0)));
        assert!(matches!(
            expectation(&h, &StateVector::zero_state(1)),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn marginals_of_known_states() {
        let p = marginal_probs(&StateVector::<f64>::zero_state(2), &[0, 1]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)])
            .unwrap();
        let p = marginal_probs(&bell, &[0]).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);

        let mut ghz = vec![c(0.0, 0.0); 16];
        ghz[0] = c(h, 0.0);
        ghz[15] = c(h, 0.0);
        let ghz = StateVector::from_amplitudes(ghz).unwrap();
        let p = marginal_probs(&ghz, &[0, 1]).unwrap();
        assert_abs_diff_eq!(p.as_slice(), [0.5, 0.0, 0.0, 0.5].as_slice(), epsilon = 1e-15);
    }

    #[test]
    fn marginal_order_follows_subset_order() {
        // |01>: qubit 0 is 0, qubit 1 is 1
        let psi = StateVector::<f64>::basis(2, 0b01);
        assert_eq!(marginal_probs(&psi, &[0, 1]).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(marginal_probs(&psi, &[1, 0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn marginal_rejects_bad_subsets() {
        let psi = StateVector::<f64>::zero_state(3);
        assert!(marginal_probs(&psi, &[0, 0]).is_err());
        assert!(marginal_probs(&psi, &[3]).is_err());
        assert!(marginal_probs(&psi, &[]).is_err());
    }

    #[test]
    fn full_marginal_is_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let psi = StateVector::<f64>::random(n, &mut rng);
            let all: Vec<usize> = (0..n).collect();
            assert_eq!(marginal_probs(&psi, &all).unwrap(), psi.probabilities());
        }
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = StateVector::<f32>::random(4, &mut rng);
        let p = marginal_probs(&psi, &[2, 0]).unwrap();
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        let zz = OperatorSum::from_term(PauliTerm::real(
            PauliString::from_sites(4, &[(0, Pauli::Z), (2, Pauli::Z)]),
            1.0f32,
        ));
        let e = expectation(&zz, &psi).unwrap();
        let direct = p[0] - p[1] - p[2] + p[3];
        assert!((e - direct).abs() < 1e-5);
    }
}
