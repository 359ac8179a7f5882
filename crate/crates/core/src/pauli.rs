//! Sparse Pauli-string algebra.
//!
//! A Pauli string on `n` qubits is stored as a pair of bit masks `(x, z)` over
//! the amplitude index, so qubit `q` (0-based) owns bit `n - 1 - q`: qubit 0 is
//! the most significant bit. The operator represented is
//! `i^{|x & z|} X^x Z^z`, which makes every stored string Hermitian.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest register a [`PauliString`] can address.
pub const MAX_QUBITS: usize = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `i^k` for `k` taken mod 4.
pub(crate) fn i_pow<T: Real>(k: u32) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// Coefficient-free Pauli string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self { n, x: 0, z: 0 }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, &p) in letters.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// Single-site operator `p` on qubit `q`.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(q, p);
        s
    }

    /// Product of single-site operators given as `(qubit, letter)` pairs.
    /// Repeated qubits are not allowed.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(q, p) in sites {
            debug_assert_eq!(s.get(q), Pauli::I, "qubit {q} assigned twice");
            s.set(q, p);
        }
        s
    }

    #[inline]
    fn bit(&self, q: usize) -> u64 {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        1u64 << (self.n - 1 - q)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        let b = self.bit(q);
        let (x, z) = p.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn get(&self, q: usize) -> Pauli {
        let b = self.bit(q);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n).map(|q| self.get(q)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Qubits on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    /// Number of `Y` letters, i.e. the exponent in `i^{|x & z|}`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `self * other = i^k * result`; returns `(k mod 4, result)`.
    pub fn mul(&self, other: &Self) -> (u32, Self) {
        assert_eq!(self.n, other.n, "Pauli strings on different registers");
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let out = Self { n: self.n, x, z };
        // i^{a} X^x1 Z^z1 i^{b} X^x2 Z^z2 = i^{a+b} (-1)^{|z1 & x2|} X^x Z^z
        // and X^x Z^z = i^{-|x & z|} P.
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones() + 4
            - (out.y_count() % 4);
        (k % 4, out)
    }

    /// Image of the basis state `|b>`: `P|b> = phase * |b ^ x>`.
    #[inline]
    pub fn act_on_basis<T: Real>(&self, b: usize) -> (usize, Complex<T>) {
        let sign = 2 * ((b as u64 & self.z).count_ones() % 2);
        (b ^ self.x as usize, i_pow(self.y_count() + sign))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Format(format!("bad Pauli letter {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_QUBITS {
            return Err(Error::Format(format!("Pauli string longer than {MAX_QUBITS}")));
        }
        Ok(Self::from_letters(&letters))
    }
}

impl serde::Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Pauli string with a complex coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm<T> {
    pub string: PauliString,
    pub coeff: Complex<T>,
}

impl<T: Real> PauliTerm<T> {
    pub fn new(string: PauliString, coeff: Complex<T>) -> Self {
        Self { string, coeff }
    }

    pub fn real(string: PauliString, coeff: T) -> Self {
        Self::new(string, Complex::new(coeff, T::zero()))
    }

    pub fn n(&self) -> usize {
        self.string.n()
    }

    pub fn letters(&self) -> Vec<Pauli> {
        self.string.letters()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (k, s) = self.string.mul(&other.string);
        Self::new(s, self.coeff * other.coeff * i_pow(k))
    }

    /// `[self, other]`, which is zero or a single term.
    pub fn commutator(&self, other: &Self) -> Option<Self> {
        if self.string.commutes_with(&other.string) {
            return None;
        }
        let p = self.mul(other);
        Some(Self::new(p.string, p.coeff * T::of(2.0)))
    }
}

/// Sum of Pauli terms with unique strings, kept in canonical (sorted) order.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum<T> {
    n: usize,
    terms: BTreeMap<PauliString, Complex<T>>,
}

impl<T: Real> OperatorSum<T> {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self { n, terms: BTreeMap::new() }
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = PauliTerm<T>>) -> Result<Self> {
        let mut out = Self::zero(n);
        for t in terms {
            out.add_term(t)?;
        }
        Ok(out)
    }

    pub fn from_term(term: PauliTerm<T>) -> Self {
        let mut out = Self::zero(term.n());
        out.insert(term.string, term.coeff);
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges a term into the sum. Exact cancellations are dropped.
    pub fn add_term(&mut self, term: PauliTerm<T>) -> Result<()> {
        if term.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: term.n() });
        }
        self.insert(term.string, term.coeff);
        Ok(())
    }

    fn insert(&mut self, s: PauliString, c: Complex<T>) {
        let entry = self.terms.entry(s).or_insert_with(|| Complex::new(T::zero(), T::zero()));
        *entry = *entry + c;
        if entry.re == T::zero() && entry.im == T::zero() {
            self.terms.remove(&s);
        }
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex<T> {
        self.terms.get(s).copied().unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn terms(&self) -> impl Iterator<Item = PauliTerm<T>> + '_ {
        self.terms.iter().map(|(s, c)| PauliTerm::new(*s, *c))
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.keys()
    }

    /// Largest imaginary part among coefficients.
    pub fn max_imag(&self) -> T {
        self.terms.values().fold(T::zero(), |m, c| m.max(c.im.abs()))
    }

    /// All coefficients real within `tol`: the canonical strings are
    /// Hermitian, so this is Hermiticity of the whole sum.
    pub fn is_hermitian_within(&self, tol: T) -> bool {
        self.max_imag() <= tol
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_hermitian_within(T::norm_tol())
    }

    pub fn dagger(&self) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|(s, c)| (*s, c.conj())).collect() }
    }

    pub fn scale(&self, f: Complex<T>) -> Self {
        let mut out = Self::zero(self.n);
        for (s, c) in &self.terms {
            out.insert(*s, *c * f);
        }
        out
    }

    pub fn scale_real(&self, f: T) -> Self {
        self.scale(Complex::new(f, T::zero()))
    }

    /// `Σ |c|²` over coefficients (the Pauli-coefficient norm squared).
    pub fn coeff_norm_sqr(&self) -> T {
        self.terms.values().fold(T::zero(), |a, c| a + c.norm_sqr())
    }

    /// `Σ |c|`, an upper bound on the operator norm.
    pub fn coeff_l1(&self) -> T {
        self.terms.values().fold(T::zero(), |a, c| a + c.norm())
    }

    /// `Σ conj(a_P) b_P` in the Pauli-coefficient representation.
    pub fn coeff_inner(&self, other: &Self) -> Complex<T> {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex::new(T::zero(), T::zero());
        for (s, a) in &small.terms {
            if let Some(b) = large.terms.get(s) {
                acc = acc + if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        acc
    }

    /// Hilbert-Schmidt inner product `Tr(A† B)` with the plain matrix trace.
    pub fn hs_inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_n(other.n)?;
        Ok(self.coeff_inner(other) * T::of(2f64.powi(self.n as i32)))
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_n(other.n)?;
        let mut out = Self::zero(self.n);
        for a in self.terms() {
            for b in other.terms() {
                let p = a.mul(&b);
                out.insert(p.string, p.coeff);
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB - BA`, computed term-pairwise without dense matrices.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_n(other.n)?;
        let mut out = Self::zero(self.n);
        for a in self.terms() {
            for b in other.terms() {
                if let Some(c) = a.commutator(&b) {
                    out.insert(c.string, c.coeff);
                }
            }
        }
        Ok(out)
    }

    /// `self += f * other`.
    pub fn add_scaled(&mut self, f: Complex<T>, other: &Self) -> Result<()> {
        self.check_n(other.n)?;
        for (s, c) in &other.terms {
            self.insert(*s, *c * f);
        }
        Ok(())
    }

    /// Drops terms whose coefficient magnitude is at most `tol`.
    pub fn prune(&mut self, tol: T) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    /// Same operator with the coefficients' imaginary parts discarded.
    pub fn real_part(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (s, c) in &self.terms {
            out.insert(*s, Complex::new(c.re, T::zero()));
        }
        out
    }
}

impl<T: Real> Add for &OperatorSum<T> {
    type Output = OperatorSum<T>;

    fn add(self, rhs: Self) -> OperatorSum<T> {
        assert_eq!(self.n, rhs.n, "operator sums on different registers");
        let mut out = self.clone();
        for (s, c) in &rhs.terms {
            out.insert(*s, *c);
        }
        out
    }
}

impl<T: Real> Sub for &OperatorSum<T> {
    type Output = OperatorSum<T>;

    fn sub(self, rhs: Self) -> OperatorSum<T> {
        self + &(-rhs)
    }
}

impl<T: Real> Neg for &OperatorSum<T> {
    type Output = OperatorSum<T>;

    fn neg(self) -> OperatorSum<T> {
        self.scale_real(-T::one())
    }
}

impl<T: Real> Mul for &OperatorSum<T> {
    type Output = OperatorSum<T>;

    fn mul(self, rhs: Self) -> OperatorSum<T> {
        self.try_mul(rhs).expect("operator sums on different registers")
    }
}

impl<T: Real> fmt::Display for OperatorSum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (s, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.im == T::zero() {
                write!(f, "{}*{s}", c.re)?;
            } else {
                write!(f, "({}{:+}i)*{s}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}
