//! Dynamical Lie algebras of Pauli generators, g-purity and the physics score.
//!
//! Basis elements are Hermitian and orthonormal under the plain matrix trace,
//! `Tr(B_j B_k) = δ_jk`; purities use the same trace.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pauli::{OperatorSum, Pauli, PauliString, PauliTerm};
use crate::scalar::Real;
use crate::state::{string_expectation, StateVector};

pub const DEFAULT_CLOSURE_CAP: usize = 4096;
pub const BASIS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LieBasis<T> {
    n: usize,
    elements: Vec<OperatorSum<T>>,
    generator_fingerprint: String,
}

/// Input to [`g_purity`]: a pure state (`|ψ><ψ|` implied) or an operator.
#[derive(Clone, Copy, Debug)]
pub enum Density<'a, T> {
    Pure(&'a StateVector<T>),
    Operator(&'a OperatorSum<T>),
}

/// Order-independent hash of a generator set.
pub fn generator_fingerprint<T: Real>(generators: &[OperatorSum<T>]) -> String {
    let mut lines: Vec<String> = generators
        .iter()
        .map(|g| {
            let mut line = format!("{}:", g.n());
            for t in g.terms() {
                line.push_str(&format!("{}({},{});", t.string, t.coeff.re.as_f64(), t.coeff.im.as_f64()));
            }
            line
        })
        .collect();
    lines.sort();
    lines.dedup();
    hex::encode(Sha256::digest(lines.join("\n").as_bytes()))
}

/// `{Z_i}` and `{X_i X_{i+1}}` on an open chain of `n` qubits.
pub fn matchgate_generators<T: Real>(n: usize) -> Vec<OperatorSum<T>> {
    let single = |sites: &[(usize, Pauli)]| {
        OperatorSum::from_term(PauliTerm::real(PauliString::from_sites(n, sites), T::one()))
    };
    let mut gens: Vec<_> = (0..n).map(|i| single(&[(i, Pauli::Z)])).collect();
    gens.extend((0..n.saturating_sub(1)).map(|i| single(&[(i, Pauli::X), (i + 1, Pauli::X)])));
    gens
}

/// Distinct generators of a circuit's gates. A controlled rotation
/// contributes `|1><1|_c ⊗ P = (P - Z_c P) / 2`.
pub fn circuit_generators(circuit: &Circuit) -> Vec<OperatorSum<f64>> {
    let mut out: Vec<OperatorSum<f64>> = Vec::new();
    for g in circuit.gates() {
        let mut op = OperatorSum::from_term(PauliTerm::real(g.generator, 1.0));
        if let Some(c) = g.control {
            let zc = PauliString::single(circuit.n(), c, Pauli::Z);
            let (k, s) = zc.mul(&g.generator);
            op = op.scale_real(0.5);
            op.add_term(PauliTerm::new(s, crate::pauli::i_pow::<f64>(k) * -0.5))
                .expect("same register");
        }
        if !out.contains(&op) {
            out.push(op);
        }
    }
    out
}

fn check_generators<T: Real>(generators: &[OperatorSum<T>]) -> Result<usize> {
    let n = generators
        .first()
        .map(OperatorSum::n)
        .ok_or_else(|| Error::InvalidArgument("no generators".into()))?;
    for g in generators {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: g.n() });
        }
        if !g.is_hermitian() {
            return Err(Error::NotHermitian(g.max_imag().as_f64()));
        }
        if g.coeff_norm_sqr().sqrt() <= T::independence_tol() {
            return Err(Error::InvalidArgument("zero generator".into()));
        }
    }
    Ok(n)
}

/// Adds the normalized, orthogonalized `v` to `units` if it is independent.
fn try_extend<T: Real>(units: &mut Vec<OperatorSum<T>>, v: OperatorSum<T>, cap: usize) -> Result<bool> {
    let tol = T::independence_tol();
    let norm = v.coeff_norm_sqr().sqrt();
    if norm <= tol {
        return Ok(false);
    }
    let mut v = v.real_part().scale_real(T::one() / norm);
    // second pass recovers orthogonality lost to cancellation
    for _ in 0..2 {
        for b in units.iter() {
            let overlap = b.coeff_inner(&v);
            if overlap.norm() > T::zero() {
                v.add_scaled(-overlap, b)?;
            }
        }
    }
    let residual = v.coeff_norm_sqr().sqrt();
    if residual <= tol {
        return Ok(false);
    }
    if units.len() >= cap {
        return Err(Error::ClosureCapExceeded(cap));
    }
    let mut v = v.scale_real(T::one() / residual);
    v.prune(tol * T::of(1e-3));
    units.push(v);
    Ok(true)
}

pub fn lie_closure<T: Real>(generators: &[OperatorSum<T>]) -> Result<LieBasis<T>> {
    lie_closure_capped(generators, DEFAULT_CLOSURE_CAP)
}

/// Real span of nested commutators `i[G, ·]` of the Hermitian generators.
///
/// The span is grown by bracketing every accepted element with every
/// generator; a subspace containing the generators and invariant under each
/// `ad_G` is closed under all brackets.
pub fn lie_closure_capped<T: Real>(generators: &[OperatorSum<T>], cap: usize) -> Result<LieBasis<T>> {
    let n = check_generators(generators)?;
    let i = Complex::new(T::zero(), T::one());
    let mut units: Vec<OperatorSum<T>> = Vec::new();
    for g in generators {
        try_extend(&mut units, g.clone(), cap)?;
    }
    let mut k = 0;
    while k < units.len() {
        for g in generators {
            let c = g.commutator(&units[k])?.scale(i);
            try_extend(&mut units, c, cap)?;
        }
        k += 1;
    }
    let trace_norm = T::one() / T::of(2f64.powi(n as i32)).sqrt();
    Ok(LieBasis {
        n,
        elements: units.iter().map(|u| u.scale_real(trace_norm)).collect(),
        generator_fingerprint: generator_fingerprint(generators),
    })
}

impl<T: Real> LieBasis<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[OperatorSum<T>] {
        &self.elements
    }

    pub fn generator_fingerprint(&self) -> &str {
        &self.generator_fingerprint
    }

    /// Largest deviation of the trace Gram matrix from the identity.
    pub fn orthonormality_residual(&self) -> T {
        let mut worst = T::zero();
        for (j, a) in self.elements.iter().enumerate() {
            for (k, b) in self.elements.iter().enumerate().skip(j) {
                let g = a.hs_inner(b).expect("same register");
                let want = if j == k { T::one() } else { T::zero() };
                worst = worst.max((g - Complex::new(want, T::zero())).norm());
            }
        }
        worst
    }

    /// Trace norm of the component of `op` orthogonal to the span.
    pub fn projection_residual(&self, op: &OperatorSum<T>) -> Result<T> {
        self.check_n(op.n())?;
        let mut r = op.clone();
        for b in &self.elements {
            let c = b.hs_inner(&r)?;
            r.add_scaled(-c, b)?;
        }
        Ok((r.coeff_norm_sqr() * T::of(2f64.powi(self.n as i32))).sqrt())
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    /// `Tr(B_j A)` for every basis element.
    pub fn overlaps(&self, a: Density<'_, T>) -> Result<Vec<Complex<T>>> {
        match a {
            Density::Pure(psi) => {
                psi.check_n(self.n)?;
                let amps = psi.amplitudes();
                Ok(self
                    .elements
                    .iter()
                    .map(|b| {
                        b.terms().fold(Complex::new(T::zero(), T::zero()), |acc, t| {
                            acc + t.coeff * string_expectation(&t.string, amps)
                        })
                    })
                    .collect())
            }
            Density::Operator(op) => {
                self.check_n(op.n())?;
                self.elements.iter().map(|b| b.hs_inner(op)).collect()
            }
        }
    }

    /// `Σ_j |Tr(B_j A)|²`.
    pub fn g_purity(&self, a: Density<'_, T>) -> Result<T> {
        Ok(self.overlaps(a)?.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()))
    }

    pub fn g_purity_state(&self, psi: &StateVector<T>) -> Result<T> {
        self.g_purity(Density::Pure(psi))
    }

    pub fn g_purity_operator(&self, op: &OperatorSum<T>) -> Result<T> {
        self.g_purity(Density::Operator(op))
    }

    /// `P_g(ρ) P_g(O) / dim g`.
    pub fn variance_estimate(&self, rho: Density<'_, T>, o: &OperatorSum<T>) -> Result<T> {
        let d = self.dim();
        if d == 0 {
            return Ok(T::zero());
        }
        Ok(self.g_purity(rho)? * self.g_purity_operator(o)? / T::of(d as f64))
    }

    /// `1 - P_g(|ψ><ψ|)`, clamped into `[0, 1]` against rounding.
    pub fn pg_score(&self, psi: &StateVector<T>) -> Result<T> {
        let s = T::one() - self.g_purity_state(psi)?;
        Ok(s.max(T::zero()).min(T::one()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BasisFile {
    format_version: u32,
    n: usize,
    generator_fingerprint: String,
    dim: usize,
    /// `(pauli string, re, im)` per term, coefficients in the plain-trace
    /// normalization.
    elements: Vec<Vec<(String, f64, f64)>>,
    elements_sha256: String,
}

fn elements_digest(elements: &[Vec<(String, f64, f64)>]) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(elements)?)))
}

impl<T: Real> LieBasis<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let elements: Vec<Vec<(String, f64, f64)>> = self
            .elements
            .iter()
            .map(|e| e.terms().map(|t| (t.string.to_string(), t.coeff.re.as_f64(), t.coeff.im.as_f64())).collect())
            .collect();
        let file = BasisFile {
            format_version: BASIS_FORMAT_VERSION,
            n: self.n,
            generator_fingerprint: self.generator_fingerprint.clone(),
            dim: self.dim(),
            elements_sha256: elements_digest(&elements)?,
            elements,
        };
        write_atomic(path, serde_json::to_string_pretty(&file)?.as_bytes())
    }

    /// Reads a cached basis. Fails if its recorded fingerprint differs from
    /// `expected_fingerprint` or its contents were altered.
    pub fn load(path: &Path, expected_fingerprint: Option<&str>) -> Result<Self> {
        let file: BasisFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if file.format_version != BASIS_FORMAT_VERSION {
            return Err(Error::Format(format!("basis format version {} is not supported", file.format_version)));
        }
        if let Some(fp) = expected_fingerprint {
            if fp != file.generator_fingerprint {
                return Err(Error::FingerprintMismatch {
                    expected: fp.to_owned(),
                    found: file.generator_fingerprint,
                });
            }
        }
        let digest = elements_digest(&file.elements)?;
        if digest != file.elements_sha256 {
            return Err(Error::FingerprintMismatch { expected: file.elements_sha256, found: digest });
        }
        if file.dim != file.elements.len() {
            return Err(Error::Format("basis dimension disagrees with element count".into()));
        }
        let elements = file
            .elements
            .iter()
            .map(|terms| {
                let mut op = OperatorSum::zero(file.n);
                for (s, re, im) in terms {
                    let string: PauliString = s.parse()?;
                    op.add_term(PauliTerm::new(string, Complex::new(T::of(*re), T::of(*im))))?;
                }
                Ok(op)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LieBasis { n: file.n, elements, generator_fingerprint: file.generator_fingerprint })
    }
}

/// Cache file name for a generator set.
pub fn cache_path(dir: &Path, fingerprint: &str) -> PathBuf {
    dir.join(format!("dla-{}.json", &fingerprint[..16.min(fingerprint.len())]))
}

/// Loads the closure from `dir` if cached, otherwise computes and stores it.
/// The flag reports whether the cache was used.
pub fn load_or_build<T: Real>(dir: &Path, generators: &[OperatorSum<T>], cap: usize) -> Result<(LieBasis<T>, bool)> {
    let fp = generator_fingerprint(generators);
    let path = cache_path(dir, &fp);
    if path.exists() {
        return Ok((LieBasis::load(&path, Some(&fp))?, true));
    }
    let basis = lie_closure_capped(generators, cap)?;
    basis.save(&path)?;
    Ok((basis, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op(s: &str) -> OperatorSum<f64> {
        OperatorSum::from_term(PauliTerm::real(s.parse().unwrap(), 1.0))
    }

    #[test]
    fn single_z_closure() {
        let b = lie_closure(&[op("Z")]).unwrap();
        assert_eq!(b.dim(), 1);
        assert_abs_diff_eq!(b.elements()[0].coefficient(&"Z".parse().unwrap()).re, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.g_purity_state(&StateVector::zero_state(1)).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.pg_score(&StateVector::zero_state(1)).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn su2_from_x_and_z() {
        let b = lie_closure(&[op("X"), op("Z")]).unwrap();
        assert_eq!(b.dim(), 3);
        assert!(b.orthonormality_residual() < 1e-12);
        assert_abs_diff_eq!(b.g_purity_state(&StateVector::zero_state(1)).unwrap(), 0.5, epsilon = 1e-14);
        // plain trace: P_g(Z) = |Tr(Z Z / sqrt 2)|^2 = 2
        assert_abs_diff_eq!(b.g_purity_operator(&op("Z")).unwrap(), 2.0, epsilon = 1e-14);
        let v = b.variance_estimate(Density::Pure(&StateVector::zero_state(1)), &op("Z")).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn maximally_mixed_and_orthogonal_inputs_give_zero() {
        let b = lie_closure(&matchgate_generators::<f64>(3)).unwrap();
        let mixed = op("III").scale_real(1.0 / 8.0);
        assert_eq!(b.g_purity(Density::Operator(&mixed)).unwrap(), 0.0);
        assert_eq!(b.variance_estimate(Density::Operator(&mixed), &op("ZII")).unwrap(), 0.0);
        // a single Y is odd under the free-fermion parity structure
        let outside = op("YII");
        assert_eq!(b.g_purity_operator(&outside).unwrap(), 0.0);
        let psi = StateVector::<f64>::zero_state(3);
        assert_eq!(b.variance_estimate(Density::Pure(&psi), &outside).unwrap(), 0.0);
    }

    #[test]
    fn matchgate_dims_small() {
        for (n, d) in [(2, 6), (3, 15), (4, 28)] {
            let b = lie_closure(&matchgate_generators::<f64>(n)).unwrap();
            assert_eq!(b.dim(), d);
            assert!(b.orthonormality_residual() < 1e-10);
        }
    }

    #[test]
    fn closure_is_closed_under_brackets() {
        let b = lie_closure(&matchgate_generators::<f64>(3)).unwrap();
        let i = Complex::new(0.0, 1.0);
        for x in b.elements() {
            for y in b.elements() {
                let c = x.commutator(y).unwrap().scale(i);
                assert!(b.projection_residual(&c).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn shuffled_generators_span_the_same_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gens = matchgate_generators::<f64>(4);
        let mut shuffled = gens.clone();
        shuffled.shuffle(&mut rng);
        let a = lie_closure(&gens).unwrap();
        let b = lie_closure(&shuffled).unwrap();
        assert_eq!(a.generator_fingerprint(), b.generator_fingerprint());
        for _ in 0..20 {
            let psi = StateVector::random(4, &mut rng);
            assert_abs_diff_eq!(a.g_purity_state(&psi).unwrap(), b.g_purity_state(&psi).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            lie_closure_capped(&matchgate_generators::<f64>(3), 10),
            Err(Error::ClosureCapExceeded(10))
        ));
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(lie_closure::<f64>(&[]).is_err());
        assert!(lie_closure(&[op("Z"), op("ZZ")]).is_err());
        let non_herm = OperatorSum::from_term(PauliTerm::new("X".parse().unwrap(), Complex::new(0.0, 1.0)));
        assert!(matches!(lie_closure(&[non_herm]), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn cache_roundtrip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let gens = matchgate_generators::<f64>(3);
        let (a, cached) = load_or_build(dir.path(), &gens, DEFAULT_CLOSURE_CAP).unwrap();
        assert!(!cached);
        let (b, cached) = load_or_build(dir.path(), &gens, DEFAULT_CLOSURE_CAP).unwrap();
        assert!(cached);
        assert_eq!(a, b);
        let path = cache_path(dir.path(), a.generator_fingerprint());
        assert!(matches!(LieBasis::<f64>::load(&path, Some("other")), Err(Error::FingerprintMismatch { .. })));

        let text = fs::read_to_string(&path).unwrap().replacen("ZII", "XII", 1);
        fs::write(&path, text).unwrap();
        assert!(LieBasis::<f64>::load(&path, None).is_err());
    }

    #[test]
    fn controlled_generator_is_projector_times_pauli() {
        let mut c = Circuit::new(2, 1);
        c.push(crate::circuit::Gate::controlled(0, "IX".parse().unwrap(), 0)).unwrap();
        let g = &circuit_generators(&c)[0];
        assert_eq!(g.coefficient(&"IX".parse().unwrap()).re, 0.5);
        assert_eq!(g.coefficient(&"ZX".parse().unwrap()).re, -0.5);
    }
}
