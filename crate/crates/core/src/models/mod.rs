//! Spin-chain Hamiltonians, phase labels and labeled ground-state datasets.

mod dataset;
mod phases;

pub use dataset::{
    generate_dataset, generate_dataset_with_table, read_dataset, write_dataset, Dataset,
    DatasetManifest, LabeledExample, Role, DATASET_FORMAT_VERSION,
};
pub use phases::{label_cluster, label_xxz, HalfPlane, PhaseRegion, PhaseTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{OperatorSum, Pauli, PauliString, PauliTerm};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cluster,
    Xxz,
}

impl Family {
    /// Number of phase classes `M`.
    pub fn num_classes(self) -> usize {
        match self {
            Family::Cluster => 4,
            Family::Xxz => 3,
        }
    }
}

/// Generalized cluster chain
/// `Σ_j Z_j - j1 X_j X_{j+1} - j2 X_{j-1} Z_j X_{j+1}` with periodic indices.
pub fn build_cluster<T: Real>(n: usize, j1: T, j2: T) -> Result<OperatorSum<T>> {
    build_cluster_with(n, j1, j2, Boundary::Periodic)
}

pub fn build_cluster_with<T: Real>(n: usize, j1: T, j2: T, boundary: Boundary) -> Result<OperatorSum<T>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cluster chain needs n >= 3, got {n}")));
    }
    let mut h = OperatorSum::zero(n);
    let wrap = |j: isize| -> Option<usize> {
        match boundary {
            Boundary::Periodic => Some(j.rem_euclid(n as isize) as usize),
            Boundary::Open => (0..n as isize).contains(&j).then_some(j as usize),
        }
    };
    for j in 0..n {
        h.add_term(PauliTerm::real(PauliString::single(n, j, Pauli::Z), T::one()))?;
        let (prev, next) = (wrap(j as isize - 1), wrap(j as isize + 1));
        if j1 != T::zero() {
            if let Some(k) = next {
                let s = PauliString::from_sites(n, &[(j, Pauli::X), (k, Pauli::X)]);
                h.add_term(PauliTerm::real(s, -j1))?;
            }
        }
        if j2 != T::zero() {
            if let (Some(p), Some(k)) = (prev, next) {
                let s = PauliString::from_sites(n, &[(p, Pauli::X), (j, Pauli::Z), (k, Pauli::X)]);
                h.add_term(PauliTerm::real(s, -j2))?;
            }
        }
    }
    Ok(h)
}

/// Bond-alternating XXZ chain with open ends: coupling `j1` on the bonds
/// (0,1), (2,3), … and `j2` on (1,2), (3,4), …, each bond carrying
/// `XX + YY + δ ZZ`.
pub fn build_xxz<T: Real>(n: usize, j1: T, j2: T, delta: T) -> Result<OperatorSum<T>> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("XXZ chain needs even n >= 4, got {n}")));
    }
    let mut h = OperatorSum::zero(n);
    for a in 0..n - 1 {
        let j = if a % 2 == 0 { j1 } else { j2 };
        for (p, c) in [(Pauli::X, j), (Pauli::Y, j), (Pauli::Z, j * delta)] {
            if c != T::zero() {
                h.add_term(PauliTerm::real(PauliString::from_sites(n, &[(a, p), (a + 1, p)]), c))?;
            }
        }
    }
    Ok(h)
}

/// Sampling range for one coupling: a fixed value or uniform on `(low, high]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingRange {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

impl CouplingRange {
    pub fn validate(&self, name: &str) -> Result<()> {
        match *self {
            CouplingRange::Fixed(v) if v.is_finite() => Ok(()),
            CouplingRange::Uniform { low, high } if low.is_finite() && high.is_finite() && low < high => Ok(()),
            _ => Err(Error::InvalidArgument(format!("degenerate sampling range for {name}: {self:?}"))),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CouplingRange::Fixed(v) => v,
            CouplingRange::Uniform { low, high } => high - (high - low) * rng.random::<f64>(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            CouplingRange::Fixed(v) => x == v,
            CouplingRange::Uniform { low, high } => low <= x && x <= high,
        }
    }
}

/// Model family, size and coupling distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Cluster {
        n: usize,
        j1: CouplingRange,
        j2: CouplingRange,
        #[serde(default = "periodic")]
        boundary: Boundary,
    },
    Xxz {
        n: usize,
        /// `j1 / j2`, realized with `j2 = 1`.
        ratio: CouplingRange,
        delta: CouplingRange,
    },
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

impl ModelSpec {
    pub fn cluster_default(n: usize) -> Self {
        ModelSpec::Cluster {
            n,
            j1: CouplingRange::Uniform { low: -4.0, high: 4.0 },
            j2: CouplingRange::Uniform { low: -4.0, high: 4.0 },
            boundary: Boundary::Periodic,
        }
    }

    pub fn xxz_default(n: usize) -> Self {
        ModelSpec::Xxz {
            n,
            ratio: CouplingRange::Uniform { low: 0.0, high: 3.0 },
            delta: CouplingRange::Fixed(3.0),
        }
    }

    pub fn default_for(family: Family, n: usize) -> Self {
        match family {
            Family::Cluster => Self::cluster_default(n),
            Family::Xxz => Self::xxz_default(n),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Cluster { .. } => Family::Cluster,
            ModelSpec::Xxz { .. } => Family::Xxz,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            ModelSpec::Cluster { n, .. } | ModelSpec::Xxz { n, .. } => n,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.family().num_classes()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Cluster { n, j1, j2, .. } => {
                if *n < 3 {
                    return Err(Error::InvalidArgument(format!("cluster chain needs n >= 3, got {n}")));
                }
                j1.validate("j1")?;
                j2.validate("j2")
            }
            ModelSpec::Xxz { n, ratio, delta } => {
                if *n < 4 || n % 2 != 0 {
                    return Err(Error::InvalidArgument(format!("XXZ chain needs even n >= 4, got {n}")));
                }
                ratio.validate("ratio")?;
                if let CouplingRange::Uniform { low, .. } = ratio {
                    if *low < 0.0 {
                        return Err(Error::InvalidArgument("ratio range must be positive".into()));
                    }
                }
                delta.validate("delta")
            }
        }
    }

    pub fn sample_couplings<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Couplings {
        match self {
            ModelSpec::Cluster { j1, j2, .. } => {
                let j1 = j1.sample(rng);
                Couplings { j1, j2: j2.sample(rng), delta: None }
            }
            ModelSpec::Xxz { ratio, delta, .. } => {
                let r = ratio.sample(rng);
                Couplings { j1: r, j2: 1.0, delta: Some(delta.sample(rng)) }
            }
        }
    }

    pub fn hamiltonian(&self, c: &Couplings) -> Result<OperatorSum<f64>> {
        match self {
            ModelSpec::Cluster { n, boundary, .. } => build_cluster_with(*n, c.j1, c.j2, *boundary),
            ModelSpec::Xxz { n, .. } => {
                let delta = c
                    .delta
                    .ok_or_else(|| Error::InvalidArgument("XXZ couplings need delta".into()))?;
                build_xxz(*n, c.j1, c.j2, delta)
            }
        }
    }
}

/// Couplings of one sampled Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub j1: f64,
    pub j2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Couplings {
    pub fn ratio(&self) -> f64 {
        self.j1 / self.j2
    }
}
