use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Couplings, ModelSpec, PhaseTable};
use crate::dense::ground_state;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::state::StateVector;

/// Spectral gaps below this flag the example as (near-)degenerate.
const DEGENERACY_GAP: f64 = 1e-8;
/// Rejection draws allowed per requested example before giving up.
const RESAMPLE_FACTOR: usize = 1000;

const MAGIC: &[u8; 8] = b"QCLDSET\0";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub state: StateVector<f64>,
    /// One-hot, length `M`.
    pub label: Vec<f64>,
    pub couplings: Couplings,
    pub phase_index: usize,
    pub score: Option<f64>,
    pub degenerate: bool,
    pub energy: f64,
    pub gap: f64,
}

pub(crate) fn one_hot(index: usize, m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[index] = 1.0;
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub model: ModelSpec,
    pub seed: u64,
    pub role: Role,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for e in &self.examples {
            counts[e.phase_index] += 1;
        }
        counts
    }

    /// Dataset restricted to the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            model: self.model.clone(),
            seed: self.seed,
            role: self.role,
        }
    }
}

pub fn generate_dataset(spec: &ModelSpec, count: usize, seed: u64, balanced: bool, role: Role) -> Result<Dataset> {
    generate_dataset_with_table(spec, PhaseTable::default_for(spec.family()), count, seed, balanced, role)
}

/// Samples couplings, labels them with `table`, and diagonalizes each
/// Hamiltonian.
///
/// Coupling draws come from one seeded stream and are cheap; the ground
/// states are computed afterwards in parallel, which cannot change the
/// result. Balanced generation fills per-class quotas of `⌈count/M⌉` for the
/// first `count mod M` classes and `⌊count/M⌋` for the rest.
pub fn generate_dataset_with_table(
    spec: &ModelSpec,
    table: &PhaseTable,
    count: usize,
    seed: u64,
    balanced: bool,
    role: Role,
) -> Result<Dataset> {
    spec.validate()?;
    if table.family != spec.family() {
        return Err(Error::InvalidArgument("phase table belongs to another model family".into()));
    }
    let m = spec.num_classes();
    if balanced && count < m {
        return Err(Error::InvalidArgument(format!("balanced dataset needs count >= {m}, got {count}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<(Couplings, usize)> = Vec::with_capacity(count);
    if balanced {
        let quota: Vec<usize> = (0..m).map(|c| count / m + usize::from(c < count % m)).collect();
        let mut counts = vec![0usize; m];
        let mut attempts = 0;
        while draws.len() < count {
            if attempts >= RESAMPLE_FACTOR * count {
                return Err(Error::QuotaUnreachable { attempts, counts });
            }
            attempts += 1;
            let c = spec.sample_couplings(&mut rng);
            let phase = table.label_couplings(&c)?;
            if counts[phase] < quota[phase] {
                counts[phase] += 1;
                draws.push((c, phase));
            }
        }
    } else {
        for _ in 0..count {
            let c = spec.sample_couplings(&mut rng);
            let phase = table.label_couplings(&c)?;
            draws.push((c, phase));
        }
    }

    let examples = draws
        .par_iter()
        .map(|&(couplings, phase)| {
            let h = spec.hamiltonian(&couplings)?;
            let g = ground_state(&h)?;
            Ok(LabeledExample {
                state: g.state,
                label: one_hot(phase, m),
                couplings,
                phase_index: phase,
                score: None,
                degenerate: g.gap < DEGENERACY_GAP,
                energy: g.energy,
                gap: g.gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset { examples, model: spec.clone(), seed, role })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub couplings: Couplings,
    pub phase_index: usize,
    pub degenerate: bool,
    pub energy: f64,
    pub gap: f64,
}

/// Sidecar describing a binary amplitude file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub binary: String,
    pub amplitudes_sha256: String,
    pub model: ModelSpec,
    pub seed: u64,
    pub role: Role,
    pub n_qubits: usize,
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub examples: Vec<ManifestEntry>,
}

/// Writes `<stem>.bin` (header + little-endian `f64` re/im pairs) and
/// `<stem>.json`. Returns both paths.
///
/// Header: 8-byte magic `QCLDSET\0`, `u32` format version, `u32` qubit count,
/// `u64` example count, all little-endian.
pub fn write_dataset(
    ds: &Dataset,
    dir: &Path,
    stem: &str,
    config_hash: Option<&str>,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let n = ds.model.n();
    let mut bin = Vec::with_capacity(24 + ds.len() * (16 << n));
    bin.extend_from_slice(MAGIC);
    bin.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    bin.extend_from_slice(&(n as u32).to_le_bytes());
    bin.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for e in &ds.examples {
        for a in e.state.amplitudes() {
            bin.extend_from_slice(&a.re.to_le_bytes());
            bin.extend_from_slice(&a.im.to_le_bytes());
        }
    }
    let bin_name = format!("{stem}.bin");
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        binary: bin_name.clone(),
        amplitudes_sha256: hex::encode(Sha256::digest(&bin)),
        model: ds.model.clone(),
        seed: ds.seed,
        role: ds.role,
        n_qubits: n,
        num_classes: ds.num_classes(),
        class_counts: ds.class_counts(),
        config_hash: config_hash.map(str::to_owned),
        examples: ds
            .examples
            .iter()
            .map(|e| ManifestEntry {
                couplings: e.couplings,
                phase_index: e.phase_index,
                degenerate: e.degenerate,
                energy: e.energy,
                gap: e.gap,
            })
            .collect(),
    };
    let bin_path = dir.join(&bin_name);
    let manifest_path = dir.join(format!("{stem}.json"));
    write_atomic(&bin_path, &bin)?;
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok((bin_path, manifest_path))
}

/// Reads a dataset written by [`write_dataset`] from its manifest path.
pub fn read_dataset(manifest_path: &Path) -> Result<(Dataset, DatasetManifest)> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset format version {} is not supported (expected {DATASET_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let bin = fs::read(dir.join(&manifest.binary))?;
    let digest = hex::encode(Sha256::digest(&bin));
    if digest != manifest.amplitudes_sha256 {
        return Err(Error::FingerprintMismatch { expected: manifest.amplitudes_sha256.clone(), found: digest });
    }
    if bin.len() < 24 || &bin[..8] != MAGIC {
        return Err(Error::Format("missing dataset header".into()));
    }
    let word = |r: std::ops::Range<usize>| -> [u8; 8] {
        let mut w = [0u8; 8];
        w[..r.len()].copy_from_slice(&bin[r]);
        w
    };
    let version = u32::from_le_bytes(bin[8..12].try_into().expect("4 bytes"));
    let n = u32::from_le_bytes(bin[12..16].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(word(16..24)) as usize;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("binary format version {version} is not supported")));
    }
    if n != manifest.n_qubits || count != manifest.examples.len() {
        return Err(Error::Format("binary header disagrees with manifest".into()));
    }
    let dim = 1usize << n;
    if bin.len() != 24 + count * dim * 16 {
        return Err(Error::Format("truncated amplitude block".into()));
    }
    let m = manifest.num_classes;
    let mut examples = Vec::with_capacity(count);
    for (k, entry) in manifest.examples.iter().enumerate() {
        let base = 24 + k * dim * 16;
        let amps = (0..dim)
            .map(|i| {
                let o = base + 16 * i;
                Complex::new(f64::from_le_bytes(word(o..o + 8)), f64::from_le_bytes(word(o + 8..o + 16)))
            })
            .collect();
        if entry.phase_index >= m {
            return Err(Error::Format(format!("phase index {} out of range", entry.phase_index)));
        }
        examples.push(LabeledExample {
            state: StateVector::from_amplitudes(amps)?,
            label: one_hot(entry.phase_index, m),
            couplings: entry.couplings,
            phase_index: entry.phase_index,
            score: None,
            degenerate: entry.degenerate,
            energy: entry.energy,
            gap: entry.gap,
        });
    }
    let ds = Dataset { examples, model: manifest.model.clone(), seed: manifest.seed, role: manifest.role };
    Ok((ds, manifest))
}
