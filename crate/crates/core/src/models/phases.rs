use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Couplings, Family};
use crate::error::{Error, Result};

const CLUSTER_TABLE: &str = include_str!("../../data/cluster_phases.toml");
const XXZ_TABLE: &str = include_str!("../../data/xxz_phases.toml");

/// Closed half-plane `a*x + b*y + c >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane(pub [f64; 3]);

impl HalfPlane {
    fn contains(&self, x: f64, y: f64) -> bool {
        let [a, b, c] = self.0;
        a * x + b * y + c >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub phase: usize,
    pub half_planes: Vec<HalfPlane>,
}

/// Piecewise-linear phase diagram. A point's label is the lowest phase index
/// among the regions containing it, so shared boundaries resolve downwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub family: Family,
    pub axes: [String; 2],
    pub phases: Vec<String>,
    #[serde(rename = "region")]
    pub regions: Vec<PhaseRegion>,
}

impl PhaseTable {
    pub fn parse(text: &str) -> Result<Self> {
        let table: PhaseTable = toml::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn default_for(family: Family) -> &'static PhaseTable {
        static CLUSTER: OnceLock<PhaseTable> = OnceLock::new();
        static XXZ: OnceLock<PhaseTable> = OnceLock::new();
        match family {
            Family::Cluster => CLUSTER.get_or_init(|| Self::parse(CLUSTER_TABLE).expect("bundled table")),
            Family::Xxz => XXZ.get_or_init(|| Self::parse(XXZ_TABLE).expect("bundled table")),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.phases.len() != self.family.num_classes() {
            return Err(Error::Format(format!(
                "{:?} table lists {} phases, expected {}",
                self.family,
                self.phases.len(),
                self.family.num_classes()
            )));
        }
        if let Some(r) = self.regions.iter().find(|r| r.phase >= self.phases.len()) {
            return Err(Error::Format(format!("region refers to unknown phase {}", r.phase)));
        }
        Ok(())
    }

    /// Label of the point `(x, y)` in the table's axes.
    pub fn label(&self, x: f64, y: f64) -> Result<usize> {
        self.regions
            .iter()
            .filter(|r| r.half_planes.iter().all(|h| h.contains(x, y)))
            .map(|r| r.phase)
            .min()
            .ok_or_else(|| Error::InvalidArgument(format!("({x}, {y}) is outside every phase region")))
    }

    pub fn label_couplings(&self, c: &Couplings) -> Result<usize> {
        match self.family {
            Family::Cluster => self.label(c.j1, c.j2),
            Family::Xxz => {
                let ratio = c.ratio();
                if !(ratio > 0.0) {
                    return Err(Error::InvalidArgument(format!("j1/j2 = {ratio} must be positive")));
                }
                let delta = c
                    .delta
                    .ok_or_else(|| Error::InvalidArgument("XXZ couplings need delta".into()))?;
                self.label(ratio, delta)
            }
        }
    }

    pub fn phase_name(&self, index: usize) -> &str {
        &self.phases[index]
    }
}

/// Cluster-model phase: 0 SPT, 1 ferromagnetic, 2 antiferromagnetic, 3 trivial.
pub fn label_cluster(j1: f64, j2: f64) -> usize {
    PhaseTable::default_for(Family::Cluster)
        .label(j1, j2)
        .expect("bundled cluster table covers the plane")
}

/// XXZ phase from `j1/j2` and `δ`: 0 trivial, 1 antiferromagnetic, 2 topological.
pub fn label_xxz(ratio: f64, delta: f64) -> Result<usize> {
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("j1/j2 = {ratio} must be positive")));
    }
    PhaseTable::default_for(Family::Xxz).label(ratio, delta)
}
