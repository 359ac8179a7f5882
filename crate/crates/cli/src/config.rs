//! Experiment configuration. Every default is spelled out so the resolved
//! file describes a run completely.

use std::path::{Path, PathBuf};

use qcurriculum::curriculum::{Direction, LossScorer, PacingFn, Strategy, StrategyName};
use qcurriculum::models::{CouplingRange, Couplings, Family, ModelSpec, PhaseTable};
use qcurriculum::qcnn::Variant;
use qcurriculum::training::{AdamConfig, ReferenceChoice, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Version of the CSV and JSON output layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SelfTaught,
    SelfPaced,
    Physics,
}

impl Experiment {
    pub fn loss_scorer(self) -> LossScorer {
        match self {
            Experiment::SelfPaced => LossScorer::SelfPaced,
            _ => LossScorer::SelfTaught,
        }
    }

    pub fn default_strategies(self) -> Vec<StrategyName> {
        use StrategyName::*;
        match self {
            Experiment::SelfTaught => vec![Standard, Random, Easy, Hard],
            Experiment::SelfPaced => vec![Standard, Easy, Hard, Hardest],
            Experiment::Physics => vec![Standard, Random, HigherPg, LowerPg],
        }
    }

    fn allows(self, s: StrategyName) -> bool {
        use StrategyName::*;
        match self {
            Experiment::Physics => matches!(s, Standard | Random | HigherPg | LowerPg),
            Experiment::SelfPaced => matches!(s, Standard | Random | Easy | Hard | Hardest),
            Experiment::SelfTaught => matches!(s, Standard | Random | Easy | Hard),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_size: usize,
    pub test_size: usize,
    /// Run `r` trains on the set drawn with `train_seed + r`.
    pub train_seed: u64,
    pub test_seed: u64,
    pub balanced: bool,
    /// Phase boundary table; the bundled one for the family when absent.
    pub phase_table: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { train_size: 50, test_size: 1000, train_seed: 1000, test_seed: 2000, balanced: true, phase_table: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Full for the loss-based families, matchgate for physics.
    pub variant: Option<Variant>,
    pub reference_choice: ReferenceChoice,
    /// Replaces the default pacing of every paced strategy.
    pub pacing: Option<PacingFn>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainingSection {
            epochs: 100,
            steps_per_epoch: 5,
            minibatch: 10,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            variant: None,
            reference_choice: ReferenceChoice::Final,
            pacing: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DlaConfig {
    /// Qubit count; the model size when absent.
    pub n: Option<usize>,
    /// Pauli strings such as `ZI`, `XX`; the matchgate set when absent.
    pub generators: Option<Vec<String>>,
    pub cap: usize,
}

impl Default for DlaConfig {
    fn default() -> Self {
        DlaConfig { n: None, generators: None, cap: qcurriculum::lie::DEFAULT_CLOSURE_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub param_samples: usize,
    pub bins: usize,
    pub fractions: Vec<f64>,
    pub direction: Direction,
    pub seed: u64,
    pub prop2_seeds: usize,
    pub prop2_epochs: usize,
    pub prop2_steps_per_epoch: usize,
    pub prop2_minibatch: usize,
    pub prop2_lr: f64,
    pub prop2_init_scale: f64,
    /// Seed of the frozen feature circuit.
    pub feature_seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            param_samples: 100,
            bins: qcurriculum::theory::DEFAULT_BINS,
            fractions: vec![0.1, 0.2, 0.3, 0.5, 0.8, 1.0],
            direction: Direction::LowerFirst,
            seed: 0,
            prop2_seeds: 50,
            prop2_epochs: 50,
            prop2_steps_per_epoch: 5,
            prop2_minibatch: 10,
            prop2_lr: 0.05,
            prop2_init_scale: 1.0,
            feature_seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweptCoupling {
    J1,
    J2,
    /// `j1 / j2` with `j2 = 1`.
    Ratio,
    Delta,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamChoice {
    #[default]
    Final,
    BestTrain,
}

/// A straight cut through the phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Defaults to `j2` for the cluster model and `ratio` for XXZ.
    pub parameter: Option<SweptCoupling>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: usize,
    /// Fixed couplings; unset ones default to `j1 = 1` (cluster) or
    /// `delta = 3` (XXZ).
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub delta: Option<f64>,
    pub ratio: Option<f64>,
    /// Parameter file; defaults to the trained strategy's run-0 output.
    pub params: Option<PathBuf>,
    pub strategy: Option<StrategyName>,
    pub run: usize,
    pub which: ParamChoice,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            parameter: None,
            start: None,
            stop: None,
            points: 121,
            j1: None,
            j2: None,
            delta: None,
            ratio: None,
            params: None,
            strategy: None,
            run: 0,
            which: ParamChoice::Final,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// The family's default set when absent.
    pub strategies: Option<Vec<StrategyName>>,
    pub runs: usize,
    /// Run `r` initializes from `seed + r`.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub model: ModelSpec,
    pub data: DataConfig,
    pub training: TrainingSection,
    pub dla: DlaConfig,
    pub verify: VerifyConfig,
    pub scan: ScanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::SelfTaught,
            strategies: None,
            runs: 10,
            seed: 0,
            jobs: 0,
            output_dir: PathBuf::from("out"),
            cache_dir: PathBuf::from("cache"),
            model: ModelSpec::cluster_default(8),
            data: DataConfig::default(),
            training: TrainingSection::default(),
            dla: DlaConfig::default(),
            verify: VerifyConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub test_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies overrides, fills family-dependent defaults and validates.
    pub fn resolve(mut self, o: &Overrides) -> CliResult<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(p) = &o.out {
            self.output_dir = p.clone();
        }
        if let Some(p) = &o.cache {
            self.cache_dir = p.clone();
        }
        if let Some(t) = o.test_size {
            self.data.test_size = t;
        }
        if self.strategies.is_none() {
            self.strategies = Some(self.experiment.default_strategies());
        }
        if self.training.variant.is_none() {
            self.training.variant = Some(match self.experiment {
                Experiment::Physics => Variant::Matchgate,
                _ => Variant::Full,
            });
        }
        if self.dla.n.is_none() {
            self.dla.n = Some(self.model.n());
        }
        self.resolve_scan()?;
        self.validate()?;
        Ok(self)
    }

    fn resolve_scan(&mut self) -> CliResult<()> {
        let s = &mut self.scan;
        match self.model.family() {
            Family::Cluster => {
                let p = *s.parameter.get_or_insert(SweptCoupling::J2);
                match p {
                    SweptCoupling::J2 => {
                        s.j1.get_or_insert(1.0);
                    }
                    SweptCoupling::J1 => {
                        s.j2.get_or_insert(1.0);
                    }
                    _ => return Err(CliError::Config("cluster cuts sweep j1 or j2".into())),
                }
                s.start.get_or_insert(-3.0);
                s.stop.get_or_insert(3.0);
            }
            Family::Xxz => {
                let p = *s.parameter.get_or_insert(SweptCoupling::Ratio);
                match p {
                    SweptCoupling::Ratio => {
                        s.delta.get_or_insert(3.0);
                        s.start.get_or_insert(0.05);
                        s.stop.get_or_insert(3.0);
                    }
                    SweptCoupling::Delta => {
                        s.ratio.get_or_insert(1.5);
                        s.start.get_or_insert(0.5);
                        s.stop.get_or_insert(3.5);
                    }
                    _ => return Err(CliError::Config("XXZ cuts sweep ratio or delta".into())),
                }
            }
        }
        if s.strategy.is_none() {
            let strategies = self.strategies.as_deref().unwrap_or_default();
            s.strategy = Some(if strategies.contains(&StrategyName::Hardest) {
                StrategyName::Hardest
            } else {
                strategies.first().copied().unwrap_or(StrategyName::Standard)
            });
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.model.n() != qcurriculum::qcnn::N_IN {
            return bad(format!("the QCNN reads {} qubits; model has {}", qcurriculum::qcnn::N_IN, self.model.n()));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.data.train_size == 0 || self.data.test_size == 0 {
            return bad("train and test sizes must be positive".into());
        }
        let strategies = self.strategies();
        if strategies.is_empty() {
            return bad("no strategies selected".into());
        }
        for (i, s) in strategies.iter().enumerate() {
            if !self.experiment.allows(*s) {
                return bad(format!("strategy {s} does not belong to the {:?} experiment", self.experiment));
            }
            if strategies[..i].contains(s) {
                return bad(format!("strategy {s} listed twice"));
            }
        }
        if self.experiment == Experiment::Physics && self.variant() != Variant::Matchgate {
            return bad("the physics experiment requires the matchgate variant".into());
        }
        for s in strategies {
            self.train_config(*s, 0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let v = &self.verify;
        if v.param_samples == 0 || v.bins == 0 || v.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("verify needs samples, bins and fractions in (0, 1]".into());
        }
        if v.prop2_seeds == 0 || v.prop2_epochs == 0 || v.prop2_minibatch == 0 || !(v.prop2_lr > 0.0) {
            return bad("invalid surrogate settings".into());
        }
        if self.scan.points < 2 {
            return bad("a cut needs at least two points".into());
        }
        self.cut_couplings()?;
        Ok(())
    }

    pub fn strategies(&self) -> &[StrategyName] {
        self.strategies.as_deref().unwrap_or_default()
    }

    pub fn variant(&self) -> Variant {
        self.training.variant.unwrap_or(Variant::Full)
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed + run as u64
    }

    pub fn train_seed(&self, run: usize) -> u64 {
        self.data.train_seed + run as u64
    }

    pub fn train_config(&self, name: StrategyName, run: usize) -> TrainConfig {
        let t = &self.training;
        let mut strategy =
            Strategy::preset(name, self.experiment.loss_scorer(), self.data.train_size, t.minibatch, t.epochs);
        if let Some(p) = t.pacing {
            if !matches!(name, StrategyName::Standard | StrategyName::Hardest) {
                strategy.pacing = p;
            }
        }
        let mut cfg = TrainConfig::new(strategy, self.variant(), self.num_classes(), self.run_seed(run));
        cfg.epochs = t.epochs;
        cfg.steps_per_epoch = t.steps_per_epoch;
        cfg.minibatch = t.minibatch;
        cfg.adam = AdamConfig { lr: t.lr, beta1: t.beta1, beta2: t.beta2, eps: t.eps };
        cfg.reference_choice = t.reference_choice;
        cfg
    }

    pub fn phase_table(&self) -> CliResult<PhaseTable> {
        match &self.data.phase_table {
            Some(p) => PhaseTable::load(p).map_err(|e| crate::error::classify(p, e)),
            None => Ok(PhaseTable::default_for(self.model.family()).clone()),
        }
    }

    /// Couplings at each point of the configured cut, with the swept value.
    pub fn cut_couplings(&self) -> CliResult<Vec<(f64, Couplings)>> {
        let s = &self.scan;
        let (Some(p), Some(start), Some(stop)) = (s.parameter, s.start, s.stop) else {
            return Err(CliError::Config("unresolved cut".into()));
        };
        if !(start < stop) || s.points < 2 {
            return Err(CliError::Config(format!("cut [{start}, {stop}] with {} points", s.points)));
        }
        let check = |name: &str, range: &CouplingRange, v: f64| {
            if range.contains(v) {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} = {v} lies outside the model range")))
            }
        };
        let mut out = Vec::with_capacity(s.points);
        for k in 0..s.points {
            let x = start + (stop - start) * k as f64 / (s.points - 1) as f64;
            let c = match (&self.model, p) {
                (ModelSpec::Cluster { j1, .. }, SweptCoupling::J1) => {
                    check("j1", j1, x)?;
                    Couplings { j1: x, j2: s.j2.unwrap_or(1.0), delta: None }
                }
                (ModelSpec::Cluster { j2, .. }, SweptCoupling::J2) => {
                    check("j2", j2, x)?;
                    Couplings { j1: s.j1.unwrap_or(1.0), j2: x, delta: None }
                }
                (ModelSpec::Xxz { ratio, .. }, SweptCoupling::Ratio) => {
                    check("ratio", ratio, x)?;
                    Couplings { j1: x, j2: 1.0, delta: Some(s.delta.unwrap_or(3.0)) }
                }
                (ModelSpec::Xxz { delta, .. }, SweptCoupling::Delta) => {
                    check("delta", delta, x)?;
                    Couplings { j1: s.ratio.unwrap_or(1.5), j2: 1.0, delta: Some(x) }
                }
                _ => return Err(CliError::Config("swept coupling does not fit the model family".into())),
            };
            out.push((x, c));
        }
        Ok(out)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the resolved config with the paths and worker count
    /// blanked, since those cannot change any result.
    pub fn hash(&self) -> CliResult<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.cache_dir = PathBuf::new();
        c.jobs = 0;
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let c = ExperimentConfig::parse("").unwrap().resolve(&Overrides::default()).unwrap();
        assert_eq!(c.strategies(), &Experiment::SelfTaught.default_strategies()[..]);
        assert_eq!(c.variant(), Variant::Full);
        assert_eq!(c.data.train_size, 50);
        assert_eq!(c.data.test_size, 1000);
        assert_eq!(c.runs, 10);
    }

    #[test]
    fn resolved_dump_roundtrips() {
        let c = ExperimentConfig::parse("experiment = \"physics\"\n[model]\nfamily = \"xxz\"\nn = 8\nratio = { low = 0.0, high = 3.0 }\ndelta = 3.0\n")
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn physics_with_full_variant_is_rejected() {
        let c = ExperimentConfig::parse("experiment = \"physics\"\n[training]\nvariant = \"full\"\n").unwrap();
        assert!(matches!(c.resolve(&Overrides::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn foreign_strategy_is_rejected() {
        let c = ExperimentConfig::parse("experiment = \"self-taught\"\nstrategies = [\"lower-pg\"]\n").unwrap();
        assert!(c.resolve(&Overrides::default()).is_err());
        assert!(ExperimentConfig::parse("nonsense = 1\n").is_err());
    }

    #[test]
    fn paths_do_not_change_the_hash() {
        let base = ExperimentConfig::default().resolve(&Overrides::default()).unwrap();
        let moved = ExperimentConfig::default()
            .resolve(&Overrides { out: Some("elsewhere".into()), jobs: Some(3), ..Default::default() })
            .unwrap();
        assert_eq!(base.hash().unwrap(), moved.hash().unwrap());
        let reseeded = ExperimentConfig::default().resolve(&Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_ne!(base.hash().unwrap(), reseeded.hash().unwrap());
    }

    #[test]
    fn default_cluster_cut_has_121_points_at_j1_one() {
        let c = ExperimentConfig::default().resolve(&Overrides::default()).unwrap();
        let cut = c.cut_couplings().unwrap();
        assert_eq!(cut.len(), 121);
        assert_eq!(cut[0].1, Couplings { j1: 1.0, j2: -3.0, delta: None });
        assert!((cut[60].0).abs() < 1e-12);
    }
}
