//! ADAM training with curriculum-gated minibatches, checkpoints and
//! multi-run aggregation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curriculum::{
    draw_minibatch, score_all, select_available, LossScorer, ScoreContext, Scorer, ScorerKind, Strategy, StrategyName,
};
use crate::error::{Error, Result};
use crate::lie::LieBasis;
use crate::models::LabeledExample;
use crate::qcnn::{build_qcnn, mse, QcnnArchitecture, Variant};

// Independent substreams of the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_AUX: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(state: &mut AdamState, cfg: &AdamConfig, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), found: grads.len() });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("gradient component {i} is {}", grads[i])));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Which reference parameters score the self-taught curriculum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceChoice {
    #[default]
    Final,
    /// Parameters of the epoch with the best training accuracy.
    BestTrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub minibatch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Seed of the self-taught reference model; derived from `seed` if absent.
    pub reference_seed: Option<u64>,
    pub reference_choice: ReferenceChoice,
    pub variant: Variant,
    pub num_classes: usize,
}

impl TrainConfig {
    /// Defaults: 100 epochs, 5 steps per epoch, minibatch 10, learning rate 0.01.
    pub fn new(strategy: Strategy, variant: Variant, num_classes: usize, seed: u64) -> Self {
        TrainConfig {
            strategy,
            epochs: 100,
            steps_per_epoch: 5,
            minibatch: 10,
            adam: AdamConfig::default(),
            seed,
            reference_seed: None,
            reference_choice: ReferenceChoice::Final,
            variant,
            num_classes,
        }
    }

    /// Preset strategy with the default schedule for `n` training examples.
    pub fn preset(name: StrategyName, loss: LossScorer, variant: Variant, num_classes: usize, n: usize, seed: u64) -> Self {
        Self::new(Strategy::preset(name, loss, n, 10, 100), variant, num_classes, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.minibatch == 0 {
            return Err(Error::InvalidArgument("epochs, steps per epoch and minibatch must be at least 1".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.adam.lr)));
        }
        if !(self.num_classes == 3 || self.num_classes == 4) {
            return Err(Error::InvalidArgument(format!("{} classes; expected 3 or 4", self.num_classes)));
        }
        if matches!(self.strategy.scorer, ScorerKind::PhysicsPg(_)) && self.variant != Variant::Matchgate {
            return Err(Error::InvalidArgument("the physics score requires the matchgate variant".into()));
        }
        self.strategy.pacing.validate()
    }

    pub fn resolved_reference_seed(&self) -> u64 {
        self.reference_seed.unwrap_or_else(|| {
            let mut rng = stream(self.seed, STREAM_AUX);
            rng.random::<u64>()
        })
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Empirical risk over the full training set after the epoch.
    pub train_risk: f64,
    /// Mean risk of the epoch's minibatches, each evaluated before its step.
    pub batch_risk: f64,
    pub available_size: usize,
    pub batch_indices: Vec<Vec<usize>>,
    /// Scores that ordered this epoch's available set.
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub strategy: StrategyName,
    pub seed: u64,
    pub reference_seed: Option<u64>,
    pub initial_train_accuracy: f64,
    pub initial_test_accuracy: f64,
    pub initial_train_risk: f64,
    pub initial_params: Vec<f64>,
    pub epochs: Vec<EpochMetrics>,
    pub best_train_accuracy: f64,
    pub best_train_epoch: usize,
    pub best_test_accuracy: f64,
    pub best_test_epoch: usize,
    pub final_params: Vec<f64>,
}

/// Accuracy and mean loss over a set, in one forward pass per example.
pub fn evaluate(arch: &QcnnArchitecture, theta: &[f64], examples: &[LabeledExample], m: usize) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let per = examples
        .par_iter()
        .map(|e| {
            let p = arch.forward(theta, &e.state)?;
            Ok((usize::from(p.class(m) == e.phase_index), mse(&p.probs, &e.label, m)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = examples.len() as f64;
    let hits = per.iter().map(|x| x.0).sum::<usize>() as f64;
    let risk = per.iter().map(|x| x.1).sum::<f64>();
    Ok((hits / n, risk / n))
}

/// Resumable training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub params: Vec<f64>,
    pub best_params: Vec<f64>,
    pub adam: AdamState,
    pub batch_rng: ChaCha8Rng,
    pub frozen_scores: Option<Vec<f64>>,
    pub reference_params: Option<Vec<f64>>,
    pub metrics: RunMetrics,
}

pub struct Trainer<'a> {
    cfg: TrainConfig,
    arch: QcnnArchitecture,
    train: &'a [LabeledExample],
    test: &'a [LabeledExample],
    scorer: Scorer,
    params: Vec<f64>,
    best_params: Vec<f64>,
    adam: AdamState,
    batch_rng: ChaCha8Rng,
    frozen_scores: Option<Vec<f64>>,
    reference_params: Option<Vec<f64>>,
    metrics: RunMetrics,
}

impl<'a> Trainer<'a> {
    /// Fresh run. `reference_params` overrides training a self-taught
    /// reference model; `basis` is required by the physics score.
    pub fn new(
        cfg: TrainConfig,
        train: &'a [LabeledExample],
        test: &'a [LabeledExample],
        basis: Option<Arc<LieBasis<f64>>>,
        reference_params: Option<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidArgument("training and test sets must be nonempty".into()));
        }
        let arch = build_qcnn(cfg.variant);
        let reference_seed = (cfg.strategy.scorer == ScorerKind::SelfTaught).then(|| cfg.resolved_reference_seed());
        let reference_params = match (cfg.strategy.scorer, reference_params) {
            (ScorerKind::SelfTaught, Some(p)) => Some(p),
            (ScorerKind::SelfTaught, None) => {
                Some(train_reference(&cfg, reference_seed.expect("self-taught"), train, test)?)
            }
            _ => None,
        };
        let scorer = make_scorer(&cfg, basis, reference_params.clone())?;
        let params = arch.init_params(&mut stream(cfg.seed, STREAM_INIT));
        let (tr_acc, tr_risk) = evaluate(&arch, &params, train, cfg.num_classes)?;
        let (te_acc, _) = evaluate(&arch, &params, test, cfg.num_classes)?;
        let metrics = RunMetrics {
            strategy: cfg.strategy.name,
            seed: cfg.seed,
            reference_seed,
            initial_train_accuracy: tr_acc,
            initial_test_accuracy: te_acc,
            initial_train_risk: tr_risk,
            initial_params: params.clone(),
            epochs: Vec::with_capacity(cfg.epochs),
            best_train_accuracy: f64::NEG_INFINITY,
            best_train_epoch: 0,
            best_test_accuracy: f64::NEG_INFINITY,
            best_test_epoch: 0,
            final_params: params.clone(),
        };
        Ok(Trainer {
            adam: AdamState::new(params.len()),
            batch_rng: stream(cfg.seed, STREAM_BATCH),
            best_params: params.clone(),
            cfg,
            arch,
            train,
            test,
            scorer,
            params,
            frozen_scores: None,
            reference_params,
            metrics,
        })
    }

    pub fn resume(
        ckpt: Checkpoint,
        train: &'a [LabeledExample],
        test: &'a [LabeledExample],
        basis: Option<Arc<LieBasis<f64>>>,
    ) -> Result<Self> {
        ckpt.config.validate()?;
        let arch = build_qcnn(ckpt.config.variant);
        if ckpt.params.len() != arch.total_params {
            return Err(Error::DimensionMismatch { expected: arch.total_params, found: ckpt.params.len() });
        }
        if ckpt.metrics.epochs.len() != ckpt.epoch {
            return Err(Error::Format("checkpoint metrics do not match its epoch".into()));
        }
        let scorer = make_scorer(&ckpt.config, basis, ckpt.reference_params.clone())?;
        Ok(Trainer {
            cfg: ckpt.config,
            arch,
            train,
            test,
            scorer,
            params: ckpt.params,
            best_params: ckpt.best_params,
            adam: ckpt.adam,
            batch_rng: ckpt.batch_rng,
            frozen_scores: ckpt.frozen_scores,
            reference_params: ckpt.reference_params,
            metrics: ckpt.metrics,
        })
    }

    pub fn epoch(&self) -> usize {
        self.metrics.epochs.len()
    }

    pub fn is_done(&self) -> bool {
        self.epoch() >= self.cfg.epochs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            epoch: self.epoch(),
            params: self.params.clone(),
            best_params: self.best_params.clone(),
            adam: self.adam.clone(),
            batch_rng: self.batch_rng.clone(),
            frozen_scores: self.frozen_scores.clone(),
            reference_params: self.reference_params.clone(),
            metrics: self.metrics.clone(),
        }
    }

    fn current_scores(&mut self) -> Result<Vec<f64>> {
        if let Some(s) = &self.frozen_scores {
            return Ok(s.clone());
        }
        let ctx = ScoreContext {
            arch: Some(&self.arch),
            current_params: Some(&self.params),
            num_classes: self.cfg.num_classes,
        };
        let scores = score_all(&self.scorer, self.train, &ctx)?;
        if !self.cfg.strategy.scorer.is_dynamic() {
            self.frozen_scores = Some(scores.clone());
        }
        Ok(scores)
    }

    pub fn run_epoch(&mut self) -> Result<&EpochMetrics> {
        if self.is_done() {
            return Err(Error::InvalidArgument("training already finished".into()));
        }
        let t = self.epoch() + 1;
        let m = self.cfg.num_classes;
        let scores = self.current_scores()?;
        let fraction = self.cfg.strategy.pacing.pace(t, self.cfg.epochs)?;
        let available = select_available(&scores, self.cfg.strategy.ordering, fraction, self.cfg.minibatch)?;

        let mut batches = Vec::with_capacity(self.cfg.steps_per_epoch);
        let mut batch_risk = 0.0;
        for _ in 0..self.cfg.steps_per_epoch {
            let idx = draw_minibatch(&available, self.cfg.minibatch, &mut self.batch_rng)?;
            let batch: Vec<&LabeledExample> = idx.iter().map(|&i| &self.train[i]).collect();
            let (risk, grad) = self.arch.risk_gradient(&self.params, &batch, m)?;
            if !risk.is_finite() {
                return Err(Error::Numerical(format!("non-finite risk at epoch {t}")));
            }
            adam_step(&mut self.adam, &self.cfg.adam, &mut self.params, &grad)?;
            batch_risk += risk;
            batches.push(idx);
        }
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("parameter {i} became non-finite at epoch {t}")));
        }

        let (train_accuracy, train_risk) = evaluate(&self.arch, &self.params, self.train, m)?;
        let (test_accuracy, _) = evaluate(&self.arch, &self.params, self.test, m)?;
        let mt = &mut self.metrics;
        if train_accuracy > mt.best_train_accuracy {
            mt.best_train_accuracy = train_accuracy;
            mt.best_train_epoch = t;
            self.best_params = self.params.clone();
        }
        if test_accuracy > mt.best_test_accuracy {
            mt.best_test_accuracy = test_accuracy;
            mt.best_test_epoch = t;
        }
        mt.final_params = self.params.clone();
        mt.epochs.push(EpochMetrics {
            epoch: t,
            train_accuracy,
            test_accuracy,
            train_risk,
            batch_risk: batch_risk / self.cfg.steps_per_epoch as f64,
            available_size: available.len(),
            batch_indices: batches,
            scores,
        });
        Ok(mt.epochs.last().expect("just pushed"))
    }

    /// Parameters of the epoch with the best training accuracy so far.
    pub fn best_train_params(&self) -> &[f64] {
        &self.best_params
    }

    pub fn finish(self) -> RunMetrics {
        self.metrics
    }
}

fn make_scorer(cfg: &TrainConfig, basis: Option<Arc<LieBasis<f64>>>, reference: Option<Vec<f64>>) -> Result<Scorer> {
    Ok(match cfg.strategy.scorer {
        ScorerKind::SelfTaught => Scorer::SelfTaught {
            reference_params: reference
                .ok_or_else(|| Error::InvalidArgument("self-taught scorer needs reference parameters".into()))?,
        },
        ScorerKind::SelfPaced => Scorer::SelfPaced,
        ScorerKind::PhysicsPg(direction) => Scorer::PhysicsPg {
            basis: basis.ok_or_else(|| Error::InvalidArgument("physics scorer needs a Lie basis".into()))?,
            direction,
        },
        ScorerKind::Random => Scorer::Random { seed: stream(cfg.seed, STREAM_AUX).random::<u64>() ^ 0x5eed },
        ScorerKind::Uniform => Scorer::Uniform,
    })
}

/// Standard-protocol model whose losses order a self-taught curriculum.
pub fn train_reference(
    cfg: &TrainConfig,
    reference_seed: u64,
    train: &[LabeledExample],
    test: &[LabeledExample],
) -> Result<Vec<f64>> {
    let standard = Strategy::preset(StrategyName::Standard, LossScorer::SelfTaught, train.len(), cfg.minibatch, cfg.epochs);
    let ref_cfg = TrainConfig { strategy: standard, seed: reference_seed, reference_seed: None, ..cfg.clone() };
    let mut trainer = Trainer::new(ref_cfg, train, test, None, None)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    Ok(match cfg.reference_choice {
        ReferenceChoice::Final => trainer.params().to_vec(),
        ReferenceChoice::BestTrain => trainer.best_train_params().to_vec(),
    })
}

pub fn train_run(
    cfg: TrainConfig,
    train: &[LabeledExample],
    test: &[LabeledExample],
    basis: Option<Arc<LieBasis<f64>>>,
) -> Result<RunMetrics> {
    let mut trainer = Trainer::new(cfg, train, test, basis, None)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_test_accuracy: Vec<f64>,
    pub sem_test_accuracy: Vec<f64>,
    pub mean_train_accuracy: Vec<f64>,
    pub sem_train_accuracy: Vec<f64>,
    pub best_train_mean: f64,
    pub best_train_sem: f64,
    pub best_test_mean: f64,
    pub best_test_sem: f64,
}

/// Mean and standard error of the mean (sample std / sqrt R); zero for one value.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let r = values.len() as f64;
    if values.iter().all(|&v| v == values[0]) {
        // exact, where summation rounding would leave a tiny spread
        return (values[0], 0.0);
    }
    let mean = values.iter().sum::<f64>() / r;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

pub fn aggregate(runs: &[RunMetrics]) -> Result<Aggregate> {
    let first = runs.first().ok_or_else(|| Error::InvalidArgument("no runs to aggregate".into()))?;
    let t = first.epochs.len();
    if let Some(r) = runs.iter().find(|r| r.epochs.len() != t) {
        return Err(Error::DimensionMismatch { expected: t, found: r.epochs.len() });
    }
    let column = |f: &dyn Fn(&EpochMetrics) -> f64| -> (Vec<f64>, Vec<f64>) {
        (0..t)
            .map(|e| mean_sem(&runs.iter().map(|r| f(&r.epochs[e])).collect::<Vec<_>>()))
            .unzip()
    };
    let (mean_test_accuracy, sem_test_accuracy) = column(&|m| m.test_accuracy);
    let (mean_train_accuracy, sem_train_accuracy) = column(&|m| m.train_accuracy);
    let (best_train_mean, best_train_sem) = mean_sem(&runs.iter().map(|r| r.best_train_accuracy).collect::<Vec<_>>());
    let (best_test_mean, best_test_sem) = mean_sem(&runs.iter().map(|r| r.best_test_accuracy).collect::<Vec<_>>());
    Ok(Aggregate {
        runs: runs.len(),
        mean_test_accuracy,
        sem_test_accuracy,
        mean_train_accuracy,
        sem_train_accuracy,
        best_train_mean,
        best_train_sem,
        best_test_mean,
        best_test_sem,
    })
}
