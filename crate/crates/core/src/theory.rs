//! Empirical checks of the two curriculum propositions: gradient magnitude
//! against score (first) and gradient variance against final risk (second).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curriculum::{draw_minibatch, select_available, Ordering, PacingFn};
use crate::error::{Error, Result};
use crate::models::LabeledExample;
use crate::qcnn::QcnnArchitecture;
use crate::training::mean_sem;

/// Bins with fewer draws than this are flagged.
pub const MIN_BIN_SAMPLES: usize = 20;
pub const DEFAULT_BINS: usize = 10;
/// Relative slack for comparing bin-level means.
const REL_TOL: f64 = 1e-12;

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProfile {
    /// `bins + 1` equal-width edges on `[0, 1]`.
    pub edges: Vec<f64>,
    /// Mean squared gradient norm per bin; `None` for empty bins.
    pub g: Vec<Option<f64>>,
    /// Number of (initialization, example) draws per bin.
    pub counts: Vec<usize>,
    pub low_confidence: Vec<bool>,
    /// Empirical score CDF at each right edge.
    pub cdf: Vec<f64>,
    pub scores: Vec<f64>,
    /// Squared gradient norm per example, averaged over initializations.
    pub per_example: Vec<f64>,
    pub param_samples: usize,
}

fn bin_of(score: f64, bins: usize) -> usize {
    ((score.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Bins precomputed squared gradient norms `sq[sample][example]` by score.
pub fn profile_from_norms(scores: &[f64], sq: &[Vec<f64>], bins: usize) -> Result<GradientProfile> {
    if bins == 0 || scores.is_empty() || sq.is_empty() {
        return Err(Error::InvalidArgument("profile needs scores, samples and at least one bin".into()));
    }
    if let Some(row) = sq.iter().find(|r| r.len() != scores.len()) {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: row.len() });
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidArgument(format!("score {s} outside [0, 1]")));
    }
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for row in sq {
        for (s, v) in scores.iter().zip(row) {
            let b = bin_of(*s, bins);
            sums[b] += v;
            counts[b] += 1;
        }
    }
    let n = scores.len() as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut per_bin = vec![0usize; bins];
    for s in scores {
        per_bin[bin_of(*s, bins)] += 1;
    }
    let mut acc = 0usize;
    let cdf = per_bin
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect();
    let samples = sq.len() as f64;
    Ok(GradientProfile {
        edges,
        g: sums.iter().zip(&counts).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect(),
        low_confidence: counts.iter().map(|&c| c < MIN_BIN_SAMPLES).collect(),
        counts,
        cdf,
        scores: scores.to_vec(),
        per_example: (0..scores.len()).map(|i| sq.iter().map(|r| r[i]).sum::<f64>() / samples).collect(),
        param_samples: sq.len(),
    })
}

/// Estimates `G(z) = E[|grad l|^2 | s = z]` over `param_samples` random
/// initializations, binned by the given scores.
pub fn estimate_g(
    arch: &QcnnArchitecture,
    examples: &[LabeledExample],
    scores: &[f64],
    m: usize,
    param_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<GradientProfile> {
    if param_samples == 0 {
        return Err(Error::InvalidArgument("need at least one parameter sample".into()));
    }
    if scores.len() != examples.len() {
        return Err(Error::DimensionMismatch { expected: examples.len(), found: scores.len() });
    }
    let sq = (0..param_samples)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let theta = arch.init_params(&mut rng);
            examples
                .iter()
                .map(|e| Ok(sq_norm(&arch.loss_gradient(&theta, e, m)?.1)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    profile_from_norms(scores, &sq, bins)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Row {
    pub fraction: f64,
    /// Bins `0..bins_used` form the lowest-score subset.
    pub bins_used: usize,
    pub subset_mean: f64,
    pub full_mean: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    /// The hypothesis: binned `G` is non-increasing in the score.
    pub g_non_increasing: bool,
    pub empty_bins: Vec<usize>,
    pub low_confidence_bins: Vec<usize>,
    pub rows: Vec<Prop1Row>,
}

impl GradientProfile {
    /// Count-weighted mean of `G` over bins `0..k`.
    fn prefix_mean(&self, k: usize) -> f64 {
        let (mut total, mut count) = (0.0, 0usize);
        for b in 0..k {
            if let Some(g) = self.g[b] {
                total += g * self.counts[b] as f64;
                count += self.counts[b];
            }
        }
        total / count as f64
    }

    pub fn is_non_increasing(&self) -> bool {
        let vals: Vec<f64> = self.g.iter().flatten().copied().collect();
        vals.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Compares the mean squared gradient over the lowest-score fraction with
/// the full-set mean, at bin resolution.
pub fn prop1_check(profile: &GradientProfile, fractions: &[f64]) -> Result<Prop1Report> {
    let bins = profile.g.len();
    let full_mean = profile.prefix_mean(bins);
    let rows = fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!("fraction {f} outside (0, 1]")));
            }
            // smallest prefix of bins holding at least the fraction; a
            // fraction of one takes every bin
            let bins_used = if f >= 1.0 {
                bins
            } else {
                profile.cdf.iter().position(|&c| c >= f - 1e-12).map_or(bins, |k| k + 1)
            };
            let subset_mean = profile.prefix_mean(bins_used);
            Ok(Prop1Row {
                fraction: f,
                bins_used,
                subset_mean,
                full_mean,
                ratio: subset_mean / full_mean,
                holds: subset_mean >= full_mean * (1.0 - REL_TOL),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prop1Report {
        g_non_increasing: profile.is_non_increasing(),
        empty_bins: (0..bins).filter(|&b| profile.counts[b] == 0).collect(),
        low_confidence_bins: (0..bins).filter(|&b| profile.counts[b] > 0 && profile.low_confidence[b]).collect(),
        rows,
    })
}

/// Mean of `|g_i - mean(g)|^2` over the given per-example gradients.
pub fn variance_of(grads: &[Vec<f64>]) -> Result<f64> {
    let first = grads.first().ok_or_else(|| Error::InvalidArgument("empty subset".into()))?;
    let d = first.len();
    if let Some(g) = grads.iter().find(|g| g.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: g.len() });
    }
    let n = grads.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| grads.iter().map(|g| g[j]).sum::<f64>() / n).collect();
    Ok(grads
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / n)
}

/// Variance of the per-example QCNN loss gradient over `subset`.
pub fn gradient_variance(arch: &QcnnArchitecture, subset: &[&LabeledExample], params: &[f64], m: usize) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty subset".into()));
    }
    let grads = subset
        .par_iter()
        .map(|e| Ok(arch.loss_gradient(params, e, m)?.1))
        .collect::<Result<Vec<_>>>()?;
    variance_of(&grads)
}

/// Convex stand-in for the classifier: a linear readout `W x` with squared
/// loss `|W x - y|^2 / 2` over fixed features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Surrogate {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if features.is_empty() || features.len() != targets.len() {
            return Err(Error::InvalidArgument("need one target per feature vector".into()));
        }
        let (d, m) = (features[0].len(), targets[0].len());
        if features.iter().any(|f| f.len() != d) || targets.iter().any(|t| t.len() != m) {
            return Err(Error::InvalidArgument("ragged features or targets".into()));
        }
        Ok(Surrogate { features, targets })
    }

    /// Features `(<Z_0>, ..., <Z_{n-1}>, 1)` of each state after a frozen
    /// circuit with parameters drawn from `seed`.
    pub fn from_states(arch: &QcnnArchitecture, examples: &[LabeledExample], seed: u64) -> Result<Self> {
        let theta = arch.init_params(&mut ChaCha8Rng::seed_from_u64(seed));
        let features = examples
            .iter()
            .map(|e| {
                let out = arch.output_state(&theta, &e.state)?;
                let n = out.n();
                let mut z = vec![0.0; n + 1];
                for (b, a) in out.amplitudes().iter().enumerate() {
                    let p = a.norm_sqr();
                    for (q, zq) in z.iter_mut().take(n).enumerate() {
                        *zq += if (b >> (n - 1 - q)) & 1 == 0 { p } else { -p };
                    }
                }
                z[n] = 1.0;
                Ok(z)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, examples.iter().map(|e| e.label.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn dims(&self) -> (usize, usize) {
        (self.targets[0].len(), self.features[0].len())
    }

    fn residual(&self, w: &[f64], i: usize) -> Vec<f64> {
        let (m, d) = self.dims();
        let x = &self.features[i];
        (0..m).map(|r| (0..d).map(|c| w[r * d + c] * x[c]).sum::<f64>() - self.targets[i][r]).collect()
    }

    pub fn loss(&self, w: &[f64], i: usize) -> f64 {
        0.5 * sq_norm(&self.residual(w, i))
    }

    pub fn gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        let (m, d) = self.dims();
        let r = self.residual(w, i);
        let x = &self.features[i];
        let mut g = vec![0.0; m * d];
        for a in 0..m {
            for c in 0..d {
                g[a * d + c] = r[a] * x[c];
            }
        }
        g
    }

    pub fn risk(&self, w: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.loss(w, i)).sum::<f64>() / self.len() as f64
    }

    fn grads(&self, w: &[f64], idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.gradient(w, i)).collect()
    }

    /// Per-example `|g_i - grad R|^2` with `R` the full-set risk.
    pub fn contributions(&self, w: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        let g = self.grads(w, &all);
        let n = g.len() as f64;
        let dim = g[0].len();
        let mean: Vec<f64> = (0..dim).map(|j| g.iter().map(|v| v[j]).sum::<f64>() / n).collect();
        g.iter().map(|v| v.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop2Config {
    pub seeds: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub minibatch: usize,
    pub lr: f64,
    /// Spread of the initial readout weights.
    pub init_scale: f64,
}

impl Default for Prop2Config {
    fn default() -> Self {
        Prop2Config { seeds: 50, epochs: 50, steps_per_epoch: 5, minibatch: 10, lr: 0.05, init_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop2Seed {
    pub seed: u64,
    pub final_risk_curriculum: f64,
    pub final_risk_random: f64,
    /// Mean of `|g_i - grad R|^2` over the curriculum's available set, at
    /// the curriculum's parameters at the start of each epoch.
    pub sigma2_curriculum: Vec<f64>,
    /// The same over the full set, at the random-order run's parameters.
    pub sigma2_random: Vec<f64>,
    /// Both variances again, evaluated at the shared initial parameters.
    pub sigma2_curriculum_initial: Vec<f64>,
    pub sigma2_random_initial: Vec<f64>,
    /// Epochs (1-based) where the curriculum variance exceeds the random one.
    pub premise_failures: Vec<usize>,
    pub premise_holds: bool,
    /// Summed form: total curriculum variance at most the random total.
    pub cumulative_premise_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub surrogate: String,
    pub config: Prop2Config,
    pub seeds: Vec<Prop2Seed>,
    pub mean_risk_curriculum: f64,
    pub mean_risk_random: f64,
    pub sem_risk_curriculum: f64,
    pub sem_risk_random: f64,
    /// Seeds on which the per-epoch premise held throughout.
    pub premise_seeds: usize,
    /// Paired mean and standard error of `risk(curriculum) - risk(random)`
    /// over the premise seeds; absent with fewer than two such seeds.
    pub premise_mean_difference: Option<f64>,
    pub premise_sem_difference: Option<f64>,
    /// Whether the risk ordering holds within one standard error on the
    /// premise seeds.
    pub conclusion_holds: Option<bool>,
}

pub const SURROGATE_DESCRIPTION: &str = "linear readout W (M x d) over features (<Z_0>, ..., <Z_{n-1}>, 1) of the \
input states after a frozen random circuit; loss |Wx - y|^2 / 2; minibatch SGD with constant step; curriculum \
admits examples in increasing order of |g_i - mean g|^2 at the current parameters under linear pacing from L/N \
saturating at 0.8 T; the baseline draws minibatches from the whole set";

fn sgd_step(w: &mut [f64], s: &Surrogate, batch: &[usize], lr: f64) {
    let g = s.grads(w, batch);
    let k = batch.len() as f64;
    for j in 0..w.len() {
        w[j] -= lr * g.iter().map(|v| v[j]).sum::<f64>() / k;
    }
}

fn prop2_seed(s: &Surrogate, cfg: &Prop2Config, seed: u64) -> Result<Prop2Seed> {
    let (m, d) = s.dims();
    let n = s.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0: Vec<f64> = (0..m * d).map(|_| cfg.init_scale * rng.random_range(-1.0..1.0)).collect();
    let pacing = PacingFn::Linear { p0: (cfg.minibatch as f64 / n as f64).min(1.0), t_sat: 0.8 * cfg.epochs as f64 };
    let all: Vec<usize> = (0..n).collect();
    let c0 = s.contributions(&w0);
    let mean_over = |c: &[f64], idx: &[usize]| idx.iter().map(|&i| c[i]).sum::<f64>() / idx.len() as f64;
    let sigma_rand_initial = mean_over(&c0, &all);

    let (mut wa, mut wb) = (w0.clone(), w0.clone());
    let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
    rng_a.set_stream(1);
    let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
    rng_b.set_stream(2);
    let mut out = Prop2Seed {
        seed,
        final_risk_curriculum: 0.0,
        final_risk_random: 0.0,
        sigma2_curriculum: Vec::new(),
        sigma2_random: Vec::new(),
        sigma2_curriculum_initial: Vec::new(),
        sigma2_random_initial: Vec::new(),
        premise_failures: Vec::new(),
        premise_holds: true,
        cumulative_premise_holds: true,
    };
    for t in 1..=cfg.epochs {
        let ca = s.contributions(&wa);
        let available = select_available(&ca, Ordering::Ascending, pacing.pace(t, cfg.epochs)?, cfg.minibatch)?;
        let sa = mean_over(&ca, &available);
        let sb = mean_over(&s.contributions(&wb), &all);
        out.sigma2_curriculum.push(sa);
        out.sigma2_random.push(sb);
        out.sigma2_curriculum_initial.push(mean_over(&c0, &available));
        out.sigma2_random_initial.push(sigma_rand_initial);
        if sa > sb {
            out.premise_failures.push(t);
        }
        for _ in 0..cfg.steps_per_epoch {
            let ba = draw_minibatch(&available, cfg.minibatch, &mut rng_a)?;
            sgd_step(&mut wa, s, &ba, cfg.lr);
            let bb = draw_minibatch(&all, cfg.minibatch, &mut rng_b)?;
            sgd_step(&mut wb, s, &bb, cfg.lr);
        }
    }
    out.premise_holds = out.premise_failures.is_empty();
    out.cumulative_premise_holds = out.sigma2_curriculum.iter().sum::<f64>() <= out.sigma2_random.iter().sum::<f64>();
    out.final_risk_curriculum = s.risk(&wa);
    out.final_risk_random = s.risk(&wb);
    if !(out.final_risk_curriculum.is_finite() && out.final_risk_random.is_finite()) {
        return Err(Error::Numerical(format!("surrogate training diverged for seed {seed}")));
    }
    Ok(out)
}

/// Runs the curriculum-versus-random comparison for seeds `0..cfg.seeds`.
pub fn prop2_check(s: &Surrogate, cfg: &Prop2Config) -> Result<Prop2Report> {
    if cfg.seeds == 0 || cfg.epochs == 0 || cfg.steps_per_epoch == 0 || cfg.minibatch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument("invalid surrogate configuration".into()));
    }
    let seeds = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|seed| prop2_seed(s, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let (mean_a, sem_a) = mean_sem(&seeds.iter().map(|r| r.final_risk_curriculum).collect::<Vec<_>>());
    let (mean_b, sem_b) = mean_sem(&seeds.iter().map(|r| r.final_risk_random).collect::<Vec<_>>());
    let diffs: Vec<f64> = seeds
        .iter()
        .filter(|r| r.premise_holds)
        .map(|r| r.final_risk_curriculum - r.final_risk_random)
        .collect();
    let (mean_diff, sem_diff, holds) = if diffs.len() >= 2 {
        let (md, sd) = mean_sem(&diffs);
        (Some(md), Some(sd), Some(md <= sd))
    } else {
        (None, None, None)
    };
    Ok(Prop2Report {
        surrogate: SURROGATE_DESCRIPTION.to_owned(),
        config: *cfg,
        premise_seeds: diffs.len(),
        seeds,
        mean_risk_curriculum: mean_a,
        mean_risk_random: mean_b,
        sem_risk_curriculum: sem_a,
        sem_risk_random: sem_b,
        premise_mean_difference: mean_diff,
        premise_sem_difference: sem_diff,
        conclusion_holds: holds,
    })
}
