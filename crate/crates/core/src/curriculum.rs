//! Scoring, pacing and subset selection for curriculum-ordered training.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::LieBasis;
use crate::models::LabeledExample;
use crate::qcnn::QcnnArchitecture;

/// Which end of the `P_g` range is admitted first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LowerFirst,
    HigherFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    Ascending,
    Descending,
}

/// Scorer without its runtime data, as named in configs and presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    SelfTaught,
    SelfPaced,
    PhysicsPg(Direction),
    Random,
    Uniform,
}

impl ScorerKind {
    /// Scores change between epochs and must be recomputed.
    pub fn is_dynamic(self) -> bool {
        self == ScorerKind::SelfPaced
    }
}

#[derive(Clone, Debug)]
pub enum Scorer {
    /// Loss under fixed reference parameters.
    SelfTaught { reference_params: Vec<f64> },
    /// Loss under the current parameters.
    SelfPaced,
    /// `1 - P_g` of each input state.
    PhysicsPg { basis: Arc<LieBasis<f64>>, direction: Direction },
    Random { seed: u64 },
    Uniform,
}

impl Scorer {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::SelfTaught { .. } => ScorerKind::SelfTaught,
            Scorer::SelfPaced => ScorerKind::SelfPaced,
            Scorer::PhysicsPg { direction, .. } => ScorerKind::PhysicsPg(*direction),
            Scorer::Random { .. } => ScorerKind::Random,
            Scorer::Uniform => ScorerKind::Uniform,
        }
    }
}

/// Model state a scorer may need.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScoreContext<'a> {
    pub arch: Option<&'a QcnnArchitecture>,
    pub current_params: Option<&'a [f64]>,
    pub num_classes: usize,
}

/// Rescales to `[0, 1]`; a constant vector maps to zeros.
pub fn min_max(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

fn losses(arch: &QcnnArchitecture, params: &[f64], examples: &[LabeledExample], m: usize) -> Result<Vec<f64>> {
    examples.par_iter().map(|e| arch.loss(params, e, m)).collect()
}

pub fn score_all(scorer: &Scorer, examples: &[LabeledExample], ctx: &ScoreContext<'_>) -> Result<Vec<f64>> {
    let need_arch = || ctx.arch.ok_or_else(|| Error::InvalidArgument("loss-based scorer needs an architecture".into()));
    match scorer {
        Scorer::SelfTaught { reference_params } => {
            Ok(min_max(&losses(need_arch()?, reference_params, examples, ctx.num_classes)?))
        }
        Scorer::SelfPaced => {
            let params = ctx
                .current_params
                .ok_or_else(|| Error::InvalidArgument("self-paced scorer needs current parameters".into()))?;
            Ok(min_max(&losses(need_arch()?, params, examples, ctx.num_classes)?))
        }
        // already in [0, 1] by the Bessel bound, so used as is
        Scorer::PhysicsPg { basis, .. } => examples.par_iter().map(|e| basis.pg_score(&e.state)).collect(),
        Scorer::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let raw: Vec<f64> = (0..examples.len()).map(|_| rng.random::<f64>()).collect();
            Ok(min_max(&raw))
        }
        Scorer::Uniform => Ok(vec![0.0; examples.len()]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PacingFn {
    Linear { p0: f64, t_sat: f64 },
    RootP { p0: f64, t_sat: f64 },
    Geometric { p0: f64, t_sat: f64 },
    Constant { fraction: f64 },
    Full,
}

impl PacingFn {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        match *self {
            PacingFn::Linear { p0, t_sat } | PacingFn::RootP { p0, t_sat } | PacingFn::Geometric { p0, t_sat } => {
                if !(p0 > 0.0 && p0 <= 1.0) {
                    return bad(format!("start fraction {p0} outside (0, 1]"));
                }
                if !(t_sat > 0.0) {
                    return bad(format!("saturation epoch {t_sat} must be positive"));
                }
                Ok(())
            }
            PacingFn::Constant { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                bad(format!("constant fraction {fraction} outside (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Fraction of the ordered dataset available at epoch `t` of `total`.
    pub fn pace(&self, t: usize, total: usize) -> Result<f64> {
        if t == 0 || t > total {
            return Err(Error::InvalidArgument(format!("epoch {t} outside 1..={total}")));
        }
        self.validate()?;
        let t = t as f64;
        Ok(match *self {
            PacingFn::Linear { p0, t_sat } => (p0 + (1.0 - p0) * t / t_sat).min(1.0),
            PacingFn::RootP { p0, t_sat } => (p0 * p0 + (1.0 - p0 * p0) * t / t_sat).sqrt().min(1.0),
            PacingFn::Geometric { p0, t_sat } => (p0 * (1.0 / p0).powf(t / t_sat)).min(1.0),
            PacingFn::Constant { fraction } => fraction,
            PacingFn::Full => 1.0,
        })
    }
}

/// Indices sorted by score (ties by index), truncated to
/// `max(⌈fraction·N⌉, min(L, N))`.
pub fn select_available(scores: &[f64], ordering: Ordering, fraction: f64, l: usize) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
    }
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        let by_score = match ordering {
            Ordering::Ascending => scores[a].total_cmp(&scores[b]),
            Ordering::Descending => scores[b].total_cmp(&scores[a]),
        };
        by_score.then(a.cmp(&b))
    });
    // the small slack keeps fractions such as 0.2 * 50 from rounding up to 11
    let by_fraction = (fraction * n as f64 - 1e-9).ceil() as usize;
    idx.truncate(by_fraction.max(l.min(n)).min(n));
    Ok(idx)
}

/// Uniform sample of `min(L, |available|)` entries without replacement.
pub fn draw_minibatch<R: Rng + ?Sized>(available: &[usize], l: usize, rng: &mut R) -> Result<Vec<usize>> {
    if available.is_empty() {
        return Err(Error::InvalidArgument("no examples available".into()));
    }
    let k = l.min(available.len());
    Ok(index::sample(rng, available.len(), k).into_iter().map(|i| available[i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Standard,
    Random,
    Easy,
    Hard,
    Hardest,
    HigherPg,
    LowerPg,
}

impl StrategyName {
    pub const ALL: [StrategyName; 7] = [
        StrategyName::Standard,
        StrategyName::Random,
        StrategyName::Easy,
        StrategyName::Hard,
        StrategyName::Hardest,
        StrategyName::HigherPg,
        StrategyName::LowerPg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Standard => "standard",
            StrategyName::Random => "random",
            StrategyName::Easy => "easy",
            StrategyName::Hard => "hard",
            StrategyName::Hardest => "hardest",
            StrategyName::HigherPg => "higher-pg",
            StrategyName::LowerPg => "lower-pg",
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

/// Loss-based scorer used by the Easy/Hard/Hardest presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossScorer {
    SelfTaught,
    SelfPaced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: StrategyName,
    pub scorer: ScorerKind,
    pub ordering: Ordering,
    pub pacing: PacingFn,
}

impl Strategy {
    /// Preset table for a dataset of `n` examples, minibatch `l` and
    /// `epochs` epochs. Curricula default to linear pacing from `L/N`,
    /// saturating at 80% of the epochs.
    pub fn preset(name: StrategyName, loss: LossScorer, n: usize, l: usize, epochs: usize) -> Strategy {
        let start = (l as f64 / n.max(1) as f64).min(1.0);
        let linear = PacingFn::Linear { p0: start, t_sat: 0.8 * epochs as f64 };
        let loss_kind = match loss {
            LossScorer::SelfTaught => ScorerKind::SelfTaught,
            LossScorer::SelfPaced => ScorerKind::SelfPaced,
        };
        let (scorer, ordering, pacing) = match name {
            StrategyName::Standard => (ScorerKind::Uniform, Ordering::Ascending, PacingFn::Full),
            StrategyName::Random => (ScorerKind::Random, Ordering::Ascending, linear),
            StrategyName::Easy => (loss_kind, Ordering::Ascending, linear),
            StrategyName::Hard => (loss_kind, Ordering::Descending, linear),
            StrategyName::Hardest => {
                (ScorerKind::SelfPaced, Ordering::Descending, PacingFn::Constant { fraction: start })
            }
            StrategyName::HigherPg => {
                (ScorerKind::PhysicsPg(Direction::HigherFirst), physics_ordering(Direction::HigherFirst), linear)
            }
            StrategyName::LowerPg => {
                (ScorerKind::PhysicsPg(Direction::LowerFirst), physics_ordering(Direction::LowerFirst), linear)
            }
        };
        Strategy { name, scorer, ordering, pacing }
    }
}

/// The score is `1 - P_g`, so high purity first means ascending score.
pub fn physics_ordering(direction: Direction) -> Ordering {
    match direction {
        Direction::HigherFirst => Ordering::Ascending,
        Direction::LowerFirst => Ordering::Descending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Couplings;
    use crate::qcnn::{build_qcnn, Variant};
    use crate::state::StateVector;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn min_max_examples() {
        let s = min_max(&[0.1, 0.4, 0.9]);
        assert!((s[0] - 0.0).abs() < 1e-15 && (s[1] - 0.375).abs() < 1e-15 && (s[2] - 1.0).abs() < 1e-15);
        assert_eq!(min_max(&[0.3, 0.3]), vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_scores_are_zero() {
        let examples: Vec<LabeledExample> = Vec::new();
        assert!(score_all(&Scorer::Uniform, &examples, &ScoreContext::default()).unwrap().is_empty());
    }

    #[test]
    fn loss_scorers_need_context() {
        let e = LabeledExample {
            state: StateVector::zero_state(8),
            label: vec![1.0, 0.0, 0.0, 0.0],
            couplings: Couplings { j1: 0.0, j2: 0.0, delta: None },
            phase_index: 0,
            score: None,
            degenerate: false,
            energy: 0.0,
            gap: 1.0,
        };
        let ctx = ScoreContext { num_classes: 4, ..Default::default() };
        assert!(score_all(&Scorer::SelfPaced, &[e.clone()], &ctx).is_err());
        let arch = build_qcnn(Variant::Matchgate);
        let ctx = ScoreContext { arch: Some(&arch), num_classes: 4, ..Default::default() };
        assert!(score_all(&Scorer::SelfPaced, &[e.clone()], &ctx).is_err());
        let theta = vec![0.0; arch.total_params];
        let ctx = ScoreContext { current_params: Some(&theta), ..ctx };
        assert_eq!(score_all(&Scorer::SelfPaced, &[e], &ctx).unwrap(), vec![0.0]);
    }

    #[test]
    fn pacing_examples() {
        let lin = PacingFn::Linear { p0: 0.2, t_sat: 10.0 };
        assert_eq!(lin.pace(10, 10).unwrap(), 1.0);
        assert_eq!(PacingFn::Constant { fraction: 0.2 }.pace(7, 10).unwrap(), 0.2);
        assert_eq!(PacingFn::Full.pace(1, 10).unwrap(), 1.0);
        assert!(lin.pace(0, 10).is_err());
        assert!(lin.pace(11, 10).is_err());
        for t in 1..=20 {
            let root = PacingFn::RootP { p0: 0.2, t_sat: 10.0 }.pace(t, 20).unwrap();
            assert!(root >= lin.pace(t, 20).unwrap());
        }
        let geo = PacingFn::Geometric { p0: 0.25, t_sat: 4.0 };
        assert!((geo.pace(2, 4).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_available(&[0.9, 0.1, 0.5], Ordering::Ascending, 0.5, 1).unwrap(), vec![1, 2]);
        assert_eq!(select_available(&[0.9, 0.1, 0.5], Ordering::Descending, 1.0, 1).unwrap(), vec![0, 2, 1]);
        assert_eq!(select_available(&[0.0; 4], Ordering::Descending, 1.0, 1).unwrap(), vec![0, 1, 2, 3]);
        // the minibatch floor
        assert_eq!(select_available(&[0.0; 50], Ordering::Ascending, 0.01, 10).unwrap().len(), 10);
        assert_eq!(select_available(&[0.0; 50], Ordering::Ascending, 0.2, 10).unwrap().len(), 10);
        assert_eq!(select_available(&[0.0; 5], Ordering::Ascending, 0.2, 10).unwrap().len(), 5);
    }

    #[test]
    fn minibatch_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let avail: Vec<usize> = (10..20).collect();
        let mut all = draw_minibatch(&avail, 10, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, avail);
        let mut few = draw_minibatch(&avail[..3], 10, &mut rng).unwrap();
        few.sort_unstable();
        assert_eq!(few, vec![10, 11, 12]);
        let a = draw_minibatch(&avail, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = draw_minibatch(&avail, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(draw_minibatch(&[], 4, &mut rng).is_err());
    }

    #[test]
    fn preset_table() {
        let p = |name| Strategy::preset(name, LossScorer::SelfTaught, 50, 10, 100);
        assert_eq!(p(StrategyName::Standard).pacing, PacingFn::Full);
        assert_eq!(p(StrategyName::Standard).scorer, ScorerKind::Uniform);
        assert_eq!(p(StrategyName::Hardest).pacing, PacingFn::Constant { fraction: 0.2 });
        assert_eq!(p(StrategyName::Hardest).scorer, ScorerKind::SelfPaced);
        assert_eq!(p(StrategyName::Easy).ordering, Ordering::Ascending);
        assert_eq!(p(StrategyName::Easy).scorer, ScorerKind::SelfTaught);
        assert_eq!(p(StrategyName::Hard).ordering, Ordering::Descending);
        assert_eq!(p(StrategyName::Easy).pacing, PacingFn::Linear { p0: 0.2, t_sat: 80.0 });
        assert_eq!(p(StrategyName::HigherPg).ordering, Ordering::Ascending);
        assert_eq!(p(StrategyName::LowerPg).ordering, Ordering::Descending);
        let sp = Strategy::preset(StrategyName::Hard, LossScorer::SelfPaced, 50, 10, 100);
        assert_eq!(sp.scorer, ScorerKind::SelfPaced);
        assert_eq!("higher-pg".parse::<StrategyName>().unwrap(), StrategyName::HigherPg);
        assert!("medium".parse::<StrategyName>().is_err());
    }

    proptest! {
        #[test]
        fn ordered_prefix_respects_scores(
            scores in proptest::collection::vec(0.0f64..1.0, 1..40),
            fraction in 0.01f64..=1.0,
            desc in any::<bool>(),
        ) {
            let ordering = if desc { Ordering::Descending } else { Ordering::Ascending };
            let sel = select_available(&scores, ordering, fraction, 3).unwrap();
            let chosen: std::collections::HashSet<usize> = sel.iter().copied().collect();
            for &i in &sel {
                for j in 0..scores.len() {
                    if chosen.contains(&j) { continue; }
                    match ordering {
                        Ordering::Ascending => prop_assert!(scores[i] <= scores[j]),
                        Ordering::Descending => prop_assert!(scores[i] >= scores[j]),
                    }
                }
            }
        }

        #[test]
        fn monotone_pacing(p0 in 0.01f64..=1.0, t_sat in 1.0f64..100.0, kind in 0usize..3) {
            let f = match kind {
                0 => PacingFn::Linear { p0, t_sat },
                1 => PacingFn::RootP { p0, t_sat },
                _ => PacingFn::Geometric { p0, t_sat },
            };
            let mut prev = 0.0;
            for t in 1..=100 {
                let v = f.pace(t, 100).unwrap();
                prop_assert!(v > 0.0 && v <= 1.0);
                prop_assert!(v >= prev - 1e-15);
                prev = v;
            }
            prop_assert_eq!(f.pace(100, 100).unwrap() >= 1.0 - 1e-12, t_sat <= 100.0 || p0 == 1.0);
        }

        #[test]
        fn frozen_scores_give_growing_sets(scores in proptest::collection::vec(0.0f64..1.0, 5..40)) {
            let f = PacingFn::Linear { p0: 0.1, t_sat: 8.0 };
            let mut prev: Vec<usize> = Vec::new();
            for t in 1..=10 {
                let s = select_available(&scores, Ordering::Ascending, f.pace(t, 10).unwrap(), 2).unwrap();
                prop_assert!(prev.iter().all(|i| s.contains(i)));
                prev = s;
            }
            prop_assert_eq!(prev.len(), scores.len());
        }
    }
}
