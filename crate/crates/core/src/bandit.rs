//! Sleeping-bandit policy (awake upper-estimated reward).
//!
//! ```text
//! score(a) = awake(a) * (R_a + alpha * sqrt(ln t / (N_a + eps)))
//! ```
//!
//! Rewards are raw target counts, so they are not normalised to `[0, 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ActionId;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BanditError {
    #[error("no awake action to select")]
    AllAsleep,
    #[error("reward update on action {0} that was never pulled")]
    NotPulled(ActionId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig<F> {
    pub alpha: F,
    pub epsilon: F,
}

impl<F: Scalar> Default for BanditConfig<F> {
    fn default() -> Self {
        Self {
            alpha: F::lit(2.0 * std::f64::consts::SQRT_2),
            epsilon: F::lit(1e-6),
        }
    }
}

/// Pull count and running mean reward of one action.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmStats<F> {
    pub pulls: u64,
    pub mean_reward: F,
}

impl<F: Scalar> ArmStats<F> {
    /// Counts a selection (done before the pulled page is fetched).
    pub fn record_pull(&mut self) {
        self.pulls += 1;
    }

    /// `R <- R + (reward - R) / N`.
    pub fn update_reward(&mut self, id: ActionId, reward: F) -> Result<(), BanditError> {
        if self.pulls == 0 {
            return Err(BanditError::NotPulled(id));
        }
        self.mean_reward = self.mean_reward + (reward - self.mean_reward) / F::count(self.pulls);
        Ok(())
    }
}

/// `ln t`, taken as 0 for `t <= 1`.
fn log_t<F: Scalar>(t: u64) -> F {
    if t <= 1 {
        F::zero()
    } else {
        F::count(t).ln()
    }
}

pub fn score<F: Scalar>(stats: &ArmStats<F>, awake: bool, t: u64, cfg: &BanditConfig<F>) -> F {
    if !awake {
        return F::zero();
    }
    let bonus = (log_t::<F>(t) / (F::count(stats.pulls) + cfg.epsilon)).sqrt();
    stats.mean_reward + cfg.alpha * bonus
}

/// Argmax of [`score`] over awake actions; ties go to the lowest id.
pub fn select_action<'a, F, I>(arms: I, t: u64, cfg: &BanditConfig<F>) -> Result<ActionId, BanditError>
where
    F: Scalar,
    I: IntoIterator<Item = (ActionId, &'a ArmStats<F>, bool)>,
{
    let mut best: Option<(ActionId, F)> = None;
    for (id, stats, awake) in arms {
        if !awake {
            continue;
        }
        let s = score(stats, true, t, cfg);
        best = match best {
            None => Some((id, s)),
            Some((bid, bs)) if s > bs || (s == bs && id < bid) => Some((id, s)),
            keep => keep,
        };
    }
    best.map(|(id, _)| id).ok_or(BanditError::AllAsleep)
}

/// Per-action statistics plus the global step counter.
#[derive(Debug, Clone)]
pub struct BanditState<F> {
    pub config: BanditConfig<F>,
    arms: Vec<ArmStats<F>>,
}

impl<F: Scalar> BanditState<F> {
    pub fn new(config: BanditConfig<F>) -> Self {
        Self {
            config,
            arms: Vec::new(),
        }
    }

    pub fn ensure(&mut self, id: ActionId) {
        if self.arms.len() <= id.index() {
            self.arms.resize(id.index() + 1, ArmStats::default());
        }
    }

    pub fn arm(&self, id: ActionId) -> ArmStats<F> {
        self.arms.get(id.index()).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Picks the best awake arm and counts the pull.
    pub fn select(&mut self, t: u64, awake: impl Fn(ActionId) -> bool) -> Result<ActionId, BanditError> {
        let id = select_action(
            self.arms
                .iter()
                .enumerate()
                .map(|(i, s)| (ActionId(i as u32), s, awake(ActionId(i as u32)))),
            t,
            &self.config,
        )?;
        self.arms[id.index()].record_pull();
        Ok(id)
    }

    pub fn reward(&mut self, id: ActionId, reward: F) -> Result<(), BanditError> {
        self.ensure(id);
        self.arms[id.index()].update_reward(id, reward)
    }
}
