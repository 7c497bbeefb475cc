//! Equilibrium verification and search.
//!
//! A candidate is a strategy, a partition of the contingencies and the
//! complexity cost. It is an ML equilibrium when the partition minimizes
//! the penalized objective and every action played is a best reply to the
//! partition-induced beliefs. The strong variant additionally asks every
//! contingency, null ones included, to be optimally assigned; the monotone
//! variant restricts admissible partitions to those whose beliefs fall
//! weakly in the payoff state.

mod closed_form;
mod search;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{representative_strategies, BeliefProfile, Partition, Penalty};
use crate::trust_game::{
    best_replies, ergodic_distribution, overall_cooperation_rate, Action, ErgodicDistribution, ReplySet, StateSpace,
    Strategy,
};

pub use closed_form::{nash_benchmark, solve_n1, solve_n2, N2Outcome, N2Solution, N2StateOutcome};
pub use search::{
    grid_search, refine_indifference, ApproximateCandidate, Concept, FoundEquilibrium, GridSearchConfig,
    GridSearchResult,
};
pub use verify::{is_monotone, verify_all, verify_mleq, verify_monotone_mleq, verify_smleq};

/// Conditional cooperation rates at or below this level count as zero.
pub const COOPERATION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCandidate {
    pub strategy: Strategy,
    pub partition: Partition,
    pub penalty: Penalty,
}

impl EquilibriumCandidate {
    pub fn new(strategy: Strategy, partition: Partition, penalty: Penalty) -> Result<Self> {
        if partition.len() != strategy.as_slice().len() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} contingencies but the strategy has {}",
                partition.len(),
                strategy.as_slice().len()
            )));
        }
        Ok(Self {
            strategy,
            partition,
            penalty,
        })
    }

    /// The zero-trust strategy with the one-cell partition.
    pub fn zero_trust(states: usize, penalty: Penalty) -> Self {
        Self {
            strategy: Strategy::zero_trust(states),
            partition: Partition::degenerate(2 * states),
            penalty,
        }
    }

    pub fn state_count(&self) -> usize {
        self.strategy.state_count()
    }

    pub fn distribution(&self) -> ErgodicDistribution {
        ergodic_distribution(&self.strategy)
    }

    pub fn profile(&self) -> BeliefProfile {
        representative_strategies(&self.partition, &self.strategy, &self.distribution())
    }

    /// Best-reply sets per state against the candidate's beliefs.
    pub fn replies(&self, states: &StateSpace, eps: f64) -> Vec<ReplySet> {
        let profile = self.profile();
        (0..self.state_count())
            .map(|s| {
                best_replies(
                    profile.belief(crate::Contingency::new(s, Action::Trust)),
                    profile.belief(crate::Contingency::new(s, Action::Defect)),
                    states.value(s),
                    eps,
                )
            })
            .collect()
    }

    pub fn cooperation_rates(&self) -> Vec<f64> {
        self.distribution().cooperation_rates()
    }

    pub fn overall_cooperation_rate(&self) -> f64 {
        overall_cooperation_rate(&self.distribution())
    }

    /// States whose long-run cooperation probability exceeds [`COOPERATION_FLOOR`] / n.
    pub fn cooperating_states(&self) -> Vec<usize> {
        let n = self.state_count() as f64;
        self.cooperation_rates()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p * n > COOPERATION_FLOOR)
            .map(|(s, _)| s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// The partition is not a global minimizer of the objective.
    NotMlOptimal,
    /// Merging a pair of cells would lower the objective.
    MergeInequality,
    /// An action played with positive probability is not a best reply.
    BestReply,
    /// A contingency sits farther from its cell's belief than from another's.
    Assignment,
    /// Beliefs are not weakly decreasing in the payoff state.
    NotMonotone,
    /// The partition does not minimize the objective among monotone partitions.
    NotMonotoneOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub condition: Condition,
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub holds: bool,
    pub failures: Vec<Failure>,
}

impl Assessment {
    fn from_failures(failures: Vec<Failure>) -> Self {
        Self {
            holds: failures.is_empty(),
            failures,
        }
    }
}

/// Outcome of the verifiers. `smleq` and `monotone` are only filled in by
/// the routines that check them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub mleq: Assessment,
    pub smleq: Option<Assessment>,
    pub monotone: Option<Assessment>,
}

impl Verdict {
    pub fn is_mleq(&self) -> bool {
        self.mleq.holds
    }

    pub fn is_smleq(&self) -> bool {
        self.smleq.as_ref().is_some_and(|a| a.holds)
    }

    pub fn is_monotone_mleq(&self) -> bool {
        self.monotone.as_ref().is_some_and(|a| a.holds)
    }
}
