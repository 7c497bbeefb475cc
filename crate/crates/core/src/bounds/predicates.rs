//! Sufficient conditions ruling out cooperation in many states, with
//! optional falsification searches.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::equilibrium::{grid_search, FoundEquilibrium, GridSearchConfig};
use crate::error::{Error, Result};
use crate::partition::Penalty;
use crate::rational::rational_from_f64;
use crate::trust_game::StateSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub penalty: Penalty,
    /// Number of cooperating states asked about.
    pub cooperating: usize,
    pub states: StateSpace,
}

impl BoundQuery {
    pub fn new(penalty: Penalty, cooperating: usize, states: StateSpace) -> Result<Self> {
        if cooperating == 0 || cooperating > states.len() {
            return Err(Error::InvalidParameter(format!(
                "cooperating state count must lie in 1..={}, got {cooperating}",
                states.len()
            )));
        }
        Ok(Self {
            penalty,
            cooperating,
            states,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Falsification {
    pub grid_points: u128,
    pub strong_equilibria: usize,
    /// Strong equilibria cooperating in at least the queried number of states.
    pub counterexamples: Vec<FoundEquilibrium>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    /// Whether the sufficient condition holds.
    pub predicate: bool,
    /// Present when a search was requested and the condition holds.
    pub search: Option<Falsification>,
}

impl BoundVerdict {
    /// False only if a search ran and found a counterexample.
    pub fn consistent(&self) -> bool {
        self.search.as_ref().is_none_or(|s| s.counterexamples.is_empty())
    }
}

/// `2cm³ > 1`, evaluated exactly.
pub fn cost_condition(penalty: Penalty, cooperating: usize) -> Result<bool> {
    let c = rational_from_f64(penalty.value())?;
    let m = BigRational::from_integer((cooperating as i64).into());
    Ok(BigRational::from_integer(2.into()) * c * &m * &m * &m > BigRational::from_integer(1.into()))
}

/// `max Θ < √(2c/m)`, i.e. `m·max(Θ)² < 2c`, evaluated exactly.
pub fn range_condition(penalty: Penalty, cooperating: usize, states: &StateSpace) -> Result<bool> {
    let c = rational_from_f64(penalty.value())?;
    let m = BigRational::from_integer((cooperating as i64).into());
    let top = states.exact().last().expect("non-empty").clone();
    Ok(m * &top * &top < BigRational::from_integer(2.into()) * c)
}

fn falsify(query: &BoundQuery, config: &GridSearchConfig, settings: &Settings) -> Result<Falsification> {
    let result = grid_search(&query.states, query.penalty, config, settings)?;
    let strong: Vec<&FoundEquilibrium> = result.strong().collect();
    Ok(Falsification {
        grid_points: result.grid_points,
        strong_equilibria: strong.len(),
        counterexamples: strong
            .into_iter()
            .filter(|e| e.candidate.cooperating_states().len() >= query.cooperating)
            .cloned()
            .collect(),
    })
}

fn with_search(
    predicate: bool,
    query: &BoundQuery,
    search: Option<&GridSearchConfig>,
    settings: &Settings,
) -> Result<BoundVerdict> {
    let search = match search {
        Some(cfg) if predicate => Some(falsify(query, cfg, settings)?),
        _ => None,
    };
    Ok(BoundVerdict { predicate, search })
}

/// Large cost relative to the number of cooperating states.
pub fn prop2_predicate(
    query: &BoundQuery,
    search: Option<&GridSearchConfig>,
    settings: &Settings,
) -> Result<BoundVerdict> {
    with_search(
        cost_condition(query.penalty, query.cooperating)?,
        query,
        search,
        settings,
    )
}

/// All payoff states small relative to the cost.
pub fn prop3_predicate(
    query: &BoundQuery,
    search: Option<&GridSearchConfig>,
    settings: &Settings,
) -> Result<BoundVerdict> {
    with_search(
        range_condition(query.penalty, query.cooperating, &query.states)?,
        query,
        search,
        settings,
    )
}
