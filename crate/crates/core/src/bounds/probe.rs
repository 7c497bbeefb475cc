//! Empirical search for the top-state threshold above which monotone
//! equilibria cannot sustain cooperation in every state.

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::equilibrium::{grid_search, Concept, GridSearchConfig};
use crate::error::{Error, Result};
use crate::partition::Penalty;
use crate::trust_game::StateSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub max_theta: f64,
    /// Monotone equilibria cooperating in every state.
    pub found: usize,
    /// Highest overall cooperation rate among them.
    pub best_rate: Option<f64>,
    /// Survivors that could not be certified either way.
    pub unresolved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
    pub largest_found: Option<f64>,
    pub smallest_empty: Option<f64>,
}

/// Replaces the largest state with each value of `tops` (each must exceed
/// the remaining states and lie below 1) and runs a monotone grid search.
pub fn monotone_threshold_probe(
    states: &StateSpace,
    penalty: Penalty,
    tops: &[f64],
    resolution: usize,
    settings: &Settings,
) -> Result<ProbeReport> {
    let n = states.len();
    let base = &states.values()[..n - 1];
    let mut config = GridSearchConfig::new(resolution);
    config.concept = Concept::Monotone;
    let mut entries = Vec::with_capacity(tops.len());
    for &top in tops {
        let mut values = base.to_vec();
        values.push(top);
        let probe_states =
            StateSpace::from_f64(&values).map_err(|e| Error::InvalidParameter(format!("probe value {top}: {e}")))?;
        let result = grid_search(&probe_states, penalty, &config, settings)?;
        let all: Vec<f64> = result
            .equilibria
            .iter()
            .filter(|e| e.candidate.cooperating_states().len() == n)
            .map(|e| e.candidate.overall_cooperation_rate())
            .collect();
        entries.push(ProbeEntry {
            max_theta: top,
            found: all.len(),
            best_rate: all.iter().cloned().reduce(f64::max),
            unresolved: result.approximate.len(),
        });
    }
    let largest_found = entries
        .iter()
        .filter(|e| e.found > 0)
        .map(|e| e.max_theta)
        .reduce(f64::max);
    let smallest_empty = entries
        .iter()
        .filter(|e| e.found == 0)
        .map(|e| e.max_theta)
        .reduce(f64::min);
    Ok(ProbeReport {
        entries,
        largest_found,
        smallest_empty,
    })
}
