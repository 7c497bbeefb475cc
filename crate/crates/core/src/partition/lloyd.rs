//! Lloyd-style alternating refinement of a partition: recompute beliefs,
//! then move each positive-mass contingency to the nearest belief.

use serde::{Deserialize, Serialize};

use super::objective::{mspe, representative_strategies};
use super::Partition;
use crate::trust_game::{ErgodicDistribution, Strategy};

const MAX_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydOutcome {
    pub partition: Partition,
    /// Cells that lost every member during reassignment.
    pub dropped_cells: usize,
    pub rounds: usize,
    /// MSPE of the initial partition followed by the value after each round.
    pub mspe_trace: Vec<f64>,
}

/// Runs to a fixed point. Null contingencies never move; ties keep the
/// current cell, so a partition that is already optimally assigned is
/// returned unchanged.
pub fn lloyd_iteration(strategy: &Strategy, p: &ErgodicDistribution, init: &Partition) -> LloydOutcome {
    let sigma = strategy.as_slice();
    let probs = p.as_slice();
    let mut current = *init;
    let mut dropped_cells = 0;
    let mut mspe_trace = vec![mspe(&current, strategy, p)];
    let mut rounds = 0;
    while rounds < MAX_ROUNDS {
        let profile = representative_strategies(&current, strategy, p);
        let mut labels = current.labels();
        let mut moved = false;
        for (i, label) in labels.iter_mut().enumerate() {
            if probs[i] <= 0.0 {
                continue;
            }
            let own = (profile.rep(*label) - sigma[i]).abs();
            let (best, best_dist) = profile
                .reps()
                .iter()
                .enumerate()
                .map(|(k, r)| (k, (r - sigma[i]).abs()))
                .fold((*label, own), |acc, cand| if cand.1 < acc.1 { cand } else { acc });
            // Require a strict improvement beyond rounding noise.
            if best != *label && best_dist < own - 1e-15 {
                *label = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        rounds += 1;
        let next = Partition::from_labels(&labels).expect("same size");
        dropped_cells += current.cell_count() - next.cell_count();
        current = next;
        mspe_trace.push(mspe(&current, strategy, p));
    }
    LloydOutcome {
        partition: current,
        dropped_cells,
        rounds,
        mspe_trace,
    }
}
