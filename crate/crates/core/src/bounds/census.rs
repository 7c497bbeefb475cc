//! Full-cooperation census of a strong equilibrium.
//!
//! A state with `p(θ,1) = 1/n` has `σ(θ,1) = 1` and a null `(θ,0)`, which
//! strong assignment must park in a cell with some other live contingency.
//! That partner state's cooperation rate is then capped away from one.

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumCandidate;
use crate::trust_game::{Action, Contingency, StateSpace};

pub const FULL_COOPERATION_TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerCheck {
    /// The full-cooperation state.
    pub state: usize,
    /// A live contingency sharing a cell with `(state, 0)`.
    pub partner: Contingency,
    /// Conditional cooperation rate `n·p(θ′,1)` of the partner state.
    pub rate: f64,
    /// Cap on that rate; `None` when no cap applies (partner rate zero).
    pub bound: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub full_cooperation: Vec<usize>,
    pub fraction: f64,
    /// At most half of the states fully cooperate.
    pub fraction_holds: bool,
    pub partners: Vec<PartnerCheck>,
    /// Situations the bounds rule out, e.g. a null `(θ,0)` with no live cellmate.
    pub anomalies: Vec<String>,
    pub holds: bool,
}

/// Expects a candidate that already passed strong verification; a failed
/// census therefore signals a counterexample rather than bad input.
pub fn full_cooperation_census(cand: &EquilibriumCandidate, states: &StateSpace) -> Census {
    let n = cand.state_count();
    let nf = n as f64;
    let p = cand.distribution();
    let rates: Vec<f64> = p.cooperation_rates().iter().map(|x| x * nf).collect();
    let full: Vec<usize> = (0..n)
        .filter(|&s| (rates[s] - 1.0).abs() <= FULL_COOPERATION_TOL)
        .collect();
    let fraction = full.len() as f64 / nf;
    let mut partners = Vec::new();
    let mut anomalies = Vec::new();
    for &s in &full {
        let theta = states.value(s);
        let home = cand.partition.cell_of(Contingency::new(s, Action::Defect).index());
        let live: Vec<Contingency> = cand
            .partition
            .members(home)
            .map(Contingency::from_index)
            .filter(|c| c.state != s && p.get(*c) > 0.0)
            .collect();
        if live.is_empty() {
            anomalies.push(format!("{} has no live cellmate", Contingency::new(s, Action::Defect)));
        }
        for partner in live {
            let rate = rates[partner.state];
            let other = states.value(partner.state);
            let bound = match partner.history {
                Action::Trust => Some(1.0 - theta / 2.0),
                Action::Defect if rate <= 0.0 => None,
                Action::Defect if other < theta => Some((2.0 - theta + other) / 2.0),
                Action::Defect => {
                    anomalies.push(format!(
                        "{partner} shares a cell with {} while its state is higher and cooperates",
                        Contingency::new(s, Action::Defect)
                    ));
                    None
                }
            };
            partners.push(PartnerCheck {
                state: s,
                partner,
                rate,
                bound,
                holds: bound.is_none_or(|b| rate <= b + BOUND_TOL),
            });
        }
    }
    let fraction_holds = 2 * full.len() <= n;
    let holds = fraction_holds && anomalies.is_empty() && partners.iter().all(|c| c.holds);
    Census {
        full_cooperation: full,
        fraction,
        fraction_holds,
        partners,
        anomalies,
        holds,
    }
}
