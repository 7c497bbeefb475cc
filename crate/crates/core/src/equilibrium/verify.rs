use super::{Assessment, Condition, EquilibriumCandidate, Failure, Verdict};
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::partition::{
    all_partitions, check_merge_inequality, check_optimal_assignment, collect_minimizers, objective_raw,
    representative_strategies, BeliefProfile, MlOptimum,
};
use crate::trust_game::{Action, Contingency, StateSpace};

const PARALLEL_THRESHOLD: usize = 2048;

/// Whether beliefs are weakly decreasing in the payoff state for both
/// histories (states are stored in increasing order).
pub fn is_monotone(profile: &BeliefProfile, states: usize, tie: f64) -> bool {
    monotonicity_violations(profile, states, tie).is_empty()
}

fn monotonicity_violations(profile: &BeliefProfile, states: usize, tie: f64) -> Vec<Failure> {
    let mut out = Vec::new();
    for h in Action::BOTH {
        for lo in 0..states {
            for hi in lo + 1..states {
                let gap = profile.belief(Contingency::new(hi, h)) - profile.belief(Contingency::new(lo, h));
                if gap > tie {
                    out.push(Failure {
                        condition: Condition::NotMonotone,
                        location: format!("{} vs {}", Contingency::new(lo, h), Contingency::new(hi, h)),
                        magnitude: gap,
                    });
                }
            }
        }
    }
    out
}

struct Scan {
    unrestricted: MlOptimum,
    monotone: Option<MlOptimum>,
    own_value: f64,
}

/// One pass over every partition: objective values, and optionally the
/// monotone admissibility of each.
fn scan(cand: &EquilibriumCandidate, settings: &Settings, with_monotone: bool) -> Result<Scan> {
    let count = cand.partition.len();
    let partitions = all_partitions(count, &settings.limits)?;
    let p = cand.distribution();
    let sigma = cand.strategy.as_slice();
    let probs = p.as_slice();
    let c = cand.penalty.value();
    let tie = settings.tolerances.tie;
    let n = cand.state_count();
    let exec = if partitions.len() >= PARALLEL_THRESHOLD {
        settings.execution
    } else {
        Execution::Sequential
    };
    let evaluated: Vec<(f64, bool)> = exec.map(&partitions, |part| {
        let v = objective_raw(part, sigma, probs, c);
        let mono = with_monotone && is_monotone(&representative_strategies(part, &cand.strategy, &p), n, tie);
        (v, mono)
    });
    let all: Vec<Option<f64>> = evaluated.iter().map(|&(v, _)| Some(v)).collect();
    let unrestricted = collect_minimizers(&partitions, &all, tie);
    let monotone = with_monotone.then(|| {
        let filtered: Vec<Option<f64>> = evaluated.iter().map(|&(v, m)| m.then_some(v)).collect();
        collect_minimizers(&partitions, &filtered, tie)
    });
    Ok(Scan {
        unrestricted,
        monotone,
        own_value: objective_raw(&cand.partition, sigma, probs, c),
    })
}

fn best_reply_failures(cand: &EquilibriumCandidate, states: &StateSpace, eps: f64) -> Vec<Failure> {
    let profile = cand.profile();
    let mut out = Vec::new();
    for s in 0..cand.state_count() {
        let gap =
            profile.belief(Contingency::new(s, Action::Trust)) - profile.belief(Contingency::new(s, Action::Defect));
        let replies = crate::trust_game::best_replies(
            profile.belief(Contingency::new(s, Action::Trust)),
            profile.belief(Contingency::new(s, Action::Defect)),
            states.value(s),
            eps,
        );
        for h in Action::BOTH {
            let trust = cand.strategy.at(s, h);
            for (a, prob) in [(Action::Trust, trust), (Action::Defect, 1.0 - trust)] {
                if prob > 0.0 && !replies.contains(a) {
                    out.push(Failure {
                        condition: Condition::BestReply,
                        location: format!("{} plays {}", Contingency::new(s, h), a.bit()),
                        magnitude: gap - states.value(s),
                    });
                }
            }
        }
    }
    out
}

fn check_inputs(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings) -> Result<()> {
    settings.tolerances.validate()?;
    if states.len() != cand.state_count() {
        return Err(Error::InvalidStrategy(format!(
            "strategy covers {} states but the state space has {}",
            cand.state_count(),
            states.len()
        )));
    }
    settings.limits.check_count(cand.partition.len())
}

fn mleq_failures(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings, scan: &Scan) -> Vec<Failure> {
    let mut failures = Vec::new();
    if !scan.unrestricted.contains(&cand.partition) {
        failures.push(Failure {
            condition: Condition::NotMlOptimal,
            location: cand.partition.to_string(),
            magnitude: scan.own_value - scan.unrestricted.min_objective,
        });
        let p = cand.distribution();
        let merges = check_merge_inequality(
            &cand.partition,
            &cand.strategy,
            &p,
            cand.penalty,
            settings.tolerances.tie,
        );
        failures.extend(merges.failures().map(|m| Failure {
            condition: Condition::MergeInequality,
            location: format!("cells {}|{}", m.a, m.b),
            magnitude: m.margin,
        }));
    }
    failures.extend(best_reply_failures(cand, states, settings.tolerances.indifference));
    failures
}

fn strong_failures(cand: &EquilibriumCandidate, settings: &Settings) -> Vec<Failure> {
    let p = cand.distribution();
    let profile = representative_strategies(&cand.partition, &cand.strategy, &p);
    check_optimal_assignment(
        &cand.partition,
        &cand.strategy,
        &p,
        &profile,
        true,
        settings.tolerances.assignment,
    )
    .failures()
    .map(|e| Failure {
        condition: Condition::Assignment,
        location: format!("{} in cell {} (nearest {})", e.contingency, e.cell, e.best_cell),
        magnitude: e.own_distance - e.best_distance,
    })
    .collect()
}

fn monotone_failures(
    cand: &EquilibriumCandidate,
    states: &StateSpace,
    settings: &Settings,
    scan: &Scan,
) -> Vec<Failure> {
    let profile = cand.profile();
    let mut failures = monotonicity_violations(&profile, cand.state_count(), settings.tolerances.tie);
    let optimum = scan.monotone.as_ref().expect("monotone scan requested");
    if failures.is_empty() && !optimum.contains(&cand.partition) {
        failures.push(Failure {
            condition: Condition::NotMonotoneOptimal,
            location: cand.partition.to_string(),
            magnitude: scan.own_value - optimum.min_objective,
        });
    }
    failures.extend(best_reply_failures(cand, states, settings.tolerances.indifference));
    failures
}

fn run(
    cand: &EquilibriumCandidate,
    states: &StateSpace,
    settings: &Settings,
    strong: bool,
    monotone: bool,
) -> Result<Verdict> {
    check_inputs(cand, states, settings)?;
    let scan = scan(cand, settings, monotone)?;
    let mleq = mleq_failures(cand, states, settings, &scan);
    let smleq = strong.then(|| {
        let mut f = mleq.clone();
        f.extend(strong_failures(cand, settings));
        Assessment::from_failures(f)
    });
    let monotone = monotone.then(|| Assessment::from_failures(monotone_failures(cand, states, settings, &scan)));
    Ok(Verdict {
        mleq: Assessment::from_failures(mleq),
        smleq,
        monotone,
    })
}

/// ML-optimality (argmin membership, ties allowed) plus best replies at
/// every contingency where an action has positive probability.
pub fn verify_mleq(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings) -> Result<Verdict> {
    run(cand, states, settings, false, false)
}

/// [`verify_mleq`] plus optimal assignment of every contingency, null ones included.
pub fn verify_smleq(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings) -> Result<Verdict> {
    run(cand, states, settings, true, false)
}

/// Monotone beliefs, optimality among monotone partitions and best replies.
/// The unrestricted MLEQ flag is reported alongside.
pub fn verify_monotone_mleq(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings) -> Result<Verdict> {
    run(cand, states, settings, false, true)
}

pub fn verify_all(cand: &EquilibriumCandidate, states: &StateSpace, settings: &Settings) -> Result<Verdict> {
    run(cand, states, settings, true, true)
}
