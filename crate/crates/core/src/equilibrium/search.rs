//! Two-stage search: a uniform grid over strategies, then exact
//! indifference refinement of every survivor with its partition held fixed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{is_monotone, verify_all, EquilibriumCandidate, Verdict};
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::partition::{
    all_partitions, bell_number, collect_minimizers, ml_optimal_partitions, ml_optimal_partitions_where, objective_raw,
    representative_strategies, Partition, Penalty,
};
use crate::trust_game::{best_replies, ergodic_distribution, Action, Contingency, StateSpace, Strategy};

pub const MAX_RESOLUTION: usize = 50;
const REFINE_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;
const EXACT_EPS: f64 = 1e-9;
const DEDUP_SCALE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    /// Unrestricted ML optimality (MLEQ; strong flag reported).
    Standard,
    /// Optimality among monotone partitions.
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig {
    /// `G`: the grid is `{0, 1/G, …, 1}` per contingency.
    pub resolution: usize,
    /// Best-reply slack on the coarse grid; `None` means `1/G`.
    pub indifference_slack: Option<f64>,
    pub refine: bool,
    pub concept: Concept,
}

impl GridSearchConfig {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            indifference_slack: None,
            refine: true,
            concept: Concept::Standard,
        }
    }

    pub fn slack(&self) -> f64 {
        self.indifference_slack.unwrap_or(1.0 / self.resolution as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundEquilibrium {
    pub candidate: EquilibriumCandidate,
    pub verdict: Verdict,
    /// Grid point the equilibrium was refined from.
    pub seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateCandidate {
    pub candidate: EquilibriumCandidate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Exactly verified equilibria, in lexicographic strategy order.
    pub equilibria: Vec<FoundEquilibrium>,
    /// Grid survivors that could not be refined or verified.
    pub approximate: Vec<ApproximateCandidate>,
    pub grid_points: u128,
    pub survivors: usize,
}

impl GridSearchResult {
    pub fn strong(&self) -> impl Iterator<Item = &FoundEquilibrium> {
        self.equilibria.iter().filter(|e| e.verdict.is_smleq())
    }
}

struct Survivor {
    sigma: Vec<f64>,
    partition: Partition,
}

/// Scans `{0, 1/G, …, 1}^{2n}`, keeps every (strategy, optimal partition)
/// pair whose played actions are best replies within the slack, refines
/// and re-verifies at `1e-9`.
pub fn grid_search(
    states: &StateSpace,
    penalty: Penalty,
    config: &GridSearchConfig,
    settings: &Settings,
) -> Result<GridSearchResult> {
    let g = config.resolution;
    if g == 0 || g > MAX_RESOLUTION {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must lie in 1..={MAX_RESOLUTION}, got {g}"
        )));
    }
    let slack = config.slack();
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "indifference slack must be non-negative, got {slack}"
        )));
    }
    let dims = states.contingency_count();
    settings.limits.check_count(dims)?;
    let grid_points = ((g + 1) as u128).pow(dims as u32);
    let required = grid_points * bell_number(dims);
    if required > settings.limits.max_evaluations {
        return Err(Error::BudgetExceeded {
            required,
            budget: settings.limits.max_evaluations,
        });
    }
    let partitions = all_partitions(dims, &settings.limits)?;
    let n = states.len();
    let tie = settings.tolerances.tie;
    let c = penalty.value();

    let survivors: Vec<Survivor> = settings.execution.flat_map_range(grid_points as usize, |idx| {
        let sigma = decode(idx, g, dims);
        let strategy = Strategy::new(sigma.clone()).expect("grid values lie in [0,1]");
        let p = ergodic_distribution(&strategy);
        let values: Vec<Option<f64>> = partitions
            .iter()
            .map(|part| {
                let admissible = match config.concept {
                    Concept::Standard => true,
                    Concept::Monotone => is_monotone(&representative_strategies(part, &strategy, &p), n, tie),
                };
                admissible.then(|| objective_raw(part, &sigma, p.as_slice(), c))
            })
            .collect();
        collect_minimizers(&partitions, &values, tie)
            .partitions
            .into_iter()
            .filter(|part| replies_consistent(part, &strategy, states, slack))
            .map(|partition| Survivor {
                sigma: sigma.clone(),
                partition,
            })
            .collect()
    });

    let survivor_count = survivors.len();
    let outcomes: Vec<Vec<Outcome>> = settings
        .execution
        .map(&survivors, |s| process(s, states, penalty, config, settings));

    let mut found: BTreeMap<Key, FoundEquilibrium> = BTreeMap::new();
    let mut approx: BTreeMap<Key, ApproximateCandidate> = BTreeMap::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Outcome::Found(f) => {
                found.entry(key(&f.candidate)).or_insert(f);
            }
            Outcome::Approximate(a) => {
                approx.entry(key(&a.candidate)).or_insert(a);
            }
        }
    }
    Ok(GridSearchResult {
        equilibria: found.into_values().collect(),
        approximate: approx.into_values().collect(),
        grid_points,
        survivors: survivor_count,
    })
}

fn decode(mut idx: usize, g: usize, dims: usize) -> Vec<f64> {
    let mut out = vec![0.0; dims];
    for slot in out.iter_mut() {
        *slot = (idx % (g + 1)) as f64 / g as f64;
        idx /= g + 1;
    }
    out
}

/// Lexicographic strategy (rounded to 1e-9), then partition.
type Key = (Vec<i64>, Partition);

fn key(cand: &EquilibriumCandidate) -> Key {
    (
        cand.strategy
            .as_slice()
            .iter()
            .map(|x| (x * DEDUP_SCALE).round() as i64)
            .collect(),
        cand.partition,
    )
}

fn replies_consistent(partition: &Partition, strategy: &Strategy, states: &StateSpace, eps: f64) -> bool {
    let p = ergodic_distribution(strategy);
    let profile = representative_strategies(partition, strategy, &p);
    (0..states.len()).all(|s| {
        let replies = best_replies(
            profile.belief(Contingency::new(s, Action::Trust)),
            profile.belief(Contingency::new(s, Action::Defect)),
            states.value(s),
            eps,
        );
        Action::BOTH.iter().all(|&h| {
            let t = strategy.at(s, h);
            (t == 0.0 || replies.contains(Action::Trust)) && (t == 1.0 || replies.contains(Action::Defect))
        })
    })
}

enum Outcome {
    Found(FoundEquilibrium),
    Approximate(ApproximateCandidate),
}

fn process(
    survivor: &Survivor,
    states: &StateSpace,
    penalty: Penalty,
    config: &GridSearchConfig,
    settings: &Settings,
) -> Vec<Outcome> {
    let grid_candidate = EquilibriumCandidate {
        strategy: Strategy::new(survivor.sigma.clone()).expect("grid point"),
        partition: survivor.partition,
        penalty,
    };
    let refined = if config.refine {
        match refine_indifference(&survivor.sigma, &survivor.partition, states) {
            Ok(s) => s,
            Err(reason) => {
                return vec![Outcome::Approximate(ApproximateCandidate {
                    candidate: grid_candidate,
                    reason,
                })]
            }
        }
    } else {
        grid_candidate.strategy.clone()
    };

    let mut exact = *settings;
    exact.tolerances.indifference = exact.tolerances.indifference.max(EXACT_EPS);
    exact.execution = crate::exec::Execution::Sequential;

    // The refined strategy may shift which partitions tie; try the seed's
    // partition first, then every optimal one at the refined point.
    let mut partitions = vec![survivor.partition];
    let optimum = match config.concept {
        Concept::Standard => ml_optimal_partitions(&refined, penalty, &exact),
        Concept::Monotone => ml_optimal_partitions_where(&refined, penalty, &exact, |_, prof| {
            is_monotone(prof, states.len(), exact.tolerances.tie)
        }),
    };
    if let Ok(opt) = optimum {
        partitions.extend(opt.partitions.into_iter().filter(|p| *p != survivor.partition));
    }

    let mut out = Vec::new();
    let mut last_failure = None;
    for partition in partitions {
        let cand = EquilibriumCandidate {
            strategy: refined.clone(),
            partition,
            penalty,
        };
        match verify_all(&cand, states, &exact) {
            Ok(verdict) => {
                let accepted = match config.concept {
                    Concept::Standard => verdict.is_mleq(),
                    Concept::Monotone => verdict.is_monotone_mleq(),
                };
                if accepted {
                    out.push(Outcome::Found(FoundEquilibrium {
                        candidate: cand,
                        verdict,
                        seed: survivor.sigma.clone(),
                    }));
                } else if partition == survivor.partition {
                    let failures = match config.concept {
                        Concept::Standard => &verdict.mleq.failures,
                        Concept::Monotone => &verdict.monotone.as_ref().expect("requested").failures,
                    };
                    last_failure = Some(format!(
                        "failed exact verification: {}",
                        failures
                            .iter()
                            .map(|f| format!("{:?} at {}", f.condition, f.location))
                            .collect::<Vec<_>>()
                            .join("; ")
                    ));
                }
            }
            Err(e) => last_failure = Some(e.to_string()),
        }
    }
    if out.is_empty() {
        out.push(Outcome::Approximate(ApproximateCandidate {
            candidate: EquilibriumCandidate {
                strategy: refined,
                partition: survivor.partition,
                penalty,
            },
            reason: last_failure.unwrap_or_else(|| "failed exact verification".into()),
        }));
    }
    out
}

/// States where both actions are played somewhere.
fn mixing_states(sigma: &[f64]) -> Vec<usize> {
    (0..sigma.len() / 2)
        .filter(|&s| {
            let (d, t) = (sigma[2 * s], sigma[2 * s + 1]);
            (d > 0.0 || t > 0.0) && (d < 1.0 || t < 1.0)
        })
        .collect()
}

fn residuals(sigma: &[f64], partition: &Partition, states: &StateSpace, mixing: &[usize]) -> Vec<f64> {
    let strategy = Strategy::new(sigma.to_vec()).expect("clamped strategy");
    let p = ergodic_distribution(&strategy);
    let profile = representative_strategies(partition, &strategy, &p);
    mixing
        .iter()
        .map(|&s| {
            profile.belief(Contingency::new(s, Action::Trust))
                - profile.belief(Contingency::new(s, Action::Defect))
                - states.value(s)
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `σ̂(θ,1) − σ̂(θ,0) = θ` for every state that plays both actions,
/// moving only the strictly interior components of `sigma`. Minimum-norm
/// Gauss–Newton with a finite-difference Jacobian; results are clamped to
/// `[0,1]`.
pub fn refine_indifference(
    sigma: &[f64],
    partition: &Partition,
    states: &StateSpace,
) -> std::result::Result<Strategy, String> {
    let mixing = mixing_states(sigma);
    let free: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > 0.0 && sigma[i] < 1.0).collect();
    let mut x = sigma.to_vec();
    let mut f = residuals(&x, partition, states, &mixing);
    if max_abs(&f) <= RESIDUAL_TOL {
        return Ok(Strategy::new(x).expect("valid"));
    }
    if free.is_empty() {
        return Err(format!(
            "no interior components to adjust (residual {:.3e})",
            max_abs(&f)
        ));
    }
    for _ in 0..REFINE_ITERATIONS {
        let jac = DMatrix::from_fn(mixing.len(), free.len(), |r, col| {
            let i = free[col];
            let h = 1e-7;
            let (lo, hi) = ((x[i] - h).max(0.0), (x[i] + h).min(1.0));
            let mut a = x.clone();
            a[i] = lo;
            let mut b = x.clone();
            b[i] = hi;
            (residuals(&b, partition, states, &mixing)[r] - residuals(&a, partition, states, &mixing)[r]) / (hi - lo)
        });
        let pinv = match jac.svd(true, true).pseudo_inverse(1e-12) {
            Ok(p) => p,
            Err(e) => return Err(format!("pseudo-inverse failed: {e}")),
        };
        let step = pinv * DVector::from_column_slice(&f);
        let current = max_abs(&f);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (x[i] - scale * step[k]).clamp(0.0, 1.0);
            }
            let ft = residuals(&trial, partition, states, &mixing);
            if max_abs(&ft) < current {
                x = trial;
                f = ft;
                improved = true;
                break;
            }
            scale /= 2.0;
        }
        if max_abs(&f) <= RESIDUAL_TOL {
            return Ok(Strategy::new(x).expect("valid"));
        }
        if !improved {
            break;
        }
    }
    Err(format!(
        "indifference refinement stalled at residual {:.3e}",
        max_abs(&f)
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Limits;

    fn search(thetas: &[f64], c: f64, g: usize) -> GridSearchResult {
        let states = StateSpace::from_f64(thetas).unwrap();
        grid_search(
            &states,
            Penalty::new(c).unwrap(),
            &GridSearchConfig::new(g),
            &Settings::default(),
        )
        .unwrap()
    }

    fn trusting(r: &GridSearchResult) -> Vec<&FoundEquilibrium> {
        r.equilibria
            .iter()
            .filter(|e| e.candidate.overall_cooperation_rate() > 0.0)
            .collect()
    }

    #[test]
    fn recovers_single_state_example() {
        let r = search(&[0.6], 0.09, 20);
        let t = trusting(&r);
        assert_eq!(t.len(), 1, "{:?}", t);
        let s = t[0].candidate.strategy.as_slice();
        assert!((s[0] - 0.2).abs() < 1e-9 && (s[1] - 0.8).abs() < 1e-9);
        assert!(r
            .equilibria
            .iter()
            .any(|e| e.candidate.strategy.as_slice() == [0.0, 0.0]));
    }

    #[test]
    fn only_zero_trust_above_threshold() {
        let r = search(&[0.6], 0.3, 20);
        assert!(trusting(&r).is_empty());
        assert!(!r.equilibria.is_empty());
    }

    #[test]
    fn strong_equilibria_are_tit_for_tat() {
        let r = search(&[0.7, 0.9], 0.15, 10);
        for e in r.strong() {
            let prof = e.candidate.profile();
            for s in 0..2 {
                let st = &e.candidate.strategy;
                assert!(st.at(s, Action::Trust) >= st.at(s, Action::Defect));
                assert!(
                    prof.belief(Contingency::new(s, Action::Trust)) >= prof.belief(Contingency::new(s, Action::Defect))
                );
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let states = StateSpace::from_f64(&[0.7, 0.9]).unwrap();
        let cfg = GridSearchConfig::new(6);
        let c = Penalty::new(0.15).unwrap();
        let a = grid_search(&states, c, &cfg, &Settings::default()).unwrap();
        let b = grid_search(&states, c, &cfg, &Settings::default().sequential()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_and_resolution_limits() {
        let states = StateSpace::from_f64(&[0.2, 0.4, 0.6]).unwrap();
        let c = Penalty::new(0.1).unwrap();
        let err = grid_search(&states, c, &GridSearchConfig::new(50), &Settings::default()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        let err = grid_search(&states, c, &GridSearchConfig::new(51), &Settings::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        let tight = Settings {
            limits: Limits {
                max_contingencies: 4,
                ..Limits::default()
            },
            ..Settings::default()
        };
        let err = grid_search(&states, c, &GridSearchConfig::new(2), &tight).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn refinement_lands_on_manifold() {
        let states = StateSpace::from_f64(&[0.6]).unwrap();
        let s = refine_indifference(&[0.25, 0.8], &Partition::finest(2), &states).unwrap();
        assert!((s.as_slice()[1] - s.as_slice()[0] - 0.6).abs() <= 1e-12);
        // No interior component: nothing to move.
        assert!(refine_indifference(&[0.0, 1.0], &Partition::finest(2), &states).is_err());
    }

    #[test]
    fn monotone_concept_runs() {
        let states = StateSpace::from_f64(&[0.6, 0.99]).unwrap();
        let mut cfg = GridSearchConfig::new(8);
        cfg.concept = Concept::Monotone;
        let r = grid_search(&states, Penalty::new(0.1).unwrap(), &cfg, &Settings::default()).unwrap();
        assert!(r.equilibria.iter().all(|e| e.verdict.is_monotone_mleq()));
        assert!(r
            .equilibria
            .iter()
            .any(|e| e.candidate.overall_cooperation_rate() == 0.0));
    }
}
