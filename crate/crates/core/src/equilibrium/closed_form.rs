//! Closed-form and one-dimensional constructions for one and two states.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{verify_smleq, EquilibriumCandidate, Verdict};
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::partition::{Partition, Penalty};
use crate::rational::rational_from_f64;
use crate::roots::brent;
use crate::trust_game::{ergodic_distribution, Action, StateSpace, Strategy};

/// The full-cooperation Nash profile: `σ(θ,1) = 1`, `σ(θ,0) = 1 − θ`.
pub fn nash_benchmark(states: &StateSpace) -> Strategy {
    let pairs: Vec<(f64, f64)> = states.values().iter().map(|&t| (1.0 - t, 1.0)).collect();
    Strategy::from_pairs(&pairs).expect("benchmark probabilities lie in [0,1]")
}

/// Maximally cooperative trusting equilibrium with a single state, or
/// `None` when `c > θ²/4` (decided in exact arithmetic).
///
/// The merge inequality for the finest partition reads
/// `(σ₁ − θ)(1 − σ₁)·θ²/(1 − θ)² ≥ c` once `σ₀ = σ₁ − θ`; the larger root
/// of its binding version is taken.
pub fn solve_n1(theta: f64, penalty: Penalty) -> Result<Option<EquilibriumCandidate>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidStates(format!(
            "state {theta} is not strictly between 0 and 1"
        )));
    }
    let t = rational_from_f64(theta)?;
    let c = rational_from_f64(penalty.value())?;
    let four = BigRational::from_integer(4.into());
    if c * &four > &t * &t {
        return Ok(None);
    }
    let disc = (1.0 - 4.0 * penalty.value() / (theta * theta)).max(0.0).sqrt();
    let trust = ((1.0 + theta) + (1.0 - theta) * disc) / 2.0;
    let defect = (1.0 - theta) * (1.0 + disc) / 2.0;
    let strategy = Strategy::from_pairs(&[(defect.clamp(0.0, 1.0), trust.min(1.0))])?;
    Ok(Some(EquilibriumCandidate::new(
        strategy,
        Partition::finest(2),
        penalty,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N2Solution {
    pub candidate: EquilibriumCandidate,
    pub verdict: Verdict,
    /// `p(θ,1)` in the cooperating state.
    pub cooperation_rate: f64,
    /// `θ²/(1+θ²)`, the ceiling on that rate.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N2StateOutcome {
    pub state: usize,
    pub theta: f64,
    /// `θ² ≥ √c/(1−√c)`; when false no construction is attempted.
    pub threshold_met: bool,
    /// Roots of the binding condition that failed strong verification.
    pub rejected_roots: usize,
    pub solutions: Vec<N2Solution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N2Outcome {
    /// Both states exceed 1/2 and `c ∈ (1/8, 1/4)`.
    pub in_regime: bool,
    pub warnings: Vec<String>,
    pub per_state: Vec<N2StateOutcome>,
}

impl N2Outcome {
    pub fn candidates(&self) -> impl Iterator<Item = &EquilibriumCandidate> {
        self.per_state
            .iter()
            .flat_map(|s| s.solutions.iter().map(|x| &x.candidate))
    }
}

const SCAN_POINTS: usize = 4000;
const ROOT_TOL: f64 = 1e-15;

/// Two-cell construction with cooperation confined to one state.
///
/// For cooperating state `θ` (the other state `θ′` never trusts), cells are
/// `{(θ′,0),(θ′,1),(θ,0)}` and `{(θ,1)}`. With `u = 1 − σ(θ,1)`,
/// indifference pins `σ(θ,0) = 2u(1−θ−u)/(2u−(1−θ))`, and `u` solves the
/// condition that moving `(θ,0)` next to `(θ,1)` leaves the MSPE unchanged.
/// Each root is kept only if the full strong verification accepts it.
pub fn solve_n2(states: &StateSpace, penalty: Penalty, settings: &Settings) -> Result<N2Outcome> {
    if states.len() != 2 {
        return Err(Error::InvalidStates(format!(
            "expected two states, got {}",
            states.len()
        )));
    }
    let c = penalty.value();
    let half = BigRational::new(1.into(), 2.into());
    let exact_c = rational_from_f64(c)?;
    let mut warnings = Vec::new();
    if !states.exact().iter().all(|t| t > &half) {
        warnings.push("states should both exceed 1/2".to_string());
    }
    let eighth = BigRational::new(1.into(), 8.into());
    let quarter = BigRational::new(1.into(), 4.into());
    if !(exact_c > eighth && exact_c < quarter) {
        warnings.push(format!("complexity cost {c} lies outside (1/8, 1/4)"));
    }
    let in_regime = warnings.is_empty();
    let root_c = c.sqrt();
    let threshold = if root_c < 1.0 {
        root_c / (1.0 - root_c)
    } else {
        f64::INFINITY
    };

    let mut per_state = Vec::with_capacity(2);
    for coop in 0..2 {
        let theta = states.value(coop);
        let threshold_met = theta * theta >= threshold;
        let mut outcome = N2StateOutcome {
            state: coop,
            theta,
            threshold_met,
            rejected_roots: 0,
            solutions: Vec::new(),
        };
        if threshold_met {
            for u in binding_roots(theta)? {
                let strategy = build_strategy(coop, theta, u);
                let other = 1 - coop;
                let partition =
                    Partition::from_cells(4, &[vec![2 * other, 2 * other + 1, 2 * coop], vec![2 * coop + 1]])?;
                let candidate = EquilibriumCandidate::new(strategy, partition, penalty)?;
                let verdict = verify_smleq(&candidate, states, settings)?;
                if verdict.is_smleq() {
                    let p = ergodic_distribution(&candidate.strategy);
                    outcome.solutions.push(N2Solution {
                        cooperation_rate: p.at(coop, Action::Trust),
                        bound: theta * theta / (1.0 + theta * theta),
                        candidate,
                        verdict,
                    });
                } else {
                    outcome.rejected_roots += 1;
                }
            }
        }
        per_state.push(outcome);
    }
    Ok(N2Outcome {
        in_regime,
        warnings,
        per_state,
    })
}

fn defect_prob(theta: f64, u: f64) -> f64 {
    2.0 * u * (1.0 - theta - u) / (2.0 * u - (1.0 - theta))
}

fn build_strategy(coop: usize, theta: f64, u: f64) -> Strategy {
    let mut probs = vec![0.0; 4];
    probs[2 * coop] = defect_prob(theta, u).clamp(0.0, 1.0);
    probs[2 * coop + 1] = (1.0 - u).clamp(0.0, 1.0);
    Strategy::new(probs).expect("clamped probabilities")
}

/// MSPE of keeping `(θ,0)` with the null-trust state minus that of pairing
/// it with `(θ,1)`, with `n = 2` masses.
fn binding_gap(theta: f64, u: f64) -> f64 {
    let a = defect_prob(theta, u);
    let b = 1.0 - u;
    let d = a + 1.0 - b;
    let p0 = (1.0 - b) / (2.0 * d);
    let p1 = a / (2.0 * d);
    0.5 * p0 / (0.5 + p0) * a * a - p0 * p1 / (p0 + p1) * (b - a) * (b - a)
}

fn binding_roots(theta: f64) -> Result<Vec<f64>> {
    let lo = (1.0 - theta) / 2.0;
    let hi = 1.0 - theta;
    let grid: Vec<(f64, f64)> = (1..SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / SCAN_POINTS as f64)
        .filter(|&u| {
            let a = defect_prob(theta, u);
            a.is_finite() && (0.0..=1.0).contains(&a)
        })
        .map(|u| (u, binding_gap(theta, u)))
        .collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let ((u1, g1), (u2, g2)) = (w[0], w[1]);
        if g1 == 0.0 {
            roots.push(u1);
        } else if g1 * g2 < 0.0 {
            roots.push(brent(|u| binding_gap(theta, u), u1, u2, ROOT_TOL, 200)?);
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::verify_mleq;

    #[test]
    fn benchmark_profiles() {
        let states = StateSpace::from_f64(&[0.6]).unwrap();
        let s = nash_benchmark(&states);
        assert_eq!(s.as_slice(), &[0.4, 1.0]);
        assert_eq!(ergodic_distribution(&s).at(0, Action::Trust), 1.0);
        let s = nash_benchmark(&StateSpace::from_f64(&[0.99]).unwrap());
        assert!((s.at(0, Action::Defect) - 0.01).abs() < 1e-15);
        let states = StateSpace::from_f64(&[0.2, 0.5, 0.8]).unwrap();
        let s = nash_benchmark(&states);
        let p = ergodic_distribution(&s);
        for (i, &t) in states.values().iter().enumerate() {
            assert!((s.at(i, Action::Trust) - s.at(i, Action::Defect) - t).abs() < 1e-15);
            assert!((p.at(i, Action::Trust) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((s.at(0, Action::Defect) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_state_example() {
        let cand = solve_n1(0.6, Penalty::new(0.09).unwrap()).unwrap().unwrap();
        assert!((cand.strategy.at(0, Action::Trust) - 0.8).abs() < 1e-12);
        assert!((cand.strategy.at(0, Action::Defect) - 0.2).abs() < 1e-12);
        assert!((cand.distribution().at(0, Action::Trust) - 0.5).abs() < 1e-12);
        let states = StateSpace::from_f64(&[0.6]).unwrap();
        assert!(verify_mleq(&cand, &states, &Settings::default()).unwrap().is_mleq());
        assert!(solve_n1(0.6, Penalty::new(0.1).unwrap()).unwrap().is_none());
    }

    /// Brute-force scan of the binding condition on a fine grid.
    fn grid_largest_root(theta: f64, c: f64, step: f64) -> f64 {
        let f = |s: f64| (s - theta) * (1.0 - s) * theta * theta / ((1.0 - theta) * (1.0 - theta)) - c;
        let mut best = f64::NAN;
        let mut s = theta;
        while s <= 1.0 {
            if f(s) >= 0.0 {
                best = s;
            }
            s += step;
        }
        best
    }

    #[test]
    fn larger_root_matches_grid_scan() {
        let cand = solve_n1(0.8, Penalty::new(0.04).unwrap()).unwrap().unwrap();
        let s1 = cand.strategy.at(0, Action::Trust);
        assert!((s1 - grid_largest_root(0.8, 0.04, 1e-6)).abs() < 2e-6, "{s1}");
        let states = StateSpace::from_f64(&[0.8]).unwrap();
        assert!(verify_mleq(&cand, &states, &Settings::default()).unwrap().is_mleq());
    }

    #[test]
    fn binding_threshold_is_exact() {
        // 0.3² / 4 = 0.0225 exactly in decimal.
        assert!(solve_n1(0.3, Penalty::new(0.0225).unwrap()).unwrap().is_some());
        assert!(solve_n1(0.3, Penalty::new(0.022500000000000003).unwrap())
            .unwrap()
            .is_none());
    }

    #[test]
    fn no_trusting_mleq_beyond_the_output() {
        // Grid of trusting strategies σ₁ − σ₀ = θ at resolution 1e-4: none
        // with a higher cooperation rate is an MLEQ under the finest or
        // degenerate partition.
        let theta = 0.7;
        let penalty = Penalty::new(0.05).unwrap();
        let cand = solve_n1(theta, penalty).unwrap().unwrap();
        let best = cand.distribution().at(0, Action::Trust);
        let states = StateSpace::from_f64(&[theta]).unwrap();
        let settings = Settings::default();
        let mut k = 0;
        while theta + k as f64 * 1e-4 <= 1.0 {
            let s1 = theta + k as f64 * 1e-4;
            k += 1;
            let s = Strategy::from_pairs(&[(s1 - theta, s1)]).unwrap();
            if ergodic_distribution(&s).at(0, Action::Trust) <= best + 1e-9 {
                continue;
            }
            for part in [Partition::finest(2), Partition::degenerate(2)] {
                let c = EquilibriumCandidate::new(s.clone(), part, penalty).unwrap();
                assert!(!verify_mleq(&c, &states, &settings).unwrap().is_mleq(), "σ₁ = {s1}");
            }
        }
    }

    #[test]
    fn two_state_construction_attains_bound() {
        let states = StateSpace::from_f64(&[0.75, 0.9]).unwrap();
        let out = solve_n2(&states, Penalty::new(0.15).unwrap(), &Settings::default()).unwrap();
        assert!(out.in_regime);
        // 0.75² falls below √0.15/(1−√0.15).
        let low = &out.per_state[0];
        assert!(!low.threshold_met);
        assert!(low.solutions.is_empty());
        let high = &out.per_state[1];
        assert_eq!(high.solutions.len(), 1);
        let sol = &high.solutions[0];
        assert!(
            (sol.cooperation_rate - 0.81 / 1.81).abs() < 1e-9,
            "{}",
            sol.cooperation_rate
        );
        assert!(sol.verdict.is_smleq());
    }

    #[test]
    fn unsustainable_state_is_skipped() {
        let states = StateSpace::from_f64(&[0.75, 0.9]).unwrap();
        let out = solve_n2(&states, Penalty::new(0.24).unwrap(), &Settings::default()).unwrap();
        assert!(!out.per_state[0].threshold_met);
        assert!(out.per_state[0].solutions.is_empty());
    }

    #[test]
    fn regime_warnings() {
        let states = StateSpace::from_f64(&[0.4, 0.9]).unwrap();
        let out = solve_n2(&states, Penalty::new(0.3).unwrap(), &Settings::default()).unwrap();
        assert!(!out.in_regime);
        assert_eq!(out.warnings.len(), 2);
        assert!(solve_n2(
            &StateSpace::from_f64(&[0.9]).unwrap(),
            Penalty::new(0.2).unwrap(),
            &Settings::default()
        )
        .is_err());
    }
}
