//! The dynamic trust game: payoff states, contingencies, population
//! strategies, best replies and the per-state two-state Markov chain.
//!
//! Contingencies are laid out densely: state `i` with observed history `h`
//! lives at index `2 * i + h`.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, rational_from_f64, to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Defect = 0,
    Trust = 1,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Defect, Action::Trust];

    pub fn bit(self) -> usize {
        self as usize
    }

    pub fn value(self) -> f64 {
        self as usize as f64
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Action::Defect
        } else {
            Action::Trust
        }
    }
}

/// Ordered payoff states `θ_1 < … < θ_n` in `(0, 1)`, each drawn with
/// probability `1/n`. Values are kept exactly and as doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    exact: Vec<BigRational>,
    values: Vec<f64>,
}

impl StateSpace {
    pub fn new(exact: Vec<BigRational>) -> Result<Self> {
        if exact.is_empty() {
            return Err(Error::InvalidStates("at least one state is required".into()));
        }
        for (i, theta) in exact.iter().enumerate() {
            if theta <= &BigRational::zero() || theta >= &BigRational::one() {
                return Err(Error::InvalidStates(format!(
                    "state {} = {} is not strictly between 0 and 1",
                    i,
                    format_rational(theta)
                )));
            }
        }
        for (i, pair) in exact.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidStates(format!(
                    "states must be strictly increasing (positions {} and {})",
                    i,
                    i + 1
                )));
            }
        }
        let values = exact.iter().map(to_f64).collect();
        Ok(Self { exact, values })
    }

    /// Builds from doubles through their shortest decimal spelling.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        let exact = values
            .iter()
            .map(|&v| rational_from_f64(v))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidStates(e.to_string()))?;
        Self::new(exact)
    }

    pub fn parse<S: AsRef<str>>(texts: &[S]) -> Result<Self> {
        let exact = texts
            .iter()
            .map(|t| parse_rational(t.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidStates(e.to_string()))?;
        Self::new(exact)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contingency_count(&self) -> usize {
        2 * self.len()
    }

    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn labels(&self) -> Vec<String> {
        self.exact.iter().map(format_rational).collect()
    }

    pub fn contingencies(&self) -> impl Iterator<Item = Contingency> + '_ {
        (0..self.contingency_count()).map(Contingency::from_index)
    }
}

/// A payoff state together with the observed previous action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contingency {
    pub state: usize,
    pub history: Action,
}

impl Contingency {
    pub fn new(state: usize, history: Action) -> Self {
        Self { state, history }
    }

    pub fn index(self) -> usize {
        2 * self.state + self.history.bit()
    }

    pub fn from_index(index: usize) -> Self {
        Self {
            state: index / 2,
            history: Action::from_bit(index % 2),
        }
    }
}

impl std::fmt::Display for Contingency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.state, self.history.bit())
    }
}

/// Cooperation probability `σ(θ,h)` for every contingency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    probs: Vec<f64>,
}

impl Strategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || !probs.len().is_multiple_of(2) {
            return Err(Error::InvalidStrategy(format!(
                "expected an even, positive number of contingencies, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidStrategy(format!(
                "probability {p} at contingency {} lies outside [0,1]",
                Contingency::from_index(i)
            )));
        }
        Ok(Self { probs })
    }

    /// One `(σ(θ,0), σ(θ,1))` pair per state.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().flat_map(|&(d, t)| [d, t]).collect())
    }

    pub fn zero_trust(states: usize) -> Self {
        Self {
            probs: vec![0.0; 2 * states],
        }
    }

    pub fn state_count(&self) -> usize {
        self.probs.len() / 2
    }

    pub fn get(&self, c: Contingency) -> f64 {
        self.probs[c.index()]
    }

    pub fn at(&self, state: usize, history: Action) -> f64 {
        self.probs[2 * state + history.bit()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Whether action `a` is played with positive probability at `state`.
    pub fn plays(&self, state: usize, a: Action) -> bool {
        Action::BOTH.iter().any(|&h| match a {
            Action::Trust => self.at(state, h) > 0.0,
            Action::Defect => self.at(state, h) < 1.0,
        })
    }
}

/// Long-run probability of each contingency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicDistribution {
    probs: Vec<f64>,
}

impl ErgodicDistribution {
    /// Wraps explicit masses; each state's pair must be non-negative and sum to `1/n`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || !probs.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "distribution needs an even, positive length".into(),
            ));
        }
        let n = (probs.len() / 2) as f64;
        for (s, pair) in probs.chunks(2).enumerate() {
            if pair.iter().any(|&x| x.is_nan() || x < 0.0) || (pair[0] + pair[1] - 1.0 / n).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "state {s} masses {:?} must be non-negative and sum to 1/n",
                    pair
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn get(&self, c: Contingency) -> f64 {
        self.probs[c.index()]
    }

    pub fn at(&self, state: usize, history: Action) -> f64 {
        self.probs[2 * state + history.bit()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn state_count(&self) -> usize {
        self.probs.len() / 2
    }

    /// `p(θ,1)` per state.
    pub fn cooperation_rates(&self) -> Vec<f64> {
        (0..self.state_count()).map(|s| self.at(s, Action::Trust)).collect()
    }
}

/// `u_t(a_t, a_{t+1}) = a_{t+1} - θ·a_t`.
pub fn payoff(action: Action, next_action: Action, theta: f64) -> f64 {
    next_action.value() - theta * action.value()
}

/// The per-state chain fails to have a unique invariant law only when
/// both histories are absorbing (`σ(θ,0) = 0` and `σ(θ,1) = 1`).
pub fn kernel_is_ergodic(defect_prob: f64, trust_prob: f64) -> bool {
    defect_prob > 0.0 || trust_prob < 1.0
}

/// Invariant distribution of the per-state Markov chains, scaled by `1/n`.
///
/// Both masses are computed from the closed form directly, so a null
/// history gets an exact zero. The ill-defined case falls back to `1/(2n)`
/// on each history.
pub fn ergodic_distribution(strategy: &Strategy) -> ErgodicDistribution {
    let n = strategy.state_count();
    let nf = n as f64;
    let mut probs = vec![0.0; 2 * n];
    for s in 0..n {
        let d = strategy.at(s, Action::Defect);
        let t = strategy.at(s, Action::Trust);
        let (p0, p1) = if kernel_is_ergodic(d, t) {
            let denom = nf * (d + (1.0 - t));
            ((1.0 - t) / denom, d / denom)
        } else {
            (0.5 / nf, 0.5 / nf)
        };
        probs[2 * s] = p0;
        probs[2 * s + 1] = p1;
    }
    ErgodicDistribution { probs }
}

/// Best-reply correspondence against beliefs `σ̂(θ,1)` and `σ̂(θ,0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplySet {
    Defect,
    Trust,
    Either,
}

impl ReplySet {
    pub fn contains(self, a: Action) -> bool {
        matches!(
            (self, a),
            (ReplySet::Either, _) | (ReplySet::Defect, Action::Defect) | (ReplySet::Trust, Action::Trust)
        )
    }
}

pub fn best_replies(belief_after_trust: f64, belief_after_defect: f64, theta: f64, eps: f64) -> ReplySet {
    let gap = belief_after_trust - belief_after_defect;
    if gap > theta + eps {
        ReplySet::Trust
    } else if gap < theta - eps {
        ReplySet::Defect
    } else {
        ReplySet::Either
    }
}

/// Samples `a_1, …, a_T` in one payoff state, with `a_{t+1} ~ Bernoulli(σ(θ, a_t))`
/// started from the dummy player's action `initial`.
pub fn simulate_trajectory(
    strategy: &Strategy,
    state: usize,
    initial: Action,
    horizon: usize,
    seed: u64,
) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev = initial;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let p = strategy.at(state, prev);
        prev = if rng.random_bool(p) {
            Action::Trust
        } else {
            Action::Defect
        };
        out.push(prev);
    }
    out
}

pub fn overall_cooperation_rate(p: &ErgodicDistribution) -> f64 {
    p.cooperation_rates().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};

    #[test]
    fn payoff_examples() {
        assert!((payoff(Action::Trust, Action::Trust, 0.6) - 0.4).abs() < 1e-15);
        assert_eq!(payoff(Action::Defect, Action::Defect, 0.6), 0.0);
        assert!((payoff(Action::Trust, Action::Defect, 0.3) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::from_f64(&[0.3, 0.5]).is_ok());
        assert!(StateSpace::from_f64(&[1.2]).is_err());
        assert!(StateSpace::from_f64(&[0.0]).is_err());
        assert!(StateSpace::from_f64(&[0.5, 0.5]).is_err());
        assert!(StateSpace::from_f64(&[0.5, 0.3]).is_err());
        assert!(StateSpace::from_f64(&[]).is_err());
        let s = StateSpace::parse(&["1/3", "0.5"]).unwrap();
        assert_eq!(s.labels(), vec!["1/3", "0.5"]);
    }

    #[test]
    fn strategy_validation() {
        assert!(Strategy::new(vec![0.1]).is_err());
        assert!(Strategy::new(vec![0.1, 1.1]).is_err());
        assert!(Strategy::new(vec![f64::NAN, 0.1]).is_err());
    }

    #[test]
    fn ergodic_examples() {
        let s = Strategy::from_pairs(&[(0.2, 0.8)]).unwrap();
        let p = ergodic_distribution(&s);
        assert!((p.at(0, Action::Trust) - 0.5).abs() < 1e-12);

        let s = Strategy::from_pairs(&[(0.0, 1.0)]).unwrap();
        assert_eq!(ergodic_distribution(&s).at(0, Action::Trust), 0.5);

        let s = Strategy::from_pairs(&[(0.0, 0.0), (0.3, 0.9)]).unwrap();
        let p = ergodic_distribution(&s);
        assert_eq!(p.at(0, Action::Trust), 0.0);
        assert_eq!(p.at(0, Action::Defect), 0.5);
    }

    #[test]
    fn full_cooperation_leaves_defect_history_null() {
        let s = Strategy::from_pairs(&[(0.3, 1.0), (0.7, 1.0), (0.9, 1.0)]).unwrap();
        let p = ergodic_distribution(&s);
        for st in 0..3 {
            assert_eq!(p.at(st, Action::Defect), 0.0);
            assert!((p.at(st, Action::Trust) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn best_reply_examples() {
        assert_eq!(best_replies(0.8, 0.2, 0.6, 1e-9), ReplySet::Either);
        assert_eq!(best_replies(0.0, 0.0, 0.6, 1e-9), ReplySet::Defect);
        assert_eq!(best_replies(0.9, 0.1, 0.5, 1e-9), ReplySet::Trust);
    }

    #[test]
    fn trajectory_examples() {
        let zero = Strategy::zero_trust(1);
        assert_eq!(
            simulate_trajectory(&zero, 0, Action::Trust, 5, 1),
            vec![Action::Defect; 5]
        );
        let one = Strategy::from_pairs(&[(1.0, 1.0)]).unwrap();
        assert_eq!(
            simulate_trajectory(&one, 0, Action::Defect, 3, 1),
            vec![Action::Trust; 3]
        );
    }

    #[test]
    fn trajectory_frequency_matches_invariant_law() {
        let s = Strategy::from_pairs(&[(0.2, 0.8)]).unwrap();
        let horizon = 1_000_000;
        let path = simulate_trajectory(&s, 0, Action::Defect, horizon, 2024);
        let freq = path.iter().filter(|a| **a == Action::Trust).count() as f64 / horizon as f64;
        assert!((freq - 0.5).abs() < 0.005, "frequency {freq}");
        // Autocorrelated chain: asymptotic variance π(1-π)(1+λ)/(1-λ) with λ = σ(1) - σ(0).
        let lambda = 0.6;
        let se = (0.25 * (1.0 + lambda) / (1.0 - lambda) / horizon as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "frequency {freq}, se {se}");
    }

    #[test]
    fn trajectory_is_deterministic_given_seed() {
        let s = Strategy::from_pairs(&[(0.4, 0.7)]).unwrap();
        assert_eq!(
            simulate_trajectory(&s, 0, Action::Trust, 200, 9),
            simulate_trajectory(&s, 0, Action::Trust, 200, 9)
        );
    }

    #[test]
    fn cooperation_rate_sums_states() {
        assert_eq!(
            overall_cooperation_rate(&ergodic_distribution(&Strategy::zero_trust(4))),
            0.0
        );
        let p = ErgodicDistribution {
            probs: vec![0.2, 0.3, 0.4, 0.1],
        };
        assert!((overall_cooperation_rate(&p) - 0.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ergodic_mass_and_stationarity(pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..6)) {
            let s = Strategy::from_pairs(&pairs).unwrap();
            let p = ergodic_distribution(&s);
            let n = pairs.len() as f64;
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for (i, &(d, t)) in pairs.iter().enumerate() {
                let p0 = p.at(i, Action::Defect);
                let p1 = p.at(i, Action::Trust);
                prop_assert!(p0 >= 0.0 && p1 >= 0.0);
                prop_assert!((p0 + p1 - 1.0 / n).abs() < 1e-12);
                if kernel_is_ergodic(d, t) {
                    prop_assert!((p1 - (p0 * d + p1 * t)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn reply_set_monotone_in_gap(b1 in 0.0f64..=1.0, b0 in 0.0f64..=1.0, bump in 0.0f64..=1.0, theta in 0.01f64..0.99) {
            let before = best_replies(b1, b0, theta, 1e-9);
            let after = best_replies(b1 + bump, b0, theta, 1e-9);
            if before.contains(Action::Trust) {
                prop_assert!(after.contains(Action::Trust));
            }
        }
    }
}
