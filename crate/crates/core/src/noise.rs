//! Finite-sample reading of the complexity cost for a single state.
//!
//! Each history's cooperation probability is observed with mean-zero noise
//! of variance `v/p(h)`. The fine partition then carries an expected MSPE of
//! `2v` and the pooled one `p(0)p(1)(σ(1) − σ(0))² + v`, so the fine
//! partition wins exactly when the merge inequality holds with `c = v`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::trust_game::{ergodic_distribution, kernel_is_ergodic, Action, Strategy};

const BATCH: usize = 10_000;
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyObservationModel {
    strategy: Strategy,
    variance: f64,
    /// `p(0), p(1)`.
    masses: [f64; 2],
}

impl NoisyObservationModel {
    /// `variance = 0` is accepted as the noiseless limit.
    pub fn new(strategy: Strategy, variance: f64) -> Result<Self> {
        if strategy.state_count() != 1 {
            return Err(Error::UndefinedModel(format!(
                "noise model covers one state, got {}",
                strategy.state_count()
            )));
        }
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and non-negative, got {variance}"
            )));
        }
        let (d, t) = (strategy.at(0, Action::Defect), strategy.at(0, Action::Trust));
        if !kernel_is_ergodic(d, t) {
            return Err(Error::UndefinedModel(
                "transition kernel has no unique invariant law".into(),
            ));
        }
        let p = ergodic_distribution(&strategy);
        let masses = [p.at(0, Action::Defect), p.at(0, Action::Trust)];
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(Error::UndefinedModel(format!(
                "history masses {masses:?} must both be positive"
            )));
        }
        Ok(Self {
            strategy,
            variance,
            masses,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn masses(&self) -> [f64; 2] {
        self.masses
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    fn sigma(&self) -> [f64; 2] {
        [self.strategy.at(0, Action::Defect), self.strategy.at(0, Action::Trust)]
    }

    /// `p(0)p(1)(σ(1) − σ(0))²`, the between-history spread.
    pub fn spread(&self) -> f64 {
        let [s0, s1] = self.sigma();
        self.masses[0] * self.masses[1] * (s1 - s0) * (s1 - s0)
    }
}

pub fn expected_mspe_fine(model: &NoisyObservationModel) -> f64 {
    2.0 * model.variance
}

pub fn expected_mspe_coarse(model: &NoisyObservationModel) -> f64 {
    model.spread() + model.variance
}

/// `p(0)p(1)(σ(1) − σ(0))² ≥ v`, with `tie` slack for the binding case.
pub fn fine_partition_preferred(model: &NoisyObservationModel, tie: f64) -> bool {
    model.spread() >= model.variance - tie
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionChoice {
    Fine,
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Draws Gaussian observations and averages the realized `p`-weighted
/// squared error. Batch `b` uses stream `b` of a ChaCha8 generator seeded
/// with `seed`; batch sums combine in order, so the estimate does not
/// depend on the execution mode.
pub fn monte_carlo_mspe(
    model: &NoisyObservationModel,
    choice: PartitionChoice,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<MonteCarloEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let sigma = model.sigma();
    let p = model.masses;
    let sd = [(model.variance / p[0]).sqrt(), (model.variance / p[1]).sqrt()];
    let batches = samples.div_ceil(BATCH);
    let sums = execution.map_range(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let count = BATCH.min(samples - b * BATCH);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..count {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let x = [sigma[0] + sd[0] * z0, sigma[1] + sd[1] * z1];
            let err = match choice {
                PartitionChoice::Fine => p[0] * (x[0] - sigma[0]).powi(2) + p[1] * (x[1] - sigma[1]).powi(2),
                PartitionChoice::Coarse => {
                    let pooled = p[0] * x[0] + p[1] * x[1];
                    p[0] * (pooled - sigma[0]).powi(2) + p[1] * (pooled - sigma[1]).powi(2)
                }
            };
            sum += err;
            sq += err * err;
        }
        (sum, sq)
    });
    let (sum, sq) = sums.iter().fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}
