use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limit imposed by the packed partition encoding (4 bits per label).
pub const HARD_MAX_CONTINGENCIES: usize = 16;

/// Numerical tolerances shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Slack on `σ̂(θ,1) - σ̂(θ,0) = θ` when a state mixes.
    pub indifference: f64,
    /// Slack in `|σ̂(own) - σ| ≤ min |σ̂ - σ|`.
    pub assignment: f64,
    /// Objective values within this distance of the minimum count as ties.
    /// Also the slack on the merge inequality.
    pub tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            indifference: 1e-9,
            assignment: 1e-9,
            tie: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("indifference", self.indifference),
            ("assignment", self.assignment),
            ("tie", self.tie),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance {name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Size limits for the exhaustive oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest contingency count (`2n`) the partition enumeration accepts.
    pub max_contingencies: usize,
    /// Largest number of objective evaluations a grid search may request.
    pub max_evaluations: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_contingencies: 12,
            max_evaluations: 250_000_000,
        }
    }
}

impl Limits {
    pub fn check_count(&self, count: usize) -> Result<()> {
        let ceiling = self.max_contingencies.min(HARD_MAX_CONTINGENCIES);
        if count > ceiling {
            Err(Error::TooLarge { count, ceiling })
        } else {
            Ok(())
        }
    }
}

/// Tolerances, limits and execution mode bundled for the search routines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub limits: Limits,
    pub execution: crate::exec::Execution,
}

impl Settings {
    pub fn sequential(mut self) -> Self {
        self.execution = crate::exec::Execution::Sequential;
        self
    }
}
