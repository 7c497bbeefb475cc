//! Numerical counterparts of the cooperation bounds: the auxiliary max–min
//! problem, closed-form sufficient conditions with falsification searches,
//! the full-cooperation census, genericity of the state set and a probe
//! for the monotone-belief threshold.

mod census;
mod genericity;
mod maxmin;
mod predicates;
mod probe;

pub use census::{full_cooperation_census, Census, PartnerCheck, FULL_COOPERATION_TOL};
pub use genericity::{genericity_check, Genericity};
pub use maxmin::{
    inner_maxmin, outer_ceiling, outer_maxmin, outer_objective, InnerSolution, MaxMinInstance, OuterSolution,
    AGREEMENT_TOL, MAX_CELLS,
};
pub use predicates::{
    cost_condition, prop2_predicate, prop3_predicate, range_condition, BoundQuery, BoundVerdict, Falsification,
};
pub use probe::{monotone_threshold_probe, ProbeEntry, ProbeReport};
