//! Runs one subcommand against a parsed scenario and builds the report body.

use mleq_core::bounds::{
    full_cooperation_census, genericity_check, monotone_threshold_probe, outer_ceiling, outer_maxmin, prop2_predicate,
    prop3_predicate, BoundQuery, BoundVerdict,
};
use mleq_core::equilibrium::{grid_search, solve_n1, solve_n2, verify_all, EquilibriumCandidate, GridSearchConfig};
use mleq_core::noise::{
    expected_mspe_coarse, expected_mspe_fine, fine_partition_preferred, monte_carlo_mspe, NoisyObservationModel,
    PartitionChoice,
};
use mleq_core::{Error, Settings, StateSpace, Strategy};

use crate::report::{
    contingency_rows, ApproximateRow, Body, BoundsBody, CandidateReport, Command, ConditionReport, FalsificationReport,
    GenericityReport, MaxMinRow, Mode, MonteCarloRow, NoiseBody, NoiseCheck, RunOptions, SearchBody, VerifyBody,
};
use crate::scenario::{self, Scenario};

pub const DEFAULT_GRID: usize = 10;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
const DEFAULT_CELLS: [usize; 2] = [2, 5];
const NOISE_TIE: f64 = 1e-12;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or out-of-range input.
    Input(String),
    /// Enumeration ceiling or search budget exceeded.
    Size(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Size(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Size(m) | CliError::Other(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::TooLarge { .. } | Error::BudgetExceeded { .. } => CliError::Size(msg),
            Error::ZeroComponent { .. } | Error::NoConvergence(_) => CliError::Other(msg),
            _ => CliError::Input(msg),
        }
    }
}

pub fn execute(command: Command, options: &RunOptions, text: &str) -> Result<Body, CliError> {
    let scenario = scenario::parse(text).map_err(CliError::Input)?;
    let settings = settings(&scenario, command, options)?;
    match command {
        Command::Verify => verify(&scenario, &settings),
        Command::Search => search(&scenario, options, &settings),
        Command::Bounds => bounds(&scenario, options, &settings),
        Command::Noise => noise(&scenario, options),
    }
}

fn settings(scenario: &Scenario, command: Command, options: &RunOptions) -> Result<Settings, CliError> {
    let mut settings = Settings {
        tolerances: scenario.tolerances,
        ..Settings::default()
    };
    if let Some(eps) = options.tolerance {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(CliError::Input(format!(
                "--tolerance must be finite and non-negative, got {eps}"
            )));
        }
        // For grid searches the flag is the best-reply slack instead.
        if command != Command::Search {
            settings.tolerances.indifference = eps;
        }
    }
    if let Some(max) = options.max_bell {
        if !(1..=mleq_core::config::HARD_MAX_CONTINGENCIES).contains(&max) {
            return Err(CliError::Input(format!(
                "--max-bell must lie in 1..={}, got {max}",
                mleq_core::config::HARD_MAX_CONTINGENCIES
            )));
        }
        settings.limits.max_contingencies = max;
    }
    Ok(settings)
}

fn candidate(
    source: &str,
    cand: &EquilibriumCandidate,
    states: &StateSpace,
    settings: &Settings,
) -> Result<CandidateReport, CliError> {
    let verdict = verify_all(cand, states, settings)?;
    Ok(CandidateReport::new(source, cand, &verdict, states))
}

fn verify(scenario: &Scenario, settings: &Settings) -> Result<Body, CliError> {
    let (Some(strategy), Some(partition)) = (&scenario.strategy, &scenario.partition) else {
        return Err(CliError::Input(
            "verify needs both `sigma` and `partition` in the scenario".into(),
        ));
    };
    let cand = EquilibriumCandidate::new(strategy.clone(), *partition, scenario.penalty)?;
    let report = candidate("scenario", &cand, &scenario.states, settings)?;
    let census = (report.smleq == Some(true)).then(|| full_cooperation_census(&cand, &scenario.states));
    Ok(Body::Verify(VerifyBody {
        candidate: report,
        census,
    }))
}

fn search(scenario: &Scenario, options: &RunOptions, settings: &Settings) -> Result<Body, CliError> {
    let states = &scenario.states;
    let mode = options.mode.unwrap_or(Mode::Grid);
    let mut found: Vec<(CandidateReport, EquilibriumCandidate)> = Vec::new();
    let mut approximate = Vec::new();
    let mut warnings = Vec::new();
    let mut grid_points = None;
    let zero_trust = EquilibriumCandidate::zero_trust(states.len(), scenario.penalty);
    match mode {
        Mode::Grid => {
            let mut config = GridSearchConfig::new(options.grid.unwrap_or(DEFAULT_GRID));
            config.indifference_slack = options.tolerance;
            let result = grid_search(states, scenario.penalty, &config, settings)?;
            grid_points = Some(result.grid_points);
            for e in result.equilibria {
                found.push((
                    CandidateReport::new("grid", &e.candidate, &e.verdict, states),
                    e.candidate,
                ));
            }
            approximate = result
                .approximate
                .iter()
                .map(|a| ApproximateRow {
                    contingencies: contingency_rows(&a.candidate),
                    partition: a.candidate.partition.to_tokens(),
                    reason: a.reason.clone(),
                })
                .collect();
        }
        Mode::N1 => {
            if states.len() != 1 {
                return Err(CliError::Input(format!(
                    "--mode n1 needs one state, got {}",
                    states.len()
                )));
            }
            if let Some(cand) = solve_n1(states.value(0), scenario.penalty)? {
                found.push((candidate("closed form", &cand, states, settings)?, cand));
            } else {
                warnings.push("no trusting equilibrium: c exceeds theta^2/4".into());
            }
            found.push((candidate("zero trust", &zero_trust, states, settings)?, zero_trust));
        }
        Mode::N2 => {
            if states.len() != 2 {
                return Err(CliError::Input(format!(
                    "--mode n2 needs two states, got {}",
                    states.len()
                )));
            }
            let outcome = solve_n2(states, scenario.penalty, settings)?;
            warnings = outcome.warnings.clone();
            for s in &outcome.per_state {
                if !s.threshold_met {
                    warnings.push(format!(
                        "state {} (theta = {}) cannot sustain trust at this cost",
                        s.state, s.theta
                    ));
                }
            }
            for cand in outcome.candidates() {
                found.push((candidate("closed form", cand, states, settings)?, cand.clone()));
            }
            found.push((candidate("zero trust", &zero_trust, states, settings)?, zero_trust));
        }
    }
    // Stable: ties keep the solver's (lexicographic) order.
    found.sort_by(|a, b| b.0.overall_cooperation.total_cmp(&a.0.overall_cooperation));
    let census = found
        .iter()
        .filter(|(r, _)| r.smleq == Some(true))
        .map(|(_, c)| full_cooperation_census(c, states))
        .collect();
    Ok(Body::Search(SearchBody {
        mode,
        warnings,
        grid_points,
        equilibria: found.into_iter().map(|(r, _)| r).collect(),
        approximate,
        census,
    }))
}

fn condition(statement: String, verdict: BoundVerdict, grid: usize, states: &StateSpace) -> ConditionReport {
    ConditionReport {
        statement,
        holds: verdict.predicate,
        search: verdict.search.map(|s| FalsificationReport {
            grid,
            grid_points: s.grid_points,
            strong_equilibria: s.strong_equilibria,
            counterexamples: s
                .counterexamples
                .iter()
                .map(|e| CandidateReport::new("grid", &e.candidate, &e.verdict, states))
                .collect(),
        }),
    }
}

fn noise_check(strategy: &Strategy, variance: f64) -> Result<NoiseCheck, Error> {
    let model = NoisyObservationModel::new(strategy.clone(), variance)?;
    let (fine, coarse) = (expected_mspe_fine(&model), expected_mspe_coarse(&model));
    let verdict = if (fine - coarse).abs() <= NOISE_TIE {
        "fine/coarse indifferent"
    } else if fine_partition_preferred(&model, NOISE_TIE) {
        "fine preferred"
    } else {
        "coarse preferred"
    };
    Ok(NoiseCheck {
        variance,
        fine,
        coarse,
        verdict: verdict.into(),
    })
}

fn bounds(scenario: &Scenario, options: &RunOptions, settings: &Settings) -> Result<Body, CliError> {
    let states = &scenario.states;
    let n = states.len();
    let section = &scenario.bounds;
    let m = section.cooperating.unwrap_or(n);
    let grid = options.grid.unwrap_or(DEFAULT_GRID);
    let query = BoundQuery::new(scenario.penalty, m, states.clone())?;
    let config = section.falsify.then(|| GridSearchConfig::new(grid));

    let c = scenario.penalty.value();
    let top = states.value(n - 1);
    let mf = m as f64;
    let cost = condition(
        format!("2*c*m^3 = {} > 1 (m = {m})", 2.0 * c * mf.powi(3)),
        prop2_predicate(&query, config.as_ref(), settings)?,
        grid,
        states,
    );
    let range = condition(
        format!("m*max(theta)^2 = {} < 2c = {} (m = {m})", mf * top * top, 2.0 * c),
        prop3_predicate(&query, config.as_ref(), settings)?,
        grid,
        states,
    );

    let [lo, hi] = section.cells.unwrap_or(DEFAULT_CELLS);
    if lo > hi {
        return Err(CliError::Input(format!("bounds.cells: empty range [{lo}, {hi}]")));
    }
    let maxmin = (lo..=hi)
        .map(|k| {
            let sol = outer_maxmin(k, settings.execution)?;
            let ceiling = outer_ceiling(k);
            Ok(MaxMinRow {
                cells: k,
                value: sol.value,
                ceiling,
                strictly_below: sol.value < ceiling,
                p: sol.p,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let max_length = section.genericity_length.unwrap_or(n);
    let tolerance = section.genericity_tolerance.unwrap_or(0.0);
    let genericity = GenericityReport {
        max_length,
        tolerance,
        result: genericity_check(states, max_length, tolerance)?,
    };

    let noise = match (&scenario.strategy, n) {
        (Some(strategy), 1) => noise_check(strategy, scenario.noise.variance.unwrap_or(c)).ok(),
        _ => None,
    };
    let probe = match &section.probe {
        Some(tops) => Some(monotone_threshold_probe(
            states,
            scenario.penalty,
            tops,
            grid,
            settings,
        )?),
        None => None,
    };
    Ok(Body::Bounds(BoundsBody {
        cooperating: m,
        cost_condition: cost,
        range_condition: range,
        maxmin,
        genericity,
        noise,
        probe,
    }))
}

fn noise(scenario: &Scenario, options: &RunOptions) -> Result<Body, CliError> {
    let Some(strategy) = scenario.strategy.as_ref().filter(|_| scenario.states.len() == 1) else {
        return Err(CliError::Input("noise needs a single state and its `sigma`".into()));
    };
    let variance = scenario.noise.variance.unwrap_or(scenario.penalty.value());
    let samples = scenario.noise.samples.unwrap_or(DEFAULT_SAMPLES);
    let seed = options.seed.or(scenario.seed).unwrap_or(0);
    let check = noise_check(strategy, variance)?;
    let model = NoisyObservationModel::new(strategy.clone(), variance)?;
    let monte_carlo = [
        (PartitionChoice::Fine, "fine", check.fine),
        (PartitionChoice::Coarse, "coarse", check.coarse),
    ]
    .into_iter()
    .map(|(choice, name, exact)| {
        let est = monte_carlo_mspe(&model, choice, samples, seed, Default::default())?;
        Ok(MonteCarloRow {
            partition: name.into(),
            closed_form: exact,
            mean: est.mean,
            std_error: est.std_error,
            samples: est.samples,
            z_score: if est.std_error > 0.0 {
                (est.mean - exact) / est.std_error
            } else {
                0.0
            },
        })
    })
    .collect::<Result<Vec<_>, Error>>()?;
    Ok(Body::Noise(NoiseBody {
        check,
        masses: model.masses(),
        seed,
        monte_carlo,
    }))
}
