//! TOML scenario files.
//!
//! ```toml
//! theta = ["0.6"]            # strings keep values exact; "3/5" works too
//! c = 0.09
//! seed = 7
//! partition = [["0,0"], ["0,1"]]
//!
//! [sigma]
//! "0,0" = 0.2
//! "0,1" = 0.8
//! ```
//!
//! Optional `[tolerances]`, `[bounds]` and `[noise]` tables tune the
//! corresponding subcommands.

use std::collections::BTreeMap;

use mleq_core::rational::{parse_rational, to_f64};
use mleq_core::{Contingency, Partition, Penalty, StateSpace, Strategy, Tolerances};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    fn to_f64(&self, key: &str) -> Result<f64, String> {
        match self {
            Number::Int(i) => Ok(*i as f64),
            Number::Float(x) => Ok(*x),
            Number::Text(s) => parse_rational(s).map(|r| to_f64(&r)).map_err(|e| format!("{key}: {e}")),
        }
    }

    fn to_text(&self) -> String {
        match self {
            Number::Int(i) => i.to_string(),
            // Shortest round-trip spelling, read back exactly.
            Number::Float(x) => format!("{x:e}"),
            Number::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    theta: Vec<Number>,
    c: Number,
    seed: Option<u64>,
    sigma: Option<BTreeMap<String, f64>>,
    partition: Option<Vec<Vec<String>>>,
    tolerances: Option<Tolerances>,
    bounds: Option<BoundsSection>,
    noise: Option<NoiseSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Number of cooperating states asked about (defaults to all).
    pub cooperating: Option<usize>,
    /// Cell counts for the max–min table, inclusive range `[lo, hi]`.
    pub cells: Option<[usize; 2]>,
    /// Longest signed combination in the genericity scan (defaults to n).
    pub genericity_length: Option<usize>,
    pub genericity_tolerance: Option<f64>,
    /// Run grid searches trying to falsify the sufficient conditions.
    #[serde(default)]
    pub falsify: bool,
    /// Candidate top-state values for the monotone probe.
    pub probe: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Defaults to `c`.
    pub variance: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub states: StateSpace,
    pub penalty: Penalty,
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub partition: Option<Partition>,
    pub tolerances: Tolerances,
    pub bounds: BoundsSection,
    pub noise: NoiseSection,
}

pub fn parse(text: &str) -> Result<Scenario, String> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let theta_text: Vec<String> = raw.theta.iter().map(Number::to_text).collect();
    let states = StateSpace::parse(&theta_text).map_err(|e| format!("theta: {e}"))?;
    let penalty = Penalty::new(raw.c.to_f64("c")?).map_err(|e| format!("c: {e}"))?;
    let count = states.contingency_count();

    let strategy = raw
        .sigma
        .map(|map| {
            let mut probs = vec![None; count];
            for (key, value) in &map {
                let idx = token_index(key, states.len()).map_err(|e| format!("sigma.\"{key}\": {e}"))?;
                probs[idx] = Some(*value);
            }
            let probs = probs
                .into_iter()
                .enumerate()
                .map(|(i, p)| p.ok_or_else(|| format!("sigma: missing entry \"{}\"", label(i))))
                .collect::<Result<Vec<_>, _>>()?;
            Strategy::new(probs).map_err(|e| format!("sigma: {e}"))
        })
        .transpose()?;

    let partition = raw
        .partition
        .map(|cells| {
            let cells = cells
                .iter()
                .map(|cell| {
                    cell.iter()
                        .map(|t| token_index(t, states.len()).map_err(|e| format!("partition \"{t}\": {e}")))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            Partition::from_cells(count, &cells).map_err(|e| format!("partition: {e}"))
        })
        .transpose()?;

    let tolerances = raw.tolerances.unwrap_or_default();
    tolerances.validate().map_err(|e| format!("tolerances: {e}"))?;
    Ok(Scenario {
        states,
        penalty,
        seed: raw.seed,
        strategy,
        partition,
        tolerances,
        bounds: raw.bounds.unwrap_or_default(),
        noise: raw.noise.unwrap_or_default(),
    })
}

pub fn label(index: usize) -> String {
    let c = Contingency::from_index(index);
    format!("{},{}", c.state, c.history.bit())
}

fn token_index(token: &str, states: usize) -> Result<usize, String> {
    let (s, h) = token
        .split_once(',')
        .ok_or_else(|| "expected \"state,history\"".to_string())?;
    let s: usize = s.trim().parse().map_err(|_| format!("bad state index {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad history {h:?}"))?;
    if s >= states {
        return Err(format!("state index {s} out of range (n = {states})"));
    }
    if h > 1 {
        return Err(format!("history must be 0 or 1, got {h}"));
    }
    Ok(2 * s + h)
}
