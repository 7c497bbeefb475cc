//! Report model: JSON is the machine-readable form, `render_text` the
//! human-readable one and `write_csv` the tabular extract.

use std::fmt::Write as _;
use std::path::Path;

use mleq_core::bounds::{Census, Genericity, ProbeReport};
use mleq_core::equilibrium::{EquilibriumCandidate, Failure, Verdict};
use mleq_core::StateSpace;
use serde::{Deserialize, Serialize};

use crate::scenario::label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Search,
    Bounds,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Grid,
    N1,
    N2,
}

/// Options that influence the result; stored so a report can be replayed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: Option<Mode>,
    pub grid: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub max_bell: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub command: Command,
    pub options: RunOptions,
    /// SHA-256 of the scenario text.
    pub input_digest: String,
    pub scenario: String,
    pub body: Body,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Verify(VerifyBody),
    Search(SearchBody),
    Bounds(BoundsBody),
    Noise(NoiseBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyRow {
    pub contingency: String,
    pub sigma: f64,
    pub p: f64,
    pub belief: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub concept: String,
    pub condition: String,
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub source: String,
    pub contingencies: Vec<ContingencyRow>,
    pub partition: Vec<Vec<String>>,
    pub cooperation_rates: Vec<f64>,
    pub overall_cooperation: f64,
    pub mleq: bool,
    pub smleq: Option<bool>,
    pub monotone_mleq: Option<bool>,
    pub failures: Vec<FailureRow>,
}

impl CandidateReport {
    pub fn new(source: &str, cand: &EquilibriumCandidate, verdict: &Verdict, states: &StateSpace) -> Self {
        let n = states.len() as f64;
        let p = cand.distribution();
        let contingencies = contingency_rows(cand);
        let mut failures = Vec::new();
        let mut push = |concept: &str, list: &[Failure]| {
            failures.extend(list.iter().map(|f| {
                FailureRow {
                    concept: concept.to_string(),
                    condition: serde_json::to_value(f.condition)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    location: f.location.clone(),
                    magnitude: f.magnitude,
                }
            }));
        };
        push("mleq", &verdict.mleq.failures);
        if let Some(s) = &verdict.smleq {
            // Only the conditions strong verification adds on top.
            let extra: Vec<Failure> = s.failures[verdict.mleq.failures.len()..].to_vec();
            push("smleq", &extra);
        }
        if let Some(m) = &verdict.monotone {
            push("monotone", &m.failures);
        }
        Self {
            source: source.to_string(),
            contingencies,
            partition: cand.partition.to_tokens(),
            cooperation_rates: p.cooperation_rates().iter().map(|x| x * n).collect(),
            overall_cooperation: cand.overall_cooperation_rate(),
            mleq: verdict.is_mleq(),
            smleq: verdict.smleq.as_ref().map(|a| a.holds),
            monotone_mleq: verdict.monotone.as_ref().map(|a| a.holds),
            failures,
        }
    }
}

pub fn contingency_rows(cand: &EquilibriumCandidate) -> Vec<ContingencyRow> {
    let p = cand.distribution();
    let profile = cand.profile();
    (0..cand.partition.len())
        .map(|i| ContingencyRow {
            contingency: label(i),
            sigma: cand.strategy.as_slice()[i],
            p: p.as_slice()[i],
            belief: profile.belief_at(i),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBody {
    pub candidate: CandidateReport,
    pub census: Option<Census>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateRow {
    pub contingencies: Vec<ContingencyRow>,
    pub partition: Vec<Vec<String>>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBody {
    pub mode: Mode,
    pub warnings: Vec<String>,
    pub grid_points: Option<u128>,
    /// Sorted by overall cooperation rate, highest first.
    pub equilibria: Vec<CandidateReport>,
    pub approximate: Vec<ApproximateRow>,
    /// One census per strong equilibrium, in `equilibria` order.
    pub census: Vec<Census>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub grid: usize,
    pub grid_points: u128,
    pub strong_equilibria: usize,
    pub counterexamples: Vec<CandidateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub statement: String,
    pub holds: bool,
    pub search: Option<FalsificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinRow {
    pub cells: usize,
    pub value: f64,
    pub ceiling: f64,
    pub strictly_below: bool,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub max_length: usize,
    pub tolerance: f64,
    #[serde(flatten)]
    pub result: Genericity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCheck {
    pub variance: f64,
    pub fine: f64,
    pub coarse: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsBody {
    pub cooperating: usize,
    pub cost_condition: ConditionReport,
    pub range_condition: ConditionReport,
    pub maxmin: Vec<MaxMinRow>,
    pub genericity: GenericityReport,
    pub noise: Option<NoiseCheck>,
    pub probe: Option<ProbeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRow {
    pub partition: String,
    pub closed_form: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBody {
    pub check: NoiseCheck,
    pub masses: [f64; 2],
    pub seed: u64,
    pub monte_carlo: Vec<MonteCarloRow>,
}

impl Report {
    /// Outcomes that contradict a proven bound; these set exit status 4.
    pub fn falsifications(&self) -> Vec<String> {
        let census_msgs = |c: &Census| -> Vec<String> {
            let mut out = Vec::new();
            if !c.fraction_holds {
                out.push(format!("{} of the states fully cooperate", c.fraction));
            }
            out.extend(c.anomalies.iter().cloned());
            out.extend(
                c.partners
                    .iter()
                    .filter(|p| !p.holds)
                    .map(|p| format!("partner {} cooperates at {} above its cap", p.partner, p.rate)),
            );
            out
        };
        match &self.body {
            Body::Verify(v) => v.census.iter().flat_map(census_msgs).collect(),
            Body::Search(s) => s.census.iter().flat_map(census_msgs).collect(),
            Body::Bounds(b) => {
                let mut out = Vec::new();
                for (name, cond) in [("cost", &b.cost_condition), ("range", &b.range_condition)] {
                    if let Some(search) = &cond.search {
                        if !search.counterexamples.is_empty() {
                            out.push(format!(
                                "{name} condition: {} counterexamples",
                                search.counterexamples.len()
                            ));
                        }
                    }
                }
                out.extend(
                    b.maxmin
                        .iter()
                        .filter(|r| !r.strictly_below)
                        .map(|r| format!("max-min value for K={} reaches its ceiling", r.cells)),
                );
                out
            }
            Body::Noise(_) => Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn flag(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    }
}

fn render_candidate(out: &mut String, c: &CandidateReport) {
    let _ = writeln!(
        out,
        "  [{}] MLEQ={} SMLEQ={} monotone={} overall cooperation={:.6}",
        c.source,
        flag(Some(c.mleq)),
        flag(c.smleq),
        flag(c.monotone_mleq),
        c.overall_cooperation
    );
    for row in &c.contingencies {
        let _ = writeln!(
            out,
            "    ({})  sigma={:.9}  p={:.9}  belief={:.9}",
            row.contingency, row.sigma, row.p, row.belief
        );
    }
    let cells: Vec<String> = c
        .partition
        .iter()
        .map(|cell| format!("{{{}}}", cell.join(" ")))
        .collect();
    let _ = writeln!(out, "    partition {}", cells.join(" "));
    for f in &c.failures {
        let _ = writeln!(
            out,
            "    fails {}: {} at {} ({:+.3e})",
            f.concept, f.condition, f.location, f.magnitude
        );
    }
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let command = format!("{:?}", report.command).to_lowercase();
    let _ = writeln!(
        out,
        "{} {command}  input sha256 {}",
        report.tool,
        &report.input_digest[..16]
    );
    match &report.body {
        Body::Verify(v) => {
            render_candidate(&mut out, &v.candidate);
            if let Some(c) = &v.census {
                let _ = writeln!(
                    out,
                    "  census: {} full-cooperation states, holds={}",
                    c.full_cooperation.len(),
                    c.holds
                );
            }
        }
        Body::Search(s) => {
            for w in &s.warnings {
                let _ = writeln!(out, "  warning: {w}");
            }
            if let Some(g) = s.grid_points {
                let _ = writeln!(out, "  grid points: {g}");
            }
            let _ = writeln!(
                out,
                "  {} equilibria, {} approximate",
                s.equilibria.len(),
                s.approximate.len()
            );
            for c in &s.equilibria {
                render_candidate(&mut out, c);
            }
        }
        Body::Bounds(b) => {
            for (name, c) in [("cost", &b.cost_condition), ("range", &b.range_condition)] {
                let _ = writeln!(out, "  {name} condition: {} -> {}", c.statement, c.holds);
                if let Some(s) = &c.search {
                    let _ = writeln!(
                        out,
                        "    search G={}: {} strong equilibria, {} counterexamples",
                        s.grid,
                        s.strong_equilibria,
                        s.counterexamples.len()
                    );
                }
            }
            for r in &b.maxmin {
                let _ = writeln!(
                    out,
                    "  K={}  value={:.12}  ceiling={:.12}  below={}",
                    r.cells, r.value, r.ceiling, r.strictly_below
                );
            }
            let g = &b.genericity;
            let _ = writeln!(
                out,
                "  generic (length {}): {}{}",
                g.max_length,
                g.result.generic,
                g.result.witness.as_ref().map(|w| format!(" [{w}]")).unwrap_or_default()
            );
            if let Some(n) = &b.noise {
                let _ = writeln!(
                    out,
                    "  noise v={}: fine={:.12} coarse={:.12} -> {}",
                    n.variance, n.fine, n.coarse, n.verdict
                );
            }
            if let Some(p) = &b.probe {
                for e in &p.entries {
                    let _ = writeln!(out, "  probe max theta={}: {} equilibria", e.max_theta, e.found);
                }
            }
        }
        Body::Noise(n) => {
            let _ = writeln!(
                out,
                "  v={}  fine={:.12}  coarse={:.12}  -> {}",
                n.check.variance, n.check.fine, n.check.coarse, n.check.verdict
            );
            for r in &n.monte_carlo {
                let _ = writeln!(
                    out,
                    "  {}: closed form {:.9}, simulated {:.9} ± {:.2e} (z={:+.2})",
                    r.partition, r.closed_form, r.mean, r.std_error, r.z_score
                );
            }
        }
    }
    for f in report.falsifications() {
        let _ = writeln!(out, "  FALSIFIED: {f}");
    }
    if let Some(t) = report.timing_ms {
        let _ = writeln!(out, "  elapsed {t:.1} ms");
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Fixed column order, numbers with 12 significant digits.
pub fn write_csv(report: &Report, path: &Path) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let candidate_rows = |rows: &mut Vec<Vec<String>>, rank: usize, c: &CandidateReport| {
        for r in &c.contingencies {
            rows.push(vec![
                rank.to_string(),
                c.source.clone(),
                r.contingency.clone(),
                num(r.sigma),
                num(r.p),
                num(r.belief),
                num(c.overall_cooperation),
                c.mleq.to_string(),
                flag(c.smleq).to_string(),
                flag(c.monotone_mleq).to_string(),
            ]);
        }
    };
    let header: Vec<&str> = match &report.body {
        Body::Verify(v) => {
            candidate_rows(&mut rows, 0, &v.candidate);
            vec![
                "rank",
                "source",
                "contingency",
                "sigma",
                "p",
                "belief",
                "overall_cooperation",
                "mleq",
                "smleq",
                "monotone",
            ]
        }
        Body::Search(s) => {
            for (i, c) in s.equilibria.iter().enumerate() {
                candidate_rows(&mut rows, i, c);
            }
            vec![
                "rank",
                "source",
                "contingency",
                "sigma",
                "p",
                "belief",
                "overall_cooperation",
                "mleq",
                "smleq",
                "monotone",
            ]
        }
        Body::Bounds(b) => {
            for r in &b.maxmin {
                rows.push(vec![
                    r.cells.to_string(),
                    num(r.value),
                    num(r.ceiling),
                    r.strictly_below.to_string(),
                    num(r.p[0]),
                    num(r.p[r.p.len() - 1]),
                ]);
            }
            vec!["cells", "value", "ceiling", "strictly_below", "p_first", "p_last"]
        }
        Body::Noise(n) => {
            for r in &n.monte_carlo {
                rows.push(vec![
                    r.partition.clone(),
                    num(r.closed_form),
                    num(r.mean),
                    num(r.std_error),
                    r.samples.to_string(),
                ]);
            }
            vec!["partition", "closed_form", "mean", "std_error", "samples"]
        }
    };
    w.write_record(&header).map_err(|e| e.to_string())?;
    for r in rows {
        w.write_record(&r).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}
