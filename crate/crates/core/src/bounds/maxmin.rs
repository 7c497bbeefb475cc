//! The auxiliary max–min problem behind the cooperation bound.
//!
//! With `K` ordered cells of masses `p` and belief gaps `q` (a probability
//! vector over adjacent pairs), the inner problem maximizes
//! `min_k A_k² q_k²` where `A_k = √(p_k p_{k+1}/(p_k + p_{k+1}))`; the outer
//! problem then chooses `p`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

const SUM_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 500;
pub const MAX_CELLS: usize = 10;
const RANDOM_STARTS: usize = 10;
const START_SEED: u64 = 0x6d61_786d_696e;
pub const AGREEMENT_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinInstance {
    p: Vec<f64>,
}

impl MaxMinInstance {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two cells, got {}",
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(
                "cell masses must be finite and non-negative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidParameter(format!("cell masses sum to {total}, not 1")));
        }
        Ok(Self { p })
    }

    pub fn cells(&self) -> usize {
        self.p.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.p
    }

    /// `A_k` for each adjacent pair; zero when either mass is zero.
    pub fn a(&self) -> Vec<f64> {
        self.p
            .windows(2)
            .map(|w| {
                let s = w[0] + w[1];
                if s > 0.0 {
                    (w[0] * w[1] / s).sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `min_k A_k² q_k²` for a given gap vector.
    pub fn min_criterion(&self, q: &[f64]) -> f64 {
        assert_eq!(q.len() + 1, self.p.len(), "gap vector has the wrong length");
        self.a()
            .iter()
            .zip(q)
            .map(|(a, q)| (a * q) * (a * q))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub q: Vec<f64>,
    pub value: f64,
}

/// Equalizes `A_k q_k`: `q_k ∝ 1/A_k`, value `1/(Σ_j 1/A_j)²`.
pub fn inner_maxmin(instance: &MaxMinInstance) -> Result<InnerSolution> {
    let p = instance.masses();
    if let Some(k) = (0..p.len() - 1).find(|&k| p[k] * p[k + 1] == 0.0) {
        return Err(Error::ZeroComponent { index: k, next: k + 1 });
    }
    let inv: Vec<f64> = instance.a().iter().map(|a| 1.0 / a).collect();
    let total: f64 = inv.iter().sum();
    Ok(InnerSolution {
        q: inv.iter().map(|x| x / total).collect(),
        value: 1.0 / (total * total),
    })
}

/// `Σ_k √(1/p_k + 1/p_{k+1})`; its square's reciprocal is the inner value.
pub fn outer_objective(p: &[f64]) -> f64 {
    p.windows(2).map(|w| (1.0 / w[0] + 1.0 / w[1]).sqrt()).sum()
}

fn gradient_hessian(p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let k = p.len();
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k - 1 {
        let (a, b) = (p[j], p[j + 1]);
        let s = 1.0 / a + 1.0 / b;
        let r = s.sqrt();
        let r3 = s * r;
        g[j] -= 0.5 / (r * a * a);
        g[j + 1] -= 0.5 / (r * b * b);
        h[(j, j)] += 1.0 / (r * a * a * a) - 0.25 / (r3 * a.powi(4));
        h[(j + 1, j + 1)] += 1.0 / (r * b * b * b) - 0.25 / (r3 * b.powi(4));
        let cross = -0.25 / (r3 * a * a * b * b);
        h[(j, j + 1)] += cross;
        h[(j + 1, j)] += cross;
    }
    (g, h)
}

/// Gradient component orthogonal to the simplex constraint.
fn projected_norm(g: &DVector<f64>) -> f64 {
    let mean = g.mean();
    g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>().sqrt()
}

/// Equality-constrained Newton with backtracking that keeps `p` interior.
fn newton_from(start: Vec<f64>) -> Result<Vec<f64>> {
    let k = start.len();
    let mut p = start;
    for _ in 0..MAX_NEWTON {
        let (g, h) = gradient_hessian(&p);
        if projected_norm(&g) <= GRADIENT_TOL {
            return Ok(p);
        }
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        kkt.view_mut((0, 0), (k, k)).copy_from(&h);
        for i in 0..k {
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&(-&g));
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence("singular Newton system".into()))?;
        let dir = sol.rows(0, k).into_owned();
        let f0 = outer_objective(&p);
        let slope = g.dot(&dir);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = p.iter().zip(dir.iter()).map(|(x, d)| x + t * d).collect();
            if trial.iter().all(|&x| x > 0.0) && outer_objective(&trial) <= f0 + 1e-4 * t * slope {
                p = trial;
                break;
            }
            t /= 2.0;
            if t < 1e-20 {
                // No further decrease representable; accept if stationary enough.
                return if projected_norm(&g) <= 1e3 * GRADIENT_TOL {
                    Ok(p)
                } else {
                    Err(Error::NoConvergence(format!(
                        "line search failed at gradient norm {:.3e}",
                        projected_norm(&g)
                    )))
                };
            }
        }
        // Keep the iterate exactly on the simplex.
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
    }
    Err(Error::NoConvergence(format!(
        "Newton iteration budget of {MAX_NEWTON} exhausted"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterSolution {
    pub p: Vec<f64>,
    pub value: f64,
    /// Value reached from each start (uniform first).
    pub start_values: Vec<f64>,
    /// Largest difference between start values.
    pub spread: f64,
}

/// Chooses cell masses to maximize the inner value. Runs Newton from the
/// uniform point and ten random simplex points; all must agree.
pub fn outer_maxmin(cells: usize, execution: Execution) -> Result<OuterSolution> {
    if !(2..=MAX_CELLS).contains(&cells) {
        return Err(Error::InvalidParameter(format!(
            "cell count must lie in 2..={MAX_CELLS}, got {cells}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut starts = vec![vec![1.0 / cells as f64; cells]];
    for _ in 0..RANDOM_STARTS {
        let draw: Vec<f64> = (0..cells).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
        let total: f64 = draw.iter().sum();
        starts.push(draw.iter().map(|x| x / total).collect());
    }
    let results = execution.map(&starts, |s| newton_from(s.clone()));
    let optima = results.into_iter().collect::<Result<Vec<_>>>()?;
    let start_values: Vec<f64> = optima.iter().map(|p| 1.0 / outer_objective(p).powi(2)).collect();
    let hi = start_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = start_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    if spread > AGREEMENT_TOL {
        return Err(Error::NoConvergence(format!("starts disagree by {spread:.3e}")));
    }
    let p = optima[0].clone();
    if (p[0] - p[cells - 1]).abs() > SYMMETRY_TOL {
        return Err(Error::NoConvergence(format!(
            "optimum is not symmetric: p_1 = {}, p_K = {}",
            p[0],
            p[cells - 1]
        )));
    }
    Ok(OuterSolution {
        value: start_values[0],
        p,
        start_values,
        spread,
    })
}

/// `1/(2(K−1)³)`, the ceiling the outer value stays strictly below.
pub fn outer_ceiling(cells: usize) -> f64 {
    let k = (cells - 1) as f64;
    1.0 / (2.0 * k * k * k)
}
