//! Exact check that no signed combination of distinct states vanishes or
//! reproduces another state.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, rational_from_f64};
use crate::trust_game::StateSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genericity {
    pub generic: bool,
    /// First coincidence found, e.g. `0.2+0.3=0.5`.
    pub witness: Option<String>,
    pub combinations_checked: u64,
}

/// Scans every signed sum `±θ_{k1} ± … ± θ_{kj}` over `2 ≤ j ≤ max_len`
/// distinct states (first sign fixed to `+`). The set is non-generic when
/// such a sum is within `tol` of zero or, in absolute value, of a state
/// outside the combination. With `tol = 0` the test is exact.
pub fn genericity_check(states: &StateSpace, max_len: usize, tol: f64) -> Result<Genericity> {
    let n = states.len();
    if max_len > 2 * n {
        return Err(Error::InvalidParameter(format!(
            "combination length {max_len} exceeds twice the state count"
        )));
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be non-negative, got {tol}"
        )));
    }
    let tol = rational_from_f64(tol)?;
    let values = states.exact();
    let max_len = max_len.min(n);
    let mut checked = 0u64;
    for size in 2..=max_len {
        for subset in Subsets::new(n, size) {
            for signs in 0u32..(1 << (size - 1)) {
                checked += 1;
                let mut sum = values[subset[0]].clone();
                for (pos, &k) in subset.iter().enumerate().skip(1) {
                    if signs >> (pos - 1) & 1 == 1 {
                        sum -= &values[k];
                    } else {
                        sum += &values[k];
                    }
                }
                let hit = if sum.abs() <= tol {
                    Some(BigRational::zero())
                } else {
                    (0..n)
                        .filter(|k| !subset.contains(k))
                        .map(|k| values[k].clone())
                        .find(|v| (sum.abs() - v).abs() <= tol)
                };
                if let Some(target) = hit {
                    return Ok(Genericity {
                        generic: false,
                        witness: Some(witness(&subset, signs, values, &sum, &target)),
                        combinations_checked: checked,
                    });
                }
            }
        }
    }
    Ok(Genericity {
        generic: true,
        witness: None,
        combinations_checked: checked,
    })
}

fn witness(subset: &[usize], signs: u32, values: &[BigRational], sum: &BigRational, target: &BigRational) -> String {
    let mut out = String::new();
    let flip = sum.is_negative();
    for (pos, &k) in subset.iter().enumerate() {
        let negative = pos > 0 && signs >> (pos - 1) & 1 == 1;
        let negative = negative != flip;
        if pos > 0 || negative {
            out.push(if negative { '-' } else { '+' });
        }
        out.push_str(&format_rational(&values[k]));
    }
    format!("{out}={}", format_rational(target))
}

/// Lexicographic `k`-subsets of `0..n`.
struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}
