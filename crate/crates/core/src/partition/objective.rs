//! Representative strategies, MSPE, the penalized objective and the two
//! necessary conditions for its minimizers (merge inequality, optimal
//! assignment).

use serde::{Deserialize, Serialize};

use super::{all_partitions, Partition};
use crate::config::{Settings, HARD_MAX_CONTINGENCIES};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::trust_game::{ergodic_distribution, Contingency, ErgodicDistribution, Strategy};

/// Complexity cost charged per partition cell; strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Penalty(f64);

impl Penalty {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(Self(c))
        } else {
            Err(Error::InvalidParameter(format!(
                "complexity cost must be positive and finite, got {c}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Per-cell beliefs `σ̂(π)` and masses `p(π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefProfile {
    reps: Vec<f64>,
    masses: Vec<f64>,
    labels: Vec<usize>,
}

impl BeliefProfile {
    pub fn cell_count(&self) -> usize {
        self.reps.len()
    }

    pub fn rep(&self, cell: usize) -> f64 {
        self.reps[cell]
    }

    pub fn mass(&self, cell: usize) -> f64 {
        self.masses[cell]
    }

    pub fn reps(&self) -> &[f64] {
        &self.reps
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cell_of(&self, c: Contingency) -> usize {
        self.labels[c.index()]
    }

    /// `σ̂(θ,h)`, the belief held at contingency `c`.
    pub fn belief(&self, c: Contingency) -> f64 {
        self.reps[self.labels[c.index()]]
    }

    pub fn belief_at(&self, index: usize) -> f64 {
        self.reps[self.labels[index]]
    }
}

fn check_dims(partition: &Partition, strategy: &Strategy, p: &ErgodicDistribution) {
    assert_eq!(
        partition.len(),
        strategy.as_slice().len(),
        "partition/strategy size mismatch"
    );
    assert_eq!(
        partition.len(),
        p.as_slice().len(),
        "partition/distribution size mismatch"
    );
}

/// `σ̂(π)`: the `p`-weighted mean of `σ` over each cell. Cells without mass
/// fall back to the unweighted mean of their members.
pub fn representative_strategies(partition: &Partition, strategy: &Strategy, p: &ErgodicDistribution) -> BeliefProfile {
    check_dims(partition, strategy, p);
    let sigma = strategy.as_slice();
    let probs = p.as_slice();
    let k = partition.cell_count();
    let mut masses = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    let mut plain = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    let labels = partition.labels();
    for (i, &l) in labels.iter().enumerate() {
        masses[l] += probs[i];
        weighted[l] += probs[i] * sigma[i];
        plain[l] += sigma[i];
        sizes[l] += 1;
    }
    let reps = (0..k)
        .map(|l| {
            if masses[l] > 0.0 {
                (weighted[l] / masses[l]).clamp(0.0, 1.0)
            } else {
                plain[l] / sizes[l] as f64
            }
        })
        .collect();
    BeliefProfile { reps, masses, labels }
}

/// Allocation-free objective used by the exhaustive loops.
pub(crate) fn objective_raw(partition: &Partition, sigma: &[f64], probs: &[f64], c: f64) -> f64 {
    let mut mass = [0.0f64; HARD_MAX_CONTINGENCIES];
    let mut weighted = [0.0f64; HARD_MAX_CONTINGENCIES];
    let mut labels = [0usize; HARD_MAX_CONTINGENCIES];
    let len = partition.len();
    for i in 0..len {
        let l = partition.cell_of(i);
        labels[i] = l;
        mass[l] += probs[i];
        weighted[l] += probs[i] * sigma[i];
    }
    let mut err = 0.0;
    for i in 0..len {
        if probs[i] > 0.0 {
            let l = labels[i];
            let d = weighted[l] / mass[l] - sigma[i];
            err += probs[i] * d * d;
        }
    }
    c * partition.cell_count() as f64 + err
}

/// `Σ p(θ,h) [σ̂(π(θ,h)) - σ(θ,h)]²`.
pub fn mspe(partition: &Partition, strategy: &Strategy, p: &ErgodicDistribution) -> f64 {
    check_dims(partition, strategy, p);
    objective_raw(partition, strategy.as_slice(), p.as_slice(), 0.0)
}

/// `V = c·|Π| + MSPE`.
pub fn objective_v(partition: &Partition, strategy: &Strategy, p: &ErgodicDistribution, penalty: Penalty) -> f64 {
    check_dims(partition, strategy, p);
    objective_raw(partition, strategy.as_slice(), p.as_slice(), penalty.value())
}

/// MSPE increase from fusing two cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeDelta {
    pub delta: f64,
    /// Both cells carry zero mass; `delta` is reported as zero.
    pub null_pair: bool,
}

/// `p(π)p(π′)/(p(π)+p(π′)) · (σ̂(π) - σ̂(π′))²`.
pub fn merge_delta_mspe(a: usize, b: usize, profile: &BeliefProfile) -> MergeDelta {
    assert_ne!(a, b, "merge requires two distinct cells");
    let (pa, pb) = (profile.mass(a), profile.mass(b));
    let total = pa + pb;
    if total <= 0.0 {
        return MergeDelta {
            delta: 0.0,
            null_pair: true,
        };
    }
    let gap = profile.rep(a) - profile.rep(b);
    MergeDelta {
        delta: pa * pb / total * gap * gap,
        null_pair: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePair {
    pub a: usize,
    pub b: usize,
    pub delta: f64,
    /// `delta - c`; negative when merging the pair pays.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCheck {
    pub pairs: Vec<MergePair>,
    pub holds: bool,
}

impl MergeCheck {
    pub fn failures(&self) -> impl Iterator<Item = &MergePair> {
        self.pairs.iter().filter(|p| !p.holds)
    }
}

/// Checks `merge_delta ≥ c` for every unordered pair of cells, with `tie`
/// slack for binding pairs.
pub fn check_merge_inequality(
    partition: &Partition,
    strategy: &Strategy,
    p: &ErgodicDistribution,
    penalty: Penalty,
    tie: f64,
) -> MergeCheck {
    let profile = representative_strategies(partition, strategy, p);
    let k = profile.cell_count();
    let mut pairs = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let delta = merge_delta_mspe(a, b, &profile).delta;
            let margin = delta - penalty.value();
            pairs.push(MergePair {
                a,
                b,
                delta,
                margin,
                holds: margin >= -tie,
            });
        }
    }
    let holds = pairs.iter().all(|p| p.holds);
    MergeCheck { pairs, holds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub contingency: Contingency,
    pub cell: usize,
    pub own_distance: f64,
    pub best_distance: f64,
    pub best_cell: usize,
    /// False when the contingency is null and the check is not strong.
    pub checked: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentCheck {
    pub entries: Vec<AssignmentEntry>,
    pub holds: bool,
}

impl AssignmentCheck {
    pub fn failures(&self) -> impl Iterator<Item = &AssignmentEntry> {
        self.entries.iter().filter(|e| !e.holds)
    }
}

/// Each checked contingency must sit in a cell whose belief is nearest to
/// its own cooperation probability (membership in the argmin, `eps` slack).
/// `strong` extends the check to null contingencies.
pub fn check_optimal_assignment(
    partition: &Partition,
    strategy: &Strategy,
    p: &ErgodicDistribution,
    profile: &BeliefProfile,
    strong: bool,
    eps: f64,
) -> AssignmentCheck {
    check_dims(partition, strategy, p);
    let entries: Vec<AssignmentEntry> = (0..partition.len())
        .map(|i| {
            let c = Contingency::from_index(i);
            let s = strategy.get(c);
            let cell = partition.cell_of(i);
            let own_distance = (profile.rep(cell) - s).abs();
            let (best_cell, best_distance) = profile.reps().iter().enumerate().map(|(k, r)| (k, (r - s).abs())).fold(
                (cell, own_distance),
                |best, cand| if cand.1 < best.1 { cand } else { best },
            );
            let checked = strong || p.get(c) > 0.0;
            let holds = !checked || own_distance <= best_distance + eps;
            AssignmentEntry {
                contingency: c,
                cell,
                own_distance,
                best_distance,
                best_cell,
                checked,
                holds,
            }
        })
        .collect();
    let holds = entries.iter().all(|e| e.holds);
    AssignmentCheck { entries, holds }
}

/// The global minimizers of `V` found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlOptimum {
    pub min_objective: f64,
    /// Every partition within the tie tolerance of the minimum, in canonical order.
    pub partitions: Vec<Partition>,
}

impl MlOptimum {
    pub fn contains(&self, partition: &Partition) -> bool {
        self.partitions.binary_search(partition).is_ok()
    }
}

const PARALLEL_THRESHOLD: usize = 2048;

/// All ML-optimal partitions for `strategy` (ties preserved).
pub fn ml_optimal_partitions(strategy: &Strategy, penalty: Penalty, settings: &Settings) -> Result<MlOptimum> {
    ml_optimal_partitions_where(strategy, penalty, settings, |_, _| true)
}

/// Minimizers of `V` over the partitions accepted by `admissible`, which
/// receives each candidate and its belief profile.
pub fn ml_optimal_partitions_where<F>(
    strategy: &Strategy,
    penalty: Penalty,
    settings: &Settings,
    admissible: F,
) -> Result<MlOptimum>
where
    F: Fn(&Partition, &BeliefProfile) -> bool + Sync + Send,
{
    let count = strategy.as_slice().len();
    let partitions = all_partitions(count, &settings.limits)?;
    let p = ergodic_distribution(strategy);
    let sigma = strategy.as_slice();
    let probs = p.as_slice();
    let exec = if partitions.len() >= PARALLEL_THRESHOLD {
        settings.execution
    } else {
        Execution::Sequential
    };
    let values: Vec<Option<f64>> = exec.map(&partitions, |part| {
        let profile = representative_strategies(part, strategy, &p);
        admissible(part, &profile).then(|| objective_raw(part, sigma, probs, penalty.value()))
    });
    Ok(collect_minimizers(&partitions, &values, settings.tolerances.tie))
}

pub(crate) fn collect_minimizers(partitions: &[Partition], values: &[Option<f64>], tie: f64) -> MlOptimum {
    let min_objective = values.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v));
    let partitions = partitions
        .iter()
        .zip(values)
        .filter_map(|(part, v)| v.filter(|&v| v <= min_objective + tie).map(|_| *part))
        .collect();
    MlOptimum {
        min_objective,
        partitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust_game::Action;
    use proptest::prelude::{any, prop, prop_assert, prop_assume, prop_oneof, proptest, Just};
    use proptest::strategy::Strategy as Gen;

    fn example_one() -> (Strategy, ErgodicDistribution) {
        let s = Strategy::from_pairs(&[(0.2, 0.8)]).unwrap();
        let p = ergodic_distribution(&s);
        (s, p)
    }

    /// Independent MSPE: expectation over contingencies with beliefs
    /// recomputed cell by cell from scratch.
    fn brute_mspe(labels: &[usize], sigma: &[f64], p: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..labels.len() {
            let members: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == labels[i]).collect();
            let mass: f64 = members.iter().map(|&j| p[j]).sum();
            if mass > 0.0 {
                let rep: f64 = members.iter().map(|&j| p[j] * sigma[j]).sum::<f64>() / mass;
                total += p[i] * (rep - sigma[i]).powi(2);
            }
        }
        total
    }

    #[test]
    fn representative_examples() {
        let (s, p) = example_one();
        let fine = Partition::finest(2);
        let prof = representative_strategies(&fine, &s, &p);
        assert_eq!(prof.belief(Contingency::new(0, Action::Trust)), 0.8);
        let coarse = Partition::degenerate(2);
        let prof = representative_strategies(&coarse, &s, &p);
        assert!((prof.rep(0) - 0.5).abs() < 1e-12);

        // Null singleton keeps the member's own value.
        let s = Strategy::from_pairs(&[(0.4, 1.0), (0.0, 0.0)]).unwrap();
        let p = ergodic_distribution(&s);
        assert_eq!(p.at(0, Action::Defect), 0.0);
        let part = Partition::from_cells(4, &[vec![0], vec![1, 2, 3]]).unwrap();
        let prof = representative_strategies(&part, &s, &p);
        assert_eq!(prof.rep(0), 0.4);
    }

    #[test]
    fn mspe_examples() {
        let (s, p) = example_one();
        assert_eq!(mspe(&Partition::finest(2), &s, &p), 0.0);
        let zero = Strategy::zero_trust(3);
        let pz = ergodic_distribution(&zero);
        assert_eq!(mspe(&Partition::degenerate(6), &zero, &pz), 0.0);
        assert!((mspe(&Partition::degenerate(2), &s, &p) - 0.09).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let zero = Strategy::zero_trust(2);
        let pz = ergodic_distribution(&zero);
        let c = Penalty::new(0.1).unwrap();
        assert!((objective_v(&Partition::degenerate(4), &zero, &pz, c) - 0.1).abs() < 1e-15);
        let (s, p) = example_one();
        let c = Penalty::new(0.09).unwrap();
        assert!((objective_v(&Partition::finest(2), &s, &p, c) - 0.18).abs() < 1e-15);
        assert!((objective_v(&Partition::degenerate(2), &s, &p, c) - 0.18).abs() < 1e-12);
        assert!(Penalty::new(0.0).is_err());
        assert!(Penalty::new(f64::NAN).is_err());
    }

    #[test]
    fn merge_delta_examples() {
        let (s, p) = example_one();
        let prof = representative_strategies(&Partition::finest(2), &s, &p);
        let d = merge_delta_mspe(0, 1, &prof);
        assert!((d.delta - 0.09).abs() < 1e-12);
        let direct = mspe(&Partition::degenerate(2), &s, &p) - mspe(&Partition::finest(2), &s, &p);
        assert!((d.delta - direct).abs() < 1e-12);

        let s = Strategy::from_pairs(&[(0.3, 0.3)]).unwrap();
        let p = ergodic_distribution(&s);
        let prof = representative_strategies(&Partition::finest(2), &s, &p);
        assert_eq!(merge_delta_mspe(0, 1, &prof).delta, 0.0);

        // One null cell contributes nothing.
        let s = Strategy::from_pairs(&[(0.5, 1.0)]).unwrap();
        let p = ergodic_distribution(&s);
        let prof = representative_strategies(&Partition::finest(2), &s, &p);
        let d = merge_delta_mspe(0, 1, &prof);
        assert_eq!(d.delta, 0.0);
        assert!(!d.null_pair);
    }

    #[test]
    fn null_pair_is_flagged() {
        let s = Strategy::from_pairs(&[(0.0, 0.7), (0.0, 0.2)]).unwrap();
        let p = ergodic_distribution(&s);
        let part = Partition::from_cells(4, &[vec![0, 2], vec![1], vec![3]]).unwrap();
        let prof = representative_strategies(&part, &s, &p);
        let d = merge_delta_mspe(1, 2, &prof);
        assert!(d.null_pair);
        assert_eq!(d.delta, 0.0);
    }

    #[test]
    fn merge_inequality_examples() {
        let (s, p) = example_one();
        let fine = Partition::finest(2);
        let at_bound = check_merge_inequality(&fine, &s, &p, Penalty::new(0.09).unwrap(), 1e-12);
        assert!(at_bound.holds);
        assert!(at_bound.pairs[0].margin.abs() < 1e-12);
        let above = check_merge_inequality(&fine, &s, &p, Penalty::new(0.1).unwrap(), 1e-12);
        assert!(!above.holds);
        assert!((above.pairs[0].margin + 0.01).abs() < 1e-12);
        let vacuous = check_merge_inequality(&Partition::degenerate(2), &s, &p, Penalty::new(0.5).unwrap(), 0.0);
        assert!(vacuous.holds && vacuous.pairs.is_empty());
    }

    #[test]
    fn assignment_examples() {
        let (s, p) = example_one();
        let fine = Partition::finest(2);
        let prof = representative_strategies(&fine, &s, &p);
        assert!(check_optimal_assignment(&fine, &s, &p, &prof, true, 1e-9).holds);

        // A σ=1 contingency in the σ̂=0 cell while another cell sits at 0.9.
        let s = Strategy::new(vec![0.0, 1.0, 0.9, 0.9]).unwrap();
        let p = ErgodicDistribution::from_probs(vec![0.5, 0.0, 0.25, 0.25]).unwrap();
        let part = Partition::from_cells(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let prof = representative_strategies(&part, &s, &p);
        assert_eq!(prof.rep(0), 0.0);
        let weak = check_optimal_assignment(&part, &s, &p, &prof, false, 1e-9);
        assert!(weak.holds, "null contingency is skipped by the weak check");
        let strong = check_optimal_assignment(&part, &s, &p, &prof, true, 1e-9);
        assert!(!strong.holds);
        let bad = strong.failures().next().unwrap();
        assert_eq!(bad.contingency, Contingency::new(0, Action::Trust));
        assert!((bad.own_distance - 1.0).abs() < 1e-15);
        assert!((bad.best_distance - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ml_optimal_examples() {
        let settings = Settings::default();
        let zero = Strategy::zero_trust(2);
        let opt = ml_optimal_partitions(&zero, Penalty::new(0.01).unwrap(), &settings).unwrap();
        assert_eq!(opt.partitions, vec![Partition::degenerate(4)]);

        let (s, _) = example_one();
        let opt = ml_optimal_partitions(&s, Penalty::new(0.09).unwrap(), &settings).unwrap();
        assert_eq!(opt.partitions.len(), 2, "finest and degenerate tie");
        assert!(opt.contains(&Partition::finest(2)) && opt.contains(&Partition::degenerate(2)));

        let s = Strategy::from_pairs(&[(0.15, 0.75)]).unwrap();
        let opt = ml_optimal_partitions(&s, Penalty::new(0.08).unwrap(), &settings).unwrap();
        assert_eq!(opt.partitions, vec![Partition::finest(2)]);

        let big = Strategy::zero_trust(7);
        assert!(matches!(
            ml_optimal_partitions(&big, Penalty::new(0.1).unwrap(), &settings),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn finest_objective_is_exact() {
        let s = Strategy::from_pairs(&[(0.1, 0.9), (0.4, 0.5), (0.3, 0.3)]).unwrap();
        let p = ergodic_distribution(&s);
        let c = Penalty::new(0.07).unwrap();
        assert_eq!(objective_v(&Partition::finest(6), &s, &p, c), 0.07 * 6.0);
    }

    fn strategy_and_partition(max_states: usize) -> impl Gen<Value = (Vec<f64>, Vec<usize>)> {
        (1..=max_states).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], 2 * n),
                prop::collection::vec(0usize..2 * n, 2 * n),
            )
        })
    }

    proptest! {
        #[test]
        fn merge_identity(
            (sigma, labels) in strategy_and_partition(4),
            pick in any::<(usize, usize)>(),
        ) {
            let s = Strategy::new(sigma).unwrap();
            let p = ergodic_distribution(&s);
            let part = Partition::from_labels(&labels).unwrap();
            prop_assume!(part.cell_count() >= 2);
            let k = part.cell_count();
            let a = pick.0 % k;
            let b = (a + 1 + pick.1 % (k - 1)) % k;
            let prof = representative_strategies(&part, &s, &p);
            let delta = merge_delta_mspe(a, b, &prof).delta;
            let merged = part.merge(a.min(b), a.max(b));
            let direct = mspe(&merged, &s, &p) - mspe(&part, &s, &p);
            prop_assert!((delta - direct).abs() < 1e-12, "delta {} direct {}", delta, direct);
        }

        #[test]
        fn mspe_agrees_with_brute_force((sigma, labels) in strategy_and_partition(4)) {
            let s = Strategy::new(sigma.clone()).unwrap();
            let p = ergodic_distribution(&s);
            let part = Partition::from_labels(&labels).unwrap();
            let fast = mspe(&part, &s, &p);
            let slow = brute_mspe(&part.labels(), &sigma, p.as_slice());
            prop_assert!((fast - slow).abs() < 1e-14);
            prop_assert!(fast >= 0.0);
            let c = Penalty::new(0.05).unwrap();
            prop_assert!(objective_v(&part, &s, &p, c) >= 0.05 * part.cell_count() as f64);
        }

        #[test]
        fn minimizers_satisfy_necessary_conditions(
            sigma in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], 4),
            c in 0.001f64..0.3,
        ) {
            let s = Strategy::new(sigma).unwrap();
            let p = ergodic_distribution(&s);
            let penalty = Penalty::new(c).unwrap();
            let opt = ml_optimal_partitions(&s, penalty, &Settings::default()).unwrap();
            prop_assert!(!opt.partitions.is_empty());
            for part in &opt.partitions {
                let prof = representative_strategies(part, &s, &p);
                // A null cell could be merged for free.
                prop_assert!(prof.masses().iter().all(|&m| m > 0.0));
                prop_assert!(check_merge_inequality(part, &s, &p, penalty, 1e-12).holds);
                prop_assert!(check_optimal_assignment(part, &s, &p, &prof, false, 1e-9).holds);
                for a in 0..prof.cell_count() {
                    for b in a + 1..prof.cell_count() {
                        prop_assert!(prof.rep(a) != prof.rep(b));
                    }
                }
            }
        }
    }
}
