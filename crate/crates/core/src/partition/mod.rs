//! Partitions of the contingency space and the complexity-penalized
//! prediction objective built on them.

mod enumerate;
mod lloyd;
mod objective;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trust_game::Contingency;

pub use enumerate::{all_partitions, bell_number, enumerate_partitions, PartitionIter};
pub use lloyd::{lloyd_iteration, LloydOutcome};
pub use objective::{
    check_merge_inequality, check_optimal_assignment, merge_delta_mspe, ml_optimal_partitions,
    ml_optimal_partitions_where, mspe, objective_v, representative_strategies, AssignmentCheck, AssignmentEntry,
    BeliefProfile, MergeCheck, MergeDelta, MergePair, MlOptimum, Penalty,
};

pub(crate) use objective::{collect_minimizers, objective_raw};

use crate::config::HARD_MAX_CONTINGENCIES;

/// A set partition of `len` contingencies, stored as a packed restricted
/// growth string: element `i` carries the label of its cell, labels appear
/// in first-occurrence order, four bits per element.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    len: u8,
    code: u64,
    cells: u8,
}

impl Partition {
    /// Canonicalizes arbitrary cell labels into restricted growth form.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() || labels.len() > HARD_MAX_CONTINGENCIES {
            return Err(Error::InvalidPartition(format!(
                "partition size {} outside 1..={}",
                labels.len(),
                HARD_MAX_CONTINGENCIES
            )));
        }
        let mut relabel: Vec<(usize, u8)> = Vec::new();
        let mut canonical = [0u8; HARD_MAX_CONTINGENCIES];
        for (i, &l) in labels.iter().enumerate() {
            let id = match relabel.iter().find(|(old, _)| *old == l) {
                Some(&(_, id)) => id,
                None => {
                    let id = relabel.len() as u8;
                    relabel.push((l, id));
                    id
                }
            };
            canonical[i] = id;
        }
        Ok(Self::pack(&canonical[..labels.len()]))
    }

    /// Builds from explicit cells; they must be non-empty, disjoint and cover `0..len`.
    pub fn from_cells(len: usize, cells: &[Vec<usize>]) -> Result<Self> {
        if len == 0 || len > HARD_MAX_CONTINGENCIES {
            return Err(Error::InvalidPartition(format!("partition size {len} out of range")));
        }
        let mut labels = vec![usize::MAX; len];
        for (k, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidPartition(format!("cell {k} is empty")));
            }
            for &m in cell {
                if m >= len {
                    return Err(Error::InvalidPartition(format!(
                        "contingency index {m} out of range for {len} contingencies"
                    )));
                }
                if labels[m] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "contingency {} appears in more than one cell",
                        Contingency::from_index(m)
                    )));
                }
                labels[m] = k;
            }
        }
        if let Some(m) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "contingency {} is not covered",
                Contingency::from_index(m)
            )));
        }
        Self::from_labels(&labels)
    }

    pub(crate) fn pack(rgs: &[u8]) -> Self {
        let mut code = 0u64;
        let mut cells = 0u8;
        for &l in rgs {
            code = (code << 4) | l as u64;
            cells = cells.max(l + 1);
        }
        Self {
            len: rgs.len() as u8,
            code,
            cells,
        }
    }

    /// Every contingency in its own cell.
    pub fn finest(len: usize) -> Self {
        let labels: Vec<usize> = (0..len).collect();
        Self::from_labels(&labels).expect("valid size")
    }

    /// The one-cell partition.
    pub fn degenerate(len: usize) -> Self {
        Self::from_labels(&vec![0; len]).expect("valid size")
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_count(&self) -> usize {
        self.cells as usize
    }

    pub fn cell_of(&self, index: usize) -> usize {
        debug_assert!(index < self.len());
        ((self.code >> (4 * (self.len() - 1 - index))) & 0xF) as usize
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.cell_of(i)).collect()
    }

    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.cell_count()];
        for i in 0..self.len() {
            cells[self.cell_of(i)].push(i);
        }
        cells
    }

    pub fn members(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.cell_of(i) == cell)
    }

    /// The partition obtained by fusing cells `a` and `b`.
    pub fn merge(&self, a: usize, b: usize) -> Self {
        let labels: Vec<usize> = self.labels().into_iter().map(|l| if l == b { a } else { l }).collect();
        Self::from_labels(&labels).expect("merge keeps size")
    }

    /// Cells rendered as `"state,history"` tokens.
    pub fn to_tokens(&self) -> Vec<Vec<String>> {
        self.cells()
            .into_iter()
            .map(|cell| {
                cell.into_iter()
                    .map(|i| {
                        let c = Contingency::from_index(i);
                        format!("{},{}", c.state, c.history.bit())
                    })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cell in self.cells() {
            write!(f, "{{")?;
            for (j, i) in cell.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", Contingency::from_index(*i))?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

impl Serialize for Partition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(deserializer)?;
        Partition::from_labels(&labels).map_err(serde::de::Error::custom)
    }
}
