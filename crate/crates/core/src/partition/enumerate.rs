//! Exhaustive enumeration of set partitions in restricted-growth-string order.

use std::sync::OnceLock;

use super::Partition;
use crate::config::{Limits, HARD_MAX_CONTINGENCIES};
use crate::error::Result;

/// Streams every partition of `count` elements exactly once, in
/// lexicographic order of restricted growth strings.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    rgs: [u8; HARD_MAX_CONTINGENCIES],
    // prefix_max[i] = max(rgs[..i]), with prefix_max[0] unused.
    prefix_max: [u8; HARD_MAX_CONTINGENCIES],
    len: usize,
    done: bool,
}

impl PartitionIter {
    fn new(len: usize) -> Self {
        Self {
            rgs: [0; HARD_MAX_CONTINGENCIES],
            prefix_max: [0; HARD_MAX_CONTINGENCIES],
            len,
            done: len == 0,
        }
    }

    fn advance(&mut self) {
        let mut i = self.len;
        while i > 1 {
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i] {
                self.rgs[i] += 1;
                let running = self.prefix_max[i].max(self.rgs[i]);
                for j in i + 1..self.len {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = running;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let current = Partition::pack(&self.rgs[..self.len]);
        self.advance();
        Some(current)
    }
}

/// Enumerates all partitions of `count` contingencies, refusing counts
/// above the configured ceiling.
pub fn enumerate_partitions(count: usize, limits: &Limits) -> Result<PartitionIter> {
    limits.check_count(count)?;
    Ok(PartitionIter::new(count))
}

const CACHED_UP_TO: usize = 10;

/// All partitions of `count` elements as a vector, memoized for small counts.
pub fn all_partitions(count: usize, limits: &Limits) -> Result<std::borrow::Cow<'static, [Partition]>> {
    limits.check_count(count)?;
    if count <= CACHED_UP_TO {
        static CACHE: [OnceLock<Vec<Partition>>; CACHED_UP_TO + 1] = [const { OnceLock::new() }; CACHED_UP_TO + 1];
        let v = CACHE[count].get_or_init(|| PartitionIter::new(count).collect());
        Ok(std::borrow::Cow::Borrowed(v.as_slice()))
    } else {
        Ok(std::borrow::Cow::Owned(PartitionIter::new(count).collect()))
    }
}

/// Bell number via Stirling numbers of the second kind.
pub fn bell_number(n: usize) -> u128 {
    let mut row = vec![1u128];
    for i in 1..=n {
        let mut next = vec![0u128; i + 1];
        for k in 1..=i {
            next[k] = k as u128 * row.get(k).copied().unwrap_or(0) + row[k - 1];
        }
        row = next;
    }
    row.iter().sum()
}
