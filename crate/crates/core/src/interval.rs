//! Half-open coordinate intervals and interval partitions.

use std::fmt;

use crate::error::{Error, Result};

/// Half-open interval of coordinates `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    start: u32,
    end: u32,
}

impl Interval {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(
                "interval",
                format!("start {start} exceeds end {end}"),
            ));
        }
        Ok(Interval { start, end })
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, coord: u32) -> bool {
        self.start <= coord && coord < self.end
    }

    pub fn coords(&self) -> impl Iterator<Item = u32> {
        self.start..self.end
    }

    pub fn coords_vec(&self) -> Vec<u32> {
        self.coords().collect()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Partition of `[0, N)` into consecutive blocks, stored as its cut points
/// `0 = c_0 < c_1 < ... <= N`; block `i` is `[c_i, c_{i+1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPartition {
    cuts: Vec<u32>,
}

impl IntervalPartition {
    pub fn new(cuts: Vec<u32>) -> Result<Self> {
        if cuts.first() != Some(&0) {
            return Err(Error::invalid("partition", "cuts must start at 0"));
        }
        if !cuts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "partition",
                "cuts must be strictly increasing",
            ));
        }
        Ok(IntervalPartition { cuts })
    }

    pub fn cuts(&self) -> &[u32] {
        &self.cuts
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One past the last covered coordinate.
    pub fn end(&self) -> u32 {
        *self.cuts.last().expect("cuts nonempty")
    }

    pub fn block(&self, i: usize) -> Option<Interval> {
        if i + 1 < self.cuts.len() {
            Some(Interval {
                start: self.cuts[i],
                end: self.cuts[i + 1],
            })
        } else {
            None
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = Interval> + '_ {
        self.cuts.windows(2).map(|w| Interval {
            start: w[0],
            end: w[1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_basics() {
        let iv = Interval::new(2, 5).unwrap();
        assert_eq!(iv.len(), 3);
        assert!(iv.contains(2) && iv.contains(4) && !iv.contains(5));
        assert_eq!(iv.coords_vec(), vec![2, 3, 4]);
        assert!(Interval::new(5, 2).is_err());
        assert!(Interval::new(3, 3).unwrap().is_empty());
    }

    #[test]
    fn overlap_is_symmetric_and_strict() {
        let a = Interval::new(0, 4).unwrap();
        let b = Interval::new(4, 8).unwrap();
        let c = Interval::new(3, 5).unwrap();
        assert!(!a.overlaps(&b) && !b.overlaps(&a));
        assert!(a.overlaps(&c) && c.overlaps(&b));
    }

    #[test]
    fn partition_blocks() {
        let part = IntervalPartition::new(vec![0, 2, 4, 7]).unwrap();
        assert_eq!(part.len(), 3);
        assert_eq!(part.end(), 7);
        let blocks: Vec<_> = part.blocks().collect();
        assert_eq!(blocks[0], Interval::new(0, 2).unwrap());
        assert_eq!(blocks[2], Interval::new(4, 7).unwrap());
        assert!(part.block(3).is_none());
    }

    #[test]
    fn partition_rejects_bad_cuts() {
        assert!(IntervalPartition::new(vec![1, 2]).is_err());
        assert!(IntervalPartition::new(vec![0, 2, 2]).is_err());
        assert!(IntervalPartition::new(vec![]).is_err());
    }
}
