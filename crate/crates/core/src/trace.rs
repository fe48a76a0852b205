//! Finite partial 0/1 assignments and cylinder families over a common domain.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Finite partial function from coordinates to bits; the basic datum of a
/// cylinder `[s] = {x : x agrees with s on dom(s)}`.
///
/// The domain is kept strictly ascending, so equality and ordering are
/// canonical.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteTrace {
    domain: Vec<u32>,
    bits: Vec<bool>,
}

impl FiniteTrace {
    /// Build from parallel `domain`/`bits` lists; input order is free, but
    /// repeated coordinates are rejected.
    pub fn new(domain: Vec<u32>, bits: Vec<bool>) -> Result<Self> {
        if domain.len() != bits.len() {
            return Err(Error::invalid(
                "trace",
                format!("{} coordinates but {} bits", domain.len(), bits.len()),
            ));
        }
        let mut pairs: Vec<(u32, bool)> = domain.into_iter().zip(bits).collect();
        pairs.sort_unstable_by_key(|&(c, _)| c);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("trace", "repeated coordinate"));
        }
        let (domain, bits) = pairs.into_iter().unzip();
        Ok(FiniteTrace { domain, bits })
    }

    /// The empty assignment; its cylinder is the whole space.
    pub fn empty() -> Self {
        FiniteTrace {
            domain: Vec::new(),
            bits: Vec::new(),
        }
    }

    /// Parse a `0/1` string aligned with the ascending sort of `domain`.
    pub fn from_bit_string(domain: Vec<u32>, bits: &str) -> Result<Self> {
        let parsed: Vec<bool> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(
                    "trace",
                    format!("bit string contains {other:?}"),
                )),
            })
            .collect::<Result<_>>()?;
        let mut sorted = domain.clone();
        sorted.sort_unstable();
        if sorted != domain {
            return Err(Error::invalid(
                "trace",
                "bit strings pair with an ascending domain",
            ));
        }
        FiniteTrace::new(domain, parsed)
    }

    /// Trace over ascending `domain` whose bits are the binary digits of
    /// `mask` (bit `j` of the mask belongs to `domain[j]`).
    pub fn from_mask(domain: &[u32], mask: u64) -> Self {
        debug_assert!(domain.windows(2).all(|w| w[0] < w[1]));
        let bits = (0..domain.len()).map(|j| mask >> j & 1 == 1).collect();
        FiniteTrace {
            domain: domain.to_vec(),
            bits,
        }
    }

    /// Full assignment on the window `[0, n)` with ones exactly at `ones`.
    pub fn window(n: u32, ones: &[u32]) -> Result<Self> {
        let mut bits = vec![false; n as usize];
        for &c in ones {
            if c >= n {
                return Err(Error::invalid(
                    "trace",
                    format!("coordinate {c} outside window [0, {n})"),
                ));
            }
            bits[c as usize] = true;
        }
        Ok(FiniteTrace {
            domain: (0..n).collect(),
            bits,
        })
    }

    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// `Some(n)` when the domain is exactly the window `[0, n)`.
    pub fn window_size(&self) -> Option<u32> {
        let n = self.domain.len() as u32;
        if self.domain.iter().copied().eq(0..n) {
            Some(n)
        } else {
            None
        }
    }

    pub fn value(&self, coord: u32) -> Option<bool> {
        self.domain
            .binary_search(&coord)
            .ok()
            .map(|i| self.bits[i])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.domain.iter().copied().zip(self.bits.iter().copied())
    }

    /// Coordinates assigned 1.
    pub fn ones(&self) -> impl Iterator<Item = u32> + '_ {
        self.pairs().filter(|&(_, b)| b).map(|(c, _)| c)
    }

    pub fn ones_vec(&self) -> Vec<u32> {
        self.ones().collect()
    }

    /// Restriction to the coordinates of `keep` (must be sorted ascending);
    /// coordinates outside the domain are dropped silently.
    pub fn restrict(&self, keep: &[u32]) -> FiniteTrace {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let mut domain = Vec::new();
        let mut bits = Vec::new();
        for &c in keep {
            if let Some(b) = self.value(c) {
                domain.push(c);
                bits.push(b);
            }
        }
        FiniteTrace { domain, bits }
    }

    pub fn restrict_interval(&self, iv: Interval) -> FiniteTrace {
        let mut domain = Vec::new();
        let mut bits = Vec::new();
        for (c, b) in self.pairs() {
            if iv.contains(c) {
                domain.push(c);
                bits.push(b);
            }
        }
        FiniteTrace { domain, bits }
    }

    /// Whether the domain covers every coordinate of `iv`.
    pub fn covers_interval(&self, iv: Interval) -> bool {
        iv.coords().all(|c| self.value(c).is_some())
    }

    /// Merge with a trace over a disjoint domain.
    pub fn union_disjoint(&self, other: &FiniteTrace) -> Result<FiniteTrace> {
        let mut pairs: Vec<(u32, bool)> = self.pairs().chain(other.pairs()).collect();
        pairs.sort_unstable_by_key(|&(c, _)| c);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("traces overlap; refusing to merge"));
        }
        let (domain, bits) = pairs.into_iter().unzip();
        Ok(FiniteTrace { domain, bits })
    }

    /// Bits as a mask aligned with this trace's own domain.
    pub fn mask(&self) -> Result<u64> {
        if self.len() > 63 {
            return Err(Error::EnumerationCap {
                size: self.len(),
                cap: 63,
            });
        }
        let mut mask = 0u64;
        for (j, &b) in self.bits.iter().enumerate() {
            if b {
                mask |= 1 << j;
            }
        }
        Ok(mask)
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for FiniteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}↦{}", self.domain, self.bit_string())
    }
}

/// Finite union of cylinders with a common domain `I`: the event
/// `V(J) = ⋃_{s ∈ J} [s]`. Traces are stored as bit masks over the ascending
/// domain, so families over `|I| <= 63` coordinates stay compact.
#[derive(Clone, PartialEq, Eq)]
pub struct CylinderFamily {
    domain: Vec<u32>,
    masks: BTreeSet<u64>,
}

impl CylinderFamily {
    pub fn new(domain: Vec<u32>, traces: impl IntoIterator<Item = FiniteTrace>) -> Result<Self> {
        let mut family = CylinderFamily::empty(domain)?;
        for t in traces {
            if t.domain() != family.domain {
                return Err(Error::domain(format!(
                    "trace domain {:?} differs from family domain {:?}",
                    t.domain(),
                    family.domain
                )));
            }
            family.masks.insert(t.mask()?);
        }
        Ok(family)
    }

    pub fn empty(domain: Vec<u32>) -> Result<Self> {
        if !domain.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("family domain must be ascending"));
        }
        if domain.len() > 63 {
            return Err(Error::EnumerationCap {
                size: domain.len(),
                cap: 63,
            });
        }
        Ok(CylinderFamily {
            domain,
            masks: BTreeSet::new(),
        })
    }

    pub fn from_masks(domain: Vec<u32>, masks: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut family = CylinderFamily::empty(domain)?;
        let width = family.domain.len();
        for m in masks {
            if width < 64 && m >> width != 0 {
                return Err(Error::domain(format!(
                    "mask {m:#x} does not fit domain of size {width}"
                )));
            }
            family.masks.insert(m);
        }
        Ok(family)
    }

    /// All traces over `domain` satisfying `pred`, by exhaustive enumeration
    /// of the `2^|domain|` patterns; refuses when `|domain| > cap`.
    pub fn from_predicate(
        domain: Vec<u32>,
        cap: usize,
        mut pred: impl FnMut(u64) -> bool,
    ) -> Result<Self> {
        let mut family = CylinderFamily::empty(domain)?;
        check_cap(family.domain.len(), cap)?;
        for mask in 0..1u64 << family.domain.len() {
            if pred(mask) {
                family.masks.insert(mask);
            }
        }
        Ok(family)
    }

    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    /// Domain as an interval when it is contiguous.
    pub fn domain_interval(&self) -> Option<Interval> {
        match (self.domain.first(), self.domain.last()) {
            (Some(&a), Some(&b)) if self.domain.len() as u32 == b - a + 1 => {
                Some(Interval::new(a, b + 1).expect("ordered"))
            }
            (None, None) => None,
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn contains_mask(&self, mask: u64) -> bool {
        self.masks.contains(&mask)
    }

    /// Membership; a trace with a different domain is never a member.
    pub fn contains(&self, t: &FiniteTrace) -> bool {
        t.domain() == self.domain.as_slice()
            && t.mask().map(|m| self.masks.contains(&m)).unwrap_or(false)
    }

    pub fn masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.masks.iter().copied()
    }

    pub fn traces(&self) -> impl Iterator<Item = FiniteTrace> + '_ {
        self.masks().map(move |m| FiniteTrace::from_mask(&self.domain, m))
    }

    pub fn union(&self, other: &CylinderFamily) -> Result<CylinderFamily> {
        if self.domain != other.domain {
            return Err(Error::domain("family union needs a common domain"));
        }
        let mut out = self.clone();
        out.masks.extend(other.masks.iter().copied());
        Ok(out)
    }
}

impl fmt::Debug for CylinderFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<String> = self.traces().map(|t| t.bit_string()).collect();
        write!(f, "V({:?}; {{{}}})", self.domain, shown.join(", "))
    }
}

/// Shared guard for the exhaustive-enumeration operations.
pub(crate) fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap || size > 63 {
        return Err(Error::EnumerationCap {
            size,
            cap: cap.min(63),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_construction_sorts_and_rejects_duplicates() {
        let t = FiniteTrace::new(vec![3, 1], vec![true, false]).unwrap();
        assert_eq!(t.domain(), &[1, 3]);
        assert_eq!(t.bit_string(), "01");
        assert!(FiniteTrace::new(vec![1, 1], vec![true, false]).is_err());
        assert!(FiniteTrace::new(vec![1], vec![]).is_err());
    }

    #[test]
    fn bit_string_alignment() {
        let t = FiniteTrace::from_bit_string(vec![0, 2, 5], "101").unwrap();
        assert_eq!(t.value(0), Some(true));
        assert_eq!(t.value(2), Some(false));
        assert_eq!(t.value(5), Some(true));
        assert_eq!(t.value(3), None);
        assert!(FiniteTrace::from_bit_string(vec![2, 0], "10").is_err());
        assert!(FiniteTrace::from_bit_string(vec![0, 1], "1x").is_err());
    }

    #[test]
    fn window_and_ones() {
        let t = FiniteTrace::window(4, &[0, 3]).unwrap();
        assert_eq!(t.bit_string(), "1001");
        assert_eq!(t.window_size(), Some(4));
        assert_eq!(t.ones_vec(), vec![0, 3]);
        assert!(FiniteTrace::window(4, &[4]).is_err());
        let partial = FiniteTrace::new(vec![0, 2], vec![true, true]).unwrap();
        assert_eq!(partial.window_size(), None);
    }

    #[test]
    fn restriction_keeps_overlap_only() {
        let t = FiniteTrace::window(5, &[1, 4]).unwrap();
        let r = t.restrict(&[1, 2, 7]);
        assert_eq!(r.domain(), &[1, 2]);
        assert_eq!(r.bit_string(), "10");
        let iv = Interval::new(3, 5).unwrap();
        assert_eq!(t.restrict_interval(iv).bit_string(), "01");
    }

    #[test]
    fn disjoint_union_merges_sorted() {
        let a = FiniteTrace::from_bit_string(vec![0, 1], "10").unwrap();
        let b = FiniteTrace::from_bit_string(vec![2, 3], "01").unwrap();
        let ab = a.union_disjoint(&b).unwrap();
        assert_eq!(ab.bit_string(), "1001");
        assert!(a.union_disjoint(&a).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let domain = vec![2, 3, 5];
        for mask in 0..8u64 {
            let t = FiniteTrace::from_mask(&domain, mask);
            assert_eq!(t.mask().unwrap(), mask);
        }
    }

    #[test]
    fn family_membership_and_union() {
        let domain = vec![0, 1];
        let fam = CylinderFamily::new(
            domain.clone(),
            vec![
                FiniteTrace::from_bit_string(domain.clone(), "11").unwrap(),
                FiniteTrace::from_bit_string(domain.clone(), "01").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(fam.len(), 2);
        assert!(fam.contains(&FiniteTrace::from_bit_string(domain.clone(), "11").unwrap()));
        assert!(!fam.contains(&FiniteTrace::from_bit_string(domain.clone(), "10").unwrap()));
        let other = CylinderFamily::new(
            domain.clone(),
            vec![FiniteTrace::from_bit_string(domain.clone(), "10").unwrap()],
        )
        .unwrap();
        assert_eq!(fam.union(&other).unwrap().len(), 3);
        let misaligned = CylinderFamily::empty(vec![0, 2]).unwrap();
        assert!(fam.union(&misaligned).is_err());
    }

    #[test]
    fn family_rejects_foreign_domains() {
        let fam = CylinderFamily::new(
            vec![0, 1],
            vec![FiniteTrace::from_bit_string(vec![0, 2], "11").unwrap()],
        );
        assert!(fam.is_err());
    }

    #[test]
    fn predicate_enumeration_respects_cap() {
        let fam = CylinderFamily::from_predicate(vec![0, 1, 2], 20, |m| m.count_ones() == 2)
            .unwrap();
        assert_eq!(fam.len(), 3);
        let too_big: Vec<u32> = (0..25).collect();
        let err = CylinderFamily::from_predicate(too_big, 20, |_| true).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { size: 25, cap: 20 }));
    }

    #[test]
    fn empty_domain_family_has_one_possible_trace() {
        let fam = CylinderFamily::from_predicate(vec![], 20, |_| true).unwrap();
        assert_eq!(fam.len(), 1);
        assert!(fam.contains(&FiniteTrace::empty()));
    }

    #[test]
    fn domain_interval_detection() {
        let contiguous = CylinderFamily::empty(vec![3, 4, 5]).unwrap();
        assert_eq!(
            contiguous.domain_interval(),
            Some(Interval::new(3, 6).unwrap())
        );
        let gappy = CylinderFamily::empty(vec![3, 5]).unwrap();
        assert_eq!(gappy.domain_interval(), None);
    }
}
