//! Finite-window filter bases: intersection checks, positivity and traces,
//! exact product factorization across a coordinate split, and the
//! interval-partition test with its greedy search.

use crate::bias::{BiasSequence, TailClass};
use crate::error::{Error, Result};
use crate::interval::IntervalPartition;
use crate::measure::trace_measure;
use crate::rational::Rational;
use crate::trace::FiniteTrace;

/// Generators of a filter on a window `[0, N)`, each a full-window trace
/// read as the set of its 1-coordinates. `margin` is the finite surrogate
/// for "modulo finite": points below it never witness an intersection, and
/// block tests tolerate that many misses.
///
/// Construction deduplicates generators but does not demand the
/// intersection property; [`fip_check`] verifies it separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterBase {
    window: u32,
    generators: Vec<FiniteTrace>,
    margin: u32,
}

impl FilterBase {
    pub fn new(window: u32, generators: Vec<FiniteTrace>, margin: u32) -> Result<Self> {
        if margin > window {
            return Err(Error::invalid(
                "base",
                format!("margin {margin} exceeds the window {window}"),
            ));
        }
        let mut deduped: Vec<FiniteTrace> = Vec::with_capacity(generators.len());
        for g in generators {
            if g.window_size() != Some(window) {
                return Err(Error::domain(format!(
                    "generator on {:?} must assign all of [0, {window})",
                    g.domain()
                )));
            }
            if !deduped.contains(&g) {
                deduped.push(g);
            }
        }
        Ok(FilterBase {
            window,
            generators: deduped,
            margin,
        })
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    pub fn generators(&self) -> &[FiniteTrace] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

fn meets_all(base: &FilterBase, extra: Option<&FiniteTrace>, coord: u32) -> bool {
    base.generators
        .iter()
        .chain(extra)
        .all(|g| g.value(coord) == Some(true))
}

/// Whether every subfamily intersection reaches `[margin, N)`. Subfamily
/// intersections contain the intersection of all generators, so that one
/// decides them all.
pub fn fip_check(base: &FilterBase) -> bool {
    (base.margin..base.window).any(|c| meets_all(base, None, c))
}

/// Whether `x` can be added to the base without killing the intersection
/// property.
pub fn is_positive(base: &FilterBase, x: &FiniteTrace) -> Result<bool> {
    if x.window_size() != Some(base.window) {
        return Err(Error::domain(format!(
            "set on {:?} must assign all of [0, {})",
            x.domain(),
            base.window
        )));
    }
    Ok((base.margin..base.window).any(|c| meets_all(base, Some(x), c)))
}

/// Restrict the base to a positive set: generators become `X ∩ Y` written in
/// the ascending enumeration of `X`, and the margin becomes the number of
/// `X`-members lost below the old one.
pub fn trace_filter(base: &FilterBase, x: &FiniteTrace) -> Result<FilterBase> {
    if !is_positive(base, x)? {
        return Err(Error::NotPositive(
            "the set meets some generator intersection only below the margin".into(),
        ));
    }
    let members = x.ones_vec();
    let new_window = members.len() as u32;
    let new_margin = members.iter().filter(|&&c| c < base.margin).count() as u32;
    let generators = base
        .generators
        .iter()
        .map(|g| {
            let ones: Vec<u32> = members
                .iter()
                .enumerate()
                .filter(|&(_, &c)| g.value(c) == Some(true))
                .map(|(j, _)| j as u32)
                .collect();
            FiniteTrace::window(new_window, &ones)
        })
        .collect::<Result<Vec<_>>>()?;
    FilterBase::new(new_window, generators, new_margin)
}

/// Measure of `t` restricted to `coords`, re-indexed along their ascending
/// enumeration and judged under the biases `p` takes there.
fn restricted_measure(p: &BiasSequence, coords: &[u32], t: &FiniteTrace) -> Result<Rational> {
    let prefix: Vec<Rational> = coords
        .iter()
        .map(|&c| p.bias_at(c))
        .collect::<Result<_>>()?;
    let sub = BiasSequence::derived(prefix, TailClass::Unspecified)?;
    let kept = t.restrict(coords);
    let reindexed = FiniteTrace::new(
        kept.domain()
            .iter()
            .map(|c| coords.binary_search(c).expect("kept coordinate") as u32)
            .collect(),
        kept.pairs().map(|(_, b)| b).collect(),
    )?;
    trace_measure(&sub, &reindexed)
}

/// Exact factorization of a cylinder's mass across a coordinate split: the
/// measure of `t` equals the product of the measures of its two halves, each
/// re-indexed and judged under the restricted bias sequence.
pub fn factorization_check(
    p: &BiasSequence,
    x: &FiniteTrace,
    t: &FiniteTrace,
) -> Result<bool> {
    let Some(window) = x.window_size() else {
        return Err(Error::domain(format!(
            "splitting set on {:?} must assign all of its window",
            x.domain()
        )));
    };
    if t.domain().iter().any(|&c| c >= window) {
        return Err(Error::domain(format!(
            "trace reaches past the window [0, {window})"
        )));
    }
    let inside = x.ones_vec();
    let outside: Vec<u32> = (0..window)
        .filter(|&c| x.value(c) == Some(false))
        .collect();
    let left = trace_measure(p, t)?;
    let right = restricted_measure(p, &inside, t)? * restricted_measure(p, &outside, t)?;
    Ok(left == right)
}

/// Block-miss report for a base against an interval partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaireReport {
    /// Per generator, the indices of blocks it fails to meet.
    pub generator_misses: Vec<Vec<usize>>,
    /// The same for each pairwise intersection, a stronger (still partial)
    /// probe of the generated filter.
    pub pair_misses: Vec<((usize, usize), Vec<usize>)>,
    /// Every generator misses at most margin-many blocks.
    pub witnesses: bool,
}

fn blocks_missed<F: Fn(u32) -> bool>(part: &IntervalPartition, inside: F) -> Vec<usize> {
    (0..part.len())
        .filter(|&n| {
            let block = part.block(n).expect("index in range");
            !block.coords().any(&inside)
        })
        .collect()
}

/// List the partition blocks each generator (and each pairwise
/// intersection) misses. The verdict is per generator only: witnesses iff
/// none misses more than margin-many blocks.
pub fn baire_check(base: &FilterBase, part: &IntervalPartition) -> Result<BaireReport> {
    if part.end() > base.window {
        return Err(Error::invalid(
            "partition",
            format!(
                "blocks reach {} but the window ends at {}",
                part.end(),
                base.window
            ),
        ));
    }
    let generator_misses: Vec<Vec<usize>> = base
        .generators
        .iter()
        .map(|g| blocks_missed(part, |c| g.value(c) == Some(true)))
        .collect();
    let mut pair_misses = Vec::new();
    for i in 0..base.generators.len() {
        for j in i + 1..base.generators.len() {
            let misses = blocks_missed(part, |c| {
                base.generators[i].value(c) == Some(true)
                    && base.generators[j].value(c) == Some(true)
            });
            pair_misses.push(((i, j), misses));
        }
    }
    let witnesses = generator_misses
        .iter()
        .all(|m| m.len() <= base.margin as usize);
    Ok(BaireReport {
        generator_misses,
        pair_misses,
        witnesses,
    })
}

/// Outcome of the greedy partition search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaireSearch {
    Witness(IntervalPartition),
    /// The block opened here never came to meet every generator.
    Exhausted { open_block_start: u32 },
}

/// Greedy left-to-right search for a partition every generator meets
/// blockwise: grow the current block until all generators reach into it,
/// cut at the earliest such point, repeat. On success every block meets
/// every generator, so the result passes [`baire_check`] with no misses.
pub fn baire_search(base: &FilterBase) -> BaireSearch {
    let mut cuts = vec![0u32];
    let mut lo = 0u32;
    while lo < base.window {
        let close = (lo..base.window).find(|&c| {
            base.generators
                .iter()
                .all(|g| (lo..=c).any(|d| g.value(d) == Some(true)))
        });
        match close {
            Some(c) => {
                cuts.push(c + 1);
                lo = c + 1;
            }
            None => return BaireSearch::Exhausted { open_block_start: lo },
        }
    }
    BaireSearch::Witness(IntervalPartition::new(cuts).expect("cuts increase from 0"))
}

/// Stock bases used throughout the tests and the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalKind<'a> {
    /// Final segments `[j, N)` for `j ≤ k_max`.
    Frechet { k_max: u32 },
    /// The least transversal of row `level` of the grid: one point at the
    /// start of each block, generating sets that meet every block there.
    GridHitting {
        grid: &'a [IntervalPartition],
        level: usize,
    },
}

pub fn canonical_filter(kind: CanonicalKind<'_>, window: u32) -> Result<FilterBase> {
    match kind {
        CanonicalKind::Frechet { k_max } => {
            if k_max >= window {
                return Err(Error::invalid(
                    "base",
                    format!("final segment start {k_max} leaves [0, {window})"),
                ));
            }
            let generators = (0..=k_max)
                .map(|j| FiniteTrace::window(window, &(j..window).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            FilterBase::new(window, generators, 1)
        }
        CanonicalKind::GridHitting { grid, level } => {
            let Some(row) = grid.get(level) else {
                return Err(Error::invalid(
                    "grid",
                    format!("level {level} of a {}-row grid", grid.len()),
                ));
            };
            if row.is_empty() {
                return Err(Error::invalid("grid", "row has no blocks"));
            }
            if row.end() > window {
                return Err(Error::invalid(
                    "grid",
                    format!("row reaches {} past the window {window}", row.end()),
                ));
            }
            let transversal: Vec<u32> = row.blocks().map(|b| b.start()).collect();
            let generator = FiniteTrace::window(window, &transversal)?;
            FilterBase::new(window, vec![generator], 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multiples(step: u32, window: u32) -> FiniteTrace {
        FiniteTrace::window(window, &(0..window).step_by(step as usize).collect::<Vec<_>>())
            .unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn intersection_property() {
        let base = FilterBase::new(24, vec![multiples(2, 24), multiples(3, 24)], 0).unwrap();
        assert!(fip_check(&base));
        let odds = FiniteTrace::window(8, &[1, 3, 5, 7]).unwrap();
        let clash = FilterBase::new(8, vec![multiples(2, 8), odds], 0).unwrap();
        assert!(!fip_check(&clash));
        let full = FilterBase::new(8, vec![multiples(1, 8)], 0).unwrap();
        assert!(fip_check(&full));
        // The margin can starve an otherwise fine base.
        let late = FilterBase::new(4, vec![multiples(2, 4)], 3).unwrap();
        assert!(!fip_check(&late));
    }

    #[test]
    fn base_construction() {
        let base = FilterBase::new(8, vec![multiples(2, 8), multiples(2, 8)], 1).unwrap();
        assert_eq!(base.len(), 1);
        let short = FiniteTrace::window(4, &[0]).unwrap();
        assert!(FilterBase::new(8, vec![short], 0).is_err());
        assert!(FilterBase::new(4, vec![], 5).is_err());
    }

    #[test]
    fn positivity() {
        let base = FilterBase::new(8, vec![multiples(2, 8)], 0).unwrap();
        let odds = FiniteTrace::window(8, &[1, 3, 5, 7]).unwrap();
        assert!(!is_positive(&base, &odds).unwrap());
        let evens = multiples(2, 8);
        assert!(is_positive(&base, &evens).unwrap());
        let base = FilterBase::new(24, vec![multiples(2, 24)], 0).unwrap();
        assert!(is_positive(&base, &multiples(3, 24)).unwrap());
    }

    #[test]
    fn traced_base_reindexes() {
        let base = FilterBase::new(24, vec![multiples(2, 24)], 0).unwrap();
        let traced = trace_filter(&base, &multiples(3, 24)).unwrap();
        // X = {0,3,...,21}; X ∩ evens = {0,6,12,18} sits at positions
        // 0,2,4,6 of X.
        assert_eq!(traced.window(), 8);
        assert_eq!(traced.generators()[0].ones_vec(), vec![0, 2, 4, 6]);
        assert!(fip_check(&traced));

        let full = multiples(1, 24);
        let same = trace_filter(&base, &full).unwrap();
        assert_eq!(same.generators()[0], base.generators()[0]);
        assert_eq!(same.margin(), base.margin());

        let odds = FiniteTrace::window(24, &(0..24).filter(|c| c % 2 == 1).collect::<Vec<_>>())
            .unwrap();
        assert!(matches!(
            trace_filter(&base, &odds).unwrap_err(),
            Error::NotPositive(_)
        ));
    }

    #[test]
    fn margin_rederivation_counts_lost_points() {
        let base = FilterBase::new(8, vec![multiples(1, 8)], 4).unwrap();
        let x = FiniteTrace::window(8, &[1, 5, 6, 7]).unwrap();
        let traced = trace_filter(&base, &x).unwrap();
        // Only the member 1 sits below the old margin.
        assert_eq!(traced.margin(), 1);
        assert_eq!(traced.window(), 4);
    }

    #[test]
    fn factorization_is_exact() {
        let p = BiasSequence::new(vec![r(1, 4), r(1, 3), r(1, 2), r(2, 5)], TailClass::Unspecified)
            .unwrap();
        let t = FiniteTrace::from_bit_string(vec![0, 1, 3], "101").unwrap();
        let empty = FiniteTrace::window(4, &[]).unwrap();
        assert!(factorization_check(&p, &empty, &t).unwrap());
        let all = FiniteTrace::window(4, &[0, 1, 2, 3]).unwrap();
        assert!(factorization_check(&p, &all, &t).unwrap());
        let split = FiniteTrace::window(4, &[1, 2]).unwrap();
        assert!(factorization_check(&p, &split, &t).unwrap());
        // A trace reaching past the split window is refused.
        let long = FiniteTrace::from_bit_string(vec![5], "1").unwrap();
        assert!(factorization_check(&p, &split, &long).is_err());
        let gappy = FiniteTrace::from_bit_string(vec![0, 2], "10").unwrap();
        assert!(factorization_check(&p, &gappy, &t).is_err());
    }

    #[test]
    fn block_misses() {
        // Fréchet base: one block below 3 is fine once it reaches past it.
        let base = canonical_filter(CanonicalKind::Frechet { k_max: 3 }, 8).unwrap();
        let part = IntervalPartition::new(vec![0, 4, 8]).unwrap();
        let report = baire_check(&base, &part).unwrap();
        assert!(report.witnesses);
        assert!(report.generator_misses.iter().all(|m| m.is_empty()));

        let evens = FilterBase::new(8, vec![multiples(2, 8)], 1).unwrap();
        let singletons = IntervalPartition::new((0..=8).collect()).unwrap();
        let report = baire_check(&evens, &singletons).unwrap();
        assert_eq!(report.generator_misses[0], vec![1, 3, 5, 7]);
        assert!(!report.witnesses);

        let pairs = IntervalPartition::new(vec![0, 2, 4, 6, 8]).unwrap();
        let report = baire_check(&evens, &pairs).unwrap();
        assert!(report.generator_misses[0].is_empty());
        assert!(report.witnesses);

        let too_wide = IntervalPartition::new(vec![0, 9]).unwrap();
        assert!(baire_check(&evens, &too_wide).is_err());
    }

    #[test]
    fn pair_probe_is_stronger() {
        let a = multiples(2, 8);
        let b = FiniteTrace::window(8, &[0, 2, 5, 7]).unwrap();
        let base = FilterBase::new(8, vec![a, b], 1).unwrap();
        let pairs = IntervalPartition::new(vec![0, 2, 4, 6, 8]).unwrap();
        let report = baire_check(&base, &pairs).unwrap();
        // Each generator alone meets every block, but their intersection
        // {0, 2} dries up past the second.
        assert!(report.witnesses);
        assert_eq!(report.pair_misses, vec![((0, 1), vec![2, 3])]);
    }

    #[test]
    fn greedy_search() {
        // Points at the pair ends close each block exactly at the pair.
        let alternating = FiniteTrace::window(8, &[1, 3, 5, 7]).unwrap();
        let base = FilterBase::new(8, vec![alternating], 1).unwrap();
        match baire_search(&base) {
            BaireSearch::Witness(part) => {
                assert_eq!(part.cuts(), &[0, 2, 4, 6, 8]);
                let report = baire_check(&base, &part).unwrap();
                assert!(report.witnesses);
                assert!(report.generator_misses.iter().all(|m| m.is_empty()));
            }
            other => panic!("expected a witness, got {other:?}"),
        }

        // Points at the pair starts strand the last coordinate: blocks close
        // right after each hit and [7, 8) has nothing left to meet.
        let evens = FilterBase::new(8, vec![multiples(2, 8)], 1).unwrap();
        assert_eq!(
            baire_search(&evens),
            BaireSearch::Exhausted { open_block_start: 7 }
        );

        let full = FilterBase::new(4, vec![multiples(1, 4)], 0).unwrap();
        match baire_search(&full) {
            BaireSearch::Witness(part) => assert_eq!(part.cuts(), &[0, 1, 2, 3, 4]),
            other => panic!("expected singletons, got {other:?}"),
        }

        // A generator living in the upper half forces one giant first block.
        let upper = FiniteTrace::window(8, &[4, 5, 6, 7]).unwrap();
        let base = FilterBase::new(8, vec![upper], 1).unwrap();
        match baire_search(&base) {
            BaireSearch::Witness(part) => assert_eq!(part.cuts(), &[0, 5, 6, 7, 8]),
            other => panic!("expected a witness, got {other:?}"),
        }

        let empty = FiniteTrace::window(4, &[]).unwrap();
        let base = FilterBase::new(4, vec![empty], 0).unwrap();
        assert_eq!(
            baire_search(&base),
            BaireSearch::Exhausted { open_block_start: 0 }
        );
    }

    #[test]
    fn canonical_bases() {
        let frechet = canonical_filter(CanonicalKind::Frechet { k_max: 2 }, 8).unwrap();
        assert_eq!(frechet.len(), 3);
        assert_eq!(frechet.generators()[0].ones_vec().len(), 8);
        assert_eq!(frechet.generators()[2].ones_vec(), (2..8).collect::<Vec<_>>());
        let single = canonical_filter(CanonicalKind::Frechet { k_max: 0 }, 8).unwrap();
        assert_eq!(single.len(), 1);
        assert!(canonical_filter(CanonicalKind::Frechet { k_max: 8 }, 8).is_err());

        let grid = vec![IntervalPartition::new(vec![0, 2, 5]).unwrap()];
        let base =
            canonical_filter(CanonicalKind::GridHitting { grid: &grid, level: 0 }, 8).unwrap();
        assert_eq!(base.generators()[0].ones_vec(), vec![0, 2]);
        // The transversal meets every block of its own row.
        let report = baire_check(&base, &grid[0]).unwrap();
        assert!(report.generator_misses[0].is_empty());

        assert!(
            canonical_filter(CanonicalKind::GridHitting { grid: &grid, level: 1 }, 8).is_err()
        );
        let wide = vec![IntervalPartition::new(vec![0, 9]).unwrap()];
        assert!(canonical_filter(CanonicalKind::GridHitting { grid: &wide, level: 0 }, 8).is_err());
    }
}
