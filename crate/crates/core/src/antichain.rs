//! Stagewise antichain families: upward kernels of cylinder families, the
//! minimal supports that generate them, the stage-hit map and its image
//! filter, and the pigeonhole escape test for sparse witnesses.

use std::collections::BTreeSet;

use crate::bias::BiasSequence;
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalPartition};
use crate::measure::hit_measure;
use crate::rational::Rational;
use crate::trace::{check_cap, CylinderFamily, FiniteTrace};

/// One stage: a support interval and an antichain of nonempty subsets of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntichainStage {
    interval: Interval,
    members: Vec<Vec<u32>>,
}

impl AntichainStage {
    /// Members are normalized to sorted coordinate lists and ordered
    /// lexicographically; empty members, coordinates off the interval, and
    /// subset pairs (duplicates included) are rejected.
    pub fn new(interval: Interval, members: Vec<Vec<u32>>) -> Result<Self> {
        let mut normalized: Vec<Vec<u32>> = Vec::with_capacity(members.len());
        for member in members {
            let set: BTreeSet<u32> = member.into_iter().collect();
            if set.is_empty() {
                return Err(Error::invalid("stage", "members must be nonempty"));
            }
            if let Some(&c) = set.iter().find(|&&c| !interval.contains(c)) {
                return Err(Error::invalid(
                    "stage",
                    format!("member coordinate {c} lies outside {interval}"),
                ));
            }
            normalized.push(set.into_iter().collect());
        }
        normalized.sort();
        for i in 0..normalized.len() {
            for j in 0..normalized.len() {
                if i != j && is_subset(&normalized[i], &normalized[j]) {
                    return Err(Error::invalid(
                        "stage",
                        format!(
                            "member {:?} absorbs {:?}; stages must be antichains",
                            normalized[j], normalized[i]
                        ),
                    ));
                }
            }
        }
        Ok(AntichainStage {
            interval,
            members: normalized,
        })
    }

    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn members(&self) -> &[Vec<u32>] {
        &self.members
    }

    /// Largest coordinate appearing in any member; None when empty.
    pub fn growth_bound(&self) -> Option<u32> {
        self.members.iter().filter_map(|m| m.last().copied()).max()
    }

    fn min_coord(&self) -> Option<u32> {
        self.members.iter().filter_map(|m| m.first().copied()).min()
    }

    /// Whether some member is contained in the 1-set of `x`.
    fn caught(&self, x: &FiniteTrace) -> bool {
        self.members
            .iter()
            .any(|m| m.iter().all(|&c| x.value(c) == Some(true)))
    }
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    a.iter().all(|c| b.binary_search(c).is_ok())
}

/// Disjointly supported stages with their hit weights. A point belongs to
/// stage `n` when some member of that stage sits inside its 1-set.
#[derive(Debug, Clone, PartialEq)]
pub struct AntichainFamily {
    stages: Vec<AntichainStage>,
    weights: Vec<Rational>,
    tail_bound: Rational,
}

impl AntichainFamily {
    pub fn new(
        stages: Vec<AntichainStage>,
        tail_bound: Rational,
        p: &BiasSequence,
        cap: usize,
    ) -> Result<Self> {
        let weights = stage_weights(&stages, p, cap)?;
        Self::assemble(stages, weights, tail_bound)
    }

    /// Rebuild with externally declared weights, each recomputed and checked.
    pub fn from_parts(
        stages: Vec<AntichainStage>,
        weights: Vec<Rational>,
        tail_bound: Rational,
        p: &BiasSequence,
        cap: usize,
    ) -> Result<Self> {
        let measured = stage_weights(&stages, p, cap)?;
        if weights.len() != measured.len() {
            return Err(Error::invalid(
                "family",
                format!("{} weights for {} stages", weights.len(), measured.len()),
            ));
        }
        for (n, (claimed, actual)) in weights.iter().zip(&measured).enumerate() {
            if claimed != actual {
                return Err(Error::StageBound {
                    stage: n,
                    detail: format!(
                        "declared weight {claimed} but the stage hits measure {actual}"
                    ),
                });
            }
        }
        Self::assemble(stages, weights, tail_bound)
    }

    fn assemble(
        stages: Vec<AntichainStage>,
        weights: Vec<Rational>,
        tail_bound: Rational,
    ) -> Result<Self> {
        if tail_bound.is_negative() {
            return Err(Error::invalid("family", "tail bound must be nonnegative"));
        }
        for i in 0..stages.len() {
            for j in i + 1..stages.len() {
                if stages[i].interval.overlaps(&stages[j].interval) {
                    return Err(Error::invalid(
                        "family",
                        format!(
                            "stages {i} and {j} share coordinates: {} and {}",
                            stages[i].interval, stages[j].interval
                        ),
                    ));
                }
            }
        }
        Ok(AntichainFamily {
            stages,
            weights,
            tail_bound,
        })
    }

    pub fn stages(&self) -> &[AntichainStage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stage(&self, n: usize) -> &AntichainStage {
        &self.stages[n]
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn tail_bound(&self) -> &Rational {
        &self.tail_bound
    }

    /// Least window length under which every stage can be judged.
    pub fn window_needed(&self) -> u32 {
        self.stages.iter().map(|s| s.interval.end()).max().unwrap_or(0)
    }
}

fn stage_weights(
    stages: &[AntichainStage],
    p: &BiasSequence,
    cap: usize,
) -> Result<Vec<Rational>> {
    stages
        .iter()
        .map(|s| hit_measure(p, &s.members, &s.interval.coords_vec(), cap))
        .collect()
}

/// The members of `j` all of whose coordinatewise enlargements stay in `j`:
/// keep `s` exactly when every `u` with `s⁻¹(1) ⊆ u⁻¹(1)` also lies in `j`.
pub fn upward_kernel(j: &CylinderFamily, cap: usize) -> Result<CylinderFamily> {
    let width = j.domain().len();
    check_cap(width, cap)?;
    let size = 1usize << width;
    // A mask is good iff it is in j and all one-bit enlargements are good;
    // enlargements are numerically larger, so one descending pass suffices.
    let mut good = vec![false; size];
    for s in (0..size).rev() {
        if !j.contains_mask(s as u64) {
            continue;
        }
        good[s] = (0..width).all(|b| s & (1 << b) != 0 || good[s | (1 << b)]);
    }
    CylinderFamily::from_masks(
        j.domain().to_vec(),
        (0..size).filter(|&s| good[s]).map(|s| s as u64),
    )
}

/// All enlargements of members of `j` within its domain.
pub fn upward_closure(j: &CylinderFamily, cap: usize) -> Result<CylinderFamily> {
    let width = j.domain().len();
    check_cap(width, cap)?;
    let size = 1usize << width;
    let mut reached = vec![false; size];
    for u in 0..size {
        reached[u] = j.contains_mask(u as u64)
            || (0..width).any(|b| u & (1 << b) != 0 && reached[u & !(1 << b)]);
    }
    CylinderFamily::from_masks(
        j.domain().to_vec(),
        (0..size).filter(|&u| reached[u]).map(|u| u as u64),
    )
}

/// Identify each trace with its 1-set and keep the ⊆-minimal supports,
/// ordered lexicographically.
// The subset test below is not an equality search; clippy misreads it.
#[allow(clippy::manual_contains)]
pub fn minimal_antichain(j_prime: &CylinderFamily) -> Vec<Vec<u32>> {
    let mut masks: Vec<u64> = j_prime.masks().collect();
    masks.sort_by_key(|m| m.count_ones());
    // Any member contains a minimal member of no greater weight, so testing
    // against the kept list is enough.
    let mut minimal: Vec<u64> = Vec::new();
    for &m in &masks {
        if !minimal.iter().any(|&kept| kept & m == kept) {
            minimal.push(m);
        }
    }
    let domain = j_prime.domain();
    let mut supports: Vec<Vec<u32>> = minimal
        .iter()
        .map(|&m| {
            (0..domain.len())
                .filter(|&j| m >> j & 1 == 1)
                .map(|j| domain[j])
                .collect()
        })
        .collect();
    supports.sort();
    supports
}

/// Stage indices whose antichain reaches into the 1-set of `x`.
pub fn support(x: &FiniteTrace, fam: &AntichainFamily) -> Result<BTreeSet<usize>> {
    let mut hit = BTreeSet::new();
    for (n, stage) in fam.stages().iter().enumerate() {
        if !x.covers_interval(*stage.interval()) {
            return Err(Error::WindowTooShort(format!(
                "stage {n} needs every coordinate of {}",
                stage.interval()
            )));
        }
        if stage.caught(x) {
            hit.insert(n);
        }
    }
    Ok(hit)
}

/// Image of the base under `support`, deduplicated in first-seen order.
pub fn star_image(
    base: &[FiniteTrace],
    fam: &AntichainFamily,
) -> Result<Vec<BTreeSet<usize>>> {
    let mut image: Vec<BTreeSet<usize>> = Vec::new();
    for x in base {
        let supp = support(x, fam)?;
        if !image.contains(&supp) {
            image.push(supp);
        }
    }
    Ok(image)
}

/// Whether `x` lies in the `start`-tail of the staged cover: every partition
/// block of stage indices from `start` on must contain a stage `x` hits.
pub fn fsigma_filter_cover(
    fam: &AntichainFamily,
    stage_partition: &IntervalPartition,
    x: &FiniteTrace,
    start: usize,
) -> Result<bool> {
    if stage_partition.end() as usize != fam.len() {
        return Err(Error::invalid(
            "partition",
            format!(
                "blocks end at stage {} but the family lists {}",
                stage_partition.end(),
                fam.len()
            ),
        ));
    }
    let hits = support(x, fam)?;
    for m in start..stage_partition.len() {
        let block = stage_partition.block(m).expect("index in range");
        if !block.coords().any(|k| hits.contains(&(k as usize))) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Normalization and escape report for a witness against a staged family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RapidReport {
    /// All normalization checks passed.
    pub normalized: bool,
    pub violations: Vec<String>,
    /// Per-stage largest member coordinate; None for an empty stage.
    pub growth: Vec<Option<u32>>,
    /// `z` keeps at most `n` ones at or below each stage's growth bound.
    pub rapid: bool,
    pub hits: BTreeSet<usize>,
    /// Normalized and rapid together force the hit set empty.
    pub escape_guaranteed: bool,
}

/// Check the sparseness escape: a stage whose members all have more than `n`
/// elements, none past its growth bound, cannot be hit by a witness with at
/// most `n` ones up to that bound. Normalization failures are reported, not
/// thrown; only an undersized witness window is an error.
///
/// Stage measures are judged under the uniform bias regardless of the
/// weights the family was built with.
pub fn rapid_escape(
    fam: &AntichainFamily,
    z: &FiniteTrace,
    cap: usize,
) -> Result<RapidReport> {
    let needed = fam.window_needed();
    if needed > 0 && !z.covers_interval(Interval::new(0, needed)?) {
        return Err(Error::WindowTooShort(format!(
            "witness must assign all of [0, {needed})"
        )));
    }
    let uniform = BiasSequence::uniform();
    let two = Rational::from_int(2);
    let mut violations = Vec::new();
    for (n, stage) in fam.stages().iter().enumerate() {
        let budget = two.pow(-(n as i32 + 1));
        let weight = hit_measure(&uniform, stage.members(), &stage.interval().coords_vec(), cap)?;
        if weight >= budget {
            violations.push(format!(
                "stage {n} weighs {weight} under the uniform bias, not below {budget}"
            ));
        }
        if let Some(member) = stage.members().iter().find(|m| m.len() < n + 1) {
            violations.push(format!(
                "stage {n} member {member:?} has fewer than {} elements",
                n + 1
            ));
        }
        for m in 0..=n {
            let (Some(hi), Some(lo)) = (stage.growth_bound(), fam.stage(m).min_coord()) else {
                continue;
            };
            if hi < lo {
                violations.push(format!(
                    "stage {n} tops out at {hi}, below the floor {lo} of stage {m}"
                ));
            }
        }
    }
    let growth: Vec<Option<u32>> = fam.stages().iter().map(|s| s.growth_bound()).collect();
    let ones = z.ones_vec();
    let rapid = growth.iter().enumerate().all(|(n, f)| match f {
        // Count ones at or below the bound: a member peaking at f occupies
        // [0, f] entirely, so the inclusive window is the one that pinches.
        Some(f) => ones.iter().filter(|&&c| c <= *f).count() <= n,
        None => true,
    });
    let hits = support(z, fam)?;
    let normalized = violations.is_empty();
    let escape_guaranteed = normalized && rapid;
    debug_assert!(!escape_guaranteed || hits.is_empty());
    Ok(RapidReport {
        normalized,
        violations,
        growth,
        rapid,
        hits,
        escape_guaranteed,
    })
}

/// A canonical rapid witness: one fresh point just past each stage's growth
/// bound. Earlier stages contribute at most one point each below any later
/// bound, so the counting condition holds with room to spare.
pub fn greedy_rapid_witness(fam: &AntichainFamily, window: u32) -> Result<FiniteTrace> {
    let mut ones: BTreeSet<u32> = BTreeSet::new();
    for stage in fam.stages() {
        if let Some(f) = stage.growth_bound() {
            ones.insert(f + 1);
        }
    }
    let needed = fam.window_needed();
    let past = ones.iter().next_back().map_or(0, |&c| c + 1);
    if window < needed.max(past) {
        return Err(Error::WindowTooShort(format!(
            "window {window} cannot hold a point at {}",
            needed.max(past).saturating_sub(1)
        )));
    }
    let ones: Vec<u32> = ones.into_iter().collect();
    FiniteTrace::window(window, &ones)
}
