//! Staged covers over coordinate intervals: hit bookkeeping, splitting a
//! level-indexed cover into two interval-staged covers, heavy-prefix
//! refinement against a witness, and conversion of staged closed sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::bias::BiasSequence;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::family_measure;
use crate::rational::Rational;
use crate::trace::{check_cap, CylinderFamily, FiniteTrace};

/// Cover by stages `(I_n, J_n)`: a point is caught at stage `n` when its
/// restriction to the interval `I_n` lands in the family `J_n`. At finite
/// scale the cover is the listed stages plus a bound on the weight of
/// everything beyond them.
#[derive(Clone, PartialEq)]
pub struct SmallCover {
    stages: Vec<(Interval, CylinderFamily)>,
    weights: Vec<Rational>,
    tail_bound: Rational,
    certified: bool,
}

impl SmallCover {
    /// Build from stages, measuring each stage family under `p`.
    pub fn new(
        stages: Vec<(Interval, CylinderFamily)>,
        tail_bound: Rational,
        p: &BiasSequence,
        cap: usize,
    ) -> Result<Self> {
        let weights = measured_weights(&stages, p, cap)?;
        Self::assemble(stages, weights, tail_bound, true)
    }

    /// Rebuild a cover whose weights were declared externally; every claimed
    /// weight is recomputed and must match exactly.
    pub fn from_parts(
        stages: Vec<(Interval, CylinderFamily)>,
        weights: Vec<Rational>,
        tail_bound: Rational,
        certified: bool,
        p: &BiasSequence,
        cap: usize,
    ) -> Result<Self> {
        let measured = measured_weights(&stages, p, cap)?;
        if weights.len() != measured.len() {
            return Err(Error::invalid(
                "cover",
                format!("{} weights for {} stages", weights.len(), measured.len()),
            ));
        }
        for (k, (claimed, actual)) in weights.iter().zip(&measured).enumerate() {
            if claimed != actual {
                return Err(Error::StageBound {
                    stage: k,
                    detail: format!(
                        "declared weight {claimed} but the stage family measures {actual}"
                    ),
                });
            }
        }
        Self::assemble(stages, weights, tail_bound, certified)
    }

    fn assemble(
        stages: Vec<(Interval, CylinderFamily)>,
        weights: Vec<Rational>,
        tail_bound: Rational,
        certified: bool,
    ) -> Result<Self> {
        if tail_bound.is_negative() {
            return Err(Error::invalid("cover", "tail bound must be nonnegative"));
        }
        for (k, (iv, fam)) in stages.iter().enumerate() {
            if fam.domain() != iv.coords_vec().as_slice() {
                return Err(Error::invalid(
                    "cover",
                    format!("stage {k} family must live exactly on {iv}"),
                ));
            }
            if k > 0 && stages[k - 1].0.end() > iv.start() {
                return Err(Error::invalid(
                    "cover",
                    format!("stage {k} interval {iv} overlaps or precedes its predecessor"),
                ));
            }
        }
        Ok(SmallCover {
            stages,
            weights,
            tail_bound,
            certified,
        })
    }

    pub fn stages(&self) -> &[(Interval, CylinderFamily)] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn interval(&self, k: usize) -> &Interval {
        &self.stages[k].0
    }

    pub fn family(&self, k: usize) -> &CylinderFamily {
        &self.stages[k].1
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn tail_bound(&self) -> &Rational {
        &self.tail_bound
    }

    /// Whether every bound this cover was built under actually held.
    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn with_certified(mut self, certified: bool) -> Self {
        self.certified = certified;
        self
    }
}

impl fmt::Debug for SmallCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmallCover[")?;
        for (k, (iv, fam)) in self.stages.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{iv}:{}@{}", fam.len(), self.weights[k])?;
        }
        write!(f, "; tail {}]", self.tail_bound)
    }
}

fn measured_weights(
    stages: &[(Interval, CylinderFamily)],
    p: &BiasSequence,
    cap: usize,
) -> Result<Vec<Rational>> {
    stages.iter().map(|(_, fam)| family_measure(p, fam, cap)).collect()
}

/// Cover indexed by prefix length: level `j` holds a family of traces on
/// `[0, j)`, and a point is caught at level `j` when its length-`j` prefix is
/// listed there.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCover {
    levels: BTreeMap<u32, CylinderFamily>,
    weights: BTreeMap<u32, Rational>,
    tail_bound: Rational,
}

impl PrefixCover {
    pub fn new(
        levels: BTreeMap<u32, CylinderFamily>,
        tail_bound: Rational,
        p: &BiasSequence,
        cap: usize,
    ) -> Result<Self> {
        if tail_bound.is_negative() {
            return Err(Error::invalid("cover", "tail bound must be nonnegative"));
        }
        let mut weights = BTreeMap::new();
        for (&j, fam) in &levels {
            let expected: Vec<u32> = (0..j).collect();
            if fam.domain() != expected.as_slice() {
                return Err(Error::invalid(
                    "cover",
                    format!("level {j} family must live on [0, {j})"),
                ));
            }
            weights.insert(j, family_measure(p, fam, cap)?);
        }
        Ok(PrefixCover {
            levels,
            weights,
            tail_bound,
        })
    }

    pub fn level(&self, j: u32) -> Option<&CylinderFamily> {
        self.levels.get(&j)
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, &CylinderFamily)> {
        self.levels.iter().map(|(&j, f)| (j, f))
    }

    pub fn weight(&self, j: u32) -> Option<&Rational> {
        self.weights.get(&j)
    }

    pub fn tail_bound(&self) -> &Rational {
        &self.tail_bound
    }

    pub fn max_level(&self) -> Option<u32> {
        self.levels.keys().next_back().copied()
    }

    /// Sum of listed level weights at or beyond `from`, plus the tail bound.
    pub fn tail_weight_from(&self, from: u32) -> Rational {
        self.weights.range(from..).map(|(_, w)| w).sum::<Rational>() + &self.tail_bound
    }
}

/// Positive thresholds fed one per stage into the splitting recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    terms: Vec<Rational>,
    tail_bound: Rational,
}

impl EpsilonSchedule {
    pub fn new(terms: Vec<Rational>, tail_bound: Rational) -> Result<Self> {
        if terms.iter().any(|t| !t.is_positive()) {
            return Err(Error::NotPositive(
                "every schedule term must be strictly positive".into(),
            ));
        }
        if tail_bound.is_negative() {
            return Err(Error::invalid("schedule", "tail bound must be nonnegative"));
        }
        Ok(EpsilonSchedule { terms, tail_bound })
    }

    /// `first, first*ratio, ...` for `len` terms, with the exact remaining
    /// geometric sum as the tail bound.
    pub fn geometric(first: Rational, ratio: Rational, len: usize) -> Result<Self> {
        if !first.is_positive() {
            return Err(Error::NotPositive("first term must be positive".into()));
        }
        if !ratio.is_positive() || ratio >= Rational::one() {
            return Err(Error::invalid("schedule", "ratio must lie in (0, 1)"));
        }
        let mut terms = Vec::with_capacity(len);
        let mut cur = first;
        for _ in 0..len {
            terms.push(cur.clone());
            cur = cur * &ratio;
        }
        // cur is now first*ratio^len; remaining sum is cur/(1-ratio).
        let tail_bound = cur / (Rational::one() - &ratio);
        Ok(EpsilonSchedule { terms, tail_bound })
    }

    pub fn terms(&self) -> &[Rational] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&Rational> {
        self.terms.get(k)
    }

    pub fn tail_bound(&self) -> &Rational {
        &self.tail_bound
    }

    /// Sum of the terms at index `from` onward, plus the tail bound.
    pub fn remaining(&self, from: usize) -> Rational {
        self.terms.iter().skip(from).sum::<Rational>() + &self.tail_bound
    }
}

/// Indices of the stages whose interval restriction of `x` lands in the
/// stage family.
pub fn stage_hits(x: &FiniteTrace, cover: &SmallCover) -> Result<BTreeSet<usize>> {
    let mut hits = BTreeSet::new();
    for (k, (iv, fam)) in cover.stages().iter().enumerate() {
        if !x.covers_interval(*iv) {
            return Err(Error::WindowTooShort(format!(
                "stage {k} needs every coordinate of {iv}"
            )));
        }
        if fam.contains(&x.restrict_interval(*iv)) {
            hits.insert(k);
        }
    }
    Ok(hits)
}

/// Exact upper bound on the mass of points hitting any stage at or beyond
/// `from_stage`: the listed weights from there on plus the tail bound.
pub fn borel_cantelli_bound(cover: &SmallCover, from_stage: usize) -> Rational {
    let listed: Rational = cover.weights().iter().skip(from_stage).sum();
    listed + cover.tail_bound()
}

/// Collect basic-open generators (each assigning an initial segment) into a
/// prefix cover, grouping by generator length across all opens.
pub fn prefix_from_open_cover(
    opens: &[Vec<FiniteTrace>],
    p: &BiasSequence,
    cap: usize,
) -> Result<PrefixCover> {
    let mut by_level: BTreeMap<u32, BTreeSet<u64>> = BTreeMap::new();
    for (g, generators) in opens.iter().enumerate() {
        for s in generators {
            let Some(len) = s.window_size() else {
                return Err(Error::domain(format!(
                    "open set {g} has a generator on {:?}; generators must assign an initial segment",
                    s.domain()
                )));
            };
            by_level.entry(len).or_default().insert(s.mask()?);
        }
    }
    let mut levels = BTreeMap::new();
    for (len, masks) in by_level {
        let domain: Vec<u32> = (0..len).collect();
        levels.insert(len, CylinderFamily::from_masks(domain, masks)?);
    }
    PrefixCover::new(levels, Rational::zero(), p, cap)
}

/// Which of the two produced covers a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverSide {
    A,
    B,
}

/// Where the cut search ran out of window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exhaustion {
    pub stage: usize,
    pub side: CoverSide,
}

/// Measured weight of one produced stage next to the bound it must satisfy;
/// `bound` is absent for the one stage the construction leaves unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLedgerEntry {
    pub stage: usize,
    pub weight: Rational,
    pub bound: Option<Rational>,
}

/// A level whose agreement domain came out empty and was skipped: matching
/// everything would be vacuous, so the level is recorded instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedAgreement {
    pub side: CoverSide,
    pub stage: usize,
    pub level: u32,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub cover_a: SmallCover,
    pub cover_b: SmallCover,
    /// Interval boundaries of cover A's stages.
    pub a_cuts: Vec<u32>,
    /// Interval boundaries of cover B's stages.
    pub b_cuts: Vec<u32>,
    pub ledger_a: Vec<StageLedgerEntry>,
    pub ledger_b: Vec<StageLedgerEntry>,
    pub rejected: Vec<RejectedAgreement>,
    pub certified: bool,
    pub exhausted: Option<Exhaustion>,
    /// Levels of the input cover remain beyond the last cut.
    pub schedule_truncated: bool,
}

/// Running products `q(n) = ∏_{i<n} p_i^{-1}`: the factor by which dropping
/// the first `n` coordinates of a cylinder can inflate its measure.
struct Normalizer<'a> {
    p: &'a BiasSequence,
    values: Vec<Rational>,
}

impl<'a> Normalizer<'a> {
    fn new(p: &'a BiasSequence) -> Self {
        Normalizer {
            p,
            values: vec![Rational::one()],
        }
    }

    fn get(&mut self, n: u32) -> Result<Rational> {
        while self.values.len() <= n as usize {
            let i = (self.values.len() - 1) as u32;
            let pi = self.p.bias_at(i)?;
            if pi.is_zero() {
                return Err(Error::domain(format!(
                    "bias 0 at coordinate {i} cannot be inverted"
                )));
            }
            let next = self.values.last().unwrap() / pi;
            self.values.push(next);
        }
        Ok(self.values[n as usize].clone())
    }
}

fn find_cut(
    prefix: &PrefixCover,
    normalizer: &Rational,
    eps_k: &Rational,
    after: u32,
    window: u32,
) -> Option<u32> {
    (after + 1..=window).find(|&u| normalizer * prefix.tail_weight_from(u) < *eps_k)
}

/// Stage family over `iv` matching some listed trace: a member agrees with a
/// trace of level `i ∈ levels` on `[iv.start, i)` and is free elsewhere.
fn agreement_family(
    prefix: &PrefixCover,
    iv: Interval,
    levels: (u32, u32),
    side: CoverSide,
    stage: usize,
    rejected: &mut Vec<RejectedAgreement>,
    cap: usize,
) -> Result<CylinderFamily> {
    let width = iv.len();
    check_cap(width, cap)?;
    let mut masks = BTreeSet::new();
    for i in levels.0..levels.1 {
        let Some(f) = prefix.level(i) else { continue };
        if f.is_empty() {
            continue;
        }
        if i <= iv.start() {
            // Empty agreement domain; a vacuous match would put every trace
            // in the family, so skip the level and record it.
            rejected.push(RejectedAgreement { side, stage, level: i });
            continue;
        }
        let fixed_width = (i.min(iv.end()) - iv.start()) as usize;
        let free_width = width - fixed_width;
        let fixed_selector = (1u64 << fixed_width) - 1;
        for t_mask in f.masks() {
            let fixed = (t_mask >> iv.start()) & fixed_selector;
            for extension in 0..1u64 << free_width {
                masks.insert(fixed | (extension << fixed_width));
            }
        }
    }
    CylinderFamily::from_masks(iv.coords_vec(), masks)
}

/// Split a prefix cover into two staged covers with interleaved interval
/// supports, so that every prefix hit becomes a stage hit on one of the two
/// sides. Cut positions come from a min-recursion driven by the schedule:
/// each search takes the least coordinate where the normalized remaining
/// level weight drops below the stage's term.
///
/// Produced stage weights are measured exactly and checked against the
/// schedule: stage `k` of cover A against `ε_k`, stage `k ≥ 1` of cover B
/// against `ε_{k−1}` (its agreement levels were cut under that term; stage 0
/// of B has no bound). The result is certified when no search exhausted the
/// window and every checked bound held.
pub fn decompose_null_cover(
    prefix: &PrefixCover,
    eps: &EpsilonSchedule,
    p: &BiasSequence,
    window: u32,
    cap: usize,
) -> Result<Decomposition> {
    let mut norm = Normalizer::new(p);
    let mut a_cuts = vec![0u32];
    let mut b_cuts = vec![0u32];
    let mut exhausted = None;
    for (k, eps_k) in eps.terms().iter().enumerate() {
        let n_k = *a_cuts.last().unwrap();
        let qa = norm.get(n_k)?;
        let Some(m_next) = find_cut(prefix, &qa, eps_k, n_k, window) else {
            exhausted = Some(Exhaustion {
                stage: k,
                side: CoverSide::B,
            });
            break;
        };
        b_cuts.push(m_next);
        let qb = norm.get(m_next)?;
        let Some(n_next) = find_cut(prefix, &qb, eps_k, m_next, window) else {
            exhausted = Some(Exhaustion {
                stage: k,
                side: CoverSide::A,
            });
            break;
        };
        a_cuts.push(n_next);
    }

    let mut rejected = Vec::new();
    let mut stages_a = Vec::new();
    for k in 0..a_cuts.len() - 1 {
        let iv = Interval::new(a_cuts[k], a_cuts[k + 1]).expect("cuts increase");
        let fam = agreement_family(
            prefix,
            iv,
            (b_cuts[k + 1], a_cuts[k + 1]),
            CoverSide::A,
            k,
            &mut rejected,
            cap,
        )?;
        stages_a.push((iv, fam));
    }
    let mut stages_b = Vec::new();
    for k in 0..b_cuts.len() - 1 {
        let iv = Interval::new(b_cuts[k], b_cuts[k + 1]).expect("cuts increase");
        let fam = agreement_family(
            prefix,
            iv,
            (a_cuts[k], b_cuts[k + 1]),
            CoverSide::B,
            k,
            &mut rejected,
            cap,
        )?;
        stages_b.push((iv, fam));
    }

    let a_count = stages_a.len();
    let b_count = stages_b.len();
    let cover_a = SmallCover::new(stages_a, eps.remaining(a_count), p, cap)?;
    // Future B stages fall under shifted terms; with no stage built even the
    // unconstrained one is still a measure, so 1 covers it.
    let b_tail = if b_count == 0 {
        Rational::one() + eps.remaining(0)
    } else {
        eps.remaining(b_count - 1)
    };
    let cover_b = SmallCover::new(stages_b, b_tail, p, cap)?;

    let ledger_a: Vec<StageLedgerEntry> = cover_a
        .weights()
        .iter()
        .enumerate()
        .map(|(k, w)| StageLedgerEntry {
            stage: k,
            weight: w.clone(),
            bound: Some(eps.terms()[k].clone()),
        })
        .collect();
    let ledger_b: Vec<StageLedgerEntry> = cover_b
        .weights()
        .iter()
        .enumerate()
        .map(|(k, w)| StageLedgerEntry {
            stage: k,
            weight: w.clone(),
            bound: if k == 0 {
                None
            } else {
                Some(eps.terms()[k - 1].clone())
            },
        })
        .collect();

    let bounds_hold = ledger_a
        .iter()
        .chain(&ledger_b)
        .all(|e| e.bound.as_ref().is_none_or(|b| e.weight <= *b));
    let certified = exhausted.is_none() && bounds_hold;
    let schedule_truncated = prefix
        .tail_weight_from(*a_cuts.last().unwrap())
        .is_positive();

    Ok(Decomposition {
        cover_a: cover_a.with_certified(certified),
        cover_b: cover_b.with_certified(certified),
        a_cuts,
        b_cuts,
        ledger_a,
        ledger_b,
        rejected,
        certified,
        exhausted,
        schedule_truncated,
    })
}

/// Result of thresholding one side of a split family.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyReport {
    /// The retained-side patterns whose conditional mass exceeds the
    /// threshold.
    pub heavy: CylinderFamily,
    pub heavy_measure: Rational,
    pub total_measure: Rational,
    pub threshold: Rational,
    /// `threshold · μ(V(heavy)) ≤ μ(V(J))`, checked exactly.
    pub markov_ok: bool,
}

fn conditional_split(
    j: &CylinderFamily,
    split: u32,
    keep_low: bool,
    threshold: &Rational,
    p: &BiasSequence,
    cap: usize,
) -> Result<HeavyReport> {
    let iv = j
        .domain_interval()
        .ok_or_else(|| Error::domain("family domain must be a contiguous interval"))?;
    if !(iv.start() < split && split < iv.end()) {
        return Err(Error::domain(format!(
            "split {split} must fall strictly inside {iv}"
        )));
    }
    check_cap(iv.len(), cap)?;
    let low_width = (split - iv.start()) as usize;
    let keep_width = if keep_low { low_width } else { iv.len() - low_width };
    let low_selector = (1u64 << low_width) - 1;
    let mut table: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for m in j.masks() {
        let low = m & low_selector;
        let high = m >> low_width;
        let (key, val) = if keep_low { (low, high) } else { (high, low) };
        table.entry(key).or_default().insert(val);
    }
    let (keep_domain, cond_domain): (Vec<u32>, Vec<u32>) = if keep_low {
        ((iv.start()..split).collect(), (split..iv.end()).collect())
    } else {
        ((split..iv.end()).collect(), (iv.start()..split).collect())
    };
    let mut heavy_masks = BTreeSet::new();
    for key in 0..1u64 << keep_width {
        let conditional = match table.get(&key) {
            Some(set) => family_measure(
                p,
                &CylinderFamily::from_masks(cond_domain.clone(), set.iter().copied())?,
                cap,
            )?,
            None => Rational::zero(),
        };
        if conditional > *threshold {
            heavy_masks.insert(key);
        }
    }
    let heavy = CylinderFamily::from_masks(keep_domain, heavy_masks)?;
    let heavy_measure = family_measure(p, &heavy, cap)?;
    let total_measure = family_measure(p, j, cap)?;
    let markov_ok = threshold * &heavy_measure <= total_measure;
    Ok(HeavyReport {
        heavy,
        heavy_measure,
        total_measure,
        threshold: threshold.clone(),
        markov_ok,
    })
}

/// Initial segments of `J`'s domain (up to `split`) whose extension set
/// inside `J` carries conditional mass above `threshold`.
pub fn heavy_prefixes(
    j: &CylinderFamily,
    split: u32,
    threshold: &Rational,
    p: &BiasSequence,
    cap: usize,
) -> Result<HeavyReport> {
    conditional_split(j, split, true, threshold, p, cap)
}

/// Final segments of `J`'s domain (from `split` on) whose completion set
/// inside `J` carries conditional mass above `threshold`.
pub fn heavy_suffixes(
    j: &CylinderFamily,
    split: u32,
    threshold: &Rational,
    p: &BiasSequence,
    cap: usize,
) -> Result<HeavyReport> {
    conditional_split(j, split, false, threshold, p, cap)
}

/// Interval boundaries of a cover whose stages sit flush against each other.
fn chained_cuts(cover: &SmallCover) -> Result<Vec<u32>> {
    let mut cuts = Vec::with_capacity(cover.len() + 1);
    for (k, (iv, _)) in cover.stages().iter().enumerate() {
        if k == 0 {
            cuts.push(iv.start());
        } else if cuts.last() != Some(&iv.start()) {
            return Err(Error::domain(format!(
                "stage {k} starts at {} but its predecessor ends at {}",
                iv.start(),
                cuts.last().unwrap()
            )));
        }
        cuts.push(iv.end());
    }
    Ok(cuts)
}

/// Rebuild a cover around a witness `x` that keeps hitting `cover_a`: for
/// each hit stage `k` the new stage sits on the gap `[m_{k+1}, n_{k+1})`
/// between the two covers' boundaries and collects the extensions that send
/// `x`'s fixed part into stage `k` of `cover_a` or stage `k+1` of `cover_b`.
///
/// `heavy[k]` holds the fixed-part patterns with too much conditional mass;
/// `x` must avoid them at every hit from index `maturity` on, and from there
/// the produced stage weights are checked against `2^{-u}`. The result is
/// certified when all checked stages obey that budget.
pub fn refine_with_witness(
    p: &BiasSequence,
    cover_a: &SmallCover,
    cover_b: &SmallCover,
    heavy: &[CylinderFamily],
    x: &FiniteTrace,
    maturity: usize,
    cap: usize,
) -> Result<SmallCover> {
    if cover_a.is_empty() {
        return SmallCover::new(Vec::new(), Rational::zero(), p, cap);
    }
    let n = chained_cuts(cover_a)?;
    let m = chained_cuts(cover_b)?;
    if m.first() != n.first() {
        return Err(Error::domain("covers must start at the same coordinate"));
    }
    for k in 0..cover_a.len() {
        let interleaved = k + 1 < m.len() && n[k] < m[k + 1] && m[k + 1] < n[k + 1];
        if !interleaved {
            return Err(Error::domain(format!(
                "stage {k} boundaries do not interleave between the covers"
            )));
        }
    }
    if heavy.len() != cover_a.len() {
        return Err(Error::invalid(
            "heavy",
            format!("{} families for {} stages", heavy.len(), cover_a.len()),
        ));
    }
    for (k, h) in heavy.iter().enumerate() {
        let want: Vec<u32> = (n[k]..m[k + 1]).collect();
        if h.domain() != want.as_slice() {
            return Err(Error::invalid(
                "heavy",
                format!("stage {k} family must live on [{}, {})", n[k], m[k + 1]),
            ));
        }
    }

    let hit_list: Vec<usize> = stage_hits(x, cover_a)?.into_iter().collect();
    for (u, &k) in hit_list.iter().enumerate() {
        if u < maturity {
            continue;
        }
        let fixed = x.restrict_interval(Interval::new(n[k], m[k + 1]).expect("ordered"));
        if heavy[k].contains(&fixed) {
            return Err(Error::HeavyStage { stage: k });
        }
    }

    let mut stages = Vec::with_capacity(hit_list.len());
    for &k in &hit_list {
        let span = Interval::new(m[k + 1], n[k + 1]).expect("ordered");
        check_cap(span.len(), cap)?;
        let x_pre = x.restrict_interval(Interval::new(n[k], m[k + 1]).expect("ordered"));
        let continuation = if k + 1 < cover_b.len() {
            let post = Interval::new(n[k + 1], m[k + 2]).expect("ordered");
            if !x.covers_interval(post) {
                return Err(Error::WindowTooShort(format!(
                    "witness does not reach {post}"
                )));
            }
            Some((cover_b.family(k + 1), x.restrict_interval(post)))
        } else {
            None
        };
        let domain = span.coords_vec();
        let mut masks = BTreeSet::new();
        for s_mask in 0..1u64 << span.len() {
            let s = FiniteTrace::from_mask(&domain, s_mask);
            let lands_ahead = cover_a.family(k).contains(&x_pre.union_disjoint(&s)?);
            let lands_behind = match &continuation {
                Some((fam, x_post)) => fam.contains(&s.union_disjoint(x_post)?),
                None => false,
            };
            if lands_ahead || lands_behind {
                masks.insert(s_mask);
            }
        }
        stages.push((span, CylinderFamily::from_masks(domain, masks)?));
    }

    let cover = SmallCover::new(stages, Rational::zero(), p, cap)?;
    let two = Rational::from_int(2);
    let certified = cover
        .weights()
        .iter()
        .enumerate()
        .all(|(u, w)| u < maturity || *w < two.pow(-(u as i32)));
    Ok(cover.with_certified(certified))
}

/// Overlay `x` onto `y`: take `x`'s bit inside any of the given intervals and
/// `y`'s bit elsewhere. The output dominates the coordinatewise minimum of
/// the two and is dominated by their maximum.
pub fn blend(x: &FiniteTrace, y: &FiniteTrace, u_stages: &[Interval]) -> Result<FiniteTrace> {
    if x.domain() != y.domain() {
        return Err(Error::domain("blend needs a shared domain"));
    }
    let bits = x
        .pairs()
        .zip(y.pairs())
        .map(|((c, xb), (_, yb))| {
            if u_stages.iter().any(|iv| iv.contains(c)) {
                xb
            } else {
                yb
            }
        })
        .collect();
    FiniteTrace::new(x.domain().to_vec(), bits)
}

/// One stage of the closed-set conversion: the normalized family weight next
/// to the geometric budget it must stay under for the output to certify.
#[derive(Debug, Clone, PartialEq)]
pub struct FsigmaLedgerEntry {
    pub stage: usize,
    /// `q(k_n) · μ(V(C_n at resolution k_{n+1}))`.
    pub weighted: Rational,
    pub budget: Rational,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct FsigmaOutcome {
    pub cover: SmallCover,
    pub ledger: Vec<FsigmaLedgerEntry>,
    pub certified: bool,
}

/// Convert a staged union of closed sets into a staged cover. Stage `n` of
/// the closed input is given as finite-resolution approximations: at
/// resolution `m` the family of length-`m` prefixes whose cylinder still
/// meets the set. The output stage on `[k_n, k_{n+1})` keeps the restrictions
/// of the resolution-`k_{n+1}` approximation of stage `n`.
pub fn fsigma_to_small(
    closed_stages: &[BTreeMap<u32, CylinderFamily>],
    cuts: &[u32],
    p: &BiasSequence,
    cap: usize,
) -> Result<FsigmaOutcome> {
    if cuts.len() < 2 {
        return Err(Error::invalid("cuts", "need at least two cut points"));
    }
    if !cuts.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("cuts", "must increase strictly"));
    }
    let stage_count = cuts.len() - 1;
    if closed_stages.len() < stage_count {
        return Err(Error::invalid(
            "closed stages",
            format!(
                "{} stage maps for {} intervals",
                closed_stages.len(),
                stage_count
            ),
        ));
    }
    for (n, map) in closed_stages.iter().enumerate() {
        for (&m_res, fam) in map {
            let expected: Vec<u32> = (0..m_res).collect();
            if fam.domain() != expected.as_slice() {
                return Err(Error::domain(format!(
                    "stage {n} resolution {m_res} family must live on [0, {m_res})"
                )));
            }
        }
    }
    // Stages approximate an increasing union, so a later stage may never drop
    // a prefix an earlier one kept.
    for n in 0..closed_stages.len().saturating_sub(1) {
        for (&m_res, fam) in &closed_stages[n] {
            if let Some(next) = closed_stages[n + 1].get(&m_res) {
                if !fam.masks().all(|mask| next.contains_mask(mask)) {
                    return Err(Error::domain(format!(
                        "stage {} shrinks at resolution {m_res}",
                        n + 1
                    )));
                }
            }
        }
    }

    let mut norm = Normalizer::new(p);
    let mut stages = Vec::with_capacity(stage_count);
    let mut ledger = Vec::with_capacity(stage_count);
    let two = Rational::from_int(2);
    for n in 0..stage_count {
        let lo = cuts[n];
        let hi = cuts[n + 1];
        let iv = Interval::new(lo, hi).expect("cuts increase");
        let fam = closed_stages[n]
            .get(&hi)
            .ok_or(Error::MissingResolution {
                stage: n,
                resolution: hi,
            })?;
        check_cap(iv.len(), cap)?;
        let selector = (1u64 << iv.len()) - 1;
        let masks: BTreeSet<u64> = fam.masks().map(|mask| (mask >> lo) & selector).collect();
        let t_n = CylinderFamily::from_masks(iv.coords_vec(), masks)?;
        let weighted = norm.get(lo)? * family_measure(p, fam, cap)?;
        let budget = two.pow(-(n as i32));
        let ok = weighted <= budget;
        ledger.push(FsigmaLedgerEntry {
            stage: n,
            weighted,
            budget,
            ok,
        });
        stages.push((iv, t_n));
    }
    let certified = ledger.iter().all(|e| e.ok);
    let cover = SmallCover::new(stages, Rational::zero(), p, cap)?.with_certified(certified);
    Ok(FsigmaOutcome {
        cover,
        ledger,
        certified,
    })
}
