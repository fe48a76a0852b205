//! Half-selection combinatorics: the hypergeometric bound for a fixed set
//! surviving into a random half, exact avoidance bounds for constraint
//! lists, deterministic and sampled half-selections over a cell grid, and
//! the banded successor step built on them.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::rng::SplitMix64;
use crate::trace::FiniteTrace;

/// Coordinate cells keyed by (level, column).
pub type Halves = BTreeMap<(u32, u32), Vec<u32>>;

/// Disjoint coordinate cells keyed by (level, column), cell size `2^level`.
/// Level 0 is excluded: a size-1 cell has no even split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalvingGrid {
    cells: Halves,
}

impl HalvingGrid {
    pub fn new(cells: Halves) -> Result<Self> {
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut normalized = BTreeMap::new();
        for ((k, l), cell) in cells {
            if k == 0 {
                return Err(Error::invalid("grid", "levels start at 1"));
            }
            let set: BTreeSet<u32> = cell.into_iter().collect();
            if k >= 32 || set.len() as u64 != 1u64 << k {
                return Err(Error::invalid(
                    "grid",
                    format!(
                        "cell ({k}, {l}) holds {} coordinates, not 2^{k}",
                        set.len()
                    ),
                ));
            }
            if let Some(&c) = set.iter().find(|c| seen.contains(c)) {
                return Err(Error::invalid(
                    "grid",
                    format!("coordinate {c} appears in two cells"),
                ));
            }
            seen.extend(&set);
            normalized.insert((k, l), set.into_iter().collect());
        }
        Ok(HalvingGrid { cells: normalized })
    }

    /// The full rectangle of levels `1..=k_max` with `l_max` columns each,
    /// cells packed consecutively from coordinate 0 in key order.
    pub fn packed(k_max: u32, l_max: u32) -> Result<Self> {
        let mut cells = BTreeMap::new();
        let mut next = 0u32;
        for k in 1..=k_max {
            for l in 0..l_max {
                let size = 1u32 << k;
                cells.insert((k, l), (next..next + size).collect());
                next += size;
            }
        }
        HalvingGrid::new(cells)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(u32, u32), &Vec<u32>)> {
        self.cells.iter()
    }

    pub fn cell(&self, k: u32, l: u32) -> Option<&[u32]> {
        self.cells.get(&(k, l)).map(|c| c.as_slice())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Distinct levels present, ascending.
    pub fn levels(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.cells.keys().map(|&(k, _)| k).collect();
        set.into_iter().collect()
    }

    pub fn coords(&self) -> BTreeSet<u32> {
        self.cells.values().flatten().copied().collect()
    }

    pub fn total_size(&self) -> usize {
        self.cells.values().map(|c| c.len()).sum()
    }

    /// Least window length containing every cell.
    pub fn window_needed(&self) -> u32 {
        self.cells
            .values()
            .filter_map(|c| c.last().copied())
            .max()
            .map_or(0, |c| c + 1)
    }
}

/// Finite sets to be kept out of a selection, with the summed size budget
/// that certifies avoidance when it stays below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintList {
    constraints: Vec<Vec<u32>>,
    budget: Rational,
}

impl ConstraintList {
    pub fn new(constraints: Vec<Vec<u32>>) -> Self {
        let constraints: Vec<Vec<u32>> = constraints
            .into_iter()
            .map(|j| {
                let set: BTreeSet<u32> = j.into_iter().collect();
                set.into_iter().collect()
            })
            .collect();
        let two = Rational::from_int(2);
        let budget = constraints
            .iter()
            .map(|j| two.pow(-(j.len() as i32)))
            .sum();
        ConstraintList {
            constraints,
            budget,
        }
    }

    /// Rebuild with a declared budget, recomputed and checked.
    pub fn from_parts(constraints: Vec<Vec<u32>>, budget: Rational) -> Result<Self> {
        let built = ConstraintList::new(constraints);
        if built.budget != budget {
            return Err(Error::invalid(
                "budget",
                format!("declared {budget} but the sizes sum to {}", built.budget),
            ));
        }
        Ok(built)
    }

    pub fn constraints(&self) -> &[Vec<u32>] {
        &self.constraints
    }

    pub fn budget(&self) -> &Rational {
        &self.budget
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

/// Probability that a uniformly chosen half of a `2n`-set contains a fixed
/// `m`-subset: `C(2n−m, n−m)/C(2n, n)` for `m ≤ n`, zero beyond (a half
/// cannot hold more than `n` points). Satisfies `H(m) ≤ 2^{−m}` and the
/// descent `H(m) = (n−m+1)/(2n−m+1) · H(m−1)`.
pub fn halving_bound(n: u32, m: u32) -> Rational {
    if m > n {
        return Rational::zero();
    }
    let choose = |top: u32, pick: u32| num_integer::binomial(BigInt::from(top), BigInt::from(pick));
    Rational::from_bigints(choose(2 * n - m, n - m), choose(2 * n, n))
        .expect("positive denominator")
}

/// Exact lower bounds on the mass of selections avoiding every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceBounds {
    /// `1 − Σ 2^{−|J|}`; may drop to zero or below when the budget is 1 or
    /// more.
    pub union_bound: Rational,
    /// `∏ (1 − 2^{−|J|})`; treats the avoidance events as independent,
    /// which they are not, so it is checked empirically rather than trusted.
    pub product_bound: Rational,
}

pub fn avoidance_bounds(cs: &ConstraintList) -> AvoidanceBounds {
    let two = Rational::from_int(2);
    let one = Rational::one();
    let union_bound = &one - cs.budget();
    let product_bound = cs
        .constraints()
        .iter()
        .map(|j| &one - two.pow(-(j.len() as i32)))
        .fold(Rational::one(), |acc, f| acc * f);
    AvoidanceBounds {
        union_bound,
        product_bound,
    }
}

/// How to pick among the per-cell halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Full search in cell-major lexicographic order; first valid selection
    /// is the least one.
    Exhaustive,
    /// Uniform half per cell and trial, generator keyed by
    /// (seed, level, column, trial) so runs are reproducible trial by trial.
    MonteCarlo { seed: u64, trials: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialsReport {
    Exhaustive {
        /// Complete selections tested, the returned one included.
        examined: u64,
    },
    MonteCarlo {
        seed: u64,
        trials: u64,
        successes: u64,
        first_success: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// Chosen half per cell; None when no tried selection avoided every
    /// constraint.
    pub halves: Option<Halves>,
    /// A selection was found under a sub-unit budget, where the union bound
    /// guarantees one exists.
    pub certified: bool,
    pub trials: TrialsReport,
}

/// All `choose`-subsets of `items` in lexicographic order.
fn combinations(items: &[u32], choose: usize) -> Vec<Vec<u32>> {
    let n = items.len();
    if choose > n {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..choose).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = choose;
        while i > 0 && idx[i - 1] == n - choose + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..choose {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn contains_constraint(selected: &BTreeSet<u32>, cs: &ConstraintList) -> bool {
    cs.constraints()
        .iter()
        .any(|j| j.iter().all(|c| selected.contains(c)))
}

/// Core search over arbitrary cells; `half_of` fixes how much of each cell
/// survives.
fn select_from_cells(
    cells: &Halves,
    cs: &ConstraintList,
    strategy: SelectionStrategy,
    half_of: fn(usize) -> usize,
) -> Result<SelectionResult> {
    let certified_budget = cs.budget() < &Rational::one();
    match strategy {
        SelectionStrategy::Exhaustive => {
            let total: usize = cells.values().map(|c| c.len()).sum();
            if total > 16 {
                return Err(Error::EnumerationCap {
                    size: total,
                    cap: 16,
                });
            }
            let keys: Vec<(u32, u32)> = cells.keys().copied().collect();
            let options: Vec<Vec<Vec<u32>>> = keys
                .iter()
                .map(|key| {
                    let cell = &cells[key];
                    combinations(cell, half_of(cell.len()))
                })
                .collect();
            let mut examined = 0u64;
            let mut picks = vec![0usize; keys.len()];
            let found = 'search: loop {
                examined += 1;
                let selected: BTreeSet<u32> = picks
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &p)| options[i][p].iter().copied())
                    .collect();
                if !contains_constraint(&selected, cs) {
                    break Some(
                        keys.iter()
                            .enumerate()
                            .map(|(i, &key)| (key, options[i][picks[i]].clone()))
                            .collect::<BTreeMap<_, _>>(),
                    );
                }
                // cell-major odometer
                for i in (0..picks.len()).rev() {
                    picks[i] += 1;
                    if picks[i] < options[i].len() {
                        continue 'search;
                    }
                    picks[i] = 0;
                }
                break None;
            };
            let certified = found.is_some() && certified_budget;
            Ok(SelectionResult {
                halves: found,
                certified,
                trials: TrialsReport::Exhaustive { examined },
            })
        }
        SelectionStrategy::MonteCarlo { seed, trials } => {
            let mut successes = 0u64;
            let mut first: Option<(u64, Halves)> = None;
            for t in 0..trials {
                let mut halves = BTreeMap::new();
                for (&(k, l), cell) in cells {
                    let mut rng =
                        SplitMix64::keyed(seed, &[u64::from(k), u64::from(l), t]);
                    let mut pool = cell.clone();
                    rng.shuffle(&mut pool);
                    let mut half: Vec<u32> =
                        pool.into_iter().take(half_of(cell.len())).collect();
                    half.sort_unstable();
                    halves.insert((k, l), half);
                }
                let selected: BTreeSet<u32> =
                    halves.values().flatten().copied().collect();
                if !contains_constraint(&selected, cs) {
                    successes += 1;
                    if first.is_none() {
                        first = Some((t, halves));
                    }
                }
            }
            let (first_success, halves) = match first {
                Some((t, h)) => (Some(t), Some(h)),
                None => (None, None),
            };
            let certified = halves.is_some() && certified_budget;
            Ok(SelectionResult {
                halves,
                certified,
                trials: TrialsReport::MonteCarlo {
                    seed,
                    trials,
                    successes,
                    first_success,
                },
            })
        }
    }
}

fn check_constraints_in(coords: &BTreeSet<u32>, cs: &ConstraintList) -> Result<()> {
    for j in cs.constraints() {
        if let Some(&c) = j.iter().find(|c| !coords.contains(c)) {
            return Err(Error::invalid(
                "constraint",
                format!("coordinate {c} lies outside the grid"),
            ));
        }
    }
    Ok(())
}

/// Pick one exact half of every grid cell so that the union contains no
/// constraint set. A sub-unit budget guarantees the exhaustive search
/// succeeds; failure under a full budget is an outcome, not an error.
pub fn select_halves(
    grid: &HalvingGrid,
    cs: &ConstraintList,
    strategy: SelectionStrategy,
) -> Result<SelectionResult> {
    check_constraints_in(&grid.coords(), cs)?;
    select_from_cells(&grid.cells, cs, strategy, |s| s / 2)
}

/// Per level, the least overlap of `x` with any cell there.
pub fn intersection_profile(
    x: &FiniteTrace,
    grid: &HalvingGrid,
) -> Result<Vec<(u32, usize)>> {
    let mut minima: BTreeMap<u32, usize> = BTreeMap::new();
    for (&(k, _), cell) in grid.cells() {
        let mut count = 0usize;
        for &c in cell {
            match x.value(c) {
                Some(true) => count += 1,
                Some(false) => {}
                None => {
                    return Err(Error::WindowTooShort(format!(
                        "coordinate {c} of level {k} is unassigned"
                    )))
                }
            }
        }
        minima
            .entry(k)
            .and_modify(|m| *m = (*m).min(count))
            .or_insert(count);
    }
    Ok(minima.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorOutcome {
    pub selection: SelectionResult,
    /// Union of the selected parts over the full window; None when the
    /// selection failed.
    pub x_next: Option<FiniteTrace>,
    /// Per generator: the produced set meets it.
    pub meets: Vec<bool>,
    /// No constraint set lies inside the produced set.
    pub avoided: bool,
    /// Selection certified and both contract checks passed.
    pub certified: bool,
}

/// One step of the banded construction: generator `i` contributes its
/// points in the cells of levels `schedule[i]..=schedule[i+1]`, the
/// contributions are united cellwise, and each nonempty cell part is cut to
/// its upper half size avoiding all constraints. The result is checked to
/// meet every generator and to contain no constraint set.
pub fn successor_step(
    generators: &[FiniteTrace],
    grid: &HalvingGrid,
    schedule: &[u32],
    cs: &ConstraintList,
    strategy: SelectionStrategy,
) -> Result<SuccessorOutcome> {
    if generators.is_empty() {
        return Err(Error::invalid("step", "at least one generator is needed"));
    }
    if schedule.len() != generators.len() + 1 {
        return Err(Error::invalid(
            "schedule",
            format!(
                "{} checkpoints for {} generators",
                schedule.len(),
                generators.len()
            ),
        ));
    }
    if !schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("schedule", "levels must increase strictly"));
    }
    let levels = grid.levels();
    if schedule.first().copied() < levels.first().copied()
        || schedule.last().copied() > levels.last().copied()
    {
        return Err(Error::invalid(
            "schedule",
            "checkpoints must stay within the grid's levels",
        ));
    }
    let window = generators[0].window_size().ok_or_else(|| {
        Error::domain("generators must assign a full initial window".to_string())
    })?;
    for g in generators {
        if g.window_size() != Some(window) {
            return Err(Error::domain(
                "generators must share one window".to_string(),
            ));
        }
    }
    if window < grid.window_needed() {
        return Err(Error::WindowTooShort(format!(
            "grid reaches {} but the window ends at {window}",
            grid.window_needed()
        )));
    }
    check_constraints_in(&grid.coords(), cs)?;

    let band = |i: usize| (schedule[i], schedule[i + 1]);
    // Cellwise union of banded generator contributions.
    let mut parts: Halves = BTreeMap::new();
    for (&(k, l), cell) in grid.cells() {
        let active: Vec<usize> = (0..generators.len())
            .filter(|&i| {
                let (lo, hi) = band(i);
                lo <= k && k <= hi
            })
            .collect();
        if active.is_empty() {
            continue;
        }
        let part: Vec<u32> = cell
            .iter()
            .copied()
            .filter(|&c| {
                active
                    .iter()
                    .any(|&i| generators[i].value(c) == Some(true))
            })
            .collect();
        if !part.is_empty() {
            parts.insert((k, l), part);
        }
    }
    // Positivity needs every generator to survive into its band.
    for (i, g) in generators.iter().enumerate() {
        let (lo, hi) = band(i);
        let alive = parts.iter().any(|(&(k, _), part)| {
            lo <= k && k <= hi && part.iter().any(|&c| g.value(c) == Some(true))
        });
        if !alive {
            return Err(Error::EmptyBand {
                generator: i,
                level_lo: lo,
                level_hi: hi,
            });
        }
    }

    // Odd part sizes keep the larger side.
    let selection = select_from_cells(&parts, cs, strategy, |s| s.div_ceil(2))?;
    let (x_next, meets, avoided) = match &selection.halves {
        Some(halves) => {
            let selected: BTreeSet<u32> = halves.values().flatten().copied().collect();
            let ones: Vec<u32> = selected.iter().copied().collect();
            let x_next = FiniteTrace::window(window, &ones)?;
            let meets: Vec<bool> = generators
                .iter()
                .map(|g| ones.iter().any(|&c| g.value(c) == Some(true)))
                .collect();
            let avoided = !contains_constraint(&selected, cs);
            (Some(x_next), meets, avoided)
        }
        None => (None, vec![false; generators.len()], false),
    };
    let certified = selection.certified && avoided && meets.iter().all(|&m| m);
    Ok(SuccessorOutcome {
        selection,
        x_next,
        meets,
        avoided,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn halving_examples() {
        assert_eq!(halving_bound(2, 0), r(1, 1));
        assert_eq!(halving_bound(2, 1), r(1, 2));
        assert_eq!(halving_bound(2, 2), r(1, 6));
        assert_eq!(halving_bound(3, 4), r(0, 1));
    }

    #[test]
    fn halving_recursion_and_ceiling() {
        let two = Rational::from_int(2);
        for n in 1u32..=8 {
            for m in 1..=n {
                let step = r(i64::from(n - m + 1), i64::from(2 * n - m + 1));
                assert_eq!(
                    halving_bound(n, m),
                    step * halving_bound(n, m - 1),
                    "descent at n={n}, m={m}"
                );
                assert!(halving_bound(n, m) <= two.pow(-(m as i32)));
            }
        }
    }

    #[test]
    fn halving_matches_direct_counting() {
        for n in 1u32..=4 {
            let items: Vec<u32> = (0..2 * n).collect();
            let halves = combinations(&items, n as usize);
            for m in 0..=n {
                let fixed: Vec<u32> = (0..m).collect();
                let hits = halves
                    .iter()
                    .filter(|h| fixed.iter().all(|c| h.contains(c)))
                    .count();
                assert_eq!(
                    halving_bound(n, m),
                    r(hits as i64, halves.len() as i64),
                    "n={n}, m={m}"
                );
            }
        }
    }

    #[test]
    fn avoidance_bound_values() {
        let cs = ConstraintList::new(vec![vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(cs.budget(), &r(3, 8));
        let bounds = avoidance_bounds(&cs);
        assert_eq!(bounds.union_bound, r(5, 8));
        assert_eq!(bounds.product_bound, r(21, 32));

        let empty = ConstraintList::new(vec![]);
        let bounds = avoidance_bounds(&empty);
        assert_eq!(bounds.union_bound, r(1, 1));
        assert_eq!(bounds.product_bound, r(1, 1));

        let single = ConstraintList::new(vec![vec![7]]);
        let bounds = avoidance_bounds(&single);
        assert_eq!(bounds.union_bound, r(1, 2));
        assert_eq!(bounds.product_bound, r(1, 2));

        assert!(ConstraintList::from_parts(vec![vec![0, 1]], r(1, 4)).is_ok());
        assert!(ConstraintList::from_parts(vec![vec![0, 1]], r(1, 2)).is_err());
    }

    #[test]
    fn grid_validation() {
        let grid = HalvingGrid::packed(2, 2).unwrap();
        assert_eq!(grid.cell(1, 0), Some(&[0, 1][..]));
        assert_eq!(grid.cell(2, 1), Some(&[8, 9, 10, 11][..]));
        assert_eq!(grid.total_size(), 12);
        assert_eq!(grid.window_needed(), 12);
        assert_eq!(grid.levels(), vec![1, 2]);

        let level_zero = BTreeMap::from([((0, 0), vec![0u32])]);
        assert!(HalvingGrid::new(level_zero).is_err());
        let wrong_size = BTreeMap::from([((2, 0), vec![0, 1, 2])]);
        assert!(HalvingGrid::new(wrong_size).is_err());
        let overlapping = BTreeMap::from([((1, 0), vec![0, 1]), ((1, 1), vec![1, 2])]);
        assert!(HalvingGrid::new(overlapping).is_err());
    }

    #[test]
    fn exhaustive_selection_is_lexicographically_least() {
        let grid = HalvingGrid::new(BTreeMap::from([((2, 0), vec![0, 1, 2, 3])])).unwrap();
        let cs = ConstraintList::new(vec![vec![0, 1]]);
        let result = select_halves(&grid, &cs, SelectionStrategy::Exhaustive).unwrap();
        let halves = result.halves.unwrap();
        assert_eq!(halves[&(2, 0)], vec![0, 2]);
        assert!(result.certified);
        assert_eq!(result.trials, TrialsReport::Exhaustive { examined: 2 });

        let grid = HalvingGrid::packed(1, 2).unwrap();
        let none = ConstraintList::new(vec![]);
        let result = select_halves(&grid, &none, SelectionStrategy::Exhaustive).unwrap();
        let halves = result.halves.unwrap();
        assert_eq!(halves[&(1, 0)], vec![0]);
        assert_eq!(halves[&(1, 1)], vec![2]);

        let grid = HalvingGrid::packed(1, 1).unwrap();
        let cs = ConstraintList::new(vec![vec![0]]);
        let result = select_halves(&grid, &cs, SelectionStrategy::Exhaustive).unwrap();
        assert_eq!(result.halves.unwrap()[&(1, 0)], vec![1]);
    }

    #[test]
    fn selection_failure_is_reported() {
        let grid = HalvingGrid::packed(1, 1).unwrap();
        let cs = ConstraintList::new(vec![vec![0], vec![1]]);
        assert_eq!(cs.budget(), &r(1, 1));
        let result = select_halves(&grid, &cs, SelectionStrategy::Exhaustive).unwrap();
        assert!(result.halves.is_none());
        assert!(!result.certified);
        assert_eq!(result.trials, TrialsReport::Exhaustive { examined: 2 });

        let stray = ConstraintList::new(vec![vec![9]]);
        assert!(select_halves(&grid, &stray, SelectionStrategy::Exhaustive).is_err());

        let wide = HalvingGrid::packed(3, 2).unwrap();
        assert!(matches!(
            select_halves(&wide, &cs, SelectionStrategy::Exhaustive),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let grid = HalvingGrid::new(BTreeMap::from([((2, 0), vec![0, 1, 2, 3])])).unwrap();
        let cs = ConstraintList::new(vec![vec![0, 1]]);
        let strategy = SelectionStrategy::MonteCarlo {
            seed: 11,
            trials: 60,
        };
        let a = select_halves(&grid, &cs, strategy).unwrap();
        let b = select_halves(&grid, &cs, strategy).unwrap();
        assert_eq!(a, b);
        let TrialsReport::MonteCarlo {
            successes,
            first_success,
            ..
        } = a.trials
        else {
            panic!("wrong report kind");
        };
        // 5 of the 6 halves avoid the pair; 60 trials stay near 50.
        assert!(successes > 40, "only {successes} of 60 succeeded");
        assert!(first_success.is_some());
        let halves = a.halves.unwrap();
        assert!(!(halves[&(2, 0)].contains(&0) && halves[&(2, 0)].contains(&1)));
        assert!(a.certified);

        let impossible = ConstraintList::new(vec![vec![0], vec![1], vec![2], vec![3]]);
        let result = select_halves(&grid, &impossible, strategy).unwrap();
        assert!(result.halves.is_none());
        assert!(!result.certified);
    }

    #[test]
    fn profile_counts_minima() {
        let grid = HalvingGrid::packed(2, 1).unwrap();
        let ones = FiniteTrace::window(6, &(0..6).collect::<Vec<_>>()).unwrap();
        assert_eq!(
            intersection_profile(&ones, &grid).unwrap(),
            vec![(1, 2), (2, 4)]
        );
        let zeros = FiniteTrace::window(6, &[]).unwrap();
        assert_eq!(
            intersection_profile(&zeros, &grid).unwrap(),
            vec![(1, 0), (2, 0)]
        );
        // Selected halves keep exactly half of each cell.
        let none = ConstraintList::new(vec![]);
        let halves = select_halves(&grid, &none, SelectionStrategy::Exhaustive)
            .unwrap()
            .halves
            .unwrap();
        let ones: Vec<u32> = halves.values().flatten().copied().collect();
        let x = FiniteTrace::window(6, &ones).unwrap();
        assert_eq!(
            intersection_profile(&x, &grid).unwrap(),
            vec![(1, 1), (2, 2)]
        );
        let short = FiniteTrace::window(3, &[]).unwrap();
        assert!(intersection_profile(&short, &grid).is_err());
        // The minimum is over the columns of a level.
        let grid = HalvingGrid::packed(1, 2).unwrap();
        let lopsided = FiniteTrace::window(4, &[0, 1]).unwrap();
        assert_eq!(
            intersection_profile(&lopsided, &grid).unwrap(),
            vec![(1, 0)]
        );
    }

    #[test]
    fn successor_on_one_generator() {
        let grid = HalvingGrid::packed(2, 1).unwrap();
        let full = FiniteTrace::window(6, &(0..6).collect::<Vec<_>>()).unwrap();
        let none = ConstraintList::new(vec![]);
        let out = successor_step(
            &[full],
            &grid,
            &[1, 2],
            &none,
            SelectionStrategy::Exhaustive,
        )
        .unwrap();
        let x = out.x_next.unwrap();
        assert_eq!(x.ones_vec(), vec![0, 2, 3]);
        assert_eq!(out.meets, vec![true]);
        assert!(out.avoided);
        assert!(out.certified);
    }

    #[test]
    fn successor_on_two_banded_generators() {
        // Levels 1..=2 feed the even generator, 2..=3 the odd one; the
        // shared level pools both.
        let grid = HalvingGrid::packed(3, 1).unwrap();
        let evens = FiniteTrace::window(14, &(0..14).step_by(2).collect::<Vec<_>>()).unwrap();
        let odds = FiniteTrace::window(14, &(1..14).step_by(2).collect::<Vec<_>>()).unwrap();
        let cs = ConstraintList::new(vec![vec![2, 3]]);
        let out = successor_step(
            &[evens.clone(), odds.clone()],
            &grid,
            &[1, 2, 3],
            &cs,
            SelectionStrategy::Exhaustive,
        )
        .unwrap();
        let x = out.x_next.unwrap();
        // Cell parts: {0}, {2,3,4,5}, {7,9,11,13}; least halves avoiding
        // {2,3} are {0}, {2,4}, {7,9}.
        assert_eq!(x.ones_vec(), vec![0, 2, 4, 7, 9]);
        assert_eq!(out.meets, vec![true, true]);
        assert!(out.avoided);
        assert!(out.certified);

        // A generator with nothing in its band is reported by band.
        let nothing = FiniteTrace::window(14, &[]).unwrap();
        let err = successor_step(
            &[evens, nothing],
            &grid,
            &[1, 2, 3],
            &cs,
            SelectionStrategy::Exhaustive,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::EmptyBand {
                generator: 1,
                level_lo: 2,
                level_hi: 3
            }
        ));
    }

    #[test]
    fn successor_reports_selection_failure() {
        let grid = HalvingGrid::packed(2, 1).unwrap();
        let full = FiniteTrace::window(6, &(0..6).collect::<Vec<_>>()).unwrap();
        let cs = ConstraintList::new(vec![vec![0], vec![1]]);
        let out = successor_step(
            &[full],
            &grid,
            &[1, 2],
            &cs,
            SelectionStrategy::Exhaustive,
        )
        .unwrap();
        assert!(out.x_next.is_none());
        assert!(!out.certified);
        assert_eq!(out.meets, vec![false]);
    }

    #[test]
    fn successor_validates_schedule() {
        let grid = HalvingGrid::packed(2, 1).unwrap();
        let full = FiniteTrace::window(6, &(0..6).collect::<Vec<_>>()).unwrap();
        let none = ConstraintList::new(vec![]);
        let strategy = SelectionStrategy::Exhaustive;
        let gens = std::slice::from_ref(&full);
        assert!(successor_step(gens, &grid, &[1], &none, strategy).is_err());
        assert!(successor_step(gens, &grid, &[2, 2], &none, strategy).is_err());
        assert!(successor_step(gens, &grid, &[1, 3], &none, strategy).is_err());
        assert!(successor_step(&[], &grid, &[1], &none, strategy).is_err());
        let short = FiniteTrace::window(4, &[0]).unwrap();
        assert!(successor_step(&[short], &grid, &[1, 2], &none, strategy).is_err());
    }
}
