//! Exact measures of cylinder events, conjugate bias maps, and tail
//! certificates.

use crate::bias::{BiasSequence, TailClass};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::trace::{check_cap, CylinderFamily, FiniteTrace};

/// Default bound on the domain size of any operation that enumerates all
/// `2^|I|` bit patterns. The CLI can raise it per run.
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Measure of the cylinder `[t]`: the product of `p_i` over assigned ones and
/// `1 - p_i` over assigned zeros.
pub fn trace_measure(p: &BiasSequence, t: &FiniteTrace) -> Result<Rational> {
    let one = Rational::one();
    let mut acc = Rational::one();
    for (coord, bit) in t.pairs() {
        let pi = p.bias_at(coord)?;
        acc = if bit { acc * pi } else { acc * (&one - &pi) };
    }
    Ok(acc)
}

/// Measure of `V(J) = ⋃_{s ∈ J} [s]` for a family over a common domain.
/// Distinct full-domain traces give disjoint cylinders, so this is the plain
/// sum of the member measures.
pub fn family_measure(p: &BiasSequence, family: &CylinderFamily, cap: usize) -> Result<Rational> {
    check_cap(family.domain().len(), cap)?;
    let factors = factor_table(p, family.domain())?;
    let mut acc = Rational::zero();
    for mask in family.masks() {
        acc = acc + mask_measure(&factors, mask);
    }
    Ok(acc)
}

/// Measure of `{x : some a ∈ sets has a ⊆ x⁻¹(1)}` within the coordinates of
/// `domain`, computed by enumerating all `2^|domain|` patterns and summing
/// the weights of the hit ones.
// The subset test below is not an equality search; clippy misreads it.
#[allow(clippy::manual_contains)]
pub fn hit_measure(
    p: &BiasSequence,
    sets: &[Vec<u32>],
    domain: &[u32],
    cap: usize,
) -> Result<Rational> {
    if !domain.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::domain("hit domain must be ascending"));
    }
    let mut set_masks = Vec::with_capacity(sets.len());
    for a in sets {
        let mut mask = 0u64;
        for &c in a {
            match domain.binary_search(&c) {
                Ok(j) => mask |= 1 << j,
                Err(_) => {
                    return Err(Error::domain(format!(
                        "set member {c} lies outside the domain"
                    )))
                }
            }
        }
        set_masks.push(mask);
    }
    check_cap(domain.len(), cap)?;
    if set_masks.is_empty() {
        return Ok(Rational::zero());
    }
    let factors = factor_table(p, domain)?;
    let mut acc = Rational::zero();
    for mask in 0..1u64 << domain.len() {
        if set_masks.iter().any(|&a| a & mask == a) {
            acc = acc + mask_measure(&factors, mask);
        }
    }
    Ok(acc)
}

fn factor_table(p: &BiasSequence, domain: &[u32]) -> Result<Vec<(Rational, Rational)>> {
    let one = Rational::one();
    domain
        .iter()
        .map(|&c| {
            let pi = p.bias_at(c)?;
            Ok((&one - &pi, pi))
        })
        .collect()
}

fn mask_measure(factors: &[(Rational, Rational)], mask: u64) -> Rational {
    let mut acc = Rational::one();
    for (j, (zero, one)) in factors.iter().enumerate() {
        acc = acc * if mask >> j & 1 == 1 { one } else { zero };
    }
    acc
}

/// Which conjugate to build.
pub enum ConjugateKind<'a> {
    /// `q̂` with `(1 - p_n)(1 - q_n) = 1/2`: pushing the coordinatewise max of
    /// independent `p̂`- and `q̂`-points forward yields the uniform measure.
    MaxMap,
    /// `r̂` with `r_n = 1 - (1 - q_n)/(1 - p_n)` for a dominating sequence
    /// `q̂ >= p̂`: unions of `p̂`- and `r̂`-points land in the `q̂` measure.
    UnionMap { dominating: &'a BiasSequence },
}

/// Build the conjugate sequence. The prefix is mapped coordinatewise; only a
/// constant tail maps to a closed-form tail, anything else leaves the output
/// tail unspecified.
pub fn conjugate_bias(p: &BiasSequence, kind: ConjugateKind) -> Result<BiasSequence> {
    match kind {
        ConjugateKind::MaxMap => {
            let prefix = p.prefix().iter().map(max_conjugate).collect();
            let tail = match p.tail() {
                TailClass::Constant(c) => TailClass::Constant(max_conjugate(c)),
                _ => TailClass::Unspecified,
            };
            BiasSequence::derived(prefix, tail)
        }
        ConjugateKind::UnionMap { dominating } => {
            let len = p.prefix_len().max(dominating.prefix_len());
            let mut prefix = Vec::with_capacity(len as usize);
            for coord in 0..len {
                let lo = p.bias_at(coord)?;
                let hi = dominating.bias_at(coord)?;
                prefix.push(union_conjugate(coord, &lo, &hi)?);
            }
            let tail = match (p.tail(), dominating.tail()) {
                (TailClass::Constant(lo), TailClass::Constant(hi)) => {
                    TailClass::Constant(union_conjugate(len, lo, hi)?)
                }
                _ => TailClass::Unspecified,
            };
            BiasSequence::derived(prefix, tail)
        }
    }
}

fn max_conjugate(p: &Rational) -> Rational {
    // Solve (1 - p)(1 - q) = 1/2.
    let one = Rational::one();
    &one - &(Rational::new(1, 2) / (&one - p))
}

fn union_conjugate(coord: u32, lo: &Rational, hi: &Rational) -> Result<Rational> {
    if lo > hi {
        return Err(Error::NotDominated {
            coord,
            lower: Box::new(lo.clone()),
            upper: Box::new(hi.clone()),
        });
    }
    let one = Rational::one();
    Ok(&one - &((&one - hi) / (&one - lo)))
}

/// Total mass the pair measure `μ_p × μ_aux` puts on
/// `{(x, y) : max(x, y) agrees with s on dom(s)}`, found by enumerating all
/// pairs of traces over `dom(s)`.
pub fn pushforward_mass(
    p: &BiasSequence,
    aux: &BiasSequence,
    s: &FiniteTrace,
    cap: usize,
) -> Result<Rational> {
    // Pairs cost 4^|dom|, so the domain may use at most half the cap.
    check_cap(s.len() * 2, cap)?;
    let fp = factor_table(p, s.domain())?;
    let fq = factor_table(aux, s.domain())?;
    let target = s.mask()?;
    let n = s.len();
    let mut acc = Rational::zero();
    for a in 0..1u64 << n {
        for b in 0..1u64 << n {
            if a | b == target {
                acc = acc + mask_measure(&fp, a) * mask_measure(&fq, b);
            }
        }
    }
    Ok(acc)
}

/// Whether the coordinatewise-max pushforward of `μ_p × μ_aux` gives the
/// cylinder `[s]` exactly its `target` measure.
pub fn pushforward_check(
    p: &BiasSequence,
    aux: &BiasSequence,
    target: &BiasSequence,
    s: &FiniteTrace,
    cap: usize,
) -> Result<bool> {
    Ok(pushforward_mass(p, aux, s, cap)? == trace_measure(target, s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    Unknown,
}

/// Outcome of a tail-sum test; `tail_bound` is present exactly when the
/// verdict is `Converges`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub tail_bound: Option<Rational>,
}

/// Decide convergence of `Σ p_n^k` beyond `start` from the tail class alone.
///
/// The certificate talks about the tail class, so it describes the sequence
/// itself whenever `start` is at or past the prefix. Bounds dominate the sum
/// over coordinates strictly beyond `start`; for a geometric tail the bound
/// is the exact sum from `start` on.
pub fn tail_certificate(p: &BiasSequence, exponent: u32, start: u32) -> Result<Certificate> {
    if exponent == 0 {
        return Err(Error::invalid("exponent", "must be >= 1"));
    }
    let k = exponent as i32;
    let certificate = match p.tail() {
        TailClass::Unspecified => Certificate {
            verdict: Verdict::Unknown,
            tail_bound: None,
        },
        TailClass::Constant(c) => {
            if c.is_zero() {
                Certificate {
                    verdict: Verdict::Converges,
                    tail_bound: Some(Rational::zero()),
                }
            } else {
                Certificate {
                    verdict: Verdict::Diverges,
                    tail_bound: None,
                }
            }
        }
        TailClass::Geometric { scale, ratio } => {
            // Σ_{n >= start} (scale * ratio^n)^k, summed in closed form.
            let rk = ratio.pow(k);
            let bound = scale.pow(k) * ratio.pow(k * start as i32) / (Rational::one() - rk);
            Certificate {
                verdict: Verdict::Converges,
                tail_bound: Some(bound),
            }
        }
        TailClass::PowerLaw { scale, exponent: alpha } => {
            let ka = (*alpha as i64) * (exponent as i64);
            if ka <= 1 {
                Certificate {
                    verdict: Verdict::Diverges,
                    tail_bound: None,
                }
            } else {
                if start == 0 {
                    return Err(Error::invalid(
                        "start",
                        "power-law tails are summed from an index >= 1",
                    ));
                }
                // Integral test: Σ_{n > N} (C/n^α)^k <= C^k · N^{1-kα} / (kα-1).
                let bound = scale.pow(k)
                    * Rational::from_int(start as i64).pow(1 - ka as i32)
                    / Rational::from_int(ka - 1);
                Certificate {
                    verdict: Verdict::Converges,
                    tail_bound: Some(bound),
                }
            }
        }
    };
    Ok(certificate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::TailClass;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn uniform() -> BiasSequence {
        BiasSequence::uniform()
    }

    fn skewed(values: &[(i64, i64)]) -> BiasSequence {
        BiasSequence::new(
            values.iter().map(|&(n, d)| r(n, d)).collect(),
            TailClass::Unspecified,
        )
        .unwrap()
    }

    #[test]
    fn trace_measure_products() {
        let p = skewed(&[(1, 4), (1, 3)]);
        let t = FiniteTrace::from_bit_string(vec![0, 1], "11").unwrap();
        assert_eq!(trace_measure(&p, &t).unwrap(), r(1, 12));
        let t = FiniteTrace::from_bit_string(vec![0, 1], "01").unwrap();
        assert_eq!(trace_measure(&p, &t).unwrap(), r(1, 4));
        // Uniform over any trace of length 3.
        let t3 = FiniteTrace::from_bit_string(vec![0, 5, 9], "011").unwrap();
        assert_eq!(trace_measure(&uniform(), &t3).unwrap(), r(1, 8));
        // Empty trace has the full space as its cylinder.
        assert_eq!(trace_measure(&p, &FiniteTrace::empty()).unwrap(), r(1, 1));
    }

    #[test]
    fn trace_measure_needs_defined_biases() {
        let p = skewed(&[(1, 4)]);
        let t = FiniteTrace::from_bit_string(vec![0, 1], "11").unwrap();
        assert!(matches!(
            trace_measure(&p, &t).unwrap_err(),
            Error::BiasUndefined { coord: 1 }
        ));
    }

    #[test]
    fn zero_bias_from_conjugates_is_a_point_mass() {
        let q = conjugate_bias(&uniform(), ConjugateKind::MaxMap).unwrap();
        let one_bit = FiniteTrace::from_bit_string(vec![7], "1").unwrap();
        let zero_bit = FiniteTrace::from_bit_string(vec![7], "0").unwrap();
        assert_eq!(trace_measure(&q, &one_bit).unwrap(), r(0, 1));
        assert_eq!(trace_measure(&q, &zero_bit).unwrap(), r(1, 1));
    }

    #[test]
    fn family_measure_sums_disjoint_cylinders() {
        let domain = vec![0, 1];
        let fam = CylinderFamily::new(
            domain.clone(),
            ["00", "11"]
                .iter()
                .map(|b| FiniteTrace::from_bit_string(domain.clone(), b).unwrap()),
        )
        .unwrap();
        assert_eq!(family_measure(&uniform(), &fam, 20).unwrap(), r(1, 2));
        let p = skewed(&[(1, 4), (1, 3)]);
        let skew_fam = CylinderFamily::new(
            domain.clone(),
            ["11", "01"]
                .iter()
                .map(|b| FiniteTrace::from_bit_string(domain.clone(), b).unwrap()),
        )
        .unwrap();
        // 1/12 + 1/4 = 1/3.
        assert_eq!(family_measure(&p, &skew_fam, 20).unwrap(), r(1, 3));
        let empty = CylinderFamily::empty(domain).unwrap();
        assert_eq!(family_measure(&p, &empty, 20).unwrap(), r(0, 1));
    }

    #[test]
    fn family_measure_of_full_family_is_one() {
        let p = skewed(&[(1, 4), (1, 3), (1, 2)]);
        let fam =
            CylinderFamily::from_predicate(vec![0, 1, 2], 20, |_| true).unwrap();
        assert_eq!(family_measure(&p, &fam, 20).unwrap(), r(1, 1));
    }

    #[test]
    fn hit_measure_examples() {
        // Uniform, I = {0,1,2}, sets {{0},{1,2}}: inclusion-exclusion gives 5/8.
        let m = hit_measure(&uniform(), &[vec![0], vec![1, 2]], &[0, 1, 2], 20).unwrap();
        assert_eq!(m, r(5, 8));
        // Empty set list.
        assert_eq!(
            hit_measure(&uniform(), &[], &[0, 1, 2], 20).unwrap(),
            r(0, 1)
        );
        // A member outside the domain is a domain error.
        assert!(hit_measure(&uniform(), &[vec![5]], &[0, 1], 20).is_err());
    }

    #[test]
    fn hit_measure_respects_cap() {
        let domain: Vec<u32> = (0..22).collect();
        let err = hit_measure(&uniform(), &[vec![0]], &domain, 20).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { size: 22, cap: 20 }));
    }

    #[test]
    fn max_conjugate_values() {
        let p = skewed(&[(1, 4), (1, 2)]);
        let q = conjugate_bias(&p, ConjugateKind::MaxMap).unwrap();
        assert_eq!(q.prefix(), &[r(1, 3), r(0, 1)]);
        assert!(q.is_derived());
        // Constant tails map to constant tails.
        let c = BiasSequence::constant(r(1, 3)).unwrap();
        let qc = conjugate_bias(&c, ConjugateKind::MaxMap).unwrap();
        assert_eq!(qc.bias_at(11).unwrap(), r(1, 4));
    }

    #[test]
    fn union_conjugate_values() {
        let p = skewed(&[(1, 3)]);
        let q = skewed(&[(1, 2)]);
        let rseq = conjugate_bias(&p, ConjugateKind::UnionMap { dominating: &q }).unwrap();
        assert_eq!(rseq.prefix(), &[r(1, 4)]);
        // p = q gives the all-zero conjugate.
        let same = conjugate_bias(&p, ConjugateKind::UnionMap { dominating: &p }).unwrap();
        assert_eq!(same.prefix(), &[r(0, 1)]);
        // Domination failure is a typed error.
        let err = conjugate_bias(&q, ConjugateKind::UnionMap { dominating: &p }).unwrap_err();
        assert!(matches!(err, Error::NotDominated { coord: 0, .. }));
    }

    #[test]
    fn pushforward_single_coordinate() {
        let p = skewed(&[(1, 4)]);
        let aux = skewed(&[(1, 3)]);
        let s0 = FiniteTrace::from_bit_string(vec![0], "0").unwrap();
        let s1 = FiniteTrace::from_bit_string(vec![0], "1").unwrap();
        // (3/4)(2/3) = 1/2 on the zero side.
        assert!(pushforward_check(&p, &aux, &uniform(), &s0, 20).unwrap());
        assert!(pushforward_check(&p, &aux, &uniform(), &s1, 20).unwrap());
        // Wrong auxiliary misses: (3/4)(3/4) = 9/16 != 1/2.
        let bad = skewed(&[(1, 4)]);
        assert!(!pushforward_check(&p, &bad, &uniform(), &s0, 20).unwrap());
    }

    #[test]
    fn pushforward_with_all_zero_aux_is_identity() {
        let q = conjugate_bias(&uniform(), ConjugateKind::MaxMap).unwrap();
        for mask in 0..8u64 {
            let s = FiniteTrace::from_mask(&[0, 1, 2], mask);
            assert!(pushforward_check(&uniform(), &q, &uniform(), &s, 20).unwrap());
        }
    }

    #[test]
    fn pushforward_pair_cap_is_half() {
        let s = FiniteTrace::window(6, &[]).unwrap();
        let err = pushforward_mass(&uniform(), &uniform(), &s, 10).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { size: 12, cap: 10 }));
    }

    #[test]
    fn certificate_constant_diverges() {
        let p = BiasSequence::constant(r(1, 2)).unwrap();
        for k in 1..4 {
            let c = tail_certificate(&p, k, 5).unwrap();
            assert_eq!(c.verdict, Verdict::Diverges);
            assert!(c.tail_bound.is_none());
        }
    }

    #[test]
    fn certificate_geometric_is_exact() {
        // p_n = 2^{-n} past the prefix.
        let p = BiasSequence::new(
            vec![r(1, 2)],
            TailClass::Geometric {
                scale: r(1, 1),
                ratio: r(1, 2),
            },
        )
        .unwrap();
        // k = 1, start 4: Σ_{n>=4} 2^{-n} = 1/8 exactly.
        let c = tail_certificate(&p, 1, 4).unwrap();
        assert_eq!(c.verdict, Verdict::Converges);
        assert_eq!(c.tail_bound.unwrap(), r(1, 8));
        // k = 2: Σ_{n>=4} 4^{-n} = 1/192.
        let c2 = tail_certificate(&p, 2, 4).unwrap();
        assert_eq!(c2.tail_bound.unwrap(), r(1, 192));
    }

    #[test]
    fn certificate_power_law_threshold() {
        let half_prefix = vec![r(1, 2), r(1, 2)];
        let p = BiasSequence::new(
            half_prefix,
            TailClass::PowerLaw {
                scale: r(1, 1),
                exponent: 1,
            },
        )
        .unwrap();
        // k = 1: kα = 1, diverges.
        assert_eq!(tail_certificate(&p, 1, 10).unwrap().verdict, Verdict::Diverges);
        // k = 2: converges with the integral-test bound 1/10.
        let c = tail_certificate(&p, 2, 10).unwrap();
        assert_eq!(c.verdict, Verdict::Converges);
        assert_eq!(c.tail_bound.unwrap(), r(1, 10));
    }

    #[test]
    fn certificate_unknown_for_unspecified() {
        let p = skewed(&[(1, 2)]);
        let c = tail_certificate(&p, 3, 1).unwrap();
        assert_eq!(c.verdict, Verdict::Unknown);
    }
}
