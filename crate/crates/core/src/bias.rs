//! Coordinate bias sequences for skewed product measures on `2^ω`.
//!
//! Coordinate `n` carries mass `p_n` at 1 and `1 - p_n` at 0. A sequence is
//! a finite explicit prefix plus a tail class that either determines the
//! remaining values or leaves them undefined.

use crate::error::{Error, Result};
use crate::rational::Rational;

/// How the bias behaves beyond the explicit prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TailClass {
    /// `p_n = c` for every tail coordinate.
    Constant(Rational),
    /// `p_n = scale / n^exponent`, defined for coordinates `n >= 1`.
    PowerLaw { scale: Rational, exponent: u32 },
    /// `p_n = scale * ratio^n`.
    Geometric { scale: Rational, ratio: Rational },
    /// No tail values; coordinates beyond the prefix are undefined.
    Unspecified,
}

/// Bias sequence `p̂ = (p_0, p_1, ...)`.
///
/// Values must lie in `(0, 1/2]`; sequences produced by the conjugate maps
/// may touch 0 (a point mass at bit 0) and are marked as derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasSequence {
    prefix: Vec<Rational>,
    tail: TailClass,
    derived: bool,
}

fn half() -> Rational {
    Rational::new(1, 2)
}

impl BiasSequence {
    pub fn new(prefix: Vec<Rational>, tail: TailClass) -> Result<Self> {
        Self::build(prefix, tail, false)
    }

    /// Constructor for conjugate outputs, where 0 is a legal value.
    pub(crate) fn derived(prefix: Vec<Rational>, tail: TailClass) -> Result<Self> {
        Self::build(prefix, tail, true)
    }

    fn build(prefix: Vec<Rational>, tail: TailClass, derived: bool) -> Result<Self> {
        let lo_ok = |v: &Rational| if derived { !v.is_negative() } else { v.is_positive() };
        for (i, p) in prefix.iter().enumerate() {
            if !lo_ok(p) || *p > half() {
                return Err(Error::invalid(
                    "bias",
                    format!("prefix value {p} at coordinate {i} outside range"),
                ));
            }
        }
        // The tail serves coordinates >= prefix_len; since every tail class is
        // non-increasing there, checking its first served value pins the range.
        let first_served = prefix.len() as u32;
        match &tail {
            TailClass::Constant(c) => {
                if !lo_ok(c) || *c > half() {
                    return Err(Error::invalid("bias", format!("constant tail {c} outside range")));
                }
            }
            TailClass::PowerLaw { scale, exponent } => {
                if !scale.is_positive() {
                    return Err(Error::invalid("bias", "power-law scale must be positive"));
                }
                if *exponent == 0 {
                    return Err(Error::invalid("bias", "power-law exponent must be >= 1"));
                }
                let n0 = first_served.max(1);
                let first = scale / Rational::from_int(n0 as i64).pow(*exponent as i32);
                if first > half() {
                    return Err(Error::invalid(
                        "bias",
                        format!("power-law tail value {first} at coordinate {n0} outside range"),
                    ));
                }
            }
            TailClass::Geometric { scale, ratio } => {
                if !scale.is_positive() {
                    return Err(Error::invalid("bias", "geometric scale must be positive"));
                }
                if !ratio.is_positive() || *ratio >= Rational::one() {
                    return Err(Error::invalid("bias", "geometric ratio must lie in (0, 1)"));
                }
                let first = scale * ratio.pow(first_served as i32);
                if first > half() {
                    return Err(Error::invalid(
                        "bias",
                        format!("geometric tail value {first} at coordinate {first_served} outside range"),
                    ));
                }
            }
            TailClass::Unspecified => {}
        }
        Ok(BiasSequence {
            prefix,
            tail,
            derived,
        })
    }

    /// The uniform measure: every coordinate fair.
    pub fn uniform() -> Self {
        BiasSequence {
            prefix: Vec::new(),
            tail: TailClass::Constant(half()),
            derived: false,
        }
    }

    pub fn constant(c: Rational) -> Result<Self> {
        Self::new(Vec::new(), TailClass::Constant(c))
    }

    pub fn prefix(&self) -> &[Rational] {
        &self.prefix
    }

    pub fn tail(&self) -> &TailClass {
        &self.tail
    }

    pub fn prefix_len(&self) -> u32 {
        self.prefix.len() as u32
    }

    pub fn is_derived(&self) -> bool {
        self.derived
    }

    /// Bias at a single coordinate; undefined coordinates are an error, never
    /// a default.
    pub fn bias_at(&self, coord: u32) -> Result<Rational> {
        if let Some(p) = self.prefix.get(coord as usize) {
            return Ok(p.clone());
        }
        match &self.tail {
            TailClass::Constant(c) => Ok(c.clone()),
            TailClass::PowerLaw { scale, exponent } => {
                if coord == 0 {
                    return Err(Error::BiasUndefined { coord });
                }
                Ok(scale / Rational::from_int(coord as i64).pow(*exponent as i32))
            }
            TailClass::Geometric { scale, ratio } => Ok(scale * ratio.pow(coord as i32)),
            TailClass::Unspecified => Err(Error::BiasUndefined { coord }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn prefix_overrides_tail() {
        let p = BiasSequence::new(
            vec![r(1, 3), r(1, 4)],
            TailClass::Constant(r(1, 2)),
        )
        .unwrap();
        assert_eq!(p.bias_at(0).unwrap(), r(1, 3));
        assert_eq!(p.bias_at(1).unwrap(), r(1, 4));
        assert_eq!(p.bias_at(100).unwrap(), r(1, 2));
    }

    #[test]
    fn range_validation() {
        assert!(BiasSequence::new(vec![r(2, 3)], TailClass::Unspecified).is_err());
        assert!(BiasSequence::new(vec![r(0, 1)], TailClass::Unspecified).is_err());
        assert!(BiasSequence::constant(r(1, 2)).is_ok());
        // Derived sequences may touch zero.
        assert!(BiasSequence::derived(vec![r(0, 1)], TailClass::Unspecified).is_ok());
        assert!(BiasSequence::derived(vec![r(-1, 2)], TailClass::Unspecified).is_err());
    }

    #[test]
    fn power_law_needs_a_long_enough_prefix() {
        // p_n = 1/n exceeds 1/2 at n = 1, so the prefix must cover 0 and 1.
        let tail = TailClass::PowerLaw {
            scale: r(1, 1),
            exponent: 1,
        };
        assert!(BiasSequence::new(vec![], tail.clone()).is_err());
        assert!(BiasSequence::new(vec![r(1, 2)], tail.clone()).is_err());
        let ok = BiasSequence::new(vec![r(1, 2), r(1, 2)], tail).unwrap();
        assert_eq!(ok.bias_at(2).unwrap(), r(1, 2));
        assert_eq!(ok.bias_at(5).unwrap(), r(1, 5));
    }

    #[test]
    fn power_law_value_at_zero_is_undefined() {
        let p = BiasSequence::new(
            vec![],
            TailClass::PowerLaw {
                scale: r(1, 2),
                exponent: 1,
            },
        )
        .unwrap();
        assert!(matches!(
            p.bias_at(0).unwrap_err(),
            Error::BiasUndefined { coord: 0 }
        ));
        assert_eq!(p.bias_at(4).unwrap(), r(1, 8));
    }

    #[test]
    fn geometric_values() {
        let p = BiasSequence::new(
            vec![],
            TailClass::Geometric {
                scale: r(1, 2),
                ratio: r(1, 2),
            },
        )
        .unwrap();
        assert_eq!(p.bias_at(0).unwrap(), r(1, 2));
        assert_eq!(p.bias_at(3).unwrap(), r(1, 16));
        // First served value above 1/2 is rejected.
        assert!(BiasSequence::new(
            vec![],
            TailClass::Geometric {
                scale: r(2, 1),
                ratio: r(1, 2),
            },
        )
        .is_err());
        // ...but a prefix long enough to skip the large values makes it legal.
        assert!(BiasSequence::new(
            vec![r(1, 2), r(1, 2), r(1, 2)],
            TailClass::Geometric {
                scale: r(2, 1),
                ratio: r(1, 2),
            },
        )
        .is_ok());
    }

    #[test]
    fn unspecified_tail_is_undefined() {
        let p = BiasSequence::new(vec![r(1, 2)], TailClass::Unspecified).unwrap();
        assert!(p.bias_at(0).is_ok());
        assert!(matches!(
            p.bias_at(1).unwrap_err(),
            Error::BiasUndefined { coord: 1 }
        ));
    }
}
