//! Exact threshold arithmetic.
//!
//! The protocol gates ("distance strictly below 1/3", "distance at most
//! 1/6 - eps") sit on boundaries that real runs hit exactly, so they must not
//! be evaluated in floating point. Every finite `f64` in (0, 1) is a dyadic
//! rational; we extract it exactly and compare with integer arithmetic.

/// An exact non-negative rational with power-of-two denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dyadic {
    pub num: u64,
    /// log2 of the denominator.
    pub den_log2: u32,
}

impl Dyadic {
    /// Exact value of a float in [0, 1). Panics outside that range.
    pub fn from_f64(x: f64) -> Dyadic {
        assert!(x.is_finite() && (0.0..1.0).contains(&x), "need x in [0,1), got {x}");
        if x == 0.0 {
            return Dyadic { num: 0, den_log2: 0 };
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64 - 1023;
        let mut mant = (bits & ((1u64 << 52) - 1)) | (1u64 << 52); // implicit leading 1
        // x = mant * 2^(exp - 52); x < 1 so exp <= -1 and exp - 52 >= -1074 > -64 for
        // the epsilons in use; normalize out trailing zeros to keep numbers small.
        let mut den_log2 = (52 - exp) as u32;
        let tz = mant.trailing_zeros().min(den_log2);
        mant >>= tz;
        den_log2 -= tz;
        assert!(den_log2 <= 63, "epsilon has too fine a denominator: {x}");
        Dyadic { num: mant, den_log2 }
    }

    pub fn den(&self) -> u64 {
        1u64 << self.den_log2
    }
}

/// True iff `dist / m < 1/3`, i.e. `3 * dist < m`, exactly.
pub(crate) fn below_one_third(dist: u64, m: u64) -> bool {
    3 * (dist as u128) < m as u128
}

/// True iff `dist / m <= 1/6 - eps`, exactly:
/// `6 * dist * den <= m * (den - 6 * num)` (false whenever the threshold is negative).
pub(crate) fn within_decode_threshold(dist: u64, m: u64, eps: Dyadic) -> bool {
    let den = eps.den() as u128;
    let six_num = 6 * eps.num as u128;
    if six_num >= den {
        return false; // 1/6 - eps <= 0: nothing qualifies
    }
    6 * (dist as u128) * den <= (m as u128) * (den - six_num)
}

/// True iff `dist / m >= 1/2 - eps`, exactly:
/// `2 * dist * den >= m * (den - 2 * num)`.
#[cfg_attr(not(test), allow(dead_code))] // test oracle
pub(crate) fn at_least_half_minus(dist: u64, m: u64, eps: Dyadic) -> bool {
    let den = eps.den() as u128;
    let two_num = 2 * eps.num as u128;
    if two_num >= den {
        return true; // threshold <= 0
    }
    2 * (dist as u128) * den >= (m as u128) * (den - two_num)
}
