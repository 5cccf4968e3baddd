//! Canonical enumeration and serialization of the message domain.
//!
//! The domain of one codeword component is every bit string of length at most
//! `n`. Strings are enumerated by length, then lexicographically:
//! "" , "0", "1", "00", "01", "10", "11", "000", ... and pairs are enumerated
//! in row-major order over that sequence. Serialization packs a pair into a
//! fixed `L(n) = 2*(n + ceil(log2(n+1)))` bits: each component is a big-endian
//! length field followed by the payload zero-padded to `n` bits.

use crate::bits::BitString;
use crate::Error;

/// Bits needed for a big-endian field holding values 0..=max_value.
pub(crate) fn field_bits(max_value: u64) -> usize {
    let values = max_value + 1;
    if values <= 1 {
        0
    } else {
        (64 - (values - 1).leading_zeros()) as usize
    }
}

/// Number of strings of length <= n: 2^(n+1) - 1.
pub(crate) fn string_count(n: usize) -> u64 {
    (1u64 << (n + 1)) - 1
}

/// Number of (z, z') pairs.
pub(crate) fn pair_count(n: usize) -> u64 {
    let s = string_count(n);
    s * s
}

/// Enumeration index of a string of length <= n.
#[cfg_attr(not(test), allow(dead_code))] // test oracle
pub(crate) fn string_index(s: &BitString) -> u64 {
    ((1u64 << s.len()) - 1) + s.value_be()
}

/// The string at enumeration index `idx`.
pub(crate) fn string_at(idx: u64) -> BitString {
    // lengths occupy [2^len - 1, 2^(len+1) - 1)
    let len = (64 - (idx + 1).leading_zeros() - 1) as usize;
    BitString::from_value_be(idx - ((1u64 << len) - 1), len)
}

#[cfg_attr(not(test), allow(dead_code))] // test oracle
pub(crate) fn pair_index(n: usize, z: &BitString, zp: &BitString) -> u64 {
    string_index(z) * string_count(n) + string_index(zp)
}

pub(crate) fn pair_at(n: usize, idx: u64) -> (BitString, BitString) {
    let s = string_count(n);
    (string_at(idx / s), string_at(idx % s))
}

/// Serialized length L(n) in bits.
pub(crate) fn serialized_len(n: usize) -> usize {
    2 * (n + field_bits(n as u64))
}

/// Packs `(z, z')` into the fixed-width layout. Both lengths must be <= n.
pub fn serialize_pair(z: &BitString, zp: &BitString, n: usize) -> Result<BitString, Error> {
    if z.len() > n || zp.len() > n {
        return Err(Error::Domain(format!(
            "component longer than n={n}: |z|={}, |z'|={}",
            z.len(),
            zp.len()
        )));
    }
    let fb = field_bits(n as u64);
    let mut out = BitString::new();
    for part in [z, zp] {
        let len = part.len() as u64;
        for i in 0..fb {
            out.push((len >> (fb - 1 - i)) & 1 == 1);
        }
        for b in part.iter() {
            out.push(b);
        }
        for _ in part.len()..n {
            out.push(false);
        }
    }
    debug_assert_eq!(out.len(), serialized_len(n));
    Ok(out)
}

/// Strict inverse of [`serialize_pair`]: rejects length fields above `n` and
/// nonzero padding.
pub fn deserialize_pair(bits: &BitString, n: usize) -> Result<(BitString, BitString), Error> {
    if bits.len() != serialized_len(n) {
        return Err(Error::LengthMismatch { left: bits.len(), right: serialized_len(n) });
    }
    let fb = field_bits(n as u64);
    let mut pos = 0;
    let mut parts = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut len = 0u64;
        for _ in 0..fb {
            len = (len << 1) | bits.get(pos) as u64;
            pos += 1;
        }
        if len as usize > n {
            return Err(Error::Domain(format!("length field {len} exceeds n={n}")));
        }
        let part = BitString::from_bits((0..len as usize).map(|i| bits.get(pos + i)));
        for i in len as usize..n {
            if bits.get(pos + i) {
                return Err(Error::Domain("nonzero padding".into()));
            }
        }
        pos += n;
        parts.push(part);
    }
    let zp = parts.pop().unwrap();
    let z = parts.pop().unwrap();
    Ok((z, zp))
}

/// Lenient reading used only as a last-resort fallback by the decoder: clamps
/// the length fields into range and ignores padding, so it always produces a
/// valid domain pair.
pub(crate) fn sanitize_pair(bits: &BitString, n: usize) -> (BitString, BitString) {
    debug_assert_eq!(bits.len(), serialized_len(n));
    let fb = field_bits(n as u64);
    let mut pos = 0;
    let mut parts = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut len = 0u64;
        for _ in 0..fb {
            len = (len << 1) | bits.get(pos) as u64;
            pos += 1;
        }
        let len = (len as usize).min(n);
        parts.push(BitString::from_bits((0..len).map(|i| bits.get(pos + i))));
        pos += n;
    }
    let zp = parts.pop().unwrap();
    let z = parts.pop().unwrap();
    (z, zp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_orders_by_length_then_value() {
        let first: Vec<String> = (0..7).map(|i| string_at(i).to_string()).collect();
        assert_eq!(first, ["", "0", "1", "00", "01", "10", "11"]);
        for idx in 0..string_count(4) {
            assert_eq!(string_index(&string_at(idx)), idx);
        }
    }

    #[test]
    fn pair_enumeration_roundtrip() {
        let n = 3;
        for idx in 0..pair_count(n) {
            let (z, zp) = pair_at(n, idx);
            assert_eq!(pair_index(n, &z, &zp), idx);
        }
    }

    #[test]
    fn counts_match_formula() {
        assert_eq!(pair_count(2), 49);
        assert_eq!(pair_count(3), 225);
        assert_eq!(serialized_len(3), 10);
        assert_eq!(serialized_len(2), 8);
        assert_eq!(serialized_len(1), 4);
    }

    #[test]
    fn serialize_empty_pair_is_all_zero() {
        let e = BitString::new();
        let s = serialize_pair(&e, &e, 3).unwrap();
        assert_eq!(s.to_string(), "0000000000");
    }

    #[test]
    fn serializations_are_distinct_and_roundtrip_at_n3() {
        // all (2^(n+1)-1)^2 = 225 pairs at n=3 serialize distinctly in 10 bits
        let n = 3;
        let mut seen = std::collections::HashSet::new();
        for idx in 0..pair_count(n) {
            let (z, zp) = pair_at(n, idx);
            let s = serialize_pair(&z, &zp, n).unwrap();
            assert_eq!(s.len(), 10);
            assert!(seen.insert(s.to_string()), "collision at {idx}");
            let (bz, bzp) = deserialize_pair(&s, n).unwrap();
            assert_eq!((bz, bzp), (z, zp));
        }
        assert_eq!(seen.len(), 225);
    }

    #[test]
    fn deserialize_rejects_out_of_domain() {
        // at n = 4 the length field has 3 bits, so values 5..=7 are illegal
        let e = BitString::new();
        let mut s = serialize_pair(&e, &e, 4).unwrap();
        s.set(0, true);
        s.set(1, true);
        s.set(2, true); // length field 111 = 7 > n = 4
        assert!(deserialize_pair(&s, 4).is_err());
        // nonzero padding behind an empty payload
        let mut s2 = serialize_pair(&e, &e, 3).unwrap();
        s2.set(4, true);
        assert!(deserialize_pair(&s2, 3).is_err());
        // sanitize always succeeds, even on rejected words
        let (z, zp) = sanitize_pair(&s, 4);
        assert!(z.len() <= 4 && zp.len() <= 4);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let bits = BitString::zeros(9);
        assert!(matches!(deserialize_pair(&bits, 3), Err(crate::Error::LengthMismatch { .. })));
    }
}
