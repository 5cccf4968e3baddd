//! The binary code on domain pairs underlying each codeword third.
//!
//! Construction: the serialized pair (L bits) is packed into K = ceil(L/8)
//! bytes, encoded with a shortened systematic Reed-Solomon code of length
//! n_out = max(K, ceil((K-1)/(2*eps))) over GF(256), and every symbol is then
//! expanded to 256 bits through the Hadamard parity map H(s)[v] = parity(s&v).
//! Distinct symbols differ in exactly 128 of the 256 expanded positions, so
//! two distinct pairs differ in exactly 128 * (number of differing outer
//! symbols) bits: at least (1/2 - eps) * inner_len and at most inner_len / 2.
//! The max-distance cap required by the triple code therefore holds with
//! equality instead of merely within tolerance.
//!
//! Decoding is maximum-likelihood by exhaustive scan when the pair domain is
//! small (ties broken by enumeration order); otherwise per-symbol ML followed
//! by generalized-minimum-distance trials over the errors-and-erasures RS
//! decoder, which finds the nearest codeword whenever the received word is
//! within (1/4 - eps/2) * inner_len bits of one. The triple decoder only
//! accepts at up to (1/4 - 3*eps/2) * inner_len bits from a third, so both
//! paths produce identical protocol-visible behavior.

use std::sync::OnceLock;

use super::domain;
use crate::bits::BitString;
use crate::gf256::ReedSolomon;
use crate::Error;

/// 256-bit Hadamard expansions of every byte, as four u64 words each.
fn hadamard() -> &'static [[u64; 4]; 256] {
    static TABLE: OnceLock<[[u64; 4]; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0u64; 4]; 256];
        for (s, row) in t.iter_mut().enumerate() {
            for v in 0..256usize {
                if ((s & v).count_ones() & 1) == 1 {
                    row[v / 64] |= 1u64 << (v % 64);
                }
            }
        }
        t
    })
}

/// Largest pair domain decoded by exhaustive scan (covers n <= 6).
const SMALL_DOMAIN_MAX: u64 = 20_000;

#[derive(Debug)]
pub(crate) struct InnerCode {
    pub n: usize,
    pub k_out: usize,
    pub n_out: usize,
    rs: ReedSolomon,
    /// Cached codewords for every domain pair; only built for small domains.
    table: OnceLock<Vec<BitString>>,
}

impl InnerCode {
    /// Builds the code for component length `n` at quality `eps`
    /// (`eps` supplied as an exact dyadic rational numerator/denominator).
    pub fn new(n: usize, eps_num: u64, eps_den: u64) -> Result<InnerCode, Error> {
        let l_bits = domain::serialized_len(n);
        let k_out = l_bits.div_ceil(8);
        // n_out >= (K-1)/(2*eps) makes the relative outer distance >= 1 - 2*eps
        let needed = if k_out == 1 {
            1
        } else {
            (((k_out as u64 - 1) * eps_den + 2 * eps_num - 1) / (2 * eps_num)) as usize
        };
        let n_out = needed.max(k_out);
        if n_out > 255 {
            return Err(Error::InvalidParameter(format!(
                "epsilon too small for a GF(256) outer code at n={n} (needs {n_out} symbols)"
            )));
        }
        Ok(InnerCode {
            n,
            k_out,
            n_out,
            rs: ReedSolomon::new(n_out, k_out),
            table: OnceLock::new(),
        })
    }

    /// Codeword length in bits.
    pub fn len(&self) -> usize {
        self.n_out * 256
    }

    /// Encodes an already-serialized pair (L bits).
    pub fn encode_bits(&self, serialized: &BitString) -> BitString {
        debug_assert_eq!(serialized.len(), domain::serialized_len(self.n));
        let mut msg = vec![0u8; self.k_out];
        for (i, b) in serialized.iter().enumerate() {
            if b {
                msg[i / 8] |= 1 << (7 - i % 8);
            }
        }
        let outer = self.rs.encode(&msg);
        self.expand(&outer)
    }

    /// Encodes a domain pair.
    pub fn encode_pair(&self, z: &BitString, zp: &BitString) -> Result<BitString, Error> {
        Ok(self.encode_bits(&domain::serialize_pair(z, zp, self.n)?))
    }

    fn expand(&self, outer: &[u8]) -> BitString {
        let had = hadamard();
        let mut words = Vec::with_capacity(self.n_out * 4);
        for &sym in outer {
            words.extend_from_slice(&had[sym as usize]);
        }
        BitString::from_words(words, self.len())
    }

    fn serialized_of_symbols(&self, symbols: &[u8]) -> BitString {
        let l_bits = domain::serialized_len(self.n);
        BitString::from_bits((0..l_bits).map(|i| (symbols[i / 8] >> (7 - i % 8)) & 1 == 1))
    }

    /// Nearest-codeword decoding. Returns the decoded pair and the Hamming
    /// distance from `word` to that pair's codeword.
    pub fn decode(&self, word: &BitString) -> (BitString, BitString, u64) {
        assert_eq!(word.len(), self.len(), "inner decode length");
        if domain::pair_count(self.n) <= SMALL_DOMAIN_MAX {
            self.decode_small(word)
        } else {
            self.decode_gmd(word)
        }
    }

    fn codeword_table(&self) -> &Vec<BitString> {
        self.table.get_or_init(|| {
            (0..domain::pair_count(self.n))
                .map(|idx| {
                    let (z, zp) = domain::pair_at(self.n, idx);
                    self.encode_pair(&z, &zp).expect("enumerated pair is in domain")
                })
                .collect()
        })
    }

    fn decode_small(&self, word: &BitString) -> (BitString, BitString, u64) {
        let mut best_idx = 0u64;
        let mut best_dist = u64::MAX;
        for (idx, cw) in self.codeword_table().iter().enumerate() {
            let d = word.hamming(cw);
            if d < best_dist {
                best_dist = d;
                best_idx = idx as u64;
            }
        }
        let (z, zp) = domain::pair_at(self.n, best_idx);
        (z, zp, best_dist)
    }

    fn decode_gmd(&self, word: &BitString) -> (BitString, BitString, u64) {
        let had = hadamard();
        let words = word.words();

        // per-symbol maximum likelihood
        let mut ml_syms = vec![0u8; self.n_out];
        let mut ml_dist = vec![0u32; self.n_out];
        for i in 0..self.n_out {
            let block = &words[4 * i..4 * i + 4];
            let mut best_s = 0u8;
            let mut best_d = u32::MAX;
            for (s, row) in had.iter().enumerate() {
                let d = (block[0] ^ row[0]).count_ones()
                    + (block[1] ^ row[1]).count_ones()
                    + (block[2] ^ row[2]).count_ones()
                    + (block[3] ^ row[3]).count_ones();
                if d < best_d {
                    best_d = d;
                    best_s = s as u8;
                }
            }
            ml_syms[i] = best_s;
            ml_dist[i] = best_d;
        }

        let bit_distance = |outer: &[u8]| -> u64 {
            let mut d = 0u64;
            for (i, &sym) in outer.iter().enumerate() {
                let block = &words[4 * i..4 * i + 4];
                let row = &had[sym as usize];
                d += ((block[0] ^ row[0]).count_ones()
                    + (block[1] ^ row[1]).count_ones()
                    + (block[2] ^ row[2]).count_ones()
                    + (block[3] ^ row[3]).count_ones()) as u64;
            }
            d
        };

        if self.rs.is_codeword(&ml_syms) {
            let d = bit_distance(&ml_syms);
            let (z, zp) = self.pair_of_symbols(&ml_syms);
            return (z, zp, d);
        }

        // GMD: erase the least reliable symbols, most doubtful first
        let mut order: Vec<usize> = (0..self.n_out).collect();
        order.sort_by(|&a, &b| ml_dist[b].cmp(&ml_dist[a]).then(b.cmp(&a)));

        let mut best: Option<(Vec<u8>, u64)> = None;
        for s in 0..=self.rs.parity_len().min(self.n_out) {
            if let Some(cand) = self.rs.decode(&ml_syms, &order[..s]) {
                let d = bit_distance(&cand);
                if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
                    best = Some((cand, d));
                }
            }
        }

        match best {
            Some((outer, d)) => {
                let (z, zp) = self.pair_of_symbols(&outer);
                (z, zp, d)
            }
            None => {
                // nothing decodable anywhere near: return a valid pair read off
                // the raw ML symbols so the caller's distance threshold decides
                let (z, zp) = domain::sanitize_pair(&self.serialized_of_symbols(&ml_syms), self.n);
                let cw = self.encode_pair(&z, &zp).expect("sanitized pair is in domain");
                let d = word.hamming(&cw);
                (z, zp, d)
            }
        }
    }

    fn pair_of_symbols(&self, outer: &[u8]) -> (BitString, BitString) {
        let serialized = self.serialized_of_symbols(&outer[..self.k_out]);
        match domain::deserialize_pair(&serialized, self.n) {
            Ok(pair) => pair,
            // a valid RS codeword can still carry an out-of-domain payload
            Err(_) => domain::sanitize_pair(&serialized, self.n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dyadic(eps: f64) -> (u64, u64) {
        let d = crate::ratio::Dyadic::from_f64(eps);
        (d.num, d.den())
    }

    fn code(n: usize, eps: f64) -> InnerCode {
        let (num, den) = dyadic(eps);
        InnerCode::new(n, num, den).unwrap()
    }

    #[test]
    fn all_pair_distances_in_band_at_n2() {
        // every distinct pair differs by >= 0.4*len and <= 0.5*len at eps = 0.1
        let c = code(2, 0.1);
        let len = c.len() as u64;
        let count = domain::pair_count(2);
        let cws: Vec<BitString> = (0..count)
            .map(|i| {
                let (z, zp) = domain::pair_at(2, i);
                c.encode_pair(&z, &zp).unwrap()
            })
            .collect();
        let mut min = u64::MAX;
        let mut max = 0;
        for i in 0..cws.len() {
            for j in i + 1..cws.len() {
                let d = cws[i].hamming(&cws[j]);
                min = min.min(d);
                max = max.max(d);
            }
        }
        assert_eq!(count, 49);
        assert!(min * 10 >= len * 4, "min {min} below 0.4 of {len}");
        assert!(max * 2 <= len, "max {max} above half of {len}");
    }

    #[test]
    fn decode_matches_exhaustive_oracle_on_random_words() {
        let c = code(2, 0.1);
        let count = domain::pair_count(2);
        let cws: Vec<BitString> = (0..count)
            .map(|i| {
                let (z, zp) = domain::pair_at(2, i);
                c.encode_pair(&z, &zp).unwrap()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let w = BitString::random(&mut rng, c.len());
            let (z, zp, d) = c.decode(&w);
            // oracle: first index achieving the minimum distance
            let mut oracle_idx = 0;
            let mut oracle_d = u64::MAX;
            for (i, cw) in cws.iter().enumerate() {
                let dd = w.hamming(cw);
                if dd < oracle_d {
                    oracle_d = dd;
                    oracle_idx = i;
                }
            }
            assert_eq!(d, oracle_d);
            assert_eq!(domain::pair_index(2, &z, &zp), oracle_idx as u64);
        }
    }

    #[test]
    fn recovers_within_quarter_radius() {
        // corrupt floor((1/4 - eps) * len) - 1 random positions; must recover
        let c = code(3, 0.1);
        let len = c.len();
        let flips = ((len as f64) * 0.15) as usize - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let idx = rng.gen_range(0..domain::pair_count(3));
            let (z, zp) = domain::pair_at(3, idx);
            let cw = c.encode_pair(&z, &zp).unwrap();
            let mut w = cw.clone();
            let mut pos: Vec<usize> = (0..len).collect();
            pos.shuffle(&mut rng);
            for &p in &pos[..flips] {
                w.flip(p);
            }
            let (dz, dzp, d) = c.decode(&w);
            assert_eq!((dz, dzp), (z, zp));
            assert_eq!(d, flips as u64);
        }
    }

    #[test]
    fn gmd_path_recovers_within_guarantee_radius() {
        // n = 9 exceeds the small-domain cap, forcing the GMD path;
        // radius (1/4 - eps/2) * len is the floor the triple decoder relies on
        let c = code(9, 0.1);
        assert!(domain::pair_count(9) > SMALL_DOMAIN_MAX);
        let len = c.len();
        let radius = ((len as f64) * (0.25 - 0.05)) as usize - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let idx = rng.gen_range(0..domain::pair_count(9));
            let (z, zp) = domain::pair_at(9, idx);
            let cw = c.encode_pair(&z, &zp).unwrap();
            let mut w = cw.clone();
            let mut pos: Vec<usize> = (0..len).collect();
            pos.shuffle(&mut rng);
            for &p in &pos[..radius] {
                w.flip(p);
            }
            let (dz, dzp, d) = c.decode(&w);
            assert_eq!((dz, dzp), (z, zp));
            assert_eq!(d, radius as u64);
        }
    }

    #[test]
    fn parameters_scale_as_documented() {
        let c2 = code(2, 0.1);
        assert_eq!((c2.k_out, c2.n_out, c2.len()), (1, 1, 256));
        let c9 = code(9, 0.1);
        // L(9) = 2*(9+4) = 26 bits -> K = 4, n_out = ceil(3/0.2) = 15
        assert_eq!((c9.k_out, c9.n_out, c9.len()), (4, 15, 3840));
        assert!(InnerCode::new(40, 1, 1024).is_err(), "eps too small must be rejected");
    }
}
