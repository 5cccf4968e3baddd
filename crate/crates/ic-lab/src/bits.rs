//! Packed bit strings.
//!
//! [`BitString`] is the common currency of the crate: party inputs, guesses,
//! transcripts and codewords are all bit strings. Bits are stored LSB-first
//! in 64-bit words; unused tail bits are kept at zero so equality and hashing
//! work structurally.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// A growable sequence of bits.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    /// The empty string.
    pub fn new() -> Self {
        BitString::default()
    }

    /// A string of `len` zero bits.
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Builds from boolean bits, first bit first.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = BitString::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// Parses a `"0101..."` literal. Any character other than `0`/`1` is an error.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut s = BitString::new();
        for c in text.chars() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                _ => return Err(Error::Domain(format!("bad bit character {c:?}"))),
            }
        }
        Ok(s)
    }

    /// Interprets `value` as a big-endian `len`-bit string (bit 0 is the most
    /// significant). Used by the canonical domain enumeration.
    pub fn from_value_be(value: u64, len: usize) -> Self {
        assert!(len <= 63, "enumeration strings are short");
        let mut s = BitString::new();
        for i in 0..len {
            s.push((value >> (len - 1 - i)) & 1 == 1);
        }
        s
    }

    /// The big-endian integer value of a short string.
    pub fn value_be(&self) -> u64 {
        assert!(self.len <= 63, "enumeration strings are short");
        let mut v = 0u64;
        for i in 0..self.len {
            v = (v << 1) | self.get(i) as u64;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at position `i` (0-based).
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let (w, o) = (i / 64, i % 64);
        if bit {
            self.words[w] |= 1 << o;
        } else {
            self.words[w] &= !(1 << o);
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        if bit {
            let i = self.len - 1;
            self.words[i / 64] |= 1 << (i % 64);
        }
    }

    /// Removes and returns the last bit.
    pub fn pop(&mut self) -> Option<bool> {
        if self.len == 0 {
            return None;
        }
        let i = self.len - 1;
        let bit = self.get(i);
        if bit {
            self.words[i / 64] &= !(1 << (i % 64));
        }
        self.len -= 1;
        if self.words.len() > self.len.div_ceil(64) {
            self.words.pop();
        }
        Some(bit)
    }

    /// Appends all bits of `other`.
    pub fn extend_from(&mut self, other: &BitString) {
        if self.len % 64 == 0 {
            // word-aligned fast path (codeword assembly always lands here)
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    /// Concatenation.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut s = self.clone();
        s.extend_from(other);
        s
    }

    /// The string with every bit flipped.
    pub fn complemented(&self) -> BitString {
        let mut s = self.clone();
        for w in &mut s.words {
            *w = !*w;
        }
        s.mask_tail();
        s
    }

    /// Hamming distance to a same-length string.
    pub fn hamming(&self, other: &BitString) -> u64 {
        assert_eq!(self.len, other.len, "hamming over unequal lengths");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum()
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        if self.len > other.len {
            return false;
        }
        (0..self.len).all(|i| self.get(i) == other.get(i))
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> BitString {
        assert!(len <= self.len);
        BitString::from_bits((0..len).map(|i| self.get(i)))
    }

    /// The string without its first `n` bits.
    pub fn skip(&self, n: usize) -> BitString {
        assert!(n <= self.len);
        BitString::from_bits((n..self.len).map(|i| self.get(i)))
    }

    /// Iterates over the bits.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Backing words (tail bits beyond `len` are zero).
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> BitString {
        debug_assert_eq!(words.len(), len.div_ceil(64));
        let mut s = BitString { words, len };
        s.mask_tail();
        s
    }

    /// `len` random bits from `rng`.
    pub fn random<R: rand::Rng>(rng: &mut R, len: usize) -> BitString {
        BitString::from_bits((0..len).map(|_| rng.gen::<bool>()))
    }

    fn mask_tail(&mut self) {
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl std::str::FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BitString::parse(s)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        BitString::parse(&text).map_err(serde::de::Error::custom)
    }
}
