//! The error-correcting code on message triples.
//!
//! A triple is `(z, z', delta)`: two bit strings of length at most `n` and a
//! four-valued instruction. With `C` the inner codeword of the pair (see
//! [`inner`]), the triple codeword is three concatenated thirds:
//!
//! ```text
//! delta = 0:      !C | C  | C
//! delta = 1:      C  | !C | C
//! delta = back:   C  | C  | !C
//! delta = bingo:  !C | !C | !C
//! ```
//!
//! Any two distinct triples are at relative distance at least `1/2 - eps`,
//! and two instruction variants of the same pair are exactly `2/3` apart.
//! Decoding reverses the complement pattern for each candidate instruction,
//! takes a per-position majority across the three thirds, decodes that inner
//! word, and accepts only when the re-encoded triple lands within relative
//! distance `1/6 - eps` of the received word; at most one instruction can
//! ever qualify.

pub(crate) mod domain;
mod inner;

pub use domain::{deserialize_pair, serialize_pair};

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ratio::{self, Dyadic};
use crate::Error;

/// The four protocol instructions carried by a codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instruction {
    /// Append a 0 to the receiver's guess.
    Zero,
    /// Append a 1 to the receiver's guess.
    One,
    /// Delete the receiver's last guess bit.
    Back,
    /// The sender believes the receiver's guess is complete and correct.
    Bingo,
}

impl Instruction {
    /// All instructions, in canonical order.
    pub const ALL: [Instruction; 4] =
        [Instruction::Zero, Instruction::One, Instruction::Back, Instruction::Bingo];

    /// Which thirds the encoding complements, as a 3-bit mask (third 0 is bit 2).
    fn complement_mask(self) -> u8 {
        match self {
            Instruction::Zero => 0b100,
            Instruction::One => 0b010,
            Instruction::Back => 0b001,
            Instruction::Bingo => 0b111,
        }
    }

    /// The next instruction in canonical order, wrapping around.
    pub fn cycled(self) -> Instruction {
        match self {
            Instruction::Zero => Instruction::One,
            Instruction::One => Instruction::Back,
            Instruction::Back => Instruction::Bingo,
            Instruction::Bingo => Instruction::Zero,
        }
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Instruction::Zero => "0",
            Instruction::One => "1",
            Instruction::Back => "back",
            Instruction::Bingo => "bingo",
        };
        write!(f, "{s}")
    }
}

/// A decoded or to-be-encoded message triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub first: BitString,
    pub second: BitString,
    pub instruction: Instruction,
}

impl Triple {
    pub fn new(first: BitString, second: BitString, instruction: Instruction) -> Triple {
        Triple { first, second, instruction }
    }

    /// The fixed message that opens the exchange protocol: `(empty, empty, 0)`.
    pub fn bootstrap() -> Triple {
        Triple::new(BitString::new(), BitString::new(), Instruction::Zero)
    }
}

/// A codeword of the triple code: exactly `M` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleCodeword {
    bits: BitString,
}

impl TripleCodeword {
    /// Wraps raw bits, enforcing the code length.
    pub fn from_bits(bits: BitString, m: usize) -> Result<TripleCodeword, Error> {
        if bits.len() != m {
            return Err(Error::LengthMismatch { left: bits.len(), right: m });
        }
        Ok(TripleCodeword { bits })
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn into_bits(self) -> BitString {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Parameters pinning down one instance of the code.
///
/// `m` and `inner_len` are derived from `n` and `epsilon`; they are carried in
/// the serialized form so configurations are self-describing, and re-derived
/// (and cross-checked) when a [`TripleCode`] is built. `seed` is retained for
/// configuration compatibility; the construction is deterministic and does
/// not consume it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub epsilon: f64,
    /// Total codeword length in bits (always divisible by 3).
    pub m: usize,
    /// Length of one third.
    pub inner_len: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CodeParams {
    /// Validates `n >= 1` and `epsilon` in (0, 0.1] and derives the lengths.
    pub fn new(n: usize, epsilon: f64, seed: u64) -> Result<CodeParams, Error> {
        if n == 0 || n > 60 {
            return Err(Error::InvalidParameter(format!("n must be in 1..=60, got {n}")));
        }
        if !(epsilon.is_finite() && 0.0 < epsilon && epsilon <= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 0.1], got {epsilon}"
            )));
        }
        let eps = Dyadic::from_f64(epsilon);
        let inner = inner::InnerCode::new(n, eps.num, eps.den())?;
        let inner_len = inner.len();
        Ok(CodeParams { n, epsilon, m: 3 * inner_len, inner_len, seed })
    }
}

/// Outcome of a decode, with the ambiguity diagnostic the protocol asserts on.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    /// The accepted triple and its absolute distance from the received word,
    /// or None when no instruction qualified.
    pub result: Option<(Triple, u64)>,
    /// How many instructions qualified; anything above 1 indicates a
    /// code-distance bug (provably impossible for this construction).
    pub qualifying: u8,
}

/// A constructed instance of the triple code.
#[derive(Debug)]
pub struct TripleCode {
    params: CodeParams,
    eps: Dyadic,
    inner: inner::InnerCode,
}

impl TripleCode {
    pub fn new(params: CodeParams) -> Result<TripleCode, Error> {
        let check = CodeParams::new(params.n, params.epsilon, params.seed)?;
        if check.m != params.m || check.inner_len != params.inner_len {
            return Err(Error::InvalidParameter(format!(
                "inconsistent code parameters: expected m={}, inner_len={}",
                check.m, check.inner_len
            )));
        }
        let eps = Dyadic::from_f64(params.epsilon);
        let inner = inner::InnerCode::new(params.n, eps.num, eps.den())?;
        Ok(TripleCode { params, eps, inner })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Total codeword length `M`.
    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Encodes a triple; both strings must have length at most `n`.
    pub fn encode(&self, triple: &Triple) -> Result<TripleCodeword, Error> {
        let c = self.inner.encode_pair(&triple.first, &triple.second)?;
        Ok(self.assemble(&c, triple.instruction))
    }

    fn assemble(&self, c: &BitString, instruction: Instruction) -> TripleCodeword {
        let mask = instruction.complement_mask();
        let not_c = c.complemented();
        let mut bits = BitString::new();
        for third in 0..3 {
            bits.extend_from(if mask & (0b100 >> third) != 0 { &not_c } else { c });
        }
        TripleCodeword { bits }
    }

    /// Hamming distances from each third of `word` to `c`.
    fn third_distances(&self, word: &TripleCodeword, c: &BitString) -> [u64; 3] {
        let l_words = self.params.inner_len / 64;
        let w = word.bits.words();
        let cw = c.words();
        let mut out = [0u64; 3];
        for (third, o) in out.iter_mut().enumerate() {
            let base = third * l_words;
            *o = (0..l_words)
                .map(|i| (w[base + i] ^ cw[i]).count_ones() as u64)
                .sum();
        }
        out
    }

    /// Distance from `word` to the `instruction`-variant built over inner
    /// codeword `c`, given the per-third distances to `c`.
    fn variant_distance(&self, thirds: &[u64; 3], instruction: Instruction) -> u64 {
        let l = self.params.inner_len as u64;
        let mask = instruction.complement_mask();
        (0..3)
            .map(|t| if mask & (0b100 >> t) != 0 { l - thirds[t] } else { thirds[t] })
            .sum()
    }

    /// Distances from `word` to all four instruction variants of `pair`.
    /// Exposed for the resolve step's first condition, which measures against
    /// the receiver's own (input, guess) words.
    pub fn distances_to_variants(
        &self,
        word: &TripleCodeword,
        z: &BitString,
        zp: &BitString,
    ) -> Result<[u64; 4], Error> {
        self.check_word(word)?;
        let c = self.inner.encode_pair(z, zp)?;
        let thirds = self.third_distances(word, &c);
        Ok([
            self.variant_distance(&thirds, Instruction::Zero),
            self.variant_distance(&thirds, Instruction::One),
            self.variant_distance(&thirds, Instruction::Back),
            self.variant_distance(&thirds, Instruction::Bingo),
        ])
    }

    /// Decodes a received word: for each instruction, undo its complement
    /// pattern, take the per-position majority of the three thirds, decode
    /// that inner word, and accept if the re-encoded triple is within
    /// relative distance `1/6 - eps`. At most one instruction can qualify.
    pub fn decode(&self, word: &TripleCodeword) -> Result<DecodeOutcome, Error> {
        self.check_word(word)?;
        let l_words = self.params.inner_len / 64;
        let w = word.bits.words();
        let m = self.params.m as u64;

        let mut result: Option<(Triple, u64)> = None;
        let mut qualifying = 0u8;

        for &instruction in &Instruction::ALL {
            let mask = instruction.complement_mask();
            // majority across the three (un-complemented) thirds
            let mut majority = Vec::with_capacity(l_words);
            for i in 0..l_words {
                let mut t = [0u64; 3];
                for (third, v) in t.iter_mut().enumerate() {
                    let raw = w[third * l_words + i];
                    *v = if mask & (0b100 >> third) != 0 { !raw } else { raw };
                }
                majority.push((t[0] & t[1]) | (t[0] & t[2]) | (t[1] & t[2]));
            }
            let inner_word = BitString::from_words(majority, self.params.inner_len);
            let (z, zp, _) = self.inner.decode(&inner_word);
            let c = self.inner.encode_pair(&z, &zp)?;
            let dist = self.variant_distance(&self.third_distances(word, &c), instruction);
            if ratio::within_decode_threshold(dist, m, self.eps) {
                qualifying += 1;
                if result.is_none() {
                    result = Some((Triple::new(z, zp, instruction), dist));
                }
            }
        }
        debug_assert!(qualifying <= 1, "two instructions decoded under threshold");
        Ok(DecodeOutcome { result, qualifying })
    }

    fn check_word(&self, word: &TripleCodeword) -> Result<(), Error> {
        if word.len() != self.params.m {
            return Err(Error::LengthMismatch { left: word.len(), right: self.params.m });
        }
        Ok(())
    }

    /// Exhaustive verification of the two distance properties. See
    /// [`DistanceReport`]; refuses when the number of distinct-triple pairs to
    /// examine exceeds `cap` (default 10^7).
    pub fn verify_code_distance(&self, cap: Option<u64>) -> Result<DistanceReport, Error> {
        let cap = cap.unwrap_or(10_000_000);
        let p = domain::pair_count(self.params.n);
        let triples = 4 * (p as u128);
        let combos = triples * (triples - 1) / 2;
        if combos > cap as u128 {
            return Err(Error::VerificationTooLarge { pairs: combos.min(u64::MAX as u128) as u64, cap });
        }

        let l = self.params.inner_len as u64;
        let cws: Vec<BitString> = (0..p)
            .map(|i| {
                let (z, zp) = domain::pair_at(self.params.n, i);
                self.inner.encode_pair(&z, &zp).expect("enumerated pair")
            })
            .collect();

        let mut min_inner = u64::MAX;
        let mut max_inner = 0u64;
        let mut min_pair = u64::MAX;
        let mut max_pair = 0u64;

        // cross-pair distances: every instruction combination of a distinct
        // inner pair is (3-k)*D + k*(l-D) with k in {0, 2} differing thirds,
        // which is exactly what a literal scan of the assembled words gives
        for i in 0..cws.len() {
            for j in i + 1..cws.len() {
                let d = cws[i].hamming(&cws[j]);
                min_inner = min_inner.min(d);
                max_inner = max_inner.max(d);
                min_pair = min_pair.min((3 * d).min(2 * l - d));
                max_pair = max_pair.max((3 * d).max(2 * l - d));
            }
        }

        // same-pair instruction variants, measured literally
        let mut min_instruction = u64::MAX;
        let mut max_instruction = 0u64;
        for cw in &cws {
            for a in 0..4 {
                for b in a + 1..4 {
                    let wa = self.assemble(cw, Instruction::ALL[a]);
                    let wb = self.assemble(cw, Instruction::ALL[b]);
                    let d = wa.bits.hamming(&wb.bits);
                    min_instruction = min_instruction.min(d);
                    max_instruction = max_instruction.max(d);
                    min_pair = min_pair.min(d);
                    max_pair = max_pair.max(d);
                }
            }
        }

        Ok(DistanceReport {
            n: self.params.n,
            m: self.params.m as u64,
            inner_len: l,
            triples: triples as u64,
            min_pair_dist: min_pair,
            max_pair_dist: max_pair,
            min_instruction_dist: min_instruction,
            max_instruction_dist: max_instruction,
            min_inner_dist: min_inner,
            max_inner_dist: max_inner,
        })
    }
}

/// Relative Hamming distance between two equal-length codewords.
pub fn relative_distance(a: &TripleCodeword, b: &TripleCodeword) -> Result<f64, Error> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.bits.hamming(&b.bits) as f64 / a.len() as f64)
}

/// Measured distance extremes over every pair of distinct triples.
///
/// `min_pair_dist`/`max_pair_dist` range over all distinct-triple pairs;
/// `min_instruction_dist`/`max_instruction_dist` over same-pair
/// different-instruction combinations only; `min_inner_dist`/`max_inner_dist`
/// over the underlying pair codewords. All values are absolute bit counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub n: usize,
    pub m: u64,
    pub inner_len: u64,
    pub triples: u64,
    pub min_pair_dist: u64,
    pub max_pair_dist: u64,
    pub min_instruction_dist: u64,
    pub max_instruction_dist: u64,
    pub min_inner_dist: u64,
    pub max_inner_dist: u64,
}

impl DistanceReport {
    pub const CSV_HEADER: &'static str = "n,m,inner_len,triples,min_pair_dist,max_pair_dist,\
        min_instruction_dist,max_instruction_dist,min_inner_dist,max_inner_dist";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m,
            self.inner_len,
            self.triples,
            self.min_pair_dist,
            self.max_pair_dist,
            self.min_instruction_dist,
            self.max_instruction_dist,
            self.min_inner_dist,
            self.max_inner_dist
        )
    }
}
