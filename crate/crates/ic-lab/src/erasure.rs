//! The erasure-resilient simulation protocol.
//!
//! An arbitrary alternating noiseless protocol is replayed over a channel
//! that may erase bits (but never flip them). The parties cycle through three
//! modes — speaker, listener, passer — and only commit transcript bits once
//! the block structure guarantees them: the speaker sends 1s until the
//! listener's feedback confirms reception, then repeats the payload bit for
//! the rest of the block; a block of 0s from the passer tells the listener
//! the payload is complete and reconstructible from the last block in which
//! anything arrived. Because erased bits are *known* to be missing,
//! communication is delayed but never wrong, which is what lifts the
//! resilience to one half.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::{Error, Role};

/// What a party can receive in one round: a bit, or an erasure mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    Zero,
    One,
    Erased,
}

impl Symbol {
    pub fn from_bit(bit: bool) -> Symbol {
        if bit {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    /// The carried bit, unless erased.
    pub fn bit(self) -> Option<bool> {
        match self {
            Symbol::Zero => Some(false),
            Symbol::One => Some(true),
            Symbol::Erased => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Zero => write!(f, "0"),
            Symbol::One => write!(f, "1"),
            Symbol::Erased => write!(f, "_"),
        }
    }
}

/// A party's mode. Transitions follow the cycle
/// listener → speaker → passer → listener, and only at block boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Speaker,
    Listener,
    Passer,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Speaker => write!(f, "speaker"),
            Mode::Listener => write!(f, "listener"),
            Mode::Passer => write!(f, "passer"),
        }
    }
}

/// A deterministic alternating two-party protocol: Alice emits the bits at
/// even 0-based transcript positions, Bob the odd ones, and every position at
/// or past `n0` is a padding 1.
#[derive(Clone)]
pub struct NoiselessProtocol {
    n0: usize,
    next: Arc<dyn Fn(Role, &BitString, &BitString) -> bool + Send + Sync>,
}

impl fmt::Debug for NoiselessProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiselessProtocol").field("n0", &self.n0).finish_non_exhaustive()
    }
}

impl NoiselessProtocol {
    /// Wraps a next-bit function. `next(role, transcript, input)` is queried
    /// only at positions where it is `role`'s turn (even length for Alice);
    /// padding past `n0` is handled here, so `next` never sees it.
    pub fn new(
        n0: usize,
        next: Arc<dyn Fn(Role, &BitString, &BitString) -> bool + Send + Sync>,
    ) -> Result<NoiselessProtocol, Error> {
        if n0 < 2 {
            return Err(Error::InvalidParameter(format!(
                "noiseless protocol needs n0 >= 2 (both parties speak), got {n0}"
            )));
        }
        Ok(NoiselessProtocol { n0, next })
    }

    /// Simulated transcript length (before padding).
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// The party that emits 0-based transcript position `pos`.
    pub fn turn(pos: usize) -> Role {
        if pos % 2 == 0 {
            Role::Alice
        } else {
            Role::Bob
        }
    }

    /// The bit `role` sends after `transcript`, given its private `input`.
    pub fn next_bit(&self, role: Role, transcript: &BitString, input: &BitString) -> bool {
        debug_assert_eq!(NoiselessProtocol::turn(transcript.len()), role, "queried out of turn");
        if transcript.len() >= self.n0 {
            return true; // 1-padding past the real protocol
        }
        (self.next)(role, transcript, input)
    }

    /// The full noiseless transcript on inputs `(x, y)`, padded to `len`.
    pub fn transcript(&self, x: &BitString, y: &BitString, len: usize) -> BitString {
        let mut t = BitString::new();
        for pos in 0..len {
            let role = NoiselessProtocol::turn(pos);
            let input = match role {
                Role::Alice => x,
                Role::Bob => y,
            };
            let bit = self.next_bit(role, &t, input);
            t.push(bit);
        }
        t
    }
}

/// Converts a protocol with an arbitrary deterministic speaking order into a
/// strictly alternating one by inserting dummy 1-bits wherever the original
/// speaker would repeat, at most doubling the round count. `order[i]` names
/// the speaker of original round `i`, and `next(role, history, input)` is the
/// original next-bit function over the *original* (unexpanded) history.
pub fn make_alternating(
    order: &[Role],
    next: Arc<dyn Fn(Role, &BitString, &BitString) -> bool + Send + Sync>,
) -> Result<NoiselessProtocol, Error> {
    if order.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "original protocol needs at least 2 rounds, got {}",
            order.len()
        )));
    }
    // slot[p] = Some(i): alternating position p carries original round i;
    // None: a dummy 1 inserted to fix the parity
    let mut slots: Vec<Option<usize>> = Vec::with_capacity(2 * order.len());
    for (i, &who) in order.iter().enumerate() {
        if NoiselessProtocol::turn(slots.len()) != who {
            slots.push(None);
        }
        debug_assert_eq!(NoiselessProtocol::turn(slots.len()), who);
        slots.push(Some(i));
    }
    let alt_of_orig: Vec<usize> = slots
        .iter()
        .enumerate()
        .filter_map(|(p, s)| s.map(|_| p))
        .collect();
    let order: Vec<Role> = order.to_vec();
    let n0 = slots.len();
    NoiselessProtocol::new(
        n0,
        Arc::new(move |role, alt_transcript, input| {
            let pos = alt_transcript.len();
            match slots[pos] {
                None => true,
                Some(i) => {
                    debug_assert_eq!(order[i], role);
                    let orig_hist =
                        BitString::from_bits((0..i).map(|j| alt_transcript.get(alt_of_orig[j])));
                    next(role, &orig_hist, input)
                }
            }
        }),
    )
}

/// The built-in demonstration protocol: the parties interleave their inputs,
/// Alice's k-th turn sending `x[k]` and Bob's k-th turn sending `y[k]`.
/// Inputs must have the lengths given by [`input_exchange_lengths`].
pub fn input_exchange(n0: usize) -> Result<NoiselessProtocol, Error> {
    NoiselessProtocol::new(
        n0,
        Arc::new(|_, transcript, input| {
            let k = transcript.len() / 2;
            k < input.len() && input.get(k)
        }),
    )
}

/// Input lengths `(Alice, Bob)` for [`input_exchange`] with `n0` rounds.
pub fn input_exchange_lengths(n0: usize) -> (usize, usize) {
    (n0.div_ceil(2), n0 / 2)
}

/// Round and block geometry: `1/epsilon` is an integer `inv >= 4`, blocks
/// have `2*inv` rounds (each party speaking `inv` bits alternatingly, Alice
/// first), and the whole session runs `n0 * inv` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockParams {
    pub n0: usize,
    pub inv_epsilon: u64,
    /// Set when the requested epsilon was decreased to make `1/epsilon`
    /// integral.
    pub adjusted: bool,
}

impl BlockParams {
    /// Builds the geometry from a caller-supplied epsilon, decreasing it to
    /// the nearest value with `1/epsilon` integral when necessary.
    pub fn new(n0: usize, epsilon: f64) -> Result<BlockParams, Error> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let raw = 1.0 / epsilon;
        // 1/0.1 = 10.000000000000002 in floating point: treat near-integers
        // as exact rather than bumping them a whole step up
        let adjusted = (raw - raw.round()).abs() > 1e-9;
        let inv = if adjusted { raw.ceil() as u64 } else { raw.round() as u64 };
        BlockParams::from_inverse(n0, inv).map(|p| BlockParams { adjusted, ..p })
    }

    /// Builds the geometry from an integral `1/epsilon` directly.
    pub fn from_inverse(n0: usize, inv_epsilon: u64) -> Result<BlockParams, Error> {
        if n0 < 2 {
            return Err(Error::InvalidParameter(format!("n0 must be at least 2, got {n0}")));
        }
        if inv_epsilon < 4 {
            return Err(Error::InvalidParameter(format!(
                "1/epsilon must be an integer >= 4, got {inv_epsilon}"
            )));
        }
        Ok(BlockParams { n0, inv_epsilon, adjusted: false })
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.inv_epsilon as f64
    }

    pub fn rounds_per_block(&self) -> u64 {
        2 * self.inv_epsilon
    }

    pub fn blocks(&self) -> u64 {
        self.n0 as u64 * self.inv_epsilon
    }

    /// Total rounds `N = 2 * n0 / epsilon^2`.
    pub fn total_rounds(&self) -> u64 {
        self.blocks() * self.rounds_per_block()
    }

    /// Who sends in 1-based round `round` (Alice speaks first).
    pub fn sender(round: u64) -> Role {
        if round % 2 == 1 {
            Role::Alice
        } else {
            Role::Bob
        }
    }
}

/// What a block boundary did to one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeChange {
    pub from: Mode,
    pub to: Mode,
}

impl ModeChange {
    pub fn changed(&self) -> bool {
        self.from != self.to
    }
}

/// One side of the erasure protocol.
///
/// Feedback is strictly per-round: `last_received` holds exactly the symbol
/// of the most recent incoming round (erasure included), and is reset at
/// block boundaries. A 1 from the listener therefore certifies that the
/// speaker's *previous* bit arrived — which is what makes a confirmation
/// received after switching to the payload bit proof that the payload itself
/// was heard, and keeps the two parties' modes disjoint. Letting the value
/// stick across erasures or across block boundaries would let an in-budget
/// adversary forge confirmations from stale receptions.
#[derive(Clone)]
pub struct ErasureParty {
    role: Role,
    input: BitString,
    protocol: NoiselessProtocol,
    mode: Mode,
    transcript: BitString,
    last_received: Symbol,
    block_memory: Vec<Symbol>,
    last_informative: Option<Vec<Symbol>>,
    // speaker bookkeeping, all block-scoped
    confirmed_1_received: bool,
    sent_b: bool,
    one_after_b: bool,
    // passer bookkeeping
    heard_1: bool,
}

impl fmt::Debug for ErasureParty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ErasureParty")
            .field("role", &self.role)
            .field("mode", &self.mode)
            .field("transcript", &self.transcript)
            .finish_non_exhaustive()
    }
}

impl ErasureParty {
    /// Alice starts as the speaker with her first protocol bit already on
    /// her transcript; Bob starts as the listener with an empty one.
    pub fn new(role: Role, input: BitString, protocol: NoiselessProtocol) -> ErasureParty {
        let (mode, transcript) = match role {
            Role::Alice => {
                let mut t = BitString::new();
                t.push(protocol.next_bit(Role::Alice, &BitString::new(), &input));
                (Mode::Speaker, t)
            }
            Role::Bob => (Mode::Listener, BitString::new()),
        };
        ErasureParty {
            role,
            input,
            protocol,
            mode,
            transcript,
            last_received: Symbol::Erased,
            block_memory: Vec::new(),
            last_informative: None,
            confirmed_1_received: false,
            sent_b: false,
            one_after_b: false,
            heard_1: false,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn transcript(&self) -> &BitString {
        &self.transcript
    }

    /// The bit this party sends in the current round.
    pub fn round_output(&mut self) -> bool {
        match self.mode {
            Mode::Listener => self.last_received != Symbol::Erased,
            Mode::Speaker => {
                if self.confirmed_1_received {
                    self.sent_b = true;
                    debug_assert!(self.transcript.len() > 0, "speaker with empty transcript");
                    self.transcript.get(self.transcript.len() - 1)
                } else {
                    true
                }
            }
            Mode::Passer => false,
        }
    }

    /// Records one incoming symbol.
    pub fn observe(&mut self, symbol: Symbol) {
        self.block_memory.push(symbol);
        self.last_received = symbol;
        if symbol == Symbol::One {
            match self.mode {
                Mode::Speaker => {
                    if self.sent_b {
                        self.one_after_b = true;
                    } else {
                        self.confirmed_1_received = true;
                    }
                }
                Mode::Passer => self.heard_1 = true,
                Mode::Listener => {}
            }
        }
    }

    /// Applies the block-boundary transition and clears per-block state.
    ///
    /// The listener leaves for speaker mode when the first non-erased symbol
    /// of the block was a 0, reconstructing the payload bit from the last
    /// informative block strictly before this one and appending it together
    /// with its own next protocol bit. An honest run always has such a block;
    /// its absence signals a harness bug (or a non-erasure corruption) and is
    /// reported as a protocol violation.
    pub fn end_of_block(&mut self) -> Result<ModeChange, Error> {
        let from = self.mode;
        match self.mode {
            Mode::Listener => {
                let first = self.block_memory.iter().find_map(|s| s.bit());
                if first == Some(false) {
                    let prior = self.last_informative.as_deref().ok_or_else(|| {
                        Error::ProtocolViolation(
                            "listener told to commit with no informative prior block".into(),
                        )
                    })?;
                    let b = reconstruct_bit(prior)?;
                    let mut with_b = self.transcript.clone();
                    with_b.push(b);
                    let b2 = self.protocol.next_bit(self.role, &with_b, &self.input);
                    self.transcript = with_b;
                    self.transcript.push(b2);
                    self.mode = Mode::Speaker;
                }
            }
            Mode::Speaker => {
                if self.one_after_b {
                    self.mode = Mode::Passer;
                }
            }
            Mode::Passer => {
                if self.heard_1 {
                    self.mode = Mode::Listener;
                }
            }
        }
        if self.block_memory.iter().any(|s| s.bit().is_some()) {
            self.last_informative = Some(std::mem::take(&mut self.block_memory));
        } else {
            self.block_memory.clear();
        }
        self.last_received = Symbol::Erased;
        self.confirmed_1_received = false;
        self.sent_b = false;
        self.one_after_b = false;
        self.heard_1 = false;
        Ok(ModeChange { from, to: self.mode })
    }

    /// The committed transcript after all rounds: the first `n0` bits, or
    /// `None` (session failure, not an error) when too little was committed.
    pub fn final_transcript(&self, n0: usize) -> Option<BitString> {
        if self.transcript.len() >= n0 {
            Some(self.transcript.prefix(n0))
        } else {
            None
        }
    }
}

/// The bit a block of received symbols encodes: 0 if any received symbol is
/// a 0, else 1. (The speaker precedes the payload with 1s, so a payload of 0
/// shows up iff some 0 arrived.)
pub fn reconstruct_bit(symbols: &[Symbol]) -> Result<bool, Error> {
    if symbols.iter().all(|s| s.bit().is_none()) {
        return Err(Error::Domain("cannot reconstruct a bit from an all-erased block".into()));
    }
    Ok(!symbols.contains(&Symbol::Zero))
}
