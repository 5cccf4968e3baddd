//! Adversarial channels with hard corruption budgets.
//!
//! Every transmitted unit — an M-bit message on the bit-flip channel, a
//! single bit on the erasure channel — is first shown to an adversary, whose
//! requested corruption is applied only up to the remaining budget: flip
//! positions are honored in ascending order until the budget runs out, and an
//! erase request with nothing left to spend delivers the bit intact. Budgets
//! never reject a session; over-budget requests are clipped and counted.

use crate::adversary::{Adversary, AdversaryAction};
use crate::bits::BitString;
use crate::ecc::TripleCodeword;
use crate::erasure::{BlockParams, Symbol};
use crate::{Error, Role};

/// Which corruption model a channel implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    BitFlip,
    Erasure,
}

/// A global corruption allowance: `limit = ⌊fraction × total⌋` units, where a
/// unit is one flipped bit or one erased symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionBudget {
    total_units: u64,
    limit: u64,
    spent: u64,
    clamped: bool,
}

impl CorruptionBudget {
    /// A negative fraction (which the guarantee-boundary formulas produce
    /// for large epsilon) clamps to a zero budget rather than failing; the
    /// clamp is observable via [`CorruptionBudget::was_clamped`].
    pub fn new(fraction: f64, total_units: u64) -> CorruptionBudget {
        let raw = fraction * total_units as f64;
        let (limit, clamped) = if raw.is_nan() || raw < 0.0 {
            (0, true)
        } else {
            ((raw.floor() as u64).min(total_units), false)
        };
        CorruptionBudget { total_units, limit, spent: 0, clamped }
    }

    pub fn total_units(&self) -> u64 {
        self.total_units
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.spent
    }

    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    fn charge(&mut self, units: u64) {
        self.spent += units;
        assert!(self.spent <= self.limit, "budget overspent: a channel bug");
    }
}

/// What actually went over the wire for one unit.
#[derive(Debug, Clone, PartialEq)]
pub enum Delivered {
    /// Bit-flip channel: the (possibly flipped) message bits.
    Message(BitString),
    /// Erasure channel: the delivered symbol.
    Symbol(Symbol),
}

/// One transmitted unit, as both sides of the channel saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeRecord {
    pub sender: Role,
    pub sent: BitString,
    pub delivered: Delivered,
}

/// Position of the current erasure-channel round inside its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPosition {
    pub block_index: u64,
    /// 1-based round within the block.
    pub round_in_block: u64,
    pub rounds_per_block: u64,
}

/// Everything an adversary may look at when deciding on a corruption: the
/// full past traffic, both private inputs (the adversary is unbounded and
/// knows everything except randomness not yet drawn), and its own budget.
#[derive(Debug)]
pub struct AdversaryView<'a> {
    pub kind: ChannelKind,
    /// 1-based index of the current unit (message number, or round).
    pub unit_index: u64,
    pub sender: Role,
    /// The unit as sent: M bits, or a single bit on the erasure channel.
    pub sent: &'a BitString,
    pub history: &'a [ExchangeRecord],
    /// `[Alice's, Bob's]` private inputs.
    pub inputs: [&'a BitString; 2],
    pub remaining_budget: u64,
    /// Block geometry, on erasure channels only.
    pub block: Option<BlockPosition>,
}

/// Counters for adversary requests the channel refused to honor in full.
/// Neither is an invariant violation — clipping is the documented budget
/// semantics and kind mismatches are ignored — but both are worth surfacing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelIncidents {
    /// Actions trimmed because the budget ran out.
    pub clipped: u64,
    /// Actions of the wrong kind (e.g. an erase on the bit-flip channel).
    pub kind_mismatches: u64,
}

/// The bit-flip channel: delivers M-bit messages with adversarially chosen
/// bits inverted, charging one budget unit per flipped bit.
pub struct BitFlipChannel {
    budget: CorruptionBudget,
    inputs: [BitString; 2],
    history: Vec<ExchangeRecord>,
    incidents: ChannelIncidents,
}

impl BitFlipChannel {
    pub fn new(budget: CorruptionBudget, alice_input: BitString, bob_input: BitString) -> Self {
        BitFlipChannel {
            budget,
            inputs: [alice_input, bob_input],
            history: Vec::new(),
            incidents: ChannelIncidents::default(),
        }
    }

    pub fn budget(&self) -> &CorruptionBudget {
        &self.budget
    }

    pub fn incidents(&self) -> ChannelIncidents {
        self.incidents
    }

    pub fn history(&self) -> &[ExchangeRecord] {
        &self.history
    }

    /// Passes one message through the adversary and applies the clipped
    /// flip set.
    pub fn transmit(
        &mut self,
        sender: Role,
        word: &TripleCodeword,
        adversary: &mut dyn Adversary,
    ) -> Result<TripleCodeword, Error> {
        let m = word.bits().len();
        let action = {
            let view = AdversaryView {
                kind: ChannelKind::BitFlip,
                unit_index: self.history.len() as u64 + 1,
                sender,
                sent: word.bits(),
                history: &self.history,
                inputs: [&self.inputs[0], &self.inputs[1]],
                remaining_budget: self.budget.remaining(),
                block: None,
            };
            adversary.decide(&view)
        };
        let mut delivered = word.bits().clone();
        match action {
            AdversaryAction::Pass => {}
            AdversaryAction::Erase => self.incidents.kind_mismatches += 1,
            AdversaryAction::Flips(mut positions) => {
                positions.sort_unstable();
                positions.dedup();
                let valid = positions.len();
                positions.retain(|&p| p < m);
                let affordable = (self.budget.remaining() as usize).min(positions.len());
                if affordable < valid {
                    self.incidents.clipped += 1;
                }
                positions.truncate(affordable);
                for &p in &positions {
                    delivered.flip(p);
                }
                self.budget.charge(positions.len() as u64);
            }
        }
        self.history.push(ExchangeRecord {
            sender,
            sent: word.bits().clone(),
            delivered: Delivered::Message(delivered.clone()),
        });
        TripleCodeword::from_bits(delivered, m)
    }
}

/// The erasure channel: delivers single bits, each of which the adversary may
/// replace with an erasure mark for one budget unit. Bits are never flipped.
pub struct ErasureChannel {
    budget: CorruptionBudget,
    inputs: [BitString; 2],
    block: BlockParams,
    history: Vec<ExchangeRecord>,
    per_block_erasures: Vec<u64>,
    incidents: ChannelIncidents,
}

impl ErasureChannel {
    pub fn new(
        budget: CorruptionBudget,
        block: BlockParams,
        alice_input: BitString,
        bob_input: BitString,
    ) -> Self {
        ErasureChannel {
            budget,
            inputs: [alice_input, bob_input],
            block,
            history: Vec::new(),
            per_block_erasures: vec![0; block.blocks() as usize],
            incidents: ChannelIncidents::default(),
        }
    }

    pub fn budget(&self) -> &CorruptionBudget {
        &self.budget
    }

    pub fn incidents(&self) -> ChannelIncidents {
        self.incidents
    }

    pub fn history(&self) -> &[ExchangeRecord] {
        &self.history
    }

    /// Erasures charged against each block, for the per-block progress check.
    pub fn per_block_erasures(&self) -> &[u64] {
        &self.per_block_erasures
    }

    /// Passes one bit through the adversary.
    pub fn transmit(&mut self, sender: Role, bit: bool, adversary: &mut dyn Adversary) -> Symbol {
        let round = self.history.len() as u64 + 1;
        let rpb = self.block.rounds_per_block();
        let block_index = (round - 1) / rpb;
        let sent = BitString::from_bits([bit]);
        let action = {
            let view = AdversaryView {
                kind: ChannelKind::Erasure,
                unit_index: round,
                sender,
                sent: &sent,
                history: &self.history,
                inputs: [&self.inputs[0], &self.inputs[1]],
                remaining_budget: self.budget.remaining(),
                block: Some(BlockPosition {
                    block_index,
                    round_in_block: (round - 1) % rpb + 1,
                    rounds_per_block: rpb,
                }),
            };
            adversary.decide(&view)
        };
        let symbol = match action {
            AdversaryAction::Pass => Symbol::from_bit(bit),
            AdversaryAction::Flips(_) => {
                self.incidents.kind_mismatches += 1;
                Symbol::from_bit(bit)
            }
            AdversaryAction::Erase => {
                if self.budget.remaining() >= 1 {
                    self.budget.charge(1);
                    self.per_block_erasures[block_index as usize] += 1;
                    Symbol::Erased
                } else {
                    self.incidents.clipped += 1;
                    Symbol::from_bit(bit)
                }
            }
        };
        self.history.push(ExchangeRecord { sender, sent, delivered: Delivered::Symbol(symbol) });
        symbol
    }
}
