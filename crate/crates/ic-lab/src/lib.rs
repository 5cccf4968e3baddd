//! Simulation laboratory for error-resilient two-party interactive protocols.
//!
//! The crate implements two binary protocols that survive adversarial channel
//! corruption, together with the machinery needed to experiment with them:
//!
//! * [`exchange`] — a message-exchange protocol in which both parties learn
//!   each other's input despite a constant fraction of adversarially flipped
//!   bits. Each message is a codeword of the triple code from [`ecc`], and
//!   state updates are applied probabilistically based on decoding distance.
//! * [`erasure`] — a block-structured simulation of an arbitrary alternating
//!   noiseless protocol over a channel that erases bits. Parties move through
//!   speaker/listener/passer modes and only commit transcript bits once they
//!   are certain.
//! * [`ecc`] — the error-correcting code both directions rely on: a code over
//!   message triples (two bit strings plus a four-valued instruction) with
//!   pairwise relative distance at least `1/2 - eps` and instruction variants
//!   exactly `2/3` apart.
//! * [`channel`] / [`adversary`] — adversarial channels with hard corruption
//!   budgets, and a registry of corruption strategies selectable by name.
//! * [`harness`] — seeded single sessions and deterministic Monte Carlo
//!   ensembles with invariant instrumentation.
//!
//! Everything is deterministic given the configured seeds: party randomness
//! comes from per-role counter-based streams, adversaries get their own
//! streams, and ensemble aggregation is order-independent, so reruns (serial
//! or parallel) produce identical results.

pub mod adversary;
pub mod bits;
pub mod channel;
pub mod ecc;
pub mod erasure;
pub mod exchange;
pub mod harness;

mod error;
mod gf256;
mod ratio;
mod rng;

pub use bits::BitString;
pub use error::Error;

/// Which of the two parties an object belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    /// The opposite role.
    pub fn other(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Alice => write!(f, "alice"),
            Role::Bob => write!(f, "bob"),
        }
    }
}
