//! Corruption strategies and the registry that builds them by name.
//!
//! An [`Adversary`] sees the full channel view (past traffic, both inputs,
//! remaining budget) and decides per transmitted unit whether to corrupt it.
//! Strategies are registered under kebab-case names with a string parameter
//! map, so experiment configs can say `erase-one-party:target=alice`; custom
//! strategies plug in through [`AdversaryRegistry::register`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::channel::{AdversaryView, ChannelKind};
use crate::ecc::{Triple, TripleCode, TripleCodeword};
use crate::erasure::BlockParams;
use crate::{Error, Role};

/// What to do with the unit currently in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryAction {
    Pass,
    /// Bit-flip channels: invert these positions (deduplicated, clipped to
    /// the budget in ascending order).
    Flips(Vec<usize>),
    /// Erasure channels: replace the bit with an erasure mark.
    Erase,
}

/// A corruption strategy. Implementations must be deterministic given their
/// construction-time seed: `decide` is called exactly once per unit, in
/// transmission order.
pub trait Adversary: Send {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction;
}

/// Everything available when instantiating a strategy for one session.
pub struct AdversaryContext<'a> {
    pub kind: ChannelKind,
    pub params: &'a BTreeMap<String, String>,
    /// The session's code, on bit-flip channels (code-aware attacks).
    pub code: Option<Arc<TripleCode>>,
    /// The session's block geometry, on erasure channels.
    pub block: Option<BlockParams>,
    /// Seed for strategy-internal randomness.
    pub seed: u64,
}

type Builder = Box<dyn Fn(&AdversaryContext<'_>) -> Result<Box<dyn Adversary>, Error> + Send + Sync>;

/// Name-indexed strategy constructors.
pub struct AdversaryRegistry {
    builders: BTreeMap<String, Builder>,
}

impl AdversaryRegistry {
    /// An empty registry.
    pub fn new() -> AdversaryRegistry {
        AdversaryRegistry { builders: BTreeMap::new() }
    }

    /// The registry with all built-in strategies.
    pub fn with_builtins() -> AdversaryRegistry {
        let mut reg = AdversaryRegistry::new();
        reg.register("null", |ctx| {
            expect_params(ctx.params, &[])?;
            Ok(null_adversary())
        });
        reg.register("random", |ctx| {
            expect_params(ctx.params, &["rate", "seed"])?;
            let rate = require_f64(ctx.params, "rate")?;
            let seed = optional_u64(ctx.params, "seed")?.unwrap_or(ctx.seed);
            random_adversary(rate, seed)
        });
        reg.register("flip-instruction", |ctx| {
            expect_params(ctx.params, &[])?;
            Ok(flip_instruction_adversary(require_code(ctx)?))
        });
        reg.register("flip-question-and-instruction", |ctx| {
            expect_params(ctx.params, &[])?;
            Ok(flip_question_and_instruction_adversary(require_code(ctx)?))
        });
        reg.register("erase-one-party", |ctx| {
            expect_params(ctx.params, &["target"])?;
            require_erasure(ctx)?;
            let target = match ctx.params.get("target").map(String::as_str) {
                Some("alice") => Role::Alice,
                Some("bob") => Role::Bob,
                other => {
                    return Err(Error::Config(format!(
                        "erase-one-party needs target=alice or target=bob, got {other:?}"
                    )))
                }
            };
            Ok(erase_one_party_adversary(target))
        });
        reg.register("erase-block-halves", |ctx| {
            expect_params(ctx.params, &["seed"])?;
            require_erasure(ctx)?;
            let block = ctx.block.ok_or_else(|| {
                Error::Config("erase-block-halves needs the session block geometry".into())
            })?;
            let seed = optional_u64(ctx.params, "seed")?.unwrap_or(ctx.seed);
            Ok(erase_block_halves_adversary(block, seed))
        });
        reg
    }

    /// Registers (or replaces) a strategy under `name`.
    pub fn register(
        &mut self,
        name: &str,
        builder: impl Fn(&AdversaryContext<'_>) -> Result<Box<dyn Adversary>, Error>
            + Send
            + Sync
            + 'static,
    ) {
        self.builders.insert(name.to_string(), Box::new(builder));
    }

    /// Instantiates the named strategy for one session.
    pub fn build(
        &self,
        name: &str,
        ctx: &AdversaryContext<'_>,
    ) -> Result<Box<dyn Adversary>, Error> {
        match self.builders.get(name) {
            Some(builder) => builder(ctx),
            None => Err(Error::Config(format!(
                "unknown adversary {name:?}; known: {}",
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }
}

impl Default for AdversaryRegistry {
    fn default() -> Self {
        AdversaryRegistry::with_builtins()
    }
}

/// Splits `name[:key=value,key=value,...]` into the name and parameter map.
pub fn parse_spec(spec: &str) -> Result<(String, BTreeMap<String, String>), Error> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n, Some(r)),
        None => (spec, None),
    };
    if name.is_empty() {
        return Err(Error::Config(format!("empty adversary name in {spec:?}")));
    }
    let mut params = BTreeMap::new();
    if let Some(rest) = rest {
        for piece in rest.split(',') {
            let (k, v) = piece.split_once('=').ok_or_else(|| {
                Error::Config(format!("malformed adversary parameter {piece:?} (want key=value)"))
            })?;
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config(format!("malformed adversary parameter {piece:?}")));
            }
            if params.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate adversary parameter {k:?}")));
            }
        }
    }
    Ok((name.to_string(), params))
}

fn expect_params(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<(), Error> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown adversary parameter {key:?}; allowed: {allowed:?}"
            )));
        }
    }
    Ok(())
}

fn require_f64(params: &BTreeMap<String, String>, key: &str) -> Result<f64, Error> {
    let raw = params
        .get(key)
        .ok_or_else(|| Error::Config(format!("missing adversary parameter {key:?}")))?;
    raw.parse::<f64>()
        .map_err(|_| Error::Config(format!("adversary parameter {key}={raw:?} is not a number")))
}

fn optional_u64(params: &BTreeMap<String, String>, key: &str) -> Result<Option<u64>, Error> {
    match params.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<u64>().map(Some).map_err(|_| {
            Error::Config(format!("adversary parameter {key}={raw:?} is not an integer"))
        }),
    }
}

fn require_code(ctx: &AdversaryContext<'_>) -> Result<Arc<TripleCode>, Error> {
    if ctx.kind != ChannelKind::BitFlip {
        return Err(Error::Config("this adversary only works on bit-flip channels".into()));
    }
    ctx.code
        .clone()
        .ok_or_else(|| Error::Config("this adversary needs the session code".into()))
}

fn require_erasure(ctx: &AdversaryContext<'_>) -> Result<(), Error> {
    if ctx.kind != ChannelKind::Erasure {
        return Err(Error::Config("this adversary only works on erasure channels".into()));
    }
    Ok(())
}

struct NullAdversary;

impl Adversary for NullAdversary {
    fn decide(&mut self, _view: &AdversaryView<'_>) -> AdversaryAction {
        AdversaryAction::Pass
    }
}

/// No corruption at all.
pub fn null_adversary() -> Box<dyn Adversary> {
    Box::new(NullAdversary)
}

struct RandomAdversary {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Adversary for RandomAdversary {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        match view.kind {
            ChannelKind::BitFlip => {
                let flips: Vec<usize> =
                    (0..view.sent.len()).filter(|_| self.rng.gen::<f64>() < self.rate).collect();
                if flips.is_empty() {
                    AdversaryAction::Pass
                } else {
                    AdversaryAction::Flips(flips)
                }
            }
            ChannelKind::Erasure => {
                if self.rng.gen::<f64>() < self.rate {
                    AdversaryAction::Erase
                } else {
                    AdversaryAction::Pass
                }
            }
        }
    }
}

/// Corrupts each bit independently at `rate`, clipped to the budget.
pub fn random_adversary(rate: f64, seed: u64) -> Result<Box<dyn Adversary>, Error> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("corruption rate must be in [0, 1], got {rate}")));
    }
    Ok(Box::new(RandomAdversary { rate, rng: crate::rng::stream(seed, "random-adversary") }))
}

/// Decodes the sent message (adversaries are unbounded, and honest traffic
/// decodes exactly) and returns the flips that turn it into the variant with
/// the next instruction, or `Pass` when anything is off.
fn reencode_flips(code: &TripleCode, sent: &BitString, rewrite: impl Fn(Triple) -> Triple) -> AdversaryAction {
    let word = match TripleCodeword::from_bits(sent.clone(), sent.len()) {
        Ok(w) => w,
        Err(_) => return AdversaryAction::Pass,
    };
    let triple = match code.decode(&word) {
        Ok(out) => match out.result {
            Some((t, 0)) => t,
            _ => return AdversaryAction::Pass,
        },
        Err(_) => return AdversaryAction::Pass,
    };
    let target = match code.encode(&rewrite(triple)) {
        Ok(t) => t,
        Err(_) => return AdversaryAction::Pass,
    };
    let flips: Vec<usize> =
        (0..sent.len()).filter(|&i| sent.get(i) != target.bits().get(i)).collect();
    AdversaryAction::Flips(flips)
}

struct FlipInstruction {
    code: Arc<TripleCode>,
}

impl Adversary for FlipInstruction {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        if view.kind != ChannelKind::BitFlip || view.sender != Role::Bob {
            return AdversaryAction::Pass;
        }
        reencode_flips(&self.code, view.sent, |mut t| {
            t.instruction = t.instruction.cycled();
            t
        })
    }
}

/// On every Bob message, rewrites the instruction to a different variant of
/// the same pair — a 2/3-relative-distance move that the condition-1
/// closeness check must reject.
pub fn flip_instruction_adversary(code: Arc<TripleCode>) -> Box<dyn Adversary> {
    Box::new(FlipInstruction { code })
}

struct FlipQuestionAndInstruction {
    code: Arc<TripleCode>,
}

impl Adversary for FlipQuestionAndInstruction {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        // every other Bob message: 2, 6, 10, ...
        if view.kind != ChannelKind::BitFlip
            || view.sender != Role::Bob
            || view.unit_index % 4 != 2
        {
            return AdversaryAction::Pass;
        }
        let n = self.code.params().n;
        let alice_input = view.inputs[0].clone();
        reencode_flips(&self.code, view.sent, move |mut t| {
            // replace Bob's claim about Alice's input with the first
            // enumerated string that is neither his claim nor the truth,
            // and cycle the instruction
            let mut idx = 0;
            let substitute = loop {
                let candidate = crate::ecc::domain::string_at(idx);
                if candidate.len() > n {
                    break t.first.clone(); // domain exhausted: leave unchanged
                }
                if candidate != t.first && candidate != alice_input {
                    break candidate;
                }
                idx += 1;
            };
            t.first = substitute;
            t.instruction = t.instruction.cycled();
            t
        })
    }
}

/// On every other Bob message, rewrites both the claim (Bob's question about
/// Alice's input) and the instruction — roughly an M/2 corruption that forces
/// the receiver onto the low-probability full-decode path.
pub fn flip_question_and_instruction_adversary(code: Arc<TripleCode>) -> Box<dyn Adversary> {
    Box::new(FlipQuestionAndInstruction { code })
}

struct EraseOneParty {
    target: Role,
}

impl Adversary for EraseOneParty {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        if view.kind == ChannelKind::Erasure && view.sender == self.target {
            AdversaryAction::Erase
        } else {
            AdversaryAction::Pass
        }
    }
}

/// Erases every bit the target sends until the budget runs out.
pub fn erase_one_party_adversary(target: Role) -> Box<dyn Adversary> {
    Box::new(EraseOneParty { target })
}

struct EraseBlockHalves {
    rng: ChaCha8Rng,
    current_block: Option<u64>,
    chosen: Vec<bool>,
}

impl Adversary for EraseBlockHalves {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        let Some(pos) = view.block else { return AdversaryAction::Pass };
        if self.current_block != Some(pos.block_index) {
            // pick a fresh random half of this block's rounds
            let rpb = pos.rounds_per_block as usize;
            self.chosen = vec![false; rpb + 1];
            for idx in rand::seq::index::sample(&mut self.rng, rpb, rpb / 2) {
                self.chosen[idx + 1] = true;
            }
            self.current_block = Some(pos.block_index);
        }
        if self.chosen[pos.round_in_block as usize] {
            AdversaryAction::Erase
        } else {
            AdversaryAction::Pass
        }
    }
}

/// Erases a random half of each block's rounds (clipped to the budget).
pub fn erase_block_halves_adversary(_block: BlockParams, seed: u64) -> Box<dyn Adversary> {
    Box::new(EraseBlockHalves {
        rng: crate::rng::stream(seed, "erase-block-halves"),
        current_block: None,
        chosen: Vec::new(),
    })
}
