//! Full protocol sessions against a chosen adversary, plus seeded Monte
//! Carlo ensembles.
//!
//! A session wires two parties to an adversarial channel, runs the whole
//! conversation, and checks every protocol invariant as it goes: violations
//! are counted, never silently ignored, and an ensemble reports the total
//! (which must be zero). Everything is deterministic given the configured
//! seed — party randomness, adversary randomness, and random inputs all come
//! from independent streams derived from it — so reruns are bit-identical
//! whether sessions execute serially or in parallel.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryContext, AdversaryRegistry};
use crate::bits::BitString;
use crate::channel::{BitFlipChannel, ChannelKind, CorruptionBudget, ErasureChannel};
use crate::ecc::{CodeParams, Triple, TripleCode};
use crate::erasure::{
    input_exchange, input_exchange_lengths, BlockParams, ErasureParty, Mode, NoiselessProtocol,
    Symbol,
};
use crate::exchange::{classify_update, ExchangeParty, ResolvePath, StepReport, UpdateClass};
use crate::{Error, Role};

/// Which protocol a session runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    BitFlip,
    Erasure,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Protocol, Error> {
        match s {
            "bitflip" => Ok(Protocol::BitFlip),
            "erasure" => Ok(Protocol::Erasure),
            other => Err(Error::Config(format!(
                "unknown protocol {other:?} (expected bitflip or erasure)"
            ))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::BitFlip => "bitflip",
            Protocol::Erasure => "erasure",
        })
    }
}

/// The corruption fraction each protocol is guaranteed to survive at slack
/// `epsilon`. May be negative for large `epsilon`, in which case the only
/// in-contract budget is zero.
pub fn contract_fraction(protocol: Protocol, epsilon: f64) -> f64 {
    match protocol {
        Protocol::BitFlip => 1.0 / 6.0 - 2.0 * epsilon,
        Protocol::Erasure => 0.5 - 4.0 * epsilon,
    }
}

/// Number of exchange messages sent through the channel: `n/epsilon` rounded
/// up to the next even integer, for the already-normalized input length `n`.
pub fn message_count(n: usize, epsilon: f64) -> u64 {
    let t = (n as f64 / epsilon).ceil() as u64;
    t + (t & 1)
}

/// One session's worth of experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionConfig {
    pub protocol: Protocol,
    /// Input length in bits (bit-flip) or simulated transcript length `n0`
    /// (erasure).
    pub n: usize,
    pub epsilon: f64,
    /// Adversary name in the registry.
    #[serde(default = "default_adversary")]
    pub adversary: String,
    #[serde(default)]
    pub adversary_params: BTreeMap<String, String>,
    /// Fraction of the total transmitted units the adversary may corrupt.
    pub budget_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Record per-message / per-round trace lines.
    #[serde(default)]
    pub trace: bool,
}

fn default_adversary() -> String {
    "null".to_string()
}

impl SessionConfig {
    /// The guaranteed-survivable fraction for this config.
    pub fn contract_fraction(&self) -> f64 {
        contract_fraction(self.protocol, self.epsilon)
    }

    /// Whether the configured budget is within the guarantee region.
    pub fn in_contract(&self) -> bool {
        self.budget_fraction <= self.contract_fraction() + 1e-12
    }

    fn with_seed(&self, seed: u64) -> SessionConfig {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}

/// Violation tallies for every invariant checked during a session. All
/// fields must stay zero; any nonzero count indicates an implementation bug,
/// not a property of the adversary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCounts {
    /// More than one triple qualified while resolving a received word.
    pub resolve_uniqueness: u64,
    /// Progress `>= n` failed to coincide with a correct guess.
    pub progress_equivalence: u64,
    /// An update probability left its per-path range.
    pub probability_range: u64,
    /// Both parties were in the same mode during a block.
    pub mode_disjoint: u64,
    /// A transcript stopped being a prefix of the noiseless transcript.
    pub transcript_prefix: u64,
    /// Transcript lengths drifted from the leader-one-ahead shape.
    pub transcript_offset: u64,
    /// A block with few erasures ended without either party changing mode.
    pub block_progress: u64,
    /// The channel spent more than its budget limit.
    pub budget_overspend: u64,
}

impl InvariantCounts {
    pub fn total(&self) -> u64 {
        self.resolve_uniqueness
            + self.progress_equivalence
            + self.probability_range
            + self.mode_disjoint
            + self.transcript_prefix
            + self.transcript_offset
            + self.block_progress
            + self.budget_overspend
    }

    pub fn add(&mut self, other: &InvariantCounts) {
        self.resolve_uniqueness += other.resolve_uniqueness;
        self.progress_equivalence += other.progress_equivalence;
        self.probability_range += other.probability_range;
        self.mode_disjoint += other.mode_disjoint;
        self.transcript_prefix += other.transcript_prefix;
        self.transcript_offset += other.transcript_offset;
        self.block_progress += other.block_progress;
        self.budget_overspend += other.budget_overspend;
    }
}

/// Good-minus-bad running update counts for both parties, one entry per
/// processed message (index 0 is the bootstrap message).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PotentialTrace {
    pub alice: Vec<i64>,
    pub bob: Vec<i64>,
}

/// One bit-flip trace line.
#[derive(Debug, Clone, Serialize)]
pub struct MessageTrace {
    pub message: u64,
    pub sender: Role,
    pub corrupted_bits: u64,
    pub path: Option<ResolvePath>,
    pub p_star: Option<f64>,
    pub drawn: bool,
    pub update: UpdateClass,
    pub progress_alice: i64,
    pub progress_bob: i64,
}

/// One erasure trace line.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace {
    pub round: u64,
    pub block: u64,
    pub sender: Role,
    pub sent: bool,
    pub delivered: Symbol,
    pub alice_mode: Mode,
    pub bob_mode: Mode,
    pub alice_transcript_len: usize,
    pub bob_transcript_len: usize,
}

/// A trace line of either protocol, JSON-serializable.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TraceLine {
    Message(MessageTrace),
    Round(RoundTrace),
}

/// Everything one session produced.
#[derive(Debug, Clone, Serialize)]
pub struct SessionResult {
    pub seed: u64,
    /// Alice ended with the other party's exact input (bit-flip) or a
    /// correct length-`n0` transcript (erasure).
    pub alice_ok: bool,
    pub bob_ok: bool,
    /// Alice's final output: her guess at Bob's input with the
    /// normalization bit stripped, or her simulated transcript.
    pub alice_output: BitString,
    pub bob_output: BitString,
    pub corruptions_spent: u64,
    pub budget_limit: u64,
    /// The requested fraction was negative or NaN and was clamped to zero.
    pub budget_clamped: bool,
    pub invariants: InvariantCounts,
    /// Bit-flip sessions always carry the potential trajectory.
    pub potential: Option<PotentialTrace>,
    /// Per-message / per-round lines; empty unless `config.trace`.
    pub trace: Vec<TraceLine>,
    pub wall_seconds: f64,
}

impl SessionResult {
    pub fn both_ok(&self) -> bool {
        self.alice_ok && self.bob_ok
    }
}

/// Where session inputs come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InputSource {
    /// Drawn uniformly from the session's input stream.
    Random,
    /// The same fixed inputs for every trial.
    Fixed { x: BitString, y: BitString },
}

struct BitFlipInstrument<'a> {
    n: usize,
    epsilon: f64,
    truths: [&'a BitString; 2],
    psi: [i64; 2],
    potential: PotentialTrace,
    invariants: InvariantCounts,
    trace: Option<Vec<TraceLine>>,
}

impl<'a> BitFlipInstrument<'a> {
    fn new(n: usize, epsilon: f64, x: &'a BitString, y: &'a BitString, trace: bool) -> Self {
        BitFlipInstrument {
            n,
            epsilon,
            truths: [y, x], // what Alice / Bob respectively are guessing
            psi: [0; 2],
            potential: PotentialTrace::default(),
            invariants: InvariantCounts::default(),
            trace: trace.then(Vec::new),
        }
    }

    /// Folds in one processed message: classifies the receiver's update,
    /// advances the potential, and checks the per-message invariants.
    fn record(&mut self, message: u64, sender: Role, corrupted_bits: u64, report: &StepReport) {
        let receiver = sender.other();
        let who = receiver as usize;
        let truth = self.truths[who];
        self.invariants.resolve_uniqueness += u64::from(report.uniqueness_violations);
        if let Some(resolved) = &report.resolved {
            let ok = match resolved.path {
                ResolvePath::Condition1 => resolved.p_star > 0.0 && resolved.p_star <= 1.0 + 1e-9,
                ResolvePath::Condition2 => {
                    resolved.p_star >= 3.0 * self.epsilon - 1e-9
                        && resolved.p_star <= 0.5 + 1e-9
                }
            };
            if !ok {
                self.invariants.probability_range += 1;
            }
        }
        let update = classify_update(&report.before, &report.after, truth);
        self.psi[who] += match update {
            UpdateClass::Good => 1,
            UpdateClass::Bad => -1,
            UpdateClass::NoUpdate => 0,
        };
        // potential >= n exactly when the guess is complete and correct
        let claims_done = self.psi[who] >= self.n as i64;
        let is_correct = &report.after.guess == truth;
        if claims_done != is_correct {
            self.invariants.progress_equivalence += 1;
        }
        self.potential.alice.push(self.psi[0]);
        self.potential.bob.push(self.psi[1]);
        if let Some(lines) = &mut self.trace {
            lines.push(TraceLine::Message(MessageTrace {
                message,
                sender,
                corrupted_bits,
                path: report.resolved.as_ref().map(|r| r.path),
                p_star: report.resolved.as_ref().map(|r| r.p_star),
                drawn: report.drawn,
                update,
                progress_alice: self.psi[0],
                progress_bob: self.psi[1],
            }));
        }
    }
}

/// Runs one complete bit-flip exchange session on inputs of length
/// `config.n`. A normalization 0 bit is prepended to both inputs (and
/// stripped from the outputs), so callers may supply arbitrary strings.
pub fn run_bitflip_session(
    config: &SessionConfig,
    x: &BitString,
    y: &BitString,
    registry: &AdversaryRegistry,
) -> Result<SessionResult, Error> {
    if config.protocol != Protocol::BitFlip {
        return Err(Error::Config("run_bitflip_session needs protocol=bitflip".into()));
    }
    if x.len() != config.n || y.len() != config.n {
        return Err(Error::InvalidParameter(format!(
            "inputs must both have length n={}, got {} and {}",
            config.n,
            x.len(),
            y.len()
        )));
    }
    let start = Instant::now();
    let mut xn = BitString::from_bits([false]);
    xn.extend_from(x);
    let mut yn = BitString::from_bits([false]);
    yn.extend_from(y);
    let n = config.n + 1;

    let code = Arc::new(TripleCode::new(CodeParams::new(n, config.epsilon, config.seed)?)?);
    let m = code.m() as u64;
    let total_messages = message_count(n, config.epsilon);
    let budget = CorruptionBudget::new(config.budget_fraction, total_messages * m);
    let budget_limit = budget.limit();
    let budget_clamped = budget.was_clamped();
    let mut channel = BitFlipChannel::new(budget, xn.clone(), yn.clone());

    let adversary_seed = crate::rng::stream(config.seed, "adversary").gen::<u64>();
    let ctx = AdversaryContext {
        kind: ChannelKind::BitFlip,
        params: &config.adversary_params,
        code: Some(code.clone()),
        block: None,
        seed: adversary_seed,
    };
    let mut adversary = registry.build(&config.adversary, &ctx)?;

    let mut alice =
        ExchangeParty::new(Role::Alice, xn.clone(), code.clone(), crate::rng::stream(config.seed, "alice"))?;
    let mut bob =
        ExchangeParty::new(Role::Bob, yn.clone(), code.clone(), crate::rng::stream(config.seed, "bob"))?;
    let mut meter = BitFlipInstrument::new(n, config.epsilon, &xn, &yn, config.trace);

    // message 0 is the fixed bootstrap word, delivered to Alice uncorrupted
    let bootstrap = code.encode(&Triple::bootstrap())?;
    let (mut outbound, report) = alice.step(&bootstrap)?;
    meter.record(0, Role::Bob, 0, &report);

    for message in 1..=total_messages {
        let sender = if message % 2 == 1 { Role::Alice } else { Role::Bob };
        let delivered = channel.transmit(sender, &outbound, adversary.as_mut())?;
        let corrupted_bits = outbound.bits().hamming(delivered.bits());
        let report = match sender {
            Role::Alice => {
                let (reply, report) = bob.step(&delivered)?;
                outbound = reply;
                report
            }
            Role::Bob => {
                let (reply, report) = alice.step(&delivered)?;
                outbound = reply;
                report
            }
        };
        meter.record(message, sender, corrupted_bits, &report);
    }

    let mut invariants = meter.invariants;
    if channel.budget().spent() > channel.budget().limit() {
        invariants.budget_overspend += 1;
    }
    let alice_guess = alice.final_output();
    let bob_guess = bob.final_output();
    // under heavy corruption a party can finish with an empty guess, so the
    // normalization bit is only stripped when something is there to strip
    let denormalize = |guess: &BitString| guess.skip(guess.len().min(1));
    Ok(SessionResult {
        seed: config.seed,
        alice_ok: alice_guess == yn,
        bob_ok: bob_guess == xn,
        alice_output: denormalize(&alice_guess),
        bob_output: denormalize(&bob_guess),
        corruptions_spent: channel.budget().spent(),
        budget_limit,
        budget_clamped,
        invariants,
        potential: Some(meter.potential),
        trace: meter.trace.unwrap_or_default(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs one complete erasure-simulation session of the given noiseless
/// protocol. `config.n` must equal the protocol's transcript length `n0`.
pub fn run_erasure_session(
    config: &SessionConfig,
    protocol: &NoiselessProtocol,
    x: &BitString,
    y: &BitString,
    registry: &AdversaryRegistry,
) -> Result<SessionResult, Error> {
    if config.protocol != Protocol::Erasure {
        return Err(Error::Config("run_erasure_session needs protocol=erasure".into()));
    }
    if protocol.n0() != config.n {
        return Err(Error::InvalidParameter(format!(
            "config.n={} does not match the protocol's n0={}",
            config.n,
            protocol.n0()
        )));
    }
    let start = Instant::now();
    let block = BlockParams::new(config.n, config.epsilon)?;
    let total_rounds = block.total_rounds();
    let rpb = block.rounds_per_block();
    let budget = CorruptionBudget::new(config.budget_fraction, total_rounds);
    let budget_limit = budget.limit();
    let budget_clamped = budget.was_clamped();
    let mut channel = ErasureChannel::new(budget, block, x.clone(), y.clone());

    let adversary_seed = crate::rng::stream(config.seed, "adversary").gen::<u64>();
    let ctx = AdversaryContext {
        kind: ChannelKind::Erasure,
        params: &config.adversary_params,
        code: None,
        block: Some(block),
        seed: adversary_seed,
    };
    let mut adversary = registry.build(&config.adversary, &ctx)?;

    let mut alice = ErasureParty::new(Role::Alice, x.clone(), protocol.clone());
    let mut bob = ErasureParty::new(Role::Bob, y.clone(), protocol.clone());
    // longest transcript any run can build: the opening bit plus two bits
    // per block; all prefixes are checked against this padded oracle
    let oracle = protocol.transcript(x, y, 1 + 2 * block.blocks() as usize);

    let mut invariants = InvariantCounts::default();
    let mut trace = config.trace.then(Vec::new);
    // Alice's opening bit makes her the initial transcript leader
    let mut leader = Role::Alice;

    for round in 1..=total_rounds {
        let sender = BlockParams::sender(round);
        let bit = match sender {
            Role::Alice => alice.round_output(),
            Role::Bob => bob.round_output(),
        };
        let delivered = channel.transmit(sender, bit, adversary.as_mut());
        match sender {
            Role::Alice => bob.observe(delivered),
            Role::Bob => alice.observe(delivered),
        }
        if let Some(lines) = &mut trace {
            lines.push(TraceLine::Round(RoundTrace {
                round,
                block: (round - 1) / rpb,
                sender,
                sent: bit,
                delivered,
                alice_mode: alice.mode(),
                bob_mode: bob.mode(),
                alice_transcript_len: alice.transcript().len(),
                bob_transcript_len: bob.transcript().len(),
            }));
        }
        if round % rpb == 0 {
            let a_change = alice.end_of_block()?;
            let b_change = bob.end_of_block()?;
            if a_change.changed() && a_change.from == Mode::Listener {
                leader = Role::Alice;
            }
            if b_change.changed() && b_change.from == Mode::Listener {
                leader = Role::Bob;
            }
            // the parties may never share a mode
            if alice.mode() == bob.mode() {
                invariants.mode_disjoint += 1;
            }
            // committed transcripts always extend the noiseless run
            if !alice.transcript().is_prefix_of(&oracle) || !bob.transcript().is_prefix_of(&oracle)
            {
                invariants.transcript_prefix += 1;
            }
            // whoever last left listener mode is exactly one bit ahead
            let (ahead, behind) = match leader {
                Role::Alice => (alice.transcript(), bob.transcript()),
                Role::Bob => (bob.transcript(), alice.transcript()),
            };
            if ahead.len() != behind.len() + 1 || !behind.is_prefix_of(ahead) {
                invariants.transcript_offset += 1;
            }
            // lightly-corrupted blocks must make progress
            let block_index = (round / rpb - 1) as usize;
            let erased = channel.per_block_erasures()[block_index];
            if erased <= (rpb / 2).saturating_sub(3) && !a_change.changed() && !b_change.changed()
            {
                invariants.block_progress += 1;
            }
        }
    }

    if channel.budget().spent() > channel.budget().limit() {
        invariants.budget_overspend += 1;
    }
    let want = oracle.prefix(config.n);
    let alice_final = alice.final_transcript(config.n);
    let bob_final = bob.final_transcript(config.n);
    Ok(SessionResult {
        seed: config.seed,
        alice_ok: alice_final.as_ref() == Some(&want),
        bob_ok: bob_final.as_ref() == Some(&want),
        alice_output: alice_final.unwrap_or_default(),
        bob_output: bob_final.unwrap_or_default(),
        corruptions_spent: channel.budget().spent(),
        budget_limit,
        budget_clamped,
        invariants,
        potential: None,
        trace: trace.unwrap_or_default(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs one session of whichever protocol the config selects, drawing inputs
/// from `source`. Erasure sessions simulate the canonical input-exchange
/// protocol for `n0 = config.n`.
pub fn run_session(
    config: &SessionConfig,
    source: &InputSource,
    registry: &AdversaryRegistry,
) -> Result<SessionResult, Error> {
    match config.protocol {
        Protocol::BitFlip => {
            let (x, y) = match source {
                InputSource::Fixed { x, y } => (x.clone(), y.clone()),
                InputSource::Random => {
                    let mut rng = crate::rng::stream(config.seed, "inputs");
                    (
                        BitString::random(&mut rng, config.n),
                        BitString::random(&mut rng, config.n),
                    )
                }
            };
            run_bitflip_session(config, &x, &y, registry)
        }
        Protocol::Erasure => {
            let protocol = input_exchange(config.n)?;
            let (xl, yl) = input_exchange_lengths(config.n);
            let (x, y) = match source {
                InputSource::Fixed { x, y } => (x.clone(), y.clone()),
                InputSource::Random => {
                    let mut rng = crate::rng::stream(config.seed, "inputs");
                    (BitString::random(&mut rng, xl), BitString::random(&mut rng, yl))
                }
            };
            run_erasure_session(config, &protocol, &x, &y, registry)
        }
    }
}

/// Aggregate of a Monte Carlo ensemble. Field values are independent of
/// execution order, so serial and parallel runs agree bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub trials: u64,
    /// Trials in which both parties finished correct.
    pub success_count: u64,
    /// Session seeds of the failed trials, in trial order.
    pub failure_seeds: Vec<u64>,
    pub mean_spend: f64,
    pub max_spend: u64,
    pub budget_limit: u64,
    pub budget_clamped: bool,
    pub invariants: InvariantCounts,
}

impl EnsembleSummary {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.trials as f64
    }

    pub fn invariant_violations(&self) -> u64 {
        self.invariants.total()
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var("IC_LAB_THREADS").ok()?.parse::<usize>().ok().filter(|&k| k >= 1)
}

/// Runs `trials` independent sessions with seeds derived from `config.seed`
/// and returns both the aggregate and the per-trial results (in trial
/// order). Sessions execute in parallel; set `IC_LAB_THREADS` to cap the
/// worker count.
pub fn monte_carlo_sessions(
    config: &SessionConfig,
    trials: u64,
    source: &InputSource,
    registry: &AdversaryRegistry,
) -> Result<(EnsembleSummary, Vec<SessionResult>), Error> {
    if trials == 0 {
        return Err(Error::Config("an ensemble needs at least one trial".into()));
    }
    let run = |trial: u64| {
        let seeded = config.with_seed(crate::rng::session_seed(config.seed, trial));
        run_session(&seeded, source, registry)
    };
    let results: Result<Vec<SessionResult>, Error> = match thread_cap() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| (0..trials).into_par_iter().map(run).collect()),
        None => (0..trials).into_par_iter().map(run).collect(),
    };
    let results = results?;

    let mut summary = EnsembleSummary {
        trials,
        success_count: 0,
        failure_seeds: Vec::new(),
        mean_spend: 0.0,
        max_spend: 0,
        budget_limit: results[0].budget_limit,
        budget_clamped: results[0].budget_clamped,
        invariants: InvariantCounts::default(),
    };
    let mut total_spend: u64 = 0;
    for r in &results {
        if r.both_ok() {
            summary.success_count += 1;
        } else {
            summary.failure_seeds.push(r.seed);
        }
        total_spend += r.corruptions_spent;
        summary.max_spend = summary.max_spend.max(r.corruptions_spent);
        summary.invariants.add(&r.invariants);
    }
    summary.mean_spend = total_spend as f64 / trials as f64;
    Ok((summary, results))
}

/// [`monte_carlo_sessions`] without the per-trial results.
pub fn monte_carlo(
    config: &SessionConfig,
    trials: u64,
    source: &InputSource,
    registry: &AdversaryRegistry,
) -> Result<EnsembleSummary, Error> {
    monte_carlo_sessions(config, trials, source, registry).map(|(summary, _)| summary)
}
