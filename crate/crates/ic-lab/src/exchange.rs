//! The bit-flip-resilient message exchange protocol.
//!
//! Both parties hold an input of length `n` and maintain a guess of the other
//! side's input together with a confidence counter. Every message is a triple
//! codeword `(claim, echo, instruction)`: the sender's current guess of the
//! receiver's input, an echo of the question the sender just resolved about
//! its own input, and an instruction telling the receiver how to improve its
//! guess. A receiver first checks whether the word is close (relative
//! distance below 1/3) to one of the four instruction variants built from its
//! *own* input and guess; failing that it falls back to full decoding, which
//! only accepts within relative distance `1/6 - eps`. A resolved message is
//! acted on with probability `1 - 3d` respectively `1/2 - 3d`, which is what
//! defeats adversaries that corrupt messages just up to the decoding radius:
//! confidently-close resolutions are applied often, barely-decodable ones
//! rarely, and the expected progress of honest traffic always dominates.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ecc::{Instruction, Triple, TripleCode, TripleCodeword};
use crate::ratio;
use crate::{Error, Role};

/// A party's mutable protocol state: the guess and its confidence counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GuessState {
    pub guess: BitString,
    pub counter: u64,
}

impl GuessState {
    pub fn initial() -> GuessState {
        GuessState { guess: BitString::new(), counter: 0 }
    }
}

/// The instruction that moves `current` one step toward `target`:
/// bingo when they already agree, the next bit of `target` when `current` is
/// a strict prefix of it, and delete otherwise.
pub fn op_toward(target: &BitString, current: &BitString) -> Instruction {
    if current == target {
        Instruction::Bingo
    } else if current.len() < target.len() && current.is_prefix_of(target) {
        if target.get(current.len()) {
            Instruction::One
        } else {
            Instruction::Zero
        }
    } else {
        Instruction::Back
    }
}

/// The five-case state update. Bingo raises the counter; any other
/// instruction first spends a positive counter; with the counter at zero,
/// appends extend the guess (ignored at the length cap `n`) and delete drops
/// the last bit (a no-op on the empty guess).
pub fn apply_instruction(state: &GuessState, instruction: Instruction, n: usize) -> GuessState {
    let mut next = state.clone();
    match instruction {
        Instruction::Bingo => next.counter += 1,
        _ if state.counter > 0 => next.counter -= 1,
        Instruction::Back => {
            next.guess.pop();
        }
        Instruction::Zero | Instruction::One => {
            if next.guess.len() < n {
                next.guess.push(instruction == Instruction::One);
            }
        }
    }
    next
}

/// Which rule resolved a received message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvePath {
    /// Close to a variant built from the receiver's own input and guess.
    Condition1,
    /// Accepted by full decoding.
    Condition2,
}

/// A successfully resolved message, from the receiver's perspective:
/// `triple.first` claims the receiver's input, `triple.second` echoes the
/// receiver's guess, and the instruction is relative to that echo.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedMessage {
    pub triple: Triple,
    pub path: ResolvePath,
    /// Absolute distance from the received word to the resolved codeword.
    pub distance: u64,
    /// The update probability: `1 - 3d` on condition 1, `1/2 - 3d` on
    /// condition 2 (d the relative distance).
    pub p_star: f64,
}

/// Outcome of resolving one received word.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub resolved: Option<ResolvedMessage>,
    /// Number of distinct triples beyond the first that qualified with
    /// positive update probability. The code's distance makes any value
    /// above zero impossible; the harness counts it as an invariant
    /// violation.
    pub uniqueness_violations: u32,
}

/// What [`ExchangeParty::step`] did, for instrumentation and traces.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub resolved: Option<ResolvedMessage>,
    /// Whether the probabilistic draw succeeded (false when unresolved;
    /// exactly one rng draw is consumed per resolved message).
    pub drawn: bool,
    pub before: GuessState,
    pub after: GuessState,
    pub uniqueness_violations: u32,
}

enum DrawSource {
    Stream(Box<ChaCha8Rng>),
    Scripted(VecDeque<f64>),
}

/// One side of the exchange protocol.
pub struct ExchangeParty {
    role: Role,
    input: BitString,
    state: GuessState,
    code: Arc<TripleCode>,
    draws: DrawSource,
    draws_taken: u64,
}

impl ExchangeParty {
    pub fn new(
        role: Role,
        input: BitString,
        code: Arc<TripleCode>,
        rng: ChaCha8Rng,
    ) -> Result<ExchangeParty, Error> {
        if input.len() > code.params().n {
            return Err(Error::InvalidParameter(format!(
                "input of length {} exceeds code n={}",
                input.len(),
                code.params().n
            )));
        }
        Ok(ExchangeParty {
            role,
            input,
            state: GuessState::initial(),
            code,
            draws: DrawSource::Stream(Box::new(rng)),
            draws_taken: 0,
        })
    }

    /// Test constructor with a fixed script of uniform draws.
    pub fn with_scripted_draws(
        role: Role,
        input: BitString,
        code: Arc<TripleCode>,
        draws: Vec<f64>,
    ) -> Result<ExchangeParty, Error> {
        let mut party = ExchangeParty::new(role, input, code, crate::rng::stream(0, "scripted"))?;
        party.draws = DrawSource::Scripted(draws.into());
        Ok(party)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn input(&self) -> &BitString {
        &self.input
    }

    pub fn state(&self) -> &GuessState {
        &self.state
    }

    /// The party's current guess of the other input.
    pub fn final_output(&self) -> BitString {
        self.state.guess.clone()
    }

    /// Total rng draws consumed so far.
    pub fn draws_taken(&self) -> u64 {
        self.draws_taken
    }

    /// Resolves a received word against the two acceptance conditions.
    ///
    /// Condition 1 (the receiver's own words) strictly precedes condition 2
    /// (full decode). Full decoding also runs when condition 1 fires, purely
    /// to verify that no *second* triple qualifies with positive probability;
    /// the code's pairwise distance proves this cannot happen, so any count
    /// here indicates a bug rather than channel noise.
    pub fn resolve_received(&self, word: &TripleCodeword) -> Result<Resolution, Error> {
        let m = self.code.m() as u64;
        let eps = ratio::Dyadic::from_f64(self.code.params().epsilon);
        let dists = self
            .code
            .distances_to_variants(word, &self.input, &self.state.guess)?;

        let mut violations = 0u32;
        let mut close: Option<(Instruction, u64)> = None;
        for (i, &d) in dists.iter().enumerate() {
            if ratio::below_one_third(d, m) {
                if close.is_none() {
                    close = Some((Instruction::ALL[i], d));
                } else {
                    violations += 1; // two variants within 1/3: impossible, they are 2/3 apart
                }
            }
        }

        let decoded = self.code.decode(word)?;
        violations += u32::from(decoded.qualifying.saturating_sub(1));

        let resolved = if let Some((instruction, d)) = close {
            let own = Triple::new(self.input.clone(), self.state.guess.clone(), instruction);
            if let Some((t, _)) = &decoded.result {
                if *t != own {
                    violations += 1; // a second, different triple also qualified
                }
            }
            let p_star = 1.0 - 3.0 * d as f64 / m as f64;
            assert!(p_star > 0.0 && p_star <= 1.0, "condition-1 probability out of range");
            Some(ResolvedMessage { triple: own, path: ResolvePath::Condition1, distance: d, p_star })
        } else if let Some((t, d)) = decoded.result {
            debug_assert!(ratio::within_decode_threshold(d, m, eps));
            let p_star = 0.5 - 3.0 * d as f64 / m as f64;
            assert!(
                p_star >= 3.0 * self.code.params().epsilon - 1e-9 && p_star <= 0.5,
                "condition-2 probability out of range: {p_star}"
            );
            Some(ResolvedMessage { triple: t, path: ResolvePath::Condition2, distance: d, p_star })
        } else {
            None
        };

        Ok(Resolution { resolved, uniqueness_violations: violations })
    }

    /// Processes one received word and produces the reply.
    ///
    /// A resolved message consumes exactly one rng draw; with probability
    /// `p_star` the state update is applied: directly when the echo matches
    /// the current guess, as a move toward the echoed value when the sender
    /// declared it final (bingo), and as no change otherwise. The reply
    /// always answers the resolved claim (the sender's question about this
    /// party's input); an unresolved message changes nothing and the reply
    /// answers with this party's own input and bingo.
    pub fn step(&mut self, word: &TripleCodeword) -> Result<(TripleCodeword, StepReport), Error> {
        let resolution = self.resolve_received(word)?;
        let before = self.state.clone();
        let n = self.code.params().n;

        let mut drawn = false;
        let question = match &resolution.resolved {
            Some(r) => {
                let u = self.draw();
                drawn = u < r.p_star;
                if drawn {
                    if r.triple.second == self.state.guess {
                        self.state = apply_instruction(&self.state, r.triple.instruction, n);
                    } else if r.triple.instruction == Instruction::Bingo {
                        let op = op_toward(&r.triple.second, &self.state.guess);
                        self.state = apply_instruction(&self.state, op, n);
                    }
                    // stale echo with a non-bingo instruction: nothing to apply
                }
                r.triple.first.clone()
            }
            None => self.input.clone(),
        };

        let reply = self.code.encode(&Triple::new(
            self.state.guess.clone(),
            question.clone(),
            op_toward(&self.input, &question),
        ))?;

        let report = StepReport {
            resolved: resolution.resolved,
            drawn,
            before,
            after: self.state.clone(),
            uniqueness_violations: resolution.uniqueness_violations,
        };
        Ok((reply, report))
    }

    fn draw(&mut self) -> f64 {
        self.draws_taken += 1;
        match &mut self.draws {
            DrawSource::Stream(rng) => rng.gen::<f64>(),
            DrawSource::Scripted(q) => q.pop_front().expect("scripted draws exhausted"),
        }
    }
}

/// How a state transition relates to the truth it should be approaching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateClass {
    /// The unique move toward `truth` was applied.
    Good,
    /// The state changed, but not to the good successor.
    Bad,
    /// The state did not change.
    NoUpdate,
}

/// Classifies one observed transition against the true remote input.
pub fn classify_update(before: &GuessState, after: &GuessState, truth: &BitString) -> UpdateClass {
    if after == before {
        return UpdateClass::NoUpdate;
    }
    let good = apply_instruction(before, op_toward(truth, &before.guess), truth.len());
    if *after == good {
        UpdateClass::Good
    } else {
        UpdateClass::Bad
    }
}
