//! The acceptance gate: nine numbered criteria covering the code family, the
//! two protocols, their invariants, and the CLI. Each test prints one
//! verdict line; run `cargo test --test acceptance -- --nocapture` to see
//! them as they complete.
//!
//! Heavy ensembles are shared: criteria 3 and 4 read one erasure battery,
//! criteria 5–7 one bit-flip battery, both built on first use. Ensemble
//! outcomes are seed-deterministic, so the thresholds below are frozen
//! against measured values, with margins only where a legitimate
//! implementation change (say, a different inner-code seed) could move them.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ic_lab::adversary::{Adversary, AdversaryAction, AdversaryRegistry};
use ic_lab::bits::BitString;
use ic_lab::channel::AdversaryView;
use ic_lab::ecc::{CodeParams, Instruction, Triple, TripleCode, TripleCodeword};
use ic_lab::exchange::{ExchangeParty, ResolvePath};
use ic_lab::harness::{
    contract_fraction, monte_carlo, EnsembleSummary, InputSource, InvariantCounts, Protocol,
    SessionConfig,
};
use ic_lab::Role;

fn config(
    protocol: Protocol,
    n: usize,
    epsilon: f64,
    adversary: &str,
    params: &[(&str, &str)],
    budget_fraction: f64,
    seed: u64,
) -> SessionConfig {
    SessionConfig {
        protocol,
        n,
        epsilon,
        adversary: adversary.to_string(),
        adversary_params: params
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<BTreeMap<_, _>>(),
        budget_fraction,
        seed,
        trace: false,
    }
}

struct Cell {
    label: String,
    trials: u64,
    summary: EnsembleSummary,
}

struct Battery {
    cells: Vec<Cell>,
    invariants: InvariantCounts,
    sessions: u64,
    build_seconds: f64,
}

impl Battery {
    fn run(cells: Vec<(String, SessionConfig, u64)>, registry: &AdversaryRegistry) -> Battery {
        let started = Instant::now();
        let mut out = Battery {
            cells: Vec::new(),
            invariants: InvariantCounts::default(),
            sessions: 0,
            build_seconds: 0.0,
        };
        for (label, config, trials) in cells {
            let summary = monte_carlo(&config, trials, &InputSource::Random, registry)
                .unwrap_or_else(|e| panic!("ensemble {label:?} failed to run: {e}"));
            out.invariants.add(&summary.invariants);
            out.sessions += trials;
            out.cells.push(Cell { label, trials, summary });
        }
        out.build_seconds = started.elapsed().as_secs_f64();
        out
    }

    fn cell(&self, label: &str) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.label == label)
            .unwrap_or_else(|| panic!("no battery cell named {label:?}"))
    }
}

/// Extension-point demonstration: a strategy registered by the experiment
/// itself rather than shipped as a builtin. Erases every even round until
/// the channel refuses.
struct EraseEvens;

impl Adversary for EraseEvens {
    fn decide(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        if view.unit_index % 2 == 0 && view.remaining_budget > 0 {
            AdversaryAction::Erase
        } else {
            AdversaryAction::Pass
        }
    }
}

/// Criteria 3 and 4 share this battery. For each transcript length the
/// roster runs once at epsilon = 1/4, where the guarantee boundary
/// (1/2 - 4*eps) sits below zero and the budget clamps to no corruptions at
/// all, and once at epsilon = 1/16 with the budget exactly on the positive
/// boundary 1/4, where the adversaries really spend.
fn erasure_battery() -> &'static Battery {
    static BATTERY: OnceLock<Battery> = OnceLock::new();
    BATTERY.get_or_init(|| {
        let mut registry = AdversaryRegistry::with_builtins();
        registry.register("erase-evens", |_| Ok(Box::new(EraseEvens)));

        let mut cells = Vec::new();
        let mut seed = 3_000u64;
        for &n0 in &[2usize, 4, 8] {
            for &(epsilon, budget) in
                &[(0.25, contract_fraction(Protocol::Erasure, 0.25)), (1.0 / 16.0, 0.25)]
            {
                let roster: &[(&str, &[(&str, &str)], u64)] = &[
                    ("null", &[], 25),
                    ("erase-one-party", &[("target", "alice")], 25),
                    ("erase-one-party", &[("target", "bob")], 25),
                    ("erase-block-halves", &[], 25),
                    ("erase-evens", &[], 25),
                    ("random", &[("rate", "0.25")], 1_000),
                ];
                for &(name, params, trials) in roster {
                    seed += 137;
                    let label = format!("n0={n0} eps={epsilon} {name}{params:?}");
                    cells.push((
                        label,
                        config(Protocol::Erasure, n0, epsilon, name, params, budget, seed),
                        trials,
                    ));
                }
            }
        }
        Battery::run(cells, &registry)
    })
}

/// Criteria 5, 6 and 7 share this battery: the noiseless baseline, the two
/// structured codeword rewriters at the (clamped) guarantee boundary and
/// again at epsilon = 0.05 where the boundary budget 1/15 is positive, and
/// the random-rate trend pair at n = 8 and n = 16.
fn bitflip_battery() -> &'static Battery {
    static BATTERY: OnceLock<Battery> = OnceLock::new();
    BATTERY.get_or_init(|| {
        let registry = AdversaryRegistry::with_builtins();
        let boundary = contract_fraction(Protocol::BitFlip, 0.1);
        let cells = vec![
            (
                "null".to_string(),
                config(Protocol::BitFlip, 8, 0.1, "null", &[], 0.0, 501),
                500,
            ),
            (
                "flip-instruction".to_string(),
                config(Protocol::BitFlip, 8, 0.1, "flip-instruction", &[], boundary, 601),
                300,
            ),
            (
                "flip-question-and-instruction".to_string(),
                config(
                    Protocol::BitFlip,
                    8,
                    0.1,
                    "flip-question-and-instruction",
                    &[],
                    boundary,
                    701,
                ),
                300,
            ),
            (
                "flip-instruction eps=0.05".to_string(),
                config(Protocol::BitFlip, 8, 0.05, "flip-instruction", &[], 1.0 / 15.0, 801),
                300,
            ),
            (
                "flip-question-and-instruction eps=0.05".to_string(),
                config(
                    Protocol::BitFlip,
                    8,
                    0.05,
                    "flip-question-and-instruction",
                    &[],
                    1.0 / 15.0,
                    901,
                ),
                300,
            ),
            (
                "random n=8".to_string(),
                config(Protocol::BitFlip, 8, 0.1, "random", &[("rate", "0.065")], 0.08, 1_001),
                400,
            ),
            (
                "random n=16".to_string(),
                config(Protocol::BitFlip, 16, 0.1, "random", &[("rate", "0.065")], 0.08, 1_001),
                400,
            ),
        ];
        Battery::run(cells, &registry)
    })
}

// -------------------------------------------------------------------------

#[test]
fn criterion_1_code_distance_exhaustive() {
    let started = Instant::now();
    let mut rows = Vec::new();
    for n in [1usize, 2] {
        let code = TripleCode::new(CodeParams::new(n, 0.1, 0).unwrap()).unwrap();
        let report = code.verify_code_distance(None).unwrap();
        let m = report.m;
        // relative distance >= 1/2 - 1/10 = 2/5, checked in integers
        assert!(
            report.min_pair_dist * 5 >= 2 * m,
            "n={n}: min pairwise distance {} falls below 2m/5 = {}",
            report.min_pair_dist,
            2 * m / 5
        );
        // instruction variants of one pair differ in exactly two thirds
        assert_eq!(
            report.min_instruction_dist * 3,
            2 * m,
            "n={n}: min instruction-variant distance is not exactly 2m/3"
        );
        assert_eq!(
            report.max_instruction_dist * 3,
            2 * m,
            "n={n}: max instruction-variant distance is not exactly 2m/3"
        );
        rows.push(format!(
            "n={n}: {} triples, m={m}, min pair {} (2m/5 = {}), variants {}",
            report.triples,
            report.min_pair_dist,
            2 * m / 5,
            report.min_instruction_dist
        ));
    }
    println!(
        "criterion 1: PASS — exhaustive distances hold exactly [{}] ({:.1}s)",
        rows.join("; "),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_2_decoder_resilience_fuzzed() {
    let started = Instant::now();
    let code = TripleCode::new(CodeParams::new(2, 0.1, 0).unwrap()).unwrap();
    let m = code.m();
    assert_eq!(m, 768);
    // floor((1/6 - 0.1) * m): the largest count below the decoding
    // threshold, which is exact-rational in epsilon and rejects 52 here
    let radius = ((1.0 / 6.0 - 0.1) * m as f64).floor() as usize;
    assert_eq!(radius, 51);

    let instructions =
        [Instruction::Zero, Instruction::One, Instruction::Back, Instruction::Bingo];
    let mut rng = ChaCha8Rng::seed_from_u64(20_002);
    for trial in 0..10_000u32 {
        let zl = rng.gen_range(0..=2);
        let cl = rng.gen_range(0..=2);
        let triple = Triple::new(
            BitString::random(&mut rng, zl),
            BitString::random(&mut rng, cl),
            instructions[rng.gen_range(0..4)],
        );
        let mut bits = code.encode(&triple).unwrap().into_bits();
        for i in sample(&mut rng, m, radius) {
            bits.flip(i);
        }
        let word = TripleCodeword::from_bits(bits, m).unwrap();
        let outcome = code.decode(&word).unwrap();
        assert_eq!(outcome.qualifying, 1, "trial {trial}: decode was not unique");
        let (decoded, distance) = outcome.result.expect("within the radius, decode must accept");
        assert_eq!(decoded, triple, "trial {trial}: decoded the wrong triple");
        assert_eq!(distance, radius as u64, "trial {trial}: wrong reported distance");
    }
    println!(
        "criterion 2: PASS — 10000/10000 decodes recovered the triple through {radius} flips \
         ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_3_erasure_guarantee_at_desk_scale() {
    let battery = erasure_battery();
    for cell in &battery.cells {
        assert_eq!(
            cell.summary.success_count, cell.trials,
            "erasure cell {} lost {} of {} sessions (failure seeds {:?})",
            cell.label,
            cell.trials - cell.summary.success_count,
            cell.trials,
            cell.summary.failure_seeds
        );
        assert!(
            cell.summary.max_spend <= cell.summary.budget_limit,
            "erasure cell {} overspent its budget",
            cell.label
        );
    }
    println!(
        "criterion 3: PASS — {} erasure sessions across n0 ∈ {{2,4,8}}, both epsilons, \
         {} adversaries: every transcript correct ({:.1}s)",
        battery.sessions,
        battery.cells.len() / 6,
        battery.build_seconds
    );
}

#[test]
fn criterion_4_erasure_invariants() {
    let battery = erasure_battery();
    let inv = &battery.invariants;
    assert_eq!(inv.mode_disjoint, 0, "a block boundary saw both parties in the same mode");
    assert_eq!(inv.transcript_prefix, 0, "a transcript left the noiseless prefix");
    assert_eq!(inv.transcript_offset, 0, "transcript lengths drifted from leader + 1");
    assert_eq!(inv.block_progress, 0, "a lightly-erased block ended without a mode change");
    assert_eq!(inv.budget_overspend, 0, "a session spent beyond its budget");
    println!(
        "criterion 4: PASS — 0 violations of mode-disjointness, prefix, offset and \
         block-progress invariants over {} sessions",
        battery.sessions
    );
}

#[test]
fn criterion_5_bitflip_empirical_resilience() {
    let battery = bitflip_battery();
    let rate = |label: &str| {
        let cell = battery.cell(label);
        cell.summary.success_count as f64 / cell.trials as f64
    };

    let null = rate("null");
    assert!(null >= 0.95, "null-adversary success rate {null} fell below 0.95");

    for label in ["flip-instruction", "flip-question-and-instruction"] {
        let r = rate(label);
        assert!(r >= 0.90, "{label} at the clamped boundary: success rate {r} below 0.90");
    }
    // measured 1.00 for both at the positive boundary budget 1/15
    for label in ["flip-instruction eps=0.05", "flip-question-and-instruction eps=0.05"] {
        let r = rate(label);
        assert!(r >= 0.95, "{label}: success rate {r} below 0.95");
        let cell = battery.cell(label);
        assert!(
            cell.summary.mean_spend > 0.0,
            "{label}: the adversary never spent; the cell is not a stress test"
        );
    }

    // doubling n at fixed epsilon must strictly shrink the failure count;
    // rate 0.065 sits just under the decoding radius 1/6 - 0.1, where the
    // measured counts are 35/400 failures at n=8 against 5/400 at n=16
    let c8 = battery.cell("random n=8");
    let c16 = battery.cell("random n=16");
    let fail8 = c8.trials - c8.summary.success_count;
    let fail16 = c16.trials - c16.summary.success_count;
    assert!(
        fail8 >= 15,
        "trend baseline degenerated: only {fail8} failures at n=8 (expected about 35)"
    );
    assert!(
        fail16 < fail8,
        "failure count did not strictly decrease: {fail8} at n=8 vs {fail16} at n=16"
    );
    assert!(
        c16.summary.success_count as f64 / c16.trials as f64 >= 0.95,
        "n=16 should sit back in the high-resilience regime"
    );

    println!(
        "criterion 5: PASS — null {:.3}; boundary rewriters {:.3}/{:.3}; eps=0.05 spenders \
         {:.3}/{:.3}; trend failures {}→{} when n doubles ({:.1}s)",
        null,
        rate("flip-instruction"),
        rate("flip-question-and-instruction"),
        rate("flip-instruction eps=0.05"),
        rate("flip-question-and-instruction eps=0.05"),
        fail8,
        fail16,
        battery.build_seconds
    );
}

#[test]
fn criterion_6_potential_progress_equivalence() {
    let battery = bitflip_battery();
    // at every message of every session, the tracked potential reaches n
    // exactly when that party's guess equals the other input
    assert_eq!(
        battery.invariants.progress_equivalence, 0,
        "potential/guess equivalence broke {} times",
        battery.invariants.progress_equivalence
    );
    assert_eq!(
        battery.invariants.probability_range, 0,
        "an update probability left its range"
    );
    println!(
        "criterion 6: PASS — potential ≥ n coincided with a correct guess at every step of \
         {} sessions",
        battery.sessions
    );
}

#[test]
fn criterion_7_resolution_uniqueness() {
    let battery = bitflip_battery();
    assert_eq!(
        battery.invariants.resolve_uniqueness, 0,
        "resolving a received word found a second qualifying triple {} times",
        battery.invariants.resolve_uniqueness
    );
    println!(
        "criterion 7: PASS — no received word ever resolved to two qualifying triples \
         across {} sessions",
        battery.sessions
    );
}

#[test]
fn criterion_8_update_probability_calibration() {
    let started = Instant::now();
    let code = Arc::new(TripleCode::new(CodeParams::new(2, 0.1, 0).unwrap()).unwrap());
    let m = code.m();
    let input = BitString::parse("00").unwrap();

    // a word that resolves by full decoding at distance 0: p* = 1/2
    let far = code
        .encode(&Triple::new(
            BitString::parse("1").unwrap(),
            BitString::parse("0").unwrap(),
            Instruction::One,
        ))
        .unwrap();
    // the receiver's own bootstrap variant pushed 64 flips away, resolved by
    // proximity (3*64 < m strictly): p* = 1 - 3*(64/768) = 0.75
    let near = {
        let mut bits = code
            .encode(&Triple::new(input.clone(), BitString::new(), Instruction::Zero))
            .unwrap()
            .into_bits();
        for i in 0..64 {
            bits.flip(i);
        }
        TripleCodeword::from_bits(bits, m).unwrap()
    };
    // the far word pushed 32 flips: still outside every proximity window but
    // well inside the decoding radius, p* = 1/2 - 3*(32/768) = 0.375
    let far_noisy = {
        let mut bits = far.bits().clone();
        for i in 0..32 {
            bits.flip(i);
        }
        TripleCodeword::from_bits(bits, m).unwrap()
    };

    let points: [(&str, &TripleCodeword, ResolvePath, f64); 3] = [
        ("d=0 full decode", &far, ResolvePath::Condition2, 0.5),
        ("d=64 proximity", &near, ResolvePath::Condition1, 0.75),
        ("d=32 full decode", &far_noisy, ResolvePath::Condition2, 0.375),
    ];

    let trials = 20_000u64;
    let mut observed = Vec::new();
    for (tag, (label, word, path, p)) in points.into_iter().enumerate() {
        let mut hits = 0u64;
        for i in 0..trials {
            let rng = ChaCha8Rng::seed_from_u64(tag as u64 * 1_000_000 + i);
            let mut party =
                ExchangeParty::new(Role::Bob, input.clone(), code.clone(), rng).unwrap();
            let (_, report) = party.step(word).unwrap();
            assert_eq!(report.uniqueness_violations, 0);
            let resolved = report.resolved.expect("calibration words always resolve");
            assert_eq!(resolved.path, path, "{label}: wrong resolution path");
            assert!(
                (resolved.p_star - p).abs() < 1e-12,
                "{label}: p* was {} instead of {p}",
                resolved.p_star
            );
            if report.drawn {
                hits += 1;
            }
        }
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        let delta = hits as f64 - trials as f64 * p;
        assert!(
            delta.abs() <= 3.0 * sigma,
            "{label}: {hits} updates out of {trials} is {:.2} sigma from p* = {p}",
            delta / sigma
        );
        observed.push(format!("{label}: {:.4} (p* {p}, {:+.2}σ)", hits as f64 / trials as f64, delta / sigma));
    }
    println!(
        "criterion 8: PASS — {} draws per point [{}] ({:.1}s)",
        trials,
        observed.join("; "),
        started.elapsed().as_secs_f64()
    );
}

fn mask_seconds_column(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map(|(head, _)| head).unwrap_or(line))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_cli(args: &[&str], out: &Path) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_ic-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("the experiment binary should start");
    assert!(
        status.status.success(),
        "CLI exited with {:?}: {}",
        status.status.code(),
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read_to_string(out).expect("the CSV file should exist")
}

#[test]
fn criterion_9_csv_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 2] = [
        &[
            "--protocol", "erasure", "--n", "4", "--epsilon", "0.0625",
            "--adversary", "erase-block-halves", "--budget", "0.25",
            "--trials", "50", "--seed", "7",
        ],
        &[
            "--protocol", "bitflip", "--n", "8", "--epsilon", "0.1",
            "--adversary", "random:rate=0.065", "--budget", "0.08",
            "--trials", "25", "--seed", "1001",
        ],
    ];
    for (i, args) in commands.iter().enumerate() {
        let first = run_cli(args, &dir.path().join(format!("first{i}.csv")));
        let second = run_cli(args, &dir.path().join(format!("second{i}.csv")));
        assert_eq!(
            mask_seconds_column(&first),
            mask_seconds_column(&second),
            "rerun of command {i} changed the CSV outside the seconds column"
        );
        // sanity: the runs did real, spending work
        assert!(first.lines().count() == 2, "expected a header and one row");
    }
    println!(
        "criterion 9: PASS — reruns of both protocol commands are byte-identical outside \
         the timing column ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}
