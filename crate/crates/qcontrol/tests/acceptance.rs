//! Acceptance gate: ten criteria, one test and one printed verdict line
//! each. Run with `--nocapture` to see the verdict lines of passing
//! criteria; failures print their line and the offending details.

use std::collections::HashMap;
use std::path::PathBuf;

use qcontrol::channel::{choi_distance, random_cptp_with, KrausChannel, PinnedChannel};
use qcontrol::cli::{run_routed_check, run_suite, SuiteConfig, SuiteName, SuiteReport};
use qcontrol::error::Error;
use qcontrol::prng::Prng;
use qcontrol::routedfmt::{eval, fixtures, parse, resolve};
use qcontrol::sectors::{build_sector_preserving_1d, RoutedKrausChannel};
use qcontrol::supermaps::two_ctrl_apply;
use qcontrol::tensor::{c64, ComplexMatrix};

fn conclude(number: usize, what: &str, problems: Vec<String>) {
    if problems.is_empty() {
        println!("criterion {number:02} pass - {what}");
    } else {
        let detail = problems.join("; ");
        println!("criterion {number:02} FAIL - {what}: {detail}");
        panic!("criterion {number:02} failed: {detail}");
    }
}

fn suite_problems(report: &SuiteReport) -> Vec<String> {
    report
        .cases
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} (distance {:.3e})", c.name, c.distance))
        .collect()
}

#[test]
fn criterion_01_control_of_random_pinned_channels_matches_the_direct_build() {
    let config = SuiteConfig::new(SuiteName::CtrlEquiv);
    assert_eq!(config.dims, vec![2, 3, 4]);
    assert_eq!(config.trials, 200);
    assert_eq!(config.tolerance, 1e-9);
    let report = run_suite(&config).unwrap();
    let mut problems = suite_problems(&report);
    if report.max_choi_distance > 1e-9 {
        problems.push(format!("worst distance {:.3e} exceeds 1e-9", report.max_choi_distance));
    }
    if report.runtime_ms > 30_000 {
        problems.push(format!("runtime {} ms exceeds 30 s", report.runtime_ms));
    }
    conclude(1, "control of random pinned channels matches the direct build", problems);
}

#[test]
fn criterion_02_control_of_embedded_unitaries_is_rank_one_and_exact() {
    let config = SuiteConfig::new(SuiteName::CtrlUnitary);
    assert_eq!(config.dims, vec![2, 3, 4]);
    assert_eq!(config.trials, 100);
    let report = run_suite(&config).unwrap();
    conclude(2, "control of embedded unitaries is rank one and exact", suite_problems(&report));
}

#[test]
fn criterion_03_control_and_inversion_round_trip_both_ways() {
    let config = SuiteConfig::new(SuiteName::Roundtrip);
    assert_eq!(config.trials, 200);
    let report = run_suite(&config).unwrap();
    conclude(3, "control and inversion round trip both ways", suite_problems(&report));
}

#[test]
fn criterion_04_pin_canonicalization_block_readback_and_rebuild() {
    let config = SuiteConfig::new(SuiteName::PinLaws);
    assert_eq!(config.dims.len() * config.trials, 300);
    let report = run_suite(&config).unwrap();
    conclude(4, "pin canonicalization, block readback, and rebuild", suite_problems(&report));
}

#[test]
fn criterion_05_two_channel_control_equality_tracks_the_kraus_pairing() {
    let config = SuiteConfig::new(SuiteName::PrefixEquality);
    assert_eq!(config.trials, 100);
    let report = run_suite(&config).unwrap();
    conclude(5, "two-channel control equality tracks the Kraus pairing", suite_problems(&report));
}

#[test]
fn criterion_06_two_slot_control_of_isometries_matches_the_direct_pair() {
    let config = SuiteConfig::new(SuiteName::IsometryPair);
    assert_eq!(config.dims, vec![2, 3, 4]);
    assert_eq!(config.trials, 100);
    let report = run_suite(&config).unwrap();
    conclude(6, "two-slot control of isometries matches the direct pair", suite_problems(&report));
}

#[test]
fn criterion_07_coherence_rank_obstruction_and_environment_escape() {
    let config = SuiteConfig::new(SuiteName::CoherenceObstruction);
    assert_eq!(config.trials, 100);
    let report = run_suite(&config).unwrap();
    conclude(7, "coherence-rank obstruction and environment escape", suite_problems(&report));
}

#[test]
fn criterion_08_composite_control_round_trips() {
    let config = SuiteConfig::new(SuiteName::Composite);
    assert_eq!(config.trials, 100);
    let report = run_suite(&config).unwrap();
    conclude(8, "composite control round trips", suite_problems(&report));
}

#[test]
fn criterion_10_sampling_verifier_accepts_good_maps_and_flags_the_broken_one() {
    let config = SuiteConfig::new(SuiteName::VerifySupermap);
    assert_eq!(config.trials, 50);
    let report = run_suite(&config).unwrap();
    conclude(10, "sampling verifier accepts good maps and flags the broken one", suite_problems(&report));
}

// --- Criterion 9: shipped circuit fixture and its mutations ---------------

/// Real rotation by `theta` in the (a, b) coordinate plane.
fn rotation(dim: usize, a: usize, b: usize, theta: f64) -> ComplexMatrix {
    let mut r = ComplexMatrix::identity(dim);
    r.set(a, a, c64(theta.cos(), 0.0));
    r.set(a, b, c64(theta.sin(), 0.0));
    r.set(b, a, c64(-theta.sin(), 0.0));
    r.set(b, b, c64(theta.cos(), 0.0));
    r
}

/// Expand payload conjugated by an output-side rotation: still an
/// isometry, but it moves amplitude into rows the route forbids.
fn leaky_expand(a: usize, b: usize) -> KrausChannel {
    let ops: Vec<ComplexMatrix> = fixtures::two_ctrl_expand()
        .kraus()
        .iter()
        .map(|k| rotation(9, a, b, 0.3).mul(k).unwrap())
        .collect();
    KrausChannel::new(ops).unwrap()
}

/// Contract payload with an input-side rotation: still trace preserving,
/// but it reads amplitude from columns the route forbids.
fn leaky_contract(a: usize, b: usize) -> KrausChannel {
    let w = rotation(9, a, b, 0.3);
    let ops: Vec<ComplexMatrix> = fixtures::two_ctrl_contract()
        .kraus()
        .iter()
        .map(|k| k.mul(&w).unwrap())
        .collect();
    KrausChannel::new(ops).unwrap()
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    text
}

/// Replaces `from` with `to` in the shipped circuit text, insisting the
/// pattern is present so mutations cannot silently rot.
fn edited_circuit(from: &str, to: &str) -> String {
    let text = fixtures::two_ctrl_circuit_text();
    assert!(text.contains(from), "mutation pattern `{from}` not found in the shipped circuit");
    text.replace(from, to)
}

enum Expect {
    /// `run_routed_check` returns a report that is not ok and names this
    /// violation: (node name, input sector, output sector).
    Violation(&'static str, usize, usize),
    /// `run_routed_check` fails outright with an error containing every
    /// substring.
    Rejection(&'static [&'static str]),
    /// The circuit resolves, but evaluation with valid sector-preserving
    /// bindings fails with a route violation containing every substring.
    EvalRejection(&'static [&'static str]),
}

struct Mutation {
    name: &'static str,
    circuit: String,
    expand: KrausChannel,
    contract: KrausChannel,
    expect: Expect,
}

impl Mutation {
    fn textual(name: &'static str, from: &str, to: &str, expect: Expect) -> Self {
        Mutation {
            name,
            circuit: edited_circuit(from, to),
            expand: fixtures::two_ctrl_expand(),
            contract: fixtures::two_ctrl_contract(),
            expect,
        }
    }

    fn payload(
        name: &'static str,
        expand: KrausChannel,
        contract: KrausChannel,
        gate: &'static str,
        in_sector: usize,
        out_sector: usize,
    ) -> Self {
        Mutation {
            name,
            circuit: fixtures::two_ctrl_circuit_text(),
            expand,
            contract,
            expect: Expect::Violation(gate, in_sector, out_sector),
        }
    }

    fn write(&self) -> PathBuf {
        let dir = std::env::temp_dir().join("qcontrol_acceptance_mutations").join(self.name);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("fig6_two_ctrl.rqc"), &self.circuit).unwrap();
        std::fs::write(dir.join("fig6_expand.json"), pretty(&self.expand)).unwrap();
        std::fs::write(dir.join("fig6_contract.json"), pretty(&self.contract)).unwrap();
        dir.join("fig6_two_ctrl.rqc")
    }

    fn run(&self) -> Option<String> {
        let file = self.write();
        match &self.expect {
            Expect::Violation(gate, in_sector, out_sector) => {
                match run_routed_check(&file) {
                    Ok(report) => {
                        let hit = report.violations.iter().any(|v| {
                            v.name == *gate && v.in_sector == *in_sector && v.out_sector == *out_sector
                        });
                        if report.ok() || !hit {
                            Some(format!(
                                "{}: expected a violation on `{gate}` {in_sector}->{out_sector}, got {:?}",
                                self.name,
                                report
                                    .violations
                                    .iter()
                                    .map(|v| format!("{} {}->{}", v.name, v.in_sector, v.out_sector))
                                    .collect::<Vec<_>>()
                            ))
                        } else {
                            None
                        }
                    }
                    Err(e) => Some(format!("{}: expected a check report, got error {e}", self.name)),
                }
            }
            Expect::Rejection(parts) => match run_routed_check(&file) {
                Ok(_) => Some(format!("{}: expected rejection, circuit was accepted", self.name)),
                Err(e) => missing_parts(self.name, &e.to_string(), parts),
            },
            Expect::EvalRejection(parts) => {
                let text = std::fs::read_to_string(&file).unwrap();
                let circuit = resolve(&parse(&text).unwrap(), file.parent().unwrap()).unwrap();
                let mut bindings = HashMap::new();
                bindings.insert("A".to_string(), fixtures::flip_slot_binding());
                bindings.insert("B".to_string(), fixtures::phase_slot_binding());
                match eval(&circuit, &bindings) {
                    Ok(_) => Some(format!("{}: expected rejection, evaluation succeeded", self.name)),
                    Err(e @ Error::RouteViolation(_)) => missing_parts(self.name, &e.to_string(), parts),
                    Err(e) => Some(format!("{}: expected a route violation, got {e}", self.name)),
                }
            }
        }
    }
}

fn missing_parts(name: &str, message: &str, parts: &[&str]) -> Option<String> {
    let missing: Vec<&str> = parts.iter().filter(|p| !message.contains(**p)).copied().collect();
    if missing.is_empty() {
        None
    } else {
        Some(format!("{name}: message `{message}` lacks {missing:?}"))
    }
}

fn mutation_catalogue() -> Vec<Mutation> {
    let expand = fixtures::two_ctrl_expand;
    let contract = fixtures::two_ctrl_contract;
    vec![
        // Trace-preserving payloads that disobey the declared route; the
        // report must name the gate and the leaking sector pair.
        Mutation::payload("leak-expand-0-0", leaky_expand(0, 1), contract(), "expand", 0, 0),
        Mutation::payload("leak-expand-1-0", leaky_expand(0, 3), contract(), "expand", 1, 0),
        Mutation::payload("leak-expand-1-1", leaky_expand(1, 3), contract(), "expand", 1, 1),
        Mutation::payload("leak-expand-0-2", leaky_expand(6, 2), contract(), "expand", 0, 2),
        Mutation::payload("leak-expand-0-3", leaky_expand(4, 1), contract(), "expand", 0, 3),
        Mutation::payload("leak-expand-1-3", leaky_expand(5, 3), contract(), "expand", 1, 3),
        Mutation::payload("leak-contract-2-0", expand(), leaky_contract(1, 3), "contract", 2, 0),
        Mutation::payload("leak-contract-1-1", expand(), leaky_contract(2, 3), "contract", 1, 1),
        // Route bits turned off. The first two starve an input sector of
        // the expand route entirely; the others leave the shipped payload
        // leaking across the newly forbidden pair.
        Mutation::textual(
            "flip-expand-first-one",
            "route [[0, 0], [1, 0], [0, 1], [0, 0]]",
            "route [[0, 0], [0, 0], [0, 1], [0, 0]]",
            Expect::Rejection(&["invalid route", "input sector 0"]),
        ),
        Mutation::textual(
            "flip-expand-second-one",
            "route [[0, 0], [1, 0], [0, 1], [0, 0]]",
            "route [[0, 0], [1, 0], [0, 0], [0, 0]]",
            Expect::Rejection(&["invalid route", "input sector 1"]),
        ),
        Mutation::textual(
            "flip-contract-row0",
            "route [[1, 1, 0, 1], [1, 0, 1, 1]]",
            "route [[0, 1, 0, 1], [1, 0, 1, 1]]",
            Expect::Violation("contract", 0, 0),
        ),
        Mutation::textual(
            "flip-contract-row1",
            "route [[1, 1, 0, 1], [1, 0, 1, 1]]",
            "route [[1, 1, 0, 1], [1, 0, 1, 0]]",
            Expect::Violation("contract", 3, 1),
        ),
        // Transposed route matrices.
        Mutation::textual(
            "transpose-expand-route",
            "route [[0, 0], [1, 0], [0, 1], [0, 0]]",
            "route [[0, 1, 0, 0], [0, 0, 1, 0]]",
            Expect::Rejection(&["invalid route", "input sector 0"]),
        ),
        Mutation::textual(
            "transpose-contract-route",
            "route [[1, 1, 0, 1], [1, 0, 1, 1]]",
            "route [[1, 1], [1, 0], [0, 1], [1, 1]]",
            Expect::Rejection(&["`contract`", "route is 4x2", "2 output and 4 input"]),
        ),
        // Wire types that no longer match the payload dimensions.
        Mutation::textual(
            "grow-data-wire",
            "wire T : [2];",
            "wire T : [3];",
            Expect::Rejection(&["`expand`", "payload is 4\u{2192}9", "dims 6\u{2192}9"]),
        ),
        Mutation::textual(
            "grow-carrier-wire",
            "wire X : [1, 2];",
            "wire X : [2, 2];",
            Expect::Rejection(&["`expand`", "payload is 4\u{2192}9", "dims 4\u{2192}12"]),
        ),
        // Slot routes that contradict the sector-preserving bindings.
        Mutation::textual(
            "anti-route-slot-a",
            "slot A : Y -> Y route id;",
            "slot A : Y -> Y route [[0, 1], [1, 0]];",
            Expect::EvalRejection(&["slot `A`", "input sector 0", "forbidden output sector 0"]),
        ),
        Mutation::textual(
            "anti-route-slot-b",
            "slot B : X -> X route id;",
            "slot B : X -> X route [[0, 1], [1, 0]];",
            Expect::EvalRejection(&["slot `B`", "input sector 0", "forbidden output sector 0"]),
        ),
        // Declaration-level damage.
        Mutation::textual(
            "duplicate-wire",
            "wire C : [1, 1];",
            "wire C : [1, 1];\nwire C : [1, 1];",
            Expect::Rejection(&["declared twice", "`C`"]),
        ),
        Mutation::textual(
            "unknown-wire",
            "apply expand (C, T) -> (X, Y);",
            "apply expand (C, Q) -> (X, Y);",
            Expect::Rejection(&["unknown wire `Q`"]),
        ),
    ]
}

#[test]
fn criterion_09_shipped_circuit_evaluates_correctly_and_mutants_are_rejected() {
    let mut problems = Vec::new();

    let file = fixtures::fixtures_dir().join("fig6_two_ctrl.rqc");
    let text = std::fs::read_to_string(&file).unwrap();
    let circuit = resolve(&parse(&text).unwrap(), file.parent().unwrap()).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = Prng::split(11, trial);
        let rank = 1 + (trial as usize) % 3;
        let a = {
            let c = random_cptp_with(2, 2, rank, &mut rng).unwrap();
            let pin = c.kraus()[0].clone();
            build_sector_preserving_1d(&PinnedChannel::from_pin(&c, &pin).unwrap()).unwrap()
        };
        let b = {
            let c = random_cptp_with(2, 2, rank, &mut rng).unwrap();
            let pin = c.kraus()[0].clone();
            build_sector_preserving_1d(&PinnedChannel::from_pin(&c, &pin).unwrap()).unwrap()
        };
        let mut bindings: HashMap<String, RoutedKrausChannel> = HashMap::new();
        bindings.insert("A".to_string(), a.routed().clone());
        bindings.insert("B".to_string(), b.routed().clone());
        let got = eval(&circuit, &bindings).unwrap();
        let want = two_ctrl_apply(a.routed(), b.routed()).unwrap();
        worst = worst.max(choi_distance(&got, want.channel()).unwrap());
    }
    if worst > 1e-9 {
        problems.push(format!("worst evaluation distance {worst:.3e} exceeds 1e-9"));
    }

    let catalogue = mutation_catalogue();
    assert_eq!(catalogue.len(), 20);
    for mutation in &catalogue {
        if let Some(problem) = mutation.run() {
            problems.push(problem);
        }
    }

    conclude(9, "shipped circuit evaluates correctly and mutants are rejected", problems);
}
