//! Named verification suites behind the `qcontrol` binary, plus the two
//! file-driven commands for routed circuits.
//!
//! Each suite draws seeded random instances, runs one of the library's
//! equivalence or obstruction checks per trial, and reports the worst
//! defect per case. Reports are deterministic for a fixed
//! [`SuiteConfig`] on a fixed platform, except for the measured
//! `runtime_ms` field. Exit-code policy is decided by the binary: zero
//! exactly when a report has no failing case.
//!
//! Choi-distance cases pass at the configured tolerance. A few cases
//! check algebraic identities with no distance cancellation in them
//! (coherence-block reads, parameter extraction); those use the stricter
//! fixed [`EXTRACTION_TOL`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{
    canonicalize_pinned, choi_distance, minimal_kraus, random_cptp_with, tensor_product,
    two_control_choi_distance, two_control_equal_iff, KrausChannel, PinnedChannel,
};
use crate::control::{
    build_composite_control, build_ctrl_two_unitary, build_ctrl_unitary, build_pinned_control,
    build_two_channel_control, coherence_block, extract_composite_params,
    pin_from_coherence_block, ControlledChannel, CompositeControlParams, UpperTriangular,
};
use crate::error::{Error, Result};
use crate::prng::{haar_isometry, haar_unitary, Prng};
use crate::routedfmt::{check, eval, parse, resolve, RouteCheckReport};
use crate::sectors::{
    build_isometric_sp, build_sector_preserving_1d, build_sector_preserving_d11,
    PartitionedSpace, Route, RoutedKrausChannel, SectorPreserving1d,
};
use crate::supermaps::{
    ctrl_apply, ctrl_inverse_apply, ctrl2_apply, two_ctrl_apply, two_ctrl_e_apply,
    verify_routed_supermap, SupermapUnderVerification,
};
use crate::tensor::tol::{EQ_TOL, RANK_TOL};
use crate::tensor::{
    c64, direct_sum, eig_hermitian, operator_rank, singular_values, ComplexMatrix,
};

/// Tolerance for exact algebraic reads (block extraction, parameter
/// recovery), stricter than the Choi-distance tolerance because nothing
/// in them amplifies rounding.
pub const EXTRACTION_TOL: f64 = 1e-10;

/// The named verification suites. The serialized names double as the CLI
/// verbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuiteName {
    /// Circuit-built control of a random pinned channel against the
    /// direct controlled construction.
    #[serde(rename = "ctrl-equiv")]
    CtrlEquiv,
    /// Control of embedded unitaries: agreement with the controlled
    /// unitary, and a rank-one Choi matrix.
    #[serde(rename = "ctrl-unitary")]
    CtrlUnitary,
    /// Control build and inversion round trips, both directions.
    #[serde(rename = "roundtrip")]
    Roundtrip,
    /// Pin laws: canonicalization preserves the channel, the pin fixes
    /// the controlled channel, and the pin is read back off the
    /// coherence block.
    #[serde(rename = "lemma2")]
    PinLaws,
    /// Equality of two-channel controls holds exactly for equal Kraus
    /// pairings, and perturbed pairings separate proportionally.
    #[serde(rename = "thm2-twocontrol")]
    PrefixEquality,
    /// Two-slot control of embedded isometries against the direct
    /// controlled pair.
    #[serde(rename = "two-ctrl-isometry")]
    IsometryPair,
    /// Coherence-rank obstruction on plain inputs and its
    /// environment-assisted escape.
    #[serde(rename = "depol-obstruction")]
    CoherenceObstruction,
    /// Composite multi-branch control: circuit agreement and parameter
    /// extraction round trips.
    #[serde(rename = "composite")]
    Composite,
    /// Sampling verifier over the routed supermap constructions,
    /// including the deliberately broken variant.
    #[serde(rename = "verify-supermap")]
    VerifySupermap,
}

impl SuiteName {
    pub const ALL: [SuiteName; 9] = [
        SuiteName::CtrlEquiv,
        SuiteName::CtrlUnitary,
        SuiteName::Roundtrip,
        SuiteName::PinLaws,
        SuiteName::PrefixEquality,
        SuiteName::IsometryPair,
        SuiteName::CoherenceObstruction,
        SuiteName::Composite,
        SuiteName::VerifySupermap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::CtrlEquiv => "ctrl-equiv",
            SuiteName::CtrlUnitary => "ctrl-unitary",
            SuiteName::Roundtrip => "roundtrip",
            SuiteName::PinLaws => "lemma2",
            SuiteName::PrefixEquality => "thm2-twocontrol",
            SuiteName::IsometryPair => "two-ctrl-isometry",
            SuiteName::CoherenceObstruction => "depol-obstruction",
            SuiteName::Composite => "composite",
            SuiteName::VerifySupermap => "verify-supermap",
        }
    }
}

impl std::fmt::Display for SuiteName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// Full configuration of one suite run. [`SuiteConfig::new`] fills in the
/// per-suite defaults; the flags of the binary override fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    /// Target dimensions the suite sweeps. Suites whose checks are
    /// dimension-specific (the qubit obstruction) ignore this.
    pub dims: Vec<usize>,
    /// Trials per case.
    pub trials: usize,
    pub seed: u64,
    /// Pass bound for Choi-distance cases.
    pub tolerance: f64,
    /// Report destination; `None` keeps the report in memory.
    pub output: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(suite: SuiteName) -> Self {
        let (dims, trials): (&[usize], usize) = match suite {
            SuiteName::CtrlEquiv => (&[2, 3, 4], 200),
            SuiteName::CtrlUnitary => (&[2, 3, 4], 100),
            SuiteName::Roundtrip => (&[2, 3, 4], 200),
            SuiteName::PinLaws => (&[2, 3, 4], 100),
            SuiteName::PrefixEquality => (&[2, 3], 100),
            SuiteName::IsometryPair => (&[2, 3, 4], 100),
            SuiteName::CoherenceObstruction => (&[2], 100),
            SuiteName::Composite => (&[2, 3], 100),
            SuiteName::VerifySupermap => (&[2, 3], 50),
        };
        SuiteConfig {
            suite,
            dims: dims.to_vec(),
            trials,
            seed: 7,
            tolerance: EQ_TOL,
            output: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidConfig(format!(
                "dims must be a nonempty list of entries at least 2, got {:?}",
                self.dims
            )));
        }
        Ok(())
    }
}

/// Outcome of one named case. `distance` is the worst defect seen over
/// the case's trials, in the units of its check (usually a Choi-matrix
/// Frobenius distance; always oriented so smaller is better). Cases
/// whose pass rule is not a smallness bound record the measured quantity
/// in `witness`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub pass: bool,
    pub distance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<String>,
}

/// Result of a whole suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub cases: Vec<CaseResult>,
    pub passes: usize,
    pub failures: usize,
    pub max_choi_distance: f64,
    /// Wall-clock duration of the run. The only field that varies
    /// between identically configured runs.
    pub runtime_ms: u64,
    pub version: String,
}

/// Pretty JSON encoding of a report with a trailing newline, the exact
/// bytes `run_suite` writes to the configured output path.
pub fn render_json(report: &SuiteReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Runs the configured suite and writes the report to `config.output` if
/// set.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let start = Instant::now();
    let cases = match config.suite {
        SuiteName::CtrlEquiv => ctrl_equiv(config)?,
        SuiteName::CtrlUnitary => ctrl_unitary(config)?,
        SuiteName::Roundtrip => roundtrip(config)?,
        SuiteName::PinLaws => pin_laws(config)?,
        SuiteName::PrefixEquality => prefix_equality(config)?,
        SuiteName::IsometryPair => isometry_pair(config)?,
        SuiteName::CoherenceObstruction => coherence_obstruction(config)?,
        SuiteName::Composite => composite(config)?,
        SuiteName::VerifySupermap => verify_supermap(config)?,
    };
    let passes = cases.iter().filter(|c| c.pass).count();
    let report = SuiteReport {
        config: config.clone(),
        failures: cases.len() - passes,
        passes,
        max_choi_distance: cases.iter().map(|c| c.distance).fold(0.0, f64::max),
        cases,
        runtime_ms: start.elapsed().as_millis() as u64,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(path) = &config.output {
        std::fs::write(path, render_json(&report)?)?;
    }
    Ok(report)
}

fn case(name: String, distance: f64, bound: f64) -> CaseResult {
    CaseResult { name, pass: distance <= bound, distance, witness: None }
}

fn random_pinned(d: usize, rank: usize, rng: &mut Prng) -> Result<PinnedChannel> {
    let c = random_cptp_with(d, d, rank, rng)?;
    let pin = c.kraus()[0].clone();
    PinnedChannel::from_pin(&c, &pin)
}

fn random_sector_preserving(d: usize, rank: usize, rng: &mut Prng) -> Result<SectorPreserving1d> {
    build_sector_preserving_1d(&random_pinned(d, rank, rng)?)
}

fn ctrl_equiv(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        for rank in 1..=3 {
            let mut worst = 0.0f64;
            for _ in 0..cfg.trials {
                let mut rng = Prng::split(cfg.seed, stream);
                stream += 1;
                let p = random_pinned(d, rank, &mut rng)?;
                let cc = ctrl_apply(&build_sector_preserving_1d(&p)?)?;
                let want = build_pinned_control(&p)?;
                worst = worst.max(choi_distance(cc.channel(), want.channel())?);
            }
            cases.push(case(format!("ctrl vs pinned control d={d} rank={rank}"), worst, cfg.tolerance));
        }
    }
    Ok(cases)
}

fn ctrl_unitary(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        let mut worst_eq = 0.0f64;
        let mut worst_rank = 0.0f64;
        for _ in 0..cfg.trials {
            let mut rng = Prng::split(cfg.seed, stream);
            stream += 1;
            let u = haar_unitary(d, &mut rng);
            let op = direct_sum(&[&ComplexMatrix::identity(1), &u]);
            let s = SectorPreserving1d::new(KrausChannel::new(vec![op])?)?;
            let cc = ctrl_apply(&s)?;
            worst_eq = worst_eq
                .max(choi_distance(cc.channel(), build_ctrl_unitary(&u)?.channel())?);
            let eig = eig_hermitian(&cc.channel().choi())?;
            let n = eig.eigenvalues.len();
            worst_rank = worst_rank.max(eig.eigenvalues[n - 2].max(0.0) / eig.eigenvalues[n - 1]);
        }
        cases.push(case(format!("ctrl of embedded unitary d={d}"), worst_eq, cfg.tolerance));
        cases.push(case(format!("unitary output choi rank one d={d}"), worst_rank, cfg.tolerance));
    }
    Ok(cases)
}

fn roundtrip(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        let mut worst_fwd = 0.0f64;
        let mut worst_rev = 0.0f64;
        for t in 0..cfg.trials {
            let mut rng = Prng::split(cfg.seed, stream);
            stream += 1;
            let rank = 1 + t % 3;
            let s = random_sector_preserving(d, rank, &mut rng)?;
            let back = ctrl_inverse_apply(&ctrl_apply(&s)?)?;
            worst_fwd = worst_fwd.max(choi_distance(back.channel(), s.channel())?);

            let p = random_pinned(d, rank, &mut rng)?;
            let cc = build_pinned_control(&p)?;
            let again = ctrl_apply(&ctrl_inverse_apply(&cc)?)?;
            worst_rev = worst_rev.max(choi_distance(again.channel(), cc.channel())?);
        }
        cases.push(case(format!("inverse of ctrl is the identity d={d}"), worst_fwd, cfg.tolerance));
        cases.push(case(format!("ctrl of inverse is the identity d={d}"), worst_rev, cfg.tolerance));
    }
    Ok(cases)
}

fn pin_laws(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        let mut worst_canon = 0.0f64;
        let mut worst_same_pin = 0.0f64;
        let mut worst_block = 0.0f64;
        let mut worst_rebuild = 0.0f64;
        for _ in 0..cfg.trials {
            let mut rng = Prng::split(cfg.seed, stream);
            stream += 1;
            let c = random_cptp_with(d, d, 3, &mut rng)?;
            let amps = rng.unit_vector(c.kraus().len());
            let p = canonicalize_pinned(c.kraus(), &amps)?;
            worst_canon = worst_canon.max(choi_distance(p.channel(), &c)?);

            let cc = build_pinned_control(&p)?;
            if p.channel().kraus().len() > 2 {
                let tail = &p.channel().kraus()[1..];
                let w = haar_unitary(tail.len(), &mut rng);
                let mut family = vec![p.pin().clone()];
                for i in 0..tail.len() {
                    let mut op = ComplexMatrix::zeros(d, d);
                    for (j, t) in tail.iter().enumerate() {
                        op = op.add(&t.scale(w.get(i, j)));
                    }
                    family.push(op);
                }
                let p2 = PinnedChannel::new(KrausChannel::new(family)?, p.pin().clone())?;
                let cc2 = build_pinned_control(&p2)?;
                worst_same_pin = worst_same_pin.max(choi_distance(cc.channel(), cc2.channel())?);
            }

            let extracted = pin_from_coherence_block(&coherence_block(&cc, 0, 1), d);
            worst_block = worst_block.max(extracted.distance(p.pin()));
            let rebuilt = build_pinned_control(&PinnedChannel::from_pin(p.channel(), &extracted)?)?;
            worst_rebuild = worst_rebuild.max(choi_distance(cc.channel(), rebuilt.channel())?);
        }
        cases.push(case(format!("canonicalization keeps the channel d={d}"), worst_canon, cfg.tolerance));
        cases.push(case(format!("pin determines the control d={d}"), worst_same_pin, cfg.tolerance));
        cases.push(case(format!("coherence block reads the pin d={d}"), worst_block, EXTRACTION_TOL));
        cases.push(case(format!("extract and rebuild d={d}"), worst_rebuild, EXTRACTION_TOL));
    }
    Ok(cases)
}

fn prefix_equality(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        let mut worst_equal = 0.0f64;
        let mut worst_formula = 0.0f64;
        let mut worst_margin = 0.0f64;
        for _ in 0..cfg.trials {
            let mut rng = Prng::split(cfg.seed, stream);
            stream += 1;
            let a = minimal_kraus(&random_cptp_with(d, d, 2, &mut rng)?)?;
            let r = a.kraus().len();
            let b1 = random_cptp_with(d, d, r, &mut rng)?.kraus().to_vec();
            if !two_control_equal_iff(&a, &b1, &b1)? {
                worst_equal = f64::INFINITY;
            }
            worst_equal = worst_equal.max(two_control_choi_distance(&a, &b1, &b1)?);

            // Same branch channel, rotated pairing: the distance formula
            // must agree with the full Choi distance of the built
            // controls.
            let w = haar_unitary(r, &mut rng);
            let mut b2 = Vec::with_capacity(r);
            for i in 0..r {
                let mut op = ComplexMatrix::zeros(d, d);
                for (j, b) in b1.iter().enumerate() {
                    op = op.add(&b.scale(w.get(i, j)));
                }
                b2.push(op);
            }
            let formula = two_control_choi_distance(&a, &b1, &b2)?;
            let direct = choi_distance(
                build_two_channel_control(a.kraus(), &b1)?.channel(),
                build_two_channel_control(a.kraus(), &b2)?.channel(),
            )?;
            worst_formula = worst_formula.max((formula - direct).abs());

            // Shrinking one operator of the pairing by δ must move the
            // control by at least half the perturbation size.
            let heavy = (0..r)
                .max_by(|&i, &j| {
                    a.kraus()[i]
                        .frobenius_norm()
                        .total_cmp(&a.kraus()[j].frobenius_norm())
                })
                .unwrap();
            let delta = 1e-3;
            let mut b3 = b1.clone();
            b3[heavy] = b3[heavy].scale(c64(1.0 - delta, 0.0));
            let perturbation = delta * b1[heavy].frobenius_norm();
            let dist = two_control_choi_distance(&a, &b1, &b3)?;
            if two_control_equal_iff(&a, &b1, &b3)? && perturbation > 10.0 * EQ_TOL {
                worst_margin = f64::INFINITY;
            }
            worst_margin = worst_margin.max(perturbation / 2.0 - dist).max(0.0);
        }
        cases.push(case(format!("equal pairings give equal controls d={d}"), worst_equal, cfg.tolerance));
        cases.push(case(format!("distance formula matches built controls d={d}"), worst_formula, cfg.tolerance));
        cases.push(case(format!("perturbed pairing separates d={d}"), worst_margin, 0.0));
    }
    Ok(cases)
}

fn isometry_pair(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d_in in &cfg.dims {
        for &d_out in &cfg.dims {
            if d_out < d_in {
                continue;
            }
            let mut worst = 0.0f64;
            for _ in 0..cfg.trials {
                let mut rng = Prng::split(cfg.seed, stream);
                stream += 1;
                let u = haar_isometry(d_out, d_in, &mut rng);
                let v = haar_isometry(d_out, d_in, &mut rng);
                let cc = two_ctrl_apply(&build_isometric_sp(&u)?, &build_isometric_sp(&v)?)?;
                let want = build_ctrl_two_unitary(&u, &v)?;
                worst = worst.max(choi_distance(cc.channel(), want.channel())?);
            }
            cases.push(case(
                format!("two-slot control of isometries {d_in}to{d_out}"),
                worst,
                cfg.tolerance,
            ));
        }
    }
    Ok(cases)
}

/// Phase-mixing qubit channel {I/√2, Z/√2}, the classical mixture whose
/// ideal control is out of reach for any two-slot circuit.
fn phase_mix() -> Result<KrausChannel> {
    let s = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let i = ComplexMatrix::identity(2).scale(s);
    let z = ComplexMatrix::from_real_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]).scale(s);
    KrausChannel::new(vec![i, z])
}

fn random_sector_channel_with_env(
    d_in: usize,
    wide: usize,
    rng: &mut Prng,
) -> Result<RoutedKrausChannel> {
    let inner = random_cptp_with(d_in, wide, 2, rng)?;
    let amps = rng.unit_vector(inner.kraus().len());
    let ops: Vec<ComplexMatrix> = inner
        .kraus()
        .iter()
        .zip(&amps)
        .map(|(k, &a)| direct_sum(&[&ComplexMatrix::scalar(a), k]))
        .collect();
    RoutedKrausChannel::new(
        KrausChannel::new(ops)?,
        PartitionedSpace::new(vec![1, d_in])?,
        PartitionedSpace::new(vec![1, wide])?,
        Route::identity(2),
    )
}

fn coherence_obstruction(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;

    let mut worst_ratio = 0.0f64;
    for _ in 0..cfg.trials {
        let mut rng = Prng::split(cfg.seed, stream);
        stream += 1;
        let a = random_sector_preserving(2, 2, &mut rng)?;
        let b = random_sector_preserving(2, 2, &mut rng)?;
        let cc = two_ctrl_apply(a.routed(), b.routed())?;
        let svs = singular_values(&coherence_block(&cc, 0, 1));
        worst_ratio = worst_ratio.max(svs[1] / svs[0]);
    }
    cases.push(case("plain two-slot coherence block is rank one".into(), worst_ratio, cfg.tolerance));

    let pm = phase_mix()?;
    let ideal = ControlledChannel::new(tensor_product(&KrausChannel::identity(2), &pm)?, 2)?;
    let svs = singular_values(&coherence_block(&ideal, 0, 1));
    cases.push(CaseResult {
        name: "ideal control of the phase mix needs rank two".into(),
        pass: svs[1] >= 0.4,
        distance: (0.4 - svs[1]).max(0.0),
        witness: Some(format!("second singular value {:.6e}", svs[1])),
    });

    let e0 = ComplexMatrix::basis_column(2, 0);
    let e1 = ComplexMatrix::basis_column(2, 1);
    let m = pm.kraus()[0].kron(&e0).add(&pm.kraus()[1].kron(&e1));
    let a = build_isometric_sp(&m)?;
    let assisted = two_ctrl_e_apply(&a, &a, 2)?;
    let dist = choi_distance(assisted.channel(), ideal.channel())?;
    cases.push(case("environment-assisted control reaches the ideal".into(), dist, cfg.tolerance));

    let mut worst_cap = 0.0f64;
    let mut cap_ok = true;
    for t in 0..cfg.trials {
        let mut rng = Prng::split(cfg.seed, stream);
        stream += 1;
        let env = 1 + t % 3;
        let a = random_sector_channel_with_env(2, 2 * env, &mut rng)?;
        let b = random_sector_channel_with_env(2, 2 * env, &mut rng)?;
        let cc = two_ctrl_e_apply(&a, &b, env)?;
        let block = coherence_block(&cc, 0, 1);
        cap_ok &= operator_rank(&block, RANK_TOL) <= env;
        let svs = singular_values(&block);
        if svs.len() > env {
            worst_cap = worst_cap.max(svs[env] / svs[0]);
        }
    }
    cases.push(CaseResult {
        name: "coherence rank stays below the environment dimension".into(),
        pass: cap_ok && worst_cap <= RANK_TOL,
        distance: worst_cap,
        witness: None,
    });
    Ok(cases)
}

fn composite(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for &d in &cfg.dims {
        let mut worst_circuit = 0.0f64;
        let mut worst_extract = 0.0f64;
        let mut worst_three = 0.0f64;
        for t in 0..cfg.trials {
            let mut rng = Prng::split(cfg.seed, stream);
            stream += 1;
            let c = random_cptp_with(d, d, 2, &mut rng)?;
            let (pin1, pin2) = (c.kraus()[0].clone(), c.kraus()[1].clone());
            let magnitude = [0.0, 0.3, 0.99][t % 3];
            let gamma = rng.unit_vector(1)[0] * magnitude;
            let mut gammas = UpperTriangular::zero(2);
            gammas.set(0, 1, gamma);
            let params = CompositeControlParams::new(vec![pin1.clone(), pin2.clone()], gammas)?;
            let direct = build_composite_control(&c, &params)?;
            let via = ctrl2_apply(&build_sector_preserving_d11(&c, &pin1, &pin2, gamma)?)?;
            worst_circuit = worst_circuit.max(choi_distance(via.channel(), direct.channel())?);

            let ext = extract_composite_params(&direct, 2)?;
            let rebuilt = build_composite_control(&ext.channel, &ext.params)?;
            worst_extract = worst_extract
                .max(choi_distance(direct.channel(), rebuilt.channel())?)
                .max(ext.params.pins()[0].distance(&pin1))
                .max(ext.params.pins()[1].distance(&pin2))
                .max((ext.params.gammas().get(0, 1) - gamma).norm());

            let c3 = random_cptp_with(d, d, 3, &mut rng)?;
            let pins: Vec<ComplexMatrix> = c3.kraus().to_vec();
            let mut g3 = UpperTriangular::zero(3);
            g3.set(0, 1, c64(0.2, 0.0));
            g3.set(0, 2, c64(0.0, 0.1));
            g3.set(1, 2, c64(0.15, 0.0));
            let p3 = CompositeControlParams::new(pins.clone(), g3)?;
            let cc3 = build_composite_control(&c3, &p3)?;
            let ext3 = extract_composite_params(&cc3, 3)?;
            let rebuilt3 = build_composite_control(&ext3.channel, &ext3.params)?;
            worst_three = worst_three.max(choi_distance(cc3.channel(), rebuilt3.channel())?);
        }
        cases.push(case(format!("composite circuit matches direct build d={d}"), worst_circuit, cfg.tolerance));
        cases.push(case(format!("composite extraction round trip d={d}"), worst_extract, cfg.tolerance));
        cases.push(case(format!("three-branch build and extraction d={d}"), worst_three, cfg.tolerance));
    }
    Ok(cases)
}

fn verify_supermap(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let aux = [1usize, 2, 3];
    let mut cases = Vec::new();
    for &d in &cfg.dims {
        let maps = [
            ("ctrl", SupermapUnderVerification::Ctrl { dim: d }),
            ("two-ctrl", SupermapUnderVerification::TwoCtrl { dim_in: d, dim_out: d }),
            ("composite-ctrl", SupermapUnderVerification::Ctrl2 { dim: d }),
        ];
        for (label, map) in maps {
            let rep = verify_routed_supermap(&map, &aux, cfg.trials, cfg.seed)?;
            let defect = rep.worst_leakage.max(rep.worst_tp_defect);
            cases.push(CaseResult {
                name: format!("verifier passes {label} d={d}"),
                pass: rep.passes == rep.trials && defect <= cfg.tolerance,
                distance: defect,
                witness: None,
            });
        }
        let broken = verify_routed_supermap(
            &SupermapUnderVerification::CtrlMissingSwap { dim: d },
            &aux,
            cfg.trials,
            cfg.seed,
        )?;
        cases.push(CaseResult {
            name: format!("verifier flags the missing return swap d={d}"),
            pass: broken.passes == 0,
            distance: broken.passes as f64 / broken.trials as f64,
            witness: Some(format!("worst leakage {:.6e}", broken.worst_leakage)),
        });
    }
    Ok(cases)
}

/// Parses, resolves, and route-checks a circuit file. Payload paths are
/// relative to the file's directory.
pub fn run_routed_check(file: &Path) -> Result<RouteCheckReport> {
    let text = std::fs::read_to_string(file)?;
    let ast = parse(&text)?;
    let circuit = resolve(&ast, file.parent().unwrap_or_else(|| Path::new(".")))?;
    check(&circuit)
}

/// Parses, resolves, and evaluates a circuit file against slot bindings
/// loaded from routed-channel JSON files.
pub fn run_routed_eval(file: &Path, binds: &[(String, PathBuf)]) -> Result<KrausChannel> {
    let text = std::fs::read_to_string(file)?;
    let ast = parse(&text)?;
    let circuit = resolve(&ast, file.parent().unwrap_or_else(|| Path::new(".")))?;
    let mut bindings = HashMap::new();
    for (slot, path) in binds {
        let body = std::fs::read_to_string(path)?;
        let channel: RoutedKrausChannel = serde_json::from_str(&body)?;
        bindings.insert(slot.clone(), channel);
    }
    eval(&circuit, &bindings)
}

/// Splits a `SLOT=FILE` binding argument.
pub fn parse_bind(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((slot, file)) if !slot.is_empty() && !file.is_empty() => {
            Ok((slot.to_string(), PathBuf::from(file)))
        }
        _ => Err(Error::InvalidConfig(format!(
            "binding `{arg}` is not of the form SLOT=FILE"
        ))),
    }
}
