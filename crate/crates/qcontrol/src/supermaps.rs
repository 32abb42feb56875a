//! Supermaps that turn sector-preserving channels into controlled channels
//! by contracting an explicit wire diagram.
//!
//! Each construction lays out a fixed circuit — carrier preparation,
//! controlled carrier permutations, one use of the input channel, the
//! permutations undone, and a decoder reading the carriers back out — and
//! multiplies the layers' Kraus operators symbolically into a Kraus family
//! for the overall channel. The decoder is a partial isometry; it is
//! completed to a trace-preserving map by dumping whatever amplitude it
//! cannot read back into a fixed state. On inputs that respect their
//! declared sector structure the dumped amplitude is zero, so the choice of
//! dump state is irrelevant; [`verify_routed_supermap`] checks on random
//! inputs (with enlarged sector legs) that the constructions stay trace
//! preserving and keep the control value of the output tied to the control
//! value of the input.

use crate::channel::{compose, tp_defect, KrausChannel};
use crate::control::ControlledChannel;
use crate::error::{Error, Result};
use crate::prng::Prng;
use crate::sectors::{
    random_routed_channel, route_violations, PartitionedSpace, Route, RoutedKrausChannel,
    SectorPreserving1d,
};
use crate::tensor::{c64, eig_hermitian, kron_all, leg_permutation, ComplexMatrix};
use crate::tensor::tol::EQ_TOL;
use serde::{Deserialize, Serialize};

/// Kraus products whose norm falls below this are structural zeros of the
/// contraction (every layer operator has operator norm ≤ 1, so a product
/// can only lose norm) and are dropped to keep families small.
pub(crate) const PRUNE_TOL: f64 = 1e-13;

/// Multiplies every operator of `layer` onto every accumulated operator,
/// pruning structural zeros.
pub(crate) fn product_layer(
    acc: &[ComplexMatrix],
    layer: &[ComplexMatrix],
) -> Result<Vec<ComplexMatrix>> {
    let mut next = Vec::with_capacity(acc.len() * layer.len());
    for l in layer {
        for g in acc {
            let p = l.mul(g)?;
            if p.frobenius_norm() > PRUNE_TOL {
                next.push(p);
            }
        }
    }
    Ok(next)
}

/// Left-multiplies each accumulated operator by Σ_c |c⟩⟨c| ⊗ Π_c, where Π_c
/// is the basis permutation sending |x⟩ to |perms[c][x]⟩ on the block under
/// control value c. Permutations act by moving rows, so no dense
/// permutation matrices are built.
fn controlled_permute(
    acc: &[ComplexMatrix],
    control_dim: usize,
    perms: &[Vec<usize>],
) -> Vec<ComplexMatrix> {
    assert_eq!(perms.len(), control_dim, "one permutation per control value");
    let block = perms[0].len();
    acc.iter()
        .map(|op| {
            assert_eq!(op.rows(), control_dim * block, "operator height mismatch");
            let mut out = ComplexMatrix::zeros(op.rows(), op.cols());
            for c in 0..control_dim {
                for x in 0..block {
                    let src = c * block + x;
                    let dst = c * block + perms[c][x];
                    for col in 0..op.cols() {
                        out.set(dst, col, op.get(src, col));
                    }
                }
            }
            out
        })
        .collect()
}

fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Applies the decoder `w` (a partial isometry: w†w is a 0/1 diagonal
/// projector) to the accumulated operators and completes the family to a
/// trace-preserving one: amplitude in the basis states w cannot read is
/// dumped into `dump_state` (a density matrix on the decoded space;
/// maximally mixed when `None`).
fn decode(
    acc: &[ComplexMatrix],
    w: &ComplexMatrix,
    dump_state: Option<&ComplexMatrix>,
) -> Result<Vec<ComplexMatrix>> {
    let gram = w.adjoint().mul(w)?;
    let mut dumped = Vec::new();
    for p in 0..gram.rows() {
        let g = gram.get(p, p).re;
        assert!(
            g.abs() < 1e-12 || (g - 1.0).abs() < 1e-12,
            "decoder is not a partial isometry onto basis states"
        );
        if g < 0.5 {
            dumped.push(p);
        }
    }
    let n_out = w.rows();
    let factors: Vec<ComplexMatrix> = match dump_state {
        None => {
            let scale = c64(1.0 / (n_out as f64).sqrt(), 0.0);
            (0..n_out).map(|x| ComplexMatrix::basis_column(n_out, x).scale(scale)).collect()
        }
        Some(rho) => {
            if !rho.is_square() || rho.rows() != n_out {
                return Err(Error::DimensionMismatch(format!(
                    "dump state is {}x{} but the decoded space has dimension {n_out}",
                    rho.rows(),
                    rho.cols()
                )));
            }
            let trace_defect = (rho.trace() - c64(1.0, 0.0)).norm();
            if trace_defect > EQ_TOL {
                return Err(Error::NotNormalized(trace_defect));
            }
            let eig = eig_hermitian(rho)?;
            let mut fs = Vec::new();
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda > 1e-15 {
                    fs.push(eig.eigenvector(k).scale(c64(lambda.sqrt(), 0.0)));
                }
            }
            fs
        }
    };
    let mut out = Vec::new();
    for g in acc {
        let principal = w.mul(g)?;
        if principal.frobenius_norm() > PRUNE_TOL {
            out.push(principal);
        }
        for &p in &dumped {
            let row = g.block(p, 0, 1, g.cols());
            if row.frobenius_norm() <= PRUNE_TOL {
                continue;
            }
            for f in &factors {
                let op = f.mul(&row)?;
                if op.frobenius_norm() > PRUNE_TOL {
                    out.push(op);
                }
            }
        }
    }
    Ok(out)
}

/// Column isometry embedding a d-dimensional leg into sector 1 of a
/// (1 + d)-dimensional carrier.
fn carrier_embed(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(1 + d, d, |r, c| if r == 1 + c { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
}

/// Checks that `ch` is a (1, d_in) → (1, d_out) channel on the identity
/// route and returns (d_in, d_out).
fn one_dim_sector_dims(ch: &RoutedKrausChannel) -> Result<(usize, usize)> {
    let sin = ch.space_in().sector_dims();
    let sout = ch.space_out().sector_dims();
    if sin.len() != 2 || sout.len() != 2 || sin[0] != 1 || sout[0] != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected sector dimensions (1, d_in) → (1, d_out), got {sin:?} → {sout:?}"
        )));
    }
    if !ch.route().is_identity() {
        return Err(Error::RouteViolation(
            "input channel must follow the identity route".into(),
        ));
    }
    Ok((sin[1], sout[1]))
}

/// Core of the single-channel control construction, on raw Kraus data.
///
/// `kraus` acts on a (1 + d)·aux space: a carrier whose sector 0 is
/// 1-dimensional, tensored with an auxiliary leg of dimension `aux` (pass 1
/// for no auxiliary). Wires: control (2), carrier A (1 + d), carrier B
/// (1 + d), auxiliary (aux); the data rides in carrier A, a vacuum carrier
/// B is prepared in sector 0, the carriers swap under control value 1, the
/// channel acts on carrier B and the auxiliary, the swap is undone
/// (`return_swap`; disabling it is a deliberately broken reference point
/// for the verifier), and the decoder reads the data back out of carrier A
/// while projecting carrier B onto its vacuum.
fn ctrl_contract(
    kraus: &[ComplexMatrix],
    d: usize,
    aux: usize,
    return_swap: bool,
    dump_state: Option<&ComplexMatrix>,
) -> Result<KrausChannel> {
    let carrier = 1 + d;
    let i2 = ComplexMatrix::identity(2);
    let i_aux = ComplexMatrix::identity(aux);
    let v = carrier_embed(d);
    let vacuum = ComplexMatrix::basis_column(carrier, 0);

    let prep = kron_all(&[&i2, &v, &vacuum, &i_aux]);
    let mut acc = vec![prep];

    let block = carrier * carrier * aux;
    let swap = leg_permutation(&[carrier, carrier, aux], &[1, 0, 2]);
    acc = controlled_permute(&acc, 2, &[identity_perm(block), swap.clone()]);

    let i_carrier = ComplexMatrix::identity(carrier);
    let layer: Vec<ComplexMatrix> =
        kraus.iter().map(|k| kron_all(&[&i2, &i_carrier, k])).collect();
    acc = product_layer(&acc, &layer)?;

    if return_swap {
        acc = controlled_permute(&acc, 2, &[identity_perm(block), swap]);
    }

    let w = kron_all(&[&i2, &v.adjoint(), &vacuum.adjoint(), &i_aux]);
    KrausChannel::new(decode(&acc, &w, dump_state)?)
}

/// Builds the controlled channel that routes its target through `s` under
/// control value 1 and leaves it untouched under control value 0, using one
/// call to `s` inside the carrier-swap circuit.
pub fn ctrl_apply(s: &SectorPreserving1d) -> Result<ControlledChannel> {
    ctrl_apply_with_decoder_state(s, None)
}

/// [`ctrl_apply`] with an explicit decoder dump state (a density matrix on
/// the 2·d-dimensional output). The output does not depend on it; exposing
/// the choice makes that checkable.
pub fn ctrl_apply_with_decoder_state(
    s: &SectorPreserving1d,
    dump_state: Option<&ComplexMatrix>,
) -> Result<ControlledChannel> {
    let d = s.sector_dim();
    let ch = ctrl_contract(s.channel().kraus(), d, 1, true, dump_state)?;
    ControlledChannel::new(ch, 2)
}

/// Inverse of [`ctrl_apply`]: recovers the (1, d) sector-preserving channel
/// from a controlled channel with a square target.
///
/// The circuit embeds the carrier's sector 0 as |control 0⟩|0⟩ and its
/// sector 1 as |control 1⟩|data⟩, runs the controlled channel once, and
/// reads the embedding back; for a controlled channel the amplitude the
/// decoder cannot read is zero.
pub fn ctrl_inverse_apply(cc: &ControlledChannel) -> Result<SectorPreserving1d> {
    if cc.control_dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "inverse expects control dimension 2, got {}",
            cc.control_dim()
        )));
    }
    if cc.target_in() != cc.target_out() {
        return Err(Error::DimensionMismatch(format!(
            "inverse expects a square target, got {}→{}",
            cc.target_in(),
            cc.target_out()
        )));
    }
    let d = cc.target_in();
    let v = ComplexMatrix::from_fn(2 * d, 1 + d, |r, c| {
        let hit = if c == 0 { r == 0 } else { r == d + (c - 1) };
        if hit {
            c64(1.0, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let mut acc = vec![v.clone()];
    acc = product_layer(&acc, cc.channel().kraus())?;
    let ops = decode(&acc, &v.adjoint(), None)?;
    SectorPreserving1d::new(KrausChannel::new(ops)?)
}

/// Core of the two-channel control construction, on raw Kraus data.
///
/// Wires: control (2), carrier A (1 + d_in), auxiliary X (aux_a), carrier B
/// (1 + d_in), auxiliary Y (aux_b). The data is prepared in carrier A and a
/// vacuum in carrier B, the carriers swap under control value 1 (each
/// auxiliary leg stays with its channel), `a_kraus` acts on carrier A ⊗ X
/// and `b_kraus` on carrier B ⊗ Y in a single joint layer, the swap is
/// undone on the output carriers, and the decoder reads carrier A back out.
fn two_ctrl_contract(
    a_kraus: &[ComplexMatrix],
    b_kraus: &[ComplexMatrix],
    d_in: usize,
    d_out: usize,
    aux_a: usize,
    aux_b: usize,
) -> Result<KrausChannel> {
    let car_in = 1 + d_in;
    let car_out = 1 + d_out;
    let i2 = ComplexMatrix::identity(2);
    let i_xa = ComplexMatrix::identity(aux_a);
    let i_xb = ComplexMatrix::identity(aux_b);
    let v_in = carrier_embed(d_in);
    let vac_in = ComplexMatrix::basis_column(car_in, 0);

    let prep = kron_all(&[&i2, &v_in, &i_xa, &vac_in, &i_xb]);
    let mut acc = vec![prep];

    let block_in = car_in * aux_a * car_in * aux_b;
    let swap_in = leg_permutation(&[car_in, aux_a, car_in, aux_b], &[2, 1, 0, 3]);
    acc = controlled_permute(&acc, 2, &[identity_perm(block_in), swap_in]);

    let mut layer = Vec::with_capacity(a_kraus.len() * b_kraus.len());
    for a in a_kraus {
        for b in b_kraus {
            layer.push(kron_all(&[&i2, a, b]));
        }
    }
    acc = product_layer(&acc, &layer)?;

    let block_out = car_out * aux_a * car_out * aux_b;
    let swap_out = leg_permutation(&[car_out, aux_a, car_out, aux_b], &[2, 1, 0, 3]);
    acc = controlled_permute(&acc, 2, &[identity_perm(block_out), swap_out]);

    let v_out = carrier_embed(d_out);
    let vac_out = ComplexMatrix::basis_column(car_out, 0);
    let w = kron_all(&[&i2, &v_out.adjoint(), &i_xa, &vac_out.adjoint(), &i_xb]);
    KrausChannel::new(decode(&acc, &w, None)?)
}

/// Builds the controlled channel that routes its target through `a` under
/// control value 0 and through `b` under control value 1, using one call to
/// each. Both inputs must be (1, d_in) → (1, d_out) channels on the
/// identity route with matching dimensions.
pub fn two_ctrl_apply(
    a: &RoutedKrausChannel,
    b: &RoutedKrausChannel,
) -> Result<ControlledChannel> {
    let (d_in, d_out) = one_dim_sector_dims(a)?;
    let (bd_in, bd_out) = one_dim_sector_dims(b)?;
    if (d_in, d_out) != (bd_in, bd_out) {
        return Err(Error::DimensionMismatch(format!(
            "the two inputs have different shapes: (1,{d_in})→(1,{d_out}) vs (1,{bd_in})→(1,{bd_out})"
        )));
    }
    let ch = two_ctrl_contract(a.channel().kraus(), b.channel().kraus(), d_in, d_out, 1, 1)?;
    ControlledChannel::new(ch, 2)
}

/// [`two_ctrl_apply`] for inputs whose d-dimensional output sector carries
/// a trailing environment factor of dimension `env_dim`: the inputs are
/// (1, d_in) → (1, d_out · env_dim) channels, and the environment is traced
/// out after the contraction.
pub fn two_ctrl_e_apply(
    a: &RoutedKrausChannel,
    b: &RoutedKrausChannel,
    env_dim: usize,
) -> Result<ControlledChannel> {
    let (d_in, wide) = one_dim_sector_dims(a)?;
    let (bd_in, b_wide) = one_dim_sector_dims(b)?;
    if (d_in, wide) != (bd_in, b_wide) {
        return Err(Error::DimensionMismatch(format!(
            "the two inputs have different shapes: (1,{d_in})→(1,{wide}) vs (1,{bd_in})→(1,{b_wide})"
        )));
    }
    if env_dim == 0 || wide % env_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "output sector dimension {wide} does not factor through environment dimension {env_dim}"
        )));
    }
    let d_out = wide / env_dim;
    let with_env =
        two_ctrl_contract(a.channel().kraus(), b.channel().kraus(), d_in, wide, 1, 1)?;
    let keep = ComplexMatrix::identity(2 * d_out);
    let discard_ops: Vec<ComplexMatrix> = (0..env_dim)
        .map(|e| keep.kron(&ComplexMatrix::basis_column(env_dim, e).adjoint()))
        .collect();
    let traced = compose(&KrausChannel::new(discard_ops)?, &with_env)?;
    let mut ops: Vec<ComplexMatrix> = traced.kraus().to_vec();
    ops.retain(|k| k.frobenius_norm() > PRUNE_TOL);
    ControlledChannel::new(KrausChannel::new(ops)?, 2)
}

/// Core of the three-branch control construction, on raw Kraus data.
///
/// `kraus` acts on a (d + 2)·aux space: a carrier partitioned (d, 1, 1)
/// tensored with an auxiliary leg. Wires: control (3), carrier S1 (d + 2),
/// auxiliary (aux), carriers S2 and S3 (d + 2 each). The data enters S1's
/// d-dimensional sector while S2 and S3 hold the two 1-dimensional sector
/// states; under control values 1 and 2 the carrier contents cycle one step
/// (in opposite directions) so the channel — acting once, on S1 and the
/// auxiliary — sees the data, the first 1-dimensional state, or the second;
/// the cycle is then undone and the decoder reads all three carriers back.
fn ctrl2_contract(kraus: &[ComplexMatrix], d: usize, aux: usize) -> Result<KrausChannel> {
    let carrier = d + 2;
    let i3 = ComplexMatrix::identity(3);
    let i_aux = ComplexMatrix::identity(aux);
    let embed = ComplexMatrix::from_fn(carrier, d, |r, c| {
        if r == c {
            c64(1.0, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    let s1 = ComplexMatrix::basis_column(carrier, d);
    let s2 = ComplexMatrix::basis_column(carrier, d + 1);

    let prep = kron_all(&[&i3, &embed, &i_aux, &s1, &s2]);
    let mut acc = vec![prep];

    let dims = [carrier, aux, carrier, carrier];
    let block: usize = dims.iter().product();
    let cycle_left = leg_permutation(&dims, &[2, 1, 3, 0]);
    let cycle_right = leg_permutation(&dims, &[3, 1, 0, 2]);
    acc = controlled_permute(
        &acc,
        3,
        &[identity_perm(block), cycle_left.clone(), cycle_right.clone()],
    );

    let i_rest = ComplexMatrix::identity(carrier * carrier);
    let layer: Vec<ComplexMatrix> = kraus.iter().map(|k| kron_all(&[&i3, k, &i_rest])).collect();
    acc = product_layer(&acc, &layer)?;

    acc = controlled_permute(&acc, 3, &[identity_perm(block), cycle_right, cycle_left]);

    let w = kron_all(&[&i3, &embed.adjoint(), &i_aux, &s1.adjoint(), &s2.adjoint()]);
    KrausChannel::new(decode(&acc, &w, None)?)
}

/// Builds the three-branch controlled channel of a (d, 1, 1)
/// sector-preserving channel on the identity route: control value 0 routes
/// the target through the d-dimensional sector's action, control values 1
/// and 2 pick up the two 1-dimensional sectors' interference amplitudes,
/// all from one call to the input.
pub fn ctrl2_apply(s: &RoutedKrausChannel) -> Result<ControlledChannel> {
    let sin = s.space_in().sector_dims();
    let sout = s.space_out().sector_dims();
    if sin.len() != 3 || sin[1] != 1 || sin[2] != 1 || sin != sout {
        return Err(Error::DimensionMismatch(format!(
            "expected sector dimensions (d, 1, 1) on both sides, got {sin:?} → {sout:?}"
        )));
    }
    if !s.route().is_identity() {
        return Err(Error::RouteViolation(
            "input channel must follow the identity route".into(),
        ));
    }
    let d = sin[0];
    let ch = ctrl2_contract(s.channel().kraus(), d, 1)?;
    ControlledChannel::new(ch, 3)
}

/// Which construction [`verify_routed_supermap`] should exercise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupermapUnderVerification {
    /// [`ctrl_apply`] on (1, dim) inputs.
    Ctrl { dim: usize },
    /// The [`ctrl_apply`] circuit with the return swap removed — a known-bad
    /// construction the verifier must flag.
    CtrlMissingSwap { dim: usize },
    /// [`two_ctrl_apply`] on pairs of (1, dim_in) → (1, dim_out) inputs.
    TwoCtrl { dim_in: usize, dim_out: usize },
    /// [`ctrl2_apply`] on (dim, 1, 1) inputs.
    Ctrl2 { dim: usize },
}

/// One failed (trial, auxiliary dimension) combination.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyFailure {
    pub trial: usize,
    pub aux_dim: usize,
    pub leakage: f64,
    pub tp_defect: f64,
}

/// Outcome of [`verify_routed_supermap`]. A trial passes when every
/// auxiliary dimension keeps both the control-partition leakage and the
/// trace-preservation defect of the output within tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub passes: usize,
    pub worst_leakage: f64,
    pub worst_tp_defect: f64,
    pub failures: Vec<VerifyFailure>,
}

/// Worst leakage across sector pairs the identity route forbids, plus the
/// trace-preservation defect, for a Kraus family on the given partitions.
fn partition_defects(
    ch: &KrausChannel,
    sectors_in: Vec<usize>,
    sectors_out: Vec<usize>,
) -> Result<(f64, f64)> {
    let n = sectors_in.len();
    let in_idx = PartitionedSpace::new(sectors_in)?.indexing();
    let out_idx = PartitionedSpace::new(sectors_out)?.indexing();
    let violations =
        route_violations(ch.kraus(), &in_idx, &out_idx, &Route::identity(n), 0.0)?;
    let leakage = violations.iter().fold(0.0f64, |m, v| m.max(v.2));
    Ok((leakage, tp_defect(ch.kraus())?))
}

/// Checks a construction against its defining behaviour on sector-respecting
/// inputs: for each trial and each auxiliary dimension, a random channel on
/// the correspondingly enlarged sectors is drawn, pushed through the
/// construction, and the output is required to be trace preserving and to
/// keep the control value unchanged (no amplitude between distinct control
/// values of input and output). `seed` makes runs reproducible; trial `t`
/// uses an independent stream split from it.
pub fn verify_routed_supermap(
    map: &SupermapUnderVerification,
    aux_dims: &[usize],
    trials: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let mut report = VerifyReport {
        trials,
        passes: 0,
        worst_leakage: 0.0,
        worst_tp_defect: 0.0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let mut rng = Prng::split(seed, trial as u64);
        let mut trial_ok = true;
        for &aux in aux_dims {
            let rank = 1 + rng.below(2);
            let (out, sectors_in, sectors_out) = match *map {
                SupermapUnderVerification::Ctrl { dim }
                | SupermapUnderVerification::CtrlMissingSwap { dim } => {
                    let space = PartitionedSpace::new(vec![aux, dim * aux])?;
                    let input = random_routed_channel(
                        &space,
                        &space,
                        &Route::identity(2),
                        rank,
                        &mut rng,
                    )?;
                    let return_swap =
                        matches!(map, SupermapUnderVerification::Ctrl { .. });
                    let out =
                        ctrl_contract(input.channel().kraus(), dim, aux, return_swap, None)?;
                    (out, vec![dim * aux; 2], vec![dim * aux; 2])
                }
                SupermapUnderVerification::TwoCtrl { dim_in, dim_out } => {
                    let space_in = PartitionedSpace::new(vec![aux, dim_in * aux])?;
                    let space_out = PartitionedSpace::new(vec![aux, dim_out * aux])?;
                    let route = Route::identity(2);
                    let a = random_routed_channel(&space_in, &space_out, &route, rank, &mut rng)?;
                    let rank_b = 1 + rng.below(2);
                    let b =
                        random_routed_channel(&space_in, &space_out, &route, rank_b, &mut rng)?;
                    let out = two_ctrl_contract(
                        a.channel().kraus(),
                        b.channel().kraus(),
                        dim_in,
                        dim_out,
                        aux,
                        aux,
                    )?;
                    (
                        out,
                        vec![dim_in * aux * aux; 2],
                        vec![dim_out * aux * aux; 2],
                    )
                }
                SupermapUnderVerification::Ctrl2 { dim } => {
                    let space = PartitionedSpace::new(vec![dim * aux, aux, aux])?;
                    let input = random_routed_channel(
                        &space,
                        &space,
                        &Route::identity(3),
                        rank,
                        &mut rng,
                    )?;
                    let out = ctrl2_contract(input.channel().kraus(), dim, aux)?;
                    (out, vec![dim * aux; 3], vec![dim * aux; 3])
                }
            };
            let (leakage, tp) = partition_defects(&out, sectors_in, sectors_out)?;
            report.worst_leakage = report.worst_leakage.max(leakage);
            report.worst_tp_defect = report.worst_tp_defect.max(tp);
            if leakage > EQ_TOL || tp > EQ_TOL {
                trial_ok = false;
                report.failures.push(VerifyFailure {
                    trial,
                    aux_dim: aux,
                    leakage,
                    tp_defect: tp,
                });
            }
        }
        if trial_ok {
            report.passes += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        channels_equal, choi_distance, random_cptp, tensor_product, KrausChannel, PinnedChannel,
    };
    use crate::control::{
        build_composite_control, build_ctrl_two_unitary, build_ctrl_unitary,
        build_pinned_control, coherence_block, CompositeControlParams, UpperTriangular,
    };
    use crate::prng::{haar_isometry, haar_unitary, Prng};
    use crate::sectors::{
        build_isometric_sp, build_sector_preserving_1d, build_sector_preserving_d11,
    };
    use crate::tensor::{direct_sum, operator_rank, singular_values, C64};
    use crate::tensor::tol::RANK_TOL;

    fn assert_same_channel(a: &KrausChannel, b: &KrausChannel) {
        let dist = choi_distance(a, b).unwrap();
        assert!(
            channels_equal(a, b, EQ_TOL).unwrap(),
            "channels differ: Choi distance {dist:.3e}"
        );
    }

    fn phase_mix() -> KrausChannel {
        let s = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i = ComplexMatrix::identity(2).scale(s);
        let z = ComplexMatrix::from_real_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]).scale(s);
        KrausChannel::new(vec![i, z]).unwrap()
    }

    fn embedded_unitary(u: &ComplexMatrix) -> SectorPreserving1d {
        let op = direct_sum(&[&ComplexMatrix::identity(1), u]);
        SectorPreserving1d::new(KrausChannel::new(vec![op]).unwrap()).unwrap()
    }

    fn pinned_first(c: &KrausChannel) -> PinnedChannel {
        PinnedChannel::from_pin(c, &c.kraus()[0]).unwrap()
    }

    fn random_density(dim: usize, rng: &mut Prng) -> ComplexMatrix {
        let g = rng.gaussian_matrix(dim, dim);
        let rho = g.mul(&g.adjoint()).unwrap();
        let t = rho.trace().re;
        rho.scale(c64(1.0 / t, 0.0))
    }

    #[test]
    fn ctrl_of_embedded_unitary_is_the_controlled_unitary() {
        let u = haar_unitary(3, &mut Prng::split(11, 0));
        let cc = ctrl_apply(&embedded_unitary(&u)).unwrap();
        let want = build_ctrl_unitary(&u).unwrap();
        assert_same_channel(cc.channel(), want.channel());
        // A unitary input yields a unitary output: one Choi eigenvalue.
        let eig = eig_hermitian(&cc.channel().choi()).unwrap();
        let n = eig.eigenvalues.len();
        assert!(eig.eigenvalues[n - 2] <= 1e-9 * eig.eigenvalues[n - 1]);
    }

    #[test]
    fn ctrl_of_embedded_identity_is_the_identity() {
        let cc = ctrl_apply(&embedded_unitary(&ComplexMatrix::identity(2))).unwrap();
        assert_same_channel(cc.channel(), &KrausChannel::identity(4));
    }

    #[test]
    fn ctrl_matches_the_directly_built_pinned_control() {
        let pm = phase_mix();
        let mut cases = vec![pinned_first(&pm)];
        for seed in [3u64, 4, 5] {
            let d = 2 + (seed as usize) % 3;
            cases.push(pinned_first(&random_cptp(d, d, 2, seed).unwrap()));
        }
        for p in cases {
            let s = build_sector_preserving_1d(&p).unwrap();
            let cc = ctrl_apply(&s).unwrap();
            let want = build_pinned_control(&p).unwrap();
            assert_same_channel(cc.channel(), want.channel());
        }
    }

    #[test]
    fn ctrl_output_ignores_the_decoder_dump_state() {
        let p = pinned_first(&random_cptp(2, 2, 2, 9).unwrap());
        let s = build_sector_preserving_1d(&p).unwrap();
        let base = ctrl_apply(&s).unwrap();
        let mut rng = Prng::split(10, 0);
        let rho = random_density(4, &mut rng);
        let alt = ctrl_apply_with_decoder_state(&s, Some(&rho)).unwrap();
        assert_same_channel(base.channel(), alt.channel());
        let pure = ComplexMatrix::from_fn(4, 4, |r, c| {
            if r == 1 && c == 1 {
                c64(1.0, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let alt2 = ctrl_apply_with_decoder_state(&s, Some(&pure)).unwrap();
        assert_same_channel(base.channel(), alt2.channel());
    }

    #[test]
    fn dropping_the_return_swap_breaks_control_preservation() {
        let s = build_sector_preserving_1d(&pinned_first(&phase_mix())).unwrap();
        let good = ctrl_apply(&s).unwrap();
        let broken = ctrl_contract(s.channel().kraus(), 2, 1, false, None).unwrap();
        assert!(choi_distance(good.channel(), &broken).unwrap() > 1e-3);
        let (leakage, tp) = partition_defects(&broken, vec![2, 2], vec![2, 2]).unwrap();
        assert!(tp <= EQ_TOL, "the broken circuit is still trace preserving, defect {tp:.3e}");
        assert!(leakage > 1e-3, "expected control leakage, got {leakage:.3e}");
    }

    #[test]
    fn ctrl_inverse_recovers_the_embedded_unitary() {
        let u = haar_unitary(2, &mut Prng::split(13, 0));
        let s = ctrl_inverse_apply(&build_ctrl_unitary(&u).unwrap()).unwrap();
        assert_same_channel(s.channel(), embedded_unitary(&u).channel());
        let id = ctrl_inverse_apply(&build_ctrl_unitary(&ComplexMatrix::identity(3)).unwrap())
            .unwrap();
        assert_same_channel(id.channel(), &KrausChannel::identity(4));
    }

    #[test]
    fn ctrl_round_trips_in_both_directions() {
        let p = pinned_first(&random_cptp(3, 3, 2, 77).unwrap());
        let s = build_sector_preserving_1d(&p).unwrap();
        let back = ctrl_inverse_apply(&ctrl_apply(&s).unwrap()).unwrap();
        assert_same_channel(back.channel(), s.channel());

        let cc = build_pinned_control(&p).unwrap();
        let again = ctrl_apply(&ctrl_inverse_apply(&cc).unwrap()).unwrap();
        assert_same_channel(again.channel(), cc.channel());
    }

    #[test]
    fn two_ctrl_of_isometries_is_the_controlled_pair() {
        let mut rng = Prng::split(21, 0);
        let u = haar_isometry(3, 2, &mut rng);
        let v = haar_isometry(3, 2, &mut rng);
        let cc = two_ctrl_apply(
            &build_isometric_sp(&u).unwrap(),
            &build_isometric_sp(&v).unwrap(),
        )
        .unwrap();
        let want = build_ctrl_two_unitary(&u, &v).unwrap();
        assert_same_channel(cc.channel(), want.channel());

        let e = build_isometric_sp(&ComplexMatrix::identity(2)).unwrap();
        let idcc = two_ctrl_apply(&e, &e).unwrap();
        assert_same_channel(idcc.channel(), &KrausChannel::identity(4));
    }

    #[test]
    fn two_ctrl_matches_the_cross_product_family() {
        let a = build_sector_preserving_1d(&pinned_first(&random_cptp(2, 2, 2, 31).unwrap()))
            .unwrap();
        let b = build_sector_preserving_1d(&pinned_first(&random_cptp(2, 2, 3, 32).unwrap()))
            .unwrap();
        let cc = two_ctrl_apply(a.routed(), b.routed()).unwrap();

        let p0 = ComplexMatrix::from_real_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p1 = ComplexMatrix::from_real_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let (alpha, a_ops) = (a.amplitudes(), a.sector_ops());
        let (beta, b_ops) = (b.amplitudes(), b.sector_ops());
        let mut family = Vec::new();
        for (ai, aop) in alpha.iter().zip(&a_ops) {
            for (bj, bop) in beta.iter().zip(&b_ops) {
                let branch0 = p0.kron(&aop.scale(*bj));
                let branch1 = p1.kron(&bop.scale(*ai));
                family.push(branch0.add(&branch1));
            }
        }
        let want = KrausChannel::new(family).unwrap();
        assert_same_channel(cc.channel(), &want);
    }

    #[test]
    fn two_ctrl_keeps_one_coherence_direction_where_the_tensor_product_keeps_two() {
        let pm = phase_mix();
        let s = build_sector_preserving_1d(&pinned_first(&pm)).unwrap();
        let cc = two_ctrl_apply(s.routed(), s.routed()).unwrap();
        let svs = singular_values(&coherence_block(&cc, 0, 1));
        assert!(svs[0] > 0.4);
        assert!(svs[1] <= 1e-9 * svs[0]);

        let tensor = ControlledChannel::new(
            tensor_product(&KrausChannel::identity(2), &pm).unwrap(),
            2,
        )
        .unwrap();
        let tsvs = singular_values(&coherence_block(&tensor, 0, 1));
        assert!(tsvs[1] >= 0.4);
        assert!(choi_distance(cc.channel(), tensor.channel()).unwrap() > 0.1);
    }

    fn sector_channel_with_env(seed: u64, d_in: usize, wide: usize) -> RoutedKrausChannel {
        let inner = random_cptp(d_in, wide, 2, seed).unwrap();
        let mut rng = Prng::split(seed, 7);
        let amps = rng.unit_vector(inner.kraus().len());
        let ops: Vec<ComplexMatrix> = inner
            .kraus()
            .iter()
            .zip(&amps)
            .map(|(k, &a)| direct_sum(&[&ComplexMatrix::scalar(a), k]))
            .collect();
        RoutedKrausChannel::new(
            KrausChannel::new(ops).unwrap(),
            PartitionedSpace::new(vec![1, d_in]).unwrap(),
            PartitionedSpace::new(vec![1, wide]).unwrap(),
            Route::identity(2),
        )
        .unwrap()
    }

    #[test]
    fn trivial_environment_reduces_to_the_plain_two_ctrl() {
        let a = sector_channel_with_env(41, 2, 3);
        let b = sector_channel_with_env(42, 2, 3);
        let with_env = two_ctrl_e_apply(&a, &b, 1).unwrap();
        let plain = two_ctrl_apply(&a, &b).unwrap();
        assert_same_channel(with_env.channel(), plain.channel());
    }

    #[test]
    fn purified_inputs_reproduce_the_tensor_product_after_tracing() {
        let pm = phase_mix();
        let e0 = ComplexMatrix::basis_column(2, 0);
        let e1 = ComplexMatrix::basis_column(2, 1);
        let m = pm.kraus()[0].kron(&e0).add(&pm.kraus()[1].kron(&e1));
        let a = build_isometric_sp(&m).unwrap();
        let cc = two_ctrl_e_apply(&a, &a, 2).unwrap();
        let want = tensor_product(&KrausChannel::identity(2), &pm).unwrap();
        assert_same_channel(cc.channel(), &want);
        let svs = singular_values(&coherence_block(&cc, 0, 1));
        assert!(svs[1] >= 0.4);
    }

    #[test]
    fn environment_dimension_caps_the_coherence_rank() {
        for seed in [51u64, 52] {
            let a = sector_channel_with_env(seed, 2, 4);
            let b = sector_channel_with_env(seed + 10, 2, 4);
            let cc = two_ctrl_e_apply(&a, &b, 2).unwrap();
            let rank = operator_rank(&coherence_block(&cc, 0, 1), RANK_TOL);
            assert!(rank <= 2, "rank {rank} exceeds the environment dimension");
        }
    }

    #[test]
    fn ctrl2_of_the_identity_quadruple_is_the_identity() {
        let d = 2;
        let s = build_sector_preserving_d11(
            &KrausChannel::identity(d),
            &ComplexMatrix::identity(d),
            &ComplexMatrix::zeros(d, d),
            c64(1.0, 0.0),
        )
        .unwrap();
        let cc = ctrl2_apply(&s).unwrap();
        assert_same_channel(cc.channel(), &KrausChannel::identity(3 * d));
    }

    #[test]
    fn ctrl2_at_the_interference_boundary_gives_one_operator() {
        let u = haar_unitary(2, &mut Prng::split(61, 0));
        let s = build_sector_preserving_d11(
            &KrausChannel::new(vec![u.clone()]).unwrap(),
            &u,
            &ComplexMatrix::zeros(2, 2),
            c64(1.0, 0.0),
        )
        .unwrap();
        let cc = ctrl2_apply(&s).unwrap();
        let p0 = ComplexMatrix::from_real_row_slice(3, 3, &[1., 0., 0., 0., 0., 0., 0., 0., 0.]);
        let rest = ComplexMatrix::from_real_row_slice(3, 3, &[0., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let want = p0.kron(&u).add(&rest.kron(&ComplexMatrix::identity(2)));
        assert_same_channel(cc.channel(), &KrausChannel::new(vec![want]).unwrap());
    }

    #[test]
    fn ctrl2_agrees_with_the_directly_built_composite_control() {
        let pm = phase_mix();
        let mut cases: Vec<(KrausChannel, ComplexMatrix, ComplexMatrix, C64)> = vec![(
            pm.clone(),
            pm.kraus()[0].clone(),
            pm.kraus()[1].clone(),
            c64(0.3, 0.0),
        )];
        let c = random_cptp(3, 3, 2, 55).unwrap();
        cases.push((
            c.clone(),
            c.kraus()[0].clone(),
            c.kraus()[1].clone(),
            c64(0.25, -0.3),
        ));
        for (c, pin1, pin2, gamma) in cases {
            let mut gammas = UpperTriangular::zero(2);
            gammas.set(0, 1, gamma);
            let params =
                CompositeControlParams::new(vec![pin1.clone(), pin2.clone()], gammas).unwrap();
            let direct = build_composite_control(&c, &params).unwrap();
            let s = build_sector_preserving_d11(&c, &pin1, &pin2, gamma).unwrap();
            let via_circuit = ctrl2_apply(&s).unwrap();
            assert_same_channel(via_circuit.channel(), direct.channel());
        }
    }

    #[test]
    fn verifier_passes_the_constructions_and_flags_the_broken_one() {
        for map in [
            SupermapUnderVerification::Ctrl { dim: 2 },
            SupermapUnderVerification::TwoCtrl { dim_in: 2, dim_out: 3 },
            SupermapUnderVerification::Ctrl2 { dim: 2 },
        ] {
            let rep = verify_routed_supermap(&map, &[1, 2], 3, 99).unwrap();
            assert_eq!(rep.trials, 3);
            assert_eq!(rep.passes, 3, "{map:?}: {:?}", rep.failures);
            assert!(rep.failures.is_empty());
            assert!(rep.worst_leakage <= EQ_TOL);
            assert!(rep.worst_tp_defect <= EQ_TOL);
        }

        let broken = verify_routed_supermap(
            &SupermapUnderVerification::CtrlMissingSwap { dim: 2 },
            &[1, 2],
            3,
            99,
        )
        .unwrap();
        assert_eq!(broken.passes, 0);
        assert!(!broken.failures.is_empty());
        assert!(broken.worst_leakage > 1e-3);

        let js = serde_json::to_value(&broken).unwrap();
        for key in ["trials", "passes", "worst_leakage", "worst_tp_defect", "failures"] {
            assert!(js.get(key).is_some(), "missing report key {key}");
        }
        assert!(js["failures"][0].get("aux_dim").is_some());
    }
}
