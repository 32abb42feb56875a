//! Controlled channels on a control ⊗ target space.
//!
//! A [`ControlledChannel`] is a channel on C ⊗ T whose classical branches are
//! themselves channels: for every control value c, the (c, c) diagonal block
//! of the Choi matrix has the marginal of a valid channel Choi. Together with
//! trace preservation this forces every Kraus operator to be block diagonal
//! in the control basis, so the type captures exactly the channels that
//! preserve a classical control value while acting coherently on the target.
//!
//! Two control-basis conventions coexist and both are used by the
//! constructors here:
//!
//! * standard control (`build_ctrl_unitary`, `build_pinned_control`,
//!   `build_ctrl_two_unitary`, `build_two_channel_control`): control value 0
//!   idles (or applies the first channel), control value 1 acts;
//! * composite control (`build_composite_control` and its inverse
//!   [`extract_composite_params`]): control value 0 applies the channel and
//!   the remaining m values idle, with interference amplitudes γ_{jk}
//!   coupling the idle branches to the acting one.
//!
//! [`relabel_control`] converts between the two by permuting control values.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{
    kraus_from_choi, kraus_from_remainder, minimal_kraus, tp_defect, vec_op, KrausChannel,
    PinnedChannel,
};
use crate::error::{Error, Result};
use crate::tensor::tol::{BOUNDARY_EPS, EQ_TOL, PSD_TOL};
use crate::tensor::{c64, eig_hermitian, partial_trace, ComplexMatrix, C64};

/// Channel on control ⊗ target whose Kraus operators are block diagonal in
/// the control basis, so each control value labels a classical branch that
/// is itself a channel on the target.
///
/// The flattened index convention is row-major with the control leg most
/// significant: basis state |c⟩ ⊗ |t⟩ has index c·target_dim + t.
#[derive(Clone, Debug)]
pub struct ControlledChannel {
    control_dim: usize,
    target_in: usize,
    target_out: usize,
    channel: KrausChannel,
}

impl ControlledChannel {
    /// Wraps `channel`, splitting its dimensions as control_dim ⊗ target.
    ///
    /// Validates that every classical branch is trace preserving: the
    /// output marginal of each (c, c) diagonal control block of the Choi
    /// matrix must be the identity on the target input. Combined with
    /// trace preservation of `channel` itself this rejects any channel
    /// that moves amplitude between different control values.
    pub fn new(channel: KrausChannel, control_dim: usize) -> Result<Self> {
        if control_dim == 0 {
            return Err(Error::DimensionMismatch(
                "control dimension must be at least 1".into(),
            ));
        }
        if channel.dim_in() % control_dim != 0 || channel.dim_out() % control_dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "channel dims {}→{} do not factor through control dimension {}",
                channel.dim_in(),
                channel.dim_out(),
                control_dim
            )));
        }
        let cc = Self {
            control_dim,
            target_in: channel.dim_in() / control_dim,
            target_out: channel.dim_out() / control_dim,
            channel,
        };
        let choi = cc.channel.choi();
        let eye = ComplexMatrix::identity(cc.target_in);
        for c in 0..control_dim {
            let block = control_block(&choi, &cc, c, c);
            let marginal = partial_trace(&block, &[cc.target_in, cc.target_out], &[0])?;
            let defect = marginal.distance(&eye);
            if defect > EQ_TOL * (1.0 + choi.frobenius_norm()) {
                return Err(Error::NotControlledForm(format!(
                    "branch {c} is not trace preserving: marginal defect {defect:.3e}"
                )));
            }
        }
        Ok(cc)
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn target_in(&self) -> usize {
        self.target_in
    }

    pub fn target_out(&self) -> usize {
        self.target_out
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    /// Choi matrix of the classical branch for control value `c`, indexed by
    /// target legs only. For a Kraus family {⊕_c K_i^{(c)}} this equals
    /// Σ_i vec(K_i^{(c)}) vec(K_i^{(c)})†.
    pub fn branch_choi(&self, c: usize) -> ComplexMatrix {
        control_block(&self.channel.choi(), self, c, c)
    }
}

/// (c, c′) control block of the Choi matrix: the submatrix on rows with
/// control value c on both legs and columns with control value c′ on both
/// legs, indexed by (target_in, target_out) pairs in vec order.
///
/// For a control-block-diagonal Kraus family {⊕_c K_i^{(c)}} this equals
/// Σ_i vec(K_i^{(c)}) vec(K_i^{(c′)})†, the operator governing how coherence
/// between control values c and c′ is transformed.
pub fn coherence_block(cc: &ControlledChannel, c: usize, c_prime: usize) -> ComplexMatrix {
    control_block(&cc.channel.choi(), cc, c, c_prime)
}

fn control_block(
    choi: &ComplexMatrix,
    cc: &ControlledChannel,
    c: usize,
    c_prime: usize,
) -> ComplexMatrix {
    let (t_in, t_out) = (cc.target_in, cc.target_out);
    let out_dim = cc.control_dim * t_out;
    let row = |cv: usize, ti: usize, to: usize| (cv * t_in + ti) * out_dim + cv * t_out + to;
    let n = t_in * t_out;
    ComplexMatrix::from_fn(n, n, |r, s| {
        let (ti, to) = (r / t_out, r % t_out);
        let (tj, tp) = (s / t_out, s % t_out);
        choi.get(row(c, ti, to), row(c_prime, tj, tp))
    })
}

/// Recovers the distinguished Kraus operator from a coherence block of the
/// form vec(I) vec(K)†, the shape produced by [`build_pinned_control`] for
/// the (0, 1) block. `target_dim` is the (square) target dimension.
pub fn pin_from_coherence_block(block: &ComplexMatrix, target_dim: usize) -> ComplexMatrix {
    let d = target_dim;
    ComplexMatrix::from_fn(d, d, |b, j| {
        let mut acc = C64::default();
        for a in 0..d {
            acc += block.get(a * d + a, j * d + b);
        }
        (acc / d as f64).conj()
    })
}

fn projector(dim: usize, c: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(dim, dim);
    p.set(c, c, c64(1.0, 0.0));
    p
}

fn check_isometry(v: &ComplexMatrix) -> Result<()> {
    let gram = v.adjoint().mul(v)?;
    let defect = gram.distance(&ComplexMatrix::identity(v.cols()));
    if defect > EQ_TOL * (1.0 + gram.frobenius_norm()) {
        return Err(Error::NotIsometry(defect));
    }
    Ok(())
}

/// Controlled unitary: the single Kraus operator |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U.
pub fn build_ctrl_unitary(u: &ComplexMatrix) -> Result<ControlledChannel> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "controlled unitary needs a square matrix, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    check_isometry(u)?;
    build_ctrl_two_unitary(&ComplexMatrix::identity(u.rows()), u)
}

/// Controlled pair of isometries: the single Kraus operator
/// |0⟩⟨0| ⊗ U + |1⟩⟨1| ⊗ V. Both matrices must be isometries of the same
/// shape; the result is again an isometric channel.
pub fn build_ctrl_two_unitary(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<ControlledChannel> {
    if (u.rows(), u.cols()) != (v.rows(), v.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "controlled isometry pair needs equal shapes, got {}x{} and {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    check_isometry(u)?;
    check_isometry(v)?;
    let p0 = projector(2, 0);
    let p1 = projector(2, 1);
    let op = p0.kron(u).add(&p1.kron(v));
    ControlledChannel::new(KrausChannel::new(vec![op])?, 2)
}

/// Controlled channel determined by a pinned channel: Kraus operators
///
/// > |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ C₁,  |1⟩⟨1| ⊗ C_i (i ≥ 2),
///
/// where C₁ is the pin. Control value 0 idles, control value 1 applies the
/// channel, and the pin is the only operator carrying coherence between the
/// two branches: the (0, 1) coherence block is vec(I) vec(C₁)†.
pub fn build_pinned_control(p: &PinnedChannel) -> Result<ControlledChannel> {
    if p.dim_in() != p.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "pinned control needs a square channel, got {}→{}",
            p.dim_in(),
            p.dim_out()
        )));
    }
    let d = p.dim_in();
    let p0 = projector(2, 0);
    let p1 = projector(2, 1);
    let eye = ComplexMatrix::identity(d);
    let mut kraus = vec![p0.kron(&eye).add(&p1.kron(p.pin()))];
    for op in &p.channel().kraus()[1..] {
        kraus.push(p1.kron(op));
    }
    ControlledChannel::new(KrausChannel::new(kraus)?, 2)
}

/// Controlled channel built directly from a Kraus family and an interference
/// amplitude for each operator: Kraus operators α_i |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ C_i.
///
/// This realizes the same channel as canonicalizing (kraus, amplitudes) to
/// pinned form and calling [`build_pinned_control`]; it exists as the
/// independent construction path that equality can be tested against.
pub fn build_control_from_amplitudes(
    kraus: &[ComplexMatrix],
    amplitudes: &[C64],
) -> Result<ControlledChannel> {
    if kraus.is_empty() || kraus.len() != amplitudes.len() {
        return Err(Error::DimensionMismatch(format!(
            "need matching nonempty lists, got {} operators and {} amplitudes",
            kraus.len(),
            amplitudes.len()
        )));
    }
    let d = kraus[0].rows();
    if kraus.iter().any(|k| (k.rows(), k.cols()) != (d, d)) {
        return Err(Error::DimensionMismatch(
            "all Kraus operators must be square with equal dimensions".into(),
        ));
    }
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > EQ_TOL {
        return Err(Error::NotNormalized((norm - 1.0).abs()));
    }
    let p0 = projector(2, 0);
    let p1 = projector(2, 1);
    let eye = ComplexMatrix::identity(d);
    let ops = kraus
        .iter()
        .zip(amplitudes)
        .map(|(k, a)| p0.kron(&eye).scale(*a).add(&p1.kron(k)))
        .collect();
    ControlledChannel::new(KrausChannel::new(ops)?, 2)
}

/// Controlled pair of channels: Kraus operators |0⟩⟨0| ⊗ A_i + |1⟩⟨1| ⊗ B_i,
/// pairing the two families index by index. The shorter list is padded with
/// zero operators, and both lists must be trace preserving on their own.
///
/// The branch channels are recovered as the diagonal control blocks of the
/// Choi matrix, while the pairing chosen here fixes the coherence between
/// them.
pub fn build_two_channel_control(
    a_kraus: &[ComplexMatrix],
    b_kraus: &[ComplexMatrix],
) -> Result<ControlledChannel> {
    if a_kraus.is_empty() || b_kraus.is_empty() {
        return Err(Error::DimensionMismatch(
            "both Kraus lists must be nonempty".into(),
        ));
    }
    let (rows, cols) = (a_kraus[0].rows(), a_kraus[0].cols());
    for op in a_kraus.iter().chain(b_kraus) {
        if (op.rows(), op.cols()) != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "all operators must share the shape {}x{}, got {}x{}",
                rows,
                cols,
                op.rows(),
                op.cols()
            )));
        }
    }
    for list in [a_kraus, b_kraus] {
        let defect = tp_defect(list)?;
        if defect > EQ_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
    }
    let zero = ComplexMatrix::zeros(rows, cols);
    let n = a_kraus.len().max(b_kraus.len());
    let p0 = projector(2, 0);
    let p1 = projector(2, 1);
    let ops = (0..n)
        .map(|i| {
            let a = a_kraus.get(i).unwrap_or(&zero);
            let b = b_kraus.get(i).unwrap_or(&zero);
            p0.kron(a).add(&p1.kron(b))
        })
        .collect();
    ControlledChannel::new(KrausChannel::new(ops)?, 2)
}

/// Strictly upper triangular table of complex interference amplitudes
/// γ_{jk}, 0 ≤ j < k < m, for an m-branch composite control.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular {
    m: usize,
    entries: Vec<C64>,
}

impl UpperTriangular {
    /// All-zero table for m branches.
    pub fn zero(m: usize) -> Self {
        Self { m, entries: vec![C64::default(); m * m] }
    }

    /// Number of branches m (entries exist for pairs j < k < m).
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        assert!(j < k && k < self.m, "needs j < k < {}, got ({j}, {k})", self.m);
        self.entries[j * self.m + k]
    }

    pub fn set(&mut self, j: usize, k: usize, value: C64) {
        assert!(j < k && k < self.m, "needs j < k < {}, got ({j}, {k})", self.m);
        self.entries[j * self.m + k] = value;
    }

    /// Σ_{i<j} |γ_{ij}|², the interference weight already committed to
    /// branches before j.
    pub fn column_weight(&self, j: usize) -> f64 {
        (0..j).map(|i| self.get(i, j).norm_sqr()).sum()
    }
}

/// Parameters of an m-branch composite control: one pin per acting branch
/// plus the interference amplitudes between branches.
///
/// Feasibility requires every |γ_{jk}| ≤ 1 and every column weight
/// Σ_{i<j} |γ_{ij}|² ≤ 1, so that the residual coefficients
/// √(1 − Σ_{i<j} |γ_{ij}|²) in the Kraus display are real.
#[derive(Clone, Debug)]
pub struct CompositeControlParams {
    pins: Vec<ComplexMatrix>,
    gammas: UpperTriangular,
}

impl CompositeControlParams {
    pub fn new(pins: Vec<ComplexMatrix>, gammas: UpperTriangular) -> Result<Self> {
        if pins.is_empty() {
            return Err(Error::DimensionMismatch("need at least one pin".into()));
        }
        let d = pins[0].rows();
        if pins.iter().any(|p| (p.rows(), p.cols()) != (d, d)) {
            return Err(Error::DimensionMismatch(
                "all pins must be square with equal dimensions".into(),
            ));
        }
        if gammas.size() != pins.len() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude table is sized for {} branches but there are {} pins",
                gammas.size(),
                pins.len()
            )));
        }
        for j in 0..gammas.size() {
            for k in (j + 1)..gammas.size() {
                let g = gammas.get(j, k).norm();
                if g > 1.0 + EQ_TOL {
                    return Err(Error::InfeasibleAmplitudes(format!(
                        "|γ_{{{j},{k}}}| = {g} exceeds 1"
                    )));
                }
            }
            let excess = gammas.column_weight(j) - 1.0;
            if excess > 1e-12 {
                return Err(Error::InfeasibleAmplitudes(format!(
                    "branch {j} is oversubscribed: Σ|γ|² = 1 + {excess:.3e}"
                )));
            }
        }
        Ok(Self { pins, gammas })
    }

    pub fn pins(&self) -> &[ComplexMatrix] {
        &self.pins
    }

    pub fn gammas(&self) -> &UpperTriangular {
        &self.gammas
    }

    /// Number of acting branches m.
    pub fn branches(&self) -> usize {
        self.pins.len()
    }

    /// Residual coefficient √(1 − Σ_{i<j} |γ_{ij}|²) of branch j (0-based).
    pub fn coefficient(&self, j: usize) -> f64 {
        (1.0 - self.gammas.column_weight(j)).max(0.0).sqrt()
    }
}

/// Composite control of `c` with m = params.branches() idle branches:
/// control dimension m + 1, control value 0 applies `c`, and for each
/// 1-based branch j the Kraus family contains
///
/// > |0⟩⟨0| ⊗ pin_j + √(1 − Σ_{i<j}|γ_{ij}|²) |j⟩⟨j| ⊗ I
/// >              + Σ_{k>j} γ_{jk} |k⟩⟨k| ⊗ I,
///
/// completed by |0⟩⟨0| ⊗ C_i for the remaining Kraus operators C_i of `c`.
/// The pins must be jointly extendable operators of `c`: the remainder map
/// 𝒞 − Σ_j pin_j · pin_j† has to be completely positive; the completion is
/// recovered from that remainder.
pub fn build_composite_control(
    c: &KrausChannel,
    params: &CompositeControlParams,
) -> Result<ControlledChannel> {
    let d = c.dim_in();
    if c.dim_out() != d {
        return Err(Error::DimensionMismatch(format!(
            "composite control needs a square channel, got {}→{}",
            c.dim_in(),
            c.dim_out()
        )));
    }
    if params.pins[0].rows() != d {
        return Err(Error::DimensionMismatch(format!(
            "pins are {}-dimensional but the channel acts on {} dimensions",
            params.pins[0].rows(),
            d
        )));
    }
    let m = params.branches();
    let mut remainder = c.choi();
    for pin in &params.pins {
        let v = vec_op(pin);
        remainder = remainder.sub(&v.mul(&v.adjoint())?);
    }
    let min_eig = eig_hermitian(&remainder)?.eigenvalues[0];
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidPin(min_eig));
    }
    let completion = kraus_from_remainder(&remainder, d, d)?;

    let cd = m + 1;
    let eye = ComplexMatrix::identity(d);
    let mut kraus = Vec::with_capacity(m + completion.len());
    for (idx, pin) in params.pins.iter().enumerate() {
        let j = idx + 1;
        let mut op = projector(cd, 0).kron(pin);
        op = op.add(&projector(cd, j).kron(&eye).scale(c64(params.coefficient(idx), 0.0)));
        for k in (j + 1)..=m {
            op = op.add(&projector(cd, k).kron(&eye).scale(params.gammas.get(idx, k - 1)));
        }
        kraus.push(op);
    }
    for op in &completion {
        kraus.push(projector(cd, 0).kron(op));
    }
    kraus.retain(|k| k.frobenius_norm() > 1e-15);
    ControlledChannel::new(KrausChannel::new(kraus)?, cd)
}

/// Result of [`extract_composite_params`]: the recovered channel and
/// parameters, plus the 0-based pin indices whose residual coefficient
/// vanished. A vanishing coefficient means the corresponding pin no longer
/// influences the channel, so its value is not recoverable; the extractor
/// reports a zero matrix there and callers must not expect round trips to
/// reproduce the pin that was passed in.
#[derive(Clone, Debug)]
pub struct CompositeExtraction {
    pub channel: KrausChannel,
    pub params: CompositeControlParams,
    pub indeterminate_pins: Vec<usize>,
}

/// Recovers (channel, pins, interference amplitudes) from an m-branch
/// composite control, inverting [`build_composite_control`].
///
/// All data is read off the Choi matrix: the (0, 0) control block is the
/// Choi of the channel; the (0, j) blocks have the rank-one form
/// vec(B_j) vec(I)† from which the pin combinations B_j follow; and the
/// (j, k) blocks are g_{jk} · vec(I) vec(I)†, giving the amplitude Gram
/// data. Pins and amplitudes are then obtained by back substitution:
///
/// > B_j = Σ_{i<j} γ̄_{ij} pin_i + coef_j pin_j,
/// > g_{jk} = Σ_{i<j} γ_{ij} γ̄_{ik} + coef_j γ̄_{jk}  (j < k).
///
/// Any block failing its required shape, and any channel whose Choi has
/// weight outside the control-diagonal blocks, is rejected as not of
/// composite-controlled form.
pub fn extract_composite_params(
    cc: &ControlledChannel,
    m: usize,
) -> Result<CompositeExtraction> {
    if cc.control_dim() != m + 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected control dimension {}, got {}",
            m + 1,
            cc.control_dim()
        )));
    }
    if cc.target_in() != cc.target_out() {
        return Err(Error::DimensionMismatch(format!(
            "composite control has a square target, got {}→{}",
            cc.target_in(),
            cc.target_out()
        )));
    }
    let d = cc.target_in();
    let choi = cc.channel().choi();
    let tol = EQ_TOL * (1.0 + choi.frobenius_norm());

    // All weight must sit in the control-diagonal blocks: indices whose
    // input and output control values disagree must carry nothing.
    let out_dim = cc.control_dim() * cc.target_out();
    let same_control: Vec<bool> = (0..choi.rows())
        .map(|r| (r / out_dim) / cc.target_in() == (r % out_dim) / cc.target_out())
        .collect();
    let mut off_sq = 0.0;
    for r in 0..choi.rows() {
        for s in 0..choi.cols() {
            if !(same_control[r] && same_control[s]) {
                off_sq += choi.get(r, s).norm_sqr();
            }
        }
    }
    let off_mass = off_sq.sqrt();
    if off_mass > tol {
        return Err(Error::NotControlledForm(format!(
            "Choi weight {off_mass:.3e} outside the control-diagonal blocks"
        )));
    }
    let mut blocks: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(m + 1);
    for c in 0..=m {
        blocks.push((0..=m).map(|cp| control_block(&choi, cc, c, cp)).collect());
    }

    let v_eye = vec_op(&ComplexMatrix::identity(d));
    let dsq = d as f64 * d as f64;

    // Idle-branch pairs must transform coherence by a scalar.
    let mut g = vec![vec![C64::default(); m + 1]; m + 1];
    for j in 1..=m {
        for k in j..=m {
            let block = &blocks[j][k];
            let scalar =
                block.mul(&v_eye)?.adjoint().mul(&v_eye)?.get(0, 0).conj() / dsq;
            let model = v_eye.mul(&v_eye.adjoint())?.scale(scalar);
            let defect = block.distance(&model);
            if defect > tol {
                return Err(Error::NotControlledForm(format!(
                    "block ({j}, {k}) is not a scalar multiple of the idle form: defect {defect:.3e}"
                )));
            }
            g[j][k] = scalar;
            g[k][j] = scalar.conj();
        }
        if (g[j][j] - c64(1.0, 0.0)).norm() > tol {
            return Err(Error::NotControlledForm(format!(
                "branch {j} does not idle with unit weight: g = {:?}",
                g[j][j]
            )));
        }
    }

    // Acting-branch coherence must be a left multiplication: vec(B_j) vec(I)†.
    let mut b_ops = vec![ComplexMatrix::zeros(d, d); m + 1];
    for j in 1..=m {
        let block = &blocks[0][j];
        let vb = block.mul(&v_eye)?.scale(c64(1.0 / d as f64, 0.0));
        let model = vb.mul(&v_eye.adjoint())?;
        let defect = block.distance(&model);
        if defect > tol {
            return Err(Error::NotControlledForm(format!(
                "block (0, {j}) is not a left multiplication: defect {defect:.3e}"
            )));
        }
        b_ops[j] = ComplexMatrix::from_fn(d, d, |a, i| vb.get(i * d + a, 0));
    }

    let channel =
        minimal_kraus(&KrausChannel::new(kraus_from_choi(&blocks[0][0], d, d, 1e-12)?)?)?;

    // Back substitution for pins and amplitudes, flagging branches whose
    // residual coefficient vanished.
    let mut gammas = UpperTriangular::zero(m);
    let mut pins: Vec<ComplexMatrix> = Vec::with_capacity(m);
    let mut indeterminate = Vec::new();
    for j in 1..=m {
        let mut weight = 0.0;
        for i in 1..j {
            weight += gammas.get(i - 1, j - 1).norm_sqr();
        }
        let excess = weight - 1.0;
        if excess > 1e-9 {
            return Err(Error::InfeasibleAmplitudes(format!(
                "extracted amplitudes oversubscribe branch {j}: Σ|γ|² = 1 + {excess:.3e}"
            )));
        }
        let coef = (1.0 - weight).max(0.0).sqrt();

        let mut b_res = b_ops[j].clone();
        for i in 1..j {
            b_res = b_res.sub(&pins[i - 1].scale(gammas.get(i - 1, j - 1).conj()));
        }
        if coef <= BOUNDARY_EPS {
            // The pin and its outgoing amplitudes no longer influence the
            // channel; report zeros and flag the branch instead of dividing
            // by the vanishing coefficient.
            let leftover = b_res.frobenius_norm();
            if leftover > BOUNDARY_EPS * (d as f64).sqrt() + tol {
                return Err(Error::NotControlledForm(format!(
                    "branch {j} has vanishing weight but residue {leftover:.3e}"
                )));
            }
            pins.push(ComplexMatrix::zeros(d, d));
            indeterminate.push(j - 1);
            for k in (j + 1)..=m {
                let mut r = g[j][k];
                for i in 1..j {
                    r -= gammas.get(i - 1, j - 1) * gammas.get(i - 1, k - 1).conj();
                }
                if r.norm() > BOUNDARY_EPS + tol {
                    return Err(Error::NotControlledForm(format!(
                        "branch pair ({j}, {k}) has vanishing weight but residue {:.3e}",
                        r.norm()
                    )));
                }
            }
            continue;
        }
        pins.push(b_res.scale(c64(1.0 / coef, 0.0)));
        for k in (j + 1)..=m {
            let mut r = g[j][k];
            for i in 1..j {
                r -= gammas.get(i - 1, j - 1) * gammas.get(i - 1, k - 1).conj();
            }
            gammas.set(j - 1, k - 1, (r / coef).conj());
        }
    }

    let params = CompositeControlParams::new(pins, gammas)?;
    Ok(CompositeExtraction { channel, params, indeterminate_pins: indeterminate })
}

/// Permutes the control values of a controlled channel: control value c of
/// the input behaves like control value `perm[c]` of the result. Used to
/// convert between the convention where control value 0 idles and the one
/// where control value 0 applies the channel.
pub fn relabel_control(cc: &ControlledChannel, perm: &[usize]) -> Result<ControlledChannel> {
    let cd = cc.control_dim();
    if perm.len() != cd {
        return Err(Error::DimensionMismatch(format!(
            "permutation has {} entries for control dimension {cd}",
            perm.len()
        )));
    }
    let mut seen = vec![false; cd];
    for &p in perm {
        if p >= cd || seen[p] {
            return Err(Error::DimensionMismatch(format!(
                "{perm:?} is not a permutation of 0..{cd}"
            )));
        }
        seen[p] = true;
    }
    let mut p_mat = ComplexMatrix::zeros(cd, cd);
    for (c, &pc) in perm.iter().enumerate() {
        p_mat.set(pc, c, c64(1.0, 0.0));
    }
    let left = p_mat.kron(&ComplexMatrix::identity(cc.target_out()));
    let right = p_mat.adjoint().kron(&ComplexMatrix::identity(cc.target_in()));
    let kraus = cc
        .channel()
        .kraus()
        .iter()
        .map(|k| left.mul(k).and_then(|lk| lk.mul(&right)))
        .collect::<Result<Vec<_>>>()?;
    ControlledChannel::new(KrausChannel::new(kraus)?, cd)
}

impl Serialize for ControlledChannel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ControlledRepr {
            channel: self.channel.clone(),
            control_dim: self.control_dim,
            target_in: self.target_in,
            target_out: self.target_out,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ControlledChannel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ControlledRepr::deserialize(deserializer)?;
        let cc = ControlledChannel::new(repr.channel, repr.control_dim)
            .map_err(D::Error::custom)?;
        if cc.target_in != repr.target_in || cc.target_out != repr.target_out {
            return Err(D::Error::custom(format!(
                "declared target dims {}→{} do not match channel dims {}→{}",
                repr.target_in, repr.target_out, cc.target_in, cc.target_out
            )));
        }
        Ok(cc)
    }
}

#[derive(Serialize, Deserialize)]
struct ControlledRepr {
    #[serde(flatten)]
    channel: KrausChannel,
    control_dim: usize,
    target_in: usize,
    target_out: usize,
}
