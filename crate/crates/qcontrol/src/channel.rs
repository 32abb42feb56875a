//! Quantum channels as Kraus families.
//!
//! A channel is stored as a list of Kraus operators `K_i` (each `dim_out` ×
//! `dim_in`) with Σ K†K = I. Its canonical fingerprint is the Choi matrix
//!
//! > C = Σ_{ij} |i⟩⟨j|_in ⊗ 𝒞(|i⟩⟨j|),
//!
//! a `dim_in·dim_out`-dimensional PSD matrix with the input leg most
//! significant; two channels are equal exactly when their Choi matrices
//! coincide, which is what [`channels_equal`] tests. The same convention is
//! used to go back: eigenvectors of the Choi, column-reshaped, are a minimal
//! Kraus family.
//!
//! The module also implements the *pinned* normal form: given a Kraus family
//! and an amplitude vector α, a unitary rotation of the family makes the
//! single operator Σ ᾱ_i K_i its first element. That distinguished first
//! operator (the pin) is the only data a coherent control construction sees
//! beyond the channel itself, which is why several functions here care about
//! "which operator is first" rather than the usual representation-invariant
//! questions.

use crate::error::{Error, Result};
use crate::prng::Prng;
use crate::tensor::tol::{EQ_TOL, PSD_TOL, RANK_TOL};
use crate::tensor::{c64, eig_hermitian, qr_isometry, ComplexMatrix, C64};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Trace-preserving completely positive map in Kraus form.
///
/// Invariants: at least one Kraus operator, all of shape `dim_out` ×
/// `dim_in`, and Σ K†K = I within [`EQ_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
}

/// Completely positive (not necessarily trace-preserving) map in Kraus form.
/// Used for channel remainders and other sub-normalized pieces.
#[derive(Clone, Debug)]
pub struct CpMap {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<ComplexMatrix>,
}

fn check_kraus_shapes(kraus: &[ComplexMatrix]) -> Result<(usize, usize)> {
    let first = kraus.first().ok_or_else(|| {
        Error::DimensionMismatch("a Kraus family needs at least one operator".into())
    })?;
    let (dim_out, dim_in) = (first.rows(), first.cols());
    if dim_in == 0 || dim_out == 0 {
        return Err(Error::DimensionMismatch("zero-dimensional Kraus operator".into()));
    }
    for k in kraus {
        if (k.rows(), k.cols()) != (dim_out, dim_in) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operators disagree in shape: {}x{} vs {}x{}",
                k.rows(),
                k.cols(),
                dim_out,
                dim_in
            )));
        }
    }
    Ok((dim_in, dim_out))
}

/// Frobenius defect of the trace-preservation condition ‖Σ K†K − I‖.
pub fn tp_defect(kraus: &[ComplexMatrix]) -> Result<f64> {
    let (dim_in, _) = check_kraus_shapes(kraus)?;
    let mut acc = ComplexMatrix::zeros(dim_in, dim_in);
    for k in kraus {
        acc = acc.add(&k.adjoint().mul(k)?);
    }
    Ok(acc.distance(&ComplexMatrix::identity(dim_in)))
}

impl KrausChannel {
    /// Builds a channel, validating shapes and trace preservation.
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let (dim_in, dim_out) = check_kraus_shapes(&kraus)?;
        let defect = tp_defect(&kraus)?;
        if defect > EQ_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
        Ok(Self { dim_in, dim_out, kraus })
    }

    /// Identity channel on a `dim`-dimensional space.
    pub fn identity(dim: usize) -> Self {
        Self { dim_in: dim, dim_out: dim, kraus: vec![ComplexMatrix::identity(dim)] }
    }

    /// Channel with the single Kraus operator `v`; `v` must satisfy V†V = I.
    pub fn from_isometry(v: &ComplexMatrix) -> Result<Self> {
        let defect = v
            .adjoint()
            .mul(v)?
            .distance(&ComplexMatrix::identity(v.cols()));
        if defect > EQ_TOL {
            return Err(Error::NotIsometry(defect));
        }
        Ok(Self { dim_in: v.cols(), dim_out: v.rows(), kraus: vec![v.clone()] })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Applies the linear extension of the channel to an arbitrary operator
    /// X (not necessarily a state): Σ K X K†.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if (x.rows(), x.cols()) != (self.dim_in, self.dim_in) {
            return Err(Error::DimensionMismatch(format!(
                "channel on dimension {} applied to a {}x{} operator",
                self.dim_in,
                x.rows(),
                x.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out = out.add(&k.mul(x)?.mul(&k.adjoint())?);
        }
        Ok(out)
    }

    /// Choi matrix with the input leg most significant (see module docs).
    pub fn choi(&self) -> ComplexMatrix {
        choi_of_kraus(&self.kraus, self.dim_in, self.dim_out)
    }
}

/// Column-vectorization used by the Choi convention: `v[i·dim_out + a] =
/// K[a, i]`, i.e. the columns of K stacked with the input index most
/// significant.
pub fn vec_op(k: &ComplexMatrix) -> ComplexMatrix {
    let (dim_out, dim_in) = (k.rows(), k.cols());
    ComplexMatrix::from_fn(dim_in * dim_out, 1, |idx, _| {
        k.get(idx % dim_out, idx / dim_out)
    })
}

/// Choi matrix of an arbitrary Kraus family (no TP requirement):
/// Σ_k vec(K_k) vec(K_k)†.
pub fn choi_of_kraus(kraus: &[ComplexMatrix], dim_in: usize, dim_out: usize) -> ComplexMatrix {
    let n = dim_in * dim_out;
    let mut choi = ComplexMatrix::zeros(n, n);
    for k in kraus {
        debug_assert_eq!((k.rows(), k.cols()), (dim_out, dim_in));
        let v = vec_op(k);
        for r in 0..n {
            let vr = v.get(r, 0);
            if vr == C64::default() {
                continue;
            }
            for c in 0..n {
                choi.add_at(r, c, vr * v.get(c, 0).conj());
            }
        }
    }
    choi
}

/// Kraus family recovered from a PSD Choi-like matrix: eigenvectors with
/// eigenvalue above `floor` are column-reshaped and weighted by √λ.
pub fn kraus_from_choi(
    choi: &ComplexMatrix,
    dim_in: usize,
    dim_out: usize,
    floor: f64,
) -> Result<Vec<ComplexMatrix>> {
    if choi.rows() != dim_in * dim_out || !choi.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Choi matrix is {}x{}, expected dimension {}",
            choi.rows(),
            choi.cols(),
            dim_in * dim_out
        )));
    }
    let eig = eig_hermitian(choi)?;
    let mut out = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= floor {
            continue;
        }
        let v = eig.eigenvector(idx);
        let w = lambda.sqrt();
        out.push(ComplexMatrix::from_fn(dim_out, dim_in, |a, i| {
            v.get(i * dim_out + a, 0) * w
        }));
    }
    // Largest eigenvalue first reads better downstream.
    out.reverse();
    Ok(out)
}

/// Frobenius distance between the Choi matrices of two channels.
pub fn choi_distance(a: &KrausChannel, b: &KrausChannel) -> Result<f64> {
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out) {
        return Err(Error::DimensionMismatch(format!(
            "comparing a {}→{} channel with a {}→{} channel",
            a.dim_in, a.dim_out, b.dim_in, b.dim_out
        )));
    }
    Ok(a.choi().distance(&b.choi()))
}

/// Channel equality: Choi distance within `tol` (use [`EQ_TOL`] by default).
pub fn channels_equal(a: &KrausChannel, b: &KrausChannel, tol: f64) -> Result<bool> {
    Ok(choi_distance(a, b)? <= tol)
}

/// Smallest eigenvalue of the remainder map ρ ↦ 𝒞(ρ) − kρk† as a Choi
/// matrix; ≥ −tol means `k` is a valid Kraus member of some representation.
fn remainder_min_eigenvalue(c: &KrausChannel, k: &ComplexMatrix) -> Result<f64> {
    if (k.rows(), k.cols()) != (c.dim_out, c.dim_in) {
        return Err(Error::DimensionMismatch(format!(
            "pin is {}x{} but the channel maps {} to {}",
            k.rows(),
            k.cols(),
            c.dim_in,
            c.dim_out
        )));
    }
    let v = vec_op(k);
    let remainder = c.choi().sub(&v.mul(&v.adjoint())?);
    let eig = eig_hermitian(&remainder)?;
    Ok(eig.eigenvalues[0])
}

/// True when `k` appears as an operator in *some* Kraus representation of
/// `c`, i.e. when the remainder map 𝒞 − k·k† is completely positive (its
/// Choi matrix has no eigenvalue below −[`PSD_TOL`]).
pub fn is_valid_pin(c: &KrausChannel, k: &ComplexMatrix) -> Result<bool> {
    Ok(remainder_min_eigenvalue(c, k)? >= -PSD_TOL)
}

/// Channel together with a distinguished first Kraus operator (the pin).
///
/// Invariant: `pin` equals the first element of the Kraus list, so the pinned
/// control constructions can read it positionally.
#[derive(Clone, Debug)]
pub struct PinnedChannel {
    channel: KrausChannel,
    pin: ComplexMatrix,
}

impl PinnedChannel {
    /// Wraps a channel whose first Kraus operator already is the pin.
    pub fn new(channel: KrausChannel, pin: ComplexMatrix) -> Result<Self> {
        let d = channel.kraus[0].distance(&pin);
        if d > EQ_TOL {
            return Err(Error::PinNotFirst(d));
        }
        Ok(Self { channel, pin })
    }

    /// Builds the pinned form directly from a channel and a valid pin: the
    /// Kraus list is the pin followed by a representation of the remainder
    /// map recovered from its Choi eigenvectors.
    pub fn from_pin(c: &KrausChannel, pin: &ComplexMatrix) -> Result<Self> {
        let min_eig = remainder_min_eigenvalue(c, pin)?;
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidPin(min_eig));
        }
        let v = vec_op(pin);
        let remainder = c.choi().sub(&v.mul(&v.adjoint())?);
        let completion = kraus_from_remainder(&remainder, c.dim_in, c.dim_out)?;
        let mut kraus = vec![pin.clone()];
        kraus.extend(completion);
        Ok(Self { channel: KrausChannel::new(kraus)?, pin: pin.clone() })
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn pin(&self) -> &ComplexMatrix {
        &self.pin
    }

    pub fn dim_in(&self) -> usize {
        self.channel.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.channel.dim_out
    }
}

/// Kraus operators of a remainder Choi matrix, with an absolute eigenvalue
/// floor so that an (up to roundoff) zero remainder yields no operators.
pub(crate) fn kraus_from_remainder(
    remainder: &ComplexMatrix,
    dim_in: usize,
    dim_out: usize,
) -> Result<Vec<ComplexMatrix>> {
    let eig = eig_hermitian(remainder)?;
    let largest = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let floor = (RANK_TOL * largest).max(1e-12);
    kraus_from_choi(remainder, dim_in, dim_out, floor)
}

/// Extends the unit vector `alpha` to an orthonormal basis and returns the
/// unitary V whose rows are the conjugated basis vectors, so that
/// V·alpha = e₁. When `alpha` already is e₁ the result is exactly the
/// identity.
fn rotation_to_first(alpha: &[C64]) -> Vec<Vec<C64>> {
    let n = alpha.len();
    let mut basis: Vec<Vec<C64>> = vec![alpha.to_vec()];
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        // Project e_k off the basis collected so far.
        let mut v: Vec<C64> = (0..n)
            .map(|i| if i == k { c64(1.0, 0.0) } else { C64::default() })
            .collect();
        for b in &basis {
            let overlap: C64 = b.iter().zip(&v).map(|(&bi, &vi)| bi.conj() * vi).sum();
            for i in 0..n {
                v[i] -= overlap * b[i];
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for z in &mut v {
                *z /= norm;
            }
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), n, "orthonormal completion failed");
    basis
}

/// Rotates a Kraus family so that the amplitude-weighted combination
/// Σ ᾱ_i K_i becomes the first operator, leaving the channel unchanged.
///
/// `amplitudes` must have the same length as `kraus` and unit norm within
/// [`EQ_TOL`]. The rotated family is K'_j = Σ_i V_{ji} K_i for a unitary V
/// with V·α = e₁, so this is the standard unitary freedom of Kraus
/// representations; the returned pin is exactly Σ ᾱ_i K_i.
pub fn canonicalize_pinned(
    kraus: &[ComplexMatrix],
    amplitudes: &[C64],
) -> Result<PinnedChannel> {
    let (dim_in, dim_out) = check_kraus_shapes(kraus)?;
    if amplitudes.len() != kraus.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} amplitudes for {} Kraus operators",
            amplitudes.len(),
            kraus.len()
        )));
    }
    let norm_defect = (amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs();
    if norm_defect > EQ_TOL {
        return Err(Error::NotNormalized(norm_defect));
    }
    let basis = rotation_to_first(amplitudes);
    let mut rotated = Vec::with_capacity(kraus.len());
    for row in &basis {
        let mut op = ComplexMatrix::zeros(dim_out, dim_in);
        for (i, k) in kraus.iter().enumerate() {
            let w = row[i].conj();
            if w != C64::default() {
                op = op.add(&k.scale(w));
            }
        }
        rotated.push(op);
    }
    let pin = rotated[0].clone();
    // Drop rotated operators that vanished (shorter representations stay
    // short); the pin itself is always kept, even when zero.
    let kept: Vec<ComplexMatrix> = std::iter::once(pin.clone())
        .chain(rotated.into_iter().skip(1).filter(|k| k.frobenius_norm() > 1e-12))
        .collect();
    PinnedChannel::new(KrausChannel::new(kept)?, pin)
}

/// Shortest Kraus representation: eigenvectors of the Choi matrix above the
/// relative cutoff [`RANK_TOL`]. The resulting operators are mutually
/// orthogonal in the Hilbert-Schmidt inner product, hence linearly
/// independent.
pub fn minimal_kraus(c: &KrausChannel) -> Result<KrausChannel> {
    let choi = c.choi();
    let eig = eig_hermitian(&choi)?;
    let largest = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let kraus = kraus_from_choi(&choi, c.dim_in, c.dim_out, RANK_TOL * largest)?;
    KrausChannel::new(kraus)
}

/// Composition `second ∘ first` (apply `first`, then `second`): all pairwise
/// operator products.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if second.dim_in != first.dim_out {
        return Err(Error::DimensionMismatch(format!(
            "composing {}→{} after {}→{}",
            second.dim_in, second.dim_out, first.dim_in, first.dim_out
        )));
    }
    let mut kraus = Vec::with_capacity(second.kraus.len() * first.kraus.len());
    for s in &second.kraus {
        for f in &first.kraus {
            kraus.push(s.mul(f)?);
        }
    }
    KrausChannel::new(kraus)
}

/// Parallel composition a ⊗ b (leftmost factor most significant).
pub fn tensor_product(a: &KrausChannel, b: &KrausChannel) -> Result<KrausChannel> {
    let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
    for ka in &a.kraus {
        for kb in &b.kraus {
            kraus.push(ka.kron(kb));
        }
    }
    KrausChannel::new(kraus)
}

/// Control-coherence cross block Σ_i vec(A_i) vec(B_i)† of the two-channel
/// control built from paired Kraus lists. This is the (control 0, control 1)
/// off-diagonal block of its Choi matrix, the only part that depends on the
/// pairing rather than on the two channels alone.
pub fn control_cross_block(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired Kraus lists of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (dim_in, dim_out) = check_kraus_shapes(a)?;
    let (b_in, b_out) = check_kraus_shapes(b)?;
    if (dim_in, dim_out) != (b_in, b_out) {
        return Err(Error::DimensionMismatch(
            "paired Kraus lists must share operator shape".into(),
        ));
    }
    let n = dim_in * dim_out;
    let mut block = ComplexMatrix::zeros(n, n);
    for (ka, kb) in a.iter().zip(b) {
        let va = vec_op(ka);
        let vb = vec_op(kb);
        block = block.add(&va.mul(&vb.adjoint())?);
    }
    Ok(block)
}

/// Choi-norm distance between the two-channel controls built from
/// `(a_min, b1)` and `(a_min, b2)`, assuming both `b` prefixes extend to the
/// same channel ℬ (see [`two_control_equal_iff`]). Under that assumption the
/// diagonal control blocks cancel and the distance reduces to the coherence
/// cross blocks, counted once per off-diagonal block.
pub fn two_control_choi_distance(
    a_min: &KrausChannel,
    b1: &[ComplexMatrix],
    b2: &[ComplexMatrix],
) -> Result<f64> {
    check_common_prefix_preconditions(a_min, b1)?;
    check_common_prefix_preconditions(a_min, b2)?;
    let c1 = control_cross_block(a_min.kraus(), b1)?;
    let c2 = control_cross_block(a_min.kraus(), b2)?;
    // Both off-diagonal blocks differ by the same amount (they are mutual
    // adjoints), hence the √2.
    Ok(c1.distance(&c2) * 2f64.sqrt())
}

/// Decides equality of the controlled channels built from the Kraus pairings
/// `(A_i, B1_i)` and `(A_i, B2_i)`.
///
/// Preconditions: `a_min` is a minimal (linearly independent) representation
/// and `b1`, `b2` are equal-length prefixes of Kraus representations of one
/// common channel ℬ; this function verifies the parts of that contract it
/// can see (shapes, and each prefix being sub-normalized, i.e. completable
/// into *some* channel) and trusts the caller for the common-ℬ part.
///
/// With the preconditions in force, the two controlled channels coincide
/// exactly when the coherence cross blocks agree, and — by minimality of the
/// A-side — exactly when the prefixes agree elementwise.
pub fn two_control_equal_iff(
    a_min: &KrausChannel,
    b1: &[ComplexMatrix],
    b2: &[ComplexMatrix],
) -> Result<bool> {
    Ok(two_control_choi_distance(a_min, b1, b2)? <= EQ_TOL)
}

fn check_common_prefix_preconditions(a_min: &KrausChannel, b: &[ComplexMatrix]) -> Result<()> {
    if b.len() != a_min.kraus().len() {
        return Err(Error::DimensionMismatch(format!(
            "prefix has {} operators but the minimal A-side has {}",
            b.len(),
            a_min.kraus().len()
        )));
    }
    let (dim_in, _) = check_kraus_shapes(b)?;
    // Sub-normalization: I − Σ B†B must be PSD for the prefix to extend to a
    // channel at all.
    let mut acc = ComplexMatrix::identity(dim_in);
    for k in b {
        acc = acc.sub(&k.adjoint().mul(k)?);
    }
    let eig = eig_hermitian(&acc)?;
    if eig.eigenvalues[0] < -PSD_TOL {
        return Err(Error::InvalidPin(eig.eigenvalues[0]));
    }
    Ok(())
}

/// Random channel with the given Kraus rank, drawn from the Haar-Stinespring
/// construction: a Haar isometry H_in → H_env ⊗ H_out (environment leg most
/// significant) sliced along the environment index. Fully determined by
/// `seed`; requires `kraus_rank · dim_out ≥ dim_in` for the isometry to
/// exist.
pub fn random_cptp(
    dim_in: usize,
    dim_out: usize,
    kraus_rank: usize,
    seed: u64,
) -> Result<KrausChannel> {
    let mut rng = Prng::split(seed, 0);
    random_cptp_with(dim_in, dim_out, kraus_rank, &mut rng)
}

/// [`random_cptp`] drawing from a caller-provided generator.
pub fn random_cptp_with(
    dim_in: usize,
    dim_out: usize,
    kraus_rank: usize,
    rng: &mut Prng,
) -> Result<KrausChannel> {
    if kraus_rank == 0 {
        return Err(Error::DimensionMismatch("kraus_rank must be at least 1".into()));
    }
    if kraus_rank * dim_out < dim_in {
        return Err(Error::DimensionMismatch(format!(
            "no isometry: rank {kraus_rank} × dim_out {dim_out} < dim_in {dim_in}"
        )));
    }
    let v = loop {
        if let Ok(q) = qr_isometry(&rng.gaussian_matrix(kraus_rank * dim_out, dim_in)) {
            break q;
        }
    };
    let kraus: Vec<ComplexMatrix> = (0..kraus_rank)
        .map(|e| v.block(e * dim_out, 0, dim_out, dim_in))
        .collect();
    KrausChannel::new(kraus)
}

// --- JSON wire format -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
}

impl Serialize for KrausChannel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelRepr { dim_in: self.dim_in, dim_out: self.dim_out, kraus: self.kraus.clone() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KrausChannel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ChannelRepr::deserialize(deserializer)?;
        let channel = KrausChannel::new(repr.kraus).map_err(D::Error::custom)?;
        if (channel.dim_in, channel.dim_out) != (repr.dim_in, repr.dim_out) {
            return Err(D::Error::custom(format!(
                "declared dimensions {}→{} do not match the operators ({}→{})",
                repr.dim_in, repr.dim_out, channel.dim_in, channel.dim_out
            )));
        }
        Ok(channel)
    }
}
