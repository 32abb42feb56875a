//! Partitioned Hilbert spaces, routes, and sector-preserving channels.
//!
//! A [`PartitionedSpace`] is a Hilbert space with a preferred direct-sum
//! decomposition into sectors. A [`Route`] is a Boolean relation between the
//! input and output sectors of a channel, constraining where each sector may
//! be sent; [`follows_route`] decides whether a channel obeys a route, and a
//! [`RoutedKrausChannel`] pairs a channel with a route it provably follows.
//!
//! Two concrete shapes get dedicated constructors:
//!
//! * type (1, d): a 1-dimensional sector followed by a d-dimensional one,
//!   with the identity route. Such a channel is exactly a channel on the
//!   d-dimensional sector together with a distinguished pin operator, and
//!   [`build_sector_preserving_1d`] / [`extract_pin`] realize the
//!   correspondence in both directions.
//! * type (d, 1, 1): the d-dimensional sector comes *first* here, followed
//!   by two 1-dimensional ones. This shape encodes a channel, two pins, and
//!   one residual-coherence amplitude γ₁₂ (see
//!   [`build_sector_preserving_d11`]).
//!
//! Sector ordering differs between the two shapes on purpose: each matches
//! the layout its consumers (the control constructions) index into.

use crate::channel::{
    kraus_from_remainder, vec_op, KrausChannel, PinnedChannel,
};
use crate::error::{Error, Result};
use crate::prng::{haar_unitary, Prng};
use crate::tensor::tol::{EQ_TOL, PSD_TOL};
use crate::tensor::{c64, direct_sum, eig_hermitian, qr_isometry, ComplexMatrix, C64};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Hilbert space with an ordered direct-sum partition into sectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PartitionedSpace {
    sector_dims: Vec<usize>,
}

impl PartitionedSpace {
    pub fn new(sector_dims: Vec<usize>) -> Result<Self> {
        if sector_dims.is_empty() {
            return Err(Error::DimensionMismatch("a space needs at least one sector".into()));
        }
        if sector_dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch("zero-dimensional sector".into()));
        }
        Ok(Self { sector_dims })
    }

    pub fn dim(&self) -> usize {
        self.sector_dims.iter().sum()
    }

    pub fn sector_count(&self) -> usize {
        self.sector_dims.len()
    }

    pub fn sector_dim(&self, s: usize) -> usize {
        self.sector_dims[s]
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    /// First flat index of sector `s`.
    pub fn sector_offset(&self, s: usize) -> usize {
        self.sector_dims[..s].iter().sum()
    }

    pub fn indexing(&self) -> SectorIndexing {
        let mut sectors = Vec::with_capacity(self.sector_count());
        let mut offset = 0;
        for &d in &self.sector_dims {
            sectors.push((offset..offset + d).collect());
            offset += d;
        }
        SectorIndexing { sectors, dim: offset }
    }
}

impl<'de> Deserialize<'de> for PartitionedSpace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dims = Vec::<usize>::deserialize(deserializer)?;
        PartitionedSpace::new(dims).map_err(D::Error::custom)
    }
}

/// Flat-index sets of each sector of a space.
///
/// For a plain [`PartitionedSpace`] the sets are contiguous ranges, but the
/// sectors of a tensor product of partitioned spaces are not contiguous in
/// the product's flat index, so route checking works with explicit index
/// sets throughout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorIndexing {
    sectors: Vec<Vec<usize>>,
    dim: usize,
}

impl SectorIndexing {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    /// Flat indices belonging to sector `s`, ascending.
    pub fn indices(&self, s: usize) -> &[usize] {
        &self.sectors[s]
    }

    /// Sector dimensions in sector order.
    pub fn sector_dims(&self) -> Vec<usize> {
        self.sectors.iter().map(|s| s.len()).collect()
    }

    /// Indexing of the tensor product (self ⊗ other, left factor most
    /// significant). Product sectors are ordered lexicographically, sector
    /// (a, b) at position a · other.sector_count() + b.
    pub fn product(&self, other: &SectorIndexing) -> SectorIndexing {
        let mut sectors = Vec::with_capacity(self.sector_count() * other.sector_count());
        for sa in &self.sectors {
            for sb in &other.sectors {
                let mut set = Vec::with_capacity(sa.len() * sb.len());
                for &ia in sa {
                    for &ib in sb {
                        set.push(ia * other.dim + ib);
                    }
                }
                set.sort_unstable();
                sectors.push(set);
            }
        }
        SectorIndexing { sectors, dim: self.dim * other.dim }
    }
}

/// Boolean relation between input sectors (columns) and output sectors
/// (rows): `allowed[l][k]` says a channel may send sector k into sector l.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Route {
    allowed: Vec<Vec<bool>>,
}

impl Route {
    /// Route a trace-preserving channel can follow: rectangular, nonempty,
    /// and every input sector has at least one allowed output sector (a
    /// channel must send each sector's probability mass *somewhere*).
    pub fn new(allowed: Vec<Vec<bool>>) -> Result<Self> {
        let r = Self::relation(allowed)?;
        for k in 0..r.in_count() {
            if !(0..r.out_count()).any(|l| r.allowed[l][k]) {
                return Err(Error::InvalidRoute(format!(
                    "input sector {k} has no allowed output sector"
                )));
            }
        }
        Ok(r)
    }

    /// Bare Boolean relation, without the followability requirement of
    /// [`Route::new`]. Useful for relation algebra (composing and comparing
    /// routes); a relation with an all-false column is still a valid operand
    /// of [`route_compose`] even though no channel can follow it.
    pub fn relation(allowed: Vec<Vec<bool>>) -> Result<Self> {
        let rows = allowed.len();
        if rows == 0 {
            return Err(Error::InvalidRoute("route needs at least one output sector".into()));
        }
        let cols = allowed[0].len();
        if cols == 0 {
            return Err(Error::InvalidRoute("route needs at least one input sector".into()));
        }
        if allowed.iter().any(|row| row.len() != cols) {
            return Err(Error::InvalidRoute("route rows have unequal lengths".into()));
        }
        Ok(Self { allowed })
    }

    /// Identity route δ on `n` sectors: each sector may only stay put.
    pub fn identity(n: usize) -> Self {
        let allowed = (0..n).map(|l| (0..n).map(|k| l == k).collect()).collect();
        Self { allowed }
    }

    pub fn out_count(&self) -> usize {
        self.allowed.len()
    }

    pub fn in_count(&self) -> usize {
        self.allowed[0].len()
    }

    pub fn allows(&self, out_sector: usize, in_sector: usize) -> bool {
        self.allowed[out_sector][in_sector]
    }

    pub fn is_identity(&self) -> bool {
        self.out_count() == self.in_count()
            && (0..self.out_count())
                .all(|l| (0..self.in_count()).all(|k| self.allowed[l][k] == (l == k)))
    }

    pub fn matrix(&self) -> &[Vec<bool>] {
        &self.allowed
    }
}

impl<'de> Deserialize<'de> for Route {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Route::relation(Vec::<Vec<bool>>::deserialize(deserializer)?).map_err(D::Error::custom)
    }
}

/// Relation composition `second ∘ first` (follow `first`, then `second`):
/// the result allows k → n exactly when some middle sector l has
/// first: k → l and second: l → n.
pub fn route_compose(second: &Route, first: &Route) -> Result<Route> {
    if second.in_count() != first.out_count() {
        return Err(Error::InvalidRoute(format!(
            "route composition mismatch: {} middle sectors vs {}",
            second.in_count(),
            first.out_count()
        )));
    }
    let allowed = (0..second.out_count())
        .map(|n| {
            (0..first.in_count())
                .map(|k| {
                    (0..first.out_count()).any(|l| first.allowed[l][k] && second.allowed[n][l])
                })
                .collect()
        })
        .collect();
    Route::relation(allowed)
}

/// Kronecker product of routes: on the product sector partition (left
/// factor most significant, matching [`SectorIndexing::product`]),
/// `a ⊗ b` allows (k_a, k_b) → (l_a, l_b) exactly when `a` allows
/// k_a → l_a and `b` allows k_b → l_b.
pub fn route_tensor(a: &Route, b: &Route) -> Route {
    let allowed = (0..a.out_count() * b.out_count())
        .map(|l| {
            let (la, lb) = (l / b.out_count(), l % b.out_count());
            (0..a.in_count() * b.in_count())
                .map(|k| {
                    let (ka, kb) = (k / b.in_count(), k % b.in_count());
                    a.allows(la, ka) && b.allows(lb, kb)
                })
                .collect()
        })
        .collect();
    Route { allowed }
}

/// Total squared magnitude a Kraus operator places in the blocks a route
/// forbids, reported per (output sector, input sector) pair.
///
/// Returns the list of forbidden pairs whose leakage (Frobenius norm of the
/// corresponding block, maximized over the Kraus family) exceeds `tol`.
pub fn route_violations(
    kraus: &[ComplexMatrix],
    in_idx: &SectorIndexing,
    out_idx: &SectorIndexing,
    route: &Route,
    tol: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    if route.out_count() != out_idx.sector_count() || route.in_count() != in_idx.sector_count() {
        return Err(Error::DimensionMismatch(format!(
            "route is {}x{} sectors but the spaces have {} and {}",
            route.out_count(),
            route.in_count(),
            out_idx.sector_count(),
            in_idx.sector_count()
        )));
    }
    for k in kraus {
        if (k.rows(), k.cols()) != (out_idx.dim(), in_idx.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{} but the spaces have dims {} and {}",
                k.rows(),
                k.cols(),
                out_idx.dim(),
                in_idx.dim()
            )));
        }
    }
    let mut violations = Vec::new();
    for l in 0..route.out_count() {
        for k in 0..route.in_count() {
            if route.allows(l, k) {
                continue;
            }
            let mut worst: f64 = 0.0;
            for op in kraus {
                let mut sq = 0.0;
                for &r in out_idx.indices(l) {
                    for &c in in_idx.indices(k) {
                        sq += op.get(r, c).norm_sqr();
                    }
                }
                worst = worst.max(sq.sqrt());
            }
            if worst > tol {
                violations.push((l, k, worst));
            }
        }
    }
    Ok(violations)
}

/// Kraus-level route test with explicit sector index sets: true when no
/// Kraus operator places more than [`EQ_TOL`] of Frobenius mass in any
/// forbidden block.
pub fn follows_route_indexed(
    kraus: &[ComplexMatrix],
    in_idx: &SectorIndexing,
    out_idx: &SectorIndexing,
    route: &Route,
) -> Result<bool> {
    Ok(route_violations(kraus, in_idx, out_idx, route, EQ_TOL)?.is_empty())
}

/// Whether the channel follows the route: every Kraus operator annihilates
/// the forbidden blocks, i.e. for every input sector k the component it
/// sends into a forbidden output sector vanishes within [`EQ_TOL`]. The
/// test is representation-independent because Kraus families of the same
/// channel span the same operator space.
pub fn follows_route(
    c: &KrausChannel,
    space_in: &PartitionedSpace,
    space_out: &PartitionedSpace,
    route: &Route,
) -> Result<bool> {
    if c.dim_in() != space_in.dim() || c.dim_out() != space_out.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}→{} but the spaces have dims {}→{}",
            c.dim_in(),
            c.dim_out(),
            space_in.dim(),
            space_out.dim()
        )));
    }
    follows_route_indexed(c.kraus(), &space_in.indexing(), &space_out.indexing(), route)
}

/// Channel bundled with partitioned input/output spaces and a route it has
/// been verified to follow.
#[derive(Clone, Debug)]
pub struct RoutedKrausChannel {
    space_in: PartitionedSpace,
    space_out: PartitionedSpace,
    route: Route,
    channel: KrausChannel,
}

impl RoutedKrausChannel {
    pub fn new(
        channel: KrausChannel,
        space_in: PartitionedSpace,
        space_out: PartitionedSpace,
        route: Route,
    ) -> Result<Self> {
        let violations = route_violations(
            channel.kraus(),
            &space_in.indexing(),
            &space_out.indexing(),
            &route,
            EQ_TOL,
        )?;
        if let Some((l, k, norm)) = violations.first() {
            return Err(Error::RouteViolation(format!(
                "channel leaks {norm:.3e} from input sector {k} into forbidden output sector {l}"
            )));
        }
        Ok(Self { space_in, space_out, route, channel })
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn space_in(&self) -> &PartitionedSpace {
        &self.space_in
    }

    pub fn space_out(&self) -> &PartitionedSpace {
        &self.space_out
    }

    pub fn route(&self) -> &Route {
        &self.route
    }
}

impl Serialize for RoutedKrausChannel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RoutedRepr {
            channel: self.channel.clone(),
            sectors_in: self.space_in.sector_dims.clone(),
            sectors_out: self.space_out.sector_dims.clone(),
            route: self.route.allowed.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RoutedKrausChannel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RoutedRepr::deserialize(deserializer)?;
        let space_in = PartitionedSpace::new(repr.sectors_in).map_err(D::Error::custom)?;
        let space_out = PartitionedSpace::new(repr.sectors_out).map_err(D::Error::custom)?;
        let route = Route::relation(repr.route).map_err(D::Error::custom)?;
        RoutedKrausChannel::new(repr.channel, space_in, space_out, route)
            .map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct RoutedRepr {
    #[serde(flatten)]
    channel: KrausChannel,
    sectors_in: Vec<usize>,
    sectors_out: Vec<usize>,
    route: Vec<Vec<bool>>,
}

/// Sector-preserving channel of type (1, d): partition (1, d) on both sides,
/// identity route. The 1-dimensional sector is index 0.
///
/// Trace preservation forces such a channel to act as the identity on the
/// 1-dimensional sector, so it carries exactly the data of a channel on the
/// d-dimensional sector plus one distinguished Kraus operator (the pin);
/// [`extract_pin`] recovers that data.
#[derive(Clone, Debug)]
pub struct SectorPreserving1d {
    routed: RoutedKrausChannel,
}

impl SectorPreserving1d {
    /// Validates that `channel` is block-diagonal for the (1, d) partition.
    pub fn new(channel: KrausChannel) -> Result<Self> {
        if channel.dim_in() != channel.dim_out() || channel.dim_in() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "type (1, d) needs a square channel of dimension ≥ 2, got {}→{}",
                channel.dim_in(),
                channel.dim_out()
            )));
        }
        let space = PartitionedSpace::new(vec![1, channel.dim_in() - 1])?;
        let routed =
            RoutedKrausChannel::new(channel, space.clone(), space, Route::identity(2))?;
        Ok(Self { routed })
    }

    #[cfg(test)]
    pub(crate) fn from_routed_unchecked(routed: RoutedKrausChannel) -> Self {
        Self { routed }
    }

    /// Dimension d of the non-trivial sector.
    pub fn sector_dim(&self) -> usize {
        self.routed.space_in.sector_dim(1)
    }

    pub fn routed(&self) -> &RoutedKrausChannel {
        &self.routed
    }

    pub fn channel(&self) -> &KrausChannel {
        self.routed.channel()
    }

    /// Scalar sector-0 blocks α_i of the Kraus operators. TP makes this a
    /// unit vector.
    pub fn amplitudes(&self) -> Vec<C64> {
        self.channel().kraus().iter().map(|k| k.get(0, 0)).collect()
    }

    /// d×d sector-1 blocks C_i of the Kraus operators (a Kraus family of the
    /// restriction to the big sector).
    pub fn sector_ops(&self) -> Vec<ComplexMatrix> {
        let d = self.sector_dim();
        self.channel().kraus().iter().map(|k| k.block(1, 1, d, d)).collect()
    }
}

/// Builds the type-(1, d) channel from a pinned channel: Kraus operators
/// 1 ⊕ C₁ (the pin) and 0 ⊕ C_i (the rest).
pub fn build_sector_preserving_1d(p: &PinnedChannel) -> Result<SectorPreserving1d> {
    if p.dim_in() != p.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "type (1, d) needs a square channel, got {}→{}",
            p.dim_in(),
            p.dim_out()
        )));
    }
    let one = ComplexMatrix::scalar(c64(1.0, 0.0));
    let zero = ComplexMatrix::zeros(1, 1);
    let kraus: Vec<ComplexMatrix> = p
        .channel()
        .kraus()
        .iter()
        .enumerate()
        .map(|(i, op)| direct_sum(&[if i == 0 { &one } else { &zero }, op]))
        .collect();
    SectorPreserving1d::new(KrausChannel::new(kraus)?)
}

/// Inverse of [`build_sector_preserving_1d`]: recovers the channel on the
/// d-dimensional sector and the pin.
///
/// The pin is read off the channel's action on the cross operators
/// |s⁰⟩⟨v_j|: sector-preservation makes the image |s⁰⟩ (C₁ |v_j⟩)†, so the
/// (0, 1+a) entry of the image is the conjugate of pin entry (a, j). This
/// reading is representation-independent.
pub fn extract_pin(s: &SectorPreserving1d) -> Result<PinnedChannel> {
    let d = s.sector_dim();
    let full = s.channel();
    // Defensive invariant check: the 1-dim sector must be fixed. For any
    // trace-preserving channel that passed construction this holds
    // automatically.
    let mut s0 = ComplexMatrix::zeros(d + 1, d + 1);
    s0.set(0, 0, c64(1.0, 0.0));
    let fixed_defect = full.apply(&s0)?.distance(&s0);
    if fixed_defect > 1e-10 {
        return Err(Error::RouteViolation(format!(
            "sector 0 is not fixed pointwise (defect {fixed_defect:.3e})"
        )));
    }
    let mut pin = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        let mut cross = ComplexMatrix::zeros(d + 1, d + 1);
        cross.set(0, 1 + j, c64(1.0, 0.0));
        let image = full.apply(&cross)?;
        for a in 0..d {
            pin.set(a, j, image.get(0, 1 + a).conj());
        }
    }
    let restriction = KrausChannel::new(s.sector_ops())?;
    PinnedChannel::from_pin(&restriction, &pin)
}

/// Sector-preserving channel 1 ⊕ v built from a single isometry
/// v: d_in → d_out, on spaces (1, d_in) → (1, d_out) with the identity
/// route.
pub fn build_isometric_sp(v: &ComplexMatrix) -> Result<RoutedKrausChannel> {
    let defect = v
        .adjoint()
        .mul(v)?
        .distance(&ComplexMatrix::identity(v.cols()));
    if defect > EQ_TOL {
        return Err(Error::NotIsometry(defect));
    }
    let one = ComplexMatrix::scalar(c64(1.0, 0.0));
    let kraus = vec![direct_sum(&[&one, v])];
    RoutedKrausChannel::new(
        KrausChannel::new(kraus)?,
        PartitionedSpace::new(vec![1, v.cols()])?,
        PartitionedSpace::new(vec![1, v.rows()])?,
        Route::identity(2),
    )
}

/// Builds the type-(d, 1, 1) sector-preserving channel encoding the data
/// (𝒞, C₁, C₂, γ₁₂): Kraus operators
///
/// > C̃₁ = C₁ ⊕ 1 ⊕ γ₁₂,
/// > C̃₂ = C₂ ⊕ 0 ⊕ √(1 − |γ₁₂|²),
/// > C̃_i = C_i ⊕ 0 ⊕ 0 for i ≥ 3,
///
/// where C₁ = `pin1` and C₂ = `pin2` must be jointly extendable Kraus
/// operators of `c` (the remainder map 𝒞 − C₁·C₁† − C₂·C₂† is completely
/// positive) and (C_i)_{i≥3} is a completion of the pair recovered from
/// that remainder. The d-dimensional sector is index 0.
///
/// At the boundary |γ₁₂| = 1 the C̃₂ coefficient √(1 − |γ₁₂|²) vanishes,
/// so `pin2` degenerates into an ordinary completion operator: any jointly
/// extendable choice of `pin2` yields the same channel there, and callers
/// should not expect round trips to return the one they passed.
pub fn build_sector_preserving_d11(
    c: &KrausChannel,
    pin1: &ComplexMatrix,
    pin2: &ComplexMatrix,
    gamma12: C64,
) -> Result<RoutedKrausChannel> {
    let d = c.dim_in();
    if c.dim_out() != d {
        return Err(Error::DimensionMismatch(format!(
            "type (d, 1, 1) needs a square channel, got {}→{}",
            c.dim_in(),
            c.dim_out()
        )));
    }
    for (name, p) in [("pin1", pin1), ("pin2", pin2)] {
        if (p.rows(), p.cols()) != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {d}x{d}",
                p.rows(),
                p.cols()
            )));
        }
    }
    let residual_sq = 1.0 - gamma12.norm_sqr();
    if residual_sq < -EQ_TOL {
        return Err(Error::InfeasibleAmplitudes(format!(
            "|γ₁₂| = {} exceeds 1",
            gamma12.norm()
        )));
    }
    let coef2 = residual_sq.max(0.0).sqrt();

    let v1 = vec_op(pin1);
    let v2 = vec_op(pin2);
    let remainder = c
        .choi()
        .sub(&v1.mul(&v1.adjoint())?)
        .sub(&v2.mul(&v2.adjoint())?);
    let min_eig = eig_hermitian(&remainder)?.eigenvalues[0];
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidPin(min_eig));
    }
    let completion = kraus_from_remainder(&remainder, d, d)?;

    let zero = ComplexMatrix::zeros(1, 1);
    let head = [
        (pin1, c64(1.0, 0.0), gamma12),
        (pin2, C64::default(), c64(coef2, 0.0)),
    ];
    let mut kraus = Vec::with_capacity(2 + completion.len());
    for (op, a1, a2) in head {
        kraus.push(direct_sum(&[op, &ComplexMatrix::scalar(a1), &ComplexMatrix::scalar(a2)]));
    }
    for op in &completion {
        kraus.push(direct_sum(&[op, &zero, &zero]));
    }
    // An all-zero operator (possible when a pin is 0 and its amplitudes
    // vanish) contributes nothing; drop it.
    kraus.retain(|k| k.frobenius_norm() > 1e-15);
    let space = PartitionedSpace::new(vec![d, 1, 1])?;
    RoutedKrausChannel::new(KrausChannel::new(kraus)?, space.clone(), space, Route::identity(3))
}

/// Random channel following `route`, fully determined by `rng`.
///
/// Construction: for each input sector k, a Haar isometry from the sector
/// into (private environment) ⊗ (direct sum of the allowed output sectors)
/// is sliced along its environment index into Kraus operators supported on
/// sector k alone; the union over k is trace preserving because the
/// environments are disjoint. A final Haar mixing of the family produces
/// operators with support across input sectors without moving the channel
/// or breaking the route.
pub fn random_routed_channel(
    space_in: &PartitionedSpace,
    space_out: &PartitionedSpace,
    route: &Route,
    rank: usize,
    rng: &mut Prng,
) -> Result<RoutedKrausChannel> {
    if route.in_count() != space_in.sector_count() || route.out_count() != space_out.sector_count()
    {
        return Err(Error::DimensionMismatch(format!(
            "route is {}x{} sectors but the spaces have {} and {}",
            route.out_count(),
            route.in_count(),
            space_out.sector_count(),
            space_in.sector_count()
        )));
    }
    if rank == 0 {
        return Err(Error::DimensionMismatch("rank must be at least 1".into()));
    }
    let out_idx = space_out.indexing();
    let mut ops: Vec<ComplexMatrix> = Vec::new();
    for k in 0..space_in.sector_count() {
        let allowed: Vec<usize> =
            (0..space_out.sector_count()).filter(|&l| route.allows(l, k)).collect();
        let allowed_dim: usize = allowed.iter().map(|&l| space_out.sector_dim(l)).sum();
        if allowed_dim == 0 {
            return Err(Error::InvalidRoute(format!(
                "input sector {k} has no allowed output sector"
            )));
        }
        let d_k = space_in.sector_dim(k);
        let rank_k = rank.max(d_k.div_ceil(allowed_dim));
        let v = loop {
            if let Ok(q) = qr_isometry(&rng.gaussian_matrix(rank_k * allowed_dim, d_k)) {
                break q;
            }
        };
        // Flat output rows of the direct sum of the allowed sectors.
        let rows: Vec<usize> =
            allowed.iter().flat_map(|&l| out_idx.indices(l).iter().copied()).collect();
        let in_offset = space_in.sector_offset(k);
        for e in 0..rank_k {
            let mut op = ComplexMatrix::zeros(space_out.dim(), space_in.dim());
            for (local, &row) in rows.iter().enumerate() {
                for col in 0..d_k {
                    op.set(row, in_offset + col, v.get(e * allowed_dim + local, col));
                }
            }
            ops.push(op);
        }
    }
    let mix = haar_unitary(ops.len(), rng);
    let mixed: Vec<ComplexMatrix> = (0..ops.len())
        .map(|j| {
            let mut acc = ComplexMatrix::zeros(space_out.dim(), space_in.dim());
            for (i, op) in ops.iter().enumerate() {
                let w = mix.get(j, i);
                if w != C64::default() {
                    acc = acc.add(&op.scale(w));
                }
            }
            acc
        })
        .collect();
    RoutedKrausChannel::new(
        KrausChannel::new(mixed)?,
        space_in.clone(),
        space_out.clone(),
        route.clone(),
    )
}
