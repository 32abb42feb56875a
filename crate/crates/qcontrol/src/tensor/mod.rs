//! Dense complex matrices and the tensor-algebra primitives built on them.
//!
//! Everything in the crate manipulates one concrete type, [`ComplexMatrix`]:
//! a row-major dense matrix of `Complex64` entries. Tensor products follow
//! the convention that the *leftmost* factor is the most significant index,
//! so `kron(a, b)` indexes basis states as |a_index, b_index⟩.
//!
//! The module also provides the block and index plumbing the rest of the
//! crate leans on: direct sums, partial traces over chosen legs, basis-leg
//! permutations, a Hermitian eigensolver and a QR orthonormalizer (see
//! [`linalg`]), and a JSON codec (see [`json`]) whose float formatting
//! round-trips bit-exactly.

pub mod json;
pub mod linalg;
pub mod tol;

pub use linalg::{eig_hermitian, operator_rank, qr_isometry, singular_values, HermitianEigen};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Scalar type used everywhere in the crate.
pub type C64 = Complex64;

/// Shorthand for a real scalar promoted to [`C64`].
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense row-major complex matrix.
///
/// Invariants: `data.len() == rows * cols` and every entry is finite. All
/// constructors enforce both; arithmetic cannot produce non-finite entries
/// from finite operands at the scales this crate works at, and the JSON
/// decoder re-checks on input.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| {
                    let z = self.get(r, c);
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::default(); rows * cols] }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, c64(1.0, 0.0));
        }
        m
    }

    /// 1×1 matrix holding a single scalar; handy as a direct-sum block.
    pub fn scalar(z: C64) -> Self {
        Self { rows: 1, cols: 1, data: vec![z] }
    }

    /// Column vector e_k of the standard basis, as a `dim`×1 matrix.
    pub fn basis_column(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut m = Self::zeros(dim, 1);
        m.set(k, 0, c64(1.0, 0.0));
        m
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a row-major slice; panics on length mismatch.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data: entries.to_vec() }
    }

    /// Builds a matrix from row-major real entries (imaginary parts zero).
    pub fn from_real_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
        let data = entries.iter().map(|&x| c64(x, 0.0)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: C64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] += v;
    }

    /// Row-major view of the underlying storage.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Sum of diagonal entries; panics on non-square input.
    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm √Σ|m_ij|².
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise scaling by a complex factor.
    pub fn scale(&self, z: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&w| w * z).collect() }
    }

    /// Matrix sum; panics on shape mismatch (use in contexts where shapes are
    /// already validated).
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix difference; panics on shape mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == C64::default() {
                    continue;
                }
                for c in 0..other.cols {
                    out.add_at(r, c, a * other.get(k, c));
                }
            }
        }
        Ok(out)
    }

    /// Frobenius distance to another matrix of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "distance shape mismatch");
        self.sub(other).frobenius_norm()
    }

    /// True when the Frobenius distance to `other` is within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.distance(other) <= tol
    }

    /// Copy of the rectangular block starting at (r0, c0).
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols, "block out of range");
        Self::from_fn(nrows, ncols, |r, c| self.get(r0 + r, c0 + c))
    }

    /// Writes `m` into the block starting at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, m: &Self) {
        assert!(r0 + m.rows <= self.rows && c0 + m.cols <= self.cols, "block out of range");
        for r in 0..m.rows {
            for c in 0..m.cols {
                self.set(r0 + r, c0 + c, m.get(r, c));
            }
        }
    }

    /// Kronecker product with the leftmost factor most significant:
    /// `(a ⊗ b)[(i·p + k)(j·q + l)] = a[i,j] · b[k,l]` for `b` of shape p×q.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        let mut out = Self::zeros(self.rows * p, self.cols * q);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == C64::default() {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out.set(i * p + k, j * q + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// True when every entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == C64::default())
    }
}

/// Kronecker product of a list of factors, leftmost most significant.
/// Panics on an empty list.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let (first, rest) = factors.split_first().expect("kron_all of empty list");
    let mut acc = (*first).clone();
    for f in rest {
        acc = acc.kron(f);
    }
    acc
}

/// Direct sum of blocks along the diagonal. Blocks may be rectangular; the
/// result has shape (Σ rows) × (Σ cols) with each block at its own offset.
pub fn direct_sum(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
    let rows = blocks.iter().map(|b| b.rows()).sum();
    let cols = blocks.iter().map(|b| b.cols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.set_block(r0, c0, b);
        r0 += b.rows();
        c0 += b.cols();
    }
    out
}

/// Partial trace of a square matrix over the legs *not* listed in `keep`.
///
/// `dims` are the leg dimensions with the leftmost leg most significant, and
/// must multiply to the matrix dimension. `keep` lists kept legs, strictly
/// ascending; the result orders them as in the original tensor factorization.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(Error::DimensionMismatch(format!(
            "partial trace: matrix is {}x{} but legs multiply to {}",
            m.rows(),
            m.cols(),
            total
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(
            "partial trace: kept legs must be strictly ascending and in range".into(),
        ));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
    let trace_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // Strides of each leg in the flat index, leftmost most significant.
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let flatten = |legs: &[usize], multi: usize| -> usize {
        // Decomposes `multi` over the listed legs (first listed most
        // significant) and re-flattens into the full index space.
        let mut rem = multi;
        let mut flat = 0;
        for (pos, &leg) in legs.iter().enumerate() {
            let radix: usize = legs[pos + 1..].iter().map(|&l| dims[l]).product();
            let digit = rem / radix;
            rem %= radix;
            flat += digit * strides[leg];
        }
        flat
    };

    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for a in 0..keep_dim {
        let base_r = flatten(keep, a);
        for b in 0..keep_dim {
            let base_c = flatten(keep, b);
            let mut acc = C64::default();
            for t in 0..trace_dim {
                let off = flatten(&traced, t);
                acc += m.get(base_r + off, base_c + off);
            }
            out.set(a, b, acc);
        }
    }
    Ok(out)
}

/// Basis relabeling induced by reordering tensor legs.
///
/// `dims` are the current leg dimensions (leftmost most significant) and
/// `source_of[j]` names the current leg that position `j` of the new order
/// draws from. Returns `p` with `p[i]` the new flat index of old basis state
/// `i`, i.e. the permutation operator is Σ_i |p[i]⟩⟨i|.
pub fn leg_permutation(dims: &[usize], source_of: &[usize]) -> Vec<usize> {
    assert_eq!(dims.len(), source_of.len(), "leg count mismatch");
    let mut seen = vec![false; dims.len()];
    for &s in source_of {
        assert!(s < dims.len() && !seen[s], "source_of must be a permutation");
        seen[s] = true;
    }
    let total: usize = dims.iter().product();
    let new_dims: Vec<usize> = source_of.iter().map(|&s| dims[s]).collect();
    let mut p = vec![0usize; total];
    for i in 0..total {
        // Decompose i over the old legs.
        let mut digits = vec![0usize; dims.len()];
        let mut rem = i;
        for leg in (0..dims.len()).rev() {
            digits[leg] = rem % dims[leg];
            rem /= dims[leg];
        }
        // Re-flatten in the new order.
        let mut flat = 0usize;
        for j in 0..new_dims.len() {
            flat = flat * new_dims[j] + digits[source_of[j]];
        }
        p[i] = flat;
    }
    p
}

/// Dense unitary realizing a basis permutation `p` (maps e_i to e_{p[i]}).
pub fn permutation_matrix(p: &[usize]) -> ComplexMatrix {
    let n = p.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, &pi) in p.iter().enumerate() {
        m.set(pi, i, c64(1.0, 0.0));
    }
    m
}
