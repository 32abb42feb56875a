//! Deterministic, splittable random number generation.
//!
//! All randomized suites and generators in this crate draw from [`Prng`],
//! which wraps the ChaCha8 counter-based stream cipher: the same (seed,
//! stream) pair produces the same byte stream on every platform, and the
//! 2⁶⁴ independent streams give cheap splitting for parallel or per-case
//! generation. Gaussian variates are produced by the Box-Muller transform
//! written out explicitly below, so golden values recorded from this
//! generator can be reproduced from the documented algorithm alone:
//!
//! * `u1 = 1 − uniform()` (uniform over (0, 1], keeping the log finite),
//! * `u2 = uniform()`,
//! * `z0 = √(−2 ln u1) · cos(2π u2)`, `z1 = √(−2 ln u1) · sin(2π u2)`.
//!
//! The generator is always passed explicitly; nothing in the crate reads
//! global randomness.

use crate::tensor::{qr_isometry, ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded, splittable deterministic generator.
pub struct Prng {
    rng: ChaCha8Rng,
}

impl Prng {
    /// Generator for `seed` on stream 0.
    pub fn new(seed: u64) -> Self {
        Self::split(seed, 0)
    }

    /// Independent generator for the given (seed, stream) pair. Streams with
    /// the same seed never overlap; use one stream per logical case.
    pub fn split(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Uniform draw from [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in 0..n (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        self.rng.gen_range(0..n)
    }

    /// One Box-Muller pair of independent standard normal variates.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Complex variate with independent standard normal real and imaginary
    /// parts (one Box-Muller pair).
    pub fn complex_gaussian(&mut self) -> C64 {
        let (re, im) = self.gaussian_pair();
        C64::new(re, im)
    }

    /// Matrix with i.i.d. complex-Gaussian entries, drawn row-major.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            entries.push(self.complex_gaussian());
        }
        ComplexMatrix::from_row_slice(rows, cols, &entries)
    }

    /// Uniform complex phase e^{iθ}.
    pub fn phase(&mut self) -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform())
    }

    /// Random unit vector of the given dimension (Gaussian, normalized).
    pub fn unit_vector(&mut self, dim: usize) -> Vec<C64> {
        loop {
            let v: Vec<C64> = (0..dim).map(|_| self.complex_gaussian()).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.iter().map(|&z| z / norm).collect();
            }
        }
    }
}

/// Haar-distributed isometry of shape rows × cols (rows ≥ cols): QR of a
/// complex-Gaussian matrix with the phase fix applied by `qr_isometry`.
pub fn haar_isometry(rows: usize, cols: usize, rng: &mut Prng) -> ComplexMatrix {
    loop {
        // Rank deficiency has probability zero; retry on the measure-zero hit.
        if let Ok(q) = qr_isometry(&rng.gaussian_matrix(rows, cols)) {
            return q;
        }
    }
}

/// Haar-distributed unitary of dimension `dim`.
pub fn haar_unitary(dim: usize, rng: &mut Prng) -> ComplexMatrix {
    haar_isometry(dim, dim, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ComplexMatrix;

    #[test]
    fn same_seed_same_stream_reproduces() {
        let mut a = Prng::split(42, 7);
        let mut b = Prng::split(42, 7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn different_streams_diverge() {
        let mut a = Prng::split(42, 0);
        let mut b = Prng::split(42, 1);
        let va: Vec<u64> = (0..8).map(|_| a.uniform().to_bits()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.uniform().to_bits()).collect();
        assert_ne!(va, vb);
        let mut c = Prng::split(43, 0);
        let vc: Vec<u64> = (0..8).map(|_| c.uniform().to_bits()).collect();
        assert_ne!(va, vc);
    }

    /// First Box-Muller pair for (seed 0, stream 0), frozen after the first
    /// run of this generator. Guards against silent changes to the draw
    /// order, the uniform mapping, or the transform itself.
    #[test]
    fn golden_first_gaussian_pair() {
        let (z0, z1) = Prng::split(0, 0).gaussian_pair();
        assert_eq!(z0.to_bits(), 0xbff89193cdcc1332, "z0 = {z0:?} drifted");
        assert_eq!(z1.to_bits(), 0x3fd55ec39a6a7e3b, "z1 = {z1:?} drifted");
    }

    #[test]
    fn haar_unitary_is_unitary_and_deterministic() {
        let mut rng = Prng::split(5, 0);
        let u = haar_unitary(4, &mut rng);
        let err = u.adjoint().mul(&u).unwrap().distance(&ComplexMatrix::identity(4));
        assert!(err < 1e-12, "unitarity defect {err:.3e}");
        let mut rng2 = Prng::split(5, 0);
        let u2 = haar_unitary(4, &mut rng2);
        assert_eq!(u.as_slice(), u2.as_slice());
    }

    #[test]
    fn haar_isometry_shape_and_isometry() {
        let mut rng = Prng::split(9, 3);
        let v = haar_isometry(6, 2, &mut rng);
        assert_eq!((v.rows(), v.cols()), (6, 2));
        let err = v.adjoint().mul(&v).unwrap().distance(&ComplexMatrix::identity(2));
        assert!(err < 1e-12);
    }

    #[test]
    fn gaussian_moments_are_plausible() {
        let mut rng = Prng::split(1, 0);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let (a, b) = rng.gaussian_pair();
            sum += a + b;
            sum_sq += a * a + b * b;
        }
        let mean = sum / (2 * n) as f64;
        let var = sum_sq / (2 * n) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "variance {var}");
    }
}
