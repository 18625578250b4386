//! Random draws and log-density evaluation.
//!
//! The random source is part of the library contract, not an implementation
//! detail: [`Prng`] is a ChaCha12 stream cipher generator keyed with
//! `seed_from_u64`. Uniforms take the high 53 bits of each 64-bit output and
//! scale by 2^-53, and standard normals come from the trigonometric
//! Box-Muller transform with the second variate of each pair cached. Every
//! draw therefore consumes a fixed number of generator outputs, with no
//! rejection loops, so a seed pins the entire stream: two `Prng`s built from
//! the same seed, or a `Prng` and its clone, produce bit-identical draws
//! within one build of the library.
//!
//! The density evaluators return logarithms that include all normalizing
//! constants.

use crate::error::{Error, Result};
use crate::{Scalar, LN_2PI};
use nalgebra::{DMatrix, DVector};
use rand_core::{RngCore, SeedableRng};

const TWO_NEG_53: f64 = 1.0 / 9007199254740992.0;
const TAU: f64 = core::f64::consts::TAU;

/// Seedable random source with deterministic draw-count semantics.
#[derive(Debug, Clone)]
pub struct Prng {
    chacha: rand_chacha::ChaCha12Rng,
    spare_normal: Option<Scalar>,
}

impl Prng {
    /// Create a generator from a 64-bit seed.
    pub fn seed_from(seed: u64) -> Self {
        Self {
            chacha: rand_chacha::ChaCha12Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// One generator output mapped to `[0, 1)` at full 53-bit resolution,
    /// before any narrowing to [`Scalar`].
    fn uniform_01_f64(&mut self) -> f64 {
        (self.chacha.next_u64() >> 11) as f64 * TWO_NEG_53
    }

    /// Uniform draw on `[0, 1)` with 53-bit resolution.
    pub fn uniform_01(&mut self) -> Scalar {
        self.uniform_01_f64() as Scalar
    }

    /// Standard normal draw.
    ///
    /// Box-Muller: each pair of uniforms `(u1, u2)` yields
    /// `r cos(2 pi u2)` and `r sin(2 pi u2)` with `r = sqrt(-2 ln(1 - u1))`;
    /// the sine variate is cached and returned by the next call.
    pub fn standard_normal(&mut self) -> Scalar {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform_01_f64(); // in (0, 1], so ln is finite
        let u2 = self.uniform_01_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TAU * u2;
        self.spare_normal = Some((r * theta.sin()) as Scalar);
        (r * theta.cos()) as Scalar
    }

    /// Normal draw with the given mean and standard deviation.
    ///
    /// The caller is responsible for `sd >= 0`; validation belongs to model
    /// construction, not to the per-draw hot path.
    pub fn normal(&mut self, mean: Scalar, sd: Scalar) -> Scalar {
        mean + sd * self.standard_normal()
    }
}

/// Log-density of the scalar normal distribution, normalizing constant
/// included.
pub fn log_norm_pdf(x: Scalar, mean: Scalar, sd: Scalar) -> Result<Scalar> {
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::InvalidScale(sd));
    }
    let z = (x - mean) / sd;
    Ok(-0.5 * LN_2PI - sd.ln() - 0.5 * z * z)
}

/// Log-density of the multivariate normal distribution, normalizing constant
/// included.
///
/// The covariance is factorized once per call with a Cholesky decomposition;
/// a matrix that fails to factorize yields
/// [`Error::NotPositiveDefinite`].
pub fn log_mvn_pdf(
    x: &DVector<Scalar>,
    mean: &DVector<Scalar>,
    cov: &DMatrix<Scalar>,
) -> Result<Scalar> {
    let k = x.len();
    if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "x has {} entries, mean {}, covariance {}x{}",
            k,
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{k}x{k} covariance failed Cholesky")))?;
    let log_det: Scalar = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<Scalar>();
    let diff = x - mean;
    let quad = diff.dot(&chol.solve(&diff));
    Ok(-0.5 * (k as Scalar * LN_2PI + log_det + quad))
}
