//! Weighted particle ensembles and log-domain weight arithmetic.
//!
//! Log-weights are plain `Scalar` slices. They may contain `-inf` (a dead
//! particle) but never NaN, and at least one entry must be finite; the
//! functions here return errors instead of propagating non-finite garbage.

use crate::error::{Error, Result};
use crate::Scalar;

/// State vector with compile-time dimension `DX`.
pub type StateVec<const DX: usize> = nalgebra::SVector<Scalar, DX>;

/// Observation vector with compile-time dimension `DY`.
pub type ObsVec<const DY: usize> = nalgebra::SVector<Scalar, DY>;

fn check_no_nan(log_weights: &[Scalar]) -> Result<()> {
    if log_weights.iter().any(|w| w.is_nan()) {
        return Err(Error::DegenerateWeights(
            "log-weight vector contains NaN".to_string(),
        ));
    }
    Ok(())
}

/// Largest entry, ignoring `-inf`. Errors if the slice is empty or has no
/// finite entry.
fn finite_max(log_weights: &[Scalar]) -> Result<Scalar> {
    check_no_nan(log_weights)?;
    let m = log_weights
        .iter()
        .copied()
        .fold(Scalar::NEG_INFINITY, Scalar::max);
    if m == Scalar::NEG_INFINITY {
        return Err(Error::AllWeightsDegenerate);
    }
    Ok(m)
}

/// log(sum(exp(v))) computed with the usual max shift.
///
/// Exact when only one entry is finite (the shift makes the remaining term
/// `ln(1) == 0`). Adding a finite constant to every entry adds the same
/// constant to the result, up to roundoff.
pub fn log_sum_exp(log_weights: &[Scalar]) -> Result<Scalar> {
    let m = finite_max(log_weights)?;
    let sum: Scalar = log_weights.iter().map(|&w| (w - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Effective sample size `(sum w)^2 / sum w^2` of unnormalized log-weights.
///
/// Computed from max-shifted exponentials, so it is invariant under adding a
/// constant to every log-weight and never overflows. The result is clamped
/// to `[1, n]`, the mathematical range.
pub fn effective_sample_size(log_weights: &[Scalar]) -> Result<Scalar> {
    let m = finite_max(log_weights)?;
    let mut s1: Scalar = 0.0;
    let mut s2: Scalar = 0.0;
    for &w in log_weights {
        let e = (w - m).exp();
        s1 += e;
        s2 += e * e;
    }
    let n = log_weights.len() as Scalar;
    Ok((s1 * s1 / s2).clamp(1.0, n))
}

/// Normalized probabilities `exp(v_i - logSumExp(v))`.
///
/// Dead particles (`-inf`) map to exactly zero. The output sums to one up to
/// roundoff and preserves the location of the maximum.
pub fn normalized_weights(log_weights: &[Scalar]) -> Result<Vec<Scalar>> {
    let m = finite_max(log_weights)?;
    let exps: Vec<Scalar> = log_weights.iter().map(|&w| (w - m).exp()).collect();
    let sum: Scalar = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// A fixed-size collection of weighted samples.
///
/// The particle count is set at construction and never changes; all
/// operations that rewrite the ensemble preserve it.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<const DX: usize> {
    samples: Vec<StateVec<DX>>,
    log_weights: Vec<Scalar>,
}

impl<const DX: usize> ParticleEnsemble<DX> {
    /// Build an ensemble from samples and unnormalized log-weights.
    pub fn new(samples: Vec<StateVec<DX>>, log_weights: Vec<Scalar>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParams(
                "ensemble must contain at least one particle".to_string(),
            ));
        }
        if samples.len() != log_weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} log-weights",
                samples.len(),
                log_weights.len()
            )));
        }
        finite_max(&log_weights)?;
        Ok(Self {
            samples,
            log_weights,
        })
    }

    /// Number of particles.
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[StateVec<DX>] {
        &self.samples
    }

    pub fn log_weights(&self) -> &[Scalar] {
        &self.log_weights
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [StateVec<DX>] {
        &mut self.samples
    }

    pub(crate) fn log_weights_mut(&mut self) -> &mut [Scalar] {
        &mut self.log_weights
    }

    /// Replace sample `i` of the ensemble by `samples[ancestors[i]]` and set
    /// every log-weight to zero (equal weights; zero keeps later increments
    /// free of an arbitrary offset).
    pub(crate) fn apply_ancestors(&mut self, ancestors: &[usize]) {
        debug_assert_eq!(ancestors.len(), self.n());
        let new_samples: Vec<StateVec<DX>> = ancestors.iter().map(|&a| self.samples[a]).collect();
        self.samples = new_samples;
        self.log_weights.fill(0.0);
    }

    /// `log_sum_exp` of the current log-weights.
    pub fn log_weight_sum(&self) -> Result<Scalar> {
        log_sum_exp(&self.log_weights)
    }

    /// Effective sample size of the current log-weights.
    pub fn effective_sample_size(&self) -> Result<Scalar> {
        effective_sample_size(&self.log_weights)
    }

    /// Normalized weights of the current ensemble.
    pub fn normalized_weights(&self) -> Result<Vec<Scalar>> {
        normalized_weights(&self.log_weights)
    }

    /// Self-normalized weighted mean of the samples.
    pub fn weighted_mean(&self) -> Result<StateVec<DX>> {
        let w = self.normalized_weights()?;
        let mut mean = StateVec::<DX>::zeros();
        for (wi, x) in w.iter().zip(&self.samples) {
            mean += *x * *wi;
        }
        Ok(mean)
    }
}
