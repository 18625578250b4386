//! Ancestor selection: multinomial, residual, stratified, and systematic
//! resampling, plus the policy type that decides when to apply them.
//!
//! All schemes consume a documented number of uniforms from the [`Prng`],
//! with `n` the number of ancestors drawn:
//!
//! * multinomial: `n` uniforms, one per ancestor, in index order;
//! * residual: one uniform per residual draw after the deterministic floor
//!   allocation (none when the floors already account for every slot);
//! * stratified: `n` uniforms, one per stratum, in stratum order;
//! * systematic: a single uniform.
//!
//! Stratified and systematic produce ancestors in nondecreasing order by
//! construction. Boundary ties resolve by strict comparison: point `u`
//! selects the first index whose cumulative weight strictly exceeds `u`.

use crate::ensemble::{effective_sample_size, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::rv::Prng;
use crate::Scalar;

/// How ancestors are drawn when a resample happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleScheme {
    Multinomial,
    Residual,
    Stratified,
    Systematic,
}

/// When a resample happens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResampleTrigger {
    /// Resample after every observation.
    Always,
    /// Never resample (plain sequential importance sampling).
    Never,
    /// Resample when the effective sample size drops below `ratio * n`,
    /// `ratio` in `(0, 1]`.
    EssBelow(Scalar),
}

/// Scheme plus trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplePolicy {
    pub scheme: ResampleScheme,
    pub trigger: ResampleTrigger,
}

impl ResamplePolicy {
    pub fn new(scheme: ResampleScheme, trigger: ResampleTrigger) -> Result<Self> {
        if let ResampleTrigger::EssBelow(ratio) = trigger {
            if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
                return Err(Error::InvalidParams(format!(
                    "ESS trigger ratio must lie in (0, 1], got {ratio}"
                )));
            }
        }
        Ok(Self { scheme, trigger })
    }

    /// Decide from the current unnormalized log-weights.
    pub fn should_resample(&self, log_weights: &[Scalar]) -> Result<bool> {
        match self.trigger {
            ResampleTrigger::Always => Ok(true),
            ResampleTrigger::Never => Ok(false),
            ResampleTrigger::EssBelow(ratio) => {
                let ess = effective_sample_size(log_weights)?;
                Ok(ess < ratio * log_weights.len() as Scalar)
            }
        }
    }
}

impl Default for ResamplePolicy {
    /// Multinomial scheme with an ESS trigger at half the particle count.
    fn default() -> Self {
        Self {
            scheme: ResampleScheme::Multinomial,
            trigger: ResampleTrigger::EssBelow(0.5),
        }
    }
}

/// Relative threshold below which a weight is treated as exactly zero in
/// residual resampling's floor stage, so that noise-level weights cannot
/// produce spurious deterministic copies.
const RESIDUAL_ZERO_EPS: Scalar = 1e-15;

fn validate_probs(probs: &[Scalar]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::DegenerateWeights("empty weight vector".to_string()));
    }
    if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::DegenerateWeights(
            "weights must be finite and nonnegative".to_string(),
        ));
    }
    let sum: Scalar = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::DegenerateWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Index of the last strictly positive probability. `validate_probs` has
/// ruled out the all-zero case.
fn last_alive(probs: &[Scalar]) -> usize {
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// First index whose cumulative weight strictly exceeds `u`, clamped to the
/// last particle with positive weight (roundoff in the cumulative sum can
/// leave the total a hair under 1).
fn index_below(cum: &[Scalar], last_pos: usize, u: Scalar) -> usize {
    cum[..=last_pos].partition_point(|&c| c <= u).min(last_pos)
}

/// Walk sorted points through the cumulative distribution in one pass.
fn ancestors_from_sorted_points<I>(probs: &[Scalar], points: I, out: &mut Vec<usize>)
where
    I: Iterator<Item = Scalar>,
{
    let last_pos = last_alive(probs);
    let mut idx = 0usize;
    let mut cum = probs[0];
    for u in points {
        while u >= cum && idx < last_pos {
            idx += 1;
            cum += probs[idx];
        }
        out.push(idx);
    }
}

/// Draw `probs.len()` ancestor indices according to `scheme`, the usual
/// same-size resampling step.
///
/// `probs` must be normalized (the output of
/// [`crate::ensemble::normalized_weights`] qualifies).
pub fn draw_ancestors(
    scheme: ResampleScheme,
    probs: &[Scalar],
    rng: &mut Prng,
) -> Result<Vec<usize>> {
    draw_ancestors_n(scheme, probs, probs.len(), rng)
}

/// Draw `count` ancestor indices from `probs` according to `scheme`; the
/// number of draws need not match the number of weights.
pub fn draw_ancestors_n(
    scheme: ResampleScheme,
    probs: &[Scalar],
    count: usize,
    rng: &mut Prng,
) -> Result<Vec<usize>> {
    validate_probs(probs)?;
    if count == 0 {
        return Err(Error::InvalidParams(
            "at least one ancestor must be drawn".to_string(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    match scheme {
        ResampleScheme::Multinomial => {
            let mut cum = Vec::with_capacity(probs.len());
            let mut acc = 0.0 as Scalar;
            for &p in probs {
                acc += p;
                cum.push(acc);
            }
            let last_pos = last_alive(probs);
            for _ in 0..count {
                let u = rng.uniform_01();
                out.push(index_below(&cum, last_pos, u));
            }
        }
        ResampleScheme::Stratified => {
            let n_s = count as Scalar;
            let points = (0..count).map(|i| (i as Scalar + rng.uniform_01()) / n_s);
            ancestors_from_sorted_points(probs, points, &mut out);
        }
        ResampleScheme::Systematic => {
            let n_s = count as Scalar;
            let u = rng.uniform_01();
            let points = (0..count).map(|i| (i as Scalar + u) / n_s);
            ancestors_from_sorted_points(probs, points, &mut out);
        }
        ResampleScheme::Residual => {
            let w_max = probs.iter().copied().fold(0.0 as Scalar, Scalar::max);
            let n_s = count as Scalar;
            let mut residuals = vec![0.0 as Scalar; probs.len()];
            let mut assigned = 0usize;
            for (i, &p) in probs.iter().enumerate() {
                if p < RESIDUAL_ZERO_EPS * w_max {
                    continue;
                }
                let scaled = n_s * p;
                let k = scaled.floor();
                residuals[i] = scaled - k;
                let k = k as usize;
                for _ in 0..k {
                    out.push(i);
                }
                assigned += k;
            }
            let remaining = count - assigned.min(count);
            if remaining > 0 {
                let resid_sum: Scalar = residuals.iter().sum();
                if resid_sum > 0.0 {
                    let mut cum = Vec::with_capacity(residuals.len());
                    let mut acc = 0.0 as Scalar;
                    for &r in &residuals {
                        acc += r / resid_sum;
                        cum.push(acc);
                    }
                    let last_pos = residuals.iter().rposition(|&r| r > 0.0).unwrap_or(0);
                    for _ in 0..remaining {
                        let u = rng.uniform_01();
                        out.push(index_below(&cum, last_pos, u));
                    }
                } else {
                    // All scaled weights were integers yet a slot is left over
                    // (possible only through roundoff); give it to the mode.
                    let mode = probs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    for _ in 0..remaining {
                        out.push(mode);
                    }
                }
            }
            out.truncate(count);
        }
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

/// Resample an ensemble in place: normalize its weights, draw ancestors with
/// `scheme`, gather the samples, and reset every log-weight to zero.
pub fn resample<const DX: usize>(
    ensemble: &mut ParticleEnsemble<DX>,
    scheme: ResampleScheme,
    rng: &mut Prng,
) -> Result<()> {
    let probs = ensemble.normalized_weights()?;
    let ancestors = draw_ancestors(scheme, &probs, rng)?;
    ensemble.apply_ancestors(&ancestors);
    Ok(())
}
