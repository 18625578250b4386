//! Particle filters: bootstrap, sequential importance sampling with
//! resampling (SISR), and the two-stage auxiliary particle filter.
//!
//! All three share the same bookkeeping, performed in this order for every
//! observation:
//!
//! 1. propagate and reweight the particles (this is where they differ),
//! 2. record the log conditional likelihood estimate
//!    `log p^(y_t | y_0..y_{t-1})` from log-weight sums, before any
//!    resampling,
//! 3. evaluate the registered test functions under the post-update,
//!    pre-resample normalized weights,
//! 4. consult the [`ResamplePolicy`] and, if it fires, resample and reset
//!    every log-weight to zero.
//!
//! The per-step estimates multiply (sum in log space) to the filter's
//! marginal likelihood estimate, which [`FilterState::total_log_likelihood`]
//! accumulates.
//!
//! Errors during a step leave the state spent; a filter that returned an
//! error cannot be stepped further and should be rebuilt.

use nalgebra::DMatrix;

use crate::ensemble::{normalized_weights, ObsVec, ParticleEnsemble, StateVec};
use crate::error::{Error, Result};
use crate::model::{Proposal, StateSpaceModel};
use crate::resample::{draw_ancestors, resample, ResamplePolicy};
use crate::rv::Prng;
use crate::Scalar;

/// A function of the state whose posterior expectation is tracked each
/// step. The output shape is free on the first call but must stay fixed.
pub type TestFunction<const DX: usize> = dyn Fn(&StateVec<DX>) -> DMatrix<Scalar>;

/// Shared state of a running particle filter.
#[derive(Debug, Clone)]
pub struct FilterState<const DX: usize> {
    n: usize,
    ensemble: Option<ParticleEnsemble<DX>>,
    last_log_cond_like: Option<Scalar>,
    expectations: Vec<DMatrix<Scalar>>,
    expectation_shapes: Option<Vec<(usize, usize)>>,
    total_log_likelihood: Scalar,
    steps: usize,
}

impl<const DX: usize> FilterState<DX> {
    /// Fresh state for `n` particles; the particles themselves are drawn
    /// when the first observation arrives.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams(
                "particle count must be at least one".to_string(),
            ));
        }
        Ok(Self {
            n,
            ensemble: None,
            last_log_cond_like: None,
            expectations: Vec::new(),
            expectation_shapes: None,
            total_log_likelihood: 0.0,
            steps: 0,
        })
    }

    /// Particle count, fixed for the life of the filter.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations processed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The current ensemble; an error until the first observation.
    pub fn ensemble(&self) -> Result<&ParticleEnsemble<DX>> {
        self.ensemble.as_ref().ok_or(Error::NotYetFiltered)
    }

    /// Log conditional likelihood estimate of the most recent observation.
    pub fn log_cond_like(&self) -> Result<Scalar> {
        self.last_log_cond_like.ok_or(Error::NotYetFiltered)
    }

    /// Test-function expectations from the most recent step.
    pub fn expectations(&self) -> Result<&[DMatrix<Scalar>]> {
        if self.steps == 0 {
            return Err(Error::NotYetFiltered);
        }
        Ok(&self.expectations)
    }

    /// Running log marginal likelihood estimate (sum of per-step values).
    pub fn total_log_likelihood(&self) -> Scalar {
        self.total_log_likelihood
    }
}

/// NaN log-weights name the offending particle; a fully dead ensemble is a
/// weight collapse. Returns the log-sum of the weights otherwise.
fn checked_log_sum(log_weights: &[Scalar], step: usize) -> Result<Scalar> {
    if let Some(index) = log_weights.iter().position(|w| w.is_nan()) {
        return Err(Error::NanLogWeight { index, step });
    }
    match crate::ensemble::log_sum_exp(log_weights) {
        Ok(l) => Ok(l),
        Err(Error::AllWeightsDegenerate) => Err(Error::WeightCollapse { step }),
        Err(e) => Err(e),
    }
}

fn compute_expectations<const DX: usize>(
    ensemble: &ParticleEnsemble<DX>,
    fs: &[&TestFunction<DX>],
    shapes: &mut Option<Vec<(usize, usize)>>,
) -> Result<Vec<DMatrix<Scalar>>> {
    let w = ensemble.normalized_weights()?;
    let mut out = Vec::with_capacity(fs.len());
    for f in fs {
        let mut acc: Option<DMatrix<Scalar>> = None;
        for (wi, x) in w.iter().zip(ensemble.samples()) {
            let h = f(x);
            match &mut acc {
                None => acc = Some(h * *wi),
                Some(a) => {
                    if h.shape() != a.shape() {
                        return Err(Error::DimensionMismatch(format!(
                            "test function output changed shape within a step: {:?} vs {:?}",
                            a.shape(),
                            h.shape()
                        )));
                    }
                    *a += h * *wi;
                }
            }
        }
        out.push(acc.expect("ensemble is never empty"));
    }
    let observed: Vec<(usize, usize)> = out.iter().map(|m| m.shape()).collect();
    match shapes {
        None => *shapes = Some(observed),
        Some(expected) => {
            if *expected != observed {
                return Err(Error::DimensionMismatch(format!(
                    "test functions changed between steps: shapes {expected:?} vs {observed:?}"
                )));
            }
        }
    }
    Ok(out)
}

/// Steps 2 through 4 of the shared bookkeeping (see module docs).
fn finish_step<const DX: usize>(
    state: &mut FilterState<DX>,
    mut ensemble: ParticleEnsemble<DX>,
    log_cond_like: Scalar,
    policy: &ResamplePolicy,
    rng: &mut Prng,
    fs: &[&TestFunction<DX>],
) -> Result<()> {
    let expectations = compute_expectations(&ensemble, fs, &mut state.expectation_shapes)?;
    if policy.should_resample(ensemble.log_weights())? {
        resample(&mut ensemble, policy.scheme, rng)?;
    }
    state.ensemble = Some(ensemble);
    state.last_log_cond_like = Some(log_cond_like);
    state.expectations = expectations;
    state.total_log_likelihood += log_cond_like;
    state.steps += 1;
    Ok(())
}

/// Time-zero initialization shared by the bootstrap and auxiliary filters:
/// draw from the initial law and weight by the observation density alone.
fn init_from_prior<M, const DX: usize, const DY: usize>(
    state: &mut FilterState<DX>,
    model: &M,
    y: &ObsVec<DY>,
    policy: &ResamplePolicy,
    rng: &mut Prng,
    fs: &[&TestFunction<DX>],
) -> Result<()>
where
    M: StateSpaceModel<DX, DY>,
{
    let n = state.n;
    let mut xs = Vec::with_capacity(n);
    let mut lw = Vec::with_capacity(n);
    for _ in 0..n {
        let x = model.sample_initial(rng);
        lw.push(model.log_observation_density(y, &x));
        xs.push(x);
    }
    let lse = checked_log_sum(&lw, 0)?;
    let log_cl = lse - (n as Scalar).ln();
    let ensemble = ParticleEnsemble::new(xs, lw).expect("weights already checked");
    finish_step(state, ensemble, log_cl, policy, rng, fs)
}

/// One bootstrap filter step: propagate through the transition law, then
/// multiply each weight by the observation density.
pub fn bootstrap_step<M, const DX: usize, const DY: usize>(
    state: &mut FilterState<DX>,
    model: &M,
    y: &ObsVec<DY>,
    policy: &ResamplePolicy,
    rng: &mut Prng,
    fs: &[&TestFunction<DX>],
) -> Result<()>
where
    M: StateSpaceModel<DX, DY>,
{
    let step = state.steps;
    match state.ensemble.take() {
        None => init_from_prior(state, model, y, policy, rng, fs),
        Some(mut ensemble) => {
            let old_lse = ensemble.log_weight_sum()?;
            let n = ensemble.n();
            for i in 0..n {
                let x_prev = ensemble.samples()[i];
                let x = model.sample_transition(&x_prev, rng);
                ensemble.log_weights_mut()[i] += model.log_observation_density(y, &x);
                ensemble.samples_mut()[i] = x;
            }
            let new_lse = checked_log_sum(ensemble.log_weights(), step)?;
            finish_step(state, ensemble, new_lse - old_lse, policy, rng, fs)
        }
    }
}

/// One SISR step: propagate through the proposal, then weight by
/// observation density times the transition-to-proposal ratio.
pub fn sisr_step<M, const DX: usize, const DY: usize>(
    state: &mut FilterState<DX>,
    model: &M,
    y: &ObsVec<DY>,
    policy: &ResamplePolicy,
    rng: &mut Prng,
    fs: &[&TestFunction<DX>],
) -> Result<()>
where
    M: Proposal<DX, DY>,
{
    let step = state.steps;
    match state.ensemble.take() {
        None => {
            let n = state.n;
            let mut xs = Vec::with_capacity(n);
            let mut lw = Vec::with_capacity(n);
            for _ in 0..n {
                let x = model.sample_initial_proposal(y, rng);
                // the correction is grouped so that a proposal delegating to
                // the model's own law cancels to exactly zero
                let w = model.log_observation_density(y, &x)
                    + (model.log_initial_density(&x) - model.log_initial_proposal(&x, y));
                lw.push(w);
                xs.push(x);
            }
            let lse = checked_log_sum(&lw, 0)?;
            let log_cl = lse - (n as Scalar).ln();
            let ensemble = ParticleEnsemble::new(xs, lw).expect("weights already checked");
            finish_step(state, ensemble, log_cl, policy, rng, fs)
        }
        Some(mut ensemble) => {
            let old_lse = ensemble.log_weight_sum()?;
            let n = ensemble.n();
            for i in 0..n {
                let x_prev = ensemble.samples()[i];
                let x = model.sample_proposal(&x_prev, y, rng);
                let incr = model.log_observation_density(y, &x)
                    + (model.log_transition_density(&x, &x_prev)
                        - model.log_proposal(&x, &x_prev, y));
                ensemble.log_weights_mut()[i] += incr;
                ensemble.samples_mut()[i] = x;
            }
            let new_lse = checked_log_sum(ensemble.log_weights(), step)?;
            finish_step(state, ensemble, new_lse - old_lse, policy, rng, fs)
        }
    }
}

/// One auxiliary particle filter step.
///
/// First stage: score the observation at each particle's transition mean,
/// fold those scores into the weights, and draw ancestors from the result
/// with the policy's scheme. Second stage: propagate the chosen ancestors
/// through the transition law and weight by the ratio of the observation
/// density at the new state to the density at the ancestor's transition
/// mean. The log conditional likelihood estimate combines both stages:
/// the first-stage log-weight gain plus the log mean second-stage weight.
///
/// Time zero has no transition stage and reduces to the bootstrap
/// initialization. The policy's trigger is evaluated on the second-stage
/// weights afterwards, exactly as in the other filters.
pub fn apf_step<M, const DX: usize, const DY: usize>(
    state: &mut FilterState<DX>,
    model: &M,
    y: &ObsVec<DY>,
    policy: &ResamplePolicy,
    rng: &mut Prng,
    fs: &[&TestFunction<DX>],
) -> Result<()>
where
    M: StateSpaceModel<DX, DY>,
{
    let step = state.steps;
    match state.ensemble.take() {
        None => init_from_prior(state, model, y, policy, rng, fs),
        Some(ensemble) => {
            let old_lse = ensemble.log_weight_sum()?;
            let n = ensemble.n();

            let mut g_at_mean = Vec::with_capacity(n);
            let mut first_stage = Vec::with_capacity(n);
            for i in 0..n {
                let mu = model.transition_mean(&ensemble.samples()[i]);
                let g = model.log_observation_density(y, &mu);
                first_stage.push(ensemble.log_weights()[i] + g);
                g_at_mean.push(g);
            }
            let first_lse = checked_log_sum(&first_stage, step)?;
            let probs = normalized_weights(&first_stage)?;
            let ancestors = draw_ancestors(policy.scheme, &probs, rng)?;

            let mut xs = Vec::with_capacity(n);
            let mut second_stage = Vec::with_capacity(n);
            for &a in &ancestors {
                let x = model.sample_transition(&ensemble.samples()[a], rng);
                second_stage.push(model.log_observation_density(y, &x) - g_at_mean[a]);
                xs.push(x);
            }
            let second_lse = checked_log_sum(&second_stage, step)?;

            let log_cl = (first_lse - old_lse) + (second_lse - (n as Scalar).ln());
            let new_ensemble =
                ParticleEnsemble::new(xs, second_stage).expect("weights already checked");
            finish_step(state, new_ensemble, log_cl, policy, rng, fs)
        }
    }
}

/// Common interface of the three filters.
pub trait ParticleFilter<const DX: usize, const DY: usize> {
    /// Absorb one observation, updating expectations and the likelihood
    /// estimate.
    fn filter(
        &mut self,
        y: &ObsVec<DY>,
        test_functions: &[&TestFunction<DX>],
        rng: &mut Prng,
    ) -> Result<()>;

    /// The shared filter state.
    fn state(&self) -> &FilterState<DX>;

    /// Log conditional likelihood estimate of the most recent observation.
    fn log_cond_like(&self) -> Result<Scalar> {
        self.state().log_cond_like()
    }

    /// Test-function expectations from the most recent step.
    fn expectations(&self) -> Result<&[DMatrix<Scalar>]> {
        self.state().expectations()
    }

    /// Running log marginal likelihood estimate.
    fn total_log_likelihood(&self) -> Scalar {
        self.state().total_log_likelihood()
    }
}

macro_rules! filter_struct {
    ($(#[$doc:meta])* $name:ident, $bound:ident, $step:ident) => {
        $(#[$doc])*
        pub struct $name<M, const DX: usize, const DY: usize> {
            model: M,
            policy: ResamplePolicy,
            state: FilterState<DX>,
        }

        impl<M, const DX: usize, const DY: usize> $name<M, DX, DY>
        where
            M: $bound<DX, DY>,
        {
            pub fn new(model: M, n: usize, policy: ResamplePolicy) -> Result<Self> {
                Ok(Self {
                    model,
                    policy,
                    state: FilterState::new(n)?,
                })
            }

            pub fn model(&self) -> &M {
                &self.model
            }
        }

        impl<M, const DX: usize, const DY: usize> ParticleFilter<DX, DY> for $name<M, DX, DY>
        where
            M: $bound<DX, DY>,
        {
            fn filter(
                &mut self,
                y: &ObsVec<DY>,
                test_functions: &[&TestFunction<DX>],
                rng: &mut Prng,
            ) -> Result<()> {
                $step(&mut self.state, &self.model, y, &self.policy, rng, test_functions)
            }

            fn state(&self) -> &FilterState<DX> {
                &self.state
            }
        }
    };
}

filter_struct!(
    /// Bootstrap filter: proposes from the model's own transition law.
    BootstrapFilter,
    StateSpaceModel,
    bootstrap_step
);
filter_struct!(
    /// SISR filter: proposes from the model's [`Proposal`] kernels.
    SisrFilter,
    Proposal,
    sisr_step
);
filter_struct!(
    /// Auxiliary particle filter: resamples on first-stage scores at the
    /// transition means before propagating.
    AuxiliaryFilter,
    StateSpaceModel,
    apf_step
);
