//! Capability traits that connect state-space models to the filters.
//!
//! [`StateSpaceModel`] is everything the bootstrap and auxiliary filters
//! need; [`Proposal`] adds the importance-sampling kernels used by the SISR
//! filter. All log-densities must include their normalizing constants:
//! the per-step likelihood estimates are meaningless without them. Density
//! evaluations may return `-inf` for impossible values but must never
//! return NaN for finite input.

use crate::ensemble::{ObsVec, StateVec};
use crate::rv::Prng;
use crate::Scalar;

/// Initial, transition, and observation laws of a state-space model with
/// `DX`-dimensional states and `DY`-dimensional observations.
pub trait StateSpaceModel<const DX: usize, const DY: usize> {
    /// Log-density of the initial state law at `x0`.
    fn log_initial_density(&self, x0: &StateVec<DX>) -> Scalar;

    /// Draw from the initial state law.
    fn sample_initial(&self, rng: &mut Prng) -> StateVec<DX>;

    /// Log-density of the transition law at `x` given the previous state.
    fn log_transition_density(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>) -> Scalar;

    /// Draw from the transition law given the previous state.
    fn sample_transition(&self, x_prev: &StateVec<DX>, rng: &mut Prng) -> StateVec<DX>;

    /// Mean (or another representative point) of the transition law; the
    /// auxiliary filter scores observations there in its first stage.
    fn transition_mean(&self, x_prev: &StateVec<DX>) -> StateVec<DX>;

    /// Log-density of the observation law at `y` given the current state.
    fn log_observation_density(&self, y: &ObsVec<DY>, x: &StateVec<DX>) -> Scalar;

    /// Draw an observation given the current state (used by the simulator).
    fn sample_observation(&self, x: &StateVec<DX>, rng: &mut Prng) -> ObsVec<DY>;
}

/// Importance-sampling proposal kernels on top of a state-space model.
///
/// The initial proposal may condition on the first observation and the
/// step proposal on the current one. A model whose proposals simply reuse
/// its own initial and transition laws turns SISR into the bootstrap
/// filter, draw for draw.
pub trait Proposal<const DX: usize, const DY: usize>: StateSpaceModel<DX, DY> {
    /// Draw the time-zero state from the initial proposal.
    fn sample_initial_proposal(&self, y0: &ObsVec<DY>, rng: &mut Prng) -> StateVec<DX>;

    /// Log-density of the initial proposal.
    fn log_initial_proposal(&self, x0: &StateVec<DX>, y0: &ObsVec<DY>) -> Scalar;

    /// Draw the next state from the step proposal.
    fn sample_proposal(
        &self,
        x_prev: &StateVec<DX>,
        y: &ObsVec<DY>,
        rng: &mut Prng,
    ) -> StateVec<DX>;

    /// Log-density of the step proposal.
    fn log_proposal(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>, y: &ObsVec<DY>) -> Scalar;
}
