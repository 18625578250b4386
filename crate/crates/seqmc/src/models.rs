//! Bundled models: stochastic volatility, linear-Gaussian state space, two
//! generic wrappers, and a trajectory simulator.

use nalgebra::{SMatrix, SVector};

use crate::ensemble::{ObsVec, StateVec};
use crate::error::{Error, Result};
use crate::model::{Proposal, StateSpaceModel};
use crate::rv::{log_norm_pdf, Prng};
use crate::{Scalar, LN_2PI};

/// Parameters of the stochastic volatility model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvolParams {
    /// Log-volatility autoregression coefficient, `|phi| < 1`.
    pub phi: Scalar,
    /// Observation scale, nonzero; only its magnitude matters.
    pub beta: Scalar,
    /// Log-volatility innovation standard deviation, positive.
    pub sigma: Scalar,
}

impl SvolParams {
    pub fn new(phi: Scalar, beta: Scalar, sigma: Scalar) -> Result<Self> {
        if !(phi.is_finite() && phi.abs() < 1.0) {
            return Err(Error::InvalidParams(format!(
                "require |phi| < 1 for a stationary log-volatility, got {phi}"
            )));
        }
        if !(beta.is_finite() && beta != 0.0) {
            return Err(Error::InvalidParams(format!(
                "require a nonzero finite observation scale, got {beta}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "require a positive innovation scale, got {sigma}"
            )));
        }
        Ok(Self { phi, beta, sigma })
    }

    /// The parameter point used by the bundled comparison driver:
    /// `phi = 0.91`, `beta = 0.5`, `sigma = 1`.
    pub fn canonical() -> Self {
        Self {
            phi: 0.91,
            beta: 0.5,
            sigma: 1.0,
        }
    }
}

/// Stochastic volatility model.
///
/// Log-volatility `x` is a stationary Gaussian AR(1),
/// `x_t = phi x_{t-1} + sigma w_t` started from its stationary law
/// `N(0, sigma^2 / (1 - phi^2))`, and the return observation is
/// `y_t = beta exp(x_t / 2) z_t` with standard normal `z_t`.
///
/// Its [`Proposal`] implementation reuses the initial and transition laws,
/// so the SISR filter on this model mirrors the bootstrap filter.
#[derive(Debug, Clone)]
pub struct SvolModel {
    params: SvolParams,
    stationary_sd: Scalar,
    abs_beta: Scalar,
}

impl SvolModel {
    pub fn new(params: SvolParams) -> Result<Self> {
        let SvolParams { phi, beta, sigma } = params;
        SvolParams::new(phi, beta, sigma)?;
        Ok(Self {
            params,
            stationary_sd: sigma / (1.0 - phi * phi).sqrt(),
            abs_beta: beta.abs(),
        })
    }

    pub fn params(&self) -> &SvolParams {
        &self.params
    }

    /// Standard deviation of the stationary log-volatility law.
    pub fn stationary_sd(&self) -> Scalar {
        self.stationary_sd
    }
}

impl StateSpaceModel<1, 1> for SvolModel {
    fn log_initial_density(&self, x0: &StateVec<1>) -> Scalar {
        log_norm_pdf(x0[0], 0.0, self.stationary_sd)
            .expect("constructor validated the stationary scale")
    }

    fn sample_initial(&self, rng: &mut Prng) -> StateVec<1> {
        StateVec::<1>::new(rng.normal(0.0, self.stationary_sd))
    }

    fn log_transition_density(&self, x: &StateVec<1>, x_prev: &StateVec<1>) -> Scalar {
        log_norm_pdf(x[0], self.params.phi * x_prev[0], self.params.sigma)
            .expect("constructor validated sigma")
    }

    fn sample_transition(&self, x_prev: &StateVec<1>, rng: &mut Prng) -> StateVec<1> {
        StateVec::<1>::new(rng.normal(self.params.phi * x_prev[0], self.params.sigma))
    }

    fn transition_mean(&self, x_prev: &StateVec<1>) -> StateVec<1> {
        StateVec::<1>::new(self.params.phi * x_prev[0])
    }

    fn log_observation_density(&self, y: &ObsVec<1>, x: &StateVec<1>) -> Scalar {
        // N(y; 0, beta exp(x/2)) written out so that extreme log-volatility
        // degrades to -inf instead of tripping over an over- or underflowing
        // intermediate scale.
        let q = y[0] * y[0];
        let quad = if q == 0.0 {
            0.0
        } else {
            q / (2.0 * self.abs_beta * self.abs_beta * x[0].exp())
        };
        -0.5 * LN_2PI - self.abs_beta.ln() - 0.5 * x[0] - quad
    }

    fn sample_observation(&self, x: &StateVec<1>, rng: &mut Prng) -> ObsVec<1> {
        ObsVec::<1>::new(self.abs_beta * (0.5 * x[0]).exp() * rng.standard_normal())
    }
}

impl Proposal<1, 1> for SvolModel {
    fn sample_initial_proposal(&self, _y0: &ObsVec<1>, rng: &mut Prng) -> StateVec<1> {
        self.sample_initial(rng)
    }

    fn log_initial_proposal(&self, x0: &StateVec<1>, _y0: &ObsVec<1>) -> Scalar {
        self.log_initial_density(x0)
    }

    fn sample_proposal(&self, x_prev: &StateVec<1>, _y: &ObsVec<1>, rng: &mut Prng) -> StateVec<1> {
        self.sample_transition(x_prev, rng)
    }

    fn log_proposal(&self, x: &StateVec<1>, x_prev: &StateVec<1>, _y: &ObsVec<1>) -> Scalar {
        self.log_transition_density(x, x_prev)
    }
}

/// Parameters of a linear-Gaussian state-space model:
/// `x_t = A x_{t-1} + w_t`, `y_t = C x_t + v_t`, with `w ~ N(0, Q)`,
/// `v ~ N(0, R)` and an initial state `x_0 ~ N(m0, P0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgssmParams<const DX: usize, const DY: usize> {
    pub a: SMatrix<Scalar, DX, DX>,
    pub c: SMatrix<Scalar, DY, DX>,
    pub q: SMatrix<Scalar, DX, DX>,
    pub r: SMatrix<Scalar, DY, DY>,
    pub m0: SVector<Scalar, DX>,
    pub p0: SMatrix<Scalar, DX, DX>,
}

fn check_symmetric_psd<const D: usize>(m: &SMatrix<Scalar, D, D>, name: &str) -> Result<()> {
    let scale = 1.0 + m.amax();
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(Error::InvalidParams(format!("{name} is not symmetric")));
    }
    // copy into a dynamically sized matrix: the eigenvalue routine is not
    // available for arbitrary const dimensions
    let dynamic = nalgebra::DMatrix::from_iterator(D, D, m.iter().copied());
    let eig = dynamic.symmetric_eigenvalues();
    if eig.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::NotPositiveDefinite(format!(
            "{name} has a negative eigenvalue"
        )));
    }
    Ok(())
}

impl<const DX: usize, const DY: usize> LgssmParams<DX, DY> {
    /// Validate shapes cannot disagree (they are static); noise covariances
    /// and the initial covariance must be symmetric positive semidefinite.
    pub fn new(
        a: SMatrix<Scalar, DX, DX>,
        c: SMatrix<Scalar, DY, DX>,
        q: SMatrix<Scalar, DX, DX>,
        r: SMatrix<Scalar, DY, DY>,
        m0: SVector<Scalar, DX>,
        p0: SMatrix<Scalar, DX, DX>,
    ) -> Result<Self> {
        let all_finite = a.iter().all(|v| v.is_finite())
            && c.iter().all(|v| v.is_finite())
            && q.iter().all(|v| v.is_finite())
            && r.iter().all(|v| v.is_finite())
            && m0.iter().all(|v| v.is_finite())
            && p0.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams(
                "all linear-Gaussian parameters must be finite".to_string(),
            ));
        }
        check_symmetric_psd(&q, "state noise covariance Q")?;
        check_symmetric_psd(&r, "observation noise covariance R")?;
        check_symmetric_psd(&p0, "initial covariance P0")?;
        Ok(Self { a, c, q, r, m0, p0 })
    }
}

impl LgssmParams<1, 1> {
    /// Scalar model shorthand.
    pub fn scalar(
        a: Scalar,
        c: Scalar,
        q: Scalar,
        r: Scalar,
        m0: Scalar,
        p0: Scalar,
    ) -> Result<Self> {
        Self::new(
            SMatrix::<Scalar, 1, 1>::new(a),
            SMatrix::<Scalar, 1, 1>::new(c),
            SMatrix::<Scalar, 1, 1>::new(q),
            SMatrix::<Scalar, 1, 1>::new(r),
            SVector::<Scalar, 1>::new(m0),
            SMatrix::<Scalar, 1, 1>::new(p0),
        )
    }
}

#[derive(Debug, Clone)]
struct SpdFactors<const D: usize> {
    lower: SMatrix<Scalar, D, D>,
    inverse: SMatrix<Scalar, D, D>,
    log_det: Scalar,
}

fn spd_factors<const D: usize>(m: &SMatrix<Scalar, D, D>, name: &str) -> Result<SpdFactors<D>> {
    let chol = m.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(format!("{name} must be strictly positive definite"))
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<Scalar>();
    Ok(SpdFactors {
        lower: chol.l(),
        inverse: chol.inverse(),
        log_det,
    })
}

fn log_mvn_from_factors<const D: usize>(diff: &SVector<Scalar, D>, f: &SpdFactors<D>) -> Scalar {
    let quad = (f.inverse * diff).dot(diff);
    -0.5 * (D as Scalar * LN_2PI + f.log_det + quad)
}

/// Linear-Gaussian state-space model usable with every particle filter.
///
/// Unlike the exact filter, sampling and density evaluation need the noise
/// covariances and initial covariance to be strictly positive definite;
/// their Cholesky factors are taken once at construction.
#[derive(Debug, Clone)]
pub struct LgssmModel<const DX: usize, const DY: usize> {
    params: LgssmParams<DX, DY>,
    fq: SpdFactors<DX>,
    fr: SpdFactors<DY>,
    fp0: SpdFactors<DX>,
}

impl<const DX: usize, const DY: usize> LgssmModel<DX, DY> {
    pub fn new(params: LgssmParams<DX, DY>) -> Result<Self> {
        let fq = spd_factors(&params.q, "state noise covariance Q")?;
        let fr = spd_factors(&params.r, "observation noise covariance R")?;
        let fp0 = spd_factors(&params.p0, "initial covariance P0")?;
        Ok(Self {
            params,
            fq,
            fr,
            fp0,
        })
    }

    pub fn params(&self) -> &LgssmParams<DX, DY> {
        &self.params
    }

    fn correlated<const D: usize>(
        lower: &SMatrix<Scalar, D, D>,
        rng: &mut Prng,
    ) -> SVector<Scalar, D> {
        let z = SVector::<Scalar, D>::from_fn(|_, _| rng.standard_normal());
        lower * z
    }
}

impl<const DX: usize, const DY: usize> StateSpaceModel<DX, DY> for LgssmModel<DX, DY> {
    fn log_initial_density(&self, x0: &StateVec<DX>) -> Scalar {
        log_mvn_from_factors(&(x0 - self.params.m0), &self.fp0)
    }

    fn sample_initial(&self, rng: &mut Prng) -> StateVec<DX> {
        self.params.m0 + Self::correlated(&self.fp0.lower, rng)
    }

    fn log_transition_density(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>) -> Scalar {
        log_mvn_from_factors(&(x - self.params.a * x_prev), &self.fq)
    }

    fn sample_transition(&self, x_prev: &StateVec<DX>, rng: &mut Prng) -> StateVec<DX> {
        self.params.a * x_prev + Self::correlated(&self.fq.lower, rng)
    }

    fn transition_mean(&self, x_prev: &StateVec<DX>) -> StateVec<DX> {
        self.params.a * x_prev
    }

    fn log_observation_density(&self, y: &ObsVec<DY>, x: &StateVec<DX>) -> Scalar {
        log_mvn_from_factors(&(y - self.params.c * x), &self.fr)
    }

    fn sample_observation(&self, x: &StateVec<DX>, rng: &mut Prng) -> ObsVec<DY> {
        self.params.c * x + Self::correlated(&self.fr.lower, rng)
    }
}

/// Wrapper that turns any state-space model into a SISR-ready model by
/// proposing from its own initial and transition laws.
///
/// With this proposal, the SISR weight update degenerates to the bootstrap
/// update: the transition and proposal log-densities are evaluated by the
/// same code on the same arguments, so their difference is exactly zero.
#[derive(Debug, Clone)]
pub struct TransitionProposal<M>(pub M);

impl<M, const DX: usize, const DY: usize> StateSpaceModel<DX, DY> for TransitionProposal<M>
where
    M: StateSpaceModel<DX, DY>,
{
    fn log_initial_density(&self, x0: &StateVec<DX>) -> Scalar {
        self.0.log_initial_density(x0)
    }
    fn sample_initial(&self, rng: &mut Prng) -> StateVec<DX> {
        self.0.sample_initial(rng)
    }
    fn log_transition_density(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>) -> Scalar {
        self.0.log_transition_density(x, x_prev)
    }
    fn sample_transition(&self, x_prev: &StateVec<DX>, rng: &mut Prng) -> StateVec<DX> {
        self.0.sample_transition(x_prev, rng)
    }
    fn transition_mean(&self, x_prev: &StateVec<DX>) -> StateVec<DX> {
        self.0.transition_mean(x_prev)
    }
    fn log_observation_density(&self, y: &ObsVec<DY>, x: &StateVec<DX>) -> Scalar {
        self.0.log_observation_density(y, x)
    }
    fn sample_observation(&self, x: &StateVec<DX>, rng: &mut Prng) -> ObsVec<DY> {
        self.0.sample_observation(x, rng)
    }
}

impl<M, const DX: usize, const DY: usize> Proposal<DX, DY> for TransitionProposal<M>
where
    M: StateSpaceModel<DX, DY>,
{
    fn sample_initial_proposal(&self, _y0: &ObsVec<DY>, rng: &mut Prng) -> StateVec<DX> {
        self.0.sample_initial(rng)
    }
    fn log_initial_proposal(&self, x0: &StateVec<DX>, _y0: &ObsVec<DY>) -> Scalar {
        self.0.log_initial_density(x0)
    }
    fn sample_proposal(
        &self,
        x_prev: &StateVec<DX>,
        _y: &ObsVec<DY>,
        rng: &mut Prng,
    ) -> StateVec<DX> {
        self.0.sample_transition(x_prev, rng)
    }
    fn log_proposal(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>, _y: &ObsVec<DY>) -> Scalar {
        self.0.log_transition_density(x, x_prev)
    }
}

/// Wrapper that adds a constant to every log-density of a model while
/// leaving its samplers untouched.
///
/// The result is deliberately unnormalized; shifted models exercise the
/// promise that filters only ever use log-weight differences.
#[derive(Debug, Clone)]
pub struct ShiftedModel<M> {
    pub inner: M,
    pub shift: Scalar,
}

impl<M, const DX: usize, const DY: usize> StateSpaceModel<DX, DY> for ShiftedModel<M>
where
    M: StateSpaceModel<DX, DY>,
{
    fn log_initial_density(&self, x0: &StateVec<DX>) -> Scalar {
        self.inner.log_initial_density(x0) + self.shift
    }
    fn sample_initial(&self, rng: &mut Prng) -> StateVec<DX> {
        self.inner.sample_initial(rng)
    }
    fn log_transition_density(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>) -> Scalar {
        self.inner.log_transition_density(x, x_prev) + self.shift
    }
    fn sample_transition(&self, x_prev: &StateVec<DX>, rng: &mut Prng) -> StateVec<DX> {
        self.inner.sample_transition(x_prev, rng)
    }
    fn transition_mean(&self, x_prev: &StateVec<DX>) -> StateVec<DX> {
        self.inner.transition_mean(x_prev)
    }
    fn log_observation_density(&self, y: &ObsVec<DY>, x: &StateVec<DX>) -> Scalar {
        self.inner.log_observation_density(y, x) + self.shift
    }
    fn sample_observation(&self, x: &StateVec<DX>, rng: &mut Prng) -> ObsVec<DY> {
        self.inner.sample_observation(x, rng)
    }
}

impl<M, const DX: usize, const DY: usize> Proposal<DX, DY> for ShiftedModel<M>
where
    M: Proposal<DX, DY>,
{
    fn sample_initial_proposal(&self, y0: &ObsVec<DY>, rng: &mut Prng) -> StateVec<DX> {
        self.inner.sample_initial_proposal(y0, rng)
    }
    fn log_initial_proposal(&self, x0: &StateVec<DX>, y0: &ObsVec<DY>) -> Scalar {
        self.inner.log_initial_proposal(x0, y0) + self.shift
    }
    fn sample_proposal(
        &self,
        x_prev: &StateVec<DX>,
        y: &ObsVec<DY>,
        rng: &mut Prng,
    ) -> StateVec<DX> {
        self.inner.sample_proposal(x_prev, y, rng)
    }
    fn log_proposal(&self, x: &StateVec<DX>, x_prev: &StateVec<DX>, y: &ObsVec<DY>) -> Scalar {
        self.inner.log_proposal(x, x_prev, y) + self.shift
    }
}

/// Draw a state and observation trajectory of `steps + 1` time points
/// (indices `0..=steps`): `x_0` from the initial law, each later state from
/// the transition law, and one observation per state.
pub fn simulate<M, const DX: usize, const DY: usize>(
    model: &M,
    steps: usize,
    rng: &mut Prng,
) -> (Vec<StateVec<DX>>, Vec<ObsVec<DY>>)
where
    M: StateSpaceModel<DX, DY>,
{
    let mut states = Vec::with_capacity(steps + 1);
    let mut obs = Vec::with_capacity(steps + 1);
    let mut x = model.sample_initial(rng);
    obs.push(model.sample_observation(&x, rng));
    states.push(x);
    for _ in 0..steps {
        x = model.sample_transition(&x, rng);
        obs.push(model.sample_observation(&x, rng));
        states.push(x);
    }
    (states, obs)
}
