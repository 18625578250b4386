//! Exact filters used as ground truth: the Kalman filter for linear-Gaussian
//! models and the normalized forward recursion for finite-state hidden
//! Markov models.
//!
//! Both expose the same per-observation quantity as the particle filters,
//! the log conditional likelihood `log p(y_t | y_0..y_{t-1})`, so their
//! outputs are directly comparable with Monte Carlo estimates.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::ensemble::ObsVec;
use crate::error::{Error, Result};
use crate::models::LgssmParams;
use crate::{Scalar, LN_2PI};

/// Gaussian filtering distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief<const DX: usize> {
    pub mean: SVector<Scalar, DX>,
    pub cov: SMatrix<Scalar, DX, DX>,
}

/// Exact filter for [`LgssmParams`].
///
/// The first observation is scored against the initial law directly (the
/// prediction for time zero is `(m0, P0)`; no transition is applied before
/// it), matching the convention of the particle filters. Covariance updates
/// use the Joseph form and are re-symmetrized every step, which keeps the
/// posterior covariance positive semidefinite in floating point.
///
/// Semidefinite noise covariances are legal here; only the innovation
/// covariance must stay invertible, step by step.
#[derive(Debug, Clone)]
pub struct KalmanFilter<const DX: usize, const DY: usize> {
    params: LgssmParams<DX, DY>,
    posterior: Option<GaussianBelief<DX>>,
    last_log_cond_like: Option<Scalar>,
    total_log_likelihood: Scalar,
    steps: usize,
}

fn symmetrize<const D: usize>(m: &mut SMatrix<Scalar, D, D>) {
    *m = (*m + m.transpose()) * 0.5;
}

impl<const DX: usize, const DY: usize> KalmanFilter<DX, DY> {
    pub fn new(params: LgssmParams<DX, DY>) -> Self {
        Self {
            params,
            posterior: None,
            last_log_cond_like: None,
            total_log_likelihood: 0.0,
            steps: 0,
        }
    }

    /// Absorb one observation; returns its log conditional likelihood.
    pub fn step(&mut self, y: &ObsVec<DY>) -> Result<Scalar> {
        let p = &self.params;
        let (m_pred, mut p_pred) = match &self.posterior {
            None => (p.m0, p.p0),
            Some(b) => (p.a * b.mean, p.a * b.cov * p.a.transpose() + p.q),
        };
        symmetrize(&mut p_pred);

        let innovation = y - p.c * m_pred;
        let mut s = p.c * p_pred * p.c.transpose() + p.r;
        symmetrize(&mut s);
        let chol = s
            .cholesky()
            .ok_or(Error::SingularInnovationCovariance { step: self.steps })?;

        let log_det: Scalar = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<Scalar>();
        let quad = innovation.dot(&chol.solve(&innovation));
        let log_cl = -0.5 * (DY as Scalar * LN_2PI + log_det + quad);

        // gain K = P C^T S^{-1}, via S K^T = C P
        let gain = chol.solve(&(p.c * p_pred)).transpose();
        let mean = m_pred + gain * innovation;
        let i_kc = SMatrix::<Scalar, DX, DX>::identity() - gain * p.c;
        let mut cov = i_kc * p_pred * i_kc.transpose() + gain * p.r * gain.transpose();
        symmetrize(&mut cov);

        self.posterior = Some(GaussianBelief { mean, cov });
        self.last_log_cond_like = Some(log_cl);
        self.total_log_likelihood += log_cl;
        self.steps += 1;
        Ok(log_cl)
    }

    /// Filtering distribution after the most recent step.
    pub fn posterior(&self) -> Result<&GaussianBelief<DX>> {
        self.posterior.as_ref().ok_or(Error::NotYetFiltered)
    }

    /// Log conditional likelihood of the most recent observation.
    pub fn log_cond_like(&self) -> Result<Scalar> {
        self.last_log_cond_like.ok_or(Error::NotYetFiltered)
    }

    /// Running sum of the per-step log conditional likelihoods.
    pub fn total_log_likelihood(&self) -> Scalar {
        self.total_log_likelihood
    }

    /// Number of observations absorbed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Parameters of a finite-state hidden Markov model with a finite emission
/// alphabet: a row-stochastic transition matrix (`K x K`), a row-stochastic
/// emission matrix (`K x M`, one row per hidden state), and an initial
/// distribution over the `K` states.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    transition: DMatrix<Scalar>,
    emission: DMatrix<Scalar>,
    initial: DVector<Scalar>,
}

fn check_stochastic_rows(m: &DMatrix<Scalar>, name: &str) -> Result<()> {
    for r in 0..m.nrows() {
        let row = m.row(r);
        if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidParams(format!(
                "{name} row {r} has a negative or non-finite entry"
            )));
        }
        let sum: Scalar = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "{name} row {r} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

impl HmmParams {
    pub fn new(
        transition: DMatrix<Scalar>,
        emission: DMatrix<Scalar>,
        initial: DVector<Scalar>,
    ) -> Result<Self> {
        let k = transition.nrows();
        if k == 0 || emission.ncols() == 0 {
            return Err(Error::InvalidParams(
                "need at least one state and one emission symbol".to_string(),
            ));
        }
        if transition.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix is {}x{}",
                k,
                transition.ncols()
            )));
        }
        if emission.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "emission matrix has {} rows for {} states",
                emission.nrows(),
                k
            )));
        }
        if initial.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "initial distribution has {} entries for {} states",
                initial.len(),
                k
            )));
        }
        check_stochastic_rows(&transition, "transition matrix")?;
        check_stochastic_rows(&emission, "emission matrix")?;
        check_stochastic_rows(
            &DMatrix::from_row_slice(1, k, initial.as_slice()),
            "initial distribution",
        )?;
        Ok(Self {
            transition,
            emission,
            initial,
        })
    }

    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.emission.ncols()
    }

    pub fn transition(&self) -> &DMatrix<Scalar> {
        &self.transition
    }

    pub fn emission(&self) -> &DMatrix<Scalar> {
        &self.emission
    }

    pub fn initial(&self) -> &DVector<Scalar> {
        &self.initial
    }
}

/// Posterior over hidden states; entries are nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBelief(pub DVector<Scalar>);

/// Normalized forward recursion for [`HmmParams`].
///
/// Each step mixes the belief through the transition matrix (the first
/// observation uses the initial distribution directly), multiplies in the
/// emission column of the observed symbol, and renormalizes; the log of the
/// normalizer is the observation's log conditional likelihood. Working with
/// normalized beliefs avoids the underflow of raw forward products on long
/// sequences.
#[derive(Debug, Clone)]
pub struct HmmFilter {
    params: HmmParams,
    belief: Option<DVector<Scalar>>,
    last_log_cond_like: Option<Scalar>,
    total_log_likelihood: Scalar,
    steps: usize,
}

impl HmmFilter {
    pub fn new(params: HmmParams) -> Self {
        Self {
            params,
            belief: None,
            last_log_cond_like: None,
            total_log_likelihood: 0.0,
            steps: 0,
        }
    }

    /// Absorb one emission symbol; returns its log conditional likelihood.
    pub fn step(&mut self, symbol: usize) -> Result<Scalar> {
        let k = self.params.n_states();
        let m = self.params.n_symbols();
        if symbol >= m {
            return Err(Error::InvalidSymbol {
                symbol,
                n_symbols: m,
            });
        }
        let prior = match &self.belief {
            None => self.params.initial.clone(),
            Some(b) => self.params.transition.transpose() * b,
        };
        let mut unnorm = DVector::<Scalar>::zeros(k);
        for i in 0..k {
            unnorm[i] = prior[i] * self.params.emission[(i, symbol)];
        }
        let norm: Scalar = unnorm.iter().sum();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::ZeroLikelihoodObservation {
                symbol,
                step: self.steps,
            });
        }
        self.belief = Some(unnorm / norm);
        let log_cl = norm.ln();
        self.last_log_cond_like = Some(log_cl);
        self.total_log_likelihood += log_cl;
        self.steps += 1;
        Ok(log_cl)
    }

    /// Posterior over states after the most recent step.
    pub fn belief(&self) -> Result<DiscreteBelief> {
        self.belief
            .as_ref()
            .map(|b| DiscreteBelief(b.clone()))
            .ok_or(Error::NotYetFiltered)
    }

    pub fn log_cond_like(&self) -> Result<Scalar> {
        self.last_log_cond_like.ok_or(Error::NotYetFiltered)
    }

    pub fn total_log_likelihood(&self) -> Scalar {
        self.total_log_likelihood
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_norm(x: Scalar, mean: Scalar, var: Scalar) -> Scalar {
        -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
    }

    #[test]
    fn accessors_error_before_the_first_step() {
        let kf = KalmanFilter::new(LgssmParams::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0).unwrap());
        assert!(matches!(kf.posterior(), Err(Error::NotYetFiltered)));
        assert!(matches!(kf.log_cond_like(), Err(Error::NotYetFiltered)));
        let hf = HmmFilter::new(two_state_params());
        assert!(matches!(hf.belief(), Err(Error::NotYetFiltered)));
        assert!(matches!(hf.log_cond_like(), Err(Error::NotYetFiltered)));
    }

    #[test]
    fn kalman_two_scalar_steps_match_hand_algebra() {
        // Scalar oracle written out in full. The first call scores y0
        // against the initial law; the second applies the transition first.
        let (a, c, q, r, m0, p0) = (0.9, 1.1, 0.4, 0.25, 0.2, 1.3);
        let (y0, y1) = (0.5, -0.3);
        let mut kf = KalmanFilter::new(LgssmParams::scalar(a, c, q, r, m0, p0).unwrap());

        let s0 = c * c * p0 + r;
        let k0 = p0 * c / s0;
        let m1 = m0 + k0 * (y0 - c * m0);
        let p1 = (1.0 - k0 * c) * (1.0 - k0 * c) * p0 + k0 * k0 * r;
        let l0 = log_norm(y0, c * m0, s0);

        let got0 = kf.step(&ObsVec::<1>::new(y0)).unwrap();
        assert_relative_eq!(got0, l0, epsilon = 1e-12);
        let post = kf.posterior().unwrap().clone();
        assert_relative_eq!(post.mean[0], m1, epsilon = 1e-12);
        assert_relative_eq!(post.cov[(0, 0)], p1, epsilon = 1e-12);

        let p_pred = a * a * p1 + q;
        let s1 = c * c * p_pred + r;
        let k1 = p_pred * c / s1;
        let m2 = a * m1 + k1 * (y1 - c * a * m1);
        let l1 = log_norm(y1, c * a * m1, s1);

        let got1 = kf.step(&ObsVec::<1>::new(y1)).unwrap();
        assert_relative_eq!(got1, l1, epsilon = 1e-12);
        assert_relative_eq!(kf.posterior().unwrap().mean[0], m2, epsilon = 1e-12);
        assert_relative_eq!(kf.total_log_likelihood(), l0 + l1, epsilon = 1e-12);
    }

    #[test]
    fn kalman_without_diffusion_keeps_a_degenerate_posterior() {
        // A = 1, Q = 0, P0 = 0: the state is known exactly and never moves,
        // so the posterior mean stays at m0 and each observation is scored
        // against N(m0, R).
        let m0 = 0.8;
        let r = 0.5;
        let mut kf = KalmanFilter::new(LgssmParams::scalar(1.0, 1.0, 0.0, r, m0, 0.0).unwrap());
        for &y in &[0.5, 1.2, -0.1, 0.8] {
            let log_cl = kf.step(&ObsVec::<1>::new(y)).unwrap();
            assert_relative_eq!(log_cl, log_norm(y, m0, r), epsilon = 1e-12);
            let post = kf.posterior().unwrap();
            assert_relative_eq!(post.mean[0], m0, epsilon = 1e-12);
            assert!(post.cov[(0, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn kalman_total_log_likelihood_matches_the_joint_gaussian() {
        // Independent oracle: y_0..y_4 as one jointly Gaussian vector whose
        // mean and covariance come from propagating the state moments.
        let (a, c, q, r, m0, p0) = (0.85, 1.2, 0.6, 0.4, -0.3, 1.1);
        let t_max = 5usize;
        let ys: [Scalar; 5] = [0.7, -0.2, 0.4, 1.5, -0.9];

        let mut var_x = vec![0.0 as Scalar; t_max];
        var_x[0] = p0;
        for t in 1..t_max {
            var_x[t] = a * a * var_x[t - 1] + q;
        }
        let mut cov_y = DMatrix::<Scalar>::zeros(t_max, t_max);
        for s in 0..t_max {
            for t in s..t_max {
                let cov_x = a.powi((t - s) as i32) * var_x[s];
                let mut v = c * c * cov_x;
                if s == t {
                    v += r;
                }
                cov_y[(s, t)] = v;
                cov_y[(t, s)] = v;
            }
        }
        let mean_y =
            DVector::<Scalar>::from_iterator(t_max, (0..t_max).map(|t| c * a.powi(t as i32) * m0));
        let joint = crate::rv::log_mvn_pdf(&DVector::from_row_slice(&ys), &mean_y, &cov_y).unwrap();

        let mut kf = KalmanFilter::new(LgssmParams::scalar(a, c, q, r, m0, p0).unwrap());
        for &y in &ys {
            kf.step(&ObsVec::<1>::new(y)).unwrap();
        }
        assert_relative_eq!(kf.total_log_likelihood(), joint, epsilon = 1e-10);
    }

    #[test]
    fn kalman_covariances_stay_symmetric_psd_over_a_long_run() {
        use nalgebra::{Matrix2, Vector2};
        let params = LgssmParams::<2, 1>::new(
            Matrix2::new(0.95, 0.4, -0.1, 0.8),
            SMatrix::<Scalar, 1, 2>::new(1.0, 0.3),
            Matrix2::new(0.5, 0.1, 0.1, 0.3),
            SMatrix::<Scalar, 1, 1>::new(0.2),
            Vector2::zeros(),
            Matrix2::identity(),
        )
        .unwrap();
        let mut kf = KalmanFilter::new(params);
        let mut rng = crate::rv::Prng::seed_from(31);
        for _ in 0..200 {
            kf.step(&ObsVec::<1>::new(rng.normal(0.0, 2.0))).unwrap();
            let cov = kf.posterior().unwrap().cov;
            assert_eq!((cov - cov.transpose()).amax(), 0.0, "exactly symmetric");
            let eig = cov.symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l > -1e-10), "eigenvalues {eig:?}");
        }
    }

    #[test]
    fn kalman_detects_a_singular_innovation_covariance() {
        // C = 0 and R = 0 make the predicted observation exactly constant.
        let mut kf = KalmanFilter::new(LgssmParams::scalar(0.9, 0.0, 1.0, 0.0, 0.0, 1.0).unwrap());
        assert!(matches!(
            kf.step(&ObsVec::<1>::new(0.0)),
            Err(Error::SingularInnovationCovariance { step: 0 })
        ));
    }

    fn two_state_params() -> HmmParams {
        HmmParams::new(
            DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.2, 0.8]),
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.4, 0.6]),
            DVector::from_row_slice(&[0.6, 0.4]),
        )
        .unwrap()
    }

    #[test]
    fn hmm_params_validation() {
        // rows must sum to one
        assert!(matches!(
            HmmParams::new(
                DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.8]),
                DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.4, 0.6]),
                DVector::from_row_slice(&[0.6, 0.4]),
            ),
            Err(Error::InvalidParams(_))
        ));
        // shapes must agree
        assert!(matches!(
            HmmParams::new(
                DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.2, 0.8]),
                DMatrix::from_row_slice(1, 2, &[0.9, 0.1]),
                DVector::from_row_slice(&[0.6, 0.4]),
            ),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            HmmParams::new(
                DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.2, 0.8]),
                DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.4, 0.6]),
                DVector::from_row_slice(&[1.0]),
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn hmm_first_step_matches_hand_arithmetic() {
        // P(y0 = symbol 0) = 0.6 * 0.9 + 0.4 * 0.4 = 0.7;
        // posterior = (0.54, 0.16) / 0.7.
        let mut hf = HmmFilter::new(two_state_params());
        let log_cl = hf.step(0).unwrap();
        assert_relative_eq!(log_cl, (0.7 as Scalar).ln(), epsilon = 1e-14);
        let b = hf.belief().unwrap().0;
        assert_relative_eq!(b[0], 0.54 / 0.7, epsilon = 1e-14);
        assert_relative_eq!(b[1], 0.16 / 0.7, epsilon = 1e-14);
    }

    #[test]
    fn hmm_total_log_likelihood_matches_path_enumeration() {
        // Brute force: sum the joint probability over all 2^3 hidden paths.
        let params = two_state_params();
        let obs = [0usize, 1, 0];
        let mut brute = 0.0 as Scalar;
        for s0 in 0..2 {
            for s1 in 0..2 {
                for s2 in 0..2 {
                    brute += params.initial()[s0]
                        * params.emission()[(s0, obs[0])]
                        * params.transition()[(s0, s1)]
                        * params.emission()[(s1, obs[1])]
                        * params.transition()[(s1, s2)]
                        * params.emission()[(s2, obs[2])];
                }
            }
        }
        let mut hf = HmmFilter::new(params);
        for &y in &obs {
            hf.step(y).unwrap();
        }
        assert_relative_eq!(hf.total_log_likelihood(), brute.ln(), epsilon = 1e-12);
    }

    #[test]
    fn hmm_beliefs_stay_on_the_simplex() {
        let mut hf = HmmFilter::new(two_state_params());
        let mut rng = crate::rv::Prng::seed_from(12);
        for _ in 0..500 {
            let y = usize::from(rng.uniform_01() > 0.6);
            hf.step(y).unwrap();
            let b = hf.belief().unwrap().0;
            assert!((b.iter().sum::<Scalar>() - 1.0).abs() < 1e-12);
            assert!(b.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn hmm_rejects_impossible_and_unknown_symbols() {
        // both states emit only symbol 0
        let params = HmmParams::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        let mut hf = HmmFilter::new(params);
        assert!(matches!(
            hf.step(1),
            Err(Error::ZeroLikelihoodObservation { symbol: 1, step: 0 })
        ));
        let mut hf2 = HmmFilter::new(two_state_params());
        assert!(matches!(
            hf2.step(7),
            Err(Error::InvalidSymbol {
                symbol: 7,
                n_symbols: 2
            })
        ));
    }
}
