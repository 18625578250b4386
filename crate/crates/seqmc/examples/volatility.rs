//! Minimal end-to-end run: simulate a stochastic-volatility series, then
//! track it with a bootstrap particle filter and print the running
//! posterior-mean estimate next to the latent state that produced the data.

use seqmc::filter::{BootstrapFilter, ParticleFilter, TestFunction};
use seqmc::models::{simulate, SvolModel, SvolParams};
use seqmc::nalgebra::DMatrix;
use seqmc::resample::{ResamplePolicy, ResampleScheme, ResampleTrigger};
use seqmc::rv::Prng;

fn main() -> seqmc::Result<()> {
    let model = SvolModel::new(SvolParams::new(0.91, 0.5, 1.0)?)?;

    // Draw 31 observations (time 0..=30) from the model itself.
    let (states, observations) = simulate(&model, 30, &mut Prng::seed_from(7));

    // Resample with the systematic scheme whenever the effective sample size
    // drops below half the particle count.
    let policy = ResamplePolicy::new(ResampleScheme::Systematic, ResampleTrigger::EssBelow(0.5))?;
    let mut filter = BootstrapFilter::<_, 1, 1>::new(model, 2000, policy)?;

    let mean: &TestFunction<1> = &|x| DMatrix::from_element(1, 1, x[0]);
    let mut rng = Prng::seed_from(42);

    println!("t, latent_state, posterior_mean, log_cond_like");
    for (t, y) in observations.iter().enumerate() {
        filter.filter(y, &[mean], &mut rng)?;
        println!(
            "{t}, {}, {}, {}",
            states[t][0],
            filter.expectations()?[0][(0, 0)],
            filter.log_cond_like()?,
        );
    }
    println!(
        "# total log-likelihood estimate: {}",
        filter.total_log_likelihood()
    );
    Ok(())
}
