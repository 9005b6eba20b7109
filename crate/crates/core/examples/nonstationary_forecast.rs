//! Forecasting next episode's return CDF on a drifting recommender.
//!
//! A stationary band pools all past episodes and lags behind the drift; the
//! forecast band regresses per-episode estimates on a Fourier basis and
//! extrapolates one episode ahead.

use retdist::band::{fit_band, key_point_count, FitOptions, KeyPointPlan};
use retdist::conc::CiMethod;
use retdist::envs::{generate_dataset, mixture_policy, recommender};
use retdist::nonstat::forecast_band;
use retdist::oracle::recommender_return_distribution;

fn main() -> retdist::Result<()> {
    let (l, lead, delta) = (1_000, 1, 0.1);
    for speed in [0.0, 0.5, 1.0] {
        let env = recommender(5, speed)?;
        let pi = env.eval_policy();
        let beta = mixture_policy(&pi, 0.5)?;
        let data = generate_dataset(&env, &[beta], l, &pi, 1.0, 9)?;
        let future = recommender_return_distribution(&env, &pi, (l + lead) as u64);

        let stationary = fit_band(&data, &FitOptions { delta, seed: 9, ..FitOptions::default() })?.band;
        // the method is only used for the plan's bookkeeping; intervals come from the bootstrap
        let plan = KeyPointPlan::uniform(key_point_count(l), data.g_min(), data.g_max(), delta, CiMethod::hoeffding(1.0)?);
        let forecast = forecast_band(&data, &plan, 3, lead, delta, 2_000, 9)?;

        let kinks = future.kinks();
        println!(
            "speed {speed}: future mean {:.3}; stationary band covers {}; forecast band covers {} (area {:.3})",
            future.mean(),
            stationary.contains_fn(|x| future.cdf(x), &kinks, 1e-12),
            forecast.contains_fn(|x| future.cdf(x), &kinks, 1e-12),
            forecast.area()
        );
    }
    Ok(())
}
