//! Continuous-state gridworld logged by two behavior policies.

use retdist::band::{fit_band, FitOptions};
use retdist::bounds::parameter_bounds;
use retdist::envs::{generate_dataset, gridworld, mixture_policy, on_policy_returns, Environment};
use retdist::{estimate_cdf_wis, Parameter, StepCdf};

fn main() -> retdist::Result<()> {
    let env = gridworld();
    let gamma = 0.99;
    let pi = env.goal_seeking_policy(3.0);
    let behaviors = [mixture_policy(&pi, 0.5)?, mixture_policy(&pi, 0.75)?];
    println!("returns lie in {:?}", env.return_bounds(gamma));

    let data = generate_dataset(&env, &behaviors, 20_000, &pi, gamma, 4)?;
    let wis = estimate_cdf_wis(&data)?;
    // Monte Carlo reference from on-policy rollouts
    let reference = StepCdf::from_atoms(&on_policy_returns(&env, &pi, 100_000, gamma, 5).into_iter().map(|g| (g, 1e-5)).collect::<Vec<_>>())?;
    println!("sup |WIS - on-policy| = {:.4}", wis.sup_distance(&reference));

    let band = fit_band(&data, &FitOptions { delta: 0.05, seed: 4, ..FitOptions::default() })?.band;
    for p in [Parameter::Mean, Parameter::MEDIAN, Parameter::Cvar(0.25)] {
        let (lo, hi) = parameter_bounds(&band, p)?;
        println!("{p:<10} estimate {:>7.3}  bounds [{lo:>7.3}, {hi:>7.3}]  on-policy {:>7.3}", p.evaluate(&wis)?, p.evaluate(&reference)?);
    }
    Ok(())
}
