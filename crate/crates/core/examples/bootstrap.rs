//! BCa bootstrap intervals next to the guaranteed band bounds.

use retdist::band::{fit_band, FitOptions};
use retdist::bounds::parameter_bounds;
use retdist::envs::{chain_behavior_policy, chain_eval_policy, chain_pomdp, generate_dataset};
use retdist::{bca_bounds, Parameter};

fn main() -> retdist::Result<()> {
    let env = chain_pomdp(3, 0.1)?;
    let pi = chain_eval_policy();
    let data = generate_dataset(&env, &[chain_behavior_policy()], 500, &pi, 1.0, 5)?;
    let band = fit_band(&data, &FitOptions { delta: 0.1, seed: 5, ..FitOptions::default() })?.band;

    println!("{:<10} {:>21} {:>21}", "parameter", "BCa (approximate)", "band (guaranteed)");
    for p in [Parameter::Mean, Parameter::MEDIAN, Parameter::Variance, Parameter::Cvar(0.1)] {
        let b = bca_bounds(&data, |f| p.evaluate(f), 0.1, 2_000, 5)?;
        let (lo, hi) = parameter_bounds(&band, p)?;
        println!("{p:<10} [{:>8.4}, {:>8.4}] [{lo:>8.4}, {hi:>8.4}]", b.lower, b.upper);
    }
    Ok(())
}
