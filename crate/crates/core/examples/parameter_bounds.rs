//! Simultaneous bounds on several parameters from one band, and the
//! grid-search fallback for a functional without a closed form.

use retdist::band::{fit_band, FitOptions};
use retdist::bounds::{generic_bounds, parameter_bounds};
use retdist::envs::{chain_behavior_policy, chain_eval_policy, chain_pomdp, generate_dataset};
use retdist::oracle::{enumerate_return_cdf, true_parameter};
use retdist::Parameter;

fn main() -> retdist::Result<()> {
    let env = chain_pomdp(3, 0.1)?;
    let pi = chain_eval_policy();
    let truth = enumerate_return_cdf(&env, &pi, 1.0)?;
    let data = generate_dataset(&env, &[chain_behavior_policy()], 20_000, &pi, 1.0, 11)?;
    let band = fit_band(&data, &FitOptions { delta: 0.05, seed: 11, ..FitOptions::default() })?.band;

    println!("all intervals hold jointly with probability >= {}", 1.0 - band.delta());
    let params = [
        Parameter::Mean,
        Parameter::MEDIAN,
        Parameter::Quantile(0.9),
        Parameter::Variance,
        Parameter::Cvar(0.1),
        Parameter::InterQuantile(0.25, 0.75),
    ];
    for p in params {
        let (lo, hi) = parameter_bounds(&band, p)?;
        println!("  {p:<14} [{lo:>8.4}, {hi:>8.4}]  truth {:>8.4}", true_parameter(&truth, p)?);
    }

    // differential entropy of the smoothest in-band CDF; the discrete plug-in is a different quantity
    println!("  {:<14} [    -inf, {:>8.4}]", Parameter::Entropy, parameter_bounds(&band, Parameter::Entropy)?.1);

    // P(G > 3) has no dedicated routine; search CDFs inside the band instead
    let tail = |f: &retdist::StepCdf| Some(1.0 - f.eval(3.0));
    let s = generic_bounds(&band, tail, 256, 128, 0);
    println!("\nP(G > 3) in [{:.4}, {:.4}] (search, guaranteed: {}), truth {:.4}", s.lower, s.upper, s.guaranteed, 1.0 - truth.eval(3.0));
    Ok(())
}
