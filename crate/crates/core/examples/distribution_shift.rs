//! Widening a band to cover a deployment domain within KS distance epsilon.

use retdist::band::{fit_band, shift_band, FitOptions};
use retdist::bounds::mean_bounds;
use retdist::envs::{chain_behavior_policy, chain_eval_policy, chain_pomdp, generate_dataset};
use retdist::oracle::enumerate_return_cdf;

fn main() -> retdist::Result<()> {
    let pi = chain_eval_policy();
    let logged = chain_pomdp(3, 0.1)?;
    // the deployment domain has noisier observations for the evaluation policy
    let deployed = chain_pomdp(3, 0.3)?;
    let f1 = enumerate_return_cdf(&logged, &pi, 1.0)?;
    let f2 = enumerate_return_cdf(&deployed, &pi, 1.0)?;
    let ks = f1.sup_distance(&f2);
    println!("KS distance between domains: {ks:.4}");

    let data = generate_dataset(&logged, &[chain_behavior_policy()], 5_000, &pi, 1.0, 2)?;
    let band = fit_band(&data, &FitOptions { delta: 0.05, seed: 2, ..FitOptions::default() })?.band;
    for eps in [0.0, ks, 0.1] {
        let wide = shift_band(&band, eps)?;
        let (lo, hi) = mean_bounds(&wide);
        println!("eps {eps:.4}: covers deployed CDF {:<5}  mean in [{lo:.3}, {hi:.3}]", wide.contains(&f2));
    }
    Ok(())
}
