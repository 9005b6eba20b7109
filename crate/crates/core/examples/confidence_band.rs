//! Fit a high-confidence band and check it against the true CDF.

use retdist::band::{fit_band, FitOptions, PlanObjective};
use retdist::bounds::Side;
use retdist::envs::{chain_behavior_policy, chain_eval_policy, chain_pomdp, generate_dataset};
use retdist::oracle::enumerate_return_cdf;

fn main() -> retdist::Result<()> {
    let env = chain_pomdp(3, 0.1)?;
    let pi = chain_eval_policy();
    let truth = enumerate_return_cdf(&env, &pi, 1.0)?;
    let data = generate_dataset(&env, &[chain_behavior_policy()], 5_000, &pi, 1.0, 1)?;

    for objective in [PlanObjective::Area, PlanObjective::Specialize(retdist::Parameter::Cvar(0.1), Side::Lower)] {
        let fit = fit_band(&data, &FitOptions { delta: 0.05, objective, seed: 3, ..FitOptions::default() })?;
        println!(
            "{objective:?}: K = {}, cap = {:.3}, train/eval = {}/{}, area = {:.4}, contains truth: {}",
            fit.plan.len(),
            fit.plan.ci_method.cap,
            fit.train_size,
            fit.eval_size,
            fit.band.area(),
            fit.band.contains(&truth)
        );
    }

    let fit = fit_band(&data, &FitOptions { delta: 0.05, seed: 3, ..FitOptions::default() })?;
    println!("\n{:>6} {:>8} {:>8} {:>8}", "nu", "F-", "F", "F+");
    for i in 0..=12 {
        let nu = 0.5 * i as f64;
        println!("{nu:>6.2} {:>8.4} {:>8.4} {:>8.4}", fit.band.lower_at(nu), truth.eval(nu), fit.band.upper_at(nu));
    }
    Ok(())
}
