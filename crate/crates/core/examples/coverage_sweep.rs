//! Monte Carlo coverage of the band and of the bounds it implies.

use rayon::prelude::*;
use retdist::band::{fit_band, FitOptions};
use retdist::bounds::parameter_bounds;
use retdist::envs::{chain_behavior_policy, chain_eval_policy, chain_pomdp, generate_dataset};
use retdist::oracle::{enumerate_return_cdf, true_parameter};
use retdist::Parameter;

fn main() -> retdist::Result<()> {
    let env = chain_pomdp(3, 0.1)?;
    let (pi, beta) = (chain_eval_policy(), chain_behavior_policy());
    let truth = enumerate_return_cdf(&env, &pi, 1.0)?;
    let params = [Parameter::Mean, Parameter::MEDIAN, Parameter::Variance, Parameter::Cvar(0.1)];
    let targets: Vec<f64> = params.iter().map(|&p| true_parameter(&truth, p)).collect::<retdist::Result<_>>()?;
    let (delta, trials) = (0.1, 200u64);

    println!("{:>6} {:>10} {:>10} {:>12}", "n", "band fail", "joint fail", "mean width");
    for n in [200, 1_000, 5_000] {
        let rows: Vec<(bool, bool, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let seed = (n as u64) << 20 | t;
                let data = generate_dataset(&env, &[beta.clone()], n, &pi, 1.0, seed)?;
                let band = fit_band(&data, &FitOptions { delta, seed, ..FitOptions::default() })?.band;
                let mut joint = false;
                let mut width = 0.0;
                for (k, (&p, &v)) in params.iter().zip(&targets).enumerate() {
                    let (lo, hi) = parameter_bounds(&band, p)?;
                    joint |= v < lo || v > hi;
                    if k == 0 {
                        width = hi - lo;
                    }
                }
                Ok((!band.contains(&truth), joint, width))
            })
            .collect::<retdist::Result<_>>()?;
        let rate = |f: fn(&(bool, bool, f64)) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / trials as f64;
        let width = rows.iter().map(|r| r.2).sum::<f64>() / trials as f64;
        println!("{n:>6} {:>10.3} {:>10.3} {width:>12.4}", rate(|r| r.0), rate(|r| r.1));
    }
    println!("(failure rates should stay below delta = {delta})");
    Ok(())
}
