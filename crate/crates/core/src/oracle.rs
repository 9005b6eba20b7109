//! Ground truth: exact return distributions by trajectory enumeration, the
//! analytic return distribution of the recommender, and brute-force search
//! over CDFs inside a band.

use rand::Rng;
use rayon::prelude::*;

use crate::band::ConfidenceBand;
use crate::bounds::{band_grid, clamp_into_band};
use crate::cdf::{merge_points, StepCdf};
use crate::envs::{PomdpSpec, Recommender, TabularPolicy};
use crate::error::{Error, Result};
use crate::numeric::substream;
use crate::plugin::Parameter;

/// Default cap on enumerated trajectories.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Branches with probability below this are dropped.
const PRUNE_BELOW: f64 = 1e-300;

/// Exact return CDF of `pi` on `spec` with discount `gamma`.
///
/// Evaluation-side observations are summed out per state, so each branch is
/// a `(state, action, next state)` triple. Returns are accumulated front to
/// back exactly as in [`crate::envs::Trajectory::discounted_return`], so
/// simulated returns coincide bit for bit with the enumerated support.
pub fn enumerate_return_cdf(spec: &PomdpSpec, pi: &TabularPolicy, gamma: f64) -> Result<StepCdf> {
    enumerate_return_cdf_limited(spec, pi, gamma, ENUMERATION_LIMIT)
}

/// [`enumerate_return_cdf`] with an explicit trajectory limit.
pub fn enumerate_return_cdf_limited(spec: &PomdpSpec, pi: &TabularPolicy, gamma: f64, limit: u64) -> Result<StepCdf> {
    spec.validate()?;
    if pi.num_observations() != spec.obs_eval[0].len() {
        return Err(Error::invalid("evaluation policy shape does not match the specification"));
    }
    let action_probs: Vec<Vec<f64>> = (0..spec.num_states()).map(|s| spec.state_action_probs(pi, s)).collect();
    let mut atoms = Vec::new();
    let mut count = 0u64;
    struct Frame {
        state: usize,
        depth: usize,
        g: f64,
        discount: f64,
        prob: f64,
    }
    let mut stack: Vec<Frame> = spec
        .start
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= PRUNE_BELOW)
        .map(|(s, &p)| Frame { state: s, depth: 0, g: 0.0, discount: 1.0, prob: p })
        .collect();
    while let Some(f) = stack.pop() {
        if f.depth == spec.horizon {
            count += 1;
            if count > limit {
                return Err(Error::EnumerationTooLarge { limit });
            }
            atoms.push((f.g, f.prob));
            continue;
        }
        for (a, &pa) in action_probs[f.state].iter().enumerate() {
            let pa = f.prob * pa;
            if pa < PRUNE_BELOW {
                continue;
            }
            let g = f.g + f.discount * spec.reward[f.state][a];
            for (s2, &pt) in spec.transition[f.state][a].iter().enumerate() {
                let p = pa * pt;
                if p >= PRUNE_BELOW {
                    stack.push(Frame { state: s2, depth: f.depth + 1, g, discount: f.discount * gamma, prob: p });
                }
            }
        }
    }
    if atoms.is_empty() {
        return Err(Error::NoSamples);
    }
    // group by return; ties merge in sorted order so the result does not
    // depend on the traversal order
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = crate::numeric::sum(atoms.iter().map(|a| a.1));
    let scaled: Vec<(f64, f64)> = atoms.into_iter().map(|(g, p)| (g, p / total)).collect();
    Ok(StepCdf::from_sorted_atoms(&scaled, 1.0, true))
}

/// Exact value of `parameter` on a normalized step CDF.
pub fn true_parameter(cdf: &StepCdf, parameter: Parameter) -> Result<f64> {
    parameter.evaluate(cdf)
}

/// Finite mixture of uniform distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfUniforms {
    /// `(weight, lo, hi)` with weights summing to one.
    pub components: Vec<(f64, f64, f64)>,
}

impl MixtureOfUniforms {
    pub fn cdf(&self, x: f64) -> f64 {
        crate::numeric::sum(self.components.iter().map(|&(w, lo, hi)| w * ((x - lo) / (hi - lo)).clamp(0.0, 1.0)))
    }

    /// Component endpoints, where the CDF changes slope.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.components.iter().flat_map(|&(_, lo, hi)| [lo, hi]).collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn mean(&self) -> f64 {
        crate::numeric::sum(self.components.iter().map(|&(w, lo, hi)| w * 0.5 * (lo + hi)))
    }
}

/// Return distribution of `pi` on the recommender in `episode`.
pub fn recommender_return_distribution(env: &Recommender, pi: &TabularPolicy, episode: u64) -> MixtureOfUniforms {
    let components = pi
        .probs(0)
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| {
            let m = env.mean_reward(k, episode);
            (w, m - env.noise, m + env.noise)
        })
        .collect();
    MixtureOfUniforms { components }
}

/// Random in-band step CDF on `grid`: sorted uniforms or a few random jumps.
fn random_levels<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut levels: Vec<f64> = match rng.random_range(0..3) {
        0 => (0..m).map(|_| rng.random::<f64>()).collect(),
        1 => {
            let jumps = rng.random_range(1..=4);
            let mut cut: Vec<(usize, f64)> = (0..jumps).map(|_| (rng.random_range(0..m), rng.random::<f64>())).collect();
            cut.sort_by_key(|c| c.0);
            let mut v = vec![0.0; m];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = cut.iter().filter(|c| c.0 <= i).map(|c| c.1).fold(0.0, f64::max);
            }
            v
        }
        _ => {
            let y = rng.random::<f64>();
            let j = rng.random_range(0..m);
            (0..m).map(|i| if i < j { y * rng.random::<f64>() } else { y + (1.0 - y) * rng.random::<f64>() }).collect()
        }
    };
    levels.sort_by(f64::total_cmp);
    levels
}

/// `(min, max)` of `parameter` over `num_samples` random step CDFs inside
/// the band. Sample `i` uses substream `i` of `seed`.
pub fn bruteforce_bound(
    band: &ConfidenceBand,
    parameter: Parameter,
    num_samples: usize,
    grid_size: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    parameter.validate()?;
    let grid = band_grid(band, grid_size);
    let values: Vec<f64> = (0..num_samples)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = substream(seed, i as u64);
            let levels = random_levels(grid.len(), &mut rng);
            parameter.evaluate(&clamp_into_band(band, &grid, &levels)).ok()
        })
        .collect();
    if values.is_empty() {
        return Err(Error::NoSamples);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Random continuous piecewise-linear CDF inside the band through
/// `extra_points` additional knots, as `(x, F(x))` vertices.
pub fn sample_smooth_in_band<R: Rng>(band: &ConfidenceBand, extra_points: usize, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    let (g_min, g_max) = (band.g_min(), band.g_max());
    if band.lower_at(g_min) > 0.0 {
        return Err(Error::ForcedPointMass { at: g_min });
    }
    let grid: Vec<f64> = (1..=extra_points).map(|k| g_min + (g_max - g_min) * k as f64 / (extra_points + 1) as f64).collect();
    let xs: Vec<f64> = merge_points(&band.breakpoints(), &grid).into_iter().filter(|&x| x > g_min && x < g_max).collect();
    let mut path = vec![(g_min, 0.0)];
    let mut y = 0.0f64;
    for x in xs {
        let lo = band.lower_at(x).max(y);
        let hi = band.upper_at(x);
        if lo > hi {
            return Err(Error::ForcedPointMass { at: x });
        }
        // bias toward small steps so samples are not all hugging F+
        let u: f64 = rng.random::<f64>().powi(2);
        y = lo + u * (hi - lo);
        path.push((x, y));
    }
    if band.upper_at(g_max) < 1.0 {
        return Err(Error::ForcedPointMass { at: g_max });
    }
    path.push((g_max, 1.0));
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_eval_policy, chain_pomdp, recommender};

    #[test]
    fn chain_enumeration_is_normalized_and_order_free() {
        for depth in 1..=4 {
            let spec = chain_pomdp(depth, 0.1).unwrap();
            let f = enumerate_return_cdf(&spec, &chain_eval_policy(), 1.0).unwrap();
            assert_eq!(f.terminal(), 1.0);
            let total: f64 = f.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_spec_gives_point_mass() {
        let mut spec = chain_pomdp(2, 0.0).unwrap();
        spec.start = vec![1.0, 0.0, 0.0, 0.0];
        let pi = TabularPolicy::new(vec![vec![1.0, 0.0]; 4]).unwrap();
        let f = enumerate_return_cdf(&spec, &pi, 1.0).unwrap();
        // s0 -a0-> s1 -a0-> s0: rewards 0 + 0.5
        assert_eq!(f.breakpoints(), &[0.5]);
        assert_eq!(f.values(), &[1.0]);
    }

    #[test]
    fn uniform_policy_single_step() {
        let spec = PomdpSpec {
            transition: vec![vec![vec![1.0], vec![1.0]]],
            reward: vec![vec![0.0, 1.0]],
            obs_behavior: vec![vec![1.0]],
            obs_eval: vec![vec![1.0]],
            start: vec![1.0],
            horizon: 1,
        };
        let f = enumerate_return_cdf(&spec, &TabularPolicy::uniform(1, 2), 1.0).unwrap();
        assert_eq!(f.eval(0.0), 0.5);
        assert_eq!(f.eval(1.0), 1.0);
    }

    #[test]
    fn enumeration_guard() {
        let spec = chain_pomdp(6, 0.5).unwrap();
        assert_eq!(
            enumerate_return_cdf_limited(&spec, &chain_eval_policy(), 1.0, 100),
            Err(Error::EnumerationTooLarge { limit: 100 })
        );
    }

    #[test]
    fn true_parameters_on_simple_distributions() {
        assert_eq!(true_parameter(&StepCdf::point_mass(3.0), Parameter::Mean).unwrap(), 3.0);
        let two = StepCdf::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(true_parameter(&two, Parameter::Variance).unwrap(), 0.25);
        let four = StepCdf::from_atoms(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]).unwrap();
        assert_eq!(true_parameter(&four, Parameter::Cvar(0.5)).unwrap(), 1.5);
    }

    #[test]
    fn recommender_distribution_is_a_cdf() {
        let env = recommender(5, 1.0).unwrap();
        let mix = recommender_return_distribution(&env, &env.eval_policy(), 10);
        let (lo, hi) = crate::envs::Environment::return_bounds(&env, 1.0);
        assert_eq!(mix.cdf(lo), 0.0);
        assert!((mix.cdf(hi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_on_degenerate_band_equals_plugin() {
        let f = StepCdf::from_atoms(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]).unwrap();
        let band = ConfidenceBand::degenerate(&f, 0.0, 5.0).unwrap();
        let (lo, hi) = bruteforce_bound(&band, Parameter::Mean, 200, 64, 0).unwrap();
        assert!((lo - 2.5).abs() < 1e-12 && (hi - 2.5).abs() < 1e-12);
    }
}
