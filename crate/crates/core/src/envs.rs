//! Reference environments, tabular policies and logged-data generation.
//!
//! Every environment exposes two observation channels: the behavior policy
//! acts on `o` and the evaluation policy on `õ`. Both are discrete indices.
//! Episodes are numbered from 1 and episode `e` draws all of its randomness
//! from substream `e` of the generation seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::substream;
use crate::returns::{ReturnDataset, ReturnSample};

const PROB_TOLERANCE: f64 = 1e-12;

/// Action probabilities indexed by `[observation][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    table: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let a = table.first().map(|r| r.len()).unwrap_or(0);
        if a == 0 {
            return Err(Error::invalid("policy needs at least one observation and one action"));
        }
        for (o, row) in table.iter().enumerate() {
            if row.len() != a {
                return Err(Error::invalid(format!("policy row {o} has {} actions, expected {a}", row.len())));
            }
            if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(Error::invalid(format!("policy row {o} has a negative or non-finite probability")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOLERANCE * a as f64 {
                return Err(Error::invalid(format!("policy row {o} sums to {s}")));
            }
        }
        Ok(Self { table })
    }

    pub fn uniform(num_observations: usize, num_actions: usize) -> Self {
        Self { table: vec![vec![1.0 / num_actions as f64; num_actions]; num_observations] }
    }

    /// Same action distribution for every observation.
    pub fn constant(num_observations: usize, probs: &[f64]) -> Result<Self> {
        Self::new(vec![probs.to_vec(); num_observations])
    }

    pub fn num_observations(&self) -> usize {
        self.table.len()
    }

    pub fn num_actions(&self) -> usize {
        self.table[0].len()
    }

    pub fn prob(&self, obs: usize, action: usize) -> f64 {
        self.table[obs][action]
    }

    pub fn probs(&self, obs: usize) -> &[f64] {
        &self.table[obs]
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng>(&self, obs: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.table[obs];
        let mut acc = 0.0;
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
    }
}

/// `alpha * pi + (1 - alpha) * uniform`.
pub fn mixture_policy(pi: &TabularPolicy, alpha: f64) -> Result<TabularPolicy> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("mixture weight must lie in [0, 1], got {alpha}")));
    }
    let u = 1.0 / pi.num_actions() as f64;
    let table = pi
        .table
        .iter()
        .map(|row| row.iter().map(|&p| alpha * p + (1.0 - alpha) * u).collect())
        .collect();
    Ok(TabularPolicy { table })
}

/// An episodic environment with two observation channels.
pub trait Environment: Sync {
    type State: Clone + Send;

    fn num_actions(&self) -> usize;
    /// Size of the behavior-side observation space.
    fn num_observations(&self) -> usize;
    /// Size of the evaluation-side observation space.
    fn num_eval_observations(&self) -> usize;
    fn horizon(&self) -> usize;
    /// `[g_min, g_max]` containing every discounted return.
    fn return_bounds(&self, gamma: f64) -> (f64, f64);
    fn reset<R: Rng>(&self, episode: u64, rng: &mut R) -> Self::State;
    /// `(o, õ)`.
    fn observe<R: Rng>(&self, state: &Self::State, rng: &mut R) -> (usize, usize);
    /// Reward and next state; `None` ends the episode early.
    fn step<R: Rng>(&self, state: &Self::State, action: usize, episode: u64, rng: &mut R) -> (f64, Option<Self::State>);
}

/// Return of `horizon` steps that each pay `reward`, accumulated exactly
/// as in [`Trajectory::discounted_return`].
pub fn constant_return(reward: f64, gamma: f64, horizon: usize) -> f64 {
    let (mut g, mut d) = (0.0, 1.0);
    for _ in 0..horizon {
        g += d * reward;
        d *= gamma;
    }
    g
}

/// One logged episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode: u64,
    pub behavior_obs: Vec<usize>,
    pub eval_obs: Vec<usize>,
    pub actions: Vec<usize>,
    pub beta_probs: Vec<f64>,
    pub pi_probs: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    /// `Σ gamma^t r_t`, accumulated front to back.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut d = 1.0;
        for &r in &self.rewards {
            g += d * r;
            d *= gamma;
        }
        g
    }

    /// `Π pi(a_t|õ_t) / beta(a_t|o_t)`.
    pub fn importance_ratio(&self) -> f64 {
        self.pi_probs.iter().zip(&self.beta_probs).fold(1.0, |acc, (p, b)| acc * (p / b))
    }
}

fn check_policy_shapes<E: Environment>(env: &E, behaviors: &[TabularPolicy], pi: &TabularPolicy) -> Result<()> {
    if behaviors.is_empty() {
        return Err(Error::invalid("need at least one behavior policy"));
    }
    for b in behaviors {
        if b.num_observations() != env.num_observations() || b.num_actions() != env.num_actions() {
            return Err(Error::invalid("behavior policy shape does not match the environment"));
        }
    }
    if pi.num_observations() != env.num_eval_observations() || pi.num_actions() != env.num_actions() {
        return Err(Error::invalid("evaluation policy shape does not match the environment"));
    }
    Ok(())
}

/// Rolls out one episode with `behavior`, recording `pi`'s probabilities.
pub fn rollout<E: Environment>(
    env: &E,
    behavior: &TabularPolicy,
    pi: &TabularPolicy,
    episode: u64,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = substream(seed, episode);
    let mut state = env.reset(episode, &mut rng);
    let mut t = Trajectory {
        episode,
        behavior_obs: Vec::new(),
        eval_obs: Vec::new(),
        actions: Vec::new(),
        beta_probs: Vec::new(),
        pi_probs: Vec::new(),
        rewards: Vec::new(),
    };
    for step in 0..env.horizon() {
        let (o, oe) = env.observe(&state, &mut rng);
        let (brow, prow) = (behavior.probs(o), pi.probs(oe));
        if brow.iter().zip(prow).any(|(&b, &p)| p > 0.0 && b <= 0.0) {
            return Err(Error::SupportViolation { episode, step });
        }
        let a = behavior.sample(o, &mut rng);
        let (r, next) = env.step(&state, a, episode, &mut rng);
        t.behavior_obs.push(o);
        t.eval_obs.push(oe);
        t.actions.push(a);
        t.beta_probs.push(brow[a]);
        t.pi_probs.push(prow[a]);
        t.rewards.push(r);
        match next {
            Some(s) => state = s,
            None => break,
        }
    }
    Ok(t)
}

/// Logs `n` episodes, assigning behavior policies round-robin.
pub fn generate_trajectories<E: Environment>(
    env: &E,
    behaviors: &[TabularPolicy],
    n: usize,
    pi: &TabularPolicy,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    check_policy_shapes(env, behaviors, pi)?;
    (1..=n as u64)
        .into_par_iter()
        .map(|e| rollout(env, &behaviors[(e as usize - 1) % behaviors.len()], pi, e, seed))
        .collect()
}

/// Reduces trajectories to `(G, rho, episode)` samples.
pub fn dataset_from_trajectories(trajectories: &[Trajectory], gamma: f64, g_min: f64, g_max: f64) -> Result<ReturnDataset> {
    let samples = trajectories
        .iter()
        .map(|t| ReturnSample::new(t.discounted_return(gamma), t.importance_ratio(), t.episode))
        .collect();
    ReturnDataset::new(samples, g_min, g_max)
}

/// Logs `n` episodes and reduces them to a return dataset.
pub fn generate_dataset<E: Environment>(
    env: &E,
    behaviors: &[TabularPolicy],
    n: usize,
    pi: &TabularPolicy,
    gamma: f64,
    seed: u64,
) -> Result<ReturnDataset> {
    let trajectories = generate_trajectories(env, behaviors, n, pi, seed)?;
    let (g_min, g_max) = env.return_bounds(gamma);
    dataset_from_trajectories(&trajectories, gamma, g_min, g_max)
}

/// Returns of `n` episodes where `pi` itself acts on `õ`.
pub fn on_policy_returns<E: Environment>(env: &E, pi: &TabularPolicy, n: usize, gamma: f64, seed: u64) -> Vec<f64> {
    (1..=n as u64)
        .into_par_iter()
        .map(|e| {
            let mut rng = substream(seed, e);
            let mut state = env.reset(e, &mut rng);
            let (mut g, mut d) = (0.0, 1.0);
            for _ in 0..env.horizon() {
                let (_, oe) = env.observe(&state, &mut rng);
                let a = pi.sample(oe, &mut rng);
                let (r, next) = env.step(&state, a, e, &mut rng);
                g += d * r;
                d *= gamma;
                match next {
                    Some(s) => state = s,
                    None => break,
                }
            }
            g
        })
        .collect()
}

fn draw_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// A finite partially observable process small enough to enumerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PomdpSpec {
    /// `transition[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    /// Behavior-side observation distribution `[s][o]`.
    pub obs_behavior: Vec<Vec<f64>>,
    /// Evaluation-side observation distribution `[s][õ]`.
    pub obs_eval: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub horizon: usize,
}

impl PomdpSpec {
    pub fn num_states(&self) -> usize {
        self.start.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_states();
        let check = |row: &[f64], what: &str| -> Result<()> {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > PROB_TOLERANCE * row.len().max(1) as f64 {
                return Err(Error::invalid(format!("{what} is not a probability distribution")));
            }
            Ok(())
        };
        check(&self.start, "start distribution")?;
        if self.transition.len() != s || self.reward.len() != s || self.obs_behavior.len() != s || self.obs_eval.len() != s {
            return Err(Error::invalid("per-state tables must have one row per state"));
        }
        let a = self.reward[0].len();
        for st in 0..s {
            if self.transition[st].len() != a || self.reward[st].len() != a {
                return Err(Error::invalid("inconsistent action count"));
            }
            for row in &self.transition[st] {
                if row.len() != s {
                    return Err(Error::invalid("transition rows must cover every state"));
                }
                check(row, "transition row")?;
            }
            check(&self.obs_behavior[st], "behavior observation row")?;
            check(&self.obs_eval[st], "evaluation observation row")?;
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(())
    }

    /// `Σ_õ Ω₂(õ|s) pi(a|õ)`.
    pub fn state_action_probs(&self, pi: &TabularPolicy, state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions()];
        for (oe, &w) in self.obs_eval[state].iter().enumerate() {
            if w > 0.0 {
                for (a, o) in out.iter_mut().enumerate() {
                    *o += w * pi.prob(oe, a);
                }
            }
        }
        out
    }

    fn reward_range(&self) -> (f64, f64) {
        self.reward.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }
}

impl Environment for PomdpSpec {
    type State = usize;

    fn num_actions(&self) -> usize {
        self.reward[0].len()
    }

    fn num_observations(&self) -> usize {
        self.obs_behavior[0].len()
    }

    fn num_eval_observations(&self) -> usize {
        self.obs_eval[0].len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn return_bounds(&self, gamma: f64) -> (f64, f64) {
        let (lo, hi) = self.reward_range();
        let g_min = constant_return(lo.min(0.0), gamma, self.horizon);
        let g_max = constant_return(hi.max(0.0), gamma, self.horizon);
        if g_max > g_min { (g_min, g_max) } else { (g_min, g_min + 1.0) }
    }

    fn reset<R: Rng>(&self, _episode: u64, rng: &mut R) -> usize {
        draw_index(&self.start, rng)
    }

    fn observe<R: Rng>(&self, state: &usize, rng: &mut R) -> (usize, usize) {
        let o = draw_index(&self.obs_behavior[*state], rng);
        let oe = draw_index(&self.obs_eval[*state], rng);
        (o, oe)
    }

    fn step<R: Rng>(&self, state: &usize, action: usize, _episode: u64, rng: &mut R) -> (f64, Option<usize>) {
        let next = draw_index(&self.transition[*state][action], rng);
        (self.reward[*state][action], Some(next))
    }
}

/// Four-state chain with aliased behavior observations (states 1 and 2
/// look identical to the behavior policy) and noisy evaluation-side
/// observations. With probability `noise` a transition goes to a uniformly
/// random state instead of the intended successor.
pub fn chain_pomdp(depth: usize, noise: f64) -> Result<PomdpSpec> {
    if !(1..=6).contains(&depth) {
        return Err(Error::invalid(format!("chain depth must lie in 1..=6, got {depth}")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid(format!("noise must lie in [0, 1], got {noise}")));
    }
    const S: usize = 4;
    let successor = [[1, 2], [0, 3], [3, 1], [2, 0]];
    let transition = (0..S)
        .map(|s| {
            (0..2)
                .map(|a| {
                    let mut row = vec![noise / S as f64; S];
                    row[successor[s][a]] += 1.0 - noise;
                    row
                })
                .collect()
        })
        .collect();
    let reward = vec![vec![0.0, 1.0], vec![0.5, 0.0], vec![1.0, 0.25], vec![0.0, 2.0]];
    let obs_behavior = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let obs_eval = (0..S)
        .map(|s| {
            let mut row = vec![0.05; S];
            row[s] = 0.85;
            row
        })
        .collect();
    let spec = PomdpSpec { transition, reward, obs_behavior, obs_eval, start: vec![0.6, 0.4, 0.0, 0.0], horizon: depth };
    spec.validate()?;
    Ok(spec)
}

/// Evaluation policy for [`chain_pomdp`], indexed by evaluation observation.
pub fn chain_eval_policy() -> TabularPolicy {
    TabularPolicy::new(vec![vec![0.2, 0.8], vec![0.7, 0.3], vec![0.4, 0.6], vec![0.1, 0.9]]).expect("valid table")
}

/// Behavior policy for [`chain_pomdp`], indexed by behavior observation.
pub fn chain_behavior_policy() -> TabularPolicy {
    TabularPolicy::new(vec![vec![0.6, 0.4], vec![0.5, 0.5], vec![0.7, 0.3]]).expect("valid table")
}

/// Continuous 2-D navigation task with grid-cell observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gridworld {
    pub cells_per_side: usize,
    pub step_size: f64,
    pub move_noise: f64,
    pub goal: (f64, f64),
    pub goal_radius: f64,
    pub goal_reward: f64,
    pub step_penalty: f64,
    pub horizon: usize,
}

/// Unit-vector directions of the eight actions: N, NE, E, SE, S, SW, W, NW.
pub const GRID_DIRECTIONS: [(f64, f64); 8] = [
    (0.0, 1.0),
    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (1.0, 0.0),
    (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    (0.0, -1.0),
    (-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    (-1.0, 0.0),
    (-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
];

/// Default [`Gridworld`]: 4×4 observation grid, goal in the north-east
/// corner, horizon 20.
pub fn gridworld() -> Gridworld {
    Gridworld {
        cells_per_side: 4,
        step_size: 0.1,
        move_noise: 0.03,
        goal: (0.9, 0.9),
        goal_radius: 0.1,
        goal_reward: 1.0,
        step_penalty: 0.05,
        horizon: 20,
    }
}

impl Gridworld {
    pub fn cell(&self, (x, y): (f64, f64)) -> usize {
        let m = self.cells_per_side;
        let ix = ((x * m as f64) as usize).min(m - 1);
        let iy = ((y * m as f64) as usize).min(m - 1);
        iy * m + ix
    }

    /// Softmax policy preferring moves toward the goal from each cell's
    /// center, with inverse temperature `beta`.
    pub fn goal_seeking_policy(&self, beta: f64) -> TabularPolicy {
        let m = self.cells_per_side;
        let table = (0..m * m)
            .map(|c| {
                let cx = ((c % m) as f64 + 0.5) / m as f64;
                let cy = ((c / m) as f64 + 0.5) / m as f64;
                let (dx, dy) = (self.goal.0 - cx, self.goal.1 - cy);
                let norm = (dx * dx + dy * dy).sqrt().max(1e-12);
                let scores: Vec<f64> = GRID_DIRECTIONS.iter().map(|&(ux, uy)| beta * (ux * dx + uy * dy) / norm).collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|v| v / z).collect()
            })
            .collect();
        TabularPolicy { table }
    }
}

impl Environment for Gridworld {
    type State = (f64, f64);

    fn num_actions(&self) -> usize {
        8
    }

    fn num_observations(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    fn num_eval_observations(&self) -> usize {
        self.num_observations()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    /// The goal reward is collected at most once, after at least one step.
    fn return_bounds(&self, gamma: f64) -> (f64, f64) {
        (constant_return(-self.step_penalty, gamma, self.horizon).min(0.0), self.goal_reward.max(0.0))
    }

    fn reset<R: Rng>(&self, _episode: u64, rng: &mut R) -> (f64, f64) {
        (rng.random_range(0.0..0.2), rng.random_range(0.0..0.2))
    }

    fn observe<R: Rng>(&self, state: &(f64, f64), _rng: &mut R) -> (usize, usize) {
        let c = self.cell(*state);
        (c, c)
    }

    fn step<R: Rng>(&self, state: &(f64, f64), action: usize, _episode: u64, rng: &mut R) -> (f64, Option<(f64, f64)>) {
        let noise = Normal::new(0.0, self.move_noise).expect("finite sd");
        let (ux, uy) = GRID_DIRECTIONS[action];
        let x = (state.0 + self.step_size * ux + noise.sample(rng)).clamp(0.0, 1.0);
        let y = (state.1 + self.step_size * uy + noise.sample(rng)).clamp(0.0, 1.0);
        let (dx, dy) = (x - self.goal.0, y - self.goal.1);
        if dx * dx + dy * dy <= self.goal_radius * self.goal_radius {
            (self.goal_reward, None)
        } else {
            (-self.step_penalty, Some((x, y)))
        }
    }
}

/// Single-step recommendation task whose item rewards drift sinusoidally.
///
/// Item `k` in episode `i` pays `m_k(i) + U(-noise, noise)` with
/// `m_k(i) = base + amplitude * sin(2π speed i / period + phase + 2π k / items)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommender {
    pub num_items: usize,
    pub speed: f64,
    pub base: f64,
    pub amplitude: f64,
    pub noise: f64,
    pub period: f64,
    pub phase: f64,
}

/// Recommender with `num_items` items drifting at `speed` (0 is stationary).
pub fn recommender(num_items: usize, speed: f64) -> Result<Recommender> {
    if num_items == 0 {
        return Err(Error::invalid("recommender needs at least one item"));
    }
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::invalid(format!("speed must be nonnegative, got {speed}")));
    }
    Ok(Recommender { num_items, speed, base: 0.5, amplitude: 0.2, noise: 0.25, period: 2000.0, phase: 0.0 })
}

impl Recommender {
    /// Same task with the drift started at `phase` radians.
    pub fn with_phase(self, phase: f64) -> Self {
        Self { phase, ..self }
    }

    pub fn mean_reward(&self, item: usize, episode: u64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * item as f64 / self.num_items as f64;
        let t = 2.0 * std::f64::consts::PI * self.speed * episode as f64 / self.period;
        self.base + self.amplitude * (t + self.phase + phase).sin()
    }

    /// Evaluation policy concentrating on the first item.
    pub fn eval_policy(&self) -> TabularPolicy {
        let k = self.num_items;
        let rest = if k > 1 { 0.4 / (k - 1) as f64 } else { 0.0 };
        let mut row = vec![rest; k];
        row[0] = if k > 1 { 0.6 } else { 1.0 };
        TabularPolicy { table: vec![row] }
    }
}

impl Environment for Recommender {
    type State = ();

    fn num_actions(&self) -> usize {
        self.num_items
    }

    fn num_observations(&self) -> usize {
        1
    }

    fn num_eval_observations(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        1
    }

    fn return_bounds(&self, _gamma: f64) -> (f64, f64) {
        let lo = self.base - self.amplitude.abs() - self.noise;
        let hi = self.base + self.amplitude.abs() + self.noise;
        (lo.min(0.0), hi.max(1.0))
    }

    fn reset<R: Rng>(&self, _episode: u64, _rng: &mut R) {}

    fn observe<R: Rng>(&self, _state: &(), _rng: &mut R) -> (usize, usize) {
        (0, 0)
    }

    fn step<R: Rng>(&self, _state: &(), action: usize, episode: u64, rng: &mut R) -> (f64, Option<()>) {
        let r = self.mean_reward(action, episode) + rng.random_range(-self.noise..self.noise);
        (r, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_extremes() {
        let pi = chain_eval_policy();
        assert_eq!(mixture_policy(&pi, 1.0).unwrap(), pi);
        assert_eq!(mixture_policy(&pi, 0.0).unwrap(), TabularPolicy::uniform(4, 2));
        let m = mixture_policy(&pi, 0.75).unwrap();
        for o in 0..4 {
            assert!((m.probs(o).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn on_policy_logging_gives_unit_ratios() {
        let env = recommender(5, 0.0).unwrap();
        let pi = env.eval_policy();
        let d = generate_dataset(&env, &[pi.clone()], 50, &pi, 1.0, 1).unwrap();
        assert!(d.samples().iter().all(|s| s.rho == 1.0));
    }

    #[test]
    fn support_violation_detected() {
        let env = chain_pomdp(2, 0.0).unwrap();
        let beta = TabularPolicy::new(vec![vec![1.0, 0.0]; 3]).unwrap();
        let err = generate_dataset(&env, &[beta], 3, &chain_eval_policy(), 1.0, 0).unwrap_err();
        assert_eq!(err, Error::SupportViolation { episode: 1, step: 0 });
    }

    #[test]
    fn deterministic_chain_returns_are_reward_sums() {
        let env = chain_pomdp(3, 0.0).unwrap();
        let t = generate_trajectories(&env, &[chain_behavior_policy()], 20, &chain_eval_policy(), 4).unwrap();
        for tr in &t {
            assert_eq!(tr.discounted_return(1.0), tr.rewards.iter().sum::<f64>());
            assert_eq!(tr.actions.len(), 3);
        }
    }

    #[test]
    fn generation_is_reproducible_and_round_robin() {
        let env = gridworld();
        let pi = env.goal_seeking_policy(3.0);
        let b1 = mixture_policy(&pi, 0.5).unwrap();
        let b2 = mixture_policy(&pi, 0.75).unwrap();
        let a = generate_trajectories(&env, &[b1.clone(), b2.clone()], 30, &pi, 9).unwrap();
        let b = generate_trajectories(&env, &[b1.clone(), b2], 30, &pi, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].beta_probs[0], b1.prob(a[0].behavior_obs[0], a[0].actions[0]));
    }

    #[test]
    fn gridworld_returns_within_bounds() {
        let env = gridworld();
        let (lo, hi) = env.return_bounds(0.99);
        let pi = env.goal_seeking_policy(3.0);
        let g = on_policy_returns(&env, &pi, 2000, 0.99, 3);
        assert!(g.iter().all(|&x| x >= lo && x <= hi));
        assert!(g.iter().any(|&x| x > 0.0));
        assert_eq!(env.num_actions(), 8);
        assert!(env.cell((0.99, 0.99)) == 15 && env.cell((0.0, 0.0)) == 0);
    }

    #[test]
    fn recommender_drift() {
        let still = recommender(5, 0.0).unwrap();
        assert_eq!(still.mean_reward(2, 1), still.mean_reward(2, 900));
        let moving = recommender(5, 1.0).unwrap();
        let best = |e: u64| (0..5).max_by(|&a, &b| moving.mean_reward(a, e).total_cmp(&moving.mean_reward(b, e))).unwrap();
        assert_ne!(best(1), best(700));
    }
}
