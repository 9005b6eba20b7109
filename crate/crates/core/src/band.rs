//! Confidence bands for a return CDF assembled from key-point intervals.
//!
//! Given intervals `[CI-(k_i), CI+(k_i)]` at key points `k_1 < ... < k_K` whose
//! failure budgets sum to at most `delta`, monotonicity of a CDF turns them
//! into a band that contains the whole CDF with probability `1 - delta`:
//!
//! * `F-(nu) = max_{k_i <= nu} CI-(k_i)`, and `1` at or beyond `g_max`;
//! * `F+(nu) = min_{k_i >= nu} CI+(k_i)` on `[g_min, g_max]`, `0` below `g_min`.
//!
//! `F+` as defined is left-continuous at the key points. The stored upper
//! function is its right-continuous version (equal everywhere except at the
//! key points themselves, where it is looser); [`ConfidenceBand::upper_at`]
//! recovers the exact left-continuous value.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, Side};
use crate::cdf::{merge_points, StepCdf};
use crate::conc::{CiMethod, KeyPointEvaluator};
use crate::error::{Error, Result};
use crate::numeric::substream;
use crate::plugin::Parameter;
use crate::returns::ReturnDataset;

/// Relative slack tolerated on `Σ delta_i <= delta` for rounding.
const BUDGET_TOLERANCE: f64 = 1e-12;

/// Key points, their failure budgets, and the interval method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPointPlan {
    pub key_points: Vec<f64>,
    pub budgets: Vec<f64>,
    pub ci_method: CiMethod,
}

impl KeyPointPlan {
    /// `k` equally spaced key points inside `(g_min, g_max)` with budget
    /// `delta / k` each.
    pub fn uniform(k: usize, g_min: f64, g_max: f64, delta: f64, ci_method: CiMethod) -> Self {
        let k = k.max(1);
        let step = (g_max - g_min) / (k as f64 + 1.0);
        Self {
            key_points: (1..=k).map(|i| g_min + step * i as f64).collect(),
            budgets: vec![delta / k as f64; k],
            ci_method,
        }
    }

    pub fn len(&self) -> usize {
        self.key_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key_points.is_empty()
    }

    pub fn total_budget(&self) -> f64 {
        crate::numeric::sum(self.budgets.iter().copied())
    }

    pub fn validate(&self, g_min: f64, g_max: f64, delta: f64) -> Result<()> {
        if self.key_points.len() != self.budgets.len() {
            return Err(Error::invalid("key points and budgets differ in length"));
        }
        for w in self.key_points.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("key points must be strictly increasing"));
            }
        }
        if self.key_points.iter().any(|&k| !(k > g_min && k < g_max)) {
            return Err(Error::invalid("key points must lie strictly inside (g_min, g_max)"));
        }
        if self.budgets.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::invalid("each key-point budget must lie in (0, 1)"));
        }
        let total = self.total_budget();
        if total > delta * (1.0 + BUDGET_TOLERANCE) {
            return Err(Error::BudgetExceeded { total, delta });
        }
        Ok(())
    }
}

/// Lower and upper CDF envelopes with failure probability `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    lower: StepCdf,
    upper: StepCdf,
    delta: f64,
    g_min: f64,
    g_max: f64,
}

impl ConfidenceBand {
    /// Validates and wraps explicit envelopes.
    pub fn new(lower: StepCdf, upper: StepCdf, delta: f64, g_min: f64, g_max: f64) -> Result<Self> {
        if !(g_min < g_max) {
            return Err(Error::invalid("band needs g_min < g_max"));
        }
        let points = merge_points(lower.breakpoints(), upper.breakpoints());
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(lower.value_before_first()) || !in_unit(upper.value_before_first()) {
            return Err(Error::invalid("band values must lie in [0, 1]"));
        }
        if lower.value_before_first() > upper.value_before_first() {
            return Err(Error::invalid("lower envelope exceeds upper envelope"));
        }
        for p in points {
            let (l, u) = (lower.eval(p), upper.eval(p));
            if !in_unit(l) || !in_unit(u) {
                return Err(Error::invalid(format!("band values must lie in [0, 1] (at {p})")));
            }
            if l > u {
                return Err(Error::invalid(format!("lower envelope exceeds upper envelope at {p}")));
            }
        }
        if lower.terminal() != 1.0 || upper.terminal() != 1.0 {
            return Err(Error::invalid("band envelopes must reach 1"));
        }
        Ok(Self { lower, upper, delta, g_min, g_max })
    }

    /// The band containing every CDF supported on `[g_min, g_max]`.
    pub fn vacuous(g_min: f64, g_max: f64, delta: f64) -> Self {
        let lower = StepCdf::from_steps(vec![g_max], vec![1.0], 0.0).expect("well formed");
        let upper = StepCdf::from_steps(vec![g_min], vec![1.0], 0.0).expect("well formed");
        Self { lower, upper, delta, g_min, g_max }
    }

    /// A band whose envelopes both equal `cdf` (useful for plug-in checks).
    pub fn degenerate(cdf: &StepCdf, g_min: f64, g_max: f64) -> Result<Self> {
        Self::new(cdf.clone(), cdf.clone(), 0.0, g_min, g_max)
    }

    /// Envelope of key-point intervals.
    pub fn from_key_point_intervals(
        key_points: &[f64],
        lowers: &[f64],
        uppers: &[f64],
        g_min: f64,
        g_max: f64,
        delta: f64,
    ) -> Result<Self> {
        let k = key_points.len();
        if lowers.len() != k || uppers.len() != k {
            return Err(Error::invalid("interval arrays differ in length"));
        }
        // F- : running max, then 1 at g_max
        let mut lb = Vec::with_capacity(k + 1);
        let mut lv = Vec::with_capacity(k + 1);
        let mut run = 0.0f64;
        for (&kp, &l) in key_points.iter().zip(lowers) {
            run = run.max(l.clamp(0.0, 1.0));
            lb.push(kp);
            lv.push(run);
        }
        lb.push(g_max);
        lv.push(1.0);
        // F+ : suffix min; value on [k_{i-1}, k_i) is min_{j >= i} CI+(k_j)
        let mut suffix = vec![1.0f64; k + 1];
        for i in (0..k).rev() {
            suffix[i] = suffix[i + 1].min(uppers[i].clamp(0.0, 1.0));
        }
        let mut ub = Vec::with_capacity(k + 1);
        ub.push(g_min);
        ub.extend_from_slice(key_points);
        let lower = StepCdf::from_steps(lb, lv, 0.0)?;
        let upper = StepCdf::from_steps(ub, suffix, 0.0)?.compact()?;
        // Crossed intervals mean the band already misses every CDF; clamping
        // the lower envelope keeps the envelopes ordered without changing
        // the band when it is non-empty.
        let lower = lower.combine(&upper, f64::min)?;
        Self::new(lower, upper, delta, g_min, g_max)
    }

    pub fn lower(&self) -> &StepCdf {
        &self.lower
    }

    pub fn upper(&self) -> &StepCdf {
        &self.upper
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    /// `F-(nu)`.
    pub fn lower_at(&self, nu: f64) -> f64 {
        self.lower.eval(nu)
    }

    /// `F+(nu)` with its exact left-continuous value at the key points.
    pub fn upper_at(&self, nu: f64) -> f64 {
        if nu <= self.g_min {
            self.upper.eval(nu)
        } else {
            self.upper.eval_left(nu)
        }
    }

    /// Union of both envelopes' breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        merge_points(self.lower.breakpoints(), self.upper.breakpoints())
    }

    /// Area enclosed between the envelopes on `[g_min, g_max]`.
    pub fn area(&self) -> f64 {
        self.upper.integral(self.g_min, self.g_max) - self.lower.integral(self.g_min, self.g_max)
    }

    /// Whether a right-continuous non-decreasing function lies inside the
    /// band everywhere. `jumps` must list every point where `truth` may jump;
    /// between those points `truth` may increase continuously.
    pub fn contains_fn(&self, truth: impl Fn(f64) -> f64, jumps: &[f64], tol: f64) -> bool {
        let points = merge_points(&self.breakpoints(), jumps);
        let below = points.first().map(|p| p - 1.0).unwrap_or(self.g_min - 1.0);
        std::iter::once(below).chain(points).all(|p| {
            let f = truth(p);
            self.lower_at(p) <= f + tol && f <= self.upper_at(p) + tol
        })
    }

    /// Whether a step CDF lies inside the band everywhere.
    pub fn contains(&self, truth: &StepCdf) -> bool {
        self.contains_fn(|x| truth.eval(x), truth.breakpoints(), 1e-12)
    }

    /// Whether this band lies inside `other` at every point.
    pub fn is_within(&self, other: &ConfidenceBand) -> bool {
        let points = merge_points(&self.breakpoints(), &other.breakpoints());
        points.iter().all(|&p| {
            other.lower.eval(p) <= self.lower.eval(p) + 1e-15
                && self.upper.eval(p) <= other.upper.eval(p) + 1e-15
                && self.upper_at(p) <= other.upper_at(p) + 1e-15
        })
    }
}

/// Band from key-point intervals computed on `data` with `plan`.
pub fn build_band(data: &ReturnDataset, plan: &KeyPointPlan, delta: f64) -> Result<ConfidenceBand> {
    plan.validate(data.g_min(), data.g_max(), delta)?;
    let evaluator = KeyPointEvaluator::new(data, plan.ci_method)?;
    band_from_evaluator(&evaluator, plan, data.g_min(), data.g_max(), delta, evaluator.len())
}

/// Band with deviation terms sized for `n_eff` samples.
pub(crate) fn band_from_evaluator(
    evaluator: &KeyPointEvaluator,
    plan: &KeyPointPlan,
    g_min: f64,
    g_max: f64,
    delta: f64,
    n_eff: usize,
) -> Result<ConfidenceBand> {
    let lowers: Vec<f64> = plan
        .key_points
        .iter()
        .zip(&plan.budgets)
        .map(|(&k, &d)| evaluator.lower_as_if(k, d, n_eff))
        .collect();
    let uppers: Vec<f64> = plan
        .key_points
        .iter()
        .zip(&plan.budgets)
        .map(|(&k, &d)| evaluator.upper_as_if(k, d, n_eff))
        .collect();
    ConfidenceBand::from_key_point_intervals(&plan.key_points, &lowers, &uppers, g_min, g_max, delta)
}

/// Seeded random partition into `(train, eval)`; each part keeps the
/// original sample order.
pub fn split_train_eval(data: &ReturnDataset, train_fraction: f64, seed: u64) -> Result<(ReturnDataset, ReturnDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = data.len();
    let mut n_train = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, 0);
    // Fisher–Yates on the first n_train slots
    for i in 0..n_train.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut train_idx = idx[..n_train.min(n)].to_vec();
    train_idx.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let samples = data.samples();
    let train = train_idx.iter().map(|&i| samples[i]).collect();
    let eval = (0..n).filter(|&i| !in_train[i]).map(|i| samples[i]).collect();
    Ok((data.with_samples(train), data.with_samples(eval)))
}

/// What the key-point search optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanObjective {
    /// Minimize the area enclosed by the band.
    Area,
    /// Maximize the lower bound (or minimize the upper bound) of one
    /// parameter.
    Specialize(Parameter, Side),
}

impl PlanObjective {
    /// Smaller is better; infeasible bands score `+inf`.
    fn score(&self, band: &ConfidenceBand) -> f64 {
        let s = match *self {
            PlanObjective::Area => Ok(band.area()),
            PlanObjective::Specialize(p, Side::Lower) => bounds::parameter_bounds(band, p).map(|(lo, _)| -lo),
            PlanObjective::Specialize(p, Side::Upper) => bounds::parameter_bounds(band, p).map(|(_, hi)| hi),
        };
        match s {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }
}

/// Number of key points used for a held-out set of `n` samples: `ceil(ln n)`.
pub fn key_point_count(n: usize) -> usize {
    ((n.max(1) as f64).ln().ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
struct Candidate {
    key_points: Vec<f64>,
    logits: Vec<f64>,
}

impl Candidate {
    fn to_plan(&self, delta: f64, ci_method: CiMethod) -> KeyPointPlan {
        let m = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut budgets: Vec<f64> = e.iter().map(|v| delta * v / z).collect();
        let total: f64 = budgets.iter().sum();
        if total > delta {
            let s = delta / total;
            budgets.iter_mut().for_each(|b| *b *= s);
        }
        KeyPointPlan { key_points: self.key_points.clone(), budgets, ci_method }
    }
}

struct SearchSpace<'a> {
    g_min: f64,
    g_max: f64,
    k: usize,
    interior_returns: &'a [f64],
}

impl SearchSpace<'_> {
    fn inner(&self, x: f64) -> f64 {
        let eps = (self.g_max - self.g_min) * 1e-9;
        x.clamp(self.g_min + eps, self.g_max - eps)
    }

    fn draw_point<R: Rng>(&self, rng: &mut R) -> f64 {
        if !self.interior_returns.is_empty() && rng.random_bool(0.5) {
            self.interior_returns[rng.random_range(0..self.interior_returns.len())]
        } else {
            self.inner(rng.random_range(self.g_min..self.g_max))
        }
    }

    /// Sorts and removes duplicates, refilling with fresh draws.
    fn normalize<R: Rng>(&self, mut pts: Vec<f64>, rng: &mut R) -> Vec<f64> {
        for _ in 0..8 {
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            if pts.len() == self.k {
                return pts;
            }
            while pts.len() < self.k {
                pts.push(self.inner(rng.random_range(self.g_min..self.g_max)));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn random<R: Rng>(&self, rng: &mut R) -> Candidate {
        let pts = (0..self.k).map(|_| self.draw_point(rng)).collect();
        let key_points = self.normalize(pts, rng);
        let logits = (0..key_points.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Candidate { key_points, logits }
    }

    fn perturb<R: Rng>(&self, base: &Candidate, scale: f64, rng: &mut R) -> Candidate {
        let width = self.g_max - self.g_min;
        let pts = base
            .key_points
            .iter()
            .map(|&k| {
                if !self.interior_returns.is_empty() && rng.random_bool(0.15) {
                    self.interior_returns[rng.random_range(0..self.interior_returns.len())]
                } else {
                    self.inner(k + scale * width * rng.sample::<f64, _>(StandardNormal))
                }
            })
            .collect();
        let key_points = self.normalize(pts, rng);
        let mut logits: Vec<f64> = base
            .logits
            .iter()
            .map(|&l| l + 2.0 * scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        logits.resize(key_points.len(), 0.0);
        Candidate { key_points, logits }
    }
}

/// Searches key-point locations and budgets on a training split.
///
/// Intervals are predicted as if `eval_size` samples were available. The
/// first candidate is always the uniform plan, so `search_budget == 1`
/// returns it and the result never scores worse than it. Candidates come from
/// seed-indexed substreams and are reduced by `(score, index)`, so the result
/// does not depend on the thread schedule.
pub fn optimize_plan(
    train: &ReturnDataset,
    eval_size: usize,
    delta: f64,
    objective: PlanObjective,
    ci_method: CiMethod,
    search_budget: usize,
    seed: u64,
) -> Result<KeyPointPlan> {
    if train.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (g_min, g_max) = (train.g_min(), train.g_max());
    let k = key_point_count(eval_size);
    let uniform = KeyPointPlan::uniform(k, g_min, g_max, delta, ci_method);
    let evaluator = match KeyPointEvaluator::new(train, ci_method) {
        Ok(e) => e,
        Err(_) => return Ok(uniform),
    };
    if search_budget <= 1 {
        return Ok(uniform);
    }
    let mut interior: Vec<f64> = train.samples().iter().map(|s| s.g).filter(|&g| g > g_min && g < g_max).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    let space = SearchSpace { g_min, g_max, k, interior_returns: &interior };

    let evaluate = |c: &Candidate| -> f64 {
        let plan = c.to_plan(delta, ci_method);
        if plan.validate(g_min, g_max, delta).is_err() {
            return f64::INFINITY;
        }
        match band_from_evaluator(&evaluator, &plan, g_min, g_max, delta, eval_size) {
            Ok(band) => objective.score(&band),
            Err(_) => f64::INFINITY,
        }
    };

    let uniform_candidate = Candidate { key_points: uniform.key_points.clone(), logits: vec![0.0; k] };
    let mut best = (evaluate(&uniform_candidate), 0usize, uniform_candidate);

    let explore = (search_budget / 2).max(1);
    let explore_batch: Vec<(f64, usize, Candidate)> = (1..explore.min(search_budget))
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let c = space.random(&mut rng);
            (evaluate(&c), i, c)
        })
        .collect();
    reduce_best(&mut best, explore_batch);

    let mut next = explore.min(search_budget);
    let batch = (search_budget / 16).max(4);
    let mut round = 0;
    while next < search_budget {
        let end = (next + batch).min(search_budget);
        let scale = 0.1 * 0.7f64.powi(round);
        let base = best.2.clone();
        let refine: Vec<(f64, usize, Candidate)> = (next..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, i as u64);
                let c = space.perturb(&base, scale, &mut rng);
                (evaluate(&c), i, c)
            })
            .collect();
        reduce_best(&mut best, refine);
        next = end;
        round += 1;
    }

    if best.0.is_finite() {
        Ok(best.2.to_plan(delta, ci_method))
    } else {
        Ok(uniform)
    }
}

fn reduce_best(best: &mut (f64, usize, Candidate), batch: Vec<(f64, usize, Candidate)>) {
    for cand in batch {
        if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
            *best = cand;
        }
    }
}

/// Band valid for a second domain whose return CDF is within Kolmogorov–
/// Smirnov distance `epsilon` of the first. Both domains share the declared
/// return bounds, so the band stays `0` below `g_min` and `1` at `g_max`.
pub fn shift_band(band: &ConfidenceBand, epsilon: f64) -> Result<ConfidenceBand> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let lower = band.lower.map(|v| (v - epsilon).max(0.0))?;
    // the upper envelope stays 0 below g_min
    let points = merge_points(&[band.g_min], band.upper.breakpoints());
    let values = points.iter().map(|&p| (band.upper.eval(p) + epsilon).min(1.0)).collect();
    let upper = StepCdf::from_steps(points, values, 0.0)?.compact()?;
    let lower = lower.combine(&StepCdf::from_steps(vec![band.g_max], vec![1.0], 0.0)?, f64::max)?;
    ConfidenceBand::new(lower, upper, band.delta, band.g_min, band.g_max)
}

/// Everything needed to go from a dataset to a band.
#[derive(Debug, Clone)]
pub struct BandFit {
    pub plan: KeyPointPlan,
    pub band: ConfidenceBand,
    pub train_size: usize,
    pub eval_size: usize,
}

/// Options for [`fit_band`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub delta: f64,
    pub train_fraction: f64,
    pub objective: PlanObjective,
    pub search_budget: usize,
    pub ci_kind: crate::conc::CiKind,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            delta: 0.05,
            train_fraction: 0.05,
            objective: PlanObjective::Area,
            search_budget: 64,
            ci_kind: crate::conc::CiKind::TruncatedEmpiricalBernstein,
            seed: 0,
        }
    }
}

/// Split, choose the truncation cap and key points on the training part,
/// then build the band on the held-out part.
pub fn fit_band(data: &ReturnDataset, opts: &FitOptions) -> Result<BandFit> {
    let (train, eval) = split_train_eval(data, opts.train_fraction, opts.seed)?;
    let cap = crate::conc::select_cap(&train, eval.len(), opts.delta / key_point_count(eval.len()) as f64);
    let method = CiMethod::new(opts.ci_kind, cap)?;
    let plan = if train.is_empty() {
        KeyPointPlan::uniform(key_point_count(eval.len()), data.g_min(), data.g_max(), opts.delta, method)
    } else {
        optimize_plan(&train, eval.len(), opts.delta, opts.objective, method, opts.search_budget, opts.seed)?
    };
    let band = build_band(&eval, &plan, opts.delta)?;
    Ok(BandFit { plan, band, train_size: train.len(), eval_size: eval.len() })
}
