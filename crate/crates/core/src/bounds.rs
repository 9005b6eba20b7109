//! Bounds on distributional parameters from a confidence band.
//!
//! For a band `[F-, F+]` the bounds are `inf` and `sup` of the parameter over
//! every CDF inside the band. Because they all come from the same band, every
//! bound computed here holds simultaneously with the band's confidence.
//!
//! Parameters that are monotone under first-order stochastic dominance (mean,
//! quantiles, CVaR) attain their extremes at the envelopes themselves: `F+`
//! puts as much mass as possible on low returns and gives the lower bound,
//! `F-` gives the upper bound. Variance, inter-quantile range and entropy need
//! dedicated constructions.
//!
//! Extremal CDFs for the variance are piecewise constant between band
//! breakpoints. Along each of the two one-parameter families used below
//! (a horizontal level for the maximum, a vertical jump point for the
//! minimum), the variance is a quadratic function of the parameter between
//! consecutive critical values, so each piece is optimized exactly by fitting
//! that quadratic through three evaluations.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::ConfidenceBand;
use crate::cdf::{merge_points, StepCdf};
use crate::error::{Error, Result};
use crate::numeric::{self, substream};
use crate::plugin::Parameter;

/// Which side of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// Mean of a CDF on `[g_min, g_max]`: `g_max - ∫ F`.
fn area_mean(f: &StepCdf, g_min: f64, g_max: f64) -> f64 {
    g_max - f.integral(g_min, g_max)
}

/// `(mean(F+), mean(F-))`.
pub fn mean_bounds(band: &ConfidenceBand) -> (f64, f64) {
    let (a, b) = (band.g_min(), band.g_max());
    (area_mean(band.upper(), a, b), area_mean(band.lower(), a, b))
}

/// `inf { nu : F(nu) >= alpha }`, clamped into `[g_min, g_max]`.
fn envelope_quantile(f: &StepCdf, alpha: f64, g_min: f64, g_max: f64) -> f64 {
    f.first_reaching(alpha).unwrap_or(g_max).clamp(g_min, g_max)
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// `(Q(F+, alpha), Q(F-, alpha))`.
pub fn quantile_bounds(band: &ConfidenceBand, alpha: f64) -> Result<(f64, f64)> {
    check_level(alpha)?;
    let (a, b) = (band.g_min(), band.g_max());
    Ok((envelope_quantile(band.upper(), alpha, a, b), envelope_quantile(band.lower(), alpha, a, b)))
}

/// `q - (1/alpha) ∫_{g_min}^{q} F` with `q` the alpha-quantile of `F`.
fn envelope_cvar(f: &StepCdf, alpha: f64, g_min: f64, g_max: f64) -> f64 {
    let q = envelope_quantile(f, alpha, g_min, g_max);
    q - f.integral(g_min, q) / alpha
}

/// `(CVaR(F+, alpha), CVaR(F-, alpha))` for the lower tail.
pub fn cvar_bounds(band: &ConfidenceBand, alpha: f64) -> Result<(f64, f64)> {
    check_level(alpha)?;
    let (a, b) = (band.g_min(), band.g_max());
    Ok((envelope_cvar(band.upper(), alpha, a, b), envelope_cvar(band.lower(), alpha, a, b)))
}

/// Variance of a normalized step CDF.
fn step_variance(f: &StepCdf) -> f64 {
    let pmf = f.pmf();
    let total = numeric::sum(pmf.iter().map(|p| p.1));
    if !(total > 0.0) {
        return 0.0;
    }
    let mu = numeric::sum(pmf.iter().map(|&(g, m)| g * m)) / total;
    numeric::sum(pmf.iter().map(|&(g, m)| m * (g - mu) * (g - mu))) / total
}

/// `max(F-, min(F+, level))`: follow `F+` up to `level`, stay flat, then
/// follow `F-`.
fn level_cdf(band: &ConfidenceBand, level: f64) -> StepCdf {
    let capped = band.upper().map(|v| v.min(level)).expect("monotone map");
    band.lower().combine(&capped, f64::max).expect("monotone combine")
}

/// `F-` left of `j`, `F+` from `j` on.
fn jump_cdf(band: &ConfidenceBand, j: f64) -> StepCdf {
    let (lo, up) = (band.lower(), band.upper());
    let mut bps = Vec::new();
    let mut vals = Vec::new();
    for (&b, &v) in lo.breakpoints().iter().zip(lo.values()) {
        if b < j {
            bps.push(b);
            vals.push(v);
        }
    }
    bps.push(j);
    vals.push(up.eval(j).max(vals.last().copied().unwrap_or(0.0)));
    for (&b, &v) in up.breakpoints().iter().zip(up.values()) {
        if b > j {
            bps.push(b);
            vals.push(v.max(*vals.last().unwrap()));
        }
    }
    StepCdf::from_steps(bps, vals, lo.value_before_first()).expect("monotone splice")
}

/// Extremum of `f` on `[a, b]` assuming `f` is quadratic there.
fn quadratic_extremum(a: f64, b: f64, f: impl Fn(f64) -> f64, maximize: bool) -> f64 {
    let better = |x: f64, y: f64| if maximize { x.max(y) } else { x.min(y) };
    let (fa, fb) = (f(a), f(b));
    let mut best = better(fa, fb);
    if b > a {
        let m = 0.5 * (a + b);
        let fm = f(m);
        best = better(best, fm);
        // f(x) = c2 (x - m)^2 + c1 (x - m) + fm with h = (b - a) / 2
        let h = 0.5 * (b - a);
        let c2 = (fa + fb - 2.0 * fm) / (2.0 * h * h);
        let c1 = (fb - fa) / (2.0 * h);
        if c2 != 0.0 && ((maximize && c2 < 0.0) || (!maximize && c2 > 0.0)) {
            let x = m - c1 / (2.0 * c2);
            if x > a && x < b {
                best = better(best, f(x));
            }
        }
    }
    best
}

/// `(min, max)` variance over the band.
pub fn variance_bounds(band: &ConfidenceBand) -> (f64, f64) {
    // maximum: horizontal level between consecutive critical levels
    let mut levels: Vec<f64> = band
        .lower()
        .values()
        .iter()
        .chain(band.upper().values())
        .copied()
        .chain([0.0, 1.0])
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let upper = levels
        .windows(2)
        .map(|w| quadratic_extremum(w[0], w[1], |y| step_variance(&level_cdf(band, y)), true))
        .fold(step_variance(&level_cdf(band, 0.0)), f64::max);

    // minimum: vertical jump point between consecutive breakpoints
    let mut points = band.breakpoints();
    points.push(band.g_min());
    points.push(band.g_max());
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.retain(|&p| p >= band.g_min() && p <= band.g_max());
    let lower = points
        .windows(2)
        .map(|w| quadratic_extremum(w[0], w[1], |j| step_variance(&jump_cdf(band, j)), false))
        .fold(step_variance(&jump_cdf(band, points[0])), f64::min);
    let cap = 0.25 * (band.g_max() - band.g_min()).powi(2);
    (lower.clamp(0.0, cap), upper.clamp(0.0, cap))
}

/// `(max(0, Q(F+, a2) - Q(F-, a1)), Q(F-, a2) - Q(F+, a1))`.
pub fn interquantile_bounds(band: &ConfidenceBand, alpha1: f64, alpha2: f64) -> Result<(f64, f64)> {
    check_level(alpha1)?;
    check_level(alpha2)?;
    if !(alpha1 < alpha2) {
        return Err(Error::invalid("inter-quantile range needs alpha1 < alpha2"));
    }
    let (lo1, hi1) = quantile_bounds(band, alpha1)?;
    let (lo2, hi2) = quantile_bounds(band, alpha2)?;
    Ok(((lo2 - hi1).max(0.0), hi2 - lo1))
}

/// Vertices of the shortest monotone path from `(g_min, 0)` to `(g_max, 1)`
/// that stays inside the band (the taut string).
pub fn taut_string(band: &ConfidenceBand) -> Result<Vec<(f64, f64)>> {
    let (g_min, g_max) = (band.g_min(), band.g_max());
    if band.lower_at(g_min) > 0.0 {
        return Err(Error::ForcedPointMass { at: g_min });
    }
    // gates: at each x, y(x) must lie in [F-(x), F+(x)] (left-continuous F+)
    let mut xs: Vec<f64> = merge_points(band.lower().breakpoints(), band.upper().breakpoints())
        .into_iter()
        .filter(|&x| x > g_min && x < g_max)
        .collect();
    xs.push(g_max);
    let mut gates = Vec::with_capacity(xs.len());
    for &x in &xs {
        let lo = band.lower_at(x);
        let hi = band.upper_at(x);
        if lo > hi {
            return Err(Error::ForcedPointMass { at: x });
        }
        gates.push((x, lo, hi));
    }
    let last = gates.len() - 1;
    if gates[last].1 < 1.0 || gates[last].2 < 1.0 {
        return Err(Error::ForcedPointMass { at: g_max });
    }
    gates[last] = (g_max, 1.0, 1.0);

    let mut path = vec![(g_min, 0.0)];
    let mut apex = (g_min, 0.0);
    let mut start = 0;
    'outer: loop {
        let (mut lo_slope, mut lo_idx) = (f64::NEG_INFINITY, usize::MAX);
        let (mut hi_slope, mut hi_idx) = (f64::INFINITY, usize::MAX);
        for (k, &(x, lo, hi)) in gates.iter().enumerate().skip(start) {
            let dx = x - apex.0;
            let sl = (lo - apex.1) / dx;
            let sh = (hi - apex.1) / dx;
            if sl > hi_slope {
                apex = (gates[hi_idx].0, gates[hi_idx].2);
                path.push(apex);
                start = hi_idx + 1;
                continue 'outer;
            }
            if sh < lo_slope {
                apex = (gates[lo_idx].0, gates[lo_idx].1);
                path.push(apex);
                start = lo_idx + 1;
                continue 'outer;
            }
            if sl >= lo_slope {
                lo_slope = sl;
                lo_idx = k;
            }
            if sh <= hi_slope {
                hi_slope = sh;
                hi_idx = k;
            }
        }
        path.push((g_max, 1.0));
        break;
    }
    path.dedup();
    Ok(path)
}

/// Differential entropy of the piecewise-linear CDF through `path`.
pub fn path_entropy(path: &[(f64, f64)]) -> f64 {
    numeric::sum(path.windows(2).map(|w| {
        let dx = w[1].0 - w[0].0;
        let dy = w[1].1 - w[0].1;
        if dy > 0.0 && dx > 0.0 {
            let s = dy / dx;
            -dx * s * s.ln()
        } else {
            0.0
        }
    }))
}

/// Highest differential entropy of any CDF inside the band.
pub fn entropy_upper_bound(band: &ConfidenceBand) -> Result<f64> {
    Ok(path_entropy(&taut_string(band)?))
}

/// The band always admits a CDF with a point mass unless it forces a
/// density, so the lower bound on differential entropy is `-inf`.
pub fn entropy_lower_bound(_band: &ConfidenceBand) -> f64 {
    f64::NEG_INFINITY
}

/// Closed-form `(lower, upper)` bounds for `parameter`.
pub fn parameter_bounds(band: &ConfidenceBand, parameter: Parameter) -> Result<(f64, f64)> {
    parameter.validate()?;
    match parameter {
        Parameter::Mean => Ok(mean_bounds(band)),
        Parameter::Variance => Ok(variance_bounds(band)),
        Parameter::Quantile(a) => quantile_bounds(band, a),
        Parameter::Cvar(a) => cvar_bounds(band, a),
        Parameter::InterQuantile(a1, a2) => interquantile_bounds(band, a1, a2),
        Parameter::Entropy => Ok((entropy_lower_bound(band), entropy_upper_bound(band)?)),
    }
}

/// Result of a search-based bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchedBounds {
    pub lower: f64,
    pub upper: f64,
    /// Search results are the best in-band values found, which are inner
    /// approximations of the true infimum and supremum.
    pub guaranteed: bool,
}

/// `max(F-, min(F+, V))` for the grid step function `V`.
pub(crate) fn clamp_into_band(band: &ConfidenceBand, grid: &[f64], levels: &[f64]) -> StepCdf {
    let v = StepCdf::from_steps(grid.to_vec(), levels.to_vec(), 0.0).expect("monotone levels");
    let capped = band.upper().combine(&v, f64::min).expect("monotone combine");
    band.lower().combine(&capped, f64::max).expect("monotone combine")
}

/// Evenly spaced grid over `[g_min, g_max]`.
pub(crate) fn band_grid(band: &ConfidenceBand, grid_size: usize) -> Vec<f64> {
    let m = grid_size.max(2);
    let (a, b) = (band.g_min(), band.g_max());
    (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect()
}

fn monotone(levels: &mut [f64]) {
    let mut run = 0.0f64;
    for v in levels.iter_mut() {
        *v = v.clamp(0.0, 1.0).max(run);
        run = *v;
    }
}

/// Search-based bounds for an arbitrary functional of the CDF.
///
/// Candidates are grid step functions clamped into the band, so every
/// candidate is a CDF inside the band and the result is an inner
/// approximation of `[inf, sup]`. The starting population contains every
/// constant level (which includes both envelopes), followed by random
/// monotone levels and local refinements of the incumbents.
pub fn generic_bounds<F>(
    band: &ConfidenceBand,
    functional: F,
    grid_size: usize,
    search_budget: usize,
    seed: u64,
) -> SearchedBounds
where
    F: Fn(&StepCdf) -> Option<f64> + Sync,
{
    let grid = band_grid(band, grid_size);
    let m = grid.len();
    let eval = |levels: &[f64]| functional(&clamp_into_band(band, &grid, levels)).filter(|v| v.is_finite());

    let n_levels = 17usize;
    let mut initial: Vec<Vec<f64>> = (0..n_levels).map(|i| vec![i as f64 / (n_levels - 1) as f64; m]).collect();
    let budget = search_budget.max(n_levels);
    let n_random = (budget - n_levels) / 2;
    initial.extend((0..n_random).into_par_iter().map(|i| {
        let mut rng = substream(seed, i as u64);
        let mut levels: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        levels.sort_by(f64::total_cmp);
        levels
    }).collect::<Vec<_>>());

    let scored: Vec<(Option<f64>, usize)> = initial.par_iter().enumerate().map(|(i, l)| (eval(l), i)).collect();
    let mut best_lo: Option<(f64, Vec<f64>)> = None;
    let mut best_hi: Option<(f64, Vec<f64>)> = None;
    for (v, i) in scored {
        if let Some(v) = v {
            if best_lo.as_ref().is_none_or(|b| v < b.0) {
                best_lo = Some((v, initial[i].clone()));
            }
            if best_hi.as_ref().is_none_or(|b| v > b.0) {
                best_hi = Some((v, initial[i].clone()));
            }
        }
    }
    let (Some(mut lo), Some(mut hi)) = (best_lo, best_hi) else {
        return SearchedBounds { lower: f64::NAN, upper: f64::NAN, guaranteed: false };
    };

    let mut used = n_levels + n_random;
    let batch = 16usize;
    let mut round = 0i32;
    while used < budget {
        let end = (used + batch).min(budget);
        let scale = 0.25 * 0.85f64.powi(round);
        let proposals: Vec<(Option<f64>, bool, Vec<f64>)> = (used..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, (1u64 << 32) + i as u64);
                let minimize = i % 2 == 0;
                let base = if minimize { &lo.1 } else { &hi.1 };
                let mut levels = base.clone();
                let a = rng.random_range(0..m);
                let b = rng.random_range(a..m);
                let shift = scale * rng.sample::<f64, _>(StandardNormal);
                for v in &mut levels[a..=b] {
                    *v += shift;
                }
                monotone(&mut levels);
                (eval(&levels), minimize, levels)
            })
            .collect();
        for (v, minimize, levels) in proposals {
            if let Some(v) = v {
                if minimize && v < lo.0 {
                    lo = (v, levels);
                } else if !minimize && v > hi.0 {
                    hi = (v, levels);
                }
            }
        }
        used = end;
        round += 1;
    }
    SearchedBounds { lower: lo.0, upper: hi.0, guaranteed: false }
}

/// [`generic_bounds`] for a [`Parameter`].
pub fn generic_parameter_bounds(
    band: &ConfidenceBand,
    parameter: Parameter,
    grid_size: usize,
    search_budget: usize,
    seed: u64,
) -> SearchedBounds {
    generic_bounds(band, |f| parameter.evaluate(f).ok(), grid_size, search_budget, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4_band() -> ConfidenceBand {
        let f = StepCdf::from_atoms(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]).unwrap();
        ConfidenceBand::degenerate(&f, 0.0, 5.0).unwrap()
    }

    #[test]
    fn mean_extremes() {
        let v = ConfidenceBand::vacuous(0.0, 1.0, 0.1);
        assert_eq!(mean_bounds(&v), (0.0, 1.0));
        let pm = ConfidenceBand::degenerate(&StepCdf::point_mass(3.0), 0.0, 10.0).unwrap();
        assert_eq!(mean_bounds(&pm), (3.0, 3.0));
    }

    #[test]
    fn quantile_extremes() {
        let v = ConfidenceBand::vacuous(0.0, 1.0, 0.1);
        assert_eq!(quantile_bounds(&v, 0.5).unwrap(), (0.0, 1.0));
        assert_eq!(quantile_bounds(&uniform4_band(), 0.5).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn cvar_extremes() {
        let (lo, hi) = cvar_bounds(&uniform4_band(), 0.5).unwrap();
        assert!((lo - 1.5).abs() < 1e-15 && (hi - 1.5).abs() < 1e-15);
        let v = ConfidenceBand::vacuous(0.0, 1.0, 0.1);
        assert_eq!(cvar_bounds(&v, 0.1).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn variance_extremes() {
        let pm = ConfidenceBand::degenerate(&StepCdf::point_mass(3.0), 0.0, 10.0).unwrap();
        assert_eq!(variance_bounds(&pm), (0.0, 0.0));
        let (lo, hi) = variance_bounds(&ConfidenceBand::vacuous(0.0, 1.0, 0.1));
        assert!(lo.abs() < 1e-15);
        assert!((hi - 0.25).abs() < 1e-12);
        let (lo, hi) = variance_bounds(&uniform4_band());
        assert!((lo - 1.25).abs() < 1e-12 && (hi - 1.25).abs() < 1e-12);
    }

    #[test]
    fn iqr_extremes() {
        assert_eq!(interquantile_bounds(&uniform4_band(), 0.25, 0.75).unwrap(), (2.0, 2.0));
        assert_eq!(interquantile_bounds(&ConfidenceBand::vacuous(0.0, 1.0, 0.1), 0.25, 0.75).unwrap(), (0.0, 1.0));
        assert!(interquantile_bounds(&uniform4_band(), 0.75, 0.25).is_err());
    }

    #[test]
    fn taut_string_on_vacuous_band_is_uniform() {
        let h = entropy_upper_bound(&ConfidenceBand::vacuous(0.0, 1.0, 0.1)).unwrap();
        assert!(h.abs() < 1e-12);
        let h = entropy_upper_bound(&ConfidenceBand::vacuous(0.0, 2.0, 0.1)).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn taut_string_bends_around_key_points() {
        // F+(2) <= 0.1 forces the string below (2, 0.1)
        let band = ConfidenceBand::from_key_point_intervals(&[2.0], &[0.0], &[0.1], 0.0, 4.0, 0.1).unwrap();
        let path = taut_string(&band).unwrap();
        assert_eq!(path, vec![(0.0, 0.0), (2.0, 0.1), (4.0, 1.0)]);
        let expected = -(2.0 * 0.05 * 0.05f64.ln() + 2.0 * 0.45 * 0.45f64.ln());
        assert!((entropy_upper_bound(&band).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn point_mass_band_forces_jump() {
        let pm = ConfidenceBand::degenerate(&StepCdf::point_mass(3.0), 0.0, 10.0).unwrap();
        assert!(matches!(entropy_upper_bound(&pm), Err(Error::ForcedPointMass { .. })));
        assert_eq!(entropy_lower_bound(&pm), f64::NEG_INFINITY);
    }

    #[test]
    fn generic_search_recovers_closed_forms_on_degenerate_band() {
        let b = uniform4_band();
        let r = generic_parameter_bounds(&b, Parameter::Mean, 64, 64, 1);
        assert!((r.lower - 2.5).abs() < 1e-12 && (r.upper - 2.5).abs() < 1e-12);
        assert!(!r.guaranteed);
    }

    #[test]
    fn quadratic_extremum_finds_interior_vertex() {
        let v = quadratic_extremum(0.0, 1.0, |x| -(x - 0.3) * (x - 0.3), true);
        assert!(v.abs() < 1e-15);
        let v = quadratic_extremum(0.0, 1.0, |x| (x - 0.7) * (x - 0.7) + 1.0, false);
        assert!((v - 1.0).abs() < 1e-15);
    }
}
