//! Forecasting the return CDF of a future episode under smooth drift.
//!
//! Each episode `i` contributes the unbiased single-sample estimate
//! `rho_i 1{G_i <= kappa}` of `F^(i)(kappa)`. The sequence is regressed on a
//! Fourier basis in the episode index, the fit is extrapolated `ell`
//! episodes ahead, and a wild bootstrap with Rademacher multipliers turns
//! the residuals into an interval.
//!
//! The basis is `[1, sin(2πi/P), cos(2πi/P), sin(4πi/P), ...]` truncated to
//! `d` terms. The default period is `P = 2(L + ell)`: over the observed window
//! the basis then spans half a cycle, so the forecast point is not identified
//! with the start of the window.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::band::{ConfidenceBand, KeyPointPlan};
use crate::error::{Error, Result};
use crate::numeric::{self, substream};
use crate::returns::ReturnDataset;

/// Fewest bootstrap replicates accepted by [`wild_bootstrap_ci`].
pub const MIN_REPLICATES: usize = 200;

/// Fourier basis in the episode index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierBasis {
    pub order: usize,
    pub period: f64,
}

impl FourierBasis {
    pub fn new(order: usize, period: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("basis order must be at least 1"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid(format!("period must be positive, got {period}")));
        }
        Ok(Self { order, period })
    }

    /// Default basis for `horizon` observed episodes forecast `lead` ahead.
    pub fn for_forecast(order: usize, horizon: usize, lead: usize) -> Result<Self> {
        Self::new(order, 2.0 * (horizon + lead) as f64)
    }

    pub fn features(&self, i: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.order,
            (0..self.order).map(|j| {
                if j == 0 {
                    1.0
                } else {
                    let k = j.div_ceil(2) as f64;
                    let x = 2.0 * std::f64::consts::PI * k * i / self.period;
                    if j % 2 == 1 { x.sin() } else { x.cos() }
                }
            }),
        )
    }
}

/// Least-squares fit of a sequence observed at episodes `1..=L`.
#[derive(Debug, Clone)]
pub struct NsModel {
    pub basis: FourierBasis,
    pub horizon: usize,
    pub lead: usize,
    pub weights: DVector<f64>,
    fitted: DVector<f64>,
    /// `Φ (ΦᵀΦ)⁻¹ φ(L + ell)`: forecast as a linear function of the data.
    influence: DVector<f64>,
}

impl NsModel {
    pub fn fit(points: &[f64], basis: FourierBasis, lead: usize) -> Result<Self> {
        let l = points.len();
        let d = basis.order;
        if l < d {
            return Err(Error::invalid(format!("need at least {d} episodes for a {d}-term basis, got {l}")));
        }
        let phi = DMatrix::from_fn(l, d, |r, c| basis.features((r + 1) as f64)[c]);
        let svd = phi.clone().svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.max();
        if !(sv.min() > smax * 1e-10 * (l.max(d) as f64)) {
            return Err(Error::DegenerateBasis);
        }
        let pinv = svd.pseudo_inverse(0.0).map_err(|_| Error::DegenerateBasis)?;
        let y = DVector::from_column_slice(points);
        let weights = &pinv * &y;
        let fitted = &phi * &weights;
        let target = basis.features((l + lead) as f64);
        let influence = pinv.transpose() * target;
        Ok(Self { basis, horizon: l, lead, weights, fitted, influence })
    }

    pub fn forecast(&self) -> f64 {
        self.basis.features((self.horizon + self.lead) as f64).dot(&self.weights)
    }

    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }
}

/// `rho_i 1{G_i <= kappa}` ordered by episode; episodes must be exactly
/// `1..=L`.
pub fn per_episode_cdf_points(data: &ReturnDataset, kappa: f64) -> Result<Vec<f64>> {
    let l = data.len();
    let mut out = vec![None; l];
    for s in data.samples() {
        let e = s.episode as usize;
        if e == 0 || e > l {
            return Err(Error::EpisodeIndex(format!("episode {} outside 1..={l}", s.episode)));
        }
        if out[e - 1].is_some() {
            return Err(Error::EpisodeIndex(format!("duplicate episode {}", s.episode)));
        }
        out[e - 1] = Some(if s.g <= kappa { s.rho } else { 0.0 });
    }
    Ok(out.into_iter().map(|v| v.expect("all slots filled")).collect())
}

/// Point forecast `φ(L + ell)ᵀ w` with the default period.
pub fn forecast_cdf_point(points: &[f64], basis_order: usize, lead: usize) -> Result<f64> {
    let basis = FourierBasis::for_forecast(basis_order, points.len(), lead)?;
    Ok(NsModel::fit(points, basis, lead)?.forecast())
}

/// Wild-bootstrap interval for the forecast with an explicit basis.
///
/// Refitting a pseudo-series `ŷ + σ∘r` is linear in the data, so each
/// replicate forecast equals `forecast + influenceᵀ(σ∘r)` exactly.
pub fn wild_bootstrap_ci_with(
    points: &[f64],
    basis: FourierBasis,
    lead: usize,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InsufficientReplicates { got: replicates, min: MIN_REPLICATES });
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let model = NsModel::fit(points, basis, lead)?;
    let point = model.forecast();
    let weighted: Vec<f64> = points
        .iter()
        .zip(model.fitted.iter())
        .zip(model.influence.iter())
        .map(|((&y, &f), &h)| h * (y - f))
        .collect();
    let mut reps: Vec<f64> = (0..replicates)
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            let mut acc = numeric::CompensatedSum::new();
            for &w in &weighted {
                acc.add(if rng.random::<bool>() { w } else { -w });
            }
            point + acc.value()
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    let lo = numeric::sorted_quantile(&reps, delta / 2.0).clamp(0.0, 1.0);
    let hi = numeric::sorted_quantile(&reps, 1.0 - delta / 2.0).clamp(0.0, 1.0);
    Ok((lo.min(hi), lo.max(hi)))
}

/// Wild-bootstrap interval for the forecast at episode `L + ell`.
pub fn wild_bootstrap_ci(
    points: &[f64],
    basis_order: usize,
    lead: usize,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let basis = FourierBasis::for_forecast(basis_order, points.len(), lead)?;
    wild_bootstrap_ci_with(points, basis, lead, delta, replicates, seed)
}

/// Forecast band for episode `L + ell` from wild-bootstrap intervals at
/// every key point of `plan`. Key point `k` uses seed substream `k`.
pub fn forecast_band(
    data: &ReturnDataset,
    plan: &KeyPointPlan,
    basis_order: usize,
    lead: usize,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConfidenceBand> {
    let basis = FourierBasis::for_forecast(basis_order, data.len(), lead)?;
    forecast_band_with(data, plan, basis, lead, delta, replicates, seed)
}

/// [`forecast_band`] with an explicit basis.
pub fn forecast_band_with(
    data: &ReturnDataset,
    plan: &KeyPointPlan,
    basis: FourierBasis,
    lead: usize,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConfidenceBand> {
    plan.validate(data.g_min(), data.g_max(), delta)?;
    let intervals: Vec<(f64, f64)> = plan
        .key_points
        .par_iter()
        .zip(&plan.budgets)
        .enumerate()
        .map(|(k, (&kappa, &d))| {
            let points = per_episode_cdf_points(data, kappa)?;
            let key_seed = substream(seed, k as u64).random::<u64>();
            wild_bootstrap_ci_with(&points, basis, lead, d, replicates, key_seed)
        })
        .collect::<Result<_>>()?;
    let lowers: Vec<f64> = intervals.iter().map(|i| i.0).collect();
    let uppers: Vec<f64> = intervals.iter().map(|i| i.1).collect();
    ConfidenceBand::from_key_point_intervals(&plan.key_points, &lowers, &uppers, data.g_min(), data.g_max(), delta)
}
