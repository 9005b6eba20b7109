//! Off-policy estimation of a policy's full return distribution.
//!
//! Logged episodes are reduced to `(return, importance ratio)` pairs. From
//! them the crate builds unbiased and weighted importance-sampling estimates
//! of the return CDF, confidence bands that contain the true CDF with
//! probability at least `1 - delta`, and simultaneous bounds for any
//! parameter of the distribution (mean, variance, quantiles, inter-quantile
//! range, CVaR, entropy). Bands can be widened for a bounded distribution
//! shift or replaced by a forecast under smooth non-stationarity.
//!
//! ```
//! use retdist::{estimate_cdf_is, plugin_mean, ReturnDataset};
//!
//! let data = ReturnDataset::from_pairs(&[1.0, 2.0, 3.0, 4.0], &[0.5, 1.5, 1.0, 1.0], 0.0, 5.0)?;
//! let cdf = estimate_cdf_is(&data)?;
//! assert_eq!(cdf.eval(2.5), 0.5);
//! assert!((plugin_mean(&cdf) - 2.625).abs() < 1e-15);
//! # Ok::<(), retdist::Error>(())
//! ```

pub mod band;
pub mod bootstrap;
pub mod bounds;
pub mod cdf;
pub mod cli;
pub mod conc;
pub mod envs;
pub mod error;
pub mod nonstat;
pub mod numeric;
pub mod oracle;
pub mod plugin;
pub mod returns;

pub use band::{
    build_band, fit_band, key_point_count, optimize_plan, shift_band, split_train_eval, BandFit, ConfidenceBand,
    FitOptions, KeyPointPlan, PlanObjective,
};
pub use bootstrap::{bca_bounds, BcaInterval};
pub use bounds::{
    cvar_bounds, entropy_lower_bound, entropy_upper_bound, generic_bounds, interquantile_bounds, mean_bounds,
    parameter_bounds, quantile_bounds, variance_bounds, SearchedBounds, Side,
};
pub use cdf::StepCdf;
pub use conc::{ci_lower, ci_upper, select_cap, CiKind, CiMethod};
pub use error::{Error, Result};
pub use plugin::{plugin_cvar, plugin_entropy, plugin_mean, plugin_quantile, plugin_variance, Parameter};
pub use returns::{discrete_pmf, estimate_cdf_is, estimate_cdf_wis, inverse_cdf, ReturnDataset, ReturnSample};
