//! Plug-in estimators for distributional parameters of a (possibly
//! importance-weighted) step CDF.
//!
//! All parameters are computed on the discrete distribution given by the step
//! heights of the CDF. For an importance-sampling estimate the masses need not
//! sum to one; the formulas are applied as-is.

use std::fmt;
use std::str::FromStr;

use crate::cdf::StepCdf;
use crate::error::{Error, Result};
use crate::numeric;

/// Weighted mean `Σ dF(G_(i)) G_(i)`.
pub fn plugin_mean(cdf: &StepCdf) -> f64 {
    numeric::sum(cdf.breakpoints().iter().zip(cdf.masses()).map(|(&g, &m)| m * g))
}

/// `Σ dF(G_(i)) (G_(i) - mean)^2`.
pub fn plugin_variance(cdf: &StepCdf) -> f64 {
    let mu = plugin_mean(cdf);
    numeric::sum(cdf.breakpoints().iter().zip(cdf.masses()).map(|(&g, &m)| m * (g - mu) * (g - mu)))
}

pub fn plugin_quantile(cdf: &StepCdf, alpha: f64) -> Result<f64> {
    cdf.inverse(alpha)
}

/// Lower-tail CVaR in the generic form
/// `q - (1/alpha) Σ dF(G_(i)) max(0, q - G_(i))` with `q` the alpha-quantile.
pub fn plugin_cvar(cdf: &StepCdf, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("cvar level must lie in (0, 1), got {alpha}")));
    }
    let q = cdf.inverse(alpha)?;
    let shortfall = numeric::sum(
        cdf.breakpoints()
            .iter()
            .zip(cdf.masses())
            .map(|(&g, &m)| m * (q - g).max(0.0)),
    );
    Ok(q - shortfall / alpha)
}

/// Discrete Shannon entropy (natural log) of the step heights.
pub fn plugin_entropy(cdf: &StepCdf) -> f64 {
    -numeric::sum(cdf.masses().iter().filter(|&&m| m > 0.0).map(|&m| m * m.ln()))
}

/// A distributional parameter of a return CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parameter {
    Mean,
    Variance,
    Quantile(f64),
    /// Lower-tail conditional value at risk at level alpha.
    Cvar(f64),
    /// `Q(alpha2) - Q(alpha1)`.
    InterQuantile(f64, f64),
    Entropy,
}

impl Parameter {
    pub const MEDIAN: Parameter = Parameter::Quantile(0.5);

    /// Plug-in value of this parameter on `cdf`.
    pub fn evaluate(&self, cdf: &StepCdf) -> Result<f64> {
        match *self {
            Parameter::Mean => Ok(plugin_mean(cdf)),
            Parameter::Variance => Ok(plugin_variance(cdf)),
            Parameter::Quantile(a) => plugin_quantile(cdf, a),
            Parameter::Cvar(a) => plugin_cvar(cdf, a),
            Parameter::InterQuantile(a1, a2) => Ok(cdf.inverse(a2)? - cdf.inverse(a1)?),
            Parameter::Entropy => Ok(plugin_entropy(cdf)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |a: f64| a > 0.0 && a < 1.0;
        let ok = match *self {
            Parameter::Quantile(a) | Parameter::Cvar(a) => unit(a),
            Parameter::InterQuantile(a1, a2) => unit(a1) && unit(a2) && a1 < a2,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("parameter levels out of range: {self}")))
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match *self {
            Parameter::Mean => "mean".to_string(),
            Parameter::Variance => "variance".to_string(),
            Parameter::Quantile(a) if a == 0.5 => "median".to_string(),
            Parameter::Quantile(a) => format!("quantile@{a}"),
            Parameter::Cvar(a) => format!("cvar@{a}"),
            Parameter::InterQuantile(a1, a2) => format!("iqr@{a1}:{a2}"),
            Parameter::Entropy => "entropy".to_string(),
        };
        f.pad(&name)
    }
}

impl FromStr for Parameter {
    type Err = Error;

    /// Accepts `mean`, `variance`, `median`, `entropy`, `quantile@A`,
    /// `cvar@A`, `iqr` (0.25:0.75) and `iqr@A1:A2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let level = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::invalid(format!("bad level in parameter '{s}'")))
        };
        let p = match s.split_once('@') {
            None => match s {
                "mean" => Parameter::Mean,
                "variance" | "var" => Parameter::Variance,
                "median" => Parameter::MEDIAN,
                "entropy" => Parameter::Entropy,
                "iqr" => Parameter::InterQuantile(0.25, 0.75),
                _ => return Err(Error::invalid(format!("unknown parameter '{s}'"))),
            },
            Some(("quantile", a)) => Parameter::Quantile(level(a)?),
            Some(("cvar", a)) => Parameter::Cvar(level(a)?),
            Some(("iqr", a)) => {
                let (a1, a2) = a
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("iqr needs two levels: '{s}'")))?;
                Parameter::InterQuantile(level(a1)?, level(a2)?)
            }
            Some(_) => return Err(Error::invalid(format!("unknown parameter '{s}'"))),
        };
        p.validate()?;
        Ok(p)
    }
}
