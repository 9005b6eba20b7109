//! Return-level data model and the importance-sampling CDF estimators.
//!
//! Every logged episode is reduced to its discounted return `g` and its
//! importance ratio `rho` (the product over steps of evaluation-policy over
//! behavior-policy action probabilities). The estimators only ever see these
//! two numbers.

use serde::{Deserialize, Serialize};

use crate::cdf::StepCdf;
use crate::error::{Error, Result};

/// One logged episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub g: f64,
    pub rho: f64,
    pub episode: u64,
}

impl ReturnSample {
    pub fn new(g: f64, rho: f64, episode: u64) -> Self {
        Self { g, rho, episode }
    }
}

/// A collection of independent return samples with known return bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDataset {
    samples: Vec<ReturnSample>,
    g_min: f64,
    g_max: f64,
}

impl ReturnDataset {
    pub fn new(samples: Vec<ReturnSample>, g_min: f64, g_max: f64) -> Result<Self> {
        if !(g_min.is_finite() && g_max.is_finite() && g_min < g_max) {
            return Err(Error::invalid(format!("return bounds must satisfy g_min < g_max, got [{g_min}, {g_max}]")));
        }
        for s in &samples {
            if !(s.rho.is_finite() && s.rho >= 0.0) {
                return Err(Error::invalid(format!("episode {}: rho must be finite and nonnegative, got {}", s.episode, s.rho)));
            }
            if !(s.g.is_finite() && s.g >= g_min && s.g <= g_max) {
                return Err(Error::invalid(format!(
                    "episode {}: return {} outside [{g_min}, {g_max}]",
                    s.episode, s.g
                )));
            }
        }
        Ok(Self { samples, g_min, g_max })
    }

    /// Convenience constructor numbering episodes from 1.
    pub fn from_pairs(returns: &[f64], rhos: &[f64], g_min: f64, g_max: f64) -> Result<Self> {
        if returns.len() != rhos.len() {
            return Err(Error::invalid("returns and rhos differ in length"));
        }
        let samples = returns
            .iter()
            .zip(rhos)
            .enumerate()
            .map(|(i, (&g, &rho))| ReturnSample::new(g, rho, i as u64 + 1))
            .collect();
        Self::new(samples, g_min, g_max)
    }

    pub fn samples(&self) -> &[ReturnSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    /// Same bounds, different samples.
    pub fn with_samples(&self, samples: Vec<ReturnSample>) -> ReturnDataset {
        ReturnDataset { samples, g_min: self.g_min, g_max: self.g_max }
    }

    /// `(g, rho)` pairs in stable return order (order statistics).
    pub fn sorted_atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = self.samples.iter().map(|s| (s.g, s.rho)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    }

    pub fn rho_sum(&self) -> f64 {
        crate::numeric::sum(self.samples.iter().map(|s| s.rho))
    }
}

/// Importance-sampling CDF estimate `nu -> (1/n) Σ rho_i 1{G_i <= nu}`.
///
/// The terminal value is `(1/n) Σ rho_i` and is not clipped.
pub fn estimate_cdf_is(data: &ReturnDataset) -> Result<StepCdf> {
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = data.len() as f64;
    let atoms: Vec<(f64, f64)> = data.sorted_atoms().into_iter().map(|(g, rho)| (g, rho / n)).collect();
    Ok(StepCdf::from_sorted_atoms(&atoms, 1.0, false))
}

/// Weighted-importance-sampling CDF estimate
/// `nu -> Σ rho_i 1{G_i <= nu} / Σ rho_j`; the terminal value is exactly 1.
pub fn estimate_cdf_wis(data: &ReturnDataset) -> Result<StepCdf> {
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    wis_from_sorted(&data.sorted_atoms())
}

/// WIS estimate from `(g, weight)` atoms already sorted by `g`.
pub(crate) fn wis_from_sorted(atoms: &[(f64, f64)]) -> Result<StepCdf> {
    let total = crate::numeric::sum(atoms.iter().map(|a| a.1));
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let scaled: Vec<(f64, f64)> = atoms.iter().map(|&(g, w)| (g, w / total)).collect();
    Ok(StepCdf::from_sorted_atoms(&scaled, 1.0, true))
}

/// Off-policy inverse CDF: the smallest order statistic whose estimated CDF
/// reaches `alpha`, or the largest order statistic when none does.
pub fn inverse_cdf(cdf: &StepCdf, alpha: f64) -> Result<f64> {
    cdf.inverse(alpha)
}

/// Probability mass at each distinct order statistic (the step heights).
pub fn discrete_pmf(cdf: &StepCdf) -> Vec<(f64, f64)> {
    cdf.pmf()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(g: &[f64], rho: &[f64]) -> ReturnDataset {
        ReturnDataset::from_pairs(g, rho, 0.0, 10.0).unwrap()
    }

    #[test]
    fn identity_weights_give_empirical_cdf() {
        let f = estimate_cdf_is(&ds(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0])).unwrap();
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.5), 0.0);
        assert!((f.eval(3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn is_estimate_direct_evaluation() {
        let f = estimate_cdf_is(&ds(&[1.0, 2.0, 3.0, 4.0], &[0.5, 1.5, 1.0, 1.0])).unwrap();
        assert_eq!(f.eval(2.5), 0.5);
        assert_eq!(f.eval(4.0), 1.0);
    }

    #[test]
    fn is_estimate_can_exceed_one() {
        let f = estimate_cdf_is(&ds(&[1.0, 2.0], &[3.0, 1.0])).unwrap();
        assert_eq!(f.terminal(), 2.0);
        assert!(f.is_unnormalized());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = ReturnDataset::new(vec![], 0.0, 1.0).unwrap();
        assert_eq!(estimate_cdf_is(&d), Err(Error::NoSamples));
        assert_eq!(estimate_cdf_wis(&d), Err(Error::NoSamples));
    }

    #[test]
    fn wis_examples() {
        let f = estimate_cdf_wis(&ds(&[0.0, 10.0], &[1.0, 1.0])).unwrap();
        assert_eq!(f.eval(5.0), 0.5);
        let f = estimate_cdf_wis(&ds(&[0.0, 10.0], &[3.0, 1.0])).unwrap();
        assert_eq!(f.eval(5.0), 0.75);
        assert_eq!(f.terminal(), 1.0);
    }

    #[test]
    fn wis_single_sample_is_point_mass() {
        let f = estimate_cdf_wis(&ds(&[4.0], &[0.3])).unwrap();
        assert_eq!(f.eval(4.0), 1.0);
        assert_eq!(f.eval(3.9), 0.0);
    }

    #[test]
    fn wis_rejects_all_zero_weights() {
        assert_eq!(estimate_cdf_wis(&ds(&[1.0, 2.0], &[0.0, 0.0])), Err(Error::DegenerateWeights));
    }

    #[test]
    fn ties_share_a_breakpoint() {
        let f = estimate_cdf_is(&ds(&[2.0, 1.0, 2.0], &[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(f.breakpoints(), &[1.0, 2.0]);
        assert!((f.masses()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let f = estimate_cdf_is(&ds(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4])).unwrap();
        assert_eq!(inverse_cdf(&f, 0.5).unwrap(), 2.0);
        assert_eq!(inverse_cdf(&f, 1.0).unwrap(), 4.0);
        let f = estimate_cdf_is(&ds(&[1.0, 2.0, 3.0, 4.0], &[0.5; 4])).unwrap();
        assert_eq!(inverse_cdf(&f, 0.9).unwrap(), 4.0);
        assert!(inverse_cdf(&f, 0.0).is_err());
        assert!(inverse_cdf(&f, 1.01).is_err());
    }

    #[test]
    fn pmf_examples() {
        let f = estimate_cdf_is(&ds(&[3.0, 7.0], &[1.0, 1.0])).unwrap();
        assert_eq!(discrete_pmf(&f), vec![(3.0, 0.5), (7.0, 0.5)]);
        let f = estimate_cdf_is(&ds(&[3.0, 7.0], &[2.0, 0.0])).unwrap();
        assert_eq!(discrete_pmf(&f), vec![(3.0, 1.0), (7.0, 0.0)]);
    }

    #[test]
    fn dataset_validation() {
        assert!(ReturnDataset::from_pairs(&[11.0], &[1.0], 0.0, 10.0).is_err());
        assert!(ReturnDataset::from_pairs(&[1.0], &[-1.0], 0.0, 10.0).is_err());
        assert!(ReturnDataset::from_pairs(&[1.0], &[f64::INFINITY], 0.0, 10.0).is_err());
        assert!(ReturnDataset::from_pairs(&[1.0], &[1.0], 10.0, 0.0).is_err());
    }
}
