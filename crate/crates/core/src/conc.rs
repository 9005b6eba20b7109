//! Concentration intervals for the CDF value at a single key point.
//!
//! At a key point `kappa` the variable `X = rho * 1{G <= kappa}` has mean
//! `F(kappa)`. Truncating the weight at a cap `c` only lowers a nonnegative
//! variable, so a lower confidence bound on `E[min(rho, c) 1{G <= kappa}]` is a
//! valid lower bound on `F(kappa)` without knowing the largest possible ratio.
//! Upper bounds use the complement `E[rho 1{G > kappa}] = 1 - F(kappa)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::returns::ReturnDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// Maurer–Pontil empirical Bernstein bound on truncated weights.
    TruncatedEmpiricalBernstein,
    /// Hoeffding bound for variables in `[0, cap]`.
    HoeffdingWithCap,
}

/// Scalar interval method with its weight-truncation cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiMethod {
    pub kind: CiKind,
    pub cap: f64,
}

impl CiMethod {
    pub fn new(kind: CiKind, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::invalid(format!("cap must be positive and finite, got {cap}")));
        }
        Ok(Self { kind, cap })
    }

    pub fn empirical_bernstein(cap: f64) -> Result<Self> {
        Self::new(CiKind::TruncatedEmpiricalBernstein, cap)
    }

    pub fn hoeffding(cap: f64) -> Result<Self> {
        Self::new(CiKind::HoeffdingWithCap, cap)
    }

    /// One-sided lower confidence bound on the mean of variables in
    /// `[0, cap]`, from their sum, sum of squares and count. The deviation
    /// terms use `n_eff` samples, which lets a bound be predicted for a
    /// larger held-out set from a small training split.
    fn lower_mean(&self, s1: f64, s2: f64, n: usize, n_eff: usize, delta: f64) -> f64 {
        let nf = n as f64;
        let mean = s1 / nf;
        let ne = n_eff as f64;
        match self.kind {
            CiKind::TruncatedEmpiricalBernstein => {
                let var = ((s2 - s1 * s1 / nf) / (nf - 1.0)).max(0.0);
                let log_term = (2.0 / delta).ln();
                mean - (2.0 * var * log_term / ne).sqrt() - 7.0 * self.cap * log_term / (3.0 * (ne - 1.0))
            }
            CiKind::HoeffdingWithCap => mean - self.cap * ((1.0 / delta).ln() / (2.0 * ne)).sqrt(),
        }
    }

    fn min_samples(&self) -> usize {
        match self.kind {
            CiKind::TruncatedEmpiricalBernstein => 2,
            CiKind::HoeffdingWithCap => 1,
        }
    }
}

/// Prefix sums over the return-sorted, truncated weights of a dataset, so
/// that intervals at many key points cost `O(log n)` each.
#[derive(Debug, Clone)]
pub struct KeyPointEvaluator {
    method: CiMethod,
    sorted_g: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
}

impl KeyPointEvaluator {
    pub fn new(data: &ReturnDataset, method: CiMethod) -> Result<Self> {
        if data.len() < method.min_samples() {
            return Err(Error::invalid(format!(
                "need at least {} samples for this interval, got {}",
                method.min_samples(),
                data.len()
            )));
        }
        let atoms = data.sorted_atoms();
        let mut prefix = Vec::with_capacity(atoms.len() + 1);
        let mut prefix_sq = Vec::with_capacity(atoms.len() + 1);
        let mut s1 = numeric::CompensatedSum::new();
        let mut s2 = numeric::CompensatedSum::new();
        prefix.push(0.0);
        prefix_sq.push(0.0);
        for &(_, rho) in &atoms {
            let w = rho.min(method.cap);
            s1.add(w);
            s2.add(w * w);
            prefix.push(s1.value());
            prefix_sq.push(s2.value());
        }
        Ok(Self { method, sorted_g: atoms.into_iter().map(|a| a.0).collect(), prefix, prefix_sq })
    }

    pub fn len(&self) -> usize {
        self.sorted_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_g.is_empty()
    }

    pub fn method(&self) -> CiMethod {
        self.method
    }

    fn split(&self, kappa: f64) -> ((f64, f64), (f64, f64)) {
        let k = self.sorted_g.partition_point(|&g| g <= kappa);
        let n = self.sorted_g.len();
        let below = (self.prefix[k], self.prefix_sq[k]);
        let above = (self.prefix[n] - self.prefix[k], (self.prefix_sq[n] - self.prefix_sq[k]).max(0.0));
        (below, above)
    }

    /// Lower bound on `F(kappa)` with deviation terms computed for `n_eff`
    /// samples.
    pub fn lower_as_if(&self, kappa: f64, delta: f64, n_eff: usize) -> f64 {
        let ((s1, s2), _) = self.split(kappa);
        self.method.lower_mean(s1, s2, self.len(), n_eff, delta).clamp(0.0, 1.0)
    }

    /// Upper bound on `F(kappa)` with deviation terms computed for `n_eff`
    /// samples.
    pub fn upper_as_if(&self, kappa: f64, delta: f64, n_eff: usize) -> f64 {
        let (_, (s1, s2)) = self.split(kappa);
        let lower_complement = self.method.lower_mean(s1, s2, self.len(), n_eff, delta).max(0.0);
        (1.0 - lower_complement).clamp(0.0, 1.0)
    }

    pub fn lower(&self, kappa: f64, delta: f64) -> f64 {
        self.lower_as_if(kappa, delta, self.len())
    }

    pub fn upper(&self, kappa: f64, delta: f64) -> f64 {
        self.upper_as_if(kappa, delta, self.len())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Lower confidence bound on `F(kappa)` holding with probability `1 - delta`.
pub fn ci_lower(data: &ReturnDataset, kappa: f64, delta: f64, method: CiMethod) -> Result<f64> {
    check_delta(delta)?;
    Ok(KeyPointEvaluator::new(data, method)?.lower(kappa, delta))
}

/// Upper confidence bound on `F(kappa)` holding with probability `1 - delta`.
pub fn ci_upper(data: &ReturnDataset, kappa: f64, delta: f64, method: CiMethod) -> Result<f64> {
    check_delta(delta)?;
    Ok(KeyPointEvaluator::new(data, method)?.upper(kappa, delta))
}

/// Chooses the truncation cap on a training split: the candidate (one of the
/// observed ratios) maximizing the empirical Bernstein lower bound on
/// `E[min(rho, c)]` predicted for `eval_size` samples. Falls back to the 95th
/// percentile of the observed ratios when the split is too small.
pub fn select_cap(train: &ReturnDataset, eval_size: usize, delta: f64) -> f64 {
    let mut rhos: Vec<f64> = train.samples().iter().map(|s| s.rho).filter(|&r| r > 0.0).collect();
    rhos.sort_by(f64::total_cmp);
    if rhos.is_empty() {
        return 1.0;
    }
    let fallback = numeric::sorted_quantile(&rhos, 0.95).max(f64::MIN_POSITIVE);
    if train.len() < 2 || eval_size < 2 || !(delta > 0.0 && delta < 1.0) {
        return fallback;
    }
    let mut candidates = rhos.clone();
    candidates.dedup();
    let n = train.len();
    let mut best = (f64::NEG_INFINITY, fallback);
    for &c in &candidates {
        let method = CiMethod { kind: CiKind::TruncatedEmpiricalBernstein, cap: c };
        let (s1, s2) = train
            .samples()
            .iter()
            .map(|s| s.rho.min(c))
            .fold((0.0, 0.0), |(a, b), w| (a + w, b + w * w));
        let lb = method.lower_mean(s1, s2, n, eval_size, delta);
        if lb > best.0 {
            best = (lb, c);
        }
    }
    best.1
}
