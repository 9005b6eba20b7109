//! Right-continuous piecewise-constant functions on the real line.
//!
//! [`StepCdf`] represents both estimated CDFs (which, for importance-sampling
//! estimates, may end below or above one) and the lower/upper envelopes of a
//! confidence band. All integrals over a step function are computed exactly as
//! sums of value times interval length.

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Right-continuous, non-decreasing step function.
///
/// `eval(nu)` returns the value attached to the largest breakpoint `<= nu`, or
/// `value_before_first` when `nu` lies left of every breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    masses: Vec<f64>,
    value_before_first: f64,
    unnormalized: bool,
}

impl StepCdf {
    /// Builds a step function from breakpoints and the value held on
    /// `[breakpoint_i, breakpoint_{i+1})`.
    pub fn from_steps(breakpoints: Vec<f64>, values: Vec<f64>, value_before_first: f64) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::invalid("breakpoints and values differ in length"));
        }
        if !value_before_first.is_finite() || value_before_first < 0.0 {
            return Err(Error::invalid("value before first breakpoint must be finite and nonnegative"));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("breakpoints must be strictly increasing"));
            }
        }
        let mut prev = value_before_first;
        let mut masses = Vec::with_capacity(values.len());
        for (&b, &v) in breakpoints.iter().zip(&values) {
            if !b.is_finite() || !v.is_finite() {
                return Err(Error::invalid("non-finite breakpoint or value"));
            }
            if v < prev {
                return Err(Error::invalid("values must be non-decreasing"));
            }
            masses.push(v - prev);
            prev = v;
        }
        let unnormalized = prev > 1.0;
        Ok(Self { breakpoints, values, masses, value_before_first, unnormalized })
    }

    /// Constant function.
    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: Vec::new(),
            masses: Vec::new(),
            value_before_first: value,
            unnormalized: value > 1.0,
        }
    }

    /// Point mass at `at`.
    pub fn point_mass(at: f64) -> Self {
        Self::from_steps(vec![at], vec![1.0], 0.0).expect("point mass is well formed")
    }

    /// Discrete distribution from `(value, mass)` atoms. Masses need not be
    /// normalized; duplicate values are merged.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.to_vec();
        if atoms.iter().any(|(g, w)| !g.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("atoms must be finite with nonnegative mass"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_atoms(&atoms, 1.0, false))
    }

    /// Builds the weighted empirical step function from atoms sorted by value.
    /// Each atom contributes `weight * scale` mass; ties share one breakpoint.
    pub(crate) fn from_sorted_atoms(sorted: &[(f64, f64)], scale: f64, normalize_terminal: bool) -> Self {
        let mut breakpoints = Vec::with_capacity(sorted.len());
        let mut masses = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let g = sorted[i].0;
            let mut group = CompensatedSum::new();
            while i < sorted.len() && sorted[i].0 == g {
                group.add(sorted[i].1 * scale);
                i += 1;
            }
            breakpoints.push(g);
            masses.push(group.value());
        }
        let mut running = CompensatedSum::new();
        let mut values: Vec<f64> = masses
            .iter()
            .map(|&m| {
                running.add(m);
                running.value()
            })
            .collect();
        if normalize_terminal {
            for v in values.iter_mut() {
                *v = v.min(1.0);
            }
            if let Some(last) = values.last_mut() {
                *last = 1.0;
            }
        }
        let terminal = values.last().copied().unwrap_or(0.0);
        Self { breakpoints, values, masses, value_before_first: 0.0, unnormalized: terminal > 1.0 }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Step heights, one per breakpoint.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn value_before_first(&self) -> f64 {
        self.value_before_first
    }

    /// Value right of the last breakpoint.
    pub fn terminal(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.value_before_first)
    }

    /// True when the function exceeds one somewhere, which only an
    /// importance-sampling estimate may do.
    pub fn is_unnormalized(&self) -> bool {
        self.unnormalized
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, nu: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= nu);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `lim_{x -> nu^-} F(x)`.
    pub fn eval_left(&self, nu: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b < nu);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }

    /// `min { g in breakpoints : F(g) >= alpha }`, falling back to the largest
    /// breakpoint when the function never reaches `alpha`.
    pub fn inverse(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let last = *self.breakpoints.last().ok_or(Error::NoSamples)?;
        let idx = self.values.partition_point(|&v| v < alpha);
        Ok(self.breakpoints.get(idx).copied().unwrap_or(last))
    }

    /// `inf { nu : F(nu) >= alpha }` for a function that does reach `alpha`;
    /// `None` otherwise. Unlike [`inverse`](Self::inverse) this accounts for
    /// `value_before_first`.
    pub fn first_reaching(&self, alpha: f64) -> Option<f64> {
        if self.value_before_first >= alpha {
            return Some(f64::NEG_INFINITY);
        }
        let idx = self.values.partition_point(|&v| v < alpha);
        self.breakpoints.get(idx).copied()
    }

    /// `(value, mass)` pairs, one per breakpoint.
    pub fn pmf(&self) -> Vec<(f64, f64)> {
        self.breakpoints.iter().copied().zip(self.masses.iter().copied()).collect()
    }

    /// Exact `∫_a^b F(nu) dnu` for `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut acc = CompensatedSum::new();
        let mut x = a;
        let mut level = self.eval(a);
        let start = self.breakpoints.partition_point(|&p| p <= a);
        for (&p, &v) in self.breakpoints[start..].iter().zip(&self.values[start..]) {
            if p >= b {
                break;
            }
            acc.add(level * (p - x));
            x = p;
            level = v;
        }
        acc.add(level * (b - x));
        acc.value()
    }

    /// Pointwise combination on the union of both breakpoint sets.
    ///
    /// `f` must preserve monotonicity (e.g. `min`, `max`, clamped shifts).
    pub fn combine(&self, other: &StepCdf, f: impl Fn(f64, f64) -> f64) -> Result<StepCdf> {
        let points = merge_points(&self.breakpoints, &other.breakpoints);
        let values = points.iter().map(|&p| f(self.eval(p), other.eval(p))).collect();
        let before = f(self.value_before_first, other.value_before_first);
        StepCdf::from_steps(points, values, before)?.compact()
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<StepCdf> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        StepCdf::from_steps(self.breakpoints.clone(), values, f(self.value_before_first))?.compact()
    }

    /// Drops breakpoints that do not change the value.
    pub fn compact(self) -> Result<StepCdf> {
        let mut bps = Vec::with_capacity(self.breakpoints.len());
        let mut vals = Vec::with_capacity(self.values.len());
        let mut prev = self.value_before_first;
        for (&b, &v) in self.breakpoints.iter().zip(&self.values) {
            if v != prev {
                bps.push(b);
                vals.push(v);
                prev = v;
            }
        }
        StepCdf::from_steps(bps, vals, self.value_before_first)
    }

    /// Largest absolute pointwise difference to `other`.
    pub fn sup_distance(&self, other: &StepCdf) -> f64 {
        let points = merge_points(&self.breakpoints, &other.breakpoints);
        let mut d = (self.value_before_first - other.value_before_first).abs();
        for p in points {
            d = d.max((self.eval(p) - other.eval(p)).abs());
        }
        d
    }

    /// Mean of the normalized distribution supported on the breakpoints.
    pub fn mean(&self) -> f64 {
        numeric::sum(self.pmf().into_iter().map(|(g, m)| g * m))
    }
}

/// Sorted union of two sorted breakpoint lists without duplicates.
pub(crate) fn merge_points(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4() -> StepCdf {
        StepCdf::from_atoms(&[(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]).unwrap()
    }

    #[test]
    fn eval_is_right_continuous() {
        let f = uniform4();
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.0), 0.25);
        assert_eq!(f.eval(1.999), 0.25);
        assert_eq!(f.eval_left(2.0), 0.25);
        assert_eq!(f.eval(2.0), 0.5);
        assert_eq!(f.eval(10.0), 1.0);
    }

    #[test]
    fn rejects_malformed_steps() {
        assert!(StepCdf::from_steps(vec![1.0, 1.0], vec![0.1, 0.2], 0.0).is_err());
        assert!(StepCdf::from_steps(vec![1.0, 2.0], vec![0.3, 0.2], 0.0).is_err());
        assert!(StepCdf::from_steps(vec![1.0], vec![0.3, 0.2], 0.0).is_err());
    }

    #[test]
    fn integral_is_exact() {
        let f = uniform4();
        // ∫_0^5 F = 0.25 + 0.5 + 0.75 + 1.0
        assert!((f.integral(0.0, 5.0) - 2.5).abs() < 1e-15);
        assert!((f.integral(1.5, 2.5) - (0.5 * 0.25 + 0.5 * 0.5)).abs() < 1e-15);
        assert_eq!(f.integral(3.0, 3.0), 0.0);
    }

    #[test]
    fn inverse_falls_back_to_largest_breakpoint() {
        let f = StepCdf::from_atoms(&[(1.0, 0.125), (2.0, 0.125), (3.0, 0.125), (4.0, 0.125)]).unwrap();
        assert_eq!(f.inverse(0.9).unwrap(), 4.0);
        assert_eq!(f.inverse(0.25).unwrap(), 2.0);
        assert!(f.inverse(0.0).is_err());
        assert!(f.inverse(1.5).is_err());
    }

    #[test]
    fn combine_takes_union_of_breakpoints() {
        let a = StepCdf::from_steps(vec![1.0, 3.0], vec![0.5, 1.0], 0.0).unwrap();
        let b = StepCdf::from_steps(vec![2.0], vec![0.7], 0.0).unwrap();
        let m = a.combine(&b, f64::max).unwrap();
        assert_eq!(m.breakpoints(), &[1.0, 2.0, 3.0]);
        assert_eq!(m.values(), &[0.5, 0.7, 1.0]);
    }

    #[test]
    fn merge_points_dedups() {
        assert_eq!(merge_points(&[1.0, 2.0, 4.0], &[2.0, 3.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
