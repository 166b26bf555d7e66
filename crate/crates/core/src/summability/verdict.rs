use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-horizon reading of a residual curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Medians closer than this count as equal, so curves made of round-off
/// noise do not flip the comparison.
pub const MEDIAN_ATOL: f64 = 1e-10;

/// Quartile rule.
///
/// * consistent: every residual in the final quarter is `<= tau` and the
///   final-quarter median does not exceed the first-quarter median;
/// * inconsistent: the final-quarter minimum is `> tau` and the medians do
///   not decrease;
/// * indeterminate otherwise.
pub fn decide_verdict(curve: &[(usize, f64)], tau: f64) -> Result<Verdict> {
    if curve.len() < 8 {
        return Err(Error::TooFewPoints(curve.len()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    if curve.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::param("residual indices must be strictly increasing"));
    }
    if let Some((n, r)) = curve.iter().find(|(_, r)| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::param(format!("residual at n = {n} is {r}, expected a finite nonnegative value")));
    }
    let q = curve.len() / 4;
    let first: Vec<f64> = curve[..q].iter().map(|p| p.1).collect();
    let last: Vec<f64> = curve[curve.len() - q..].iter().map(|p| p.1).collect();
    let (m_first, m_last) = (median(&first), median(&last));
    let last_max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last_min = last.iter().copied().fold(f64::INFINITY, f64::min);
    if last_max <= tau && m_last <= m_first + MEDIAN_ATOL {
        Ok(Verdict::Consistent)
    } else if last_min > tau && m_last >= m_first - MEDIAN_ATOL {
        Ok(Verdict::Inconsistent)
    } else {
        Ok(Verdict::Indeterminate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_curve_is_consistent() {
        let c: Vec<_> = (1..=100).map(|n| (n, 1.0 / (4.0 * n as f64))).collect();
        assert_eq!(decide_verdict(&c, 0.01).unwrap(), Verdict::Consistent);
    }

    #[test]
    fn flat_curve_is_inconsistent() {
        let c: Vec<_> = (1..=100).map(|n| (n, 1.0)).collect();
        assert_eq!(decide_verdict(&c, 0.01).unwrap(), Verdict::Inconsistent);
    }

    #[test]
    fn oscillation_is_indeterminate() {
        let c: Vec<_> = (1..=100).map(|n| (n, (n % 2) as f64)).collect();
        assert_eq!(decide_verdict(&c, 0.01).unwrap(), Verdict::Indeterminate);
    }

    #[test]
    fn preconditions() {
        let c: Vec<_> = (1..=7).map(|n| (n, 0.0)).collect();
        assert!(matches!(decide_verdict(&c, 0.1), Err(Error::TooFewPoints(7))));
        let c: Vec<_> = (1..=8).map(|n| (9 - n, 0.0)).collect();
        assert!(decide_verdict(&c, 0.1).is_err());
        let c: Vec<_> = (1..=8).map(|n| (n, 0.0)).collect();
        assert!(decide_verdict(&c, 0.0).is_err());
    }
}
