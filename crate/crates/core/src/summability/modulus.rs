use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::Evaluator;

/// A candidate modulus function `f: [0, inf) -> [0, inf)`.
#[derive(Clone)]
pub struct ModulusSpec {
    name: String,
    eval: Evaluator,
}

impl fmt::Debug for ModulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusSpec").field("name", &self.name).finish()
    }
}

impl ModulusSpec {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ModulusSpec {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn sqrt() -> Self {
        ModulusSpec::new("sqrt", f64::sqrt)
    }

    pub fn log1p() -> Self {
        ModulusSpec::new("log1p", f64::ln_1p)
    }

    pub fn identity() -> Self {
        ModulusSpec::new("identity", |x| x)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "sqrt" => Some(ModulusSpec::sqrt()),
            "log1p" => Some(ModulusSpec::log1p()),
            "identity" => Some(ModulusSpec::identity()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

/// Sample points used when none are given: `0`, then integers up to `10^6`.
/// The smallest positive point is 1, so a failing pair is reported as `(1, 1)`
/// whenever that pair fails.
pub const DEFAULT_MODULUS_POINTS: [f64; 10] = [0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 100.0, 1e3, 1e4, 1e6];

#[derive(Debug, Clone, Serialize)]
pub struct ModulusCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl ModulusCheck {
    fn new(name: &'static str, failure: Option<String>) -> Self {
        ModulusCheck {
            name,
            passed: failure.is_none(),
            detail: failure.unwrap_or_else(|| "ok".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    pub modulus: String,
    pub zero_only_at_zero: ModulusCheck,
    pub subadditive: ModulusCheck,
    pub increasing: ModulusCheck,
    pub right_continuous_at_zero: ModulusCheck,
    pub unbounded: ModulusCheck,
    /// First failing pair `(x, y)`, `x <= y`, in sorted scan order.
    pub subadditivity_witness: Option<(f64, f64)>,
}

impl ModulusReport {
    pub fn checks(&self) -> [&ModulusCheck; 5] {
        [
            &self.zero_only_at_zero,
            &self.subadditive,
            &self.increasing,
            &self.right_continuous_at_zero,
            &self.unbounded,
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

fn slack(a: f64, b: f64) -> f64 {
    1e-12 * (1.0 + a.abs() + b.abs())
}

/// Checks the modulus axioms on a finite sample.
pub fn is_modulus(spec: &ModulusSpec, sample_points: &[f64]) -> Result<ModulusReport> {
    if sample_points.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::param("modulus sample points must be finite and nonnegative"));
    }
    if !sample_points.contains(&0.0) {
        return Err(Error::param("modulus sample points must include 0"));
    }
    let mut pts = sample_points.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let f = |x: f64| spec.eval(x);

    let zero = {
        let f0 = f(0.0);
        if f0 != 0.0 {
            Some(format!("f(0) = {f0}"))
        } else {
            pts.iter()
                .find(|&&x| x > 0.0 && !(f(x) > 0.0))
                .map(|&x| format!("f({x}) = {} is not positive", f(x)))
        }
    };

    let mut witness = None;
    'outer: for (i, &x) in pts.iter().enumerate() {
        for &y in &pts[i..] {
            let (fx, fy, fxy) = (f(x), f(y), f(x + y));
            if fxy > fx + fy + slack(fx, fy) {
                witness = Some((x, y));
                break 'outer;
            }
        }
    }
    let sub = witness.map(|(x, y)| format!("f({x} + {y}) = {} > {} = f({x}) + f({y})", f(x + y), f(x) + f(y)));

    let inc = pts.windows(2).find_map(|w| {
        let (a, b) = (f(w[0]), f(w[1]));
        (b < a - slack(a, b)).then(|| format!("f({}) = {a} > f({}) = {b}", w[0], w[1]))
    });

    let right = {
        let vals: Vec<f64> = (1..=12).map(|k| f(10f64.powi(-k))).collect();
        let tail = vals[11];
        if vals.windows(2).any(|w| w[1] > w[0] + slack(w[0], w[1])) {
            Some("f(10^-k) is not nonincreasing in k".to_string())
        } else if !(tail.abs() <= 1e-3 * f(1.0).abs().max(1.0)) {
            Some(format!("f(1e-12) = {tail} does not approach 0"))
        } else {
            None
        }
    };

    let unbounded = {
        let (a, b) = (f(1.0), f(1e6));
        (!(b > a)).then(|| format!("f(1e6) = {b} <= f(1) = {a}"))
    };

    Ok(ModulusReport {
        modulus: spec.name().to_string(),
        zero_only_at_zero: ModulusCheck::new("zero only at zero", zero),
        subadditive: ModulusCheck::new("subadditive", sub),
        increasing: ModulusCheck::new("increasing", inc),
        right_continuous_at_zero: ModulusCheck::new("right-continuous at 0", right),
        unbounded: ModulusCheck::new("unbounded", unbounded),
        subadditivity_witness: witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_moduli_pass() {
        for m in [ModulusSpec::sqrt(), ModulusSpec::log1p(), ModulusSpec::identity()] {
            let r = is_modulus(&m, &DEFAULT_MODULUS_POINTS).unwrap();
            assert!(r.passed(), "{}: {r:?}", m.name());
        }
    }

    #[test]
    fn square_fails_subadditivity_at_one_one() {
        let r = is_modulus(&ModulusSpec::new("x^2", |x| x * x), &DEFAULT_MODULUS_POINTS).unwrap();
        assert!(!r.subadditive.passed);
        assert_eq!(r.subadditivity_witness, Some((1.0, 1.0)));
        assert!(r.zero_only_at_zero.passed && r.increasing.passed);
    }

    #[test]
    fn bounded_and_shifted_functions_fail() {
        let bounded = ModulusSpec::new("min(x, 1)", |x| x.min(1.0));
        let r = is_modulus(&bounded, &DEFAULT_MODULUS_POINTS).unwrap();
        assert!(r.subadditive.passed && !r.unbounded.passed);

        let shifted = ModulusSpec::new("1+x", |x| 1.0 + x);
        let r = is_modulus(&shifted, &DEFAULT_MODULUS_POINTS).unwrap();
        assert!(!r.zero_only_at_zero.passed && !r.right_continuous_at_zero.passed);

        let decreasing = ModulusSpec::new("x e^-x", |x| x * (-x).exp());
        assert!(!is_modulus(&decreasing, &DEFAULT_MODULUS_POINTS).unwrap().increasing.passed);
    }

    #[test]
    fn sample_point_preconditions() {
        assert!(is_modulus(&ModulusSpec::sqrt(), &[1.0, 2.0]).is_err());
        assert!(is_modulus(&ModulusSpec::sqrt(), &[0.0, -1.0]).is_err());
    }
}
