use std::fmt;
use std::sync::Arc;

/// Finite-horizon mass of an index set: `density(S, N)` for `S` a sorted
/// subset of `1..=N`.
pub type DensityFn = Arc<dyn Fn(&[usize], usize) -> f64 + Send + Sync>;

/// A density-style ideal of subsets of the positive integers.
#[derive(Clone)]
pub enum IdealSpec {
    /// Finite sets; membership is read off the tail `(N/2, N]`.
    FiniteSets,
    /// Sets of natural density zero.
    ZeroDensity,
    CustomDensity { name: String, density: DensityFn },
}

impl fmt::Debug for IdealSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl IdealSpec {
    /// Sets of logarithmic density zero.
    pub fn logarithmic() -> Self {
        IdealSpec::CustomDensity {
            name: "logarithmic".into(),
            density: Arc::new(|set, n| {
                let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
                set.iter().map(|&k| 1.0 / k as f64).sum::<f64>() / harmonic
            }),
        }
    }

    pub fn name(&self) -> String {
        match self {
            IdealSpec::FiniteSets => "finite_sets".into(),
            IdealSpec::ZeroDensity => "zero_density".into(),
            IdealSpec::CustomDensity { name, .. } => name.clone(),
        }
    }

    pub fn density(&self, set: &[usize], n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            IdealSpec::ZeroDensity => set.iter().filter(|&&k| k >= 1 && k <= n).count() as f64 / n as f64,
            IdealSpec::FiniteSets => {
                let half = n / 2;
                let tail = set.iter().filter(|&&k| k > half && k <= n).count();
                tail as f64 / (n - half) as f64
            }
            IdealSpec::CustomDensity { density, .. } => density(set, n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_has_zero_mass() {
        for ideal in [IdealSpec::FiniteSets, IdealSpec::ZeroDensity, IdealSpec::logarithmic()] {
            assert_eq!(ideal.density(&[], 100), 0.0);
        }
    }

    #[test]
    fn finite_sets_tail_proxy() {
        let early: Vec<usize> = (1..=10).collect();
        assert_eq!(IdealSpec::FiniteSets.density(&early, 1000), 0.0);
        let all: Vec<usize> = (1..=100).collect();
        assert_eq!(IdealSpec::FiniteSets.density(&all, 100), 1.0);
    }

    #[test]
    fn monotone_in_the_set() {
        let small = vec![2, 5, 9];
        let big = vec![1, 2, 5, 9, 40];
        for ideal in [IdealSpec::FiniteSets, IdealSpec::ZeroDensity, IdealSpec::logarithmic()] {
            assert!(ideal.density(&small, 50) <= ideal.density(&big, 50));
        }
    }
}
