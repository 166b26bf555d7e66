//! Residual functionals `rho(n)` for each summability method.
//!
//! Every functional is computed from the norm distances
//! `d_k = ||x_k - L||_inf`, except the matrix transform and the almost
//! (sliding-window) means, which need the terms themselves. The
//! `*_from_distances` helpers take `d` with `d[k - 1] = d_k`.

use rayon::prelude::*;

use super::ideal::IdealSpec;
use super::matrix::MatrixSpec;
use super::modulus::ModulusSpec;
use crate::error::{Error, Result};
use crate::funcspace::{Grid, SampledFunction};

/// A sequence `n -> x_n` of sampled functions, `n >= 1`.
pub trait FunctionSequence: Sync {
    fn term(&self, n: usize) -> Result<SampledFunction>;
}

impl<F> FunctionSequence for F
where
    F: Fn(usize) -> Result<SampledFunction> + Sync,
{
    fn term(&self, n: usize) -> Result<SampledFunction> {
        self(n)
    }
}

/// `n -> x_(n + offset)`: the same sequence with its first `offset` terms dropped.
pub struct Shifted<'a, S: ?Sized> {
    inner: &'a S,
    offset: usize,
}

pub fn shifted<S: FunctionSequence + ?Sized>(seq: &S, offset: usize) -> Shifted<'_, S> {
    Shifted { inner: seq, offset }
}

impl<S: FunctionSequence + ?Sized> FunctionSequence for Shifted<'_, S> {
    fn term(&self, n: usize) -> Result<SampledFunction> {
        self.inner.term(n + self.offset)
    }
}

/// Terms `x_1..=x_len`.
pub fn terms<S: FunctionSequence + ?Sized>(seq: &S, len: usize) -> Result<Vec<SampledFunction>> {
    (1..=len).into_par_iter().map(|n| seq.term(n)).collect()
}

/// Distances `d_1..=d_len` to `limit`.
pub fn distances<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, len: usize) -> Result<Vec<f64>> {
    (1..=len)
        .into_par_iter()
        .map(|n| seq.term(n)?.distance(limit))
        .collect()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must be positive, got {epsilon}")))
    }
}

fn check_horizon(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::param("horizon N must be at least 1"))
    }
}

/// Indices `k` (1-based) with `d_k > epsilon`.
pub fn exceedances(d: &[f64], epsilon: f64) -> Vec<usize> {
    d.iter()
        .enumerate()
        .filter(|(_, &v)| v > epsilon)
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn statistical_from_distances(d: &[f64], epsilon: f64) -> f64 {
    d.iter().filter(|&&v| v > epsilon).count() as f64 / d.len() as f64
}

pub fn strong_wp_from_distances(d: &[f64], p: f64) -> f64 {
    d.iter().map(|v| v.powf(p)).sum::<f64>() / d.len() as f64
}

/// `sum_j alpha_nj d_j` over the row.
pub fn a_strong_from_distances(d: &[f64], row: &[(usize, f64)]) -> f64 {
    row.iter().map(|&(j, a)| a * d[j - 1]).sum()
}

/// `sum alpha_nj` over row entries with `d_j >= epsilon`.
pub fn a_statistical_from_distances(d: &[f64], row: &[(usize, f64)], epsilon: f64) -> f64 {
    row.iter().filter(|&&(j, _)| d[j - 1] >= epsilon).map(|e| e.1).sum()
}

fn modulus_denominator(modulus: &ModulusSpec, n: usize) -> Result<f64> {
    let fnv = modulus.eval(n as f64);
    if fnv > 0.0 && fnv.is_finite() {
        Ok(fnv)
    } else {
        Err(Error::DegenerateModulus(n as f64))
    }
}

pub fn f_statistical_from_distances(d: &[f64], modulus: &ModulusSpec, epsilon: f64) -> Result<f64> {
    let count = d.iter().filter(|&&v| v > epsilon).count();
    Ok(modulus.eval(count as f64) / modulus_denominator(modulus, d.len())?)
}

pub fn f_strong_from_distances(d: &[f64], modulus: &ModulusSpec) -> Result<f64> {
    let total: f64 = d.iter().sum();
    Ok(modulus.eval(total) / modulus_denominator(modulus, d.len())?)
}

fn check_row_within(row: &[(usize, f64)], available: usize, n: usize) -> Result<()> {
    match row.iter().map(|e| e.0).max() {
        Some(j) if j > available => Err(Error::InvalidRow {
            row: n,
            reason: format!("needs term {j}, only {available} available"),
        }),
        _ => Ok(()),
    }
}

/// `||x_n - L||`.
pub fn residual_norm<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, n: usize) -> Result<f64> {
    seq.term(n)?.distance(limit)
}

/// `#{k <= N : d_k > epsilon} / N`.
pub fn residual_statistical<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, epsilon: f64, n: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_horizon(n)?;
    Ok(statistical_from_distances(&distances(seq, limit, n)?, epsilon))
}

/// `(1/N) sum_(l <= N) d_l^p`.
pub fn residual_strong_wp<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, p: f64, n: usize) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!("p must be positive, got {p}")));
    }
    check_horizon(n)?;
    Ok(strong_wp_from_distances(&distances(seq, limit, n)?, p))
}

pub fn residual_a_strong<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, a: &MatrixSpec, n: usize) -> Result<f64> {
    let row = a.row(n)?;
    let len = row.iter().map(|e| e.0).max().unwrap_or(0);
    let d = distances(seq, limit, len)?;
    Ok(a_strong_from_distances(&d, &row))
}

pub fn residual_a_statistical<S: FunctionSequence + ?Sized>(
    seq: &S,
    limit: &SampledFunction,
    a: &MatrixSpec,
    epsilon: f64,
    n: usize,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let row = a.row(n)?;
    let len = row.iter().map(|e| e.0).max().unwrap_or(0);
    let d = distances(seq, limit, len)?;
    Ok(a_statistical_from_distances(&d, &row, epsilon))
}

/// `f(#{k <= N : d_k > epsilon}) / f(N)`.
pub fn residual_f_statistical<S: FunctionSequence + ?Sized>(
    seq: &S,
    limit: &SampledFunction,
    modulus: &ModulusSpec,
    epsilon: f64,
    n: usize,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_horizon(n)?;
    modulus_denominator(modulus, n)?;
    f_statistical_from_distances(&distances(seq, limit, n)?, modulus, epsilon)
}

/// `f(sum_(k <= N) d_k) / f(N)`.
pub fn residual_f_strong<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, modulus: &ModulusSpec, n: usize) -> Result<f64> {
    check_horizon(n)?;
    modulus_denominator(modulus, n)?;
    f_strong_from_distances(&distances(seq, limit, n)?, modulus)
}

/// `ideal.density({k <= N : d_k > epsilon}, N)`.
pub fn residual_ideal<S: FunctionSequence + ?Sized>(
    seq: &S,
    limit: &SampledFunction,
    ideal: &IdealSpec,
    epsilon: f64,
    n: usize,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_horizon(n)?;
    let d = distances(seq, limit, n)?;
    Ok(ideal.density(&exceedances(&d, epsilon), n))
}

/// Node-wise `sum_j alpha_nj x_j`.
pub fn apply_matrix<S: FunctionSequence + ?Sized>(seq: &S, a: &MatrixSpec, n: usize) -> Result<SampledFunction> {
    let row = a.row(n)?;
    let xs: Vec<SampledFunction> = row.par_iter().map(|&(j, _)| seq.term(j)).collect::<Result<_>>()?;
    let grid = match xs.first() {
        Some(x) => *x.grid(),
        None => *seq.term(1)?.grid(),
    };
    combine_row(grid, &row, |i| &xs[i])
}

/// `sum_j alpha_nj x_j` with `x_j = terms[j - 1]`.
pub fn apply_matrix_to_terms(terms: &[SampledFunction], a: &MatrixSpec, n: usize) -> Result<SampledFunction> {
    let row = a.row(n)?;
    check_row_within(&row, terms.len(), n)?;
    let grid = *terms.first().ok_or_else(|| Error::param("no terms"))?.grid();
    combine_row(grid, &row, |i| &terms[row[i].0 - 1])
}

/// `sum_i row[i].1 * term(i)`.
fn combine_row<'a>(grid: Grid, row: &[(usize, f64)], term: impl Fn(usize) -> &'a SampledFunction) -> Result<SampledFunction> {
    let mut acc = SampledFunction::zero(grid);
    for (i, &(_, a)) in row.iter().enumerate() {
        acc.add_scaled_assign(a, term(i))?;
    }
    Ok(acc)
}

/// Prefix sums of the terms, for sliding-window means.
pub struct WindowSums {
    prefix: Vec<SampledFunction>,
}

impl WindowSums {
    /// `prefix[k] = x_1 + ... + x_k`, `prefix[0] = 0`.
    pub fn new(terms: &[SampledFunction]) -> Result<Self> {
        let grid = *terms
            .first()
            .ok_or_else(|| Error::param("window sums need at least one term"))?
            .grid();
        let mut prefix = Vec::with_capacity(terms.len() + 1);
        let mut acc = SampledFunction::zero(grid);
        prefix.push(acc.clone());
        for t in terms {
            acc.add_scaled_assign(1.0, t)?;
            prefix.push(acc.clone());
        }
        Ok(WindowSums { prefix })
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `max_(1 <= n <= n_max) || (1/(m+1)) sum_(i=0..=m) x_(n+i) - L ||`.
    pub fn almost_residual(&self, limit: &SampledFunction, m: usize, n_max: usize) -> Result<f64> {
        if n_max == 0 {
            return Err(Error::param("n_max must be at least 1"));
        }
        if n_max + m > self.len() {
            return Err(Error::param(format!(
                "window m = {m} at n_max = {n_max} needs {} terms, have {}",
                n_max + m,
                self.len()
            )));
        }
        let width = (m + 1) as f64;
        let lim = limit.values();
        let active = limit.grid().active_len();
        let mut worst = 0.0f64;
        for n in 1..=n_max {
            let hi = self.prefix[n + m].values();
            let lo = self.prefix[n - 1].values();
            for k in 0..active {
                worst = worst.max(((hi[k] - lo[k]) / width - lim[k]).abs());
            }
        }
        Ok(worst)
    }
}

pub fn residual_almost<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, m: usize, n_max: usize) -> Result<f64> {
    if n_max == 0 {
        return Err(Error::param("n_max must be at least 1"));
    }
    let ts = terms(seq, n_max + m)?;
    if ts[0].grid() != limit.grid() {
        return Err(Error::GridMismatch);
    }
    WindowSums::new(&ts)?.almost_residual(limit, m, n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::RealFn;
    use crate::operators::{OperatorSequence, BinarySequence};

    fn grid() -> Grid {
        Grid::unit(10).unwrap()
    }

    fn scalar_seq(f: impl Fn(usize) -> f64 + Sync) -> impl Fn(usize) -> Result<SampledFunction> + Sync {
        move |n| Ok(SampledFunction::constant(grid(), f(n)))
    }

    fn squares_indicator(n: usize) -> f64 {
        if crate::operators::is_perfect_square(n) {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn norm_examples() {
        let g = Grid::unit(200).unwrap();
        let b = OperatorSequence::bernstein(g).unwrap();
        let t2 = RealFn::t_squared();
        let seq = |n: usize| b.apply(n, &t2);
        let lim = t2.sample(g).unwrap();
        assert!((residual_norm(&seq, &lim, 100).unwrap() - 0.0025).abs() < 1e-12);

        let constant = |_n: usize| Ok(lim.clone());
        assert_eq!(residual_norm(&constant, &lim, 5).unwrap(), 0.0);

        let modulated = OperatorSequence::modulated(b, BinarySequence::perfect_squares());
        let one = RealFn::one();
        let seq = |n: usize| modulated.apply(n, &one);
        assert_eq!(residual_norm(&seq, &one.sample(g).unwrap(), 49).unwrap(), 1.0);
    }

    #[test]
    fn statistical_examples() {
        let zero = SampledFunction::zero(grid());
        let seq = scalar_seq(squares_indicator);
        assert_eq!(residual_statistical(&seq, &zero, 0.5, 10_000).unwrap(), 0.01);
        let constant = scalar_seq(|_| 0.0);
        assert_eq!(residual_statistical(&constant, &zero, 1e-9, 37).unwrap(), 0.0);
        let always = scalar_seq(|_| 1.0);
        assert_eq!(residual_statistical(&always, &zero, 0.5, 50).unwrap(), 1.0);
        assert!(residual_statistical(&always, &zero, 0.0, 50).is_err());
    }

    #[test]
    fn strong_wp_examples() {
        let zero = SampledFunction::zero(grid());
        assert_eq!(residual_strong_wp(&scalar_seq(squares_indicator), &zero, 1.0, 100).unwrap(), 0.1);
        assert_eq!(residual_strong_wp(&scalar_seq(|_| 0.0), &zero, 1.0, 100).unwrap(), 0.0);
        assert_eq!(residual_strong_wp(&scalar_seq(|_| 1.0), &zero, 2.0, 7).unwrap(), 1.0);
        assert!(residual_strong_wp(&scalar_seq(|_| 1.0), &zero, 0.0, 7).is_err());
    }

    #[test]
    fn matrix_residual_examples() {
        let zero = SampledFunction::zero(grid());
        let seq = scalar_seq(|n| 1.0 / n as f64 + squares_indicator(n));
        let ces = MatrixSpec::cesaro();
        for n in [1, 7, 64, 300] {
            let a = residual_a_strong(&seq, &zero, &ces, n).unwrap();
            let b = residual_strong_wp(&seq, &zero, 1.0, n).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + b));
            let id = residual_a_strong(&seq, &zero, &MatrixSpec::identity(), n).unwrap();
            assert_eq!(id, residual_norm(&seq, &zero, n).unwrap());
        }
        let zero_row = MatrixSpec::explicit(vec![vec![], vec![(1, 0.0)]], None).unwrap();
        assert_eq!(residual_a_strong(&seq, &zero, &zero_row, 1).unwrap(), 0.0);
        assert_eq!(residual_a_strong(&seq, &zero, &zero_row, 2).unwrap(), 0.0);
    }

    #[test]
    fn a_statistical_examples() {
        let zero = SampledFunction::zero(grid());
        let ces = MatrixSpec::cesaro();
        let sq = scalar_seq(squares_indicator);
        assert!((residual_a_statistical(&sq, &zero, &ces, 0.5, 10_000).unwrap() - 0.01).abs() < 1e-14);
        assert_eq!(residual_a_statistical(&scalar_seq(|_| 0.0), &zero, &ces, 0.5, 40).unwrap(), 0.0);
        let all = residual_a_statistical(&scalar_seq(|_| 1.0), &zero, &ces, 0.5, 40).unwrap();
        assert!((all - 1.0).abs() < 1e-14);
    }

    #[test]
    fn f_statistical_examples() {
        let zero = SampledFunction::zero(grid());
        let sq = scalar_seq(squares_indicator);
        let id = residual_f_statistical(&sq, &zero, &ModulusSpec::identity(), 0.5, 10_000).unwrap();
        assert_eq!(id, residual_statistical(&sq, &zero, 0.5, 10_000).unwrap());
        let root = residual_f_statistical(&sq, &zero, &ModulusSpec::sqrt(), 0.5, 10_000).unwrap();
        assert_eq!(root, 0.1);
        assert_eq!(
            residual_f_statistical(&scalar_seq(|_| 0.0), &zero, &ModulusSpec::sqrt(), 0.5, 10).unwrap(),
            0.0
        );
        let flat = ModulusSpec::new("zero", |_| 0.0);
        assert!(matches!(
            residual_f_statistical(&sq, &zero, &flat, 0.5, 10),
            Err(Error::DegenerateModulus(_))
        ));
    }

    #[test]
    fn f_strong_examples() {
        let zero = SampledFunction::zero(grid());
        let harmonic = scalar_seq(|k| 1.0 / k as f64);
        // H_10000 by summation from the small end
        let h: f64 = (1..=10_000usize).rev().map(|k| 1.0 / k as f64).sum();
        let got = residual_f_strong(&harmonic, &zero, &ModulusSpec::sqrt(), 10_000).unwrap();
        assert!((got - h.sqrt() / 100.0).abs() < 1e-12);
        assert!((got - 0.031_3).abs() < 5e-4);
        assert_eq!(residual_f_strong(&scalar_seq(|_| 0.0), &zero, &ModulusSpec::sqrt(), 9).unwrap(), 0.0);
        assert_eq!(residual_f_strong(&scalar_seq(|_| 1.0), &zero, &ModulusSpec::identity(), 9).unwrap(), 1.0);
    }

    #[test]
    fn almost_examples() {
        let zero = SampledFunction::zero(grid());
        let alt = scalar_seq(|n| if n % 2 == 0 { 1.0 } else { -1.0 });
        for m in [0usize, 2, 10, 31, 100] {
            let r = residual_almost(&alt, &zero, m, 500).unwrap();
            if m % 2 == 0 {
                assert_eq!(r, 1.0 / (m + 1) as f64);
            } else {
                assert_eq!(r, 0.0);
            }
        }
        assert_eq!(residual_almost(&scalar_seq(|_| 0.0), &zero, 5, 20).unwrap(), 0.0);
        assert!(residual_almost(&alt, &zero, 5, 0).is_err());
    }

    #[test]
    fn apply_matrix_examples() {
        let seq = scalar_seq(|n| n as f64);
        assert_eq!(apply_matrix(&seq, &MatrixSpec::identity(), 6).unwrap(), seq.term(6).unwrap());
        let c = scalar_seq(|_| 3.5);
        let avg = apply_matrix(&c, &MatrixSpec::cesaro(), 9).unwrap();
        assert!(avg.values().iter().all(|v| (v - 3.5).abs() < 1e-14));
        let alt = scalar_seq(|n| if n % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!(apply_matrix(&alt, &MatrixSpec::cesaro(), 10).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn ideal_examples() {
        let zero = SampledFunction::zero(grid());
        let sq = scalar_seq(squares_indicator);
        assert_eq!(
            residual_ideal(&sq, &zero, &IdealSpec::ZeroDensity, 0.5, 2_000).unwrap(),
            residual_statistical(&sq, &zero, 0.5, 2_000).unwrap()
        );
        let early = scalar_seq(|n| if n <= 10 { 1.0 } else { 0.0 });
        assert_eq!(residual_ideal(&early, &zero, &IdealSpec::FiniteSets, 0.5, 1000).unwrap(), 0.0);
        let all = scalar_seq(|_| 1.0);
        assert_eq!(residual_ideal(&all, &zero, &IdealSpec::FiniteSets, 0.5, 100).unwrap(), 1.0);
    }

    #[test]
    fn shifted_drops_leading_terms() {
        let seq = scalar_seq(|n| n as f64);
        let s = shifted(&seq, 10);
        assert_eq!(s.term(1).unwrap().values()[0], 11.0);
    }
}
