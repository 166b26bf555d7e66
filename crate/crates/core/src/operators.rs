//! Positive linear operator sequences `n -> L_n`.
//!
//! Bernstein operators read their input at the nodes `k/n`, so they take a
//! [`RealFn`]. Fejér means only need grid data and are computed by
//! trapezoidal quadrature of the kernel convolution. The modulated family
//! `(1 + z_n) L_n` is the standard example of a sequence that converges
//! statistically but not uniformly.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{Grid, RealFn, SampledFunction};

/// Largest Bernstein degree accepted.
pub const MAX_BERNSTEIN_DEGREE: usize = 10_000;

/// Binomial weights below this fraction of the modal weight are dropped.
const WEIGHT_CUTOFF: f64 = 1e-20;

/// Output values at or above this count as nonnegative.
pub const POSITIVITY_SLACK: f64 = -1e-12;

fn check_unit_grid(grid: &Grid) -> Result<()> {
    if grid.is_periodic() || grid.a() != 0.0 || grid.b() != 1.0 {
        return Err(Error::InvalidGrid("Bernstein operators live on [0, 1]".into()));
    }
    Ok(())
}

/// `B_n f` on `grid` for one function.
pub fn bernstein_apply(n: usize, f: &RealFn, grid: &Grid) -> Result<SampledFunction> {
    let mut out = bernstein_apply_many(n, std::slice::from_ref(f), grid)?;
    Ok(out.pop().expect("one output per input"))
}

/// `B_n f` for several functions, sharing the binomial weights.
///
/// At each node the weights are built outward from the modal index by the
/// ratio `C(n,k+1)/C(n,k) = (n-k)/(k+1)` and then normalized by their sum,
/// so `B_n 1 = 1` holds exactly in floating point.
pub fn bernstein_apply_many(n: usize, fs: &[RealFn], grid: &Grid) -> Result<Vec<SampledFunction>> {
    check_unit_grid(grid)?;
    if n == 0 {
        return Err(Error::param("Bernstein degree must be at least 1"));
    }
    if n > MAX_BERNSTEIN_DEGREE {
        return Err(Error::param(format!(
            "Bernstein degree {n} exceeds the cap {MAX_BERNSTEIN_DEGREE}"
        )));
    }
    let nf = n as f64;
    let nfs = fs.len();
    // fvals[k * nfs + j] = f_j(k / n)
    let mut fvals = Vec::with_capacity((n + 1) * nfs);
    for k in 0..=n {
        let x = k as f64 / nf;
        for f in fs {
            let y = f.eval(x);
            if !y.is_finite() {
                return Err(Error::NonFinite { node: k, x, value: y });
            }
            fvals.push(y);
        }
    }
    // up[k] = C(n,k+1)/C(n,k), down[k] = C(n,k-1)/C(n,k)
    let up: Vec<f64> = (0..n).map(|k| (nf - k as f64) / (k as f64 + 1.0)).collect();
    let down: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { 0.0 } else { k as f64 / (nf - k as f64 + 1.0) })
        .collect();

    let mut outs = vec![Vec::with_capacity(grid.len()); nfs];
    let mut acc = vec![0.0; nfs];
    let row = |k: usize| &fvals[k * nfs..(k + 1) * nfs];
    for node in 0..grid.len() {
        let x = grid.node(node);
        if x <= 0.0 || x >= 1.0 {
            let k = if x <= 0.0 { 0 } else { n };
            for (out, &v) in outs.iter_mut().zip(row(k)) {
                out.push(v);
            }
            continue;
        }
        let r = x / (1.0 - x);
        let r_inv = (1.0 - x) / x;
        let mode = (((nf + 1.0) * x).floor() as usize).min(n);

        acc.copy_from_slice(row(mode));
        let mut total = 1.0;

        let mut w = 1.0;
        for k in mode..n {
            w *= up[k] * r;
            if w < WEIGHT_CUTOFF {
                break;
            }
            total += w;
            for (a, &v) in acc.iter_mut().zip(row(k + 1)) {
                *a += w * v;
            }
        }
        w = 1.0;
        for k in (1..=mode).rev() {
            w *= down[k] * r_inv;
            if w < WEIGHT_CUTOFF {
                break;
            }
            total += w;
            for (a, &v) in acc.iter_mut().zip(row(k - 1)) {
                *a += w * v;
            }
        }
        for (out, a) in outs.iter_mut().zip(&acc) {
            out.push(a / total);
        }
    }
    Ok(outs
        .into_iter()
        .map(|v| SampledFunction::from_parts_unchecked(*grid, v))
        .collect())
}

/// Fejér kernel `(1/(n+1)) (sin((n+1)t/2) / sin(t/2))^2`, with value `n+1` at `t = 0 mod 2pi`.
pub fn fejer_kernel(n: usize, t: f64) -> f64 {
    let s = (0.5 * t).sin();
    let np1 = n as f64 + 1.0;
    if s.abs() < 1e-300 {
        return np1;
    }
    let q = (0.5 * np1 * t).sin() / s;
    q * q / np1
}

/// Fejér mean `sigma_n f(x) = (1/2pi) int f(x - t) K_n(t) dt` by the periodic trapezoid rule.
pub fn fejer_apply(n: usize, f: &SampledFunction) -> Result<SampledFunction> {
    let grid = *f.grid();
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid("Fejér means need a periodic grid".into()));
    }
    let m = grid.m();
    let h = grid.step();
    let kernel: Vec<f64> = (0..m).map(|i| fejer_kernel(n, i as f64 * h)).collect();
    let vals = f.values();
    let mut out = Vec::with_capacity(m + 1);
    for j in 0..m {
        let mut s = 0.0;
        for (i, k) in kernel.iter().enumerate() {
            s += vals[(j + m - i) % m] * k;
        }
        out.push(s / m as f64);
    }
    out.push(out[0]);
    Ok(SampledFunction::from_parts_unchecked(grid, out))
}

/// Deterministic 0/1 sequence on the positive integers.
#[derive(Clone)]
pub struct BinarySequence {
    description: String,
    membership: Arc<dyn Fn(usize) -> bool + Send + Sync>,
}

impl fmt::Debug for BinarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinarySequence")
            .field("description", &self.description)
            .finish()
    }
}

impl BinarySequence {
    pub fn new(description: impl Into<String>, membership: impl Fn(usize) -> bool + Send + Sync + 'static) -> Self {
        BinarySequence {
            description: description.into(),
            membership: Arc::new(membership),
        }
    }

    pub fn zero() -> Self {
        BinarySequence::new("never", |_| false)
    }

    pub fn perfect_squares() -> Self {
        BinarySequence::new("perfect squares", is_perfect_square)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn value(&self, n: usize) -> u8 {
        u8::from((self.membership)(n))
    }
}

pub fn is_perfect_square(n: usize) -> bool {
    let r = n.isqrt();
    r * r == n
}

type CustomApply = Arc<dyn Fn(usize, &RealFn, &Grid) -> Result<SampledFunction> + Send + Sync>;

#[derive(Clone)]
pub struct CustomOperator {
    name: String,
    apply: CustomApply,
}

#[derive(Clone)]
pub enum OperatorKind {
    Bernstein,
    Fejer,
    Modulated {
        base: Box<OperatorSequence>,
        z: BinarySequence,
    },
    Custom(CustomOperator),
}

/// An indexed family of linear operators acting on functions over one grid.
#[derive(Clone)]
pub struct OperatorSequence {
    kind: OperatorKind,
    grid: Grid,
}

impl fmt::Debug for OperatorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSequence")
            .field("name", &self.name())
            .field("grid", &self.grid)
            .finish()
    }
}

impl OperatorSequence {
    pub fn bernstein(grid: Grid) -> Result<Self> {
        check_unit_grid(&grid)?;
        Ok(OperatorSequence {
            kind: OperatorKind::Bernstein,
            grid,
        })
    }

    pub fn fejer(grid: Grid) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::InvalidGrid("Fejér means need a periodic grid".into()));
        }
        Ok(OperatorSequence {
            kind: OperatorKind::Fejer,
            grid,
        })
    }

    pub fn modulated(base: OperatorSequence, z: BinarySequence) -> Self {
        let grid = base.grid;
        OperatorSequence {
            kind: OperatorKind::Modulated {
                base: Box::new(base),
                z,
            },
            grid,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        grid: Grid,
        apply: impl Fn(usize, &RealFn, &Grid) -> Result<SampledFunction> + Send + Sync + 'static,
    ) -> Self {
        OperatorSequence {
            kind: OperatorKind::Custom(CustomOperator {
                name: name.into(),
                apply: Arc::new(apply),
            }),
            grid,
        }
    }

    /// Registry names: `bernstein`, `fejer`, `modulated-squares`.
    pub fn by_name(name: &str, grid_m: Option<usize>) -> Result<Self> {
        match name {
            "bernstein" => OperatorSequence::bernstein(Grid::unit(grid_m.unwrap_or(crate::funcspace::DEFAULT_UNIT_M))?),
            "fejer" => OperatorSequence::fejer(Grid::periodic(grid_m.unwrap_or(crate::funcspace::DEFAULT_PERIODIC_M))?),
            "modulated-squares" => Ok(OperatorSequence::modulated(
                OperatorSequence::by_name("bernstein", grid_m)?,
                BinarySequence::perfect_squares(),
            )),
            other => Err(Error::param(format!("unknown operator `{other}`"))),
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OperatorKind::Bernstein => "bernstein".into(),
            OperatorKind::Fejer => "fejer".into(),
            OperatorKind::Modulated { base, z } => format!("(1+z)*{} [z = {}]", base.name(), z.description()),
            OperatorKind::Custom(c) => c.name.clone(),
        }
    }

    /// Smallest valid index: 0 for Fejér means, 1 otherwise.
    pub fn first_index(&self) -> usize {
        match &self.kind {
            OperatorKind::Fejer => 0,
            OperatorKind::Modulated { base, .. } => base.first_index().max(1),
            _ => 1,
        }
    }

    pub fn apply(&self, n: usize, f: &RealFn) -> Result<SampledFunction> {
        let mut out = self.apply_many(n, std::slice::from_ref(f))?;
        Ok(out.pop().expect("one output per input"))
    }

    pub fn apply_many(&self, n: usize, fs: &[RealFn]) -> Result<Vec<SampledFunction>> {
        match &self.kind {
            OperatorKind::Bernstein => bernstein_apply_many(n, fs, &self.grid),
            OperatorKind::Fejer => fs
                .iter()
                .map(|f| fejer_apply(n, &f.sample(self.grid)?))
                .collect(),
            OperatorKind::Modulated { base, z } => {
                if n == 0 {
                    return Err(Error::param("modulated sequences start at n = 1"));
                }
                let factor = 1.0 + f64::from(z.value(n));
                Ok(base
                    .apply_many(n, fs)?
                    .into_iter()
                    .map(|g| if factor == 1.0 { g } else { g.scale(factor) })
                    .collect())
            }
            OperatorKind::Custom(c) => fs.iter().map(|f| (c.apply)(n, f, &self.grid)).collect(),
        }
    }
}

/// `(1 + z(n)) * base.apply(n, f)`.
pub fn modulated_apply(base: &OperatorSequence, z: &BinarySequence, n: usize, f: &RealFn) -> Result<SampledFunction> {
    if n == 0 {
        return Err(Error::param("modulated sequences start at n = 1"));
    }
    Ok(base.apply(n, f)?.scale(1.0 + f64::from(z.value(n))))
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityEntry {
    pub index: usize,
    pub min_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityWitness {
    pub index: usize,
    pub trial: usize,
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub entries: Vec<PositivityEntry>,
    pub passed: bool,
    pub witness: Option<PositivityWitness>,
}

/// Random nonnegative piecewise-linear function on `grid`'s interval.
pub fn random_nonnegative_pl(rng: &mut impl Rng, grid: &Grid) -> RealFn {
    let knots = rng.gen_range(2..=8usize);
    let (a, b) = (grid.a(), grid.b());
    let mut xs: Vec<f64> = (0..knots - 2).map(|_| rng.gen_range(a..b)).collect();
    xs.push(a);
    xs.push(b);
    xs.sort_by(f64::total_cmp);
    let mut ys: Vec<f64> = xs
        .iter()
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if grid.is_periodic() {
        ys[knots - 1] = ys[0];
    }
    RealFn::new("random-pl", move |x| {
        let x = x.clamp(xs[0], xs[xs.len() - 1]);
        let i = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
        let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    })
}

/// Applies `ops` at each index to `trials` random nonnegative inputs and
/// records the smallest output value seen.
pub fn positivity_audit(ops: &OperatorSequence, indices: &[usize], trials: usize, seed: u64) -> Result<PositivityReport> {
    if trials == 0 {
        return Err(Error::param("positivity audit needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<RealFn> = (0..trials).map(|_| random_nonnegative_pl(&mut rng, ops.grid())).collect();
    let mut entries = Vec::with_capacity(indices.len());
    let mut witness: Option<PositivityWitness> = None;
    for &index in indices {
        let outs = ops.apply_many(index, &probes)?;
        let mut min_value = f64::INFINITY;
        for (trial, out) in outs.iter().enumerate() {
            for (node, &v) in out.values().iter().enumerate() {
                if v < min_value {
                    min_value = v;
                }
                if v < POSITIVITY_SLACK && witness.as_ref().map_or(true, |w| v < w.value) {
                    witness = Some(PositivityWitness { index, trial, node, value: v });
                }
            }
        }
        entries.push(PositivityEntry { index, min_value });
    }
    Ok(PositivityReport {
        passed: witness.is_none(),
        entries,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::sample;

    fn unit() -> Grid {
        Grid::unit(200).unwrap()
    }

    #[test]
    fn bernstein_constant_and_identity() {
        let g = unit();
        let b1 = bernstein_apply(7, &RealFn::one(), &g).unwrap();
        assert!(b1.values().iter().all(|&v| v == 1.0));
        let bt = bernstein_apply(5, &RealFn::t(), &g).unwrap();
        for (k, v) in bt.values().iter().enumerate() {
            assert!((v - g.node(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn bernstein_second_moment_at_half() {
        let g = Grid::unit(4).unwrap();
        let b = bernstein_apply(4, &RealFn::t_squared(), &g).unwrap();
        assert!((b.values()[2] - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn bernstein_matches_direct_sum() {
        // explicit binomial sum, independent of the modal recurrence
        let g = Grid::unit(40).unwrap();
        let f = RealFn::new("cubic-exp", |t: f64| t.powi(3) - (2.0 * t).exp());
        for n in [1usize, 2, 3, 9, 30, 60] {
            let got = bernstein_apply(n, &f, &g).unwrap();
            for (i, x) in g.nodes().into_iter().enumerate() {
                let mut s = 0.0;
                let mut c = 1.0f64;
                for k in 0..=n {
                    if k > 0 {
                        c = c * (n - k + 1) as f64 / k as f64;
                    }
                    s += f.eval(k as f64 / n as f64) * c * x.powi(k as i32) * (1.0 - x).powi((n - k) as i32);
                }
                assert!((got.values()[i] - s).abs() < 1e-11, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn bernstein_rejects_bad_input() {
        let g = unit();
        assert!(bernstein_apply(0, &RealFn::one(), &g).is_err());
        assert!(bernstein_apply(MAX_BERNSTEIN_DEGREE + 1, &RealFn::one(), &g).is_err());
        let pole = RealFn::new("pole", |t| 1.0 / (t - 0.5));
        assert!(matches!(bernstein_apply(4, &pole, &g), Err(Error::NonFinite { node: 2, .. })));
        assert!(bernstein_apply(3, &RealFn::one(), &Grid::periodic(8).unwrap()).is_err());
    }

    #[test]
    fn fejer_constant_is_fixed() {
        let g = Grid::periodic(256).unwrap();
        let one = SampledFunction::constant(g, 1.0);
        for n in [0, 1, 9, 99] {
            let out = fejer_apply(n, &one).unwrap();
            assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        assert!(fejer_apply(3, &SampledFunction::constant(unit(), 1.0)).is_err());
    }

    #[test]
    fn fejer_kernel_nonnegative_with_unit_mass() {
        let m = 256;
        for n in 0..=20 {
            let vals: Vec<f64> = (0..m).map(|i| fejer_kernel(n, i as f64 * std::f64::consts::TAU / m as f64)).collect();
            assert!(vals.iter().all(|&v| v >= 0.0));
            let mass: f64 = vals.iter().sum::<f64>() / m as f64;
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modulated_examples() {
        let g = unit();
        let base = OperatorSequence::bernstein(g).unwrap();
        let f = RealFn::t_squared();
        let same = modulated_apply(&base, &BinarySequence::zero(), 6, &f).unwrap();
        assert_eq!(same, base.apply(6, &f).unwrap());

        let at4 = BinarySequence::new("{4}", |n| n == 4);
        let two = modulated_apply(&base, &at4, 4, &RealFn::one()).unwrap();
        assert!(two.values().iter().all(|&v| v == 2.0));

        let sq = OperatorSequence::modulated(base, BinarySequence::perfect_squares());
        let ten = sq.apply(10, &RealFn::one()).unwrap();
        assert!(ten.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn perfect_squares() {
        let squares: Vec<usize> = (1..=50).filter(|&n| is_perfect_square(n)).collect();
        assert_eq!(squares, vec![1, 4, 9, 16, 25, 36, 49]);
        assert_eq!((1..=10_000).filter(|&n| is_perfect_square(n)).count(), 100);
    }

    #[test]
    fn positivity_of_shipped_kinds() {
        let b = OperatorSequence::bernstein(unit()).unwrap();
        let idx: Vec<usize> = (1..=10).collect();
        assert!(positivity_audit(&b, &idx, 5, 7).unwrap().passed);

        let fj = OperatorSequence::fejer(Grid::periodic(64).unwrap()).unwrap();
        let idx: Vec<usize> = (0..=10).collect();
        assert!(positivity_audit(&fj, &idx, 5, 7).unwrap().passed);
    }

    #[test]
    fn positivity_catches_negation() {
        let neg = OperatorSequence::custom("negate", unit(), |_, f, g| Ok(f.sample(*g)?.scale(-1.0)));
        let rep = positivity_audit(&neg, &[1, 2], 4, 1).unwrap();
        assert!(!rep.passed);
        assert!(rep.witness.unwrap().value < 0.0);
        assert!(positivity_audit(&neg, &[1], 0, 1).is_err());
    }

    #[test]
    fn registry_names() {
        assert!(OperatorSequence::by_name("bernstein", None).is_ok());
        assert!(OperatorSequence::by_name("fejer", Some(64)).unwrap().grid().is_periodic());
        assert!(OperatorSequence::by_name("modulated-squares", None).is_ok());
        assert!(OperatorSequence::by_name("szasz", None).is_err());
    }

    #[test]
    fn random_pl_is_nonnegative_and_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::periodic(32).unwrap();
        for _ in 0..50 {
            let f = random_nonnegative_pl(&mut rng, &g);
            let s = sample(|x| f.eval(x), g).unwrap();
            assert!(s.min_value() >= 0.0);
        }
    }
}
