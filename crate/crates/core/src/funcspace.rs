//! Sampled stand-ins for the Banach lattices `C[0,1]` and `C_2pi(R)`.
//!
//! A [`SampledFunction`] is a vector of values on a uniform [`Grid`]. Norms are
//! grid maxima, and the lattice operations (`abs`, `max`, `min`) act node by
//! node. Periodic grids carry the duplicated endpoint `b ~ a`, which is left
//! out of every norm.

use std::f64::consts::TAU;
use std::fmt;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default subinterval count on `[0, 1]`; even, so `t = 1/2` is a node.
pub const DEFAULT_UNIT_M: usize = 200;
/// Default subinterval count on `[0, 2pi]`; divisible by 4, so `pi/2` is a node.
pub const DEFAULT_PERIODIC_M: usize = 256;

const SPACING_RTOL: f64 = 1e-12;

/// Absolute plus relative closeness: `|x - y| <= atol + rtol * max(|x|, |y|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            atol: 1e-10,
            rtol: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Tolerance { atol, rtol }
    }

    pub fn close(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.atol + self.rtol * x.abs().max(y.abs())
    }
}

/// Uniform grid `a + k (b - a) / m`, `k = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    a: f64,
    b: f64,
    m: usize,
    periodic: bool,
}

impl Grid {
    pub fn new(a: f64, b: f64, m: usize, periodic: bool) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidGrid(format!("need finite a < b, got [{a}, {b}]")));
        }
        if m < 4 {
            return Err(Error::InvalidGrid(format!("need m >= 4, got {m}")));
        }
        if periodic && ((b - a) - TAU).abs() > SPACING_RTOL * TAU {
            return Err(Error::InvalidGrid(format!(
                "periodic grid must span 2pi, spans {}",
                b - a
            )));
        }
        Ok(Grid { a, b, m, periodic })
    }

    /// `[0, 1]` with `m` subintervals.
    pub fn unit(m: usize) -> Result<Self> {
        Grid::new(0.0, 1.0, m, false)
    }

    /// `[0, 2pi]` with `m` subintervals, endpoints identified.
    pub fn periodic(m: usize) -> Result<Self> {
        Grid::new(0.0, TAU, m, true)
    }

    pub fn default_unit() -> Self {
        Grid::unit(DEFAULT_UNIT_M).expect("default grid is valid")
    }

    pub fn default_periodic() -> Self {
        Grid::periodic(DEFAULT_PERIODIC_M).expect("default grid is valid")
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    /// Number of stored nodes, `m + 1`.
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes that count for norms and quadrature: all of them, or all but the
    /// last on a periodic grid.
    pub fn active_len(&self) -> usize {
        if self.periodic {
            self.m
        } else {
            self.m + 1
        }
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.m {
            self.b
        } else {
            self.a + k as f64 * (self.b - self.a) / self.m as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|k| self.node(k)).collect()
    }
}

/// A real function on a grid, stored by its node values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledRepr", into = "SampledRepr")]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SampledRepr {
    a: f64,
    b: f64,
    m: usize,
    periodic: bool,
    values: Vec<f64>,
}

impl TryFrom<SampledRepr> for SampledFunction {
    type Error = Error;

    fn try_from(r: SampledRepr) -> Result<Self> {
        SampledFunction::new(Grid::new(r.a, r.b, r.m, r.periodic)?, r.values)
    }
}

impl From<SampledFunction> for SampledRepr {
    fn from(f: SampledFunction) -> Self {
        SampledRepr {
            a: f.grid.a,
            b: f.grid.b,
            m: f.grid.m,
            periodic: f.grid.periodic,
            values: f.values,
        }
    }
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((k, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: k,
                x: grid.node(k),
                value: v,
            });
        }
        let f = SampledFunction { grid, values };
        if grid.periodic {
            let (first, last) = (f.values[0], f.values[grid.m]);
            if (first - last).abs() > 1e-12 * (1.0 + f.sup_norm()) {
                return Err(Error::PeriodicEndpoints { first, last });
            }
        }
        Ok(f)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        SampledFunction { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        SampledFunction::from_parts_unchecked(grid, vec![c; grid.len()])
    }

    pub fn zero(grid: Grid) -> Self {
        SampledFunction::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn active(&self) -> &[f64] {
        &self.values[..self.grid.active_len()]
    }

    /// Grid maximum of `|f|`; the duplicated endpoint of a periodic grid is skipped.
    pub fn sup_norm(&self) -> f64 {
        self.active().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.active().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sup_norm(self - other)` without allocating.
    pub fn distance(&self, other: &SampledFunction) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .active()
            .iter()
            .zip(other.active())
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs())))
    }

    fn check_grid(&self, other: &SampledFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn zip_with(&self, other: &SampledFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| op(x, y))
            .collect();
        Ok(SampledFunction::from_parts_unchecked(self.grid, values))
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        SampledFunction::from_parts_unchecked(self.grid, self.values.iter().map(|&v| op(v)).collect())
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn max(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, f64::max)
    }

    pub fn min(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, f64::min)
    }

    /// `self += c * other`.
    pub fn add_scaled_assign(&mut self, c: f64, other: &SampledFunction) -> Result<()> {
        self.check_grid(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += c * y;
        }
        Ok(())
    }

    pub fn to_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["node", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            out.write_record([fmt17(self.grid.node(k)), fmt17(*v)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `node,value` CSV back onto `grid`, checking the node column.
    pub fn from_csv<R: io::Read>(grid: Grid, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut values = Vec::with_capacity(grid.len());
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::param(format!("csv row {}: bad field {}", k + 1, i)))
            };
            let x = parse(0)?;
            if k >= grid.len() || (x - grid.node(k)).abs() > 1e-12 * (1.0 + x.abs()) {
                return Err(Error::param(format!("csv row {}: node {x} is not on the grid", k + 1)));
            }
            values.push(parse(1)?);
        }
        SampledFunction::new(grid, values)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Node-wise operations of the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointwiseOp {
    Add,
    Sub,
    Scale(f64),
    Abs,
    Max,
    Min,
}

/// Applies `op` to one operand (`Scale`, `Abs`) or two (`Add`, `Sub`, `Max`, `Min`).
pub fn pointwise(op: PointwiseOp, args: &[&SampledFunction]) -> Result<SampledFunction> {
    let arity = match op {
        PointwiseOp::Scale(_) | PointwiseOp::Abs => 1,
        _ => 2,
    };
    if args.len() != arity {
        return Err(Error::param(format!("{op:?} takes {arity} operand(s), got {}", args.len())));
    }
    match op {
        PointwiseOp::Add => args[0].add(args[1]),
        PointwiseOp::Sub => args[0].sub(args[1]),
        PointwiseOp::Scale(c) => Ok(args[0].scale(c)),
        PointwiseOp::Abs => Ok(args[0].abs()),
        PointwiseOp::Max => args[0].max(args[1]),
        PointwiseOp::Min => args[0].min(args[1]),
    }
}

/// `f <= g` at every node, with no slack.
pub fn dominates(f: &SampledFunction, g: &SampledFunction) -> Result<bool> {
    f.check_grid(g)?;
    Ok(f.values.iter().zip(&g.values).all(|(x, y)| x <= y))
}

/// Evaluates `expr` at every node of `grid`.
pub fn sample(expr: impl Fn(f64) -> f64, grid: Grid) -> Result<SampledFunction> {
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let x = grid.node(k);
        let v = expr(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: k, x, value: v });
        }
        values.push(v);
    }
    SampledFunction::new(grid, values)
}

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A named real function that can be evaluated anywhere on its domain.
#[derive(Clone)]
pub struct RealFn {
    name: String,
    eval: Evaluator,
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealFn").field("name", &self.name).finish()
    }
}

impl RealFn {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RealFn {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn sample(&self, grid: Grid) -> Result<SampledFunction> {
        sample(|x| self.eval(x), grid)
    }

    /// `alpha * f + beta * g`.
    pub fn combine(alpha: f64, f: &RealFn, beta: f64, g: &RealFn) -> RealFn {
        let (f, g) = (f.clone(), g.clone());
        RealFn::new(format!("{alpha}*{}+{beta}*{}", f.name, g.name), move |x| {
            alpha * f.eval(x) + beta * g.eval(x)
        })
    }

    pub fn one() -> Self {
        RealFn::new("1", |_| 1.0)
    }

    pub fn t() -> Self {
        RealFn::new("t", |t| t)
    }

    pub fn t_squared() -> Self {
        RealFn::new("t^2", |t| t * t)
    }

    pub fn cos() -> Self {
        RealFn::new("cos", f64::cos)
    }

    pub fn sin() -> Self {
        RealFn::new("sin", f64::sin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(m: usize) -> Grid {
        Grid::unit(m).unwrap()
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new(1.0, 0.0, 10, false).is_err());
        assert!(Grid::unit(3).is_err());
        assert!(Grid::new(0.0, 6.0, 8, true).is_err());
        assert!(Grid::new(0.0, f64::NAN, 8, false).is_err());
        let g = Grid::periodic(8).unwrap();
        assert_eq!(g.active_len(), 8);
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn spacing_is_uniform() {
        let g = unit(200);
        let h = g.step();
        for k in 0..200 {
            let gap = g.node(k + 1) - g.node(k);
            assert!((gap - h).abs() <= 1e-12 * h);
        }
    }

    #[test]
    fn sample_examples() {
        let ones = sample(|_| 1.0, unit(10)).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));

        let sq = sample(|t| t * t, unit(4)).unwrap();
        assert_eq!(sq.values(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);

        let s = sample(f64::sin, Grid::periodic(4).unwrap()).unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (v, e) in s.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_names_the_bad_node() {
        let err = sample(|t| 1.0 / (t - 0.5), unit(4)).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert_eq!(node, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(SampledFunction::constant(unit(7), 1.0).sup_norm(), 1.0);
        let f = sample(|t| t - t * t, unit(200)).unwrap();
        assert_eq!(f.sup_norm(), 0.25);
        let s = sample(f64::sin, Grid::periodic(256).unwrap()).unwrap();
        assert_eq!(s.sup_norm(), 1.0);
    }

    #[test]
    fn periodic_norm_skips_duplicate_endpoint() {
        let g = Grid::periodic(4).unwrap();
        let f = SampledFunction::new(g, vec![0.5, 0.1, 0.2, 0.3, 0.5]).unwrap();
        assert_eq!(f.sup_norm(), 0.5);
        assert!(SampledFunction::new(g, vec![0.5, 0.1, 0.2, 0.3, 0.9]).is_err());
    }

    #[test]
    fn pointwise_examples() {
        let f = sample(|t| t - 0.5, unit(4)).unwrap();
        assert_eq!(f.abs().values(), &[0.5, 0.25, 0.0, 0.25, 0.5]);
        let neg = pointwise(PointwiseOp::Scale(-1.0), &[&f]).unwrap();
        assert_eq!(pointwise(PointwiseOp::Max, &[&f, &neg]).unwrap(), f.abs());
        let z = pointwise(PointwiseOp::Add, &[&f, &neg]).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        assert!(pointwise(PointwiseOp::Add, &[&f]).is_err());
        let other = sample(|t| t, unit(8)).unwrap();
        assert!(matches!(f.add(&other), Err(Error::GridMismatch)));
    }

    #[test]
    fn dominates_examples() {
        let g = unit(10);
        let zero = SampledFunction::zero(g);
        let t = sample(|t| t, g).unwrap();
        let t2 = sample(|t| t * t, g).unwrap();
        assert!(dominates(&zero, &t2).unwrap());
        assert!(!dominates(&t, &t2).unwrap());
        assert!(dominates(&t, &t).unwrap());
        assert!(dominates(&t, &sample(|t| t, unit(8)).unwrap()).is_err());
    }

    #[test]
    fn tolerance_is_abs_plus_rel() {
        let tol = Tolerance::default();
        assert!(tol.close(1.0, 1.0 + 1e-11));
        assert!(!tol.close(1.0, 1.0 + 1e-9));
        assert!(tol.close(1e6, 1e6 + 1e-5));
    }

    #[test]
    fn json_shape_and_validation() {
        let f = sample(|t| t, unit(4)).unwrap();
        let js = serde_json::to_value(&f).unwrap();
        assert_eq!(js["m"], 4);
        assert_eq!(js["periodic"], false);
        assert_eq!(js["values"].as_array().unwrap().len(), 5);
        let back: SampledFunction = serde_json::from_value(js).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"a":0,"b":1,"m":4,"periodic":false,"values":[1,2]}"#;
        assert!(serde_json::from_str::<SampledFunction>(bad).is_err());
    }

    #[test]
    fn csv_header_and_digits() {
        let f = sample(|t| t * t, unit(4)).unwrap();
        let mut buf = Vec::new();
        f.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node,value"));
        assert_eq!(lines.next(), Some("0.0000000000000000e0,0.0000000000000000e0"));
        assert_eq!(SampledFunction::from_csv(*f.grid(), text.as_bytes()).unwrap(), f);
    }
}
