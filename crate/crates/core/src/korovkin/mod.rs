//! Korovkin-type probes: residual curves for the test functions and for
//! arbitrary continuous probes under a summability method, the two-sided
//! pointwise bound behind the classical proof, and squeeze trials.

pub mod squeeze;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{Grid, RealFn, SampledFunction};
use crate::operators::{BinarySequence, OperatorSequence};
use crate::summability::{
    checkpoints, residual_curve, MethodSpec, ResidualCurve, Tabulated, Verdict, DEFAULT_TAU,
};

pub use squeeze::*;

/// Denominators below this make a bound ratio undefined.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Algebraic,
    Trigonometric,
}

/// `(1, t, t^2)` on `[0, 1]` or `(1, cos, sin)` on `[0, 2pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KorovkinTestSet {
    flavor: Flavor,
    grid: Grid,
}

impl KorovkinTestSet {
    pub fn algebraic(grid: Grid) -> Result<Self> {
        if grid.is_periodic() || grid.a() != 0.0 || grid.b() != 1.0 {
            return Err(Error::InvalidGrid("the algebraic test set lives on [0, 1]".into()));
        }
        Ok(KorovkinTestSet {
            flavor: Flavor::Algebraic,
            grid,
        })
    }

    pub fn trigonometric(grid: Grid) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::InvalidGrid("the trigonometric test set needs a periodic grid".into()));
        }
        Ok(KorovkinTestSet {
            flavor: Flavor::Trigonometric,
            grid,
        })
    }

    /// The flavor that matches the grid.
    pub fn for_grid(grid: Grid) -> Result<Self> {
        if grid.is_periodic() {
            KorovkinTestSet::trigonometric(grid)
        } else {
            KorovkinTestSet::algebraic(grid)
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn functions(&self) -> [RealFn; 3] {
        match self.flavor {
            Flavor::Algebraic => [RealFn::one(), RealFn::t(), RealFn::t_squared()],
            Flavor::Trigonometric => [RealFn::one(), RealFn::cos(), RealFn::sin()],
        }
    }
}

/// Smooth probes used by the registry scenarios.
pub fn standard_probes(flavor: Flavor) -> Vec<RealFn> {
    match flavor {
        Flavor::Algebraic => vec![RealFn::new("t3", |t| t * t * t), RealFn::new("exp", f64::exp)],
        Flavor::Trigonometric => vec![
            RealFn::new("cos2", |t| (2.0 * t).cos()),
            RealFn::new("exp-cos", |t| t.cos().exp()),
        ],
    }
}

/// `|t - 1/2|`, a probe with a kink and `O(n^-1/2)` Bernstein error.
pub fn kink_probe() -> RealFn {
    RealFn::new("abs-t-half", |t| (t - 0.5).abs())
}

/// The constants of the classical proof for one function: `|f| <= M`,
/// `|f(t) - f(x)| <= epsilon` whenever `|t - x| <= delta`, and
/// `C = max(epsilon + M, 2M / delta^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityBudget {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl ContinuityBudget {
    pub fn new(epsilon: f64, delta: f64, m: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param(format!("delta must be positive, got {delta}")));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::param(format!("M must be nonnegative, got {m}")));
        }
        Ok(ContinuityBudget {
            epsilon,
            delta,
            m,
            c: (epsilon + m).max(2.0 * m / (delta * delta)),
        })
    }

    /// `2M / delta^2`, the weight of `psi` in the pointwise bound.
    pub fn psi_weight(&self) -> f64 {
        2.0 * self.m / (self.delta * self.delta)
    }
}

fn round_slack(m: f64) -> f64 {
    1e-12 * (1.0 + m)
}

/// Reads `M` and the largest admissible `delta` off the grid.
///
/// `w(g)` is the largest change of `f` between nodes `g` steps apart; its
/// running maximum is nondecreasing in `g`, so the admissible gaps form a
/// prefix found by binary search.
pub fn estimate_budget(f: &RealFn, grid: &Grid, epsilon: f64) -> Result<ContinuityBudget> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    let s = f.sample(*grid)?;
    let v = s.values();
    let m = s.sup_norm();
    let mut running = Vec::with_capacity(v.len() - 1);
    let mut worst = 0.0f64;
    for g in 1..v.len() {
        let wg = v.iter().zip(&v[g..]).fold(0.0f64, |acc, (a, b)| acc.max((b - a).abs()));
        worst = worst.max(wg);
        running.push(worst);
    }
    let admissible = running.partition_point(|&w| w <= epsilon + round_slack(m));
    if admissible == 0 {
        return Err(Error::NoAdmissibleDelta { epsilon });
    }
    ContinuityBudget::new(epsilon, admissible as f64 * grid.step(), m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub holds: bool,
    /// Pair `(t, x)` with the least slack.
    pub worst_pair: (f64, f64),
    /// `epsilon + (2M/delta^2) (t - x)^2 - |f(t) - f(x)|` at the worst pair.
    pub min_slack: f64,
}

/// Checks `|f(t) - f(x)| < epsilon + (2M/delta^2)(t - x)^2` at every pair of nodes.
pub fn check_pointwise_bound(f: &RealFn, budget: &ContinuityBudget, grid: &Grid) -> Result<PointwiseBound> {
    let s = f.sample(*grid)?;
    let v = s.values();
    let nodes = grid.nodes();
    let k = budget.psi_weight();
    let mut best = PointwiseBound {
        holds: true,
        worst_pair: (nodes[0], nodes[0]),
        min_slack: budget.epsilon,
    };
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let psi = (nodes[j] - nodes[i]).powi(2);
            let slack = budget.epsilon + k * psi - (v[j] - v[i]).abs();
            if slack < best.min_slack {
                best.min_slack = slack;
                best.worst_pair = (nodes[j], nodes[i]);
            }
        }
    }
    best.holds = best.min_slack >= -round_slack(budget.m);
    Ok(best)
}

/// `r_n = ||L_n f - f|| / D_n` with `D_n` the summed test-function errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRatio {
    pub n: usize,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when `D_n < 1e-12`.
    pub ratio: Option<f64>,
}

impl BoundRatio {
    fn new(n: usize, numerator: f64, denominator: f64) -> Self {
        BoundRatio {
            n,
            numerator,
            denominator,
            ratio: (denominator >= RATIO_DENOMINATOR_FLOOR).then(|| numerator / denominator),
        }
    }
}

fn check_same_grid(ops: &OperatorSequence, testset: &KorovkinTestSet) -> Result<()> {
    if ops.grid() != testset.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

pub fn bound_ratio_curve(
    ops: &OperatorSequence,
    f: &RealFn,
    testset: &KorovkinTestSet,
    indices: &[usize],
) -> Result<Vec<BoundRatio>> {
    check_same_grid(ops, testset)?;
    let grid = *ops.grid();
    let mut fns = vec![f.clone()];
    fns.extend(testset.functions());
    let limits: Vec<SampledFunction> = fns.iter().map(|g| g.sample(grid)).collect::<Result<_>>()?;
    indices
        .par_iter()
        .map(|&n| {
            let out = ops.apply_many(n, &fns)?;
            let d: Vec<f64> = out.iter().zip(&limits).map(|(a, b)| a.distance(b)).collect::<Result<_>>()?;
            Ok(BoundRatio::new(n, d[0], d[1..].iter().sum()))
        })
        .collect()
}

/// Tables for `n -> L_(n + offset) f`, `n = 1..=len`, for each `f`.
pub fn tabulate_operator(
    ops: &OperatorSequence,
    fns: &[RealFn],
    len: usize,
    offset: usize,
    keep_terms: bool,
) -> Result<Vec<Tabulated>> {
    let grid = *ops.grid();
    let limits: Vec<SampledFunction> = fns.iter().map(|g| g.sample(grid)).collect::<Result<_>>()?;
    if keep_terms {
        let rows: Vec<Vec<SampledFunction>> = (1..=len)
            .into_par_iter()
            .map(|n| ops.apply_many(n + offset, fns))
            .collect::<Result<_>>()?;
        let mut columns: Vec<Vec<SampledFunction>> = vec![Vec::with_capacity(len); fns.len()];
        for row in rows {
            for (col, t) in columns.iter_mut().zip(row) {
                col.push(t);
            }
        }
        columns
            .into_iter()
            .zip(limits)
            .map(|(terms, limit)| Tabulated::from_terms(terms, limit))
            .collect()
    } else {
        let rows: Vec<Vec<f64>> = (1..=len)
            .into_par_iter()
            .map(|n| {
                let out = ops.apply_many(n + offset, fns)?;
                out.iter().zip(&limits).map(|(a, b)| a.distance(b)).collect()
            })
            .collect::<Result<_>>()?;
        Ok(limits
            .into_iter()
            .enumerate()
            .map(|(i, limit)| Tabulated::from_distances(rows.iter().map(|r| r[i]).collect(), limit))
            .collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedCurve {
    pub name: String,
    pub curve: ResidualCurve,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRatios {
    pub probe: String,
    pub ratios: Vec<BoundRatio>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KorovkinReport {
    pub operator: String,
    pub method: MethodSpec,
    pub testset: Flavor,
    pub horizon: usize,
    pub tau: f64,
    /// Number of leading terms dropped.
    pub offset: usize,
    pub test_curves: Vec<NamedCurve>,
    pub probe_curves: Vec<NamedCurve>,
    pub bound_ratios: Vec<ProbeRatios>,
    /// Whether "all test curves consistent" and "all probe curves consistent" agree.
    pub verdict_equivalence: bool,
}

fn all_consistent(curves: &[NamedCurve]) -> bool {
    curves.iter().all(|c| c.curve.verdict == Verdict::Consistent)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl KorovkinReport {
    pub fn tests_consistent(&self) -> bool {
        all_consistent(&self.test_curves)
    }

    pub fn probes_consistent(&self) -> bool {
        all_consistent(&self.probe_curves)
    }

    pub fn test_verdicts(&self) -> Vec<Verdict> {
        self.test_curves.iter().map(|c| c.curve.verdict).collect()
    }

    pub fn probe_verdicts(&self) -> Vec<Verdict> {
        self.probe_curves.iter().map(|c| c.curve.verdict).collect()
    }

    /// `test_<i>.csv`, `probe_<name>.csv` and `ratios.csv`, as (file name, bytes).
    pub fn csv_bundle(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = Vec::new();
        for (i, c) in self.test_curves.iter().enumerate() {
            let mut buf = Vec::new();
            c.curve.to_csv(&mut buf)?;
            files.push((format!("test_{i}.csv"), buf));
        }
        for c in &self.probe_curves {
            let mut buf = Vec::new();
            c.curve.to_csv(&mut buf)?;
            files.push((format!("probe_{}.csv", file_stem(&c.name)), buf));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["probe", "n", "ratio"])?;
        for p in &self.bound_ratios {
            for r in &p.ratios {
                let ratio = r.ratio.map_or_else(|| "undefined".to_string(), crate::funcspace::fmt17);
                w.write_record([p.probe.clone(), r.n.to_string(), ratio])?;
            }
        }
        let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        files.push(("ratios.csv".into(), buf));
        Ok(files)
    }
}

pub fn korovkin_probe(
    ops: &OperatorSequence,
    method: &MethodSpec,
    testset: &KorovkinTestSet,
    probes: &[RealFn],
    horizon: usize,
    tau: f64,
) -> Result<KorovkinReport> {
    let mut out = korovkin_probe_many(ops, std::slice::from_ref(method), testset, probes, horizon, tau, 0)?;
    Ok(out.pop().expect("one report per method"))
}

/// One report per method, sharing a single tabulation of the operator outputs.
pub fn korovkin_probe_many(
    ops: &OperatorSequence,
    methods: &[MethodSpec],
    testset: &KorovkinTestSet,
    probes: &[RealFn],
    horizon: usize,
    tau: f64,
    offset: usize,
) -> Result<Vec<KorovkinReport>> {
    check_same_grid(ops, testset)?;
    let mut fns: Vec<RealFn> = testset.functions().to_vec();
    fns.extend(probes.iter().cloned());
    let (len, keep) = tabulation_needs(methods, horizon)?;
    let tables = tabulate_operator(ops, &fns, len, offset, keep)?;
    reports_from_tables(&ops.name(), methods, testset.flavor(), &fns, &tables, horizon, tau, offset)
}

fn tabulation_needs(methods: &[MethodSpec], horizon: usize) -> Result<(usize, bool)> {
    if horizon < 8 {
        return Err(Error::param(format!("horizon N must be at least 8, got {horizon}")));
    }
    let mut len = horizon;
    let mut keep = false;
    for m in methods {
        m.validate()?;
        len = len.max(m.required_len(horizon)?);
        keep |= m.needs_terms();
    }
    Ok((len, keep))
}

/// `fns` holds the three test functions followed by the probes, `tables` their tabulations.
#[allow(clippy::too_many_arguments)]
fn reports_from_tables(
    operator: &str,
    methods: &[MethodSpec],
    flavor: Flavor,
    fns: &[RealFn],
    tables: &[Tabulated],
    horizon: usize,
    tau: f64,
    offset: usize,
) -> Result<Vec<KorovkinReport>> {
    let probes = &fns[3..];
    let ratio_idx = checkpoints(horizon);
    let bound_ratios: Vec<ProbeRatios> = probes
        .iter()
        .enumerate()
        .map(|(p, f)| ProbeRatios {
            probe: f.name().to_string(),
            ratios: ratio_idx
                .iter()
                .map(|&n| {
                    let denom = tables[..3].iter().map(|t| t.distances()[n - 1]).sum();
                    BoundRatio::new(n + offset, tables[3 + p].distances()[n - 1], denom)
                })
                .collect(),
        })
        .collect();

    methods
        .iter()
        .map(|method| {
            let curves = fns
                .iter()
                .zip(tables)
                .map(|(f, tab)| {
                    Ok(NamedCurve {
                        name: f.name().to_string(),
                        curve: residual_curve(method, tab, horizon, tau)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (test_curves, probe_curves) = {
                let mut c = curves;
                let probe_curves = c.split_off(3);
                (c, probe_curves)
            };
            let verdict_equivalence = all_consistent(&test_curves) == all_consistent(&probe_curves);
            Ok(KorovkinReport {
                operator: operator.to_string(),
                method: method.clone(),
                testset: flavor,
                horizon,
                tau,
                offset,
                test_curves,
                probe_curves,
                bound_ratios: bound_ratios.clone(),
                verdict_equivalence,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub horizon: usize,
    pub epsilon: f64,
    pub tau: f64,
    /// `||L_n 1 - 1||` at every square `n <= N`.
    pub square_residuals: Vec<(usize, f64)>,
    pub square_residuals_all_one: bool,
    /// Statistical residual at `N` for each test function.
    pub statistical_residuals: Vec<(String, f64)>,
    pub norm: KorovkinReport,
    /// The method expected to succeed, statistical by default.
    pub summability: KorovkinReport,
}

impl CounterexampleReport {
    /// Norm method fails on every test function while the other method
    /// succeeds on all of them, and both reports satisfy the equivalence.
    pub fn as_expected(&self) -> bool {
        self.norm.test_verdicts().iter().all(|v| *v == Verdict::Inconsistent)
            && self.summability.tests_consistent()
            && self.norm.verdict_equivalence
            && self.summability.verdict_equivalence
    }
}

/// `(1 + z_n) B_n` with `z` the indicator of the perfect squares, under the
/// norm and statistical methods at `tau = 0.02`.
pub fn counterexample_run(horizon: usize, epsilon: f64) -> Result<CounterexampleReport> {
    counterexample_run_with(horizon, epsilon, &MethodSpec::Statistical { epsilon }, DEFAULT_TAU, Grid::default_unit(), 0)
}

/// As [`counterexample_run`], with `method` in place of the statistical method.
/// `epsilon` still sets the reported statistical residuals.
pub fn counterexample_run_with(
    horizon: usize,
    epsilon: f64,
    method: &MethodSpec,
    tau: f64,
    grid: Grid,
    offset: usize,
) -> Result<CounterexampleReport> {
    if horizon < 100 {
        return Err(Error::param(format!("the counterexample needs N >= 100, got {horizon}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let ops = OperatorSequence::modulated(OperatorSequence::bernstein(grid)?, BinarySequence::perfect_squares());
    let testset = KorovkinTestSet::algebraic(grid)?;
    let probes = standard_probes(Flavor::Algebraic);
    let methods = [MethodSpec::Norm, method.clone()];
    let mut fns: Vec<RealFn> = testset.functions().to_vec();
    fns.extend(probes);
    let (len, keep) = tabulation_needs(&methods, horizon)?;
    let tables = tabulate_operator(&ops, &fns, len, offset, keep)?;
    let mut reports = reports_from_tables(&ops.name(), &methods, testset.flavor(), &fns, &tables, horizon, tau, offset)?;
    let summability = reports.pop().expect("two reports");
    let norm = reports.pop().expect("two reports");

    let square_residuals: Vec<(usize, f64)> = (1..=horizon)
        .filter(|&n| crate::operators::is_perfect_square(n + offset))
        .map(|n| (n + offset, tables[0].distances()[n - 1]))
        .collect();
    let square_residuals_all_one = square_residuals.iter().all(|&(_, r)| r == 1.0);
    let statistical_residuals = testset
        .functions()
        .iter()
        .zip(&tables)
        .map(|(f, t)| {
            (
                f.name().to_string(),
                crate::summability::statistical_from_distances(&t.distances()[..horizon], epsilon),
            )
        })
        .collect();
    Ok(CounterexampleReport {
        horizon,
        epsilon,
        tau,
        square_residuals,
        square_residuals_all_one,
        statistical_residuals,
        norm,
        summability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Grid {
        Grid::default_unit()
    }

    /// Exhaustive oracle: largest multiple of the step with every pair
    /// within that distance changing `f` by at most `eps`.
    fn brute_delta(f: impl Fn(f64) -> f64, grid: &Grid, eps: f64) -> f64 {
        let nodes = grid.nodes();
        let mut best = 0;
        for g in 1..nodes.len() {
            let ok = (0..nodes.len())
                .flat_map(|i| (i..nodes.len()).map(move |j| (i, j)))
                .filter(|(i, j)| j - i <= g)
                .all(|(i, j)| (f(nodes[j]) - f(nodes[i])).abs() <= eps + 1e-12 * 2.0);
            if ok {
                best = g;
            } else {
                break;
            }
        }
        best as f64 * grid.step()
    }

    #[test]
    fn budget_examples() {
        let b = estimate_budget(&RealFn::one(), &unit(), 0.1).unwrap();
        assert_eq!((b.m, b.delta), (1.0, 1.0));
        let b = estimate_budget(&RealFn::t(), &unit(), 0.1).unwrap();
        assert!((b.delta - 0.1).abs() < 1e-12);
        let b = estimate_budget(&RealFn::t_squared(), &unit(), 0.1).unwrap();
        assert!((b.delta - 0.05).abs() < 1e-12);
        assert_eq!(b.delta, brute_delta(|t| t * t, &unit(), 0.1));
        assert!(b.c >= (b.epsilon + b.m).max(2.0 * b.m / (b.delta * b.delta)));
    }

    #[test]
    fn budget_rejects_grid_scale_oscillation() {
        let wild = RealFn::new("wild", |t| (1000.0 * t).sin());
        assert!(matches!(
            estimate_budget(&wild, &unit(), 0.01),
            Err(Error::NoAdmissibleDelta { .. })
        ));
        assert!(estimate_budget(&RealFn::t(), &unit(), 0.0).is_err());
    }

    #[test]
    fn pointwise_bound_examples() {
        let g = unit();
        let one = check_pointwise_bound(&RealFn::one(), &estimate_budget(&RealFn::one(), &g, 0.1).unwrap(), &g).unwrap();
        assert!(one.holds);
        assert_eq!(one.min_slack, 0.1);

        let sq = RealFn::t_squared();
        assert!(check_pointwise_bound(&sq, &estimate_budget(&sq, &g, 0.1).unwrap(), &g).unwrap().holds);
        let tampered = ContinuityBudget::new(0.1, 1.0, 0.01).unwrap();
        let r = check_pointwise_bound(&sq, &tampered, &g).unwrap();
        assert!(!r.holds);
        let (t, x) = r.worst_pair;
        assert!((t * t - x * x).abs() > 0.1 + 0.02 * (t - x).powi(2));
    }

    #[test]
    fn ratio_of_a_test_function_is_at_most_one() {
        let g = unit();
        let ops = OperatorSequence::bernstein(g).unwrap();
        let ts = KorovkinTestSet::algebraic(g).unwrap();
        let r = bound_ratio_curve(&ops, &RealFn::t_squared(), &ts, &[5, 10, 50]).unwrap();
        assert!(r.iter().all(|b| b.ratio.unwrap() <= 1.0 + 1e-12));
    }

    #[test]
    fn exact_operator_has_undefined_ratio() {
        let g = unit();
        let ident = OperatorSequence::custom("identity", g, |_, f, grid| f.sample(*grid));
        let ts = KorovkinTestSet::algebraic(g).unwrap();
        let r = bound_ratio_curve(&ident, &RealFn::new("t3", |t| t * t * t), &ts, &[1, 2]).unwrap();
        assert!(r.iter().all(|b| b.ratio.is_none()));
    }

    #[test]
    fn testset_must_match_grid() {
        assert!(KorovkinTestSet::algebraic(Grid::default_periodic()).is_err());
        assert!(KorovkinTestSet::trigonometric(unit()).is_err());
        assert_eq!(KorovkinTestSet::for_grid(Grid::default_periodic()).unwrap().flavor(), Flavor::Trigonometric);
    }

    #[test]
    fn counterexample_small_horizon() {
        let r = counterexample_run(4000, 0.5).unwrap();
        assert!(r.as_expected(), "{:?} {:?}", r.norm.test_verdicts(), r.summability.test_verdicts());
        assert_eq!(r.square_residuals.len(), 63);
        assert!(r.square_residuals_all_one);
        assert_eq!(r.statistical_residuals[0].1, 63.0 / 4000.0);
        assert!(counterexample_run(99, 0.5).is_err());
    }
}
