//! Squeeze trials: random dominated sequences `w` built against three
//! dominating sequences `x, y, z`, with the finite-horizon consequences of
//! each method's squeeze property checked exactly.
//!
//! Norm trials take `||w_n - w|| <= C (||x_n - x|| + ||y_n - y|| + ||z_n - z||)`;
//! order trials take the nodewise two-sided bound
//! `-C S_n <= w_n - w <= C S_n` with `S_n = (x_n - x) + (y_n - y) + (z_n - z)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{Grid, SampledFunction};
use crate::operators::is_perfect_square;
use crate::summability::{
    checkpoints, decide_verdict, method_residuals, residual_curve, MethodSpec, Tabulated, Verdict,
};

/// Nodes of the grids squeeze sequences live on.
pub const NORM_TRIAL_GRID_M: usize = 8;
pub const ORDER_TRIAL_GRID_M: usize = 16;
/// Amplitude of the `g/n` perturbations in order trials.
pub const ORDER_PERTURBATION: f64 = 1e-3;
/// Largest `|u_n|` used when scaling `w` into its bound.
const FILL: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SqueezeOutcome {
    Pass,
    /// The constructed sequences do not satisfy the domination bound.
    HypothesisViolated { index: usize, detail: String },
    /// The bound held but the method's finite consequence failed.
    Failed { index: usize, detail: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SqueezeVerdicts {
    pub x: Verdict,
    pub y: Verdict,
    pub z: Verdict,
    pub w: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SqueezeReport {
    pub method: MethodSpec,
    pub c: f64,
    pub seed: u64,
    pub horizon: usize,
    pub outcome: SqueezeOutcome,
    pub verdicts: Option<SqueezeVerdicts>,
}

impl SqueezeReport {
    pub fn passed(&self) -> bool {
        self.outcome == SqueezeOutcome::Pass
    }

    pub fn hypothesis_violated(&self) -> bool {
        matches!(self.outcome, SqueezeOutcome::HypothesisViolated { .. })
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::param(format!("squeeze constant C must be nonnegative, got {c}")));
    }
    Ok(())
}

fn random_limit(rng: &mut ChaCha8Rng, grid: Grid) -> SampledFunction {
    let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    SampledFunction::from_parts_unchecked(grid, v)
}

/// Distances that are sparse spikes on a shifted copy of the squares and
/// `U(0,1)/sqrt(n)` elsewhere.
fn spiky_distances(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let shift = rng.gen_range(0..10);
    (1..=len)
        .map(|n| {
            if is_perfect_square(n + shift) {
                rng.gen_range(0.5..1.0)
            } else {
                rng.gen::<f64>() / (n as f64).sqrt()
            }
        })
        .collect()
}

/// `limit + d_n phi_n` with `phi_n` random and `sup |phi_n| = 1`.
fn realize(rng: &mut ChaCha8Rng, limit: &SampledFunction, d: &[f64]) -> Vec<SampledFunction> {
    let m = limit.grid().len();
    d.iter()
        .map(|&dn| {
            let mut phi: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            phi[rng.gen_range(0..m)] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let v = limit.values().iter().zip(&phi).map(|(l, p)| l + dn * p).collect();
            SampledFunction::from_parts_unchecked(*limit.grid(), v)
        })
        .collect()
}

fn is_count_kind(m: &MethodSpec) -> bool {
    matches!(
        m,
        MethodSpec::Statistical { .. }
            | MethodSpec::Ideal { .. }
            | MethodSpec::AStatistical { .. }
            | MethodSpec::FStatistical { .. }
    )
}

fn is_linear_kind(m: &MethodSpec) -> bool {
    matches!(m, MethodSpec::StrongWp { .. } | MethodSpec::AStrong { .. } | MethodSpec::FStrong { .. })
}

/// Length needed so every row `n <= horizon` is covered.
fn norm_trial_len(method: &MethodSpec, horizon: usize) -> Result<usize> {
    let mut len = horizon;
    if let MethodSpec::AStatistical { matrix, .. } | MethodSpec::AStrong { matrix } = method {
        for n in 1..=horizon {
            len = len.max(matrix.support_bound(n)?);
        }
    }
    Ok(len)
}

pub fn squeeze_trial_norm(method: &MethodSpec, c: f64, seed: u64, horizon: usize) -> Result<SqueezeReport> {
    run_norm_trial(method, c, seed, horizon, 0, false)
}

/// The trial with the first `offset` terms of every sequence dropped.
pub fn squeeze_trial_norm_offset(method: &MethodSpec, c: f64, seed: u64, horizon: usize, offset: usize) -> Result<SqueezeReport> {
    run_norm_trial(method, c, seed, horizon, offset, false)
}

/// Same construction, with `w` pushed outside its bound at `n = N/2`.
pub fn squeeze_trial_norm_control(method: &MethodSpec, c: f64, seed: u64, horizon: usize) -> Result<SqueezeReport> {
    run_norm_trial(method, c, seed, horizon, 0, true)
}

fn run_norm_trial(
    method: &MethodSpec,
    c: f64,
    seed: u64,
    horizon: usize,
    offset: usize,
    violate: bool,
) -> Result<SqueezeReport> {
    if !(is_count_kind(method) || is_linear_kind(method)) {
        return Err(Error::UnsupportedMethod(method.kind().as_str().into()));
    }
    method.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("squeeze constant C must be positive, got {c}")));
    }
    if horizon < 8 {
        return Err(Error::param(format!("horizon N must be at least 8, got {horizon}")));
    }
    let len = norm_trial_len(method, horizon)?;
    let grid = Grid::unit(NORM_TRIAL_GRID_M)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tabs = Vec::with_capacity(4);
    let mut targets = Vec::with_capacity(3);
    for _ in 0..3 {
        let limit = random_limit(&mut rng, grid);
        let d = spiky_distances(&mut rng, len + offset);
        let terms = realize(&mut rng, &limit, &d);
        tabs.push(Tabulated::from_terms(terms[offset..].to_vec(), limit)?);
        targets.push(d);
    }
    let w_limit = random_limit(&mut rng, grid);
    let mut dw: Vec<f64> = (0..len + offset)
        .map(|i| c * (targets[0][i] + targets[1][i] + targets[2][i]) * rng.gen_range(0.0..FILL))
        .collect();
    if violate {
        let k = offset + horizon / 2 - 1;
        dw[k] = 2.0 * c * (targets[0][k] + targets[1][k] + targets[2][k]) + 1.0;
    }
    let terms = realize(&mut rng, &w_limit, &dw);
    tabs.push(Tabulated::from_terms(terms[offset..].to_vec(), w_limit)?);

    let d: Vec<&[f64]> = tabs.iter().map(|t| t.distances()).collect();
    let outcome = match (0..len).find(|&i| d[3][i] > c * (d[0][i] + d[1][i] + d[2][i])) {
        Some(i) => SqueezeOutcome::HypothesisViolated {
            index: i + 1,
            detail: format!(
                "||w_n - w|| = {} > C (sum) = {}",
                d[3][i],
                c * (d[0][i] + d[1][i] + d[2][i])
            ),
        },
        None if is_count_kind(method) => count_consequence(method, c, &tabs, horizon)?,
        None => linear_consequence(method, c, &d, horizon)?,
    };

    let verdicts = if outcome == SqueezeOutcome::Pass {
        let v: Vec<Verdict> = tabs
            .iter()
            .map(|t| Ok(residual_curve(method, t, horizon, crate::summability::DEFAULT_TAU)?.verdict))
            .collect::<Result<_>>()?;
        Some(SqueezeVerdicts {
            x: v[0],
            y: v[1],
            z: v[2],
            w: v[3],
        })
    } else {
        None
    };
    Ok(SqueezeReport {
        method: method.clone(),
        c,
        seed,
        horizon,
        outcome,
        verdicts,
    })
}

/// Set inclusion `{d_w > eps} in union {d_i > eps/(3C)}` for every `n <= N`,
/// then the residual bound it implies at each checkpoint.
fn count_consequence(method: &MethodSpec, c: f64, tabs: &[Tabulated], horizon: usize) -> Result<SqueezeOutcome> {
    let eps = method.epsilon().expect("count kinds carry epsilon");
    let thr = eps / (3.0 * c);
    let inclusive = matches!(method, MethodSpec::AStatistical { .. });
    let exceeds = |v: f64, t: f64| if inclusive { v >= t } else { v > t };
    let d: Vec<&[f64]> = tabs.iter().map(|t| t.distances()).collect();
    for i in 0..horizon {
        if exceeds(d[3][i], eps) && !(0..3).any(|s| exceeds(d[s][i], thr)) {
            return Ok(SqueezeOutcome::Failed {
                index: i + 1,
                detail: format!("n = {} exceeds {eps} for w but none of x, y, z exceeds {thr}", i + 1),
            });
        }
    }
    let rw = method_residuals(method, &tabs[3], horizon)?;
    let loose = method.with_epsilon(thr);
    let parts: Vec<Vec<(usize, f64)>> = tabs[..3]
        .iter()
        .map(|t| method_residuals(&loose, t, horizon))
        .collect::<Result<_>>()?;
    for (k, &(n, w)) in rw.iter().enumerate() {
        let bound: f64 = parts.iter().map(|p| p[k].1).sum();
        if w > bound + 1e-12 {
            return Ok(SqueezeOutcome::Failed {
                index: n,
                detail: format!("residual {w} exceeds the union bound {bound}"),
            });
        }
    }
    Ok(SqueezeOutcome::Pass)
}

/// Linear bounds at every `n <= N`:
/// strong w^p: `rho_w <= C^p max(1, 3^(p-1)) sum rho_i`;
/// A-strong: `rho_w <= C sum rho_i`;
/// f-strong: `rho_w <= k sum rho_i` with `k = ceil(C)`.
fn linear_consequence(method: &MethodSpec, c: f64, d: &[&[f64]], horizon: usize) -> Result<SqueezeOutcome> {
    let check = |n: usize, w: f64, rhs: f64| {
        let tol = 1e-10 * rhs.max(1.0);
        (w > rhs + tol).then(|| SqueezeOutcome::Failed {
            index: n,
            detail: format!("residual {w} exceeds {rhs}"),
        })
    };
    match method {
        MethodSpec::StrongWp { p } => {
            let k = c.powf(*p) * 3f64.powf(p - 1.0).max(1.0);
            let mut sums = [0.0; 4];
            for n in 1..=horizon {
                for (s, di) in sums.iter_mut().zip(d) {
                    *s += di[n - 1].powf(*p);
                }
                let r: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
                if let Some(f) = check(n, r[3], k * (r[0] + r[1] + r[2])) {
                    return Ok(f);
                }
            }
        }
        MethodSpec::AStrong { matrix } => {
            for n in 1..=horizon {
                let row = matrix.row(n)?;
                let r: Vec<f64> = d.iter().map(|di| crate::summability::a_strong_from_distances(di, &row)).collect();
                if let Some(f) = check(n, r[3], c * (r[0] + r[1] + r[2])) {
                    return Ok(f);
                }
            }
        }
        MethodSpec::FStrong { modulus } => {
            let k = c.ceil();
            let mut sums = [0.0; 4];
            for n in 1..=horizon {
                for (s, di) in sums.iter_mut().zip(d) {
                    *s += di[n - 1];
                }
                let denom = modulus.eval(n as f64);
                if !(denom > 0.0) {
                    return Err(Error::DegenerateModulus(n as f64));
                }
                let r: Vec<f64> = sums.iter().map(|s| modulus.eval(*s) / denom).collect();
                if let Some(f) = check(n, r[3], k * (r[0] + r[1] + r[2])) {
                    return Ok(f);
                }
            }
        }
        other => return Err(Error::UnsupportedMethod(other.kind().as_str().into())),
    }
    Ok(SqueezeOutcome::Pass)
}

/// Nodewise prefix sums of `terms[i] - limit`.
struct DeviationSums {
    prefix: Vec<Vec<f64>>,
}

impl DeviationSums {
    fn new(terms: &[SampledFunction], limit: &SampledFunction) -> Self {
        let m = limit.grid().len();
        let mut prefix = Vec::with_capacity(terms.len() + 1);
        prefix.push(vec![0.0; m]);
        for t in terms {
            let last = prefix.last().expect("nonempty");
            let next = last
                .iter()
                .zip(t.values().iter().zip(limit.values()))
                .map(|(p, (x, l))| p + (x - l))
                .collect();
            prefix.push(next);
        }
        DeviationSums { prefix }
    }

    /// Sum of deviations over terms `lo..=hi` (1-based) at `node`.
    fn window(&self, lo: usize, hi: usize, node: usize) -> f64 {
        self.prefix[hi][node] - self.prefix[lo - 1][node]
    }
}

pub fn squeeze_trial_order(method: &MethodSpec, c: f64, seed: u64, horizon: usize, tau: f64) -> Result<SqueezeReport> {
    run_order_trial(method, c, seed, horizon, tau, 0, false)
}

/// The trial with the first `offset` terms of every sequence dropped.
pub fn squeeze_trial_order_offset(
    method: &MethodSpec,
    c: f64,
    seed: u64,
    horizon: usize,
    tau: f64,
    offset: usize,
) -> Result<SqueezeReport> {
    run_order_trial(method, c, seed, horizon, tau, offset, false)
}

/// Same construction, with `w` pushed outside its nodewise bound once.
pub fn squeeze_trial_order_control(method: &MethodSpec, c: f64, seed: u64, horizon: usize, tau: f64) -> Result<SqueezeReport> {
    run_order_trial(method, c, seed, horizon, tau, 0, true)
}

fn run_order_trial(
    method: &MethodSpec,
    c: f64,
    seed: u64,
    horizon: usize,
    tau: f64,
    offset: usize,
    violate: bool,
) -> Result<SqueezeReport> {
    if !matches!(method, MethodSpec::Almost { .. } | MethodSpec::Matrix { .. }) {
        return Err(Error::UnsupportedMethod(method.kind().as_str().into()));
    }
    method.validate()?;
    check_c(c)?;
    if horizon < 8 {
        return Err(Error::param(format!("horizon N must be at least 8, got {horizon}")));
    }
    let len = match method {
        MethodSpec::Almost { .. } => method.required_len(horizon)?,
        MethodSpec::Matrix { matrix } => {
            let mut len = horizon;
            for n in 1..=horizon {
                len = len.max(matrix.support_bound(n)?);
            }
            len
        }
        _ => unreachable!(),
    };
    let grid = Grid::unit(ORDER_TRIAL_GRID_M)?;
    let nodes = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tabs = Vec::with_capacity(4);
    for _ in 0..3 {
        let limit = random_limit(&mut rng, grid);
        let terms = (1 + offset..=len + offset)
            .map(|n| {
                let v = limit
                    .values()
                    .iter()
                    .map(|l| l + ORDER_PERTURBATION * rng.gen_range(0.1..=1.0) / n as f64)
                    .collect();
                SampledFunction::from_parts_unchecked(grid, v)
            })
            .collect();
        tabs.push(Tabulated::from_terms(terms, limit)?);
    }
    let envelope: Vec<Vec<f64>> = (0..len)
        .map(|i| {
            (0..nodes)
                .map(|k| {
                    tabs.iter()
                        .map(|t| t.terms().expect("kept")[i].values()[k] - t.limit().values()[k])
                        .sum()
                })
                .collect()
        })
        .collect();
    let w_limit = random_limit(&mut rng, grid);
    let mut w_terms: Vec<SampledFunction> = envelope
        .iter()
        .map(|s| {
            let v = w_limit
                .values()
                .iter()
                .zip(s)
                .map(|(l, sk)| l + c * sk * rng.gen_range(-FILL..=FILL))
                .collect();
            SampledFunction::from_parts_unchecked(grid, v)
        })
        .collect();
    if violate {
        let i = horizon / 2 - 1;
        let mut v = w_terms[i].values().to_vec();
        v[nodes / 2] = w_limit.values()[nodes / 2] + 2.0 * c * envelope[i][nodes / 2] + 1e-3;
        w_terms[i] = SampledFunction::from_parts_unchecked(grid, v);
    }
    tabs.push(Tabulated::from_terms(w_terms, w_limit)?);

    let w_tab = &tabs[3];
    let w_terms = w_tab.terms().expect("kept");
    let hypothesis = (0..len).find_map(|i| {
        (0..nodes).find_map(|k| {
            let dev = (w_terms[i].values()[k] - w_tab.limit().values()[k]).abs();
            (dev > c * envelope[i][k]).then(|| SqueezeOutcome::HypothesisViolated {
                index: i + 1,
                detail: format!("|w_n - w| = {dev} > C S_n = {} at node {k}", c * envelope[i][k]),
            })
        })
    });

    let outcome = match hypothesis {
        Some(v) => v,
        None => {
            let sw = DeviationSums::new(w_terms, w_tab.limit());
            let parts: Vec<DeviationSums> = tabs[..3]
                .iter()
                .map(|t| DeviationSums::new(t.terms().expect("kept"), t.limit()))
                .collect();
            let env = |lo: usize, hi: usize, k: usize| parts.iter().map(|p| p.window(lo, hi, k)).sum::<f64>();
            match method {
                MethodSpec::Almost { m, n_max } => almost_consequence(&sw, &env, c, *m, *n_max, nodes),
                MethodSpec::Matrix { matrix } => {
                    let mut out = SqueezeOutcome::Pass;
                    'rows: for n in 1..=horizon {
                        let row = matrix.row(n)?;
                        for k in 0..nodes {
                            let lhs: f64 = row.iter().map(|&(j, a)| a * sw.window(j, j, k)).sum::<f64>().abs();
                            let rhs: f64 = c * row.iter().map(|&(j, a)| a * env(j, j, k)).sum::<f64>().abs();
                            if lhs > rhs {
                                out = SqueezeOutcome::Failed {
                                    index: n,
                                    detail: format!("weighted bound fails at node {k}: {lhs} > {rhs}"),
                                };
                                break 'rows;
                            }
                        }
                    }
                    out
                }
                _ => unreachable!(),
            }
        }
    };

    let (outcome, verdicts) = if outcome == SqueezeOutcome::Pass {
        let v: Vec<Verdict> = tabs
            .iter()
            .map(|t| Ok(residual_curve(method, t, horizon, tau)?.verdict))
            .collect::<Result<_>>()?;
        let outcome = if v[3] == Verdict::Consistent {
            SqueezeOutcome::Pass
        } else {
            SqueezeOutcome::Failed {
                index: horizon,
                detail: format!("w curve is {} at tau = {tau}", v[3]),
            }
        };
        (
            outcome,
            Some(SqueezeVerdicts {
                x: v[0],
                y: v[1],
                z: v[2],
                w: v[3],
            }),
        )
    } else {
        (outcome, None)
    };
    Ok(SqueezeReport {
        method: method.clone(),
        c,
        seed,
        horizon,
        outcome,
        verdicts,
    })
}

/// `|avg w - w| <= C |sum_e (avg e - e)|` nodewise, for every window size in
/// the curve and every start `n <= n_max`.
fn almost_consequence(
    sw: &DeviationSums,
    env: &dyn Fn(usize, usize, usize) -> f64,
    c: f64,
    m: usize,
    n_max: usize,
    nodes: usize,
) -> SqueezeOutcome {
    for width in checkpoints(m) {
        let scale = 1.0 / (width + 1) as f64;
        for n in 1..=n_max {
            for k in 0..nodes {
                let lhs = (sw.window(n, n + width, k) * scale).abs();
                let rhs = c * (env(n, n + width, k) * scale).abs();
                if lhs > rhs {
                    return SqueezeOutcome::Failed {
                        index: n,
                        detail: format!("window {width} at node {k}: {lhs} > {rhs}"),
                    };
                }
            }
        }
    }
    SqueezeOutcome::Pass
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionControl {
    /// Residual of `x_n = q` under the projection method (q is orthogonal to 1, t, t^2).
    pub dominating_residual: f64,
    /// Residual of `w_n = q^2`, which satisfies `|w_n| <= |x_n|`.
    pub dominated_residual: f64,
    pub hypothesis_holds: bool,
    pub dominating_verdict: Verdict,
    pub dominated_verdict: Verdict,
    /// True when the squeeze fails, as expected of this method.
    pub squeeze_fails: bool,
}

/// Discrete least-squares projection onto span{1, t, t^2} over the grid nodes.
fn project_quadratic(f: &[f64], nodes: &[f64]) -> [f64; 3] {
    let basis = |t: f64| [1.0, t, t * t];
    let mut g = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&t, &y) in nodes.iter().zip(f) {
        let b = basis(t);
        for i in 0..3 {
            r[i] += b[i] * y;
            for j in 0..3 {
                g[i][j] += b[i] * b[j];
            }
        }
    }
    // Gaussian elimination; the Gram matrix is symmetric positive definite.
    for col in 0..3 {
        for row in col + 1..3 {
            let f = g[row][col] / g[col][col];
            for j in col..3 {
                g[row][j] -= f * g[col][j];
            }
            r[row] -= f * r[col];
        }
    }
    let mut coef = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| g[i][j] * coef[j]).sum();
        coef[i] = (r[i] - s) / g[i][i];
    }
    coef
}

/// The projection-based method (limit of the projection onto span{1, t, t^2})
/// as a negative control: it does not preserve inequalities.
pub fn projection_control(grid: &Grid, horizon: usize, tau: f64) -> Result<ProjectionControl> {
    if grid.is_periodic() {
        return Err(Error::InvalidGrid("the projection control lives on [0, 1]".into()));
    }
    let nodes = grid.nodes();
    let cubic: Vec<f64> = nodes.iter().map(|t| t * t * t).collect();
    let p = project_quadratic(&cubic, &nodes);
    let mut q: Vec<f64> = nodes.iter().zip(&cubic).map(|(t, c)| c - (p[0] + p[1] * t + p[2] * t * t)).collect();
    let s = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    q.iter_mut().for_each(|v| *v /= s);
    let w: Vec<f64> = q.iter().map(|v| v * v).collect();

    let proj_norm = |f: &[f64]| {
        let c = project_quadratic(f, &nodes);
        nodes.iter().fold(0.0f64, |a, t| a.max((c[0] + c[1] * t + c[2] * t * t).abs()))
    };
    let dominating_residual = proj_norm(&q);
    let dominated_residual = proj_norm(&w);
    let hypothesis_holds = w.iter().zip(&q).all(|(a, b)| a.abs() <= b.abs());

    let curve = |r: f64| -> Vec<(usize, f64)> { checkpoints(horizon).into_iter().map(|n| (n, r)).collect() };
    let dominating_verdict = decide_verdict(&curve(dominating_residual), tau)?;
    let dominated_verdict = decide_verdict(&curve(dominated_residual), tau)?;
    Ok(ProjectionControl {
        dominating_residual,
        dominated_residual,
        hypothesis_holds,
        dominating_verdict,
        dominated_verdict,
        squeeze_fails: hypothesis_holds
            && dominating_verdict == Verdict::Consistent
            && dominated_verdict != Verdict::Consistent,
    })
}
