//! Summability methods as residual functionals on sequences of sampled
//! functions.
//!
//! A [`MethodSpec`] turns a tabulated sequence into a [`ResidualCurve`]:
//! residuals at a ladder of checkpoints up to the horizon `N`, plus the
//! quartile [`Verdict`]. The norm method reports the trailing block supremum
//! `max_(n/2 < k <= n) ||x_k - L||`, a finite stand-in for the limsup, so a
//! spike that keeps recurring keeps the curve up.

pub mod ideal;
pub mod matrix;
pub mod modulus;
pub mod residual;
pub mod verdict;

use std::io;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};

pub use ideal::IdealSpec;
pub use matrix::{check_regularity, MatrixSpec, RegularityReport, RegularityThresholds};
pub use modulus::{is_modulus, ModulusReport, ModulusSpec, DEFAULT_MODULUS_POINTS};
pub use residual::*;
pub use verdict::{decide_verdict, Verdict};

use crate::error::{Error, Result};
use crate::funcspace::{fmt17, SampledFunction};

/// Upper bound on the number of checkpoints in a curve.
pub const MAX_CHECKPOINTS: usize = 100;

/// Verdict threshold used when none is configured.
pub const DEFAULT_TAU: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Norm,
    Statistical,
    Ideal,
    StrongWp,
    AStatistical,
    AStrong,
    FStatistical,
    FStrong,
    Almost,
    Matrix,
}

impl MethodKind {
    pub const ALL: [MethodKind; 10] = [
        MethodKind::Norm,
        MethodKind::Statistical,
        MethodKind::Ideal,
        MethodKind::StrongWp,
        MethodKind::AStatistical,
        MethodKind::AStrong,
        MethodKind::FStatistical,
        MethodKind::FStrong,
        MethodKind::Almost,
        MethodKind::Matrix,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodKind::Norm => "norm",
            MethodKind::Statistical => "statistical",
            MethodKind::Ideal => "ideal",
            MethodKind::StrongWp => "strong_wp",
            MethodKind::AStatistical => "a_statistical",
            MethodKind::AStrong => "a_strong",
            MethodKind::FStatistical => "f_statistical",
            MethodKind::FStrong => "f_strong",
            MethodKind::Almost => "almost",
            MethodKind::Matrix => "matrix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MethodKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A summability method with its parameters.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    Norm,
    Statistical { epsilon: f64 },
    Ideal { ideal: IdealSpec, epsilon: f64 },
    StrongWp { p: f64 },
    AStatistical { matrix: MatrixSpec, epsilon: f64 },
    AStrong { matrix: MatrixSpec },
    FStatistical { modulus: ModulusSpec, epsilon: f64 },
    FStrong { modulus: ModulusSpec },
    /// Sliding-window means; the curve runs over window sizes up to `m`.
    Almost { m: usize, n_max: usize },
    Matrix { matrix: MatrixSpec },
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl MethodSpec {
    pub fn kind(&self) -> MethodKind {
        match self {
            MethodSpec::Norm => MethodKind::Norm,
            MethodSpec::Statistical { .. } => MethodKind::Statistical,
            MethodSpec::Ideal { .. } => MethodKind::Ideal,
            MethodSpec::StrongWp { .. } => MethodKind::StrongWp,
            MethodSpec::AStatistical { .. } => MethodKind::AStatistical,
            MethodSpec::AStrong { .. } => MethodKind::AStrong,
            MethodSpec::FStatistical { .. } => MethodKind::FStatistical,
            MethodSpec::FStrong { .. } => MethodKind::FStrong,
            MethodSpec::Almost { .. } => MethodKind::Almost,
            MethodSpec::Matrix { .. } => MethodKind::Matrix,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            MethodSpec::Statistical { epsilon }
            | MethodSpec::Ideal { epsilon, .. }
            | MethodSpec::AStatistical { epsilon, .. }
            | MethodSpec::FStatistical { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }

    /// The same method with its epsilon replaced; methods without one are returned as is.
    pub fn with_epsilon(&self, e: f64) -> MethodSpec {
        let mut out = self.clone();
        match &mut out {
            MethodSpec::Statistical { epsilon }
            | MethodSpec::Ideal { epsilon, .. }
            | MethodSpec::AStatistical { epsilon, .. }
            | MethodSpec::FStatistical { epsilon, .. } => *epsilon = e,
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon() {
            if !positive(eps) {
                return Err(Error::param(format!("epsilon must be positive, got {eps}")));
            }
        }
        match self {
            MethodSpec::StrongWp { p } if !positive(*p) => Err(Error::param(format!("p must be positive, got {p}"))),
            MethodSpec::Almost { m, n_max } if *m < 8 || *n_max == 0 => Err(Error::param(format!(
                "almost method needs m >= 8 and n_max >= 1, got m = {m}, n_max = {n_max}"
            ))),
            _ => Ok(()),
        }
    }

    /// Whether the curve needs the terms, not just their distances to the limit.
    pub fn needs_terms(&self) -> bool {
        matches!(self, MethodSpec::Almost { .. } | MethodSpec::Matrix { .. })
    }

    fn matrix(&self) -> Option<&MatrixSpec> {
        match self {
            MethodSpec::AStatistical { matrix, .. } | MethodSpec::AStrong { matrix } | MethodSpec::Matrix { matrix } => Some(matrix),
            _ => None,
        }
    }

    /// Curve indices: checkpoints up to `horizon`, or window sizes up to `m` for almost.
    pub fn checkpoints(&self, horizon: usize) -> Vec<usize> {
        match self {
            MethodSpec::Almost { m, .. } => checkpoints(*m),
            _ => checkpoints(horizon),
        }
    }

    /// Number of terms `x_1..` that must be tabulated for a curve up to `horizon`.
    pub fn required_len(&self, horizon: usize) -> Result<usize> {
        if let MethodSpec::Almost { m, n_max } = self {
            return Ok(n_max + m);
        }
        let mut len = horizon;
        if let Some(a) = self.matrix() {
            for n in checkpoints(horizon) {
                len = len.max(a.support_bound(n)?);
            }
        }
        Ok(len)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("kind".into(), json!(self.kind().as_str()));
        if let Some(eps) = self.epsilon() {
            obj.insert("epsilon".into(), json!(eps));
        }
        match self {
            MethodSpec::StrongWp { p } => {
                obj.insert("p".into(), json!(p));
            }
            MethodSpec::FStatistical { modulus, .. } | MethodSpec::FStrong { modulus } => {
                obj.insert("modulus".into(), json!({ "name": modulus.name() }));
            }
            MethodSpec::Ideal { ideal, .. } => {
                obj.insert("ideal".into(), json!({ "kind": ideal.name() }));
            }
            MethodSpec::Almost { m, n_max } => {
                obj.insert("almost".into(), json!({ "m": m, "n_max": n_max }));
            }
            _ => {}
        }
        if let Some(a) = self.matrix() {
            let mut mj = Map::new();
            mj.insert("name".into(), json!(a.name()));
            if let Some((rows, totals)) = a.explicit_rows() {
                mj.insert("rows".into(), json!(rows));
                if let Some(t) = totals {
                    mj.insert("totals".into(), json!(t));
                }
            }
            if a.scale() != 1.0 {
                mj.insert("scale".into(), json!(a.scale()));
            }
            obj.insert("matrix".into(), Value::Object(mj));
        }
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let mut errors = Vec::new();
        match parse_method(v, "method", &mut errors) {
            Some(m) if errors.is_empty() => Ok(m),
            _ => Err(Error::param(errors.join("; "))),
        }
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for MethodSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        MethodSpec::from_json(&v).map_err(serde::de::Error::custom)
    }
}

const METHOD_FIELDS: [&str; 8] = ["kind", "p", "epsilon", "modulus", "matrix", "ideal", "almost", "n0"];

fn num_field(obj: &Map<String, Value>, key: &str, path: &str, errors: &mut Vec<String>) -> Option<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(x) => Some(x),
            None => {
                errors.push(format!("{path}.{key}: must be a number"));
                None
            }
        },
    }
}

fn uint_field(obj: &Map<String, Value>, key: &str, path: &str, errors: &mut Vec<String>) -> Option<usize> {
    match obj.get(key) {
        None | Some(Value::Null) => {
            errors.push(format!("{path}.{key}: required"));
            None
        }
        Some(v) => match v.as_u64() {
            Some(x) => Some(x as usize),
            None => {
                errors.push(format!("{path}.{key}: must be a nonnegative integer"));
                None
            }
        },
    }
}

fn parse_matrix(v: &Value, path: &str, errors: &mut Vec<String>) -> Option<MatrixSpec> {
    let Some(obj) = v.as_object() else {
        errors.push(format!("{path}: must be an object"));
        return None;
    };
    for k in obj.keys() {
        if !["name", "rows", "totals", "scale"].contains(&k.as_str()) {
            errors.push(format!("{path}.{k}: unknown field"));
        }
    }
    let base = match obj.get("name").and_then(Value::as_str) {
        Some("cesaro") => Some(MatrixSpec::cesaro()),
        Some("identity") => Some(MatrixSpec::identity()),
        Some("custom") => {
            let rows: Option<Vec<matrix::Row>> = match obj.get("rows") {
                None => {
                    errors.push(format!("{path}.rows: required for a custom matrix"));
                    None
                }
                Some(r) => match serde_json::from_value(r.clone()) {
                    Ok(rows) => Some(rows),
                    Err(_) => {
                        errors.push(format!("{path}.rows: must be a list of rows of [j, alpha] pairs"));
                        None
                    }
                },
            };
            let totals: Option<Vec<f64>> = match obj.get("totals") {
                None | Some(Value::Null) => None,
                Some(t) => match serde_json::from_value(t.clone()) {
                    Ok(t) => Some(t),
                    Err(_) => {
                        errors.push(format!("{path}.totals: must be a list of numbers"));
                        None
                    }
                },
            };
            rows.and_then(|r| match MatrixSpec::explicit(r, totals) {
                Ok(m) => Some(m),
                Err(e) => {
                    errors.push(format!("{path}: {e}"));
                    None
                }
            })
        }
        Some(other) => {
            errors.push(format!("{path}.name: unknown matrix `{other}` (expected cesaro, identity or custom)"));
            None
        }
        None => {
            errors.push(format!("{path}.name: required"));
            None
        }
    };
    let scale = num_field(obj, "scale", path, errors);
    match (base, scale) {
        (Some(m), Some(c)) => match m.scaled(c) {
            Ok(m) => Some(m),
            Err(e) => {
                errors.push(format!("{path}.scale: {e}"));
                None
            }
        },
        (m, _) => m,
    }
}

/// Parses a method object, pushing `path.field: message` errors.
pub fn parse_method(v: &Value, path: &str, errors: &mut Vec<String>) -> Option<MethodSpec> {
    let Some(obj) = v.as_object() else {
        errors.push(format!("{path}: must be an object"));
        return None;
    };
    for k in obj.keys() {
        if !METHOD_FIELDS.contains(&k.as_str()) {
            errors.push(format!("{path}.{k}: unknown field"));
        }
    }
    let before = errors.len();
    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some(s) => match MethodKind::parse(s) {
            Some(k) => Some(k),
            None => {
                let all: Vec<_> = MethodKind::ALL.iter().map(|k| k.as_str()).collect();
                errors.push(format!("{path}.kind: unknown kind `{s}` (expected one of {})", all.join(", ")));
                None
            }
        },
        None => {
            errors.push(format!("{path}.kind: required"));
            None
        }
    };
    let kind = kind?;

    let needs_eps = matches!(
        kind,
        MethodKind::Statistical | MethodKind::Ideal | MethodKind::AStatistical | MethodKind::FStatistical
    );
    let epsilon = num_field(obj, "epsilon", path, errors);
    if needs_eps {
        match epsilon {
            None if !errors.iter().any(|e| e.starts_with(&format!("{path}.epsilon"))) => {
                errors.push(format!("{path}.epsilon: required for kind {}", kind.as_str()))
            }
            Some(e) if !positive(e) => errors.push(format!("{path}.epsilon: must be positive")),
            _ => {}
        }
    }
    let eps = epsilon.unwrap_or(f64::NAN);

    let needs_matrix = matches!(kind, MethodKind::AStatistical | MethodKind::AStrong | MethodKind::Matrix);
    let matrix = if needs_matrix {
        match obj.get("matrix") {
            Some(m) => parse_matrix(m, &format!("{path}.matrix"), errors),
            None => {
                errors.push(format!("{path}.matrix: required for kind {}", kind.as_str()));
                None
            }
        }
    } else {
        None
    };

    let modulus = if matches!(kind, MethodKind::FStatistical | MethodKind::FStrong) {
        match obj.get("modulus").and_then(|m| m.get("name")).and_then(Value::as_str) {
            Some(name) => match ModulusSpec::by_name(name) {
                Some(m) => Some(m),
                None => {
                    errors.push(format!(
                        "{path}.modulus.name: unknown modulus `{name}` (expected sqrt, log1p or identity)"
                    ));
                    None
                }
            },
            None => {
                errors.push(format!("{path}.modulus.name: required for kind {}", kind.as_str()));
                None
            }
        }
    } else {
        None
    };

    let ideal = if kind == MethodKind::Ideal {
        match obj.get("ideal").and_then(|m| m.get("kind")).and_then(Value::as_str) {
            Some("finite_sets") => Some(IdealSpec::FiniteSets),
            Some("zero_density") => Some(IdealSpec::ZeroDensity),
            Some("custom_density") | Some("logarithmic") => Some(IdealSpec::logarithmic()),
            Some(other) => {
                errors.push(format!(
                    "{path}.ideal.kind: unknown ideal `{other}` (expected finite_sets, zero_density or custom_density)"
                ));
                None
            }
            None => {
                errors.push(format!("{path}.ideal.kind: required for kind ideal"));
                None
            }
        }
    } else {
        None
    };

    let p = if kind == MethodKind::StrongWp {
        match num_field(obj, "p", path, errors) {
            Some(p) if positive(p) => Some(p),
            Some(_) => {
                errors.push(format!("{path}.p: must be positive"));
                None
            }
            None => {
                if !errors.iter().any(|e| e.starts_with(&format!("{path}.p"))) {
                    errors.push(format!("{path}.p: required for kind strong_wp"));
                }
                None
            }
        }
    } else {
        None
    };

    let almost = if kind == MethodKind::Almost {
        match obj.get("almost").and_then(Value::as_object) {
            Some(a) => {
                let apath = format!("{path}.almost");
                let m = uint_field(a, "m", &apath, errors);
                let n_max = uint_field(a, "n_max", &apath, errors);
                if let Some(m) = m {
                    if m < 8 {
                        errors.push(format!("{apath}.m: must be at least 8"));
                    }
                }
                if n_max == Some(0) {
                    errors.push(format!("{apath}.n_max: must be at least 1"));
                }
                m.zip(n_max)
            }
            None => {
                errors.push(format!("{path}.almost: required for kind almost"));
                None
            }
        }
    } else {
        None
    };

    if errors.len() > before {
        return None;
    }
    Some(match kind {
        MethodKind::Norm => MethodSpec::Norm,
        MethodKind::Statistical => MethodSpec::Statistical { epsilon: eps },
        MethodKind::Ideal => MethodSpec::Ideal {
            ideal: ideal?,
            epsilon: eps,
        },
        MethodKind::StrongWp => MethodSpec::StrongWp { p: p? },
        MethodKind::AStatistical => MethodSpec::AStatistical {
            matrix: matrix?,
            epsilon: eps,
        },
        MethodKind::AStrong => MethodSpec::AStrong { matrix: matrix? },
        MethodKind::FStatistical => MethodSpec::FStatistical {
            modulus: modulus?,
            epsilon: eps,
        },
        MethodKind::FStrong => MethodSpec::FStrong { modulus: modulus? },
        MethodKind::Almost => {
            let (m, n_max) = almost?;
            MethodSpec::Almost { m, n_max }
        }
        MethodKind::Matrix => MethodSpec::Matrix { matrix: matrix? },
    })
}

/// `min(h, 100)` evenly spaced indices ending at `h`.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    if horizon == 0 {
        return Vec::new();
    }
    let k = horizon.min(MAX_CHECKPOINTS);
    let mut out: Vec<usize> = (1..=k).map(|i| (i * horizon).div_ceil(k)).collect();
    out.dedup();
    out
}

/// A sequence evaluated on `1..=len`: the distances to its limit, and the
/// terms themselves when a method needs them.
#[derive(Debug, Clone)]
pub struct Tabulated {
    limit: SampledFunction,
    distances: Vec<f64>,
    terms: Option<Vec<SampledFunction>>,
}

impl Tabulated {
    pub fn from_sequence<S: FunctionSequence + ?Sized>(seq: &S, limit: &SampledFunction, len: usize, keep_terms: bool) -> Result<Self> {
        if keep_terms {
            Tabulated::from_terms(terms(seq, len)?, limit.clone())
        } else {
            Ok(Tabulated {
                limit: limit.clone(),
                distances: distances(seq, limit, len)?,
                terms: None,
            })
        }
    }

    pub fn from_terms(terms: Vec<SampledFunction>, limit: SampledFunction) -> Result<Self> {
        let distances = terms.iter().map(|t| t.distance(&limit)).collect::<Result<_>>()?;
        Ok(Tabulated {
            limit,
            distances,
            terms: Some(terms),
        })
    }

    pub fn from_distances(distances: Vec<f64>, limit: SampledFunction) -> Self {
        Tabulated {
            limit,
            distances,
            terms: None,
        }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn limit(&self) -> &SampledFunction {
        &self.limit
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn terms(&self) -> Option<&[SampledFunction]> {
        self.terms.as_deref()
    }
}

/// Residuals of a method over its checkpoints, with the verdict at `tau`.
#[derive(Debug, Clone)]
pub struct ResidualCurve {
    pub method: MethodSpec,
    pub limit: SampledFunction,
    pub residuals: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

impl Serialize for ResidualCurve {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ResidualCurve", 4)?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("limit", &self.limit)?;
        st.serialize_field("residuals", &self.residuals)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.end()
    }
}

impl ResidualCurve {
    pub fn last(&self) -> f64 {
        self.residuals.last().map_or(0.0, |p| p.1)
    }

    pub fn to_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "residual"])?;
        for (n, r) in &self.residuals {
            out.write_record([n.to_string(), fmt17(*r)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `max d_k` over `n/2 < k <= n`.
fn block_sup(d: &[f64], n: usize) -> f64 {
    d[n / 2..n].iter().fold(0.0, |m, &v| m.max(v))
}

/// Residuals of `method` at its checkpoints, from tabulated data.
pub fn method_residuals(method: &MethodSpec, tab: &Tabulated, horizon: usize) -> Result<Vec<(usize, f64)>> {
    method.validate()?;
    let need = method.required_len(horizon)?;
    if tab.len() < need {
        return Err(Error::param(format!(
            "method {} at horizon {horizon} needs {need} terms, {} tabulated",
            method.kind().as_str(),
            tab.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::param("horizon N must be at least 1"));
    }
    let d = tab.distances();
    let idx = method.checkpoints(horizon);
    let need_terms = || {
        tab.terms()
            .ok_or_else(|| Error::param(format!("method {} needs tabulated terms", method.kind().as_str())))
    };
    let values: Vec<f64> = match method {
        MethodSpec::Norm => idx.iter().map(|&n| block_sup(d, n)).collect(),
        MethodSpec::Statistical { epsilon } => {
            let mut count = 0usize;
            let mut prefix = Vec::with_capacity(horizon);
            for &v in &d[..horizon] {
                count += usize::from(v > *epsilon);
                prefix.push(count);
            }
            idx.iter().map(|&n| prefix[n - 1] as f64 / n as f64).collect()
        }
        MethodSpec::Ideal { ideal, epsilon } => {
            let exc = exceedances(&d[..horizon], *epsilon);
            idx.iter()
                .map(|&n| ideal.density(&exc[..exc.partition_point(|&k| k <= n)], n))
                .collect()
        }
        MethodSpec::StrongWp { p } => {
            let mut acc = 0.0;
            let mut prefix = Vec::with_capacity(horizon);
            for &v in &d[..horizon] {
                acc += v.powf(*p);
                prefix.push(acc);
            }
            idx.iter().map(|&n| prefix[n - 1] / n as f64).collect()
        }
        MethodSpec::AStatistical { matrix, epsilon } => idx
            .iter()
            .map(|&n| Ok(a_statistical_from_distances(d, &matrix.row(n)?, *epsilon)))
            .collect::<Result<_>>()?,
        MethodSpec::AStrong { matrix } => idx
            .iter()
            .map(|&n| Ok(a_strong_from_distances(d, &matrix.row(n)?)))
            .collect::<Result<_>>()?,
        MethodSpec::FStatistical { modulus, epsilon } => idx
            .iter()
            .map(|&n| f_statistical_from_distances(&d[..n], modulus, *epsilon))
            .collect::<Result<_>>()?,
        MethodSpec::FStrong { modulus } => {
            let mut acc = 0.0;
            let mut prefix = Vec::with_capacity(horizon);
            for &v in &d[..horizon] {
                acc += v;
                prefix.push(acc);
            }
            idx.iter()
                .map(|&n| {
                    let denom = modulus.eval(n as f64);
                    if denom > 0.0 && denom.is_finite() {
                        Ok(modulus.eval(prefix[n - 1]) / denom)
                    } else {
                        Err(Error::DegenerateModulus(n as f64))
                    }
                })
                .collect::<Result<_>>()?
        }
        MethodSpec::Almost { n_max, .. } => {
            let sums = WindowSums::new(need_terms()?)?;
            idx.iter()
                .map(|&m| sums.almost_residual(tab.limit(), m, *n_max))
                .collect::<Result<_>>()?
        }
        MethodSpec::Matrix { matrix } => {
            let ts = need_terms()?;
            idx.iter()
                .map(|&n| apply_matrix_to_terms(ts, matrix, n)?.distance(tab.limit()))
                .collect::<Result<_>>()?
        }
    };
    Ok(idx.into_iter().zip(values).collect())
}

pub fn residual_curve(method: &MethodSpec, tab: &Tabulated, horizon: usize, tau: f64) -> Result<ResidualCurve> {
    let residuals = method_residuals(method, tab, horizon)?;
    let verdict = decide_verdict(&residuals, tau)?;
    Ok(ResidualCurve {
        method: method.clone(),
        limit: tab.limit().clone(),
        residuals,
        verdict,
    })
}

/// Tabulates `seq` as far as `method` needs and builds its curve.
pub fn method_curve<S: FunctionSequence + ?Sized>(
    method: &MethodSpec,
    seq: &S,
    limit: &SampledFunction,
    horizon: usize,
    tau: f64,
) -> Result<ResidualCurve> {
    method.validate()?;
    let tab = Tabulated::from_sequence(seq, limit, method.required_len(horizon)?, method.needs_terms())?;
    residual_curve(method, &tab, horizon, tau)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnorCheck {
    /// Combined over the epsilon grid: consistent only if every epsilon is.
    pub statistical: Verdict,
    pub strong: Verdict,
    pub agree: bool,
    /// The shared verdict, or indeterminate on disagreement.
    pub outcome: Verdict,
}

/// Compares statistical verdicts over `epsilons` with the strong Cesàro (`p = 1`) verdict.
pub fn connor_cross_check(tab: &Tabulated, epsilons: &[f64], horizon: usize, tau: f64) -> Result<ConnorCheck> {
    if epsilons.is_empty() {
        return Err(Error::param("epsilon grid is empty"));
    }
    let mut stat = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        stat.push(residual_curve(&MethodSpec::Statistical { epsilon }, tab, horizon, tau)?.verdict);
    }
    let statistical = if stat.iter().all(|v| *v == Verdict::Consistent) {
        Verdict::Consistent
    } else if stat.contains(&Verdict::Inconsistent) {
        Verdict::Inconsistent
    } else {
        Verdict::Indeterminate
    };
    let strong = residual_curve(&MethodSpec::StrongWp { p: 1.0 }, tab, horizon, tau)?.verdict;
    let agree = statistical == strong;
    Ok(ConnorCheck {
        statistical,
        strong,
        agree,
        outcome: if agree { strong } else { Verdict::Indeterminate },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::Grid;

    fn flat(d: Vec<f64>) -> Tabulated {
        Tabulated::from_distances(d, SampledFunction::zero(Grid::unit(4).unwrap()))
    }

    #[test]
    fn checkpoints_shape() {
        assert_eq!(checkpoints(8), (1..=8).collect::<Vec<_>>());
        let c = checkpoints(10_000);
        assert_eq!(c.len(), 100);
        assert_eq!(c[0], 100);
        assert_eq!(*c.last().unwrap(), 10_000);
        let c = checkpoints(250);
        assert_eq!(c.len(), 100);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn norm_curve_uses_block_sup() {
        let d: Vec<f64> = (1..=1000).map(|n| if crate::operators::is_perfect_square(n) { 1.0 } else { 0.0 }).collect();
        for horizon in [399, 400, 990] {
            let c = residual_curve(&MethodSpec::Norm, &flat(d.clone()), horizon, 0.02).unwrap();
            assert_eq!(c.verdict, Verdict::Inconsistent, "N = {horizon}");
        }
        let decaying: Vec<f64> = (1..=400).map(|n| 1.0 / n as f64).collect();
        let c = residual_curve(&MethodSpec::Norm, &flat(decaying), 400, 0.02).unwrap();
        assert_eq!(c.verdict, Verdict::Consistent);
        assert_eq!(c.last(), 1.0 / 201.0);
        let c = residual_curve(&MethodSpec::Statistical { epsilon: 0.5 }, &flat((1..=10_000).map(|n| if crate::operators::is_perfect_square(n) { 1.0 } else { 0.0 }).collect()), 10_000, 0.02).unwrap();
        assert_eq!(c.verdict, Verdict::Consistent);
        assert_eq!(c.last(), 0.01);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let v: Value = serde_json::from_str(r#"{"kind":"a_statistical","epsilon":0.5,"matrix":{"name":"cesaro","scale":2}}"#).unwrap();
        let m = MethodSpec::from_json(&v).unwrap();
        assert_eq!(m.kind(), MethodKind::AStatistical);
        assert_eq!(MethodSpec::from_json(&m.to_json()).unwrap().to_json(), m.to_json());

        let mut errs = Vec::new();
        let bad: Value = serde_json::from_str(r#"{"kind":"f_statistical","epsilon":-1,"bogus":1}"#).unwrap();
        assert!(parse_method(&bad, "method", &mut errs).is_none());
        assert!(errs.contains(&"method.bogus: unknown field".to_string()));
        assert!(errs.contains(&"method.epsilon: must be positive".to_string()));
        assert!(errs.iter().any(|e| e.starts_with("method.modulus.name: required")));

        let custom: Value = serde_json::from_str(r#"{"kind":"matrix","matrix":{"name":"custom","rows":[[[1,1.0]],[[1,0.5],[2,0.5]]]}}"#).unwrap();
        let m = MethodSpec::from_json(&custom).unwrap();
        assert_eq!(m.to_json()["matrix"]["rows"][1][1][1], 0.5);
    }

    #[test]
    fn a_statistical_reduces_to_statistical_under_cesaro() {
        let d: Vec<f64> = (1..=500).map(|n| ((n * 37 % 101) as f64) / 100.0).collect();
        let tab = flat(d);
        let a = method_residuals(&MethodSpec::AStatistical { matrix: MatrixSpec::cesaro(), epsilon: 0.333 }, &tab, 500).unwrap();
        let s = method_residuals(&MethodSpec::Statistical { epsilon: 0.333 }, &tab, 500).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&s) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn insufficient_tabulation_is_an_error() {
        let tab = flat(vec![0.0; 10]);
        assert!(method_residuals(&MethodSpec::Norm, &tab, 20).is_err());
        assert!(method_residuals(&MethodSpec::Matrix { matrix: MatrixSpec::cesaro() }, &tab, 10).is_err());
    }
}
