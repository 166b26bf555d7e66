//! Scenario runner: JSON experiment configs in, `report.json`, residual
//! CSVs and `summary.txt` out.

pub mod scenarios;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::funcspace::{DEFAULT_PERIODIC_M, DEFAULT_UNIT_M};
use crate::summability::{parse_method, MethodSpec};

pub use scenarios::{registry, Scenario, ScenarioOutcome};

/// Operators a config may name.
pub const OPERATORS: [&str; 3] = ["bernstein", "fejer", "modulated-squares"];

const CONFIG_FIELDS: [&str; 10] = [
    "scenario",
    "method",
    "operator",
    "N",
    "tau",
    "epsilon",
    "grid_m",
    "seed",
    "offset",
    "output_dir",
];

/// A validated config with every default filled in.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub method: MethodSpec,
    pub operator: Option<String>,
    pub n: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub grid_m: usize,
    pub seed: u64,
    /// Leading terms dropped from every sequence.
    pub offset: usize,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> Value {
        json!({
            "scenario": self.scenario,
            "method": self.method.to_json(),
            "operator": self.operator,
            "N": self.n,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "grid_m": self.grid_m,
            "seed": self.seed,
            "offset": self.offset,
            "output_dir": self.output_dir.as_ref().map(|p| p.display().to_string()),
        })
    }

    pub fn scenario(&self) -> &'static Scenario {
        scenarios::find(&self.scenario).expect("validated scenario")
    }

    pub fn with_offset(&self, offset: usize) -> Self {
        ExperimentConfig { offset, ..self.clone() }
    }
}

impl Serialize for ExperimentConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Registry names with one-line descriptions, one per line.
pub fn registry_listing() -> String {
    let mut out = String::new();
    for s in registry() {
        let _ = writeln!(out, "  {:<28} {}", s.name, s.description);
    }
    out
}

fn uint(obj: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<u64> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(x) => Some(x),
            None => {
                errors.push(format!("{key}: must be a nonnegative integer"));
                None
            }
        },
    }
}

fn number(obj: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(x) => Some(x),
            None => {
                errors.push(format!("{key}: must be a number"));
                None
            }
        },
    }
}

/// Parses and validates a config, collecting every problem.
pub fn validate(text: &str) -> std::result::Result<ExperimentConfig, Vec<String>> {
    match serde_json::from_str::<Value>(text) {
        Ok(v) => validate_value(&v),
        Err(e) => Err(vec![format!("config: invalid JSON: {e}")]),
    }
}

pub fn validate_value(v: &Value) -> std::result::Result<ExperimentConfig, Vec<String>> {
    let Some(obj) = v.as_object() else {
        return Err(vec!["config: must be a JSON object".into()]);
    };
    let mut errors = Vec::new();
    for k in obj.keys() {
        if !CONFIG_FIELDS.contains(&k.as_str()) {
            errors.push(format!("{k}: unknown field"));
        }
    }

    let scenario = match obj.get("scenario") {
        None | Some(Value::Null) => {
            errors.push("scenario: required".into());
            None
        }
        Some(Value::String(s)) => match scenarios::find(s) {
            Some(sc) => Some(sc),
            None => {
                errors.push(format!("scenario: unknown scenario `{s}`"));
                None
            }
        },
        Some(_) => {
            errors.push("scenario: must be a string".into());
            None
        }
    };

    let n = uint(obj, "N", &mut errors);
    if let Some(n) = n {
        if n < 8 {
            errors.push("N: must be at least 8".into());
        }
    }
    let tau = number(obj, "tau", &mut errors);
    if let Some(t) = tau {
        if !(t > 0.0 && t.is_finite()) {
            errors.push("tau: must be positive".into());
        }
    }
    let epsilon = number(obj, "epsilon", &mut errors);
    if let Some(e) = epsilon {
        if !(e > 0.0 && e.is_finite()) {
            errors.push("epsilon: must be positive".into());
        }
    }
    let grid_m = uint(obj, "grid_m", &mut errors);
    if let Some(m) = grid_m {
        if m < 4 {
            errors.push("grid_m: must be at least 4".into());
        }
    }
    let seed = uint(obj, "seed", &mut errors);
    let offset = uint(obj, "offset", &mut errors);
    let operator = match obj.get("operator") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if OPERATORS.contains(&s.as_str()) => Some(s.clone()),
        Some(Value::String(s)) => {
            errors.push(format!("operator: unknown operator `{s}` (expected one of {})", OPERATORS.join(", ")));
            None
        }
        Some(_) => {
            errors.push("operator: must be a string".into());
            None
        }
    };
    let output_dir = match obj.get("output_dir") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(_) => {
            errors.push("output_dir: must be a nonempty string".into());
            None
        }
    };

    let method = match obj.get("method") {
        None | Some(Value::Null) => None,
        Some(m) => {
            // A top-level epsilon fills in a method that needs one and lacks it.
            let mut m = m.clone();
            if let (Some(e), Some(mo)) = (epsilon, m.as_object_mut()) {
                mo.entry("epsilon").or_insert(json!(e));
            }
            parse_method(&m, "method", &mut errors)
        }
    };

    let Some(scenario) = scenario else {
        return Err(errors);
    };
    if !scenario.uses_method && obj.get("method").is_some_and(|m| !m.is_null()) {
        errors.push(format!("method: not used by scenario {}", scenario.name));
    }
    if let Some(op) = &operator {
        if !scenario.operators.contains(&op.as_str()) {
            errors.push(if scenario.operators.is_empty() {
                format!("operator: not used by scenario {}", scenario.name)
            } else {
                format!("operator: scenario {} accepts {}", scenario.name, scenario.operators.join(", "))
            });
        }
    }
    let epsilon = epsilon.unwrap_or(scenario.default_epsilon);
    let operator = operator.or_else(|| scenario.default_operator.map(str::to_string));
    let grid_m = grid_m.map(|m| m as usize).unwrap_or(match operator.as_deref() {
        Some("fejer") => DEFAULT_PERIODIC_M,
        _ => DEFAULT_UNIT_M,
    });
    let cfg = ExperimentConfig {
        scenario: scenario.name.to_string(),
        method: method.unwrap_or_else(|| (scenario.default_method)(epsilon)),
        operator,
        n: n.map(|n| n as usize).unwrap_or(scenario.default_n),
        tau: tau.unwrap_or(scenario.default_tau),
        epsilon,
        grid_m,
        seed: seed.unwrap_or(0),
        offset: offset.map(|o| o as usize).unwrap_or(0),
        output_dir,
    };
    (scenario.check)(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Writes `contents` to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Result of [`run`].
#[derive(Debug)]
pub struct RunResult {
    pub outcome: ScenarioOutcome,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunResult {
    /// 0 when the scenario's expectation holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.outcome.matched {
            0
        } else {
            2
        }
    }
}

pub fn summary_text(cfg: &ExperimentConfig, outcome: &ScenarioOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario     {}", cfg.scenario);
    let _ = writeln!(s, "method       {}", cfg.method.to_json());
    if let Some(op) = &cfg.operator {
        let _ = writeln!(s, "operator     {op}");
    }
    let _ = writeln!(
        s,
        "N = {}, tau = {}, epsilon = {}, grid_m = {}, seed = {}, offset = {}",
        cfg.n, cfg.tau, cfg.epsilon, cfg.grid_m, cfg.seed, cfg.offset
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "expected     {}", outcome.expectation);
    let _ = writeln!(s, "result       {}", if outcome.matched { "MATCH" } else { "MISMATCH" });
    let _ = writeln!(s);
    for (label, verdict) in &outcome.verdicts {
        let _ = writeln!(s, "  {label:<40} {verdict}");
    }
    if !outcome.notes.is_empty() {
        let _ = writeln!(s);
        for note in &outcome.notes {
            let _ = writeln!(s, "{note}");
        }
    }
    s
}

/// Runs the scenario and writes its artifacts under `output_dir`.
pub fn run(cfg: &ExperimentConfig, output_dir: &Path) -> Result<RunResult> {
    let outcome = (cfg.scenario().run)(cfg)?;
    let mut files = Vec::new();
    let report = json!({
        "scenario": cfg.scenario,
        "config": cfg.to_json(),
        "expectation": outcome.expectation,
        "matched": outcome.matched,
        "verdicts": outcome.verdicts.iter().map(|(l, v)| json!({"label": l, "verdict": v})).collect::<Vec<_>>(),
        "details": outcome.details,
    });
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    let path = output_dir.join("report.json");
    write_atomic(&path, &bytes)?;
    files.push(path);
    for (name, contents) in &outcome.files {
        let path = output_dir.join(name);
        write_atomic(&path, contents)?;
        files.push(path);
    }
    let path = output_dir.join("summary.txt");
    write_atomic(&path, summary_text(cfg, &outcome).as_bytes())?;
    files.push(path);
    Ok(RunResult {
        outcome,
        output_dir: output_dir.to_path_buf(),
        files,
    })
}

/// Output directory: the override, else the config's, else `output/<scenario>`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, cli_override: Option<&Path>) -> PathBuf {
    cli_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("output").join(&cfg.scenario))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_scenario_and_bad_tau_are_both_reported() {
        let errs = validate(r#"{"tau": -1}"#).unwrap_err();
        assert!(errs.contains(&"scenario: required".to_string()));
        assert!(errs.contains(&"tau: must be positive".to_string()));
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = validate(r#"{"scenario": "bernstein-classical"}"#).unwrap();
        assert_eq!(cfg.n, 200);
        assert_eq!(cfg.tau, crate::summability::DEFAULT_TAU);
        assert_eq!(cfg.grid_m, DEFAULT_UNIT_M);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.operator.as_deref(), Some("bernstein"));
        let fejer = validate(r#"{"scenario": "fejer-trig"}"#).unwrap();
        assert_eq!(fejer.grid_m, DEFAULT_PERIODIC_M);
    }

    #[test]
    fn errors_are_aggregated_with_paths() {
        let errs = validate(
            r#"{"scenario": "nope", "N": 3, "grid_m": "x", "method": {"kind": "strong_wp"}, "extra": 1}"#,
        )
        .unwrap_err();
        for e in [
            "scenario: unknown scenario `nope`",
            "N: must be at least 8",
            "grid_m: must be a nonnegative integer",
            "method.p: required for kind strong_wp",
            "extra: unknown field",
        ] {
            assert!(errs.contains(&e.to_string()), "{e} not in {errs:?}");
        }
        assert_eq!(validate("{").unwrap_err().len(), 1);
    }

    #[test]
    fn top_level_epsilon_fills_the_method() {
        let cfg = validate(r#"{"scenario": "bernstein-classical", "epsilon": 0.25, "method": {"kind": "statistical"}}"#).unwrap();
        assert_eq!(cfg.method.epsilon(), Some(0.25));
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"x").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x");
        assert!(!dir.path().join("a/b.txt.tmp").exists());
    }
}
