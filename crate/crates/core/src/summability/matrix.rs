//! Nonnegative summability matrices given row by row, and the three
//! regularity conditions.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Truncated rows whose sum misses the declared row total by more than this are rejected.
pub const ROW_TOTAL_TOL: f64 = 1e-8;

pub type Row = Vec<(usize, f64)>;

type RowFn = Arc<dyn Fn(usize) -> Option<Row> + Send + Sync>;
type SupportFn = Arc<dyn Fn(usize) -> usize + Send + Sync>;
pub type TotalFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Rows {
    Cesaro,
    Identity,
    Explicit {
        rows: Arc<Vec<Row>>,
        totals: Option<Arc<Vec<f64>>>,
    },
    Generator {
        row: RowFn,
        support: SupportFn,
        total: Option<TotalFn>,
    },
}

/// Matrix `A = (alpha_nj)` with nonnegative entries, `n, j >= 1`.
///
/// Row `n` only has entries with `j <= J(n)`, the declared support bound.
#[derive(Clone)]
pub struct MatrixSpec {
    name: String,
    scale: f64,
    rows: Rows,
}

impl fmt::Debug for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixSpec")
            .field("name", &self.name)
            .field("scale", &self.scale)
            .finish()
    }
}

impl MatrixSpec {
    /// `alpha_nj = 1/n` for `j <= n`.
    pub fn cesaro() -> Self {
        MatrixSpec {
            name: "cesaro".into(),
            scale: 1.0,
            rows: Rows::Cesaro,
        }
    }

    pub fn identity() -> Self {
        MatrixSpec {
            name: "identity".into(),
            scale: 1.0,
            rows: Rows::Identity,
        }
    }

    /// Rows given explicitly; row `n` is `rows[n - 1]`, later rows are undefined.
    pub fn explicit(rows: Vec<Row>, totals: Option<Vec<f64>>) -> Result<Self> {
        if let Some(t) = &totals {
            if t.len() != rows.len() {
                return Err(Error::param(format!(
                    "{} row totals given for {} rows",
                    t.len(),
                    rows.len()
                )));
            }
        }
        Ok(MatrixSpec {
            name: "custom".into(),
            scale: 1.0,
            rows: Rows::Explicit {
                rows: Arc::new(rows),
                totals: totals.map(Arc::new),
            },
        })
    }

    pub fn from_generator(
        name: impl Into<String>,
        row: impl Fn(usize) -> Option<Row> + Send + Sync + 'static,
        support: impl Fn(usize) -> usize + Send + Sync + 'static,
        total: Option<TotalFn>,
    ) -> Self {
        MatrixSpec {
            name: name.into(),
            scale: 1.0,
            rows: Rows::Generator {
                row: Arc::new(row),
                support: Arc::new(support),
                total,
            },
        }
    }

    /// Multiplies every entry by `c >= 0`.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::param(format!("matrix scale must be finite and nonnegative, got {c}")));
        }
        self.scale *= c;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn explicit_rows(&self) -> Option<(&[Row], Option<&[f64]>)> {
        match &self.rows {
            Rows::Explicit { rows, totals } => Some((rows.as_slice(), totals.as_ref().map(|t| t.as_slice()))),
            _ => None,
        }
    }

    /// Declared support bound `J(n)`.
    pub fn support_bound(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::UndefinedRow(0));
        }
        match &self.rows {
            Rows::Cesaro | Rows::Identity => Ok(n),
            Rows::Explicit { rows, .. } => rows
                .get(n - 1)
                .map(|r| r.iter().map(|e| e.0).max().unwrap_or(0))
                .ok_or(Error::UndefinedRow(n)),
            Rows::Generator { support, .. } => Ok(support(n)),
        }
    }

    /// Declared total of row `n`, when the matrix states one.
    pub fn declared_total(&self, n: usize) -> Option<f64> {
        let base = match &self.rows {
            Rows::Cesaro | Rows::Identity => Some(1.0),
            Rows::Explicit { totals, .. } => totals.as_ref().and_then(|t| t.get(n.checked_sub(1)?).copied()),
            Rows::Generator { total, .. } => total.as_ref().map(|t| t(n)),
        };
        base.map(|t| t * self.scale)
    }

    /// Row `n` as `(j, alpha_nj)` pairs, validated.
    pub fn row(&self, n: usize) -> Result<Row> {
        if n == 0 {
            return Err(Error::UndefinedRow(0));
        }
        let s = self.scale;
        let row: Row = match &self.rows {
            Rows::Cesaro => {
                let a = s / n as f64;
                (1..=n).map(|j| (j, a)).collect()
            }
            Rows::Identity => vec![(n, s)],
            Rows::Explicit { rows, .. } => rows
                .get(n - 1)
                .ok_or(Error::UndefinedRow(n))?
                .iter()
                .map(|&(j, a)| (j, a * s))
                .collect(),
            Rows::Generator { row, .. } => row(n)
                .ok_or(Error::UndefinedRow(n))?
                .into_iter()
                .map(|(j, a)| (j, a * s))
                .collect(),
        };
        let bound = self.support_bound(n)?;
        for &(j, a) in &row {
            if j == 0 || j > bound {
                return Err(Error::InvalidRow {
                    row: n,
                    reason: format!("column {j} outside the declared support 1..={bound}"),
                });
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidRow {
                    row: n,
                    reason: format!("entry ({n}, {j}) = {a} is not a finite nonnegative number"),
                });
            }
        }
        if let Some(total) = self.declared_total(n) {
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if (sum - total).abs() > ROW_TOTAL_TOL {
                return Err(Error::InvalidRow {
                    row: n,
                    reason: format!("truncated row sums to {sum}, declared total is {total}"),
                });
            }
        }
        Ok(row)
    }

    pub fn row_sum(&self, n: usize) -> Result<f64> {
        Ok(self.row(n)?.iter().map(|e| e.1).sum())
    }

    pub fn entry(&self, n: usize, j: usize) -> Result<f64> {
        Ok(self
            .row(n)?
            .iter()
            .filter(|e| e.0 == j)
            .map(|e| e.1)
            .sum())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegularityThresholds {
    /// Condition (i) passes when every row sum up to `N` is at most this.
    pub row_sum_cap: f64,
    /// Condition (ii) passes when `alpha_Nj <= column_tol` for `j <= 20`.
    pub column_tol: f64,
    /// Condition (iii) passes when `|row_sum(N) - 1| <= row_sum_tol`.
    pub row_sum_tol: f64,
}

impl Default for RegularityThresholds {
    fn default() -> Self {
        RegularityThresholds {
            row_sum_cap: 1e6,
            column_tol: 1e-2,
            row_sum_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub condition: &'static str,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub matrix: String,
    pub n: usize,
    pub bounded_row_sums: ConditionResult,
    pub vanishing_columns: ConditionResult,
    pub row_sums_to_one: ConditionResult,
}

impl RegularityReport {
    pub fn conditions(&self) -> [&ConditionResult; 3] {
        [&self.bounded_row_sums, &self.vanishing_columns, &self.row_sums_to_one]
    }

    pub fn passed(&self) -> bool {
        self.conditions().iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.conditions()
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.condition)
            .collect()
    }
}

/// Number of leading columns inspected by condition (ii).
pub const REGULARITY_COLUMNS: usize = 20;

/// Finite-horizon check of the three regularity conditions on rows `1..=n`.
pub fn check_regularity(a: &MatrixSpec, n: usize, thresholds: &RegularityThresholds) -> Result<RegularityReport> {
    if n < 2 {
        return Err(Error::param("regularity check needs N >= 2"));
    }
    let mut max_sum = 0.0f64;
    let mut argmax = 1;
    for k in 1..=n {
        let s = a.row_sum(k)?;
        if s > max_sum {
            max_sum = s;
            argmax = k;
        }
    }
    let bounded = ConditionResult {
        condition: "(i) sup_n sum_j alpha_nj < inf",
        passed: max_sum <= thresholds.row_sum_cap,
        value: max_sum,
        detail: format!("max row sum {max_sum:.6} at n = {argmax}, cap {}", thresholds.row_sum_cap),
    };

    let last = a.row(n)?;
    let half = a.row((n / 2).max(1))?;
    let entry = |row: &Row, j: usize| row.iter().filter(|e| e.0 == j).map(|e| e.1).sum::<f64>();
    let mut worst = 0.0f64;
    let mut not_decaying = None;
    for j in 1..=REGULARITY_COLUMNS {
        let (now, before) = (entry(&last, j), entry(&half, j));
        worst = worst.max(now);
        if now > before + 1e-15 && not_decaying.is_none() {
            not_decaying = Some(j);
        }
    }
    let columns = ConditionResult {
        condition: "(ii) lim_n alpha_nj = 0",
        passed: worst <= thresholds.column_tol && not_decaying.is_none(),
        value: worst,
        detail: match not_decaying {
            Some(j) => format!("alpha_(N,{j}) grew between n = N/2 and n = N"),
            None => format!(
                "max_(j<={REGULARITY_COLUMNS}) alpha_(N,j) = {worst:.3e}, tolerance {}",
                thresholds.column_tol
            ),
        },
    };

    let s = a.row_sum(n)?;
    let to_one = ConditionResult {
        condition: "(iii) lim_n sum_j alpha_nj = 1",
        passed: (s - 1.0).abs() <= thresholds.row_sum_tol,
        value: s,
        detail: format!("row sum at N = {n} is {s:.3}, |sum - 1| = {:.3e}", (s - 1.0).abs()),
    };

    Ok(RegularityReport {
        matrix: if a.scale() == 1.0 {
            a.name().to_string()
        } else {
            format!("{} x {}", a.scale(), a.name())
        },
        n,
        bounded_row_sums: bounded,
        vanishing_columns: columns,
        row_sums_to_one: to_one,
    })
}
