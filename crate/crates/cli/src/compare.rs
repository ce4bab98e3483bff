//! `zermelo compare`: tabulate reports of one scenario and check that the
//! solvers agree on the minimum time.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

/// Agreement tolerance between two trajectory solvers.
pub const EXACT_TOL: f64 = 1e-6;
/// Agreement tolerance when one side is the value-iteration oracle, used when
/// the other time is not already inside the oracle's bracket.
pub const BRUTE_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("compare needs at least two reports")]
    TooFew,
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: scenario hash {found} differs from {expected} in {first}")]
    HashMismatch { path: PathBuf, found: String, expected: String, first: PathBuf },
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub path: PathBuf,
    pub scenario: String,
    pub hash: String,
    pub solver: String,
    pub t_f: f64,
    pub bracket: Option<(f64, f64)>,
    pub residuals: [Option<f64>; 4],
    pub normality: Option<String>,
}

impl ReportRow {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_owned(), source })?;
        let bad = |message: &str| ReportError::Invalid { path: path.to_owned(), message: message.to_owned() };
        let v: Value = serde_json::from_str(&text).map_err(|e| bad(&format!("not valid JSON: {e}")))?;
        let text_field = |key: &str| {
            v.get(key).and_then(Value::as_str).map(str::to_owned).ok_or_else(|| bad(&format!("missing string {key:?}")))
        };
        let t_f = v.get("t_f").and_then(Value::as_f64).ok_or_else(|| bad("missing number \"t_f\""))?;
        let bracket = match v.get("bracket") {
            None | Some(Value::Null) => None,
            Some(b) => match (b.get("lower").and_then(Value::as_f64), b.get("upper").and_then(Value::as_f64)) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                _ => return Err(bad("bracket needs numeric lower and upper")),
            },
        };
        let diag = v.get("diagnostics").filter(|d| d.is_object());
        let residual = |key: &str| diag.and_then(|d| d.get(key)).and_then(Value::as_f64);
        Ok(Self {
            path: path.to_owned(),
            scenario: text_field("scenario")?,
            hash: text_field("scenario_hash")?,
            solver: text_field("solver_id")?,
            t_f,
            bracket,
            residuals: [
                residual("max_hamiltonian_residual"),
                residual("max_orthogonality_residual"),
                residual("max_boundary_residual"),
                residual("max_zne_residual"),
            ],
            normality: diag.and_then(|d| d.get("normality")).and_then(Value::as_str).map(str::to_owned),
        })
    }
}

/// Whether two reports agree on `t_f` under the composed tolerance.
pub fn agree(a: &ReportRow, b: &ReportRow) -> bool {
    let inside = |t: f64, br: Option<(f64, f64)>| br.is_some_and(|(lo, hi)| lo <= t && t <= hi);
    match (a.bracket, b.bracket) {
        (None, None) => (a.t_f - b.t_f).abs() <= EXACT_TOL,
        (Some((alo, ahi)), Some((blo, bhi))) => alo <= bhi && blo <= ahi,
        (Some(_), None) => inside(b.t_f, a.bracket) || (a.t_f - b.t_f).abs() <= BRUTE_TOL,
        (None, Some(_)) => inside(a.t_f, b.bracket) || (a.t_f - b.t_f).abs() <= BRUTE_TOL,
    }
}

pub struct Comparison {
    pub rows: Vec<ReportRow>,
    pub disagreements: Vec<(usize, usize)>,
}

pub fn compare(paths: &[PathBuf]) -> Result<Comparison, ReportError> {
    if paths.len() < 2 {
        return Err(ReportError::TooFew);
    }
    let rows = paths.iter().map(|p| ReportRow::load(p)).collect::<Result<Vec<_>, _>>()?;
    for r in &rows[1..] {
        if r.hash != rows[0].hash {
            return Err(ReportError::HashMismatch {
                path: r.path.clone(),
                found: r.hash.clone(),
                expected: rows[0].hash.clone(),
                first: rows[0].path.clone(),
            });
        }
    }
    let mut disagreements = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if !agree(&rows[i], &rows[j]) {
                disagreements.push((i, j));
            }
        }
    }
    Ok(Comparison { rows, disagreements })
}

fn sci(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.2e}"))
}

impl Comparison {
    pub fn table(&self) -> String {
        let header = ["solver", "t_f", "bracket", "H", "<p,u'>", "boundary", "ZNE", "normality"];
        let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            lines.push(vec![
                r.solver.clone(),
                format!("{:.9}", r.t_f),
                r.bracket.map_or_else(|| "-".to_owned(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]")),
                sci(r.residuals[0]),
                sci(r.residuals[1]),
                sci(r.residuals[2]),
                sci(r.residuals[3]),
                r.normality.clone().unwrap_or_else(|| "-".to_owned()),
            ]);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = format!("scenario {} ({})\n", self.rows[0].scenario, &self.rows[0].hash[..12.min(self.rows[0].hash.len())]);
        for l in &lines {
            let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        for &(i, j) in &self.disagreements {
            let (a, b) = (&self.rows[i], &self.rows[j]);
            out.push_str(&format!(
                "disagreement: {} {:.9} vs {} {:.9} (|Δ| = {:.3e})\n",
                a.solver,
                a.t_f,
                b.solver,
                b.t_f,
                (a.t_f - b.t_f).abs()
            ));
        }
        out
    }
}
