//! CSV ingestion, flagged-cell reports and persisted models.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{ColumnScaler, FlaggedCell};
use crate::model::CovModel;
use crate::numkit::SymMatrix;
use crate::table::DataTable;

/// Tokens read as missing values (after trimming).
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

/// A CSV file split into its numeric part and the columns that were dropped.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub table: DataTable,
    /// Position in the file of every column of `table`.
    pub source_columns: Vec<usize>,
    /// `(name, reason)` of columns that could not be used.
    pub unusable: Vec<(String, String)>,
}

fn parse_cell(token: &str) -> std::result::Result<f64, ()> {
    let t = token.trim();
    if MISSING_TOKENS.contains(&t) {
        return Ok(f64::NAN);
    }
    // Rust float parsing is locale independent; it also accepts "inf" and
    // "NaN", which are not valid data here.
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(()),
    }
}

/// Reads a comma-separated table with a header row. Non-numeric and
/// all-missing columns are dropped and reported.
pub fn read_csv<R: Read>(reader: R) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::input("CSV header is empty"));
    }
    let d = headers.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut bad: Vec<Option<String>> = vec![None; d];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, token) in record.iter().enumerate() {
            match parse_cell(token) {
                Ok(v) => columns[j].push(v),
                Err(()) => {
                    columns[j].push(f64::NAN);
                    if bad[j].is_none() {
                        bad[j] = Some(format!(
                            "non-numeric value {:?} in data row {r}",
                            token.trim()
                        ));
                    }
                }
            }
        }
    }
    let n = columns[0].len();
    let mut keep = Vec::new();
    let mut unusable = Vec::new();
    for j in 0..d {
        if let Some(reason) = bad[j].take() {
            unusable.push((headers[j].clone(), reason));
        } else if n > 0 && columns[j].iter().all(|v| v.is_nan()) {
            unusable.push((headers[j].clone(), "no observed values".to_string()));
        } else {
            keep.push(j);
        }
    }
    let names = keep.iter().map(|&j| headers[j].clone()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| keep.iter().map(|&j| columns[j][i]).collect())
        .collect();
    Ok(CsvTable {
        table: DataTable::from_rows(names, &rows)?,
        source_columns: keep,
        unusable,
    })
}

pub fn read_csv_path(path: &Path) -> Result<CsvTable> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes a table as CSV with `NA` for missing cells.
pub fn write_csv(table: &DataTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.names())?;
    for row in table.rows() {
        w.write_record(row.iter().map(|&v| format_value(v)))?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::input(e.to_string()))
}

/// Replaces `path` in one step: write a sibling temporary file, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Cell reports

/// One line of a flagged-cell report, in input units.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Data row, counting from 0 below the header.
    pub row: usize,
    /// Column position in the input file.
    pub col: usize,
    pub column: String,
    pub observed: Option<f64>,
    pub imputed: f64,
    pub residual: f64,
    pub criterion: f64,
}

impl ReportRow {
    pub fn missing(&self) -> bool {
        self.observed.is_none()
    }
}

pub const REPORT_HEADER: [&str; 8] = [
    "row",
    "col",
    "column",
    "observed",
    "imputed",
    "residual",
    "criterion",
    "missing",
];

/// Builds report rows from flagged cells whose `col` indexes `names` and
/// `source_columns`; sorted by `|residual|` descending, then row, then column.
pub fn report_rows(
    cells: &[FlaggedCell],
    names: &[String],
    source_columns: &[usize],
) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = cells
        .iter()
        .map(|c| ReportRow {
            row: c.row,
            col: source_columns[c.col],
            column: names[c.col].clone(),
            observed: c.observed,
            imputed: c.imputed,
            residual: c.residual,
            criterion: c.criterion,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.residual
            .abs()
            .total_cmp(&a.residual.abs())
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });
    rows
}

pub fn write_report(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.row.to_string(),
            r.col.to_string(),
            r.column.clone(),
            r.observed.map_or_else(|| "NA".to_string(), format_value),
            format_value(r.imputed),
            format_value(r.residual),
            format_value(r.criterion),
            r.missing().to_string(),
        ])?;
    }
    into_string(w)
}

pub fn read_report<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(Error::input(format!(
            "report header must be {}",
            REPORT_HEADER.join(",")
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::input(format!("bad {what} value {s:?} in report")))
    };
    let idx = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::input(format!("bad {what} index {s:?} in report")))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(ReportRow {
            row: idx(&rec[0], "row")?,
            col: idx(&rec[1], "column")?,
            column: rec[2].to_string(),
            observed: if &rec[3] == "NA" {
                None
            } else {
                Some(num(&rec[3], "observed")?)
            },
            imputed: num(&rec[4], "imputed")?,
            residual: num(&rec[5], "residual")?,
            criterion: num(&rec[6], "criterion")?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Model files

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerRecord {
    pub locations: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Location and row-major covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsRecord {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config: serde_json::Value,
    pub timestamp: String,
    pub version: String,
}

impl Provenance {
    pub fn now(command: &str, config: serde_json::Value) -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config,
            timestamp: format!("unix:{secs}"),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// A persisted model: the estimate in input units, the robust scaler and,
/// when available, the estimate in the standardized frame that detection
/// reuses for exact reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<ScalerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardized: Option<MomentsRecord>,
    pub provenance: Provenance,
}

fn check_moments(what: &str, d: usize, mu: &[f64], sigma: &[f64]) -> Result<()> {
    if mu.len() != d || sigma.len() != d * d {
        return Err(Error::input(format!(
            "{what}: expected {d} locations and {} covariance entries, found {} and {}",
            d * d,
            mu.len(),
            sigma.len()
        )));
    }
    if mu.iter().chain(sigma).any(|v| !v.is_finite()) {
        return Err(Error::input(format!("{what}: non-finite entries")));
    }
    SymMatrix::from_row_slice(d, sigma).map_err(|e| Error::input(format!("{what}: {e}")))?;
    Ok(())
}

impl ModelFile {
    pub fn new(
        columns: Vec<String>,
        model: &CovModel,
        scaler: Option<&ColumnScaler>,
        standardized: Option<&CovModel>,
        provenance: Provenance,
    ) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            columns,
            mu: model.mu().to_vec(),
            sigma: model.sigma().to_row_major(),
            scaler: scaler.map(|s| ScalerRecord {
                locations: s.locations.clone(),
                scales: s.scales.clone(),
            }),
            standardized: standardized.map(|m| MomentsRecord {
                mu: m.mu().to_vec(),
                sigma: m.sigma().to_row_major(),
            }),
            provenance,
        }
    }

    /// Structural checks: version, dimensions, finiteness and symmetry.
    /// Positive definiteness is checked when a model is built.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::input(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let d = self.columns.len();
        check_moments("model", d, &self.mu, &self.sigma)?;
        if let Some(s) = &self.standardized {
            check_moments("standardized model", d, &s.mu, &s.sigma)?;
        }
        if let Some(s) = &self.scaler {
            if s.locations.len() != d || s.scales.len() != d {
                return Err(Error::input("scaler length does not match the columns"));
            }
            if s.scales.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || s.locations.iter().any(|v| !v.is_finite())
            {
                return Err(Error::input(
                    "scaler entries must be finite with positive scales",
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn sigma_matrix(&self) -> Result<SymMatrix> {
        SymMatrix::from_row_slice(self.dim(), &self.sigma)
    }

    /// The model in input units; fails unless the covariance is PD.
    pub fn cov_model(&self) -> Result<CovModel> {
        CovModel::new(self.mu.clone(), self.sigma_matrix()?)
    }

    pub fn scaler(&self) -> Option<ColumnScaler> {
        self.scaler.as_ref().map(|s| ColumnScaler {
            locations: s.locations.clone(),
            scales: s.scales.clone(),
        })
    }

    /// The model in the standardized frame, if stored with a scaler.
    pub fn standardized_model(&self) -> Result<Option<(ColumnScaler, CovModel)>> {
        match (&self.standardized, self.scaler()) {
            (Some(s), Some(scaler)) => {
                let sigma = SymMatrix::from_row_slice(self.dim(), &s.sigma)?;
                Ok(Some((scaler, CovModel::new(s.mu.clone(), sigma)?)))
            }
            _ => Ok(None),
        }
    }
}
