//! The detection-imputation (DI) estimator of location and covariance.
//!
//! Columns are robustly standardized, an initial model is computed, and
//! then a D-step (flag cells in every row, subject to a per-column cap)
//! and an I-step (EM-style re-estimation treating flagged cells as
//! missing) alternate until the model stops moving.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cellhandler::{trace_row, RowDetection, RowTrace};
use crate::error::{Error, Result};
use crate::model::CovModel;
use crate::numkit::{chi2_quantile, clip_eigenvalues, nearest_psd, pd_floor, sym_eigen, SymMatrix};
use crate::table::{median, DataTable};

/// Makes the MAD a consistent estimator of the standard deviation at the normal.
pub const MAD_CONSISTENCY: f64 = 1.4826;
const RIDGE_TARGET: f64 = 1e-6;

/// Robust per-column location (median) and scale (scaled MAD).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    pub locations: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(data: &DataTable) -> Result<Self> {
        let mut locations = Vec::with_capacity(data.n_cols());
        let mut scales = Vec::with_capacity(data.n_cols());
        let mut rejected = Vec::new();
        for j in 0..data.n_cols() {
            let col = data.observed_column(j);
            let Some(loc) = median(&col) else {
                rejected.push(format!("{}: no observed values", data.names()[j]));
                locations.push(0.0);
                scales.push(0.0);
                continue;
            };
            let dev: Vec<f64> = col.iter().map(|v| (v - loc).abs()).collect();
            let mad = median(&dev).unwrap_or(0.0) * MAD_CONSISTENCY;
            if !(mad > 0.0) {
                rejected.push(format!(
                    "{}: median absolute deviation is zero",
                    data.names()[j]
                ));
            }
            locations.push(loc);
            scales.push(mad);
        }
        if !rejected.is_empty() {
            return Err(Error::RejectedColumns(rejected));
        }
        Ok(Self { locations, scales })
    }

    pub fn apply(&self, data: &DataTable) -> DataTable {
        data.map_observed(|_, j, v| (v - self.locations[j]) / self.scales[j])
    }

    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        self.locations[j] + self.scales[j] * v
    }

    /// Maps a model of standardized data back to the original units.
    pub fn unstandardize(&self, model: &CovModel) -> Result<CovModel> {
        model.affine(&self.locations, &self.scales)
    }

    /// Maps a model in original units to the standardized frame.
    pub fn standardize_model(&self, model: &CovModel) -> Result<CovModel> {
        let loc: Vec<f64> = self
            .locations
            .iter()
            .zip(&self.scales)
            .map(|(l, s)| -l / s)
            .collect();
        let inv: Vec<f64> = self.scales.iter().map(|s| 1.0 / s).collect();
        model.affine(&loc, &inv)
    }
}

/// Robustly standardizes every column: `(x - median) / (1.4826 * MAD)`.
pub fn standardize(data: &DataTable) -> Result<(DataTable, ColumnScaler)> {
    let scaler = ColumnScaler::fit(data)?;
    Ok((scaler.apply(data), scaler))
}

fn nonpositive_cells(data: &DataTable) -> Vec<String> {
    let mut bad = Vec::new();
    for i in 0..data.n_rows() {
        for j in 0..data.n_cols() {
            if let Some(v) = data.get(i, j) {
                if !(v > 0.0) {
                    bad.push(format!("row {i}, column {} = {v}", data.names()[j]));
                }
            }
        }
    }
    bad
}

/// Elementwise natural log of a positive table.
pub fn log_transform(data: &DataTable) -> Result<DataTable> {
    let bad = nonpositive_cells(data);
    if !bad.is_empty() {
        return Err(Error::input(format!(
            "log needs positive values: {}",
            bad.join("; ")
        )));
    }
    Ok(data.map_observed(|_, _, v| v.ln()))
}

/// Centered log ratio: per row, log values minus their mean over the
/// observed cells of that row.
pub fn clr_transform(data: &DataTable) -> Result<DataTable> {
    let bad = nonpositive_cells(data);
    if !bad.is_empty() {
        return Err(Error::input(format!(
            "CLR needs positive values: {}",
            bad.join("; ")
        )));
    }
    let row_means: Vec<f64> = data
        .rows()
        .map(|row| {
            let logs: Vec<f64> = row.iter().filter(|v| !v.is_nan()).map(|v| v.ln()).collect();
            logs.iter().sum::<f64>() / logs.len().max(1) as f64
        })
        .collect();
    Ok(data.map_observed(|i, _, v| v.ln() - row_means[i]))
}

/// How to obtain the starting model of the DI iterations.
#[derive(Debug, Clone)]
pub enum InitialMethod {
    /// Pairwise Spearman correlations with the normal-consistency transform,
    /// projected to the nearest correlation matrix.
    Rank,
    /// Zero location and identity covariance.
    Diagonal,
    /// A caller-supplied model. In [`di_estimate`] it is given in the units
    /// of the input table, for all of its columns.
    External(CovModel),
}

/// Average ranks. Values within a few ulps of the start of a run count as
/// tied, so rescaling a column cannot split a tie through rounding.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let base = values[idx[start]];
        let slack = 8.0 * f64::EPSILON * base.abs();
        while end < n && values[idx[end]] - base <= slack {
            end += 1;
        }
        let avg = 0.5 * ((start + 1) as f64 + end as f64);
        for &k in &idx[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Pairwise-complete Spearman rank correlation matrix.
pub fn spearman_matrix(data: &DataTable) -> Result<SymMatrix> {
    let d = data.n_cols();
    let mut m = DMatrix::identity(d, d);
    for j in 0..d {
        for h in (j + 1)..d {
            let (a, b): (Vec<f64>, Vec<f64>) = (0..data.n_rows())
                .filter_map(|i| Some((data.get(i, j)?, data.get(i, h)?)))
                .unzip();
            if a.len() < 3 {
                return Err(Error::DataSparsity(format!(
                    "columns {} and {} share {} complete pairs, need at least 3",
                    data.names()[j],
                    data.names()[h],
                    a.len()
                )));
            }
            let r = pearson(&average_ranks(&a), &average_ranks(&b));
            m[(j, h)] = r;
            m[(h, j)] = r;
        }
    }
    SymMatrix::new(m)
}

/// Starting model for standardized data.
pub fn initial_estimate(data: &DataTable, method: &InitialMethod) -> Result<CovModel> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n <= d {
        return Err(Error::Shape(format!(
            "estimation requires more rows than columns, got n = {n}, d = {d}"
        )));
    }
    match method {
        InitialMethod::Diagonal => Ok(CovModel::standard(d)),
        InitialMethod::External(model) => {
            if model.dim() != d {
                return Err(Error::input(format!(
                    "external model has dimension {}, data has {d} columns",
                    model.dim()
                )));
            }
            Ok(model.clone())
        }
        InitialMethod::Rank => {
            let rho = spearman_matrix(data)?;
            let consistent = DMatrix::from_fn(d, d, |j, h| {
                if j == h {
                    1.0
                } else {
                    2.0 * (std::f64::consts::PI * rho.get(j, h) / 6.0).sin()
                }
            });
            let psd = nearest_psd(&SymMatrix::new(consistent)?, true)?;
            let lifted = ridge_lift(&psd)?;
            CovModel::new(vec![0.0; d], lifted)
        }
    }
}

/// Adds `lambda I` so the smallest eigenvalue reaches `1e-6`, then restores
/// the unit diagonal.
fn ridge_lift(c: &SymMatrix) -> Result<SymMatrix> {
    let lambda = (RIDGE_TARGET - c.min_eigenvalue()).max(0.0);
    if lambda == 0.0 {
        return Ok(c.clone());
    }
    let d = c.dim();
    let m = DMatrix::from_fn(d, d, |j, h| {
        let v = c.get(j, h) + if j == h { lambda } else { 0.0 };
        v / (1.0 + lambda)
    });
    SymMatrix::new(m)
}

/// Configuration of [`di_estimate`].
#[derive(Debug, Clone)]
pub struct DiConfig {
    /// Probability level of the chi-squared(1) cutoff.
    pub quantile: f64,
    /// Cap on flagged-plus-missing cells per column, as a fraction of rows.
    pub max_col_frac: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub initial: InitialMethod,
}

impl Default for DiConfig {
    fn default() -> Self {
        Self {
            quantile: 0.99,
            max_col_frac: 0.25,
            max_iter: 25,
            tol: 1e-6,
            initial: InitialMethod::Rank,
        }
    }
}

impl DiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::input(format!(
                "quantile {} must lie in (0, 1)",
                self.quantile
            )));
        }
        if !(self.max_col_frac > 0.0 && self.max_col_frac < 1.0) {
            return Err(Error::input(format!(
                "max_col_frac {} must lie in (0, 1)",
                self.max_col_frac
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::input("max_iter must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::input("tol must be positive"));
        }
        Ok(())
    }

    pub fn cutoff(&self) -> Result<f64> {
        chi2_quantile(1, self.quantile)
    }
}

/// Per-row detections of one D-step.
#[derive(Debug, Clone)]
pub struct FlagSet {
    pub rows: Vec<RowDetection>,
}

impl FlagSet {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Flagged-plus-missing count per column.
    pub fn column_counts(&self, d: usize) -> Vec<usize> {
        let mut counts = vec![0; d];
        for row in &self.rows {
            for &j in &row.flagged {
                counts[j] += 1;
            }
        }
        counts
    }

    /// Total number of flagged observed cells.
    pub fn flagged_count(&self) -> usize {
        self.rows.iter().map(|r| r.flagged_observed().count()).sum()
    }

    /// Row-major mask of flagged observed cells.
    pub fn mask(&self, d: usize) -> Vec<bool> {
        let mut mask = vec![false; self.rows.len() * d];
        for (i, row) in self.rows.iter().enumerate() {
            for j in row.flagged_observed() {
                mask[i * d + j] = true;
            }
        }
        mask
    }
}

/// Traces every row against `model` (rows in parallel).
pub fn trace_rows(data: &DataTable, model: &CovModel) -> Result<Vec<RowTrace>> {
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| trace_row(data.row(i), model))
        .collect()
}

/// Flags cells across all rows with at most `max_col` flagged-or-missing
/// cells per column.
///
/// All observed cells are visited in order of decreasing criterion value
/// (ties: lower row, then earlier path position). A value at or below `q`
/// locks its row; a value above `q` is flagged unless its column is full,
/// in which case the row is locked instead.
pub fn d_step(data: &DataTable, model: &CovModel, q: f64, max_col: usize) -> Result<FlagSet> {
    let traces = trace_rows(data, model)?;
    Ok(capped_detection(&traces, data.n_cols(), q, max_col))
}

pub(crate) fn capped_detection(traces: &[RowTrace], d: usize, q: f64, max_col: usize) -> FlagSet {
    let mut col_count = vec![0usize; d];
    let mut prefix: Vec<usize> = Vec::with_capacity(traces.len());
    let mut cells = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        for (j, _) in t.missing.iter().enumerate().filter(|(_, m)| **m) {
            col_count[j] += 1;
        }
        prefix.push(t.path.forced_count);
        for (pos, &j) in t.path.order.iter().enumerate().skip(t.path.forced_count) {
            cells.push((t.criteria[j], i, pos, j));
        }
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut locked = vec![false; traces.len()];
    for (c, i, pos, j) in cells {
        if locked[i] {
            continue;
        }
        if c <= q || col_count[j] >= max_col {
            locked[i] = true;
            continue;
        }
        debug_assert_eq!(pos, prefix[i], "flags must form a path prefix");
        col_count[j] += 1;
        prefix[i] += 1;
    }
    FlagSet {
        rows: traces
            .iter()
            .zip(&prefix)
            .map(|(t, &k)| t.detection(k))
            .collect(),
    }
}

/// Output of an I-step.
#[derive(Debug, Clone)]
pub struct IStepOutput {
    pub model: CovModel,
    /// Whether eigenvalues had to be clipped to keep the covariance PD.
    pub pd_guarded: bool,
}

/// One EM-style update: means and ML covariance of the imputed table plus
/// the conditional covariance of each row's imputed block under `prev`.
pub fn i_step(data: &DataTable, flags: &FlagSet, prev: &CovModel) -> Result<IStepOutput> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if flags.n_rows() != n || prev.dim() != d {
        return Err(Error::input(
            "i_step: flag set or model does not match the data",
        ));
    }
    let nf = n as f64;
    let mut mu = vec![0.0; d];
    for row in &flags.rows {
        for (m, v) in mu.iter_mut().zip(&row.cleaned) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= nf);

    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for row in &flags.rows {
        let c = DVector::from_iterator(d, row.cleaned.iter().zip(&mu).map(|(v, m)| v - m));
        scatter.ger(1.0, &c, &c, 1.0);
    }
    let sigma_prev = prev.sigma().as_matrix();
    for row in flags.rows.iter().filter(|r| !r.flagged.is_empty()) {
        let imputed = &row.flagged;
        let kept: Vec<usize> = (0..d).filter(|j| !imputed.contains(j)).collect();
        let s_ii = sigma_prev.select_rows(imputed).select_columns(imputed);
        let cond = if kept.is_empty() {
            s_ii
        } else {
            let s_uu = sigma_prev.select_rows(&kept).select_columns(&kept);
            let s_ui = sigma_prev.select_rows(&kept).select_columns(imputed);
            let chol = s_uu.cholesky().ok_or_else(|| {
                Error::Degenerate("conditioning block of the previous covariance is not PD".into())
            })?;
            let solved = chol.solve(&s_ui);
            s_ii - s_ui.transpose() * solved
        };
        for (a, &ja) in imputed.iter().enumerate() {
            for (b, &jb) in imputed.iter().enumerate() {
                scatter[(ja, jb)] += cond[(a, b)];
            }
        }
    }
    scatter /= nf;
    if scatter.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(
            "covariance update has non-finite entries".into(),
        ));
    }
    let sigma = SymMatrix::symmetrized(scatter);
    let eig = sym_eigen(&sigma)?;
    let floor = pd_floor(eig.values[0]);
    if !(eig.values[0] > 0.0) {
        return Err(Error::Degenerate(format!(
            "covariance update has largest eigenvalue {}",
            eig.values[0]
        )));
    }
    let mut pd_guarded = false;
    let sigma = if eig.values[d - 1] <= floor {
        log::warn!(
            "I-step covariance has eigenvalue {:e} at or below {:e}; clipping",
            eig.values[d - 1],
            floor
        );
        pd_guarded = true;
        clip_eigenvalues(sigma.as_matrix(), 2.0 * floor)
    } else {
        sigma
    };
    Ok(IStepOutput {
        model: CovModel::new(mu, sigma)?,
        pd_guarded,
    })
}

/// A column excluded from estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SetAside {
    pub column: usize,
    pub name: String,
    pub reason: String,
}

/// A flagged or missing cell in the units of the input table.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedCell {
    pub row: usize,
    /// Index into the estimated (kept) columns.
    pub col: usize,
    pub observed: Option<f64>,
    pub imputed: f64,
    pub residual: f64,
    pub criterion: f64,
}

/// Result of [`di_estimate`].
#[derive(Debug, Clone)]
pub struct DiResult {
    /// Final model in the units of the input table (kept columns only).
    pub model: CovModel,
    /// The starting model in the units of the input table.
    pub initial_model: CovModel,
    /// Final model in the standardized frame.
    pub standardized_model: CovModel,
    pub scaler: ColumnScaler,
    /// Indices of the input columns that were estimated.
    pub columns: Vec<usize>,
    pub set_aside: Vec<SetAside>,
    /// Final D-step detections (standardized units).
    pub flags: FlagSet,
    pub iterations: usize,
    pub converged: bool,
    /// `||mu_t - mu_{t-1}||^2 + ||Sigma_t - Sigma_{t-1}||_F^2` per iteration.
    pub criterion_history: Vec<f64>,
    pub pd_guard_count: usize,
}

impl DiResult {
    /// Flagged and missing cells in input units, row-major. `data` is the
    /// table that was passed to [`di_estimate`].
    pub fn flagged_cells(&self, data: &DataTable) -> Vec<FlaggedCell> {
        detections_to_cells(
            &self.flags.rows,
            &data.select_columns(&self.columns),
            &self.scaler,
        )
    }
}

/// Converts standardized detections to cells in the units of `raw`, whose
/// columns line up with the scaler.
pub fn detections_to_cells(
    rows: &[RowDetection],
    raw: &DataTable,
    scaler: &ColumnScaler,
) -> Vec<FlaggedCell> {
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut cols = row.flagged.clone();
        cols.sort_unstable();
        for j in cols {
            out.push(FlaggedCell {
                row: i,
                col: j,
                observed: raw.get(i, j),
                imputed: scaler.unscale(j, row.cleaned[j]),
                residual: row.residuals[j],
                criterion: row.criteria[j],
            });
        }
    }
    out
}

/// Runs the detection-imputation estimator.
pub fn di_estimate(data: &DataTable, config: &DiConfig) -> Result<DiResult> {
    config.validate()?;
    let n = data.n_rows();
    let max_col = (n as f64 * config.max_col_frac).floor() as usize;

    let mut set_aside = Vec::new();
    let mut columns = Vec::new();
    for j in 0..data.n_cols() {
        let missing = data.missing_count(j);
        if missing > max_col {
            let reason = format!("{missing} missing cells exceed the column cap of {max_col}");
            log::warn!("setting column {} aside: {reason}", data.names()[j]);
            set_aside.push(SetAside {
                column: j,
                name: data.names()[j].clone(),
                reason,
            });
        } else {
            columns.push(j);
        }
    }
    if columns.is_empty() {
        return Err(Error::Shape(
            "no columns left after setting aside sparse columns".into(),
        ));
    }
    let kept = data.select_columns(&columns);
    let d = kept.n_cols();
    if n <= d {
        return Err(Error::Shape(format!(
            "estimation requires more rows than columns, got n = {n}, d = {d}"
        )));
    }

    let (z, scaler) = standardize(&kept)?;
    let q = config.cutoff()?;
    let initial = match &config.initial {
        InitialMethod::External(model) => {
            let sub = if model.dim() == data.n_cols() && d != data.n_cols() {
                CovModel::new(
                    columns.iter().map(|&j| model.mu()[j]).collect(),
                    model.sigma().submatrix(&columns),
                )?
            } else {
                model.clone()
            };
            if sub.dim() != d {
                return Err(Error::input(format!(
                    "external model has dimension {}, data has {d} usable columns",
                    sub.dim()
                )));
            }
            scaler.standardize_model(&sub)?
        }
        method => initial_estimate(&z, method)?,
    };

    let mut model = initial.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut pd_guard_count = 0;
    let mut iterations = 0;
    for t in 1..=config.max_iter {
        let flags = d_step(&z, &model, q, max_col)?;
        let update = i_step(&z, &flags, &model)?;
        pd_guard_count += usize::from(update.pd_guarded);
        let dmu: f64 = update
            .model
            .mu()
            .iter()
            .zip(model.mu())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let dsigma = update
            .model
            .sigma()
            .frobenius_distance(model.sigma())
            .powi(2);
        let crit = dmu + dsigma;
        history.push(crit);
        model = update.model;
        iterations = t;
        log::debug!("DI iteration {t}: change {crit:e}");
        if crit < config.tol {
            converged = true;
            break;
        }
    }
    let flags = d_step(&z, &model, q, max_col)?;

    Ok(DiResult {
        model: scaler.unstandardize(&model)?,
        initial_model: scaler.unstandardize(&initial)?,
        standardized_model: model,
        scaler,
        columns,
        set_aside,
        flags,
        iterations,
        converged,
        criterion_history: history,
        pd_guard_count,
    })
}
