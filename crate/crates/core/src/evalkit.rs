//! Scatter-matrix discrepancies, synthetic covariance models,
//! contamination generators and detection scores.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{check_pd, pd_inverse_sqrt, sym_eigen, SymMatrix};
use crate::table::DataTable;

// ---------------------------------------------------------------------------
// Discrepancy

/// Eigenvalues of `B^{-1/2} A B^{-1/2}`.
fn relative_eigenvalues(a: &SymMatrix, b: &SymMatrix) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let r = pd_inverse_sqrt(b)
        .map_err(|e| Error::input(format!("reference matrix is not positive definite: {e}")))?;
    let c = SymMatrix::symmetrized(r.as_matrix() * a.as_matrix() * r.as_matrix());
    Ok(sym_eigen(&c)?.values.iter().copied().collect())
}

/// `D(A, B) = sum_j (eta_j - 1 - ln eta_j)` over the eigenvalues of
/// `B^{-1/2} A B^{-1/2}`; `+inf` when `A` is singular.
pub fn discrepancy(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let eta = relative_eigenvalues(a, b)?;
    let top = eta[0].max(0.0);
    let zero_tol = eta.len() as f64 * f64::EPSILON * top;
    if eta.iter().any(|&e| e < -1e-8 * top.max(1.0)) {
        return Err(Error::input("first matrix is not positive semidefinite"));
    }
    if eta.iter().any(|&e| e <= zero_tol) {
        return Ok(f64::INFINITY);
    }
    Ok(eta.iter().map(|&e| e - 1.0 - e.ln()).sum())
}

/// Kullback-Leibler divergence of `N(0, A)` from `N(0, B)`:
/// `tr(A B^{-1}) - d - ln det(A B^{-1})`, via Cholesky factors.
pub fn kl_gaussian(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input("dimension mismatch"));
    }
    let d = a.dim();
    let ca = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::input("first matrix is not positive definite"))?;
    let cb = b
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::input("second matrix is not positive definite"))?;
    let ab_inv = cb.solve(a.as_matrix());
    let trace = ab_inv.trace();
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(trace - d as f64 - (logdet(&ca.l()) - logdet(&cb.l())))
}

/// Symmetrized discrepancy variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricKind {
    /// `eta + 1/eta - 2`
    PlusInverse,
    /// `|ln eta|`
    AbsLog,
}

pub fn discrepancy_symmetric(a: &SymMatrix, b: &SymMatrix, kind: SymmetricKind) -> Result<f64> {
    check_pd(a).map_err(|e| Error::input(format!("first matrix: {e}")))?;
    let eta = relative_eigenvalues(a, b)?;
    Ok(eta
        .iter()
        .map(|&e| match kind {
            SymmetricKind::PlusInverse => e + 1.0 / e - 2.0,
            SymmetricKind::AbsLog => e.ln().abs(),
        })
        .sum())
}

// ---------------------------------------------------------------------------
// Covariance models

/// `Sigma_jh = (-0.9)^|j-h|`.
pub fn gen_a09(d: usize) -> SymMatrix {
    SymMatrix::symmetrized(DMatrix::from_fn(d, d, |j, h| {
        (-0.9f64).powi((j as i32 - h as i32).abs())
    }))
}

/// Random substreams of a simulation seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Matrix = 0,
    Data = 1,
    Positions = 2,
}

/// Generator for one `(replication, stream)` pair. ChaCha8 keyed by the
/// seed, with stream id `4 * replication + stream`.
pub fn substream(seed: u64, replication: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 * replication + stream as u64);
    rng
}

/// Random correlation matrix by the onion construction with LKJ shape 1.
///
/// Stand-in for other published random-correlation schemes; it yields
/// mostly small to moderate correlations.
pub fn gen_randcorr(d: usize, seed: u64) -> Result<SymMatrix> {
    gen_randcorr_with(d, 1.0, &mut substream(seed, 0, Stream::Matrix))
}

/// Onion construction with LKJ shape `eta` (larger means closer to identity).
pub fn gen_randcorr_with(d: usize, eta: f64, rng: &mut impl Rng) -> Result<SymMatrix> {
    if d < 2 {
        return Err(Error::input("random correlation matrices need d >= 2"));
    }
    if !(eta > 0.0) {
        return Err(Error::input("LKJ shape must be positive"));
    }
    let mut beta = eta + (d as f64 - 2.0) / 2.0;
    let first = Beta::new(beta, beta).map_err(|e| Error::input(e.to_string()))?;
    let r12 = 2.0 * first.sample(rng) - 1.0;
    let mut c = DMatrix::from_row_slice(2, 2, &[1.0, r12, r12, 1.0]);
    for k in 2..d {
        beta -= 0.5;
        let y = Beta::new(k as f64 / 2.0, beta)
            .map_err(|e| Error::input(e.to_string()))?
            .sample(rng);
        let mut u = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        u.normalize_mut();
        let w = u * y.sqrt();
        let l = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("onion step lost positive definiteness".into()))?
            .l();
        let z = l * w;
        let mut next = DMatrix::identity(k + 1, k + 1);
        next.view_mut((0, 0), (k, k)).copy_from(&c);
        for i in 0..k {
            next[(i, k)] = z[i];
            next[(k, i)] = z[i];
        }
        c = next;
    }
    Ok(SymMatrix::symmetrized(c))
}

/// `n` draws from `N(0, sigma)` as a table.
pub fn gaussian_sample(n: usize, sigma: &SymMatrix, rng: &mut impl Rng) -> Result<DataTable> {
    let d = sigma.dim();
    let l = sigma
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::input("covariance is not positive definite"))?
        .l();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&l * e).iter().copied().collect()
        })
        .collect();
    DataTable::from_unnamed_rows(&rows)
}

// ---------------------------------------------------------------------------
// Contamination

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContaminationMode {
    /// `epsilon` of the cells in each column.
    Cellwise,
    /// `epsilon` of the rows, every cell of the row.
    Rowwise,
    /// Whole rows first, then cells sampled from the remaining rows.
    Mixed { cell_frac: f64, row_frac: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub gamma: f64,
    pub mode: ContaminationMode,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn validate(&self) -> Result<()> {
        let fractions = match self.mode {
            ContaminationMode::Mixed {
                cell_frac,
                row_frac,
            } => vec![cell_frac, row_frac],
            _ => vec![self.epsilon],
        };
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || fractions.iter().sum::<f64>() > 1.0
        {
            return Err(Error::input(format!(
                "invalid contamination fractions {fractions:?}"
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::input(format!(
                "gamma {} must be nonnegative",
                self.gamma
            )));
        }
        Ok(())
    }

    /// (cellwise fraction, rowwise fraction).
    pub fn fractions(&self) -> (f64, f64) {
        match self.mode {
            ContaminationMode::Cellwise => (self.epsilon, 0.0),
            ContaminationMode::Rowwise => (0.0, self.epsilon),
            ContaminationMode::Mixed {
                cell_frac,
                row_frac,
            } => (cell_frac, row_frac),
        }
    }
}

/// A contaminated table with its row-major truth mask.
#[derive(Debug, Clone)]
pub struct Contaminated {
    pub data: DataTable,
    pub truth: Vec<bool>,
    /// Rows replaced entirely.
    pub outlier_rows: Vec<usize>,
}

/// Unit eigenvector of the smallest eigenvalue scaled so its squared
/// Mahalanobis distance under `sigma_k` (centred at zero) is `target^2`.
fn structured_outlier(sigma_k: &SymMatrix, target: f64) -> Result<Vec<f64>> {
    let eig = sym_eigen(sigma_k)?;
    let k = sigma_k.dim();
    let u = eig.vectors.column(k - 1).into_owned();
    let chol = sigma_k
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::Singular {
            eigenvalue: eig.values[k - 1],
            floor: 0.0,
        })?;
    let md = u.dot(&chol.solve(&u)).sqrt();
    Ok(u.iter().map(|v| target * v / md).collect())
}

fn contaminate_cells(
    data: &mut DataTable,
    truth: &mut [bool],
    sigma: &SymMatrix,
    gamma: f64,
    per_column: usize,
    pool: &[usize],
    rng: &mut impl Rng,
) -> Result<()> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if per_column > pool.len() {
        return Err(Error::input(format!(
            "cannot draw {per_column} cells per column from {} eligible rows",
            pool.len()
        )));
    }
    let mut cells_by_row = vec![Vec::new(); n];
    for j in 0..d {
        for k in sample(rng, pool.len(), per_column) {
            cells_by_row[pool[k]].push(j);
        }
    }
    for (i, cols) in cells_by_row.iter_mut().enumerate() {
        if cols.is_empty() {
            continue;
        }
        cols.sort_unstable();
        let v = structured_outlier(&sigma.submatrix(cols), gamma * (cols.len() as f64).sqrt())?;
        for (&j, x) in cols.iter().zip(v) {
            data.set(i, j, x);
            truth[i * d + j] = true;
        }
    }
    Ok(())
}

/// Replaces `floor(n * epsilon)` randomly chosen cells per column. In each
/// affected row the chosen block `K` becomes
/// `gamma * sqrt(|K|) * u / MD(u, 0, Sigma_K)` with `u` the eigenvector of
/// the smallest eigenvalue of `Sigma_K`.
pub fn contaminate_cellwise(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
) -> Result<Contaminated> {
    contaminate_cellwise_with(
        data,
        sigma,
        spec,
        &mut substream(spec.seed, 0, Stream::Positions),
    )
}

/// As [`contaminate_cellwise`] with positions drawn from `rng`.
pub fn contaminate_cellwise_with(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
    rng: &mut impl Rng,
) -> Result<Contaminated> {
    spec.validate()?;
    check_sigma(data, sigma)?;
    let n = data.n_rows();
    let (cell_frac, _) = spec.fractions();
    let per_column = count_for(n, cell_frac)?;
    let mut out = data.clone();
    let mut truth = vec![false; n * data.n_cols()];
    let pool: Vec<usize> = (0..n).collect();
    contaminate_cells(
        &mut out, &mut truth, sigma, spec.gamma, per_column, &pool, rng,
    )?;
    Ok(Contaminated {
        data: out,
        truth,
        outlier_rows: Vec::new(),
    })
}

fn check_sigma(data: &DataTable, sigma: &SymMatrix) -> Result<()> {
    if sigma.dim() != data.n_cols() {
        return Err(Error::input(format!(
            "covariance is {}x{} but the table has {} columns",
            sigma.dim(),
            sigma.dim(),
            data.n_cols()
        )));
    }
    Ok(())
}

fn count_for(n: usize, frac: f64) -> Result<usize> {
    let count = (n as f64 * frac).floor() as usize;
    if frac > 0.0 && count == 0 {
        return Err(Error::input(format!(
            "fraction {frac} of {n} rows rounds down to zero"
        )));
    }
    Ok(count)
}

/// Replaces `floor(n * row_frac)` whole rows by
/// `gamma * d * sqrt(d) * u / MD(u, 0, Sigma)`. In mixed mode, cellwise
/// outliers are then placed among the remaining rows.
pub fn contaminate_rowwise(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
) -> Result<Contaminated> {
    contaminate_rowwise_with(
        data,
        sigma,
        spec,
        &mut substream(spec.seed, 0, Stream::Positions),
    )
}

/// As [`contaminate_rowwise`] with positions drawn from `rng`.
pub fn contaminate_rowwise_with(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
    rng: &mut impl Rng,
) -> Result<Contaminated> {
    spec.validate()?;
    check_sigma(data, sigma)?;
    let (n, d) = (data.n_rows(), data.n_cols());
    let (cell_frac, row_frac) = spec.fractions();
    let n_rows = count_for(n, row_frac)?;
    let mut outlier_rows: Vec<usize> = sample(rng, n, n_rows).into_vec();
    outlier_rows.sort_unstable();

    let mut out = data.clone();
    let mut truth = vec![false; n * d];
    let dd = d as f64;
    let v = structured_outlier(sigma, spec.gamma * dd * dd.sqrt())?;
    for &i in &outlier_rows {
        for (j, &x) in v.iter().enumerate() {
            out.set(i, j, x);
            truth[i * d + j] = true;
        }
    }
    if cell_frac > 0.0 {
        let per_column = count_for(n, cell_frac)?;
        let pool: Vec<usize> = (0..n)
            .filter(|i| outlier_rows.binary_search(i).is_err())
            .collect();
        contaminate_cells(
            &mut out, &mut truth, sigma, spec.gamma, per_column, &pool, rng,
        )?;
    }
    Ok(Contaminated {
        data: out,
        truth,
        outlier_rows,
    })
}

/// Dispatches on the contamination mode.
pub fn contaminate(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
) -> Result<Contaminated> {
    match spec.mode {
        ContaminationMode::Cellwise => contaminate_cellwise(data, sigma, spec),
        _ => contaminate_rowwise(data, sigma, spec),
    }
}

/// As [`contaminate`] with positions drawn from `rng`.
pub fn contaminate_with(
    data: &DataTable,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
    rng: &mut impl Rng,
) -> Result<Contaminated> {
    match spec.mode {
        ContaminationMode::Cellwise => contaminate_cellwise_with(data, sigma, spec, rng),
        _ => contaminate_rowwise_with(data, sigma, spec, rng),
    }
}

// ---------------------------------------------------------------------------
// Scores

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub recall: f64,
    pub precision: f64,
    pub f_score: f64,
    pub n_true: usize,
    pub n_flagged: usize,
    pub n_correct: usize,
    /// Explanations for metrics defaulted to zero.
    pub notes: Vec<String>,
}

/// Recall, precision and F-score of a flag mask against the truth mask.
pub fn score_flags(flagged: &[bool], truth: &[bool]) -> Result<ScoreReport> {
    if flagged.len() != truth.len() {
        return Err(Error::input(format!(
            "mask sizes differ: {} flagged vs {} truth",
            flagged.len(),
            truth.len()
        )));
    }
    let n_true = truth.iter().filter(|&&t| t).count();
    let n_flagged = flagged.iter().filter(|&&f| f).count();
    let n_correct = flagged
        .iter()
        .zip(truth)
        .filter(|(f, t)| **f && **t)
        .count();
    let mut notes = Vec::new();
    let recall = if n_true == 0 {
        notes.push("recall undefined: no true outlying cells".to_string());
        0.0
    } else {
        n_correct as f64 / n_true as f64
    };
    let precision = if n_flagged == 0 {
        notes.push("precision undefined: no flagged cells".to_string());
        0.0
    } else {
        n_correct as f64 / n_flagged as f64
    };
    let f_score = if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    };
    Ok(ScoreReport {
        recall,
        precision,
        f_score,
        n_true,
        n_flagged,
        n_correct,
        notes,
    })
}
