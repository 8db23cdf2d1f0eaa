//! Weighted least angle regression over the cells of one row.
//!
//! For a row `z` with reference model `(mu, Sigma)`, the squared
//! Mahalanobis distance of `z - delta` is the residual sum of squares of a
//! no-intercept regression of `Sigma^{-1/2}(z - mu)` on the columns of
//! `Sigma^{-1/2}`. Running LAR on that regression (with the columns
//! rescaled by inverse Huber weights) ranks the cells by how much moving
//! them reduces the distance. At every breakpoint the exact OLS fit of the
//! active columns is recorded; it gives the conditional-mean imputation of
//! the active cells and an RSS equal to the partial Mahalanobis distance
//! of the inactive ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::SymMatrix;

/// Huber tuning constant for the penalty weights.
pub const HUBER_C: f64 = 1.5;

const STEP_EPS: f64 = 1e-14;
const QR_RANK_TOL: f64 = 1e-13;

/// Penalty weights `w_j = min(1, 1.5 / O_j)` with univariate outlyingness
/// `O_j = |z_j - mu_j| / sqrt(Sigma_jj)`. Missing cells (`NaN`) get weight 1.
pub fn huber_weights(z: &[f64], mu: &[f64], sigma_diag: &[f64]) -> Result<Vec<f64>> {
    if z.len() != mu.len() || z.len() != sigma_diag.len() {
        return Err(Error::input("huber_weights: dimension mismatch"));
    }
    z.iter()
        .zip(mu)
        .zip(sigma_diag)
        .enumerate()
        .map(|(j, ((&zj, &mj), &var))| {
            if !(var > 0.0) {
                return Err(Error::input(format!(
                    "variance of cell {j} is {var}, must be positive"
                )));
            }
            if zj.is_nan() {
                return Ok(1.0);
            }
            let out = (zj - mj).abs() / var.sqrt();
            Ok(if out <= HUBER_C { 1.0 } else { HUBER_C / out })
        })
        .collect()
}

/// Response and design of the weighted regression for one row.
#[derive(Debug, Clone)]
pub struct DesignPair {
    /// `Sigma^{-1/2} (z - mu)`.
    pub response: DVector<f64>,
    /// `Sigma^{-1/2} W^{-1}`.
    pub design: DMatrix<f64>,
    pub weights: Vec<f64>,
}

pub fn build_design(
    z: &[f64],
    mu: &[f64],
    inv_root: &SymMatrix,
    weights: &[f64],
) -> Result<DesignPair> {
    let d = inv_root.dim();
    if z.len() != d || mu.len() != d || weights.len() != d {
        return Err(Error::input("build_design: dimension mismatch"));
    }
    if let Some(j) = weights.iter().position(|w| !(*w > 0.0 && *w <= 1.0)) {
        return Err(Error::input(format!(
            "weight of cell {j} is {}, must lie in (0, 1]",
            weights[j]
        )));
    }
    if let Some(j) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "cell {j} is not finite; substitute a placeholder first"
        )));
    }
    let diff = DVector::from_iterator(d, z.iter().zip(mu).map(|(a, b)| a - b));
    let response = inv_root.as_matrix() * diff;
    let mut design = inv_root.as_matrix().clone();
    for (j, w) in weights.iter().enumerate() {
        design.column_mut(j).unscale_mut(*w);
    }
    Ok(DesignPair {
        response,
        design,
        weights: weights.to_vec(),
    })
}

/// One breakpoint of the path: the first `k` cells of the order are active.
#[derive(Debug, Clone)]
pub struct LarStep {
    /// OLS coefficients of the active cells in the original units of
    /// `z - mu` (zero for inactive cells). The imputed value of an active
    /// cell `j` is `z_j - theta[j]`.
    pub theta: Vec<f64>,
    pub rss: f64,
    /// `RSS_{k-1} - RSS_k`; zero for `k = 0`.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct LarPath {
    /// Entry order of the cells, forced cells first.
    pub order: Vec<usize>,
    /// `steps[k]` for `k = 0..=d`.
    pub steps: Vec<LarStep>,
    pub forced_count: usize,
}

impl LarPath {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn active_set(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }

    /// `Delta_k` for `k = 1..=d`.
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps[1..].iter().map(|s| s.delta)
    }

    /// Position of each cell in the entry order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (k, &j) in self.order.iter().enumerate() {
            pos[j] = k;
        }
        pos
    }
}

/// Householder QR that grows one column at a time.
///
/// Also carries `Q' y` for a fixed response, so the OLS fit and RSS of
/// every prefix of columns fall out without forming any inverse.
#[derive(Debug, Clone)]
struct IncrementalQr {
    rows: usize,
    reflectors: Vec<(DVector<f64>, f64)>,
    r: DMatrix<f64>,
    qty: DVector<f64>,
}

impl IncrementalQr {
    fn new(y: &DVector<f64>) -> Self {
        let rows = y.len();
        Self {
            rows,
            reflectors: Vec::with_capacity(rows),
            r: DMatrix::zeros(rows, rows),
            qty: y.clone(),
        }
    }

    fn cols(&self) -> usize {
        self.reflectors.len()
    }

    fn push(&mut self, col: &DVector<f64>) -> Result<()> {
        let k = self.cols();
        let mut x = col.clone();
        for (v, beta) in &self.reflectors {
            let s = v.dot(&x);
            x.axpy(-beta * s, v, 1.0);
        }
        let tail = x.rows(k, self.rows - k).norm();
        let scale = col.norm();
        if !(tail > QR_RANK_TOL * scale) {
            return Err(Error::Singular {
                eigenvalue: tail * tail,
                floor: (QR_RANK_TOL * scale).powi(2),
            });
        }
        let sign = if x[k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = DVector::zeros(self.rows);
        v.rows_mut(k, self.rows - k)
            .copy_from(&x.rows(k, self.rows - k));
        v[k] += sign * tail;
        let beta = 2.0 / v.norm_squared();
        for i in 0..k {
            self.r[(i, k)] = x[i];
        }
        self.r[(k, k)] = -sign * tail;
        let s = v.dot(&self.qty);
        self.qty.axpy(-beta * s, &v, 1.0);
        self.reflectors.push((v, beta));
        Ok(())
    }

    /// Solves `R b = rhs` on the leading `k x k` block.
    fn back_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut b = rhs.to_vec();
        for i in (0..k).rev() {
            let acc = ((i + 1)..k).fold(b[i], |acc, j| acc - self.r[(i, j)] * b[j]);
            b[i] = acc / self.r[(i, i)];
        }
        b
    }

    /// Solves `R' t = rhs` on the leading block.
    fn forward_solve_transposed(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut t = rhs.to_vec();
        for i in 0..k {
            let acc = (0..i).fold(t[i], |acc, j| acc - self.r[(j, i)] * t[j]);
            t[i] = acc / self.r[(i, i)];
        }
        t
    }

    /// OLS coefficients of the current columns.
    fn coefficients(&self) -> Vec<f64> {
        self.back_solve(&self.qty.as_slice()[..self.cols()])
    }

    /// Solves `(X_A' X_A) b = rhs`.
    fn solve_gram(&self, rhs: &[f64]) -> Vec<f64> {
        self.back_solve(&self.forward_solve_transposed(rhs))
    }

    fn rss(&self) -> f64 {
        let k = self.cols();
        self.qty.rows(k, self.rows - k).norm_squared()
    }

    fn last_delta(&self) -> f64 {
        let k = self.cols();
        self.qty[k - 1] * self.qty[k - 1]
    }
}

fn argmax_abs(values: &DVector<f64>, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        let a = values[j].abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((j, a));
        }
    }
    best.map(|(j, _)| j)
}

/// Runs the LAR path, with the `forced` cells active from the start.
///
/// Forced cells are entered first, ordered by decreasing absolute gradient
/// (lower index on ties) and are unpenalized afterwards: the remaining
/// cells follow the equiangular LAR progression on the residual of the OLS
/// fit over the forced set. No cell ever leaves the active set.
pub fn lar_trace(pair: &DesignPair, forced: &[usize]) -> Result<LarPath> {
    let y = &pair.response;
    let x = &pair.design;
    let d = y.len();
    if x.nrows() != d || x.ncols() != d || pair.weights.len() != d {
        return Err(Error::input(
            "lar_trace: design is not square in the response dimension",
        ));
    }
    let mut in_model = vec![false; d];
    for &j in forced {
        if j >= d || in_model[j] {
            return Err(Error::input(format!(
                "invalid or repeated forced index {j}"
            )));
        }
        in_model[j] = true;
    }

    let mut qr = IncrementalQr::new(y);
    let mut order = Vec::with_capacity(d);
    let mut steps = Vec::with_capacity(d + 1);
    steps.push(LarStep {
        theta: vec![0.0; d],
        rss: y.norm_squared(),
        delta: 0.0,
    });

    let enter = |j: usize,
                 qr: &mut IncrementalQr,
                 order: &mut Vec<usize>,
                 steps: &mut Vec<LarStep>|
     -> Result<()> {
        qr.push(&x.column(j).into_owned())?;
        order.push(j);
        let beta = qr.coefficients();
        let mut theta = vec![0.0; d];
        for (&cell, b) in order.iter().zip(&beta) {
            theta[cell] = b / pair.weights[cell];
        }
        steps.push(LarStep {
            theta,
            rss: qr.rss(),
            delta: qr.last_delta().max(0.0),
        });
        Ok(())
    };

    let grad0 = x.tr_mul(y);
    let mut forced_sorted = forced.to_vec();
    forced_sorted.sort_by(|&a, &b| grad0[b].abs().total_cmp(&grad0[a].abs()).then(a.cmp(&b)));
    for &j in &forced_sorted {
        enter(j, &mut qr, &mut order, &mut steps)?;
    }

    if order.len() == d {
        return Ok(LarPath {
            order,
            steps,
            forced_count: forced.len(),
        });
    }

    let forced_count = order.len();
    let mut residual = y.clone();
    if forced_count > 0 {
        for (&cell, b) in order.iter().zip(qr.coefficients()) {
            residual.axpy(-b, &x.column(cell), 1.0);
        }
    }

    let corr = x.tr_mul(&residual);
    let first = argmax_abs(&corr, (0..d).filter(|&j| !in_model[j])).expect("inactive cell exists");
    in_model[first] = true;
    enter(first, &mut qr, &mut order, &mut steps)?;

    while order.len() < d {
        let corr = x.tr_mul(&residual);
        let lar_active = &order[forced_count..];
        let c_max = lar_active
            .iter()
            .map(|&j| corr[j].abs())
            .fold(0.0, f64::max);
        let rhs: Vec<f64> = order
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                if k < forced_count {
                    0.0
                } else if corr[j] < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let mut b = qr.solve_gram(&rhs);
        let ss: f64 = rhs.iter().zip(&b).map(|(s, v)| s * v).sum();

        let mut chosen: Option<(usize, f64)> = None;
        let mut direction = None;
        if ss > 0.0 {
            let equi = 1.0 / ss.sqrt();
            b.iter_mut().for_each(|v| *v *= equi);
            let mut u = DVector::zeros(d);
            for (&cell, bk) in order.iter().zip(&b) {
                u.axpy(*bk, &x.column(cell), 1.0);
            }
            let a = x.tr_mul(&u);
            for j in (0..d).filter(|&j| !in_model[j]) {
                let mut gj = f64::INFINITY;
                let den1 = equi - a[j];
                if den1 > STEP_EPS * equi {
                    gj = gj.min((c_max - corr[j]).max(0.0) / den1);
                }
                let den2 = equi + a[j];
                if den2 > STEP_EPS * equi {
                    gj = gj.min((c_max + corr[j]).max(0.0) / den2);
                }
                if gj.is_finite() && chosen.is_none_or(|(_, g)| gj < g) {
                    chosen = Some((j, gj));
                }
            }
            direction = Some((u, equi));
        }

        let next = match (chosen, direction) {
            (Some((j, gamma)), Some((u, equi))) => {
                let gamma = gamma.min(c_max / equi);
                if gamma > STEP_EPS {
                    residual.axpy(-gamma, &u, 1.0);
                }
                j
            }
            _ => argmax_abs(&corr, (0..d).filter(|&j| !in_model[j])).expect("inactive cell exists"),
        };
        in_model[next] = true;
        enter(next, &mut qr, &mut order, &mut steps)?;
    }

    Ok(LarPath {
        order,
        steps,
        forced_count,
    })
}
