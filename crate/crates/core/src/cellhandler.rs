//! Per-row cell flagging against a known reference model.

use crate::error::{Error, Result};
use crate::larpath::{build_design, huber_weights, lar_trace, LarPath};
use crate::model::CovModel;

/// Criterion value of every cell: the largest RSS drop at or after the
/// step where the cell enters the path. Forced cells get `+inf`.
/// The result is indexed by cell, and nonincreasing along the path order.
pub fn criterion_values(path: &LarPath) -> Vec<f64> {
    let d = path.dim();
    let mut crit = vec![0.0; d];
    let mut running = 0.0f64;
    for k in (0..d).rev() {
        let cell = path.order[k];
        if k < path.forced_count {
            crit[cell] = f64::INFINITY;
        } else {
            running = running.max(path.steps[k + 1].delta);
            crit[cell] = running;
        }
    }
    crit
}

/// LAR path and criterion values of one row, from which a detection can
/// be read off at any prefix length.
#[derive(Debug, Clone)]
pub struct RowTrace {
    /// The row with missing cells replaced by the model location.
    pub z: Vec<f64>,
    pub missing: Vec<bool>,
    pub path: LarPath,
    pub criteria: Vec<f64>,
}

/// Traces one row. The regression is set up in standard deviation units,
/// `(z_j - mu_j) / sqrt(Sigma_jj)` against the correlation matrix, so the
/// path does not depend on the units of the cells; coefficients are mapped
/// back to the units of `z`.
pub fn trace_row(z: &[f64], model: &CovModel) -> Result<RowTrace> {
    let d = model.dim();
    if z.len() != d {
        return Err(Error::input(format!(
            "row has {} cells, model has {d}",
            z.len()
        )));
    }
    let missing: Vec<bool> = z.iter().map(|v| v.is_nan()).collect();
    let filled: Vec<f64> = z
        .iter()
        .zip(model.mu())
        .map(|(&v, &m)| if v.is_nan() { m } else { v })
        .collect();
    let sd = model.sd();
    let unit: Vec<f64> = filled
        .iter()
        .zip(model.mu())
        .zip(sd)
        .map(|((v, m), s)| (v - m) / s)
        .collect();
    let weights = huber_weights(z, model.mu(), model.sigma().diagonal().as_slice())?;
    let pair = build_design(&unit, &vec![0.0; d], model.corr_inv_root(), &weights)?;
    let forced: Vec<usize> = (0..d).filter(|&j| missing[j]).collect();
    let mut path = lar_trace(&pair, &forced)?;
    for step in &mut path.steps {
        for (t, s) in step.theta.iter_mut().zip(sd) {
            *t *= s;
        }
    }
    let criteria = criterion_values(&path);
    Ok(RowTrace {
        z: filled,
        missing,
        path,
        criteria,
    })
}

impl RowTrace {
    /// Number of leading path cells with criterion strictly above `q`.
    pub fn count_above(&self, q: f64) -> usize {
        self.path
            .order
            .iter()
            .take_while(|&&j| self.criteria[j] > q)
            .count()
    }

    /// Detection with the first `k` cells of the path flagged.
    pub fn detection(&self, k: usize) -> RowDetection {
        let d = self.z.len();
        let theta = &self.path.steps[k].theta;
        let flagged = self.path.order[..k].to_vec();
        let mut cleaned = self.z.clone();
        let mut residuals = vec![0.0; d];
        for &j in &flagged {
            cleaned[j] = self.z[j] - theta[j];
            if !self.missing[j] {
                let diff = self.z[j] - cleaned[j];
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                residuals[j] = sign * self.criteria[j].sqrt();
            }
        }
        RowDetection {
            criteria: self.criteria.clone(),
            flagged,
            cleaned,
            residuals,
            missing: self.missing.clone(),
            path_order: self.path.order.clone(),
        }
    }
}

/// Outcome of flagging one row.
#[derive(Debug, Clone)]
pub struct RowDetection {
    /// Per-cell criterion values (`+inf` for missing cells).
    pub criteria: Vec<f64>,
    /// Flagged cells in path order, missing cells included. Always a prefix
    /// of `path_order`.
    pub flagged: Vec<usize>,
    /// The row with flagged and missing cells replaced by their imputations.
    pub cleaned: Vec<f64>,
    /// Signed standardized residual `sign(z - imputed) * sqrt(C)` for flagged
    /// observed cells; zero elsewhere.
    pub residuals: Vec<f64>,
    pub missing: Vec<bool>,
    pub path_order: Vec<usize>,
}

impl RowDetection {
    pub fn is_flagged(&self, j: usize) -> bool {
        self.flagged.contains(&j)
    }

    /// Flagged cells that were observed.
    pub fn flagged_observed(&self) -> impl Iterator<Item = usize> + '_ {
        self.flagged.iter().copied().filter(|&j| !self.missing[j])
    }
}

/// Flags the cells of `z` whose criterion exceeds `q` and imputes them by
/// their conditional expectation given the unflagged cells.
pub fn handle_row(z: &[f64], model: &CovModel, q: f64) -> Result<RowDetection> {
    if !(q > 0.0) {
        return Err(Error::input(format!("cutoff {q} must be positive")));
    }
    let trace = trace_row(z, model)?;
    let k = trace.count_above(q);
    Ok(trace.detection(k))
}

/// Which cells of a bivariate point are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlagLabel {
    None,
    First,
    Second,
    Both,
}

impl FlagLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagLabel::None => "none",
            FlagLabel::First => "first",
            FlagLabel::Second => "second",
            FlagLabel::Both => "both",
        }
    }
}

/// Evenly spaced grid over `[lo, hi]` on both axes.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Points per axis (at least 2).
    pub points: usize,
}

impl GridSpec {
    pub fn coords(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DomainScan {
    pub coords: Vec<f64>,
    /// `labels[a][b]` is the label at `(coords[a], coords[b])`.
    pub labels: Vec<Vec<FlagLabel>>,
}

impl DomainScan {
    pub fn label_at(&self, x: f64, y: f64) -> FlagLabel {
        let nearest = |v: f64| {
            self.coords
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.labels[nearest(x)][nearest(y)]
    }

    pub fn contains(&self, label: FlagLabel) -> bool {
        self.labels.iter().flatten().any(|&l| l == label)
    }

    /// Rows `x,y,label` for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z1,z2,label\n");
        for (a, x) in self.coords.iter().enumerate() {
            for (b, y) in self.coords.iter().enumerate() {
                out.push_str(&format!("{x},{y},{}\n", self.labels[a][b].as_str()));
            }
        }
        out
    }
}

pub fn classify_point(model: &CovModel, point: [f64; 2], q: f64) -> Result<FlagLabel> {
    let det = handle_row(&point, model, q)?;
    Ok(match (det.is_flagged(0), det.is_flagged(1)) {
        (false, false) => FlagLabel::None,
        (true, false) => FlagLabel::First,
        (false, true) => FlagLabel::Second,
        (true, true) => FlagLabel::Both,
    })
}

/// Labels every point of a bivariate grid by which cells get flagged.
pub fn flag_domain_scan(model: &CovModel, grid: &GridSpec, q: f64) -> Result<DomainScan> {
    if model.dim() != 2 {
        return Err(Error::input(format!(
            "domain scan needs a bivariate model, got dimension {}",
            model.dim()
        )));
    }
    let coords = grid.coords();
    let labels = coords
        .iter()
        .map(|&x| {
            coords
                .iter()
                .map(|&y| classify_point(model, [x, y], q))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainScan { coords, labels })
}
