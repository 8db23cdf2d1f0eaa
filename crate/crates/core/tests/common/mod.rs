//! Independent reference computations for the integration tests. These use
//! explicit matrix inverses and textbook formulas on purpose, so they share
//! no numerical code path with the library.
#![allow(dead_code)]

use cellwise::numkit::SymMatrix;
use cellwise::table::DataTable;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `A A^T / d + 0.3 I`, then rescaled by random standard deviations in [0.5, 3].
pub fn random_spd(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let mut s = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.3;
    let sd: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
    for i in 0..d {
        for j in 0..d {
            s[(i, j)] *= sd[i] * sd[j];
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    SymMatrix::new(s).unwrap()
}

pub fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub fn sub(v: &[f64], idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&j| v[j]))
}

pub fn complement(d: usize, s: &[usize]) -> Vec<usize> {
    (0..d).filter(|j| !s.contains(j)).collect()
}

/// `mu_S + Sigma_SU Sigma_UU^{-1} (z_U - mu_U)` with an explicit inverse.
pub fn conditional_mean(z: &[f64], mu: &[f64], sigma: &SymMatrix, s: &[usize]) -> Vec<f64> {
    let m = sigma.as_matrix();
    let u = complement(z.len(), s);
    if u.is_empty() {
        return s.iter().map(|&j| mu[j]).collect();
    }
    let inv = block(m, &u, &u).try_inverse().expect("invertible block");
    let shift = block(m, s, &u) * inv * (sub(z, &u) - sub(mu, &u));
    s.iter()
        .enumerate()
        .map(|(a, &j)| mu[j] + shift[a])
        .collect()
}

/// `(z_U - mu_U)' Sigma_UU^{-1} (z_U - mu_U)` over the cells outside `s`.
pub fn partial_md2(z: &[f64], mu: &[f64], sigma: &SymMatrix, s: &[usize]) -> f64 {
    let u = complement(z.len(), s);
    if u.is_empty() {
        return 0.0;
    }
    let inv = block(sigma.as_matrix(), &u, &u)
        .try_inverse()
        .expect("invertible block");
    let r = sub(z, &u) - sub(mu, &u);
    r.dot(&(inv * &r))
}

/// `tr(A B^-1) - d - ln det(A B^-1)` with an explicit inverse and LU determinant.
pub fn kl_reference(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let p = a.as_matrix() * b.as_matrix().clone().try_inverse().unwrap();
    p.trace() - a.dim() as f64 - p.determinant().ln()
}

/// Textbook EM for the Gaussian model with missing values (ML, divisor n),
/// iterated to a tight fixed point.
pub fn em_fixed_point(data: &DataTable) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (data.n_rows(), data.n_cols());
    let mut mu: Vec<f64> = (0..d)
        .map(|j| {
            let c = data.observed_column(j);
            c.iter().sum::<f64>() / c.len() as f64
        })
        .collect();
    let mut sigma = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            let c = data.observed_column(j);
            c.iter().map(|v| (v - mu[j]).powi(2)).sum::<f64>() / c.len() as f64
        } else {
            0.0
        }
    });
    for _ in 0..10_000 {
        let mut filled = vec![vec![0.0; d]; n];
        let mut extra = DMatrix::zeros(d, d);
        for (i, row) in data.rows().enumerate() {
            let miss: Vec<usize> = (0..d).filter(|&j| row[j].is_nan()).collect();
            let obs = complement(d, &miss);
            filled[i] = row.to_vec();
            if miss.is_empty() {
                continue;
            }
            let s = SymMatrix::new(sigma.clone()).unwrap();
            let cm = conditional_mean(
                &filled[i]
                    .iter()
                    .map(|v| if v.is_nan() { 0.0 } else { *v })
                    .collect::<Vec<_>>(),
                &mu,
                &s,
                &miss,
            );
            for (a, &j) in miss.iter().enumerate() {
                filled[i][j] = cm[a];
            }
            let s_mm = block(&sigma, &miss, &miss);
            let cond = if obs.is_empty() {
                s_mm
            } else {
                let s_mo = block(&sigma, &miss, &obs);
                let inv = block(&sigma, &obs, &obs).try_inverse().unwrap();
                s_mm - &s_mo * inv * s_mo.transpose()
            };
            for (a, &ja) in miss.iter().enumerate() {
                for (b, &jb) in miss.iter().enumerate() {
                    extra[(ja, jb)] += cond[(a, b)];
                }
            }
        }
        let new_mu: Vec<f64> = (0..d)
            .map(|j| filled.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let mut new_sigma = extra;
        for r in &filled {
            for a in 0..d {
                for b in 0..d {
                    new_sigma[(a, b)] += (r[a] - new_mu[a]) * (r[b] - new_mu[b]);
                }
            }
        }
        new_sigma /= n as f64;
        let change = (&new_sigma - &sigma).norm()
            + new_mu
                .iter()
                .zip(&mu)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        mu = new_mu;
        sigma = new_sigma;
        if change < 1e-13 {
            break;
        }
    }
    (mu, sigma)
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
