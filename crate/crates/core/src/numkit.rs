//! Dense symmetric linear algebra and special functions.
//!
//! Everything here is a pure function of its inputs. Matrices are small
//! (d at most a few hundred), so the routines favour accuracy and
//! determinism over asymptotic speed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative floor below which an eigenvalue is treated as zero.
pub const PD_FLOOR_REL: f64 = 1e-12;
/// Iteration cap for the nearest-correlation projection.
pub const MAX_PSD_ITER: usize = 200;
const PSD_TOL: f64 = 1e-9;

/// A real symmetric matrix with finite entries.
///
/// Symmetry is enforced exactly on construction by averaging the matrix
/// with its transpose, after checking that the input was symmetric up to
/// roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::input(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.is_empty() {
            return Err(Error::input("matrix has dimension 0"));
        }
        if let Some(((i, j), v)) = m
            .iter()
            .enumerate()
            .map(|(k, v)| ((k % m.nrows(), k / m.nrows()), v))
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::input(format!("non-finite entry {v} at ({i}, {j})")));
        }
        let scale = 1.0 + m.amax();
        let d = m.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::input(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Callers guarantee finiteness.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::input(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.0.diagonal()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(self.0.select_rows(idx).select_columns(idx))
    }

    /// `diag(s) * self * diag(s)`.
    pub fn scaled(&self, s: &[f64]) -> SymMatrix {
        let d = self.dim();
        SymMatrix(DMatrix::from_fn(d, d, |i, j| self.0[(i, j)] * s[i] * s[j]))
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigen_unchecked(&self.0).values[self.dim() - 1]
    }
}

/// Eigenvalues in nonincreasing order with an orthonormal eigenvector basis.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `V diag(f(values)) V'`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, k| {
            self.vectors[(i, k)] * f(self.values[k])
        });
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }
}

pub fn sym_eigen(s: &SymMatrix) -> Result<EigenDecomposition> {
    if s.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(
            "non-finite entry in eigen decomposition input",
        ));
    }
    Ok(sym_eigen_unchecked(&s.0))
}

fn sym_eigen_unchecked(m: &DMatrix<f64>) -> EigenDecomposition {
    let d = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    // stable: equal eigenvalues keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // sign convention: first non-negligible component positive
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    EigenDecomposition { values, vectors }
}

/// Absolute eigenvalue floor for a matrix whose largest eigenvalue is `max_eig`.
pub fn pd_floor(max_eig: f64) -> f64 {
    PD_FLOOR_REL * max_eig.max(0.0)
}

/// The unique symmetric positive definite `R` with `R S R = I`.
pub fn pd_inverse_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(s)?;
    let d = s.dim();
    let largest = eig.values[0];
    let smallest = eig.values[d - 1];
    let floor = pd_floor(largest);
    if largest <= 0.0 || smallest <= floor {
        return Err(Error::Singular {
            eigenvalue: smallest,
            floor,
        });
    }
    Ok(eig.reconstruct_with(|v| 1.0 / v.sqrt()))
}

/// Validates strict positive definiteness using the relative floor.
pub fn check_pd(s: &SymMatrix) -> Result<()> {
    let eig = sym_eigen(s)?;
    let d = s.dim();
    let floor = pd_floor(eig.values[0]);
    if eig.values[0] <= 0.0 || eig.values[d - 1] <= floor {
        return Err(Error::Singular {
            eigenvalue: eig.values[d - 1],
            floor,
        });
    }
    Ok(())
}

/// Nearest positive semidefinite matrix in Frobenius norm.
///
/// Without `unit_diagonal` this is a single eigenvalue clip. With it,
/// the PSD cone and the unit-diagonal affine set are projected onto
/// alternately (with Dykstra's correction on the cone step) until
/// successive iterates move less than `1e-9`. The converged iterate is
/// finished with one more clip and a diagonal rescaling, which keeps it
/// exactly PSD with an exactly unit diagonal.
pub fn nearest_psd(s: &SymMatrix, unit_diagonal: bool) -> Result<SymMatrix> {
    if !unit_diagonal {
        return Ok(clip_eigenvalues(&s.0, 0.0));
    }
    let d = s.dim();
    let mut y = s.0.clone();
    let mut correction = DMatrix::<f64>::zeros(d, d);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_PSD_ITER {
        let r = &y - &correction;
        let x = clip_eigenvalues(&r, 0.0).into_matrix();
        correction = &x - &r;
        let mut next = x;
        for i in 0..d {
            next[(i, i)] = 1.0;
        }
        change = (&next - &y).norm();
        y = next;
        if change < PSD_TOL {
            return finish_correlation(&y);
        }
    }
    Err(Error::Convergence {
        what: "nearest correlation projection",
        iterations: MAX_PSD_ITER,
        residual: change,
    })
}

fn finish_correlation(y: &DMatrix<f64>) -> Result<SymMatrix> {
    let x = clip_eigenvalues(y, 0.0).into_matrix();
    let d = x.nrows();
    let mut inv_sd = Vec::with_capacity(d);
    for i in 0..d {
        if x[(i, i)] <= 0.0 {
            return Err(Error::Degenerate(format!(
                "projected matrix has nonpositive diagonal entry at {i}"
            )));
        }
        inv_sd.push(1.0 / x[(i, i)].sqrt());
    }
    let mut out = DMatrix::from_fn(d, d, |i, j| x[(i, j)] * inv_sd[i] * inv_sd[j]);
    for i in 0..d {
        out[(i, i)] = 1.0;
    }
    Ok(SymMatrix::symmetrized(out))
}

/// Replaces eigenvalues below `floor` with `floor` and reconstructs.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> SymMatrix {
    let eig = sym_eigen_unchecked(m);
    eig.reconstruct_with(|v| v.max(floor))
}

/// Squared Mahalanobis distance `||R (z - mu)||^2` given `R = Sigma^{-1/2}`.
pub fn mahalanobis2(z: &[f64], mu: &[f64], inv_root: &SymMatrix) -> Result<f64> {
    let d = inv_root.dim();
    if z.len() != d || mu.len() != d {
        return Err(Error::input(format!(
            "dimension mismatch: z has {}, mu has {}, matrix is {d}x{d}",
            z.len(),
            mu.len()
        )));
    }
    let diff = DVector::from_iterator(d, z.iter().zip(mu).map(|(a, b)| a - b));
    Ok((inv_root.as_matrix() * diff).norm_squared())
}

// ---------------------------------------------------------------------------
// Special functions

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

/// Upper regularized gamma `Q(a, x)` by Lentz's continued fraction.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Chi-squared distribution function with `df` degrees of freedom.
pub fn chi2_cdf(df: u32, q: f64) -> f64 {
    regularized_gamma_p(df as f64 / 2.0, q / 2.0)
}

fn chi2_pdf(df: u32, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let a = df as f64 / 2.0;
    ((a - 1.0) * (q / 2.0).ln() - q / 2.0 - ln_gamma(a)).exp() / 2.0
}

/// Standard normal quantile (Acklam's rational approximation, relative
/// error about 1e-9). Only used for starting values.
fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile_approx(1.0 - p)
    }
}

/// Quantile of the chi-squared distribution.
///
/// Newton iterations on the regularized incomplete gamma function from a
/// Wilson-Hilferty starting value, falling back to bisection whenever a
/// Newton step leaves the current bracket.
pub fn chi2_quantile(df: u32, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::input(format!("probability {p} is outside (0, 1)")));
    }
    if df == 0 {
        return Err(Error::input("degrees of freedom must be positive"));
    }
    let k = df as f64;
    let z = normal_quantile_approx(p);
    let h = 2.0 / (9.0 * k);
    let mut q = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(q > 0.0) || !q.is_finite() {
        // small-x expansion P(a, x) ~ x^a / Gamma(a + 1)
        let a = k / 2.0;
        q = 2.0 * ((p.ln() + ln_gamma(a + 1.0)) / a).exp();
    }

    let mut lo = 0.0;
    let mut hi = q.max(1e-300);
    while chi2_cdf(df, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let f = chi2_cdf(df, q) - p;
        if f.abs() <= 1e-15 {
            return Ok(q);
        }
        if f < 0.0 {
            lo = lo.max(q);
        } else {
            hi = hi.min(q);
        }
        let slope = chi2_pdf(df, q);
        let mut next = q - f / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - q).abs() <= 1e-16 * q.abs().max(1e-300) {
            return Ok(next);
        }
        q = next;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(d: usize, e: &[f64]) -> SymMatrix {
        SymMatrix::from_row_slice(d, e).unwrap()
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let e = sym_eigen(&sym(2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[4.0, 1.0]);
        assert!((e.vectors[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((e.vectors[(1, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_equicorrelation_2x2() {
        let e = sym_eigen(&sym(2, &[1.0, -0.9, -0.9, 1.0])).unwrap();
        assert!((e.values[0] - 1.9).abs() < 1e-12);
        assert!((e.values[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_nonfinite() {
        assert!(SymMatrix::from_row_slice(2, &[1.0, f64::NAN, f64::NAN, 1.0]).is_err());
        assert!(SymMatrix::from_row_slice(2, &[1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn inverse_sqrt_examples() {
        let r = pd_inverse_sqrt(&SymMatrix::identity(4)).unwrap();
        assert!((r.as_matrix() - DMatrix::identity(4, 4)).amax() < 1e-14);

        let r = pd_inverse_sqrt(&sym(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert!((r.get(0, 0) - 0.5).abs() < 1e-14);
        assert!((r.get(1, 1) - 1.0 / 3.0).abs() < 1e-14);
        assert!(r.get(0, 1).abs() < 1e-14);

        let s = sym(2, &[1.0, 0.9, 0.9, 1.0]);
        let r = pd_inverse_sqrt(&s).unwrap();
        // oracle: V = [1,1;1,-1]/sqrt2 with eigenvalues 1.9, 0.1
        let a = 1.0 / 1.9f64.sqrt();
        let b = 1.0 / 0.1f64.sqrt();
        assert!((r.get(0, 0) - 0.5 * (a + b)).abs() < 1e-12);
        assert!((r.get(0, 1) - 0.5 * (a - b)).abs() < 1e-12);
        let rsr = r.as_matrix() * s.as_matrix() * r.as_matrix();
        assert!((rsr - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn inverse_sqrt_singular() {
        let err = pd_inverse_sqrt(&sym(2, &[1.0, 1.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn nearest_psd_examples() {
        let c = sym(3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let out = nearest_psd(&c, true).unwrap();
        assert!(out.frobenius_distance(&c) < 1e-8);

        let bad = sym(3, &[1.0, 0.9, 0.7, 0.9, 1.0, -0.9, 0.7, -0.9, 1.0]);
        assert!(bad.min_eigenvalue() < 0.0);
        let fixed = nearest_psd(&bad, true).unwrap();
        assert!(fixed.min_eigenvalue() >= -1e-10);
        for i in 0..3 {
            assert!((fixed.get(i, i) - 1.0).abs() < 1e-8);
        }
        let again = nearest_psd(&fixed, true).unwrap();
        assert!(again.frobenius_distance(&fixed) < 1e-8);

        let id = SymMatrix::identity(2);
        assert!(nearest_psd(&id, true).unwrap().frobenius_distance(&id) < 1e-14);
        let clipped = nearest_psd(&bad, false).unwrap();
        assert!(clipped.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn chi2_quantile_examples() {
        let q = chi2_quantile(1, 0.99).unwrap();
        assert!((q - 6.634_896_601_021_213).abs() < 1e-9);
        assert!((q.sqrt() - 2.5758).abs() < 1e-4);
        let q = chi2_quantile(2, 0.5).unwrap();
        assert!((q - 2.0 * 2f64.ln()).abs() < 1e-12);
        let q = chi2_quantile(1, 0.5).unwrap();
        assert!((q - 0.454_936_423_119_572_7).abs() < 1e-9);
        assert!(chi2_quantile(1, 0.0).is_err());
        assert!(chi2_quantile(1, 1.0).is_err());
        assert!(chi2_quantile(3, f64::NAN).is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        let id = SymMatrix::identity(2);
        assert_eq!(mahalanobis2(&[1.0, 2.0], &[1.0, 2.0], &id).unwrap(), 0.0);
        assert!((mahalanobis2(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap() - 25.0).abs() < 1e-12);
        let r = pd_inverse_sqrt(&sym(2, &[1.0, 0.9, 0.9, 1.0])).unwrap();
        assert!((mahalanobis2(&[1.0, -1.0], &[0.0, 0.0], &r).unwrap() - 20.0).abs() < 1e-8);
        assert!(mahalanobis2(&[1.0], &[0.0, 0.0], &r).is_err());
    }

    fn random_sym(d: usize, entries: &[f64]) -> SymMatrix {
        let m = DMatrix::from_fn(d, d, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            entries[a * d + b]
        });
        SymMatrix::new(m).unwrap()
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(d in 1usize..=10, entries in prop::collection::vec(-5.0f64..5.0, 100)) {
            let s = random_sym(d, &entries);
            let e = sym_eigen(&s).unwrap();
            let back = e.reconstruct_with(|v| v);
            let tol = 1e-10 * (1.0 + s.as_matrix().amax());
            prop_assert!(back.frobenius_distance(&s) < tol * d as f64);
            let vtv = e.vectors.transpose() * &e.vectors;
            prop_assert!((vtv - DMatrix::identity(d, d)).amax() < 1e-10);
            for k in 1..d {
                prop_assert!(e.values[k - 1] >= e.values[k]);
            }
        }

        #[test]
        fn inverse_sqrt_squares_to_inverse(d in 1usize..=8, entries in prop::collection::vec(-1.0f64..1.0, 64)) {
            let a = DMatrix::from_row_slice(d, d, &entries[..d * d]);
            let s = SymMatrix::new(&a * a.transpose() + DMatrix::identity(d, d)).unwrap();
            let r = pd_inverse_sqrt(&s).unwrap();
            prop_assert!(r.min_eigenvalue() > 0.0);
            let rsr = r.as_matrix() * s.as_matrix() * r.as_matrix();
            prop_assert!((rsr - DMatrix::identity(d, d)).amax() < 1e-8);
            let inv = s.as_matrix().clone().try_inverse().unwrap();
            let rr = r.as_matrix() * r.as_matrix();
            prop_assert!((&rr - &inv).amax() < 1e-8);
            let r4 = &rr * &rr;
            prop_assert!((r4 - &inv * &inv).amax() < 1e-6);
        }

        #[test]
        fn nearest_psd_idempotent(d in 2usize..=6, entries in prop::collection::vec(-1.0f64..1.0, 36)) {
            let mut m = DMatrix::from_fn(d, d, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                entries[a * d + b]
            });
            for i in 0..d { m[(i, i)] = 1.0; }
            let s = SymMatrix::new(m).unwrap();
            let once = nearest_psd(&s, true).unwrap();
            prop_assert!(once.min_eigenvalue() >= -1e-10);
            let twice = nearest_psd(&once, true).unwrap();
            prop_assert!(twice.frobenius_distance(&once) < 1e-8);
        }
    }
}
