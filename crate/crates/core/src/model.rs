use crate::error::{Error, Result};
use crate::numkit::{mahalanobis2, pd_inverse_sqrt, SymMatrix};

/// Location vector and positive definite covariance matrix, with the
/// inverse square roots of the covariance and of the matching correlation
/// matrix cached.
#[derive(Debug, Clone)]
pub struct CovModel {
    mu: Vec<f64>,
    sigma: SymMatrix,
    inv_root: SymMatrix,
    sd: Vec<f64>,
    corr_inv_root: SymMatrix,
}

impl CovModel {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::input(format!(
                "location has length {} but covariance is {}x{}",
                mu.len(),
                sigma.dim(),
                sigma.dim()
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("location vector has non-finite entries"));
        }
        let inv_root = pd_inverse_sqrt(&sigma)?;
        let sd: Vec<f64> = sigma.diagonal().iter().map(|v| v.sqrt()).collect();
        let corr_inv_root = if sd.iter().all(|&s| s == 1.0) {
            inv_root.clone()
        } else {
            let inv_sd: Vec<f64> = sd.iter().map(|s| 1.0 / s).collect();
            pd_inverse_sqrt(&sigma.scaled(&inv_sd))?
        };
        Ok(Self {
            mu,
            sigma,
            inv_root,
            sd,
            corr_inv_root,
        })
    }

    /// Zero location and identity covariance.
    pub fn standard(d: usize) -> Self {
        Self {
            mu: vec![0.0; d],
            sigma: SymMatrix::identity(d),
            inv_root: SymMatrix::identity(d),
            sd: vec![1.0; d],
            corr_inv_root: SymMatrix::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn inv_root(&self) -> &SymMatrix {
        &self.inv_root
    }

    /// Square roots of the diagonal of the covariance.
    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    /// Inverse square root of the correlation matrix.
    pub fn corr_inv_root(&self) -> &SymMatrix {
        &self.corr_inv_root
    }

    pub fn mahalanobis2(&self, z: &[f64]) -> Result<f64> {
        mahalanobis2(z, &self.mu, &self.inv_root)
    }

    /// Model for the data after `x -> loc + scale * x`.
    pub fn affine(&self, loc: &[f64], scale: &[f64]) -> Result<CovModel> {
        let mu = self
            .mu
            .iter()
            .zip(loc.iter().zip(scale))
            .map(|(m, (l, s))| l + s * m)
            .collect();
        CovModel::new(mu, self.sigma.scaled(scale))
    }
}
