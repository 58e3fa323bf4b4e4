//! Per-agent least-squares state, per-direction confidence widths and UCB/LCB bands.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Below this λ_min the design is treated as singular and no estimate is produced.
pub const SINGULAR_TOL: f64 = 1e-10;

/// log(t²) with t clamped to at least 2.
pub fn log_t_squared(t: u64) -> f64 {
    2.0 * (t.max(2) as f64).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignState {
    dim: usize,
    v: DMatrix<f64>,
    b: DVector<f64>,
    exploration_count: u64,
    observations: u64,
}

/// θ̂ together with the diagonal of V⁻¹, which is all the width formula needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub theta_hat: Vec<f64>,
    pub inv_diag: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceBand {
    pub mean: f64,
    pub width: f64,
    pub ucb: f64,
    pub lcb: f64,
}

impl DesignState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            v: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            exploration_count: 0,
            observations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 𝒯(t): exploration rounds folded in so far.
    pub fn exploration_count(&self) -> u64 {
        self.exploration_count
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn update(&mut self, x: &[f64], r: f64, is_exploration: bool) {
        debug_assert_eq!(x.len(), self.dim);
        for a in 0..self.dim {
            self.b[a] += r * x[a];
            for c in 0..self.dim {
                self.v[(a, c)] += x[a] * x[c];
            }
        }
        self.observations += 1;
        if is_exploration {
            self.exploration_count += 1;
        }
    }

    pub fn lambda_min(&self) -> f64 {
        if self.dim == 1 {
            return self.v[(0, 0)];
        }
        SymmetricEigen::new(self.v.clone()).eigenvalues.min()
    }

    pub fn estimate(&self) -> Result<Estimate> {
        let lambda_min = self.lambda_min();
        if lambda_min <= SINGULAR_TOL {
            return Err(Error::SingularDesign { lambda_min });
        }
        let chol = self
            .v
            .clone()
            .cholesky()
            .ok_or(Error::SingularDesign { lambda_min })?;
        let theta_hat = chol.solve(&self.b);
        let inv = chol.inverse();
        Ok(Estimate {
            theta_hat: theta_hat.iter().copied().collect(),
            inv_diag: (0..self.dim).map(|l| inv[(l, l)]).collect(),
        })
    }

    /// xᵀ V⁻¹ x.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let lambda_min = self.lambda_min();
        if lambda_min <= SINGULAR_TOL {
            return Err(Error::SingularDesign { lambda_min });
        }
        let chol = self
            .v
            .clone()
            .cholesky()
            .ok_or(Error::SingularDesign { lambda_min })?;
        let xv = DVector::from_column_slice(x);
        Ok(xv.dot(&chol.solve(&xv)))
    }

    pub fn estimate_theta(&self) -> Result<Vec<f64>> {
        Ok(self.estimate()?.theta_hat)
    }

    pub fn confidence_width(&self, x: &[f64], t: u64) -> Result<f64> {
        Ok(self.estimate()?.width(x, t))
    }

    pub fn bands(&self, features: &[&[f64]], t: u64) -> Result<Vec<ConfidenceBand>> {
        Ok(self.estimate()?.bands(features, t))
    }
}

impl Estimate {
    /// Per-direction radius sqrt(2 (V⁻¹)_ℓℓ log t²).
    pub fn direction_radius(&self, l: usize, t: u64) -> f64 {
        (2.0 * self.inv_diag[l] * log_t_squared(t)).sqrt()
    }

    /// w = Σ_ℓ |x_ℓ| · sqrt(2 (V⁻¹)_ℓℓ log t²).
    pub fn width(&self, x: &[f64], t: u64) -> f64 {
        let lt = log_t_squared(t);
        x.iter()
            .zip(&self.inv_diag)
            .map(|(xl, vl)| xl.abs() * (2.0 * vl * lt).sqrt())
            .sum()
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.theta_hat.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn band(&self, x: &[f64], t: u64) -> ConfidenceBand {
        let mean = self.mean(x);
        let width = self.width(x, t);
        ConfidenceBand {
            mean,
            width,
            ucb: mean + width,
            lcb: mean - width,
        }
    }

    pub fn bands(&self, features: &[&[f64]], t: u64) -> Vec<ConfidenceBand> {
        features.iter().map(|x| self.band(x, t)).collect()
    }

    /// Directions ℓ whose estimate misses θ_ℓ by more than the per-direction radius.
    pub fn violations(&self, theta: &[f64], t: u64) -> usize {
        (0..self.theta_hat.len())
            .filter(|&l| (self.theta_hat[l] - theta[l]).abs() > self.direction_radius(l, t))
            .count()
    }
}

/// Width bound implied by λ_min(V) ≥ κ⌊𝒯/d⌋: √d · L · sqrt(4 log t / (κ⌊𝒯/d⌋)).
pub fn width_upper_bound(
    dim: usize,
    feature_bound: f64,
    kappa: f64,
    t: u64,
    explorations: u64,
) -> f64 {
    let blocks = explorations / dim as u64;
    if blocks == 0 {
        return f64::INFINITY;
    }
    (dim as f64).sqrt() * feature_bound * (2.0 * log_t_squared(t) / (kappa * blocks as f64)).sqrt()
}

/// The coarser closed form 2dL/√κ · sqrt(log t / 𝒯).
pub fn analytic_width_bound(
    dim: usize,
    feature_bound: f64,
    kappa: f64,
    t: u64,
    explorations: u64,
) -> f64 {
    if explorations == 0 {
        return f64::INFINITY;
    }
    2.0 * dim as f64 * feature_bound / kappa.sqrt()
        * ((t.max(2) as f64).ln() / explorations as f64).sqrt()
}
