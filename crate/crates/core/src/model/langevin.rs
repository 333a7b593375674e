//! Underdamped Langevin equation with quadratic potential V(q) = κq²/2:
//!
//!   dq = p dt
//!   dp = (-κq - αp) dt + σ dB
//!
//! Position q is smooth, momentum p rough. The drift being linear, the
//! drift-linearised baseline reproduces its transitions exactly.

use nalgebra::{DMatrix, DVector};

use super::{SdeModel, StateDims};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Langevin {
    alpha: f64,
    kappa: f64,
    sigma: f64,
}

impl Langevin {
    /// θ = (α, κ, σ): friction, potential curvature, noise level.
    pub fn new(alpha: f64, kappa: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::input("Langevin requires sigma > 0"));
        }
        Ok(Langevin {
            alpha,
            kappa,
            sigma,
        })
    }
}

impl SdeModel for Langevin {
    fn name(&self) -> &'static str {
        "langevin"
    }

    fn dims(&self) -> StateDims {
        StateDims::new(1, 1, 1)
    }

    fn theta(&self) -> Vec<f64> {
        vec![self.alpha, self.kappa, self.sigma]
    }

    fn theta_names(&self) -> Vec<&'static str> {
        vec!["alpha", "kappa", "sigma"]
    }

    fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != 3 {
            return Err(Error::input("Langevin expects theta = [alpha, kappa, sigma]"));
        }
        Langevin::new(theta[0], theta[1], theta[2])
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_column_slice(&[x[1], -self.kappa * x[0] - self.alpha * x[1]])
    }

    fn diffusion(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, self.sigma])
    }

    fn drift_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -self.kappa, -self.alpha])
    }

    fn em_step_into(&self, x: &[f64], h: f64, z: &[f64], out: &mut [f64]) {
        out[0] = x[0] + x[1] * h;
        out[1] = x[1] + (-self.kappa * x[0] - self.alpha * x[1]) * h + self.sigma * h.sqrt() * z[0];
    }
}
