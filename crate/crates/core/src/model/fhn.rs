//! FitzHugh-Nagumo SDE, the canonical hypo-elliptic test model:
//!
//!   dV = (V - V³ - U - s)/ε dt
//!   dU = (γV - U + β) dt + σ dB
//!
//! with membrane potential V (smooth) and recovery variable U (rough),
//! parameters θ = (ε, γ, β, σ) and a fixed signed stimulus s.

use nalgebra::{DMatrix, DVector};

use super::{SdeModel, StateDims};
use crate::error::{Error, Result};

/// Parameters of the FitzHugh-Nagumo SDE. The stimulus `s` is held fixed
/// during inference and may carry either sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub beta: f64,
    pub sigma: f64,
    pub s: f64,
}

impl FhnParams {
    pub fn new(epsilon: f64, gamma: f64, beta: f64, sigma: f64, s: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::input("FHN requires epsilon > 0"));
        }
        if !(sigma > 0.0) {
            return Err(Error::input("FHN requires sigma > 0"));
        }
        Ok(FhnParams {
            epsilon,
            gamma,
            beta,
            sigma,
            s,
        })
    }
}

/// FitzHugh-Nagumo model. `partial` selects the upper-triangular drift
/// linearisation (the γ entry dropped), which pairs with the second family of
/// correction coefficients.
#[derive(Debug, Clone)]
pub struct Fhn {
    params: FhnParams,
    partial: bool,
}

impl Fhn {
    pub fn new(params: FhnParams) -> Self {
        Fhn {
            params,
            partial: false,
        }
    }

    /// Variant whose baseline linearisation zeroes the (2,1) coupling entry.
    pub fn partial(params: FhnParams) -> Self {
        Fhn {
            params,
            partial: true,
        }
    }

    pub fn params(&self) -> &FhnParams {
        &self.params
    }

    pub fn is_partial(&self) -> bool {
        self.partial
    }
}

impl SdeModel for Fhn {
    fn name(&self) -> &'static str {
        if self.partial {
            "fhn-partial"
        } else {
            "fhn"
        }
    }

    fn dims(&self) -> StateDims {
        StateDims::new(1, 1, 1)
    }

    fn theta(&self) -> Vec<f64> {
        let p = &self.params;
        vec![p.epsilon, p.gamma, p.beta, p.sigma]
    }

    fn theta_names(&self) -> Vec<&'static str> {
        vec!["epsilon", "gamma", "beta", "sigma"]
    }

    fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != 4 {
            return Err(Error::input("FHN expects theta = [epsilon, gamma, beta, sigma]"));
        }
        let params = FhnParams::new(theta[0], theta[1], theta[2], theta[3], self.params.s)?;
        Ok(Fhn {
            params,
            partial: self.partial,
        })
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let v = x[0];
        let u = x[1];
        DVector::from_column_slice(&[
            (v - v * v * v - u - p.s) / p.epsilon,
            p.gamma * v - u + p.beta,
        ])
    }

    fn diffusion(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, self.params.sigma])
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (1.0 - 3.0 * x[0] * x[0]) / p.epsilon,
                -1.0 / p.epsilon,
                p.gamma,
                -1.0,
            ],
        )
    }

    fn linearization(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut a = self.drift_jacobian(x);
        if self.partial {
            a[(1, 0)] = 0.0;
        }
        a
    }

    fn em_step_into(&self, x: &[f64], h: f64, z: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (v, u) = (x[0], x[1]);
        out[0] = v + (v - v * v * v - u - p.s) / p.epsilon * h;
        out[1] = u + (p.gamma * v - u + p.beta) * h + p.sigma * h.sqrt() * z[0];
    }

    fn as_fhn(&self) -> Option<&Fhn> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> Fhn {
        Fhn::new(FhnParams::new(0.1, 1.2, 0.3, 0.8, 0.01).unwrap())
    }

    #[test]
    fn drift_at_reference_point() {
        let x = DVector::from_column_slice(&[-0.1, 0.2]);
        let v = model().drift(&x);
        assert_relative_eq!(v[0], -3.09, epsilon = 1e-12);
        assert_relative_eq!(v[1], -0.02, epsilon = 1e-12);
    }

    #[test]
    fn diffusion_is_rough_only() {
        let sigma = model().diffusion(&DVector::zeros(2));
        assert_eq!(sigma[(0, 0)], 0.0);
        assert_eq!(sigma[(1, 0)], 0.8);
    }

    #[test]
    fn jacobian_at_origin() {
        let a = model().drift_jacobian(&DVector::from_column_slice(&[0.0, 0.7]));
        assert_relative_eq!(a[(0, 0)], 10.0);
        assert_relative_eq!(a[(0, 1)], -10.0);
        assert_relative_eq!(a[(1, 0)], 1.2);
        assert_relative_eq!(a[(1, 1)], -1.0);
    }

    #[test]
    fn partial_linearization_zeroes_coupling() {
        let partial = Fhn::partial(*model().params());
        let x = DVector::from_column_slice(&[0.4, -0.1]);
        let a = partial.linearization(&x);
        assert_eq!(a[(1, 0)], 0.0);
        // the true jacobian keeps γ
        assert_relative_eq!(partial.drift_jacobian(&x)[(1, 0)], 1.2);
        // drift itself is the same SDE
        assert_eq!(partial.drift(&x), model().drift(&x));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(FhnParams::new(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(FhnParams::new(0.1, 1.0, 1.0, 0.0, 0.0).is_err());
    }
}
