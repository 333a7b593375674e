//! SDE model abstraction and the built-in models.
//!
//! A model is an autonomous Itô SDE dX = V0(X) dt + σ(X) dB split into a
//! smooth block (no direct noise) followed by a rough block. Elliptic models
//! have an empty smooth block. All built-ins carry additive noise.

mod fhn;
mod langevin;
mod linear;

pub use fhn::{Fhn, FhnParams};
pub use langevin::Langevin;
pub use linear::LinearSde;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// State-space dimensions of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateDims {
    /// N, full state dimension
    pub n_total: usize,
    /// N_S, number of smooth coordinates (0 for elliptic models)
    pub n_smooth: usize,
    /// N_R, number of rough coordinates
    pub n_rough: usize,
    /// d, number of driving Brownian motions
    pub n_noise: usize,
}

impl StateDims {
    pub fn new(n_smooth: usize, n_rough: usize, n_noise: usize) -> Self {
        StateDims {
            n_total: n_smooth + n_rough,
            n_smooth,
            n_rough,
            n_noise,
        }
    }

    pub fn class(&self) -> SdeClass {
        if self.n_smooth == 0 {
            SdeClass::Elliptic
        } else {
            SdeClass::HypoElliptic
        }
    }
}

/// Whether every coordinate is directly noise-driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdeClass {
    Elliptic,
    HypoElliptic,
}

/// An autonomous SDE with smooth drift and (for all built-ins) constant
/// diffusion. Implementations are immutable and cheap to clone; every method
/// is pure, so models can be shared freely across threads.
pub trait SdeModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn dims(&self) -> StateDims;

    /// Current parameter vector, in the documented per-model order.
    fn theta(&self) -> Vec<f64>;

    fn theta_names(&self) -> Vec<&'static str>;

    /// Same model with a replaced parameter vector.
    fn with_theta(&self, theta: &[f64]) -> Result<Self>
    where
        Self: Sized;

    /// V0(x).
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;

    /// σ(x), an N×d matrix. For hypo-elliptic models the smooth rows are zero.
    fn diffusion(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Exact Jacobian of the drift, A(x) = [∂_{x_j} V0^i(x)].
    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Matrix used to linearise the drift for the Gaussian baseline.
    ///
    /// Defaults to the exact Jacobian; the partial FHN variant overrides this
    /// with an upper-triangular surrogate.
    fn linearization(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.drift_jacobian(x)
    }

    /// Jacobian of the j-th diffusion column. Zero for the built-ins, whose
    /// diffusion does not depend on the state.
    fn diffusion_jacobian(&self, _x: &DVector<f64>, _j: usize) -> DMatrix<f64> {
        let n = self.dims().n_total;
        DMatrix::zeros(n, n)
    }

    /// One Euler step written into `out`; hot path for the simulation
    /// benchmark, overridden allocation-free by the built-ins.
    fn em_step_into(&self, x: &[f64], h: f64, z: &[f64], out: &mut [f64]) {
        let xv = DVector::from_column_slice(x);
        let v = self.drift(&xv);
        let sig = self.diffusion(&xv);
        let zv = DVector::from_column_slice(z);
        let step = &xv + v * h + sig * zv * h.sqrt();
        out.copy_from_slice(step.as_slice());
    }

    /// Access to the FitzHugh-Nagumo parameters when this model is one; the
    /// correction weights are model-specific and dispatch through this.
    fn as_fhn(&self) -> Option<&Fhn> {
        None
    }

    /// Validates a state vector length before public entry points use it.
    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        let n = self.dims().n_total;
        if x.len() != n {
            return Err(Error::Input(format!(
                "state has length {}, model `{}` expects {}",
                x.len(),
                self.name(),
                n
            )));
        }
        Ok(())
    }
}

/// Result of the numerical Hörmander span diagnostic.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HormanderReport {
    /// Rank of {V_{R,j}} as vectors in the rough block.
    pub rank_rough: usize,
    /// Rank of {V_j, [Ṽ0, V_j]} in the full state space (for elliptic models,
    /// rank of σ alone).
    pub rank_full: usize,
    pub satisfied: bool,
}

/// Numerical check of the span condition behind non-degeneracy of the
/// drift-linearised Gaussian baseline.
///
/// For a hypo-elliptic model the brackets [Ṽ0, V_j] are formed from the
/// analytic Jacobians, with Ṽ0 the Stratonovich-corrected drift; for the
/// built-ins (constant diffusion) the correction vanishes and the bracket
/// reduces to -A(x) V_j. `tol` defaults to 1e-10 times the largest singular
/// value.
pub fn check_hormander<M: SdeModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    tol: Option<f64>,
) -> Result<HormanderReport> {
    model.check_state(x)?;
    let dims = model.dims();
    let sigma = model.diffusion(x);

    if dims.class() == SdeClass::Elliptic {
        let rank = numerical_rank(&sigma, tol);
        return Ok(HormanderReport {
            rank_rough: rank,
            rank_full: rank,
            satisfied: rank == dims.n_total,
        });
    }

    let rough = sigma.view((dims.n_smooth, 0), (dims.n_rough, dims.n_noise));
    let rank_rough = numerical_rank(&rough.into_owned(), tol);

    // Stratonovich-corrected drift: Ṽ0 = V0 - ½ Σ_j (DV_j) V_j
    let mut v0_tilde = model.drift(x);
    for j in 0..dims.n_noise {
        let dvj = model.diffusion_jacobian(x, j);
        let vj = sigma.column(j).into_owned();
        v0_tilde -= (&dvj * &vj) * 0.5;
    }
    let a = model.drift_jacobian(x);

    let mut span = DMatrix::<f64>::zeros(dims.n_total, 2 * dims.n_noise);
    for j in 0..dims.n_noise {
        let vj = sigma.column(j).into_owned();
        let dvj = model.diffusion_jacobian(x, j);
        // [Ṽ0, V_j] = (DV_j) Ṽ0 - (DṼ0) V_j; DṼ0 = A for constant diffusion
        let bracket = &dvj * &v0_tilde - &a * &vj;
        span.column_mut(j).copy_from(&vj);
        span.column_mut(dims.n_noise + j).copy_from(&bracket);
    }
    let rank_full = numerical_rank(&span, tol);

    Ok(HormanderReport {
        rank_rough,
        rank_full,
        satisfied: rank_rough == dims.n_rough && rank_full == dims.n_total,
    })
}

fn numerical_rank(m: &DMatrix<f64>, tol: Option<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = tol.unwrap_or(1e-10 * max_sv);
    svd.singular_values.iter().filter(|&&s| s > cutoff).count()
}
