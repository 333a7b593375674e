//! Gaussian baseline from local drift linearisation.
//!
//! Freezing the drift's first-order Taylor expansion and the diffusion at the
//! current state turns one step of the SDE into a linear SDE with an exactly
//! Gaussian transition law. Both moment integrals are evaluated in closed
//! form through a single augmented matrix exponential, so no quadrature-order
//! error sits underneath the density expansion built on top.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::linear_moments;
use crate::model::SdeModel;

/// Moments of the drift-linearised Gaussian transition over one step.
#[derive(Debug, Clone)]
pub struct LdlMoments {
    /// μ(Δ, x, θ)
    pub mean: DVector<f64>,
    /// Σ(Δ, x, θ), symmetrised
    pub cov: DMatrix<f64>,
    /// e^{Δ A(x)}; also the sensitivity ∂μ/∂x since the frozen mean is affine
    pub transition: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

/// Moments of the Gaussian baseline started at `x` over a step `dt`.
///
/// The linearisation matrix comes from `model.linearization`, the offset is
/// b = V0(x) - A x and the diffusion is frozen at x.
pub fn ldl_moments<M: SdeModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    dt: f64,
) -> Result<LdlMoments> {
    model.check_state(x)?;
    if !(dt > 0.0) {
        return Err(Error::input("ldl_moments requires dt > 0"));
    }
    let a_lin = model.linearization(x);
    let b = model.drift(x) - &a_lin * x;
    let sigma = model.diffusion(x);
    let a_mat = &sigma * sigma.transpose();

    let m = linear_moments(&a_lin, &b, &a_mat, x, dt)?;
    LdlMoments::from_parts(m.mean_map, m.cov, m.transition)
}

impl LdlMoments {
    /// Assembles moments from explicit parts, symmetrising the covariance and
    /// factorising it. On a first Cholesky failure a jitter of
    /// 1e-12·trace/N is added once; a second failure is reported with the
    /// smallest eigenvalue rather than silently regularised away.
    pub fn from_parts(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        transition: DMatrix<f64>,
    ) -> Result<Self> {
        let n = cov.nrows();
        let sym = (&cov + cov.transpose()) * 0.5;
        // non-finite moments or gross asymmetry mean the exponential
        // overflowed (runaway linearisation); report as degeneracy so
        // samplers can reject instead of aborting
        let finite = mean.iter().all(|v| v.is_finite()) && sym.iter().all(|v| v.is_finite());
        if !finite
            || (&cov - cov.transpose()).norm() > 1e-10 * sym.norm().max(f64::MIN_POSITIVE)
        {
            return Err(Error::Degenerate {
                index: 0,
                min_eigenvalue: f64::NAN,
            });
        }

        let chol = match Cholesky::new(sym.clone()) {
            Some(c) => c,
            None => {
                let jitter = 1e-12 * sym.trace() / n as f64;
                let mut bumped = sym.clone();
                for i in 0..n {
                    bumped[(i, i)] += jitter;
                }
                Cholesky::new(bumped).ok_or_else(|| {
                    let min_eig = sym
                        .clone()
                        .symmetric_eigen()
                        .eigenvalues
                        .iter()
                        .fold(f64::INFINITY, |a, &b| a.min(b));
                    Error::Degenerate {
                        index: 0,
                        min_eigenvalue: min_eig,
                    }
                })?
            }
        };
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(LdlMoments {
            mean,
            cov: sym,
            transition,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower-triangular Cholesky factor of the covariance.
    pub fn chol_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Σ⁻¹ v via the factorisation.
    pub fn solve_cov(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// Exact multivariate normal log-density at `y`.
    pub fn logpdf(&self, y: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        let resid = y - &self.mean;
        let quad = resid.dot(&self.chol.solve(&resid));
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det + quad)
    }

    /// One draw y = μ + L z with z standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        self.map_noise(&z)
    }

    /// Deterministic part of the sampler: μ + L z for given innovations.
    pub fn map_noise(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.mean + self.chol.l() * z
    }

    /// Innovations that reproduce `y` under `map_noise` (L⁻¹ (y - μ)).
    pub fn unmap_state(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut resid = y - &self.mean;
        self.chol.l().solve_lower_triangular_mut(&mut resid);
        resid
    }
}
