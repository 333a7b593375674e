//! Hermite ratios of the Gaussian baseline.
//!
//! H_α = ∂_x^α p̄(x, y) / p̄(x, y) with the linearisation point frozen during
//! differentiation (only the affine mean argument moves). Because the frozen
//! mean is affine in x with sensitivity M = e^{ΔA}, every ratio is a
//! polynomial in h = Mᵀ Σ⁻¹ (y - μ) with coefficients from C = Mᵀ Σ⁻¹ M.
//! Orders up to three are needed by the correction weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ldl::LdlMoments;

/// Precision-weighted residual and curvature of the frozen baseline.
#[derive(Debug, Clone)]
pub struct HermiteContext {
    /// h = Mᵀ Σ⁻¹ (y - μ); zero at y = μ
    pub h: DVector<f64>,
    /// C = Mᵀ Σ⁻¹ M, symmetric positive definite
    pub c: DMatrix<f64>,
}

/// Builds the ratio context at observation `y` from baseline moments.
pub fn hermite_context(m: &LdlMoments, y: &DVector<f64>) -> HermiteContext {
    let resid = y - &m.mean;
    let h = m.transition.transpose() * m.solve_cov(&resid);

    let n = m.dim();
    let mut prec_m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let col = m.solve_cov(&m.transition.column(j).into_owned());
        prec_m.column_mut(j).copy_from(&col);
    }
    let c_raw = m.transition.transpose() * prec_m;
    let c = (&c_raw + c_raw.transpose()) * 0.5;
    HermiteContext { h, c }
}

impl HermiteContext {
    /// H_α for a multi-index of 0-based coordinate labels, |α| in 1..=3.
    ///
    /// H_(i) = h_i, H_(i,j) = h_i h_j - C_ij,
    /// H_(i,j,k) = h_i h_j h_k - h_i C_jk - h_j C_ik - h_k C_ij.
    /// The index is sorted first, making permutation invariance exact.
    pub fn ratio(&self, alpha: &[usize]) -> Result<f64> {
        if alpha.iter().any(|&i| i >= self.h.len()) {
            return Err(Error::input("hermite ratio: coordinate label out of range"));
        }
        let h = &self.h;
        let c = &self.c;
        let mut a = [0usize; 3];
        if alpha.is_empty() || alpha.len() > 3 {
            return Err(Error::UnsupportedOrder(alpha.len()));
        }
        a[..alpha.len()].copy_from_slice(alpha);
        a[..alpha.len()].sort_unstable();
        match alpha.len() {
            1 => Ok(h[a[0]]),
            2 => Ok(h[a[0]] * h[a[1]] - c[(a[0], a[1])]),
            _ => {
                let (i, j, k) = (a[0], a[1], a[2]);
                Ok(h[i] * h[j] * h[k]
                    - h[i] * c[(j, k)]
                    - h[j] * c[(i, k)]
                    - h[k] * c[(i, j)])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldl::ldl_moments;
    use crate::model::{Fhn, FhnParams};
    use approx::assert_relative_eq;

    fn fhn_moments(dt: f64) -> LdlMoments {
        let model = Fhn::new(FhnParams::new(0.1, 1.2, 0.3, 0.8, 0.01).unwrap());
        ldl_moments(&model, &DVector::from_column_slice(&[-0.1, 0.2]), dt).unwrap()
    }

    /// ∂^α of the frozen-coefficient density ratio r(x') = p̄(x') / p̄(x),
    /// by nested central differences; the frozen mean is μ + M (x' - x).
    fn fd_ratio(m: &LdlMoments, y: &DVector<f64>, alpha: &[usize], step: f64) -> f64 {
        fn rec(
            m: &LdlMoments,
            y: &DVector<f64>,
            shift: &DVector<f64>,
            alpha: &[usize],
            step: f64,
            base: f64,
        ) -> f64 {
            match alpha.split_first() {
                None => {
                    let mean = &m.mean + &m.transition * shift;
                    let resid = y - mean;
                    let quad = resid.dot(&m.solve_cov(&resid));
                    ((base - quad) * 0.5).exp()
                }
                Some((&i, rest)) => {
                    let mut plus = shift.clone();
                    let mut minus = shift.clone();
                    plus[i] += step;
                    minus[i] -= step;
                    (rec(m, y, &plus, rest, step, base) - rec(m, y, &minus, rest, step, base))
                        / (2.0 * step)
                }
            }
        }
        let resid0 = y - &m.mean;
        let base = resid0.dot(&m.solve_cov(&resid0));
        let zero = DVector::zeros(m.dim());
        rec(m, y, &zero, alpha, step, base)
    }

    fn fd_ratio_richardson(m: &LdlMoments, y: &DVector<f64>, alpha: &[usize], step: f64) -> f64 {
        let coarse = fd_ratio(m, y, alpha, step);
        let fine = fd_ratio(m, y, alpha, step / 2.0);
        (4.0 * fine - coarse) / 3.0
    }

    #[test]
    fn residual_vanishes_at_mean() {
        let m = fhn_moments(0.1);
        let ctx = hermite_context(&m, &m.mean);
        assert!(ctx.h.norm() < 1e-12);
        assert_relative_eq!(ctx.ratio(&[0, 1]).unwrap(), -ctx.c[(0, 1)], epsilon = 1e-12);
    }

    #[test]
    fn identity_moments_reduce_to_residual() {
        let m = LdlMoments::from_parts(
            DVector::from_column_slice(&[0.5, -0.5]),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let y = DVector::from_column_slice(&[1.5, -0.5]);
        let ctx = hermite_context(&m, &y);
        assert_relative_eq!(ctx.h[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(ctx.h[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(ctx.c, DMatrix::identity(2, 2), epsilon = 1e-14);
        // H_(1,1) with y - μ = (1, 0): 1·1 - 1 = 0
        assert_relative_eq!(ctx.ratio(&[0, 0]).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn residual_matches_log_density_gradient() {
        let m = fhn_moments(0.1);
        let y = DVector::from_column_slice(&[-0.35, 0.35]);
        let ctx = hermite_context(&m, &y);
        // central difference of log p̄ w.r.t. the initial state, frozen moments
        let step = 1e-5;
        for i in 0..2 {
            let logp = |shift: f64| {
                let mut dx = DVector::zeros(2);
                dx[i] = shift;
                let mean = &m.mean + &m.transition * dx;
                let resid = &y - mean;
                -0.5 * resid.dot(&m.solve_cov(&resid))
            };
            let fd = (logp(step) - logp(-step)) / (2.0 * step);
            assert_relative_eq!(ctx.h[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn ratios_match_finite_differences_of_frozen_density() {
        let m = fhn_moments(0.08);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(21);
        for _ in 0..10 {
            let y = m.sample(&mut rng);
            let ctx = hermite_context(&m, &y);
            let all: Vec<Vec<usize>> = vec![
                vec![0],
                vec![1],
                vec![0, 0],
                vec![0, 1],
                vec![1, 1],
                vec![0, 0, 0],
                vec![0, 0, 1],
                vec![0, 1, 1],
                vec![1, 1, 1],
            ];
            for alpha in &all {
                let exact = ctx.ratio(alpha).unwrap();
                let step = match alpha.len() {
                    1 => 1e-5,
                    2 => 1e-4,
                    _ => 1e-3,
                };
                let fd = fd_ratio_richardson(&m, &y, alpha, step);
                let tol = 1e-4 * (1.0 + exact.abs().max(fd.abs()));
                assert!(
                    (exact - fd).abs() < tol,
                    "alpha {alpha:?}: exact {exact} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn permutation_symmetry() {
        let m = fhn_moments(0.05);
        let y = DVector::from_column_slice(&[0.0, 0.9]);
        let ctx = hermite_context(&m, &y);
        assert_eq!(ctx.ratio(&[0, 1]).unwrap(), ctx.ratio(&[1, 0]).unwrap());
        assert_eq!(
            ctx.ratio(&[0, 0, 1]).unwrap(),
            ctx.ratio(&[0, 1, 0]).unwrap()
        );
        assert_eq!(
            ctx.ratio(&[0, 0, 1]).unwrap(),
            ctx.ratio(&[1, 0, 0]).unwrap()
        );
    }

    #[test]
    fn order_above_three_is_rejected() {
        let m = fhn_moments(0.05);
        let ctx = hermite_context(&m, &m.mean);
        assert!(matches!(
            ctx.ratio(&[0, 0, 0, 0]),
            Err(Error::UnsupportedOrder(4))
        ));
    }

    #[test]
    fn smooth_derivative_scaling_is_bounded() {
        // |H_(1)| Δ^{3/2} at a fixed whitened offset stays bounded in Δ:
        // one smooth derivative costs Δ^{-3/2}
        let model = Fhn::new(FhnParams::new(0.1, 1.2, 0.3, 0.8, 0.01).unwrap());
        let x = DVector::from_column_slice(&[-0.1, 0.2]);
        let z = DVector::from_column_slice(&[0.7, -0.7]);
        let mut scaled = Vec::new();
        for dt in [1e-1, 1e-2, 1e-3, 1e-4] {
            let m = ldl_moments(&model, &x, dt).unwrap();
            let y = m.map_noise(&z);
            let ctx = hermite_context(&m, &y);
            scaled.push(ctx.h[0].abs() * dt.powf(1.5));
        }
        let max = scaled.iter().cloned().fold(0.0f64, f64::max);
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert!(max / min < 5.0, "scaled values {scaled:?}");
    }
}
