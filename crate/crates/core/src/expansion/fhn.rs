//! Correction weights for the FitzHugh-Nagumo model, for both the full and
//! the partial (upper-triangular) drift linearisation.
//!
//! Each e_k is a polynomial in Δ^{1/2} whose coefficients combine drift and
//! diffusion derivatives at the start state with Hermite ratios of the
//! matching baseline; the drift grading Δ^{k/2} multiplies on top when the
//! correction sum is assembled. The rational prefactors 1/6 … 1/5040 come
//! from the iterated time integrals of the generator expansion; the internal
//! Δ powers reproduce exactly the published grouping of the terms, so the
//! individual e_k values are comparable against their reference expressions.

use crate::hermite::HermiteContext;
use crate::model::FhnParams;

/// Hermite ratios needed by the weights, coordinates 1 = smooth, 2 = rough.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FhnRatios {
    pub h1: f64,
    pub h2: f64,
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
    pub h111: f64,
    pub h112: f64,
    pub h122: f64,
}

impl FhnRatios {
    pub fn from_context(ctx: &HermiteContext) -> Self {
        // orders 1..3 always exist for a 2-state context
        FhnRatios {
            h1: ctx.ratio(&[0]).unwrap(),
            h2: ctx.ratio(&[1]).unwrap(),
            h11: ctx.ratio(&[0, 0]).unwrap(),
            h12: ctx.ratio(&[0, 1]).unwrap(),
            h22: ctx.ratio(&[1, 1]).unwrap(),
            h111: ctx.ratio(&[0, 0, 0]).unwrap(),
            h112: ctx.ratio(&[0, 0, 1]).unwrap(),
            h122: ctx.ratio(&[0, 1, 1]).unwrap(),
        }
    }
}

/// Recurring drift combinations: f = s + x₁³ - x₁ + x₂ = -ε·V0¹(x) and
/// g = β + γx₁ - x₂ = V0²(x).
#[inline]
fn drift_factors(p: &FhnParams, x1: f64, x2: f64) -> (f64, f64) {
    let f = p.s + x1 * x1 * x1 - x1 + x2;
    let g = p.beta + p.gamma * x1 - x2;
    (f, g)
}

pub(crate) fn e3_full(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, _) = drift_factors(p, x1, x2);
    let eps3 = p.epsilon.powi(3);
    -dt.powf(1.5) / 6.0 * (6.0 * x1 * f * f / eps3) * r.h1
}

pub(crate) fn e4_full(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, _) = drift_factors(p, x1, x2);
    let s2 = p.sigma * p.sigma;
    let eps3 = p.epsilon.powi(3);
    let eps4 = p.epsilon.powi(4);
    -dt.powi(2) / 24.0 * (18.0 * s2 * x1 * f / eps3) * r.h12
        - dt.powi(3) / 120.0 * (24.0 * s2 * x1 * f / eps4) * r.h11
}

pub(crate) fn e5_full(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, g) = drift_factors(p, x1, x2);
    let eps = p.epsilon;
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;
    dt.powf(1.5) / 24.0 * 6.0 * (-3.0 * x1 * eps * f * g + f * f * f - s2 * x1 * eps)
        / eps.powi(4)
        * r.h1
        - dt.powf(2.5) / 120.0 * (18.0 * x1 * s4 / eps.powi(3)) * r.h122
        - dt.powf(3.5) / 720.0 * (60.0 * x1 * s4 / eps.powi(4)) * r.h112
        - dt.powf(4.5) / 5040.0 * (60.0 * x1 * s4 / eps.powi(5)) * r.h111
}

pub(crate) fn e3_partial(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, _) = drift_factors(p, x1, x2);
    let eps = p.epsilon;
    -dt.sqrt() / 2.0 * (f * p.gamma / eps) * r.h2
        - dt.powf(1.5) / 6.0 * ((6.0 * x1 * f * f + 2.0 * f * p.gamma * eps) / eps.powi(3)) * r.h1
}

pub(crate) fn e4_partial(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, _) = drift_factors(p, x1, x2);
    let eps = p.epsilon;
    let s2 = p.sigma * p.sigma;
    -dt / 6.0 * (p.gamma * s2 / eps) * r.h22
        - dt.powi(2) / 24.0 * (2.0 * s2 * (9.0 * x1 * f + 2.0 * p.gamma * eps) / eps.powi(3))
            * r.h12
        - dt.powi(3) / 120.0 * (4.0 * s2 * (6.0 * x1 * f + p.gamma * eps) / eps.powi(4)) * r.h11
}

pub(crate) fn e5_partial(p: &FhnParams, x1: f64, x2: f64, dt: f64, r: &FhnRatios) -> f64 {
    let (f, _) = drift_factors(p, x1, x2);
    let eps = p.epsilon;
    let gam = p.gamma;
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;

    let rough_weight = (gam * (3.0 * x1 * x1 - 1.0) * f
        - gam
            * eps
            * (p.beta + 2.0 * p.s + 2.0 * x1.powi(3) + (gam - 2.0) * x1 + x2))
        / (eps * eps);

    dt.sqrt() / 6.0 * rough_weight * r.h2
        + dt.powf(1.5) / 24.0 * g_poly(p, x1, x2) * r.h1
        - dt.powf(2.5) / 120.0 * (18.0 * x1 * s4 / eps.powi(3)) * r.h122
        - dt.powf(3.5) / 720.0 * (60.0 * x1 * s4 / eps.powi(4)) * r.h112
        - dt.powf(4.5) / 5040.0 * (60.0 * x1 * s4 / eps.powi(5)) * r.h111
}

/// Degree-9 drift polynomial entering the smooth-derivative part of
/// e5 for the partial linearisation.
fn g_poly(p: &FhnParams, x1: f64, x2: f64) -> f64 {
    let eps = p.epsilon;
    let gam = p.gamma;
    let bet = p.beta;
    let s = p.s;
    let s2 = p.sigma * p.sigma;
    let u = x1.powi(3) - x1 + x2;

    let inner = bet * gam * eps * eps
        - 2.0 * s.powi(3)
        - 6.0 * s * s * u
        + s * (gam * eps * eps - 6.0 * u * u + 6.0 * x1 * eps * (bet + gam * x1 - x2))
        - 2.0 * x1.powi(9)
        + 6.0 * x1.powi(7)
        - 6.0 * x1.powi(6) * x2
        + 6.0 * x1.powi(5) * (gam * eps - 1.0)
        + 6.0 * x1.powi(4) * (bet * eps - x2 * (eps - 2.0))
        + x1.powi(3) * (gam * (eps - 6.0) * eps - 6.0 * x2 * x2 + 2.0)
        + 6.0 * x1 * x1 * (x2 * (gam * eps + eps - 1.0) - bet * eps)
        + x1 * (eps * ((gam - 1.0) * gam * eps + 2.0 * s2) - 6.0 * x2 * x2 * (eps - 1.0)
            + 6.0 * bet * x2 * eps)
        - 2.0 * x2.powi(3);

    -3.0 / eps.powi(4) * inner
}
