//! Closed-form transition-density expansions for elliptic and hypo-elliptic
//! SDEs around a drift-linearised Gaussian baseline, together with the
//! machinery to validate them (Euler-Maruyama + KDE benchmark, grid error
//! metrics) and to use them for likelihood-based inference (Nelder-Mead
//! maximum likelihood, adaptive random-walk Metropolis on a non-centred
//! augmented posterior).
//!
//! The expansion multiplies the baseline Gaussian by 1 + Σ_k Δ^{k/2} e_k with
//! model-specific correction weights built from Hermite ratios of the
//! baseline; a truncated log-Taylor transform keeps the shipped proxy
//! strictly positive. Correction weights for the FitzHugh-Nagumo model are
//! built in for both the full and the partial drift linearisation; linear
//! models (where the baseline is already exact) use identically zero weights.

pub mod error;
pub mod expansion;
pub mod hermite;
pub mod inference;
pub mod kde;
pub mod ldl;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
pub use expansion::{
    correction_pi, correction_pi_with_moments, density_proxy, density_proxy_with_moments,
    log_taylor, CorrectionSpec, ExpansionResult, Variant,
};
pub use hermite::{hermite_context, HermiteContext};
pub use kde::{kde_density, silverman_bandwidth, DensityGrid, GridSpec};
pub use ldl::{ldl_moments, LdlMoments};
pub use metrics::{abs_error_grid, l1_error, normalization_check, ErrorReport};
pub use model::{check_hormander, Fhn, FhnParams, HormanderReport, Langevin, LinearSde, SdeModel};
pub use simulate::{em_step, simulate_endpoints, Endpoints, SimConfig};
