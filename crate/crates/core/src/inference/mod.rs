//! Likelihood-based inference through the density proxy: exact-likelihood
//! substitution for fully observed chains (Nelder-Mead MLE) and an adaptive
//! non-centred random-walk Metropolis sampler for noisy observations.

mod diagnostics;
mod likelihood;
mod mle;
mod posterior;
mod rwm;

pub use diagnostics::{ess_bulk, ess_tail, split_r_hat, wasserstein1, Diagnostics};
pub use likelihood::log_likelihood;
pub use mle::{mle_fit, MleFit};
pub use posterior::{log_posterior, CentredEval, ChainState, NonCentredPath, Priors};
pub use rwm::{adaptive_rwm_generic, rwm_sample, RwmConfig, RwmOutput};

use crate::error::{Error, Result};

/// How a chain of states was observed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ObservationMode {
    /// Every coordinate recorded exactly.
    FullState,
    /// Only the first coordinate, with i.i.d. Gaussian measurement noise.
    NoisyFirstCoordinate { noise_sd: f64 },
}

/// Equidistant observations of an SDE path.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    times: Vec<f64>,
    /// n+1 rows; row k holds the recorded values at time t_k
    values: Vec<Vec<f64>>,
    pub mode: ObservationMode,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, mode: ObservationMode) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::input("observation times and rows differ in length"));
        }
        if times.len() < 3 {
            return Err(Error::input("need at least 3 observations (n ≥ 2)"));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::input("observation times must increase"));
        }
        for w in times.windows(2) {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-9 * dt.abs() {
                return Err(Error::input("observation spacing is not constant"));
            }
        }
        if let ObservationMode::NoisyFirstCoordinate { noise_sd } = mode {
            if !(noise_sd > 0.0) {
                return Err(Error::input("noise_sd must be positive"));
            }
            if values.iter().any(|r| r.len() != 1) {
                return Err(Error::input("noisy mode expects single-column rows"));
            }
        } else {
            let width = values[0].len();
            if width == 0 || values.iter().any(|r| r.len() != width) {
                return Err(Error::input("full-state rows must share a positive width"));
            }
        }
        Ok(ObservationSet {
            times,
            values,
            mode,
        })
    }

    /// Constant spacing Δ.
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Number of transitions n.
    pub fn n_transitions(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}
