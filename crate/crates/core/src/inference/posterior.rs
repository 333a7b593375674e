//! Augmented posterior over (θ, hidden path) under a non-centred
//! parameterisation.
//!
//! Hidden states are represented through the standard-normal innovations
//! that generate them under the Gaussian baseline: X_0 = m_0 + s_0 ⊙ z_0 and
//! X_k = μ(X_{k-1}; θ) + L(X_{k-1}; θ) z_k. Under this change of variables
//! the baseline transition densities and the initial prior cancel against
//! the Jacobian, leaving a standard-normal law on the innovations; the
//! correction terms survive as likelihood weights, which is what makes the
//! expansion usable inside a sampler that only ever draws from the baseline.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expansion::{correction_pi_with_moments, log_taylor, CorrectionSpec};
use crate::inference::{ObservationMode, ObservationSet};
use crate::ldl::ldl_moments;
use crate::model::SdeModel;

const LN_2PI: f64 = 1.8378770664093453;

/// Priors for the augmented posterior: independent normals on log θ and on
/// the initial state coordinates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Priors {
    pub log_theta_mean: Vec<f64>,
    pub log_theta_sd: Vec<f64>,
    pub x0_mean: Vec<f64>,
    pub x0_sd: Vec<f64>,
}

impl Priors {
    /// Reference choice for the FitzHugh-Nagumo model: log θ_i ~ N(0,1) and
    /// initial state N(0, 0.1²) ⊗ N(0, 0.2²).
    pub fn fhn_default() -> Self {
        Priors {
            log_theta_mean: vec![0.0; 4],
            log_theta_sd: vec![1.0; 4],
            x0_mean: vec![0.0, 0.0],
            x0_sd: vec![0.1, 0.2],
        }
    }

    pub fn validate(&self, n_theta: usize, n_state: usize) -> Result<()> {
        if self.log_theta_mean.len() != n_theta || self.log_theta_sd.len() != n_theta {
            return Err(Error::input("theta prior length mismatch"));
        }
        if self.x0_mean.len() != n_state || self.x0_sd.len() != n_state {
            return Err(Error::input("initial-state prior length mismatch"));
        }
        if self
            .log_theta_sd
            .iter()
            .chain(&self.x0_sd)
            .any(|s| !(*s > 0.0))
        {
            return Err(Error::input("prior standard deviations must be positive"));
        }
        Ok(())
    }
}

/// MCMC state: log-parameters, innovation block and the posterior value
/// they produce. `step_scales` carries the per-block proposal scales
/// (θ block first, then one per latent window).
#[derive(Debug, Clone)]
pub struct ChainState {
    pub log_theta: Vec<f64>,
    /// (n+1)·N innovations: block 0 generates X_0 through the initial prior,
    /// block k ≥ 1 generates X_k through the baseline transition
    pub latents: Vec<f64>,
    pub log_post: f64,
    pub step_scales: Vec<f64>,
}

/// Deterministic reconstruction of the hidden path with per-term logs, so a
/// proposal touching innovations from block t onward only recomputes the
/// suffix.
#[derive(Debug, Clone)]
pub struct NonCentredPath {
    pub states: Vec<DVector<f64>>,
    /// T_{J'}(π_k) for transition k (index k-1)
    corr: Vec<f64>,
    /// baseline transition log-density of the realized step (index k-1)
    base_ll: Vec<f64>,
    /// log p(Y_k | X_k) per observation
    obs_ll: Vec<f64>,
}

impl NonCentredPath {
    pub fn build<M: SdeModel + ?Sized>(
        spec: &CorrectionSpec,
        model: &M,
        obs: &ObservationSet,
        priors: &Priors,
        latents: &[f64],
    ) -> Result<Self> {
        let n = obs.n_transitions();
        let dim = model.dims().n_total;
        if latents.len() != (n + 1) * dim {
            return Err(Error::input("latent block has wrong length"));
        }
        let mut path = NonCentredPath {
            states: vec![DVector::zeros(dim); n + 1],
            corr: vec![0.0; n],
            base_ll: vec![0.0; n],
            obs_ll: vec![0.0; n + 1],
        };
        path.recompute_from(spec, model, obs, priors, latents, 0)?;
        Ok(path)
    }

    /// Recomputes states and per-term logs for blocks `from..`, assuming
    /// everything before `from` matches the given innovations.
    pub fn recompute_from<M: SdeModel + ?Sized>(
        &mut self,
        spec: &CorrectionSpec,
        model: &M,
        obs: &ObservationSet,
        priors: &Priors,
        latents: &[f64],
        from: usize,
    ) -> Result<()> {
        let n = obs.n_transitions();
        let dim = model.dims().n_total;
        let dt = obs.dt();
        let noise_sd = match obs.mode {
            ObservationMode::NoisyFirstCoordinate { noise_sd } => noise_sd,
            ObservationMode::FullState => {
                return Err(Error::input("non-centred path requires noisy observations"))
            }
        };

        for k in from..=n {
            let block = &latents[k * dim..(k + 1) * dim];
            if k == 0 {
                for i in 0..dim {
                    self.states[0][i] = priors.x0_mean[i] + priors.x0_sd[i] * block[i];
                }
                self.corr_obs_at(0, noise_sd, obs);
                continue;
            }
            let prev = self.states[k - 1].clone();
            if !prev.iter().all(|v| v.is_finite()) {
                return Err(Error::Degenerate {
                    index: k,
                    min_eigenvalue: f64::NAN,
                });
            }
            let moments = ldl_moments(model, &prev, dt)?;
            let z = DVector::from_column_slice(block);
            self.states[k] = moments.map_noise(&z);
            let quad: f64 = block.iter().map(|v| v * v).sum();
            self.base_ll[k - 1] =
                -0.5 * (dim as f64 * LN_2PI + moments.log_det() + quad);
            let pi = correction_pi_with_moments(spec, model, &moments, &prev, &self.states[k], dt)?;
            self.corr[k - 1] = log_taylor(pi, spec.taylor_order);
            self.corr_obs_at(k, noise_sd, obs);
        }
        Ok(())
    }

    /// Value of a θ-move that holds the states fixed (a centred update): the
    /// per-transition proxy logs and the innovations that regenerate the same
    /// states under `model`. Observation terms and the initial prior cancel
    /// in such a move, so they are not recomputed.
    pub fn centred_theta_eval<M: SdeModel + ?Sized>(
        &self,
        spec: &CorrectionSpec,
        model: &M,
        obs: &ObservationSet,
        priors: &Priors,
    ) -> Result<CentredEval> {
        let n = obs.n_transitions();
        let dim = model.dims().n_total;
        let dt = obs.dt();
        let mut latents = Vec::with_capacity((n + 1) * dim);
        for i in 0..dim {
            latents.push((self.states[0][i] - priors.x0_mean[i]) / priors.x0_sd[i]);
        }
        let mut corr = vec![0.0; n];
        let mut base_ll = vec![0.0; n];
        for k in 1..=n {
            let prev = &self.states[k - 1];
            let moments = ldl_moments(model, prev, dt)?;
            let z = moments.unmap_state(&self.states[k]);
            let quad: f64 = z.iter().map(|v| v * v).sum();
            base_ll[k - 1] = -0.5 * (dim as f64 * LN_2PI + moments.log_det() + quad);
            let pi =
                correction_pi_with_moments(spec, model, &moments, prev, &self.states[k], dt)?;
            corr[k - 1] = log_taylor(pi, spec.taylor_order);
            latents.extend(z.iter());
        }
        Ok(CentredEval {
            latents,
            corr,
            base_ll,
        })
    }

    /// Sum of the proxy transition logs along the stored path.
    pub fn transition_terms(&self) -> f64 {
        let mut acc = 0.0;
        for (b, c) in self.base_ll.iter().zip(&self.corr) {
            acc += b + c;
        }
        acc
    }

    /// Installs the outcome of an accepted centred θ-move.
    pub fn apply_centred(&mut self, eval: &CentredEval) {
        self.corr.clone_from(&eval.corr);
        self.base_ll.clone_from(&eval.base_ll);
    }

    fn corr_obs_at(&mut self, k: usize, noise_sd: f64, obs: &ObservationSet) {
        let resid = obs.row(k)[0] - self.states[k][0];
        self.obs_ll[k] =
            -0.5 * (LN_2PI + 2.0 * noise_sd.ln() + (resid / noise_sd) * (resid / noise_sd));
    }

    /// Observation and correction log-terms summed in index order.
    pub fn data_terms(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.obs_ll {
            acc += v;
        }
        for v in &self.corr {
            acc += v;
        }
        acc
    }

    /// Recovers the innovations that regenerate the stored states.
    pub fn latents_from_states<M: SdeModel + ?Sized>(
        model: &M,
        obs: &ObservationSet,
        priors: &Priors,
        states: &[DVector<f64>],
    ) -> Result<Vec<f64>> {
        let dim = model.dims().n_total;
        let dt = obs.dt();
        let mut z = Vec::with_capacity(states.len() * dim);
        for i in 0..dim {
            z.push((states[0][i] - priors.x0_mean[i]) / priors.x0_sd[i]);
        }
        for k in 1..states.len() {
            let moments = ldl_moments(model, &states[k - 1], dt)?;
            z.extend(moments.unmap_state(&states[k]).iter());
        }
        Ok(z)
    }
}

/// Per-transition logs and innovations of a fixed-state θ-move.
#[derive(Debug, Clone)]
pub struct CentredEval {
    pub latents: Vec<f64>,
    pub corr: Vec<f64>,
    pub base_ll: Vec<f64>,
}

impl CentredEval {
    /// Σ (baseline + correction) over transitions.
    pub fn transition_terms(&self) -> f64 {
        let mut acc = 0.0;
        for (b, c) in self.base_ll.iter().zip(&self.corr) {
            acc += b + c;
        }
        acc
    }
}

/// Log-density of independent standard normals.
fn std_normal_logpdf(z: &[f64]) -> f64 {
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (z.len() as f64 * LN_2PI + quad)
}

/// Augmented log-posterior of a chain state under the proxy substitution.
/// Numeric failures (degenerate baselines, overflow) map to -∞ so the
/// sampler simply rejects such proposals.
pub fn log_posterior<M: SdeModel>(
    spec: &CorrectionSpec,
    model: &M,
    obs: &ObservationSet,
    state: &ChainState,
    priors: &Priors,
) -> Result<f64> {
    let n_theta = model.theta().len();
    priors.validate(n_theta, model.dims().n_total)?;
    if state.log_theta.len() != n_theta {
        return Err(Error::input("log_theta has wrong length"));
    }
    let theta: Vec<f64> = state.log_theta.iter().map(|e| e.exp()).collect();
    let themed = match model.with_theta(&theta) {
        Ok(m) => m,
        Err(_) => return Ok(f64::NEG_INFINITY),
    };
    let path = match NonCentredPath::build(spec, &themed, obs, priors, &state.latents) {
        Ok(p) => p,
        Err(Error::Input(msg)) => return Err(Error::Input(msg)),
        Err(_) => return Ok(f64::NEG_INFINITY),
    };

    let mut lp = path.data_terms();
    lp += std_normal_logpdf(&state.latents);
    for i in 0..n_theta {
        let resid = (state.log_theta[i] - priors.log_theta_mean[i]) / priors.log_theta_sd[i];
        lp += -0.5 * (LN_2PI + resid * resid) - priors.log_theta_sd[i].ln();
    }
    if lp.is_finite() {
        Ok(lp)
    } else {
        Ok(f64::NEG_INFINITY)
    }
}
