//! Experiment configuration: one JSON file per run, schema-checked with
//! unknown keys rejected so typos fail loudly instead of silently running a
//! default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdex_core::inference::{ObservationMode, Priors, RwmConfig};
use sdex_core::{
    CorrectionSpec, Fhn, FhnParams, GridSpec, Langevin, LinearSde, SdeModel, SimConfig, Variant,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// correction family; defaults to the natural one for the model
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default = "default_order_j")]
    pub order_j: u32,
    #[serde(default = "default_taylor_order")]
    pub taylor_order: u32,
    pub dt: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_sim")]
    pub sim: SimConfig,
    /// orders evaluated by `compare`
    #[serde(default = "default_orders")]
    pub compare_orders: Vec<u32>,
    /// also run a doubled-path benchmark and report the KDE noise floor
    #[serde(default)]
    pub noise_floor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_order_j() -> u32 {
    5
}
fn default_taylor_order() -> u32 {
    2
}
fn default_sim() -> SimConfig {
    SimConfig {
        n_paths: 1_000_000,
        substeps: 100,
        seed: 1,
    }
}
fn default_orders() -> Vec<u32> {
    vec![2, 3, 4, 5]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// "fhn", "fhn-partial", "langevin" or "linear"
    pub name: String,
    /// fhn: [epsilon, gamma, beta, sigma]; langevin: [alpha, kappa, sigma];
    /// linear: [rates.., vols..] (diagonal OU)
    pub theta: Vec<f64>,
    /// FHN stimulus, signed
    #[serde(default)]
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObsModeName {
    FullState,
    NoisyFirstCoordinate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub mode: ObsModeName,
    /// measurement noise level; required in noisy mode
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    /// observations CSV ("t,y1[,y2]" with header), relative to the config
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// number of transitions generated by `simulate`
    #[serde(default = "default_n_obs")]
    pub n_observations: usize,
    #[serde(default = "default_iters")]
    pub iterations: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_inference_seed")]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Priors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mle_init: Option<Vec<f64>>,
    #[serde(default = "default_budget")]
    pub mle_budget: usize,
}

fn default_n_obs() -> usize {
    100
}
fn default_iters() -> usize {
    8000
}
fn default_warmup() -> usize {
    4000
}
fn default_inference_seed() -> u64 {
    1
}
fn default_window() -> usize {
    10
}
fn default_stride() -> usize {
    5
}
fn default_budget() -> usize {
    4000
}

impl InferenceConfig {
    pub fn rwm_config(&self) -> RwmConfig {
        RwmConfig {
            n_iters: self.iterations,
            n_warmup: self.warmup,
            seed: self.seed,
            window: self.window,
            stride: self.stride,
        }
    }

    pub fn observation_mode(&self) -> Result<ObservationMode, String> {
        match self.mode {
            ObsModeName::FullState => Ok(ObservationMode::FullState),
            ObsModeName::NoisyFirstCoordinate => {
                let noise_sd = self
                    .noise_sd
                    .ok_or("noisy-first-coordinate mode requires noise_sd")?;
                Ok(ObservationMode::NoisyFirstCoordinate { noise_sd })
            }
        }
    }
}

/// Concrete model instances behind the name strings.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Fhn(Fhn),
    Langevin(Langevin),
    Linear(LinearSde),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.build_model()?;
        self.correction_spec()?;
        if !(self.dt > 0.0) {
            return Err("dt must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dt) {
            eprintln!(
                "warning: dt = {} lies outside (0, 1); the expansion is tuned for sub-unit steps",
                self.dt
            );
        }
        if self.compare_orders.iter().any(|j| !(2..=5).contains(j)) {
            return Err("compare_orders entries must lie in 2..=5".into());
        }
        self.sim.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelChoice, String> {
        let m = &self.model;
        let model = match m.name.as_str() {
            "fhn" | "fhn-partial" => {
                if m.theta.len() != 4 {
                    return Err("fhn expects theta = [epsilon, gamma, beta, sigma]".into());
                }
                let params = FhnParams::new(m.theta[0], m.theta[1], m.theta[2], m.theta[3], m.s)
                    .map_err(|e| e.to_string())?;
                if m.name == "fhn" {
                    ModelChoice::Fhn(Fhn::new(params))
                } else {
                    ModelChoice::Fhn(Fhn::partial(params))
                }
            }
            "langevin" => {
                if m.theta.len() != 3 {
                    return Err("langevin expects theta = [alpha, kappa, sigma]".into());
                }
                ModelChoice::Langevin(
                    Langevin::new(m.theta[0], m.theta[1], m.theta[2])
                        .map_err(|e| e.to_string())?,
                )
            }
            "linear" => {
                if m.theta.is_empty() || m.theta.len() % 2 != 0 {
                    return Err("linear expects theta = [rates.., vols..]".into());
                }
                let half = m.theta.len() / 2;
                ModelChoice::Linear(
                    LinearSde::diag_ou(&m.theta[..half], &m.theta[half..])
                        .map_err(|e| e.to_string())?,
                )
            }
            other => return Err(format!("unknown model `{other}`")),
        };
        let n = match &model {
            ModelChoice::Fhn(m) => m.dims().n_total,
            ModelChoice::Langevin(m) => m.dims().n_total,
            ModelChoice::Linear(m) => m.dims().n_total,
        };
        if self.x0.len() != n {
            return Err(format!("x0 has length {}, model needs {n}", self.x0.len()));
        }
        Ok(model)
    }

    pub fn correction_spec(&self) -> Result<CorrectionSpec, String> {
        let variant = match self.variant {
            Some(v) => v,
            None => CorrectionSpec::variant_for(&self.model.name).map_err(|e| e.to_string())?,
        };
        CorrectionSpec::new(self.order_j, self.taylor_order, variant).map_err(|e| e.to_string())
    }

    pub fn priors(&self) -> Priors {
        self.inference
            .as_ref()
            .and_then(|i| i.priors.clone())
            .unwrap_or_else(Priors::fhn_default)
    }

    /// Applies command-line overrides, yielding the resolved config that is
    /// written next to the artifacts.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> ExperimentConfig {
        if let Some(seed) = seed {
            self.sim.seed = seed;
            if let Some(inf) = self.inference.as_mut() {
                inf.seed = seed;
            }
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        self
    }
}
