//! Subcommand implementations: experiment config in, CSV/JSON artifacts out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use serde_json::json;

use sdex_core::inference::{
    log_likelihood, mle_fit, rwm_sample, ObservationMode, ObservationSet,
};
use sdex_core::{
    abs_error_grid, check_hormander, density_proxy_with_moments, kde_density, ldl_moments,
    simulate_endpoints, CorrectionSpec, DensityGrid, Error as CoreError, GridSpec, SdeModel,
    SimConfig,
};

use crate::config::{ExperimentConfig, ObsModeName};
use crate::io;

/// Command failure with the process exit code it maps to.
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn config(message: impl Into<String>) -> Self {
        CmdError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn from_core(err: CoreError) -> Self {
        let code = match err {
            CoreError::Degenerate { .. }
            | CoreError::Diverged { .. }
            | CoreError::Startup(_)
            | CoreError::Fit(_) => 3,
            _ => 2,
        };
        CmdError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        CmdError::from_core(e)
    }
}

impl From<String> for CmdError {
    fn from(message: String) -> Self {
        CmdError::config(message)
    }
}

type CmdResult = Result<(), CmdError>;

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn write_resolved_config(cfg: &ExperimentConfig) -> CmdResult {
    let value = serde_json::to_value(cfg).map_err(|e| CmdError::config(e.to_string()))?;
    io::write_json(&out_path(cfg, "resolved_config.json"), &value)?;
    Ok(())
}

/// Evaluates the proxy on explicit nodes; the baseline moments are computed
/// once since they depend only on the start state.
fn proxy_grid<M: SdeModel + Sync>(
    spec: &CorrectionSpec,
    model: &M,
    x0: &DVector<f64>,
    dt: f64,
    x_nodes: Vec<f64>,
    y_nodes: Vec<f64>,
) -> Result<(DensityGrid, usize), CoreError> {
    let moments = ldl_moments(model, x0, dt)?;
    let mut values = Vec::with_capacity(x_nodes.len() * y_nodes.len());
    let mut negative_raw = 0usize;
    for &x in &x_nodes {
        for &y in &y_nodes {
            let res = density_proxy_with_moments(
                spec,
                model,
                &moments,
                x0,
                &DVector::from_column_slice(&[x, y]),
                dt,
            )?;
            if res.raw < 0.0 {
                negative_raw += 1;
            }
            values.push(res.log_proxy.exp());
        }
    }
    let grid = DensityGrid::new(x_nodes, y_nodes, values)?;
    Ok((grid, negative_raw))
}

/// Grid nodes for a proxy-only run: configured bounds, or mean ± 5 baseline
/// standard deviations.
fn proxy_nodes<M: SdeModel + Sync>(
    cfg: &ExperimentConfig,
    model: &M,
    x0: &DVector<f64>,
) -> Result<(Vec<f64>, Vec<f64>), CmdError> {
    match cfg.grid.bounds {
        Some(_) => Ok(cfg.grid.materialize(None)?),
        None => {
            let m = ldl_moments(model, x0, cfg.dt)?;
            let sx = m.cov[(0, 0)].sqrt();
            let sy = m.cov[(1, 1)].sqrt();
            let spec = GridSpec::with_bounds(
                cfg.grid.nx,
                cfg.grid.ny,
                (
                    m.mean[0] - 5.0 * sx,
                    m.mean[0] + 5.0 * sx,
                    m.mean[1] - 5.0 * sy,
                    m.mean[1] + 5.0 * sy,
                ),
            );
            Ok(spec.materialize(None)?)
        }
    }
}

pub fn cmd_density<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let spec = cfg.correction_spec()?;
    let x0 = DVector::from_column_slice(&cfg.x0);
    let (x_nodes, y_nodes) = proxy_nodes(cfg, model, &x0)?;
    let (grid, negative_raw) = proxy_grid(&spec, model, &x0, cfg.dt, x_nodes, y_nodes)?;

    io::write_text(&out_path(cfg, "density.csv"), &io::grid_to_csv(&grid))?;
    io::write_json(
        &out_path(cfg, "normalization.json"),
        &json!({
            "mass": grid.mass(),
            "negative_raw_count": negative_raw,
            "order_j": spec.order_j,
            "taylor_order": spec.taylor_order,
            "variant": spec.variant,
            "dt": cfg.dt,
        }),
    )?;
    write_resolved_config(cfg)
}

pub fn cmd_compare<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let x0 = DVector::from_column_slice(&cfg.x0);
    let ends = simulate_endpoints(model, &x0, cfg.dt, &cfg.sim)?;
    let benchmark = kde_density(&ends, &cfg.grid, None)?;
    io::write_text(&out_path(cfg, "benchmark.csv"), &io::grid_to_csv(&benchmark))?;

    let noise_floor = if cfg.noise_floor {
        let doubled = SimConfig {
            n_paths: cfg.sim.n_paths * 2,
            substeps: cfg.sim.substeps,
            seed: cfg.sim.seed.wrapping_add(0x5eed),
        };
        let ends2 = simulate_endpoints(model, &x0, cfg.dt, &doubled)?;
        let bounds = (
            benchmark.x_nodes[0],
            *benchmark.x_nodes.last().unwrap(),
            benchmark.y_nodes[0],
            *benchmark.y_nodes.last().unwrap(),
        );
        let spec2 = GridSpec::with_bounds(cfg.grid.nx, cfg.grid.ny, bounds);
        let b2 = kde_density(&ends2, &spec2, None)?;
        Some(sdex_core::l1_error(&abs_error_grid(&benchmark, &b2)?))
    } else {
        None
    };

    let mut rows = Vec::new();
    for &j in &cfg.compare_orders {
        let spec = CorrectionSpec::new(j, cfg.taylor_order, cfg.correction_spec()?.variant)?;
        // timing: median of 5 grid evaluations, per node, excluding I/O
        let mut times = Vec::with_capacity(5);
        let mut result = None;
        for _ in 0..5 {
            let t0 = Instant::now();
            let out = proxy_grid(
                &spec,
                model,
                &x0,
                cfg.dt,
                benchmark.x_nodes.clone(),
                benchmark.y_nodes.clone(),
            )?;
            times.push(t0.elapsed().as_secs_f64());
            result = Some(out);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (grid, negative_raw) = result.unwrap();
        let per_node = times[2] / grid.values.len() as f64;

        let err = abs_error_grid(&grid, &benchmark)?;
        let l1 = sdex_core::l1_error(&err);
        io::write_text(&out_path(cfg, &format!("error_j{j}.csv")), &io::grid_to_csv(&err))?;
        io::write_text(&out_path(cfg, &format!("proxy_j{j}.csv")), &io::grid_to_csv(&grid))?;
        rows.push(json!({
            "order_j": j,
            "l1": l1,
            "seconds_per_node": per_node,
            "negative_raw_count": negative_raw,
            "proxy_mass": grid.mass(),
        }));
    }

    io::write_json(
        &out_path(cfg, "report.json"),
        &json!({
            "orders": rows,
            "benchmark_mass": benchmark.mass(),
            "noise_floor_l1": noise_floor,
            "n_paths": cfg.sim.n_paths,
            "substeps": cfg.sim.substeps,
            "dt": cfg.dt,
            "excluded_paths": ends.n_excluded,
        }),
    )?;
    write_resolved_config(cfg)
}

pub fn cmd_simulate<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let inf = cfg
        .inference
        .as_ref()
        .ok_or_else(|| CmdError::config("simulate needs an `inference` block"))?;
    let n = model.dims().n_total;
    let d = model.dims().n_noise;
    let h = cfg.dt / cfg.sim.substeps as f64;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.sim.seed);
    let mut noise_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.sim.seed.wrapping_add(1));
    let mut state = cfg.x0.clone();
    let mut next = vec![0.0; n];
    let mut z = vec![0.0; d];
    let mut times = Vec::with_capacity(inf.n_observations + 1);
    let mut states = Vec::with_capacity(inf.n_observations + 1);
    times.push(0.0);
    states.push(state.clone());
    for k in 1..=inf.n_observations {
        for _ in 0..cfg.sim.substeps {
            for zi in z.iter_mut() {
                *zi = rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            model.em_step_into(&state, h, &z, &mut next);
            std::mem::swap(&mut state, &mut next);
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(CmdError {
                code: 3,
                message: format!("trajectory diverged at step {k}"),
            });
        }
        times.push(k as f64 * cfg.dt);
        states.push(state.clone());
    }

    let rows: Vec<Vec<f64>> = match inf.observation_mode()? {
        ObservationMode::FullState => states,
        ObservationMode::NoisyFirstCoordinate { noise_sd } => states
            .iter()
            .map(|s| vec![s[0] + noise_sd * noise_rng.sample::<f64, _>(rand_distr::StandardNormal)])
            .collect(),
    };
    io::write_text(
        &out_path(cfg, "observations.csv"),
        &io::observations_to_csv(&times, &rows),
    )?;
    write_resolved_config(cfg)
}

fn load_observations(
    cfg: &ExperimentConfig,
    expected: ObsModeName,
) -> Result<ObservationSet, CmdError> {
    let inf = cfg
        .inference
        .as_ref()
        .ok_or_else(|| CmdError::config("this command needs an `inference` block"))?;
    if inf.mode != expected {
        return Err(CmdError::config(format!(
            "inference.mode must be {:?} for this command",
            expected
        )));
    }
    let data = inf
        .data
        .as_ref()
        .ok_or_else(|| CmdError::config("inference.data (observations CSV) is required"))?;
    Ok(io::read_observations(Path::new(data), inf.observation_mode()?)?)
}

pub fn cmd_mle<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let inf = cfg.inference.as_ref().unwrap();
    let obs = load_observations(cfg, ObsModeName::FullState)?;
    let spec = cfg.correction_spec()?;
    let init = inf.mle_init.clone().unwrap_or_else(|| model.theta());
    let fit = mle_fit(&spec, model, &obs, &init, inf.mle_budget)?;
    let loglik_check = {
        let fitted = model.with_theta(&fit.theta_hat)?;
        log_likelihood(&spec, &fitted, &obs)?
    };
    io::write_json(
        &out_path(cfg, "mle.json"),
        &json!({
            "theta_names": model.theta_names(),
            "theta_hat": fit.theta_hat,
            "loglik": fit.loglik,
            "loglik_recomputed": loglik_check,
            "evals": fit.evals,
            "converged": fit.converged,
            "order_j": spec.order_j,
        }),
    )?;
    write_resolved_config(cfg)
}

pub fn cmd_mcmc<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let inf = cfg.inference.as_ref().unwrap();
    let obs = load_observations(cfg, ObsModeName::NoisyFirstCoordinate)?;
    let spec = cfg.correction_spec()?;
    let priors = cfg.priors();
    let out = rwm_sample(&spec, model, &obs, &priors, &inf.rwm_config())?;

    for (i, chain) in out.chains.iter().enumerate() {
        let mut csv = String::new();
        csv.push_str(&out.theta_names.join(","));
        csv.push_str(",log_post\n");
        for (row, lp) in chain.theta.iter().zip(&chain.log_post) {
            let mut line = row
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",");
            line.push_str(&format!(",{lp:?}\n"));
            csv.push_str(&line);
        }
        io::write_text(&out_path(cfg, &format!("chain_{}.csv", i + 1)), &csv)?;
    }

    let diag = &out.diagnostics;
    io::write_json(
        &out_path(cfg, "diagnostics.json"),
        &json!({
            "names": diag.names,
            "r_hat": diag.r_hat,
            "ess_bulk": diag.ess_bulk,
            "ess_tail": diag.ess_tail,
            "warning": diag.warning,
            "accept_theta": out.chains.iter().map(|c| c.accept_theta).collect::<Vec<_>>(),
            "accept_latent": out.chains.iter().map(|c| c.accept_latent).collect::<Vec<_>>(),
            "iterations": inf.iterations,
            "warmup": inf.warmup,
            "order_j": spec.order_j,
        }),
    )?;
    if diag.warning {
        eprintln!("warning: convergence criteria not met (R-hat < 1.01, ESS > 400)");
    }
    write_resolved_config(cfg)
}

pub fn cmd_check<M: SdeModel + Sync>(cfg: &ExperimentConfig, model: &M) -> CmdResult {
    let x0 = DVector::from_column_slice(&cfg.x0);
    let report = check_hormander(model, &x0, None)?;
    let moments = ldl_moments(model, &x0, cfg.dt)?;
    let min_eig = moments
        .cov
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    io::write_json(
        &out_path(cfg, "check.json"),
        &json!({
            "hormander": report,
            "cov_min_eigenvalue": min_eig,
            "cov_log_det": moments.log_det(),
            "mean": moments.mean.as_slice(),
            "dt": cfg.dt,
        }),
    )?;
    write_resolved_config(cfg)
}
