//! Proxy log-likelihood of a fully observed chain.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::{density_proxy, CorrectionSpec};
use crate::inference::{ObservationMode, ObservationSet};
use crate::linalg::pairwise_sum;
use crate::model::SdeModel;

/// Σ_k log p̃(X_{k-1}, X_k; θ) over all transitions of a fully observed
/// chain. Evaluations are independent across transitions and summed in a
/// fixed pairwise order.
pub fn log_likelihood<M: SdeModel + Sync + ?Sized>(
    spec: &CorrectionSpec,
    model: &M,
    obs: &ObservationSet,
) -> Result<f64> {
    if obs.mode != ObservationMode::FullState {
        return Err(Error::input("log_likelihood requires full-state observations"));
    }
    let n = model.dims().n_total;
    if obs.row(0).len() != n {
        return Err(Error::Input(format!(
            "observations have width {}, model expects {}",
            obs.row(0).len(),
            n
        )));
    }
    let dt = obs.dt();
    let terms: Vec<f64> = (1..=obs.n_transitions())
        .into_par_iter()
        .map(|k| {
            let x = DVector::from_column_slice(obs.row(k - 1));
            let y = DVector::from_column_slice(obs.row(k));
            density_proxy(spec, model, &x, &y, dt)
                .map(|r| r.log_proxy)
                .map_err(|e| match e {
                    Error::Degenerate { min_eigenvalue, .. } => Error::Degenerate {
                        index: k,
                        min_eigenvalue,
                    },
                    other => other,
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Variant;
    use crate::model::{Fhn, FhnParams, LinearSde, SdeModel};
    use crate::simulate::{simulate_endpoints, SimConfig};
    use approx::assert_relative_eq;

    fn ou_data(n: usize, dt: f64, seed: u64) -> ObservationSet {
        // exact OU transitions, sampled sequentially
        use rand::prelude::*;
        use rand_distr::StandardNormal;
        let (rate, vol) = (0.8, 0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.7;
        let mut rows = vec![vec![x]];
        let mut times = vec![0.0];
        for k in 1..=n {
            let mean = x * (-rate * dt as f64).exp();
            let var = vol * vol * (1.0 - (-2.0 * rate * dt).exp()) / (2.0 * rate);
            x = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            rows.push(vec![x]);
            times.push(k as f64 * dt);
        }
        ObservationSet::new(times, rows, ObservationMode::FullState).unwrap()
    }

    #[test]
    fn matches_exact_gaussian_chain_likelihood() {
        let obs = ou_data(200, 0.3, 8);
        let model = LinearSde::diag_ou(&[0.8], &[0.5]).unwrap();
        let spec = CorrectionSpec::with_order(5, Variant::ExactLinear).unwrap();
        let got = log_likelihood(&spec, &model, &obs).unwrap();

        let (rate, vol) = (0.8, 0.5);
        let dt = obs.dt();
        let mut expect = 0.0;
        for k in 1..=obs.n_transitions() {
            let x = obs.row(k - 1)[0];
            let y = obs.row(k)[0];
            let mean = x * (-rate * dt as f64).exp();
            let var = vol * vol * (1.0 - (-2.0 * rate * dt).exp()) / (2.0 * rate);
            expect += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (y - mean).powi(2) / var);
        }
        assert_relative_eq!(got, expect, epsilon = 1e-10);
    }

    #[test]
    fn short_chain_reduces_to_baseline_sum() {
        // identical consecutive states at small Δ with J = 2: the likelihood
        // is exactly the sum of baseline log-densities
        let model = Fhn::new(FhnParams::new(0.1, 1.2, 0.3, 0.8, 0.01).unwrap());
        let x = vec![-0.1, 0.2];
        let dt = 1e-3;
        let obs = ObservationSet::new(
            vec![0.0, dt, 2.0 * dt],
            vec![x.clone(), x.clone(), x.clone()],
            ObservationMode::FullState,
        )
        .unwrap();
        let spec = CorrectionSpec::with_order(2, Variant::Full).unwrap();
        let got = log_likelihood(&spec, &model, &obs).unwrap();

        let xv = nalgebra::DVector::from_column_slice(&x);
        let m = crate::ldl::ldl_moments(&model, &xv, dt).unwrap();
        assert_relative_eq!(got, 2.0 * m.logpdf(&xv), epsilon = 1e-12);
    }

    #[test]
    fn matches_independent_transition_loop_on_fhn_data() {
        // simulate a short FHN chain by stitching fine-EM endpoints
        let model = Fhn::new(FhnParams::new(0.1, 1.2, 0.3, 0.8, 0.01).unwrap());
        let dt = 0.05;
        let mut x = nalgebra::DVector::from_column_slice(&[-0.1, 0.2]);
        let mut rows = vec![x.as_slice().to_vec()];
        let mut times = vec![0.0];
        for k in 1..=50usize {
            let cfg = SimConfig {
                n_paths: 1,
                substeps: 100,
                seed: 1000 + k as u64,
            };
            let ends = simulate_endpoints(&model, &x, dt, &cfg).unwrap();
            x = nalgebra::DVector::from_column_slice(ends.row(0));
            rows.push(x.as_slice().to_vec());
            times.push(k as f64 * dt);
        }
        let obs = ObservationSet::new(times, rows, ObservationMode::FullState).unwrap();
        let spec = CorrectionSpec::with_order(5, Variant::Full).unwrap();
        let fast = log_likelihood(&spec, &model, &obs).unwrap();

        // redundant direct path: sequential loop over transitions
        let mut slow = 0.0;
        for k in 1..=obs.n_transitions() {
            let a = nalgebra::DVector::from_column_slice(obs.row(k - 1));
            let b = nalgebra::DVector::from_column_slice(obs.row(k));
            slow += density_proxy(&spec, &model, &a, &b, dt).unwrap().log_proxy;
        }
        assert_relative_eq!(fast, slow, epsilon = 1e-10);
    }

    #[test]
    fn rejects_noisy_mode() {
        let obs = ObservationSet::new(
            vec![0.0, 0.1, 0.2],
            vec![vec![0.0], vec![0.1], vec![0.0]],
            ObservationMode::NoisyFirstCoordinate { noise_sd: 0.01 },
        )
        .unwrap();
        let model = LinearSde::diag_ou(&[1.0], &[1.0]).unwrap();
        let spec = CorrectionSpec::with_order(2, Variant::ExactLinear).unwrap();
        assert!(log_likelihood(&spec, &model, &obs).is_err());
    }
}
