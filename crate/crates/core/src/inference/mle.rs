//! Nelder-Mead maximum likelihood in log-parameter space.
//!
//! Positivity of every parameter is enforced by optimising over η = log θ,
//! so no constrained optimisation is needed.

use crate::error::{Error, Result};
use crate::expansion::CorrectionSpec;
use crate::inference::{log_likelihood, ObservationSet};
use crate::model::SdeModel;

/// Fit summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MleFit {
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Proxy-likelihood MLE for a fully observed chain, starting at `init`.
///
/// Convergence: simplex diameter below 1e-6 in log-parameter space;
/// otherwise the evaluation budget is exhausted with `converged = false`.
pub fn mle_fit<M: SdeModel + Sync>(
    spec: &CorrectionSpec,
    model: &M,
    obs: &ObservationSet,
    init: &[f64],
    budget: usize,
) -> Result<MleFit> {
    if init.len() != model.theta().len() {
        return Err(Error::input("initial theta has wrong length"));
    }
    if init.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::input("initial theta must be positive and finite"));
    }

    let mut evals = 0usize;
    let mut objective = |eta: &[f64]| -> f64 {
        evals += 1;
        let theta: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        match model.with_theta(&theta) {
            Ok(m) => match log_likelihood(spec, &m, obs) {
                Ok(ll) if ll.is_finite() => -ll,
                _ => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };

    let init_eta: Vec<f64> = init.iter().map(|v| v.ln()).collect();
    let nm = nelder_mead(&mut objective, &init_eta, 0.1, 1e-6, budget)?;
    Ok(MleFit {
        theta_hat: nm.best.iter().map(|e| e.exp()).collect(),
        loglik: -nm.best_value,
        evals,
        converged: nm.converged,
    })
}

pub(crate) struct NmResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub converged: bool,
}

/// Plain Nelder-Mead (reflection 1, expansion 2, contraction ½, shrink ½)
/// over an orthogonal initial simplex with the given edge length.
pub(crate) fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    edge: f64,
    diameter_tol: f64,
    budget: usize,
) -> Result<NmResult> {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += edge;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::Fit(
            "objective is non-finite on every initial simplex vertex".into(),
        ));
    }
    let mut used = dim + 1;
    let mut converged = false;

    while used < budget {
        // sort ascending by value
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ordered_vals;

        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diameter < diameter_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let combine = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + a * (c - w))
                .collect()
        };

        let reflected = combine(1.0);
        let fr = f(&reflected);
        used += 1;
        if fr < values[0] {
            let expanded = combine(2.0);
            let fe = f(&expanded);
            used += 1;
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            let contracted = combine(-0.5);
            let fc = f(&contracted);
            used += 1;
            if fc < values[dim] {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
                used += dim;
            }
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if values[i] < values[best] {
            best = i;
        }
    }
    Ok(NmResult {
        best: simplex[best].clone(),
        best_value: values[best],
        converged,
    })
}
