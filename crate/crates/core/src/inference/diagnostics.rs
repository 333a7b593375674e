//! Chain convergence summaries: split R-hat, bulk and tail effective sample
//! sizes, plus the 1-Wasserstein distance used to compare posteriors.

use serde::Serialize;

/// Per-parameter convergence summary over a set of chains.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub r_hat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub ess_tail: Vec<f64>,
    /// set when any parameter misses R-hat < 1.01 or ESS > 400
    pub warning: bool,
}

impl Diagnostics {
    pub fn compute(names: &[String], chains_per_param: &[Vec<Vec<f64>>]) -> Self {
        let mut r_hat = Vec::new();
        let mut bulk = Vec::new();
        let mut tail = Vec::new();
        for chains in chains_per_param {
            let views: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
            r_hat.push(split_r_hat(&views));
            bulk.push(ess_bulk(&views));
            tail.push(ess_tail(&views));
        }
        let warning = r_hat.iter().any(|&r| !(r < 1.01))
            || bulk.iter().chain(&tail).any(|&e| !(e > 400.0));
        Diagnostics {
            names: names.to_vec(),
            r_hat,
            ess_bulk: bulk,
            ess_tail: tail,
            warning,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64], m: f64) -> f64 {
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    // truncate to a common length so unequal-length chains stay comparable
    let min_len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let n = min_len / 2;
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(c[..n].to_vec());
        halves.push(c[n..2 * n].to_vec());
    }
    halves
}

/// Split R-hat: each chain halved, then sqrt(var+ / W).
pub fn split_r_hat(chains: &[&[f64]]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return f64::NAN;
    }
    let halves = split(chains);
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(c, &mu)| variance(c, mu))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Bulk effective sample size via the initial-monotone pairwise
/// autocorrelation sum over split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 8) {
        return f64::NAN;
    }
    let halves = split(chains);
    let n = halves[0].len();
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = halves.iter().zip(&means).map(|(c, &mu)| variance(c, mu)).collect();
    let w = vars.iter().sum::<f64>() / m;
    let grand = mean(&means);
    let b_over_n =
        means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if !(var_plus > 0.0) {
        return f64::NAN;
    }

    let autocov = |c: &[f64], mu: f64, t: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..c.len() - t {
            acc += (c[i] - mu) * (c[i + t] - mu);
        }
        acc / c.len() as f64
    };

    // Geyer: sum ρ over positive monotone pairs
    let mut tau = 1.0;
    let mut t = 1usize;
    let mut prev_pair = f64::INFINITY;
    while t + 1 < n {
        let mut rho_t = 0.0;
        let mut rho_t1 = 0.0;
        for (c, &mu) in halves.iter().zip(&means) {
            rho_t += autocov(c, mu, t);
            rho_t1 += autocov(c, mu, t + 1);
        }
        let rho_t = 1.0 - (w - rho_t / m) / var_plus;
        let rho_t1 = 1.0 - (w - rho_t1 / m) / var_plus;
        let pair = rho_t + rho_t1;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
        t += 2;
    }
    m * n as f64 / tau
}

/// Tail ESS: minimum bulk ESS of the 5% and 95% quantile indicator chains.
pub fn ess_tail(chains: &[&[f64]]) -> f64 {
    if chains.is_empty() {
        return f64::NAN;
    }
    let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| pooled[((pooled.len() - 1) as f64 * p) as usize];
    let (q05, q95) = (q(0.05), q(0.95));

    let indicator = |cut: f64, below: bool| -> f64 {
        let ind: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&x| if (x <= cut) == below { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let views: Vec<&[f64]> = ind.iter().map(|c| c.as_slice()).collect();
        ess_bulk(&views)
    };
    indicator(q05, true).min(indicator(q95, false))
}

/// 1-Wasserstein distance between two empirical distributions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if sa.len() == sb.len() {
        return sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / sa.len() as f64;
    }
    // quantile coupling on a fixed grid for unequal sizes
    let k = 512;
    let quant = |s: &[f64], p: f64| -> f64 {
        let pos = p * (s.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < s.len() {
            s[i] * (1.0 - frac) + s[i + 1] * frac
        } else {
            s[i]
        }
    };
    (0..k)
        .map(|i| {
            let p = (i as f64 + 0.5) / k as f64;
            (quant(&sa, p) - quant(&sb, p)).abs()
        })
        .sum::<f64>()
        / k as f64
}
