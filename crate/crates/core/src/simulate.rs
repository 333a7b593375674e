//! Euler-Maruyama path simulation for the reference density benchmark.
//!
//! Endpoints are simulated in parallel with one counter-derived RNG stream
//! per path, so the output depends on the seed and the path index only —
//! never on the number of worker threads. Accumulation happens over chunks
//! of fixed length concatenated in order for the same reason.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SdeModel;

/// Fixed chunk length for parallel path batches; part of the determinism
/// contract, not a tuning knob.
const CHUNK: usize = 8192;

/// Simulation settings for the benchmark sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Euler steps per observation interval; the scheme step is dt/substeps.
    pub substeps: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 || self.substeps < 1 {
            return Err(Error::input("sim config requires n_paths ≥ 1 and substeps ≥ 1"));
        }
        Ok(())
    }
}

/// One Euler-Maruyama step: x + V0(x) h + σ(x) √h z.
pub fn em_step<M: SdeModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    h: f64,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_state(x)?;
    if !(h > 0.0) {
        return Err(Error::input("em_step requires h > 0"));
    }
    if z.len() != model.dims().n_noise {
        return Err(Error::input("em_step: noise vector has wrong length"));
    }
    let mut out = DVector::zeros(x.len());
    model.em_step_into(x.as_slice(), h, z.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Endpoint sample of many independent paths, stored row-major.
#[derive(Debug, Clone)]
pub struct Endpoints {
    dim: usize,
    data: Vec<f64>,
    /// paths dropped because the state left the finite range
    pub n_excluded: usize,
}

impl Endpoints {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn from_rows(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % dim.max(1), 0);
        Endpoints {
            dim,
            data,
            n_excluded: 0,
        }
    }

    /// Per-coordinate sample mean and standard deviation.
    pub fn mean_sd(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; self.dim];
        for row in self.iter_rows() {
            for i in 0..self.dim {
                let d = row[i] - mean[i];
                var[i] += d * d;
            }
        }
        let sd = var.iter().map(|v| (v / n).sqrt()).collect();
        (mean, sd)
    }
}

/// RNG stream for one path: a fixed mix of the run seed and the path index.
fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    // splitmix64 on the combined counter; distinct inputs give distinct keys
    let mut v = seed ^ path.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    v = (v ^ (v >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    v = (v ^ (v >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    v ^= v >> 31;
    ChaCha8Rng::seed_from_u64(v)
}

/// Simulates `cfg.n_paths` independent paths of `substeps` Euler steps over
/// one interval `dt` and returns their endpoints. Diverged paths (non-finite
/// state) are dropped and counted; more than 0.1% of them is an error.
pub fn simulate_endpoints<M: SdeModel + Sync + ?Sized>(
    model: &M,
    x0: &DVector<f64>,
    dt: f64,
    cfg: &SimConfig,
) -> Result<Endpoints> {
    model.check_state(x0)?;
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::input("simulate_endpoints requires dt > 0"));
    }
    let n = model.dims().n_total;
    let d = model.dims().n_noise;
    let h = dt / cfg.substeps as f64;
    let x0s = x0.as_slice().to_vec();

    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<(Vec<f64>, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(cfg.n_paths);
            let mut out = Vec::with_capacity((hi - lo) * n);
            let mut excluded = 0usize;
            let mut cur = vec![0.0; n];
            let mut next = vec![0.0; n];
            let mut z = vec![0.0; d];
            for path in lo..hi {
                let mut rng = path_rng(cfg.seed, path as u64);
                cur.copy_from_slice(&x0s);
                let mut ok = true;
                for _ in 0..cfg.substeps {
                    for zi in z.iter_mut() {
                        *zi = rng.sample::<f64, _>(StandardNormal);
                    }
                    model.em_step_into(&cur, h, &z, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                    if !cur.iter().all(|v| v.is_finite()) {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    out.extend_from_slice(&cur);
                } else {
                    excluded += 1;
                }
            }
            (out, excluded)
        })
        .collect();

    let mut data = Vec::with_capacity(cfg.n_paths * n);
    let mut n_excluded = 0;
    for (part, excluded) in parts {
        data.extend_from_slice(&part);
        n_excluded += excluded;
    }

    let limit = cfg.n_paths / 1000;
    if n_excluded > limit {
        return Err(Error::Diverged {
            excluded: n_excluded,
            total: cfg.n_paths,
            limit,
        });
    }
    Ok(Endpoints {
        dim: n,
        data,
        n_excluded,
    })
}
