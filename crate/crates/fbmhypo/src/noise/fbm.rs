use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::path::SampledPath;
use crate::rng::{fill_normal, stream_rng};

/// `Cov(B_s, B_t) = (|s|^{2H} + |t|^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Exact Gaussian sampler for fBm at a fixed set of times via a dense
/// Cholesky factor. Times equal to 0 are pinned to 0.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    h: f64,
    n_times: usize,
    /// positions (in the caller's time list) of the non-zero times
    active: Vec<usize>,
    /// packed row-major lower-triangular factor
    chol: Vec<f64>,
}

impl FbmSampler {
    pub fn new(h: f64, times: &[f64]) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid(format!("Hurst index must lie in (0,1), got {h}")));
        }
        let active: Vec<usize> = (0..times.len()).filter(|&i| times[i] != 0.0).collect();
        let m = active.len();
        let cov = DMatrix::from_fn(m, m, |i, j| fbm_covariance(times[active[i]], times[active[j]], h));
        let l = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let eig = cov.symmetric_eigenvalues();
                let (lo, hi) = eig.iter().fold((f64::MAX, f64::MIN), |a, &v| (a.0.min(v), a.1.max(v)));
                return Err(Error::NotPositiveDefinite(format!(
                    "{m} points, H = {h}, eigenvalues in [{lo:e}, {hi:e}]"
                )));
            }
        };
        let mut chol = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in 0..=i {
                chol.push(l[(i, j)]);
            }
        }
        Ok(Self {
            h,
            n_times: times.len(),
            active,
            chol,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// One scalar sample at the sampler's times, using `z` as scratch.
    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut [f64], z: &mut Vec<f64>) {
        let m = self.active.len();
        z.resize(m, 0.0);
        fill_normal(rng, z, 1.0);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut off = 0;
        for i in 0..m {
            let row = &self.chol[off..off + i + 1];
            let s: f64 = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
            out[self.active[i]] = s;
            off += i + 1;
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.n_times];
        let mut z = Vec::new();
        self.sample_into(rng, &mut out, &mut z);
        out
    }
}

/// `n_paths` exact fBm samples on the grid `t0 + k dt`, `k = 0..=n_steps`,
/// each with `dim` independent components. The grid must contain 0, where
/// the paths are pinned. Path `p` uses stream `p` of `seed`.
pub fn fbm_sample_exact(
    h: f64,
    t0: f64,
    dt: f64,
    n_steps: usize,
    dim: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SampledPath>> {
    let times: Vec<f64> = (0..=n_steps).map(|k| t0 + k as f64 * dt).collect();
    let zero = times.iter().position(|t| t.abs() < 1e-9 * dt);
    let Some(zero) = zero else {
        return Err(invalid("fBm grid must contain t = 0"));
    };
    let mut times = times;
    times[zero] = 0.0;
    let sampler = FbmSampler::new(h, &times)?;
    let n = times.len();
    Ok((0..n_paths)
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let mut data = vec![0.0; n * dim];
            let mut col = vec![0.0; n];
            let mut z = Vec::new();
            for i in 0..dim {
                sampler.sample_into(&mut rng, &mut col, &mut z);
                for k in 0..n {
                    data[k * dim + i] = col[k];
                }
            }
            SampledPath::new(t0, dt, dim, data).expect("grid is valid")
        })
        .collect())
}

/// A realized past `ω(s) = B_s` on `[-n_past dt_past, 0]`, pinned at
/// `ω(0) = 0`, drawn exactly by reversing an fBm sample on `[0, T_past]`.
pub fn sample_past(h: f64, dt_past: f64, n_past: usize, dim: usize, seed: u64) -> Result<SampledPath> {
    Ok(sample_pasts(h, dt_past, n_past, dim, 1, seed)?.remove(0))
}

/// `n` independent pasts as in [`sample_past`]; past `p` uses stream `p`.
pub fn sample_pasts(h: f64, dt_past: f64, n_past: usize, dim: usize, n: usize, seed: u64) -> Result<Vec<SampledPath>> {
    let t0 = -(n_past as f64) * dt_past;
    Ok(fbm_sample_exact(h, 0.0, dt_past, n_past, dim, n, seed)?
        .into_iter()
        .map(|fwd| {
            let end = fwd.last().to_vec();
            let mut data = fwd.into_data();
            for (q, v) in data.iter_mut().enumerate() {
                *v -= end[q % dim];
            }
            SampledPath::new(t0, dt_past, dim, data).expect("grid is valid")
        })
        .collect())
}

