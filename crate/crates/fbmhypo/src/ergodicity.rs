//! Long-run experiments: samples of the conditional law of the solution
//! given a fixed past, distances between empirical marginals, and the
//! stationary variance of the fractional Ornstein-Uhlenbeck process.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::expr::VectorFieldSet;
use crate::flow::{FlowOptions, FlowSolver};
use crate::hormander::{DissipativityReport, RankReport};
use crate::noise::{ConditionedNoise, FbmSampler};
use crate::path::SampledPath;
use crate::rng::stream_rng;
use crate::stats::{Estimate, MeanAcc};

/// Samples of `X_t` at checkpoints for several initial conditions, all
/// driven by the same past and the same Wiener draws.
#[derive(Debug, Clone)]
pub struct LawSamples {
    pub checkpoints: Vec<f64>,
    pub n: usize,
    /// `data[ic][checkpoint]`: `n_kept × n` row-major
    pub data: Vec<Vec<Vec<f64>>>,
    /// draws dropped because some initial condition blew up
    pub failures: usize,
}

impl LawSamples {
    pub fn n_kept(&self) -> usize {
        self.data.first().and_then(|d| d.first()).map_or(0, |v| v.len() / self.n.max(1))
    }

    /// Coordinate `i` of the samples for initial condition `ic` at checkpoint `c`.
    pub fn coordinate(&self, ic: usize, c: usize, i: usize) -> Vec<f64> {
        self.data[ic][c].iter().skip(i).step_by(self.n).cloned().collect()
    }

    pub fn mean(&self, ic: usize, c: usize, i: usize) -> Estimate {
        self.coordinate(ic, c, i).into_iter().collect::<MeanAcc>().estimate()
    }
}

/// `{T/4, T/2, T}`.
pub fn default_checkpoints(t: f64) -> Vec<f64> {
    vec![0.25 * t, 0.5 * t, t]
}

/// Draw `n_mc` conditioned trajectories from each initial condition in
/// `x0s` on the noise horizon; path `p` uses stream `p` of `seed`.
pub fn conditional_law_sample(
    fields: &VectorFieldSet,
    x0s: &[Vec<f64>],
    noise: &ConditionedNoise,
    checkpoints: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<LawSamples> {
    if x0s.is_empty() {
        return Err(invalid("need at least one initial condition"));
    }
    if noise.dim() != fields.d() {
        return Err(Error::Dimension("noise dimension does not match the fields".into()));
    }
    let n = fields.n();
    let grid = SampledPath::zeros(0.0, noise.dt(), noise.n_steps(), 1);
    let idx: Vec<usize> = checkpoints
        .iter()
        .map(|&t| grid.index_of(t).ok_or_else(|| invalid(format!("checkpoint {t} is not on the noise grid"))))
        .collect::<Result<_>>()?;
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let per_path: Vec<Option<Vec<f64>>> = (0..n_mc)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let driver = noise.draw_driver(&mut rng);
            let mut row = Vec::with_capacity(x0s.len() * idx.len() * n);
            for x0 in x0s {
                let x = match solver.solve_state(x0, &driver) {
                    Ok(x) => x,
                    Err(Error::BlowUp { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                for &k in &idx {
                    row.extend_from_slice(x.value(k));
                }
            }
            Ok(Some(row))
        })
        .collect::<Result<_>>()?;
    let mut data = vec![vec![Vec::new(); idx.len()]; x0s.len()];
    let mut failures = 0;
    for row in per_path {
        let Some(row) = row else {
            failures += 1;
            continue;
        };
        for (ic, per_ic) in data.iter_mut().enumerate() {
            for (c, buf) in per_ic.iter_mut().enumerate() {
                let off = (ic * idx.len() + c) * n;
                buf.extend_from_slice(&row[off..off + n]);
            }
        }
    }
    Ok(LawSamples {
        checkpoints: checkpoints.to_vec(),
        n,
        data,
        failures,
    })
}

/// Per-coordinate distances between two empirical laws.
#[derive(Debug, Clone, PartialEq)]
pub struct Distances {
    pub ks: Vec<f64>,
    pub w1: Vec<f64>,
}

impl Distances {
    pub fn w1_total(&self) -> f64 {
        self.w1.iter().sum()
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1-Wasserstein distance between equal-size samples (sorted L¹).
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(0.5 * alpha).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// KS and W1 per coordinate; samples are `len × dim` row-major.
pub fn empirical_distance(a: &[f64], b: &[f64], dim: usize) -> Result<Distances> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("empty sample set"));
    }
    if a.len() != b.len() || dim == 0 || !a.len().is_multiple_of(dim) {
        return Err(Error::Dimension("sample sets must have equal size and a whole number of points".into()));
    }
    let col = |s: &[f64], i: usize| -> Vec<f64> { s.iter().skip(i).step_by(dim).cloned().collect() };
    let (mut ks, mut w1) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    for i in 0..dim {
        let (x, y) = (col(a, i), col(b, i));
        ks.push(ks_statistic(&x, &y));
        w1.push(wasserstein1(&x, &y));
    }
    Ok(Distances { ks, w1 })
}

/// `H Γ(2H)`: stationary variance of `dX = -X dt + dB^H`.
pub fn fou_stationary_variance_closed(h: f64) -> f64 {
    h * gamma(2.0 * h)
}

/// `Var X_S` for `X_0 = 0` with the kernel `e^{-(S-u)}` averaged over cells
/// of width `S / n_cells`, against the exact covariance of fBm increments.
fn fou_variance_cells(h: f64, s: f64, n_cells: usize) -> f64 {
    let dt = s / n_cells as f64;
    let k: Vec<f64> = (0..n_cells)
        .map(|i| {
            let (a, b) = (i as f64 * dt, (i + 1) as f64 * dt);
            ((-(s - b)).exp() - (-(s - a)).exp()) / dt
        })
        .collect();
    let rho = |m: usize| {
        let m = m as f64;
        0.5 * ((m + 1.0).powf(2.0 * h) + (m - 1.0).abs().powf(2.0 * h) - 2.0 * m.powf(2.0 * h))
    };
    let mut total = 0.0;
    for m in 0..n_cells {
        let lag: f64 = (0..n_cells - m).map(|i| k[i] * k[i + m]).sum();
        total += if m == 0 { 1.0 } else { 2.0 } * rho(m) * lag;
    }
    total * dt.powf(2.0 * h)
}

/// Stationary variance of the fractional OU process by direct summation of
/// the double integral at `S = 30`, Richardson-extrapolated in the cell size.
pub fn fou_stationary_oracle(h: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(invalid(format!("Hurst index must lie in (1/2, 1), got {h}")));
    }
    let s = 30.0;
    let coarse = fou_variance_cells(h, s, 960);
    let fine = fou_variance_cells(h, s, 1920);
    // the cell average error is O(dt^2)
    Ok((4.0 * fine - coarse) / 3.0)
}

#[derive(Debug, Clone)]
pub struct StationaryVariance {
    pub h: f64,
    pub t_end: f64,
    /// `Ẽ X_T²` (the mean is zero by symmetry)
    pub second_moment: Estimate,
    pub oracle: f64,
    pub z_score: f64,
}

/// Empirical `E X_T²` of the fOU process started at 0 and driven by exact
/// fBm on `[0, T]`, compared with [`fou_stationary_oracle`].
pub fn fou_stationary_experiment(h: f64, t_end: f64, dt: f64, n_mc: usize, seed: u64) -> Result<StationaryVariance> {
    let n_steps = (t_end / dt).round() as usize;
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let sampler = FbmSampler::new(h, &times)?;
    let fields = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1)?;
    let solver = FlowSolver::new(&fields, FlowOptions::default());
    let vals: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let b = SampledPath::scalar(0.0, dt, sampler.sample(&mut rng))?;
            let x = solver.solve_state(&[0.0], &b)?;
            Ok(x.last()[0] * x.last()[0])
        })
        .collect::<Result<_>>()?;
    let second_moment = vals.into_iter().collect::<MeanAcc>().estimate();
    let oracle = fou_stationary_oracle(h)?;
    Ok(StationaryVariance {
        h,
        t_end,
        z_score: second_moment.z_score(oracle),
        second_moment,
        oracle,
    })
}

#[derive(Debug, Clone)]
pub struct CheckpointDistance {
    pub t: f64,
    pub distances: Distances,
}

/// Comparison of the law at `T` with the law at `2T` for the first initial
/// condition; `floor` is the distance between two independent halves of
/// the `2T` sample (the Monte-Carlo noise level).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingTest {
    pub w1_t_2t: f64,
    pub floor: f64,
    pub stationary: bool,
}

#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub checkpoints: Vec<f64>,
    pub x0_a: Vec<f64>,
    pub x0_b: Vec<f64>,
    /// `Σ_i |x0_a,i - x0_b,i|`, the W1 distance at time 0
    pub initial_separation: f64,
    pub distances: Vec<CheckpointDistance>,
    /// total W1 strictly decreasing across checkpoints (starting from time 0)
    pub monotone_decay: bool,
    /// total W1 at the last checkpoint over the initial separation
    pub final_ratio: f64,
    pub failures: usize,
    pub doubling: Option<DoublingTest>,
    pub hormander: Option<RankReport>,
    pub dissipativity: Option<DissipativityReport>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub x0_a: Vec<f64>,
    pub x0_b: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
    /// also compare the law at the last checkpoint with the law at twice it
    pub doubling: bool,
}

/// Laws from two initial conditions under common random numbers,
/// compared at the checkpoints. `noise` must cover the last checkpoint
/// (twice the last checkpoint with `doubling`).
pub fn convergence_experiment(fields: &VectorFieldSet, noise: &ConditionedNoise, cfg: &ConvergenceConfig) -> Result<EnsembleSummary> {
    let (x0_a, x0_b, checkpoints) = (&cfg.x0_a[..], &cfg.x0_b[..], &cfg.checkpoints[..]);
    let doubling = cfg.doubling;
    let mut cps = checkpoints.to_vec();
    let t_last = *cps.last().ok_or_else(|| invalid("no checkpoints"))?;
    if doubling {
        cps.push(2.0 * t_last);
    }
    let law = conditional_law_sample(fields, &[x0_a.to_vec(), x0_b.to_vec()], noise, &cps, cfg.n_mc, cfg.seed)?;
    let n = fields.n();
    let distances: Vec<CheckpointDistance> = checkpoints
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            Ok(CheckpointDistance {
                t,
                distances: empirical_distance(&law.data[0][c], &law.data[1][c], n)?,
            })
        })
        .collect::<Result<_>>()?;
    let initial_separation: f64 = x0_a.iter().zip(x0_b).map(|(a, b)| (a - b).abs()).sum();
    let mut seq = vec![initial_separation];
    seq.extend(distances.iter().map(|d| d.distances.w1_total()));
    let monotone_decay = seq.windows(2).all(|w| w[1] < w[0]);
    let doubling = if doubling {
        let c_t = checkpoints.len() - 1;
        let c_2t = checkpoints.len();
        let w1_t_2t = empirical_distance(&law.data[0][c_t], &law.data[0][c_2t], n)?.w1_total();
        let half = (law.n_kept() / 2) * n;
        let s = &law.data[0][c_2t];
        let floor = empirical_distance(&s[..half], &s[half..2 * half], n)?.w1_total();
        Some(DoublingTest {
            w1_t_2t,
            floor,
            stationary: w1_t_2t <= 2.0 * floor,
        })
    } else {
        None
    };
    Ok(EnsembleSummary {
        checkpoints: checkpoints.to_vec(),
        x0_a: x0_a.to_vec(),
        x0_b: x0_b.to_vec(),
        initial_separation,
        final_ratio: seq.last().unwrap() / initial_separation,
        monotone_decay,
        distances,
        failures: law.failures,
        doubling,
        hormander: None,
        dissipativity: None,
    })
}
