//! Hölder and sup norms on sampled paths, and numerical checks of the
//! interpolation and subdivision inequalities for Hölder functions.
//! [`lemma_suite`] runs these checks on random paths together with the
//! regularity check on the derivative of the conditional drift.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::noise::{sample_pasts, weighted_norm, ConditionalDrift, HurstParams};
use crate::path::SampledPath;
use crate::rng::stream_rng;

/// Largest number of points used for O(N²) pair enumeration.
pub const MAX_PAIR_POINTS: usize = 4096;

fn pair_sup(f: &SampledPath, lo: usize, hi: usize, gamma: f64) -> f64 {
    let span = hi - lo + 1;
    let step = span.div_ceil(MAX_PAIR_POINTS).max(1);
    if step > 1 {
        log::info!("holder norm: {span} points decimated by a factor {step}");
    }
    let idx: Vec<usize> = (lo..=hi).step_by(step).collect();
    let d = f.dim();
    let dt = f.dt();
    let lag: Vec<f64> = (0..=span).map(|m| (m as f64 * dt).powf(-gamma)).collect();
    let mut best = 0.0f64;
    for (a, &i) in idx.iter().enumerate() {
        let fi = f.value(i);
        for &j in &idx[a + 1..] {
            let fj = f.value(j);
            let mut sq = 0.0;
            for c in 0..d {
                let v = fj[c] - fi[c];
                sq += v * v;
            }
            if sq > 0.0 {
                best = best.max(sq.sqrt() * lag[j - i]);
            }
        }
    }
    best
}

/// `sup_{s≠t in [a,b]} |f(t) - f(s)| / |t-s|^γ` over grid pairs.
pub fn holder_norm(f: &SampledPath, gamma: f64, a: f64, b: f64) -> Result<f64> {
    let (lo, hi) = window(f, a, b)?;
    Ok(pair_sup(f, lo, hi, gamma))
}

/// Hölder seminorm over the whole path.
pub fn holder_norm_full(f: &SampledPath, gamma: f64) -> f64 {
    pair_sup(f, 0, f.n_steps(), gamma)
}

/// Hölder seminorm between grid indices `lo..=hi`.
pub fn holder_norm_indices(f: &SampledPath, gamma: f64, lo: usize, hi: usize) -> f64 {
    pair_sup(f, lo, hi, gamma)
}

fn window(f: &SampledPath, a: f64, b: f64) -> Result<(usize, usize)> {
    let eps = 1e-9 * f.dt();
    if !(a <= b) || a < f.t0() - eps || b > f.end_time() + eps {
        return Err(invalid(format!(
            "window [{a}, {b}] is not inside [{}, {}]",
            f.t0(),
            f.end_time()
        )));
    }
    let lo = ((a - f.t0()) / f.dt() - 1e-9).ceil().max(0.0) as usize;
    let hi = (((b - f.t0()) / f.dt() + 1e-9).floor() as usize).min(f.n_steps());
    if hi <= lo {
        return Err(invalid(format!("window [{a}, {b}] holds fewer than two grid points")));
    }
    Ok((lo, hi))
}

pub fn sup_norm(f: &SampledPath) -> f64 {
    (0..f.len())
        .map(|k| f.value(k).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// L² norm by the trapezoid rule on `|f|²`.
pub fn l2_norm(f: &SampledPath) -> f64 {
    let n = f.n_steps();
    let sq = |k: usize| f.value(k).iter().map(|v| v * v).sum::<f64>();
    let mut s = 0.5 * (sq(0) + sq(n));
    for k in 1..n {
        s += sq(k);
    }
    (s * f.dt()).sqrt()
}

/// Both sides of an inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            ok: lhs <= rhs * (1.0 + 1e-9) + f64::MIN_POSITIVE,
        }
    }
}

/// `‖f‖_∞ ≤ 2 max(T^{-1/2} ‖f‖_{L²}, ‖f‖_{L²}^{2γ/(2γ+1)} ‖f‖_γ^{1/(2γ+1)})` on the
/// path's interval of length `T`.
pub fn check_interpolation(f: &SampledPath, gamma: f64) -> InequalityReport {
    let t = f.end_time() - f.t0();
    let l2 = l2_norm(f);
    let hol = holder_norm_full(f, gamma);
    let e = 2.0 * gamma + 1.0;
    let rhs = 2.0 * (l2 / t.sqrt()).max(l2.powf(2.0 * gamma / e) * hol.powf(1.0 / e));
    InequalityReport::new(sup_norm(f), rhs)
}

/// `‖f‖_γ ≤ N^{1-γ} max_i ‖f‖_{[u_i, u_{i+1}], γ}` for a partition given by
/// grid indices `u_0 < ... < u_N`, which must start at 0 and end at the last
/// grid point.
pub fn check_subdivision(f: &SampledPath, gamma: f64, partition: &[usize]) -> Result<InequalityReport> {
    if partition.len() < 2 || partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("partition must be strictly increasing with at least two points"));
    }
    if partition[0] != 0 || *partition.last().unwrap() != f.n_steps() {
        return Err(invalid("partition must span the whole grid"));
    }
    let n = (partition.len() - 1) as f64;
    let lhs = holder_norm_full(f, gamma);
    let local = partition
        .windows(2)
        .map(|w| pair_sup(f, w[0], w[1], gamma))
        .fold(0.0, f64::max);
    Ok(InequalityReport::new(lhs, n.powf(1.0 - gamma) * local))
}

/// Random path of Hölder regularity `gamma` on `[0, T]` with `f(0) = 0`:
/// a lacunary sine series `Σ_j 2^{-jγ} a_j (sin(2^j π t/T + φ_j) - sin φ_j)`
/// whose highest frequency keeps at least 16 points per period.
pub fn lacunary_path(rng: &mut impl Rng, gamma: f64, t_end: f64, n_steps: usize) -> SampledPath {
    let levels = ((n_steps as f64 / 16.0).log2().floor().max(0.0) as usize) + 1;
    let coef: Vec<(f64, f64, f64)> = (0..levels)
        .map(|j| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (2f64.powi(j as i32), a * 2f64.powf(-(j as f64) * gamma), phi)
        })
        .collect();
    let dt = t_end / n_steps as f64;
    SampledPath::from_fn(0.0, dt, n_steps, 1, |t, x| {
        x[0] = coef
            .iter()
            .map(|(w, a, phi)| a * ((w * std::f64::consts::PI * t / t_end + phi).sin() - phi.sin()))
            .sum();
    })
}

#[derive(Debug, Clone)]
pub struct LemmaSuiteConfig {
    pub n_paths: usize,
    pub n_pasts: usize,
    pub h: f64,
    pub seed: u64,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self {
            n_paths: 200,
            n_pasts: 100,
            h: 0.7,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSuiteReport {
    pub n_paths: usize,
    pub n_pasts: usize,
    pub interpolation_violations: usize,
    pub subdivision_violations: usize,
    /// pasts with `f_ω(0) != 0` or a non-finite Hölder ratio
    pub drift_violations: usize,
    /// largest `lhs / rhs` seen in each inequality
    pub interpolation_max_ratio: f64,
    pub subdivision_max_ratio: f64,
    /// largest `‖f_ω‖_γ / ‖ω‖_{γ,δ}` over the pasts on `[0, 1]`
    pub drift_max_ratio: f64,
}

impl LemmaSuiteReport {
    pub fn violations(&self) -> usize {
        self.interpolation_violations + self.subdivision_violations + self.drift_violations
    }
}

/// Interpolation and subdivision inequalities on random Hölder paths, and
/// `f_ω(0) = 0` with a finite Hölder ratio on sampled fBm pasts.
pub fn lemma_suite(cfg: &LemmaSuiteConfig) -> Result<LemmaSuiteReport> {
    let params = HurstParams::with_defaults(cfg.h)?;
    let gamma = params.gamma();
    let mut rep = LemmaSuiteReport {
        n_paths: cfg.n_paths,
        n_pasts: cfg.n_pasts,
        interpolation_violations: 0,
        subdivision_violations: 0,
        drift_violations: 0,
        interpolation_max_ratio: 0.0,
        subdivision_max_ratio: 0.0,
        drift_max_ratio: 0.0,
    };
    let n_steps = 512;
    for p in 0..cfg.n_paths {
        let mut rng = stream_rng(cfg.seed, p as u64);
        let t_end = rng.random_range(0.25..4.0);
        let reg = rng.random_range(gamma..1.0);
        let f = lacunary_path(&mut rng, reg, t_end, n_steps);
        let r = check_interpolation(&f, gamma);
        rep.interpolation_violations += usize::from(!r.ok);
        if r.rhs > 0.0 {
            rep.interpolation_max_ratio = rep.interpolation_max_ratio.max(r.lhs / r.rhs);
        }
        let k = rng.random_range(1..8usize);
        let mut cuts: Vec<usize> = (0..k).map(|_| rng.random_range(1..n_steps)).collect();
        cuts.push(0);
        cuts.push(n_steps);
        cuts.sort_unstable();
        cuts.dedup();
        let r = check_subdivision(&f, gamma, &cuts)?;
        rep.subdivision_violations += usize::from(!r.ok);
        if r.rhs > 0.0 {
            rep.subdivision_max_ratio = rep.subdivision_max_ratio.max(r.lhs / r.rhs);
        }
    }
    let (dt_past, n_past) = (1.0 / 32.0, 320);
    let (dt, n) = (1.0 / 64.0, 64);
    let drift = ConditionalDrift::new(params, dt_past, n_past, dt, n)?;
    for omega in sample_pasts(cfg.h, dt_past, n_past, 1, cfg.n_pasts, cfg.seed)? {
        let norm = weighted_norm(&omega, gamma, params.delta());
        let f = drift.apply_f(&omega)?;
        let ratio = holder_norm_full(&f, gamma) / norm;
        let bad = f.value(0)[0].abs() > 1e-6 * norm || !ratio.is_finite();
        rep.drift_violations += usize::from(bad);
        rep.drift_max_ratio = rep.drift_max_ratio.max(ratio);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(n: usize) -> SampledPath {
        SampledPath::from_fn(0.0, 1.0 / n as f64, n, 1, |t, x| x[0] = t)
    }

    #[test]
    fn examples() {
        let c = SampledPath::scalar(0.0, 0.1, vec![2.0; 11]).unwrap();
        assert_eq!(holder_norm_full(&c, 0.6), 0.0);
        let r = check_interpolation(&c, 0.6);
        assert!(r.ok && (r.lhs - 2.0).abs() < 1e-15 && r.rhs >= 4.0 - 1e-12);
        let z = SampledPath::scalar(0.0, 0.1, vec![0.0; 11]).unwrap();
        assert!(check_interpolation(&z, 0.6).ok);

        let f = linear(64);
        assert!((holder_norm_full(&f, 0.6) - 1.0).abs() < 1e-12);
        let r = check_subdivision(&f, 0.6, &[0, 16, 32, 48, 64]).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        let one = check_subdivision(&f, 0.6, &[0, 64]).unwrap();
        assert_eq!(one.lhs, one.rhs);
        assert!(check_subdivision(&f, 0.6, &[0, 32, 16, 64]).is_err());
        assert!(holder_norm(&f, 0.6, 0.5, 2.0).is_err());
    }
}
