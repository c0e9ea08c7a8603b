use crate::error::{invalid, Error, Result};
use crate::noise::{weighted_norm, HurstParams};
use crate::path::SampledPath;
use crate::quad::{self, GaussLegendre};

/// Conditional drift `m = 𝒢ω` on a future grid, with its error budget.
#[derive(Debug, Clone)]
pub struct DriftOutput {
    /// `m(t_k)`, one component per past component
    pub m: SampledPath,
    /// bound on the neglected contribution of the past beyond the window,
    /// per future grid point (max over components)
    pub tail_bound: Vec<f64>,
    /// weighted Hölder norm of the past used in the bound (max over components)
    pub past_norm: f64,
}

/// How the past beyond the sampled window enters `𝒢ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PastTail {
    /// The past is held at its oldest sampled value beyond the window.
    #[default]
    FreezeOldest,
    /// The integral is cut at the window edge.
    Drop,
}

/// Precomputed product-integration matrices for `𝒢` and for
/// `f_ω(t) = t d/dt 𝒢ω(t)`.
///
/// The past is a path on `[-T_past, 0]` with step `dt_past`; the future grid
/// is `k dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone)]
pub struct ConditionalDrift {
    params: HurstParams,
    dt_past: f64,
    n_past: usize,
    dt: f64,
    n_steps: usize,
    drift: Vec<f64>,
    deriv: Vec<f64>,
    tail: Vec<f64>,
}

impl ConditionalDrift {
    pub fn new(params: HurstParams, dt_past: f64, n_past: usize, dt: f64, n_steps: usize) -> Result<Self> {
        Self::with_tail(params, dt_past, n_past, dt, n_steps, PastTail::default())
    }

    pub fn with_tail(
        params: HurstParams,
        dt_past: f64,
        n_past: usize,
        dt: f64,
        n_steps: usize,
        tail_mode: PastTail,
    ) -> Result<Self> {
        if n_past == 0 {
            return Err(invalid("empty past window"));
        }
        if !(dt_past > 0.0 && dt > 0.0) {
            return Err(invalid("grid steps must be positive"));
        }
        let h = params.h();
        let c = params.drift_constant();
        let cols = n_past + 1;
        let mut drift = vec![0.0; (n_steps + 1) * cols];
        let mut deriv = vec![0.0; (n_steps + 1) * cols];
        let mut tail = vec![0.0; n_steps + 1];
        let gl = GaussLegendre::g16();
        let r_max = n_past as f64 * dt_past;
        for k in 1..=n_steps {
            let t = k as f64 * dt;
            let tp = t.powf(h + 0.5);
            let row_g = &mut drift[k * cols..(k + 1) * cols];
            let row_f = &mut deriv[k * cols..(k + 1) * cols];
            // first bin: ω vanishes at r = 0, so only the right hat r/dt_past enters
            let first_g = quad::left_singular(|r| tp / (r + t) / dt_past, 0.0, dt_past, 0.5 - h, 1e-13);
            let first_f = quad::left_singular(
                |r| tp / (r + t) * (h + 0.5 - t / (r + t)) / dt_past,
                0.0,
                dt_past,
                0.5 - h,
                1e-13,
            );
            row_g[1] += first_g;
            row_f[1] += first_f;
            for j in 1..n_past {
                let a = j as f64 * dt_past;
                for (r, w) in gl.mapped(a, a + dt_past) {
                    let x = t / r;
                    let g = x.powf(h + 0.5) / (1.0 + x) / r;
                    let f = g * (h + 0.5 - x / (1.0 + x));
                    let right = (r - a) / dt_past;
                    let left = 1.0 - right;
                    row_g[j] += w * g * left;
                    row_g[j + 1] += w * g * right;
                    row_f[j] += w * f * left;
                    row_f[j + 1] += w * f * right;
                }
            }
            if tail_mode == PastTail::FreezeOldest {
                // ∫_R^∞ (1/r) g(t/r) dr and its t-derivative counterpart, r = R e^y
                let (mg, mf) = beyond_window(t, r_max, h);
                row_g[n_past] += mg;
                row_f[n_past] += mf;
            }
            row_g.iter_mut().for_each(|v| *v *= c);
            row_f.iter_mut().for_each(|v| *v *= c);
            tail[k] = c.abs() * tail_kernel(t, r_max, &params, tail_mode);
        }
        Ok(Self {
            params,
            dt_past,
            n_past,
            dt,
            n_steps,
            drift,
            deriv,
            tail,
        })
    }

    /// Build for the grid of a given past path.
    pub fn for_past(params: HurstParams, omega: &SampledPath, dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(params, omega.dt(), omega.n_steps(), dt, n_steps)
    }

    pub fn params(&self) -> &HurstParams {
        &self.params
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn past_horizon(&self) -> f64 {
        self.n_past as f64 * self.dt_past
    }

    /// Drift weights: `m(t_k) = Σ_j weights(k)[j] ω(-j dt_past)`.
    pub fn weights(&self, k: usize) -> &[f64] {
        let cols = self.n_past + 1;
        &self.drift[k * cols..(k + 1) * cols]
    }

    fn check(&self, omega: &SampledPath) -> Result<()> {
        if omega.n_steps() != self.n_past || (omega.dt() - self.dt_past).abs() > 1e-12 * self.dt_past {
            return Err(Error::Dimension("past path does not match the precomputed grid".into()));
        }
        if omega.end_time().abs() > 1e-9 * self.dt_past {
            return Err(invalid("past path must end at t = 0"));
        }
        if omega.last().iter().any(|v| v.abs() > 1e-12) {
            return Err(invalid("past path must vanish at t = 0"));
        }
        Ok(())
    }

    fn apply_matrix(&self, mat: &[f64], omega: &SampledPath) -> SampledPath {
        let d = omega.dim();
        let cols = self.n_past + 1;
        let np = self.n_past;
        let mut out = SampledPath::zeros(0.0, self.dt, self.n_steps, d);
        for i in 0..d {
            // reorder the past by lag r = j dt_past
            let lagged: Vec<f64> = (0..=np).map(|j| omega.value(np - j)[i]).collect();
            for k in 1..=self.n_steps {
                let row = &mat[k * cols..(k + 1) * cols];
                out.value_mut(k)[i] = row.iter().zip(&lagged).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    /// `m = 𝒢ω` with the tail budget.
    pub fn apply(&self, omega: &SampledPath) -> Result<DriftOutput> {
        self.check(omega)?;
        let m = self.apply_matrix(&self.drift, omega);
        let (g, dl) = (self.params.gamma(), self.params.delta());
        let past_norm = (0..omega.dim())
            .map(|i| {
                let c = SampledPath::scalar(omega.t0(), omega.dt(), omega.component(i)).expect("valid");
                weighted_norm(&c, g, dl)
            })
            .fold(0.0, f64::max);
        let tail_bound = self.tail.iter().map(|t| t * past_norm).collect();
        Ok(DriftOutput { m, tail_bound, past_norm })
    }

    /// Drift only, skipping the norm computation.
    pub fn apply_drift(&self, omega: &SampledPath) -> Result<SampledPath> {
        self.check(omega)?;
        Ok(self.apply_matrix(&self.drift, omega))
    }

    /// `f_ω(t) = t d/dt 𝒢ω(t)`; vanishes at t = 0.
    pub fn apply_f(&self, omega: &SampledPath) -> Result<SampledPath> {
        self.check(omega)?;
        Ok(self.apply_matrix(&self.deriv, omega))
    }
}

fn beyond_window(t: f64, r0: f64, h: f64) -> (f64, f64) {
    let y_max = 80.0 / (h + 0.5);
    let g = quad::adaptive(
        |y| {
            let x = t / (r0 * y.exp());
            x.powf(h + 0.5) / (1.0 + x)
        },
        0.0,
        y_max,
        1e-16,
        1e-12,
    );
    let f = quad::adaptive(
        |y| {
            let x = t / (r0 * y.exp());
            x.powf(h + 0.5) / (1.0 + x) * (h + 0.5 - x / (1.0 + x))
        },
        0.0,
        y_max,
        1e-16,
        1e-12,
    );
    (g, f)
}

/// Kernel mass beyond the window against the growth envelope of an
/// admissible past: `∫_R^∞ (1/r) g(t/r) E(r) dr` with `E(r) = r^γ (1+2r)^δ`
/// when the tail is dropped, and `E(r) = (r-R)^γ (1+r+R)^δ` when the oldest
/// value is frozen.
fn tail_kernel(t: f64, r0: f64, p: &HurstParams, mode: PastTail) -> f64 {
    let (h, g, dl) = (p.h(), p.gamma(), p.delta());
    let k = |r: f64| {
        let x = t / r;
        let env = match mode {
            PastTail::Drop => r.powf(g) * (1.0 + 2.0 * r).powf(dl),
            PastTail::FreezeOldest => (r - r0).powf(g) * (1.0 + r + r0).powf(dl),
        };
        x.powf(h + 0.5) / (1.0 + x) / r * env
    };
    // r = r0 e^y; integrand decays like e^{(γ+δ-H-1/2) y}
    let y_max = 12.0 * std::f64::consts::LN_10;
    let body = quad::adaptive(|y| { let r = r0 * y.exp(); k(r) * r }, 0.0, y_max, 1e-14, 1e-9);
    let r_end = r0 * y_max.exp();
    let q = g + dl - h - 1.5;
    let rest = t.powf(h + 0.5) * 2f64.powf(dl) * r_end.powf(q + 1.0) / -(q + 1.0);
    body + rest
}

/// `𝒢ω` on the grid `k dt`, `k = 0..=n_steps`.
pub fn conditional_drift_g(omega: &SampledPath, params: HurstParams, dt: f64, n_steps: usize) -> Result<DriftOutput> {
    ConditionalDrift::for_past(params, omega, dt, n_steps)?.apply(omega)
}

/// `f_ω = t d/dt 𝒢ω` on the grid `k dt`, `k = 0..=n_steps`.
pub fn f_omega(omega: &SampledPath, params: HurstParams, dt: f64, n_steps: usize) -> Result<SampledPath> {
    ConditionalDrift::for_past(params, omega, dt, n_steps)?.apply_f(omega)
}
