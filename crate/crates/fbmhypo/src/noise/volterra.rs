use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{alpha_h, ConditionalDrift};
use crate::path::SampledPath;
use crate::rng::fill_normal;

/// Bin-averaged Volterra kernel of `B̃_t = α_H ∫_0^t (t-s)^{H-1/2} dW_s` on a
/// uniform grid: `B̃(t_k) = α_H Σ_{j<k} w(k-j) ΔW_j`, with
/// `w(m) = (1/dt) ∫_{(m-1)dt}^{m dt} u^{H-1/2} du`.
#[derive(Debug, Clone)]
pub struct VolterraKernel {
    h: f64,
    dt: f64,
    n_steps: usize,
    /// `α_H w(m)`, index 0 unused
    w: Vec<f64>,
}

impl VolterraKernel {
    pub fn new(h: f64, dt: f64, n_steps: usize) -> Self {
        let a = alpha_h(h);
        let e = h + 0.5;
        let scale = a * dt.powf(h - 0.5) / e;
        let mut w = vec![0.0; n_steps + 1];
        for (m, wm) in w.iter_mut().enumerate().skip(1) {
            *wm = scale * ((m as f64).powf(e) - ((m - 1) as f64).powf(e));
        }
        Self { h, dt, n_steps, w }
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    /// `α_H w(m)` for `m = 1..=n_steps` (index 0 is unused).
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Apply to point-major increments (`n_steps * d` values), writing the
    /// `(n_steps + 1) * d` path values into `out`.
    pub fn apply_into(&self, incr: &[f64], d: usize, out: &mut [f64]) {
        let n = incr.len() / d;
        out[..d].iter_mut().for_each(|v| *v = 0.0);
        for k in 1..=n {
            let o = &mut out[k * d..(k + 1) * d];
            o.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..k {
                let wk = self.w[k - j];
                let dw = &incr[j * d..(j + 1) * d];
                for c in 0..d {
                    o[c] += wk * dw[c];
                }
            }
        }
    }

    pub fn apply(&self, incr: &[f64], d: usize) -> SampledPath {
        let n = incr.len() / d;
        let mut out = vec![0.0; (n + 1) * d];
        self.apply_into(incr, d, &mut out);
        SampledPath::new(0.0, self.dt, d, out).expect("valid grid")
    }
}

/// `B̃` from Wiener increments (point-major, `d` components, each N(0, dt)).
pub fn volterra_tilde_b(h: f64, w_increments: &[f64], d: usize, dt: f64) -> Result<SampledPath> {
    if d == 0 || w_increments.is_empty() || !w_increments.len().is_multiple_of(d) {
        return Err(Error::Dimension("increments do not form whole points".into()));
    }
    let n = w_increments.len() / d;
    Ok(VolterraKernel::new(h, dt, n).apply(w_increments, d))
}

/// One draw of the future noise given the past.
#[derive(Debug, Clone)]
pub struct NoiseSplit {
    pub omega: SampledPath,
    pub m: SampledPath,
    pub tilde_b: SampledPath,
    pub w_increments: Vec<f64>,
}

impl NoiseSplit {
    /// The conditioned driving path `B = B̃ + m`.
    pub fn driver(&self) -> SampledPath {
        self.tilde_b.axpy(1.0, &self.m).expect("same grid")
    }
}

/// Sampler of the driving noise on `[0, T]` conditionally on a fixed past.
#[derive(Debug, Clone)]
pub struct ConditionedNoise {
    kernel: VolterraKernel,
    omega: SampledPath,
    m: SampledPath,
}

impl ConditionedNoise {
    /// Precompute `m = 𝒢ω` with `drift` and the Volterra kernel on its grid.
    pub fn new(drift: &ConditionalDrift, omega: SampledPath) -> Result<Self> {
        let m = drift.apply_drift(&omega)?;
        let kernel = VolterraKernel::new(drift.params().h(), drift.dt(), drift.n_steps());
        Ok(Self { kernel, omega, m })
    }

    /// Zero past: the drift vanishes and only the Volterra part remains.
    pub fn zero_past(h: f64, d: usize, dt: f64, n_steps: usize) -> Self {
        Self {
            kernel: VolterraKernel::new(h, dt, n_steps),
            omega: SampledPath::zeros(-dt, dt, 1, d),
            m: SampledPath::zeros(0.0, dt, n_steps, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }
    pub fn dt(&self) -> f64 {
        self.kernel.dt
    }
    pub fn n_steps(&self) -> usize {
        self.kernel.n_steps
    }
    pub fn drift(&self) -> &SampledPath {
        &self.m
    }
    pub fn omega(&self) -> &SampledPath {
        &self.omega
    }
    pub fn kernel(&self) -> &VolterraKernel {
        &self.kernel
    }

    /// Draw Wiener increments for one path.
    pub fn draw_increments(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut dw = vec![0.0; self.n_steps() * self.dim()];
        fill_normal(rng, &mut dw, self.dt().sqrt());
        dw
    }

    /// Driving path `B̃ + m` built from given Wiener increments.
    pub fn driver_from_increments(&self, dw: &[f64]) -> SampledPath {
        let d = self.dim();
        let mut data = vec![0.0; (self.n_steps() + 1) * d];
        self.kernel.apply_into(dw, d, &mut data);
        for (v, m) in data.iter_mut().zip(self.m.data()) {
            *v += m;
        }
        SampledPath::new(0.0, self.dt(), d, data).expect("valid grid")
    }

    pub fn draw_driver(&self, rng: &mut impl Rng) -> SampledPath {
        let dw = self.draw_increments(rng);
        self.driver_from_increments(&dw)
    }

    pub fn draw(&self, rng: &mut impl Rng) -> NoiseSplit {
        let dw = self.draw_increments(rng);
        NoiseSplit {
            omega: self.omega.clone(),
            m: self.m.clone(),
            tilde_b: self.kernel.apply(&dw, self.dim()),
            w_increments: dw,
        }
    }
}
