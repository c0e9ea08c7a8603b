//! Fractional Brownian motion with H > 1/2: exact sampling, the split of the
//! future into a Volterra part independent of the past plus a drift that is
//! a linear functional of the past, and the associated norms and covariances.

mod conditional;
mod drift;
mod fbm;
mod kernel;
mod norm;
mod volterra;

pub use conditional::{conditional_cov, conditional_cov_forms, tilde_b_covariance};
pub use drift::{conditional_drift_g, f_omega, ConditionalDrift, DriftOutput, PastTail};
pub use fbm::{fbm_covariance, fbm_sample_exact, sample_past, sample_pasts, FbmSampler};
pub use kernel::{kernel_g, kernel_g_closed, kernel_g_quadrature, kernel_xg_prime};
pub use norm::{shift_past, weighted_norm};
pub use volterra::{volterra_tilde_b, ConditionedNoise, NoiseSplit, VolterraKernel};

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};

/// Hurst index with the Hölder exponents of the noise space.
///
/// Invariants: `1/2 < gamma < h < 1` and `h < gamma + delta < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParams {
    h: f64,
    gamma: f64,
    delta: f64,
}

impl HurstParams {
    pub fn new(h: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(invalid(format!("Hurst index must lie in (1/2, 1), got {h}")));
        }
        if !(gamma > 0.5 && gamma < h) {
            return Err(invalid(format!("gamma must lie in (1/2, H) = (0.5, {h}), got {gamma}")));
        }
        if !(delta > 0.0 && gamma + delta > h && gamma + delta < 1.0) {
            return Err(invalid(format!(
                "need delta > 0 and H < gamma + delta < 1, got gamma + delta = {}",
                gamma + delta
            )));
        }
        Ok(Self { h, gamma, delta })
    }

    /// `gamma` halfway between 1/2 and H, `gamma + delta` halfway between H and 1.
    pub fn with_defaults(h: f64) -> Result<Self> {
        let gamma = 0.5 * (0.5 + h);
        let delta = 0.5 * (h + 1.0) - gamma;
        Self::new(h, gamma, delta)
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn alpha_h(&self) -> f64 {
        alpha_h(self.h)
    }
    pub fn drift_constant(&self) -> f64 {
        drift_constant(self.h)
    }
}

/// Mandelbrot-Van Ness normalizer: with `B_t = α_H ∫ ((t-s)_+^{H-1/2} - (-s)_+^{H-1/2}) dW_s`
/// one has `E B_t² = |t|^{2H}`.
pub fn alpha_h(h: f64) -> f64 {
    (2.0 * h * gamma(1.5 - h) / (gamma(h + 0.5) * gamma(2.0 - 2.0 * h))).sqrt()
}

/// Constant in front of the conditional drift
/// `𝒢ω(t) = c ∫_0^∞ (1/r) g(t/r) ω(-r) dr` for a past stored as `ω(s) = B_s`, `s ≤ 0`:
/// `c = cos(πH)/π = -(H - 1/2) / (Γ(H+1/2) Γ(3/2-H))`.
pub fn drift_constant(h: f64) -> f64 {
    (PI * h).cos() / PI
}
