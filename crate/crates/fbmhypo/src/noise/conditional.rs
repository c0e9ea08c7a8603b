use crate::error::{invalid, Error, Result};
use crate::noise::alpha_h;
use crate::quad;

const TOL: f64 = 1e-13;

/// `∫_0^s (t-r)^{H-1/2} (s-r)^{H-1/2} dr` for `0 ≤ s ≤ t`.
fn cross_integral(s: f64, t: f64, h: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let e = h - 0.5;
    let gap = t - s;
    quad::left_singular(|u| (gap + u).powf(e), 0.0, s, e, TOL)
}

/// `∫_0^L ((1+x)^{H-1/2} - x^{H-1/2})² dx` on geometric panels.
fn tail_integral(l: f64, h: f64) -> f64 {
    let e = h - 0.5;
    let f = |x: f64| {
        let v = (1.0 + x).powf(e) - x.powf(e);
        v * v
    };
    let mut total = 0.0;
    let (mut a, mut b) = (0.0, l.min(1.0));
    while a < l {
        total += quad::adaptive(f, a, b, TOL * 1e-2, TOL);
        a = b;
        b = (2.0 * b).min(l);
    }
    total
}

/// Both closed expressions of `f(s,t) = E|B̃_t - B̃_s|²` for the unnormalized
/// Volterra process `∫_0^t (t-r)^{H-1/2} dW_r`:
///
/// 1. `t^{2H}/(2H) + s^{2H}/(2H) - 2 ∫_0^s (t-r)^{H-1/2}(s-r)^{H-1/2} dr`
/// 2. `|t-s|^{2H} (1/(2H) + ∫_0^{s/|t-s|} ((1+x)^{H-1/2} - x^{H-1/2})² dx)`
pub fn conditional_cov_forms(s: f64, t: f64, h: f64) -> Result<(f64, f64)> {
    if !(0.0 <= s && s < t) {
        return Err(invalid(format!("need 0 <= s < t, got s = {s}, t = {t}")));
    }
    let e2 = 2.0 * h;
    let first = t.powf(e2) / e2 + s.powf(e2) / e2 - 2.0 * cross_integral(s, t, h);
    let gap = t - s;
    let second = gap.powf(e2) * (1.0 / e2 + tail_integral(s / gap, h));
    Ok((first, second))
}

/// `f(s,t)`, computed by the first form and checked against the second to a
/// relative tolerance of 1e-6.
pub fn conditional_cov(s: f64, t: f64, h: f64) -> Result<f64> {
    let (a, b) = conditional_cov_forms(s, t, h)?;
    if (a - b).abs() > 1e-6 * a.abs().max(b.abs()) {
        return Err(Error::Internal(format!(
            "increment variance forms disagree at s = {s}, t = {t}: {a} vs {b}"
        )));
    }
    Ok(a)
}

/// `Cov(B̃_s, B̃_t)` for the normalized Volterra part `α_H ∫_0^t (t-r)^{H-1/2} dW_r`.
pub fn tilde_b_covariance(s: f64, t: f64, h: f64) -> f64 {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    alpha_h(h).powi(2) * cross_integral(s.max(0.0), t, h)
}
