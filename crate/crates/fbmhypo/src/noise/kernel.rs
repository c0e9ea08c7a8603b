use crate::error::{invalid, Result};
use crate::quad;

/// Kernel of the conditional drift,
/// `g(x) = x^{H-1/2} + (H-3/2) x ∫_0^1 (u+x)^{H-5/2} (1-u)^{1/2-H} du`,
/// evaluated by quadrature of the defining integral.
pub fn kernel_g(x: f64, h: f64) -> Result<f64> {
    kernel_g_quadrature(x, h, 1e-12)
}

/// Closed form of the kernel, `g(x) = x^{H+1/2}/(1+x)`, used for bulk
/// evaluation; it agrees with [`kernel_g`] to quadrature accuracy.
#[inline]
pub fn kernel_g_closed(x: f64, h: f64) -> f64 {
    x.powf(h + 0.5) / (1.0 + x)
}

/// `x g'(x)` in closed form.
#[inline]
pub fn kernel_xg_prime(x: f64, h: f64) -> f64 {
    kernel_g_closed(x, h) * (h + 0.5 - x / (1.0 + x))
}

/// The defining integral of g evaluated by quadrature.
///
/// The large `x^{H-1/2}` term is cancelled analytically:
/// `g(x) = x(1+x)^{H-3/2} + (H-3/2) x ∫_0^1 (u+x)^{H-5/2} [(1-u)^{1/2-H} - 1] du`,
/// and the `(1-u)^{1/2-H}` endpoint singularity is removed by substitution.
pub fn kernel_g_quadrature(x: f64, h: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("kernel g needs x > 0, got {x}")));
    }
    let p = h - 2.5;
    let inner_left = |u: f64| (u + x).powf(p) * ((1.0 - u).powf(0.5 - h) - 1.0);
    // geometric panels resolve the (u + x)^{H-5/2} peak at scale x
    let mut left = 0.0;
    let mut a = 0.0;
    let mut b = x.min(0.5);
    loop {
        left += quad::adaptive(inner_left, a, b, tol * 1e-3, tol);
        if b >= 0.5 {
            break;
        }
        a = b;
        b = (2.0 * b).min(0.5);
    }
    let sing = quad::right_singular(|u| (u + x).powf(p), 0.5, 1.0, 0.5 - h, tol);
    let plain = ((1.0 + x).powf(p + 1.0) - (0.5 + x).powf(p + 1.0)) / (p + 1.0);
    let integral = left + sing - plain;
    Ok(x * (1.0 + x).powf(h - 1.5) + (h - 1.5) * x * integral)
}
