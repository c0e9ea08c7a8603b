//! Riemann-Liouville fractional integral, its L² adjoint, and the Marchaud
//! fractional derivative on uniform grids starting at 0.
//!
//! All three use product integration: the kernel is integrated exactly (or
//! with a high-order rule on bins away from the singularity) against the
//! piecewise-linear interpolant of the data.

use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::path::SampledPath;
use crate::quad::GaussLegendre;

/// Kernel moments of `u^beta` against the two hat functions on `[m-1, m]`
/// (unit grid), for `m = 1..=m_max`.
///
/// `left[m]` weights the data at `u = m`, `right[m]` the data at `u = m - 1`.
/// Index 0 is unused. For `m = 1` the moments require `beta > -1`; callers
/// with stronger singularities treat that bin themselves.
#[derive(Debug, Clone)]
pub struct KernelMoments {
    pub beta: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl KernelMoments {
    pub fn new(beta: f64, m_max: usize) -> Self {
        let mut left = vec![0.0; m_max + 1];
        let mut right = vec![0.0; m_max + 1];
        if m_max >= 1 && beta > -1.0 {
            left[1] = 1.0 / (beta + 2.0);
            right[1] = 1.0 / (beta + 1.0) - 1.0 / (beta + 2.0);
        }
        let gl = GaussLegendre::g16();
        for m in 2..=m_max {
            let a = (m - 1) as f64;
            let (mut l, mut r) = (0.0, 0.0);
            for (v, w) in gl.mapped(0.0, 1.0) {
                let k = (a + v).powf(beta) * w;
                l += k * v;
                r += k * (1.0 - v);
            }
            left[m] = l;
            right[m] = r;
        }
        Self { beta, left, right }
    }
}

/// Precomputed fractional operators of order `alpha` for grids of step `dt`
/// with up to `n_steps` steps.
#[derive(Debug, Clone)]
pub struct FractionalOps {
    alpha: f64,
    dt: f64,
    n_steps: usize,
    integral: KernelMoments,
    marchaud: KernelMoments,
}

impl FractionalOps {
    pub fn new(alpha: f64, dt: f64, n_steps: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if !(dt > 0.0) {
            return Err(invalid("grid step must be positive"));
        }
        Ok(Self {
            alpha,
            dt,
            n_steps,
            integral: KernelMoments::new(alpha - 1.0, n_steps),
            marchaud: KernelMoments::new(-alpha - 1.0, n_steps),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check_path(&self, f: &SampledPath) -> Result<()> {
        if f.t0() != 0.0 {
            return Err(invalid(format!("fractional operators need t0 = 0, got {}", f.t0())));
        }
        if (f.dt() - self.dt).abs() > 1e-12 * self.dt || f.n_steps() > self.n_steps {
            return Err(Error::Dimension("path grid does not match the precomputed operator".into()));
        }
        Ok(())
    }

    /// `I^α f(t_k) = (1/Γ(α)) ∫_0^{t_k} (t_k - s)^{α-1} f(s) ds`.
    pub fn integral(&self, f: &SampledPath) -> Result<SampledPath> {
        self.check_path(f)?;
        let d = f.dim();
        let scale = self.dt.powf(self.alpha) / gamma(self.alpha);
        let (lw, rw) = (&self.integral.left, &self.integral.right);
        let mut out = SampledPath::zeros(0.0, self.dt, f.n_steps(), d);
        for k in 1..=f.n_steps() {
            let o = out.value_mut(k);
            for m in 1..=k {
                let (a, b) = (f.value(k - m), f.value(k - m + 1));
                for i in 0..d {
                    o[i] += lw[m] * a[i] + rw[m] * b[i];
                }
            }
            o.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(out)
    }

    /// L² adjoint of [`Self::integral`] on `[0, T]`, `T` the path end:
    /// `(1/Γ(α)) ∫_t^T (s - t)^{α-1} g(s) ds`.
    pub fn adjoint_integral(&self, g: &SampledPath) -> Result<SampledPath> {
        self.check_path(g)?;
        let d = g.dim();
        let n = g.n_steps();
        let scale = self.dt.powf(self.alpha) / gamma(self.alpha);
        let (lw, rw) = (&self.integral.left, &self.integral.right);
        let mut out = SampledPath::zeros(0.0, self.dt, n, d);
        for k in 0..n {
            let o = out.value_mut(k);
            for m in 1..=(n - k) {
                let (a, b) = (g.value(k + m - 1), g.value(k + m));
                for i in 0..d {
                    o[i] += rw[m] * a[i] + lw[m] * b[i];
                }
            }
            o.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(out)
    }

    /// Marchaud derivative
    /// `D^α f(s) = (1/Γ(1-α)) [s^{-α} f(s) - α ∫_0^s (s-r)^{-α-1} (f(r) - f(s)) dr]`.
    ///
    /// Requires `f(0) = 0`; the value at `s = 0` is 0.
    pub fn marchaud(&self, f: &SampledPath) -> Result<SampledPath> {
        self.check_path(f)?;
        if f.value(0).iter().any(|v| v.abs() > 1e-12) {
            return Err(invalid("Marchaud derivative needs f(0) = 0"));
        }
        Ok(self.marchaud_unchecked(f))
    }

    /// As [`Self::marchaud`] without the `f(0) = 0` requirement. The output
    /// at index 0 is left at 0; for `f(0) != 0` the true value is singular
    /// like `f(0) s^{-α}/Γ(1-α)` there.
    pub fn marchaud_unchecked(&self, f: &SampledPath) -> SampledPath {
        let d = f.dim();
        let a = self.alpha;
        let pre = 1.0 / gamma(1.0 - a);
        let h = self.dt.powf(-a);
        let (lw, rw) = (&self.marchaud.left, &self.marchaud.right);
        let mut out = SampledPath::zeros(0.0, self.dt, f.n_steps(), d);
        let mut acc = vec![0.0; d];
        for k in 1..=f.n_steps() {
            let fk = f.value(k);
            let fkm = f.value(k - 1);
            for i in 0..d {
                acc[i] = (fkm[i] - fk[i]) / (1.0 - a) - fk[i] * (1.0 - (k as f64).powf(-a)) / a;
            }
            for m in 2..=k {
                let (l, r) = (f.value(k - m), f.value(k - m + 1));
                for i in 0..d {
                    acc[i] += lw[m] * l[i] + rw[m] * r[i];
                }
            }
            let tk = k as f64 * self.dt;
            let o = out.value_mut(k);
            for i in 0..d {
                o[i] = pre * (tk.powf(-a) * fk[i] - a * h * acc[i]);
            }
        }
        out
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("fractional order must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// `I^α f` on the grid of `f` (which must start at 0).
pub fn frac_integral(f: &SampledPath, alpha: f64) -> Result<SampledPath> {
    FractionalOps::new(alpha, f.dt(), f.n_steps())?.integral(f)
}

/// Marchaud derivative `D^α f`; `f` must start at 0 with `f(0) = 0`.
pub fn marchaud_derivative(f: &SampledPath, alpha: f64) -> Result<SampledPath> {
    FractionalOps::new(alpha, f.dt(), f.n_steps())?.marchaud(f)
}

/// L² adjoint of `I^α` on `[0, T]`, `T = g.end_time()`.
pub fn adjoint_frac_integral(g: &SampledPath, alpha: f64) -> Result<SampledPath> {
    FractionalOps::new(alpha, g.dt(), g.n_steps())?.adjoint_integral(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> SampledPath {
        SampledPath::from_fn(0.0, 1.0 / n as f64, n, 1, |t, x| x[0] = f(t))
    }

    #[test]
    fn powers_match_closed_forms() {
        let a = 0.2;
        for beta in [0i32, 1, 2] {
            let f = grid(4096, |t| t.powi(beta));
            let out = frac_integral(&f, a).unwrap();
            let c = gamma(beta as f64 + 1.0) / gamma(a + beta as f64 + 1.0);
            for k in 1..=4096 {
                let t = out.time(k);
                let want = c * t.powf(a + beta as f64);
                // linear data is integrated exactly; t^2 carries interpolation error
                let tol = if beta < 2 { 1e-4 * want + 1e-14 } else { 1e-7 };
                assert!((out.value(k)[0] - want).abs() <= tol, "beta={beta} t={t}");
            }
        }
    }

    #[test]
    fn derivative_of_identity() {
        let a = 0.3;
        let f = grid(4096, |t| t);
        let out = marchaud_derivative(&f, a).unwrap();
        for k in 1..=4096 {
            let t = out.time(k);
            let want = t.powf(1.0 - a) / gamma(2.0 - a);
            assert!((out.value(k)[0] - want).abs() < 1e-9, "t={t}");
        }
        assert!(marchaud_derivative(&grid(16, |_| 1.0), a).is_err());
    }

    #[test]
    fn adjoint_of_constant() {
        let a = 0.2;
        let g = grid(2048, |_| 1.0);
        let out = adjoint_frac_integral(&g, a).unwrap();
        for k in 0..=2048 {
            let want = (1.0 - out.time(k)).powf(a) / gamma(a + 1.0);
            assert!((out.value(k)[0] - want).abs() < 1e-12);
        }
    }
}
