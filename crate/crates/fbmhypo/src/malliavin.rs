//! The operator `𝒜_t v = ∫_0^t J_{0,s}^{-1} V(X_s) v(s) ds`, its adjoint,
//! the reduced and cutoff Malliavin matrices, the control solving `𝒜v = ξ`,
//! its fractional derivative `ṽ`, and the Monte-Carlo experiments built on
//! them (λ_min tails, Skorohod moment terms, the integration-by-parts
//! gradient estimator).
//!
//! All time integrals use the trapezoid rule on the flow grid, so the
//! identities `⟨𝒜v, ξ⟩ = ⟨v, 𝒜*ξ⟩` and `𝒜v = ξ` hold to rounding error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::expr::{ProgramVec, VectorFieldSet};
use crate::flow::{FlowOptions, FlowPath, FlowSolver};
use crate::fraccalc::FractionalOps;
use crate::noise::{alpha_h, ConditionedNoise};
use crate::path::SampledPath;
use crate::quad::trapezoid_weights;
use crate::rng::stream_rng;
use crate::stats::{mean_stderr, Estimate};

/// `h_T(s)`: 1 on `[0, T/2]`, 0 on `[3T/4, ∞)`, smooth bridge in between.
pub fn cutoff_value(horizon: f64, s: f64) -> f64 {
    let q = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    if s <= 0.5 * horizon {
        1.0
    } else if s >= 0.75 * horizon {
        0.0
    } else {
        let a = q(0.75 * horizon - s);
        let b = q(s - 0.5 * horizon);
        a / (a + b)
    }
}

/// The cutoff sampled on a grid.
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    horizon: f64,
    values: SampledPath,
}

impl CutoffFunction {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn values(&self) -> &SampledPath {
        &self.values
    }
    pub fn at(&self, k: usize) -> f64 {
        self.values.value(k)[0]
    }
}

/// `h_T` with horizon `horizon` on the grid `t0 + k dt`, `k ≤ n_steps`.
pub fn cutoff_h(horizon: f64, t0: f64, dt: f64, n_steps: usize) -> Result<CutoffFunction> {
    if !(horizon > 0.0) {
        return Err(invalid("cutoff horizon must be positive"));
    }
    if t0 > 0.0 || t0 + n_steps as f64 * dt < horizon * (1.0 - 1e-12) {
        return Err(invalid(format!("grid must cover [0, {horizon}]")));
    }
    Ok(CutoffFunction {
        horizon,
        values: SampledPath::from_fn(t0, dt, n_steps, 1, |t, out| out[0] = cutoff_value(horizon, t)),
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// `K_s = J_{0,s}^{-1} V(X_s)` along one flow, with the operations built on it.
#[derive(Debug, Clone)]
pub struct MalliavinOperator {
    n: usize,
    d: usize,
    /// row-major n×d per grid point
    k: SampledPath,
}

impl MalliavinOperator {
    pub fn new(fields: &VectorFieldSet, flow: &FlowPath) -> Result<Self> {
        let (n, d) = (fields.n(), fields.d());
        if flow.n() != n {
            return Err(Error::Dimension(format!("flow has dimension {}, fields {}", flow.n(), n)));
        }
        let progs: Vec<ProgramVec> = (1..=d).map(|i| ProgramVec::compile(fields.field(i))).collect();
        let mut stack = Vec::new();
        let mut vcol = vec![0.0; n];
        let mut vx = vec![0.0; n * d];
        let x = &flow.x;
        let mut k = SampledPath::zeros(x.t0(), x.dt(), x.n_steps(), n * d);
        for p in 0..x.len() {
            for (i, prog) in progs.iter().enumerate() {
                prog.eval_into(x.value(p), &mut vcol, &mut stack);
                for a in 0..n {
                    vx[a * d + i] = vcol[a];
                }
            }
            let jinv = flow.jinv.value(p);
            let out = k.value_mut(p);
            for a in 0..n {
                for i in 0..d {
                    out[a * d + i] = (0..n).map(|b| jinv[a * n + b] * vx[b * d + i]).sum();
                }
            }
        }
        Ok(Self { n, d, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    /// The path `K_s`, row-major n×d per point.
    pub fn conjugated(&self) -> &SampledPath {
        &self.k
    }

    fn k_at(&self, p: usize) -> &[f64] {
        self.k.value(p)
    }

    /// `𝒜_{t_end} v` by the trapezoid rule; `v` must live on the flow grid
    /// (it may be shorter than the flow but must reach `t_end`).
    pub fn operator_a(&self, v: &SampledPath, t_end: f64) -> Result<Vec<f64>> {
        if v.dim() != self.d || (v.dt() - self.k.dt()).abs() > 1e-12 * self.k.dt() || v.t0() != self.k.t0() {
            return Err(Error::Dimension("control path is not on the flow grid".into()));
        }
        let last = self
            .k
            .index_of(t_end)
            .filter(|&i| i < v.len())
            .ok_or_else(|| invalid(format!("t_end = {t_end} is not a grid point covered by v")))?;
        let w = trapezoid_weights(last + 1, self.k.dt());
        let mut out = vec![0.0; self.n];
        for p in 0..=last {
            let (kp, vp) = (self.k_at(p), v.value(p));
            for a in 0..self.n {
                out[a] += w[p] * (0..self.d).map(|i| kp[a * self.d + i] * vp[i]).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// `(𝒜*ξ)(s) = K_s^T ξ` on the flow grid.
    pub fn operator_a_adjoint(&self, xi: &[f64]) -> Result<SampledPath> {
        if xi.len() != self.n {
            return Err(Error::Dimension(format!("ξ has length {}, expected {}", xi.len(), self.n)));
        }
        let (n, d) = (self.n, self.d);
        let mut out = SampledPath::zeros(self.k.t0(), self.k.dt(), self.k.n_steps(), d);
        for p in 0..self.k.len() {
            let kp = self.k.value(p);
            let o = out.value_mut(p);
            for i in 0..d {
                o[i] = (0..n).map(|a| kp[a * d + i] * xi[a]).sum();
            }
        }
        Ok(out)
    }

    /// `∫_0^T h(s) K_s K_s^T ds` over the whole flow grid; `None` gives the
    /// reduced matrix `Ĉ_T`.
    pub fn matrix(&self, cutoff: Option<&CutoffFunction>) -> Result<DMatrix<f64>> {
        if let Some(h) = cutoff {
            if !h.values.same_grid(&SampledPath::zeros(self.k.t0(), self.k.dt(), self.k.n_steps(), 1)) {
                return Err(Error::Dimension("cutoff is not on the flow grid".into()));
            }
        }
        let (n, d) = (self.n, self.d);
        let w = trapezoid_weights(self.k.len(), self.k.dt());
        let mut c = DMatrix::zeros(n, n);
        for p in 0..self.k.len() {
            let hw = w[p] * cutoff.map_or(1.0, |h| h.at(p));
            if hw == 0.0 {
                continue;
            }
            let kp = self.k.value(p);
            for a in 0..n {
                for b in 0..=a {
                    let s: f64 = (0..d).map(|i| kp[a * d + i] * kp[b * d + i]).sum();
                    c[(a, b)] += hw * s;
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                c[(b, a)] = c[(a, b)];
            }
        }
        symmetrize(&mut c);
        Ok(c)
    }

    /// `v = h 𝒜*(𝒜 h 𝒜*)^{-1} ξ`, zero where `h` vanishes.
    pub fn control(&self, xi: &[f64], cutoff: &CutoffFunction) -> Result<Control> {
        let c = self.matrix(Some(cutoff))?;
        let lmin = lambda_min(&c);
        if !(lmin > 1e-10) {
            return Err(Error::SingularControl { lambda_min: lmin });
        }
        let eig = SymmetricEigen::new(c);
        let rhs = DVector::from_column_slice(xi);
        // solve through the eigenbasis; C is well conditioned when accepted
        let coeffs_e = eig.eigenvectors.transpose() * rhs;
        let scaled = DVector::from_iterator(self.n, coeffs_e.iter().zip(eig.eigenvalues.iter()).map(|(a, l)| a / l));
        let eta = &eig.eigenvectors * scaled;
        let mut v = self.operator_a_adjoint(eta.as_slice())?;
        for p in 0..v.len() {
            let h = cutoff.at(p);
            v.value_mut(p).iter_mut().for_each(|x| *x *= h);
        }
        let av = self.operator_a(&v, self.k.end_time())?;
        let residual = av.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok(Control {
            v,
            eta: eta.as_slice().to_vec(),
            residual,
            lambda_min: lmin,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Control {
    pub v: SampledPath,
    /// `C_T^{-1} ξ`
    pub eta: Vec<f64>,
    /// `|𝒜v - ξ|`
    pub residual: f64,
    /// `λ_min(C_T)`
    pub lambda_min: f64,
}

pub fn operator_a(fields: &VectorFieldSet, flow: &FlowPath, v: &SampledPath, t_end: f64) -> Result<Vec<f64>> {
    MalliavinOperator::new(fields, flow)?.operator_a(v, t_end)
}

pub fn operator_a_adjoint(fields: &VectorFieldSet, flow: &FlowPath, xi: &[f64]) -> Result<SampledPath> {
    MalliavinOperator::new(fields, flow)?.operator_a_adjoint(xi)
}

pub fn malliavin_matrix(fields: &VectorFieldSet, flow: &FlowPath, cutoff: Option<&CutoffFunction>) -> Result<DMatrix<f64>> {
    MalliavinOperator::new(fields, flow)?.matrix(cutoff)
}

/// The control for `ξ` with cutoff horizon `horizon` on the flow grid.
pub fn control_v(fields: &VectorFieldSet, flow: &FlowPath, xi: &[f64], horizon: f64) -> Result<Control> {
    let op = MalliavinOperator::new(fields, flow)?;
    let x = &flow.x;
    let h = cutoff_h(horizon, x.t0(), x.dt(), x.n_steps())?;
    op.control(xi, &h)
}

#[derive(Debug, Clone)]
pub struct MalliavinReport {
    pub c_t: DMatrix<f64>,
    pub c_hat_t: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_min_hat: f64,
    /// `λ_min(Ĉ_T - C_T)`, non-negative up to rounding
    pub loewner_gap: f64,
    pub control_residual: Option<f64>,
    pub m1: Option<Estimate>,
    pub m2: Option<Estimate>,
}

impl MalliavinReport {
    pub fn loewner_ok(&self) -> bool {
        self.loewner_gap >= -1e-10
    }
}

/// Matrices and (if `ξ` is given and `C_T` is invertible) the control
/// residual along one flow, cutoff horizon `T` = flow end.
pub fn malliavin_report(fields: &VectorFieldSet, flow: &FlowPath, xi: Option<&[f64]>) -> Result<MalliavinReport> {
    let op = MalliavinOperator::new(fields, flow)?;
    let x = &flow.x;
    let h = cutoff_h(x.end_time(), x.t0(), x.dt(), x.n_steps())?;
    let c_t = op.matrix(Some(&h))?;
    let c_hat_t = op.matrix(None)?;
    let gap = lambda_min(&(&c_hat_t - &c_t));
    let control_residual = match xi {
        Some(xi) => match op.control(xi, &h) {
            Ok(c) => Some(c.residual),
            Err(Error::SingularControl { .. }) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(MalliavinReport {
        lambda_min: lambda_min(&c_t),
        lambda_min_hat: lambda_min(&c_hat_t),
        c_t,
        c_hat_t,
        loewner_gap: gap,
        control_residual,
        m1: None,
        m2: None,
    })
}

/// `ṽ = 𝒟^{H-1/2} v / (α_H Γ(H+1/2))` on `[0, S]`.
///
/// With this normalization, shifting the Wiener increments by `ṽ ds`
/// shifts the Volterra part of the driver by `∫_0^t v ds`, so that
/// `E[ψ ∫⟨ṽ, dW⟩]` is the derivative of `E ψ` in the direction `v`.
#[derive(Debug, Clone)]
pub struct TildeV {
    /// grid values; index 0 holds the finite part (the true value is
    /// singular like `s^{1/2-H}` when `v(0) != 0`)
    pub values: SampledPath,
    /// per-bin averages, `n_bins × d` row-major
    pub bin_avg: Vec<f64>,
    /// per-bin integrals of `|ṽ|²`
    pub bin_sq: Vec<f64>,
}

impl TildeV {
    pub fn n_bins(&self) -> usize {
        self.values.n_steps()
    }

    /// `∫_a^b |ṽ|²` over whole bins (`a`, `b` rounded to the grid).
    pub fn sq_integral(&self, a: f64, b: f64) -> f64 {
        let dt = self.values.dt();
        let lo = ((a / dt).round().max(0.0)) as usize;
        let hi = ((b / dt).round() as usize).min(self.n_bins());
        self.bin_sq[lo.min(hi)..hi].iter().sum()
    }

    pub fn total_sq(&self) -> f64 {
        self.bin_sq.iter().sum()
    }

    /// `Σ_j ⟨ṽ_j, ΔW_j⟩` over the first `dw.len() / d` bins.
    pub fn wiener_integral(&self, dw: &[f64]) -> f64 {
        let n = dw.len().min(self.bin_avg.len());
        self.bin_avg[..n].iter().zip(&dw[..n]).map(|(a, b)| a * b).sum()
    }
}

/// Fractional derivative of the control, extended by zero to `[0, S]`.
pub fn tilde_v(v: &SampledPath, h: f64, horizon: f64) -> Result<TildeV> {
    if v.t0() != 0.0 {
        return Err(invalid("control must start at t = 0"));
    }
    let dt = v.dt();
    let n_total = ((horizon / dt).round() as usize).max(v.n_steps());
    let ops = FractionalOps::new(h - 0.5, dt, n_total)?;
    tilde_v_with(&ops, v, n_total)
}

fn tilde_v_with(ops: &FractionalOps, v: &SampledPath, n_total: usize) -> Result<TildeV> {
    let d = v.dim();
    let dt = v.dt();
    let a = ops.alpha();
    let h = a + 0.5;
    let scale = 1.0 / (alpha_h(h) * gamma(h + 0.5));
    let mut ext = SampledPath::zeros(0.0, dt, n_total, d);
    ext.data_mut()[..v.data().len()].copy_from_slice(v.data());
    let mut vals = ops.marchaud_unchecked(&ext);
    vals.data_mut().iter_mut().for_each(|x| *x *= scale);
    let s0: Vec<f64> = v.value(0).iter().map(|x| x * scale / gamma(1.0 - a)).collect();
    let mut bin_avg = vec![0.0; n_total * d];
    let mut bin_sq = vec![0.0; n_total];
    for i in 0..d {
        // first bin: singular part s0 s^{-a} plus a linear remainder
        let sing = s0[i] * dt.powf(-a);
        let r = vals.value(1)[i] - sing;
        bin_avg[i] = sing / (1.0 - a) + 0.5 * r;
        bin_sq[0] += s0[i] * s0[i] * dt.powf(1.0 - 2.0 * a) / (1.0 - 2.0 * a)
            + 2.0 * s0[i] * r * dt.powf(1.0 - a) / (2.0 - a)
            + r * r * dt / 3.0;
    }
    for j in 1..n_total {
        let (l, rr) = (vals.value(j), vals.value(j + 1));
        let mut sq = 0.0;
        for i in 0..d {
            bin_avg[j * d + i] = 0.5 * (l[i] + rr[i]);
            sq += 0.5 * (l[i] * l[i] + rr[i] * rr[i]);
        }
        bin_sq[j] = sq * dt;
    }
    Ok(TildeV {
        values: vals,
        bin_avg,
        bin_sq,
    })
}

/// `(F(W + ε e_i) - F(W - ε e_i)) / (2ε)` where `e_i` bumps the Wiener
/// increment with flat index `index` (bin `index / d`, component `index % d`).
///
/// A bump of size `ε` on one increment is the direction `ε 1_bin / dt`
/// in the Cameron-Martin space, so the result is the derivative density
/// `D_t F` on that bin (for `F = W(T)` it equals 1).
pub fn malliavin_derivative_fd(functional: impl Fn(&[f64]) -> f64, dw: &[f64], index: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("bump must be positive"));
    }
    if index >= dw.len() {
        return Err(invalid(format!("bin index {index} out of range")));
    }
    let mut w = dw.to_vec();
    w[index] = dw[index] + eps;
    let fp = functional(&w);
    w[index] = dw[index] - eps;
    let fm = functional(&w);
    Ok((fp - fm) / (2.0 * eps))
}

fn check_noise(fields: &VectorFieldSet, x0: &[f64], noise: &ConditionedNoise) -> Result<()> {
    if noise.dim() != fields.d() {
        return Err(Error::Dimension(format!(
            "noise has {} components, the fields need {}",
            noise.dim(),
            fields.d()
        )));
    }
    if x0.len() != fields.n() {
        return Err(Error::Dimension(format!("x0 has length {}, expected {}", x0.len(), fields.n())));
    }
    Ok(())
}

/// Configuration of [`skorohod_terms`].
#[derive(Debug, Clone)]
pub struct SkorohodConfig {
    pub xi: Vec<f64>,
    /// cutoff horizon of the control
    pub control_horizon: f64,
    /// grid horizon for `ṽ`
    pub tilde_horizon: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub with_m2: bool,
}

#[derive(Debug, Clone)]
pub struct SkorohodTerms {
    pub m1: Estimate,
    pub m2: Option<Estimate>,
    /// paths dropped because the control could not be built or the flow failed
    pub excluded: usize,
}

/// `M1 = Ẽ∫|ṽ|²` and `M2 = Ẽ∬|D_t ṽ(s)|² ds dt` over conditioned draws.
/// `D_t` is the finite-difference derivative with bump `1e-4 √dt`.
pub fn skorohod_terms(fields: &VectorFieldSet, x0: &[f64], noise: &ConditionedNoise, cfg: &SkorohodConfig) -> Result<SkorohodTerms> {
    check_noise(fields, x0, noise)?;
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let dt = noise.dt();
    let n_total = ((cfg.tilde_horizon / dt).round() as usize).max(noise.n_steps());
    let h = noise.kernel().h();
    let ops = FractionalOps::new(h - 0.5, dt, n_total)?;
    let cutoff = cutoff_h(cfg.control_horizon, 0.0, dt, noise.n_steps())?;
    let d = fields.d();
    let eps = 1e-4 * dt.sqrt();
    // bins after the cutoff support cannot influence v
    let active_bins = ((0.75 * cfg.control_horizon / dt).ceil() as usize).min(noise.n_steps());

    let control_for = |dw: &[f64]| -> Result<SampledPath> {
        let flow = solver.solve(x0, &noise.driver_from_increments(dw))?;
        let op = MalliavinOperator::new(fields, &flow)?;
        Ok(op.control(&cfg.xi, &cutoff)?.v)
    };

    let per_path: Vec<Option<(f64, f64)>> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(cfg.seed, p as u64);
            let dw = noise.draw_increments(&mut rng);
            let v = match control_for(&dw) {
                Ok(v) => v,
                Err(Error::SingularControl { .. } | Error::BlowUp { .. } | Error::Consistency { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let m1 = tilde_v_with(&ops, &v, n_total)?.total_sq();
            let mut m2 = 0.0;
            if cfg.with_m2 {
                let mut w = dw.clone();
                for idx in 0..active_bins * d {
                    w[idx] = dw[idx] + eps;
                    let vp = control_for(&w);
                    w[idx] = dw[idx] - eps;
                    let vm = control_for(&w);
                    w[idx] = dw[idx];
                    let (Ok(vp), Ok(vm)) = (vp, vm) else {
                        return Ok(None);
                    };
                    let dv = vp.axpy(-1.0, &vm)?.map(|x| x / (2.0 * eps));
                    m2 += dt * tilde_v_with(&ops, &dv, n_total)?.total_sq();
                }
            }
            Ok(Some((m1, m2)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = per_path.iter().flatten().cloned().collect();
    if kept.is_empty() {
        return Err(invalid("no path produced a control"));
    }
    let m1: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let m2: Vec<f64> = kept.iter().map(|p| p.1).collect();
    Ok(SkorohodTerms {
        m1: mean_stderr(&m1),
        m2: cfg.with_m2.then(|| mean_stderr(&m2)),
        excluded: cfg.n_mc - kept.len(),
    })
}

/// Per-path quantities of the Malliavin matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDiagnostics {
    pub lambda_min: f64,
    pub lambda_min_hat: f64,
    /// `λ_min(Ĉ_T - C_T)`
    pub loewner_gap: f64,
    /// `|𝒜v - ξ| / |ξ|` when `ξ` was given and `C_T` is invertible
    pub control_residual: Option<f64>,
}

/// Matrix diagnostics for `n_mc` conditioned draws; `T` is the noise
/// horizon and the cutoff uses the same horizon. Failed flows give `None`.
pub fn malliavin_ensemble(
    fields: &VectorFieldSet,
    x0: &[f64],
    noise: &ConditionedNoise,
    n_mc: usize,
    seed: u64,
    xi: Option<&[f64]>,
) -> Result<Vec<Option<PathDiagnostics>>> {
    check_noise(fields, x0, noise)?;
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let t = noise.dt() * noise.n_steps() as f64;
    let cutoff = cutoff_h(t, 0.0, noise.dt(), noise.n_steps())?;
    let xi_norm = xi.map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt());
    (0..n_mc)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let flow = match solver.solve(x0, &noise.draw_driver(&mut rng)) {
                Ok(f) => f,
                Err(Error::BlowUp { .. } | Error::Consistency { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let op = MalliavinOperator::new(fields, &flow)?;
            let c = op.matrix(Some(&cutoff))?;
            let c_hat = op.matrix(None)?;
            let control_residual = match xi {
                Some(xi) => match op.control(xi, &cutoff) {
                    Ok(ctl) => Some(ctl.residual / xi_norm.unwrap()),
                    Err(Error::SingularControl { .. }) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            Ok(Some(PathDiagnostics {
                lambda_min: lambda_min(&c),
                lambda_min_hat: lambda_min(&c_hat),
                loewner_gap: lambda_min(&(c_hat - c)),
                control_residual,
            }))
        })
        .collect()
}

/// `λ_min(C_T)` for `n_mc` conditioned draws (see [`malliavin_ensemble`]).
pub fn lambda_min_samples(
    fields: &VectorFieldSet,
    x0: &[f64],
    noise: &ConditionedNoise,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    Ok(malliavin_ensemble(fields, x0, noise, n_mc, seed, None)?
        .into_iter()
        .map(|d| d.map(|d| d.lambda_min))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub eps: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub n_mc: usize,
}

#[derive(Debug, Clone)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// least-squares slope of `log p̂` against `log ε` over rows with `p̂ > 0`
    pub slope: Option<f64>,
    /// `p̂` strictly increasing in `ε` along the grid
    pub strictly_monotone: bool,
    pub failures: usize,
    pub lambda_median: f64,
}

/// `n_points` log-spaced levels from the value with `n_below` samples at or
/// below it up to the `upper_quantile` quantile.
pub fn default_eps_grid(sorted: &[f64], n_below: usize, upper_quantile: f64, n_points: usize) -> Vec<f64> {
    let m = sorted.len();
    if m == 0 || n_points == 0 {
        return Vec::new();
    }
    let hi = sorted[((upper_quantile * m as f64) as usize).clamp(1, m) - 1];
    let lo = sorted[n_below.clamp(1, m) - 1];
    if n_points == 1 || !(lo > 0.0) || lo >= hi {
        return vec![hi; 1];
    }
    let (ll, lh) = (lo.ln(), hi.ln());
    (0..n_points).map(|i| (ll + (lh - ll) * i as f64 / (n_points - 1) as f64).exp()).collect()
}

pub fn fit_loglog_slope(rows: &[TailRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.p_hat > 0.0 && r.eps > 0.0).map(|r| (r.eps.ln(), r.p_hat.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Empirical `P(λ_min(C_T) ≤ ε)` on `eps_grid`. The default grid spans the
/// tail from the level with 50 samples below it to the 10% quantile.
pub fn lambda_min_tail(
    fields: &VectorFieldSet,
    x0: &[f64],
    noise: &ConditionedNoise,
    n_mc: usize,
    seed: u64,
    eps_grid: Option<&[f64]>,
) -> Result<TailReport> {
    let samples = lambda_min_samples(fields, x0, noise, n_mc, seed)?;
    let mut lam: Vec<f64> = samples.iter().flatten().cloned().collect();
    lam.sort_by(|a, b| a.total_cmp(b));
    Ok(tail_from_samples(&lam, n_mc - lam.len(), eps_grid))
}

pub fn tail_from_samples(sorted: &[f64], failures: usize, eps_grid: Option<&[f64]>) -> TailReport {
    let grid = match eps_grid {
        Some(g) => g.to_vec(),
        None => default_eps_grid(sorted, 50, 0.1, 5),
    };
    let m = sorted.len();
    let rows: Vec<TailRow> = grid
        .iter()
        .map(|&eps| {
            let count = sorted.partition_point(|&l| l <= eps);
            let p = count as f64 / m as f64;
            TailRow {
                eps,
                p_hat: p,
                stderr: (p * (1.0 - p) / m as f64).sqrt(),
                n_mc: m,
            }
        })
        .collect();
    let strictly_monotone = rows.windows(2).all(|w| w[1].eps > w[0].eps && w[1].p_hat > w[0].p_hat);
    TailReport {
        slope: fit_loglog_slope(&rows),
        strictly_monotone,
        failures,
        lambda_median: if m > 0 { sorted[m / 2] } else { f64::NAN },
        rows,
    }
}

/// Configuration of [`gradient_estimator`].
#[derive(Debug, Clone)]
pub struct GradientConfig {
    pub xi: Vec<f64>,
    pub control_horizon: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// step of the common-random-number finite-difference oracle
    pub fd_step: f64,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub estimate: Estimate,
    pub fd_oracle: Estimate,
    pub rel_err: f64,
    pub control_residual: f64,
}

/// `Ẽ[ψ(X) Σ_j ⟨ṽ_j, ΔW_j⟩]` for field sets with constant noise and linear
/// drift, where the control is a deterministic function of the past.
///
/// `psi` acts on the state path over the noise horizon and should only
/// depend on times after `3/4` of the control horizon.
pub fn gradient_estimator(
    fields: &VectorFieldSet,
    x0: &[f64],
    noise: &ConditionedNoise,
    psi: &(dyn Fn(&SampledPath) -> f64 + Sync),
    cfg: &GradientConfig,
) -> Result<GradientReport> {
    check_noise(fields, x0, noise)?;
    if !fields.is_additive_linear() {
        return Err(Error::Unsupported(
            "the gradient estimator needs constant noise fields and a linear drift".into(),
        ));
    }
    if cfg.xi.len() != fields.n() {
        return Err(Error::Dimension("ξ must have the state dimension".into()));
    }
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let dt = noise.dt();
    let t_end = dt * noise.n_steps() as f64;
    if cfg.control_horizon > t_end * (1.0 + 1e-12) {
        return Err(invalid("control horizon exceeds the noise horizon"));
    }
    // J and V(X) do not depend on the noise here
    let flow = solver.solve(x0, noise.drift())?;
    let op = MalliavinOperator::new(fields, &flow)?;
    let cutoff = cutoff_h(cfg.control_horizon, 0.0, dt, noise.n_steps())?;
    let control = op.control(&cfg.xi, &cutoff)?;
    let tv = tilde_v(&control.v, noise.kernel().h(), t_end)?;
    let shift = |s: f64| -> Vec<f64> { x0.iter().zip(&cfg.xi).map(|(a, b)| a + s * b).collect() };
    let (xp, xm) = (shift(cfg.fd_step), shift(-cfg.fd_step));

    let per_path: Vec<(f64, f64)> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(cfg.seed, p as u64);
            let dw = noise.draw_increments(&mut rng);
            let driver = noise.driver_from_increments(&dw);
            let x = solver.solve_state(x0, &driver)?;
            let est = psi(&x) * tv.wiener_integral(&dw);
            let fp = psi(&solver.solve_state(&xp, &driver)?);
            let fm = psi(&solver.solve_state(&xm, &driver)?);
            Ok((est, (fp - fm) / (2.0 * cfg.fd_step)))
        })
        .collect::<Result<_>>()?;
    let est: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let fd: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let estimate = mean_stderr(&est);
    let fd_oracle = mean_stderr(&fd);
    Ok(GradientReport {
        rel_err: (estimate.mean - fd_oracle.mean).abs() / fd_oracle.mean.abs(),
        estimate,
        fd_oracle,
        control_residual: control.residual,
    })
}

#[derive(Debug, Clone)]
pub struct ResponseCheck {
    /// `(X^ε_T - X_T) / ε`
    pub finite_difference: Vec<f64>,
    /// `J_{0,T} ξ`
    pub predicted: Vec<f64>,
    pub rel_err: f64,
    pub control_residual: f64,
}

/// Perturb the driver by `ε ∫_0^t v ds`, with `v` the control for `ξ`, and
/// compare the response of `X_T` with `J_{0,T} ξ`.
pub fn first_order_response(
    fields: &VectorFieldSet,
    x0: &[f64],
    driver: &SampledPath,
    xi: &[f64],
    control_horizon: f64,
    eps: f64,
) -> Result<ResponseCheck> {
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let flow = solver.solve(x0, driver)?;
    let control = control_v(fields, &flow, xi, control_horizon)?;
    let v = &control.v;
    let d = driver.dim();
    let mut pert = driver.clone();
    let mut acc = vec![0.0; d];
    for k in 1..driver.len() {
        let (a, b) = (v.value(k - 1), v.value(k));
        for i in 0..d {
            acc[i] += 0.5 * driver.dt() * (a[i] + b[i]);
        }
        pert.value_mut(k).iter_mut().zip(&acc).for_each(|(p, a)| *p += eps * a);
    }
    let xe = solver.solve_state(x0, &pert)?;
    let last = flow.x.n_steps();
    let fd: Vec<f64> = xe.last().iter().zip(flow.x.last()).map(|(a, b)| (a - b) / eps).collect();
    let j = flow.j_at(last);
    let pred = j * DVector::from_column_slice(xi);
    let pred: Vec<f64> = pred.iter().cloned().collect();
    let num = fd.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den = pred.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(ResponseCheck {
        finite_difference: fd,
        predicted: pred,
        rel_err: num / den,
        control_residual: control.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fou_flow(t: f64, n: usize) -> (VectorFieldSet, FlowPath) {
        let fs = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1).unwrap();
        let driver = SampledPath::zeros(0.0, t / n as f64, n, 1);
        let flow = FlowSolver::new(&fs, FlowOptions::default()).solve(&[0.0], &driver).unwrap();
        (fs, flow)
    }

    #[test]
    fn cutoff_plateaus() {
        assert_eq!(cutoff_value(2.0, 0.5), 1.0);
        assert_eq!(cutoff_value(2.0, 1.8), 0.0);
        assert!((cutoff_value(2.0, 1.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fou_reduced_matrix() {
        let t = 1.0;
        let (fs, flow) = fou_flow(t, 1 << 10);
        let c = malliavin_matrix(&fs, &flow, None).unwrap();
        let exact = ((2.0 * t).exp() - 1.0) / 2.0;
        assert!((c[(0, 0)] - exact).abs() / exact < 1e-4);
        let v = SampledPath::from_fn(0.0, flow.x.dt(), flow.x.n_steps(), 1, |_, o| o[0] = 1.0);
        let a = operator_a(&fs, &flow, &v, 1.0).unwrap();
        assert!((a[0] - (1f64.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn control_solves() {
        let (fs, flow) = fou_flow(1.0, 256);
        let c = control_v(&fs, &flow, &[1.0], 1.0).unwrap();
        assert!(c.residual < 1e-12);
        let k = flow.x.index_of(0.8125).unwrap();
        assert_eq!(c.v.value(k)[0], 0.0);
    }

    #[test]
    fn fd_derivative_of_terminal_value() {
        let dw = vec![0.1, -0.2, 0.3];
        let f = |w: &[f64]| w.iter().sum::<f64>();
        for i in 0..3 {
            assert!((malliavin_derivative_fd(f, &dw, i, 1e-4).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
