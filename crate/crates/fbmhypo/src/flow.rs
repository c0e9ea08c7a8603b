//! Pathwise solver for `dX = V_0(X) dt + Σ V_i(X) dB^i` driven by a sampled
//! path with Hölder exponent above 1/2, together with the Jacobian `J`, its
//! inverse and the second variation of the flow.
//!
//! Stepping is Heun (explicit trapezoid) on the joint system, which is
//! consistent of order `2γ - 1 > 0` per step for Young integrals.

use crate::error::{Error, Result};
use crate::expr::{differentiate, ProgramVec, VectorFieldSet};
use crate::holder::holder_norm_full;
use crate::path::SampledPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// integrate the second variation `∂²X/∂x0²`
    pub second_variation: bool,
    /// largest admissible `max |J Jinv - I|` entry before the solve is
    /// rejected; the defect actually reached is in `FlowPath`
    pub consistency_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            second_variation: false,
            consistency_tol: 1e-3,
        }
    }
}

/// Solution of the flow along one driving path.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub x: SampledPath,
    /// `J_{0,t}`, row-major n×n per point
    pub j: SampledPath,
    /// `J_{0,t}^{-1}`, row-major n×n per point
    pub jinv: SampledPath,
    /// `Z[a][b][c] = ∂²X_a / ∂x0_b ∂x0_c`, flattened row-major per point
    pub second_variation: Option<SampledPath>,
    pub driver: SampledPath,
    /// largest `|J Jinv - I|` entry seen along the path
    pub max_inverse_defect: f64,
}

impl FlowPath {
    pub fn n(&self) -> usize {
        self.x.dim()
    }

    pub fn j_at(&self, k: usize) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_row_slice(n, n, self.j.value(k))
    }

    pub fn jinv_at(&self, k: usize) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_row_slice(n, n, self.jinv.value(k))
    }

    /// `Z(t_k)(u, v)`: the second variation contracted against two
    /// initial displacements.
    pub fn second_variation_at(&self, k: usize, u: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let z = self.second_variation.as_ref()?.value(k);
        let n = self.n();
        Some(
            (0..n)
                .map(|a| {
                    let mut s = 0.0;
                    for b in 0..n {
                        for c in 0..n {
                            s += z[(a * n + b) * n + c] * u[b] * v[c];
                        }
                    }
                    s
                })
                .collect(),
        )
    }
}

/// Compiled fields with their first and (optionally) second derivatives.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    n: usize,
    d: usize,
    fields: Vec<ProgramVec>,
    jac: Vec<ProgramVec>,
    hess: Option<Vec<ProgramVec>>,
    opts: FlowOptions,
}

struct Scratch {
    stack: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
    d2v: Vec<f64>,
}

impl FlowSolver {
    pub fn new(fields: &VectorFieldSet, opts: FlowOptions) -> Self {
        let n = fields.n();
        let jacs: Vec<Vec<Vec<crate::expr::Expr>>> = fields.fields().iter().map(|f| differentiate(f, n)).collect();
        let hess = opts.second_variation.then(|| {
            jacs.iter()
                .map(|jm| {
                    // [a][j][k] = ∂²V_a / ∂x_j ∂x_k
                    let exprs: Vec<crate::expr::Expr> = jm
                        .iter()
                        .flat_map(|row| row.iter().flat_map(|e| (0..n).map(move |k| e.diff(k))))
                        .collect();
                    ProgramVec::compile(exprs.iter())
                })
                .collect()
        });
        Self {
            n,
            d: fields.d(),
            fields: fields.fields().iter().map(|f| ProgramVec::compile(f.iter())).collect(),
            jac: jacs.iter().map(|jm| ProgramVec::compile(jm.iter().flatten())).collect(),
            hess,
            opts,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn options(&self) -> &FlowOptions {
        &self.opts
    }

    fn scratch(&self) -> Scratch {
        let n = self.n;
        Scratch {
            stack: Vec::new(),
            v: vec![0.0; n],
            dv: vec![0.0; n * n],
            d2v: vec![0.0; n * n * n],
        }
    }

    fn check_driver(&self, x0: &[f64], driver: &SampledPath) -> Result<()> {
        if x0.len() != self.n {
            return Err(Error::Dimension(format!("x0 has length {}, expected {}", x0.len(), self.n)));
        }
        if driver.dim() != self.d {
            return Err(Error::Dimension(format!(
                "driver has {} components, the fields need {}",
                driver.dim(),
                self.d
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("initial point is not finite".into()));
        }
        Ok(())
    }

    /// Increment `Σ_i F_i(S) w_i` for the state part only; `w[0] = dt`.
    fn state_rhs(&self, x: &[f64], w: &[f64], out: &mut [f64], s: &mut Scratch) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            self.fields[i].eval_into(x, &mut s.v, &mut s.stack);
            for a in 0..self.n {
                out[a] += wi * s.v[a];
            }
        }
    }

    /// Solve for the state only.
    pub fn solve_state(&self, x0: &[f64], driver: &SampledPath) -> Result<SampledPath> {
        self.check_driver(x0, driver)?;
        let n = self.n;
        let steps = driver.n_steps();
        let mut out = SampledPath::zeros(driver.t0(), driver.dt(), steps, n);
        out.value_mut(0).copy_from_slice(x0);
        let mut s = self.scratch();
        let mut w = vec![0.0; self.d + 1];
        let (mut k1, mut k2, mut pred) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        w[0] = driver.dt();
        for k in 0..steps {
            let (b0, b1) = (driver.value(k), driver.value(k + 1));
            for i in 0..self.d {
                w[i + 1] = b1[i] - b0[i];
            }
            let x = out.value(k).to_vec();
            self.state_rhs(&x, &w, &mut k1, &mut s);
            for a in 0..n {
                pred[a] = x[a] + k1[a];
            }
            self.state_rhs(&pred, &w, &mut k2, &mut s);
            let next = out.value_mut(k + 1);
            for a in 0..n {
                next[a] = x[a] + 0.5 * (k1[a] + k2[a]);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    step: k + 1,
                    time: driver.time(k + 1),
                });
            }
        }
        Ok(out)
    }

    /// Increment of the joint state `(X, J, Jinv, Z)` for weights `w`.
    fn joint_rhs(&self, st: &[f64], w: &[f64], out: &mut [f64], s: &mut Scratch) {
        let n = self.n;
        let nn = n * n;
        let (x, rest) = st.split_at(n);
        let (jm, rest) = rest.split_at(nn);
        let (ji, z) = rest.split_at(nn);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            self.fields[i].eval_into(x, &mut s.v, &mut s.stack);
            self.jac[i].eval_into(x, &mut s.dv, &mut s.stack);
            let (ox, orest) = out.split_at_mut(n);
            let (oj, orest) = orest.split_at_mut(nn);
            let (oi, oz) = orest.split_at_mut(nn);
            for a in 0..n {
                ox[a] += wi * s.v[a];
            }
            // J' = DV J, Jinv' = -Jinv DV
            for a in 0..n {
                for b in 0..n {
                    let mut p = 0.0;
                    let mut q = 0.0;
                    for c in 0..n {
                        p += s.dv[a * n + c] * jm[c * n + b];
                        q += ji[a * n + c] * s.dv[c * n + b];
                    }
                    oj[a * n + b] += wi * p;
                    oi[a * n + b] -= wi * q;
                }
            }
            if let Some(hess) = &self.hess {
                hess[i].eval_into(x, &mut s.d2v, &mut s.stack);
                // Z_a,bc' = Σ_j DV_aj Z_j,bc + Σ_jk D²V_a,jk J_jb J_kc
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += s.dv[a * n + j] * z[(j * n + b) * n + c];
                                let mut inner = 0.0;
                                for k in 0..n {
                                    inner += s.d2v[(a * n + j) * n + k] * jm[k * n + c];
                                }
                                acc += inner * jm[j * n + b];
                            }
                            oz[(a * n + b) * n + c] += wi * acc;
                        }
                    }
                }
            }
        }
    }

    /// Solve for `X`, `J`, `Jinv` and, if enabled, the second variation.
    pub fn solve(&self, x0: &[f64], driver: &SampledPath) -> Result<FlowPath> {
        self.check_driver(x0, driver)?;
        let n = self.n;
        let nn = n * n;
        let with_z = self.hess.is_some();
        let size = n + 2 * nn + if with_z { n * nn } else { 0 };
        let steps = driver.n_steps();
        let (t0, dt) = (driver.t0(), driver.dt());
        let mut xs = SampledPath::zeros(t0, dt, steps, n);
        let mut js = SampledPath::zeros(t0, dt, steps, nn);
        let mut jis = SampledPath::zeros(t0, dt, steps, nn);
        let mut zs = with_z.then(|| SampledPath::zeros(t0, dt, steps, n * nn));
        let mut st = vec![0.0; size];
        st[..n].copy_from_slice(x0);
        for a in 0..n {
            st[n + a * n + a] = 1.0;
            st[n + nn + a * n + a] = 1.0;
        }
        let store = |k: usize, st: &[f64], xs: &mut SampledPath, js: &mut SampledPath, jis: &mut SampledPath, zs: &mut Option<SampledPath>| {
            xs.value_mut(k).copy_from_slice(&st[..n]);
            js.value_mut(k).copy_from_slice(&st[n..n + nn]);
            jis.value_mut(k).copy_from_slice(&st[n + nn..n + 2 * nn]);
            if let Some(z) = zs {
                z.value_mut(k).copy_from_slice(&st[n + 2 * nn..]);
            }
        };
        store(0, &st, &mut xs, &mut js, &mut jis, &mut zs);
        let mut s = self.scratch();
        let mut w = vec![0.0; self.d + 1];
        w[0] = dt;
        let (mut k1, mut k2, mut pred) = (vec![0.0; size], vec![0.0; size], vec![0.0; size]);
        let mut worst = 0.0f64;
        for k in 0..steps {
            let (b0, b1) = (driver.value(k), driver.value(k + 1));
            for i in 0..self.d {
                w[i + 1] = b1[i] - b0[i];
            }
            self.joint_rhs(&st, &w, &mut k1, &mut s);
            for q in 0..size {
                pred[q] = st[q] + k1[q];
            }
            self.joint_rhs(&pred, &w, &mut k2, &mut s);
            for q in 0..size {
                st[q] += 0.5 * (k1[q] + k2[q]);
            }
            let t = driver.time(k + 1);
            if st.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: k + 1, time: t });
            }
            let defect = inverse_defect(&st[n..n + nn], &st[n + nn..n + 2 * nn], n);
            worst = worst.max(defect);
            if defect > self.opts.consistency_tol {
                return Err(Error::Consistency { time: t, deviation: defect });
            }
            store(k + 1, &st, &mut xs, &mut js, &mut jis, &mut zs);
        }
        Ok(FlowPath {
            x: xs,
            j: js,
            jinv: jis,
            second_variation: zs,
            driver: driver.clone(),
            max_inverse_defect: worst,
        })
    }

    /// Second variation by variation of constants,
    /// `Z_t = J_t [Z_0 + ∫_0^t Jinv_s D²F(X_s)(J_s·, J_s·, dB_s)]`, with the
    /// integral taken by the trapezoid rule on the grid. `z0` is the initial
    /// second variation (flattened n×n×n), normally zero.
    pub fn second_variation_vcf(&self, flow: &FlowPath, z0: Option<&[f64]>) -> Result<SampledPath> {
        let n = self.n;
        let nn = n * n;
        let hess: Vec<ProgramVec> = match &self.hess {
            Some(h) => h.clone(),
            None => {
                return Err(Error::Unsupported(
                    "solver was built without second derivatives".into(),
                ))
            }
        };
        let steps = flow.x.n_steps();
        let dt = flow.x.dt();
        let mut s = self.scratch();
        // integrand G_k[a][b][c] for the given weights
        let integrand = |k: usize, w: &[f64], s: &mut Scratch, out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            let x = flow.x.value(k);
            let jm = flow.j.value(k);
            let ji = flow.jinv.value(k);
            let mut h = vec![0.0; n * nn];
            for (i, wi) in w.iter().enumerate() {
                if *wi == 0.0 {
                    continue;
                }
                hess[i].eval_into(x, &mut s.d2v, &mut s.stack);
                // h_a,bc = Σ_jk D²V_a,jk J_jb J_kc
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let mut acc = 0.0;
                            for j in 0..n {
                                for kk in 0..n {
                                    acc += s.d2v[(a * n + j) * n + kk] * jm[j * n + b] * jm[kk * n + c];
                                }
                            }
                            h[(a * n + b) * n + c] += wi * acc;
                        }
                    }
                }
            }
            for a in 0..n {
                for bc in 0..nn {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += ji[a * n + j] * h[j * nn + bc];
                    }
                    out[a * nn + bc] = acc;
                }
            }
        };
        let mut acc = match z0 {
            Some(z) if z.len() == n * nn => z.to_vec(),
            Some(_) => return Err(Error::Dimension("z0 must have n³ entries".into())),
            None => vec![0.0; n * nn],
        };
        let mut out = SampledPath::zeros(flow.x.t0(), dt, steps, n * nn);
        let mut w = vec![0.0; self.d + 1];
        w[0] = dt;
        let (mut g0, mut g1) = (vec![0.0; n * nn], vec![0.0; n * nn]);
        let apply_j = |k: usize, acc: &[f64], out: &mut SampledPath| {
            let jm = flow.j.value(k);
            let o = out.value_mut(k);
            for a in 0..n {
                for bc in 0..nn {
                    let mut v = 0.0;
                    for j in 0..n {
                        v += jm[a * n + j] * acc[j * nn + bc];
                    }
                    o[a * nn + bc] = v;
                }
            }
        };
        apply_j(0, &acc, &mut out);
        for k in 0..steps {
            let (b0, b1) = (flow.driver.value(k), flow.driver.value(k + 1));
            for i in 0..self.d {
                w[i + 1] = b1[i] - b0[i];
            }
            integrand(k, &w, &mut s, &mut g0);
            integrand(k + 1, &w, &mut s, &mut g1);
            for q in 0..n * nn {
                acc[q] += 0.5 * (g0[q] + g1[q]);
            }
            apply_j(k + 1, &acc, &mut out);
        }
        Ok(out)
    }
}

fn inverse_defect(j: &[f64], ji: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut p = 0.0;
            for c in 0..n {
                p += j[a * n + c] * ji[c * n + b];
            }
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((p - target).abs());
        }
    }
    worst
}

/// Solve the flow with default options.
pub fn solve_flow(fields: &VectorFieldSet, x0: &[f64], driver: &SampledPath, with_second_variation: bool) -> Result<FlowPath> {
    let opts = FlowOptions {
        second_variation: with_second_variation,
        ..FlowOptions::default()
    };
    FlowSolver::new(fields, opts).solve(x0, driver)
}

/// Hölder norms of the solution and driver against the shapes of the
/// pathwise bounds `‖X‖ ≤ M (1+|x0|)(1+‖B‖)^{1/γ}` and
/// `‖J‖ ≤ M (1+|x0|)|J_0| exp(M ‖B‖^{1/γ})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    pub holder_x: f64,
    pub holder_j: f64,
    pub holder_b: f64,
    /// `(1+|x0|)(1+‖B‖)^{1/γ}`
    pub shape_x: f64,
    /// `holder_x / shape_x`
    pub ratio_x: f64,
    /// smallest `M` with `M (1+|x0|)|J_0| e^{M ‖B‖^{1/γ}} ≥ ‖J‖`
    pub implied_m_j: f64,
    /// `log sup_t |J_t|`
    pub log_sup_j: f64,
}

pub fn apriori_report(flow: &FlowPath, gamma: f64) -> AprioriReport {
    let x0 = flow.x.value(0);
    let n = flow.n();
    let norm_x0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let holder_x = holder_norm_full(&flow.x, gamma);
    let holder_j = holder_norm_full(&flow.j, gamma);
    let holder_b = holder_norm_full(&flow.driver, gamma);
    let shape_x = (1.0 + norm_x0) * (1.0 + holder_b).powf(1.0 / gamma);
    let scale = (1.0 + norm_x0) * (n as f64).sqrt();
    let b = holder_b.powf(1.0 / gamma);
    let target = holder_j / scale;
    let implied_m_j = if target <= 0.0 {
        0.0
    } else {
        // M e^{M b} is increasing in M
        let (mut lo, mut hi) = (0.0, target.max(1.0));
        while hi * (hi * b).exp() < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (mid * b).exp() >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let sup_j = (0..flow.j.len())
        .map(|k| flow.j.value(k).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    AprioriReport {
        holder_x,
        holder_j,
        holder_b,
        shape_x,
        ratio_x: if shape_x > 0.0 { holder_x / shape_x } else { 0.0 },
        implied_m_j,
        log_sup_j: sup_j.ln(),
    }
}
