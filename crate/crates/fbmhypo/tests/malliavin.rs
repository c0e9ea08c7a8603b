use fbmhypo::expr::VectorFieldSet;
use fbmhypo::flow::solve_flow;
use fbmhypo::malliavin::{
    control_v, cutoff_h, cutoff_value, gradient_estimator, lambda_min_tail, malliavin_derivative_fd, malliavin_matrix,
    operator_a, operator_a_adjoint, skorohod_terms, GradientConfig, SkorohodConfig,
};
use fbmhypo::noise::{alpha_h, ConditionedNoise};
use fbmhypo::path::SampledPath;
use fbmhypo::quad::{adaptive, left_singular};
use fbmhypo::rng::stream_rng;
use fbmhypo::Error;
use statrs::function::gamma::gamma;

const FOU: &str = "V0 = [-x1]; V1 = [1]";
const MULT: &str = "V0 = [-x1 + sin(x2), x1 - x2]; V1 = [1, 0.3*cos(x1)]";

fn fou() -> VectorFieldSet {
    VectorFieldSet::parse(FOU, 1, 1).unwrap()
}

fn still_fou_flow(dt: f64, n: usize) -> fbmhypo::flow::FlowPath {
    solve_flow(&fou(), &[0.0], &SampledPath::zeros(0.0, dt, n, 1), false).unwrap()
}

fn e2_integral(a: f64, b: f64) -> f64 {
    0.5 * ((2.0 * b).exp() - (2.0 * a).exp())
}

#[test]
fn cutoff_shape() {
    for t in [0.5, 1.0, 3.0] {
        assert_eq!(cutoff_value(t, 0.25 * t), 1.0);
        assert_eq!(cutoff_value(t, 0.9 * t), 0.0);
        assert!((cutoff_value(t, 0.625 * t) - 0.5).abs() < 1e-14);
    }
    let h = cutoff_h(1.0, 0.0, 1.0 / 64.0, 64).unwrap();
    for k in 1..=64 {
        assert!(h.at(k) <= h.at(k - 1));
    }
    assert!(cutoff_h(1.0, 0.0, 1.0 / 64.0, 32).is_err());
}

#[test]
fn operator_and_adjoint_on_fou() {
    let dt = 1.0 / 1024.0;
    let flow = still_fou_flow(dt, 1024);
    let one = SampledPath::from_fn(0.0, dt, 1024, 1, |_, o| o[0] = 1.0);
    let a = operator_a(&fou(), &flow, &one, 1.0).unwrap();
    assert!((a[0] - (1f64.exp() - 1.0)).abs() < 1e-6);

    let adj = operator_a_adjoint(&fou(), &flow, &[1.0]).unwrap();
    for k in (0..=1024).step_by(64) {
        assert!((adj.value(k)[0] - adj.time(k).exp()).abs() < 1e-6);
    }

    // ⟨𝒜v, ξ⟩ = ⟨v, 𝒜*ξ⟩ and linearity in v
    let v = SampledPath::from_fn(0.0, dt, 1024, 1, |t, o| o[0] = (3.0 * t).sin());
    let w = SampledPath::from_fn(0.0, dt, 1024, 1, |t, o| o[0] = t * t - 0.2);
    let av = operator_a(&fou(), &flow, &v, 1.0).unwrap()[0];
    let aw = operator_a(&fou(), &flow, &w, 1.0).unwrap()[0];
    let xi = 1.7;
    let adj = operator_a_adjoint(&fou(), &flow, &[xi]).unwrap();
    let inner = |p: &SampledPath, q: &SampledPath| {
        let n = p.n_steps();
        (0..=n)
            .map(|k| {
                let wt = if k == 0 || k == n { 0.5 } else { 1.0 };
                wt * dt * p.value(k)[0] * q.value(k)[0]
            })
            .sum::<f64>()
    };
    assert!((av * xi - inner(&v, &adj)).abs() < 1e-12);
    let comb = v.axpy(2.5, &w).unwrap();
    let ac = operator_a(&fou(), &flow, &comb, 1.0).unwrap()[0];
    assert!((ac - (av + 2.5 * aw)).abs() < 1e-12);
}

#[test]
fn fou_matrix_is_sandwiched() {
    let dt = 1.0 / 512.0;
    let flow = still_fou_flow(dt, 512);
    let h = cutoff_h(1.0, 0.0, dt, 512).unwrap();
    let c = malliavin_matrix(&fou(), &flow, Some(&h)).unwrap()[(0, 0)];
    assert!(c > e2_integral(0.0, 0.5) && c < e2_integral(0.0, 0.75));
    let c_hat = malliavin_matrix(&fou(), &flow, None).unwrap()[(0, 0)];
    assert!((c_hat - e2_integral(0.0, 1.0)).abs() < 1e-4);

    let silent = VectorFieldSet::parse("V0 = [-x1, x1]; V1 = [0, 0]", 2, 1).unwrap();
    let b = SampledPath::from_fn(0.0, dt, 512, 1, |t, o| o[0] = t.sin());
    let flow = solve_flow(&silent, &[1.0, 0.5], &b, false).unwrap();
    let m = malliavin_matrix(&silent, &flow, Some(&h)).unwrap();
    assert!(m.iter().all(|&x| x == 0.0));
    assert!(matches!(control_v(&silent, &flow, &[1.0, 0.0], 1.0), Err(Error::SingularControl { .. })));
}

fn fou_control_closed(s: f64) -> f64 {
    let k = adaptive(|r| cutoff_value(1.0, r) * (2.0 * r).exp(), 0.0, 1.0, 1e-13, 1e-13);
    cutoff_value(1.0, s) * s.exp() / k
}

#[test]
fn fou_control_matches_closed_form() {
    let dt = 1.0 / 1024.0;
    let flow = still_fou_flow(dt, 1024);
    let ctl = control_v(&fou(), &flow, &[1.0], 1.0).unwrap();
    assert!(ctl.residual < 1e-12);
    for k in 0..=1024 {
        let t = ctl.v.time(k);
        assert!((ctl.v.value(k)[0] - fou_control_closed(t)).abs() < 1e-5, "t = {t}");
        if t >= 0.75 {
            assert_eq!(ctl.v.value(k)[0], 0.0);
        }
    }
}

/// `∫_0^S |ṽ|²` for the closed-form fOU control, by nested quadrature of
/// the Marchaud derivative.
fn fou_m1_oracle(h: f64, s_max: f64) -> f64 {
    let a = h - 0.5;
    let scale = 1.0 / (alpha_h(h) * gamma(h + 0.5) * gamma(1.0 - a));
    let k = adaptive(|r| cutoff_value(1.0, r) * (2.0 * r).exp(), 0.0, 1.0, 1e-13, 1e-13);
    let v = |s: f64| cutoff_value(1.0, s) * s.exp() / k;
    let deriv = |t: f64| {
        if t < 0.75 {
            let vt = v(t);
            let inner = left_singular(|u| (vt - v(t - u)) / u, 0.0, t, -a, 1e-11);
            scale * (vt * t.powf(-a) + a * inner)
        } else {
            -scale * a * adaptive(|s| v(s) * (t - s).powf(-1.0 - a), 0.0, 0.75, 1e-12, 1e-11)
        }
    };
    let head = left_singular(|t| (deriv(t) * t.powf(a)).powi(2), 0.0, 0.5, -2.0 * a, 1e-9);
    head + adaptive(|t| deriv(t).powi(2), 0.5, 0.75, 1e-10, 1e-9) + adaptive(|t| deriv(t).powi(2), 0.75, s_max, 1e-10, 1e-9)
}

fn fou_m1(h: f64, dt: f64, tilde_horizon: f64, with_m2: bool) -> (f64, Option<f64>) {
    let n = (1.0 / dt).round() as usize;
    let noise = ConditionedNoise::zero_past(h, 1, dt, n);
    let cfg = SkorohodConfig {
        xi: vec![1.0],
        control_horizon: 1.0,
        tilde_horizon,
        n_mc: 2,
        seed: 5,
        with_m2,
    };
    let t = skorohod_terms(&fou(), &[0.3], &noise, &cfg).unwrap();
    assert_eq!(t.excluded, 0);
    assert!(t.m1.stderr < 1e-12 * t.m1.mean);
    (t.m1.mean, t.m2.map(|e| e.mean))
}

#[test]
fn fou_skorohod_terms() {
    let h = 0.7;
    let (m1, _) = fou_m1(h, 1.0 / 256.0, 8.0, false);
    let oracle = fou_m1_oracle(h, 8.0);
    assert!((m1 - oracle).abs() < 1e-2 * oracle, "M1 {m1} vs oracle {oracle}");

    let m1s: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&s| fou_m1(h, 1.0 / 64.0, s, false).0).collect();
    assert!(m1s[0] < m1s[1] && m1s[1] < m1s[2]);
    assert!((m1s[2] - m1s[0]) / m1s[2] < 0.1);

    let (_, m2) = fou_m1(h, 1.0 / 32.0, 2.0, true);
    assert!(m2.unwrap().abs() < 1e-8);
}

#[test]
fn derivative_of_wiener_functionals() {
    let noise = ConditionedNoise::zero_past(0.7, 1, 1.0 / 32.0, 32);
    let dw = noise.draw_increments(&mut stream_rng(3, 0));
    let w_t = |w: &[f64]| w.iter().sum::<f64>();
    for idx in [0, 7, 31] {
        assert!((malliavin_derivative_fd(w_t, &dw, idx, 1e-4).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(malliavin_derivative_fd(|_| 2.0, &dw, idx, 1e-4).unwrap(), 0.0);
    }
    assert!(malliavin_derivative_fd(w_t, &dw, 32, 1e-4).is_err());
    assert!(malliavin_derivative_fd(w_t, &dw, 0, 0.0).is_err());
}

#[test]
fn lambda_tail_edge_cases() {
    let dt = 1.0 / 64.0;
    let noise = ConditionedNoise::zero_past(0.7, 1, dt, 64);
    let flow = still_fou_flow(dt, 64);
    let h = cutoff_h(1.0, 0.0, dt, 64).unwrap();
    let lam = malliavin_matrix(&fou(), &flow, Some(&h)).unwrap()[(0, 0)];
    let grid = [0.5 * lam, 0.99 * lam, 1.01 * lam];
    let rep = lambda_min_tail(&fou(), &[0.2], &noise, 200, 1, Some(&grid)).unwrap();
    assert_eq!(rep.rows[0].p_hat, 0.0);
    assert_eq!(rep.rows[1].p_hat, 0.0);
    assert_eq!(rep.rows[2].p_hat, 1.0);
    assert!((rep.lambda_median - lam).abs() < 1e-10);

    let degenerate = VectorFieldSet::parse("V0 = [0, 0]; V1 = [1, 0]", 2, 1).unwrap();
    let rep = lambda_min_tail(&degenerate, &[0.0, 0.0], &noise, 50, 1, Some(&[1e-12, 1e-6])).unwrap();
    assert!(rep.rows.iter().all(|r| r.p_hat == 1.0));
    assert!(rep.lambda_median.abs() < 1e-12);
}

#[test]
fn fou_gradient_of_terminal_state() {
    let noise = ConditionedNoise::zero_past(0.7, 1, 1.0 / 64.0, 80);
    let cfg = GradientConfig {
        xi: vec![1.0],
        control_horizon: 1.0,
        n_mc: 20_000,
        seed: 17,
        fd_step: 1e-2,
    };
    let last = |x: &SampledPath| x.last()[0];
    let g = gradient_estimator(&fou(), &[0.4], &noise, &last, &cfg).unwrap();
    let exact = (-1.25f64).exp();
    assert!(g.estimate.z_score(exact).abs() < 3.0, "{:?} vs {exact}", g.estimate);
    assert!((g.fd_oracle.mean - exact).abs() < 1e-3);

    let mult = VectorFieldSet::parse(MULT, 2, 1).unwrap();
    let r = gradient_estimator(&mult, &[0.0, 0.0], &noise, &|x: &SampledPath| x.last()[0], &GradientConfig { xi: vec![1.0, 0.0], ..cfg });
    assert!(matches!(r, Err(Error::Unsupported(_))));
}
