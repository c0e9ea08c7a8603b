//! Quadrature rules: Gauss-Legendre, adaptive Gauss-Kronrod and
//! substitutions for algebraic endpoint singularities.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn g16() -> &'static GaussLegendre {
        static R: OnceLock<GaussLegendre> = OnceLock::new();
        R.get_or_init(|| GaussLegendre::new(16))
    }

    /// Shared 8-point rule.
    pub fn g8() -> &'static GaussLegendre {
        static R: OnceLock<GaussLegendre> = OnceLock::new();
        R.get_or_init(|| GaussLegendre::new(8))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the total
/// estimate is below `max(abs_tol, rel_tol * |I|)` or the panel budget runs out.
pub fn adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(a, b, &mut f);
    panels.push((a, b, v, e));
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(lo, mid, &mut f);
        let (v2, e2) = gk15(mid, hi, &mut f);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    // Sum small panels first for a reproducible, well-conditioned total.
    panels.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    panels.iter().map(|p| p.2).sum()
}

/// `∫_a^b (x - a)^beta f(x) dx` for smooth `f` and `beta > -1`.
///
/// The substitution `x = a + L y^{1/(beta+1)}` removes the algebraic factor,
/// leaving `L^{beta+1}/(beta+1) ∫_0^1 f(a + L y^{1/(beta+1)}) dy`.
pub fn left_singular(f: impl Fn(f64) -> f64, a: f64, b: f64, beta: f64, tol: f64) -> f64 {
    assert!(beta > -1.0);
    let l = b - a;
    let p = 1.0 / (beta + 1.0);
    l.powf(beta + 1.0) / (beta + 1.0) * adaptive(|y| f(a + l * y.powf(p)), 0.0, 1.0, tol, tol)
}

/// `∫_a^b (b - x)^beta f(x) dx` for smooth `f` and `beta > -1`.
pub fn right_singular(f: impl Fn(f64) -> f64, a: f64, b: f64, beta: f64, tol: f64) -> f64 {
    left_singular(|u| f(a + b - u), a, b, beta, tol)
}

/// `∫_a^∞ f(x) dx` for `f` with algebraic decay, via `x = a + s/(1-s)`.
pub fn to_infinity(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    adaptive(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let x = a + s / (1.0 - s);
            let v = f(x) / ((1.0 - s) * (1.0 - s));
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        tol,
        tol,
    )
}

/// Composite trapezoid weights for `n + 1` equispaced points.
pub fn trapezoid_weights(n_points: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n_points];
    if n_points == 1 {
        w[0] = 0.0;
        return w;
    }
    w[0] = 0.5 * dt;
    w[n_points - 1] = 0.5 * dt;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let r = GaussLegendre::new(8);
        for p in 0..16 {
            let got = r.integrate(0.0, 2.0, |x| x.powi(p));
            let want = 2f64.powi(p + 1) / (p + 1) as f64;
            assert!((got - want).abs() < 1e-12 * want, "p={p}");
        }
        let s: f64 = GaussLegendre::g16().weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sharp_features() {
        let v = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12);
        let want = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - want).abs() < 1e-9 * want);
    }

    #[test]
    fn singular_substitutions() {
        // ∫_0^1 x^{-0.7} cos(x) dx against a fine reference
        let v = left_singular(|x| x.cos(), 0.0, 1.0, -0.7, 1e-13);
        let series: f64 = (0..20)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=2 * k).map(|j| j as f64).product();
                s / fact / (2.0 * k as f64 + 0.3)
            })
            .sum();
        assert!((v - series).abs() < 1e-11);
        let r = right_singular(|x| x, 0.0, 1.0, -0.5, 1e-13);
        // ∫_0^1 (1-x)^{-1/2} x dx = B(2, 1/2) = 4/3
        assert!((r - 4.0 / 3.0).abs() < 1e-11);
        let inf = to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, 1e-12);
        assert!((inf - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
