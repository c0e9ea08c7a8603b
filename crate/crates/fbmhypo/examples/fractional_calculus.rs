//! Riemann-Liouville integral and Marchaud derivative as an inverse pair.
use fbmhypo::fraccalc::FractionalOps;
use fbmhypo::path::SampledPath;

fn main() -> fbmhypo::Result<()> {
    let n = 1 << 12;
    let dt = 1.0 / n as f64;
    let f = SampledPath::from_fn(0.0, dt, n, 1, |t, o| o[0] = t.sqrt() * (3.0 * t).cos());
    for alpha in [0.1, 0.25, 0.4] {
        let ops = FractionalOps::new(alpha, dt, n)?;
        let back = ops.marchaud(&ops.integral(&f)?)?;
        let err = (0..=n)
            .filter(|&k| f.time(k) >= 0.05)
            .map(|k| (back.value(k)[0] - f.value(k)[0]).abs())
            .fold(0.0, f64::max);
        println!("alpha = {alpha}: sup |D I f - f| on [0.05, 1] = {err:.2e}");
    }
    Ok(())
}
