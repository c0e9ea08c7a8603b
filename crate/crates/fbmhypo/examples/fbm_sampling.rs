//! Exact fBm paths and an empirical covariance check.
use fbmhypo::noise::{fbm_covariance, fbm_sample_exact};
use fbmhypo::stats::mean_stderr;

fn main() -> fbmhypo::Result<()> {
    let (h, dt, n) = (0.7, 1.0 / 64.0, 64);
    let paths = fbm_sample_exact(h, 0.0, dt, n, 1, 10_000, 1)?;
    for (s, t) in [(0.25, 0.5), (0.5, 1.0), (1.0, 1.0)] {
        let (ks, kt) = ((s / dt) as usize, (t / dt) as usize);
        let prod: Vec<f64> = paths.iter().map(|p| p.value(ks)[0] * p.value(kt)[0]).collect();
        let e = mean_stderr(&prod);
        println!(
            "Cov(B_{s}, B_{t}) = {:.4} ± {:.4}   exact {:.4}",
            e.mean,
            e.stderr,
            fbm_covariance(s, t, h)
        );
    }
    Ok(())
}
