//! Gradient of x0 -> E tanh(X_T) for fOU without differentiating tanh.
use fbmhypo::expr::VectorFieldSet;
use fbmhypo::malliavin::{gradient_estimator, GradientConfig};
use fbmhypo::noise::{sample_past, ConditionalDrift, ConditionedNoise, HurstParams};
use fbmhypo::path::SampledPath;

fn main() -> fbmhypo::Result<()> {
    let params = HurstParams::with_defaults(0.7)?;
    let omega = sample_past(0.7, 1.0 / 32.0, 320, 1, 7)?;
    let drift = ConditionalDrift::new(params, 1.0 / 32.0, 320, 1.0 / 64.0, 80)?;
    let noise = ConditionedNoise::new(&drift, omega)?;
    let fou = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1)?;
    let cfg = GradientConfig {
        xi: vec![1.0],
        control_horizon: 1.0,
        n_mc: 20_000,
        seed: 11,
        fd_step: 1e-2,
    };
    let psi = |x: &SampledPath| x.last()[0].tanh();
    let g = gradient_estimator(&fou, &[0.5], &noise, &psi, &cfg)?;
    println!("estimate {:.4} ± {:.4}", g.estimate.mean, g.estimate.stderr);
    println!("finite difference {:.4} ± {:.4}", g.fd_oracle.mean, g.fd_oracle.stderr);
    println!("relative error {:.2}%", 100.0 * g.rel_err);
    Ok(())
}
