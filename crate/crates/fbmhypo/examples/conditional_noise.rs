//! Split the future of an fBm into a part independent of a sampled past
//! plus the drift the past induces.
use fbmhypo::noise::{conditional_cov_forms, kernel_g, sample_past, weighted_norm, ConditionalDrift, ConditionedNoise, HurstParams};
use fbmhypo::rng::stream_rng;

fn main() -> fbmhypo::Result<()> {
    let params = HurstParams::with_defaults(0.7)?;
    let (dt_past, n_past) = (1.0 / 32.0, 640);
    let omega = sample_past(params.h(), dt_past, n_past, 1, 3)?;
    println!("past norm: {:.4}", weighted_norm(&omega, params.gamma(), params.delta()));
    println!("g(0.5) = {:.6}, g(2) = {:.6}", kernel_g(0.5, 0.7)?, kernel_g(2.0, 0.7)?);

    let drift = ConditionalDrift::new(params, dt_past, n_past, 1.0 / 64.0, 64)?;
    let noise = ConditionedNoise::new(&drift, omega)?;
    for k in [16, 32, 64] {
        println!("m({:.3}) = {:+.5}", noise.drift().time(k), noise.drift().value(k)[0]);
    }
    let split = noise.draw(&mut stream_rng(3, 0));
    println!("B(1) = {:+.5}", split.driver().last()[0]);

    let (a, b) = conditional_cov_forms(0.3, 0.8, 0.7)?;
    println!("conditional covariance at (0.3, 0.8): {a:.10} vs {b:.10}");
    Ok(())
}
