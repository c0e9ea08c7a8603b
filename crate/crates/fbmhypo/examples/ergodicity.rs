//! Stationary variance of fOU and merging of laws from two starting points.
use fbmhypo::ergodicity::{convergence_experiment, fou_stationary_experiment, ConvergenceConfig};
use fbmhypo::expr::VectorFieldSet;
use fbmhypo::noise::{sample_past, ConditionalDrift, ConditionedNoise, HurstParams};

fn main() -> fbmhypo::Result<()> {
    let r = fou_stationary_experiment(0.7, 20.0, 1.0 / 32.0, 2000, 42)?;
    println!(
        "fOU E X_T^2 = {:.4} ± {:.4}, oracle {:.4}",
        r.second_moment.mean, r.second_moment.stderr, r.oracle
    );

    let params = HurstParams::with_defaults(0.7)?;
    let omega = sample_past(0.7, 1.0 / 32.0, 640, 1, 9)?;
    let drift = ConditionalDrift::new(params, 1.0 / 32.0, 640, 1.0 / 32.0, 320)?;
    let noise = ConditionedNoise::new(&drift, omega)?;
    let fs = VectorFieldSet::parse("V0 = [-x1, x1 - x2]; V1 = [1, 0]", 2, 1)?;
    let cfg = ConvergenceConfig {
        x0_a: vec![-2.0, -2.0],
        x0_b: vec![2.0, 2.0],
        checkpoints: vec![2.5, 5.0, 7.5, 10.0],
        n_mc: 2000,
        seed: 5,
        doubling: false,
    };
    let s = convergence_experiment(&fs, &noise, &cfg)?;
    for d in &s.distances {
        println!("t = {:>4}: W1 = {:.3e}, KS = {:.3}", d.t, d.distances.w1_total(), d.distances.ks[0]);
    }
    println!("monotone decay: {}", s.monotone_decay);
    Ok(())
}
