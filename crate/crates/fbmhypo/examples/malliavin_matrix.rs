//! Malliavin matrices, the control v and the smallest-eigenvalue tail.
use fbmhypo::expr::VectorFieldSet;
use fbmhypo::flow::solve_flow;
use fbmhypo::malliavin::{lambda_min_tail, malliavin_report};
use fbmhypo::noise::{sample_past, ConditionalDrift, ConditionedNoise, HurstParams};
use fbmhypo::rng::stream_rng;

fn main() -> fbmhypo::Result<()> {
    let params = HurstParams::with_defaults(0.7)?;
    let omega = sample_past(0.7, 1.0 / 32.0, 320, 1, 7)?;
    let drift = ConditionalDrift::new(params, 1.0 / 32.0, 320, 1.0 / 64.0, 64)?;
    let noise = ConditionedNoise::new(&drift, omega)?;

    let fou = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1)?;
    let flow = solve_flow(&fou, &[0.5], &noise.draw_driver(&mut stream_rng(1, 0)), false)?;
    let r = malliavin_report(&fou, &flow, Some(&[1.0]))?;
    println!("fOU: C_hat = {:.6} (closed form {:.6}), C = {:.6}", r.c_hat_t[(0, 0)], (2f64.exp() - 1.0) / 2.0, r.c_t[(0, 0)]);
    println!("control residual {:.1e}", r.control_residual.unwrap_or(f64::NAN));

    let fs = VectorFieldSet::parse("V0 = [0, sin(x1)]; V1 = [1, 0]", 2, 1)?;
    let tail = lambda_min_tail(&fs, &[std::f64::consts::FRAC_PI_2, 0.0], &noise, 2000, 3, None)?;
    for row in &tail.rows {
        println!("P(lambda_min <= {:.3e}) = {:.4} ± {:.4}", row.eps, row.p_hat, row.stderr);
    }
    println!("log-log slope {:?}", tail.slope);
    Ok(())
}
