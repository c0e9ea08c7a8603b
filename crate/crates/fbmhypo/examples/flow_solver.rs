//! Solve fOU and a hypoelliptic system with their Jacobians.
use fbmhypo::expr::VectorFieldSet;
use fbmhypo::flow::{apriori_report, solve_flow};
use fbmhypo::noise::fbm_sample_exact;

fn main() -> fbmhypo::Result<()> {
    let driver = fbm_sample_exact(0.7, 0.0, 1.0 / 256.0, 256, 1, 1, 5)?.remove(0);
    let fou = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1)?;
    let flow = solve_flow(&fou, &[1.0], &driver, false)?;
    println!("fOU: X_1 = {:.6}, J_1 = {:.6} (exact e^-1 = {:.6})", flow.x.last()[0], flow.j.last()[0], (-1.0f64).exp());

    let hyp = VectorFieldSet::parse("V0 = [0, sin(x1)]; V1 = [1, 0]", 2, 1)?;
    let flow = solve_flow(&hyp, &[0.0, 0.0], &driver, true)?;
    println!("hypoelliptic: X_1 = {:?}", flow.x.last());
    println!("J_1 = {}", flow.j_at(flow.x.n_steps()));
    println!("max |J Jinv - I| = {:.2e}", flow.max_inverse_defect);
    println!("{:?}", apriori_report(&flow, 0.6));
    Ok(())
}
