//! Parse a field set, differentiate it and print Lie brackets.
use fbmhypo::expr::{differentiate, lie_bracket, VectorFieldSet};

fn main() -> fbmhypo::Result<()> {
    let fs = VectorFieldSet::parse("V0 = [-x1 + sin(x2), x1 * x2]; V1 = [1, 0]; V2 = [0, exp(-x1^2)] bounded", 2, 2)?;
    print!("{fs}");
    let dv0 = differentiate(fs.drift(), fs.n());
    for (i, row) in dv0.iter().enumerate() {
        let shown: Vec<String> = row.iter().map(|e| e.to_string()).collect();
        println!("d(V0)_{}/dx = [{}]", i + 1, shown.join(", "));
    }
    for i in 1..=fs.d() {
        let b = lie_bracket(fs.field(i), fs.drift())?;
        let shown: Vec<String> = b.iter().map(|e| e.to_string()).collect();
        println!("[V{i}, V0] = [{}]", shown.join(", "));
    }
    println!("V0(0.3, -1) = {:?}", fs.eval_field(0, &[0.3, -1.0])?);
    Ok(())
}
