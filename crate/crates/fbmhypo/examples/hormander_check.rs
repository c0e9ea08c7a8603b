//! Bracket rank and dissipativity for three field sets.
use fbmhypo::expr::VectorFieldSet;
use fbmhypo::hormander::{dissipativity_check, hormander_rank};

fn main() -> fbmhypo::Result<()> {
    let sets = [
        ("elliptic", "V0 = [-x1, -x2]; V1 = [1, 0]; V2 = [0, 1]", 2),
        ("hypoelliptic", "V0 = [0, x1]; V1 = [1, 0]", 1),
        ("degenerate", "V0 = [-x1, 0]; V1 = [1, 0]", 1),
    ];
    for (name, text, d) in sets {
        let fs = VectorFieldSet::parse(text, 2, d)?;
        for level in 1..=3 {
            let r = hormander_rank(&fs, level, &[0.0, 0.0])?;
            println!("{name:>12} N={level}: rank {} sigma_min {:.3} satisfied {}", r.rank, r.sigma_min, r.satisfied);
        }
        let diss = dissipativity_check(fs.drift(), 10.0, 64, 1)?;
        println!("{name:>12} dissipative: {} (M1 {:.3}, M2 {:.3})", diss.satisfied, diss.m1, diss.m2);
    }
    Ok(())
}
