//! Hölder norms and the property checks on random paths.
use fbmhypo::holder::{check_interpolation, holder_norm_full, lacunary_path, lemma_suite, LemmaSuiteConfig};
use fbmhypo::rng::stream_rng;

fn main() -> fbmhypo::Result<()> {
    let mut rng = stream_rng(1, 0);
    let f = lacunary_path(&mut rng, 0.7, 1.0, 512);
    println!("||f||_0.6 = {:.4}", holder_norm_full(&f, 0.6));
    println!("interpolation: {:?}", check_interpolation(&f, 0.6));
    let rep = lemma_suite(&LemmaSuiteConfig::default())?;
    println!("{rep:#?}");
    Ok(())
}
