//! Drive the experiment runner from an in-memory config.
use fbmhypo::cli::{parse_config, run};

const CONFIG: &str = "
kind = hormander
x0 = 0, 0
level = 2
begin fields
V0 = [0, x1]
V1 = [1, 0]
end fields
";

fn main() -> fbmhypo::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let dir = std::env::temp_dir().join("fbmhypo-run-config");
    let out = run(&cfg, &dir)?;
    print!("{}", out.summary.render());
    println!("files: {:?}", out.files);
    Ok(())
}
