use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbmhypo::cli::{lemma_summary, load_config, run, Summary};
use fbmhypo::holder::{lemma_suite, LemmaSuiteConfig};

#[derive(Parser)]
#[command(name = "fbmhypo", version, about = "Experiments for hypoelliptic SDEs driven by fractional Brownian motion")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run {
        config: PathBuf,
        /// Output directory (default: `out` key of the config, else ./out)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (results do not depend on it)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Property checks of the Hölder-space lemmas on random paths
    LemmaSuite {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn pool(threads: Option<usize>) -> Result<(), String> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode, String> {
    match Args::parse().command {
        Command::Run { config, out, seed, threads } => {
            pool(threads)?;
            let mut cfg = load_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let res = run(&cfg, &dir).map_err(|e| e.to_string())?;
            print!("{}", res.summary.render());
            eprintln!("wrote {} files to {}", res.files.len(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::LemmaSuite { seed, threads } => {
            pool(threads)?;
            let rep = lemma_suite(&LemmaSuiteConfig { seed, ..Default::default() }).map_err(|e| e.to_string())?;
            let mut s = Summary::default();
            lemma_summary(&rep, &mut s);
            print!("{}", s.render());
            Ok(if rep.violations() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
