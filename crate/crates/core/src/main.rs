use std::process::ExitCode;

use clap::Parser;
use covest::cli::{run, Cli};

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("COVEST_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("COVEST_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            anyhow::bail!("COVEST_THREADS must be a positive integer, got '{v}'");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli).map_err(anyhow::Error::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
