use std::process::ExitCode;

use clap::Parser;
use tal_cli::{run, Cli, RunConfig, RPC_URL_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::resolve(cli, std::env::var(RPC_URL_ENV).ok()).and_then(|cfg| run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
