mod args;
mod commands;
mod error;
mod io;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;
use io::Sink;
use manifest::RunManifest;

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let start = Instant::now();
    let mut sink = Sink::new(cli.out.clone());
    let seed = cli.seed;
    let outcome = match &cli.command {
        Command::Logz(a) => commands::logz(a, seed, &mut sink),
        Command::Phi(a) => commands::phi(a, seed, &mut sink),
        Command::Sample(a) => commands::sample(a, seed, &mut sink),
        Command::Fit(a) => commands::fit(a, seed, &mut sink),
        Command::Experiment(a) => commands::experiment(a, seed, &mut sink),
        Command::Spectrum(a) => commands::spectrum(a, seed, &mut sink),
        Command::SiegelDist(a) => commands::siegel_dist(a, &mut sink),
        Command::SiegelLogz(a) => commands::siegel_logz(a, seed, &mut sink),
        Command::SiegelSample(a) => commands::siegel_sample(a, seed, &mut sink),
    };
    // A non-converged fit still leaves a report behind, so it gets a manifest.
    if outcome.is_ok() || matches!(outcome, Err(CliError::NotConverged(_))) {
        if let Some(main) = sink.main_path() {
            let argv: Vec<String> = std::env::args().collect();
            let m = RunManifest::new(argv, seed, start.elapsed().as_secs_f64(), sink.written())?;
            m.write_next_to(main)?;
        }
    }
    outcome
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
