use clap::Parser;
use spinepatch_cli::{run, Cli};
use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage problems are validation errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = std::env::var("SPINEPATCH_LOG").unwrap_or_else(|_| cli.global.log_level.as_filter().to_string());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    match run(&cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&outcome.json).expect("json value prints");
            if writeln!(out, "{text}").is_err() {
                return ExitCode::from(2);
            }
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    log::error!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
