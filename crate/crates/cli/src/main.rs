use std::process::ExitCode;

use clap::Parser;

use hometrace_cli::args::Cli;
use hometrace_cli::{run, EXIT_USAGE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.render().to_string();
            let first = detail.lines().find(|l| !l.trim().is_empty()).unwrap_or(&msg);
            eprintln!("error code={EXIT_USAGE} kind=usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match run(cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{}", summary.trim_end());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code as u8)
        }
    }
}
