use std::process::ExitCode;

use clap::Parser;
use idforge_cli::{manifest, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match manifest::run(&cli.command) {
        Ok((outcome, manifest_path)) => {
            println!("{}", outcome.summary);
            println!("manifest: {}", manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
