use std::process::ExitCode;

use clap::Parser;
use incentive_net_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.report() });
            eprintln!("{}", serde_json::to_string_pretty(&body).expect("error serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
