use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = cfaudit_cli::Cli::parse();
    let status = cfaudit_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(status as u8)
}
