use clap::Parser;
use funcov_cli::args::{Cli, Command};
use funcov_cli::commands::{cmd_generate, cmd_global, cmd_simulate, cmd_test, configure_threads};
use funcov_cli::error::CliResult;

fn run(cli: &Cli) -> CliResult<()> {
    let threads = match &cli.command {
        Command::Test(a) => a.common.threads,
        Command::Simulate(a) => a.common.threads,
        Command::Global(a) => a.common.threads,
        Command::Generate(a) => a.common.threads,
    };
    configure_threads(threads)?;
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Global(a) => cmd_global(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
