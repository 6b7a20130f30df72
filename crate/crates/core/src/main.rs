use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = slowfast::cli::Cli::parse();
    std::process::ExitCode::from(slowfast::cli::run(cli))
}
