use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = vsearch_cli::commands::Cli::parse();
    match vsearch_cli::commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
