use clap::Parser;

fn main() {
    let cli = geocov_cli::Cli::parse();
    if let Err(e) = geocov_cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
