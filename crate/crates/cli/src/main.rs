use clap::Parser;

fn main() {
    let cli = normtest::cli::Cli::parse();
    if let Err(e) = normtest::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
