use clap::Parser;

fn main() {
    let cli = emumuscle_bench::Cli::parse();
    if let Err(e) = emumuscle_bench::run(&cli) {
        let kind = match e {
            emumuscle_bench::CliError::Config(_) => "config error",
            emumuscle_bench::CliError::Runtime(_) => "error",
        };
        eprintln!("{kind}: {e}");
        std::process::exit(e.exit_code());
    }
}
