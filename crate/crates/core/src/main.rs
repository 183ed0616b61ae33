use clap::Parser;

fn main() {
    let cli = abrsim::cli::Cli::parse();
    std::process::exit(abrsim::cli::execute(&cli));
}
