use clap::Parser;

fn main() {
    let cli = varcycle_cli::Cli::parse();
    std::process::exit(varcycle_cli::run(cli));
}
