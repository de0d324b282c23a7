use clap::Parser;

fn main() {
    let cli = geoxray::cli::Cli::parse();
    std::process::exit(geoxray::cli::run(cli));
}
