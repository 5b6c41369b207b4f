use clap::Parser;

fn main() {
    let args = fraclayer::cli::Args::parse();
    std::process::exit(fraclayer::cli::run(&args));
}
