use clap::Parser;

fn main() {
    let cli = qslink::cli::Cli::parse();
    std::process::exit(qslink::cli::run(cli));
}
