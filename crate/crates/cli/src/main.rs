use clap::Parser;

fn main() {
    let cli = veclstm_cli::Cli::parse();
    if let Err(e) = veclstm_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
