use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FINGERMAP_LOG", "warn")).init();
    let cli = fingermap::cli::Cli::parse();
    if let Err(e) = fingermap::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
