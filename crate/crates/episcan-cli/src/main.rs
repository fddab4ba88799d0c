use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = episcan_cli::cli::Cli::parse();
    let result = episcan_cli::init_threads().and_then(|()| episcan_cli::run(cli));
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
