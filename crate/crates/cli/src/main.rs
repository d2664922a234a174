use clap::Parser;
use pef_cli::Cli;

fn init_threads(threads: Option<usize>) {
    let Some(n) = threads else { return };
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    #[cfg(not(feature = "parallel"))]
    log::warn!("--threads {n} ignored: built without the parallel feature");
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PEF_LOG", "error")).init();
    let cli = Cli::parse();
    init_threads(cli.threads);
    if let Err(e) = pef_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
