use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use ministack_service::ServiceConfig;

/// Job orchestration service for the simulated devices.
#[derive(Parser)]
#[command(name = "ministack-service", version)]
struct Args {
    /// JSON configuration file.
    #[arg(long, env = "MINISTACK_SERVICE_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<SocketAddr>,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ServiceConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                std::process::exit(2);
            }
        },
        None => ServiceConfig::default(),
    };
    if let Some(addr) = args.listen {
        config.listen = addr;
    }
    if let Err(e) = ministack_service::serve(config).await {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
