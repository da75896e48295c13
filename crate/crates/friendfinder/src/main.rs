use std::time::Duration;

use clap::Parser;
use pgc_friendfinder::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "friendfinder", about = "Friend-finder map gateway")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Garbled circuits per execution.
    #[arg(long, default_value_t = 5)]
    circuits: usize,
    #[arg(long, default_value_t = 256)]
    max_cells: usize,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Use the in-process OT dealer instead of group-based OT.
    #[arg(long)]
    dealer_ot: bool,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let a = Args::parse();
    let cfg = ServiceConfig {
        circuits: a.circuits,
        max_cells: a.max_cells,
        timeout: Duration::from_secs(a.timeout_secs),
        dealer_ot: a.dealer_ot,
        ..Default::default()
    };
    if let Err(e) = cfg.protocol().validate() {
        eprintln!("friendfinder: {e}");
        std::process::exit(1);
    }
    let listener = tokio::net::TcpListener::bind(&a.listen).await?;
    eprintln!("friendfinder listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(cfg))).await
}
