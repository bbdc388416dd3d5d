use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use slicewise_service::api::{router, spawn_sweeper, AppState, ServiceConfig};

/// Annotation session server.
#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory that receives finished volume masks.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Idle sessions are evicted after this many seconds.
    #[arg(long, default_value_t = 7200)]
    ttl_seconds: u64,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    if let Some(dir) = &args.data_dir {
        std::fs::create_dir_all(dir)?;
    }
    let state = AppState::new(ServiceConfig {
        data_dir: args.data_dir,
        ttl: Duration::from_secs(args.ttl_seconds),
    });
    spawn_sweeper(state.clone());
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
