use std::net::SocketAddr;
use std::process::ExitCode;

use clap::Parser;
use freetext_server::{router, AppState, Cli, Command};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let Command::Serve(cfg) = Cli::parse().command;
    let state = match AppState::from_config(&cfg) {
        Ok(state) => state,
        Err(e) => {
            eprintln!("freetext: {e}");
            return ExitCode::from(2);
        }
    };

    let addr = format!("{}:{}", cfg.host, cfg.port);
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("freetext: cannot bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    let local: SocketAddr = listener.local_addr().expect("bound listener has an address");
    tracing::info!(
        %local,
        driver = cfg.storage_driver.as_str(),
        provider = state.provider.id(),
        "listening"
    );

    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    if let Err(e) = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
    {
        eprintln!("freetext: server error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
