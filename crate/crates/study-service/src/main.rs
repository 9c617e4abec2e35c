use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use coax_study::{prepare_pools, router, Study, StudyConfig};
use tracing_subscriber::EnvFilter;

/// Usage: `coax-study [config.toml]`; environment variables override the file.
#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let mut config = match std::env::args_os().nth(1).map(PathBuf::from) {
        Some(path) => StudyConfig::load(&path).with_context(|| format!("reading {}", path.display()))?,
        None => StudyConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    let pools = tokio::task::spawn_blocking({
        let config = config.clone();
        move || prepare_pools(&config)
    })
    .await??;
    let addr = format!("{}:{}", config.bind, config.port);
    let study = Arc::new(Study::open(config, pools)?);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, "study service listening");
    axum::serve(listener, router(study))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
