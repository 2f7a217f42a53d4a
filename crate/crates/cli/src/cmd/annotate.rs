use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use absakit::annotation::http::{serve, AppState, DEFAULT_PORT};
use absakit::annotation::SessionStore;
use absakit::checkpoint::Lookup;
use clap::Args;

use crate::error::CliError;
use crate::{CliResult, Global};

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,

    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,

    /// Session journals; defaults to <cache>/annotation
    #[arg(long)]
    journal_dir: Option<PathBuf>,

    /// Built UI assets served under /ui
    #[arg(long)]
    ui: Option<PathBuf>,
}

pub fn run(g: &Global, args: AnnotateArgs) -> CliResult {
    let dir = args.journal_dir.unwrap_or_else(|| g.cache_root().join("annotation"));
    let store = SessionStore::open(&dir).map_err(|e| CliError::Failed(e.to_string()))?;
    let state = Arc::new(AppState { store, lookup: Lookup { store: g.store(), hub: g.hub.clone(), task: None } });
    let addr = SocketAddr::new(args.host, args.port);
    eprintln!("annotation service on http://{addr} (journals in {})", dir.display());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    runtime.block_on(serve(state, addr, args.ui)).map_err(|e| CliError::Failed(format!("{addr}: {e}")))
}
