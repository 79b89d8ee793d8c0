use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use agenda_core::retrieval::{DEFAULT_FLOOR, DEFAULT_STEP};
use agenda_core::workspace::Workspace;
use agenda_service::session::Session;
use agenda_service::{router, AppState, Engine, ServiceConfig};
use clap::Parser;

/// Serve a prepared workspace for interactive query tuning.
#[derive(Parser, Debug)]
#[command(name = "agenda-serve", version)]
struct Args {
    /// Workspace produced by `agenda vectorize`.
    #[arg(short, long, default_value = ".")]
    workspace: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(short, long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "local")]
    session: String,
    /// Append-only session log; an existing log is replayed on start.
    /// Defaults to sessions.jsonl in the workspace.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Keep the session in memory only.
    #[arg(long, conflicts_with = "log")]
    no_log: bool,
    /// Report directory for accepted queries; defaults to the workspace's
    /// reports/.
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("agenda-serve: {message}");
    ExitCode::FAILURE
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    if !(args.step > 0.0 && args.step < 1.0) {
        return fail(format!("--step {} must be in (0, 1)", args.step));
    }
    let ws = Workspace::new(&args.workspace);
    let engine = match Engine::from_workspace(&ws) {
        Ok(e) => e,
        Err(e) => return fail(e),
    };
    let session = if args.no_log {
        Session::new(&args.session)
    } else {
        let log = args.log.clone().unwrap_or_else(|| ws.root().join("sessions.jsonl"));
        match Session::open(&args.session, &log) {
            Ok(s) => s,
            Err(e) => return fail(e),
        }
    };
    let config = ServiceConfig {
        reports: Some(args.reports.unwrap_or_else(|| ws.reports())),
        step: args.step,
        floor: args.floor,
    };
    let drafts = session.drafts().count();
    let app = router(AppState::new(engine, session, config));

    let addr = SocketAddr::new(args.host, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => return fail(format!("{addr}: {e}")),
    };
    println!("serving {} on http://{addr} ({drafts} drafts restored)", args.workspace.display());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
