//! `pmax` subcommands. Each returns the process exit code.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pmax_agents::provider::MOCK_SCHEME;
use pmax_agents::{provider_from_config, run_turn, ProgressKind, ProviderConfig, ReportStatus, SharedState, TurnOptions};
use pmax_core::artifacts::{payload_file, ArtifactStore};
use pmax_core::event_log::{extract_abstraction, AbstractionOptions};
use pmax_core::script::{parse_script, registry, verify, Environment};

use crate::logs::read_log;
use crate::session::AppConfig;

#[derive(Debug, Parser)]
#[command(name = "pmax", version, about = "Conversational process mining over local event logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question about a log and write the report.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        question: String,
        /// Provider configuration (JSON).
        #[arg(long)]
        provider: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statically check a script.
    ValidateScript {
        #[arg(long)]
        log: PathBuf,
        script: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 60)]
        idle_minutes: u64,
        /// Mirror session artifacts below this directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Analyze {
            log,
            question,
            provider,
            out,
        } => analyze(&log, &question, &provider, &out),
        Command::ValidateScript { log, script } => validate_script(&log, &script),
        Command::Serve {
            addr,
            idle_minutes,
            data_dir,
        } => serve(&addr, idle_minutes, data_dir),
    }
}

/// Reads a provider config. A relative `mock:` path is taken relative to
/// the config file.
pub fn load_provider_config(path: &Path) -> Result<ProviderConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut cfg: ProviderConfig =
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {} at {}", path.display(), e.inner(), e.path()))?;
    if let Some(rest) = cfg.endpoint.strip_prefix(MOCK_SCHEME) {
        let p = Path::new(rest);
        if p.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.endpoint = format!("{MOCK_SCHEME}{}", base.join(p).display());
        }
    }
    Ok(cfg)
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    1
}

pub fn analyze(log_path: &Path, question: &str, provider_path: &Path, out: &Path) -> i32 {
    let cfg = match load_provider_config(provider_path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let provider = match provider_from_config(&cfg) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let log = match read_log(log_path) {
        Ok(l) => l,
        Err(e) => return fail(e),
    };
    let artifacts_dir = out.join("artifacts");
    if let Err(e) = std::fs::create_dir_all(&artifacts_dir) {
        return fail(format!("cannot create {}: {e}", artifacts_dir.display()));
    }
    let mut state = SharedState::new(extract_abstraction(&log, &AbstractionOptions::default()));
    let mut env = Environment::new(log, ArtifactStore::with_mirror(&artifacts_dir), 0);
    let mut err = std::io::stderr();
    let report = run_turn(&mut state, question, provider.as_ref(), &TurnOptions::default(), &mut env, &mut |e| {
        let detail = match e.kind {
            ProgressKind::VerificationResult => format!(" ok={}", e.payload["ok"]),
            ProgressKind::ExecutionResult => format!(" status={}", e.payload["status"]),
            _ => String::new(),
        };
        let _ = writeln!(err, "[turn {}] {}{detail}", e.turn, e.kind.as_str());
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let md = report.to_markdown(&env.store, |id| {
        env.store.get(id).map(|a| format!("artifacts/{}", payload_file(a)))
    });
    let written = std::fs::write(out.join("report.json"), report.blocks_json() + "\n")
        .and_then(|_| std::fs::write(out.join("report.md"), md));
    if let Err(e) = written {
        return fail(format!("cannot write report: {e}"));
    }
    match report.status {
        ReportStatus::Complete => 0,
        ReportStatus::Degraded => 2,
    }
}

pub fn validate_script(log_path: &Path, script_path: &Path) -> i32 {
    if let Err(e) = read_log(log_path) {
        return fail(e);
    }
    let src = match std::fs::read_to_string(script_path) {
        Ok(s) => s,
        Err(e) => return fail(format!("cannot read {}: {e}", script_path.display())),
    };
    let ast = match parse_script(&src) {
        Ok(a) => a,
        Err(e) => {
            println!("{}: {e}", script_path.display());
            return 1;
        }
    };
    let report = verify(&ast, &registry());
    if report.ok {
        return 0;
    }
    let mut out = String::new();
    for d in &report.diagnostics {
        let _ = writeln!(out, "{}: {d}", script_path.display());
    }
    print!("{out}");
    1
}

fn serve(addr: &str, idle_minutes: u64, data_dir: Option<PathBuf>) -> i32 {
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail(e),
    };
    let config = AppConfig {
        idle_timeout: std::time::Duration::from_secs(idle_minutes * 60),
        data_dir,
    };
    rt.block_on(async {
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) => return fail(format!("cannot bind {addr}: {e}")),
        };
        eprintln!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        match crate::serve(listener, crate::AppState::new(config)).await {
            Ok(()) => 0,
            Err(e) => fail(e),
        }
    })
}
