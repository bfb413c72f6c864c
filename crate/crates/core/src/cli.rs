//! `openbadge` command line: simulate, ingest, analyze, serve, export.
//!
//! Results go to stdout as JSON; failures go to stderr as one JSON line.
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::hub::{
    server, Clock, Hub, HubConfig, IngestReport, PullScheduler, Puller, RangeQuery, SystemClock,
    TcpLink, DATA_DIR_ENV,
};
use crate::jsonl;
use crate::metrics::TimeWindow;
use crate::registry::GroupRegistry;
use crate::sim::{simulate, write_trace, BadgeConfig, BadgeMode, ConversationScript};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "openbadge",
    version,
    about = "Sociometric badge simulator, analysis and hub"
)]
pub struct Cli {
    /// TOML hub config (ports, pull period, pipeline, metrics, path loss).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store directory; overrides OPENBADGE_DATA_DIR and the config file.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a conversation script into a badge trace directory.
    Simulate(SimulateArgs),
    /// Load a trace directory into the store.
    Ingest(IngestArgs),
    /// Print stats, turn matrix and proximity graph for a window.
    Analyze(AnalyzeArgs),
    /// Run the REST server (and pull TCP badges, if any are given).
    Serve(ServeArgs),
    /// Write a JSONL bundle of one group's data in a window.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Hardware,
    Phone,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces the script's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "hardware")]
    pub mode: ModeArg,
    /// Give each badge a seeded clock offset within +-2 s (default: offset 0).
    #[arg(long)]
    pub random_clock: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Only accept records for this group.
    #[arg(long)]
    pub group: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct RangeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<i64>,
    #[arg(long)]
    pub window_ms: Option<i64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub group: String,
    #[command(flatten)]
    pub range: RangeArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    /// Address of a TCP badge to pull periodically; repeatable.
    #[arg(long = "badge")]
    pub badges: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub group: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub range: RangeArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    pub fn to_json_line(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Data(m) => ("data", m),
        };
        json!({ "error": kind, "message": message }).to_string()
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Process environment seen by [`run`]; tests substitute their own.
pub trait Env {
    fn var(&self, key: &str) -> Option<String>;
}

pub struct ProcessEnv;

impl Env for ProcessEnv {
    fn var(&self, key: &str) -> Option<String> {
        std::env::var(key).ok()
    }
}

impl Env for std::collections::HashMap<String, String> {
    fn var(&self, key: &str) -> Option<String> {
        self.get(key).cloned()
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(argv: I, env: &dyn Env, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(
                stderr,
                "{}",
                CliError::Usage(first.to_string()).to_json_line()
            );
            return EXIT_USAGE;
        }
    };
    match execute(&cli, env) {
        Ok(out) => {
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string_pretty(&out).expect("output serializes")
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json_line());
            e.exit_code()
        }
    }
}

pub fn run_from_env() -> i32 {
    run(
        std::env::args_os(),
        &ProcessEnv,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// Flag, then environment, then config file, then default.
pub fn hub_config(cli: &Cli, env: &dyn Env) -> Result<HubConfig, CliError> {
    if let Some(p) = &cli.config {
        if !p.is_file() {
            return Err(CliError::Usage(format!(
                "config file {} does not exist",
                p.display()
            )));
        }
    }
    let mut cfg =
        HubConfig::resolve(cli.config.as_deref(), env.var(DATA_DIR_ENV)).map_err(data_err)?;
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli, env: &dyn Env) -> Result<Value, CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ingest(a) => cmd_ingest(a, &open_hub(cli, env)?),
        Command::Analyze(a) => cmd_analyze(a, &open_hub(cli, env)?),
        Command::Serve(a) => cmd_serve(a, hub_config(cli, env)?),
        Command::Export(a) => cmd_export(a, &open_hub(cli, env)?),
    }
}

fn open_hub(cli: &Cli, env: &dyn Env) -> Result<Hub, CliError> {
    Hub::open(hub_config(cli, env)?).map_err(data_err)
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Value, CliError> {
    if !a.script.is_file() {
        return Err(CliError::Usage(format!(
            "script {} does not exist",
            a.script.display()
        )));
    }
    let mut script = ConversationScript::from_json_file(&a.script).map_err(data_err)?;
    if let Some(seed) = a.seed {
        script.rng_seed = seed;
    }
    let mode = match a.mode {
        ModeArg::Hardware => BadgeMode::Hardware,
        ModeArg::Phone => BadgeMode::Phone,
    };
    let mut clock_rng = ChaCha8Rng::seed_from_u64(script.rng_seed);
    clock_rng.set_stream(u64::MAX);
    let configs: Vec<BadgeConfig> = script
        .participants
        .iter()
        .map(|_| {
            let c = BadgeConfig::for_mode(mode);
            if a.random_clock {
                c.with_random_offset(&mut clock_rng)
            } else {
                c
            }
        })
        .collect();
    let out = simulate(&script, &configs).map_err(data_err)?;
    write_trace(&out, &a.out).map_err(data_err)?;
    let badges: Vec<Value> = out
        .badges
        .iter()
        .map(|b| {
            json!({
                "badge_id": b.badge_id,
                "participant_id": b.participant_id,
                "chunks": b.chunks.len(),
                "scans": b.scans.len(),
                "clock_offset_ms": b.config.clock_offset_ms,
            })
        })
        .collect();
    Ok(json!({ "out": a.out, "group_id": script.group_id, "badges": badges }))
}

fn cmd_ingest(a: &IngestArgs, hub: &Hub) -> Result<Value, CliError> {
    if !a.trace.is_dir() {
        return Err(CliError::Usage(format!(
            "trace directory {} does not exist",
            a.trace.display()
        )));
    }
    let reg_path = a.trace.join("registry.json");
    if reg_path.is_file() {
        let text = std::fs::read_to_string(&reg_path).map_err(data_err)?;
        let reg: GroupRegistry = serde_json::from_str(&text)
            .map_err(|e| data_err(format!("{}: {e}", reg_path.display())))?;
        hub.register(reg).map_err(data_err)?;
    }
    let mut badge_dirs: Vec<PathBuf> = std::fs::read_dir(&a.trace)
        .map_err(data_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    badge_dirs.sort();
    let mut total = IngestReport::default();
    for dir in &badge_dirs {
        let read = |name: &str| -> Result<(Vec<Value>, usize), CliError> {
            let p = dir.join(name);
            if !p.is_file() {
                return Ok((Vec::new(), 0));
            }
            let vals = jsonl::read_values(&p).map_err(data_err)?;
            let bad = vals.iter().filter(|v| v.is_err()).count();
            Ok((vals.into_iter().filter_map(Result::ok).collect(), bad))
        };
        let (chunks, bad_c) = read("chunks.jsonl")?;
        let (scans, bad_s) = read("scans.jsonl")?;
        let mut report = hub
            .ingest_json(
                &json!({ "chunks": chunks, "scans": scans }),
                a.group.as_deref(),
            )
            .map_err(data_err)?;
        report.malformed += bad_c + bad_s;
        total.add(&report);
    }
    Ok(json!({ "badges": badge_dirs.len(), "report": total }))
}

/// With no range flags the window spans everything stored. Otherwise
/// missing ends default relative to the newest stored record.
fn resolve_window(hub: &Hub, range: &RangeArgs) -> Result<TimeWindow, CliError> {
    let span = hub.span();
    let q = RangeQuery {
        from: range.from,
        to: range.to,
        window_ms: range.window_ms,
    };
    if q == RangeQuery::default() {
        let (from, to) = span.unwrap_or((0, hub.config().default_window_ms));
        return TimeWindow::new(from, to.max(from + 1)).map_err(data_err);
    }
    let now = span.map_or(hub.config().default_window_ms, |s| s.1);
    q.resolve(now, hub.config().default_window_ms)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_analyze(a: &AnalyzeArgs, hub: &Hub) -> Result<Value, CliError> {
    let w = resolve_window(hub, &a.range)?;
    Ok(to_value(&hub.analyze(&a.group, w).map_err(data_err)?))
}

fn cmd_export(a: &ExportArgs, hub: &Hub) -> Result<Value, CliError> {
    let w = resolve_window(hub, &a.range)?;
    let dir = a.out.join(&a.group);
    std::fs::create_dir_all(&dir).map_err(data_err)?;
    let chunks = hub.stored_chunks(&a.group, w).map_err(data_err)?;
    let volumes = hub.volumes(&a.group, w).map_err(data_err)?;
    let events = hub.events(&a.group, w).map_err(data_err)?;
    let scans = hub.scans(&a.group, w).map_err(data_err)?;
    jsonl::write_file(&dir.join("chunks.jsonl"), &chunks).map_err(data_err)?;
    jsonl::write_file(&dir.join("volumes.jsonl"), &volumes).map_err(data_err)?;
    jsonl::write_file(&dir.join("events.jsonl"), &events).map_err(data_err)?;
    jsonl::write_file(&dir.join("scans.jsonl"), &scans).map_err(data_err)?;
    let analysis = hub.analyze(&a.group, w).map_err(data_err)?;
    let write_json = |name: &str, v: Value| {
        std::fs::write(
            dir.join(name),
            serde_json::to_string_pretty(&v).expect("serializes") + "\n",
        )
        .map_err(data_err)
    };
    write_json("analysis.json", to_value(&analysis))?;
    let mut reg = GroupRegistry::default();
    if let Some(g) = hub.registry().group(&a.group) {
        reg.groups.insert(a.group.clone(), g.clone());
    }
    write_json("registry.json", to_value(&reg))?;
    Ok(json!({
        "out": dir,
        "window": w,
        "chunks": chunks.len(),
        "volumes": volumes.len(),
        "events": events.len(),
        "scans": scans.len(),
    }))
}

fn cmd_serve(a: &ServeArgs, mut cfg: HubConfig) -> Result<Value, CliError> {
    if let Some(p) = a.port {
        cfg.port = p;
    }
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let port = cfg.port;
    let period = cfg.pull_period_ms;
    let hub = Arc::new(Hub::open(cfg).map_err(data_err)?);
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let stop = Arc::new(AtomicBool::new(false));
    let scheduler = (!a.badges.is_empty()).then(|| {
        let mut s = PullScheduler::new(Puller::new(hub.clone(), clock.clone()), period);
        for addr in &a.badges {
            s.add(addr.clone(), Box::new(TcpLink::new(addr.clone())));
        }
        let (clock, stop) = (clock.clone(), stop.clone());
        std::thread::spawn(move || s.run(clock, stop))
    });

    let rt = tokio::runtime::Runtime::new().map_err(data_err)?;
    let state = server::AppState { hub, clock };
    let result = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        tracing::info!(addr = %listener.local_addr()?, "serving");
        server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    stop.store(true, std::sync::atomic::Ordering::SeqCst);
    if let Some(h) = scheduler {
        let _ = h.join();
    }
    result.map_err(data_err)?;
    Ok(json!({ "stopped": true }))
}

/// Reads a JSON document, mapping failures to data errors.
pub fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("openbadge").chain(args.iter().copied());
        let code = run(argv, &HashMap::new(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, out, err) = run_args(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"], "usage");
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn flag_beats_env_for_data_dir() {
        let cli = Cli::try_parse_from([
            "openbadge",
            "--data-dir",
            "/flag",
            "analyze",
            "--group",
            "g",
        ])
        .unwrap();
        let env: HashMap<String, String> = [(DATA_DIR_ENV.to_string(), "/env".to_string())].into();
        assert_eq!(
            hub_config(&cli, &env).unwrap().data_dir,
            PathBuf::from("/flag")
        );
        let cli = Cli::try_parse_from(["openbadge", "analyze", "--group", "g"]).unwrap();
        assert_eq!(
            hub_config(&cli, &env).unwrap().data_dir,
            PathBuf::from("/env")
        );
    }
}
