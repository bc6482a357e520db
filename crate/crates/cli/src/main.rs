use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emrs_core::harness::{emit_reports, load_campaign, parse_campaign, run_campaign, Verdict, DEFAULT_CAMPAIGN};
use emrs_core::sim::Scenario;
use emrs_teleop::{start, ServerConfig};

#[derive(Parser)]
#[command(name = "emrs", version, about = "Rover locomotion test campaigns and teleoperation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write reports. Exits 0 iff every case passes or raises only its expected flag.
    Run {
        /// Campaign file; the built-in default campaign when omitted.
        #[arg(long)]
        campaign: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run a single case.
        #[arg(long = "case")]
        case_id: Option<String>,
    },
    /// Check a campaign or scenario file without running it.
    Validate { file: PathBuf },
    /// Serve the teleoperation WebSocket, health endpoint and console.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Scenario file to start in; the level sandbox when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory holding the console bundle.
        #[arg(long)]
        console: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
}

fn run(campaign: Option<PathBuf>, out: PathBuf, seed: Option<u64>, case_id: Option<String>) -> Result<bool, String> {
    let campaign = match campaign {
        Some(p) => load_campaign(&p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => parse_campaign(DEFAULT_CAMPAIGN).map_err(|e| e.to_string())?,
    };
    if let Some(id) = &case_id {
        if campaign.case(id).is_none() {
            return Err(format!("no case '{id}' in campaign"));
        }
    }
    let seed = seed.unwrap_or(campaign.seed);
    let runs = run_campaign(&campaign, Some(seed), case_id.as_deref());
    let summary = emit_reports(&runs, seed, &out).map_err(|e| format!("{}: {e}", out.display()))?;
    for line in &summary.cases {
        let status = match &line.verdict {
            Verdict::Pass => "PASS".to_string(),
            Verdict::ExpectedFlag { flag } => format!("FLAG (expected) {flag}"),
            Verdict::Fail { reasons } => format!("FAIL {}", reasons.join("; ")),
        };
        println!("{:<22} {status}", line.id);
    }
    let t = summary.totals;
    println!(
        "{} cases: {} passed, {} expected flags, {} failed; reports in {}",
        t.cases,
        t.passed,
        t.expected_flags,
        t.failed,
        out.display()
    );
    Ok(summary.all_ok)
}

fn validate(file: PathBuf) -> Result<(), String> {
    let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
    let is_campaign = text.lines().any(|l| l.trim_start().starts_with("[[case]]"));
    if is_campaign {
        let c = parse_campaign(&text).map_err(|e| format!("{}: {e}", file.display()))?;
        println!("{}: campaign with {} cases, {} scenarios", file.display(), c.cases.len(), c.scenarios.len());
    } else {
        Scenario::from_toml(&text).map_err(|e| format!("{}: {e}", file.display()))?;
        println!("{}: scenario", file.display());
    }
    Ok(())
}

fn library(scenario: Option<PathBuf>) -> Result<(BTreeMap<String, Scenario>, String), String> {
    let mut lib = parse_campaign(DEFAULT_CAMPAIGN).map_err(|e| e.to_string())?.scenarios;
    let name = match scenario {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            let s = Scenario::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            let name = p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            lib.insert(name.clone(), s);
            name
        }
        None => "flat".to_string(),
    };
    Ok((lib, name))
}

async fn serve(port: u16, bind: String, scenario: Option<PathBuf>, seed: u64, console: Option<PathBuf>) -> Result<(), String> {
    let (lib, name) = library(scenario)?;
    let mut config = ServerConfig::new(lib, &name, seed);
    config.static_dir = console;
    let router = start(config).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind((bind.as_str(), port)).await.map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    println!("serving scenario '{name}' on http://{addr} (WebSocket at /ws)");
    axum::serve(listener, router).await.map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let result = match Cli::parse().command {
        Command::Run { campaign, out, seed, case_id } => run(campaign, out, seed, case_id).map(|ok| if ok { 0 } else { 1 }),
        Command::Validate { file } => validate(file).map(|_| 0),
        Command::Serve { port, scenario, seed, console, bind } => tokio::runtime::Runtime::new()
            .map_err(|e| e.to_string())
            .and_then(|rt| rt.block_on(serve(port, bind, scenario, seed, console)))
            .map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
