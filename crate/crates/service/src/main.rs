use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use crowdpriv_core::protocol::{Aggregator, Keyring};
use crowdpriv_core::simulator::ScenarioConfig;
use crowdpriv_service::commands::{
    self, campus_scenario, read_config, CommandError, CostCurveConfig, ServeConfig, TablesConfig,
};
use crowdpriv_service::{run_respond, HttpAggregator, RespondConfig};

#[derive(Parser)]
#[command(name = "crowdpriv", version, about = "Privacy-preserving crowd estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the utility/privacy table and the cost table.
    Tables {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo runs per coin pair.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Private and non-private study cost over an epsilon grid.
    CostCurve {
        #[command(flatten)]
        common: Common,
    },
    /// Run a campus scenario end to end.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Drive a remote aggregator instead of an in-process one.
        #[arg(long, value_name = "HOST:PORT")]
        server: Option<String>,
    },
    /// Run the aggregator HTTP service until interrupted.
    Serve {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "HOST:PORT", default_value = "127.0.0.1:8080")]
        listen: String,
        /// Overrides the config's noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate data owners answering every active query.
    Respond {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "HOST:PORT")]
        server: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Replay one response per epoch and require the server to reject it.
        #[arg(long)]
        inject_duplicate_nonce: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_or<T: serde::de::DeserializeOwned>(path: Option<&Path>, default: impl FnOnce() -> T) -> Result<T, CommandError> {
    match path {
        Some(p) => read_config(p),
        None => Ok(default()),
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let text = match cli.command {
        Command::Tables { common, runs } => {
            let mut cfg: TablesConfig = load_or(common.config.as_deref(), TablesConfig::default)?;
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            commands::cmd_tables(&cfg, &common.out)?
        }
        Command::CostCurve { common } => {
            let cfg: CostCurveConfig = load_or(common.config.as_deref(), CostCurveConfig::default)?;
            commands::cmd_cost_curve(&cfg, &common.out)?
        }
        Command::Simulate { common, server } => {
            let mut cfg: ScenarioConfig = load_or(common.config.as_deref(), campus_scenario)?;
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            commands::cmd_simulate(&cfg, &common.out, server.as_deref())?
        }
        Command::Serve { config, listen, seed } => {
            let mut cfg: ServeConfig = read_config(&config)?;
            cfg.noise_seed = seed.unwrap_or(cfg.noise_seed);
            let keyring_path = config.parent().unwrap_or(Path::new(".")).join(&cfg.keyring);
            let keyring = Keyring::load(&keyring_path).map_err(|e| CommandError::Usage(e.to_string()))?;
            serve(&listen, Aggregator::new(keyring, cfg.aggregator_config()))?;
            String::new()
        }
        Command::Respond { config, server, seed, inject_duplicate_nonce } => {
            let mut cfg: RespondConfig = load_or(config.as_deref(), RespondConfig::default)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.inject_duplicate_nonce |= inject_duplicate_nonce;
            let api = HttpAggregator::new(&server).map_err(|e| CommandError::Runtime(e.to_string()))?;
            let summary = run_respond(&api, &cfg).map_err(|e| match e {
                crowdpriv_service::respond::RespondError::Config(m) => CommandError::Usage(m),
                other => CommandError::Runtime(other.to_string()),
            })?;
            serde_json::to_string(&summary).expect("summary serializes") + "\n"
        }
    };
    print!("{text}");
    Ok(())
}

fn serve(listen: &str, aggregator: Aggregator) -> Result<(), CommandError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CommandError::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CommandError::Runtime(format!("binding {listen}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CommandError::Runtime(e.to_string()))?;
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();
        tracing::info!(%addr, "aggregator ready");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crowdpriv_service::server::serve(listener, Arc::new(aggregator), shutdown)
            .await
            .map_err(|e| CommandError::Runtime(e.to_string()))
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
