//! Table reproduction, cost curves and scenario runs behind the CLI.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crowdpriv_core::cost_model::{breakeven_epsilon, cost_curve, private_cost, CostParams};
use crowdpriv_core::estimation::{analytic_error_oracle, relative_error_mc, ErrorTrialConfig};
use crowdpriv_core::mechanisms::{derive_seed, rr_privacy_level, CoinPair};
use crowdpriv_core::protocol::{AggregatorConfig, KeyEntry};
use crowdpriv_core::simulator::{
    run_simulation, run_simulation_with, scenario_key_entry, scenario_noise_seed, ScenarioConfig,
    SimulationSummary,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::client::HttpAggregator;

/// The bundled campus scenario.
pub const CAMPUS_JSON: &str = include_str!("../scenarios/campus.json");

pub const TABLE1_COINS: [(f64, f64); 9] = [
    (0.3, 0.3),
    (0.3, 0.6),
    (0.3, 0.9),
    (0.6, 0.3),
    (0.6, 0.6),
    (0.6, 0.9),
    (0.9, 0.3),
    (0.9, 0.6),
    (0.9, 0.9),
];
pub const TABLE1_N: u64 = 1000;
pub const TABLE1_TRUE_YES: u64 = 800;
pub const TABLE2_EPSILONS: [f64; 5] = [2.3979, 1.2528, 0.8873, 0.539, 0.3895];

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Runtime(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CommandError {
    CommandError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CommandError {
    CommandError::Runtime(e.to_string())
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CommandError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("parsing {}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CommandError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| runtime(format!("creating {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

// ---- tables ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub cost_params: CostParams,
}

fn default_runs() -> u64 {
    100
}

fn default_seed() -> u64 {
    2017
}

impl Default for TablesConfig {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            seed: default_seed(),
            cost_params: CostParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub p: f64,
    pub q: f64,
    pub eta_mc: f64,
    pub eta_analytic: f64,
    pub epsilon_paper: f64,
    pub epsilon_strict: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub epsilon: f64,
    pub cost: i64,
}

pub fn table1(cfg: &TablesConfig) -> Result<Vec<Table1Row>, CommandError> {
    if cfg.runs == 0 {
        return Err(usage("runs must be at least 1"));
    }
    TABLE1_COINS
        .iter()
        .map(|&(p, q)| {
            let coins = CoinPair::new(p, q).map_err(runtime)?;
            let trial = ErrorTrialConfig {
                n: TABLE1_N,
                true_yes: TABLE1_TRUE_YES,
                coins,
                runs: cfg.runs,
                seed: derive_seed(cfg.seed, format!("table1/{p}/{q}").as_bytes()),
            };
            let level = rr_privacy_level(coins).map_err(runtime)?;
            Ok(Table1Row {
                p,
                q,
                eta_mc: relative_error_mc(&trial).map_err(runtime)?,
                eta_analytic: analytic_error_oracle(&trial).map_err(runtime)?.expected_abs_rel_error,
                epsilon_paper: level.epsilon_yes,
                epsilon_strict: level.epsilon_strict,
            })
        })
        .collect()
}

pub fn table2(params: &CostParams) -> Result<Vec<Table2Row>, CommandError> {
    TABLE2_EPSILONS
        .iter()
        .map(|&epsilon| {
            let cost = private_cost(epsilon, params).map_err(runtime)?;
            Ok(Table2Row {
                epsilon,
                cost: cost.round() as i64,
            })
        })
        .collect()
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf, CommandError> {
    let (path, out) = create(dir, name)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(path)
}

pub fn render_tables(t1: &[Table1Row], t2: &[Table2Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Utility and privacy of randomized response (N={TABLE1_N}, {TABLE1_TRUE_YES} yes)");
    let _ = writeln!(
        s,
        "{:>5} {:>5} {:>10} {:>12} {:>10} {:>14}",
        "p", "q", "eta_mc", "eta_analytic", "epsilon", "epsilon_strict"
    );
    for r in t1 {
        let _ = writeln!(
            s,
            "{:>5.1} {:>5.1} {:>10.4} {:>12.4} {:>10.4} {:>14.4}",
            r.p, r.q, r.eta_mc, r.eta_analytic, r.epsilon_paper, r.epsilon_strict
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Private study cost by epsilon");
    let _ = writeln!(s, "{:>8} {:>10}", "epsilon", "cost");
    for r in t2 {
        let _ = writeln!(s, "{:>8} {:>10}", r.epsilon, r.cost);
    }
    s
}

pub fn cmd_tables(cfg: &TablesConfig, out_dir: &Path) -> Result<String, CommandError> {
    cfg.cost_params.validate().map_err(usage)?;
    let t1 = table1(cfg)?;
    let t2 = table2(&cfg.cost_params)?;
    write_rows(out_dir, "table1.csv", &t1)?;
    write_rows(out_dir, "table2.csv", &t2)?;
    Ok(render_tables(&t1, &t2))
}

// ---- cost curve ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCurveConfig {
    #[serde(default)]
    pub cost_params: CostParams,
    #[serde(default = "default_grid")]
    pub epsilons: Vec<f64>,
}

/// 0.0083 followed by 0.05, 0.10, ..., 3.00.
pub fn default_grid() -> Vec<f64> {
    std::iter::once(0.0083)
        .chain((1..=60).map(|i| f64::from(i) * 0.05))
        .collect()
}

impl Default for CostCurveConfig {
    fn default() -> Self {
        Self {
            cost_params: CostParams::default(),
            epsilons: default_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurveRow {
    pub epsilon: f64,
    pub private_cost: f64,
    pub nonprivate_cost: f64,
    pub favored: bool,
}

pub const BREAKEVEN_PREFIX: &str = "# breakeven_epsilon=";

pub fn cmd_cost_curve(cfg: &CostCurveConfig, out_dir: &Path) -> Result<String, CommandError> {
    cfg.cost_params.validate().map_err(usage)?;
    let points = cost_curve(&cfg.epsilons, &cfg.cost_params).map_err(usage)?;
    let breakeven = breakeven_epsilon(&cfg.cost_params).map_err(runtime)?;

    let (path, mut out) = create(out_dir, "cost_curve.csv")?;
    writeln!(out, "{BREAKEVEN_PREFIX}{breakeven}").map_err(runtime)?;
    let mut w = csv::Writer::from_writer(out);
    for p in &points {
        w.serialize(CostCurveRow {
            epsilon: p.epsilon,
            private_cost: p.private_cost,
            nonprivate_cost: p.nonprivate_cost,
            favored: p.participation_favored,
        })
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(format!(
        "wrote {} points to {}\nbreakeven epsilon {breakeven:.4}\n",
        points.len(),
        path.display()
    ))
}

/// Reads a cost-curve CSV back: the breakeven value and every row.
pub fn read_cost_curve(text: &str) -> Result<(f64, Vec<CostCurveRow>), CommandError> {
    let (first, rest) = text.split_once('\n').ok_or_else(|| runtime("empty cost curve"))?;
    let breakeven = first
        .strip_prefix(BREAKEVEN_PREFIX)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| runtime("missing breakeven header"))?;
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let rows = r.deserialize().collect::<Result<_, _>>().map_err(runtime)?;
    Ok((breakeven, rows))
}

// ---- simulate ----

pub fn campus_scenario() -> ScenarioConfig {
    serde_json::from_str(CAMPUS_JSON).expect("bundled scenario parses")
}

pub fn cmd_simulate(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    server: Option<&str>,
) -> Result<String, CommandError> {
    cfg.validate().map_err(usage)?;
    let report = match server {
        None => run_simulation(cfg).map_err(runtime)?,
        Some(addr) => {
            let api = HttpAggregator::new(addr).map_err(runtime)?;
            run_simulation_with(cfg, &api).map_err(runtime)?
        }
    };

    let (_, out) = create(out_dir, "simulation.csv")?;
    report.write_csv(out).map_err(runtime)?;
    let summary = report.summary();
    write_json(out_dir, "summary.json", &summary)?;
    write_json(out_dir, "keyring.json", &[scenario_key_entry(cfg)])?;

    Ok(describe_summary(&summary))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<(), CommandError> {
    let (_, mut out) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(runtime)?;
    writeln!(out).map_err(runtime)?;
    out.flush().map_err(runtime)
}

fn describe_summary(s: &SimulationSummary) -> String {
    let c = &s.cost_comparison;
    let mut text = format!(
        "{} epoch records, CI95 coverage {:.3}\nnon-private cost {:.0}\n",
        s.n_records, s.coverage_fraction, c.nonprivate_cost
    );
    if let (Some(eps), Some(cost)) = (c.epsilon, c.private_cost) {
        let _ = writeln!(text, "private cost {cost:.0} at epsilon {eps:.4}");
    }
    if let Some(b) = c.breakeven_epsilon {
        let _ = writeln!(text, "breakeven epsilon {b:.4}");
    }
    let _ = writeln!(
        text,
        "participation favored: {}",
        if c.participation_favored { "private" } else { "non-private" }
    );
    text
}

// ---- serve ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    /// Keyring file, relative to the config file's directory.
    pub keyring: PathBuf,
    #[serde(default = "default_grace")]
    pub grace_epochs: u64,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_grace() -> u64 {
    1
}

impl ServeConfig {
    pub fn aggregator_config(&self) -> AggregatorConfig {
        AggregatorConfig {
            grace_epochs: self.grace_epochs,
            noise_seed: self.noise_seed,
        }
    }
}

/// A serve config that reproduces in-process runs of `scenario`.
pub fn serve_config_for(scenario: &ScenarioConfig, keyring: PathBuf) -> ServeConfig {
    ServeConfig {
        keyring,
        grace_epochs: 0,
        noise_seed: scenario_noise_seed(scenario),
    }
}

pub fn write_keyring(path: &Path, entries: &[KeyEntry]) -> Result<(), CommandError> {
    let json = serde_json::to_string_pretty(entries).map_err(runtime)?;
    fs::write(path, json).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}
