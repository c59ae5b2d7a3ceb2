//! Command-line front end: config files, dispatch and CSV/JSON output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{registry, run_experiment, Cell, ExperimentConfig, ResultTable};
use crate::geometry::{default_cell_radius, noise_from_snr, DEFAULT_SNR_DB, DEFAULT_SNR_REFERENCE_M};
use crate::interference::dbm_to_watts;
use crate::montecarlo::default_rmax_factor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "pdfrelay", version, about = "Relay-assisted uplink models and simulations")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its table.
    Run {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List registered experiments.
    List,
}

const KEYS: &[&str] = &[
    "lambda1",
    "lambda2",
    "alpha",
    "cell_radius_m",
    "p_max_dbm",
    "sigma2_w",
    "snr_db",
    "snr_ref_m",
    "alpha1",
    "rho1_mode",
    "rmax_factor",
    "interferer_common_fraction",
    "true_relay_positions",
    "n_trials",
    "seed",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!(
                "line {}: unknown key {k:?}; known keys: {}",
                no + 1,
                KEYS.join(", ")
            )));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k:?}", no + 1)));
        }
    }
    Ok(out)
}

fn num(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
        })
        .transpose()
}

fn int(map: &BTreeMap<String, String>, key: &str) -> Result<Option<u64>> {
    map.get(key)
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {v:?}")))
        })
        .transpose()
}

/// Resolves a config file's text into an experiment config. Missing keys take
/// the reference values.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let map = parse_key_values(text)?;
    let mut cfg = ExperimentConfig::reference();
    let net = &mut cfg.network;
    if let Some(v) = num(&map, "lambda1")? {
        net.lambda1 = v;
        net.lambda2 = 2.0 * v;
        net.cell_radius = default_cell_radius(v);
    }
    if let Some(v) = num(&map, "lambda2")? {
        net.lambda2 = v;
    }
    if let Some(v) = num(&map, "alpha")? {
        net.alpha = v;
    }
    if let Some(v) = num(&map, "cell_radius_m")? {
        net.cell_radius = v;
    }
    if let Some(v) = num(&map, "p_max_dbm")? {
        cfg.p_max_dbm = v;
    }
    net.p_s = dbm_to_watts(cfg.p_max_dbm);
    net.p_r = net.p_s;
    if let Some(v) = num(&map, "alpha1")? {
        net.alpha1 = v;
    }
    net.noise_power = match (num(&map, "sigma2_w")?, num(&map, "snr_db")?) {
        (Some(_), Some(_)) => return Err(Error::Config("give sigma2_w or snr_db, not both".into())),
        (Some(w), None) => w,
        (None, snr) => {
            let reference = num(&map, "snr_ref_m")?.unwrap_or(DEFAULT_SNR_REFERENCE_M);
            noise_from_snr(net.p_s, snr.unwrap_or(DEFAULT_SNR_DB), reference, net.alpha)
        }
    };
    if map.contains_key("snr_ref_m") && map.contains_key("sigma2_w") {
        return Err(Error::Config("snr_ref_m only applies with snr_db".into()));
    }
    if let Some(v) = map.get("rho1_mode") {
        cfg.rho1_mode = v.parse()?;
    }
    net.rho1 = cfg.rho1_mode.resolve(net.lambda1, net.lambda2, net.alpha)?;
    cfg.field.rmax_factor = num(&map, "rmax_factor")?.unwrap_or_else(|| default_rmax_factor(net.alpha));
    if let Some(v) = num(&map, "interferer_common_fraction")? {
        cfg.field.interferer_common_fraction = v;
    }
    if let Some(v) = map.get("true_relay_positions") {
        cfg.field.true_relay_positions = v
            .parse()
            .map_err(|_| Error::Config(format!("true_relay_positions: expected true or false, got {v:?}")))?;
    }
    if let Some(v) = int(&map, "n_trials")? {
        cfg.n_trials = Some(v as usize);
    }
    if let Some(v) = int(&map, "seed")? {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The resolved config as ordered `(key, value)` pairs.
pub fn config_entries(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let n = &cfg.network;
    vec![
        ("lambda1", fmt_num(n.lambda1)),
        ("lambda2", fmt_num(n.lambda2)),
        ("alpha", fmt_num(n.alpha)),
        ("cell_radius_m", fmt_num(n.cell_radius)),
        ("p_max_dbm", fmt_num(cfg.p_max_dbm)),
        ("sigma2_w", fmt_num(n.noise_power)),
        ("alpha1", fmt_num(n.alpha1)),
        ("rho1_mode", cfg.rho1_mode.to_string()),
        ("rho1", fmt_num(n.rho1)),
        ("rmax_factor", fmt_num(cfg.field.rmax_factor)),
        ("interferer_common_fraction", fmt_num(cfg.field.interferer_common_fraction)),
        ("true_relay_positions", cfg.field.true_relay_positions.to_string()),
        (
            "n_trials",
            cfg.n_trials.map_or_else(|| "default".to_string(), |v| v.to_string()),
        ),
        ("seed", cfg.seed.to_string()),
    ]
}

/// Nine significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(v) => fmt_num(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Bool(b) => b.to_string(),
        Cell::Missing => String::new(),
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(v) => json!(v),
        Cell::Int(v) => json!(v),
        Cell::Text(s) => json!(s),
        Cell::Bool(b) => json!(b),
        Cell::Missing => Value::Null,
    }
}

/// Serializes a table with the resolved config embedded.
pub fn render(table: &ResultTable, cfg: &ExperimentConfig, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut out = Vec::new();
            out.extend_from_slice(format!("# experiment: {}\n", table.experiment).as_bytes());
            for (k, v) in config_entries(cfg) {
                out.extend_from_slice(format!("# config.{k}: {v}\n").as_bytes());
            }
            for (k, v) in &table.summary {
                out.extend_from_slice(format!("# summary.{k}: {}\n", cell_text(v)).as_bytes());
            }
            let mut w = csv::Writer::from_writer(out);
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(&table.columns).map_err(io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell_text)).map_err(io)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.to_string()))
        }
        Format::Json => {
            let config: serde_json::Map<String, Value> = config_entries(cfg)
                .into_iter()
                .map(|(k, v)| (k.to_string(), Value::String(v)))
                .collect();
            let summary: serde_json::Map<String, Value> =
                table.summary.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect();
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(cell_json).collect()))
                .collect();
            let doc = json!({
                "experiment": table.experiment,
                "seed": cfg.seed,
                "config": config,
                "summary": summary,
                "columns": table.columns,
                "rows": rows,
            });
            let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn list_experiments() -> String {
    registry()
        .iter()
        .map(|e| format!("{:<12}{}\n", e.id, e.description))
        .collect()
}

/// Exit status for an error; each error class gets its own code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 3,
        Error::UnknownExperiment { .. } => 4,
        Error::Io(_) => 5,
        _ => 6,
    }
}

fn run_command(
    experiment: &str,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    format: Format,
    workers: Option<usize>,
) -> Result<String> {
    let text = fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    crate::experiments::find(experiment)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let start = Instant::now();
    let table = pool.install(|| run_experiment(experiment, &cfg))?;
    let bytes = render(&table, &cfg, format)?;
    fs::write(out, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", out.display())))?;
    Ok(format!(
        "{experiment}: {} rows in {:.2} s, seed {} -> {}",
        table.rows.len(),
        start.elapsed().as_secs_f64(),
        cfg.seed,
        out.display()
    ))
}

/// Runs the CLI and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match args.command {
        Command::List => {
            print!("{}", list_experiments());
            0
        }
        Command::Run {
            experiment,
            config,
            out,
            seed,
            format,
            workers,
        } => match run_command(&experiment, &config, &out, seed, format, workers) {
            Ok(line) => {
                println!("{line}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_reference() {
        let cfg = parse_config("# nothing\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::reference());
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(matches!(parse_config("lamda1 = 1e-6"), Err(Error::Config(m)) if m.contains("unknown key")));
        assert!(matches!(parse_config("alpha = 4\nalpha = 3"), Err(Error::Config(m)) if m.contains("duplicate")));
        assert!(matches!(parse_config("alpha 4"), Err(Error::Config(_))));
        assert!(parse_config("sigma2_w = 1e-12\nsnr_db = 10").is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse_config("p_max_dbm = 26 # louder\nsigma2_w = 1e-12\nrho1_mode = fixed:0.1\nseed = 9").unwrap();
        assert!((cfg.network.p_s - dbm_to_watts(26.0)).abs() < 1e-15);
        assert_eq!(cfg.network.noise_power, 1e-12);
        assert_eq!(cfg.network.rho1, 0.1);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(parse_config("alpha = 2").is_err());
        assert!(parse_config("cell_radius_m = -3").is_err());
        assert!(parse_config("n_trials = 0").is_err());
    }

    #[test]
    fn csv_quotes_and_formats() {
        let mut t = ResultTable::new("demo", &["a", "b"]);
        t.push(vec![Cell::Num(0.5), Cell::Text("x,y".into())]);
        t.push(vec![Cell::Missing, Cell::Bool(true)]);
        let s = String::from_utf8(render(&t, &ExperimentConfig::reference(), Format::Csv).unwrap()).unwrap();
        assert!(s.contains("# config.seed: 1\n"));
        assert!(s.ends_with("a,b\n5.00000000e-1,\"x,y\"\n,true\n"));
    }
}
