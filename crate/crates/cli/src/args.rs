//! Command-line and config-file options.
//!
//! Every subcommand reads an optional JSON object (`--config`) whose keys
//! are the long flag names; flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "tickvol",
    version,
    about = "Tick-level price change volatility models"
)]
pub struct Cli {
    /// Worker threads for day-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// JSON file with defaults for the subcommand's options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw tick file into one file per day.
    Clean(CleanArgs),
    /// Fit the intraday adjustment curves on a directory of days.
    Adjust(AdjustArgs),
    /// Fit model variants day by day.
    Fit(FitArgs),
    /// Residual diagnostics of fitted models.
    Diagnose(DiagnoseArgs),
    /// Next-day forecast evaluation of fitted models.
    Forecast(ForecastArgs),
    /// Daily realized and model-implied volatility measures.
    Realized(RealizedArgs),
    /// Write simulated tick data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CleanArgs {
    /// Raw CSV with `timestamp,price,volume` rows.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Output directory for `<YYYY-MM-DD>.csv` day files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Merge ticks sharing a timestamp.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub aggregate: Option<bool>,
    /// Session open, `HH:MM` (default 09:30).
    #[arg(long)]
    pub open: Option<String>,
    /// Session close, `HH:MM` (default 16:00).
    #[arg(long)]
    pub close: Option<String>,
    /// Interval dropped after the open, e.g. `5m`, `90s` (default 5m).
    #[arg(long)]
    pub skip_open: Option<String>,
    /// Neighbours on each side in the outlier filter (default 25).
    #[arg(long)]
    pub outlier_window: Option<usize>,
    /// Outlier threshold in mean absolute deviations (default 10).
    #[arg(long)]
    pub outlier_threshold: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct AdjustArgs {
    /// Directory of cleaned day files.
    #[arg(long)]
    pub days: Option<PathBuf>,
    /// Output JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    #[arg(long)]
    pub days: Option<PathBuf>,
    /// Adjustment curves; without them the models are fit unadjusted.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// `all`, `base`, `alternatives`, or a comma-separated list of names.
    #[arg(long)]
    pub variants: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Nelder–Mead iteration cap (default 5000).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Simplex diameter at convergence (default 1e-6).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Restarts from the best point (default 1).
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub fits: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<PathBuf>,
    /// Per-variant table; a `_by_day` table is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ForecastArgs {
    #[arg(long)]
    pub fits: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<PathBuf>,
    /// Per-cell table; a `_by_day` table is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also train on the day with simultaneous ticks merged.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub aggregate_train: Option<bool>,
    /// Also test on the next day with simultaneous ticks merged.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub aggregate_test: Option<bool>,
    /// Nelder–Mead iteration cap (default 5000).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Simplex diameter at convergence (default 1e-6).
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Restarts from the best point (default 1).
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RealizedArgs {
    #[arg(long)]
    pub fits: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<PathBuf>,
    /// Daily table; a `_corr` correlation table is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Variant whose fits give the model-implied measures (default proposed).
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Output directory; receives `ticks.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model variant to simulate (default proposed).
    #[arg(long)]
    pub variant: Option<String>,
    /// Ticks per day (default 20000).
    #[arg(long)]
    pub n_ticks: Option<usize>,
    /// Number of consecutive weekdays (default 1).
    #[arg(long)]
    pub days: Option<usize>,
    /// Seed of the first day; day k uses seed + k (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// First day, `YYYY-MM-DD` (default 2022-03-01).
    #[arg(long)]
    pub start_day: Option<String>,
    /// Coefficient overrides, config file only.
    #[arg(skip)]
    pub params: Option<Map<String, Value>>,
    /// Overrides of other simulation settings, config file only.
    #[arg(skip)]
    pub sim: Option<Map<String, Value>>,
}

/// Overlays the options given on the command line onto the config file.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&Path>,
) -> anyhow::Result<T> {
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
            {
                Value::Object(m) => m,
                _ => {
                    return Err(UsageError(format!(
                        "config {} must be a JSON object",
                        path.display()
                    ))
                    .into())
                }
            }
        }
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| UsageError(format!("config: {e}")).into())
}

/// The value of a required option.
pub fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, UsageError> {
    v.clone()
        .ok_or_else(|| UsageError(format!("missing required option --{flag}")))
}
