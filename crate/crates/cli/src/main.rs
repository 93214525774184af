//! `gridcast` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand};
use gridcast::config::{DataSource, RunConfig};
use gridcast::eval::{run_backtest, thread_pool, write_report, ModelKind};
use gridcast::pipeline::{FitSeeds, FittedPipeline};
use gridcast::synth;
use gridcast::timeseries::{write_csv, TIMESTAMP_FORMAT};
use gridcast::{Error, ErrorCategory, Result};

#[derive(Parser)]
#[command(
    name = "gridcast",
    version,
    about = "Week-ahead hourly electricity price forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppresses progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the synthetic dataset described by the config as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output CSV path (default: <output_dir>/synth.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the expanding-window backtest and writes report.json, metrics.csv and plots.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Output directory (default: the configured output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of kan,gbt,hybrid,naive,seasonal_naive,linear_arx.
        #[arg(long)]
        models: Option<String>,
    },
    /// Fits the hybrid on the whole dataset and saves it.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model directory (default: <output_dir>/model).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forecasts the configured horizon after an anchor with a saved model.
    Forecast {
        #[command(flatten)]
        common: Common,
        /// Directory written by `train` (default: <output_dir>/model).
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Last observed hour, `YYYY-MM-DDTHH:MM` (default: last hour of the data).
        #[arg(long)]
        anchor: Option<String>,
        /// Output directory (default: the configured output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        if let DataSource::Synth(s) = &mut cfg.data {
            s.seed = seed;
        }
    }
    Ok(cfg)
}

fn parse_models(list: &str) -> Result<Vec<ModelKind>> {
    let models = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<ModelKind>>>()?;
    if models.is_empty() {
        return Err(Error::config("models", "must list at least one model"));
    }
    Ok(models)
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn cmd_synth(common: &Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let DataSource::Synth(s) = &cfg.data else {
        return Err(Error::config("data", "synth requires a synth data source"));
    };
    let ds = synth::generate(s)?;
    let out = out.unwrap_or_else(|| cfg.output_dir.join("synth.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(&out)?;
    write_csv(&ds, std::io::BufWriter::new(file))?;
    say(
        common.quiet,
        format!("wrote {} rows to {}", ds.len(), out.display()),
    );
    Ok(())
}

fn cmd_backtest(common: &Common, out: Option<PathBuf>, models: Option<String>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(list) = models {
        cfg.models = parse_models(&list)?;
    }
    let ds = cfg.load_dataset()?;
    say(
        common.quiet,
        format!(
            "backtesting {} hours of {} with {} folds",
            ds.len(),
            ds.region(),
            cfg.backtest.n_folds
        ),
    );
    let report = run_backtest(&ds, &cfg.plan())?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let written = write_report(&report, &dir)?;
    if !common.quiet {
        println!("{:<16}{:>12}{:>12}{:>8}", "model", "mae", "rmse", "rmae");
        for (m, s) in &report.pooled {
            let rmae = s
                .rmae
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into());
            println!(
                "{:<16}{:>12.3}{:>12.3}{:>8}",
                m.as_str(),
                s.mae,
                s.rmse,
                rmae
            );
        }
        for f in &report.folds {
            println!("fold {}: alpha {:.2}", f.fold, f.alpha);
        }
        println!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(())
}

fn cmd_train(common: &Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let ds = cfg.load_dataset()?;
    let pipe = FittedPipeline::fit(
        &ds,
        ds.len(),
        &cfg.pipeline(),
        FitSeeds::for_fold(cfg.seed, 0),
    )?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.join("model"));
    pipe.save(&dir)?;
    say(
        common.quiet,
        format!(
            "trained through {}; alpha {:.2}; saved to {}",
            pipe.manifest.trained_through,
            pipe.alpha(),
            dir.display()
        ),
    );
    Ok(())
}

fn write_forecast(path: &Path, start: NaiveDateTime, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "price_forecast"])?;
    for (h, v) in values.iter().enumerate() {
        let ts = start + chrono::Duration::hours(h as i64 + 1);
        w.write_record([ts.format(TIMESTAMP_FORMAT).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_forecast(
    common: &Common,
    model_dir: Option<PathBuf>,
    anchor: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let ds = cfg.load_dataset()?;
    let model_dir = model_dir.unwrap_or_else(|| cfg.output_dir.join("model"));
    let pipe = FittedPipeline::load(&model_dir)?;
    let index = match anchor {
        None => ds.len() - 1,
        Some(a) => {
            let ts = NaiveDateTime::parse_from_str(a.trim(), TIMESTAMP_FORMAT)
                .map_err(|e| Error::config("anchor", format!("`{a}`: {e}")))?;
            ds.price()
                .index_of(ts)
                .ok_or_else(|| Error::Data(format!("anchor {a} is outside the data range")))?
        }
    };
    let lookback = pipe.manifest.features.lookback;
    if index + 1 < lookback {
        return Err(Error::Data(format!(
            "anchor needs {lookback} hours of history, only {} available",
            index + 1
        )));
    }
    let fc = pipe.forecast(&ds, index)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let start = ds.timestamp(index);
    for (name, values) in [("kan", &fc.kan), ("gbt", &fc.gbt), ("hybrid", &fc.hybrid)] {
        write_forecast(
            &dir.join(format!("forecast_{name}.csv")),
            start,
            &fc.to_price(values),
        )?;
    }
    say(
        common.quiet,
        format!(
            "forecast from {} (alpha {:.2}) written to {}",
            start,
            pipe.alpha(),
            dir.display()
        ),
    );
    Ok(())
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Runtime => 4,
    }
}

fn error_line(e: &Error) -> String {
    let mut obj = serde_json::json!({
        "category": e.category().as_str(),
        "message": e.to_string(),
    });
    let mut inner = e;
    if let Error::Fold { fold, source } = e {
        obj["fold"] = (*fold).into();
        inner = source;
    }
    if let Error::Config { path, .. } = inner {
        obj["path"] = path.clone().into();
    }
    serde_json::json!({ "error": obj }).to_string()
}

fn run(cli: Cli) -> Result<()> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Synth { common, out } => cmd_synth(&common, out),
        Command::Backtest {
            common,
            out,
            models,
        } => cmd_backtest(&common, out, models),
        Command::Train { common, out } => cmd_train(&common, out),
        Command::Forecast {
            common,
            model_dir,
            anchor,
            out,
        } => cmd_forecast(&common, model_dir, anchor, out),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(e.category()))
        }
    }
}
