use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pdiff_core::runner::{
    self, compare, config::KEYS, curve_from_histogram, probe_histograms, read_summary, summarize,
    write_curve_csv, RunConfig, TableFormat,
};
use pdiff_core::selector::Statistic;
use pdiff_core::{Error, Result};

const AFTER_HELP: &str = "Any config key can be overridden after the named options as \
`--<dotted.key> <value>` or `--<dotted.key>=<value>`, e.g. `--train.lr 0.01`. \
Run `pdiff keys` for the list.";

#[derive(Parser)]
#[command(name = "pdiff", version, about = "Noisy-label training with probability-difference sample selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its artifacts to output_dir.
    #[command(after_help = AFTER_HELP)]
    Run {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Noise rate of the dropped samples against the drop rate, probed during
    /// ordinary training.
    #[command(after_help = AFTER_HELP)]
    DropCurve {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Probe at the first iteration of this epoch.
        #[arg(long, default_value_t = 2)]
        probe_epoch: usize,
        #[arg(long, value_enum, default_value_t = Strategy::Both)]
        strategy: Strategy,
        /// Directory for drop_curve_<strategy>.csv; defaults to output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a run summary from a run directory or metrics.jsonl.
    Summarize { path: PathBuf },
    /// Tabulate several runs (summary.json files or run directories).
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// List config keys and their defaults.
    Keys,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Delta,
    Py,
    Both,
}

type Overrides = Vec<(String, String)>;

/// Pulls `--a.b value` / `--a.b=value` pairs (any long flag that is dotted or
/// a top-level config key) out of the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let is_key = |f: &&str| {
            let key = f.split_once('=').map_or(*f, |(k, _)| k);
            key.contains('.') || KEYS.iter().any(|(k, _)| *k == key)
        };
        let Some(flag) = arg.strip_prefix("--").filter(is_key) else {
            rest.push(arg);
            continue;
        };
        if rest.len() < 2 {
            // Before the subcommand: leave it for clap to reject.
            rest.push(arg);
            continue;
        }
        match flag.split_once('=') {
            Some((key, value)) => overrides.push((key.to_string(), value.to_string())),
            None => {
                let value = iter
                    .next()
                    .ok_or_else(|| Error::Config(format!("missing value for --{flag}")))?;
                overrides.push((flag.to_string(), value));
            }
        }
    }
    Ok((rest, overrides))
}

fn execute(command: Command, overrides: &[(String, String)]) -> Result<()> {
    let no_overrides = |name: &str| {
        if overrides.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(format!("{name} takes no config overrides")))
        }
    };
    match command {
        Command::Run { config } => {
            let config = RunConfig::load(config.as_deref(), overrides)?;
            eprintln!("pdiff: {} run into {}", config.mode, config.output_dir.display());
            let summary = runner::run_observed(&config, |m| {
                eprintln!(
                    "epoch {:>4}  test_acc {:.4}  selected {:.3}  delta_hat {}  tau_est {}",
                    m.epoch,
                    m.test_accuracy,
                    m.selected_fraction,
                    m.delta_hat.map_or_else(|| "-".into(), |v| format!("{v:.3}")),
                    m.tau_est.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
                );
            })?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
        }
        Command::DropCurve {
            config,
            probe_epoch,
            strategy,
            out,
        } => {
            let config = RunConfig::load(config.as_deref(), overrides)?;
            let statistics = match strategy {
                Strategy::Delta => vec![Statistic::ProbDiff],
                Strategy::Py => vec![Statistic::TrueClassProb],
                Strategy::Both => vec![Statistic::ProbDiff, Statistic::TrueClassProb],
            };
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let hists = probe_histograms(&config, probe_epoch, &statistics)?;
            for (statistic, hist) in statistics.iter().zip(&hists) {
                let points = curve_from_histogram(hist)?;
                let path = dir.join(format!("drop_curve_{statistic}.csv"));
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_curve_csv(&points, file)?;
                println!("{statistic}: {}", path.display());
                for p in &points {
                    println!(
                        "  r={:.2}  dropped={:.4}  real_noise_rate={:.4}",
                        p.drop_rate, p.dropped_fraction, p.real_noise_rate
                    );
                }
            }
        }
        Command::Summarize { path } => {
            no_overrides("summarize")?;
            let summary = summarize(&path)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
        }
        Command::Compare { summaries, csv } => {
            no_overrides("compare")?;
            let loaded = summaries
                .iter()
                .map(|p| read_summary(p))
                .collect::<Result<Vec<_>>>()?;
            let format = if csv { TableFormat::Csv } else { TableFormat::Text };
            print!("{}", compare(&loaded, format)?);
        }
        Command::Keys => {
            no_overrides("keys")?;
            let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (key, default) in KEYS {
                println!("{key:<width$}  {default}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("pdiff: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::parse_from(args);
    match execute(cli.command, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
