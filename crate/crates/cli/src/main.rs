use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cempca::data::write_csv;
use cempca_cli::bench::Suite;
use cempca_cli::config::{Covariance, Init, Method, Settings};
use cempca_cli::labels::{encode, read_labels};
use cempca_cli::record::Metrics;
use cempca_cli::run::{fit_record, load_dataset, write_embedding, Generator, LabelSource};
use cempca_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "cempca", version, about = "Joint PCA embedding and clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV with a trailing `label` column.
    Generate {
        /// atom, chainlink, hepta, lsun3d, tetra or chang.
        #[arg(long)]
        shape: String,
        /// Sample size; defaults to the reference size of the shape.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a CSV file and write a JSON result record.
    Fit(FitArgs),
    /// Score predicted labels against ground truth; prints {acc, nmi, ari}.
    Evaluate {
        /// CSV file or `fit` result JSON.
        pred: PathBuf,
        #[arg(long)]
        pred_column: Option<String>,
        /// Defaults to the prediction file itself (using its `label` column).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        truth_column: Option<String>,
    },
    /// Run a datasets × methods suite and write results.csv, runs.json and table.txt.
    Benchmark {
        suite: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(value_enum)]
    method: Method,
    /// CSV with a header row; a `label` column, if present, is ground truth.
    data: PathBuf,
    #[command(flatten)]
    settings: SettingsArgs,
    /// JSON settings file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of the `B` and `M` coordinates.
    #[arg(long)]
    emit_embedding: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_labels")]
    label_column: Option<String>,
    /// Treat every column as a feature.
    #[arg(long)]
    no_labels: bool,
}

#[derive(Args)]
struct SettingsArgs {
    /// Number of clusters; defaults to the number of label classes.
    #[arg(long)]
    g: Option<usize>,
    /// Latent dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Coupling weight between the embedding and the cluster representation.
    #[arg(long)]
    delta: Option<f64>,
    /// Neighbours in the smoothing graph.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Smoothing power.
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    cov: Option<Covariance>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
    /// Use the smoothing graph rows as extra features instead of smoothing.
    #[arg(long)]
    graph_as_features: bool,
}

impl SettingsArgs {
    fn settings(&self) -> Settings {
        Settings {
            g: self.g,
            p: self.p,
            delta: self.delta,
            neighbors: self.neighbors,
            smooth: self.smooth,
            restarts: self.restarts,
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
            cov: self.cov,
            init: self.init,
            standardize: match (self.standardize, self.no_standardize) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
            graph_as_features: self.graph_as_features.then_some(true),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|_| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CEMPCA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "CEMPCA_THREADS must be a positive integer, got '{value}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            shape,
            n,
            seed,
            out,
        } => {
            let ds = Generator::parse(&shape)?.generate(n, seed)?;
            write_csv(&ds, &out)?;
        }
        Command::Fit(args) => fit(args)?,
        Command::Evaluate {
            pred,
            pred_column,
            truth,
            truth_column,
        } => {
            let pred_labels = read_labels(&pred, pred_column.as_deref())?;
            let truth_labels =
                read_labels(truth.as_deref().unwrap_or(&pred), truth_column.as_deref())?;
            if pred_labels.len() != truth_labels.len() {
                return Err(CliError::Data(format!(
                    "{} predictions but {} truth labels",
                    pred_labels.len(),
                    truth_labels.len()
                )));
            }
            let metrics = Metrics::compute(&encode(&truth_labels), &encode(&pred_labels))?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Benchmark { suite, out_dir } => {
            let base = suite.parent().unwrap_or(Path::new("."));
            let report = Suite::load(&suite)?.run(base)?;
            report.write(&out_dir)?;
            print!("{}", report.table());
        }
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let file_settings = match &args.config {
        Some(path) => serde_json::from_str::<Settings>(&fs::read_to_string(path)?)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?,
        None => Settings::default(),
    };
    let settings = file_settings.overlay(&args.settings.settings());
    if args.emit_embedding.is_some() && !args.method.has_embedding() {
        return Err(CliError::Usage(format!(
            "{} produces no embedding",
            args.method.name()
        )));
    }
    let labels = if args.no_labels {
        LabelSource::None
    } else {
        args.label_column
            .map_or(LabelSource::Auto, LabelSource::Column)
    };
    let ds = load_dataset(&args.data, &labels)?;
    let config = settings.resolve(args.method, ds.n(), ds.d(), ds.class_count())?;
    let (record, result) = fit_record(&ds, &config)?;
    if let Some(path) = &args.emit_embedding {
        write_embedding(&result, path)?;
    }
    let json = serde_json::to_string_pretty(&record)?;
    match &args.out {
        Some(path) => fs::write(path, json + "\n")?,
        None => writeln!(std::io::stdout(), "{json}")?,
    }
    Ok(())
}
