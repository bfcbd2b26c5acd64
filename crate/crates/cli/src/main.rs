//! `symclust`: ingest mortality data, cluster countries by their
//! cause-of-death compositions, and report or plot the result.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "symclust", version, about = "Clustering of units described by weighted compositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset from death counts and a standard population.
    Ingest(IngestArgs),
    /// Run the leader method or hierarchical clustering.
    Cluster(ClusterArgs),
    /// Write specificity/contrast tables, indicator deciles and ANOVA.
    Report(ReportArgs),
    /// Draw the dendrogram and per-cluster pattern plots as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// CSV with columns country,variable,cause_code,deaths,population.
    #[arg(long)]
    rates: PathBuf,
    /// Standard population CSV: variable,std_count or age_group,gender,count.
    #[arg(long = "std")]
    std_population: PathBuf,
    /// Cause grouping rules as JSON; defaults to the seven mortality
    /// categories.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Comma-separated variable names; defaults to the eight young-adult
    /// age-gender groups.
    #[arg(long, value_delimiter = ',')]
    variables: Option<Vec<String>>,
    /// Male share of the standard population when it is given per gender.
    #[arg(long, default_value_t = 0.5)]
    gender_share: f64,
    /// Size of the standard population when it is given per gender.
    #[arg(long, default_value_t = symclust::ingest::DEFAULT_STD_TOTAL)]
    std_total: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Leader,
    Hclust,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Leader => "leader",
            Method::Hclust => "hclust",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    RandomUnits,
    SpreadSeeding,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dataset JSON.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Number of clusters; required for the leader method, optional for
    /// hclust (also writes the cut partition).
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the leader method's random initialisation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Replace all weights by 1 before clustering.
    #[arg(long)]
    uniform_weights: bool,
    /// Divide hclust merge heights by the number of variables.
    #[arg(long)]
    normalize_by_p: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Partition JSON or dendrogram JSON.
    #[arg(long)]
    input: PathBuf,
    /// Number of clusters when `--input` is a dendrogram.
    #[arg(long)]
    k: Option<usize>,
    /// CSV with columns unit_id,indicator,value; adds decile ranks and ANOVA.
    #[arg(long)]
    indicators: Option<PathBuf>,
    #[arg(long, default_value_t = symclust::diag::DEFAULT_HIGHLIGHT_THRESHOLD)]
    highlight_threshold: f64,
    #[arg(long)]
    uniform_weights: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Dendrogram JSON or partition JSON; without it the whole dataset is
    /// plotted as one cluster.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of clusters to cut the dendrogram into.
    #[arg(long)]
    k: Option<usize>,
    /// Indicator CSV drawn as a decile strip under the dendrogram.
    #[arg(long)]
    indicators: Option<PathBuf>,
    #[arg(long)]
    uniform_weights: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn configure_threads() -> Result<(), commands::CliError> {
    let Ok(raw) = std::env::var("SYMCLUST_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| commands::CliError::Input(format!("SYMCLUST_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| commands::CliError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| {
        configure_threads()?;
        match cli.command {
            Command::Ingest(args) => commands::ingest(args),
            Command::Cluster(args) => commands::cluster(args),
            Command::Report(args) => commands::report(args),
            Command::Plot(args) => commands::plot(args),
        }
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
        Err(_) => ExitCode::from(4),
    }
}
