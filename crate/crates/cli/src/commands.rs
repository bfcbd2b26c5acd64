use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use symclust::diag::{anova_bonferroni, decile_ranks, diagnostics_report, DiagnosticsReport, IndicatorTable};
use symclust::formats::{self, PartitionMeta};
use symclust::hclust::{agglomerate, cut, Dendrogram};
use symclust::ingest::{build_dataset, CauseMapping};
use symclust::leader::{run_leader_method, InitStrategy, LeaderConfig};
use symclust::{CategorySchema, Dataset, Partition, VariableSchema};

use crate::{ClusterArgs, Init, IngestArgs, Method, PlotArgs, ReportArgs};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// Valid input that violates a constraint, such as k > n (exit 3).
    Constraint(String),
    /// Broken internal invariant (exit 4).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Constraint(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Constraint(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<symclust::Error> for CliError {
    fn from(err: symclust::Error) -> Self {
        if err.is_input_error() {
            CliError::Input(err.to_string())
        } else {
            CliError::Constraint(err.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Record of one command invocation, written as `manifest.json` next to
/// its outputs.
#[derive(Debug, Default, Serialize)]
struct RunManifest {
    format_version: u32,
    command: String,
    inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    normalize_by_p: bool,
    uniform_weights: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<InitStrategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    highlight_threshold: Option<f64>,
    out_dir: String,
    outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            format_version: formats::FORMAT_VERSION,
            command: command.into(),
            out_dir: out_dir.display().to_string(),
            ..Self::default()
        }
    }

    /// Records an input path after checking that it exists.
    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        if !path.is_file() {
            return Err(CliError::Input(format!("{role} file `{}` does not exist", path.display())));
        }
        self.inputs.insert(role.into(), path.display().to_string());
        Ok(())
    }
}

struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory `{}`: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write `{}`: {e}", path.display())))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.outputs.push("manifest.json".into());
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| CliError::Input(format!("cannot write `{}`: {e}", path.display())))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read `{}`: {e}", path.display())))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| CliError::Input(format!("cannot read `{}`: {e}", path.display())))
}

fn load_dataset(path: &Path, uniform_weights: bool) -> Result<Dataset> {
    let ds = formats::dataset_from_json(&read(path)?)?;
    Ok(if uniform_weights { ds.with_uniform_weights() } else { ds })
}

fn load_indicators(path: Option<&PathBuf>) -> Result<Option<IndicatorTable>> {
    path.map(|p| Ok(formats::read_indicators_csv(open(p)?)?)).transpose()
}

/// Categories implied by a mapping: rule categories in order, then the
/// residual category.
fn mapping_categories(mapping: &CauseMapping) -> Result<CategorySchema> {
    let mut labels: Vec<&str> = Vec::new();
    for label in mapping.rules.iter().map(|r| r.category.as_str()).chain([mapping.residual.as_str()]) {
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    Ok(CategorySchema::new(labels)?)
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let mut manifest = RunManifest::new("ingest", &args.out_dir);
    manifest.input("rates", &args.rates)?;
    manifest.input("std_population", &args.std_population)?;
    let (mapping, categories) = match &args.mapping {
        Some(path) => {
            manifest.input("mapping", path)?;
            let mapping = CauseMapping::from_json(&read(path)?)?;
            let categories = mapping_categories(&mapping)?;
            (mapping, categories)
        }
        None => (CauseMapping::mortality(), CategorySchema::mortality()),
    };
    let variables = match &args.variables {
        Some(names) => VariableSchema::new(names.iter().map(|s| s.trim()))?,
        None => VariableSchema::young_adults(),
    };
    let records = formats::read_rates_csv(open(&args.rates)?)?;
    let std = formats::read_std_population_csv(
        open(&args.std_population)?,
        &variables,
        args.gender_share,
        args.std_total,
    )?;
    let dataset = build_dataset(&records, &std, &mapping, &categories, &variables)?;

    let mut out = Outputs::new(&args.out_dir, manifest)?;
    out.write("dataset.json", &formats::dataset_to_json(&dataset)?)?;
    out.finish()?;

    println!("{:<12} {:>14}  per-variable weights", "unit", "total_weight");
    for unit in dataset.units() {
        let per_var: Vec<String> = unit.weights().iter().map(|w| format!("{w:.3}")).collect();
        println!("{:<12} {:>14.3}  {}", unit.id(), unit.total_weight(), per_var.join(" "));
    }
    Ok(())
}

fn init_strategy(init: Init) -> InitStrategy {
    match init {
        Init::RandomUnits => InitStrategy::RandomUnits,
        Init::SpreadSeeding => InitStrategy::SpreadSeeding,
    }
}

pub fn cluster(args: ClusterArgs) -> Result<()> {
    let mut manifest = RunManifest::new("cluster", &args.out_dir);
    manifest.input("dataset", &args.dataset)?;
    manifest.method = Some(args.method.name().into());
    manifest.k = args.k;
    manifest.normalize_by_p = args.normalize_by_p;
    manifest.uniform_weights = args.uniform_weights;
    match args.method {
        Method::Leader => {
            if args.normalize_by_p {
                return Err(CliError::Constraint("--normalize-by-p applies only to --method hclust".into()));
            }
        }
        Method::Hclust => {
            if args.seed.is_some() || args.init.is_some() || args.max_iterations.is_some() {
                return Err(CliError::Constraint(
                    "--seed, --init and --max-iterations apply only to --method leader".into(),
                ));
            }
        }
    }
    let dataset = load_dataset(&args.dataset, args.uniform_weights)?;

    match args.method {
        Method::Leader => {
            let k = args
                .k
                .ok_or_else(|| CliError::Constraint("--k is required for --method leader".into()))?;
            let mut config = LeaderConfig::new(k).with_seed(args.seed.unwrap_or(0));
            if let Some(init) = args.init {
                config = config.with_init(init_strategy(init));
            }
            if let Some(max) = args.max_iterations {
                config.max_iterations = max;
            }
            manifest.seed = Some(config.seed);
            manifest.init = Some(config.init_strategy);
            let run = run_leader_method(&dataset, &config)?;
            let meta = PartitionMeta {
                method: "leader".into(),
                criterion_trace: run.criterion_trace.clone(),
                converged: Some(run.converged),
            };
            let mut out = Outputs::new(&args.out_dir, manifest)?;
            out.write("partition.json", &formats::partition_to_json(&run.partition, &dataset, &meta)?)?;
            out.finish()?;
            println!(
                "leader method: k = {}, criterion = {}, iterations = {}, converged = {}",
                k,
                run.criterion(),
                run.criterion_trace.len(),
                run.converged
            );
        }
        Method::Hclust => {
            if let Some(k) = args.k {
                if k == 0 || k > dataset.len() {
                    return Err(symclust::Error::KOutOfRange { k, n: dataset.len() }.into());
                }
            }
            let dendrogram = agglomerate(&dataset, args.normalize_by_p)?;
            let mut out = Outputs::new(&args.out_dir, manifest)?;
            out.write("dendrogram.json", &formats::dendrogram_to_json(&dendrogram)?)?;
            out.write("dendrogram.nwk", &formats::dendrogram_to_newick(&dendrogram))?;
            if let Some(k) = args.k {
                let partition = cut(&dendrogram, k, &dataset)?;
                let meta = PartitionMeta {
                    method: "hclust".into(),
                    ..PartitionMeta::default()
                };
                out.write("partition.json", &formats::partition_to_json(&partition, &dataset, &meta)?)?;
            }
            out.finish()?;
            println!(
                "hclust: {} merges, root height = {}{}",
                dendrogram.merges().len(),
                dendrogram.height(dendrogram.root()),
                if dendrogram.has_inversions() { " (height inversions present)" } else { "" }
            );
        }
    }
    Ok(())
}

/// Partition from a partition document, or from cutting a dendrogram
/// document into `k` clusters. Also returns the dendrogram when there is
/// one.
fn load_partition(
    path: &Path,
    k: Option<usize>,
    dataset: &Dataset,
    k_required: bool,
) -> Result<(Partition, Option<Dendrogram>)> {
    let text = read(path)?;
    match formats::document_kind(&text)?.as_str() {
        "partition" => {
            let (partition, _) = formats::partition_from_json(&text, dataset)?;
            if let Some(k) = k {
                if k != partition.len() {
                    return Err(CliError::Constraint(format!(
                        "--k {k} disagrees with the partition's {} clusters",
                        partition.len()
                    )));
                }
            }
            Ok((partition, None))
        }
        "dendrogram" => {
            let dendrogram = formats::dendrogram_from_json(&text)?;
            let k = match k {
                Some(k) => k,
                None if k_required => {
                    return Err(CliError::Constraint("--k is required when the input is a dendrogram".into()))
                }
                None => 1,
            };
            let partition = cut(&dendrogram, k, dataset)?;
            Ok((partition, Some(dendrogram)))
        }
        other => Err(CliError::Input(format!(
            "`{}` is a {other} document; expected a partition or dendrogram",
            path.display()
        ))),
    }
}

fn specificity_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("cluster,variable,specificity\n");
    for (c, cluster) in report.clusters.iter().enumerate() {
        for row in &cluster.rows {
            let _ = writeln!(out, "{},{},{}", c + 1, row.variable, row.specificity);
        }
    }
    out
}

fn contrasts_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("cluster,variable,category,contrast,flag,highlighted\n");
    for (c, cluster) in report.clusters.iter().enumerate() {
        for cell in cluster.rows.iter().flat_map(|r| &r.contrasts) {
            let flag = serde_json::to_value(cell.flag)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c + 1,
                cell.variable,
                cell.category,
                cell.value,
                flag,
                cell.highlighted
            );
        }
    }
    out
}

fn deciles_csv(table: &IndicatorTable, partition: &Partition, dataset: &Dataset) -> String {
    let ids: Vec<&str> = dataset.units().iter().map(|u| u.id()).collect();
    let labels = partition.labels();
    let mut out = String::from("unit_id,cluster,indicator,value,decile\n");
    for name in table.indicators() {
        let ranks = decile_ranks(table, name, &ids);
        for ((id, rank), label) in ids.iter().zip(ranks).zip(&labels) {
            let value = table.get(id, name).map_or("NA".to_string(), |v| v.to_string());
            let rank = rank.map_or("NA".to_string(), |r| r.to_string());
            let _ = writeln!(out, "{id},{},{name},{value},{rank}", label + 1);
        }
    }
    out
}

fn anova_outputs(table: &IndicatorTable, partition: &Partition, dataset: &Dataset) -> (String, String, String) {
    let mut summary = String::from("indicator,status,df_between,df_within,ss_between,ss_within,f_statistic,p_value\n");
    let mut pairs = String::from("indicator,cluster_a,cluster_b,mean_difference,t_statistic,p_value,adjusted_p_value\n");
    let mut text = String::from("One-way ANOVA across clusters with Bonferroni-adjusted pairwise t tests\n");
    for (name, result) in anova_bonferroni(table, partition, dataset) {
        match result {
            Ok(r) => {
                let _ = writeln!(
                    summary,
                    "{name},ok,{},{},{},{},{},{}",
                    r.df_between, r.df_within, r.ss_between, r.ss_within, r.f_statistic, r.p_value
                );
                let _ = writeln!(
                    text,
                    "\n{name}: F({}, {}) = {:.4}, p = {:.4e}",
                    r.df_between, r.df_within, r.f_statistic, r.p_value
                );
                for ((g, size), mean) in r.groups.iter().zip(&r.group_sizes).zip(&r.group_means) {
                    let _ = writeln!(text, "  cluster {}: n = {size}, mean = {mean:.4}", g + 1);
                }
                for c in &r.comparisons {
                    let _ = writeln!(
                        pairs,
                        "{name},{},{},{},{},{},{}",
                        c.group_a + 1,
                        c.group_b + 1,
                        c.mean_difference,
                        c.t_statistic,
                        c.p_value,
                        c.adjusted_p_value
                    );
                    let _ = writeln!(
                        text,
                        "  {} vs {}: diff = {:.4}, t = {:.4}, adjusted p = {:.4e}",
                        c.group_a + 1,
                        c.group_b + 1,
                        c.mean_difference,
                        c.t_statistic,
                        c.adjusted_p_value
                    );
                }
            }
            Err(err) => {
                let _ = writeln!(summary, "{name},\"{err}\",,,,,,");
                let _ = writeln!(text, "\n{name}: not computed ({err})");
            }
        }
    }
    (summary, pairs, text)
}

pub fn report(args: ReportArgs) -> Result<()> {
    let mut manifest = RunManifest::new("report", &args.out_dir);
    manifest.input("dataset", &args.dataset)?;
    manifest.input("clustering", &args.input)?;
    if let Some(path) = &args.indicators {
        manifest.input("indicators", path)?;
    }
    manifest.k = args.k;
    manifest.uniform_weights = args.uniform_weights;
    manifest.highlight_threshold = Some(args.highlight_threshold);
    if !(args.highlight_threshold.is_finite() && args.highlight_threshold >= 1.0) {
        return Err(CliError::Constraint(format!(
            "--highlight-threshold must be a finite value >= 1, got {}",
            args.highlight_threshold
        )));
    }
    let dataset = load_dataset(&args.dataset, args.uniform_weights)?;
    let (partition, _) = load_partition(&args.input, args.k, &dataset, true)?;
    let indicators = load_indicators(args.indicators.as_ref())?;
    let report = diagnostics_report(&partition, &dataset, args.highlight_threshold)?;

    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let mut text = report.to_text();
    out.write("specificity.csv", &specificity_csv(&report))?;
    out.write("contrasts.csv", &contrasts_csv(&report))?;
    if let Some(table) = &indicators {
        out.write("deciles.csv", &deciles_csv(table, &partition, &dataset))?;
        let (summary, pairs, anova_text) = anova_outputs(table, &partition, &dataset);
        out.write("anova.csv", &summary)?;
        out.write("anova_pairwise.csv", &pairs)?;
        text.push('\n');
        text.push_str(&anova_text);
    }
    out.write("report.txt", &text)?;
    out.finish()?;
    print!("{text}");
    Ok(())
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let mut manifest = RunManifest::new("plot", &args.out_dir);
    manifest.input("dataset", &args.dataset)?;
    if let Some(path) = &args.input {
        manifest.input("clustering", path)?;
    }
    if let Some(path) = &args.indicators {
        manifest.input("indicators", path)?;
    }
    manifest.k = args.k;
    manifest.uniform_weights = args.uniform_weights;
    let dataset = load_dataset(&args.dataset, args.uniform_weights)?;
    let (partition, dendrogram) = match &args.input {
        Some(path) => load_partition(path, args.k, &dataset, false)?,
        None => {
            if args.k.is_some_and(|k| k != 1) {
                return Err(CliError::Constraint("--k other than 1 needs a dendrogram --input".into()));
            }
            (Partition::from_labels(&dataset, &vec![0; dataset.len()])?, None)
        }
    };
    if dendrogram.is_none() && args.indicators.is_some() {
        return Err(CliError::Constraint(
            "--indicators is drawn under a dendrogram; pass a dendrogram --input".into(),
        ));
    }
    let indicators = load_indicators(args.indicators.as_ref())?;

    let mut out = Outputs::new(&args.out_dir, manifest)?;
    if let Some(d) = &dendrogram {
        out.write("dendrogram.svg", &symclust::plot::dendrogram_svg(d, indicators.as_ref(), args.k))?;
    }
    out.write(
        "patterns.svg",
        &symclust::plot::pattern_svg(&partition, dataset.categories(), dataset.variables()),
    )?;
    out.finish()?;
    Ok(())
}
