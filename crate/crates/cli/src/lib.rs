//! Command-line driver: argument definitions, subcommand execution and the
//! run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sectorshift_core::data::{self, MissingPolicy, PricePanel, SectorMap, REFERENCE_SECTORS};
use sectorshift_core::network::{self, GraphFormat, Weighting};
use sectorshift_core::report::compare_spaces;
use sectorshift_core::sampling::{
    self, LongShortSpace, Period, SampleSpaceSpec, Scheme, SharpeInputs, Style,
};
use sectorshift_core::shifts::{self, RankKind, ShiftSeries, WindowConfig};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl From<sectorshift_core::Error> for CliError {
    fn from(e: sectorshift_core::Error) -> Self {
        if e.is_input() {
            CliError::Input(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Clone, Parser)]
#[command(name = "sectorshift", version, about = "Sector shift estimators, correlation MSTs and portfolio sampling")]
pub struct Cli {
    /// Price CSV: `date,<ticker1>,...`
    #[arg(long, global = true)]
    pub prices: Option<PathBuf>,

    /// Sector CSV: `ticker,sector`
    #[arg(long, global = true)]
    pub sectors: Option<PathBuf>,

    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads (defaults to all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    /// `forward-fill:<maxgap>` or `drop`
    #[arg(long, global = true, default_value = "forward-fill:5")]
    pub missing_policy: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Rolling shift estimator series
    Shifts(ShiftsArgs),
    /// Minimum spanning tree of the full-period sector correlation network
    Network(NetworkArgs),
    /// Monte Carlo portfolio sampling experiment
    Sample(SampleArgs),
    /// Lint the price panel and sector map
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    S,
    W,
    C,
    Kendall,
    Spearman,
    Pearson,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShiftsArgs {
    #[arg(long, value_enum)]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = shifts::DEFAULT_TAU)]
    pub tau: usize,
    #[arg(long, default_value_t = 0.05)]
    pub threshold_pct: f64,
    /// Output CSV, relative to --out-dir unless absolute
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsArg {
    Distance,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Dot,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetworkArgs {
    #[arg(long, value_enum, default_value = "distance")]
    pub weights: WeightsArg,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleArg {
    Long,
    Short,
    Longshort,
}

impl From<StyleArg> for Style {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Long => Style::Long,
            StyleArg::Short => Style::Short,
            StyleArg::Longshort => Style::LongShort,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Uniform,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceArg {
    Product,
    Union,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub style: StyleArg,
    #[arg(long, default_value_t = 30)]
    pub size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `start:end` (ISO dates), `gfc`, or `full`
    #[arg(long, default_value = "full")]
    pub period: String,
    #[arg(long, default_value_t = sampling::DEFAULT_TOP_FRACTION)]
    pub top_fraction: f64,
    #[arg(long = "longshort-space", value_enum, default_value = "product")]
    pub longshort_space: SpaceArg,
    /// Report long and short position shares separately
    #[arg(long)]
    pub sign_split: bool,
    /// Also run these styles with the same settings and report P(X > Y)
    #[arg(long, value_enum, value_delimiter = ',')]
    pub compare: Vec<StyleArg>,
    /// Output report; `.csv` extension selects CSV, anything else JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Files written by one invocation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

pub fn run(cli: &Cli) -> Result<RunOutcome, CliError> {
    let policy: MissingPolicy = cli
        .missing_policy
        .parse()
        .map_err(|e: sectorshift_core::Error| CliError::Input(e.to_string()))?;
    validate_flags(cli)?;
    let prices_path = cli
        .prices
        .as_ref()
        .ok_or_else(|| CliError::Input("--prices is required".into()))?;
    let sectors_path = cli
        .sectors
        .as_ref()
        .ok_or_else(|| CliError::Input("--sectors is required".into()))?;
    for p in [prices_path, sectors_path] {
        if !p.is_file() {
            return Err(CliError::Input(format!("input file {} not found", p.display())));
        }
    }
    fs::create_dir_all(&cli.out_dir).map_err(|e| write_err(&cli.out_dir, e))?;

    let work = || -> Result<(Vec<PathBuf>, Value), CliError> {
        let panel = data::load_prices(prices_path, policy)?;
        let map = data::load_sector_map(sectors_path, &panel)?;
        match &cli.command {
            Command::Shifts(args) => run_shifts(cli, args, &panel, &map),
            Command::Network(args) => run_network(cli, args, &panel, &map),
            Command::Sample(args) => run_sample(cli, args, &panel, &map),
            Command::Validate(args) => run_validate(cli, args, &panel, &map),
        }
    };

    let (outputs, summary) = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let manifest = write_manifest(cli, policy, prices_path, sectors_path, &outputs, summary)?;
    Ok(RunOutcome { outputs, manifest })
}

fn validate_flags(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    match &cli.command {
        Command::Shifts(a) => {
            if a.tau == 0 {
                return Err(CliError::Input("--tau must be at least 1".into()));
            }
            if !(a.threshold_pct > 0.0 && a.threshold_pct < 1.0) {
                return Err(CliError::Input("--threshold-pct must lie in (0, 1)".into()));
            }
        }
        Command::Sample(a) => {
            if a.size == 0 || a.draws == 0 {
                return Err(CliError::Input("--size and --draws must be positive".into()));
            }
            if !(a.top_fraction > 0.0 && a.top_fraction <= 1.0) {
                return Err(CliError::Input("--top-fraction must lie in (0, 1]".into()));
            }
            a.period
                .parse::<Period>()
                .map_err(|e| CliError::Input(e.to_string()))?;
        }
        Command::Network(_) | Command::Validate(_) => {}
    }
    Ok(())
}

fn resolve_out(cli: &Cli, out: &Option<PathBuf>, default: String) -> PathBuf {
    match out {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => cli.out_dir.join(p),
        None => cli.out_dir.join(default),
    }
}

/// Six decimals, `NA` for undefined values.
fn fmt6(v: f64) -> String {
    if v.is_nan() {
        "NA".to_owned()
    } else {
        format!("{v:.6}")
    }
}

pub fn shift_csv(returns: &data::SectorReturnsPanel, series: &ShiftSeries, pvalues: Option<&ShiftSeries>) -> String {
    let mut out = String::new();
    out.push_str(if pvalues.is_some() {
        "date,t,value,pvalue,breach\n"
    } else {
        "date,t,value,breach\n"
    });
    for (k, (&t, &v)) in series.t_index.iter().zip(&series.values).enumerate() {
        let _ = write!(out, "{},{},{}", returns.date_of(t), t, fmt6(v));
        if let Some(p) = pvalues {
            let _ = write!(out, ",{}", fmt6(p.values[k]));
        }
        let _ = writeln!(out, ",{}", u8::from(series.is_breach(t)));
    }
    out
}

fn run_shifts(
    cli: &Cli,
    args: &ShiftsArgs,
    panel: &PricePanel,
    map: &SectorMap,
) -> Result<(Vec<PathBuf>, Value), CliError> {
    let returns = data::sector_returns(panel, map)?;
    let cfg = WindowConfig::new(args.tau, returns.num_days())
        .map_err(|e| CliError::Input(e.to_string()))?;
    let (series, pvalues) = match args.measure {
        MeasureArg::S => (shifts::s_series(&returns, cfg), None),
        MeasureArg::W => (shifts::w_series(&returns, cfg), None),
        MeasureArg::C => (shifts::c_series(&returns, cfg)?, None),
        MeasureArg::Kendall | MeasureArg::Spearman | MeasureArg::Pearson => {
            let kind = match args.measure {
                MeasureArg::Kendall => RankKind::KendallTau,
                MeasureArg::Spearman => RankKind::Spearman,
                _ => RankKind::Pearson,
            };
            let r = shifts::rank_series(&returns, cfg, kind)?;
            (r.coefficient, r.p_values)
        }
    };
    let series = shifts::annotate_threshold(series, args.threshold_pct)?;
    let name = format!("{:?}", args.measure).to_lowercase();
    let path = resolve_out(cli, &args.out, format!("shifts_{name}.csv"));
    fs::write(&path, shift_csv(&returns, &series, pvalues.as_ref())).map_err(|e| write_err(&path, e))?;
    let summary = json!({
        "measure": series.measure.name(),
        "rows": series.len(),
        "threshold": series.threshold,
        "breaches": series.breaches.len(),
        "diagnostics": series.diagnostics,
    });
    Ok((vec![path], summary))
}

fn run_network(
    cli: &Cli,
    args: &NetworkArgs,
    panel: &PricePanel,
    map: &SectorMap,
) -> Result<(Vec<PathBuf>, Value), CliError> {
    let returns = data::sector_returns(panel, map)?;
    let fc = network::full_correlation(&returns)?;
    let (weights, weighting) = match args.weights {
        WeightsArg::Distance => (&fc.dist, Weighting::Distance),
        WeightsArg::Correlation => (&fc.psi, Weighting::Correlation),
    };
    let tree = network::kruskal_mst(weights, &fc.sectors, weighting)?;
    let (format, ext) = match args.format {
        FormatArg::Dot => (GraphFormat::Dot, "dot"),
        FormatArg::Csv => (GraphFormat::Csv, "csv"),
    };
    let path = resolve_out(cli, &args.out, format!("mst_{}.{ext}", weighting.as_str()));
    network::export_graph(&tree, format, &path).map_err(|e| CliError::Input(e.to_string()))?;
    let degrees = tree.degrees();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let hub = degrees.iter().position(|&d| d == max_degree).map(|i| tree.nodes[i].clone());
    let summary = json!({
        "weighting": weighting.as_str(),
        "nodes": tree.nodes.len(),
        "total_weight": tree.total_weight(),
        "max_degree": max_degree,
        "hub": hub,
        "star": tree.star_center().is_some(),
    });
    Ok((vec![path], summary))
}

fn spec_from_args(args: &SampleArgs, style: Style) -> Result<SampleSpaceSpec, CliError> {
    let period: Period = args.period.parse().map_err(|e: sectorshift_core::Error| CliError::Input(e.to_string()))?;
    let mut spec = SampleSpaceSpec::new(style, args.size, args.draws, args.seed)
        .with_scheme(match args.scheme {
            SchemeArg::Uniform => Scheme::Uniform,
            SchemeArg::Stratified => Scheme::Stratified,
        })
        .with_period(period)
        .with_space(match args.longshort_space {
            SpaceArg::Product => LongShortSpace::Product,
            SpaceArg::Union => LongShortSpace::Union,
        })
        .with_top_fraction(args.top_fraction);
    spec.sign_split = args.sign_split;
    Ok(spec)
}

fn run_sample(
    cli: &Cli,
    args: &SampleArgs,
    panel: &PricePanel,
    map: &SectorMap,
) -> Result<(Vec<PathBuf>, Value), CliError> {
    let spec = spec_from_args(args, args.style.into())?;
    spec.validate(panel.num_assets())
        .map_err(|e| CliError::Input(e.to_string()))?;
    let inputs = SharpeInputs::from_panel(&spec.period.apply(panel)?)?;
    let mut experiment = sampling::run_with_inputs(&spec, &inputs, map)?;
    for &other in &args.compare {
        let other_spec = spec_from_args(args, other.into())?;
        let other_run = sampling::run_with_inputs(&other_spec, &inputs, map)?;
        let p = compare_spaces(&experiment.sharpes, &other_run.sharpes)?;
        experiment
            .report
            .comparisons
            .insert(Style::from(other).as_str().to_owned(), p);
    }

    let default_name = format!("sample_{}.json", spec.style.as_str());
    let path = resolve_out(cli, &args.out, default_name);
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let body = if is_csv {
        report_csv(&experiment.report)
    } else {
        let mut s = serde_json::to_string_pretty(&experiment.report)
            .map_err(|e| CliError::Compute(e.to_string()))?;
        s.push('\n');
        s
    };
    fs::write(&path, body).map_err(|e| write_err(&path, e))?;
    let summary = json!({
        "draws": spec.draws,
        "selected": experiment.report.composition.selected,
        "median": experiment.report.quantile(0.5),
    });
    Ok((vec![path], summary))
}

/// Long-format CSV: `kind,key,value,ratio` with kinds `quantile`,
/// `composition` and `comparison`.
pub fn report_csv(report: &sectorshift_core::SamplingReport) -> String {
    let mut out = String::from("kind,key,value,ratio\n");
    for level in sectorshift_core::report::QUANTILE_LEVELS {
        if let Some(v) = report.quantile(level) {
            let _ = writeln!(out, "quantile,{level},{},", fmt6(v));
        }
    }
    for row in &report.composition.rows {
        let _ = writeln!(
            out,
            "composition,{},{},{}",
            csv_field(&row.sector),
            fmt6(row.raw_pct),
            fmt6(row.ratio)
        );
    }
    for (k, v) in &report.comparisons {
        let _ = writeln!(out, "comparison,{k},{},", fmt6(*v));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn run_validate(
    cli: &Cli,
    args: &ValidateArgs,
    panel: &PricePanel,
    map: &SectorMap,
) -> Result<(Vec<PathBuf>, Value), CliError> {
    let sizes = map.sizes();
    let sectors: Vec<Value> = map
        .sectors()
        .iter()
        .zip(&sizes)
        .map(|(name, k)| json!({"sector": name, "size": k}))
        .collect();
    let unknown: Vec<&String> = map
        .sectors()
        .iter()
        .filter(|s| !REFERENCE_SECTORS.iter().any(|r| r.eq_ignore_ascii_case(s)))
        .collect();
    let returns = data::sector_returns(panel, map)?;
    let constant: Vec<&String> = (0..returns.num_sectors())
        .filter(|&j| {
            let col = returns.window(j, 1, returns.num_days());
            col.iter().all(|&v| v == col[0])
        })
        .map(|j| &returns.sectors()[j])
        .collect();
    let report = json!({
        "first_date": panel.dates().first().map(|d| d.to_string()),
        "last_date": panel.dates().last().map(|d| d.to_string()),
        "return_days": panel.num_days(),
        "assets": panel.num_assets(),
        "sector_count": map.num_sectors(),
        "sectors": sectors,
        "sectors_outside_reference_list": unknown,
        "constant_return_sectors": constant,
        "audit": panel.audit(),
    });
    let path = resolve_out(cli, &args.out, "validation.json".into());
    let mut body = serde_json::to_string_pretty(&report).map_err(|e| CliError::Compute(e.to_string()))?;
    body.push('\n');
    fs::write(&path, body).map_err(|e| write_err(&path, e))?;
    let summary = json!({
        "return_days": panel.num_days(),
        "assets": panel.num_assets(),
        "sectors": map.num_sectors(),
    });
    Ok((vec![path], summary))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(
    cli: &Cli,
    policy: MissingPolicy,
    prices: &Path,
    sectors: &Path,
    outputs: &[PathBuf],
    summary: Value,
) -> Result<PathBuf, CliError> {
    // thread count and log level do not affect outputs and are left out
    let (name, args, seed) = match &cli.command {
        Command::Shifts(a) => ("shifts", serde_json::to_value(a), None),
        Command::Network(a) => ("network", serde_json::to_value(a), None),
        Command::Sample(a) => ("sample", serde_json::to_value(a), Some(a.seed)),
        Command::Validate(a) => ("validate", serde_json::to_value(a), None),
    };
    let args = args.map_err(|e| CliError::Compute(e.to_string()))?;
    let mut output_sums = BTreeMap::new();
    for p in outputs {
        let key = p
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        output_sums.insert(key, sha256_file(p)?);
    }
    let manifest = json!({
        "tool": "sectorshift",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": {
            "missing_policy": policy.to_string(),
            "args": args,
        },
        "seed": seed,
        "inputs": {
            "prices": {"path": prices.display().to_string(), "sha256": sha256_file(prices)?},
            "sectors": {"path": sectors.display().to_string(), "sha256": sha256_file(sectors)?},
        },
        "outputs": output_sums,
        "summary": summary,
    });
    let path = cli.out_dir.join("manifest.json");
    let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Compute(e.to_string()))?;
    body.push('\n');
    fs::write(&path, body).map_err(|e| write_err(&path, e))?;
    Ok(path)
}
