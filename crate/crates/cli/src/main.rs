//! netreg: subspace-projection regression on network-linked data.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netreg_core::error::{Error, Result};
use netreg_core::estimator::{self, FitConfig, RMode};
use netreg_core::io::{self, EdgeListFile, Indexing};
use netreg_core::linalg::EigenDirection;
use netreg_core::network::{self, NetworkEstimate};
use netreg_core::rank;
use netreg_core::sim::{
    self, DensitySchedule, DesignKind, EffectKind, Method, NetworkKind, ScenarioConfig,
};
use netreg_core::spectral;

#[derive(Parser)]
#[command(
    name = "netreg",
    version,
    about = "Regression with network cohesion effects: estimation, confidence \
             intervals, and a chi-squared network-effect test robust to network noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the spectral projection regression on a dataset
    Fit(FitArgs),
    /// Fit and report the chi-squared network-effect test
    TestNetworkEffect(FitArgs),
    /// Select the intersection dimension r
    SelectR(SelectRArgs),
    /// Run a Monte Carlo experiment
    Simulate(SimulateArgs),
    /// Empirical check of the eigenspace concentration bound
    Concentration(ConcentrationArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhatKind {
    Adjacency,
    Laplacian,
    Sbm,
    Dcbm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum IndexingArg {
    Zero,
    One,
}

impl From<IndexingArg> for Indexing {
    fn from(v: IndexingArg) -> Self {
        match v {
            IndexingArg::Zero => Indexing::Zero,
            IndexingArg::One => Indexing::One,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Edge list file: whitespace-separated `i j [w]`, `#` comments
    #[arg(long)]
    network: PathBuf,
    /// Node indexing convention of the edge list
    #[arg(long, value_enum, default_value = "one")]
    network_indexing: IndexingArg,
    /// Edge list lines carry a weight in [0, 1]
    #[arg(long)]
    weighted: bool,
    /// Covariate CSV with a header row; one row per node
    #[arg(long)]
    covariates: PathBuf,
    /// Name of the response column in the covariate CSV
    #[arg(long)]
    response: String,
    /// Community labels, one 1-based integer per line (sbm/dcbm)
    #[arg(long)]
    communities: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Network subspace dimension K
    #[arg(long)]
    k: usize,
    /// Intersection dimension: an integer, `auto-threshold`, or `auto-bootstrap`
    #[arg(long, default_value = "auto-bootstrap")]
    r: String,
    /// Source of the relational-matrix estimate
    #[arg(long, value_enum, default_value = "adjacency")]
    phat: PhatKind,
    /// Confidence/test level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replicates for `--r auto-bootstrap`
    #[arg(long, default_value_t = 50)]
    bootstrap_reps: usize,
    /// RNG seed (falls back to NETREG_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp from the report (stable output bytes)
    #[arg(long)]
    no_timestamp: bool,
    /// Worker threads (this build computes on a single thread)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct SelectRArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Network subspace dimension K
    #[arg(long)]
    k: usize,
    /// Selection rule
    #[arg(long, value_enum, default_value = "bootstrap")]
    method: SelectMethod,
    /// Source of the relational-matrix estimate (sets the eigen direction)
    #[arg(long, value_enum, default_value = "adjacency")]
    phat: PhatKind,
    /// Bootstrap replicates
    #[arg(long, default_value_t = 50)]
    bootstrap_reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelectMethod {
    Threshold,
    Bootstrap,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioPreset {
    /// Eigenspace design with a planted network effect (inference metrics)
    Inference,
    /// Eigenspace design with gamma = 0 (type-I error)
    InferenceNull,
    /// Random covariates with an eigenspace network effect (MSE comparison)
    Comparison,
    /// Random covariates with gamma = 0 (MSE comparison under the null)
    ComparisonNull,
    /// Random covariates with a smooth Laplacian effect (MSE comparison)
    ComparisonSmooth,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario preset
    #[arg(long, value_enum)]
    scenario: ScenarioPreset,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Average-degree schedule: 2logn | sqrtn | n23 | an explicit number
    #[arg(long, default_value = "sqrtn")]
    density: String,
    /// Network model for the population matrix
    #[arg(long, value_enum, default_value = "sbm")]
    network: NetworkArg,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods (defaults per scenario)
    #[arg(long)]
    methods: Option<String>,
    /// Write the CSV rows here instead of stdout
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write the JSON summary here
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Zero the wall-time field (stable output bytes)
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NetworkArg {
    Sbm,
    Dcbm,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value = "n23")]
    density: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => run_fit(args, false),
        Command::TestNetworkEffect(args) => run_fit(args, true),
        Command::SelectR(args) => run_select_r(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Concentration(args) => run_concentration(args),
    };
    if let Err(err) = outcome {
        eprintln!("{}", io::error_json(&err));
        std::process::exit(err.exit_code());
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("NETREG_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn parse_r_mode(text: &str) -> Result<RMode> {
    match text {
        "auto-threshold" => Ok(RMode::AutoThreshold),
        "auto-bootstrap" => Ok(RMode::AutoBootstrap),
        other => other.parse::<usize>().map(RMode::Fixed).map_err(|_| Error::InvalidConfig {
            detail: format!("--r must be an integer, `auto-threshold` or `auto-bootstrap`, got `{other}`"),
        }),
    }
}

fn parse_density(text: &str) -> Result<DensitySchedule> {
    match text {
        "2logn" => Ok(DensitySchedule::TwoLogN),
        "sqrtn" => Ok(DensitySchedule::SqrtN),
        "n23" => Ok(DensitySchedule::NTwoThirds),
        other => other.parse::<f64>().map(DensitySchedule::Explicit).map_err(|_| {
            Error::InvalidConfig {
                detail: format!("--density must be 2logn | sqrtn | n23 | a number, got `{other}`"),
            }
        }),
    }
}

fn build_estimate(phat: PhatKind, dataset: &io::Dataset) -> Result<NetworkEstimate> {
    let need_communities = || {
        dataset.communities.clone().ok_or_else(|| Error::InvalidConfig {
            detail: "--phat sbm/dcbm requires --communities".into(),
        })
    };
    Ok(match phat {
        PhatKind::Adjacency => NetworkEstimate::adjacency(dataset.a.clone()),
        PhatKind::Laplacian => network::laplacian(&dataset.a),
        PhatKind::Sbm => network::estimate_sbm(&dataset.a, &need_communities()?)?,
        PhatKind::Dcbm => network::estimate_dcbm(&dataset.a, &need_communities()?)?,
    })
}

fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Six-significant-digit rendering for the human-readable summary.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:.*e}", 5)
    }
}

fn run_fit(args: FitArgs, test_focus: bool) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let file = EdgeListFile {
        path: args.data.network.clone(),
        indexing: args.data.network_indexing.into(),
        weighted: args.data.weighted,
    };
    let dataset = io::read_dataset(
        &file,
        &args.data.covariates,
        &args.data.response,
        args.data.communities.as_deref(),
    )?;
    let estimate = build_estimate(args.phat, &dataset)?;
    let config = FitConfig {
        r_mode: parse_r_mode(&args.r)?,
        alpha_level: args.alpha,
        bootstrap_reps: args.bootstrap_reps,
        seed,
        ..FitConfig::new(args.k)
    };
    let fit = estimator::fit(&dataset.x.view(), &dataset.y.view(), &estimate, &config)?;
    let mut report = io::build_fit_report(&fit, &dataset.x_names, Some(network::average_degree(&dataset.a)));
    if !args.no_timestamp {
        report.diagnostics.timestamp = Some(timestamp());
    }
    let mut buf = Vec::new();
    io::write_fit_report(&report, &mut buf)?;
    write_output(args.out.as_ref(), &buf)?;

    // Short human summary to stderr (6 significant digits).
    if test_focus {
        match &report.network_effect {
            Some(ne) => eprintln!(
                "network effect: chisq = {}, df = {}, p = {}",
                sig6(ne.chisq),
                ne.df,
                sig6(ne.p)
            ),
            None => eprintln!("network effect: not defined (r = K)"),
        }
    } else {
        eprintln!("fit: n = {}, p = {}, K = {}, r = {}", dataset.y.len(), report.coefficients.len(), report.k, report.r);
        eprintln!("sigma2 = {}", sig6(report.sigma2));
    }
    Ok(())
}

fn run_select_r(args: SelectRArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let file = EdgeListFile {
        path: args.data.network.clone(),
        indexing: args.data.network_indexing.into(),
        weighted: args.data.weighted,
    };
    let dataset = io::read_dataset(
        &file,
        &args.data.covariates,
        &args.data.response,
        args.data.communities.as_deref(),
    )?;
    let z = spectral::orthonormal_basis(&dataset.x.view())?;
    let direction = match args.phat {
        PhatKind::Laplacian => EigenDirection::Smallest,
        _ => EigenDirection::Largest,
    };
    let report = match args.method {
        SelectMethod::Bootstrap => rank::select_r_bootstrap(
            &dataset.a,
            &z,
            args.k,
            args.bootstrap_reps,
            seed,
            direction,
        )?,
        SelectMethod::Threshold => {
            let estimate = build_estimate(args.phat, &dataset)?;
            let eig = estimate.leading_eigenvectors(args.k)?;
            let svd = spectral::alignment_svd(&z, &eig.basis)?;
            rank::select_r_threshold(
                &svd.sigma_hat,
                network::average_degree(&dataset.a),
                dataset.x.ncols(),
                args.k,
                dataset.y.len(),
            )
        }
    };
    let mut buf = Vec::new();
    io::write_rank_report(&report, &mut buf)?;
    write_output(args.out.as_ref(), &buf)?;
    eprintln!("selected r = {}", report.r_hat);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let density = parse_density(&args.density)?;
    let network = match args.network {
        NetworkArg::Sbm => NetworkKind::Sbm,
        NetworkArg::Dcbm => NetworkKind::Dcbm,
    };
    let (design, effects, default_methods, inference) = match args.scenario {
        ScenarioPreset::Inference => (
            DesignKind::Eigenspace,
            EffectKind::Eigenspace { gamma: vec![0.0, 1.0, 1.0, 1.0] },
            vec![Method::Sp, Method::SpSbm],
            true,
        ),
        ScenarioPreset::InferenceNull => (
            DesignKind::Eigenspace,
            EffectKind::ZeroGamma,
            vec![Method::Sp, Method::SpSbm],
            true,
        ),
        ScenarioPreset::Comparison => (
            DesignKind::RandomCovariates,
            EffectKind::Eigenspace { gamma: vec![0.0, 1.0, 1.0, 1.0] },
            vec![Method::Sp, Method::SpSbm, Method::Ols, Method::Sim, Method::Rnc],
            false,
        ),
        ScenarioPreset::ComparisonNull => (
            DesignKind::RandomCovariates,
            EffectKind::ZeroGamma,
            vec![Method::Sp, Method::SpSbm, Method::Ols, Method::Sim, Method::Rnc],
            false,
        ),
        ScenarioPreset::ComparisonSmooth => (
            DesignKind::RandomCovariates,
            EffectKind::SmoothLaplacian,
            vec![Method::Sp, Method::SpSbm, Method::Ols, Method::Sim, Method::Rnc],
            false,
        ),
    };
    let methods = match &args.methods {
        Some(text) => text
            .split(',')
            .map(|m| {
                serde_json::from_value::<Method>(serde_json::Value::String(m.trim().to_string()))
                    .map_err(|_| Error::InvalidConfig { detail: format!("unknown method `{m}`") })
            })
            .collect::<Result<Vec<_>>>()?,
        None => default_methods,
    };
    let config = ScenarioConfig {
        n: args.n,
        p: 4,
        k: 4,
        network,
        density,
        design,
        effects,
        noise_sigma2: 1.0,
        alpha_scale: None,
        reps: args.reps,
        seed,
        methods,
        r_mode: RMode::Fixed(1),
        alpha_level: 0.05,
    };
    let mut report = if inference {
        sim::run_inference_experiment(&config)?
    } else {
        sim::run_comparison_experiment(&config)?
    };
    if args.no_timestamp {
        report.wall_time_secs = 0.0;
    }
    let mut csv_buf = Vec::new();
    io::write_experiment_csv(&report, &mut csv_buf)?;
    write_output(args.out_csv.as_ref(), &csv_buf)?;
    if let Some(path) = &args.out_json {
        let mut json_buf = Vec::new();
        io::write_experiment_json(&report, &mut json_buf)?;
        std::fs::write(path, &json_buf)?;
    }
    Ok(())
}

fn run_concentration(args: ConcentrationArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let density = parse_density(&args.density)?;
    let report = sim::run_concentration_check(args.n, args.k, density, args.reps, seed)?;
    let mut buf = serde_json::to_vec_pretty(&report)?;
    buf.push(b'\n');
    write_output(args.out.as_ref(), &buf)?;
    eprintln!(
        "fraction within bound: {} (bound {}, median {})",
        sig6(report.fraction_within_bound),
        sig6(report.bound),
        sig6(report.median)
    );
    Ok(())
}

fn timestamp() -> String {
    // RFC 3339 UTC from the system clock, without pulling in a time crate.
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs();
    let days = now / 86_400;
    let (y, m, d) = civil_from_days(days as i64);
    let secs = now % 86_400;
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        secs / 3600,
        (secs % 3600) / 60,
        secs % 60
    )
}

/// Days-since-epoch to (year, month, day); Howard Hinnant's civil algorithm.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
