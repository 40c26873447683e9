//! `rnml`: code-lengths, clustering, model selection and sweeps from the
//! command line.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rnml_core::complexity::{
    nml_codelength_gmm, rnml_codelength_with_table, ComplexityTable, HyperParams, JConvention, JExponent, JThreshold,
};
use rnml_core::criteria::{BicVariant, Criterion};
use rnml_core::em::{em_fit, EmConfig};
use rnml_core::exp_family::{nml_codelength, GammaModel, LogisticModel};
use rnml_core::gaussian::{nml_codelength_gaussian, DomainParams};
use rnml_core::harness::{run_sweep, run_theta_sweep, SweepConfig};
use rnml_core::io::{read_column, read_labels, read_matrix};
use rnml_core::selection::{select_k, ScoringSettings};
use rnml_core::Error;
use serde_json::json;

use output::{headline, write_all, Staged};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  usage error (unknown or missing flags)
  3  file could not be read or written
  4  input file or config could not be parsed
  5  parameter outside its mathematical domain
  6  MLE outside the restricted domain, or no feasible clustering
  7  singular covariance estimate
  8  invalid configuration
  9  malformed input (labels, dimensions)";

#[derive(Parser)]
#[command(name = "rnml", version, about = "NML and RNML code-lengths for Gaussian mixtures", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads for restarts and sweep trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Code-length of a data file under one model.
    #[command(after_help = EXIT_CODES)]
    Codelength(CodelengthArgs),
    /// Fit a K-component mixture by EM and write hard labels.
    #[command(after_help = EXIT_CODES)]
    Cluster(ClusterArgs),
    /// Fit each K in a range and pick K under each criterion.
    #[command(after_help = EXIT_CODES)]
    SelectK(SelectArgs),
    /// Run the sample-size sweep described by a TOML config.
    #[command(after_help = EXIT_CODES)]
    Sweep(SweepArgs),
    /// Run only the hyperparameter-ratio sweep of a TOML config.
    #[command(after_help = EXIT_CODES)]
    ThetaSweep(SweepArgs),
    /// Write the ln C1 / ln C2 complexity table.
    #[command(after_help = EXIT_CODES)]
    Table(TableArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gamma,
    Logistic,
    Gaussian,
    GmmNml,
    GmmRnml,
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated data file, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// Skip the first line of data and label files.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Bound R on the squared mean norm.
    #[arg(long)]
    r: Option<f64>,
    /// Eigenvalue lower bounds: one value for all axes or one per column.
    #[arg(long, value_delimiter = ',')]
    lambda_min: Vec<f64>,
    /// Shortcut for R = θ, λ_min = θ^(-1/m).
    #[arg(long, conflicts_with_all = ["r", "lambda_min"])]
    theta: Option<f64>,
}

impl DomainArgs {
    fn given(&self) -> bool {
        self.r.is_some() || !self.lambda_min.is_empty() || self.theta.is_some()
    }

    fn params(&self, m: usize) -> rnml_core::Result<DomainParams> {
        if let Some(theta) = self.theta {
            return DomainParams::from_theta(theta, m);
        }
        let r = self.r.ok_or_else(|| Error::Config("--r is required with --lambda-min".into()))?;
        match self.lambda_min.as_slice() {
            [] => Err(Error::Config("--lambda-min is required with --r".into())),
            [l] => DomainParams::isotropic(r, *l, m),
            ls if ls.len() == m => DomainParams::new(r, ls.to_vec()),
            ls => Err(Error::Input(format!("{} λ_min values for {m} columns", ls.len()))),
        }
    }

    /// Checks what can be checked before the dimension is known.
    fn precheck(&self) -> rnml_core::Result<()> {
        match (self.theta, self.r, self.lambda_min.first()) {
            (Some(t), _, _) => DomainParams::from_theta(t, 1).map(drop),
            (None, Some(r), Some(&l)) => {
                DomainParams::new(r, self.lambda_min.clone())?;
                DomainParams::isotropic(r, l, 1).map(drop)
            }
            _ => Err(Error::Config("need --theta, or both --r and --lambda-min".into())),
        }
    }
}

#[derive(Args, Clone)]
struct GammaArgs {
    /// Hyperparameter ratio: λ1 = R1 = 1, λ2 = R2 = ratio.
    #[arg(long, conflicts_with_all = ["lambda1", "lambda2", "r1", "r2"])]
    gamma_ratio: Option<f64>,
    #[arg(long, requires_all = ["lambda2", "r1", "r2"])]
    lambda1: Option<f64>,
    #[arg(long, requires_all = ["lambda1", "r1", "r2"])]
    lambda2: Option<f64>,
    #[arg(long, requires_all = ["lambda1", "lambda2", "r2"])]
    r1: Option<f64>,
    #[arg(long, requires_all = ["lambda1", "lambda2", "r1"])]
    r2: Option<f64>,
    /// Smallest cluster size with a nonzero J term.
    #[arg(long, value_enum, default_value = "m-plus-one")]
    j_threshold: ThresholdArg,
    /// Power of h/2e in J(h).
    #[arg(long, value_enum, default_value = "half-mh")]
    j_exponent: ExponentArg,
}

impl GammaArgs {
    fn hyper(&self) -> rnml_core::Result<HyperParams> {
        match (self.gamma_ratio, self.lambda1, self.lambda2, self.r1, self.r2) {
            (Some(t), ..) => HyperParams::from_ratio(t),
            (None, Some(l1), Some(l2), Some(r1), Some(r2)) => HyperParams::new(l1, l2, r1, r2),
            _ => Ok(HyperParams::default()),
        }
    }

    fn convention(&self) -> JConvention {
        j_convention(self.j_threshold, self.j_exponent)
    }
}

fn j_convention(threshold: ThresholdArg, exponent: ExponentArg) -> JConvention {
    let threshold = match threshold {
        ThresholdArg::MPlusOne => JThreshold::MPlusOne,
        ThresholdArg::MPlusTwo => JThreshold::MPlusTwo,
    };
    let exponent = match exponent {
        ExponentArg::HalfMh => JExponent::HalfMh,
        ExponentArg::Mh => JExponent::Mh,
    };
    JConvention::new(threshold, exponent)
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    MPlusOne,
    MPlusTwo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExponentArg {
    HalfMh,
    Mh,
}

#[derive(Args)]
struct CodelengthArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[command(flatten)]
    data: DataArgs,
    /// Report bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Gamma shape, or the number of mixture components for gmm-*.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    theta_min: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    /// Logistic bound on θ.
    #[arg(long = "bound")]
    logistic_r: Option<f64>,
    /// Label file (values 1..=K) for gmm-nml and gmm-rnml.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    gamma: GammaArgs,
}

#[derive(Args, Clone)]
struct EmArgs {
    /// Master seed for EM restarts.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = EmConfig::default().n_restarts)]
    restarts: usize,
    #[arg(long, default_value_t = EmConfig::default().max_iter)]
    max_iter: usize,
    #[arg(long, default_value_t = EmConfig::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = EmConfig::default().reg_eps)]
    reg_eps: f64,
}

impl EmArgs {
    fn config(&self) -> rnml_core::Result<EmConfig> {
        let config = EmConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            n_restarts: self.restarts,
            seed: self.seed,
            reg_eps: self.reg_eps,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    em: EmArgs,
    /// Where to write the labels, one per row.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    /// Comma-separated subset of RNML, NML, AIC, BIC.
    #[arg(long, value_delimiter = ',', default_values_t = Criterion::ALL.to_vec())]
    criteria: Vec<Criterion>,
    #[command(flatten)]
    em: EmArgs,
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    gamma: GammaArgs,
    #[arg(long, value_enum, default_value = "verbatim")]
    bic: BicArg,
    /// Report CSV (`K,criterion,score,chosen`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BicArg {
    Verbatim,
    Standard,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; a `master_seed` in the config must agree with it.
    #[arg(long)]
    seed: u64,
    /// Directory for the CSV tables and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k_max: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum, default_value = "m-plus-one")]
    j_threshold: ThresholdArg,
    #[arg(long, value_enum, default_value = "half-mh")]
    j_exponent: ExponentArg,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Parse(_) => 4,
        Error::Domain(_) => 5,
        Error::OutOfDomain(_) | Error::Infeasible(_) | Error::DegenerateDomain(_) => 6,
        Error::Singular(_) => 7,
        Error::Config(_) => 8,
        Error::Input(_) => 9,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rnml: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> rnml_core::Result<()> {
    match command {
        Command::Codelength(a) => codelength(a),
        Command::Cluster(a) => cluster(a),
        Command::SelectK(a) => select(a),
        Command::Sweep(a) => sweep(a, false),
        Command::ThetaSweep(a) => sweep(a, true),
        Command::Table(a) => table(a),
    }
}

fn required<T>(value: Option<T>, flag: &str, family: &str) -> rnml_core::Result<T> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required for --family {family}")))
}

fn mixture_k(k: Option<f64>, family: &str) -> rnml_core::Result<usize> {
    let k = required(k, "k", family)?;
    if !(k >= 1.0) || k.fract() != 0.0 {
        return Err(Error::Config(format!("--k must be a positive integer for --family {family}, got {k}")));
    }
    Ok(k as usize)
}

fn codelength(a: CodelengthArgs) -> rnml_core::Result<()> {
    let path = &a.data.data;
    let header = a.data.header;
    let nats = match a.family {
        Family::Gamma => {
            let model = GammaModel::new(
                required(a.k, "k", "gamma")?,
                required(a.theta_min, "theta-min", "gamma")?,
                required(a.theta_max, "theta-max", "gamma")?,
            )?;
            nml_codelength(&model, &read_column(path, header)?)?
        }
        Family::Logistic => {
            let model = LogisticModel::new(required(a.logistic_r, "bound", "logistic")?)?;
            nml_codelength(&model, &read_column(path, header)?)?
        }
        Family::Gaussian => {
            a.domain.precheck()?;
            let data = read_matrix(path, header)?;
            nml_codelength_gaussian(&data, &a.domain.params(data.ncols())?)?
        }
        Family::GmmNml => {
            let k = mixture_k(a.k, "gmm-nml")?;
            a.domain.precheck()?;
            let labels = required(a.labels.as_deref(), "labels", "gmm-nml")?;
            let (data, z) = data_and_labels(path, labels, header)?;
            nml_codelength_gmm(&data, &z, k, &a.domain.params(data.ncols())?)?
        }
        Family::GmmRnml => {
            let k = mixture_k(a.k, "gmm-rnml")?;
            let gamma = a.gamma.hyper()?;
            let labels = required(a.labels.as_deref(), "labels", "gmm-rnml")?;
            let (data, z) = data_and_labels(path, labels, header)?;
            let table = ComplexityTable::build(data.nrows(), k, data.ncols(), a.gamma.convention())?;
            rnml_codelength_with_table(&table, &data, &z, k, &gamma)?
        }
    };
    let value = if a.bits { nats / std::f64::consts::LN_2 } else { nats };
    println!("{}", headline(value));
    Ok(())
}

fn data_and_labels(data: &Path, labels: &Path, header: bool) -> rnml_core::Result<(DMatrix<f64>, Vec<usize>)> {
    let x = read_matrix(data, header)?;
    let z = read_labels(labels, header)?;
    if z.len() != x.nrows() {
        return Err(Error::Input(format!("{} labels for {} rows", z.len(), x.nrows())));
    }
    Ok((x, z))
}

fn cluster(a: ClusterArgs) -> rnml_core::Result<()> {
    let config = a.em.config()?;
    if a.k == 0 {
        return Err(Error::Config("--k must be at least 1".into()));
    }
    let data = read_matrix(&a.data.data, a.data.header)?;
    let fit = em_fit(&data, a.k, &config)?;
    if let Some(out) = &a.out {
        let labels: String = fit.best.z.iter().map(|l| format!("{l}\n")).collect();
        write_all(&[Staged::new(out, labels)])?;
    }
    println!("{}", headline(fit.best.complete_log_likelihood));
    Ok(())
}

fn select(a: SelectArgs) -> rnml_core::Result<()> {
    let config = a.em.config()?;
    if a.k_min == 0 || a.k_min > a.k_max {
        return Err(Error::Config(format!("empty K range {}..={}", a.k_min, a.k_max)));
    }
    if a.criteria.is_empty() {
        return Err(Error::Config("no criteria requested".into()));
    }
    let wants_nml = a.criteria.contains(&Criterion::Nml);
    if wants_nml {
        a.domain.precheck()?;
    } else if a.domain.given() {
        return Err(Error::Config("domain flags only apply when NML is among the criteria".into()));
    }
    let gamma = a.gamma.hyper()?;
    let data = read_matrix(&a.data.data, a.data.header)?;
    let settings = ScoringSettings {
        gamma,
        nml_params: if wants_nml { Some(a.domain.params(data.ncols())?) } else { None },
        j: a.gamma.convention(),
        bic_variant: match a.bic {
            BicArg::Verbatim => BicVariant::Verbatim,
            BicArg::Standard => BicVariant::Standard,
        },
    };
    let report = select_k(&data, a.k_min..=a.k_max, &a.criteria, &config, &settings)?;
    if let Some(out) = &a.out {
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        write_all(&[Staged::new(out, String::from_utf8(csv).expect("CSV is UTF-8"))])?;
    }
    for (c, k) in report.criteria.iter().zip(&report.chosen) {
        println!("{c} {k}");
    }
    Ok(())
}

fn sweep(a: SweepArgs, theta_only: bool) -> rnml_core::Result<()> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.config.display()))))?;
    let config = SweepConfig::from_toml_str_with_seed(&text, a.seed)?;
    if theta_only && config.theta_list.is_empty() {
        return Err(Error::Config("theta_list is empty".into()));
    }
    if a.out_dir.exists() && !a.out_dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", a.out_dir.display())));
    }
    let tables = if theta_only { run_theta_sweep(&config)? } else { run_sweep(&config)? };

    let dir = &a.out_dir;
    let mut files = Vec::new();
    if !theta_only {
        files.push(Staged::new(dir.join("accuracy.csv"), tables.accuracy_csv()));
        files.push(Staged::new(dir.join("least_n.csv"), tables.least_n_csv()));
    }
    if !config.theta_list.is_empty() {
        files.push(Staged::new(dir.join("theta_sweep.csv"), tables.theta_csv()));
    }
    let names: Vec<String> =
        files.iter().map(|f| f.path().file_name().unwrap().to_string_lossy().into_owned()).collect();
    let manifest = json!({
        "tool": "rnml",
        "version": env!("CARGO_PKG_VERSION"),
        "command": if theta_only { "theta-sweep" } else { "sweep" },
        "master_seed": config.master_seed,
        "seed_derivation": "splitmix64 fold of (tag, master_seed, m, K_true, n, trial); tags model=1, data=2, em=3; ChaCha8 streams",
        "config": config,
        "outputs": names,
    });
    files.push(Staged::new(dir.join("manifest.json"), format!("{:#}\n", manifest)));
    std::fs::create_dir_all(dir)?;
    write_all(&files)?;

    if theta_only {
        print!("{}", tables.theta_csv());
    } else {
        print!("{}", tables.least_n_csv());
    }
    Ok(())
}

fn table(a: TableArgs) -> rnml_core::Result<()> {
    let table = ComplexityTable::build(a.n, a.k_max, a.m, j_convention(a.j_threshold, a.j_exponent))?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    write_all(&[Staged::new(&a.out, String::from_utf8(csv).expect("CSV is UTF-8"))])?;
    println!("{}", headline(table.log_c2(a.k_max, a.n)));
    Ok(())
}
