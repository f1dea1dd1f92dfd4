//! Command-line front end. One executable, seven subcommands:
//! `cmi`, `sample`, `align`, `bound`, `exponent`, `experiment`,
//! `selfcheck`. Outputs are machine-readable (JSON or CSV); diagnostics
//! go to stderr as single-line JSON `{code, message}`.
//!
//! Exit codes: 0 success, 1 validation error, 2 computation error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::dist::{log_likelihood, sample_pair, DatabasePair, Matching, ProductForm};
use crate::error::Error;
use crate::experiments::{self, ExperimentConfig, SweepAxis};
use crate::matching::{brute_force_matching, build_weights, max_weight_matching};
use crate::spectral;

#[derive(Parser)]
#[command(
    name = "dbalign",
    about = "Database alignment: sampling, MAP matching, cycle mutual information, and threshold experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cycle mutual information of a distribution at one or more orders
    Cmi(CmiArgs),
    /// Sample a correlated database pair and its hidden matching
    Sample(SampleArgs),
    /// Run the MAP estimator on a sampled pair file
    Align(AlignArgs),
    /// Union-bound report for a model at a given database size
    Bound(BoundArgs),
    /// Chernoff exponent curve over a theta grid
    Exponent(ExponentArgs),
    /// Recovery-rate sweep from a config file
    Experiment(ExperimentArgs),
    /// Run the embedded invariant suite on built-in fixtures
    Selfcheck,
}

#[derive(Args)]
struct CmiArgs {
    /// Distribution file: {"q": [[...], ...], "reps": k}
    #[arg(long)]
    dist: PathBuf,
    /// Order(s) of the cycle mutual information; repeatable
    #[arg(long = "order", required = true, allow_negative_numbers = true)]
    orders: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    dist: PathBuf,
    /// Number of users in each database
    #[arg(long, allow_negative_numbers = true)]
    n: i64,
    /// Sampling seed; the DBALIGN_SEED environment variable overrides it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes <out>.pair.json and <out>.truth.json
    #[arg(long)]
    out: PathBuf,
    /// Embed the truth permutation in the pair file instead of a separate
    /// truth file
    #[arg(long, default_value_t = false)]
    single_file: bool,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    dist: PathBuf,
    /// Pair file produced by `sample`
    #[arg(long)]
    pair: PathBuf,
    /// Optional truth file; adds recovery fields to the report
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Use the factorial oracle instead of the Hungarian solver (n <= 8)
    #[arg(long, default_value_t = false)]
    brute_force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    n: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long)]
    dist: PathBuf,
    /// Number of evenly spaced grid points on [0, 1]
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Output format: csv (theta,value columns) or json lines
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON (see README for the schema)
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial execution; defaults to available parallelism
    #[arg(long)]
    workers: Option<usize>,
    /// Also write <out>.verbose.json with the config and per-trial results
    #[arg(long, default_value_t = false)]
    verbose: bool,
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    n: usize,
    reps: u32,
    entries_a: Vec<Vec<u16>>,
    entries_b: Vec<Vec<u16>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perm: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    perm: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ExperimentFile {
    q: Vec<Vec<f64>>,
    #[serde(default = "one")]
    reps: u32,
    n: usize,
    trials: usize,
    master_seed: u64,
    sweep_axis: String,
    values: Vec<f64>,
}

fn one() -> u32 {
    1
}

#[derive(Serialize)]
struct AlignReport {
    perm: Vec<usize>,
    log_likelihood: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hamming_errors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success: Option<bool>,
}

#[derive(Serialize)]
struct VerboseRow {
    row: experiments::SweepRow,
    trials: Vec<experiments::TrialResult>,
}

#[derive(Serialize)]
struct VerboseSidecar {
    config: ExperimentFile,
    rows: Vec<VerboseRow>,
}

/// A CLI failure: exit code plus a single-line JSON diagnostic.
struct Failure {
    exit: i32,
    code: String,
    message: String,
}

impl Failure {
    fn validation(code: &str, message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            exit: if e.is_validation() { 1 } else { 2 },
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses and runs `argv`, returning the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            emit_failure(&Failure::validation("InvalidArgument", e.to_string().trim()));
            return 1;
        }
    };
    let result = match cli.command {
        Command::Cmi(args) => run_cmi(args),
        Command::Sample(args) => run_sample(args),
        Command::Align(args) => run_align(args),
        Command::Bound(args) => run_bound(args),
        Command::Exponent(args) => run_exponent(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Selfcheck => run_selfcheck(),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            emit_failure(&f);
            f.exit
        }
    }
}

fn emit_failure(f: &Failure) {
    let line = serde_json::json!({"code": f.code, "message": f.message});
    eprintln!("{line}");
}

fn read_file(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::validation("Io", format!("{}: {e}", path.display())))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::validation("Io", format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> std::result::Result<ProductForm, Failure> {
    Ok(ProductForm::from_json_str(&read_file(path)?)?)
}

fn run_cmi(args: CmiArgs) -> CliResult {
    let model = load_model(&args.dist)?;
    let mut lines = String::new();
    for &order in &args.orders {
        if order < 0.0 {
            return Err(Failure::validation("InvalidArgument", "order must be >= 0"));
        }
        let value = spectral::cycle_mi(&model, order)?;
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({"order": order, "value_nats": value})
        ));
    }
    write_output(&args.out, &lines)
}

fn effective_seed(flag: u64) -> std::result::Result<u64, Failure> {
    match std::env::var("DBALIGN_SEED") {
        Ok(s) => s
            .parse::<u64>()
            .map_err(|_| Failure::validation("InvalidArgument", "DBALIGN_SEED must be a 64-bit unsigned integer")),
        Err(_) => Ok(flag),
    }
}

fn run_sample(args: SampleArgs) -> CliResult {
    if args.n < 1 {
        return Err(Failure::validation("InvalidArgument", "n must be >= 1"));
    }
    let model = load_model(&args.dist)?;
    let seed = effective_seed(args.seed)?;
    let (pair, truth) = sample_pair(&model, args.n as usize, seed);
    let pair_file = PairFile {
        n: pair.n(),
        reps: model.reps(),
        entries_a: pair.entries_a().to_vec(),
        entries_b: pair.entries_b().to_vec(),
        perm: args.single_file.then(|| truth.perm().to_vec()),
    };
    // --out is a strict prefix; suffixes are appended, never substituted
    let pair_path = PathBuf::from(format!("{}.pair.json", args.out.display()));
    fs::write(&pair_path, serde_json::to_string(&pair_file).expect("serializable") + "\n")
        .map_err(|e| Failure::validation("Io", format!("{}: {e}", pair_path.display())))?;
    if !args.single_file {
        // truth goes to its own file so alignment runs cannot read it by
        // accident
        let truth_path = PathBuf::from(format!("{}.truth.json", args.out.display()));
        let truth_file = TruthFile {
            perm: truth.perm().to_vec(),
        };
        fs::write(&truth_path, serde_json::to_string(&truth_file).expect("serializable") + "\n")
            .map_err(|e| Failure::validation("Io", format!("{}: {e}", truth_path.display())))?;
    }
    Ok(())
}

fn load_pair(path: &Path, model: &ProductForm) -> std::result::Result<(DatabasePair, Option<Matching>), Failure> {
    let file: PairFile = serde_json::from_str(&read_file(path)?)
        .map_err(|e| Failure::validation("InvalidPairFile", format!("{}: {e}", path.display())))?;
    if file.reps != model.reps() {
        return Err(Failure::validation(
            "DimensionMismatch",
            format!("pair file has reps = {}, model has reps = {}", file.reps, model.reps()),
        ));
    }
    let pair = DatabasePair::new(file.entries_a, file.entries_b, model)?;
    if pair.n() != file.n {
        return Err(Failure::validation(
            "DimensionMismatch",
            format!("pair file declares n = {} but holds {} entries", file.n, pair.n()),
        ));
    }
    let truth = file.perm.map(Matching::new).transpose()?;
    Ok((pair, truth))
}

fn run_align(args: AlignArgs) -> CliResult {
    let model = load_model(&args.dist)?;
    let (pair, embedded_truth) = load_pair(&args.pair, &model)?;
    let weights = build_weights(&pair, &model)?;
    let estimate = if args.brute_force {
        brute_force_matching(&weights)?
    } else {
        max_weight_matching(&weights)?
    };
    let truth = match &args.truth {
        Some(path) => {
            let file: TruthFile = serde_json::from_str(&read_file(path)?)
                .map_err(|e| Failure::validation("InvalidTruthFile", format!("{}: {e}", path.display())))?;
            Some(Matching::new(file.perm)?)
        }
        None => embedded_truth,
    };
    let report = AlignReport {
        perm: estimate.perm().to_vec(),
        log_likelihood: log_likelihood(&pair, &estimate, &model)?,
        hamming_errors: truth.as_ref().map(|t| pair.n() - estimate.overlap(t)),
        success: truth.as_ref().map(|t| &estimate == t),
    };
    write_output(
        &args.out,
        &(serde_json::to_string(&report).expect("serializable") + "\n"),
    )
}

fn run_bound(args: BoundArgs) -> CliResult {
    if args.n < 2 {
        return Err(Failure::validation("InvalidArgument", "n must be >= 2"));
    }
    let model = load_model(&args.dist)?;
    let report = bounds::union_bound(&model, args.n as usize);
    write_output(
        &args.out,
        &(serde_json::to_string(&report).expect("serializable") + "\n"),
    )
}

fn run_exponent(args: ExponentArgs) -> CliResult {
    if args.points < 2 {
        return Err(Failure::validation("InvalidArgument", "points must be >= 2"));
    }
    let model = load_model(&args.dist)?;
    let thetas: Vec<f64> = (0..args.points)
        .map(|i| i as f64 / (args.points - 1) as f64)
        .collect();
    let curve = bounds::exponent_curve(model.base(), &thetas);
    let content = match args.format.as_str() {
        "csv" => {
            let mut s = String::from("theta,value\n");
            for p in &curve {
                s.push_str(&format!("{},{}\n", p.theta, p.value));
            }
            s
        }
        "json" => {
            let mut s = String::new();
            for p in &curve {
                s.push_str(&format!("{}\n", serde_json::to_string(p).expect("serializable")));
            }
            s
        }
        other => {
            return Err(Failure::validation(
                "InvalidArgument",
                format!("unknown format '{other}' (expected csv or json)"),
            ))
        }
    };
    write_output(&args.out, &content)
}

fn parse_experiment_file(file: &ExperimentFile) -> std::result::Result<ExperimentConfig, Failure> {
    let axis = SweepAxis::parse(&file.sweep_axis).ok_or_else(|| {
        Failure::validation(
            "InvalidConfig",
            format!("unknown sweep_axis '{}' (expected reps, n, or epsilon)", file.sweep_axis),
        )
    })?;
    let base = crate::dist::JointDistribution::new(&file.q)?;
    let config = ExperimentConfig {
        model: ProductForm::new(base, file.reps),
        n: file.n,
        trials: file.trials,
        master_seed: file.master_seed,
        axis,
        values: file.values.clone(),
    };
    config.validate()?;
    Ok(config)
}

fn run_experiment(args: ExperimentArgs) -> CliResult {
    let file: ExperimentFile = serde_json::from_str(&read_file(&args.config)?)
        .map_err(|e| Failure::validation("InvalidConfig", format!("{}: {e}", args.config.display())))?;
    let config = parse_experiment_file(&file)?;
    if args.verbose && args.out.is_none() {
        return Err(Failure::validation(
            "InvalidArgument",
            "--verbose needs --out to place the sidecar next to",
        ));
    }
    let rows = run_sweep_with_workers(&config, args.workers)?;
    let csv = experiments::sweep_to_csv(&rows.iter().map(|(r, _)| *r).collect::<Vec<_>>());
    if args.verbose {
        let out = args.out.as_ref().expect("checked above");
        let sidecar = VerboseSidecar {
            config: file,
            rows: rows
                .iter()
                .map(|(row, trials)| VerboseRow {
                    row: *row,
                    trials: trials.clone(),
                })
                .collect(),
        };
        let sidecar_path = out.with_extension("verbose.json");
        fs::write(
            &sidecar_path,
            serde_json::to_string_pretty(&sidecar).expect("serializable") + "\n",
        )
        .map_err(|e| Failure::validation("Io", format!("{}: {e}", sidecar_path.display())))?;
    }
    write_output(&args.out, &csv)
}

#[cfg(feature = "parallel")]
fn run_sweep_with_workers(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> std::result::Result<Vec<(experiments::SweepRow, Vec<experiments::TrialResult>)>, Failure> {
    match workers {
        Some(w) => {
            if w < 1 {
                return Err(Failure::validation("InvalidArgument", "workers must be >= 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Failure::validation("InvalidArgument", e.to_string()))?;
            Ok(pool.install(|| experiments::sweep(config))?)
        }
        None => Ok(experiments::sweep(config)?),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_sweep_with_workers(
    config: &ExperimentConfig,
    _workers: Option<usize>,
) -> std::result::Result<Vec<(experiments::SweepRow, Vec<experiments::TrialResult>)>, Failure> {
    Ok(experiments::sweep(config)?)
}

fn run_selfcheck() -> CliResult {
    let q = crate::dist::JointDistribution::new(&[vec![0.45, 0.05], vec![0.05, 0.45]])
        .expect("fixture is valid");
    let model = ProductForm::new(q.clone(), 4);

    let check = |name: &str, ok: bool| -> CliResult {
        if ok {
            println!("ok {name}");
            Ok(())
        } else {
            Err(Failure {
                exit: 2,
                code: "SelfcheckFailed".into(),
                message: name.into(),
            })
        }
    };

    let profile = spectral::spectral_profile(&q)?;
    check(
        "spectral profile of the binary fixture is (0.8, 0.2)",
        (profile.sigma_sq()[0] - 0.8).abs() < 1e-12 && (profile.sigma_sq()[1] - 0.2).abs() < 1e-12,
    )?;

    let mut dual_ok = true;
    for order in 2..=4u32 {
        let eig = spectral::cycle_mi(&model, order as f64)?;
        let tr = spectral::cycle_mi_trace(&model, order)?;
        dual_ok &= (eig - tr).abs() < 1e-9;
    }
    check("cycle MI eigenvalue and trace routes agree", dual_ok)?;

    let diag = crate::dist::JointDistribution::diagonal(&[0.2, 0.5, 0.3])?;
    let mi = spectral::cycle_mi_joint(&diag, 2.0)?;
    let h = spectral::renyi_entropy(&[0.2, 0.5, 0.3], 2.0)?;
    check("diagonal distributions reduce to Renyi entropy", (mi - h).abs() < 1e-9)?;

    let maj_a = spectral::check_majorization(&profile, q.marginal_a());
    let maj_b = spectral::check_majorization(&profile, q.marginal_b());
    check("profile majorizes both marginals", maj_a.holds && maj_b.holds)?;

    let z = q.sqrt_matrix();
    let id = Matching::identity(2);
    let swap = Matching::new(vec![1, 0])?;
    let ct = crate::matching::cycle_type(&id, &swap)?;
    let direct = bounds::b_direct(&id, &swap, &z, &z)?;
    let factored = bounds::b_via_cycles(&ct, &z, &z)?;
    check(
        "generating function factorizes over cycles",
        (direct - factored).abs() < 1e-12 && (direct - 0.68).abs() < 1e-12,
    )?;

    let mut oracle_ok = true;
    for seed in 0..50u64 {
        let n = 2 + (seed % 5) as usize;
        let (pair, _) = sample_pair(&model, n, seed);
        let w = build_weights(&pair, &model)?;
        let fast = max_weight_matching(&w)?;
        let slow = brute_force_matching(&w)?;
        oracle_ok &= fast == slow;
    }
    check("Hungarian matches the factorial oracle on 50 instances", oracle_ok)?;

    let config = ExperimentConfig {
        model: model.clone(),
        n: 6,
        trials: 1,
        master_seed: 2024,
        axis: SweepAxis::Reps,
        values: vec![4.0],
    };
    let trial = experiments::run_trial(&config, 0)?;
    let seed = crate::rng::mix_seed(2024, 0);
    let (pair, truth) = sample_pair(&model, 6, seed);
    let w = build_weights(&pair, &model)?;
    let estimate = max_weight_matching(&w)?;
    check(
        "trial runner reproduces the sample/align round trip",
        trial.success == (estimate == truth),
    )?;

    Ok(())
}
