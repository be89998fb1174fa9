use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pseudofit::gof::{GridSpec, Method, TestSpec, VarianceForm, WeightSpec, DEFAULT_MG_TOL};
use pseudofit::io::{load_dataset, write_dataset, LoadError};
use pseudofit::report::{
    histogram_csv, mean_sd, BootstrapSummary, FitReport, ModelReport, PowerReport, QuantileTable,
    ReportDocument, RunMetadata, SimulationReport, TestReport,
};
use pseudofit::resampling::{
    bootstrap_null, power_estimate, power_p_value, BootstrapConfig, TABLE_LEVELS,
};
use pseudofit::sampling::AlternativeSpec;
use pseudofit::{fit, Dataset, ModelSpec, Variant};

/// Fit, test and simulate bivariate pseudo-Poisson models.
#[derive(Parser)]
#[command(name = "pseudofit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for report.json and report.txt (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the JSON report on stdout instead of the text tables.
    #[arg(long, global = true)]
    json: bool,

    /// Record the wall-clock time in the report (makes reports differ between runs).
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood fit of one or more variants.
    Fit(FitArgs),
    /// Goodness-of-fit tests with parametric bootstrap p-values.
    Test(TestArgs),
    /// Draw a sample from a model or a power-study alternative.
    Simulate(SimulateArgs),
    /// Bootstrap null quantile tables (and histogram CSVs) for given parameters.
    Tables(TablesArgs),
    /// Monte-Carlo power of a test against an alternative.
    Power(PowerArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Model variant; repeat to fit several (full, sub1, sub2, mirrored-sub2).
    #[arg(long = "variant", required = true)]
    variants: Vec<Variant>,
    /// Delimited pairs file (x, y[, count]).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Model variant (full, sub1, sub2, mirrored-sub2).
    #[arg(long)]
    variant: Variant,
    /// Poisson mean of x.
    #[arg(long, allow_hyphen_values = true)]
    lambda1: Option<f64>,
    /// Only for the full model; sub-models fix it.
    #[arg(long, allow_hyphen_values = true)]
    lambda2: Option<f64>,
    /// Slope of the conditional mean of y in x.
    #[arg(long, allow_hyphen_values = true)]
    lambda3: Option<f64>,
}

impl ModelArgs {
    fn given(&self) -> bool {
        self.lambda1.is_some() || self.lambda2.is_some() || self.lambda3.is_some()
    }

    /// Builds the model, filling missing parameters with `default` when given.
    fn model(&self, default: Option<f64>) -> Result<ModelSpec> {
        let get = |v: Option<f64>, flag: &str| {
            v.or(default).ok_or_else(|| {
                usage(format!(
                    "--{flag} is required for a hypothesized {} model",
                    self.variant
                ))
            })
        };
        if self.variant != Variant::Full && self.lambda2.is_some() {
            return Err(usage(format!(
                "--lambda2 applies only to the full model; {} fixes it",
                self.variant
            )));
        }
        let l1 = get(self.lambda1, "lambda1")?;
        let l3 = get(self.lambda3, "lambda3")?;
        let free = match self.variant {
            Variant::Full => vec![l1, get(self.lambda2, "lambda2")?, l3],
            _ => vec![l1, l3],
        };
        Ok(ModelSpec::from_free(self.variant, &free)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    /// First-order delta method with the full parameter covariance.
    Delta,
    /// Second-order form with the Hessian correction.
    SecondOrder,
}

impl From<FormArg> for VarianceForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Delta => VarianceForm::Delta,
            FormArg::SecondOrder => VarianceForm::SecondOrder,
        }
    }
}

#[derive(Args)]
struct MethodArgs {
    /// Test statistic; repeat for several (fi, mg, kk, kk-sup, chisq).
    #[arg(long = "method", required = true)]
    methods: Vec<Method>,
    /// kk: first pgf argument in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    t1: Option<f64>,
    /// kk: second pgf argument in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    t2: Option<f64>,
    /// kk-sup: lower grid bound.
    #[arg(long, default_value_t = -0.99, allow_hyphen_values = true)]
    grid_min: f64,
    /// kk-sup: upper grid bound.
    #[arg(long, default_value_t = 0.99, allow_hyphen_values = true)]
    grid_max: f64,
    /// kk-sup: grid spacing.
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// kk, kk-sup: variance formula.
    #[arg(long, value_enum, default_value = "delta")]
    variance_form: FormArg,
    /// mg: weight, `power:a1,a2` or `poly:c1,c2,c3`.
    #[arg(long, default_value = "power:0,0", allow_hyphen_values = true)]
    weight: WeightSpec,
    /// mg: series truncation tolerance.
    #[arg(long, default_value_t = DEFAULT_MG_TOL)]
    mg_tol: f64,
    /// chisq: cells x, y in 0..k-1 plus one open-ended cell per axis.
    #[arg(long, default_value_t = 4)]
    k: u32,
}

impl MethodArgs {
    fn specs(&self) -> Result<Vec<TestSpec>> {
        self.methods.iter().map(|&m| self.spec(m)).collect()
    }

    fn spec(&self, method: Method) -> Result<TestSpec> {
        let form = VarianceForm::from(self.variance_form);
        let spec = match method {
            Method::Fi => TestSpec::Fi,
            Method::Mg => TestSpec::Mg {
                weight: self.weight,
                truncation_tol: self.mg_tol,
            },
            Method::Kk => match (self.t1, self.t2) {
                (Some(t1), Some(t2)) => TestSpec::Kk { t1, t2, form },
                _ => return Err(usage("--method kk needs --t1 and --t2")),
            },
            Method::KkSup => TestSpec::KkSup {
                grid: GridSpec::new(self.grid_min, self.grid_max, self.grid_step)?,
                form,
            },
            Method::ChiSquare => TestSpec::ChiSquare { k: self.k },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct BootArgs {
    /// Bootstrap replicates per null distribution.
    #[arg(long = "B")]
    replicates: Option<usize>,
    /// Bootstrap sample size (default: the data size).
    #[arg(long = "m")]
    resample_size: Option<usize>,
    /// Master seed; every replicate derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the hypothesized parameters instead of refitting every replicate.
    #[arg(long)]
    no_refit: bool,
}

impl BootArgs {
    fn config(&self, default_replicates: usize) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.replicates.unwrap_or(default_replicates),
            resample_size: self.resample_size,
            seed: self.seed,
            refit: !self.no_refit,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Delimited pairs file (x, y[, count]).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    boot: BootArgs,
    /// Report the statistics only, without a bootstrap.
    #[arg(long)]
    no_bootstrap: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Pseudo-Poisson variant to sample from (with --lambda1..3, default 1).
    #[arg(long, conflicts_with = "alt")]
    variant: Option<Variant>,
    /// Poisson mean of x.
    #[arg(long, allow_hyphen_values = true)]
    lambda1: Option<f64>,
    /// Intercept of the conditional mean of y (full model only).
    #[arg(long, allow_hyphen_values = true)]
    lambda2: Option<f64>,
    /// Slope of the conditional mean of y in x.
    #[arg(long, allow_hyphen_values = true)]
    lambda3: Option<f64>,
    /// Alternative such as `bcbp:1,3,4` or `bcmp:theta,nu,p00,p01,p10,p11`.
    #[arg(long)]
    alt: Option<AlternativeSpec>,
    /// Number of pairs to draw.
    #[arg(long)]
    n: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the pairs (default: data.csv under --out, else stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    n: Vec<usize>,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    boot: BootArgs,
}

#[derive(Args)]
struct PowerArgs {
    /// Null model; its parameters are needed only with --no-refit.
    #[command(flatten)]
    model: ModelArgs,
    /// Data-generating alternative, e.g. `bcbp:1,3,4`.
    #[arg(long)]
    alt: AlternativeSpec,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    boot: BootArgs,
    /// Monte-Carlo repetitions.
    #[arg(long = "R", default_value_t = 400)]
    repetitions: usize,
    /// Significance level for the rejection rate.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Return the p-value of a single draw instead of a rejection rate.
    #[arg(long)]
    single: bool,
}

/// An error in how the program was invoked (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<LoadError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<pseudofit::Error>() {
            return if e.is_usage_error() {
                2
            } else if e.is_data_error() {
                3
            } else {
                4
            };
        }
    }
    1
}

fn metadata(cli: &Cli, command: &str) -> RunMetadata {
    let mut m = RunMetadata::new(command);
    if cli.timestamp {
        m.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    m
}

fn read_data(path: &Path, meta: &mut RunMetadata) -> Result<Dataset> {
    let data = load_dataset(path)?;
    meta.data_path = Some(path.display().to_string());
    meta.sample_size = Some(data.n());
    Ok(data)
}

fn run_fit(cli: &Cli, args: &FitArgs) -> Result<ReportDocument> {
    let mut meta = metadata(cli, "fit");
    let data = read_data(&args.data, &mut meta)?;
    let mut doc = ReportDocument::new(meta);
    for &v in &args.variants {
        let f = fit(v, &data).with_context(|| format!("fitting {v}"))?;
        doc.fits.push(FitReport::from(&f));
    }
    Ok(doc)
}

fn run_test(cli: &Cli, args: &TestArgs) -> Result<ReportDocument> {
    let specs = args.method.specs()?;
    let cfg = args.boot.config(5000);
    let mut meta = metadata(cli, "test");
    meta.seed = Some(cfg.seed);
    let data = read_data(&args.data, &mut meta)?;
    let mut doc = ReportDocument::new(meta);

    let null_model = if cfg.refit {
        if args.model.given() {
            return Err(usage(
                "--lambda* flags fix the null model; add --no-refit to use them",
            ));
        }
        let f = fit(args.model.variant, &data)
            .with_context(|| format!("fitting {}", args.model.variant))?;
        doc.fits.push(FitReport::from(&f));
        f.model
    } else {
        args.model.model(None)?
    };
    if !args.no_bootstrap {
        cfg.resample_size_for(data.n())?;
    }

    for spec in &specs {
        let outcome = spec
            .evaluate(&data, &null_model)
            .with_context(|| format!("computing the {} statistic", spec.method()))?;
        let (outcome, bootstrap) = if args.no_bootstrap {
            (outcome, None)
        } else {
            let null = bootstrap_null(&null_model, spec, data.n(), &cfg)
                .with_context(|| format!("bootstrapping the {} statistic", spec.method()))?;
            doc.warnings.extend(
                null.warnings
                    .iter()
                    .map(|w| format!("{}: {w}", spec.method())),
            );
            (
                outcome.calibrated(spec, &null),
                Some(BootstrapSummary::new(&null, cfg.replicates, cfg.seed)),
            )
        };
        doc.tests.push(TestReport {
            model: ModelReport::from(&null_model),
            outcome,
            bootstrap,
        });
    }
    Ok(doc)
}

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(ReportDocument, Option<String>)> {
    let source = match (&args.alt, args.variant) {
        (Some(alt), _) => {
            if args.lambda1.or(args.lambda2).or(args.lambda3).is_some() {
                return Err(usage("--lambda* flags go with --variant, not --alt"));
            }
            *alt
        }
        (None, Some(variant)) => AlternativeSpec::PseudoPoisson(
            ModelArgs {
                variant,
                lambda1: args.lambda1,
                lambda2: args.lambda2,
                lambda3: args.lambda3,
            }
            .model(Some(1.0))?,
        ),
        (None, None) => return Err(usage("simulate needs --variant or --alt")),
    };
    let data = source.sample(args.n, args.seed)?;

    let mut meta = metadata(cli, "simulate");
    meta.seed = Some(args.seed);
    meta.sample_size = Some(data.n());
    let mut doc = ReportDocument::new(meta);

    let target = args
        .output
        .clone()
        .or_else(|| cli.out.as_ref().map(|d| d.join("data.csv")));
    let mut stdout_data = None;
    match &target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_dataset(std::io::BufWriter::new(file), &data)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data)?;
            stdout_data = Some(String::from_utf8(buf).expect("ascii"));
        }
    }

    let moments = data.sample_moments().ok();
    doc.simulations.push(SimulationReport {
        source: source.to_string(),
        sample_size: data.n(),
        seed: args.seed,
        mean: data.means()?,
        covariance: moments.map(|m| m.covariance),
        gdi: pseudofit::gof::gdi_empirical(&data).ok(),
        output: target.map(|p| p.display().to_string()),
    });
    Ok((doc, stdout_data))
}

fn run_tables(cli: &Cli, args: &TablesArgs) -> Result<ReportDocument> {
    let specs = args.method.specs()?;
    let model = args.model.model(Some(1.0))?;
    let cfg = args.boot.config(5000);
    let mut meta = metadata(cli, "tables");
    meta.seed = Some(cfg.seed);
    let mut doc = ReportDocument::new(meta);
    for spec in &specs {
        for &n in &args.n {
            let null = bootstrap_null(&model, spec, n, &cfg)
                .with_context(|| format!("bootstrapping {} at n = {n}", spec.method()))?;
            doc.warnings.extend(
                null.warnings
                    .iter()
                    .map(|w| format!("{} n={n}: {w}", spec.method())),
            );
            let histogram = match &cli.out {
                Some(dir) => {
                    let name = format!("hist_{}_n{n}.csv", spec.method());
                    fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                    fs::write(dir.join(&name), histogram_csv(&null.stats))
                        .with_context(|| format!("writing {name}"))?;
                    Some(name)
                }
                None => None,
            };
            let (mean, sd) = mean_sd(&null.stats);
            doc.quantile_tables.push(QuantileTable {
                test: spec.clone(),
                model: ModelReport::from(&model),
                sample_size: n,
                bootstrap: BootstrapSummary::new(&null, cfg.replicates, cfg.seed),
                mean,
                sd,
                quantiles: null.quantiles(&TABLE_LEVELS),
                histogram,
            });
        }
    }
    Ok(doc)
}

fn run_power(cli: &Cli, args: &PowerArgs) -> Result<ReportDocument> {
    let specs = args.method.specs()?;
    let cfg = args.boot.config(1000);
    let model = if cfg.refit {
        if args.model.given() {
            return Err(usage(
                "--lambda* flags fix the null model; add --no-refit to use them",
            ));
        }
        // only the variant matters when every sample is refitted
        let v = args.model.variant;
        ModelSpec::from_free(v, &vec![1.0; v.free_parameters()])?
    } else {
        args.model.model(None)?
    };
    let mut meta = metadata(cli, "power");
    meta.seed = Some(cfg.seed);
    let mut doc = ReportDocument::new(meta);
    for spec in &specs {
        for &n in &args.n {
            let (estimate, statistic, p_value) = if args.single {
                let draw = power_p_value(&model, spec, &args.alt, n, &cfg)?;
                (None, Some(draw.statistic), Some(draw.p_value))
            } else {
                let est = power_estimate(
                    &model,
                    spec,
                    &args.alt,
                    n,
                    &cfg,
                    args.level,
                    args.repetitions,
                )
                .with_context(|| format!("power of {} at n = {n}", spec.method()))?;
                if est.failed > 0 {
                    doc.warnings.push(format!(
                        "{} n={n}: {} of {} repetitions could not be tested",
                        spec.method(),
                        est.failed,
                        est.repetitions
                    ));
                }
                (Some(est), None, None)
            };
            doc.power.push(PowerReport {
                test: spec.clone(),
                alternative: args.alt,
                null_variant: model.variant(),
                sample_size: n,
                level: args.level,
                replicates: cfg.replicates,
                refit: cfg.refit,
                estimate,
                statistic,
                p_value,
            });
        }
    }
    Ok(doc)
}

fn emit(cli: &Cli, doc: &ReportDocument, print_text: bool) -> Result<()> {
    let json = doc.to_json();
    let text = pseudofit::report::render_text(doc);
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.json"), &json).context("writing report.json")?;
        fs::write(dir.join("report.txt"), &text).context("writing report.txt")?;
    }
    if cli.json {
        print!("{json}");
    } else if print_text {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let doc = match &cli.command {
        Command::Fit(a) => run_fit(cli, a)?,
        Command::Test(a) => run_test(cli, a)?,
        Command::Tables(a) => run_tables(cli, a)?,
        Command::Power(a) => run_power(cli, a)?,
        Command::Simulate(a) => {
            if cli.json && cli.out.is_none() && a.output.is_none() {
                return Err(usage("--json needs --out or --output when simulating"));
            }
            let (doc, data) = run_simulate(cli, a)?;
            if let Some(data) = data {
                // the pairs go to stdout; keep it clean of the report
                emit(cli, &doc, false)?;
                print!("{data}");
                return Ok(());
            }
            doc
        }
    };
    emit(cli, &doc, true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
