use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use taskrd::classify::{
    ec_curve, iec_curve, merge_k_baseline, merge_k_curve, ord_curve, stats, ts_curve,
};
use taskrd::curve::{linspace, GridScale};
use taskrd::gmm::{discretize, gmm_curves, GmmSpec};
use taskrd::io::{self, PriorChoice};
use taskrd::snc::{snc_sweep, synth_logits, SynthKind};
use taskrd::{rd_binary, rd_uniform_classes, BaConfig, LambdaGrid, Pmf, RdCurve, RdPoint};

/// Model-aware rate-distortion bounds for task-oriented source coding.
///
/// Rates are in bits per observation, distortions are error probabilities (or the
/// distortion measure of a user-supplied matrix), and multipliers are in nats per unit
/// distortion. Curves are written as CSV with columns
/// method,lambda,rate_bits,distortion,bpp,flags.
#[derive(Parser, Debug)]
#[command(name = "taskrd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a closed-form rate-distortion value under Hamming distortion.
    ClosedForm(ClosedFormArgs),
    /// Sweep Blahut–Arimoto over a pmf and distortion matrix.
    Ba(BaArgs),
    /// Bounds computed from a classifier confusion matrix.
    ClassBounds(ClassBoundsArgs),
    /// The four curves of the two-class Gaussian mixture example.
    Gmm(GmmArgs),
    /// Sample-and-communicate curve of a logits dataset.
    Snc(SncArgs),
    /// Write a synthetic logits dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Smallest multiplier (nats per unit distortion); must be > 0.
    #[arg(long, default_value_t = 1e-3)]
    lambda_min: f64,
    /// Largest multiplier (nats per unit distortion).
    #[arg(long, default_value_t = 1e3)]
    lambda_max: f64,
    /// Number of multipliers in the sweep.
    #[arg(long, default_value_t = 60)]
    lambda_points: usize,
    /// Spacing of the multiplier grid.
    #[arg(long, value_enum, default_value_t = Scale::Log)]
    lambda_scale: Scale,
}

impl GridArgs {
    fn values(&self) -> Result<Vec<f64>> {
        let scale = match self.lambda_scale {
            Scale::Log => GridScale::Log,
            Scale::Linear => GridScale::Linear,
        };
        Ok(LambdaGrid {
            min: self.lambda_min,
            max: self.lambda_max,
            points: self.lambda_points,
            scale,
        }
        .values()?)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Scale {
    Log,
    Linear,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Blahut–Arimoto stopping threshold on the sup-norm change of the output pmf
    /// (probability units).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Blahut–Arimoto iteration budget per multiplier; points that exhaust it are
    /// flagged not-converged.
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Optional extra stopping rule: width of the rate bracket, in bits.
    #[arg(long)]
    gap_tol: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> BaConfig {
        BaConfig {
            max_iterations: self.max_iters,
            tolerance: self.tol,
            gap_tolerance: self.gap_tol,
            ..BaConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output CSV path (written atomically); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pixels per observation (height × width) for the bpp column, e.g. 784 for 28×28.
    #[arg(long)]
    pixels: Option<u64>,
}

impl OutputArgs {
    fn emit(&self, curves: &[RdCurve]) -> Result<()> {
        match &self.out {
            Some(path) => io::write_curves_csv(curves, self.pixels, path)
                .with_context(|| format!("writing {}", path.display())),
            None => {
                let text = io::format_curves_csv(curves, self.pixels)?;
                std::io::stdout().lock().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ClosedFormKind {
    /// Binary source with P(Y = 1) = q.
    Binary,
    /// Uniform source over --classes symbols.
    Uniform,
}

#[derive(Args, Debug)]
struct ClosedFormArgs {
    #[arg(long, value_enum)]
    kind: ClosedFormKind,
    /// P(Y = 1) for --kind binary.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Alphabet size for --kind uniform.
    #[arg(long)]
    classes: Option<usize>,
    /// Target error probability.
    #[arg(long)]
    d: f64,
    /// Pixels per observation; also prints bits per pixel.
    #[arg(long)]
    pixels: Option<u64>,
}

#[derive(Args, Debug)]
struct BaArgs {
    /// Source pmf CSV (one probability per line).
    #[arg(long)]
    pmf: PathBuf,
    /// Distortion matrix CSV (rows = source symbols, columns = reconstructions).
    #[arg(long)]
    distortion: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Rate-distortion function of the class variable itself.
    Ord,
    /// Estimate-and-compress.
    Ec,
    /// Estimate-and-compress optimised for the task distortion.
    Iec,
    /// Time-sharing chord between the zero-rate and lossless points.
    Ts,
    /// Merge the k least likely estimates into the most likely one.
    Merge,
}

#[derive(Args, Debug)]
struct ClassBoundsArgs {
    /// Square confusion matrix CSV (rows = true class, columns = prediction); counts
    /// or probabilities.
    #[arg(long)]
    confusion: PathBuf,
    /// Class prior: a pmf CSV path, `uniform`, or `rows` (row-mass proportions).
    /// Default: row masses for count tables; required for row-normalised tables.
    #[arg(long)]
    prior: Option<String>,
    /// Comma-separated subset of methods.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ord,ec,iec,ts,merge")]
    methods: Vec<Method>,
    /// Emit the merge baseline only for this number of merged classes instead of
    /// sweeping k = 0..K-1.
    #[arg(long)]
    k: Option<usize>,
    /// Number of distortion values (error probabilities) for the ord and ts curves.
    #[arg(long, default_value_t = 101)]
    d_points: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct GmmArgs {
    /// P(Y = 1).
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Half-width L of the discretisation interval [-L, L], in units of X.
    #[arg(long, default_value_t = 6.0)]
    grid_half_width: f64,
    /// Number of grid cells (odd).
    #[arg(long, default_value_t = 1201)]
    grid_bins: usize,
    /// Number of distortion values (error probabilities) for the ord curve.
    #[arg(long, default_value_t = 101)]
    d_points: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SncArgs {
    /// Logits CSV with header label,l0,...,l{K-1} and 0-based labels.
    #[arg(long)]
    logits: PathBuf,
    /// Inverse temperatures (dimensionless) of the tempered softmax.
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SynthKindArg {
    /// Two-class Gaussian mixture with exact log-posterior logits.
    Gmm,
    /// Dirichlet posteriors concentrated on the true class.
    Dirichlet,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKindArg,
    /// Number of records.
    #[arg(long)]
    n: usize,
    /// Random seed; identical seeds give byte-identical files.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// P(Y = 1) for --kind gmm.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Multiplier applied to the exact log-posteriors for --kind gmm (dimensionless).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Number of classes (uniform prior) for --kind dirichlet.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Base Dirichlet concentration per class for --kind dirichlet.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Extra concentration on the true class for --kind dirichlet (`inf` for one-hot).
    #[arg(long, default_value_t = 10.0)]
    concentration: f64,
    /// Output logits CSV path (written atomically).
    #[arg(long)]
    out: PathBuf,
}

fn closed_form(args: &ClosedFormArgs) -> Result<()> {
    let rate = match args.kind {
        ClosedFormKind::Binary => rd_binary(args.q, args.d)?,
        ClosedFormKind::Uniform => {
            let k = args
                .classes
                .context("--kind uniform needs --classes")?;
            rd_uniform_classes(k, args.d)?
        }
    };
    println!("rate_bits={}", io::sig9(rate));
    if let Some(px) = args.pixels {
        if px == 0 {
            bail!("--pixels must be positive");
        }
        println!("bpp={}", io::sig9(rate / px as f64));
    }
    Ok(())
}

fn ba(args: &BaArgs) -> Result<()> {
    let source = io::read_pmf_csv(&args.pmf)?;
    let d = io::read_distortion_csv(&args.distortion)?;
    let curve = taskrd::ba_sweep(&source, &d, &args.grid.values()?, &args.solver.config())?;
    args.output.emit(&[curve])
}

fn prior_choice(arg: Option<&str>) -> PriorChoice {
    match arg {
        None => PriorChoice::Auto,
        Some("uniform") => PriorChoice::Uniform,
        Some("rows") => PriorChoice::RowMass,
        Some(path) => PriorChoice::File(PathBuf::from(path)),
    }
}

fn class_bounds(args: &ClassBoundsArgs) -> Result<()> {
    let cm = io::read_confusion_csv(&args.confusion, &prior_choice(args.prior.as_deref()))?;
    if args.d_points < 2 {
        bail!("--d-points must be at least 2");
    }
    if let Some(k) = args.k {
        if k >= cm.classes() {
            bail!("--k must be below the number of classes ({})", cm.classes());
        }
    }
    let lambdas = args.grid.values()?;
    let cfg = args.solver.config();
    let s = stats(&cm);
    let mut curves = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for m in &args.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    for method in methods {
        let curve = match method {
            Method::Ord => {
                let grid = linspace(0.0, 1.0 - cm.prior().max(), args.d_points);
                ord_curve(cm.prior(), &grid, &cfg)?
            }
            Method::Ec => ec_curve(&cm, &lambdas, &cfg)?,
            Method::Iec => iec_curve(&cm, &lambdas, &cfg)?,
            Method::Ts => ts_curve(&s, args.d_points)?,
            Method::Merge => match args.k {
                None => merge_k_curve(&cm)?,
                Some(k) => {
                    let m = merge_k_baseline(&cm, k)?;
                    let mut p = RdPoint::new(None, m.rate, m.distortion);
                    p.note = Some(format!("k={k}"));
                    RdCurve::from_points("merge", vec![p])
                }
            },
        };
        curves.push(curve);
    }
    args.output.emit(&curves)
}

fn gmm(args: &GmmArgs) -> Result<()> {
    let spec = GmmSpec {
        q: args.q,
        half_width: args.grid_half_width,
        bins: args.grid_bins,
        ..GmmSpec::default()
    };
    let g = discretize(&spec)?;
    let curves = gmm_curves(&g, &args.grid.values()?, &args.solver.config(), args.d_points)?;
    args.output.emit(&curves)
}

fn snc(args: &SncArgs) -> Result<()> {
    let ds = io::read_logits_csv(&args.logits)?;
    let curve = snc_sweep(&ds, &args.grid.values()?)?;
    args.output.emit(&[curve])
}

fn synth(args: &SynthArgs) -> Result<()> {
    let kind = match args.kind {
        SynthKindArg::Gmm => SynthKind::Gmm {
            q: args.q,
            means: [-1.0, 1.0],
            noise_variance: 1.0,
            scale: args.scale,
        },
        SynthKindArg::Dirichlet => SynthKind::Dirichlet {
            prior: Pmf::uniform(args.classes)?,
            alpha: args.alpha,
            concentration: args.concentration,
        },
    };
    let ds = synth_logits(&kind, args.n, args.seed)?;
    io::write_logits_csv(&ds, &args.out)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::ClosedForm(a) => closed_form(a),
        Command::Ba(a) => ba(a),
        Command::ClassBounds(a) => class_bounds(a),
        Command::Gmm(a) => gmm(a),
        Command::Snc(a) => snc(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
