use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use celltype_ot::changepoint::{score_detection, PeakDetector, PeakScale};
use celltype_ot::distributions::DEFAULT_SMOOTHING;
use celltype_ot::error::{Error, ErrorKind, Result};
use celltype_ot::io::report::TruthReport;
use celltype_ot::io::{parse_dataset, render_heatmap, write_report, AnalysisConfig};
use celltype_ot::pipeline::analyze;
use celltype_ot::reduce::Reducer;
use celltype_ot::simulation::{
    generate_truth, run_benchmark, sample_block, type_name, BenchConfig, GrowthReading, SimConfig,
};
use celltype_ot::uot::{Epsilon, SolverConfig};

#[derive(Parser)]
#[command(
    name = "celltype-ot",
    version,
    about = "Cell-type trajectories and change points via semi-relaxed unbalanced optimal transport"
)]
struct Cli {
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a `time,cell_type,f1..fK` table: plans, W series, change points.
    Analyze(AnalyzeArgs),
    /// Simulate a benchmark dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Monte Carlo benchmark of estimation error and detection accuracy.
    Bench(BenchArgs),
    /// Score detected change points against the truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Weight of the KL penalty on the source marginal.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    lambda: f64,
    /// Entropic regularization as a fraction of the largest cost.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-3)]
    epsilon_scale: f64,
    /// Smoothing added to each source marginal before solving.
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_SMOOTHING)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Convergence tolerance on the log-scaling vectors.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            epsilon: Epsilon::RelativeToMaxCost(self.epsilon_scale),
            max_iters: self.max_iters,
            convergence_tol: self.tol,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Sqrt,
    Linear,
}

#[derive(Args)]
struct DetectorArgs {
    /// Half-width of the strict local-maximum window.
    #[arg(long, default_value_t = 2)]
    window: usize,
    /// MAD multiplier in the detection threshold.
    #[arg(long, allow_negative_numbers = true, default_value_t = 3.0)]
    threshold_k: f64,
    /// Scale on which the threshold is applied.
    #[arg(long, value_enum, default_value_t = ScaleArg::Sqrt)]
    peak_scale: ScaleArg,
}

impl DetectorArgs {
    fn detector(&self) -> PeakDetector {
        PeakDetector {
            window: self.window,
            threshold_k: self.threshold_k,
            scale: match self.peak_scale {
                ScaleArg::Sqrt => PeakScale::Sqrt,
                ScaleArg::Linear => PeakScale::Linear,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReducerArg {
    Identity,
    Pca,
}

impl ReducerArg {
    fn reducer(self, components: usize) -> Reducer {
        match self {
            ReducerArg::Identity => Reducer::Identity,
            ReducerArg::Pca => Reducer::PrincipalAxes { components },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GrowthArg {
    /// exp(ν·sin(π(t+j−1)/d))
    PiInside,
    /// exp(ν·π·sin((t+j−1)/d))
    PiOutside,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output directory for report.json and heatmaps.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Reduction applied to the features before computing centroids.
    #[arg(long, value_enum, default_value_t = ReducerArg::Identity)]
    reducer: ReducerArg,
    #[arg(long, default_value_t = 2)]
    components: usize,
}

#[derive(Args)]
struct SimArgs {
    /// Number of cell types.
    #[arg(long = "d", default_value_t = 10)]
    d: usize,
    /// Horizon T (time points 0..=T).
    #[arg(long = "t", default_value_t = 50)]
    t: usize,
    /// Genes per cell.
    #[arg(long = "g", default_value_t = 50)]
    g: usize,
    /// Cells per time point.
    #[arg(long = "n", default_value_t = 2000)]
    n: usize,
    /// Growth amplitude ν.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    nu: f64,
    /// Change magnitude η.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    eta: f64,
    /// Comma-separated change times (empty for none).
    #[arg(long, default_value = "10,20,30,40")]
    changes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GrowthArg::PiInside)]
    growth: GrowthArg,
    #[arg(long, value_enum, default_value_t = ReducerArg::Pca)]
    reducer: ReducerArg,
    #[arg(long, default_value_t = 2)]
    components: usize,
}

impl SimArgs {
    fn config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            d: self.d,
            t: self.t,
            g: self.g,
            n: self.n,
            nu: self.nu,
            eta: self.eta,
            change_times: parse_index_list(&self.changes)
                .map_err(|e| Error::Config(format!("--changes: {e}")))?,
            seed: self.seed,
            growth: match self.growth {
                GrowthArg::PiInside => GrowthReading::PiInside,
                GrowthArg::PiOutside => GrowthReading::PiOutside,
            },
            reducer: self.reducer.reducer(self.components),
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Dataset file to write.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar (default: <out>.truth.json).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// λ used for the ground-truth plans.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Report file (JSON); printed summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Truth set: JSON array, truth sidecar, or a plain list of indices.
    #[arg(long)]
    truth: PathBuf,
    /// Detected set: JSON array, analysis report, or a plain list of indices.
    #[arg(long)]
    detected: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Convergence => 3,
                ErrorKind::Config => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let started = SystemTime::now();
    let dataset = parse_dataset(&args.input)?;
    let config = AnalysisConfig {
        solver: args.solver.config(),
        smoothing: args.solver.delta,
        detector: args.detector.detector(),
        reducer: args.reducer.reducer(args.components),
    };
    let analysis = analyze(&dataset, &config)?;
    let report = &analysis.report;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_report(report, &args.out.join("report.json"))?;
    let heatmaps = args.out.join("heatmaps");
    fs::create_dir_all(&heatmaps).map_err(|e| Error::io(&heatmaps, e))?;
    let names = dataset.labels.names();
    for (t, plan) in analysis.plans.iter().enumerate() {
        let title = format!(
            "transport plan {} → {}",
            dataset.times[t],
            dataset.times[t + 1]
        );
        let svg = render_heatmap(plan, names, &title);
        write_all(&heatmaps.join(format!("plan_{t:03}.svg")), &svg)?;
    }
    // Timestamps stay out of the artifacts themselves.
    let stamp = started
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    write_all(
        &args.out.join("run.log"),
        &format!(
            "started_unix={stamp}\ninput={}\ncells={}\ntypes={}\ntime_points={}\n",
            args.input.display(),
            dataset.records.len(),
            dataset.n_types(),
            dataset.n_times()
        ),
    )?;

    println!("t\ttime\tW");
    for p in &report.pairs {
        println!("{}\t{}\t{:.6e}", p.t, dataset.times[p.t], p.w);
    }
    let detected = &report.change_points.detected;
    let shown: Vec<String> = detected
        .iter()
        .map(|&t| format!("{t} (time {})", dataset.times[t]))
        .collect();
    println!(
        "change points: {}",
        if shown.is_empty() {
            "none".to_owned()
        } else {
            shown.join(", ")
        }
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = args.sim.config()?;
    let solver = SolverConfig::with_lambda(args.lambda);
    let truth = generate_truth(&config, &solver)?;

    let mut w = create(&args.out)?;
    let io_err = |e| Error::io(&args.out, e);
    let header: Vec<String> = (1..=config.g).map(|i| format!("f{i}")).collect();
    writeln!(w, "time,cell_type,{}", header.join(",")).map_err(io_err)?;
    let mut line = String::new();
    for (t, q) in truth.marginals.iter().enumerate() {
        let (labels, expr) = sample_block(q, &config, 0, t)?;
        for (i, &l) in labels.iter().enumerate() {
            line.clear();
            line.push_str(&format!("{t},{}", type_name(l)));
            for v in expr.row(i).iter() {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;

    let truth_path = args.truth.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    let record = TruthReport::new(&config, args.lambda, &truth);
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Input(e.to_string()))?;
    write_all(&truth_path, &(text + "\n"))?;
    println!(
        "wrote {} cells x {} genes to {}; truth in {}",
        (config.t + 1) * config.n,
        config.g,
        args.out.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig {
        sim: args.sim.config()?,
        solver: args.solver.config(),
        smoothing: args.solver.delta,
        detector: args.detector.detector(),
        runs: args.runs,
    };
    let report = run_benchmark(&config)?;
    if let Some(out) = &args.out {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Input(e.to_string()))?;
        write_all(out, &(text + "\n"))?;
    }
    let se_note = if report.single_run {
        " (single run: SE not estimated)"
    } else {
        ""
    };
    println!("runs: {}{se_note}", report.runs);
    let show = |name: &str, s: Option<celltype_ot::simulation::Summary>, scale: f64| match s {
        Some(s) => println!(
            "{name:<28}{:>10.2} ({:.2})",
            s.mean * scale,
            s.std_error * scale
        ),
        None => println!("{name:<28}{:>10}", "-"),
    };
    show("error x1e4, change points", report.error_change, 1e4);
    show("error x1e4, other points", report.error_non_change, 1e4);
    show(
        "precision (SE x100)",
        report.precision.map(|s| scale_se(s, 100.0)),
        1.0,
    );
    show(
        "recall (SE x100)",
        report.recall.map(|s| scale_se(s, 100.0)),
        1.0,
    );
    show(
        "F-score (SE x100)",
        report.f_score.map(|s| scale_se(s, 100.0)),
        1.0,
    );
    println!(
        "{:<28}{:>10.2}",
        "runs with no detections", report.zero_detection_fraction
    );
    Ok(())
}

fn scale_se(mut s: celltype_ot::simulation::Summary, k: f64) -> celltype_ot::simulation::Summary {
    s.std_error *= k;
    s
}

fn parse_index_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| format!("{s:?} is not a non-negative integer"))
        })
        .collect()
}

/// Reads an index set from a JSON array, a JSON object (truth sidecar,
/// analysis report, or `{"detected": [...]}`), or plain text.
fn read_index_set(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::Input(format!("{}: {m}", path.display()));
    let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
        return parse_index_list(&text).map_err(bad);
    };
    let array = match &value {
        serde_json::Value::Array(_) => Some(&value),
        serde_json::Value::Object(o) => o
            .get("change_times")
            .or_else(|| o.get("detected"))
            .or_else(|| o.get("change_points").and_then(|c| c.get("detected"))),
        _ => None,
    };
    let array = array
        .and_then(|a| a.as_array())
        .ok_or_else(|| bad("expected an array of indices or an object holding one".into()))?;
    array
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| bad(format!("{v} is not a non-negative integer")))
        })
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let truth = read_index_set(&args.truth)?;
    let detected = read_index_set(&args.detected)?;
    let m = score_detection(&truth, &detected)?;
    println!("precision\t{:.3}", m.precision);
    println!("recall\t{:.3}", m.recall);
    println!("f_score\t{:.3}", m.f_score);
    Ok(())
}
