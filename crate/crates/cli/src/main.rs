//! `hmmmop`: entropy estimates, policy searches, simulations and sweeps
//! for hidden Markov models with two observation processes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hmmmop::entropy::{estimate_adaptive, estimate_entropy_with, AdaptiveOptions, PeriodicMode};
use hmmmop::greedy::greedy_crossings;
use hmmmop::local::{local_search, local_search_random};
use hmmmop::measure::invariant_measure;
use hmmmop::orbit::orbit_table;
use hmmmop::simulate::{simulate_with, SimOptions};
use hmmmop::sweep::{run_sweep, write_rows, Grid, SweepConfig, Tasks};
use hmmmop::{
    find_optimal_threshold, find_optimal_threshold_descent, greedy_policy, threshold_uniform_n, Error, GeneralModel,
    Policy, PolicySpec, SearchResult, SpecialModel, TruncatedPolicy,
};

const POLICY_HELP: &str = "Policy: threshold:A0A1:T | threshold:A1A0:T (T a number or 1+, the threshold \
belongs to the right interval), all0, all1, region5, greedy, or bits:HEX0:HEX1 (bit k of HEXi is the \
process used at the k-th point of the orbit of i, k = 0..63)";

#[derive(Parser, Debug)]
#[command(
    name = "hmmmop",
    version,
    about = "Limiting entropy and policy search for hidden Markov models \
with two observation processes",
    after_help = "Log level: set HMMMOP_LOG (error, warn, info, debug).\n\
Exit codes: 0 success, 1 usage error, 2 computation error (details as JSON on stdout)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Limiting expected entropy of one policy
    Entropy(EntropyArgs),
    /// Optimal threshold policy
    Optimize(OptimizeArgs),
    /// Locally optimal truncated policies by bit flips
    Local(LocalArgs),
    /// One-step greedy policy
    Greedy(GreedyArgs),
    /// Parameter grid sweep
    Sweep(SweepArgs),
    /// Monte Carlo simulation of the filter under a policy
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(short = 'a', allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(short = 'b', allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(short = 'p', allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(short = 'q', allow_hyphen_values = true)]
    q: Option<f64>,
    /// JSON model file: {"a","b","p","q"}, or for simulate a general model
    /// {"n","m","num_procs","T","M"}
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, help = POLICY_HELP)]
    policy: String,
    /// Target error bound
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Fixed truncation N instead of a target bound
    #[arg(short = 'N', long = "iterations")]
    n: Option<usize>,
    /// Report for period-2 chains: average, min or max
    #[arg(long, default_value = "average")]
    periodic: String,
    /// Write the orbit table (i,k,z,c) as CSV
    #[arg(long, value_name = "PATH")]
    orbit_out: Option<PathBuf>,
    /// Write the invariant measure (location,mass) as CSV
    #[arg(long, value_name = "PATH")]
    measure_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Walk the class circle downhill instead of enumerating every class
    #[arg(long)]
    descent: bool,
    /// Include every evaluated class in the output
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct LocalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Starting policy (any pointwise policy is truncated to 64 points per orbit)
    #[arg(long, help = POLICY_HELP, conflicts_with = "random")]
    start: Option<String>,
    /// Number of uniformly random starting policies
    #[arg(long, default_value_t = 10)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GreedyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Grid spacing; values are step/2, 3·step/2, … below 1
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Comma-separated subset of regions, greedy, local (or all)
    #[arg(long, default_value = "regions,greedy")]
    tasks: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random starts per point for the local task
    #[arg(long, default_value_t = 10)]
    local_starts: usize,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Sweep rows output
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Encoding of the rows file: csv or json
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Also write the summary JSON here
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
    /// Fill runtime_ms (output is then no longer byte-reproducible)
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, help = POLICY_HELP)]
    policy: String,
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial hidden state
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Fraction of steps discarded before averaging
    #[arg(long, default_value_t = 0.5)]
    burn_in: f64,
    /// Write the trace (t,x,i,y,z0..) as CSV
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PolicySyntax(_) | Error::InvalidModel(_) | Error::InvalidArgument(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type Outcome = Result<Value, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HMMMOP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Entropy(a) => cmd_entropy(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Local(a) => cmd_local(a),
        Command::Greedy(a) => cmd_greedy(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(v) => {
            emit(&v);
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            emit(&json!({ "error": e.code(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}

fn emit(v: &Value) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, v).map(|_| writeln!(out));
}

fn special_model(args: &ModelArgs) -> Result<SpecialModel, Failure> {
    let flags = [args.a, args.b, args.p, args.q];
    match (&args.model, flags) {
        (Some(_), f) if f.iter().any(Option::is_some) => {
            Err(Failure::Usage("give either --model or -a/-b/-p/-q, not both".into()))
        }
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
        }
        (None, [Some(a), Some(b), Some(p), Some(q)]) => Ok(SpecialModel::new(a, b, p, q)?),
        (None, f) => {
            let missing: Vec<&str> = ["-a", "-b", "-p", "-q"]
                .into_iter()
                .zip(f)
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| n)
                .collect();
            Err(Failure::Usage(format!(
                "missing model parameter(s) {}",
                missing.join(" ")
            )))
        }
    }
}

fn check_eps(eps: f64) -> Result<(), Failure> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--eps must be positive, got {eps}")))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_entropy(args: EntropyArgs) -> Outcome {
    let model = special_model(&args.model)?;
    check_eps(args.eps)?;
    let spec: PolicySpec = args.policy.parse()?;
    let policy = spec.resolve(&model)?;
    let mode: PeriodicMode = args.periodic.parse()?;
    let est = match args.n {
        Some(n) => estimate_entropy_with(&model, &policy, n, mode)?,
        None => {
            let opts = AdaptiveOptions {
                mode,
                ..AdaptiveOptions::new(args.eps)
            };
            estimate_adaptive(&model, &policy, &opts)?.into_certified()?
        }
    };
    if let Some(path) = &args.orbit_out {
        orbit_table(&model, &policy, est.n).write_csv(create(path)?)?;
    }
    if let Some(path) = &args.measure_out {
        invariant_measure(&model, &policy, est.n)?.write_csv(create(path)?)?;
    }
    let mut v = serde_json::to_value(&est).map_err(Error::from)?;
    v["policy"] = json!(policy.to_string());
    Ok(v)
}

fn cmd_optimize(args: OptimizeArgs) -> Outcome {
    let model = special_model(&args.model)?;
    check_eps(args.eps)?;
    let res = if args.descent {
        find_optimal_threshold_descent(&model, args.eps)?
    } else {
        find_optimal_threshold(&model, args.eps)?
    };
    let mut v = res.to_json();
    if let Some(t) = res.best_policy.as_threshold() {
        v["orientation"] = json!(t.orientation.to_string());
        v["threshold"] = json!(t.cut.to_string());
    }
    if args.trace {
        v["trace"] = serde_json::to_value(&res.trace).map_err(Error::from)?;
    }
    Ok(v)
}

fn local_json(r: &SearchResult) -> Value {
    let mut v = r.to_json();
    v.as_object_mut().expect("object").remove("region");
    v
}

fn cmd_local(args: LocalArgs) -> Outcome {
    let model = special_model(&args.model)?;
    check_eps(args.eps)?;
    let results = match &args.start {
        Some(s) => {
            let policy = s.parse::<PolicySpec>()?.resolve(&model)?;
            let start = match policy {
                Policy::Truncated(t) => t,
                other => TruncatedPolicy::truncate(&model, &other, 63)?,
            };
            vec![local_search(&model, start, args.eps)?]
        }
        None => local_search_random(&model, args.random, args.seed, args.eps)?,
    };
    let best = results
        .iter()
        .map(|r| r.best_entropy.value)
        .fold(f64::INFINITY, f64::min);
    Ok(json!({
        "results": results.iter().map(local_json).collect::<Vec<_>>(),
        "best_entropy": best,
        "seed": args.start.is_none().then_some(args.seed),
    }))
}

fn cmd_greedy(args: GreedyArgs) -> Outcome {
    let model = special_model(&args.model)?;
    check_eps(args.eps)?;
    let crossings = greedy_crossings(&model);
    let policy: Policy = greedy_policy(&model)?.into();
    let n = threshold_uniform_n(&model, args.eps)?;
    let est = hmmmop::estimate_entropy(&model, &policy, n)?;
    Ok(json!({
        "policy": policy.to_string(),
        "crossings": crossings,
        "entropy": est.value,
        "bound": est.bound,
        "N": est.n,
    }))
}

fn cmd_sweep(args: SweepArgs) -> Outcome {
    check_eps(args.eps)?;
    let grid = Grid::midpoints(args.step)?;
    let config = SweepConfig {
        grids: [grid; 4],
        eps: args.eps,
        tasks: Tasks::parse(&args.tasks)?,
        seed: args.seed,
        local_starts: args.local_starts,
        timing: args.timing,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Failure::Compute(Error::Io(e.to_string())))?;
    let out = pool.install(|| run_sweep(&config))?;
    let mut w = create(&args.out)?;
    if args.format == "json" {
        serde_json::to_writer_pretty(&mut w, &out.rows).map_err(Error::from)?;
        writeln!(w)?;
    } else {
        write_rows(&out.rows, &mut w)?;
    }
    w.flush()?;
    log::info!("wrote {} rows to {}", out.rows.len(), args.out.display());
    let summary = serde_json::to_value(&out.summary).map_err(Error::from)?;
    if let Some(path) = &args.summary {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(Error::from)?;
        writeln!(w)?;
    }
    Ok(summary)
}

fn cmd_simulate(args: SimulateArgs) -> Outcome {
    let spec: PolicySpec = args.policy.parse()?;
    let (general, special) = match (&args.model.model, args.model.a) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str::<SpecialModel>(&text) {
                Ok(s) => (s.to_general(), Some(s)),
                Err(_) => {
                    let g: GeneralModel =
                        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    (g, None)
                }
            }
        }
        _ => {
            let s = special_model(&args.model)?;
            (s.to_general(), Some(s))
        }
    };
    let policy = match (&spec, special) {
        (_, Some(s)) => spec.resolve(&s)?.pointwise(&s),
        (PolicySpec::Threshold(t), None) => Policy::Threshold(*t),
        (PolicySpec::All0, None) => hmmmop::ThresholdPolicy::all0().into(),
        (PolicySpec::All1, None) => hmmmop::ThresholdPolicy::all1().into(),
        _ => {
            return Err(Failure::Usage(
                "with a general model only threshold:, all0 and all1 policies are available".into(),
            ))
        }
    };
    let opts = SimOptions {
        burn_in: args.burn_in,
        ..SimOptions::new(args.steps, args.seed, args.x0)
    };
    let trace = simulate_with(&general, &policy, &opts)?;
    if let Some(path) = &args.out {
        trace.write_csv(create(path)?)?;
    }
    Ok(json!({
        "policy": policy.to_string(),
        "steps": trace.len(),
        "seed": args.seed,
        "burn_in": args.burn_in,
        "empirical_entropy_mean": trace.empirical_entropy_mean,
        "std_error": trace.entropy_std_error,
        "empirical_state_hist": trace.empirical_state_hist,
    }))
}
