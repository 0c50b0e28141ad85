//! Command-line front end.
//!
//! Exit codes: 0 the property holds, 1 a counterexample was found, 2 timeout,
//! 3 unknown (node limit). Codes from 10 up are errors: 10 usage, 11 bad
//! input documents, 12 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use bnnverify::bench::{idx_to_jsonl, load_dataset, run_bench, BenchConfig, MisclassifiedMode};
use bnnverify::encoder::{encode_network, EncodingConfig};
use bnnverify::mip::export_lp;
use bnnverify::model::Model;
use bnnverify::property::{robustness_property, Norm, Property};
use bnnverify::solver::{verify, BranchRule, Verdict, VerifyConfig};
use bnnverify::Error;

const EXIT_USAGE: u8 = 10;
const EXIT_INPUT: u8 = 11;
const EXIT_IO: u8 = 12;

#[derive(Parser)]
#[command(name = "bnnverify", version, about = "Verify properties of binarized neural networks")]
struct Cli {
    /// Log verbosity (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove a property or print a counterexample.
    Verify(VerifyArgs),
    /// Check local robustness for every image of a dataset.
    Bench(BenchArgs),
    /// Write the encoding of a property in CPLEX LP format.
    Encode(EncodeArgs),
    /// Evaluate a model on a dataset or a single input.
    Eval(EvalArgs),
    /// Summarize a model and, with a property, its encoding.
    Inspect(InspectArgs),
    /// Convert MNIST IDX files to a JSON-lines dataset.
    Idx2jsonl(IdxArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Args)]
struct SolverArgs {
    /// Time limit per property in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, env = "BNNVERIFY_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "layer-order")]
    branch_rule: BranchRule,
    /// Give up with UNKNOWN after this many nodes.
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Use [-1, 1] for every sign-like unit instead of propagated bounds.
    #[arg(long)]
    no_tighten: bool,
    /// Keep indicators for units whose sign is fixed by the bounds.
    #[arg(long)]
    keep_stable: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<VerifyConfig, Failure> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Failure::usage("--timeout must be a positive number of seconds"));
        }
        if self.workers == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        let mut cfg = VerifyConfig {
            encoding: EncodingConfig {
                tighten_bounds: !self.no_tighten,
                eliminate_stable: !self.keep_stable,
                ..EncodingConfig::default()
            },
            ..VerifyConfig::default()
        };
        cfg.solver.timeout = Duration::from_secs_f64(self.timeout);
        cfg.solver.workers = self.workers;
        cfg.solver.seed = self.seed;
        cfg.solver.branch_rule = self.branch_rule;
        cfg.solver.max_nodes = self.max_nodes;
        Ok(cfg)
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    property: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Leave wall-clock times out of the output.
    #[arg(long)]
    no_timings: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSON-lines file of {"input": [...], "label": k} objects.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value = "inf")]
    norm: Norm,
    /// Only the first N images.
    #[arg(long)]
    count: Option<usize>,
    /// Report misclassified images as skipped instead of verifying them.
    #[arg(long)]
    skip_misclassified: bool,
    #[arg(long)]
    no_timings: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// A property document. Alternatively give --input, --label and --epsilon.
    #[arg(long, conflicts_with_all = ["input", "label"])]
    property: Option<PathBuf>,
    /// JSON array with the center of a robustness property.
    #[arg(long, requires = "label")]
    input: Option<String>,
    #[arg(long, requires = "input")]
    label: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value = "inf")]
    norm: Norm,
    #[arg(long)]
    no_tighten: bool,
    #[arg(long)]
    keep_stable: bool,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required_unless_present = "input")]
    dataset: Option<PathBuf>,
    /// JSON array of input values.
    #[arg(long, conflicts_with = "dataset")]
    input: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    property: Option<PathBuf>,
}

#[derive(Args)]
struct IdxArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Map scaled pixels to +1 (at or above) or -1 (below).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>, Failure> {
    serde_json::from_str(s).map_err(|e| Failure::usage(format!("--input must be a JSON array of numbers: {e}")))
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    Model::load(&read(path)?).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_property(path: &Path) -> Result<Property, Failure> {
    Property::load(&read(path)?).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: format!("{}: {e}", path.display()),
    })
}

fn run_verify(a: &VerifyArgs) -> Result<u8, Failure> {
    let cfg = a.solver.config()?;
    let model = load_model(&a.model)?;
    let prop = load_property(&a.property)?;
    let start = Instant::now();
    let report = verify(&model, &prop, &cfg)?;
    let time_s = (!a.no_timings).then(|| start.elapsed().as_secs_f64());
    let code = match report.verdict {
        Verdict::Holds => 0,
        Verdict::CounterexampleFound(_) => 1,
        Verdict::Timeout => 2,
        Verdict::Unknown => 3,
    };
    let (input, logits) = match &report.verdict {
        Verdict::CounterexampleFound(c) => (Some(&c.input), Some(&c.output)),
        _ => (None, None),
    };
    match a.format {
        Format::Jsonl => {
            let line = json!({
                "property": prop.name,
                "verdict": report.verdict.label(),
                "trivial": report.trivial,
                "input": input,
                "logits": logits,
                "nodes": report.stats.nodes,
                "time_s": time_s,
            });
            println!("{line}");
        }
        Format::Text => {
            println!("{}", report.verdict.label());
            if let (Some(x), Some(y)) = (input, logits) {
                println!("input: {}", serde_json::to_string(x).expect("finite"));
                println!("logits: {}", serde_json::to_string(y).expect("finite"));
            }
            if let Some(why) = report.trivial {
                println!("note: {why}");
            }
            match time_s {
                Some(t) => println!("nodes: {} time_s: {t:.3}", report.stats.nodes),
                None => println!("nodes: {}", report.stats.nodes),
            }
        }
    }
    Ok(code)
}

fn run_bench_cmd(a: &BenchArgs) -> Result<u8, Failure> {
    if a.epsilon.is_nan() || a.epsilon < 0.0 {
        return Err(Failure::usage("--epsilon must be non-negative"));
    }
    let cfg = BenchConfig {
        epsilon: a.epsilon,
        norm: a.norm,
        count: a.count,
        misclassified: if a.skip_misclassified {
            MisclassifiedMode::Skip
        } else {
            MisclassifiedMode::Verify
        },
        timings: !a.no_timings,
        verify: a.solver.config()?,
    };
    let model = load_model(&a.model)?;
    let text = String::from_utf8(read(&a.dataset)?).map_err(|_| Failure {
        code: EXIT_INPUT,
        message: format!("{}: not UTF-8", a.dataset.display()),
    })?;
    let data = load_dataset(&text)?;
    let report = run_bench(&model, &data, &cfg)?;
    let out = match a.format {
        Format::Text => report.to_text(),
        Format::Jsonl => report.to_jsonl(),
    };
    write_out(a.out.as_deref(), &out)?;
    Ok(0)
}

fn run_encode(a: &EncodeArgs) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    let prop = match (&a.property, &a.input, a.label) {
        (Some(p), _, _) => load_property(p)?,
        (None, Some(x), Some(label)) => robustness_property(&parse_vector(x)?, label, model.output_dim(), a.epsilon, a.norm)?,
        _ => return Err(Failure::usage("give --property, or --input with --label")),
    };
    prop.check_dims(model.input_dim(), model.output_dim())?;
    let cfg = EncodingConfig {
        tighten_bounds: !a.no_tighten,
        eliminate_stable: !a.keep_stable,
        ..EncodingConfig::default()
    };
    let enc = encode_network(&model, &prop, &cfg)?;
    write_out(a.out.as_deref(), &export_lp(&enc.problem))?;
    Ok(0)
}

fn run_eval(a: &EvalArgs) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    if let Some(x) = &a.input {
        let y = model.forward(&parse_vector(x)?)?;
        println!("{}", serde_json::to_string(&y).expect("finite"));
        return Ok(0);
    }
    let path = a.dataset.as_deref().expect("clap requires --dataset without --input");
    let text = String::from_utf8(read(path)?).map_err(|_| Failure {
        code: EXIT_INPUT,
        message: format!("{}: not UTF-8", path.display()),
    })?;
    let data = load_dataset(&text)?;
    let mut correct = 0;
    for (i, row) in data.iter().enumerate() {
        let y = model.forward(&row.input)?;
        let predicted = bnnverify::bench::argmax(&y);
        correct += usize::from(predicted == row.label);
        println!("{i} label {} predicted {predicted}", row.label);
    }
    if data.is_empty() {
        println!("accuracy n/a");
    } else {
        println!("accuracy {:.4} ({correct}/{})", correct as f64 / data.len() as f64, data.len());
    }
    Ok(0)
}

fn run_inspect(a: &InspectArgs) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    println!("model {} input_dim {} output_dim {}", model.name(), model.input_dim(), model.output_dim());
    for (i, b) in model.blocks().iter().enumerate() {
        println!("  block {i}: {} {} -> {}", b.kind(), b.input_width(), b.output_width());
    }
    println!("fully binarized: {}", model.is_fully_binarized());
    if let Some(p) = &a.property {
        let prop = load_property(p)?;
        prop.check_dims(model.input_dim(), model.output_dim())?;
        match encode_network(&model, &prop, &EncodingConfig::default()) {
            Ok(enc) => {
                let stable = enc.sign_sites.iter().filter(|s| s.beta.is_none()).count();
                println!(
                    "encoding: {} variables ({} binary), {} constraints",
                    enc.problem.variables().len(),
                    enc.problem.num_binaries(),
                    enc.problem.constraints().len()
                );
                println!("sign units: {} ({stable} stable)", enc.sign_sites.len());
                let out = enc.bounds.output();
                let lo: Vec<f64> = out.iter().map(|i| i.lo).collect();
                let hi: Vec<f64> = out.iter().map(|i| i.hi).collect();
                println!("output lower bounds: {}", serde_json::to_string(&lo).expect("finite"));
                println!("output upper bounds: {}", serde_json::to_string(&hi).expect("finite"));
            }
            Err(e @ (Error::VacuousAssertion | Error::EmptyInputSet)) => println!("encoding: none needed ({e})"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(0)
}

fn run_idx(a: &IdxArgs) -> Result<u8, Failure> {
    let out = idx_to_jsonl(&read(&a.images)?, &read(&a.labels)?, a.threshold, a.count)?;
    write_out(Some(&a.out), &out)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let default = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default)),
        )
        .init();
    let result = match &cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Bench(a) => run_bench_cmd(a),
        Command::Encode(a) => run_encode(a),
        Command::Eval(a) => run_eval(a),
        Command::Inspect(a) => run_inspect(a),
        Command::Idx2jsonl(a) => run_idx(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
