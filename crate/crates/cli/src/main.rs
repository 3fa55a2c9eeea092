use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use orderlab::book::replay;
use orderlab::eval::{self, EvalConfig, IntervalBins};
use orderlab::markov::MarkovModel;
use orderlab::order::StreamConfig;
use orderlab::sampler::{self, BatchSpec};
use orderlab::sim::{self, SimConfig};
use orderlab::stream_io::{self, read_config, read_orders, read_stream, sidecar_path, write_stream};
use orderlab::surrogate;

#[derive(Parser, Debug)]
#[command(name = "orderlab", version, about = "Limit order stream simulation, baselines and evaluation")]
struct Cli {
    /// Where to write the run manifest. Defaults to `<out>.manifest.json`
    /// for file outputs and `<out>/manifest.json` for directories.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the market simulator and write the resulting stream.
    Simulate(SimulateArgs),
    /// Replay a raw order list through the matching engine.
    Replay(OrdersArgs),
    /// Drop orders that never reach the top ten levels, then replay.
    Preprocess(OrdersArgs),
    /// Fit the Markov baseline on a stream.
    Fit(FitArgs),
    /// Generate a stream from a fitted Markov model.
    Generate(GenerateArgs),
    /// Write statistics panels for one stream.
    Evaluate(EvaluateArgs),
    /// Compare a candidate stream with a reference stream.
    Compare(CompareArgs),
    /// Export (order, quotes) to (next quotes) pairs for surrogate training.
    ExportCda(ExportArgs),
    /// Draw spaced history-window batches as normalized rows.
    SampleBatches(BatchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Simulator settings in TOML; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OrdersArgs {
    /// Order table (`delta_ms,type_code,price_ticks,qty`) or a stream table.
    #[arg(long)]
    orders: PathBuf,
    /// Stream config JSON. Defaults to the sidecar next to the orders file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, default_value_t = orderlab::markov::DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Stream whose last `--history-len` observations seed the generator.
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value_t = sampler::DEFAULT_HISTORY)]
    history_len: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct EvalArgs {
    /// Intensity chunk length in seconds.
    #[arg(long, default_value_t = eval::DEFAULT_CHUNK_S)]
    chunk_s: f64,
    /// Linear interarrival bin width in ms; log2 bins when omitted.
    #[arg(long)]
    interarrival_bin_ms: Option<u64>,
}

impl EvalArgs {
    fn config(self) -> EvalConfig {
        EvalConfig {
            chunk_s: self.chunk_s,
            interarrival_bins: self.interarrival_bin_ms.map_or(IntervalBins::Log2, IntervalBins::Linear),
        }
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    stream: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "cand")]
    candidate: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BatchArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, default_value_t = sampler::DEFAULT_HISTORY)]
    k: usize,
    #[arg(long, default_value_t = sampler::DEFAULT_BATCH)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    batches: usize,
    /// Minimum start distance is `min_gap + 1`; defaults to `k + 1`.
    #[arg(long)]
    min_gap: Option<usize>,
    /// Only use windows that lie inside one intraday bucket.
    #[arg(long)]
    per_bucket: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: &'static str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<Artifact>,
    duration_s: f64,
    summary: Value,
}

/// What a subcommand produced, before hashing.
struct Run {
    subcommand: &'static str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// The main output; the default manifest location derives from it.
    out: PathBuf,
    summary: Value,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {} for hashing", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn stream_outputs(path: &Path) -> Vec<PathBuf> {
    vec![path.to_path_buf(), sidecar_path(path)]
}

fn dir_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.file_name().is_some_and(|n| n != "manifest.json"));
    files.sort();
    Ok(files)
}

fn load_stream_config(orders: &Path, config: Option<&Path>) -> Result<(StreamConfig, PathBuf)> {
    let path = config.map_or_else(|| sidecar_path(orders), Path::to_path_buf);
    let cfg = read_config(&path)?;
    cfg.validate().with_context(|| format!("{}", path.display()))?;
    Ok((cfg, path))
}

fn simulate(args: SimulateArgs) -> Result<Run> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SimConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let stream = sim::simulate(&cfg)?;
    write_stream(&stream, &args.out)?;
    Ok(Run {
        subcommand: "simulate",
        config: args.config,
        seed: Some(cfg.seed),
        inputs: vec![],
        outputs: stream_outputs(&args.out),
        out: args.out,
        summary: json!({ "orders": stream.len() }),
    })
}

fn replay_cmd(args: OrdersArgs, filter: bool) -> Result<Run> {
    let (cfg, cfg_path) = load_stream_config(&args.orders, args.config.as_deref())?;
    let orders = read_orders(&args.orders)?;
    let (stream, summary) = if filter {
        let (stream, report) = stream_io::preprocess(&orders, &cfg)?;
        let summary = json!({
            "input_orders": report.input_orders,
            "kept_orders": report.kept_orders,
            "dropped_limit_orders": report.dropped_limit_orders,
            "dropped_cancels": report.dropped_cancels,
            "rewritten_cancels": report.rewritten_cancels,
        });
        (stream, summary)
    } else {
        let stream = replay(&orders, &cfg)?;
        let summary = json!({ "orders": stream.len() });
        (stream, summary)
    };
    write_stream(&stream, &args.out)?;
    Ok(Run {
        subcommand: if filter { "preprocess" } else { "replay" },
        config: Some(cfg_path),
        seed: None,
        inputs: vec![args.orders],
        outputs: stream_outputs(&args.out),
        out: args.out,
        summary,
    })
}

fn fit(args: FitArgs) -> Result<Run> {
    let stream = read_stream(&args.stream)?;
    let model = MarkovModel::fit(&stream, args.order, args.alpha)?;
    model.save(&args.out)?;
    Ok(Run {
        subcommand: "fit",
        config: None,
        seed: None,
        inputs: vec![args.stream],
        outputs: vec![args.out.clone()],
        out: args.out,
        summary: json!({ "order": args.order, "alpha": args.alpha, "training_orders": stream.len() }),
    })
}

fn generate(args: GenerateArgs) -> Result<Run> {
    let model = MarkovModel::load(&args.model)?;
    let history = read_stream(&args.history)?;
    let start = history.len().saturating_sub(args.history_len);
    let seed_obs = &history.observations[start..];
    let stream = model.generate(seed_obs, args.n, &history.config, &mut rng(args.seed));
    write_stream(&stream, &args.out)?;
    Ok(Run {
        subcommand: "generate",
        config: None,
        seed: Some(args.seed),
        inputs: vec![args.model, args.history],
        outputs: stream_outputs(&args.out),
        out: args.out,
        summary: json!({ "orders": stream.len(), "history_orders": seed_obs.len() }),
    })
}

fn evaluate(args: EvaluateArgs) -> Result<Run> {
    let stream = read_stream(&args.stream)?;
    let stats = eval::stream_stats(&stream, &args.eval.config())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    eval::write_panels(&args.out, &[("stream", &stats)])?;
    Ok(Run {
        subcommand: "evaluate",
        config: None,
        seed: None,
        inputs: vec![args.stream],
        outputs: dir_files(&args.out)?,
        out: args.out,
        summary: json!({ "orders": stats.orders }),
    })
}

fn compare(args: CompareArgs) -> Result<Run> {
    let reference = read_stream(&args.reference)?;
    let candidate = read_stream(&args.candidate)?;
    let report = eval::compare(&reference, &candidate, &args.eval.config())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    eval::write_report(&report, &args.out)?;
    let pooled: serde_json::Map<String, Value> = eval::Statistic::ALL
        .iter()
        .map(|&s| (s.name().to_string(), json!(report.ks(s, None))))
        .collect();
    Ok(Run {
        subcommand: "compare",
        config: None,
        seed: None,
        inputs: vec![args.reference, args.candidate],
        outputs: dir_files(&args.out)?,
        out: args.out,
        summary: json!({ "pooled_ks": pooled }),
    })
}

fn export_cda(args: ExportArgs) -> Result<Run> {
    let stream = read_stream(&args.stream)?;
    let pairs = surrogate::export_pairs(&stream);
    surrogate::write_pairs(&pairs, &stream.config, &args.out)?;
    let recoverable = pairs.iter().filter(|p| p.recoverable).count();
    Ok(Run {
        subcommand: "export-cda",
        config: None,
        seed: None,
        inputs: vec![args.stream],
        outputs: stream_outputs(&args.out),
        out: args.out,
        summary: json!({ "pairs": pairs.len(), "recoverable": recoverable }),
    })
}

fn sample_batches(args: BatchArgs) -> Result<Run> {
    let stream = read_stream(&args.stream)?;
    let normalized = stream_io::normalize(&stream)?;
    let spec = BatchSpec {
        k: args.k,
        batch_size: args.batch_size,
        min_gap: args.min_gap.unwrap_or(args.k + 1),
        per_bucket: args.per_bucket,
    };
    let mut rng = rng(args.seed);
    let batches = (0..args.batches)
        .map(|_| sampler::sample_batch(&stream, &spec, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    sampler::write_batches(&normalized, &batches, BufWriter::new(file))
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(Run {
        subcommand: "sample-batches",
        config: None,
        seed: Some(args.seed),
        inputs: vec![args.stream],
        outputs: vec![args.out.clone()],
        out: args.out,
        summary: json!({ "batches": args.batches, "batch_size": args.batch_size, "k": args.k, "min_gap": spec.min_gap }),
    })
}

fn default_manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut name = out.as_os_str().to_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let run = match cli.command {
        Command::Simulate(a) => simulate(a)?,
        Command::Replay(a) => replay_cmd(a, false)?,
        Command::Preprocess(a) => replay_cmd(a, true)?,
        Command::Fit(a) => fit(a)?,
        Command::Generate(a) => generate(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Compare(a) => compare(a)?,
        Command::ExportCda(a) => export_cda(a)?,
        Command::SampleBatches(a) => sample_batches(a)?,
    };
    let outputs = run
        .outputs
        .iter()
        .map(|p| {
            Ok(Artifact {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        subcommand: run.subcommand,
        config: run.config,
        seed: run.seed,
        inputs: run.inputs,
        outputs,
        duration_s: started.elapsed().as_secs_f64(),
        summary: run.summary,
    };
    let path = cli.manifest.unwrap_or_else(|| default_manifest_path(&run.out));
    if manifest.outputs.iter().any(|a| a.path == path) {
        bail!("manifest path {} would overwrite an output", path.display());
    }
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("{}", serde_json::to_string(&manifest.summary)?);
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
