//! vlmkit: plan image tokenization, lint and transform record corpora,
//! synthesize multi-image tasks, plan mixtures, run timed evals, and render
//! Pareto reports. Exit codes: 0 ok, 1 data errors, 2 usage/config errors.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vlmkit::curate::{
    default_templates, fnv1a64, known_image_tags, lint_record, repair_record, DatasetSummary,
    LabelThresholds, ReformatOutcome, RepairAction, reformat_double_duty,
};
use vlmkit::eval::{
    aggregate, compute_pareto, estimate_output_tokens, render_csv, render_svg, run_benchmark,
    CostAxis, EvalSample, GenConfig, MockModelClient, MockReply, ModelClient, HttpModelClient,
    ParetoPoint, Reference, RunOptions, Summary,
};
use vlmkit::layout::{assemble_sequence, validate_layout, StreamItem, TokenStream,
    DEFAULT_MARKER_OVERHEAD};
use vlmkit::mixture::{
    check_reasoning_share, draw_records, estimate_tokens, parse_config, plan_mixture,
    reasoning_token_share, MixtureConfig, ShareReport,
};
use vlmkit::record::{JsonlReader, SampleRecord};
use vlmkit::synth::{
    synth_caption_match, synth_scrambled, synth_whats_changed, CaptionedImage, Frame,
    FrameSequence, SynthConfig,
};
use vlmkit::tokenize::{plan_patches, StrategyConfig};
use vlmkit::{Error, Result};

#[derive(Parser)]
#[command(name = "vlmkit", version, about = "Non-neural toolkit for a multimodal reasoning pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a tokenization plan for one image size
    Plan(PlanArgs),
    /// Check a JSONL corpus against the defect catalogue
    Lint(LintArgs),
    /// Repair records and/or emit double-duty reformatted variants
    Transform(TransformArgs),
    /// Generate synthetic multi-image records
    Synth {
        #[command(subcommand)]
        task: SynthCmd,
    },
    /// Plan a training mixture from a TOML config; optionally draw records
    Mix(MixArgs),
    /// Run benchmark samples against a model endpoint (or a mock)
    Eval(EvalArgs),
    /// Compute the accuracy/cost Pareto frontier over eval summaries
    Pareto(ParetoArgs),
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_data_error() { 1 } else { 2 });
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Plan(args) => cmd_plan(args),
        Cmd::Lint(args) => cmd_lint(args),
        Cmd::Transform(args) => cmd_transform(args),
        Cmd::Synth { task } => cmd_synth(task),
        Cmd::Mix(args) => cmd_mix(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Pareto(args) => cmd_pareto(args),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Dynres,
    Dyns2,
    Multicrop,
    MulticropS2,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    /// Patch edge in pixels
    #[arg(long, default_value_t = 16)]
    patch: u32,
    /// Tile edge in pixels (tiled strategies)
    #[arg(long)]
    tile: Option<u32>,
    /// Lower patch budget (dynres)
    #[arg(long)]
    min_patches: Option<u32>,
    /// Upper patch budget (dynres)
    #[arg(long)]
    max_patches: Option<u32>,
    /// Visual token budget (tiled strategies)
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Also print the fused layout for this plan embedded in a text stream
    #[arg(long)]
    with_layout: bool,
    /// Text tokens surrounding the image in the fused layout
    #[arg(long, default_value_t = 0)]
    text_tokens: u32,
    /// Validate the fused layout against a stage sequence budget
    #[arg(long)]
    max_seq_len: Option<u32>,
}

fn cmd_plan(args: PlanArgs) -> Result<i32> {
    let need = |opt: Option<u32>, flag: &str| {
        opt.ok_or_else(|| Error::Config(format!("{flag} is required for this strategy")))
    };
    let mut cfg = match args.strategy {
        StrategyArg::Dynres => StrategyConfig::dynamic_res(
            need(args.min_patches, "--min-patches")?,
            need(args.max_patches, "--max-patches")?,
        ),
        StrategyArg::Dyns2 => StrategyConfig::dynamic_s2(need(args.max_tokens, "--max-tokens")?),
        StrategyArg::Multicrop => {
            StrategyConfig::multi_crop(need(args.max_tokens, "--max-tokens")?)
        }
        StrategyArg::MulticropS2 => {
            StrategyConfig::multi_crop_s2(need(args.max_tokens, "--max-tokens")?)
        }
    };
    cfg.patch_px = args.patch;
    if let Some(tile) = args.tile {
        cfg.tile_px = tile;
    }
    let plan = plan_patches(args.width, args.height, &cfg)?;

    if args.with_layout {
        let mut stream = TokenStream::text_only(args.text_tokens);
        stream.items.push(StreamItem::ImagePlaceholder(0));
        let layout = assemble_sequence(&stream, std::slice::from_ref(&plan), DEFAULT_MARKER_OVERHEAD)?;
        let mut doc = serde_json::json!({ "plan": plan, "layout": layout });
        if let Some(max) = args.max_seq_len {
            let violations = validate_layout(&layout, max);
            for v in &violations {
                eprintln!("layout: {v}");
            }
            doc["violations"] = serde_json::to_value(&violations)?;
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{}", serde_json::to_string_pretty(&plan)?);
    }
    Ok(0)
}

#[derive(Args)]
struct LintArgs {
    #[arg(long)]
    input: PathBuf,
}

fn open_records(path: &Path) -> Result<JsonlReader<BufReader<File>>> {
    Ok(JsonlReader::new(BufReader::new(File::open(path)?)))
}

fn cmd_lint(args: LintArgs) -> Result<i32> {
    let mut summary = DatasetSummary::new(LabelThresholds::default());
    let mut issue_count = 0usize;
    let mut bad_lines = 0usize;
    for item in open_records(&args.input)? {
        match item {
            Ok(rec) => {
                let issues = lint_record(&rec, &known_image_tags(&rec));
                for issue in &issues {
                    eprintln!("{}: [{}] {} ({})", rec.id, issue.code, issue.detail, issue.field);
                }
                issue_count += issues.len();
                summary.add(&rec, &issues, false);
            }
            Err(e) => {
                eprintln!("{e}");
                bad_lines += 1;
            }
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary.finish())?);
    Ok(if issue_count + bad_lines > 0 { 1 } else { 0 })
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Apply automatic fixes for fixable lint issues
    #[arg(long)]
    repair: bool,
    /// Append a reformatted copy of each record (id suffixed ::dd)
    #[arg(long)]
    double_duty: bool,
    /// Seed for template selection (required with --double-duty)
    #[arg(long, required_if_eq("double_duty", "true"))]
    seed: Option<u64>,
}

fn cmd_transform(args: TransformArgs) -> Result<i32> {
    let mut out = BufWriter::new(File::create(&args.output)?);
    let templates = default_templates();
    let mut bad = 0usize;
    for item in open_records(&args.input)? {
        let rec = match item {
            Ok(rec) => rec,
            Err(e) => {
                eprintln!("{e}");
                bad += 1;
                continue;
            }
        };
        let mut current = rec;
        if args.repair {
            let (fixed, actions) = repair_record(&current, &known_image_tags(&current));
            for action in &actions {
                match action {
                    RepairAction::Applied { code, note } => {
                        eprintln!("{}: repaired {code}: {note}", current.id)
                    }
                    RepairAction::Skipped { code, reason } => {
                        eprintln!("{}: left {code} alone: {reason}", current.id)
                    }
                }
            }
            current = fixed;
        }
        writeln!(out, "{}", current.to_json_line()?)?;
        if args.double_duty {
            match reformat_double_duty(&current, &templates, args.seed.unwrap()) {
                Ok(ReformatOutcome::Reformatted(variant)) => {
                    writeln!(out, "{}", variant.to_json_line()?)?
                }
                Ok(ReformatOutcome::Skipped { reason }) => {
                    eprintln!("{}: double-duty skipped: {reason}", current.id)
                }
                Err(e) => {
                    eprintln!("{}: double-duty failed: {e}", current.id);
                    bad += 1;
                }
            }
        }
    }
    out.flush()?;
    Ok(if bad > 0 { 1 } else { 0 })
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Present a group of images, request captions in scrambled order
    Scrambled(ScrambledArgs),
    /// Match shuffled captions back to their images
    Match(MatchArgs),
    /// Ask what changed between sequential frames
    WhatsChanged(WhatsChangedArgs),
}

#[derive(Args)]
struct ScrambledArgs {
    /// JSON array of {"image", "caption"} objects
    #[arg(long)]
    captions: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    group_size: usize,
    #[arg(long, default_value_t = 0.2)]
    insert_prob: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    captions: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WhatsChangedArgs {
    /// Frame image path; pass two or three times in order
    #[arg(long = "frame")]
    frames: Vec<String>,
    /// Comma-separated capture times; defaults to 0,1,2
    #[arg(long)]
    timestamps: Option<String>,
    /// Pixel-delta threshold for the diff describer
    #[arg(long, default_value_t = 16)]
    threshold: u8,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_captions(path: &Path) -> Result<Vec<CaptionedImage>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("bad captions file {}: {e}", path.display())))
}

fn write_record_line(rec: &SampleRecord, output: Option<&Path>) -> Result<()> {
    let line = rec.to_json_line()?;
    match output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        None => println!("{line}"),
    }
    Ok(())
}

fn cmd_synth(task: SynthCmd) -> Result<i32> {
    match task {
        SynthCmd::Scrambled(args) => {
            let items = load_captions(&args.captions)?;
            let cfg = SynthConfig {
                group_size: args.group_size,
                insert_prob: args.insert_prob,
                seed: args.seed,
                ..SynthConfig::default()
            };
            let rec = synth_scrambled(&items, &cfg)?;
            write_record_line(&rec, args.output.as_deref())?;
        }
        SynthCmd::Match(args) => {
            let items = load_captions(&args.captions)?;
            let rec = synth_caption_match(&items, &SynthConfig::with_seed(args.seed))?;
            write_record_line(&rec, args.output.as_deref())?;
        }
        SynthCmd::WhatsChanged(args) => {
            let times: Vec<f64> = match &args.timestamps {
                Some(csv) => csv
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("bad timestamp {t}")))
                    })
                    .collect::<Result<_>>()?,
                None => (0..args.frames.len()).map(|i| i as f64).collect(),
            };
            if times.len() != args.frames.len() {
                return Err(Error::Config(format!(
                    "{} timestamps for {} frames",
                    times.len(),
                    args.frames.len()
                )));
            }
            let seq = FrameSequence {
                frames: args
                    .frames
                    .iter()
                    .zip(&times)
                    .map(|(image, &timestamp)| Frame { image: image.clone(), timestamp })
                    .collect(),
            };
            let cfg = SynthConfig {
                diff_threshold: args.threshold,
                seed: args.seed,
                ..SynthConfig::default()
            };
            let rec = synth_whats_changed(&seq, None, &cfg)?;
            write_record_line(&rec, args.output.as_deref())?;
        }
    }
    Ok(0)
}

#[derive(Args)]
struct MixArgs {
    /// TOML mixture config
    #[arg(long)]
    config: PathBuf,
    /// Check the reasoning share against the config's target
    #[arg(long)]
    check: bool,
    /// Weight the share check by tokens instead of samples
    #[arg(long)]
    by_tokens: bool,
    /// Draw concrete records per the manifest (needs --input/--output/--seed)
    #[arg(long)]
    draw: bool,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_mix(args: MixArgs) -> Result<i32> {
    let cfg: MixtureConfig = parse_config(&std::fs::read_to_string(&args.config)?)?;
    let mut manifest = plan_mixture(&cfg.categories)?;
    let estimable = cfg.default_avg_tokens.is_some()
        || manifest.specs.iter().all(|s| s.avg_tokens.is_some());
    if estimable {
        manifest.total_tokens = Some(estimate_tokens(&manifest, cfg.default_avg_tokens)?);
    }

    let mut doc = serde_json::to_value(&manifest)?;
    if args.check {
        let target = cfg.target_reasoning_share.unwrap_or(0.2);
        let tol = cfg.tolerance.unwrap_or(0.05);
        let report = if args.by_tokens {
            let share = reasoning_token_share(&manifest, cfg.default_avg_tokens)?;
            ShareReport { share, target, tol, within: (share - target).abs() <= tol }
        } else {
            check_reasoning_share(&manifest, target, tol)?
        };
        if !report.within {
            eprintln!(
                "warning: reasoning share {:.4} misses target {target} by more than {tol}",
                report.share
            );
        }
        doc["share_check"] = serde_json::to_value(report)?;
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);

    if args.draw {
        let (input, output, seed) = match (&args.input, &args.output, args.seed) {
            (Some(i), Some(o), Some(s)) => (i, o, s),
            _ => {
                return Err(Error::Config(
                    "--draw needs --input, --output, and --seed".into(),
                ))
            }
        };
        let mut records = Vec::new();
        for item in open_records(input)? {
            records.push(item?);
        }
        let drawn = draw_records(&records, &cfg.categories, seed)?;
        let mut out = BufWriter::new(File::create(output)?);
        for rec in drawn {
            writeln!(out, "{}", rec.to_json_line()?)?;
        }
        out.flush()?;
    }
    Ok(0)
}

#[derive(Args)]
struct EvalArgs {
    /// Benchmark samples in the record JSONL schema
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Samples drawn per benchmark (clamped to pool size; default all)
    #[arg(long)]
    subset: Option<usize>,
    /// Answer from the gold references instead of a live endpoint
    #[arg(long)]
    mock: bool,
    /// Simulated per-request delay for --mock
    #[arg(long, default_value_t = 0)]
    mock_delay_ms: u64,
    /// Model endpoint URL; falls back to VLMKIT_ENDPOINT
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "model")]
    model_label: String,
    #[arg(long, default_value_t = 4096)]
    max_output_tokens: u64,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Abort on the first transport failure
    #[arg(long)]
    fail_fast: bool,
    /// Write per-sample results as JSONL here
    #[arg(long)]
    results: Option<PathBuf>,
}

fn mock_client(samples: &[EvalSample], delay: Duration) -> MockModelClient {
    let answers: HashMap<String, String> = samples
        .iter()
        .map(|s| {
            let text = match &s.reference {
                Reference::Text(t) => t.clone(),
                Reference::Rect(r) => format!("({}, {})", r.x + r.w / 2.0, r.y + r.h / 2.0),
            };
            (s.prompt.clone(), text)
        })
        .collect();
    MockModelClient::with_reply_fn(delay, move |req| match answers.get(&req.prompt) {
        Some(text) => MockReply::text(text.clone(), estimate_output_tokens(text)),
        None => MockReply::failure(),
    })
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let mut samples = Vec::new();
    for item in open_records(&args.input)? {
        samples.push(EvalSample::from_record(&item?)?);
    }

    let client: Box<dyn ModelClient> = if args.mock {
        Box::new(mock_client(&samples, Duration::from_millis(args.mock_delay_ms)))
    } else {
        let endpoint = args
            .endpoint
            .or_else(|| std::env::var("VLMKIT_ENDPOINT").ok())
            .ok_or_else(|| {
                Error::Config("no endpoint: pass --endpoint or set VLMKIT_ENDPOINT".into())
            })?;
        let api_key = std::env::var("VLMKIT_API_KEY").ok();
        Box::new(HttpModelClient::new(endpoint, api_key)?)
    };

    let gen = GenConfig {
        temperature: args.temperature,
        max_output_tokens: args.max_output_tokens,
        ..GenConfig::default()
    };
    let opts = RunOptions { fail_fast: args.fail_fast };

    let mut groups: BTreeMap<String, Vec<EvalSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.benchmark.clone()).or_default().push(s);
    }
    let expected: Vec<String> = groups.keys().cloned().collect();
    let mut results = Vec::new();
    for (name, group) in &groups {
        let subset = match args.subset {
            Some(n) if n > group.len() => {
                eprintln!(
                    "warning: benchmark {name} has only {} samples, clamping subset from {n}",
                    group.len()
                );
                group.len()
            }
            Some(n) => n,
            None => group.len(),
        };
        let bench_seed = args.seed ^ fnv1a64(name.as_bytes());
        results.extend(run_benchmark(client.as_ref(), group, &gen, subset, bench_seed, &opts)?);
    }

    if let Some(path) = &args.results {
        let mut out = BufWriter::new(File::create(path)?);
        for r in &results {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
        out.flush()?;
    }
    let summary = aggregate(&results, &expected);
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostArg {
    Latency,
    Tokens,
}

#[derive(Args)]
struct ParetoArgs {
    /// Eval summary to include, as LABEL=PATH; repeatable
    #[arg(long = "summary", value_name = "LABEL=PATH", required = true)]
    summaries: Vec<String>,
    #[arg(long, value_enum, default_value_t = CostArg::Latency)]
    cost: CostArg,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn cmd_pareto(args: ParetoArgs) -> Result<i32> {
    let (axis, cost_label) = match args.cost {
        CostArg::Latency => (CostAxis::LatencyMs, "mean latency (ms)"),
        CostArg::Tokens => (CostAxis::OutputTokens, "mean output tokens"),
    };
    let mut entries: Vec<(String, Summary)> = Vec::new();
    for spec in &args.summaries {
        let (label, path) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("--summary wants LABEL=PATH, got {spec}"))
        })?;
        let text = std::fs::read_to_string(path)?;
        let summary: Summary = serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("bad summary {path}: {e}")))?;
        entries.push((label.to_string(), summary));
    }
    let points: Vec<ParetoPoint> = entries
        .iter()
        .map(|(label, summary)| ParetoPoint::from_summary(label.clone(), summary, axis))
        .collect::<Result<_>>()?;
    let frontier = compute_pareto(&points);

    let doc = serde_json::json!({
        "cost_axis": axis,
        "points": points,
        "frontier_indices": frontier,
        "frontier_labels": frontier.iter().map(|&i| points[i].label.clone()).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);

    let borrowed: Vec<(&str, &Summary)> =
        entries.iter().map(|(l, s)| (l.as_str(), s)).collect();
    if let Some(path) = &args.csv {
        std::fs::write(path, render_csv(&borrowed)?)?;
    }
    if let Some(path) = &args.svg {
        std::fs::write(path, render_svg(&points, &frontier, cost_label))?;
    }
    Ok(0)
}
