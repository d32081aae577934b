use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernsched::analysis::GraphStats;
use kernsched::bench::{generate_suite, run_campaign, CampaignReport, Family, GeneratorSpec};
use kernsched::dsl::parse_heuristic_file;
use kernsched::features::retrieve_topm;
use kernsched::kernels::{ClusterConfig, MiningConfig};
use kernsched::features::TypeVocabulary;
use kernsched::scheduler::{list_schedule, RuntimeMode};
use kernsched::synth::{provider_from_descriptor, run_loop, Ablation, GraphCase, LoopConfig, ProviderKind, Provider};
use kernsched::{Dag, Error, ErrorKind, History, KernelLibrary, PriorityExpr};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "kernsched", version, about = "Retrieval-guided priority synthesis for list scheduling")]
struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded suite of graphs.
    Gen(GenArgs),
    /// Per-node structural statistics of one graph.
    Stats(StatsArgs),
    /// Kernel library operations.
    Kernels {
        #[command(subcommand)]
        command: KernelsCommand,
    },
    /// Top-m kernels for one graph.
    Retrieve(RetrieveArgs),
    /// Schedule one graph with one heuristic.
    Schedule(ScheduleArgs),
    /// Run the synthesis loop.
    Synthesize(SynthArgs),
    /// Run the loop under several ablation modes and compare.
    Ablate(AblateArgs),
    /// Summarize a stored campaign report or loop history.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum KernelsCommand {
    /// Mine motifs from training graphs and cluster them into a library.
    Build(BuildArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec JSON; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// File name prefix for generated graphs.
    #[arg(long, default_value = "g")]
    prefix: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Training graphs: files or directories of `*.json`.
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    library: PathBuf,
    #[arg(short = 'm', long = "top-m", default_value_t = 5)]
    m: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Inline expression; takes precedence over --heuristic-file.
    #[arg(long)]
    heuristic: Option<String>,
    /// File with one expression per line; the first is used.
    #[arg(long)]
    heuristic_file: Option<PathBuf>,
    /// Report a runtime of 0 instead of wall-clock time.
    #[arg(long)]
    zero_runtime: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LoopArgs {
    /// Loop configuration JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    val: Vec<PathBuf>,
    #[arg(long)]
    library: Option<PathBuf>,
    /// Provider kind: fallback, scripted or http (endpoint and auth_env come from --config).
    #[arg(long, value_parser = parse_provider)]
    provider: Option<ProviderKind>,
    /// Replies for the scripted provider, one per line.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    zero_runtime: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: LoopArgs,
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: LoopArgs,
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', value_parser = parse_ablation, default_value = "full,no_retrieval,no_motif,random_kernel")]
    modes: Vec<Ablation>,
    /// Timing runs per graph; the minimum is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// A `report.json` from `ablate` or a `history.json` from `synthesize`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text", value_parser = ["text", "csv", "json"])]
    format: String,
}

fn parse_family(s: &str) -> Result<Family, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown family {s}"))
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown provider {s}"))
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Error plus the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => 2,
            ErrorKind::Format => 3,
            ErrorKind::Provider => 4,
            ErrorKind::Invariant => 5,
            ErrorKind::Io => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn with_path<T>(path: &Path, r: kernsched::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn load_graph(path: &Path) -> CliResult<Dag> {
    with_path(path, Dag::from_json(&read(path)?))
}

/// Expands directories into their `*.json` files, sorted by name.
fn expand(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json") && f.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(usage("no graph files given"));
    }
    Ok(out)
}

fn load_cases(paths: &[PathBuf]) -> CliResult<(Vec<GraphCase>, Vec<PathBuf>)> {
    let files = expand(paths)?;
    let cases = files
        .iter()
        .map(|f| {
            let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(GraphCase::new(name, load_graph(f)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((cases, files))
}

fn load_library(path: &Path) -> CliResult<KernelLibrary> {
    with_path(path, KernelLibrary::from_json(&read(path)?))
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Provenance written next to every artifact. No timestamps, so identical
/// runs give identical manifests.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    /// Resolved generator parameters, for `gen`.
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorSpec>,
    output_dir: String,
    outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &'static str, output_dir: &Path) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: None,
            seed: None,
            inputs: Vec::new(),
            generator: None,
            output_dir: output_dir.display().to_string(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> CliResult {
        let bytes = fs::read(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    fn save(&self, path: &Path) -> CliResult {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write(path, &text)
    }
}

/// Manifest location for a single-file artifact: `<stem>.manifest.json`
/// beside it.
fn manifest_for_file(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn parent_dir(out: &Path) -> PathBuf {
    out.parent().filter(|d| !d.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn emit(out: Option<&Path>, text: &str, command: &'static str, inputs: &[&Path]) -> CliResult {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            write(path, text)?;
            let mut m = RunManifest::new(command, &parent_dir(path));
            for i in inputs {
                m.input(i)?;
            }
            m.outputs.push(path.display().to_string());
            m.save(&manifest_for_file(path))
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let mut spec: GeneratorSpec = match &a.spec {
        Some(p) => with_path(p, serde_json::from_str(&read(p)?).map_err(Error::from))?,
        None => GeneratorSpec::default(),
    };
    if let Some(f) = a.family {
        spec.family = f;
    }
    if let Some(v) = a.layers {
        spec.layers = v;
    }
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.edge_prob {
        spec.edge_prob = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let graphs = generate_suite(&spec, a.count)?;
    fs::create_dir_all(&a.out)?;
    let mut m = RunManifest::new("gen", &a.out);
    m.seed = Some(spec.seed);
    if let Some(p) = &a.spec {
        m.config = Some(p.display().to_string());
        m.input(p)?;
    }
    let width = graphs.len().saturating_sub(1).to_string().len().max(3);
    for (i, g) in graphs.iter().enumerate() {
        let name = format!("{}{:0width$}.json", a.prefix, i);
        write(&a.out.join(&name), &g.to_json())?;
        m.outputs.push(name);
    }
    m.generator = Some(spec);
    m.save(&a.out.join("manifest.json"))
}

fn cmd_stats(a: StatsArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let stats = GraphStats::compute(&g);
    #[derive(Serialize)]
    struct Out<'a> {
        nodes: usize,
        edges: usize,
        lower_bound: u64,
        #[serde(flatten)]
        stats: &'a GraphStats,
    }
    let text = pretty(&Out { nodes: g.len(), edges: g.edges().len(), lower_bound: stats.makespan_lower_bound(&g), stats: &stats });
    emit(a.out.as_deref(), &text, "stats", &[&a.graph])
}

fn cmd_kernels_build(a: BuildArgs) -> CliResult {
    let files = expand(&a.train)?;
    let graphs = files.iter().map(|f| load_graph(f)).collect::<CliResult<Vec<_>>>()?;
    let mining = MiningConfig { hops: a.hops.unwrap_or(MiningConfig::default().hops), ..Default::default() };
    let mut clustering = ClusterConfig::default();
    if let Some(t) = a.threshold {
        clustering.threshold = t;
    }
    if let Some(b) = a.budget {
        clustering.budget = b;
    }
    let vocab = TypeVocabulary::from_graphs(&graphs);
    let lib = KernelLibrary::build(&graphs, vocab, &mining, &clustering)?;
    let inputs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    emit(Some(&a.out), &lib.to_json(), "kernels build", &inputs)
}

fn cmd_retrieve(a: RetrieveArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let lib = load_library(&a.library)?;
    let query = with_path(&a.graph, lib.embed_query(&g, &GraphStats::compute(&g)))?;
    let hits = retrieve_topm(&query, &lib.kernels, a.m)?;
    emit(a.out.as_deref(), &pretty(&hits), "retrieve", &[&a.graph, &a.library])
}

fn cmd_schedule(a: ScheduleArgs) -> CliResult {
    let g = load_graph(&a.graph)?;
    let expr: PriorityExpr = match (&a.heuristic, &a.heuristic_file) {
        (Some(text), _) => PriorityExpr::parse(text)?,
        (None, Some(p)) => with_path(p, parse_heuristic_file(&read(p)?))?
            .into_iter()
            .next()
            .ok_or_else(|| Failure { code: 3, message: format!("{}: no expression", p.display()) })?,
        (None, None) => return Err(usage("give --heuristic or --heuristic-file")),
    };
    let mode = if a.zero_runtime { RuntimeMode::Zero } else { RuntimeMode::Wallclock };
    let s = list_schedule(&g, &GraphStats::compute(&g), &expr, mode);
    let mut inputs: Vec<&Path> = vec![&a.graph];
    if a.heuristic.is_none() {
        inputs.extend(a.heuristic_file.as_deref());
    }
    emit(a.out.as_deref(), &pretty(&s), "schedule", &inputs)
}

struct LoopSetup {
    config: LoopConfig,
    train: Vec<GraphCase>,
    val: Vec<GraphCase>,
    library: Option<KernelLibrary>,
    manifest: RunManifest,
}

fn setup_loop(a: &LoopArgs, command: &'static str) -> CliResult<LoopSetup> {
    let mut manifest = RunManifest::new(command, &a.out);
    let mut config: LoopConfig = match &a.config {
        Some(p) => {
            manifest.config = Some(p.display().to_string());
            manifest.input(p)?;
            with_path(p, serde_json::from_str(&read(p)?).map_err(|e| Error::Config(e.to_string())))?
        }
        None => LoopConfig::default(),
    };
    if let Some(k) = a.provider {
        config.provider.kind = k;
    }
    if let Some(p) = &a.script {
        manifest.input(p)?;
        config.provider.kind = ProviderKind::Scripted;
        config.provider.script = read(p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.iterations {
        config.iterations = n;
    }
    if a.zero_runtime {
        config.runtime_mode = RuntimeMode::Zero;
    }
    config.validate()?;
    manifest.seed = Some(config.seed);
    let (train, train_files) = load_cases(&a.train)?;
    let (val, val_files) = load_cases(&a.val)?;
    for f in train_files.iter().chain(&val_files) {
        manifest.input(f)?;
    }
    let library = match &a.library {
        Some(p) => {
            manifest.input(p)?;
            Some(load_library(p)?)
        }
        None => None,
    };
    fs::create_dir_all(&a.out)?;
    Ok(LoopSetup { config, train, val, library, manifest })
}

fn cmd_synthesize(a: SynthArgs) -> CliResult {
    let mut s = setup_loop(&a.common, "synthesize")?;
    if let Some(m) = a.ablation {
        s.config.ablation = m;
    }
    let mut provider: Box<dyn Provider<f64>> = provider_from_descriptor(&s.config.provider)?;
    let history = run_loop(&s.train, &s.val, s.library.as_ref(), &s.config, provider.as_mut())?;
    write(&a.common.out.join("history.json"), &history.to_json())?;
    write(&a.common.out.join("best.heuristic"), &format!("{}\n", history.best.heuristic))?;
    s.manifest.outputs = vec!["history.json".into(), "best.heuristic".into()];
    s.manifest.save(&a.common.out.join("manifest.json"))?;
    println!("{}", history.best.heuristic);
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> CliResult {
    let mut s = setup_loop(&a.common, "ablate")?;
    let descriptor = s.config.provider.clone();
    let mut make = |_: Ablation| provider_from_descriptor::<f64>(&descriptor);
    let report = run_campaign(&s.train, &s.val, s.library.as_ref(), &a.modes, &s.config, a.repeats, &mut make)?;
    let out = &a.common.out;
    write(&out.join("report.json"), &report.to_json())?;
    write(&out.join("report.txt"), &report.to_text())?;
    write(&out.join("report.csv"), &report.to_csv())?;
    s.manifest.outputs = vec!["report.json".into(), "report.txt".into(), "report.csv".into()];
    s.manifest.save(&out.join("manifest.json"))?;
    print!("{}", report.to_text());
    Ok(())
}

fn history_text(h: &History) -> String {
    let mut out = format!("baseline 1*level: mean J {:.4}\n", h.baseline.mean_score);
    for r in &h.records {
        let lat = r.results.iter().map(|g| g.latency as f64).sum::<f64>() / r.results.len().max(1) as f64;
        out.push_str(&format!(
            "iteration {}: mean J {:.4}, mean latency {:.2}, failures {}, {:?}: {}\n",
            r.iteration,
            r.mean_score,
            lat,
            r.failures.len(),
            r.source,
            r.heuristic
        ));
    }
    out.push_str(&format!("best: iteration {} ({})\n", h.best.iteration, h.best.heuristic));
    out
}

fn history_csv(h: &History) -> String {
    let mut out = String::from("graph,baseline");
    for r in &h.records {
        out.push_str(&format!(",iter{}", r.iteration));
    }
    out.push('\n');
    for (i, b) in h.baseline.per_graph.iter().enumerate() {
        out.push_str(&format!("{},{}", b.graph, b.latency));
        for r in &h.records {
            out.push_str(&format!(",{}", r.results[i].latency));
        }
        out.push('\n');
    }
    out
}

fn cmd_report(a: ReportArgs) -> CliResult {
    let text = read(&a.input)?;
    let value: serde_json::Value = with_path(&a.input, serde_json::from_str(&text).map_err(Error::from))?;
    let out = if value.get("modes").is_some() {
        let r = with_path(&a.input, CampaignReport::from_json(&text))?;
        match a.format.as_str() {
            "csv" => r.to_csv(),
            "json" => r.to_json(),
            _ => r.to_text(),
        }
    } else if value.get("records").is_some() {
        let h = with_path(&a.input, History::from_json(&text))?;
        match a.format.as_str() {
            "csv" => history_csv(&h),
            "json" => h.to_json(),
            _ => history_text(&h),
        }
    } else {
        return Err(Failure { code: 3, message: format!("{}: neither a campaign report nor a history", a.input.display()) });
    };
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 5, message: e.to_string() })?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Kernels { command: KernelsCommand::Build(a) } => cmd_kernels_build(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
