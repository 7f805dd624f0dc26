//! `sbcrawl`: crawl, simulate, replicate and evaluate.
//!
//! Exit codes: 0 ok, 1 usage, 2 configuration, 3 runtime.

mod live;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sbcrawl::baselines::PolicyKind;
use sbcrawl::config::ConfigError;
use sbcrawl::engine::CrawlTrace;
use sbcrawl::experiment::{run_on_site, run_policy, Oracles};
use sbcrawl::fetch::{FetchMode, Fetcher, ModeFetcher, Pacer};
use sbcrawl::fixtures::{self, Manifest, StoreTruth, MANIFEST_FILE, STORE_DIR};
use sbcrawl::metrics::{self, Reference, RunReport};
use sbcrawl::sim::reduction::{build_reduction, optimal_crawl_bruteforce, ReductionInstance};
use sbcrawl::sim::{generate_site, ServeOptions, SiteSpec};
use sbcrawl::store::{Method, PageStore};
use sbcrawl::{CrawlConfig, Scalar};
use url::Url;

use crate::live::HttpFetcher;

#[derive(Parser, Debug)]
#[command(name = "sbcrawl", version, about = "Focused crawler for target documents on a single website")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crawl a website (live, recorded or simulated) with one policy.
    Crawl(CrawlArgs),
    /// Generate a synthetic site as a fixture directory.
    GenerateSite(GenerateArgs),
    /// Record a live site exhaustively into a store.
    Replicate(ReplicateArgs),
    /// Turn crawl traces into a report.
    Evaluate(EvaluateArgs),
    /// Optimal crawl cost of a set-cover reduction instance.
    Oracle(OracleArgs),
    /// Per-step curves of crawl traces as CSV.
    PlotData(PlotArgs),
    /// Re-derive fixture manifests and report differences.
    VerifyFixture(VerifyArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    TwoWings,
    Scattered,
    Mini,
}

#[derive(Args, Debug)]
struct SiteArgs {
    /// Simulate a site described by a TOML spec file.
    #[arg(long, conflicts_with = "preset")]
    site: Option<PathBuf>,
    /// Simulate a built-in site.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Pages of the preset site.
    #[arg(long, default_value_t = 5000)]
    pages: usize,
    /// Generator seed of the preset site.
    #[arg(long, default_value_t = 0)]
    site_seed: u64,
}

impl SiteArgs {
    fn spec(&self) -> anyhow::Result<Option<SiteSpec>> {
        if let Some(path) = &self.site {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(Some(SiteSpec::from_toml_str(&text).map_err(|e| Failure::Config(e.to_string()))?));
        }
        Ok(self.preset.map(|p| match p {
            Preset::TwoWings => SiteSpec::two_wings(self.site_seed, self.pages),
            Preset::Scattered => SiteSpec::scattered(self.site_seed, self.pages),
            Preset::Mini => SiteSpec::mini(self.site_seed),
        }))
    }
}

#[derive(Args, Debug)]
struct CrawlArgs {
    #[arg(long, default_value = "sb")]
    policy: PolicyKind,
    /// Root URL of the website.
    #[arg(long)]
    root: Option<Url>,
    #[command(flatten)]
    site: SiteArgs,
    /// live, record, replay or semi-online.
    #[arg(long, default_value = "semi-online")]
    mode: FetchMode,
    /// Page store directory (overrides the config and SBCRAWL_STORE).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Ground-truth manifest, for policies that need the target list.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Trace output (JSON lines).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    target_goal: Option<u64>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    site: SiteArgs,
    /// Fixture directory to create.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    #[arg(long)]
    root: Url,
    /// Fixture directory: the store goes to `<out>/store`, the manifest next to it.
    #[arg(long)]
    out: PathBuf,
    /// Skip recording HEAD answers.
    #[arg(long)]
    no_heads: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Trace files.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Ground truth of the crawled site.
    #[arg(long)]
    manifest: PathBuf,
    /// Site label in the report.
    #[arg(long, default_value = "site")]
    site_name: String,
    /// Comma-separated target fractions.
    #[arg(long, value_delimiter = ',', default_values_t = metrics::DEFAULT_FRACTIONS.to_vec())]
    fractions: Vec<f64>,
    /// Same-seed trace without early stopping, to report its effect.
    #[arg(long)]
    without_stop: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Universe size; elements are 0..m.
    #[arg(long)]
    m: usize,
    /// Subsets, `;`-separated lists of comma-separated elements, e.g. "0,1;1,2".
    #[arg(long)]
    sets: String,
    /// Cover budget B to test.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Fixture directories.
    #[arg(required = true)]
    fixtures: Vec<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Errors mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Config(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

fn load_config(args: &ConfigArgs) -> anyhow::Result<CrawlConfig> {
    let cfg = (|| -> Result<CrawlConfig, ConfigError> {
        let mut cfg = match &args.config {
            Some(p) => CrawlConfig::load(p)?,
            None => CrawlConfig::default(),
        };
        cfg.apply_env()?;
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    })();
    cfg.map_err(|e| Failure::Config(e.to_string()).into())
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summary_line(trace: &CrawlTrace) -> String {
    let s = &trace.summary;
    format!(
        "{} {}: {} targets, {} GET + {} HEAD, budget {} ({:?})",
        s.policy, s.root, s.targets, s.gets, s.heads, s.beta, s.stop
    )
}

fn cmd_crawl(a: CrawlArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&a.config)?;
    if a.budget.is_some() {
        cfg.budget = a.budget;
    }
    if a.target_goal.is_some() {
        cfg.target_goal = a.target_goal;
    }
    if let Some(s) = &a.store {
        cfg.store = Some(s.clone());
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let trace = match a.precision {
        Precision::F64 => crawl_with::<f64>(&a, &cfg)?,
        Precision::F32 => crawl_with::<f32>(&a, &cfg)?,
    };
    let out = a.trace.as_ref().or(cfg.trace.as_ref());
    match out {
        Some(p) => {
            trace.save(p).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("{}", summary_line(&trace));
        }
        None => print!("{}", trace.to_jsonl()),
    }
    Ok(())
}

fn crawl_with<F: Scalar>(a: &CrawlArgs, cfg: &CrawlConfig) -> anyhow::Result<CrawlTrace> {
    if let Some(spec) = a.site.spec()? {
        if a.root.is_some() {
            return Err(Failure::Usage("--root cannot be combined with a simulated site".into()).into());
        }
        let site = generate_site(&spec).map_err(|e| Failure::Config(e.to_string()))?;
        return Ok(run_on_site::<F>(&site, a.policy, cfg, ServeOptions::default())?);
    }
    let root = a
        .root
        .clone()
        .ok_or_else(|| Failure::Usage("one of --root, --site or --preset is required".into()))?;
    let store_dir = cfg.store.clone();
    if a.mode != FetchMode::Live && store_dir.is_none() {
        return Err(Failure::Usage(format!("mode {:?} needs --store", a.mode)).into());
    }
    let store = match (&store_dir, a.mode) {
        (Some(d), FetchMode::Replay) => Some(PageStore::open_read_only(d)?),
        (Some(d), _) => Some(PageStore::open(d)?),
        (None, _) => None,
    };
    let truth = match (&store, a.policy) {
        (Some(s), PolicyKind::SbOracle | PolicyKind::TpOff | PolicyKind::Omniscient) => Some(StoreTruth::new(s, cfg)),
        _ => None,
    };
    let oracles = match &truth {
        Some(t) => {
            let targets = match &a.manifest {
                Some(m) => Manifest::load(m)?.target_urls(),
                None => t.target_urls(),
            };
            t.oracles(targets)
        }
        None => Oracles::default(),
    };
    let live: Option<Box<dyn Fetcher + Send>> = (a.mode != FetchMode::Replay)
        .then(|| Box::new(HttpFetcher::new(&cfg.user_agent, Duration::from_secs(30))) as Box<dyn Fetcher + Send>);
    let mut fetcher = ModeFetcher::new(a.mode, store, live, Pacer::new(cfg.politeness()));
    Ok(run_policy::<F>(a.policy, &root, cfg, &mut fetcher, oracles)?)
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<()> {
    let cfg = CrawlConfig {
        politeness_delay: 0.0,
        respect_robots: false,
        ..load_config(&a.config)?
    };
    let spec = a
        .site
        .spec()?
        .ok_or_else(|| Failure::Usage("one of --site or --preset is required".into()))?;
    let site = generate_site(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let store_dir = a.out.join(STORE_DIR);
    if store_dir.join(sbcrawl::store::JOURNAL_FILE).exists() {
        bail!("{} already holds a store", store_dir.display());
    }
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("site.toml"), spec.to_toml()?)?;
    let mut store = PageStore::open(&store_dir)?;
    site.export(&mut store, &cfg.mime_blocklist())?;
    drop(store);
    let manifest = fixtures::walk(site.root(), &mut fixtures::replay_fetcher(&store_dir)?, &cfg)?;
    manifest.save(a.out.join(MANIFEST_FILE))?;
    eprintln!(
        "{}: {} pages, {} targets, {} reference requests",
        a.out.display(),
        manifest.pages,
        manifest.target_count,
        manifest.requests
    );
    Ok(())
}

fn cmd_replicate(a: ReplicateArgs) -> anyhow::Result<()> {
    let cfg = load_config(&a.config)?;
    let store_dir = a.out.join(STORE_DIR);
    fs::create_dir_all(&a.out)?;
    let store = PageStore::open(&store_dir)?;
    let live = Box::new(HttpFetcher::new(&cfg.user_agent, Duration::from_secs(30)));
    let mut fetcher = ModeFetcher::new(FetchMode::SemiOnline, Some(store), Some(live), Pacer::new(cfg.politeness()));
    let trace = fixtures::walk_trace(&a.root, &mut fetcher, &cfg)?;
    if !a.no_heads {
        let urls: Vec<String> = trace.steps.iter().map(|s| s.url.clone()).collect();
        for u in urls {
            let url = Url::parse(&u)?;
            let recorded = fetcher.store().is_some_and(|s| s.record(&u, Method::Head).is_some());
            if !recorded {
                fetcher.head(&url);
            }
        }
    }
    let manifest = fixtures::manifest_from_trace(&trace);
    manifest.save(a.out.join(MANIFEST_FILE))?;
    eprintln!(
        "{}: {} pages, {} targets, {} network requests",
        a.out.display(),
        manifest.pages,
        manifest.target_count,
        fetcher.network_requests()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let reference = Reference::from(&manifest);
    let baseline = a.without_stop.as_ref().map(CrawlTrace::load).transpose()?;
    let mut reports = Vec::new();
    for p in &a.traces {
        let trace = CrawlTrace::load(p).with_context(|| format!("reading {}", p.display()))?;
        let mut r = RunReport::new(&a.site_name, &trace, &reference, &a.fractions);
        r.early_stop = baseline.as_ref().map(|b| metrics::early_stop_report(&trace, b));
        reports.push(r);
    }
    let text = match a.format {
        Format::Csv => metrics::to_csv(&reports, &a.fractions),
        Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
    };
    write_output(a.out.as_deref(), &text)
}

fn parse_sets(text: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|s| {
            s.split(',')
                .filter(|e| !e.trim().is_empty())
                .map(|e| e.trim().parse::<usize>().map_err(|_| anyhow!("`{e}` is not an element index")))
                .collect()
        })
        .collect()
}

fn cmd_oracle(a: OracleArgs) -> anyhow::Result<()> {
    let collection = parse_sets(&a.sets).map_err(|e| Failure::Usage(e.to_string()))?;
    let inst = ReductionInstance {
        m: a.m,
        budget: a.budget.unwrap_or(collection.len()),
        collection,
    };
    let (graph, targets) = build_reduction(&inst).map_err(|e| Failure::Usage(e.to_string()))?;
    let opt = optimal_crawl_bruteforce(&graph, &targets)?;
    let witness: Vec<String> = opt.nodes.iter().map(|&i| graph.nodes()[i].to_string()).collect();
    let mut out = serde_json::json!({
        "nodes": graph.len(),
        "edges": graph.edges().len(),
        "cost": opt.cost,
        "witness": witness,
    });
    if let Some(b) = a.budget {
        out["budget"] = b.into();
        out["within_budget"] = (opt.cost <= (inst.m + b + 1) as f64).into();
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> anyhow::Result<()> {
    let traces = a
        .traces
        .iter()
        .map(|p| CrawlTrace::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_output(a.out.as_deref(), &metrics::plot_data_csv(&traces))
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<()> {
    let cfg = CrawlConfig {
        respect_robots: false,
        ..load_config(&a.config)?
    };
    let mut bad = 0;
    for dir in &a.fixtures {
        let report = fixtures::verify_fixture(dir, &cfg)?;
        if !report.is_ok() {
            bad += 1;
        }
        println!("{}", report.to_string().trim_end());
    }
    if bad > 0 {
        bail!("{bad} fixture(s) differ from their manifest");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Crawl(a) => cmd_crawl(a),
        Command::GenerateSite(a) => cmd_generate(a),
        Command::Replicate(a) => cmd_replicate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::PlotData(a) => cmd_plot(a),
        Command::VerifyFixture(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<Failure>() {
                Some(Failure::Usage(_)) => 1,
                Some(Failure::Config(_)) => 2,
                None => 3,
            };
            let kind = ["", "usage", "config", "error"][code as usize];
            eprintln!("sbcrawl: {kind}: {e:#}");
            ExitCode::from(code)
        }
    }
}
