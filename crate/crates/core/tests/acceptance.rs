//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report reads top to bottom:
//! `cargo test -p sbcrawl --test acceptance`.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use url::Url;

use sbcrawl::action::ActionSpace;
use sbcrawl::bandit::{ArmStats, BanditConfig, BanditState};
use sbcrawl::baselines::{PolicyKind, QueuePolicy};
use sbcrawl::classifier::{ClassifierConfig, MimeClass, UrlClass, UrlClassifier};
use sbcrawl::config::EarlyStopParams;
use sbcrawl::engine::{crawl, EarlyStopState, LinkLabeler, StopReason};
use sbcrawl::experiment::run_on_site;
use sbcrawl::fixtures::{replay_fetcher, Manifest, MANIFEST_FILE, STORE_DIR};
use sbcrawl::metrics::{needed, requests_to_fraction, Percent};
use sbcrawl::sim::reduction::{build_reduction, optimal_crawl_bruteforce, ReductionInstance};
use sbcrawl::sim::{generate_site, ServeOptions, Site, SiteSpec};
use sbcrawl::tagpath::{hash_index, project, HashParams};
use sbcrawl::{ActionId, CrawlConfig, CrawlTrace, SbPolicy};

use common::{check_trace_invariants, fixture, median, MapFetcher};

type Outcome = Result<String, String>;

/// Every trace produced here, for the invariant sweep.
#[derive(Default)]
struct Traces(Vec<(String, CrawlTrace)>);

impl Traces {
    fn keep(&mut self, label: impl Into<String>, t: &CrawlTrace) {
        self.0.push((label.into(), t.clone()));
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ----------------------------------------------------------------------

fn bigint_hash(prime: u64, x: u64, w: u32, m: u32) -> u32 {
    let modulus = BigUint::from(1u8) << w;
    let r = (BigUint::from(prime) * BigUint::from(x)) % &modulus;
    let q: BigUint = r >> (w - m);
    q.try_into().unwrap()
}

fn hash_fidelity() -> Outcome {
    let params = HashParams::new(766_245_317, 11, 2).map_err(|e| e.to_string())?;
    ensure(hash_index(2, &params) == 1, || format!("h(2) = {}", hash_index(2, &params)))?;
    for x in [4, 8, 9] {
        ensure(hash_index(x, &params) == 3, || format!("h({x}) = {}", hash_index(x, &params)))?;
    }
    for x in 0..11 {
        let oracle = bigint_hash(766_245_317, x, 11, 2);
        ensure(hash_index(x, &params) == oracle, || format!("h({x}) disagrees with big-integer oracle"))?;
    }
    let bucket3: Vec<u64> = (0..11).filter(|&x| bigint_hash(766_245_317, x, 11, 2) == 3).collect();
    ensure(bucket3 == [4, 8, 9], || format!("bucket 3 holds {bucket3:?}"))?;

    // An 11-id BoW with p[4] = p[8] = 1 and p[9] = 0, consistent with the
    // illustrated value of about 0.67.
    let p: [u32; 11] = [1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 1];
    let bow: Vec<(u32, u32)> = p.iter().enumerate().filter(|e| *e.1 > 0).map(|(i, &c)| (i as u32, c)).collect();
    let v = project::<f64>(&bow, 11, &params);
    let expected = (p[4] + p[8] + p[9]) as f64 / 3.0;
    let got = v.get(3);
    ensure((got - expected).abs() < 1e-12, || format!("p_D[3] = {got}, expected {expected}"))?;
    Ok(format!("h(2)=1, h(4)=h(8)=h(9)=3, p_D[3]={got:.4}"))
}

// 2 ----------------------------------------------------------------------

fn reward_semantics(traces: &mut Traces) -> Outcome {
    let root = "http://reward.example/";
    let mut links: Vec<String> = (1..=5).map(|i| format!("/files/t{i}.csv")).collect();
    links.extend((1..=7).map(|i| format!("/p{i}")));
    let links_ref: Vec<&str> = links.iter().map(String::as_str).collect();
    let mut b = MapFetcher::builder(root)
        .html("/", &["/files/t1.csv", "/files/t2.csv", "/h"])
        .html("/h", &links_ref);
    for i in 1..=5 {
        b = b.file(&format!("/files/t{i}.csv"), "text/csv", 500);
    }
    for i in 1..=7 {
        b = b.html(&format!("/p{i}"), &[]);
    }
    let mut fetcher = b.build();
    let truth: HashMap<String, MimeClass> = fetcher
        .pages
        .keys()
        .map(|k| (k.clone(), fetcher.mime_class(&Url::parse(k).unwrap())))
        .collect();
    let label = |u: &Url| truth.get(u.as_str()).copied().unwrap_or(MimeClass::Neither);

    let mut cfg = CrawlConfig::offline();
    cfg.target_goal = Some(5);
    let root_url = Url::parse(root).unwrap();
    let mut sb = SbPolicy::<f64>::new(&cfg);
    let trace = crawl(&root_url, &cfg, &mut fetcher, LinkLabeler::<f64>::oracle(label), &mut sb).map_err(|e| e.to_string())?;
    traces.keep("reward/sb", &trace);
    let h = trace
        .steps
        .iter()
        .find(|s| s.url == format!("{root}h"))
        .ok_or("page /h was never crawled")?;
    let body = &fetcher.pages[&format!("{root}h")].body;
    let on_page = sbcrawl::tagpath::extract_links(body, &Url::parse(root).unwrap(), &cfg.link_tags.iter().map(String::as_str).collect::<Vec<_>>());
    ensure(on_page.len() == 12, || format!("/h has {} links", on_page.len()))?;
    // the two targets linked from the root are no longer new
    ensure(h.links == 10, || format!("/h has {} new links", h.links))?;
    ensure(h.reward == 3, || format!("reward {}", h.reward))?;
    let action = ActionId(h.action.ok_or("/h was pulled without an action")?);
    let mean = sb.bandit().arm(action).mean_reward;
    ensure(mean == 3.0, || format!("action mean {mean}"))?;

    let mut bfs_fetcher = MapFetcher { pages: fetcher.pages.clone(), ..MapFetcher::default() };
    let bfs = crawl(&root_url, &cfg, &mut bfs_fetcher, LinkLabeler::<f64>::oracle(label), &mut QueuePolicy::bfs())
        .map_err(|e| e.to_string())?;
    traces.keep("reward/bfs", &bfs);
    let h2 = bfs.steps.iter().find(|s| s.url == format!("{root}h")).ok_or("bfs skipped /h")?;
    ensure(h2.reward == 3, || format!("bfs reward {}", h2.reward))?;
    Ok("12 links, 5 targets, 2 known: reward 3".into())
}

// 3 ----------------------------------------------------------------------

fn bandit_sanity() -> Outcome {
    let means = [0.9, 0.6, 0.4, 0.2, 0.1];
    let (mut best_awake, mut best_arm, mut total) = (0u64, 0u64, 0u64);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bandit = BanditState::<f64>::new(BanditConfig::default());
        for i in 0..means.len() {
            bandit.ensure(ActionId(i as u32));
        }
        for t in 1..=10_000u64 {
            let awake: Vec<bool> = (0..means.len()).map(|_| rng.gen_bool(0.9)).collect();
            if !awake.contains(&true) {
                continue;
            }
            let id = bandit.select(t, |a| awake[a.index()]).map_err(|e| e.to_string())?;
            let top = awake.iter().position(|&a| a).unwrap();
            total += 1;
            best_awake += (id.index() == top) as u64;
            best_arm += (id.index() == 0) as u64;
            let r = if rng.gen_bool(means[id.index()]) { 1.0 } else { 0.0 };
            bandit.reward(id, r).map_err(|e| e.to_string())?;
        }
    }
    let frac = best_awake as f64 / total as f64;
    let frac_arm0 = best_arm as f64 / total as f64;
    ensure(frac > 0.8, || format!("best awake arm pulled {frac:.3} of the time"))?;
    Ok(format!("best awake arm {frac:.3}, arm 0 overall {frac_arm0:.3}"))
}

// 4 ----------------------------------------------------------------------

fn incremental_means() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dim = 16;
    let mut space = ActionSpace::<f64>::exact(0.0);
    let mut history: Vec<Vec<f64>> = Vec::new();
    for _ in 0..1000 {
        let dense: Vec<f64> = (0..dim)
            .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..3.0) } else { 0.0 })
            .collect();
        let v = sbcrawl::ProjectedVectorF64::from_dense(&dense);
        if v.is_zero() {
            continue;
        }
        space.map_link(&v);
        history.push(dense);
    }
    ensure(space.len() == 1, || format!("theta 0 produced {} actions", space.len()))?;
    let c = space.actions()[0].centroid().to_dense();
    let mut worst = 0f64;
    for j in 0..dim {
        let batch = history.iter().map(|h| h[j]).sum::<f64>() / history.len() as f64;
        let rel = (c[j] - batch).abs() / batch.abs().max(1e-300);
        worst = worst.max(if batch == 0.0 { c[j].abs() } else { rel });
    }
    ensure(worst <= 1e-9, || format!("centroid relative error {worst:e}"))?;

    let mut arm = ArmStats::<f64>::default();
    let mut rewards = Vec::new();
    for _ in 0..1000 {
        let r = rng.gen_range(0..20) as f64;
        arm.record_pull();
        arm.update_reward(ActionId(0), r).map_err(|e| e.to_string())?;
        rewards.push(r);
    }
    let batch = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let rel = (arm.mean_reward - batch).abs() / batch;
    ensure(rel <= 1e-9, || format!("reward mean relative error {rel:e}"))?;
    Ok(format!("centroid err {worst:.1e}, reward err {rel:.1e} over {} members", history.len()))
}

// 5 ----------------------------------------------------------------------

const WORDS: &[&str] = &["alpha", "budget", "census", "delta", "energy", "forest", "growth", "harbor", "income", "jobs"];

fn corpus_url(rng: &mut ChaCha8Rng, target: bool) -> (Url, MimeClass) {
    let w = WORDS[rng.gen_range(0..WORDS.len())];
    let n: u32 = rng.gen_range(0..100_000);
    if target {
        let ext = ["csv", "xlsx", "json", "pdf"][rng.gen_range(0..4)];
        (Url::parse(&format!("http://corpus.example/files/{w}_{n}.{ext}")).unwrap(), MimeClass::Target)
    } else {
        let s = ["news", "blog", "about"][rng.gen_range(0..3)];
        (Url::parse(&format!("http://corpus.example/{s}/{w}-{n}.html")).unwrap(), MimeClass::Html)
    }
}

fn classifier_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut c = UrlClassifier::<f64>::new(ClassifierConfig::default());
    let mut heads = 0;
    while c.model().trained_batches() < 50 {
        let is_target = rng.gen_bool(0.3);
        let (url, truth) = corpus_url(&mut rng, is_target);
        let was_initial = c.in_initial_phase();
        let seen = c.labels_seen();
        let out = c.classify(&url, |_| {
            heads += 1;
            Some(truth)
        });
        ensure(out.probed == was_initial || (was_initial && !c.in_initial_phase()), || {
            "HEAD issued outside the initial phase".into()
        })?;
        if !out.probed {
            ensure(c.labels_seen() == seen, || "classification alone added a label".into())?;
            // the GET outcome is the only label source from here on
            let label = if truth == MimeClass::Target { UrlClass::Target } else { UrlClass::Html };
            c.record(&url, label);
        }
    }
    let after = c.labels_seen();
    let url = Url::parse("http://corpus.example/files/x.csv").unwrap();
    c.classify(&url, |_| panic!("HEAD after the initial phase"));
    ensure(c.labels_seen() == after, || "label accrued without a GET".into())?;

    let mut correct = 0;
    let n = 2000;
    for _ in 0..n {
        let is_target = rng.gen_bool(0.5);
        let (url, truth) = corpus_url(&mut rng, is_target);
        let label = c.predict(&url);
        ensure(matches!(label, UrlClass::Html | UrlClass::Target), || "label outside {HTML, Target}".into())?;
        let want = if truth == MimeClass::Target { UrlClass::Target } else { UrlClass::Html };
        correct += (label == want) as usize;
    }
    let acc = correct as f64 / n as f64;
    ensure(acc >= 0.95, || format!("held-out accuracy {acc:.3}"))?;
    Ok(format!("held-out accuracy {acc:.3} after 50 batches, {heads} HEADs"))
}

// 6, 7 -------------------------------------------------------------------

struct SiteRun {
    label: String,
    req90: HashMap<PolicyKind, Percent>,
}

fn run_site(site: &Site, seed: u64, traces: &mut Traces) -> Result<SiteRun, String> {
    let mut cfg = CrawlConfig::offline();
    cfg.seed = seed;
    let reference = sbcrawl::fixtures::walk(site.root(), &mut site.serve(), &cfg).map_err(|e| e.to_string())?;
    cfg.target_goal = Some(needed(reference.target_count, 0.9));
    let label = format!("{}#{}", site.spec.name, seed);
    let mut req90 = HashMap::new();
    for kind in PolicyKind::ALL {
        let trace = run_on_site::<f64>(site, kind, &cfg, ServeOptions::default()).map_err(|e| e.to_string())?;
        req90.insert(kind, requests_to_fraction(&trace, reference.target_count, reference.requests, 0.9));
        traces.keep(format!("{label}/{kind}"), &trace);
    }
    Ok(SiteRun { label, req90 })
}

fn simulator_runs(traces: &mut Traces) -> Result<Vec<SiteRun>, String> {
    let mut runs = Vec::new();
    for seed in 1..=15 {
        let site = generate_site(&SiteSpec::two_wings(seed, 5000)).map_err(|e| e.to_string())?;
        runs.push(run_site(&site, seed, traces)?);
    }
    Ok(runs)
}

fn superiority(runs: &[SiteRun]) -> Outcome {
    let two_wings: Vec<&SiteRun> = runs.iter().filter(|r| r.label.starts_with("two-wings")).collect();
    let wins = two_wings
        .iter()
        .filter(|r| {
            let sb = r.req90[&PolicyKind::Sb].rank();
            [PolicyKind::Bfs, PolicyKind::Dfs, PolicyKind::Random]
                .iter()
                .all(|k| sb < r.req90[k].rank())
        })
        .count();
    let med = |k: PolicyKind| median(two_wings.iter().map(|r| r.req90[&k].rank()).collect());
    let (sb, oracle) = (med(PolicyKind::Sb), med(PolicyKind::SbOracle));
    let detail = format!(
        "SB wins {wins}/{} seeds; median req90: sb {sb:.1}, sb-oracle {oracle:.1}, bfs {:.1}, dfs {:.1}, random {:.1}",
        two_wings.len(),
        med(PolicyKind::Bfs),
        med(PolicyKind::Dfs),
        med(PolicyKind::Random)
    );
    ensure(two_wings.len() == 15 && wins >= 12 && oracle <= sb, || detail.clone())?;
    Ok(detail)
}

fn omniscient_bound(runs: &[SiteRun]) -> Outcome {
    for r in runs {
        let omni = r.req90[&PolicyKind::Omniscient].rank();
        for (k, p) in &r.req90 {
            ensure(omni <= p.rank(), || format!("{}: omniscient {omni} > {k} {p}", r.label))?;
        }
    }
    Ok(format!("{} sites, every policy", runs.len()))
}

// 8 ----------------------------------------------------------------------

fn min_cover(m: usize, sets: &[Vec<usize>]) -> usize {
    let full: u32 = (1 << m) - 1;
    let masks: Vec<u32> = sets.iter().map(|s| s.iter().fold(0, |a, &e| a | 1 << e)).collect();
    (0u32..1 << sets.len())
        .filter(|&pick| {
            let cover = (0..sets.len()).filter(|i| pick >> i & 1 == 1).fold(0, |a, i| a | masks[i]);
            cover == full
        })
        .map(|pick| pick.count_ones() as usize)
        .min()
        .expect("instance is coverable")
}

fn reduction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 50 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=5);
        let sets: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let s: BTreeSet<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
                s.into_iter().collect()
            })
            .collect();
        let covered: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        if sets.iter().any(Vec::is_empty) || covered.len() < m {
            continue;
        }
        let b_star = min_cover(m, &sets);
        let inst = ReductionInstance { m, collection: sets.clone(), budget: b_star };
        let (graph, targets) = build_reduction(&inst).map_err(|e| e.to_string())?;
        let opt = optimal_crawl_bruteforce(&graph, &targets).map_err(|e| e.to_string())?;
        let want = (m + b_star + 1) as f64;
        ensure(opt.cost == want, || format!("m={m} sets={sets:?}: cost {} != {want}", opt.cost))?;
        checked += 1;
    }
    Ok(format!("{checked} instances, cost = m + B* + 1"))
}

// 9 ----------------------------------------------------------------------

fn early_stopping(traces: &mut Traces) -> Outcome {
    let params = EarlyStopParams { nu: 1000, epsilon: 0.2, gamma: 0.05, kappa: 15 };
    // μ_j = (1-γ)^j; first sub-threshold window j* = ceil(ln ε / ln(1-γ)).
    let j_star = ((0.2f64).ln() / (0.95f64).ln()).ceil() as u64;
    let expected = j_star + params.kappa as u64 - 1;
    let mut es = EarlyStopState::new(params);
    es.mu = 1.0;
    es.last_y = 500;
    let mut stopped_at = None;
    for j in 1..=200u64 {
        if es.step(500) {
            stopped_at = Some(j);
            break;
        }
    }
    ensure(stopped_at == Some(expected), || format!("stopped at {stopped_at:?}, expected {expected}"))?;

    let site = generate_site(&SiteSpec::two_wings(9, 3000)).map_err(|e| e.to_string())?;
    let mut cfg = CrawlConfig::offline();
    cfg.early_stop = true;
    cfg.seed = 9;
    let reference = sbcrawl::fixtures::walk(site.root(), &mut site.serve(), &cfg).map_err(|e| e.to_string())?;
    ensure(reference.requests < 15_000, || format!("site needs {} requests", reference.requests))?;
    for kind in [PolicyKind::Sb, PolicyKind::Bfs] {
        let trace = run_on_site::<f64>(&site, kind, &cfg, ServeOptions::default()).map_err(|e| e.to_string())?;
        ensure(trace.summary.stop != StopReason::EarlyStop, || format!("{kind} stopped early"))?;
        traces.keep(format!("early-stop/{kind}"), &trace);
    }
    Ok(format!("frozen trace stops at check {expected}; {}-request site runs to completion", reference.requests))
}

// 10 ---------------------------------------------------------------------

fn replay_once(dir: &std::path::Path, kind: PolicyKind) -> Result<CrawlTrace, String> {
    let manifest = Manifest::load(dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let root = Url::parse(&manifest.root).map_err(|e| e.to_string())?;
    let mut cfg = CrawlConfig::offline();
    cfg.seed = 7;
    let mut fetcher = replay_fetcher(dir.join(STORE_DIR)).map_err(|e| e.to_string())?;
    sbcrawl::experiment::run_policy::<f64>(kind, &root, &cfg, &mut fetcher, Default::default()).map_err(|e| e.to_string())
}

fn determinism(traces: &mut Traces) -> Outcome {
    let dir = fixture("mini");
    let mut lines = 0;
    for kind in [PolicyKind::Sb, PolicyKind::Random, PolicyKind::Focused] {
        let a = replay_once(&dir, kind)?;
        let b = replay_once(&dir, kind)?;
        let (ja, jb) = (a.to_jsonl(), b.to_jsonl());
        ensure(ja == jb, || format!("{kind} replays differ"))?;
        lines += ja.lines().count();
        traces.keep(format!("replay/{kind}"), &a);
    }
    Ok(format!("3 policies replayed twice, {lines} identical lines"))
}

// 11 ---------------------------------------------------------------------

fn invariants(traces: &Traces) -> Outcome {
    for (label, t) in &traces.0 {
        check_trace_invariants(t).map_err(|e| format!("{label}: {e}"))?;
    }
    Ok(format!("{} traces", traces.0.len()))
}

fn report(n: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let took = start.elapsed();
    let slow = budget.is_some_and(|b| took > b);
    let (status, detail) = match (&outcome, slow) {
        (Ok(d), false) => ("PASS", d.clone()),
        (Ok(d), true) => ("FAIL", format!("{d}; took {took:.1?}, limit {:?}", budget.unwrap())),
        (Err(e), _) => ("FAIL", e.clone()),
    };
    println!("criterion {n:>2} {status} {name}: {detail} [{took:.2?}]");
    status == "PASS"
}

fn main() {
    let mut traces = Traces::default();
    let mut ok = true;
    let secs = Duration::from_secs;
    ok &= report(1, "hash fidelity", Some(secs(1)), hash_fidelity);
    ok &= report(2, "reward semantics", Some(secs(1)), || reward_semantics(&mut traces));
    ok &= report(3, "bandit sanity", Some(secs(10)), bandit_sanity);
    ok &= report(4, "incremental means", Some(secs(5)), incremental_means);
    ok &= report(5, "classifier contract", Some(secs(10)), classifier_contract);

    let start = Instant::now();
    let runs = catch_unwind(AssertUnwindSafe(|| simulator_runs(&mut traces)))
        .unwrap_or_else(|_| Err("simulator runs panicked".into()));
    let sim_time = start.elapsed();
    let runs_ref = &runs;
    ok &= report(6, "simulator superiority", Some(secs(300)), move || {
        let runs = runs_ref.as_ref().map_err(Clone::clone)?;
        superiority(runs).map(|d| format!("{d}; runs took {sim_time:.1?}"))
    });
    ok &= report(7, "omniscient bound", None, || omniscient_bound(runs.as_ref().map_err(Clone::clone)?));
    ok &= report(8, "set-cover reduction", Some(secs(30)), reduction_equivalence);
    ok &= report(9, "early stopping", Some(secs(10)), || early_stopping(&mut traces));
    ok &= report(10, "replay determinism", Some(secs(30)), || determinism(&mut traces));
    ok &= report(11, "single-visit and budget invariants", None, || invariants(&traces));
    if !ok {
        std::process::exit(1);
    }
}
