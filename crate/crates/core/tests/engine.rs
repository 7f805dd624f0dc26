mod common;

use std::collections::HashMap;

use sbcrawl::baselines::QueuePolicy;
use sbcrawl::classifier::MimeClass;
use sbcrawl::engine::{crawl, StopReason, Trigger};
use sbcrawl::{CrawlConfig, CrawlTrace, LinkLabeler, SbPolicy, WeightMode};
use url::Url;

use common::{check_trace_invariants, MapFetcher, HEADER};

const ROOT: &str = "http://site.example/";

fn oracle_of(f: &MapFetcher) -> impl FnMut(&Url) -> MimeClass {
    let truth: HashMap<String, MimeClass> =
        f.pages.keys().map(|k| (k.clone(), f.mime_class(&Url::parse(k).unwrap()))).collect();
    move |u: &Url| truth.get(u.as_str()).copied().unwrap_or(MimeClass::Neither)
}

fn run_oracle(mut f: MapFetcher, cfg: &CrawlConfig) -> (CrawlTrace, MapFetcher) {
    let labeler = LinkLabeler::<f64>::oracle(oracle_of(&f));
    let t = crawl(&Url::parse(ROOT).unwrap(), cfg, &mut f, labeler, &mut SbPolicy::<f64>::new(cfg)).unwrap();
    check_trace_invariants(&t).unwrap();
    (t, f)
}

#[test]
fn star_site_costs_one_get_per_target_plus_root() {
    for k in [1usize, 4, 9] {
        let links: Vec<String> = (0..k).map(|i| format!("/d/{i}.csv")).collect();
        let refs: Vec<&str> = links.iter().map(String::as_str).collect();
        let mut b = MapFetcher::builder(ROOT).html("/", &refs);
        for l in &links {
            b = b.file(l, "text/csv", 10);
        }
        let (t, f) = run_oracle(b.build(), &CrawlConfig::offline());
        assert_eq!(t.summary.targets, k as u64);
        assert_eq!(f.gets.len(), k + 1);
        assert_eq!(t.summary.stop, StopReason::FrontierEmpty);
        assert!(t.steps[1..].iter().all(|s| s.trigger == Trigger::TargetLink));
    }
}

#[test]
fn zero_budget_stops_after_root() {
    let f = MapFetcher::builder(ROOT).html("/", &["/a", "/b"]).html("/a", &[]).html("/b", &[]).build();
    let mut cfg = CrawlConfig::offline();
    cfg.budget = Some(0.0);
    let (t, f) = run_oracle(f, &cfg);
    assert_eq!(f.gets, vec![ROOT.to_string()]);
    assert_eq!(t.summary.stop, StopReason::Budget);
}

#[test]
fn blocklisted_mime_is_aborted_without_reward() {
    let f = MapFetcher::builder(ROOT)
        .html("/", &["/watch"])
        .file("/watch", "video/mp4", 5_000_000)
        .build();
    // The oracle says Neither for video, so label it HTML by hand to force a GET.
    let mut cfg = CrawlConfig::offline();
    cfg.seed = 1;
    let mut fetcher = f;
    let labeler = LinkLabeler::<f64>::oracle(|_: &Url| MimeClass::Html);
    let t = crawl(&Url::parse(ROOT).unwrap(), &cfg, &mut fetcher, labeler, &mut QueuePolicy::bfs()).unwrap();
    let watch = t.steps.iter().find(|s| s.url.ends_with("/watch")).unwrap();
    assert!(watch.aborted);
    assert_eq!((watch.links, watch.reward, watch.is_target), (0, 0, false));
    assert!(watch.bytes_in < 5_000_000);
    check_trace_invariants(&t).unwrap();
}

#[test]
fn redirect_chain_is_followed_once() {
    let f = MapFetcher::builder(ROOT)
        .html("/", &["/a"])
        .redirect("/a", "/b")
        .redirect("/b", "/c")
        .html("/c", &["/files/x.csv", "/b"])
        .file("/files/x.csv", "text/csv", 10)
        .build();
    let (t, f) = run_oracle(f, &CrawlConfig::offline());
    let urls: Vec<&str> = t.steps.iter().map(|s| s.url.as_str()).collect();
    assert_eq!(
        urls,
        [ROOT, "http://site.example/a", "http://site.example/b", "http://site.example/c", "http://site.example/files/x.csv"]
    );
    assert_eq!(t.steps[2].trigger, Trigger::Redirect);
    assert_eq!(t.steps[3].trigger, Trigger::Redirect);
    assert_eq!(f.gets.len(), 5);
    assert_eq!(t.summary.beta, 5.0);
    // the pull of /a earns the reward of /c
    assert_eq!(t.steps[3].reward, 1);
}

#[test]
fn errors_yield_nothing() {
    let f = MapFetcher::builder(ROOT)
        .html("/", &["/gone", "/boom", "/ok"])
        .status("/gone", 404)
        .status("/boom", 500)
        .html("/ok", &["/files/a.csv"])
        .file("/files/a.csv", "text/csv", 10)
        .build();
    let (t, _) = run_oracle(f, &CrawlConfig::offline());
    for s in t.steps.iter().filter(|s| s.status >= 400) {
        assert_eq!((s.links, s.reward), (0, 0));
    }
    assert_eq!(t.summary.targets, 1);
}

#[test]
fn rewards_count_target_links_only() {
    // /p links to two targets; /q is a target reached as an ordinary page
    let f = MapFetcher::builder(ROOT)
        .html("/", &["/p", "/q"])
        .html("/p", &["/files/1.csv", "/files/2.csv", "/files/1.csv"])
        .file("/files/1.csv", "text/csv", 10)
        .file("/files/2.csv", "text/csv", 10)
        .file("/q", "text/csv", 10)
        .build();
    let mut fetcher = f;
    let labeler = LinkLabeler::<f64>::oracle(|u: &Url| {
        if u.path().starts_with("/files/") {
            MimeClass::Target
        } else {
            MimeClass::Html
        }
    });
    let cfg = CrawlConfig::offline();
    let t = crawl(&Url::parse(ROOT).unwrap(), &cfg, &mut fetcher, labeler, &mut QueuePolicy::bfs()).unwrap();
    check_trace_invariants(&t).unwrap();
    assert_eq!(t.summary.targets, 3);
    let by_link = t.steps.iter().filter(|s| s.trigger == Trigger::TargetLink).count() as u64;
    let rewarded: u64 = t.steps.iter().filter(|s| s.url != ROOT).map(|s| s.reward).sum();
    assert_eq!(by_link, 2);
    assert_eq!(rewarded, by_link);
    let q = t.steps.iter().find(|s| s.url.ends_with("/q")).unwrap();
    assert!(q.is_target);
    assert_eq!(q.reward, 0);
}

#[test]
fn classifier_heads_are_charged() {
    let mut b = MapFetcher::builder(ROOT);
    let mut links = Vec::new();
    for i in 0..30 {
        links.push(format!("/page/{i}"));
        links.push(format!("/files/{i}.csv"));
    }
    let refs: Vec<&str> = links.iter().map(String::as_str).collect();
    b = b.html("/", &refs);
    for i in 0..30 {
        b = b.html(&format!("/page/{i}"), &[]).file(&format!("/files/{i}.csv"), "text/csv", 10);
    }
    let mut f = b.build();
    for mode in [WeightMode::RequestCount, WeightMode::ByteVolume] {
        let mut cfg = CrawlConfig::offline();
        cfg.weight_mode = mode;
        f.gets.clear();
        f.heads.clear();
        let t = crawl(&Url::parse(ROOT).unwrap(), &cfg, &mut f, LinkLabeler::<f64>::classifier(&cfg), &mut QueuePolicy::bfs())
            .unwrap();
        check_trace_invariants(&t).unwrap();
        assert_eq!(t.summary.heads, f.heads.len() as u64);
        // GET outcomes share the first batch with HEAD labels
        assert!((1..=cfg.b as u64).contains(&t.summary.heads), "{} HEADs", t.summary.heads);
        let head_bytes: u64 = t.steps.iter().map(|s| s.head_bytes).sum();
        assert_eq!(head_bytes, t.summary.heads * HEADER);
        if mode == WeightMode::RequestCount {
            assert_eq!(t.summary.beta, (f.gets.len() + f.heads.len()) as f64);
        } else {
            assert!(t.summary.beta >= head_bytes as f64);
        }
    }
}

#[test]
fn first_discovery_fixes_the_action() {
    let f = MapFetcher::builder(ROOT)
        .html("/", &["/a", "/b"])
        .html("/a", &["/shared"])
        .html("/b", &["/shared"])
        .html("/shared", &[])
        .build();
    let (t, f) = run_oracle(f, &CrawlConfig::offline());
    assert_eq!(f.gets.iter().filter(|u| u.ends_with("/shared")).count(), 1);
    assert_eq!(t.steps.len(), 4);
}

#[test]
fn traces_round_trip_as_jsonl() {
    let f = MapFetcher::builder(ROOT).html("/", &["/a", "/files/x.csv"]).html("/a", &[]).file("/files/x.csv", "text/csv", 3).build();
    let (t, _) = run_oracle(f, &CrawlConfig::offline());
    let text = t.to_jsonl();
    let back = CrawlTrace::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back.to_jsonl(), text);
    assert_eq!(back.steps, t.steps);
}

#[test]
fn unreachable_root_gives_one_failed_step() {
    let mut f = MapFetcher::builder(ROOT).build();
    let cfg = CrawlConfig::offline();
    let t = crawl(&Url::parse(ROOT).unwrap(), &cfg, &mut f, LinkLabeler::<f64>::classifier(&cfg), &mut QueuePolicy::bfs())
        .unwrap();
    assert_eq!(t.steps.len(), 1);
    assert!(t.steps[0].status >= 400 || t.steps[0].status == 0);
}
