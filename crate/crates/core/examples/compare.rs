//! Runs every policy on a generated two-wings site and prints
//! requests-to-90% per policy.
//!
//! `cargo run --release -p sbcrawl --example compare -- [seed] [pages]`

use std::time::Instant;

use sbcrawl::baselines::PolicyKind;
use sbcrawl::experiment::run_on_site;
use sbcrawl::fixtures::walk;
use sbcrawl::metrics::{needed, requests_to_fraction};
use sbcrawl::sim::{generate_site, ServeOptions, SiteSpec};
use sbcrawl::CrawlConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let pages: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let scattered = args.next().is_some_and(|s| s == "scattered");
    let spec = if scattered { SiteSpec::scattered(seed, pages) } else { SiteSpec::two_wings(seed, pages) };
    let site = generate_site(&spec).expect("valid spec");
    let mut cfg = CrawlConfig::offline();
    cfg.seed = seed;
    let reference = walk(site.root(), &mut site.serve(), &cfg).expect("walk");
    cfg.target_goal = Some(needed(reference.target_count, 0.9));
    println!("site: {} pages, {} targets, {} reference requests", site.pages.len(), reference.target_count, reference.requests);
    for kind in PolicyKind::ALL {
        let start = Instant::now();
        let trace = run_on_site::<f64>(&site, kind, &cfg, ServeOptions::default()).expect("run");
        let p = requests_to_fraction(&trace, reference.target_count, reference.requests, 0.9);
        println!(
            "{:<11} req90={:<22} gets={:<6} heads={:<6} actions={:<4} {:?}",
            kind.as_str(),
            p.to_string(),
            trace.summary.gets,
            trace.summary.heads,
            trace.summary.actions,
            start.elapsed()
        );
    }
}
