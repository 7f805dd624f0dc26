//! Writes `fixtures/hand`: a 20-resource site small enough to count by hand.
//!
//! Every response carries a 100-byte header. HTML bodies are padded to 400
//! bytes, target bodies are 1000 bytes, the 404 body is 1700 bytes.
//!
//! ```text
//! /      -> /files/t1.csv /files/t2.csv /a /b /c
//! /a     -> /files/t3.csv /files/t4.csv /files/t5.csv /a/1 /a/2
//! /b     -> /b/1 /b/2 /old (404) /stream (video/mp4)
//! /c     -> /c/1 /c/2 /go (301 -> /d)
//! /d     -> /d/1
//! leaves -> /
//! ```
//!
//! `cargo run -p sbcrawl --example build_hand_fixture -- fixtures/hand`

use std::path::PathBuf;

use sbcrawl::baselines::QueuePolicy;
use sbcrawl::engine::{crawl, LinkLabeler};
use sbcrawl::fetch::{FetchResponse, HeadResponse};
use sbcrawl::fixtures::{replay_fetcher, walk, StoreTruth, MANIFEST_FILE, STORE_DIR};
use sbcrawl::{CrawlConfig, PageStore};
use url::Url;

const ROOT: &str = "http://hand.example/";
const HEADER: u64 = 100;

fn page(links: &[&str]) -> Vec<u8> {
    let mut html = String::from("<html><body><ul>");
    for l in links {
        html.push_str(&format!("<li><a href=\"{l}\">{l}</a></li>"));
    }
    html.push_str("</ul></body></html>");
    assert!(html.len() <= 400, "page too long");
    let pad = 400 - html.len();
    html.insert_str(html.len() - "</body></html>".len(), &" ".repeat(pad));
    html.into_bytes()
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/hand".into()));
    let store_dir = out.join(STORE_DIR);
    std::fs::create_dir_all(&out).unwrap();
    let mut store = PageStore::open(&store_dir).unwrap();
    let root = Url::parse(ROOT).unwrap();
    let url = |p: &str| root.join(p).unwrap().to_string();

    let pages: [(&str, &[&str]); 12] = [
        ("/", &["/files/t1.csv", "/files/t2.csv", "/a", "/b", "/c"]),
        ("/a", &["/files/t3.csv", "/files/t4.csv", "/files/t5.csv", "/a/1", "/a/2"]),
        ("/b", &["/b/1", "/b/2", "/old", "/stream"]),
        ("/c", &["/c/1", "/c/2", "/go"]),
        ("/d", &["/d/1"]),
        ("/a/1", &["/"]),
        ("/a/2", &["/"]),
        ("/b/1", &["/"]),
        ("/b/2", &["/"]),
        ("/c/1", &["/"]),
        ("/c/2", &["/"]),
        ("/d/1", &["/"]),
    ];
    let head = |status, mime: Option<&str>| HeadResponse {
        status,
        mime: mime.map(str::to_string),
        header_size: HEADER,
    };
    for (p, links) in pages {
        store.put_get(&url(p), &FetchResponse::ok("text/html", page(links), HEADER), 0).unwrap();
        store.put_head(&url(p), &head(200, Some("text/html")), 0).unwrap();
    }
    for i in 1..=5 {
        let p = format!("/files/t{i}.csv");
        store.put_get(&url(&p), &FetchResponse::ok("text/csv", vec![b'x'; 1000], HEADER), 0).unwrap();
        store.put_head(&url(&p), &head(200, Some("text/csv")), 0).unwrap();
    }
    let missing = FetchResponse {
        status: 404,
        mime: Some("text/html".into()),
        body: vec![b' '; 1700],
        body_size: 1700,
        header_size: HEADER,
        ..FetchResponse::default()
    };
    store.put_get(&url("/old"), &missing, 0).unwrap();
    store.put_head(&url("/old"), &head(404, Some("text/html")), 0).unwrap();
    let stream = FetchResponse {
        status: 200,
        mime: Some("video/mp4".into()),
        header_size: HEADER,
        aborted: true,
        ..FetchResponse::default()
    };
    store.put_get(&url("/stream"), &stream, 0).unwrap();
    store.put_head(&url("/stream"), &head(200, Some("video/mp4")), 0).unwrap();
    store.put_get(&url("/go"), &FetchResponse::redirect(301, "/d", HEADER), 0).unwrap();
    store.put_head(&url("/go"), &head(301, None), 0).unwrap();
    drop(store);

    let cfg = CrawlConfig::offline();
    let manifest = walk(&root, &mut replay_fetcher(&store_dir).unwrap(), &cfg).unwrap();
    manifest.save(out.join(MANIFEST_FILE)).unwrap();

    // BFS with perfect link labels: no HEAD requests, so every step is
    // countable from the link lists above.
    let store = PageStore::open_read_only(&store_dir).unwrap();
    let truth = StoreTruth::new(&store, &cfg);
    let labeler: LinkLabeler<'_, f64> = LinkLabeler::oracle(|u: &Url| truth.mime_class(u));
    let trace = crawl(&root, &cfg, &mut replay_fetcher(&store_dir).unwrap(), labeler, &mut QueuePolicy::bfs()).unwrap();
    std::fs::create_dir_all(out.join("traces")).unwrap();
    trace.save(out.join("traces/bfs-oracle.jsonl")).unwrap();
    println!("{} requests, {} targets", manifest.requests, manifest.target_count);
}
