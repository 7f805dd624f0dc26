//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use sbcrawl::classifier::MimeClass;
use sbcrawl::fetch::{FetchResponse, Fetcher, HeadResponse, MimeBlocklist};
use sbcrawl::{CrawlTrace, WeightMode};
use url::Url;

pub const HEADER: u64 = 100;

/// In-memory site keyed by absolute URL.
#[derive(Default)]
pub struct MapFetcher {
    pub pages: HashMap<String, FetchResponse>,
    pub gets: Vec<String>,
    pub heads: Vec<String>,
}

impl MapFetcher {
    pub fn builder(root: &str) -> Builder {
        Builder {
            root: Url::parse(root).unwrap(),
            fetcher: MapFetcher::default(),
        }
    }

    /// True class of a URL, following redirects.
    pub fn mime_class(&self, url: &Url) -> MimeClass {
        let mut url = url.clone();
        for _ in 0..10 {
            match self.pages.get(url.as_str()).and_then(|r| r.location.as_deref()) {
                Some(loc) => url = url.join(loc).unwrap(),
                None => break,
            }
        }
        match self.pages.get(url.as_str()).filter(|r| r.status < 300).and_then(|r| r.mime.as_deref()) {
            Some("text/html") => MimeClass::Html,
            Some(m) if m.starts_with("text/csv") || m.starts_with("application/") => MimeClass::Target,
            _ => MimeClass::Neither,
        }
    }
}

pub struct Builder {
    root: Url,
    fetcher: MapFetcher,
}

impl Builder {
    fn url(&self, path: &str) -> String {
        self.root.join(path).unwrap().to_string()
    }

    pub fn html(mut self, path: &str, links: &[&str]) -> Self {
        let mut body = String::from("<html><body><ul>");
        for l in links {
            body.push_str(&format!("<li><a href=\"{l}\">{l}</a></li>"));
        }
        body.push_str("</ul></body></html>");
        let url = self.url(path);
        self.fetcher
            .pages
            .insert(url, FetchResponse::ok("text/html", body.into_bytes(), HEADER));
        self
    }

    /// HTML page with a hand-written body.
    pub fn raw(mut self, path: &str, body: &str) -> Self {
        let url = self.url(path);
        self.fetcher
            .pages
            .insert(url, FetchResponse::ok("text/html", body.as_bytes().to_vec(), HEADER));
        self
    }

    pub fn file(mut self, path: &str, mime: &str, size: usize) -> Self {
        let url = self.url(path);
        self.fetcher.pages.insert(url, FetchResponse::ok(mime, vec![b'x'; size], HEADER));
        self
    }

    pub fn redirect(mut self, path: &str, to: &str) -> Self {
        let url = self.url(path);
        self.fetcher.pages.insert(url, FetchResponse::redirect(301, to, HEADER));
        self
    }

    pub fn status(mut self, path: &str, status: u16) -> Self {
        let url = self.url(path);
        let resp = FetchResponse {
            status,
            mime: Some("text/html".into()),
            header_size: HEADER,
            ..FetchResponse::default()
        };
        self.fetcher.pages.insert(url, resp);
        self
    }

    pub fn build(self) -> MapFetcher {
        self.fetcher
    }
}

impl Fetcher for MapFetcher {
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse {
        self.gets.push(url.to_string());
        match self.pages.get(url.as_str()) {
            Some(r) if r.mime.as_deref().is_some_and(|m| blocklist.matches(m)) => FetchResponse {
                body: Vec::new(),
                body_size: 0,
                aborted: true,
                ..r.clone()
            },
            Some(r) => r.clone(),
            None => FetchResponse {
                status: 404,
                header_size: HEADER,
                ..FetchResponse::default()
            },
        }
    }

    fn head(&mut self, url: &Url) -> HeadResponse {
        self.heads.push(url.to_string());
        match self.pages.get(url.as_str()) {
            Some(r) => HeadResponse {
                status: r.status,
                mime: r.mime.clone(),
                header_size: HEADER,
            },
            None => HeadResponse {
                status: 404,
                mime: None,
                header_size: HEADER,
            },
        }
    }
}

/// Single-visit and request-count budget invariants; `Err` names the first
/// violation.
pub fn check_trace_invariants(trace: &CrawlTrace) -> Result<(), String> {
    let mut seen = HashSet::new();
    let mut heads = 0u64;
    let (mut last_y, mut last_beta, mut last_requests) = (0u64, 0f64, 0u64);
    for s in &trace.steps {
        if !seen.insert(s.url.as_str()) {
            return Err(format!("duplicate GET of {}", s.url));
        }
        heads += s.heads as u64;
        if s.y < last_y || s.beta < last_beta || s.requests < last_requests {
            return Err(format!("non-monotone step {}", s.t));
        }
        (last_y, last_beta, last_requests) = (s.y, s.beta, s.requests);
    }
    let sum = &trace.summary;
    if sum.gets != trace.steps.len() as u64 {
        return Err(format!("{} GETs in summary, {} steps", sum.gets, trace.steps.len()));
    }
    if sum.heads != heads {
        return Err(format!("{} HEADs in summary, {} in steps", sum.heads, heads));
    }
    if sum.weight_mode == WeightMode::RequestCount && sum.beta != (sum.gets + sum.heads) as f64 {
        return Err(format!("beta {} != GET {} + HEAD {}", sum.beta, sum.gets, sum.heads));
    }
    let stored = trace.steps.iter().filter(|s| s.is_target).count() as u64;
    if sum.targets != stored {
        return Err(format!("y = {} but {} target steps", sum.targets, stored));
    }
    Ok(())
}

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    workspace_root().join("fixtures").join(name)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
