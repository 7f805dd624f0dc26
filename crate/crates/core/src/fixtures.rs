//! Ground-truth manifests for recorded sites.
//!
//! A fixture directory holds:
//!
//! ```text
//! <fixture>/
//!   manifest.json   ground truth, see [`Manifest`]
//!   store/          a PageStore (journal.jsonl + bodies/)
//! ```
//!
//! The manifest is whatever an exhaustive breadth-first walk of the store
//! finds, so [`verify_fixture`] can always re-derive it.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::baselines::QueuePolicy;
use crate::classifier::MimeClass;
use crate::config::CrawlConfig;
use crate::engine::{crawl, CrawlTrace, EngineError, LinkLabeler};
use crate::experiment::Oracles;
use crate::fetch::{is_html_mime, FetchMode, Fetcher, ModeFetcher, Pacer, StatusClass};
use crate::graph::normalize;
use crate::store::{Method, PageStore, StoreError, StoreRecord};
use crate::tagpath::extract_links;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STORE_DIR: &str = "store";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("bad root url `{0}`")]
    Root(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestTarget {
    pub url: String,
    pub mime: String,
    /// Bytes received for it, headers included.
    pub bytes: u64,
    /// Link distance from the root in the walk's BFS tree.
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub root: String,
    /// HTML pages fetched successfully.
    pub pages: u64,
    pub target_count: u64,
    pub target_bytes: u64,
    pub nontarget_bytes: u64,
    /// GETs of the full walk; the denominator of request percentages.
    pub requests: u64,
    pub max_depth: u32,
    /// Sorted by URL.
    pub targets: Vec<ManifestTarget>,
}

impl Manifest {
    pub fn target_urls(&self) -> Vec<Url> {
        self.targets.iter().filter_map(|t| Url::parse(&t.url).ok()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FixtureError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Field-by-field differences, `expected` being `self`.
    pub fn diff(&self, found: &Manifest) -> Vec<String> {
        let mut out = Vec::new();
        macro_rules! field {
            ($f:ident) => {
                if self.$f != found.$f {
                    out.push(format!("{}: manifest has {:?}, walk found {:?}", stringify!($f), self.$f, found.$f));
                }
            };
        }
        field!(root);
        field!(pages);
        field!(target_count);
        field!(target_bytes);
        field!(nontarget_bytes);
        field!(requests);
        field!(max_depth);
        for t in &self.targets {
            match found.targets.iter().find(|f| f.url == t.url) {
                None => out.push(format!("targets[{}]: listed but not found", t.url)),
                Some(f) if f != t => out.push(format!("targets[{}]: manifest has {t:?}, walk found {f:?}", t.url)),
                Some(_) => {}
            }
        }
        for f in &found.targets {
            if !self.targets.iter().any(|t| t.url == f.url) {
                out.push(format!("targets[{}]: found but not listed", f.url));
            }
        }
        out
    }
}

/// Walk settings derived from `cfg`: unbounded, no early stop, no delay.
fn walk_config(cfg: &CrawlConfig) -> CrawlConfig {
    CrawlConfig {
        budget: None,
        target_goal: None,
        early_stop: false,
        politeness_delay: 0.0,
        ..cfg.clone()
    }
}

/// Exhaustive BFS crawl: every in-scope link is queued and fetched once.
pub fn walk_trace(root: &Url, fetcher: &mut dyn Fetcher, cfg: &CrawlConfig) -> Result<CrawlTrace, FixtureError> {
    let cfg = walk_config(cfg);
    let labeler: LinkLabeler<'_, f64> = LinkLabeler::oracle(|_: &Url| MimeClass::Html);
    Ok(crawl(root, &cfg, fetcher, labeler, &mut QueuePolicy::bfs())?)
}

pub fn manifest_from_trace(trace: &CrawlTrace) -> Manifest {
    let mut depth: HashMap<&str, u32> = HashMap::new();
    let mut targets = Vec::new();
    let mut pages = 0;
    let mut max_depth = 0;
    for s in &trace.steps {
        let d = s.parent.as_deref().and_then(|p| depth.get(p)).map_or(0, |d| d + 1);
        depth.insert(&s.url, d);
        max_depth = max_depth.max(d);
        if s.is_target {
            targets.push(ManifestTarget {
                url: s.url.clone(),
                mime: s.mime.clone().unwrap_or_default(),
                bytes: s.bytes_in,
                depth: d,
            });
        } else if s.status == 200 && s.mime.as_deref().is_some_and(is_html_mime) {
            pages += 1;
        }
    }
    targets.sort_by(|a, b| a.url.cmp(&b.url));
    Manifest {
        root: trace.summary.root.clone(),
        pages,
        target_count: targets.len() as u64,
        target_bytes: trace.summary.target_bytes,
        nontarget_bytes: trace.summary.nontarget_bytes,
        requests: trace.summary.gets + trace.summary.heads,
        max_depth,
        targets,
    }
}

pub fn walk(root: &Url, fetcher: &mut dyn Fetcher, cfg: &CrawlConfig) -> Result<Manifest, FixtureError> {
    Ok(manifest_from_trace(&walk_trace(root, fetcher, cfg)?))
}

/// Replay-only fetcher over a store directory.
pub fn replay_fetcher(store_dir: impl AsRef<Path>) -> Result<ModeFetcher, FixtureError> {
    let store = PageStore::open_read_only(store_dir)?;
    Ok(ModeFetcher::new(FetchMode::Replay, Some(store), None, Pacer::new(Default::default())))
}

/// Ground truth read back from a store, for policies that need oracles
/// when crawling a recorded site.
#[derive(Debug, Clone, Default)]
pub struct StoreTruth {
    classes: HashMap<String, MimeClass>,
    benefits: HashMap<String, u32>,
}

const MAX_REDIRECTS: usize = 10;

impl StoreTruth {
    pub fn new(store: &PageStore, cfg: &CrawlConfig) -> Self {
        let targets: HashSet<String> = cfg.target_mimes.iter().map(|m| m.trim().to_ascii_lowercase()).collect();
        let gets: HashMap<&str, &StoreRecord> = store
            .records()
            .iter()
            .filter(|r| r.method == Method::Get)
            .map(|r| (r.url.as_str(), r))
            .collect();
        let final_record = |url: &str| -> Option<&StoreRecord> {
            let mut cur = *gets.get(url)?;
            for _ in 0..MAX_REDIRECTS {
                if StatusClass::of(cur.status) != StatusClass::Redirect {
                    return Some(cur);
                }
                let next = Url::parse(&cur.url).ok()?.join(cur.location.as_deref()?).ok()?;
                cur = *gets.get(next.as_str())?;
            }
            None
        };
        let mut classes = HashMap::new();
        for url in gets.keys() {
            let class = match final_record(url) {
                Some(r) if StatusClass::of(r.status) == StatusClass::Success && !r.aborted => match r.mime.as_deref() {
                    Some(m) if is_html_mime(m) => MimeClass::Html,
                    Some(m) if targets.contains(m) => MimeClass::Target,
                    _ => MimeClass::Neither,
                },
                _ => MimeClass::Neither,
            };
            classes.insert(url.to_string(), class);
        }
        let tags: Vec<&str> = cfg.link_tags.iter().map(String::as_str).collect();
        let mut benefits = HashMap::new();
        for url in gets.keys() {
            let Some(r) = final_record(url) else { continue };
            if classes.get(*url) != Some(&MimeClass::Html) {
                continue;
            }
            let (Some(digest), Ok(base)) = (r.body.as_deref(), Url::parse(&r.url)) else { continue };
            let Ok(body) = store.read_body(digest) else { continue };
            let links: HashSet<Url> = extract_links(&body, &base, &tags).into_iter().map(|l| normalize(l.url)).collect();
            let n = links
                .iter()
                .filter(|u| classes.get(u.as_str()) == Some(&MimeClass::Target))
                .count();
            benefits.insert(url.to_string(), n as u32);
        }
        Self { classes, benefits }
    }

    /// True class of a recorded URL; unrecorded URLs are `Neither`.
    pub fn mime_class(&self, url: &Url) -> MimeClass {
        self.classes.get(url.as_str()).copied().unwrap_or(MimeClass::Neither)
    }

    pub fn benefit(&self, url: &Url) -> u32 {
        self.benefits.get(url.as_str()).copied().unwrap_or(0)
    }

    /// Recorded URLs whose final resource is a target, sorted.
    pub fn target_urls(&self) -> Vec<Url> {
        let mut v: Vec<Url> = self
            .classes
            .iter()
            .filter(|(_, c)| **c == MimeClass::Target)
            .filter_map(|(u, _)| Url::parse(u).ok())
            .collect();
        v.sort();
        v
    }

    pub fn oracles(&self, targets: Vec<Url>) -> Oracles<'_> {
        Oracles {
            mime: Some(Box::new(move |u: &Url| self.mime_class(u))),
            benefit: Some(Box::new(move |u: &Url| self.benefit(u))),
            targets: Some(targets),
        }
    }
}

/// Outcome of [`verify_fixture`]; empty `diffs` means the fixture is intact.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureReport {
    pub fixture: PathBuf,
    pub diffs: Vec<String>,
}

impl FixtureReport {
    pub fn is_ok(&self) -> bool {
        self.diffs.is_empty()
    }
}

impl std::fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "{}: ok", self.fixture.display());
        }
        writeln!(f, "{}: {} difference(s)", self.fixture.display(), self.diffs.len())?;
        for d in &self.diffs {
            writeln!(f, "  - {d}")?;
        }
        Ok(())
    }
}

/// Re-walks the fixture's store and compares with its manifest.
pub fn verify_fixture(dir: impl AsRef<Path>, cfg: &CrawlConfig) -> Result<FixtureReport, FixtureError> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir.join(MANIFEST_FILE))?;
    let root = Url::parse(&manifest.root).map_err(|_| FixtureError::Root(manifest.root.clone()))?;
    let mut fetcher = replay_fetcher(dir.join(STORE_DIR))?;
    let found = walk(&root, &mut fetcher, cfg)?;
    Ok(FixtureReport {
        fixture: dir.to_path_buf(),
        diffs: manifest.diff(&found),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_site, SiteSpec};

    #[test]
    fn walk_matches_site_ground_truth() {
        let site = generate_site(&SiteSpec::mini(4)).unwrap();
        let cfg = CrawlConfig::offline();
        let m = walk(site.root(), &mut site.serve(), &cfg).unwrap();
        let mut truth: Vec<String> = site.target_urls().iter().map(Url::to_string).collect();
        truth.sort();
        let listed: Vec<String> = m.targets.iter().map(|t| t.url.clone()).collect();
        assert_eq!(listed, truth);
        assert_eq!(m.pages, site.pages.len() as u64);
        assert_eq!(m.target_bytes, m.targets.iter().map(|t| t.bytes).sum::<u64>());
    }

    #[test]
    fn store_truth_matches_site() {
        let site = generate_site(&SiteSpec::mini(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = CrawlConfig::offline();
        let mut store = PageStore::open(dir.path()).unwrap();
        site.export(&mut store, &cfg.mime_blocklist()).unwrap();
        let truth = StoreTruth::new(&store, &cfg);
        for p in site.paths() {
            let u = site.url_of(p);
            assert_eq!(truth.mime_class(&u), site.mime_class(&u), "{u}");
            assert_eq!(truth.benefit(&u), site.benefit(&u), "{u}");
        }
    }

    #[test]
    fn diff_names_fields() {
        let site = generate_site(&SiteSpec::mini(4)).unwrap();
        let m = walk(site.root(), &mut site.serve(), &CrawlConfig::offline()).unwrap();
        let mut edited = m.clone();
        edited.pages += 1;
        edited.targets[0].bytes += 1;
        let d = edited.diff(&m);
        assert_eq!(d.len(), 2);
        assert!(d[0].starts_with("pages:"));
        assert!(d[1].starts_with(&format!("targets[{}]", m.targets[0].url)));
        assert!(m.diff(&m).is_empty());
    }
}
