//! Budgeted crawl loop shared by every policy.
//!
//! A [`CrawlSession`] owns fetching, scope, blocklists, link labelling,
//! budget accounting and the trace. A [`Policy`] owns the frontier and
//! decides which pending URL to crawl next. The sleeping-bandit crawler is
//! [`SbPolicy`]; the baselines live in [`crate::baselines`].

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::action::{ActionId, ActionSpace};
use crate::bandit::BanditState;
use crate::classifier::{MimeClass, UrlClass, UrlClassifier};
use crate::config::{CrawlConfig, EarlyStopParams};
use crate::fetch::{is_html_mime, FetchResponse, Fetcher, HeadResponse, MimeBlocklist, StatusClass};
use crate::graph::{normalize, CrawlTree, Frontier, GraphError, PendingLink, Scope, WeightMode};
use crate::robots::Robots;
use crate::scalar::Scalar;
use crate::tagpath::{extract_links, ExtractedLink, TagPathVectorizer};

/// Nested target/redirect fetches deeper than this are queued instead.
const MAX_RECURSION: usize = 64;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("trace i/o: {0}")]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    TraceFormat { line: usize, source: serde_json::Error },
    #[error("trace has no end record")]
    TruncatedTrace,
}

/// Why a page was fetched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Root,
    Frontier,
    /// A link classified as target, fetched immediately.
    TargetLink,
    Redirect,
}

/// One GET.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub url: String,
    pub parent: Option<String>,
    pub action: Option<u32>,
    pub trigger: Trigger,
    pub status: u16,
    pub mime: Option<String>,
    pub aborted: bool,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// New links examined on this page.
    pub links: u32,
    /// HEAD requests issued while examining them.
    pub heads: u32,
    pub head_bytes: u64,
    /// Target-classified links followed from this page.
    pub reward: u64,
    pub is_target: bool,
    /// Targets retrieved so far, this page included.
    pub y: u64,
    pub target_bytes: u64,
    /// Non-target bytes so far (HEADs included), this page included.
    pub nontarget_bytes: u64,
    /// Budget spent when the GET completed.
    pub beta: f64,
    /// GET + HEAD requests so far.
    pub requests: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FrontierEmpty,
    Budget,
    EarlyStop,
    TargetGoal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub policy: String,
    pub root: String,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub steps: u64,
    pub gets: u64,
    pub heads: u64,
    pub beta: f64,
    pub targets: u64,
    pub target_bytes: u64,
    pub nontarget_bytes: u64,
    pub stop: StopReason,
    pub actions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Step(StepRecord),
    End(TraceSummary),
}

/// Ordered step records plus the closing summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CrawlTrace {
    pub steps: Vec<StepRecord>,
    pub summary: TraceSummary,
}

impl CrawlTrace {
    /// One JSON object per line: `{"kind":"step",...}` records, then a
    /// single `{"kind":"end",...}` summary.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut out, &TraceLine::Step(s.clone()))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &TraceLine::End(self.summary.clone()))?;
        out.write_all(b"\n")
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, EngineError> {
        let mut steps = Vec::new();
        let mut summary = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|source| EngineError::TraceFormat { line: n + 1, source })? {
                TraceLine::Step(s) => steps.push(s),
                TraceLine::End(s) => summary = Some(s),
            }
        }
        Ok(Self {
            steps,
            summary: summary.ok_or(EngineError::TruncatedTrace)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EngineError> {
        let file = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(io::BufReader::new(file))
    }

    /// Cumulative requests when the trace ends.
    pub fn total_requests(&self) -> u64 {
        self.summary.gets + self.summary.heads
    }
}

/// Slope-based early stopping, evaluated every `nu` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopState {
    pub params: EarlyStopParams,
    /// Exponential moving average of the slope.
    pub mu: f64,
    pub consecutive_low: u32,
    pub last_y: u64,
    pub checks: u64,
    pub stopped: bool,
}

impl EarlyStopState {
    pub fn new(params: EarlyStopParams) -> Self {
        Self {
            params,
            mu: 0.0,
            consecutive_low: 0,
            last_y: 0,
            checks: 0,
            stopped: false,
        }
    }

    /// One checkpoint with the current target count; returns the stop flag.
    pub fn step(&mut self, y: u64) -> bool {
        let p = self.params;
        let sigma = y.saturating_sub(self.last_y) as f64 / p.nu as f64;
        self.mu = p.gamma * sigma + (1.0 - p.gamma) * self.mu;
        self.last_y = y;
        self.checks += 1;
        if self.mu < p.epsilon {
            self.consecutive_low += 1;
        } else {
            self.consecutive_low = 0;
        }
        if self.consecutive_low >= p.kappa {
            self.stopped = true;
        }
        self.stopped
    }

    /// Feeds the checkpoint for step `t` if `t` is a multiple of `nu`.
    pub fn observe(&mut self, t: u64, y: u64) -> bool {
        if t > 0 && t.is_multiple_of(self.params.nu) {
            self.step(y);
        }
        self.stopped
    }
}

/// How newly discovered links are labelled.
#[allow(clippy::large_enum_variant)]
pub enum LinkLabeler<'a, F> {
    /// The online classifier with its HEAD bootstrap.
    Classifier(UrlClassifier<F>),
    /// Perfect knowledge of each URL's MIME class, at no request cost.
    Oracle(Box<dyn FnMut(&Url) -> MimeClass + 'a>),
}

impl<F> fmt::Debug for LinkLabeler<'_, F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Classifier(_) => f.write_str("LinkLabeler::Classifier"),
            Self::Oracle(_) => f.write_str("LinkLabeler::Oracle"),
        }
    }
}

impl<'a, F: Scalar> LinkLabeler<'a, F> {
    pub fn classifier(cfg: &CrawlConfig) -> Self {
        Self::Classifier(UrlClassifier::new(cfg.classifier()))
    }

    pub fn oracle(f: impl FnMut(&Url) -> MimeClass + 'a) -> Self {
        Self::Oracle(Box::new(f))
    }
}

/// A pending URL chosen by a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Pull {
    pub url: Url,
    pub parent: Option<Url>,
    pub action: Option<ActionId>,
}

/// A new HTML-classified link handed to the policy.
#[derive(Debug, Clone, Copy)]
pub struct Discovered<'a> {
    pub link: &'a ExtractedLink,
    pub parent: &'a Url,
    /// Depth of `parent` in the crawl tree (root = 0).
    pub parent_depth: usize,
    pub t: u64,
}

/// What came of a pull.
#[derive(Debug, Clone, Copy)]
pub struct PullOutcome<'a> {
    pub pull: &'a Pull,
    pub is_root: bool,
    pub reward: u64,
    /// The page (after redirects) was a target.
    pub is_target: bool,
    /// The page (after redirects) was HTML.
    pub html: bool,
    /// Target-classified links on the page that were real targets.
    pub targets_found: u64,
    pub t: u64,
}

/// Frontier ownership and next-URL choice.
pub trait Policy {
    fn name(&self) -> String;
    /// Next URL to crawl; `None` ends the crawl.
    fn next(&mut self, t: u64, rng: &mut ChaCha8Rng) -> Option<Pull>;
    /// Offers a new HTML-classified link; returns whether it was queued.
    fn offer(&mut self, link: Discovered<'_>) -> bool;
    /// Whether the URL is queued.
    fn contains(&self, url: &Url) -> bool;
    fn pending(&self) -> usize;
    fn observe(&mut self, _outcome: &PullOutcome<'_>) {}
    /// Whether pages should be mined for links at all.
    fn wants_links(&self) -> bool {
        true
    }
    /// Number of actions or groups, if the policy has any.
    fn action_count(&self) -> usize {
        0
    }
}

struct Visit {
    reward: u64,
    is_target: bool,
    html: bool,
    targets_found: u64,
}

fn has_blocklisted_extension(url: &Url, exts: &HashSet<String>) -> bool {
    let last = url.path().rsplit('/').next().unwrap_or("");
    match last.rfind('.') {
        Some(i) => exts.contains(&last[i..].to_ascii_lowercase()),
        None => false,
    }
}

fn request_bytes(method: &str, url: &Url, user_agent: &str) -> u64 {
    let target = &url[url::Position::BeforePath..url::Position::AfterQuery];
    format!(
        "{method} {target} HTTP/1.1\r\nHost: {}\r\nUser-Agent: {user_agent}\r\nAccept: */*\r\n\r\n",
        url.host_str().unwrap_or("")
    )
    .len() as u64
}

fn robots_path(url: &Url) -> &str {
    &url[url::Position::BeforePath..url::Position::AfterQuery]
}

/// Crawl state of one run.
pub struct CrawlSession<'c, 'f, 'l, F> {
    cfg: &'c CrawlConfig,
    fetcher: &'f mut dyn Fetcher,
    labeler: LinkLabeler<'l, F>,
    root: Url,
    scope: Scope,
    blocklist: MimeBlocklist,
    target_mimes: HashSet<String>,
    extensions: HashSet<String>,
    link_tags: Vec<String>,
    robots: Robots,
    tree: Option<CrawlTree>,
    t: u64,
    gets: u64,
    heads: u64,
    beta: f64,
    y: u64,
    target_bytes: u64,
    nontarget_bytes: u64,
    steps: Vec<StepRecord>,
    early: Option<EarlyStopState>,
    stop: Option<StopReason>,
    rng: ChaCha8Rng,
}

impl<'c, 'f, 'l, F: Scalar> CrawlSession<'c, 'f, 'l, F> {
    pub fn new(
        root: &Url,
        cfg: &'c CrawlConfig,
        fetcher: &'f mut dyn Fetcher,
        labeler: LinkLabeler<'l, F>,
    ) -> Result<Self, EngineError> {
        let root = normalize(root.clone());
        let scope = Scope::new(&root)?;
        Ok(Self {
            cfg,
            fetcher,
            labeler,
            scope,
            blocklist: cfg.mime_blocklist(),
            target_mimes: cfg.target_mimes.iter().map(|m| m.trim().to_ascii_lowercase()).collect(),
            extensions: cfg.extension_blocklist.iter().map(|e| e.to_ascii_lowercase()).collect(),
            link_tags: cfg.link_tags.clone(),
            robots: Robots::permissive(),
            tree: None,
            t: 0,
            gets: 0,
            heads: 0,
            beta: 0.0,
            y: 0,
            target_bytes: 0,
            nontarget_bytes: 0,
            steps: Vec::new(),
            early: cfg.early_stop.then(|| EarlyStopState::new(cfg.early_stop_params())),
            stop: None,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            root,
        })
    }

    pub fn labeler(&self) -> &LinkLabeler<'l, F> {
        &self.labeler
    }

    fn mime_class(&self, status: u16, mime: Option<&str>) -> Option<MimeClass> {
        if StatusClass::of(status) != StatusClass::Success {
            return None;
        }
        let mime = mime?;
        Some(if is_html_mime(mime) {
            MimeClass::Html
        } else if self.target_mimes.contains(mime) {
            MimeClass::Target
        } else {
            MimeClass::Neither
        })
    }

    fn get_cost(&self, resp: &FetchResponse) -> f64 {
        match self.cfg.weight_mode {
            WeightMode::RequestCount => 1.0,
            WeightMode::ByteVolume => resp.bytes_in() as f64,
        }
    }

    fn is_known(&self, url: &Url, policy: &dyn Policy) -> bool {
        self.tree.as_ref().is_some_and(|t| t.contains(url)) || policy.contains(url)
    }

    fn load_robots(&mut self) {
        if !self.cfg.respect_robots {
            return;
        }
        if let Ok(url) = self.root.join("/robots.txt") {
            let resp = self.fetcher.get(&url, &MimeBlocklist::none());
            if resp.class() == StatusClass::Success {
                self.robots = Robots::parse(&String::from_utf8_lossy(&resp.body), &self.cfg.user_agent);
            }
        }
    }

    fn allowed(&self, url: &Url) -> bool {
        self.robots.allowed(robots_path(url))
    }

    fn attach(&mut self, url: &Url, parent: Option<&Url>, cost: f64) {
        match (&mut self.tree, parent) {
            (None, _) => self.tree = Some(CrawlTree::new(url.clone(), cost)),
            (Some(tree), Some(p)) if tree.contains(p) => {
                let _ = tree.attach(url.clone(), p, cost);
            }
            (Some(tree), _) => {
                let root = tree.root().clone();
                let _ = tree.attach(url.clone(), &root, cost);
            }
        }
    }

    /// Fetches `url` and processes it; the body of the crawl recursion.
    fn visit(
        &mut self,
        policy: &mut dyn Policy,
        url: Url,
        parent: Option<&Url>,
        action: Option<ActionId>,
        trigger: Trigger,
        depth: usize,
    ) -> Visit {
        let mut out = Visit {
            reward: 0,
            is_target: false,
            html: false,
            targets_found: 0,
        };
        self.t += 1;
        let resp = self.fetcher.get(&url, &self.blocklist);
        self.gets += 1;
        let cost = self.get_cost(&resp);
        self.beta += cost;
        self.attach(&url, parent, cost);

        let class = if resp.aborted { None } else { self.mime_class(resp.status, resp.mime.as_deref()) };
        out.is_target = class == Some(MimeClass::Target);
        if out.is_target {
            self.y += 1;
            self.target_bytes += resp.bytes_in();
        } else {
            self.nontarget_bytes += resp.bytes_in();
        }
        let idx = self.steps.len();
        self.steps.push(StepRecord {
            t: self.t,
            url: url.to_string(),
            parent: parent.map(|p| p.to_string()),
            action: action.map(|a| a.0),
            trigger,
            status: resp.status,
            mime: resp.mime.clone(),
            aborted: resp.aborted,
            bytes_in: resp.bytes_in(),
            bytes_out: request_bytes("GET", &url, &self.cfg.user_agent),
            links: 0,
            heads: 0,
            head_bytes: 0,
            reward: 0,
            is_target: out.is_target,
            y: self.y,
            target_bytes: self.target_bytes,
            nontarget_bytes: self.nontarget_bytes,
            beta: self.beta,
            requests: self.gets + self.heads,
        });
        if let Some(es) = self.early.as_mut() {
            if es.observe(self.t, self.y) && self.stop.is_none() {
                self.stop = Some(StopReason::EarlyStop);
            }
        }
        if self.cfg.target_goal.is_some_and(|g| self.y >= g) && self.stop.is_none() {
            self.stop = Some(StopReason::TargetGoal);
        }

        if resp.aborted {
            return out;
        }
        let links = match resp.class() {
            StatusClass::Error => return out,
            StatusClass::Redirect => {
                let next = resp
                    .location
                    .as_deref()
                    .and_then(|l| crate::graph::resolve(&url, l))
                    .map(normalize);
                if let Some(next) = next {
                    if self.scope.contains(&next)
                        && !self.is_known(&next, policy)
                        && self.allowed(&next)
                        && depth < MAX_RECURSION
                    {
                        return self.visit(policy, next, Some(&url), action, Trigger::Redirect, depth + 1);
                    }
                }
                return out;
            }
            StatusClass::Success => match class {
                Some(MimeClass::Html) => {
                    out.html = true;
                    if let LinkLabeler::Classifier(c) = &mut self.labeler {
                        c.record(&url, UrlClass::Html);
                    }
                    if !policy.wants_links() {
                        return out;
                    }
                    let tags: Vec<&str> = self.link_tags.iter().map(String::as_str).collect();
                    extract_links(&resp.body, &url, &tags)
                }
                Some(MimeClass::Target) => {
                    if let LinkLabeler::Classifier(c) = &mut self.labeler {
                        c.record(&url, UrlClass::Target);
                    }
                    return out;
                }
                _ => return out,
            },
        };
        drop(resp);

        let parent_depth = self.tree.as_ref().and_then(|t| t.depth_of(&url)).unwrap_or(0);
        let mut seen: HashSet<Url> = HashSet::new();
        let (mut examined, mut heads, mut head_bytes) = (0u32, 0u32, 0u64);
        for mut link in links {
            link.url = normalize(link.url);
            if !seen.insert(link.url.clone())
                || !self.scope.contains(&link.url)
                || self.is_known(&link.url, policy)
            {
                continue;
            }
            if has_blocklisted_extension(&link.url, &self.extensions) || !self.allowed(&link.url) {
                continue;
            }
            examined += 1;
            let label = match &mut self.labeler {
                LinkLabeler::Classifier(c) => {
                    let fetcher = &mut *self.fetcher;
                    let mut head: Option<HeadResponse> = None;
                    let got = c.classify(&link.url, |u| {
                        let h = fetcher.head(u);
                        head = Some(h.clone());
                        let class = if StatusClass::of(h.status) == StatusClass::Success {
                            h.mime.as_deref().map(|m| {
                                if is_html_mime(m) {
                                    MimeClass::Html
                                } else if self.target_mimes.contains(m) {
                                    MimeClass::Target
                                } else {
                                    MimeClass::Neither
                                }
                            })
                        } else {
                            None
                        };
                        class
                    });
                    if let Some(h) = head {
                        self.heads += 1;
                        heads += 1;
                        head_bytes += h.header_size;
                        self.nontarget_bytes += h.header_size;
                        self.beta += match self.cfg.weight_mode {
                            WeightMode::RequestCount => 1.0,
                            WeightMode::ByteVolume => h.header_size as f64,
                        };
                    }
                    got.label
                }
                LinkLabeler::Oracle(f) => match f(&link.url) {
                    MimeClass::Html => UrlClass::Html,
                    MimeClass::Target => UrlClass::Target,
                    MimeClass::Neither => continue,
                },
            };
            match label {
                UrlClass::Target if depth < MAX_RECURSION => {
                    let sub = self.visit(policy, link.url.clone(), Some(&url), None, Trigger::TargetLink, depth + 1);
                    out.reward += 1;
                    out.targets_found += u64::from(sub.is_target);
                }
                _ => {
                    policy.offer(Discovered {
                        link: &link,
                        parent: &url,
                        parent_depth,
                        t: self.t,
                    });
                }
            }
        }
        let rec = &mut self.steps[idx];
        rec.links = examined;
        rec.heads = heads;
        rec.head_bytes = head_bytes;
        rec.reward = out.reward;
        out
    }

    fn over_budget(&self) -> bool {
        self.cfg.budget.is_some_and(|b| self.beta > b)
    }

    /// Runs the crawl to completion.
    pub fn run(mut self, policy: &mut dyn Policy) -> CrawlTrace {
        self.load_robots();
        let root_pull = Pull {
            url: self.root.clone(),
            parent: None,
            action: None,
        };
        let v = self.visit(policy, root_pull.url.clone(), None, None, Trigger::Root, 0);
        policy.observe(&PullOutcome {
            pull: &root_pull,
            is_root: true,
            reward: v.reward,
            is_target: v.is_target,
            html: v.html,
            targets_found: v.targets_found,
            t: self.t,
        });
        let stop = loop {
            if let Some(s) = self.stop {
                break s;
            }
            if self.over_budget() {
                break StopReason::Budget;
            }
            let Some(pull) = policy.next(self.t, &mut self.rng) else {
                break StopReason::FrontierEmpty;
            };
            if self.tree.as_ref().is_some_and(|t| t.contains(&pull.url)) {
                continue;
            }
            let v = self.visit(policy, pull.url.clone(), pull.parent.as_ref(), pull.action, Trigger::Frontier, 0);
            policy.observe(&PullOutcome {
                pull: &pull,
                is_root: false,
                reward: v.reward,
                is_target: v.is_target,
                html: v.html,
                targets_found: v.targets_found,
                t: self.t,
            });
        };
        CrawlTrace {
            summary: TraceSummary {
                policy: policy.name(),
                root: self.root.to_string(),
                seed: self.cfg.seed,
                weight_mode: self.cfg.weight_mode,
                steps: self.t,
                gets: self.gets,
                heads: self.heads,
                beta: self.beta,
                targets: self.y,
                target_bytes: self.target_bytes,
                nontarget_bytes: self.nontarget_bytes,
                stop,
                actions: policy.action_count(),
            },
            steps: self.steps,
        }
    }
}

/// Convenience wrapper: one crawl from `root` with `policy`.
pub fn crawl<F: Scalar>(
    root: &Url,
    cfg: &CrawlConfig,
    fetcher: &mut dyn Fetcher,
    labeler: LinkLabeler<'_, F>,
    policy: &mut dyn Policy,
) -> Result<CrawlTrace, EngineError> {
    Ok(CrawlSession::new(root, cfg, fetcher, labeler)?.run(policy))
}

/// The sleeping-bandit crawler: links are grouped into actions by tag-path
/// similarity and actions are chosen by the awake upper-estimated reward.
pub struct SbPolicy<F> {
    vectorizer: TagPathVectorizer,
    actions: ActionSpace<F>,
    bandit: BanditState<F>,
    frontier: Frontier,
    label: String,
}

impl<F: Scalar> SbPolicy<F> {
    pub fn new(cfg: &CrawlConfig) -> Self {
        Self {
            vectorizer: TagPathVectorizer::new(cfg.n, cfg.hash_params()),
            actions: ActionSpace::new(F::lit(cfg.theta), cfg.index_backend()),
            bandit: BanditState::new(cfg.bandit()),
            frontier: Frontier::new(),
            label: "sb".to_string(),
        }
    }

    /// Overrides the name written to traces (e.g. `sb-oracle`).
    pub fn named(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn actions(&self) -> &ActionSpace<F> {
        &self.actions
    }

    pub fn bandit(&self) -> &BanditState<F> {
        &self.bandit
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }
}

impl<F: Scalar> Policy for SbPolicy<F> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn next(&mut self, t: u64, rng: &mut ChaCha8Rng) -> Option<Pull> {
        if self.frontier.is_empty() {
            return None;
        }
        let link = if self.actions.is_empty() {
            self.frontier.pop_any(rng).ok()?
        } else {
            let frontier = &self.frontier;
            let a = self.bandit.select(t, |a| frontier.is_awake(a)).ok()?;
            self.frontier.pop(a, rng).ok()?
        };
        Some(Pull {
            url: link.url,
            parent: Some(link.parent),
            action: Some(link.action),
        })
    }

    fn offer(&mut self, d: Discovered<'_>) -> bool {
        let p = self.vectorizer.vectorize::<F>(&d.link.path);
        let m = self.actions.map_link(&p);
        self.bandit.ensure(m.action);
        self.frontier
            .push(PendingLink {
                url: d.link.url.clone(),
                parent: d.parent.clone(),
                action: m.action,
                discovered_at: d.t,
            })
            .is_ok()
    }

    fn contains(&self, url: &Url) -> bool {
        self.frontier.contains(url)
    }

    fn pending(&self) -> usize {
        self.frontier.len()
    }

    fn observe(&mut self, o: &PullOutcome<'_>) {
        if o.is_root {
            return;
        }
        if let Some(a) = o.pull.action {
            let _ = self.bandit.reward(a, F::count(o.reward));
        }
    }

    fn action_count(&self) -> usize {
        self.actions.len()
    }
}
