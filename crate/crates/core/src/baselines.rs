//! Comparison crawlers. They run inside the same [`CrawlSession`] as the
//! bandit crawler and only replace the frontier policy.
//!
//! [`CrawlSession`]: crate::engine::CrawlSession

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::action::{ActionId, ActionSpace};
use crate::classifier::{pair_id, LogisticModel, SparseFeatures, URL_FEATURE_DIM};
use crate::config::CrawlConfig;
use crate::engine::{Discovered, Policy, Pull, PullOutcome};
use crate::scalar::Scalar;
use crate::tagpath::TagPathVectorizer;

/// Policy selector used by the CLI and experiment harnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Sleeping bandit with the online URL classifier.
    Sb,
    /// Sleeping bandit with perfect URL labels.
    SbOracle,
    Random,
    Bfs,
    Dfs,
    Omniscient,
    Focused,
    TpOff,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        Self::Sb,
        Self::SbOracle,
        Self::Random,
        Self::Bfs,
        Self::Dfs,
        Self::Omniscient,
        Self::Focused,
        Self::TpOff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sb => "sb",
            Self::SbOracle => "sb-oracle",
            Self::Random => "random",
            Self::Bfs => "bfs",
            Self::Dfs => "dfs",
            Self::Omniscient => "omniscient",
            Self::Focused => "focused",
            Self::TpOff => "tp-off",
        }
    }

    /// Policies whose link labels come from an oracle rather than the
    /// online classifier.
    pub fn uses_oracle_labels(self) -> bool {
        matches!(self, Self::SbOracle)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown policy `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueOrder {
    /// First in, first out.
    Fifo,
    /// Last in, first out.
    Lifo,
    /// Uniform over pending links.
    Uniform,
}

/// RANDOM, BFS and DFS: a plain container of pending links.
#[derive(Debug, Clone)]
pub struct QueuePolicy {
    order: QueueOrder,
    queue: VecDeque<Pull>,
    urls: HashSet<Url>,
}

impl QueuePolicy {
    pub fn new(order: QueueOrder) -> Self {
        Self {
            order,
            queue: VecDeque::new(),
            urls: HashSet::new(),
        }
    }

    pub fn bfs() -> Self {
        Self::new(QueueOrder::Fifo)
    }

    pub fn dfs() -> Self {
        Self::new(QueueOrder::Lifo)
    }

    pub fn random() -> Self {
        Self::new(QueueOrder::Uniform)
    }
}

impl Policy for QueuePolicy {
    fn name(&self) -> String {
        match self.order {
            QueueOrder::Fifo => "bfs",
            QueueOrder::Lifo => "dfs",
            QueueOrder::Uniform => "random",
        }
        .to_string()
    }

    fn next(&mut self, _t: u64, rng: &mut ChaCha8Rng) -> Option<Pull> {
        let pull = match self.order {
            QueueOrder::Fifo => self.queue.pop_front(),
            QueueOrder::Lifo => self.queue.pop_back(),
            QueueOrder::Uniform => {
                if self.queue.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..self.queue.len());
                    self.queue.swap_remove_back(i)
                }
            }
        }?;
        self.urls.remove(&pull.url);
        Some(pull)
    }

    fn offer(&mut self, d: Discovered<'_>) -> bool {
        if !self.urls.insert(d.link.url.clone()) {
            return false;
        }
        self.queue.push_back(Pull {
            url: d.link.url.clone(),
            parent: Some(d.parent.clone()),
            action: None,
        });
        true
    }

    fn contains(&self, url: &Url) -> bool {
        self.urls.contains(url)
    }

    fn pending(&self) -> usize {
        self.queue.len()
    }
}

/// Knows every target URL in advance and fetches them directly after the
/// root. An upper bound, not a crawler.
#[derive(Debug, Clone)]
pub struct OmniscientPolicy {
    targets: VecDeque<Url>,
}

impl OmniscientPolicy {
    pub fn new(targets: impl IntoIterator<Item = Url>) -> Self {
        let mut seen = HashSet::new();
        Self {
            targets: targets.into_iter().filter(|u| seen.insert(u.clone())).collect(),
        }
    }
}

impl Policy for OmniscientPolicy {
    fn name(&self) -> String {
        "omniscient".into()
    }

    fn next(&mut self, _t: u64, _rng: &mut ChaCha8Rng) -> Option<Pull> {
        self.targets.pop_front().map(|url| Pull {
            url,
            parent: None,
            action: None,
        })
    }

    fn offer(&mut self, _d: Discovered<'_>) -> bool {
        false
    }

    fn contains(&self, url: &Url) -> bool {
        self.targets.contains(url)
    }

    fn pending(&self) -> usize {
        self.targets.len()
    }

    fn wants_links(&self) -> bool {
        false
    }
}

/// Total order on scalars for priority scans.
fn better<F: Scalar>(a: (F, u64), b: (F, u64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Feature layout of the focused crawler: `[ln(1 + depth)]`, then URL
/// character pairs, then anchor-text character pairs.
pub const FOCUSED_DIM: usize = 1 + 2 * URL_FEATURE_DIM;

pub fn focused_features<F: Scalar>(url: &Url, anchor: &str, source_depth: usize) -> SparseFeatures<F> {
    let mut out: HashMap<u32, F> = HashMap::new();
    let mut add = |base: u32, text: &str| {
        let chars: Vec<char> = text.chars().collect();
        for w in chars.windows(2) {
            let e = out.entry(base + pair_id(w[0], w[1])).or_insert(F::zero());
            *e = *e + F::one();
        }
    };
    add(1, url.as_str());
    add(1 + URL_FEATURE_DIM as u32, &anchor.to_lowercase());
    let mut v: SparseFeatures<F> = out.into_iter().collect();
    v.push((0, F::lit((1.0 + source_depth as f64).ln())));
    v.sort_unstable_by_key(|e| e.0);
    v
}

#[derive(Debug, Clone)]
struct Scored<F> {
    pull: Pull,
    features: SparseFeatures<F>,
    priority: F,
    seq: u64,
}

/// Classic focused crawler: a priority queue ordered by a logistic model's
/// probability that a link leads to target content, retrained from crawled
/// pages every `retrain_every` HTML pages.
#[derive(Debug, Clone)]
pub struct FocusedPolicy<F> {
    model: LogisticModel<F>,
    queue: Vec<Scored<F>>,
    urls: HashSet<Url>,
    seq: u64,
    in_flight: Option<SparseFeatures<F>>,
    examples: Vec<(SparseFeatures<F>, bool)>,
    html_pages: usize,
    retrain_every: usize,
}

impl<F: Scalar> FocusedPolicy<F> {
    pub fn new(cfg: &CrawlConfig) -> Self {
        Self {
            model: LogisticModel::new(FOCUSED_DIM, cfg.sgd()),
            queue: Vec::new(),
            urls: HashSet::new(),
            seq: 0,
            in_flight: None,
            examples: Vec::new(),
            html_pages: 0,
            retrain_every: cfg.focused_retrain_every.max(1),
        }
    }

    pub fn model(&self) -> &LogisticModel<F> {
        &self.model
    }

    pub fn priority(&self, features: &[(u32, F)]) -> F {
        self.model.probability(features)
    }

    /// Trains on the buffered examples and re-scores the queue.
    pub fn retrain(&mut self) {
        if self.examples.is_empty() {
            return;
        }
        let batch = std::mem::take(&mut self.examples);
        self.model.train_batch(&batch);
        for e in &mut self.queue {
            e.priority = self.model.probability(&e.features);
        }
    }

    /// Adds a labelled example directly (used by tests and warm starts).
    pub fn add_example(&mut self, features: SparseFeatures<F>, leads_to_target: bool) {
        self.examples.push((features, leads_to_target));
    }
}

impl<F: Scalar> Policy for FocusedPolicy<F> {
    fn name(&self) -> String {
        "focused".into()
    }

    fn next(&mut self, _t: u64, _rng: &mut ChaCha8Rng) -> Option<Pull> {
        let best = (0..self.queue.len()).reduce(|b, i| {
            let (x, y) = (&self.queue[i], &self.queue[b]);
            if better((x.priority, x.seq), (y.priority, y.seq)) {
                i
            } else {
                b
            }
        })?;
        let e = self.queue.swap_remove(best);
        self.urls.remove(&e.pull.url);
        self.in_flight = Some(e.features);
        Some(e.pull)
    }

    fn offer(&mut self, d: Discovered<'_>) -> bool {
        if !self.urls.insert(d.link.url.clone()) {
            return false;
        }
        let features = focused_features(&d.link.url, &d.link.anchor_text, d.parent_depth);
        let priority = self.model.probability(&features);
        self.queue.push(Scored {
            pull: Pull {
                url: d.link.url.clone(),
                parent: Some(d.parent.clone()),
                action: None,
            },
            features,
            priority,
            seq: self.seq,
        });
        self.seq += 1;
        true
    }

    fn contains(&self, url: &Url) -> bool {
        self.urls.contains(url)
    }

    fn pending(&self) -> usize {
        self.queue.len()
    }

    fn observe(&mut self, o: &PullOutcome<'_>) {
        if let Some(features) = self.in_flight.take() {
            self.examples.push((features, o.is_target || o.targets_found > 0));
        }
        if o.html {
            self.html_pages += 1;
            if self.html_pages.is_multiple_of(self.retrain_every) {
                self.retrain();
            }
        }
    }
}

/// Number of target links on the page behind a URL, as known to an oracle.
pub type BenefitOracle<'a> = Box<dyn Fn(&Url) -> u32 + 'a>;

#[derive(Debug, Clone)]
struct Group {
    benefit: f64,
    links: u64,
}

impl Group {
    fn mean(&self) -> f64 {
        if self.links == 0 {
            0.0
        } else {
            self.benefit / self.links as f64
        }
    }
}

/// Offline tag-path learner: a BFS bootstrap groups links by tag path and
/// scores groups with oracle benefits; afterwards only links matching a
/// known group are followed, best group first.
pub struct TpOffPolicy<'a, F> {
    vectorizer: TagPathVectorizer,
    space: ActionSpace<F>,
    groups: Vec<Group>,
    oracle: BenefitOracle<'a>,
    bootstrap_pages: u64,
    learning: bool,
    bfs: VecDeque<(Pull, ActionId)>,
    ranked: Vec<(Pull, f64, u64)>,
    urls: HashSet<Url>,
    seq: u64,
}

impl<'a, F: Scalar> TpOffPolicy<'a, F> {
    pub fn new(cfg: &CrawlConfig, oracle: BenefitOracle<'a>) -> Self {
        Self {
            vectorizer: TagPathVectorizer::new(cfg.n, cfg.hash_params()),
            space: ActionSpace::new(F::lit(cfg.theta), cfg.index_backend()),
            groups: Vec::new(),
            oracle,
            bootstrap_pages: cfg.tpoff_bootstrap_pages as u64,
            learning: true,
            bfs: VecDeque::new(),
            ranked: Vec::new(),
            urls: HashSet::new(),
            seq: 0,
        }
    }

    pub fn in_bootstrap(&self) -> bool {
        self.learning
    }

    /// Mean oracle benefit per group.
    pub fn group_means(&self) -> Vec<f64> {
        self.groups.iter().map(Group::mean).collect()
    }

    fn finish_bootstrap(&mut self) {
        self.learning = false;
        let queued: Vec<_> = self.bfs.drain(..).collect();
        for (pull, g) in queued {
            let mean = self.groups[g.index()].mean();
            self.ranked.push((pull, mean, self.seq));
            self.seq += 1;
        }
    }
}

impl<F: Scalar> Policy for TpOffPolicy<'_, F> {
    fn name(&self) -> String {
        "tp-off".into()
    }

    fn next(&mut self, t: u64, _rng: &mut ChaCha8Rng) -> Option<Pull> {
        if self.learning && t >= self.bootstrap_pages {
            self.finish_bootstrap();
        }
        let pull = if self.learning {
            self.bfs.pop_front()?.0
        } else {
            let best = (0..self.ranked.len()).reduce(|b, i| {
                let (x, y) = (&self.ranked[i], &self.ranked[b]);
                if x.1 > y.1 || (x.1 == y.1 && x.2 < y.2) {
                    i
                } else {
                    b
                }
            })?;
            self.ranked.swap_remove(best).0
        };
        self.urls.remove(&pull.url);
        Some(pull)
    }

    fn offer(&mut self, d: Discovered<'_>) -> bool {
        if self.urls.contains(&d.link.url) {
            return false;
        }
        let pull = Pull {
            url: d.link.url.clone(),
            parent: Some(d.parent.clone()),
            action: None,
        };
        if self.learning {
            let p = self.vectorizer.vectorize::<F>(&d.link.path);
            let g = self.space.map_link(&p).action;
            if g.index() >= self.groups.len() {
                self.groups.resize(g.index() + 1, Group { benefit: 0.0, links: 0 });
            }
            let grp = &mut self.groups[g.index()];
            grp.benefit += f64::from((self.oracle)(&d.link.url));
            grp.links += 1;
            self.bfs.push_back((Pull { action: Some(g), ..pull }, g));
        } else {
            let p = self.vectorizer.vectorize_frozen::<F>(&d.link.path);
            let Some(g) = self.space.lookup(&p) else {
                return false;
            };
            let mean = self.groups[g.index()].mean();
            self.ranked.push((Pull { action: Some(g), ..pull }, mean, self.seq));
            self.seq += 1;
        }
        self.urls.insert(d.link.url.clone());
        true
    }

    fn contains(&self, url: &Url) -> bool {
        self.urls.contains(url)
    }

    fn pending(&self) -> usize {
        self.bfs.len() + self.ranked.len()
    }

    fn action_count(&self) -> usize {
        self.groups.len()
    }
}
