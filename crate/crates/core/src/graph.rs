//! Website-graph domain model: URL identity, scope membership, the crawl
//! tree, and the action-grouped frontier shared by the crawlers.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::action::ActionId;
use crate::tagpath::TagPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed url `{0}`")]
    MalformedUrl(String),
    #[error("url `{0}` has no hostname")]
    NoHost(String),
    #[error("`{0}` is already part of the crawl")]
    AlreadyVisited(Url),
    #[error("parent `{0}` is not part of the crawl")]
    UnknownParent(Url),
    #[error("action {0} has no pending links")]
    ActionAsleep(ActionId),
    #[error("frontier is empty")]
    EmptyFrontier,
    #[error("`{0}` is already pending in the frontier")]
    AlreadyPending(Url),
    #[error("`{url}` is outside the scope of `{root}`")]
    OutOfScope { url: Url, root: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// How node weights ω(u) are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// One unit per HTTP request.
    #[default]
    RequestCount,
    /// Bytes received.
    ByteVolume,
}

/// Parses and canonicalizes an absolute http(s) URL.
pub fn parse_url(s: &str) -> Result<Url, GraphError> {
    let url = Url::parse(s.trim()).map_err(|_| GraphError::MalformedUrl(s.to_string()))?;
    if url.host_str().is_none() {
        return Err(GraphError::NoHost(s.to_string()));
    }
    Ok(normalize(url))
}

/// Canonical form used for identity checks: the `url` crate already lowercases
/// scheme and host and drops default ports; the fragment is removed here.
pub fn normalize(mut url: Url) -> Url {
    url.set_fragment(None);
    url
}

/// Resolves `href` against `base`, keeping only http(s) results.
pub fn resolve(base: &Url, href: &str) -> Option<Url> {
    let href = href.trim();
    if href.is_empty() {
        return None;
    }
    let joined = base.join(href).ok()?;
    match joined.scheme() {
        "http" | "https" if joined.host_str().is_some() => Some(normalize(joined)),
        _ => None,
    }
}

/// Hostname with one leading `www.` label removed.
pub fn site_host(url: &Url) -> Result<String, GraphError> {
    let host = url
        .host_str()
        .ok_or_else(|| GraphError::NoHost(url.to_string()))?
        .to_ascii_lowercase();
    Ok(match host.strip_prefix("www.") {
        Some(rest) if !rest.is_empty() => rest.to_string(),
        _ => host,
    })
}

fn host_within(candidate: &str, root: &str) -> bool {
    candidate == root
        || (candidate.len() > root.len()
            && candidate.ends_with(root)
            && candidate.as_bytes()[candidate.len() - root.len() - 1] == b'.')
}

/// Whether `candidate` belongs to the website rooted at `root`: its host
/// (minus a leading `www.`) equals the root's or is a subdomain of it,
/// compared on whole labels.
pub fn in_scope(candidate: &str, root: &str) -> Result<bool, GraphError> {
    let c = parse_url(candidate)?;
    let r = parse_url(root)?;
    Ok(host_within(&site_host(&c)?, &site_host(&r)?))
}

/// Pre-computed scope test for one root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    host: String,
}

impl Scope {
    pub fn new(root: &Url) -> Result<Self, GraphError> {
        Ok(Self {
            host: site_host(root)?,
        })
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn contains(&self, url: &Url) -> bool {
        match site_host(url) {
            Ok(h) => host_within(&h, &self.host),
            Err(_) => false,
        }
    }
}

/// An r-rooted tree of crawled URLs with accumulated cost.
#[derive(Debug, Clone)]
pub struct CrawlTree {
    root: Url,
    parent: HashMap<Url, Option<Url>>,
    order: Vec<Url>,
    total_cost: f64,
}

impl CrawlTree {
    pub fn new(root: Url, root_cost: f64) -> Self {
        let mut parent = HashMap::new();
        parent.insert(root.clone(), None);
        Self {
            order: vec![root.clone()],
            root,
            parent,
            total_cost: root_cost,
        }
    }

    pub fn attach(&mut self, child: Url, parent: &Url, cost: f64) -> Result<(), GraphError> {
        if self.parent.contains_key(&child) {
            return Err(GraphError::AlreadyVisited(child));
        }
        if !self.parent.contains_key(parent) {
            return Err(GraphError::UnknownParent(parent.clone()));
        }
        self.parent.insert(child.clone(), Some(parent.clone()));
        self.order.push(child);
        self.total_cost += cost;
        Ok(())
    }

    /// Adds cost that is not tied to a new node (HEAD probes, retried bytes).
    pub fn add_cost(&mut self, cost: f64) {
        self.total_cost += cost;
    }

    pub fn root(&self) -> &Url {
        &self.root
    }

    pub fn contains(&self, url: &Url) -> bool {
        self.parent.contains_key(url)
    }

    pub fn parent_of(&self, url: &Url) -> Option<&Url> {
        self.parent.get(url).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> &[Url] {
        &self.order
    }

    /// Number of edges from the root to `url`.
    pub fn depth_of(&self, url: &Url) -> Option<usize> {
        let mut depth = 0;
        let mut cur = self.parent.get(url)?;
        while let Some(p) = cur {
            depth += 1;
            cur = self.parent.get(p)?;
        }
        Some(depth)
    }

    /// Checks the rooted-tree invariants: single root, every parent present,
    /// no cycles.
    pub fn is_valid_tree(&self) -> bool {
        if self.parent.get(&self.root) != Some(&None) {
            return false;
        }
        let n = self.parent.len();
        self.parent.keys().all(|u| {
            let mut cur = u;
            for _ in 0..=n {
                match self.parent.get(cur) {
                    Some(None) => return cur == &self.root,
                    Some(Some(p)) => cur = p,
                    None => return false,
                }
            }
            false
        })
    }
}

/// A hyperlink waiting in the frontier, filed under the action it mapped to.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingLink {
    pub url: Url,
    pub parent: Url,
    pub action: ActionId,
    pub discovered_at: u64,
}

/// Discovered-but-unvisited links grouped by action.
#[derive(Debug, Clone, Default)]
pub struct Frontier {
    by_action: BTreeMap<ActionId, Vec<PendingLink>>,
    urls: HashSet<Url>,
}

impl Frontier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, link: PendingLink) -> Result<(), GraphError> {
        if !self.urls.insert(link.url.clone()) {
            return Err(GraphError::AlreadyPending(link.url));
        }
        self.by_action.entry(link.action).or_default().push(link);
        Ok(())
    }

    /// Removes a uniformly random pending link of `action`.
    pub fn pop<R: Rng + ?Sized>(
        &mut self,
        action: ActionId,
        rng: &mut R,
    ) -> Result<PendingLink, GraphError> {
        let links = match self.by_action.get_mut(&action) {
            Some(l) if !l.is_empty() => l,
            _ => return Err(GraphError::ActionAsleep(action)),
        };
        let idx = rng.gen_range(0..links.len());
        let link = links.swap_remove(idx);
        self.urls.remove(&link.url);
        Ok(link)
    }

    /// Removes a uniformly random link regardless of action.
    pub fn pop_any<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PendingLink, GraphError> {
        if self.urls.is_empty() {
            return Err(GraphError::EmptyFrontier);
        }
        let mut idx = rng.gen_range(0..self.urls.len());
        let action = self
            .by_action
            .iter()
            .find_map(|(a, links)| {
                if idx < links.len() {
                    Some(*a)
                } else {
                    idx -= links.len();
                    None
                }
            })
            .expect("url index matches pending sets");
        let links = self.by_action.get_mut(&action).expect("present");
        let link = links.swap_remove(idx);
        self.urls.remove(&link.url);
        Ok(link)
    }

    pub fn contains(&self, url: &Url) -> bool {
        self.urls.contains(url)
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn pending(&self, action: ActionId) -> usize {
        self.by_action.get(&action).map_or(0, Vec::len)
    }

    pub fn is_awake(&self, action: ActionId) -> bool {
        self.pending(action) > 0
    }

    /// Every pending link, grouped by action in id order.
    pub fn iter(&self) -> impl Iterator<Item = &PendingLink> {
        self.by_action.values().flatten()
    }

    /// Checks that the URL index equals the union of the pending sets and that
    /// no URL is filed under two actions.
    pub fn is_consistent(&self) -> bool {
        let mut seen = HashSet::new();
        for link in self.iter() {
            if !seen.insert(&link.url) {
                return false;
            }
        }
        seen.len() == self.urls.len() && seen.iter().all(|u| self.urls.contains(*u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: TagPath,
}

/// Rooted, node-weighted, edge-labeled directed graph of one website.
#[derive(Debug, Clone)]
pub struct WebsiteGraph {
    scope: Scope,
    nodes: Vec<Url>,
    weights: Vec<f64>,
    index: HashMap<Url, usize>,
    edges: Vec<Edge>,
    pub weight_mode: WeightMode,
}

impl WebsiteGraph {
    pub fn new(root: Url, root_weight: f64, weight_mode: WeightMode) -> Result<Self, GraphError> {
        let scope = Scope::new(&root)?;
        let mut index = HashMap::new();
        index.insert(root.clone(), 0);
        Ok(Self {
            scope,
            nodes: vec![root],
            weights: vec![root_weight],
            index,
            edges: Vec::new(),
            weight_mode,
        })
    }

    /// Adds a node (or returns the existing index). Rejects out-of-scope URLs.
    pub fn add_node(&mut self, url: Url, weight: f64) -> Result<usize, GraphError> {
        if let Some(&i) = self.index.get(&url) {
            return Ok(i);
        }
        if !self.scope.contains(&url) {
            return Err(GraphError::OutOfScope {
                url,
                root: self.scope.host.clone(),
            });
        }
        let i = self.nodes.len();
        self.index.insert(url.clone(), i);
        self.nodes.push(url);
        self.weights.push(weight);
        Ok(i)
    }

    pub fn add_edge(&mut self, from: &Url, to: &Url, label: TagPath) -> Result<(), GraphError> {
        let f = self.node_index(from)?;
        let t = self.node_index(to)?;
        self.edges.push(Edge {
            from: f,
            to: t,
            label,
        });
        Ok(())
    }

    pub fn node_index(&self, url: &Url) -> Result<usize, GraphError> {
        self.index
            .get(url)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(url.to_string()))
    }

    pub fn root(&self) -> &Url {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Url] {
        &self.nodes
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Out-neighbour lists by node index.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if !adj[e.from].contains(&e.to) {
                adj[e.from].push(e.to);
            }
        }
        adj
    }
}
