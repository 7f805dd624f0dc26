//! Actions are evolving clusters of similar projected tag paths. Each link
//! is mapped to the nearest centroid by cosine similarity; it joins that
//! action when the similarity reaches `theta`, otherwise it founds a new one.
//!
//! Centroids are looked up through a [`CentroidIndex`]: an exact linear
//! scan (the reference) or a navigable-small-world graph for large action
//! counts.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tagpath::ProjectedVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One cluster: its centroid (running mean of members) and member count.
#[derive(Debug, Clone)]
pub struct Action<F> {
    pub id: ActionId,
    centroid: ProjectedVector<F>,
    sq_norm: F,
    members: u64,
}

impl<F: Scalar> Action<F> {
    fn new(id: ActionId, v: ProjectedVector<F>) -> Self {
        let sq_norm = sq_norm(&v);
        Self {
            id,
            centroid: v,
            sq_norm,
            members: 1,
        }
    }

    pub fn centroid(&self) -> &ProjectedVector<F> {
        &self.centroid
    }

    pub fn member_count(&self) -> u64 {
        self.members
    }

    /// `c <- c + (p - c) / (k + 1)`.
    pub fn join(&mut self, p: &ProjectedVector<F>) {
        let k1 = F::count(self.members + 1);
        self.centroid = running_mean(&self.centroid, p, k1);
        self.sq_norm = sq_norm(&self.centroid);
        self.members += 1;
    }

    pub fn cosine(&self, q: &ProjectedVector<F>, q_sq_norm: F) -> F {
        cosine_with(&self.centroid, self.sq_norm, q, q_sq_norm)
    }
}

fn sq_norm<F: Scalar>(v: &ProjectedVector<F>) -> F {
    v.entries().iter().map(|&(_, x)| x * x).sum()
}

fn running_mean<F: Scalar>(c: &ProjectedVector<F>, p: &ProjectedVector<F>, k1: F) -> ProjectedVector<F> {
    let (a, b) = (c.entries(), p.entries());
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let (j, cv, pv) = match (a.get(i), b.get(k)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                i += 1;
                k += 1;
                (x.0, x.1, y.1)
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                i += 1;
                (x.0, x.1, F::zero())
            }
            (Some(x), None) => {
                i += 1;
                (x.0, x.1, F::zero())
            }
            (_, Some(y)) => {
                k += 1;
                (y.0, F::zero(), y.1)
            }
            (None, None) => unreachable!(),
        };
        out.push((j, cv + (pv - cv) / k1));
    }
    ProjectedVector::from_entries(c.dim(), out)
}

/// Cosine similarity; zero operands give 0.
pub fn cosine<F: Scalar>(a: &ProjectedVector<F>, b: &ProjectedVector<F>) -> F {
    cosine_with(a, sq_norm(a), b, sq_norm(b))
}

fn cosine_with<F: Scalar>(a: &ProjectedVector<F>, a2: F, b: &ProjectedVector<F>, b2: F) -> F {
    if a2 == F::zero() || b2 == F::zero() {
        return F::zero();
    }
    // sqrt of the product keeps cos(x, x) exactly 1
    let c = a.dot(b) / (a2 * b2).sqrt();
    c.min(F::one())
}

/// Orders (similarity desc, id asc).
fn better<F: Scalar>(a: (ActionId, F), b: (ActionId, F)) -> bool {
    match a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.0 < b.0,
    }
}

/// Nearest-centroid lookup over the live actions.
pub trait CentroidIndex<F: Scalar> {
    /// Registers the action at `actions[id]`.
    fn insert(&mut self, id: ActionId, actions: &[Action<F>]);
    /// Refreshes the entry after its centroid moved.
    fn update(&mut self, id: ActionId, actions: &[Action<F>]);
    /// Most similar centroid, ties to the lowest id.
    fn nearest(&self, q: &ProjectedVector<F>, actions: &[Action<F>]) -> Option<(ActionId, F)>;
}

/// Linear scan; exact.
#[derive(Debug, Clone, Default)]
pub struct ExactIndex;

impl<F: Scalar> CentroidIndex<F> for ExactIndex {
    fn insert(&mut self, _: ActionId, _: &[Action<F>]) {}
    fn update(&mut self, _: ActionId, _: &[Action<F>]) {}

    fn nearest(&self, q: &ProjectedVector<F>, actions: &[Action<F>]) -> Option<(ActionId, F)> {
        let q2 = sq_norm(q);
        let mut best: Option<(ActionId, F)> = None;
        for a in actions {
            let cand = (a.id, a.cosine(q, q2));
            if best.is_none_or(|b| better(cand, b)) {
                best = Some(cand);
            }
        }
        best
    }
}

/// Graph parameters of the small-world index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NswParams {
    /// Links created per insertion.
    pub m: usize,
    /// Maximum out-degree after pruning.
    pub m_max: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
}

impl Default for NswParams {
    fn default() -> Self {
        Self {
            m: 16,
            m_max: 32,
            ef_construction: 100,
            ef_search: 64,
        }
    }
}

#[derive(Clone, Copy)]
struct Scored<F>(F, ActionId);

impl<F: Scalar> PartialEq for Scored<F> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<F: Scalar> Eq for Scored<F> {}
impl<F: Scalar> PartialOrd for Scored<F> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<F: Scalar> Ord for Scored<F> {
    // greater = more similar, then lower id
    fn cmp(&self, o: &Self) -> Ordering {
        self.0
            .partial_cmp(&o.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| o.1.cmp(&self.1))
    }
}

/// Single-layer navigable small world graph (the bottom layer of an HNSW).
#[derive(Debug, Clone)]
pub struct NswIndex {
    params: NswParams,
    links: Vec<Vec<ActionId>>,
    entry: Option<ActionId>,
}

impl NswIndex {
    pub fn new(params: NswParams) -> Self {
        Self {
            params,
            links: Vec::new(),
            entry: None,
        }
    }

    /// Builds an index over existing actions, inserted in id order.
    pub fn build<F: Scalar>(params: NswParams, actions: &[Action<F>]) -> Self {
        let mut idx = Self::new(params);
        for a in actions {
            CentroidIndex::insert(&mut idx, a.id, &actions[..=a.id.index()]);
        }
        idx
    }

    fn search<F: Scalar>(
        &self,
        q: &ProjectedVector<F>,
        q2: F,
        ef: usize,
        actions: &[Action<F>],
    ) -> Vec<Scored<F>> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let ef = ef.max(1);
        let sim = |id: ActionId| actions[id.index()].cosine(q, q2);
        let mut visited = HashSet::new();
        visited.insert(entry);
        let first = Scored(sim(entry), entry);
        let mut candidates = BinaryHeap::from([first]);
        // min-heap of the best `ef` seen so far
        let mut results = BinaryHeap::from([std::cmp::Reverse(first)]);
        while let Some(c) = candidates.pop() {
            let worst = results.peek().expect("non-empty").0;
            if results.len() >= ef && c < worst {
                break;
            }
            for &n in &self.links[c.1.index()] {
                if n.index() >= actions.len() || !visited.insert(n) {
                    continue;
                }
                let s = Scored(sim(n), n);
                let worst = results.peek().expect("non-empty").0;
                if results.len() < ef || s > worst {
                    candidates.push(s);
                    results.push(std::cmp::Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<_> = results.into_iter().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    fn prune<F: Scalar>(&mut self, node: ActionId, actions: &[Action<F>]) {
        if self.links[node.index()].len() <= self.params.m_max {
            return;
        }
        let a = &actions[node.index()];
        let mut scored: Vec<_> = self.links[node.index()]
            .iter()
            .map(|&n| Scored(a.cosine(&actions[n.index()].centroid, actions[n.index()].sq_norm), n))
            .collect();
        scored.sort_unstable_by(|x, y| y.cmp(x));
        scored.truncate(self.params.m_max);
        self.links[node.index()] = scored.into_iter().map(|s| s.1).collect();
    }

    fn connect<F: Scalar>(&mut self, id: ActionId, actions: &[Action<F>]) {
        let a = &actions[id.index()];
        let found = self.search(&a.centroid, a.sq_norm, self.params.ef_construction, actions);
        let neighbours: Vec<ActionId> = found
            .into_iter()
            .map(|s| s.1)
            .filter(|&n| n != id)
            .take(self.params.m)
            .collect();
        for &n in &neighbours {
            if !self.links[id.index()].contains(&n) {
                self.links[id.index()].push(n);
            }
            if !self.links[n.index()].contains(&id) {
                self.links[n.index()].push(id);
                self.prune(n, actions);
            }
        }
        self.prune(id, actions);
    }
}

impl<F: Scalar> CentroidIndex<F> for NswIndex {
    fn insert(&mut self, id: ActionId, actions: &[Action<F>]) {
        if self.links.len() <= id.index() {
            self.links.resize(id.index() + 1, Vec::new());
        }
        if self.entry.is_none() {
            self.entry = Some(id);
            return;
        }
        self.connect(id, actions);
    }

    fn update(&mut self, id: ActionId, actions: &[Action<F>]) {
        if self.entry == Some(id) && self.links[id.index()].is_empty() {
            return;
        }
        self.connect(id, actions);
    }

    fn nearest(&self, q: &ProjectedVector<F>, actions: &[Action<F>]) -> Option<(ActionId, F)> {
        let q2 = sq_norm(q);
        self.search(q, q2, self.params.ef_search, actions)
            .first()
            .map(|s| (s.1, s.0))
    }
}

/// Which index backs the action space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexBackend {
    Exact,
    Nsw(NswParams),
    /// Exact scan until `threshold` actions exist, then a small-world graph.
    Auto { threshold: usize, params: NswParams },
}

impl Default for IndexBackend {
    fn default() -> Self {
        IndexBackend::Auto {
            threshold: 512,
            params: NswParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Exact(ExactIndex),
    Nsw(NswIndex),
}

/// Result of mapping a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapping<F> {
    pub action: ActionId,
    pub created: bool,
    /// Similarity to the nearest centroid before the update (0 if none).
    pub similarity: F,
}

/// The set of actions plus their centroid index.
#[derive(Debug, Clone)]
pub struct ActionSpace<F> {
    actions: Vec<Action<F>>,
    theta: F,
    config: IndexBackend,
    backend: Backend,
}

impl<F: Scalar> ActionSpace<F> {
    pub fn new(theta: F, config: IndexBackend) -> Self {
        let backend = match config {
            IndexBackend::Nsw(p) => Backend::Nsw(NswIndex::new(p)),
            _ => Backend::Exact(ExactIndex),
        };
        Self {
            actions: Vec::new(),
            theta,
            config,
            backend,
        }
    }

    pub fn exact(theta: F) -> Self {
        Self::new(theta, IndexBackend::Exact)
    }

    pub fn theta(&self) -> F {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: ActionId) -> Option<&Action<F>> {
        self.actions.get(id.index())
    }

    pub fn actions(&self) -> &[Action<F>] {
        &self.actions
    }

    pub fn uses_graph_index(&self) -> bool {
        matches!(self.backend, Backend::Nsw(_))
    }

    pub fn nearest(&self, q: &ProjectedVector<F>) -> Option<(ActionId, F)> {
        match &self.backend {
            Backend::Exact(i) => i.nearest(q, &self.actions),
            Backend::Nsw(i) => i.nearest(q, &self.actions),
        }
    }

    /// Maps a projected tag path to an action, joining or creating.
    pub fn map_link(&mut self, p: &ProjectedVector<F>) -> Mapping<F> {
        if let Some((id, sim)) = self.nearest(p) {
            if sim >= self.theta {
                self.update_centroid(id, p);
                return Mapping {
                    action: id,
                    created: false,
                    similarity: sim,
                };
            }
            let id = self.create(p.clone());
            return Mapping {
                action: id,
                created: true,
                similarity: sim,
            };
        }
        Mapping {
            action: self.create(p.clone()),
            created: true,
            similarity: F::zero(),
        }
    }

    /// Lookup only: the matching action if one is within `theta`.
    pub fn lookup(&self, p: &ProjectedVector<F>) -> Option<ActionId> {
        self.nearest(p)
            .filter(|&(_, s)| s >= self.theta)
            .map(|(id, _)| id)
    }

    pub fn update_centroid(&mut self, id: ActionId, p: &ProjectedVector<F>) {
        self.actions[id.index()].join(p);
        match &mut self.backend {
            Backend::Exact(i) => CentroidIndex::<F>::update(i, id, &self.actions),
            Backend::Nsw(i) => i.update(id, &self.actions),
        }
    }

    fn create(&mut self, p: ProjectedVector<F>) -> ActionId {
        let id = ActionId(u32::try_from(self.actions.len()).expect("action count fits in u32"));
        self.actions.push(Action::new(id, p));
        if let IndexBackend::Auto { threshold, params } = self.config {
            if matches!(self.backend, Backend::Exact(_)) && self.actions.len() >= threshold {
                self.backend = Backend::Nsw(NswIndex::build(params, &self.actions));
                return id;
            }
        }
        match &mut self.backend {
            Backend::Exact(i) => CentroidIndex::<F>::insert(i, id, &self.actions),
            Backend::Nsw(i) => i.insert(id, &self.actions),
        }
        id
    }
}
