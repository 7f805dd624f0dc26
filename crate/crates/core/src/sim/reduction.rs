//! Set-cover instances as website graphs, and an exhaustive optimal-crawl
//! search for graphs small enough to enumerate.

use std::collections::VecDeque;

use thiserror::Error;
use url::Url;

use crate::graph::{CrawlTree, GraphError, WebsiteGraph, WeightMode};
use crate::tagpath::TagPath;

/// Largest graph the exhaustive search accepts.
pub const MAX_BRUTEFORCE_NODES: usize = 20;

pub const REDUCTION_ROOT: &str = "http://sc.example/";
const EDGE_LABEL: &str = "html body a";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("invalid set-cover instance: {0}")]
    Invalid(String),
    #[error("graph has {0} nodes; exhaustive search is limited to {MAX_BRUTEFORCE_NODES}")]
    TooLarge(usize),
    #[error("target `{0}` is unreachable from the root")]
    Unreachable(Url),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Universe `0..m`, a collection of subsets, and a cover budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionInstance {
    pub m: usize,
    pub collection: Vec<Vec<usize>>,
    pub budget: usize,
}

impl ReductionInstance {
    pub fn validate(&self) -> Result<(), ReductionError> {
        let mut covered = vec![false; self.m];
        for (i, s) in self.collection.iter().enumerate() {
            if s.is_empty() {
                return Err(ReductionError::Invalid(format!("subset {i} is empty")));
            }
            for &e in s {
                let slot = covered
                    .get_mut(e)
                    .ok_or_else(|| ReductionError::Invalid(format!("element {e} outside universe 0..{}", self.m)))?;
                *slot = true;
            }
        }
        if let Some(e) = covered.iter().position(|c| !c) {
            return Err(ReductionError::Invalid(format!("element {e} is in no subset")));
        }
        Ok(())
    }
}

pub fn subset_url(i: usize) -> Url {
    Url::parse(REDUCTION_ROOT).and_then(|r| r.join(&format!("s{i}"))).expect("static url")
}

pub fn element_url(j: usize) -> Url {
    Url::parse(REDUCTION_ROOT).and_then(|r| r.join(&format!("u{j}"))).expect("static url")
}

/// Root → one node per subset → the elements it contains, all with weight 1.
/// Returns the graph and the target set (the element nodes).
pub fn build_reduction(inst: &ReductionInstance) -> Result<(WebsiteGraph, Vec<Url>), ReductionError> {
    inst.validate()?;
    let root = Url::parse(REDUCTION_ROOT).expect("static url");
    let label = TagPath::parse(EDGE_LABEL).expect("static tag path");
    let mut g = WebsiteGraph::new(root.clone(), 1.0, WeightMode::RequestCount)?;
    for i in 0..inst.collection.len() {
        g.add_node(subset_url(i), 1.0)?;
    }
    let targets: Vec<Url> = (0..inst.m).map(element_url).collect();
    for t in &targets {
        g.add_node(t.clone(), 1.0)?;
    }
    for (i, s) in inst.collection.iter().enumerate() {
        let su = subset_url(i);
        g.add_edge(&root, &su, label.clone())?;
        for &e in s {
            g.add_edge(&su, &element_url(e), label.clone())?;
        }
    }
    Ok((g, targets))
}

#[derive(Debug, Clone)]
pub struct OptimalCrawl {
    pub cost: f64,
    /// Node indices of the witness, root first.
    pub nodes: Vec<usize>,
    pub tree: CrawlTree,
}

/// Minimum-weight root-anchored subtree containing every target.
///
/// Enumerates every subset of the non-root, non-target nodes; a candidate
/// node set is feasible when all of it is reachable from the root through
/// the candidate nodes alone, and its BFS tree is then the witness.
pub fn optimal_crawl_bruteforce(graph: &WebsiteGraph, targets: &[Url]) -> Result<OptimalCrawl, ReductionError> {
    let n = graph.len();
    if n > MAX_BRUTEFORCE_NODES {
        return Err(ReductionError::TooLarge(n));
    }
    let adj = graph.adjacency();
    let mut required = vec![false; n];
    required[0] = true;
    for t in targets {
        required[graph.node_index(t)?] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !required[i]).collect();
    let base_cost: f64 = (0..n).filter(|&i| required[i]).map(|i| graph.weight(i)).sum();

    // Reachability with every node allowed, for a precise error.
    let everything = reach(&adj, &vec![true; n]);
    for t in targets {
        if everything[graph.node_index(t)?].is_none() {
            return Err(ReductionError::Unreachable(t.clone()));
        }
    }

    let mut best: Option<(f64, Vec<bool>, Vec<Option<usize>>)> = None;
    for mask in 0u64..(1u64 << free.len()) {
        let mut allowed = required.clone();
        let mut cost = base_cost;
        for (b, &i) in free.iter().enumerate() {
            if mask >> b & 1 == 1 {
                allowed[i] = true;
                cost += graph.weight(i);
            }
        }
        if best.as_ref().is_some_and(|(c, _, _)| cost >= *c) {
            continue;
        }
        let parents = reach(&adj, &allowed);
        if (0..n).all(|i| !allowed[i] || parents[i].is_some()) {
            best = Some((cost, allowed, parents));
        }
    }
    let (cost, allowed, parents) = best.expect("the all-nodes candidate is feasible");

    let nodes: Vec<usize> = bfs_order(&adj, &allowed);
    let urls = graph.nodes();
    let mut tree = CrawlTree::new(urls[0].clone(), graph.weight(0));
    for &i in &nodes[1..] {
        let p = parents[i].expect("reachable");
        tree.attach(urls[i].clone(), &urls[p].clone(), graph.weight(i))?;
    }
    Ok(OptimalCrawl { cost, nodes, tree })
}

/// BFS parents from node 0 through allowed nodes; root maps to itself.
fn reach(adj: &[Vec<usize>], allowed: &[bool]) -> Vec<Option<usize>> {
    let mut parent = vec![None; adj.len()];
    parent[0] = Some(0);
    let mut q = VecDeque::from([0usize]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if allowed[v] && parent[v].is_none() {
                parent[v] = Some(u);
                q.push_back(v);
            }
        }
    }
    parent
}

fn bfs_order(adj: &[Vec<usize>], allowed: &[bool]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    seen[0] = true;
    let mut order = vec![0];
    let mut k = 0;
    while k < order.len() {
        let u = order[k];
        k += 1;
        for &v in &adj[u] {
            if allowed[v] && !seen[v] {
                seen[v] = true;
                order.push(v);
            }
        }
    }
    order
}
