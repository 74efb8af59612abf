//! Enumeration of every spanning arborescence of a constraint network in
//! which no node's children sum above the node itself (plus a margin).
//!
//! This is Gabow and Myers' backtracking enumeration with an extra check:
//! whenever an edge `u -> v` joins the partial tree, the children of `u` are
//! re-checked and the branch is abandoned on violation. Adding children only
//! grows a node's sum, so no pruned branch could have produced a valid tree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ConstraintNetwork;

/// Absolute slack on every children-sum comparison, absorbing rounding in
/// the summation.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Amount by which children may jointly exceed their parent.
    pub epsilon_tree: f64,
    pub max_trees: usize,
    pub max_grow_calls: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epsilon_tree: 0.1,
            max_trees: 100_000,
            max_grow_calls: 100_000_000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tree >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tree margin {} must be non-negative",
                self.epsilon_tree
            )));
        }
        if self.max_trees == 0 || self.max_grow_calls == 0 {
            return Err(Error::InvalidConfig("search bounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// A spanning arborescence, as `(parent, child)` node-id pairs sorted by
/// child id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateTree {
    pub edges: Vec<(usize, usize)>,
}

impl CandidateTree {
    pub fn new(mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_by_key(|&(p, c)| (c, p));
        Self { edges }
    }

    pub fn parent_of(&self, child: usize) -> Option<usize> {
        self.edges
            .binary_search_by_key(&child, |e| e.1)
            .ok()
            .map(|i| self.edges[i].0)
    }

    pub fn children_of(&self, parent: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == parent).map(|e| e.1)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchOutcome {
    pub trees: Vec<CandidateTree>,
    pub truncated: bool,
    pub grow_calls: u64,
}

/// Whether the children of `parent` sum to at most its frequency plus `eps`
/// in every sample.
pub fn local_sum_ok(parent: &[f64], children: &[&[f64]], eps: f64) -> bool {
    (0..parent.len()).all(|i| {
        let sum: f64 = children.iter().map(|c| c[i]).sum();
        sum <= parent[i] + eps + SUM_TOLERANCE
    })
}

/// Checks the children-sum constraint at every node of a complete tree.
pub fn tree_satisfies_sums(net: &ConstraintNetwork, tree: &CandidateTree, eps: f64) -> bool {
    net.nodes.iter().all(|u| {
        let kids: Vec<&[f64]> = tree
            .children_of(u.id)
            .map(|c| net.node(c).full_centroid.as_slice())
            .collect();
        local_sum_ok(&u.full_centroid, &kids, eps)
    })
}

#[derive(Debug, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

struct Search<'a> {
    cfg: &'a SearchConfig,
    ids: Vec<usize>,
    centroid: Vec<&'a [f64]>,
    level: Vec<usize>,
    edges: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
    alive: Vec<bool>,
    in_tree: Vec<bool>,
    tree_size: usize,
    parent_edge: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    frontier: Vec<usize>,
    out: SearchOutcome,
    scratch_seen: Vec<bool>,
    scratch_stack: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(net: &'a ConstraintNetwork, cfg: &'a SearchConfig) -> Self {
        let ids: Vec<usize> = net.nodes.iter().map(|n| n.id).collect();
        let index = |id: usize| ids.binary_search(&id).expect("edge endpoint not in network");
        let n = ids.len();
        let edges: Vec<(usize, usize)> = net.edges.iter().map(|&(u, v)| (index(u), index(v))).collect();
        let mut out_edges = vec![Vec::new(); n];
        for (k, &(u, _)) in edges.iter().enumerate() {
            out_edges[u].push(k);
        }
        Self {
            cfg,
            centroid: net.nodes.iter().map(|n| n.full_centroid.as_slice()).collect(),
            level: net.nodes.iter().map(|n| n.level).collect(),
            ids,
            alive: vec![true; edges.len()],
            edges,
            out_edges,
            in_tree: vec![false; n],
            tree_size: 0,
            parent_edge: vec![None; n],
            children: vec![Vec::new(); n],
            frontier: Vec::new(),
            out: SearchOutcome::default(),
            scratch_seen: vec![false; n],
            scratch_stack: Vec::new(),
        }
    }

    fn push_sorted(&mut self, mut batch: Vec<usize>) {
        // pushed so that the last element, popped first, is the smallest key
        batch.sort_by_key(|&k| {
            let (u, v) = self.edges[k];
            (std::cmp::Reverse(self.level[v]), self.ids[v], self.ids[u])
        });
        batch.reverse();
        self.frontier.extend(batch);
    }

    fn check(&self, u: usize) -> bool {
        let kids: Vec<&[f64]> = self.children[u].iter().map(|&c| self.centroid[c]).collect();
        local_sum_ok(self.centroid[u], &kids, self.cfg.epsilon_tree)
    }

    fn emit(&mut self) {
        let edges = (0..self.ids.len())
            .filter_map(|v| {
                self.parent_edge[v].map(|k| {
                    let (u, v) = self.edges[k];
                    (self.ids[u], self.ids[v])
                })
            })
            .collect();
        self.out.trees.push(CandidateTree::new(edges));
    }

    /// Whether `target` (outside the tree) is reachable from the tree along
    /// live edges through nodes outside the tree.
    fn reachable(&mut self, target: usize) -> bool {
        self.scratch_seen.iter_mut().for_each(|s| *s = false);
        self.scratch_stack.clear();
        for v in 0..self.ids.len() {
            if self.in_tree[v] {
                self.scratch_seen[v] = true;
                self.scratch_stack.push(v);
            }
        }
        while let Some(u) = self.scratch_stack.pop() {
            for &k in &self.out_edges[u] {
                if !self.alive[k] {
                    continue;
                }
                let w = self.edges[k].1;
                if w == target {
                    return true;
                }
                if !self.scratch_seen[w] {
                    self.scratch_seen[w] = true;
                    self.scratch_stack.push(w);
                }
            }
        }
        false
    }

    fn grow(&mut self) -> Flow {
        self.out.grow_calls += 1;
        if self.out.grow_calls > self.cfg.max_grow_calls {
            self.out.truncated = true;
            return Flow::Stop;
        }
        if self.tree_size == self.ids.len() {
            self.emit();
            if self.out.trees.len() >= self.cfg.max_trees {
                self.out.truncated = true;
                return Flow::Stop;
            }
            return Flow::Continue;
        }

        let mut removed: Vec<usize> = Vec::new();
        let mut flow = Flow::Continue;
        while let Some(k) = self.frontier.pop() {
            let (u, v) = self.edges[k];
            self.in_tree[v] = true;
            self.tree_size += 1;
            self.parent_edge[v] = Some(k);
            self.children[u].push(v);

            if self.check(u) {
                let saved = self.frontier.clone();
                self.frontier.retain(|&f| self.edges[f].1 != v);
                let outgoing: Vec<usize> = self.out_edges[v]
                    .iter()
                    .copied()
                    .filter(|&f| self.alive[f] && !self.in_tree[self.edges[f].1])
                    .collect();
                self.push_sorted(outgoing);
                flow = self.grow();
                self.frontier = saved;
            }

            self.children[u].pop();
            self.parent_edge[v] = None;
            self.tree_size -= 1;
            self.in_tree[v] = false;
            self.alive[k] = false;
            removed.push(k);

            // Stop once `v` can no longer be reached: no spanning tree
            // containing the current partial tree remains.
            if flow == Flow::Stop || !self.reachable(v) {
                break;
            }
        }
        for &k in removed.iter().rev() {
            self.alive[k] = true;
            self.frontier.push(k);
        }
        flow
    }
}

/// Enumerates every spanning tree of `net` rooted at its root that satisfies
/// the children-sum constraint at every node.
pub fn enumerate_trees(net: &ConstraintNetwork, cfg: &SearchConfig) -> SearchOutcome {
    let mut s = Search::new(net, cfg);
    let root = s.ids.binary_search(&net.root_id).expect("root missing from network");
    s.in_tree[root] = true;
    s.tree_size = 1;
    let outgoing = s.out_edges[root].clone();
    s.push_sorted(outgoing);
    s.grow();
    if s.out.truncated {
        log::warn!(
            "tree search truncated after {} trees and {} grow calls",
            s.out.trees.len(),
            s.out.grow_calls
        );
    }
    s.out
}
