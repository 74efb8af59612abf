//! The evolutionary constraint network: a DAG over clusters plus a germline
//! root whose edges mark admissible precedence between clusters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryProfile, Cluster, DropReason};

/// Id of the germline root in every network.
pub const ROOT_ID: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Floor on the per-sample frequency margin of an edge.
    pub epsilon_edge: f64,
    /// Germline frequency at every sample.
    pub root_vaf: f64,
    /// Restrict private nodes to their closest admissible predecessors.
    pub constrain_private: bool,
    /// Nodes with fewer member SSNVs are dropped before the search.
    pub min_node_support: usize,
    /// Once no non-robust node is left to remove, keep adjusting by
    /// removing robust nodes, smallest first.
    pub remove_robust_when_exhausted: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            epsilon_edge: 0.1,
            root_vaf: 0.5,
            constrain_private: true,
            min_node_support: 2,
            remove_robust_when_exhausted: true,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_edge >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "edge margin {} must be non-negative",
                self.epsilon_edge
            )));
        }
        if !(self.root_vaf > 0.0 && self.root_vaf <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "root frequency {} outside (0, 1]",
                self.root_vaf
            )));
        }
        Ok(())
    }
}

/// A cluster entering network construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub cluster: Cluster,
    /// Whether the cluster's group was formed by threshold calling alone.
    pub robust: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub id: usize,
    pub profile: BinaryProfile,
    /// `None` for the germline root.
    pub cluster: Option<Cluster>,
    pub robust: bool,
    pub level: usize,
    pub full_centroid: Vec<f64>,
    pub full_stderr: Vec<f64>,
}

impl NetworkNode {
    pub fn root(num_samples: usize, root_vaf: f64) -> Self {
        Self {
            id: ROOT_ID,
            profile: BinaryProfile::all_ones(num_samples),
            cluster: None,
            robust: true,
            level: num_samples,
            full_centroid: vec![root_vaf; num_samples],
            full_stderr: vec![0.0; num_samples],
        }
    }

    pub fn from_spec(spec: &NodeSpec) -> Self {
        let c = &spec.cluster;
        Self {
            id: c.id,
            profile: c.profile,
            cluster: Some(c.clone()),
            robust: spec.robust,
            level: c.profile.hamming_weight(),
            full_centroid: c.full_centroid(),
            full_stderr: c.full_stderr(),
        }
    }

    pub fn is_root(&self) -> bool {
        self.cluster.is_none()
    }

    pub fn size(&self) -> usize {
        self.cluster.as_ref().map_or(0, Cluster::size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNetwork {
    /// Sorted by id; the root comes first.
    pub nodes: Vec<NetworkNode>,
    pub edges: BTreeSet<(usize, usize)>,
    pub root_id: usize,
    pub num_samples: usize,
}

impl ConstraintNetwork {
    pub fn node(&self, id: usize) -> &NetworkNode {
        let pos = self
            .nodes
            .binary_search_by_key(&id, |n| n.id)
            .unwrap_or_else(|_| panic!("no node with id {id}"));
        &self.nodes[pos]
    }

    pub fn contains(&self, id: usize) -> bool {
        self.nodes.binary_search_by_key(&id, |n| n.id).is_ok()
    }

    pub fn parents_of(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == id).map(|e| e.0)
    }

    /// Clusters of the non-root nodes, for rebuilding.
    pub fn specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .filter_map(|n| {
                n.cluster.as_ref().map(|c| NodeSpec {
                    cluster: c.clone(),
                    robust: n.robust,
                })
            })
            .collect()
    }

    /// Node ids in a topological order, or `None` if the edges form a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: BTreeMap<usize, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        for &(_, v) in &self.edges {
            *indeg.get_mut(&v)? += 1;
        }
        let mut ready: Vec<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(u) = ready.pop() {
            order.push(u);
            for &(a, b) in self.edges.range((u, 0)..=(u, usize::MAX)) {
                debug_assert_eq!(a, u);
                let d = indeg.get_mut(&b)?;
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }
}

/// Per-sample error margin of an edge: the larger of the summed standard
/// errors and the configured floor.
pub fn edge_margin(u: &NetworkNode, v: &NetworkNode, i: usize, cfg: &NetworkConfig) -> f64 {
    (u.full_stderr[i] + v.full_stderr[i]).max(cfg.epsilon_edge)
}

/// Whether `u` may precede `v`: in every sample `u` is not lower than `v`
/// beyond the margin, and `v` is absent wherever `u` is.
pub fn admits_edge(u: &NetworkNode, v: &NetworkNode, cfg: &NetworkConfig) -> bool {
    if u.is_root() {
        return true;
    }
    (0..u.full_centroid.len()).all(|i| {
        let (a, b) = (u.full_centroid[i], v.full_centroid[i]);
        a >= b - edge_margin(u, v, i, cfg) && (a != 0.0 || b == 0.0)
    })
}

/// Sum of squared excesses of the child over the parent.
pub fn vaf_err(parent: &NetworkNode, child: &NetworkNode) -> f64 {
    parent
        .full_centroid
        .iter()
        .zip(&child.full_centroid)
        .filter(|(p, c)| c > p)
        .map(|(p, c)| (c - p).powi(2))
        .sum()
}

/// Orients an edge between two same-profile nodes in the direction with the
/// smaller frequency error; exact ties favour the lower id as parent.
pub fn orient_same_level<'a>(
    u: &'a NetworkNode,
    v: &'a NetworkNode,
) -> (&'a NetworkNode, &'a NetworkNode) {
    let forward = vaf_err(u, v);
    let backward = vaf_err(v, u);
    if forward < backward || (forward == backward && u.id < v.id) {
        (u, v)
    } else {
        (v, u)
    }
}

/// Splits specs into those meeting the node support minimum and the member
/// SSNVs of those that do not.
pub fn enforce_node_support(
    specs: Vec<NodeSpec>,
    cfg: &NetworkConfig,
) -> (Vec<NodeSpec>, Vec<(usize, DropReason)>) {
    let mut dropped = Vec::new();
    let kept = specs
        .into_iter()
        .filter(|s| {
            let ok = s.cluster.size() >= cfg.min_node_support;
            if !ok {
                log::info!(
                    "dropping node {} ({}, {} SSNVs) below support {}",
                    s.cluster.id,
                    s.cluster.profile,
                    s.cluster.size(),
                    cfg.min_node_support
                );
                dropped.extend(s.cluster.members.iter().map(|&m| (m, DropReason::BelowNodeSupport)));
            }
            ok
        })
        .collect();
    (kept, dropped)
}

/// Builds the network over the given clusters. Cluster ids must be unique
/// and non-zero.
pub fn build_network(specs: &[NodeSpec], num_samples: usize, cfg: &NetworkConfig) -> ConstraintNetwork {
    let mut nodes: Vec<NetworkNode> = std::iter::once(NetworkNode::root(num_samples, cfg.root_vaf))
        .chain(specs.iter().map(NetworkNode::from_spec))
        .collect();
    nodes.sort_by_key(|n| n.id);
    assert!(
        nodes.windows(2).all(|w| w[0].id < w[1].id),
        "cluster ids must be unique and non-zero"
    );

    let mut edges = BTreeSet::new();
    let body = &nodes[1..];
    for (a, u) in body.iter().enumerate() {
        for v in &body[a + 1..] {
            if u.level == v.level {
                if u.profile == v.profile {
                    let (p, c) = orient_same_level(u, v);
                    if admits_edge(p, c, cfg) {
                        edges.insert((p.id, c.id));
                    }
                }
                continue;
            }
            let (p, c) = if u.level > v.level { (u, v) } else { (v, u) };
            if p.profile.covers(&c.profile).unwrap_or(false) && admits_edge(p, c, cfg) {
                edges.insert((p.id, c.id));
            }
        }
    }

    if cfg.constrain_private {
        for v in body.iter().filter(|n| n.level == 1) {
            let best = edges
                .iter()
                .filter(|e| e.1 == v.id)
                .map(|e| nodes_level(&nodes, e.0))
                .filter(|&l| l > 1)
                .min();
            if let Some(best) = best {
                edges.retain(|e| e.1 != v.id || {
                    let l = nodes_level(&nodes, e.0);
                    l == best || l == 1
                });
            }
        }
    }

    for v in body {
        if !edges.iter().any(|e| e.1 == v.id) {
            edges.insert((ROOT_ID, v.id));
        }
    }

    let net = ConstraintNetwork {
        nodes,
        edges,
        root_id: ROOT_ID,
        num_samples,
    };
    assert!(net.topological_order().is_some(), "constraint network has a cycle");
    net
}

fn nodes_level(nodes: &[NetworkNode], id: usize) -> usize {
    nodes[nodes.binary_search_by_key(&id, |n| n.id).unwrap()].level
}

/// Picks the node to remove next when the search finds no valid tree:
/// the smallest non-robust node (lowest level, then lowest id on ties), or,
/// when allowed, the smallest robust node once no non-robust node remains.
pub fn next_removal(net: &ConstraintNetwork, cfg: &NetworkConfig) -> Option<usize> {
    let pick = |robust: bool| {
        net.nodes
            .iter()
            .filter(|n| !n.is_root() && n.robust == robust)
            .min_by_key(|n| (n.size(), n.level, n.id))
            .map(|n| n.id)
    };
    pick(false).or_else(|| {
        if cfg.remove_robust_when_exhausted {
            pick(true)
        } else {
            None
        }
    })
}

/// Removes one node (see [`next_removal`]) and rebuilds the edges. Returns
/// the rebuilt network and the removed cluster, or `None` when exhausted.
pub fn adjust_network(
    net: &ConstraintNetwork,
    cfg: &NetworkConfig,
) -> Option<(ConstraintNetwork, Cluster)> {
    let id = next_removal(net, cfg)?;
    let mut specs = net.specs();
    let pos = specs.iter().position(|s| s.cluster.id == id)?;
    let removed = specs.remove(pos).cluster;
    log::info!(
        "adjusting network: removing node {} ({}, {} SSNVs)",
        removed.id,
        removed.profile,
        removed.size()
    );
    Some((build_network(&specs, net.num_samples, cfg), removed))
}
