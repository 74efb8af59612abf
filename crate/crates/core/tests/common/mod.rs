#![allow(dead_code)]

pub mod fixtures;
pub mod props;

use std::collections::BTreeSet;

use lineage::model::{BinaryProfile, Cluster, SnvRecord};
use lineage::network::{ConstraintNetwork, NetworkNode, NodeSpec, ROOT_ID};
use lineage::search::CandidateTree;
use rand::Rng;

/// Network with the given non-root node centroids (ids 1..) and edges.
pub fn network(centroids: &[Vec<f64>], edges: &[(usize, usize)]) -> ConstraintNetwork {
    let s = centroids[0].len();
    let mut nodes = vec![NetworkNode::root(s, 0.5)];
    for (i, c) in centroids.iter().enumerate() {
        let profile = BinaryProfile::from_bits(&c.iter().map(|&v| v > 0.0).collect::<Vec<_>>());
        let cl = Cluster::from_members(i + 1, profile, vec![0], &[SnvRecord::from_vafs(c)]);
        nodes.push(NetworkNode::from_spec(&NodeSpec { cluster: cl, robust: true }));
    }
    ConstraintNetwork {
        nodes,
        edges: edges.iter().copied().collect(),
        root_id: ROOT_ID,
        num_samples: s,
    }
}

/// Random rooted DAG on `1 + n` nodes whose edges go from lower to higher
/// ids, every non-root node reachable from the root.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize, max_edges: usize, samples: usize) -> ConstraintNetwork {
    let n = rng.random_range(1..max_nodes);
    // later nodes get smaller frequencies so that a fair share of trees pass
    let centroids: Vec<Vec<f64>> = (1..=n)
        .map(|v| {
            let top = (80 / (v as u32 + 1)).max(2);
            (0..samples).map(|_| rng.random_range(1..=top) as f64 / 100.0).collect()
        })
        .collect();
    let mut edges = BTreeSet::new();
    for v in 1..=n {
        edges.insert((rng.random_range(0..v), v));
    }
    let mut candidates: Vec<(usize, usize)> = (1..=n).flat_map(|v| (0..v).map(move |u| (u, v))).collect();
    candidates.retain(|e| !edges.contains(e));
    while edges.len() < max_edges && !candidates.is_empty() && rng.random_bool(0.8) {
        let e = candidates.swap_remove(rng.random_range(0..candidates.len()));
        edges.insert(e);
    }
    network(&centroids, &edges.into_iter().collect::<Vec<_>>())
}

fn sums_ok(net: &ConstraintNetwork, parent_of: &[(usize, usize)], eps: f64) -> bool {
    net.nodes.iter().all(|u| {
        (0..net.num_samples).all(|i| {
            let sum: f64 = parent_of
                .iter()
                .filter(|e| e.0 == u.id)
                .map(|e| net.node(e.1).full_centroid[i])
                .sum();
            sum <= u.full_centroid[i] + eps + 1e-9
        })
    })
}

fn reaches_root(parent: &[(usize, usize)], root: usize, v: usize) -> bool {
    let mut cur = v;
    for _ in 0..=parent.len() {
        if cur == root {
            return true;
        }
        match parent.iter().find(|e| e.1 == cur) {
            Some(e) => cur = e.0,
            None => return false,
        }
    }
    false
}

/// All spanning arborescences rooted at the root, by recursive choice of
/// one incoming edge per node, filtered by the children-sum rule.
pub fn brute_force_trees(net: &ConstraintNetwork, eps: f64) -> BTreeSet<CandidateTree> {
    fn go(
        net: &ConstraintNetwork,
        others: &[usize],
        chosen: &mut Vec<(usize, usize)>,
        eps: f64,
        out: &mut BTreeSet<CandidateTree>,
    ) {
        let Some((&v, rest)) = others.split_first() else {
            let spanning = chosen.iter().all(|e| reaches_root(chosen, net.root_id, e.1));
            if spanning && sums_ok(net, chosen, eps) {
                out.insert(CandidateTree::new(chosen.clone()));
            }
            return;
        };
        for &(u, w) in &net.edges {
            if w == v {
                chosen.push((u, v));
                go(net, rest, chosen, eps, out);
                chosen.pop();
            }
        }
    }
    let others: Vec<usize> = net.nodes.iter().map(|n| n.id).filter(|&i| i != net.root_id).collect();
    let mut out = BTreeSet::new();
    go(net, &others, &mut Vec::new(), eps, &mut out);
    out
}

/// Minimum of the deviation QP for one sample by dynamic programming over a
/// grid of deviations with step `h`. `parent[v]` is `None` only at the root
/// (index 0). Returns `None` when no grid point is feasible.
pub fn grid_qp(parent: &[Option<usize>], centroid: &[f64], eps: f64, h: f64) -> Option<f64> {
    let n = centroid.len();
    let range = |v: usize| {
        let lo = (-eps).max(-centroid[v]);
        let hi = eps.min(centroid[v]);
        ((lo / h - 1e-6).ceil() as i64, (hi / h + 1e-6).floor() as i64)
    };
    let children: Vec<Vec<usize>> = (0..n).map(|u| (0..n).filter(|&v| parent[v] == Some(u)).collect()).collect();

    // value table over the node's own grid
    fn solve(
        u: usize,
        children: &[Vec<usize>],
        centroid: &[f64],
        h: f64,
        range: &dyn Fn(usize) -> (i64, i64),
    ) -> (i64, Vec<f64>) {
        let (klo, khi) = range(u);
        // aggregate over children: min cost for each total deviation index
        let mut agg_lo = 0i64;
        let mut agg: Vec<f64> = vec![0.0];
        for &v in &children[u] {
            let (vlo, table) = solve(v, children, centroid, h, range);
            let mut next = vec![f64::INFINITY; agg.len() + table.len() - 1];
            for (a, &ca) in agg.iter().enumerate() {
                if !ca.is_finite() {
                    continue;
                }
                for (b, &cb) in table.iter().enumerate() {
                    let c = ca + cb;
                    if c < next[a + b] {
                        next[a + b] = c;
                    }
                }
            }
            agg_lo += vlo;
            agg = next;
        }
        for j in 1..agg.len() {
            agg[j] = agg[j].min(agg[j - 1]);
        }
        let b = centroid[u] - children[u].iter().map(|&v| centroid[v]).sum::<f64>();
        let table = (klo..=khi)
            .map(|k| {
                let x = k as f64 * h;
                // largest total child index s with s*h <= x + b
                let smax = ((x + b) / h + 1e-6).floor() as i64 - agg_lo;
                if smax < 0 {
                    f64::INFINITY
                } else {
                    let s = (smax as usize).min(agg.len() - 1);
                    x * x + agg[s]
                }
            })
            .collect();
        (klo, table)
    }
    let (_, table) = solve(0, &children, centroid, h, &range);
    let best = table.into_iter().fold(f64::INFINITY, f64::min);
    best.is_finite().then_some(best)
}
