//! End-to-end inference: calling, clustering, network construction, tree
//! search with network adjustment, ranking and sample decomposition.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calling::{call_groups, CallingConfig};
use crate::clustering::{cluster_groups, ClusteringConfig};
use crate::error::{Error, Result};
use crate::model::{BinaryProfile, Cluster, DropReason, SampleSet, SnvRecord};
use crate::network::{adjust_network, build_network, enforce_node_support, ConstraintNetwork, NetworkConfig, NodeSpec};
use crate::ranking::{decompose_sample, rank_trees, RankingConfig, SampleDecomposition};
use crate::search::{enumerate_trees, SearchConfig};

/// Bundle layout version, bumped on incompatible changes.
pub const BUNDLE_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    #[default]
    Vaf,
    Cp,
    Clusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input_mode: InputMode,
    pub calling: CallingConfig,
    /// `clustering.seed` is replaced by `seed` at run time.
    pub clustering: ClusteringConfig,
    pub network: NetworkConfig,
    pub search: SearchConfig,
    pub ranking: RankingConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_mode: InputMode::Vaf,
            calling: CallingConfig::default(),
            clustering: ClusteringConfig::default(),
            network: NetworkConfig::default(),
            search: SearchConfig::default(),
            ranking: RankingConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.calling.validate()?;
        self.clustering.validate()?;
        self.network.validate()?;
        self.search.validate()?;
        self.ranking.validate()
    }

    /// Sets the error margin used for edges, the tree search and the QP.
    pub fn set_epsilon(&mut self, eps: f64) {
        self.network.epsilon_edge = eps;
        self.search.epsilon_tree = eps;
        self.ranking.epsilon = eps;
    }
}

/// Parsed input for one run.
#[derive(Debug, Clone)]
pub struct PipelineInput {
    pub samples: SampleSet,
    pub snvs: Vec<SnvRecord>,
    /// Externally computed clusters; bypass calling and clustering.
    pub clusters: Option<Vec<Cluster>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub format: u32,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnvEntry {
    pub row: usize,
    pub chrom: String,
    pub pos: u64,
    pub desc: String,
    pub vaf: Vec<f64>,
    /// Called profile, when calling assigned one.
    pub profile: Option<BinaryProfile>,
    /// Network node holding it; exactly one of `node` and `dropped` is set.
    pub node: Option<usize>,
    pub dropped: Option<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: usize,
    pub profile: BinaryProfile,
    pub level: usize,
    pub robust: bool,
    /// Over all samples, zero where absent.
    pub centroid: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Member SSNV rows; empty for the germline root.
    pub snvs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEntry {
    pub rank: usize,
    pub edges: Vec<(usize, usize)>,
    pub score: f64,
    pub local_score: f64,
    /// `None` when the QP was not run on this tree.
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
    /// QP deviations per node id and sample.
    pub deviations: BTreeMap<usize, Vec<f64>>,
    pub decompositions: Vec<SampleDecomposition>,
}

impl TreeEntry {
    pub fn parent_of(&self, child: usize) -> Option<usize> {
        self.edges.iter().find(|e| e.1 == child).map(|e| e.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    /// Valid trees in the final network.
    pub trees_found: usize,
    pub truncated: bool,
    pub grow_calls: u64,
    pub adjustments: usize,
}

/// Everything a run produced, self-contained for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub samples: Vec<String>,
    pub normal_index: usize,
    pub snvs: Vec<SnvEntry>,
    pub network: NetworkEntry,
    pub trees: Vec<TreeEntry>,
    pub search: SearchEntry,
    pub diagnostic: Option<String>,
}

impl ResultBundle {
    pub fn node(&self, id: usize) -> Option<&NodeEntry> {
        self.network.nodes.iter().find(|n| n.id == id)
    }
}

/// Orders clusters by level (highest first), profile and first member and
/// numbers them from 1.
fn number_specs(mut specs: Vec<NodeSpec>) -> Vec<NodeSpec> {
    specs.sort_by_key(|s| {
        (
            Reverse(s.cluster.profile.hamming_weight()),
            s.cluster.profile,
            s.cluster.members[0],
        )
    });
    for (i, s) in specs.iter_mut().enumerate() {
        s.cluster.id = i + 1;
    }
    specs
}

fn group_and_cluster(
    input: &PipelineInput,
    cfg: &RunConfig,
) -> Result<(Vec<NodeSpec>, Vec<Option<BinaryProfile>>, Vec<(usize, DropReason)>)> {
    let n = input.snvs.len();
    if let Some(clusters) = &input.clusters {
        let mut profiles = vec![None; n];
        let mut placed = vec![false; n];
        for c in clusters {
            for &m in &c.members {
                if m >= n {
                    return Err(Error::InvalidConfig(format!("cluster member {m} out of range")));
                }
                profiles[m] = Some(c.profile);
                placed[m] = true;
            }
        }
        let dropped = (0..n).filter(|&m| !placed[m]).map(|m| (m, DropReason::Unclustered)).collect();
        let specs = clusters
            .iter()
            .filter(|c| !c.members.is_empty())
            .map(|c| NodeSpec {
                cluster: c.clone(),
                robust: true,
            })
            .collect();
        return Ok((specs, profiles, dropped));
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new(), Vec::new()));
    }
    let calling = CallingConfig {
        normal_index: Some(input.samples.normal_index()),
        ..cfg.calling.clone()
    };
    let grouping = call_groups(&input.snvs, &calling)?;
    let clustering = ClusteringConfig {
        seed: cfg.seed,
        ..cfg.clustering.clone()
    };
    let clusters = cluster_groups(&grouping.groups, &input.snvs, &clustering)?;
    let specs = clusters
        .into_iter()
        .map(|(g, cluster)| NodeSpec {
            cluster,
            robust: grouping.groups[g].robust,
        })
        .collect();
    Ok((specs, grouping.called_profiles(n), grouping.dropped))
}

fn network_entry(net: &ConstraintNetwork) -> NetworkEntry {
    NetworkEntry {
        nodes: net
            .nodes
            .iter()
            .map(|n| NodeEntry {
                id: n.id,
                profile: n.profile,
                level: n.level,
                robust: n.robust,
                centroid: n.full_centroid.clone(),
                stderr: n.full_stderr.clone(),
                snvs: n.cluster.as_ref().map_or_else(Vec::new, |c| c.members.clone()),
            })
            .collect(),
        edges: net.edges.iter().copied().collect(),
    }
}

/// Runs the full inference on parsed input.
pub fn run_pipeline(cfg: &RunConfig, input: &PipelineInput) -> Result<ResultBundle> {
    cfg.validate()?;
    let s = input.samples.len();
    if let Some(bad) = input.snvs.iter().position(|r| r.vaf.len() != s) {
        return Err(Error::LengthMismatch {
            left: input.snvs[bad].vaf.len(),
            right: s,
        });
    }

    let (specs, profiles, mut dropped) = group_and_cluster(input, cfg)?;
    let (specs, unsupported) = enforce_node_support(number_specs(specs), &cfg.network);
    dropped.extend(unsupported);
    let mut net = build_network(&specs, s, &cfg.network);

    let mut search = SearchEntry::default();
    let mut ranked = Vec::new();
    let mut diagnostic = None;
    if net.nodes.len() == 1 {
        diagnostic = Some("no SSNV cluster left to place".to_string());
    } else {
        loop {
            let outcome = enumerate_trees(&net, &cfg.search);
            search.truncated = outcome.truncated;
            search.grow_calls += outcome.grow_calls;
            ranked = rank_trees(&net, &outcome.trees, &cfg.ranking);
            if ranked.first().is_some_and(|t| t.qp.is_some()) {
                search.trees_found = ranked.len();
                break;
            }
            ranked.clear();
            match adjust_network(&net, &cfg.network) {
                Some((next, removed)) => {
                    dropped.extend(removed.members.iter().map(|&m| (m, DropReason::NetworkAdjustment)));
                    search.adjustments += 1;
                    net = next;
                    if net.nodes.len() == 1 {
                        diagnostic = Some("network adjustment removed every node".to_string());
                        break;
                    }
                }
                None => {
                    diagnostic = Some("no valid tree and no node left to remove".to_string());
                    break;
                }
            }
        }
    }
    if search.truncated {
        log::warn!("tree search truncated after {} grow calls", search.grow_calls);
    }

    let normal = input.samples.normal_index();
    let trees: Vec<TreeEntry> = ranked
        .iter()
        .take(cfg.ranking.num_save)
        .map(|t| TreeEntry {
            rank: t.rank,
            edges: t.tree.edges.clone(),
            score: t.score(),
            local_score: t.local_score,
            objective: t.qp.as_ref().map(|q| q.objective),
            kkt_residual: t.qp.as_ref().map(|q| q.kkt_residual),
            deviations: t.qp.as_ref().map(|q| q.e.clone()).unwrap_or_default(),
            decompositions: (0..s)
                .filter(|&i| i != normal)
                .map(|i| decompose_sample(&net, &t.tree, i))
                .collect(),
        })
        .collect();

    let mut node_of = vec![None; input.snvs.len()];
    for n in &net.nodes {
        if let Some(c) = &n.cluster {
            for &m in &c.members {
                node_of[m] = Some(n.id);
            }
        }
    }
    let reason: BTreeMap<usize, DropReason> = dropped.into_iter().collect();
    let snvs = input
        .snvs
        .iter()
        .enumerate()
        .map(|(i, r)| SnvEntry {
            row: i,
            chrom: r.chrom.clone(),
            pos: r.pos,
            desc: r.desc.clone(),
            vaf: r.vaf.clone(),
            profile: profiles.get(i).copied().flatten(),
            node: node_of[i],
            dropped: if node_of[i].is_some() { None } else { reason.get(&i).copied() },
        })
        .collect::<Vec<_>>();
    debug_assert!(snvs.iter().all(|e| e.node.is_some() != e.dropped.is_some()));

    Ok(ResultBundle {
        metadata: Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            format: BUNDLE_FORMAT,
            config: cfg.clone(),
            timestamp: None,
        },
        samples: input.samples.names().to_vec(),
        normal_index: normal,
        snvs,
        network: network_entry(&net),
        trees,
        search,
        diagnostic,
    })
}
