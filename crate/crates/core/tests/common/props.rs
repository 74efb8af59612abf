//! Property checks shared by the per-module suites and the acceptance run.

use std::collections::BTreeSet;

use lineage::calling::{call_groups, cover_residual, mark_presence, CallingConfig, SnvGroup, Unresolved};
use lineage::clustering::{fit_clusters, fit_mixture, prune_and_collapse, ClusteringConfig, GroupVafMatrix};
use lineage::model::{BinaryProfile, Cluster, Mark, SnvRecord, TernaryProfile};
use lineage::network::{admits_edge, build_network, NetworkConfig, NodeSpec};
use lineage::search::{enumerate_trees, tree_satisfies_sums, SearchConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = std::result::Result<(), TestCaseError>;

pub const COVERS_CASES: u32 = 1000;
pub const TERNARY_CASES: u32 = 1000;
pub const GROUPING_CASES: u32 = 1000;
pub const COVER_BOUND_CASES: u32 = 1000;
pub const CLUSTERING_CASES: u32 = 100;
pub const NETWORK_CASES: u32 = 100;
pub const SEARCH_CASES: u32 = 200;

fn bits(len: usize) -> impl Strategy<Value = BinaryProfile> {
    prop::collection::vec(any::<bool>(), len).prop_map(|b| BinaryProfile::from_bits(&b))
}

pub fn profile_triple() -> impl Strategy<Value = (BinaryProfile, BinaryProfile, BinaryProfile)> {
    (1usize..=12).prop_flat_map(|n| (bits(n), bits(n), bits(n)))
}

pub fn check_covers((a, b, c): (BinaryProfile, BinaryProfile, BinaryProfile)) -> Check {
    let cov = |p: &BinaryProfile, q: &BinaryProfile| p.covers(q).unwrap();
    // independent definition: every present sample of the child is present in the parent
    let oracle = |p: &BinaryProfile, q: &BinaryProfile| (0..p.len()).all(|i| !q.get(i) || p.get(i));
    prop_assert_eq!(cov(&a, &b), oracle(&a, &b));
    prop_assert!(cov(&a, &a));
    if cov(&a, &b) && cov(&b, &a) {
        prop_assert_eq!(a, b);
    }
    if cov(&a, &b) && cov(&b, &c) {
        prop_assert!(cov(&a, &c));
    }
    if cov(&a, &b) {
        prop_assert!(a.hamming_weight() >= b.hamming_weight());
    }
    Ok(())
}

pub fn ternary() -> impl Strategy<Value = TernaryProfile> {
    let mark = prop_oneof![Just(Mark::Absent), Just(Mark::Present), Just(Mark::Grey)];
    prop::collection::vec(mark, 1..=10).prop_map(TernaryProfile::new)
}

pub fn check_ternary(t: TernaryProfile) -> Check {
    let n = t.len();
    let mut compatible = 0usize;
    for mask in 0u64..(1 << n) {
        let g = BinaryProfile::from_bits(&(0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>());
        if t.compatible(&g).unwrap() {
            compatible += 1;
        }
    }
    prop_assert_eq!(compatible, 1 << t.num_stars());
    let exp = t.expansions();
    prop_assert_eq!(exp.len(), 1 << t.num_stars());
    prop_assert!(exp.windows(2).all(|w| w[0] < w[1]));
    prop_assert!(exp.iter().all(|g| t.compatible(g).unwrap()));
    prop_assert_eq!(t.to_binary().is_some(), t.num_stars() == 0);
    Ok(())
}

fn vaf_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        (0u32..=5).prop_map(|v| v as f64 / 1000.0),
        (6u32..=12).prop_map(|v| v as f64 / 1000.0),
        (10u32..=500).prop_map(|v| v as f64 / 1000.0),
    ]
}

/// A small SSNV table drawn from a handful of template rows so that profiles
/// repeat, plus a calling configuration.
pub fn calling_input() -> impl Strategy<Value = (Vec<SnvRecord>, CallingConfig)> {
    (2usize..=6).prop_flat_map(|s| {
        let templates = prop::collection::vec(prop::collection::vec(vaf_value(), s), 1..=5);
        let picks = prop::collection::vec((0usize..5, prop::collection::vec(-3i32..=3, s)), 1..=30);
        let cfg = (
            prop_oneof![Just(None), Just(Some(0usize))],
            0usize..=2,
            prop_oneof![Just(0.01), Just(0.008)],
        );
        (templates, picks, cfg).prop_map(move |(templates, picks, (normal, peers, tp))| {
            let snvs = picks
                .into_iter()
                .map(|(k, jitter)| {
                    let base = &templates[k % templates.len()];
                    let vaf: Vec<f64> = base
                        .iter()
                        .zip(jitter)
                        .map(|(&v, j)| if v == 0.0 { 0.0 } else { (v + j as f64 / 1000.0).clamp(0.0, 1.0) })
                        .collect();
                    SnvRecord::from_vafs(&vaf)
                })
                .collect();
            let cfg = CallingConfig {
                t_present: tp,
                t_absent: 0.005,
                min_robust_peers: peers,
                normal_index: normal,
                ..Default::default()
            };
            (snvs, cfg)
        })
    })
}

pub fn check_grouping((snvs, cfg): (Vec<SnvRecord>, CallingConfig)) -> Check {
    let g = call_groups(&snvs, &cfg).unwrap();
    let mut seen = BTreeSet::new();
    for grp in &g.groups {
        prop_assert!(!grp.members.is_empty());
        prop_assert!(!grp.profile.is_zero() && !grp.profile.is_all_ones());
        if let Some(n) = cfg.normal_index {
            prop_assert!(!grp.profile.get(n));
        }
        if grp.robust {
            prop_assert!(grp.members.len() > cfg.min_robust_peers);
        }
        for &m in &grp.members {
            prop_assert!(seen.insert(m), "SSNV {} in two groups", m);
            prop_assert!(mark_presence(&snvs[m], &cfg).compatible(&grp.profile).unwrap());
        }
    }
    for &(m, _) in &g.dropped {
        prop_assert!(seen.insert(m), "SSNV {} both grouped and dropped", m);
    }
    prop_assert_eq!(seen.len(), snvs.len());
    let profiles: Vec<_> = g.groups.iter().map(|x| x.profile).collect();
    prop_assert!(profiles.windows(2).all(|w| w[0] < w[1]));

    let again = call_groups(&snvs, &cfg).unwrap();
    prop_assert_eq!(&g.groups, &again.groups);
    prop_assert_eq!(&g.dropped, &again.dropped);
    Ok(())
}

/// Residual SSNVs with at least one greyzone sample, at most 12 of them.
pub fn residual_input() -> impl Strategy<Value = Vec<SnvRecord>> {
    (2usize..=4).prop_flat_map(|s| {
        let row = prop::collection::vec(vaf_value(), s).prop_filter("needs a greyzone sample", |r| {
            r.iter().any(|&v| v > 0.005 && v < 0.01)
        });
        prop::collection::vec(row, 1..=12)
    })
    .prop_map(|rows| rows.iter().map(|r| SnvRecord::from_vafs(r)).collect())
}

fn min_cover(sets: &[Vec<BinaryProfile>]) -> usize {
    let universe: BTreeSet<BinaryProfile> = sets.iter().flatten().copied().collect();
    let targets: Vec<BinaryProfile> = universe.into_iter().collect();
    // iterative deepening over target subsets
    for k in 0..=sets.len() {
        let mut chosen = Vec::new();
        if choose(&targets, 0, k, &mut chosen, sets) {
            return k;
        }
    }
    sets.len()
}

fn choose(
    targets: &[BinaryProfile],
    from: usize,
    left: usize,
    chosen: &mut Vec<BinaryProfile>,
    sets: &[Vec<BinaryProfile>],
) -> bool {
    if sets.iter().all(|s| s.iter().any(|t| chosen.contains(t))) {
        return true;
    }
    if left == 0 {
        return false;
    }
    for i in from..targets.len() {
        chosen.push(targets[i]);
        if choose(targets, i + 1, left - 1, chosen, sets) {
            return true;
        }
        chosen.pop();
    }
    false
}

pub fn check_cover_bound(snvs: Vec<SnvRecord>) -> Check {
    let cfg = CallingConfig::default();
    let residual: Vec<Unresolved> = snvs
        .iter()
        .enumerate()
        .map(|(snv, r)| Unresolved { snv, profile: mark_presence(r, &cfg) })
        .collect();
    let (groups, dropped) = cover_residual(&residual, &snvs, &cfg);
    let placed: usize = groups.iter().map(|g| g.members.len()).sum();
    prop_assert_eq!(placed + dropped.len(), snvs.len());
    prop_assert!(groups.len() <= snvs.len());

    let coverable: Vec<Vec<BinaryProfile>> = residual
        .iter()
        .map(|u| {
            u.profile
                .expansions()
                .into_iter()
                .filter(|p| !p.is_zero() && !p.is_all_ones())
                .collect::<Vec<_>>()
        })
        .filter(|t| !t.is_empty())
        .collect();
    let opt = min_cover(&coverable);
    let n = coverable.len();
    let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    prop_assert!(
        groups.len() as f64 <= opt as f64 * harmonic + 1e-9,
        "greedy {} groups, optimum {} over {} SSNVs",
        groups.len(),
        opt,
        n
    );
    for g in &groups {
        for &m in &g.members {
            prop_assert!(residual[m].profile.compatible(&g.profile).unwrap());
        }
    }
    Ok(())
}

/// One profile group with rows drawn around up to three modes.
pub fn clustering_input() -> impl Strategy<Value = (Vec<Vec<f64>>, BinaryProfile, ClusteringConfig)> {
    (2usize..=5, 1usize..=3)
        .prop_flat_map(|(s, d)| {
            let d = d.min(s - 1);
            let modes = prop::collection::vec(prop::collection::vec(20u32..=480, d), 1..=3);
            let rows = prop::collection::vec((0usize..3, prop::collection::vec(-15i32..=15, d)), 1..=25);
            let cfg = (1usize..=3, 0u32..=15, any::<u64>());
            (Just(s), Just(d), modes, rows, cfg)
        })
        .prop_map(|(s, d, modes, rows, (min_size, collapse, seed))| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|(k, jitter)| {
                    let mode = &modes[k % modes.len()];
                    mode.iter().zip(jitter).map(|(&m, j)| (m as i32 + j) as f64 / 1000.0).collect()
                })
                .collect();
            let profile = BinaryProfile::from_bits(&(0..s).map(|i| i >= s - d).collect::<Vec<_>>());
            let cfg = ClusteringConfig {
                min_cluster_size: min_size,
                min_private_cluster_size: min_size,
                collapse_distance: collapse as f64 / 100.0,
                seed,
                ..Default::default()
            };
            (rows, profile, cfg)
        })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn check_clustering((rows, profile, cfg): (Vec<Vec<f64>>, BinaryProfile, ClusteringConfig)) -> Check {
    let snvs: Vec<SnvRecord> = rows
        .iter()
        .map(|r| {
            let mut full = vec![0.0; profile.len()];
            for (v, i) in r.iter().zip(profile.ones()) {
                full[i] = *v;
            }
            SnvRecord::from_vafs(&full)
        })
        .collect();
    let group = SnvGroup { profile, members: (0..rows.len()).collect(), robust: true };
    let m = GroupVafMatrix::new(&group, &snvs);
    let fitted = fit_clusters(&m, &snvs, &cfg);
    let clusters = prune_and_collapse(fitted.clone(), &snvs, &cfg);

    let mut members: Vec<usize> = clusters.iter().flat_map(|c| c.members.clone()).collect();
    members.sort_unstable();
    prop_assert_eq!(members, group.members.clone());
    for c in &clusters {
        prop_assert_eq!(c.profile, profile);
        prop_assert_eq!(c.centroid.len(), profile.hamming_weight());
        prop_assert_eq!(c.stderr.len(), profile.hamming_weight());
        prop_assert!(c.centroid.iter().all(|v| (0.0..=1.0).contains(v)));
        if clusters.len() > 1 {
            prop_assert!(c.size() >= cfg.min_cluster_size);
        }
    }
    for (i, a) in clusters.iter().enumerate() {
        for b in &clusters[i + 1..] {
            prop_assert!(distance(&a.centroid, &b.centroid) >= cfg.collapse_distance);
        }
    }
    prop_assert_eq!(&fitted, &fit_clusters(&m, &snvs, &cfg));

    let mut rng = lineage::rng::stream(cfg.seed, b"monotone");
    for k in 1..=rows.len().min(3) {
        let mix = fit_mixture(&m.rows, k, &cfg, &mut rng);
        for w in mix.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "k={}: {} -> {}", k, w[0], w[1]);
        }
    }
    Ok(())
}

/// Node specs with random non-trivial profiles, plus a network configuration.
pub fn network_input() -> impl Strategy<Value = (usize, Vec<NodeSpec>, NetworkConfig)> {
    (2usize..=5)
        .prop_flat_map(|s| {
            let node = (
                prop::collection::vec(any::<bool>(), s),
                prop::collection::vec(1u32..=50, s),
                1usize..=3,
                any::<bool>(),
            );
            (Just(s), prop::collection::vec(node, 1..=10), any::<bool>(), 0u32..=10)
        })
        .prop_map(|(s, nodes, constrain, eps)| {
            let mut snvs = Vec::new();
            let mut specs = Vec::new();
            for (bits, vaf, copies, robust) in nodes {
                let profile = BinaryProfile::from_bits(&bits);
                if profile.is_zero() || profile.is_all_ones() {
                    continue;
                }
                let mut members = Vec::new();
                for c in 0..copies {
                    let row: Vec<f64> = (0..s)
                        .map(|i| if bits[i] { (vaf[i] + c as u32) as f64 / 100.0 } else { 0.0 })
                        .collect();
                    members.push(snvs.len());
                    snvs.push(SnvRecord::from_vafs(&row));
                }
                let cluster = Cluster::from_members(specs.len() + 1, profile, members, &snvs);
                specs.push(NodeSpec { cluster, robust });
            }
            let cfg = NetworkConfig {
                constrain_private: constrain,
                epsilon_edge: eps as f64 / 100.0,
                ..Default::default()
            };
            (s, specs, cfg)
        })
}

pub fn check_network((s, specs, cfg): (usize, Vec<NodeSpec>, NetworkConfig)) -> Check {
    let net = build_network(&specs, s, &cfg);
    prop_assert_eq!(net.nodes.len(), specs.len() + 1);
    prop_assert!(net.topological_order().is_some());
    let root = net.node(net.root_id);
    prop_assert_eq!(root.level, s);
    prop_assert!(root.full_centroid.iter().all(|&v| v == cfg.root_vaf));
    for n in &net.nodes {
        prop_assert_eq!(n.level, n.profile.hamming_weight());
        if !n.is_root() {
            prop_assert!(net.parents_of(n.id).next().is_some(), "node {} has no parent", n.id);
        }
    }
    for &(p, c) in &net.edges {
        let (u, v) = (net.node(p), net.node(c));
        prop_assert!(admits_edge(u, v, &cfg), "edge {}->{} not admitted", p, c);
        prop_assert!(u.profile.covers(&v.profile).unwrap() || u.profile == v.profile);
        prop_assert!(u.level >= v.level);
        if u.level == v.level {
            prop_assert_eq!(u.profile, v.profile);
        }
    }
    let again = build_network(&specs, s, &cfg);
    prop_assert_eq!(&net, &again);
    Ok(())
}

pub fn dag_seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

pub fn check_search(seed: u64) -> Check {
    let mut rng = lineage::rng::stream(seed, b"search-props");
    let net = super::random_dag(&mut rng, 8, 16, 2);
    let cfg = SearchConfig::default();
    let out = enumerate_trees(&net, &cfg);
    let found: BTreeSet<_> = out.trees.iter().cloned().collect();
    prop_assert_eq!(found.len(), out.trees.len(), "duplicate trees");
    for t in &out.trees {
        prop_assert_eq!(t.edges.len(), net.nodes.len() - 1);
        prop_assert!(t.edges.iter().all(|e| net.edges.contains(e)));
        prop_assert!(tree_satisfies_sums(&net, t, cfg.epsilon_tree));
    }
    prop_assert_eq!(&found, &super::brute_force_trees(&net, cfg.epsilon_tree));
    prop_assert!(!out.truncated);

    let capped = enumerate_trees(&net, &SearchConfig { max_trees: 2, ..cfg });
    prop_assert_eq!(capped.trees.len(), found.len().min(2));
    prop_assert_eq!(capped.truncated, found.len() >= 2);
    Ok(())
}

/// Runs one check for `cases` cases from a fixed seed, for use outside the
/// test harness. Returns the failure message, if any.
pub fn run<S: Strategy>(cases: u32, strategy: S, check: fn(S::Value) -> Check) -> std::result::Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, check)
        .map_err(|e| e.to_string())
}
