//! Scoring reconstructions against simulated ground truth, and replicate
//! experiments over the simulator.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampleSet;
use crate::pipeline::{run_pipeline, PipelineInput, ResultBundle, RunConfig, TreeEntry};
use crate::rng;
use crate::simulator::{simulate, GroundTruth, NoiseConfig, Scheme, SimulationConfig};

/// Percentages are `None` when their denominator is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub num_sim_snvs: f64,
    pub pct_snvs_assigned_correctly: Option<f64>,
    pub pct_snvs_in_tree: Option<f64>,
    pub pct_ad_pairs: Option<f64>,
    pub pct_ad_ordered: Option<f64>,
    pub pct_ad_correct: Option<f64>,
    pub pct_ad_to_sib: Option<f64>,
    pub pct_ad_to_sib_nonprivate: Option<f64>,
    pub pct_sib_pairs: Option<f64>,
    pub pct_sib_correct: Option<f64>,
    pub pct_sib_to_ad: Option<f64>,
    pub pct_sib_to_ad_nonprivate: Option<f64>,
    pub trees_reconstructed: usize,
}

/// True relationship of an SSNV pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    /// The first SSNV's origin is a strict ancestor of the second's.
    AncestorOf,
    /// The second SSNV's origin is a strict ancestor of the first's.
    DescendantOf,
    /// Any other pair, including two SSNVs from the same population.
    Sibling,
}

impl PairClass {
    pub fn is_ad(self) -> bool {
        self != PairClass::Sibling
    }
}

/// Reconstructed relationship of a pair whose SSNVs both sit in the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    SameNode,
    AncestorOf,
    DescendantOf,
    Separate,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Percentage of SSNVs whose called profile equals the true presence
/// pattern.
pub fn presence_sensitivity(truth: &GroundTruth, bundle: &ResultBundle) -> Option<f64> {
    let ok = truth
        .presence
        .iter()
        .zip(&bundle.snvs)
        .filter(|(p, e)| e.profile.as_ref() == Some(p))
        .count();
    pct(ok, truth.presence.len())
}

pub fn classify_pair(truth: &GroundTruth, a: usize, b: usize) -> PairClass {
    let (oa, ob) = (truth.origin[a], truth.origin[b]);
    if truth.is_ancestor(oa, ob) {
        PairClass::AncestorOf
    } else if truth.is_ancestor(ob, oa) {
        PairClass::DescendantOf
    } else {
        PairClass::Sibling
    }
}

/// Classifies every SSNV pair `(a, b)` with `a < b`.
pub fn pair_relationships(truth: &GroundTruth) -> Vec<(usize, usize, PairClass)> {
    let n = truth.origin.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            out.push((a, b, classify_pair(truth, a, b)));
        }
    }
    out
}

/// Ancestor sets of the tree's nodes, as a dense matrix over node ids.
struct TreeIndex {
    anc: Vec<Vec<bool>>,
}

impl TreeIndex {
    fn new(tree: &TreeEntry, max_id: usize) -> Self {
        let mut anc = vec![vec![false; max_id + 1]; max_id + 1];
        for (v, row) in anc.iter_mut().enumerate() {
            let mut cur = tree.parent_of(v);
            while let Some(p) = cur {
                row[p] = true;
                cur = tree.parent_of(p);
            }
        }
        Self { anc }
    }

    fn placement(&self, u: usize, v: usize) -> Placement {
        if u == v {
            Placement::SameNode
        } else if self.anc[v][u] {
            Placement::AncestorOf
        } else if self.anc[u][v] {
            Placement::DescendantOf
        } else {
            Placement::Separate
        }
    }
}

#[derive(Default)]
struct Counts {
    total: usize,
    in_tree: usize,
    ordered: usize,
    correct: usize,
    crossed: usize,
    np_in_tree: usize,
    np_crossed: usize,
}

/// Scores the top-ranked tree of `bundle` against the truth.
pub fn compare_tree(truth: &GroundTruth, bundle: &ResultBundle) -> MetricReport {
    let n = truth.origin.len();
    let mut report = MetricReport {
        num_sim_snvs: n as f64,
        pct_snvs_assigned_correctly: presence_sensitivity(truth, bundle),
        ..Default::default()
    };
    let Some(tree) = bundle.trees.first() else {
        return report;
    };
    report.trees_reconstructed = 1;

    let max_id = bundle.network.nodes.iter().map(|x| x.id).max().unwrap_or(0);
    let index = TreeIndex::new(tree, max_id);
    let mut private = vec![false; max_id + 1];
    for x in &bundle.network.nodes {
        private[x.id] = x.profile.hamming_weight() == 1;
    }
    let node: Vec<Option<usize>> = bundle.snvs.iter().map(|e| e.node).collect();
    report.pct_snvs_in_tree = pct(node.iter().filter(|x| x.is_some()).count(), n);

    let (mut ad, mut sib) = (Counts::default(), Counts::default());
    for (a, b, class) in pair_relationships(truth) {
        let c = if class.is_ad() { &mut ad } else { &mut sib };
        c.total += 1;
        let (Some(u), Some(v)) = (node[a], node[b]) else {
            continue;
        };
        c.in_tree += 1;
        let nonprivate = !private[u] && !private[v];
        c.np_in_tree += usize::from(nonprivate);
        let placed = index.placement(u, v);
        if class.is_ad() {
            match placed {
                Placement::SameNode => {}
                Placement::Separate => {
                    c.crossed += 1;
                    c.np_crossed += usize::from(nonprivate);
                }
                Placement::AncestorOf | Placement::DescendantOf => {
                    c.ordered += 1;
                    let right = matches!(
                        (class, placed),
                        (PairClass::AncestorOf, Placement::AncestorOf)
                            | (PairClass::DescendantOf, Placement::DescendantOf)
                    );
                    c.correct += usize::from(right);
                }
            }
        } else {
            match placed {
                Placement::SameNode => {}
                Placement::Separate => c.correct += 1,
                Placement::AncestorOf | Placement::DescendantOf => {
                    c.crossed += 1;
                    c.np_crossed += usize::from(nonprivate);
                }
            }
        }
    }
    report.pct_ad_pairs = pct(ad.in_tree, ad.total);
    report.pct_ad_ordered = pct(ad.ordered, ad.in_tree);
    report.pct_ad_correct = pct(ad.correct, ad.ordered);
    report.pct_ad_to_sib = pct(ad.crossed, ad.in_tree);
    report.pct_ad_to_sib_nonprivate = pct(ad.np_crossed, ad.np_in_tree);
    report.pct_sib_pairs = pct(sib.in_tree, sib.total);
    report.pct_sib_correct = pct(sib.correct, sib.in_tree);
    report.pct_sib_to_ad = pct(sib.crossed, sib.in_tree);
    report.pct_sib_to_ad_nonprivate = pct(sib.np_crossed, sib.np_in_tree);
    report
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut k) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        k += 1;
    }
    (k > 0).then(|| sum / k as f64)
}

/// Averages replicate reports. Calling sensitivity and the SSNV count are
/// averaged over all replicates, tree metrics over replicates with a tree.
pub fn average(reports: &[MetricReport]) -> MetricReport {
    let with_tree: Vec<&MetricReport> = reports.iter().filter(|r| r.trees_reconstructed > 0).collect();
    let over = |f: fn(&MetricReport) -> Option<f64>| mean(with_tree.iter().map(|r| f(r)));
    MetricReport {
        num_sim_snvs: mean(reports.iter().map(|r| Some(r.num_sim_snvs))).unwrap_or(0.0),
        pct_snvs_assigned_correctly: mean(reports.iter().map(|r| r.pct_snvs_assigned_correctly)),
        pct_snvs_in_tree: over(|r| r.pct_snvs_in_tree),
        pct_ad_pairs: over(|r| r.pct_ad_pairs),
        pct_ad_ordered: over(|r| r.pct_ad_ordered),
        pct_ad_correct: over(|r| r.pct_ad_correct),
        pct_ad_to_sib: over(|r| r.pct_ad_to_sib),
        pct_ad_to_sib_nonprivate: over(|r| r.pct_ad_to_sib_nonprivate),
        pct_sib_pairs: over(|r| r.pct_sib_pairs),
        pct_sib_correct: over(|r| r.pct_sib_correct),
        pct_sib_to_ad: over(|r| r.pct_sib_to_ad),
        pct_sib_to_ad_nonprivate: over(|r| r.pct_sib_to_ad_nonprivate),
        trees_reconstructed: with_tree.len(),
    }
}

/// Inference settings for simulated data: every simulated population
/// carries a single SSNV, so single-SSNV clusters and nodes are kept, and
/// private nodes may attach to any admissible parent.
pub fn simulation_run_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.clustering.min_cluster_size = 1;
    cfg.clustering.min_private_cluster_size = 1;
    cfg.network.min_node_support = 1;
    cfg.network.constrain_private = false;
    cfg
}

/// One row of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub sim: SimulationConfig,
    pub scheme: Scheme,
    pub num_samples: usize,
    pub noise: NoiseConfig,
    pub replicates: usize,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub summary: MetricReport,
    /// Mean percentage of collected SSNVs hit by a CNV.
    pub pct_cnv_affected: f64,
    pub replicates: Vec<MetricReport>,
}

/// Simulates one replicate, reconstructs it and scores the top tree.
pub fn run_replicate(exp: &Experiment, index: usize) -> Result<(MetricReport, f64)> {
    let seed = rng::derive_seed(exp.sim.seed, format!("replicate{index}").as_bytes());
    let sim = SimulationConfig { seed, ..exp.sim.clone() };
    let ds = simulate(&sim, exp.scheme, exp.num_samples, &exp.noise);
    let input = PipelineInput {
        samples: SampleSet::new(ds.sample_names(), 0)?,
        snvs: ds.records(),
        clusters: None,
    };
    let run = RunConfig { seed, ..exp.run.clone() };
    let bundle = run_pipeline(&run, &input)?;
    Ok((compare_tree(&GroundTruth::from_dataset(&ds), &bundle), ds.pct_cnv_affected()))
}

/// Runs all replicates in parallel; results do not depend on thread count.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentResult> {
    let results: Vec<(MetricReport, f64)> = (0..exp.replicates)
        .into_par_iter()
        .map(|i| run_replicate(exp, i))
        .collect::<Result<_>>()?;
    let reports: Vec<MetricReport> = results.iter().map(|r| r.0.clone()).collect();
    let cnv = results.iter().map(|r| r.1).sum::<f64>() / results.len().max(1) as f64;
    Ok(ExperimentResult {
        experiment: exp.clone(),
        summary: average(&reports),
        pct_cnv_affected: cnv,
        replicates: reports,
    })
}

pub const METRIC_COLUMNS: [&str; 18] = [
    "samples",
    "coverage",
    "scheme",
    "replicates",
    "trees",
    "sim_ssnvs",
    "pct_cnv",
    "sensitivity",
    "pct_ssnvs",
    "pct_ad",
    "pct_ad_ord",
    "pct_ad_corr",
    "pct_ad_to_sib",
    "pct_ad_to_sib_nopriv",
    "pct_sib",
    "pct_sib_corr",
    "pct_sib_to_ad",
    "pct_sib_to_ad_nopriv",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.1}"))
}

/// Tab-separated metrics table, one row per experiment.
pub fn metrics_table(results: &[ExperimentResult]) -> String {
    let mut out = METRIC_COLUMNS.join("\t");
    out.push('\n');
    for r in results {
        let e = &r.experiment;
        let s = &r.summary;
        let cov = e.noise.coverage.map_or_else(|| "t-VAF".to_string(), |c| c.to_string());
        let cells = [
            e.num_samples.to_string(),
            cov,
            e.scheme.to_string(),
            e.replicates.to_string(),
            s.trees_reconstructed.to_string(),
            format!("{:.1}", s.num_sim_snvs),
            format!("{:.1}", r.pct_cnv_affected),
            fmt_opt(s.pct_snvs_assigned_correctly),
            fmt_opt(s.pct_snvs_in_tree),
            fmt_opt(s.pct_ad_pairs),
            fmt_opt(s.pct_ad_ordered),
            fmt_opt(s.pct_ad_correct),
            fmt_opt(s.pct_ad_to_sib),
            fmt_opt(s.pct_ad_to_sib_nonprivate),
            fmt_opt(s.pct_sib_pairs),
            fmt_opt(s.pct_sib_correct),
            fmt_opt(s.pct_sib_to_ad),
            fmt_opt(s.pct_sib_to_ad_nonprivate),
        ];
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}

pub fn write_metrics(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    std::fs::write(path, metrics_table(results)).map_err(|e| Error::io(path, e))
}
