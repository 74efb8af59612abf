//! Frequency clustering within each profile group: diagonal Gaussian mixtures
//! fitted by EM with BIC model selection, followed by size pruning and
//! proximity collapsing.

use log::{debug, warn};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::calling::SnvGroup;
use crate::error::{Error, Result};
use crate::model::{BinaryProfile, Cluster, SnvRecord};
use crate::rng::{self, Rng};

/// Lower bound on every component variance.
pub const VARIANCE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub max_components: usize,
    pub min_cluster_size: usize,
    pub min_private_cluster_size: usize,
    /// Clusters whose centroids are closer than this are merged.
    pub collapse_distance: f64,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub em_restarts: usize,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            max_components: 5,
            min_cluster_size: 2,
            min_private_cluster_size: 1,
            collapse_distance: 0.1,
            em_max_iters: 200,
            em_tol: 1e-6,
            em_restarts: 3,
            seed: 0,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 {
            return Err(Error::InvalidConfig("max_components must be at least 1".into()));
        }
        if !(self.collapse_distance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "collapse distance {} must be non-negative",
                self.collapse_distance
            )));
        }
        Ok(())
    }

    fn min_size_for(&self, profile: &BinaryProfile) -> usize {
        if profile.hamming_weight() == 1 {
            self.min_private_cluster_size
        } else {
            self.min_cluster_size
        }
    }
}

/// Member frequencies of one group restricted to its present samples.
#[derive(Debug, Clone)]
pub struct GroupVafMatrix {
    pub profile: BinaryProfile,
    pub members: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl GroupVafMatrix {
    pub fn new(group: &SnvGroup, snvs: &[SnvRecord]) -> Self {
        let cols: Vec<usize> = group.profile.ones().collect();
        let rows = group
            .members
            .iter()
            .map(|&m| cols.iter().map(|&c| snvs[m].vaf[c]).collect())
            .collect();
        Self {
            profile: group.profile,
            members: group.members.clone(),
            rows,
        }
    }

    pub fn dims(&self) -> usize {
        self.profile.hamming_weight()
    }
}

/// A fitted diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Log-likelihood after every EM iteration.
    pub trace: Vec<f64>,
}

impl Mixture {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn num_parameters(&self) -> usize {
        let k = self.num_components();
        let d = self.means.first().map_or(0, Vec::len);
        k * 2 * d + k - 1
    }

    pub fn bic(&self, n: usize) -> f64 {
        -2.0 * self.log_likelihood + self.num_parameters() as f64 * (n as f64).ln()
    }

    fn log_component(&self, k: usize, x: &[f64]) -> f64 {
        if self.weights[k] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lp = self.weights[k].ln();
        for ((&xi, &mu), &var) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
            lp -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (xi - mu).powi(2) / var);
        }
        lp
    }

    /// Per-row responsibilities and the total log-likelihood.
    fn e_step(&self, rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let mut ll = 0.0;
        let resp = rows
            .iter()
            .map(|x| {
                let lps: Vec<f64> = (0..self.num_components())
                    .map(|k| self.log_component(k, x))
                    .collect();
                let max = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = lps.iter().map(|&l| (l - max).exp()).sum();
                let lse = max + sum.ln();
                ll += lse;
                lps.iter().map(|&l| (l - lse).exp()).collect()
            })
            .collect();
        (resp, ll)
    }

    fn m_step(&mut self, rows: &[Vec<f64>], resp: &[Vec<f64>]) {
        let n = rows.len() as f64;
        let d = rows[0].len();
        for k in 0..self.num_components() {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk < 1e-12 {
                self.weights[k] = 0.0;
                continue;
            }
            self.weights[k] = nk / n;
            for j in 0..d {
                let mean = rows.iter().zip(resp).map(|(x, r)| r[k] * x[j]).sum::<f64>() / nk;
                let var = rows
                    .iter()
                    .zip(resp)
                    .map(|(x, r)| r[k] * (x[j] - mean).powi(2))
                    .sum::<f64>()
                    / nk;
                self.means[k][j] = mean;
                self.variances[k][j] = var.max(VARIANCE_FLOOR);
            }
        }
    }

    /// Index of the maximum-responsibility component for each row.
    pub fn assign(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter()
            .map(|x| {
                let mut best = 0;
                let mut best_lp = f64::NEG_INFINITY;
                for k in 0..self.num_components() {
                    let lp = self.log_component(k, x);
                    if lp > best_lp {
                        best_lp = lp;
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// D²-weighted seeding: the first centre uniformly, each further centre with
/// probability proportional to its squared distance from the nearest centre.
fn seed_centres(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centres = vec![rows[rng.random_range(0..rows.len())].clone()];
    while centres.len() < k {
        let d2: Vec<f64> = rows
            .iter()
            .map(|x| {
                centres
                    .iter()
                    .map(|c| sq_dist(x, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..rows.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut idx = rows.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        };
        centres.push(rows[pick].clone());
    }
    centres
}

/// Fits a `k`-component mixture by EM from seeded hard assignments.
pub fn fit_mixture(rows: &[Vec<f64>], k: usize, cfg: &ClusteringConfig, rng: &mut Rng) -> Mixture {
    let d = rows[0].len();
    let centres = seed_centres(rows, k, rng);
    let labels: Vec<usize> = rows
        .iter()
        .map(|x| {
            (0..k)
                .min_by(|&a, &b| sq_dist(x, &centres[a]).total_cmp(&sq_dist(x, &centres[b])))
                .unwrap()
        })
        .collect();
    let mut mix = Mixture {
        weights: vec![1.0 / k as f64; k],
        means: centres,
        variances: vec![vec![VARIANCE_FLOOR; d]; k],
        log_likelihood: f64::NEG_INFINITY,
        trace: Vec::new(),
    };
    let resp: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..k).map(|j| if j == l { 1.0 } else { 0.0 }).collect())
        .collect();
    mix.m_step(rows, &resp);
    for c in 0..k {
        // a seed centre that attracted no rows keeps its position
        if mix.weights[c] == 0.0 {
            mix.weights[c] = 1.0 / rows.len() as f64;
        }
    }
    let total: f64 = mix.weights.iter().sum();
    mix.weights.iter_mut().for_each(|w| *w /= total);

    let mut prev = f64::NEG_INFINITY;
    for _ in 0..cfg.em_max_iters.max(1) {
        let (resp, ll) = mix.e_step(rows);
        mix.trace.push(ll);
        mix.log_likelihood = ll;
        if ll - prev < cfg.em_tol {
            break;
        }
        prev = ll;
        mix.m_step(rows, &resp);
    }
    // the reported likelihood must match the final parameters
    let (_, ll) = mix.e_step(rows);
    if ll > mix.log_likelihood {
        mix.trace.push(ll);
    }
    mix.log_likelihood = ll;
    mix
}

/// Fits mixtures for every admissible component count and keeps the one
/// with the lowest BIC (fewer components on ties).
pub fn select_mixture(rows: &[Vec<f64>], cfg: &ClusteringConfig, rng: &mut Rng) -> Mixture {
    let kmax = cfg.max_components.min(rows.len()).max(1);
    let mut best: Option<(f64, Mixture)> = None;
    for k in 1..=kmax {
        let mut best_k: Option<Mixture> = None;
        for _ in 0..cfg.em_restarts.max(1) {
            let m = fit_mixture(rows, k, cfg, rng);
            if best_k
                .as_ref()
                .is_none_or(|b| m.log_likelihood > b.log_likelihood)
            {
                best_k = Some(m);
            }
        }
        let m = best_k.unwrap();
        let bic = m.bic(rows.len());
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, m));
        }
    }
    best.unwrap().1
}

/// Clusters one group's members by their frequencies. Returned clusters are
/// ordered by smallest member index and carry placeholder ids.
pub fn fit_clusters(m: &GroupVafMatrix, snvs: &[SnvRecord], cfg: &ClusteringConfig) -> Vec<Cluster> {
    assert!(!m.rows.is_empty(), "cannot cluster an empty group");
    if m.rows.len() == 1 {
        return vec![Cluster::from_members(0, m.profile, m.members.clone(), snvs)];
    }
    let mut rng = rng::stream(cfg.seed, m.profile.to_string().as_bytes());
    let mix = select_mixture(&m.rows, cfg, &mut rng);
    let labels = mix.assign(&m.rows);
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); mix.num_components()];
    for (&label, &member) in labels.iter().zip(&m.members) {
        parts[label].push(member);
    }
    let mut parts: Vec<Vec<usize>> = parts.into_iter().filter(|p| !p.is_empty()).collect();
    parts.iter_mut().for_each(|p| p.sort_unstable());
    parts.sort_by_key(|p| p[0]);
    debug!(
        "group {}: {} members -> {} clusters",
        m.profile,
        m.members.len(),
        parts.len()
    );
    parts
        .into_iter()
        .enumerate()
        .map(|(i, members)| Cluster::from_members(i, m.profile, members, snvs))
        .collect()
}

fn merge_into(target: &mut Cluster, other: Cluster, snvs: &[SnvRecord]) {
    let mut members = std::mem::take(&mut target.members);
    members.extend(other.members);
    members.sort_unstable();
    *target = Cluster::from_members(target.id.min(other.id), target.profile, members, snvs);
}

/// Absorbs undersized clusters into their nearest adequately sized
/// neighbour, then repeatedly merges the closest pair of clusters whose
/// centroids are nearer than the collapse distance.
///
/// When no cluster of the group reaches the minimum size, all clusters are
/// merged into one so that no SSNV is lost here; node support is enforced
/// later, at network construction.
pub fn prune_and_collapse(
    clusters: Vec<Cluster>,
    snvs: &[SnvRecord],
    cfg: &ClusteringConfig,
) -> Vec<Cluster> {
    if clusters.len() <= 1 {
        return clusters;
    }
    let min_size = cfg.min_size_for(&clusters[0].profile);
    let (mut keep, mut small): (Vec<Cluster>, Vec<Cluster>) =
        clusters.into_iter().partition(|c| c.size() >= min_size);
    small.sort_by_key(|c| (c.size(), c.id));

    if keep.is_empty() {
        let mut iter = small.into_iter();
        let mut merged = iter.next().unwrap();
        for c in iter {
            merge_into(&mut merged, c, snvs);
        }
        keep.push(merged);
    } else {
        for c in small {
            let nearest = (0..keep.len())
                .min_by(|&a, &b| {
                    distance(&keep[a].centroid, &c.centroid)
                        .total_cmp(&distance(&keep[b].centroid, &c.centroid))
                        .then(keep[a].id.cmp(&keep[b].id))
                })
                .unwrap();
            merge_into(&mut keep[nearest], c, snvs);
        }
    }

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..keep.len() {
            for b in a + 1..keep.len() {
                let d = distance(&keep[a].centroid, &keep[b].centroid);
                if d < cfg.collapse_distance && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        let other = keep.remove(b);
        merge_into(&mut keep[a], other, snvs);
    }
    keep.sort_by_key(|c| c.members[0]);
    keep
}

/// Clusters every group. Cluster ids are assigned afterwards by the caller.
pub fn cluster_groups(
    groups: &[SnvGroup],
    snvs: &[SnvRecord],
    cfg: &ClusteringConfig,
) -> Result<Vec<(usize, Cluster)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        if g.members.is_empty() {
            warn!("skipping empty group {}", g.profile);
            continue;
        }
        let m = GroupVafMatrix::new(g, snvs);
        let clusters = prune_and_collapse(fit_clusters(&m, snvs, cfg), snvs, cfg);
        out.extend(clusters.into_iter().map(|c| (gi, c)));
    }
    Ok(out)
}
