//! Branching cell-lineage simulator: tree growth, multi-sample extraction,
//! haplotype-aware true VAFs and sequencing noise.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryProfile, SnvRecord};
use crate::rng::{self, Rng};

/// Base-call error rate (Q30).
pub const BASE_ERROR: f64 = 1e-3;

/// (length, centromere) in Mb for autosomes 1..22.
const GENOME: [(f64, f64); 22] = [
    (249.25, 125.0),
    (243.2, 93.3),
    (198.0, 91.0),
    (191.2, 50.4),
    (180.9, 48.4),
    (171.1, 61.0),
    (159.1, 59.9),
    (146.4, 45.6),
    (141.2, 49.0),
    (135.5, 40.2),
    (135.0, 53.7),
    (133.9, 35.8),
    (115.2, 17.9),
    (107.3, 17.6),
    (102.5, 19.0),
    (90.4, 36.6),
    (81.2, 24.0),
    (78.1, 17.2),
    (59.1, 26.5),
    (63.0, 27.5),
    (48.1, 13.2),
    (51.3, 14.7),
];

pub const NUM_ARMS: usize = 2 * GENOME.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub p_ssnv: f64,
    pub p_cnv: f64,
    pub p_death: f64,
    pub iterations: usize,
    /// Population sizes are log-uniform between these bounds.
    pub min_population: f64,
    pub max_population: f64,
    /// Cells drawn into each sample.
    pub cells_per_sample: u64,
    pub max_subclones: usize,
    pub max_normal_fraction: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            p_ssnv: 0.15,
            p_cnv: 0.0,
            p_death: 0.06,
            iterations: 50,
            min_population: 1e2,
            max_population: 1e6,
            cells_per_sample: 50,
            max_subclones: 5,
            max_normal_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_ssnv", self.p_ssnv), ("p_cnv", self.p_cnv), ("p_death", self.p_death)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.min_population >= 1.0 && self.max_population >= self.min_population) {
            return Err(Error::InvalidConfig("population size bounds must satisfy 1 <= min <= max".into()));
        }
        if self.cells_per_sample == 0 || self.max_subclones == 0 {
            return Err(Error::InvalidConfig("cells per sample and subclone count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_normal_fraction) {
            return Err(Error::InvalidConfig("normal fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Germline,
    Ssnv(usize),
    Cnv { arm: usize, haplotype: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPopulation {
    pub id: usize,
    pub parent: Option<usize>,
    pub size: u64,
    pub alive: bool,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSnv {
    pub chrom: String,
    pub pos: u64,
    pub arm: usize,
    pub haplotype: u8,
    /// Population in which the mutation arose.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageTree {
    pub populations: Vec<CellPopulation>,
    pub snvs: Vec<SimSnv>,
}

impl LineageTree {
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.populations.len()];
        for p in &self.populations {
            if let Some(parent) = p.parent {
                out[parent].push(p.id);
            }
        }
        out
    }

    /// Populations from the root down to `p`.
    pub fn lineage(&self, p: usize) -> Vec<usize> {
        let mut chain = vec![p];
        let mut cur = p;
        while let Some(parent) = self.populations[cur].parent {
            chain.push(parent);
            cur = parent;
        }
        chain.reverse();
        chain
    }

    /// Whether `a` is a strict ancestor of `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.populations[b].parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.populations[p].parent;
        }
        false
    }

    /// Variant and reference haplotype copies at `snv`'s locus in cells of
    /// population `p`.
    pub fn haplotypes(&self, snv: usize, p: usize) -> (u32, u32) {
        let m = &self.snvs[snv];
        let mut copies = [1u32, 1u32];
        let mut variant = 0u32;
        for q in self.lineage(p) {
            match self.populations[q].event {
                Event::Ssnv(s) if s == snv => variant = 1,
                Event::Cnv { arm, haplotype } if arm == m.arm => {
                    copies[haplotype as usize] *= 2;
                    if haplotype == m.haplotype {
                        variant *= 2;
                    }
                }
                _ => {}
            }
        }
        (variant, copies[0] + copies[1] - variant)
    }

    /// Whether any CNV in the lineage of `p` hits `snv`'s chromosome arm.
    pub fn cnv_at(&self, snv: usize, p: usize) -> bool {
        let arm = self.snvs[snv].arm;
        self.lineage(p)
            .into_iter()
            .any(|q| matches!(self.populations[q].event, Event::Cnv { arm: a, .. } if a == arm))
    }

    /// Whether some population in the subtree of `v` other than the root is
    /// alive.
    fn viable(&self, children: &[Vec<usize>]) -> Vec<bool> {
        let mut viable = vec![false; self.populations.len()];
        // children always have larger ids than their parent
        for p in self.populations.iter().rev() {
            viable[p.id] = (p.alive && p.id != 0) || children[p.id].iter().any(|&c| viable[c]);
        }
        viable
    }
}

fn population_size(cfg: &SimulationConfig, rng: &mut Rng) -> u64 {
    let (lo, hi) = (cfg.min_population.ln(), cfg.max_population.ln());
    let x = if hi > lo { rng.random_range(lo..hi) } else { lo };
    x.exp().round().max(1.0) as u64
}

fn random_locus(rng: &mut Rng) -> (usize, u64, usize) {
    let total: f64 = GENOME.iter().map(|g| g.0).sum();
    let mut x = rng.random_range(0.0..total);
    for (c, &(len, centromere)) in GENOME.iter().enumerate() {
        if x < len {
            let pos = (x * 1e6) as u64 + 1;
            let arm = 2 * c + usize::from(x >= centromere);
            return (c, pos, arm);
        }
        x -= len;
    }
    let c = GENOME.len() - 1;
    (c, (GENOME[c].0 * 1e6) as u64, 2 * c + 1)
}

/// Grows a lineage tree from the germline population.
pub fn grow_tree(cfg: &SimulationConfig, rng: &mut Rng) -> LineageTree {
    let mut tree = LineageTree {
        populations: vec![CellPopulation {
            id: 0,
            parent: None,
            size: cfg.max_population.round() as u64,
            alive: true,
            event: Event::Germline,
        }],
        snvs: Vec::new(),
    };
    for _ in 0..cfg.iterations {
        let existing = tree.populations.len();
        for id in 0..existing {
            if !tree.populations[id].alive {
                continue;
            }
            let spawn_ssnv = rng.random_bool(cfg.p_ssnv);
            let spawn_cnv = rng.random_bool(cfg.p_cnv);
            let dies = rng.random_bool(cfg.p_death);
            if spawn_ssnv {
                let (c, pos, arm) = random_locus(rng);
                let haplotype = rng.random_range(0..2u8);
                let child = tree.populations.len();
                tree.snvs.push(SimSnv {
                    chrom: (c + 1).to_string(),
                    pos,
                    arm,
                    haplotype,
                    origin: child,
                });
                let size = population_size(cfg, rng);
                tree.populations.push(CellPopulation {
                    id: child,
                    parent: Some(id),
                    size,
                    alive: true,
                    event: Event::Ssnv(tree.snvs.len() - 1),
                });
            }
            if spawn_cnv {
                let arm = rng.random_range(0..NUM_ARMS);
                let haplotype = rng.random_range(0..2u8);
                let size = population_size(cfg, rng);
                let child = tree.populations.len();
                tree.populations.push(CellPopulation {
                    id: child,
                    parent: Some(id),
                    size,
                    alive: true,
                    event: Event::Cnv { arm, haplotype },
                });
            }
            // the germline population never dies
            if dies && id != 0 {
                tree.populations[id].alive = false;
            }
        }
    }
    tree
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Localized,
    Randomized,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "localized" => Ok(Self::Localized),
            "randomized" => Ok(Self::Randomized),
            _ => Err(Error::InvalidConfig(format!("unknown sampling scheme {s:?}"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Localized => "localized",
            Self::Randomized => "randomized",
        })
    }
}

/// Cells drawn into one sample, keyed by population id; germline cells are
/// counted under population 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub scheme: Scheme,
    pub counts: BTreeMap<usize, u64>,
    pub normal_fraction: f64,
}

impl SampleDraw {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Multinomial counts of `n` draws over `weights`, by successive binomials.
fn multinomial(n: u64, weights: &[f64], rng: &mut Rng) -> Vec<u64> {
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let k = if i + 1 == weights.len() || mass <= 0.0 {
            left
        } else {
            let p = (w / mass).clamp(0.0, 1.0);
            Binomial::new(left, p).expect("valid binomial").sample(rng)
        };
        out.push(k);
        left -= k;
        mass -= w;
    }
    out
}

fn draw(
    tree: &LineageTree,
    selected: &[usize],
    normal_fraction: f64,
    scheme: Scheme,
    cfg: &SimulationConfig,
    rng: &mut Rng,
) -> SampleDraw {
    let normal = (normal_fraction * cfg.cells_per_sample as f64).round() as u64;
    let tumour = cfg.cells_per_sample - normal;
    let mut counts = BTreeMap::new();
    if normal > 0 {
        counts.insert(0, normal);
    }
    if !selected.is_empty() {
        let weights: Vec<f64> = selected.iter().map(|&p| tree.populations[p].size as f64).collect();
        for (&p, k) in selected.iter().zip(multinomial(tumour, &weights, rng)) {
            if k > 0 {
                *counts.entry(p).or_insert(0) += k;
            }
        }
    } else if tumour > 0 {
        *counts.entry(0).or_insert(0) += tumour;
    }
    SampleDraw {
        scheme,
        counts,
        normal_fraction,
    }
}

fn pick(pool: &[usize], k: usize, rng: &mut Rng) -> Vec<usize> {
    let k = k.min(pool.len());
    let mut out: Vec<usize> = index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
    out.sort_unstable();
    out
}

fn live_tumour(tree: &LineageTree) -> Vec<usize> {
    tree.populations.iter().filter(|p| p.alive && p.id != 0).map(|p| p.id).collect()
}

/// Each sample takes between 1 and `max_subclones` live populations chosen
/// uniformly from the whole tree.
pub fn sample_randomized(tree: &LineageTree, n_samples: usize, cfg: &SimulationConfig, rng: &mut Rng) -> Vec<SampleDraw> {
    let live = live_tumour(tree);
    (0..n_samples)
        .map(|_| {
            let k = rng.random_range(1..=cfg.max_subclones);
            let chosen = pick(&live, k, rng);
            draw(tree, &chosen, 0.0, Scheme::Randomized, cfg, rng)
        })
        .collect()
}

/// Roots of up to `n` disjoint subtrees, found breadth-first as close to
/// the root as possible. Each containing live tumour populations.
pub fn disjoint_subtrees(tree: &LineageTree, n: usize) -> Vec<usize> {
    let children = tree.children();
    let viable = tree.viable(&children);
    if !viable[0] {
        return Vec::new();
    }
    let depth = {
        let mut d = vec![0usize; tree.populations.len()];
        for p in &tree.populations {
            if let Some(parent) = p.parent {
                d[p.id] = d[parent] + 1;
            }
        }
        d
    };
    let viable_children = |u: usize| -> Vec<usize> { children[u].iter().copied().filter(|&c| viable[c]).collect() };
    // first node at or below u with at least two viable children
    let branch_point = |mut u: usize| -> Option<usize> {
        loop {
            let vc = viable_children(u);
            match vc.len() {
                0 => return None,
                1 => u = vc[0],
                _ => return Some(u),
            }
        }
    };

    let mut roots = vec![0usize];
    while roots.len() < n {
        let best = roots
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| branch_point(r).map(|b| (depth[b], b, i)))
            .min();
        let Some((_, b, i)) = best else { break };
        roots.splice(i..=i, viable_children(b));
    }
    roots.sort_by_key(|&r| (depth[r], r));
    roots.truncate(n);
    roots
}

fn subtree_live(tree: &LineageTree, children: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        if u != 0 && tree.populations[u].alive {
            out.push(u);
        }
        queue.extend(children[u].iter().copied());
    }
    out.sort_unstable();
    out
}

/// Biopsy-like samples: sample `i` draws up to `max_subclones` live
/// populations from disjoint subtree `i` (round-robin when there are fewer
/// subtrees than samples), one from the next subtree, and a random fraction
/// of germline cells.
pub fn sample_localized(tree: &LineageTree, n_samples: usize, cfg: &SimulationConfig, rng: &mut Rng) -> Vec<SampleDraw> {
    let children = tree.children();
    let roots = disjoint_subtrees(tree, n_samples);
    let pools: Vec<Vec<usize>> = roots.iter().map(|&r| subtree_live(tree, &children, r)).collect();
    (0..n_samples)
        .map(|s| {
            let normal_fraction = rng.random_range(0.0..=cfg.max_normal_fraction);
            if pools.is_empty() {
                return draw(tree, &[], normal_fraction, Scheme::Localized, cfg, rng);
            }
            let own = s % pools.len();
            let k = rng.random_range(1..=cfg.max_subclones);
            let mut chosen = pick(&pools[own], k, rng);
            if pools.len() > 1 {
                let neighbour = &pools[(own + 1) % pools.len()];
                chosen.extend(pick(neighbour, 1, rng));
            }
            chosen.sort_unstable();
            chosen.dedup();
            draw(tree, &chosen, normal_fraction, Scheme::Localized, cfg, rng)
        })
        .collect()
}

/// Variant fraction of `snv` over the haplotypes of all cells in `draw`.
pub fn true_vaf(tree: &LineageTree, snv: usize, draw: &SampleDraw) -> f64 {
    let (mut num, mut den) = (0u64, 0u64);
    for (&p, &n) in &draw.counts {
        let (v, r) = tree.haplotypes(snv, p);
        num += n * u64::from(v);
        den += n * u64::from(v + r);
    }
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Whether any drawn cell carries `snv`.
pub fn carried(tree: &LineageTree, snv: usize, draw: &SampleDraw) -> bool {
    let origin = tree.snvs[snv].origin;
    draw.counts.keys().any(|&p| p == origin || tree.is_ancestor(origin, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Reads per site; `None` keeps the true frequencies.
    pub coverage: Option<u64>,
    pub base_error: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            coverage: None,
            base_error: BASE_ERROR,
        }
    }
}

/// Observed variant fraction from binomially drawn reads, each of which is
/// misread with the base error rate.
pub fn add_noise(vaf: f64, cfg: &NoiseConfig, rng: &mut Rng) -> f64 {
    let Some(n) = cfg.coverage else {
        return vaf;
    };
    let k = Binomial::new(n, vaf.clamp(0.0, 1.0)).expect("valid binomial").sample(rng);
    let lost = Binomial::new(k, cfg.base_error).expect("valid binomial").sample(rng);
    let gained = Binomial::new(n - k, cfg.base_error).expect("valid binomial").sample(rng);
    (k - lost + gained) as f64 / n as f64
}

/// A simulated multi-sample dataset. Sample column 0 is the normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub tree: LineageTree,
    pub samples: Vec<SampleDraw>,
    /// Indices into `tree.snvs` of the SSNVs carried by some sample, in
    /// output row order.
    pub collected: Vec<usize>,
    pub presence: Vec<BinaryProfile>,
    pub true_vaf: Vec<Vec<f64>>,
    pub observed_vaf: Vec<Vec<f64>>,
    pub cnv_affected: Vec<bool>,
}

impl SimulatedDataset {
    pub fn sample_names(&self) -> Vec<String> {
        std::iter::once("normal".to_string())
            .chain((1..=self.samples.len()).map(|i| format!("S{i}")))
            .collect()
    }

    pub fn records(&self) -> Vec<SnvRecord> {
        self.collected
            .iter()
            .zip(&self.observed_vaf)
            .map(|(&m, vaf)| {
                let s = &self.tree.snvs[m];
                SnvRecord::new(s.chrom.clone(), s.pos, format!("snv{m}"), vaf.clone())
            })
            .collect()
    }

    /// Percentage of collected SSNVs whose locus is hit by a CNV in some
    /// sampled population.
    pub fn pct_cnv_affected(&self) -> f64 {
        if self.collected.is_empty() {
            return 0.0;
        }
        100.0 * self.cnv_affected.iter().filter(|&&a| a).count() as f64 / self.collected.len() as f64
    }
}

/// Grows a tree, extracts samples and computes (noisy) frequencies, using
/// independent streams derived from `cfg.seed`.
pub fn simulate(cfg: &SimulationConfig, scheme: Scheme, n_samples: usize, noise: &NoiseConfig) -> SimulatedDataset {
    let tree = grow_tree(cfg, &mut rng::stream(cfg.seed, b"tree"));
    let mut srng = rng::stream(cfg.seed, b"sampling");
    let samples = match scheme {
        Scheme::Localized => sample_localized(&tree, n_samples, cfg, &mut srng),
        Scheme::Randomized => sample_randomized(&tree, n_samples, cfg, &mut srng),
    };
    let mut nrng = rng::stream(cfg.seed, b"noise");
    let (mut collected, mut presence, mut tv, mut ov, mut affected) = (vec![], vec![], vec![], vec![], vec![]);
    for m in 0..tree.snvs.len() {
        let carriers: Vec<bool> = samples.iter().map(|d| carried(&tree, m, d)).collect();
        if !carriers.iter().any(|&c| c) {
            continue;
        }
        let mut bits = vec![false];
        bits.extend(&carriers);
        let vafs: Vec<f64> = std::iter::once(0.0)
            .chain(samples.iter().map(|d| true_vaf(&tree, m, d)))
            .collect();
        let noisy: Vec<f64> = vafs.iter().map(|&v| add_noise(v, noise, &mut nrng)).collect();
        let hit = samples.iter().any(|d| d.counts.keys().any(|&p| tree.cnv_at(m, p)));
        collected.push(m);
        presence.push(BinaryProfile::from_bits(&bits));
        tv.push(vafs);
        ov.push(noisy);
        affected.push(hit);
    }
    SimulatedDataset {
        tree,
        samples,
        collected,
        presence,
        true_vaf: tv,
        observed_vaf: ov,
        cnv_affected: affected,
    }
}

/// Writes the ground truth as tab-separated records:
///
/// ```text
/// population  id  parent|-  size  alive(0|1)  germline|ssnv:<i>|cnv:<arm>:<hap>
/// snv  row  index  chrom  pos  origin  presence  true_vaf,csv  cnv_affected(0|1)
/// sample  column  scheme  normal_fraction  population:cells,csv
/// ```
pub fn write_ground_truth(ds: &SimulatedDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("#lineage ground truth v1\n");
    for p in &ds.tree.populations {
        let parent = p.parent.map_or("-".to_string(), |x| x.to_string());
        let event = match p.event {
            Event::Germline => "germline".to_string(),
            Event::Ssnv(i) => format!("ssnv:{i}"),
            Event::Cnv { arm, haplotype } => format!("cnv:{arm}:{haplotype}"),
        };
        let _ = writeln!(out, "population\t{}\t{parent}\t{}\t{}\t{event}", p.id, p.size, u8::from(p.alive));
    }
    for (row, &m) in ds.collected.iter().enumerate() {
        let s = &ds.tree.snvs[m];
        let vafs: Vec<String> = ds.true_vaf[row].iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            out,
            "snv\t{row}\t{m}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.chrom,
            s.pos,
            s.origin,
            ds.presence[row],
            vafs.join(","),
            u8::from(ds.cnv_affected[row])
        );
    }
    for (i, d) in ds.samples.iter().enumerate() {
        let cells: Vec<String> = d.counts.iter().map(|(p, n)| format!("{p}:{n}")).collect();
        let _ = writeln!(out, "sample\t{}\t{}\t{}\t{}", i + 1, d.scheme, d.normal_fraction, cells.join(","));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Ground truth as needed for scoring a reconstruction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    /// Parent of every population; `None` at the root.
    pub parents: Vec<Option<usize>>,
    /// Origin population of each input row.
    pub origin: Vec<usize>,
    pub presence: Vec<BinaryProfile>,
}

impl GroundTruth {
    pub fn from_dataset(ds: &SimulatedDataset) -> Self {
        Self {
            parents: ds.tree.populations.iter().map(|p| p.parent).collect(),
            origin: ds.collected.iter().map(|&m| ds.tree.snvs[m].origin).collect(),
            presence: ds.presence.clone(),
        }
    }

    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.parents[b];
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.parents[p];
        }
        false
    }
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut truth = GroundTruth::default();
    let mut rows: Vec<(usize, usize, BinaryProfile)> = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: n + 1,
            msg: msg.to_string(),
        };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        match f[0] {
            "population" if f.len() == 6 => {
                let id: usize = f[1].parse().map_err(|_| bad("bad population id"))?;
                if id != truth.parents.len() {
                    return Err(bad("population ids must be consecutive"));
                }
                let parent = match f[2] {
                    "-" => None,
                    p => Some(p.parse().map_err(|_| bad("bad parent id"))?),
                };
                truth.parents.push(parent);
            }
            "snv" if f.len() == 9 => {
                let row = f[1].parse().map_err(|_| bad("bad row"))?;
                let origin = f[5].parse().map_err(|_| bad("bad origin"))?;
                let presence = f[6].parse().map_err(|_| bad("bad presence profile"))?;
                rows.push((row, origin, presence));
            }
            "sample" => {}
            _ => return Err(bad("unrecognised record")),
        }
    }
    rows.sort_by_key(|r| r.0);
    for (i, (row, origin, presence)) in rows.into_iter().enumerate() {
        if row != i {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: format!("missing snv row {i}"),
            });
        }
        truth.origin.push(origin);
        truth.presence.push(presence);
    }
    Ok(truth)
}
