//! Tree scoring, the global deviation QP, ranking and sample decomposition.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ConstraintNetwork;
use crate::search::{CandidateTree, SUM_TOLERANCE};

/// Residual up to which a QP solution is accepted as optimal.
pub const KKT_TOLERANCE: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    /// Deviation budget per node and sample.
    pub epsilon: f64,
    /// Trees per QP batch.
    pub k: usize,
    /// Trees kept in the output.
    pub num_save: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            k: 5,
            num_save: 5,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "deviation budget {} must be non-negative",
                self.epsilon
            )));
        }
        if self.k == 0 || self.num_save == 0 {
            return Err(Error::InvalidConfig("k and numSave must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    /// Deviation per node id and sample.
    pub e: BTreeMap<usize, Vec<f64>>,
    pub objective: f64,
    pub feasible: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTree {
    pub tree: CandidateTree,
    pub local_score: f64,
    pub qp: Option<QpSolution>,
    pub rank: usize,
}

impl RankedTree {
    pub fn score(&self) -> f64 {
        self.qp.as_ref().map_or(self.local_score, |q| q.objective)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    /// Node ids from the root to the terminal node.
    pub path: Vec<usize>,
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDecomposition {
    pub sample: usize,
    pub lineages: Vec<Lineage>,
}

/// Sum over nodes and samples of the squared excess of the children's
/// frequencies over their parent's.
pub fn local_score(net: &ConstraintNetwork, tree: &CandidateTree) -> f64 {
    let mut score = 0.0;
    for u in &net.nodes {
        let kids: Vec<usize> = tree.children_of(u.id).collect();
        if kids.is_empty() {
            continue;
        }
        for i in 0..net.num_samples {
            let sum: f64 = kids.iter().map(|&c| net.node(c).full_centroid[i]).sum();
            let excess = sum - u.full_centroid[i];
            if excess > SUM_TOLERANCE {
                score += excess * excess;
            }
        }
    }
    score
}

/// One sample's problem over node indices: minimise the sum of squared
/// deviations subject to `sum_{children} x_v - x_u <= b_u` and box bounds.
struct SampleQp {
    children: Vec<Vec<usize>>,
    /// Parents before children.
    order: Vec<usize>,
    centroid: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Dense `a x <= b` row.
struct Row {
    a: Vec<(usize, f64)>,
    b: f64,
}

impl Row {
    fn dot(&self, x: &[f64]) -> f64 {
        self.a.iter().map(|&(j, c)| c * x[j]).sum()
    }
}

impl SampleQp {
    fn rows(&self) -> Vec<Row> {
        let n = self.centroid.len();
        let mut rows = Vec::new();
        for u in 0..n {
            if self.children[u].is_empty() {
                continue;
            }
            let mut a: Vec<(usize, f64)> = self.children[u].iter().map(|&v| (v, 1.0)).collect();
            a.push((u, -1.0));
            let b = self.centroid[u] - self.children[u].iter().map(|&v| self.centroid[v]).sum::<f64>();
            rows.push(Row { a, b });
        }
        for v in 0..n {
            rows.push(Row {
                a: vec![(v, 1.0)],
                b: self.hi[v],
            });
            rows.push(Row {
                a: vec![(v, -1.0)],
                b: -self.lo[v],
            });
        }
        rows
    }

    /// Smallest feasible adjusted frequencies, built leaves first; `None`
    /// when no assignment satisfies the constraints.
    fn feasible_start(&self) -> Option<Vec<f64>> {
        let n = self.centroid.len();
        let mut adjusted = vec![0.0; n];
        for &u in self.order.iter().rev() {
            let need: f64 = self.children[u].iter().map(|&v| adjusted[v]).sum();
            let a = (self.centroid[u] + self.lo[u]).max(need);
            if a > self.centroid[u] + self.hi[u] + FEAS_TOL {
                return None;
            }
            adjusted[u] = a.min(self.centroid[u] + self.hi[u]);
        }
        Some((0..n).map(|u| (adjusted[u] - self.centroid[u]).clamp(self.lo[u], self.hi[u])).collect())
    }

    fn solve(&self) -> Option<(Vec<f64>, f64)> {
        let rows = self.rows();
        let n = self.centroid.len();
        if rows.iter().all(|r| r.b >= -SUM_TOLERANCE) {
            let x = vec![0.0; n];
            let residual = kkt_residual(&rows, &x);
            return Some((x, residual));
        }
        let mut x = self.feasible_start()?;
        let slack = |r: &Row, x: &[f64]| r.b - r.dot(x);

        let mut work: Vec<usize> = Vec::new();
        for (k, r) in rows.iter().enumerate() {
            if slack(r, &x).abs() <= 1e-12 && independent(&rows, &work, k, n) {
                work.push(k);
            }
        }

        let max_iter = 50 * (n + rows.len());
        for _ in 0..max_iter {
            let (p, lambda) = eqp_step(&rows, &work, &x);
            let step_norm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if step_norm <= 1e-13 {
                // at the working-set optimum; release the worst multiplier
                let worst = lambda
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l < -1e-12)
                    .min_by(|a, b| a.1.total_cmp(b.1));
                match worst {
                    None => break,
                    Some((w, _)) => {
                        work.remove(w);
                    }
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for (k, r) in rows.iter().enumerate() {
                if work.contains(&k) {
                    continue;
                }
                let ap = r.dot(&p);
                if ap > 1e-15 {
                    let t = (slack(r, &x).max(0.0)) / ap;
                    if t < alpha {
                        alpha = t;
                        blocking = Some(k);
                    }
                }
            }
            for (xj, pj) in x.iter_mut().zip(&p) {
                *xj += alpha * pj;
            }
            if let Some(k) = blocking {
                work.push(k);
            }
        }
        for j in 0..n {
            x[j] = x[j].clamp(self.lo[j], self.hi[j]);
        }
        let residual = kkt_residual(&rows, &x);
        Some((x, residual))
    }
}

/// Whether row `k` is linearly independent of the rows in `work`.
fn independent(rows: &[Row], work: &[usize], k: usize, n: usize) -> bool {
    let m = work.len() + 1;
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (r, &w) in work.iter().chain(std::iter::once(&k)).enumerate() {
        for &(j, c) in &rows[w].a {
            a[(r, j)] = c;
        }
    }
    let svd = a.svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > 1e-9).count() == m
}

/// Step `p` minimising `|x + p|^2` on the working set, with the multipliers
/// of the working constraints.
fn eqp_step(rows: &[Row], work: &[usize], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    if work.is_empty() {
        return (x.iter().map(|v| -v).collect(), Vec::new());
    }
    let m = work.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (r, &w) in work.iter().enumerate() {
        for &(j, c) in &rows[w].a {
            a[(r, j)] = c;
        }
    }
    let xv = DVector::from_column_slice(x);
    // 2(x + p) + A' l = 0 and A p = 0  =>  (A A') l = -2 A x
    let aat = &a * a.transpose();
    let rhs = -2.0 * (&a * &xv);
    let lambda = match aat.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => aat.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(m)),
    };
    let p = -&xv - 0.5 * a.transpose() * &lambda;
    (p.iter().copied().collect(), lambda.iter().copied().collect())
}

/// Largest violation of primal feasibility, stationarity (with least-squares
/// non-negative multipliers on active rows) and complementarity.
fn kkt_residual(rows: &[Row], x: &[f64]) -> f64 {
    let n = x.len();
    let primal = rows.iter().map(|r| (r.dot(x) - r.b).max(0.0)).fold(0.0, f64::max);
    let active: Vec<usize> = (0..rows.len()).filter(|&k| (rows[k].b - rows[k].dot(x)).abs() <= 1e-9).collect();
    let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    if active.is_empty() {
        return primal.max(grad.iter().fold(0.0, |m, g| m.max(g.abs())));
    }
    // multipliers by projected gradient on the non-negative orthant
    let m = active.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (r, &k) in active.iter().enumerate() {
        for &(j, c) in &rows[k].a {
            a[(r, j)] = c;
        }
    }
    let g = DVector::from_column_slice(&grad);
    let mut lambda = DVector::<f64>::zeros(m);
    let lip = (&a * a.transpose()).norm().max(1e-12);
    for _ in 0..2000 {
        let r = &g + a.transpose() * &lambda;
        let step = &a * &r;
        lambda -= step / lip;
        lambda.iter_mut().for_each(|l| *l = l.max(0.0));
    }
    let stationarity = (&g + a.transpose() * &lambda).amax();
    primal.max(stationarity)
}

/// Solves the deviation QP of `tree` independently per sample.
pub fn solve_qp(net: &ConstraintNetwork, tree: &CandidateTree, eps: f64) -> QpSolution {
    let ids: Vec<usize> = net.nodes.iter().map(|n| n.id).collect();
    let index = |id: usize| ids.binary_search(&id).expect("tree node missing from network");
    let n = ids.len();
    let mut children = vec![Vec::new(); n];
    for &(p, c) in &tree.edges {
        children[index(p)].push(index(c));
    }
    let root = index(net.root_id);
    let mut order = vec![root];
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        order.extend(children[u].iter().copied());
    }
    assert_eq!(order.len(), n, "tree does not span the network");

    let mut e: BTreeMap<usize, Vec<f64>> = ids.iter().map(|&id| (id, vec![0.0; net.num_samples])).collect();
    let mut objective = 0.0;
    let mut residual = 0.0f64;
    for i in 0..net.num_samples {
        let centroid: Vec<f64> = net.nodes.iter().map(|v| v.full_centroid[i]).collect();
        let qp = SampleQp {
            lo: centroid.iter().map(|&c| (-eps).max(-c)).collect(),
            hi: centroid.iter().map(|&c| eps.min(c)).collect(),
            children: children.clone(),
            order: order.clone(),
            centroid,
        };
        match qp.solve() {
            None => {
                return QpSolution {
                    e: BTreeMap::new(),
                    objective: f64::INFINITY,
                    feasible: false,
                    kkt_residual: 0.0,
                }
            }
            Some((x, r)) => {
                residual = residual.max(r);
                for (j, v) in x.into_iter().enumerate() {
                    objective += v * v;
                    e.get_mut(&ids[j]).unwrap()[i] = v;
                }
            }
        }
    }
    if residual > KKT_TOLERANCE {
        log::warn!("QP converged only to KKT residual {residual:.3e}");
    }
    QpSolution {
        e,
        objective,
        feasible: true,
        kkt_residual: residual,
    }
}

/// Orders trees by local score, solves the QP on batches of `k` until one
/// is feasible, and drops infeasible trees. Solved trees come first by
/// objective, then the rest by local score; ties go to the smaller edge list.
pub fn rank_trees(net: &ConstraintNetwork, trees: &[CandidateTree], cfg: &RankingConfig) -> Vec<RankedTree> {
    let mut scored: Vec<(f64, &CandidateTree)> = trees.iter().map(|t| (local_score(net, t), t)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut solved: Vec<RankedTree> = Vec::new();
    let mut next = 0;
    while next < scored.len() {
        let end = (next + cfg.k).min(scored.len());
        for &(score, t) in &scored[next..end] {
            let qp = solve_qp(net, t, cfg.epsilon);
            if qp.feasible {
                solved.push(RankedTree {
                    tree: t.clone(),
                    local_score: score,
                    qp: Some(qp),
                    rank: 0,
                });
            }
        }
        next = end;
        if !solved.is_empty() {
            break;
        }
    }
    solved.sort_by(|a, b| {
        a.score()
            .total_cmp(&b.score())
            .then(a.local_score.total_cmp(&b.local_score))
            .then_with(|| a.tree.cmp(&b.tree))
    });
    let mut out = solved;
    out.extend(scored[next..].iter().map(|&(score, t)| RankedTree {
        tree: t.clone(),
        local_score: score,
        qp: None,
        rank: 0,
    }));
    for (r, t) in out.iter_mut().enumerate() {
        t.rank = r + 1;
    }
    out
}

/// Lineages of `sample`: one per node present in the sample with no child
/// present in it, carrying that node's frequency.
pub fn decompose_sample(net: &ConstraintNetwork, tree: &CandidateTree, sample: usize) -> SampleDecomposition {
    let mut lineages = Vec::new();
    for v in &net.nodes {
        if v.is_root() || !v.profile.get(sample) {
            continue;
        }
        if tree.children_of(v.id).any(|c| net.node(c).profile.get(sample)) {
            continue;
        }
        let mut path = vec![v.id];
        let mut cur = v.id;
        while let Some(p) = tree.parent_of(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        lineages.push(Lineage {
            path,
            prevalence: v.full_centroid[sample],
        });
    }
    SampleDecomposition { sample, lineages }
}
