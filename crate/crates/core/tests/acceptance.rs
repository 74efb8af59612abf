//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::props;
use lineage::calling::CallingConfig;
use lineage::evaluation::{run_experiment, simulation_run_config, Experiment, ExperimentResult};
use lineage::io::bundle_to_json;
use lineage::model::{SampleSet, SnvRecord};
use lineage::pipeline::{run_pipeline, PipelineInput, RunConfig};
use lineage::ranking::solve_qp;
use lineage::search::{enumerate_trees, CandidateTree, SearchConfig};
use lineage::simulator::{add_noise, simulate, NoiseConfig, Scheme, SimulationConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit: u64) -> bool {
    elapsed <= Duration::from_secs(limit)
}

fn spanning_tree_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = lineage::rng::stream(2024, b"acceptance-dags");
    let cfg = SearchConfig::default();
    let mut mismatches = 0;
    let mut trees = 0;
    for _ in 0..500 {
        let net = common::random_dag(&mut rng, 8, 16, 2);
        let found: BTreeSet<CandidateTree> = enumerate_trees(&net, &cfg).trees.into_iter().collect();
        trees += found.len();
        if found != common::brute_force_trees(&net, cfg.epsilon_tree) {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: mismatches == 0 && within(t, 60),
        detail: format!("{} of 500 DAGs differ, {trees} trees, {:.1} s (limit 60 s)", mismatches, t.as_secs_f64()),
    }
}

fn qp_against_grid() -> Outcome {
    let start = Instant::now();
    let mut rng = lineage::rng::stream(2024, b"acceptance-qp");
    let mut worst: f64 = 0.0;
    let mut verdict_errors = 0;
    let mut infeasible = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=6);
        let s = rng.random_range(1..=2);
        let parent: Vec<Option<usize>> =
            std::iter::once(None).chain((1..n).map(|v| Some(rng.random_range(0..v)))).collect();
        let cents: Vec<Vec<f64>> = (1..n)
            .map(|_| (0..s).map(|_| rng.random_range(1..=50) as f64 / 100.0).collect())
            .collect();
        let edges: Vec<(usize, usize)> =
            parent.iter().enumerate().filter_map(|(v, p)| p.map(|p| (p, v))).collect();
        let net = common::network(&cents, &edges);
        let q = solve_qp(&net, &CandidateTree::new(edges), 0.1);
        let mut grid = Some(0.0);
        for i in 0..s {
            let c: Vec<f64> = net.nodes.iter().map(|n| n.full_centroid[i]).collect();
            grid = match (grid, common::grid_qp(&parent, &c, 0.1, 1e-4)) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
        match grid {
            None => {
                infeasible += 1;
                if q.feasible {
                    verdict_errors += 1;
                }
            }
            Some(g) if q.feasible => worst = worst.max((q.objective - g).abs()),
            Some(_) => verdict_errors += 1,
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 1e-4 && verdict_errors == 0 && within(t, 120),
        detail: format!(
            "max |qp - grid| {worst:.2e}, {verdict_errors} verdict errors, {infeasible} infeasible, {:.1} s (limit 120 s)",
            t.as_secs_f64()
        ),
    }
}

fn experiment(scheme: Scheme, coverage: Option<u64>, p_cnv: f64) -> Experiment {
    Experiment {
        sim: SimulationConfig { p_cnv, seed: 1, ..Default::default() },
        scheme,
        num_samples: 5,
        noise: NoiseConfig { coverage, ..Default::default() },
        replicates: 100,
        run: simulation_run_config(),
    }
}

fn run_both(coverage: Option<u64>, p_cnv: f64) -> (Vec<ExperimentResult>, Duration) {
    let start = Instant::now();
    let results = [Scheme::Localized, Scheme::Randomized]
        .into_iter()
        .map(|s| run_experiment(&experiment(s, coverage, p_cnv)).expect("experiment"))
        .collect();
    (results, start.elapsed())
}

fn pct(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn true_vaf_sensitivity() -> Outcome {
    let (res, t) = run_both(None, 0.0);
    let targets = [99.2, 99.5];
    let mut pass = within(t, 600);
    let mut parts = Vec::new();
    for (r, target) in res.iter().zip(targets) {
        let v = pct(r.summary.pct_snvs_assigned_correctly);
        pass &= (v - target).abs() <= 3.0;
        parts.push(format!("{} {v:.1} (target {target} +/- 3)", r.experiment.scheme));
    }
    Outcome { pass, detail: format!("sensitivity {}, {:.0} s (limit 600 s)", parts.join(", "), t.as_secs_f64()) }
}

fn ordering_without_cnv() -> Outcome {
    let (res, t) = run_both(Some(1000), 0.0);
    let mut pass = within(t, 900);
    let mut parts = Vec::new();
    for r in &res {
        let corr = pct(r.summary.pct_ad_correct);
        let sib_ad = pct(r.summary.pct_sib_to_ad);
        pass &= corr >= 99.0 && sib_ad <= 10.0;
        parts.push(format!("{} AD-Corr {corr:.1} Sib->AD {sib_ad:.1}", r.experiment.scheme));
    }
    Outcome {
        pass,
        detail: format!("{} (need >= 99 and <= 10), {:.0} s (limit 900 s)", parts.join(", "), t.as_secs_f64()),
    }
}

fn ordering_with_cnv() -> Outcome {
    let (res, t) = run_both(Some(1000), 0.2);
    let mut pass = within(t, 1200);
    let mut parts = Vec::new();
    for r in &res {
        let corr = pct(r.summary.pct_ad_correct);
        pass &= (87.0..=101.0).contains(&corr);
        parts.push(format!(
            "{} AD-Corr {corr:.1} with {:.1}% SSNVs in CNV regions",
            r.experiment.scheme, r.pct_cnv_affected
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (band 87-101), {:.0} s (limit 1200 s)", parts.join(", "), t.as_secs_f64()),
    }
}

fn rmh004() -> Outcome {
    let (input, branches) = common::fixtures::rmh004();
    let cfg = RunConfig {
        calling: CallingConfig { t_present: 0.01, t_absent: 0.01, ..Default::default() },
        ..Default::default()
    };
    let bundle = run_pipeline(&cfg, &input).expect("pipeline");
    let kept: Vec<&str> = match bundle.trees.first() {
        Some(tree) => branches
            .iter()
            .copied()
            .filter(|b| {
                tree.edges
                    .iter()
                    .any(|&(_, c)| bundle.node(c).is_some_and(|n| n.profile.to_string() == *b))
            })
            .collect(),
        None => Vec::new(),
    };
    Outcome {
        pass: kept.len() == 1,
        detail: format!("top tree keeps {:?} of {:?}", kept, branches),
    }
}

/// A 10-sample simulated input with 600 SSNVs. Each simulated mutation event
/// is expanded into passenger SSNVs that share its true frequencies and get
/// independent read noise.
fn large_input() -> PipelineInput {
    let sim = SimulationConfig { iterations: 60, seed: 7, ..Default::default() };
    let noise = NoiseConfig { coverage: Some(1000), ..Default::default() };
    let ds = simulate(&sim, Scheme::Randomized, 10, &noise);
    let mut rng = lineage::rng::stream(7, b"passengers");
    let mut snvs = Vec::new();
    'fill: for copy in 0.. {
        for (row, vafs) in ds.true_vaf.iter().enumerate() {
            if snvs.len() == 600 {
                break 'fill;
            }
            let observed: Vec<f64> = vafs.iter().map(|&v| add_noise(v, &noise, &mut rng)).collect();
            snvs.push(SnvRecord::new("chr1", (copy * 10_000 + row) as u64, format!("p{copy}.{row}"), observed));
        }
    }
    PipelineInput {
        samples: SampleSet::new(ds.sample_names(), 0).unwrap(),
        snvs,
        clusters: None,
    }
}

fn large_run(input: &PipelineInput) -> Outcome {
    let start = Instant::now();
    let bundle = run_pipeline(&RunConfig::default(), input).expect("pipeline");
    let json = bundle_to_json(&bundle).expect("serialize");
    let t = start.elapsed();
    Outcome {
        pass: t <= Duration::from_secs(5) && !json.is_empty(),
        detail: format!(
            "{} SSNVs x {} tumour samples, {} nodes, {} trees, {:.2} s (limit 5 s)",
            input.snvs.len(),
            input.samples.len() - 1,
            bundle.network.nodes.len(),
            bundle.search.trees_found,
            t.as_secs_f64()
        ),
    }
}

fn determinism(input: &PipelineInput) -> Outcome {
    let cfg = RunConfig::default();
    let a = bundle_to_json(&run_pipeline(&cfg, input).unwrap()).unwrap();
    let b = bundle_to_json(&run_pipeline(&cfg, input).unwrap()).unwrap();
    let (fx, _) = common::fixtures::rmh004();
    let c = bundle_to_json(&run_pipeline(&cfg, &fx).unwrap()).unwrap();
    let d = bundle_to_json(&run_pipeline(&cfg, &fx).unwrap()).unwrap();
    Outcome {
        pass: a == b && c == d,
        detail: format!("{} and {} byte bundles repeat exactly", a.len(), c.len()),
    }
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let results = [
        ("covers", props::run(props::COVERS_CASES, props::profile_triple(), props::check_covers)),
        ("ternary", props::run(props::TERNARY_CASES, props::ternary(), props::check_ternary)),
        ("grouping", props::run(props::GROUPING_CASES, props::calling_input(), props::check_grouping)),
        ("cover bound", props::run(props::COVER_BOUND_CASES, props::residual_input(), props::check_cover_bound)),
        ("clustering", props::run(props::CLUSTERING_CASES, props::clustering_input(), props::check_clustering)),
        ("network", props::run(props::NETWORK_CASES, props::network_input(), props::check_network)),
        ("search", props::run(props::SEARCH_CASES, props::dag_seed(), props::check_search)),
    ];
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} suites passed, {:.1} s", results.len(), start.elapsed().as_secs_f64())
        } else {
            failed.join("; ")
        },
    }
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let large = large_input();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 spanning-tree oracle", Box::new(spanning_tree_oracle)),
        ("2 qp against grid", Box::new(qp_against_grid)),
        ("3 true-vaf sensitivity", Box::new(true_vaf_sensitivity)),
        ("4 ordering without cnv", Box::new(ordering_without_cnv)),
        ("5 ordering with cnv", Box::new(ordering_with_cnv)),
        ("6 rmh004 conflicting branches", Box::new(rmh004)),
        ("7 600 ssnvs end to end", Box::new(|| large_run(&large))),
        ("8 determinism", Box::new(|| determinism(&large))),
        ("9 property suites", Box::new(property_suites)),
    ];
    let mut failures = 0;
    for (name, f) in &criteria {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            continue;
        }
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
