use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use lineage::evaluation::{compare_tree, metrics_table, run_experiment, simulation_run_config, Experiment};
use lineage::io;
use lineage::pipeline::{run_pipeline, InputMode, PipelineInput, RunConfig};
use lineage::simulator::{read_ground_truth, simulate, write_ground_truth, NoiseConfig, Scheme, SimulationConfig};

mod serve;

/// Long options that are also accepted with a single leading dash.
const SINGLE_DASH: [&str; 10] = [
    "maxVAFAbsent",
    "minVAFPresent",
    "minClusterSize",
    "minPrivateClusterSize",
    "maxClusterDist",
    "maxTrees",
    "clustersFile",
    "cp",
    "dot",
    "json",
];

#[derive(Parser, Debug)]
#[command(name = "lineage", version, about = "Multi-sample cancer lineage inference")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer lineage trees from an SSNV table.
    Build(BuildArgs),
    /// Simulate a lineage and write its SSNV table and ground truth.
    Simulate(SimulateArgs),
    /// Score a result bundle against a ground-truth file.
    Evaluate(EvaluateArgs),
    /// Run replicate simulations and print a metrics table.
    Experiment(ExperimentArgs),
    /// Serve a result bundle and viewer assets over local HTTP.
    Serve(serve::ServeArgs),
}

#[derive(Args, Debug, Clone)]
struct InferenceArgs {
    /// Frequencies at or below this are called absent.
    #[arg(long = "maxVAFAbsent", default_value_t = 0.005)]
    max_vaf_absent: f64,
    /// Frequencies at or above this are called present.
    #[arg(long = "minVAFPresent", default_value_t = 0.01)]
    min_vaf_present: f64,
    #[arg(long = "minClusterSize", default_value_t = 2)]
    min_cluster_size: usize,
    #[arg(long = "minPrivateClusterSize", default_value_t = 1)]
    min_private_cluster_size: usize,
    /// Clusters with closer centroids are merged.
    #[arg(long = "maxClusterDist", default_value_t = 0.1)]
    max_cluster_dist: f64,
    /// SSNVs required for a network node.
    #[arg(long = "minNodeSupport", default_value_t = 2)]
    min_node_support: usize,
    /// Error margin for edges, the tree search and the QP.
    #[arg(short = 'e', default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long = "maxTrees", default_value_t = 100_000)]
    max_trees: usize,
    /// Trees kept in the bundle.
    #[arg(short = 's', default_value_t = 5)]
    num_save: usize,
    /// Trees per QP batch.
    #[arg(long = "qpBatch", default_value_t = 5)]
    qp_batch: usize,
    /// Let private nodes attach to any admissible parent.
    #[arg(long = "noPrivateConstraint")]
    no_private_constraint: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InferenceArgs {
    fn run_config(&self) -> RunConfig {
        let mut cfg = RunConfig {
            seed: self.seed,
            ..Default::default()
        };
        cfg.calling.t_absent = self.max_vaf_absent;
        cfg.calling.t_present = self.min_vaf_present;
        cfg.clustering.min_cluster_size = self.min_cluster_size;
        cfg.clustering.min_private_cluster_size = self.min_private_cluster_size;
        cfg.clustering.collapse_distance = self.max_cluster_dist;
        cfg.network.min_node_support = self.min_node_support;
        cfg.network.constrain_private = !self.no_private_constraint;
        cfg.set_epsilon(self.epsilon);
        cfg.search.max_trees = self.max_trees;
        cfg.ranking.num_save = self.num_save;
        cfg.ranking.k = self.qp_batch;
        cfg
    }
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// SSNV table.
    #[arg(short, long)]
    input: PathBuf,
    /// Column of the normal sample.
    #[arg(short = 'n', default_value_t = 0)]
    normal: usize,
    /// Input values are cell prevalences.
    #[arg(long = "cp")]
    cp: bool,
    /// Precomputed clusters; bypasses calling and clustering.
    #[arg(long = "clustersFile")]
    clusters_file: Option<PathBuf>,
    /// Write the top tree as a dot digraph.
    #[arg(long = "dot")]
    dot: Option<PathBuf>,
    /// Write the result bundle.
    #[arg(long = "json")]
    json: Option<PathBuf>,
    /// Write the summary to a file as well as stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record the wall-clock time in the bundle.
    #[arg(long)]
    timestamp: bool,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Tumor samples to draw.
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, default_value = "localized")]
    scheme: Scheme,
    /// Reads per site; omit for true frequencies.
    #[arg(long)]
    coverage: Option<u64>,
    #[arg(long = "p-ssnv", default_value_t = 0.15)]
    p_ssnv: f64,
    #[arg(long = "p-cnv", default_value_t = 0.0)]
    p_cnv: f64,
    #[arg(long = "p-death", default_value_t = 0.06)]
    p_death: f64,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long = "cells-per-sample", default_value_t = 50)]
    cells_per_sample: u64,
    #[arg(long = "sim-seed", default_value_t = 1)]
    sim_seed: u64,
}

impl SimArgs {
    fn config(&self) -> SimulationConfig {
        SimulationConfig {
            p_ssnv: self.p_ssnv,
            p_cnv: self.p_cnv,
            p_death: self.p_death,
            iterations: self.iterations,
            cells_per_sample: self.cells_per_sample,
            seed: self.sim_seed,
            ..Default::default()
        }
    }

    fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            coverage: self.coverage,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Output prefix; writes <prefix>.tsv and <prefix>.truth.tsv.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Write the metrics table here as well as stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Error margin for edges, the tree search and the QP.
    #[arg(short = 'e', default_value_t = 0.1)]
    epsilon: f64,
    /// Constrain private nodes to their closest admissible parents.
    #[arg(long = "privateConstraint")]
    private_constraint: bool,
}

enum Failure {
    Input(anyhow::Error),
    NoTree,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

/// Rewrites `-longName` into `--longName` for the names that accept it.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    args.into_iter()
        .map(|a| match a.strip_prefix('-') {
            Some(rest) if !rest.starts_with('-') && SINGLE_DASH.contains(&rest) => format!("-{a}"),
            _ => a,
        })
        .collect()
}

fn build(args: &BuildArgs) -> Result<(), Failure> {
    let mut cfg = args.inference.run_config();
    cfg.input_mode = match (&args.clusters_file, args.cp) {
        (Some(_), _) => InputMode::Clusters,
        (None, true) => InputMode::Cp,
        (None, false) => InputMode::Vaf,
    };
    let (samples, snvs) = io::parse_snv_table(&args.input, args.normal, args.cp)?;
    let clusters = match &args.clusters_file {
        Some(p) => Some(io::parse_cluster_file(p, &snvs, samples.len(), args.cp)?),
        None => None,
    };
    let input = PipelineInput { samples, snvs, clusters };
    let mut bundle = run_pipeline(&cfg, &input)?;
    if args.timestamp {
        bundle.metadata.timestamp = Some(chrono::Utc::now().to_rfc3339());
    }
    if let Some(p) = &args.json {
        io::write_bundle(p, &bundle)?;
    }
    if let Some(p) = &args.dot {
        io::write_dot(p, &bundle)?;
    }
    if let Some(p) = &args.summary {
        io::write_summary(p, &bundle)?;
    }
    print!("{}", io::summary_text(&bundle));
    if bundle.trees.is_empty() {
        return Err(Failure::NoTree);
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn simulate_cmd(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = args.sim.config();
    cfg.validate()?;
    let ds = simulate(&cfg, args.sim.scheme, args.sim.samples, &args.sim.noise());
    let table = with_suffix(&args.out, ".tsv");
    let truth = with_suffix(&args.out, ".truth.tsv");
    io::write_snv_table(&table, &ds.sample_names(), &ds.records())?;
    write_ground_truth(&ds, &truth)?;
    println!(
        "{} populations, {} SSNVs collected, {:.1}% in CNV regions",
        ds.tree.populations.len(),
        ds.collected.len(),
        ds.pct_cnv_affected()
    );
    println!("wrote {} and {}", table.display(), truth.display());
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), Failure> {
    let truth = read_ground_truth(&args.truth)?;
    let bundle = io::read_bundle(&args.bundle)?;
    if truth.origin.len() != bundle.snvs.len() {
        return Err(Failure::Input(anyhow::anyhow!(
            "truth has {} SSNVs but the bundle has {}",
            truth.origin.len(),
            bundle.snvs.len()
        )));
    }
    let report = compare_tree(&truth, &bundle);
    println!("{}", serde_json::to_string_pretty(&report).context("serializing report")?);
    Ok(())
}

fn experiment_cmd(args: &ExperimentArgs) -> Result<(), Failure> {
    let mut run = simulation_run_config();
    run.set_epsilon(args.epsilon);
    run.network.constrain_private = args.private_constraint;
    let exp = Experiment {
        sim: args.sim.config(),
        scheme: args.sim.scheme,
        num_samples: args.sim.samples,
        noise: args.sim.noise(),
        replicates: args.replicates,
        run,
    };
    exp.sim.validate()?;
    let result = run_experiment(&exp)?;
    let table = metrics_table(std::slice::from_ref(&result));
    if let Some(p) = &args.out {
        std::fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Build(a) => build(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Serve(a) => serve::run(a).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NoTree) => {
            eprintln!("error: no valid tree found");
            ExitCode::from(3)
        }
    }
}
