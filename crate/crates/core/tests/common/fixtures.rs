//! Hand-built inputs with known answers.

use lineage::model::{SampleSet, SnvRecord};
use lineage::pipeline::PipelineInput;

const JITTER: [f64; 6] = [0.0, 0.008, -0.006, 0.004, -0.009, 0.005];

/// Appends `n` SSNVs around `base`, each sample shifted by a fixed small
/// offset. Absent samples stay at zero.
fn add_group(snvs: &mut Vec<SnvRecord>, base: &[f64], n: usize) {
    for k in 0..n {
        let vaf: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, &v)| if v == 0.0 { 0.0 } else { v + JITTER[(k + i) % JITTER.len()] })
            .collect();
        let pos = 1000 * (snvs.len() as u64 + 1);
        snvs.push(SnvRecord::new("chr1", pos, format!("m{}", snvs.len()), vaf));
    }
}

fn input(names: &[&str], snvs: Vec<SnvRecord>) -> PipelineInput {
    PipelineInput {
        samples: SampleSet::new(names.iter().map(|s| s.to_string()).collect(), 0).unwrap(),
        snvs,
        clusters: None,
    }
}

/// Seven-sample patient with a trunk and three mutually conflicting
/// branches. Returns the input and the three branch profiles, most
/// populated first.
pub fn rmh004() -> (PipelineInput, [&'static str; 3]) {
    let names = ["N", "R3", "VT", "R10", "R4", "R2", "R8"];
    let mut snvs = Vec::new();
    add_group(&mut snvs, &[0.0, 0.42, 0.40, 0.34, 0.41, 0.39, 0.38], 8);
    add_group(&mut snvs, &[0.0, 0.30, 0.29, 0.32, 0.31, 0.28, 0.0], 6);
    add_group(&mut snvs, &[0.0, 0.26, 0.25, 0.27, 0.24, 0.0, 0.27], 4);
    add_group(&mut snvs, &[0.0, 0.0, 0.0, 0.21, 0.20, 0.22, 0.19], 3);
    add_group(&mut snvs, &[0.0, 0.12, 0.0, 0.0, 0.0, 0.0, 0.0], 5);
    add_group(&mut snvs, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.10], 5);
    (input(&names, snvs), ["0111110", "0111101", "0001111"])
}

/// Six-sample patient whose constraint network admits exactly one tree.
/// Returns the input and the expected tree as (parent, child) profiles.
pub fn ev007() -> (PipelineInput, Vec<(&'static str, &'static str)>) {
    let names = ["N", "A1", "A2", "A3", "B1", "B2"];
    let mut snvs = Vec::new();
    add_group(&mut snvs, &[0.0, 0.35, 0.35, 0.35, 0.35, 0.35], 5);
    add_group(&mut snvs, &[0.0, 0.30, 0.30, 0.30, 0.0, 0.0], 4);
    add_group(&mut snvs, &[0.0, 0.28, 0.28, 0.0, 0.0, 0.0], 3);
    add_group(&mut snvs, &[0.0, 0.0, 0.0, 0.20, 0.0, 0.0], 3);
    add_group(&mut snvs, &[0.0, 0.0, 0.0, 0.0, 0.35, 0.35], 4);
    add_group(&mut snvs, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.30], 3);
    let tree = vec![
        ("111111", "011111"),
        ("011111", "011100"),
        ("011111", "000011"),
        ("011100", "011000"),
        ("011100", "000100"),
        ("000011", "000001"),
    ];
    (input(&names, snvs), tree)
}
