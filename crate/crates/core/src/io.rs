//! Text formats: the SSNV table, cluster files, bundles, dot graphs and the
//! run summary.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BinaryProfile, Cluster, SampleSet, SnvRecord};
use crate::pipeline::ResultBundle;

const HEADER_PREFIX: [&str; 3] = ["#chr", "position", "description"];

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Reads the tab-separated SSNV table.
///
/// The header is `#chr  position  description  <sample names...>` and each
/// row carries one frequency per sample. With `cp` set the values are cell
/// prevalences and are halved onto the frequency scale.
pub fn parse_snv_table(path: &Path, normal_index: usize, cp: bool) -> Result<(SampleSet, Vec<SnvRecord>)> {
    let lines = read_lines(path)?;
    let Some(header) = lines.first() else {
        return Err(parse_err(path, 1, "empty file, expected a header line"));
    };
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() < 3 || fields[..3] != HEADER_PREFIX {
        return Err(parse_err(
            path,
            1,
            "header must start with #chr, position, description",
        ));
    }
    let names: Vec<String> = fields[3..].iter().map(|s| s.trim().to_string()).collect();
    let samples = SampleSet::new(names, normal_index).map_err(|e| parse_err(path, 1, e.to_string()))?;
    let s = samples.len();

    let mut snvs = Vec::new();
    for (n, line) in lines.iter().enumerate().skip(1) {
        let lineno = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != s + 3 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} fields, found {}", s + 3, f.len()),
            ));
        }
        let pos: u64 = f[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad position {:?}", f[1])))?;
        let mut vaf = Vec::with_capacity(s);
        for (j, v) in f[3..].iter().enumerate() {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad value {v:?} for sample {}", samples.names()[j])))?;
            if !(0.0..=1.0).contains(&x) {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("value {x} for sample {} outside [0, 1]", samples.names()[j]),
                ));
            }
            vaf.push(if cp { x / 2.0 } else { x });
        }
        let mut rec = SnvRecord::new(f[0].trim(), pos, f[2].trim(), vaf);
        rec.is_cp = cp;
        snvs.push(rec);
    }
    Ok((samples, snvs))
}

/// Writes records in the format read by [`parse_snv_table`]. Values are
/// written as frequencies.
pub fn write_snv_table(path: &Path, names: &[String], snvs: &[SnvRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&HEADER_PREFIX.join("\t"));
    for n in names {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    for r in snvs {
        let _ = write!(out, "{}\t{}\t{}", r.chrom, r.pos, r.desc);
        for v in &r.vaf {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads externally computed clusters, one per line:
/// `profile  centroid,csv  snv-row-indices,csv`.
///
/// Centroids are given over the profile's present samples and are halved
/// when the table was read as cell prevalences. Standard errors are
/// computed from the member rows.
pub fn parse_cluster_file(path: &Path, snvs: &[SnvRecord], num_samples: usize, cp: bool) -> Result<Vec<Cluster>> {
    let mut out = Vec::new();
    let mut seen = vec![false; snvs.len()];
    for (n, line) in read_lines(path)?.iter().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_err(path, lineno, format!("expected 3 fields, found {}", f.len())));
        }
        let profile: BinaryProfile = f[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad profile {:?}", f[0])))?;
        if profile.len() != num_samples {
            return Err(parse_err(
                path,
                lineno,
                format!("profile length {} does not match {} samples", profile.len(), num_samples),
            ));
        }
        if profile.is_zero() {
            return Err(parse_err(path, lineno, "profile has no present sample"));
        }
        let centroid: Vec<f64> = f[1]
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, lineno, format!("bad centroid {:?}", f[1])))?;
        if centroid.len() != profile.hamming_weight() {
            return Err(parse_err(
                path,
                lineno,
                format!(
                    "centroid has {} values but profile {} has {} present samples",
                    centroid.len(),
                    profile,
                    profile.hamming_weight()
                ),
            ));
        }
        if centroid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(parse_err(path, lineno, "centroid value outside [0, 1]"));
        }
        let mut members: Vec<usize> = f[2]
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, lineno, format!("bad member list {:?}", f[2])))?;
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            if m >= snvs.len() {
                return Err(parse_err(path, lineno, format!("row index {m} out of range")));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(parse_err(path, lineno, format!("row {m} listed in more than one cluster")));
            }
        }
        let mut c = Cluster::from_members(out.len() + 1, profile, members, snvs);
        c.centroid = centroid.into_iter().map(|v| if cp { v / 2.0 } else { v }).collect();
        out.push(c);
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn bundle_to_json(bundle: &ResultBundle) -> Result<String> {
    Ok(serde_json::to_string_pretty(bundle)?)
}

pub fn write_bundle(path: &Path, bundle: &ResultBundle) -> Result<()> {
    let mut text = bundle_to_json(bundle)?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_bundle(path: &Path) -> Result<ResultBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Dot digraph of the top-ranked tree, with sample leaves attached to the
/// terminal node of each lineage.
pub fn top_tree_dot(bundle: &ResultBundle) -> String {
    let mut out = String::from("digraph lineage {\n  node [shape=box];\n");
    let Some(tree) = bundle.trees.first() else {
        out.push_str("}\n");
        return out;
    };
    for n in &bundle.network.nodes {
        let label = if n.id == 0 {
            "germline".to_string()
        } else {
            let c: Vec<String> = n.centroid.iter().map(|v| format!("{v:.2}")).collect();
            format!("{}: {}\\n{} SSNVs\\n[{}]", n.id, n.profile, n.snvs.len(), c.join(", "))
        };
        let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, label);
    }
    for (p, c) in &tree.edges {
        let _ = writeln!(out, "  n{p} -> n{c};");
    }
    for d in &tree.decompositions {
        let name = &bundle.samples[d.sample];
        let _ = writeln!(out, "  s{} [label=\"{}\", shape=ellipse];", d.sample, name);
        for l in &d.lineages {
            if let Some(&last) = l.path.last() {
                let _ = writeln!(out, "  n{} -> s{} [style=dashed, label=\"{:.2}\"];", last, d.sample, l.prevalence);
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Human-readable run summary: tree count, top score and notes.
pub fn summary_text(bundle: &ResultBundle) -> String {
    let mut out = String::new();
    let n = bundle.search.trees_found;
    let noun = if n == 1 { "tree" } else { "trees" };
    match bundle.trees.first() {
        Some(t) => {
            let _ = writeln!(out, "{n} {noun}, score {}", t.score);
        }
        None => {
            let _ = writeln!(out, "{n} {noun}");
        }
    }
    if bundle.search.truncated {
        out.push_str("search truncated at the tree or call limit\n");
    }
    if bundle.search.adjustments > 0 {
        let _ = writeln!(out, "network adjusted {} times", bundle.search.adjustments);
    }
    let dropped = bundle.snvs.iter().filter(|s| s.dropped.is_some()).count();
    let _ = writeln!(out, "{} of {} SSNVs placed", bundle.snvs.len() - dropped, bundle.snvs.len());
    if let Some(d) = &bundle.diagnostic {
        let _ = writeln!(out, "{d}");
    }
    out
}

pub fn write_dot(path: &Path, bundle: &ResultBundle) -> Result<()> {
    write_file(path, &top_tree_dot(bundle))
}

pub fn write_summary(path: &Path, bundle: &ResultBundle) -> Result<()> {
    write_file(path, &summary_text(bundle))
}
