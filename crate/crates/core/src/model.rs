//! Shared domain types: samples, SSNV records, presence profiles and clusters.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest sample count a profile can index.
pub const MAX_SAMPLES: usize = 64;

/// Ordered sample identifiers, including the normal control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    names: Vec<String>,
    normal_index: usize,
}

impl SampleSet {
    pub fn new(names: Vec<String>, normal_index: usize) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::InvalidSamples(format!(
                "need at least 2 samples, got {}",
                names.len()
            )));
        }
        if names.len() > MAX_SAMPLES {
            return Err(Error::TooManySamples {
                max: MAX_SAMPLES,
                got: names.len(),
            });
        }
        if normal_index >= names.len() {
            return Err(Error::InvalidSamples(format!(
                "normal index {normal_index} out of range for {} samples",
                names.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::InvalidSamples(format!("duplicate sample name {a:?}")));
            }
        }
        Ok(Self {
            names,
            normal_index,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn normal_index(&self) -> usize {
        self.normal_index
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One somatic SNV with its per-sample allele frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnvRecord {
    pub chrom: String,
    pub pos: u64,
    pub desc: String,
    pub vaf: Vec<f64>,
    /// Input was cell prevalence, already halved onto the VAF scale.
    #[serde(default)]
    pub is_cp: bool,
}

impl SnvRecord {
    pub fn new(chrom: impl Into<String>, pos: u64, desc: impl Into<String>, vaf: Vec<f64>) -> Self {
        Self {
            chrom: chrom.into(),
            pos,
            desc: desc.into(),
            vaf,
            is_cp: false,
        }
    }

    /// Convenience constructor for tests and fixtures.
    pub fn from_vafs(vaf: &[f64]) -> Self {
        Self::new("1", 1, "", vaf.to_vec())
    }

    pub fn num_samples(&self) -> usize {
        self.vaf.len()
    }
}

/// Presence bit-string over samples, in input column order.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryProfile {
    bits: u64,
    len: u8,
}

impl BinaryProfile {
    pub fn new(len: usize) -> Self {
        assert!(len <= MAX_SAMPLES, "profile length {len} exceeds {MAX_SAMPLES}");
        Self {
            bits: 0,
            len: len as u8,
        }
    }

    pub fn all_ones(len: usize) -> Self {
        let mut p = Self::new(len);
        p.bits = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        p
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut p = Self::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            p.set(i, b);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.bits >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len(), "bit {i} out of range for length {}", self.len);
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn hamming_weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn is_all_ones(&self) -> bool {
        *self == Self::all_ones(self.len())
    }

    /// Indices of the samples marked present.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.get(i))
    }

    /// Whether every sample present in `child` is present in `self`.
    pub fn covers(&self, child: &BinaryProfile) -> Result<bool> {
        check_len(self.len(), child.len())?;
        Ok(child.bits & !self.bits == 0)
    }
}

pub fn hamming_weight(p: &BinaryProfile) -> usize {
    p.hamming_weight()
}

pub fn covers(parent: &BinaryProfile, child: &BinaryProfile) -> Result<bool> {
    parent.covers(child)
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

// Lexicographic order of the textual form: sample 0 is the most significant
// position and '0' sorts before '1'.
impl Ord for BinaryProfile {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in 0..self.len().min(other.len()) {
            match self.get(i).cmp(&other.get(i)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BinaryProfile {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BinaryProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryProfile({self})")
    }
}

impl FromStr for BinaryProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > MAX_SAMPLES {
            return Err(Error::InvalidProfile(s.to_string()));
        }
        let mut p = Self::new(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => p.set(i, true),
                _ => return Err(Error::InvalidProfile(s.to_string())),
            }
        }
        Ok(p)
    }
}

impl Serialize for BinaryProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BinaryProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-sample call: robustly absent, robustly present, or in the greyzone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    Absent,
    Present,
    Grey,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TernaryProfile {
    marks: Vec<Mark>,
}

impl TernaryProfile {
    pub fn new(marks: Vec<Mark>) -> Self {
        Self { marks }
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn star_positions(&self) -> Vec<usize> {
        self.marks
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == Mark::Grey)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_stars(&self) -> usize {
        self.marks.iter().filter(|&&m| m == Mark::Grey).count()
    }

    /// The binary profile when no sample is in the greyzone.
    pub fn to_binary(&self) -> Option<BinaryProfile> {
        let mut p = BinaryProfile::new(self.len());
        for (i, m) in self.marks.iter().enumerate() {
            match m {
                Mark::Absent => {}
                Mark::Present => p.set(i, true),
                Mark::Grey => return None,
            }
        }
        Some(p)
    }

    /// Whether `g` agrees with every definite position.
    pub fn compatible(&self, g: &BinaryProfile) -> Result<bool> {
        check_len(self.len(), g.len())?;
        Ok(self.marks.iter().enumerate().all(|(i, m)| match m {
            Mark::Absent => !g.get(i),
            Mark::Present => g.get(i),
            Mark::Grey => true,
        }))
    }

    /// All binary profiles obtained by substituting 0 or 1 for each `*`,
    /// in ascending lexicographic order.
    pub fn expansions(&self) -> Vec<BinaryProfile> {
        let stars = self.star_positions();
        let mut base = BinaryProfile::new(self.len());
        for (i, m) in self.marks.iter().enumerate() {
            if *m == Mark::Present {
                base.set(i, true);
            }
        }
        let mut out = Vec::with_capacity(1 << stars.len());
        for mask in 0u64..(1u64 << stars.len()) {
            let mut p = base;
            for (k, &pos) in stars.iter().enumerate() {
                p.set(pos, mask >> k & 1 == 1);
            }
            out.push(p);
        }
        out.sort();
        out
    }
}

pub fn ternary_compatible(t: &TernaryProfile, g: &BinaryProfile) -> Result<bool> {
    t.compatible(g)
}

impl fmt::Display for TernaryProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.marks {
            f.write_str(match m {
                Mark::Absent => "0",
                Mark::Present => "1",
                Mark::Grey => "*",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for TernaryProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TernaryProfile({self})")
    }
}

impl FromStr for TernaryProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let marks = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Mark::Absent),
                '1' => Ok(Mark::Present),
                '*' => Ok(Mark::Grey),
                _ => Err(Error::InvalidProfile(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if marks.is_empty() || marks.len() > MAX_SAMPLES {
            return Err(Error::InvalidProfile(s.to_string()));
        }
        Ok(Self { marks })
    }
}

/// A set of SSNVs sharing a profile and similar frequencies.
///
/// `centroid` and `stderr` are indexed over the profile's present samples
/// only, in sample order. Members are indices into the SSNV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub profile: BinaryProfile,
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Cluster {
    /// Builds a cluster from member SSNVs, computing the mean and standard
    /// error of the mean over the profile's present samples.
    pub fn from_members(
        id: usize,
        profile: BinaryProfile,
        members: Vec<usize>,
        snvs: &[SnvRecord],
    ) -> Self {
        assert!(!members.is_empty(), "cluster needs at least one member");
        let cols: Vec<usize> = profile.ones().collect();
        let n = members.len() as f64;
        let mut centroid = Vec::with_capacity(cols.len());
        let mut stderr = Vec::with_capacity(cols.len());
        for &c in &cols {
            let mean = members.iter().map(|&m| snvs[m].vaf[c]).sum::<f64>() / n;
            let se = if members.len() > 1 {
                let var = members
                    .iter()
                    .map(|&m| (snvs[m].vaf[c] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0);
                var.sqrt() / n.sqrt()
            } else {
                0.0
            };
            centroid.push(mean.clamp(0.0, 1.0));
            stderr.push(se);
        }
        Self {
            id,
            profile,
            members,
            centroid,
            stderr,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Centroid over all samples, zero where the profile is absent.
    pub fn full_centroid(&self) -> Vec<f64> {
        self.expand(&self.centroid)
    }

    pub fn full_stderr(&self) -> Vec<f64> {
        self.expand(&self.stderr)
    }

    fn expand(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.profile.len()];
        for (v, i) in values.iter().zip(self.profile.ones()) {
            out[i] = *v;
        }
        out
    }
}

/// Why an input SSNV is absent from the final network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Called absent in every sample.
    AllZeroProfile,
    /// Present in every sample including the normal control.
    GermlineProfile,
    /// Its cluster had no neighbour to merge into.
    ClusterTooSmall,
    /// Its node had fewer members than the minimum node support.
    BelowNodeSupport,
    /// Its node was removed while adjusting the network for a valid tree.
    NetworkAdjustment,
    /// Not listed in any supplied cluster.
    Unclustered,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::AllZeroProfile => "all-zero profile",
            DropReason::GermlineProfile => "germline profile",
            DropReason::ClusterTooSmall => "cluster too small",
            DropReason::BelowNodeSupport => "below node support",
            DropReason::NetworkAdjustment => "removed by network adjustment",
            DropReason::Unclustered => "not in any supplied cluster",
        })
    }
}
