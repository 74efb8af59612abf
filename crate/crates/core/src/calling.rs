//! Presence calling: turns per-sample frequencies into binary profiles and
//! partitions SSNVs into profile groups.
//!
//! SSNVs whose calls are unambiguous and shared by enough peers form robust
//! groups. The rest are either attached to the most similar robust group or,
//! failing that, covered greedily by new target profiles.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryProfile, DropReason, Mark, SnvRecord, TernaryProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CallingConfig {
    /// Frequencies at or above this are called present.
    pub t_present: f64,
    /// Frequencies at or below this are called absent.
    pub t_absent: f64,
    /// Other SSNVs that must share a profile for it to count as robust.
    pub min_robust_peers: usize,
    /// Greyzone assignment needs similarity of at least this fraction of the
    /// sample count.
    pub sim_threshold_frac: f64,
    /// Residuals with more greyzone samples than this skip target enumeration.
    pub max_star_positions: usize,
    /// Sample forced absent in every somatic profile.
    pub normal_index: Option<usize>,
}

impl Default for CallingConfig {
    fn default() -> Self {
        Self {
            t_present: 0.01,
            t_absent: 0.005,
            min_robust_peers: 1,
            sim_threshold_frac: 0.7,
            max_star_positions: 10,
            normal_index: None,
        }
    }
}

impl CallingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.t_absent && self.t_absent <= self.t_present && self.t_present <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_absent ({}) <= t_present ({}) <= 1",
                self.t_absent, self.t_present
            )));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold_frac) {
            return Err(Error::InvalidConfig(format!(
                "similarity threshold fraction {} outside [0, 1]",
                self.sim_threshold_frac
            )));
        }
        if self.max_star_positions > 20 {
            return Err(Error::InvalidConfig(format!(
                "max_star_positions {} would enumerate too many targets",
                self.max_star_positions
            )));
        }
        Ok(())
    }
}

/// SSNVs sharing one binary profile. Members index the SSNV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnvGroup {
    pub profile: BinaryProfile,
    pub members: Vec<usize>,
    pub robust: bool,
}

/// An SSNV that could not be placed in a robust group by thresholds alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Unresolved {
    pub snv: usize,
    pub profile: TernaryProfile,
}

/// Outcome of the calling stage.
#[derive(Debug, Clone, Default)]
pub struct Grouping {
    /// Groups sorted by profile.
    pub groups: Vec<SnvGroup>,
    pub dropped: Vec<(usize, DropReason)>,
}

impl Grouping {
    /// The profile each SSNV was finally assigned, if any.
    pub fn called_profiles(&self, num_snvs: usize) -> Vec<Option<BinaryProfile>> {
        let mut out = vec![None; num_snvs];
        for g in &self.groups {
            for &m in &g.members {
                out[m] = Some(g.profile);
            }
        }
        out
    }
}

pub fn mark_presence(snv: &SnvRecord, cfg: &CallingConfig) -> TernaryProfile {
    let marks = snv
        .vaf
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if cfg.normal_index == Some(i) {
                Mark::Absent
            } else if v >= cfg.t_present {
                Mark::Present
            } else if v <= cfg.t_absent {
                Mark::Absent
            } else {
                Mark::Grey
            }
        })
        .collect();
    TernaryProfile::new(marks)
}

/// Splits SSNVs into robust groups and unresolved SSNVs.
///
/// Unambiguous SSNVs with an all-zero or all-one profile are reported through
/// the third element instead.
pub fn form_robust_groups(
    snvs: &[SnvRecord],
    cfg: &CallingConfig,
) -> (Vec<SnvGroup>, Vec<Unresolved>, Vec<(usize, DropReason)>) {
    let mut by_profile: BTreeMap<BinaryProfile, Vec<usize>> = BTreeMap::new();
    let mut unresolved = Vec::new();
    let mut dropped = Vec::new();
    for (idx, snv) in snvs.iter().enumerate() {
        let t = mark_presence(snv, cfg);
        match t.to_binary() {
            Some(b) if b.is_zero() => dropped.push((idx, DropReason::AllZeroProfile)),
            Some(b) if b.is_all_ones() => dropped.push((idx, DropReason::GermlineProfile)),
            Some(b) => by_profile.entry(b).or_default().push(idx),
            None => unresolved.push(Unresolved { snv: idx, profile: t }),
        }
    }

    let mut groups = Vec::new();
    for (profile, members) in by_profile {
        if members.len() > cfg.min_robust_peers {
            groups.push(SnvGroup {
                profile,
                members,
                robust: true,
            });
        } else {
            let t = TernaryProfile::new(
                (0..profile.len())
                    .map(|i| if profile.get(i) { Mark::Present } else { Mark::Absent })
                    .collect(),
            );
            unresolved.extend(members.into_iter().map(|snv| Unresolved {
                snv,
                profile: t.clone(),
            }));
        }
    }
    unresolved.sort_by_key(|u| u.snv);
    for (idx, reason) in &dropped {
        warn!("dropping SSNV {idx}: {reason}");
    }
    (groups, unresolved, dropped)
}

/// Sum over samples of min/max frequency ratios; a sample where both are
/// zero counts as full agreement.
pub fn similarity(m: &SnvRecord, n: &SnvRecord) -> f64 {
    debug_assert_eq!(m.vaf.len(), n.vaf.len());
    m.vaf
        .iter()
        .zip(&n.vaf)
        .map(|(&a, &b)| {
            let hi = a.max(b);
            if hi <= 0.0 {
                1.0
            } else {
                a.min(b) / hi
            }
        })
        .sum()
}

/// Attaches each unresolved SSNV to the compatible robust group holding its
/// most similar robust member, when that similarity clears the threshold.
pub fn assign_greyzone(
    unresolved: Vec<Unresolved>,
    mut groups: Vec<SnvGroup>,
    snvs: &[SnvRecord],
    cfg: &CallingConfig,
) -> (Vec<SnvGroup>, Vec<Unresolved>) {
    groups.sort_by_key(|g| g.profile);
    // Snapshot of robust members so that assignments made here never serve
    // as references for later ones.
    let robust: Vec<(usize, Vec<usize>)> = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.robust)
        .map(|(i, g)| (i, g.members.clone()))
        .collect();
    let mut residual = Vec::new();
    let mut additions: Vec<(usize, usize)> = Vec::new();

    for u in unresolved {
        let num_samples = u.profile.len() as f64;
        let mut best: Option<(f64, usize)> = None;
        for (gi, members) in &robust {
            if !u.profile.compatible(&groups[*gi].profile).unwrap_or(false) {
                continue;
            }
            for &n in members {
                let s = similarity(&snvs[u.snv], &snvs[n]);
                // strict improvement keeps the earliest (smallest profile,
                // lowest index) candidate on ties
                if best.is_none_or(|(bs, _)| s > bs) {
                    best = Some((s, *gi));
                }
            }
        }
        match best {
            Some((s, gi)) if s >= cfg.sim_threshold_frac * num_samples => {
                additions.push((gi, u.snv));
            }
            _ => residual.push(u),
        }
    }
    for (gi, snv) in additions {
        groups[gi].members.push(snv);
    }
    for g in &mut groups {
        g.members.sort_unstable();
    }
    (groups, residual)
}

/// Rounds each greyzone mark to whichever threshold the frequency is closer
/// to; an exact midpoint rounds to present.
pub fn round_by_proximity(t: &TernaryProfile, snv: &SnvRecord, cfg: &CallingConfig) -> BinaryProfile {
    let mut p = BinaryProfile::new(t.len());
    for (i, m) in t.marks().iter().enumerate() {
        let bit = match m {
            Mark::Present => true,
            Mark::Absent => false,
            Mark::Grey => {
                let v = snv.vaf[i];
                (v - cfg.t_present).abs() <= (v - cfg.t_absent).abs()
            }
        };
        p.set(i, bit);
    }
    p
}

fn admissible_target(p: &BinaryProfile) -> bool {
    !p.is_zero() && !p.is_all_ones()
}

/// Greedy set cover of residual SSNVs by binary target profiles.
///
/// Each round picks the target compatible with the most uncovered residuals
/// (smallest profile on ties). Once no target covers two or more, the rest
/// are rounded individually. Returned groups are non-robust, sorted by
/// profile; SSNVs that round to an all-zero or all-one profile are dropped.
pub fn cover_residual(
    residual: &[Unresolved],
    snvs: &[SnvRecord],
    cfg: &CallingConfig,
) -> (Vec<SnvGroup>, Vec<(usize, DropReason)>) {
    let mut assigned: BTreeMap<BinaryProfile, Vec<usize>> = BTreeMap::new();
    let mut rounding: Vec<&Unresolved> = Vec::new();
    let mut uncovered: Vec<(&Unresolved, Vec<BinaryProfile>)> = Vec::new();
    for u in residual {
        if u.profile.num_stars() > cfg.max_star_positions {
            rounding.push(u);
        } else {
            let targets: Vec<BinaryProfile> = u
                .profile
                .expansions()
                .into_iter()
                .filter(admissible_target)
                .collect();
            uncovered.push((u, targets));
        }
    }

    loop {
        let mut counts: BTreeMap<BinaryProfile, usize> = BTreeMap::new();
        for (_, targets) in &uncovered {
            for t in targets {
                *counts.entry(*t).or_default() += 1;
            }
        }
        let Some((&target, &count)) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        else {
            break;
        };
        if count < 2 {
            break;
        }
        let (take, keep): (Vec<_>, Vec<_>) = uncovered
            .into_iter()
            .partition(|(_, targets)| targets.contains(&target));
        assigned
            .entry(target)
            .or_default()
            .extend(take.into_iter().map(|(u, _)| u.snv));
        uncovered = keep;
    }
    rounding.extend(uncovered.into_iter().map(|(u, _)| u));

    let mut dropped = Vec::new();
    for u in rounding {
        let p = round_by_proximity(&u.profile, &snvs[u.snv], cfg);
        if p.is_zero() {
            dropped.push((u.snv, DropReason::AllZeroProfile));
        } else if p.is_all_ones() {
            dropped.push((u.snv, DropReason::GermlineProfile));
        } else {
            assigned.entry(p).or_default().push(u.snv);
        }
    }
    for (idx, reason) in &dropped {
        warn!("dropping SSNV {idx}: {reason}");
    }
    dropped.sort_unstable();

    let groups = assigned
        .into_iter()
        .map(|(profile, mut members)| {
            members.sort_unstable();
            SnvGroup {
                profile,
                members,
                robust: false,
            }
        })
        .collect();
    (groups, dropped)
}

/// Runs the full calling stage. Residual groups whose profile matches an
/// existing group are merged into it.
pub fn call_groups(snvs: &[SnvRecord], cfg: &CallingConfig) -> Result<Grouping> {
    cfg.validate()?;
    let (robust, unresolved, mut dropped) = form_robust_groups(snvs, cfg);
    let (mut groups, residual) = assign_greyzone(unresolved, robust, snvs, cfg);
    let (extra, cover_dropped) = cover_residual(&residual, snvs, cfg);
    dropped.extend(cover_dropped);
    for g in extra {
        match groups.iter_mut().find(|x| x.profile == g.profile) {
            Some(existing) => {
                existing.members.extend(g.members);
                existing.members.sort_unstable();
            }
            None => groups.push(g),
        }
    }
    groups.sort_by_key(|g| g.profile);
    dropped.sort_unstable();
    debug_assert!({
        let mut seen = BTreeSet::new();
        groups.iter().flat_map(|g| &g.members).all(|&m| seen.insert(m))
            && dropped.iter().all(|(m, _)| seen.insert(*m))
            && seen.len() == snvs.len()
    });
    Ok(Grouping { groups, dropped })
}
