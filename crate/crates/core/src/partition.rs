//! Partitions of party subsets and the dual objective `ℍ_σ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, invalid, Result};
use crate::measures::EntropyProfile;
use crate::types::{JointDistribution, PartySubset};

/// Ground sets larger than this are not enumerated.
pub const PARTITION_BUDGET: usize = 10;

/// Entropies closer than this are treated as tied when sorting parts.
pub const ENTROPY_TIE_TOL: f64 = 1e-9;

/// Disjoint nonempty parts, stored in ascending order of smallest member.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<PartySubset>,
}

impl Partition {
    pub fn new(mut parts: Vec<PartySubset>) -> Result<Self> {
        if parts.is_empty() {
            return invalid("a partition needs at least one part");
        }
        let mut seen = PartySubset::empty();
        for p in &parts {
            if p.is_empty() {
                return invalid("partition parts must be nonempty");
            }
            if !seen.is_disjoint(*p) {
                return invalid(format!("part {p} overlaps another part"));
            }
            seen = seen.union(*p);
        }
        parts.sort_by_key(|p| p.first());
        Ok(Partition { parts })
    }

    /// `{{i} : i ∈ ground}`.
    pub fn singletons(ground: PartySubset) -> Self {
        Partition {
            parts: ground.iter().map(PartySubset::singleton).collect(),
        }
    }

    /// The one-part partition `{ground}`.
    pub fn trivial(ground: PartySubset) -> Self {
        Partition {
            parts: vec![ground],
        }
    }

    pub fn parts(&self) -> &[PartySubset] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn ground(&self) -> PartySubset {
        self.parts
            .iter()
            .fold(PartySubset::empty(), |acc, p| acc.union(*p))
    }

    /// Index of the part containing party `i`.
    pub fn part_of(&self, i: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(i))
    }

    /// True when every part of `self` lies inside some part of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        self.ground() == other.ground()
            && self
                .parts
                .iter()
                .all(|p| other.parts.iter().any(|q| p.is_subset_of(*q)))
    }

    /// Replaces every part contained in some `merge` set by that set.
    ///
    /// Each merge set must be a union of parts.
    pub fn merged(&self, merges: &[PartySubset]) -> Result<Partition> {
        let mut out = Vec::new();
        for p in &self.parts {
            if !merges.iter().any(|m| p.is_subset_of(*m)) {
                out.push(*p);
            }
        }
        for m in merges {
            let covered = self
                .parts
                .iter()
                .filter(|p| p.is_subset_of(*m))
                .fold(PartySubset::empty(), |acc, p| acc.union(*p));
            if covered != *m {
                return invalid(format!("merge set {m} is not a union of parts of {self}"));
            }
            if !out.contains(m) {
                out.push(*m);
            }
        }
        Partition::new(out)
    }

    /// Parts in descending entropy order, near-ties broken by smallest member.
    pub fn sorted_by_entropy(&self, entropy: impl Fn(PartySubset) -> f64) -> Vec<PartySubset> {
        sort_parts_by_entropy(&self.parts, entropy)
    }
}

/// Descending-entropy order with ascending smallest member inside each near-tie cluster.
pub fn sort_parts_by_entropy(
    parts: &[PartySubset],
    entropy: impl Fn(PartySubset) -> f64,
) -> Vec<PartySubset> {
    let mut keyed: Vec<(f64, PartySubset)> = parts.iter().map(|&p| (entropy(p), p)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.first().cmp(&b.1.first())));
    let mut out = Vec::with_capacity(parts.len());
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end - 1].0 - keyed[end].0 <= ENTROPY_TIE_TOL {
            end += 1;
        }
        let mut cluster: Vec<PartySubset> = keyed[start..end].iter().map(|k| k.1).collect();
        cluster.sort_by_key(|p| p.first());
        out.extend(cluster);
        start = end;
    }
    out
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, p) in self.parts.iter().enumerate() {
            if k > 0 {
                f.write_str("|")?;
            }
            for (j, i) in p.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", i + 1)?;
            }
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Every partition of `ground` with at least `min_parts` parts, each once.
pub fn enumerate_partitions(ground: PartySubset, min_parts: usize) -> Result<Vec<Partition>> {
    check_budget(
        "partition enumeration ground size",
        ground.len() as u128,
        PARTITION_BUDGET as u128,
    )?;
    if ground.is_empty() {
        return invalid("cannot partition an empty set");
    }
    let members = ground.members();
    let k = members.len();
    // restricted growth strings: labels[0] = 0, labels[i] ≤ 1 + max(labels[..i])
    let mut labels = vec![0usize; k];
    let mut maxes = vec![0usize; k];
    let mut out = Vec::new();
    loop {
        let blocks = maxes[k - 1] + 1;
        if blocks >= min_parts {
            let mut parts = vec![PartySubset::empty(); blocks];
            for (i, &l) in labels.iter().enumerate() {
                parts[l] = parts[l].union(PartySubset::singleton(members[i]));
            }
            out.push(Partition { parts });
        }
        // advance
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if labels[i] <= maxes[i - 1] {
                labels[i] += 1;
                maxes[i] = maxes[i - 1].max(labels[i]);
                for j in i + 1..k {
                    labels[j] = 0;
                    maxes[j] = maxes[i];
                }
                break;
            }
            i -= 1;
        }
    }
}

/// `ℍ_σ(ground) = (1/(|σ|-1)) Σ_i H(X_ground | X_{σ_i})`.
pub fn h_sigma(dist: &JointDistribution, ground: PartySubset, sigma: &Partition) -> Result<f64> {
    check_sigma(ground, sigma)?;
    let profile = EntropyProfile::new(dist, ground)?;
    Ok(h_sigma_profile(&profile, ground, sigma.parts()))
}

pub(crate) fn check_sigma(ground: PartySubset, sigma: &Partition) -> Result<()> {
    if sigma.len() < 2 {
        return invalid(format!("partition {sigma} is trivial"));
    }
    if sigma.ground() != ground {
        return invalid(format!("partition {sigma} does not cover {ground}"));
    }
    Ok(())
}

/// `ℍ_σ` from precomputed subset entropies; `parts` must cover `ground`.
pub fn h_sigma_profile(profile: &EntropyProfile, ground: PartySubset, parts: &[PartySubset]) -> f64 {
    debug_assert!(parts.len() >= 2);
    let total = profile.h(ground);
    let s: f64 = parts.iter().map(|&p| total - profile.h(p)).sum();
    s / (parts.len() as f64 - 1.0)
}
