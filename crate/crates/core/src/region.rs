//! The CO rate region, its Δ-restricted form, and the minimum sum-rate.
//!
//! A region is defined over a [`Ground`]: a list of disjoint entities, each
//! a party subset. Plain parties are singleton entities; after merges an
//! entity is a whole part that behaves as one collocated party.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, invalid, Error, Result};
use crate::lp;
use crate::measures::EntropyProfile;
use crate::partition::{enumerate_partitions, h_sigma_profile, Partition, PARTITION_BUDGET};
use crate::types::{JointDistribution, PartySubset};

/// Default membership tolerance for region tests.
pub const REGION_TOL: f64 = 1e-12;

/// Tolerance used when comparing values computed from floating pmfs.
pub const FLOAT_TOL: f64 = 1e-9;

/// Largest ground for which the LP route is attempted.
pub const LP_BUDGET: usize = 8;

// ───────────────────────────── rates ─────────────────────────────

/// Rate state of one entity in bits per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Active(f64),
    Inactive,
}

impl Rate {
    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Active(r) => Some(r),
            Rate::Inactive => None,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Rate::Active(_))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Active(r) => write!(f, "{r:.6}"),
            Rate::Inactive => f.write_str("inactive"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub rates: Vec<Rate>,
}

impl RateVector {
    pub fn active(values: &[f64]) -> Self {
        RateVector {
            rates: values.iter().map(|&r| Rate::Active(r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn get(&self, i: usize) -> Rate {
        self.rates[i]
    }

    /// All values, or an error naming the first inactive entity.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.rates
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.value().ok_or_else(|| {
                    Error::InvalidArgument(format!("entity {} is inactive", i + 1))
                })
            })
            .collect()
    }

    pub fn sum(&self) -> f64 {
        self.rates.iter().filter_map(|r| r.value()).sum()
    }
}

// ───────────────────────────── ground ─────────────────────────────

/// Disjoint nonempty entities over which a region is taken.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ground {
    entities: Vec<PartySubset>,
}

impl Ground {
    /// Every party of `set` as its own entity.
    pub fn parties(set: PartySubset) -> Ground {
        Ground {
            entities: set.iter().map(PartySubset::singleton).collect(),
        }
    }

    /// The parts of a partition as entities, in the given order.
    pub fn parts(parts: &[PartySubset]) -> Result<Ground> {
        let mut seen = PartySubset::empty();
        for p in parts {
            if p.is_empty() || !seen.is_disjoint(*p) {
                return invalid("ground entities must be nonempty and disjoint");
            }
            seen = seen.union(*p);
        }
        Ok(Ground {
            entities: parts.to_vec(),
        })
    }

    pub fn entities(&self) -> &[PartySubset] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn union(&self) -> PartySubset {
        self.union_of(self.full_mask())
    }

    /// Union of the entities selected by an index bitmask.
    pub fn union_of(&self, mask: u32) -> PartySubset {
        self.entities
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .fold(PartySubset::empty(), |acc, (_, p)| acc.union(*p))
    }

    pub fn full_mask(&self) -> u32 {
        (1u32 << self.entities.len()) - 1
    }

    /// The sub-ground selected by an index bitmask.
    pub fn select(&self, mask: u32) -> Ground {
        Ground {
            entities: self
                .entities
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, p)| *p)
                .collect(),
        }
    }

    fn check_dist(&self, dist: &JointDistribution) -> Result<()> {
        if self.entities.is_empty() {
            return invalid("empty ground");
        }
        if !self.union().is_subset_of(dist.parties()) {
            return invalid(format!(
                "ground {} exceeds distribution parties {}",
                self.union(),
                dist.parties()
            ));
        }
        Ok(())
    }
}

/// Entropy oracle over unions of ground entities.
pub trait SubsetEntropy {
    fn h(&self, set: PartySubset) -> f64;
}

impl SubsetEntropy for EntropyProfile {
    fn h(&self, set: PartySubset) -> f64 {
        EntropyProfile::h(self, set)
    }
}

impl<F: Fn(PartySubset) -> f64> SubsetEntropy for F {
    fn h(&self, set: PartySubset) -> f64 {
        self(set)
    }
}

/// Smallest constraint slack `R_B - H(X_B | X_{A\B}) - |B|Δ` over all
/// nonempty proper entity sets `B`, with the minimizing mask. `|B|` counts
/// the parties inside the chosen entities.
///
/// A one-entity ground has no constraints and returns `+∞`.
pub fn min_slack(
    ground: &Ground,
    rates: &[f64],
    delta: f64,
    h: &impl SubsetEntropy,
) -> (f64, u32) {
    let k = ground.len();
    let full = ground.full_mask();
    let total = h.h(ground.union());
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1..full {
        let r: f64 = (0..k).filter(|j| mask & (1 << j) != 0).map(|j| rates[j]).sum();
        let rest = ground.union_of(full & !mask);
        let need = total - h.h(rest) + ground.union_of(mask).len() as f64 * delta;
        let slack = r - need;
        if slack < best.0 {
            best = (slack, mask);
        }
    }
    best
}

/// Membership in `R^Δ_CO(ground | h)` with an explicit tolerance.
pub fn in_region_with(
    ground: &Ground,
    rates: &[f64],
    delta: f64,
    h: &impl SubsetEntropy,
    tol: f64,
) -> bool {
    min_slack(ground, rates, delta, h).0 >= -tol
}

// ───────────────────────────── operations ─────────────────────────────

/// True iff `rates` (one per entity) lies in `R^Δ_CO(ground)` within [`REGION_TOL`].
pub fn in_co_region(
    rates: &RateVector,
    dist: &JointDistribution,
    ground: &Ground,
    delta: f64,
) -> Result<bool> {
    in_co_region_tol(rates, dist, ground, delta, REGION_TOL)
}

pub fn in_co_region_tol(
    rates: &RateVector,
    dist: &JointDistribution,
    ground: &Ground,
    delta: f64,
    tol: f64,
) -> Result<bool> {
    ground.check_dist(dist)?;
    if rates.len() != ground.len() {
        return invalid(format!(
            "{} rates for {} ground entities",
            rates.len(),
            ground.len()
        ));
    }
    if delta < 0.0 {
        return invalid("Δ must be nonnegative");
    }
    let values = rates.values()?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    Ok(in_region_with(ground, &values, delta, &profile, tol))
}

/// Minimum sum-rate by linear programming over all `2^k - 2` constraints.
pub fn rco_lp(dist: &JointDistribution, ground: &Ground) -> Result<(f64, RateVector)> {
    ground.check_dist(dist)?;
    check_budget("LP ground size", ground.len() as u128, LP_BUDGET as u128)?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    rco_lp_profile(&profile, ground)
}

/// LP route on a precomputed entropy profile.
pub fn rco_lp_profile(profile: &EntropyProfile, ground: &Ground) -> Result<(f64, RateVector)> {
    let k = ground.len();
    if k < 2 {
        return Ok((0.0, RateVector::active(&vec![0.0; k])));
    }
    // Dual: max Σ_B c_B y_B  s.t.  Σ_{B ∋ j} y_B ≤ 1 for each entity j.
    // Shadow prices of the entity rows are a minimizing rate vector.
    let full = ground.full_mask();
    let total = profile.h(ground.union());
    let masks: Vec<u32> = (1..full).collect();
    let c: Vec<f64> = masks
        .iter()
        .map(|&m| (total - profile.h(ground.union_of(full & !m))).max(0.0))
        .collect();
    let a: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            masks
                .iter()
                .map(|&m| if m & (1 << j) != 0 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let sol = lp::maximize(&a, &vec![1.0; k], &c)?;
    Ok((sol.objective, RateVector::active(&sol.dual)))
}

/// Maximum of `ℍ_σ` over nontrivial partitions of the entities.
///
/// Among maximizers equal within [`REGION_TOL`] the one with most parts is returned.
pub fn rco_partition_max(dist: &JointDistribution, ground: &Ground) -> Result<(f64, Partition)> {
    ground.check_dist(dist)?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    rco_partition_max_profile(&profile, ground)
}

pub fn rco_partition_max_profile(
    profile: &EntropyProfile,
    ground: &Ground,
) -> Result<(f64, Partition)> {
    let scored = score_partitions(profile, ground)?;
    let best = scored
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let (v, p) = scored
        .into_iter()
        .filter(|s| s.0 >= best - REGION_TOL)
        .max_by_key(|s| s.1.len())
        .expect("a ground of two or more entities has a nontrivial partition");
    Ok((v, p))
}

/// Every nontrivial partition of the entities, flattened to party sets, with its `ℍ_σ`.
fn score_partitions(profile: &EntropyProfile, ground: &Ground) -> Result<Vec<(f64, Partition)>> {
    if ground.len() < 2 {
        return invalid("a partition maximum needs at least two entities");
    }
    check_budget(
        "partition enumeration ground size",
        ground.len() as u128,
        PARTITION_BUDGET as u128,
    )?;
    let index_set = PartySubset::full(ground.len());
    let union = ground.union();
    let mut out = Vec::new();
    for sigma in enumerate_partitions(index_set, 2)? {
        let parts: Vec<PartySubset> = sigma
            .parts()
            .iter()
            .map(|idx| ground.union_of(idx.bits()))
            .collect();
        let value = h_sigma_profile(profile, union, &parts);
        out.push((value, Partition::new(parts)?));
    }
    Ok(out)
}

/// The finest partition attaining the `ℍ_σ` maximum within `tol`.
///
/// Every other near-maximizer must be a coarsening of the returned one;
/// otherwise the tolerance has produced incomparable maximizers and an
/// [`Error::Ambiguity`] names the offending pair.
pub fn finest_dominant_partition(
    dist: &JointDistribution,
    ground: &Ground,
    tol: f64,
) -> Result<Partition> {
    ground.check_dist(dist)?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    finest_dominant_partition_profile(&profile, ground, tol)
}

pub fn finest_dominant_partition_profile(
    profile: &EntropyProfile,
    ground: &Ground,
    tol: f64,
) -> Result<Partition> {
    let scored = score_partitions(profile, ground)?;
    let best = scored
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let near: Vec<Partition> = scored
        .into_iter()
        .filter(|s| s.0 >= best - tol)
        .map(|s| s.1)
        .collect();
    let most = near.iter().map(Partition::len).max().unwrap_or(0);
    let finest: Vec<&Partition> = near.iter().filter(|p| p.len() == most).collect();
    if finest.len() > 1 {
        return Err(Error::Ambiguity {
            tol,
            first: finest[0].to_string(),
            second: finest[1].to_string(),
        });
    }
    let f = finest[0].clone();
    if let Some(bad) = near.iter().find(|p| !f.refines(p)) {
        return Err(Error::Ambiguity {
            tol,
            first: f.to_string(),
            second: bad.to_string(),
        });
    }
    Ok(f)
}

/// `R*_e = ℍ_{σ_f}(ground) - H(X_ground | X_e)` for each entity `e`, where
/// `σ_f` puts every entity in its own part. Entries may be negative.
pub fn r_star(dist: &JointDistribution, ground: &Ground) -> Result<RateVector> {
    ground.check_dist(dist)?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    r_star_profile(&profile, ground).map(|v| RateVector::active(&v))
}

pub fn r_star_profile(profile: &EntropyProfile, ground: &Ground) -> Result<Vec<f64>> {
    if ground.len() < 2 {
        return invalid("R* needs at least two entities");
    }
    let union = ground.union();
    let hf = h_sigma_profile(profile, union, ground.entities());
    let total = profile.h(union);
    Ok(ground
        .entities()
        .iter()
        .map(|&e| hf - (total - profile.h(e)))
        .collect())
}

/// A sub-collection `B` (entity indices, `|B| ≥ 2`) with
/// `(R*_l(ground) : l ∈ B) ∈ R_CO(B)`, searched by decreasing size then
/// lexicographic order. `None` would contradict the existence guarantee.
pub fn find_omniscience_subset(
    dist: &JointDistribution,
    ground: &Ground,
) -> Result<Option<Vec<usize>>> {
    ground.check_dist(dist)?;
    let profile = EntropyProfile::new(dist, ground.union())?;
    find_omniscience_subset_profile(&profile, ground, FLOAT_TOL)
}

pub fn find_omniscience_subset_profile(
    profile: &EntropyProfile,
    ground: &Ground,
    tol: f64,
) -> Result<Option<Vec<usize>>> {
    let rstar = r_star_profile(profile, ground)?;
    let k = ground.len();
    for size in (2..=k).rev() {
        for combo in combinations(k, size) {
            let mask = combo.iter().fold(0u32, |m, &j| m | (1 << j));
            let sub = ground.select(mask);
            let rates: Vec<f64> = combo.iter().map(|&j| rstar[j]).collect();
            if in_region_with(&sub, &rates, 0.0, profile, tol) {
                return Ok(Some(combo));
            }
        }
    }
    Ok(None)
}

/// `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
