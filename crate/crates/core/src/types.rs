//! Alphabets, party subsets, multiparty sequences and joint distributions.
//!
//! Party indices are 0-based throughout the API. `Display` impls render
//! them 1-based so printed output reads like the usual `{1,2|3}` notation.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, invalid, Error, Result};

/// Largest number of parties a `PartySubset` can address.
pub const MAX_PARTIES: usize = 16;

/// Default cap on the number of types yielded by [`enumerate_types`].
pub const TYPE_BUDGET: u128 = 2_000_000;

/// Joint alphabets larger than this are rejected.
pub const MAX_JOINT_ALPHABET: u128 = 1 << 24;

// ───────────────────────────── PartySubset ─────────────────────────────

/// A set of party indices, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct PartySubset(u32);

impl PartySubset {
    /// Builds a nonempty subset from distinct in-range indices.
    pub fn new(members: &[usize]) -> Result<Self> {
        if members.is_empty() {
            return invalid("party subset must be nonempty");
        }
        let mut bits = 0u32;
        for &i in members {
            if i >= MAX_PARTIES {
                return invalid(format!("party index {i} out of range"));
            }
            if bits & (1 << i) != 0 {
                return invalid(format!("party index {i} repeated"));
            }
            bits |= 1 << i;
        }
        Ok(PartySubset(bits))
    }

    pub const fn from_bits(bits: u32) -> Self {
        PartySubset(bits)
    }

    pub const fn empty() -> Self {
        PartySubset(0)
    }

    /// `{0, .., m-1}`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_PARTIES);
        PartySubset((1u32 << m) - 1)
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_PARTIES);
        PartySubset(1 << i)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub const fn union(self, other: Self) -> Self {
        PartySubset(self.0 | other.0)
    }

    pub const fn intersection(self, other: Self) -> Self {
        PartySubset(self.0 & other.0)
    }

    pub const fn minus(self, other: Self) -> Self {
        PartySubset(self.0 & !other.0)
    }

    pub const fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Members in ascending order.
    pub fn iter(self) -> Members {
        Members(self.0)
    }

    pub fn members(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Position of `i` among the ascending members.
    pub fn rank_of(self, i: usize) -> Option<usize> {
        self.contains(i)
            .then(|| (self.0 & ((1u32 << i) - 1)).count_ones() as usize)
    }

    /// Every nonempty proper subset, in increasing bitmask order.
    pub fn proper_subsets(self) -> impl Iterator<Item = PartySubset> {
        let full = self.0;
        let mut sub = 0u32;
        std::iter::from_fn(move || {
            // next submask of `full` in increasing order
            sub = (sub.wrapping_sub(full)) & full;
            (sub != 0 && sub != full).then_some(PartySubset(sub))
        })
    }

    /// Every nonempty subset including `self`.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = PartySubset> {
        self.proper_subsets()
            .chain((self.0 != 0).then_some(self))
    }
}

pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

impl From<PartySubset> for Vec<usize> {
    fn from(s: PartySubset) -> Vec<usize> {
        s.members()
    }
}

impl TryFrom<Vec<usize>> for PartySubset {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        PartySubset::new(&v)
    }
}

impl fmt::Debug for PartySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PartySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

// ───────────────────────────── Alphabet ─────────────────────────────

/// Per-party alphabet cardinalities for an `m`-party system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    sizes: Vec<usize>,
}

impl Alphabet {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return invalid("an alphabet needs at least two parties");
        }
        if sizes.len() > MAX_PARTIES {
            return invalid(format!("at most {MAX_PARTIES} parties are supported"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return invalid("every alphabet must be nonempty");
        }
        if sizes.iter().any(|&s| s > u16::MAX as usize + 1) {
            return invalid("alphabet sizes must fit in 16-bit symbols");
        }
        let total: u128 = sizes.iter().map(|&s| s as u128).product();
        check_budget("joint alphabet size", total, MAX_JOINT_ALPHABET)?;
        Ok(Alphabet { sizes })
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    /// `|X_A|`.
    pub fn joint_size(&self, subset: PartySubset) -> usize {
        subset.iter().map(|i| self.sizes[i]).product()
    }

    /// `log2 |X_A|`.
    pub fn log2_size(&self, subset: PartySubset) -> f64 {
        subset.iter().map(|i| (self.sizes[i] as f64).log2()).sum()
    }

    pub fn parties(&self) -> PartySubset {
        PartySubset::full(self.m())
    }
}

// ───────────────────────────── SequenceMatrix ─────────────────────────────

/// `m` rows of length `n`; row `i` is party `i`'s observation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceMatrix {
    alphabet: Alphabet,
    rows: Vec<Vec<u16>>,
}

impl SequenceMatrix {
    pub fn new(alphabet: Alphabet, rows: Vec<Vec<u16>>) -> Result<Self> {
        if rows.len() != alphabet.m() {
            return invalid(format!(
                "expected {} rows, got {}",
                alphabet.m(),
                rows.len()
            ));
        }
        let n = rows[0].len();
        if n == 0 {
            return invalid("block length must be at least 1");
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {} has length {} != {n}", i + 1, row.len()));
            }
            if let Some(&bad) = row.iter().find(|&&s| s as usize >= alphabet.size(i)) {
                return invalid(format!(
                    "symbol {bad} in row {} exceeds alphabet size {}",
                    i + 1,
                    alphabet.size(i)
                ));
            }
        }
        Ok(SequenceMatrix { alphabet, rows })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u16>] {
        &self.rows
    }

    /// Joint symbol index of column `t` restricted to `subset`.
    pub fn column_index(&self, subset: PartySubset, t: usize) -> usize {
        subset
            .iter()
            .fold(0, |acc, i| acc * self.alphabet.size(i) + self.rows[i][t] as usize)
    }
}

// ───────────────────────────── JointDistribution ─────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mass {
    /// Floating probabilities summing to one.
    Real(Vec<f64>),
    /// Integer counts over a denominator `n`; an element of `P_n`.
    Counts { counts: Vec<u64>, n: u64 },
}

/// A pmf on `X_A` for a party subset `A`.
///
/// Cells are laid out in mixed radix over the ascending members of `A`,
/// the largest index varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    parties: PartySubset,
    sizes: Vec<usize>,
    mass: Mass,
}

/// Tolerance for normalization of floating pmfs.
pub const NORMALIZATION_TOL: f64 = 1e-12;

impl JointDistribution {
    pub fn from_probs(parties: PartySubset, sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::check_shape(parties, &sizes, probs.len())?;
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("probabilities must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        Ok(JointDistribution {
            parties,
            sizes,
            mass: Mass::Real(probs),
        })
    }

    /// Rescales nonnegative weights to a pmf.
    pub fn from_weights(parties: PartySubset, sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return invalid("weights must have a positive finite total");
        }
        Self::from_probs(parties, sizes, weights.iter().map(|w| w / total).collect())
    }

    pub fn from_counts(parties: PartySubset, sizes: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        Self::check_shape(parties, &sizes, counts.len())?;
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return invalid("a type needs a positive denominator");
        }
        Ok(JointDistribution {
            parties,
            sizes,
            mass: Mass::Counts { counts, n },
        })
    }

    fn check_shape(parties: PartySubset, sizes: &[usize], cells: usize) -> Result<()> {
        if parties.is_empty() {
            return invalid("a distribution needs at least one party");
        }
        if sizes.len() != parties.len() {
            return invalid("one alphabet size per party is required");
        }
        if sizes.iter().any(|&s| s == 0) {
            return invalid("alphabet sizes must be positive");
        }
        let expect: u128 = sizes.iter().map(|&s| s as u128).product();
        check_budget("joint alphabet size", expect, MAX_JOINT_ALPHABET)?;
        if expect != cells as u128 {
            return invalid(format!("expected {expect} cells, got {cells}"));
        }
        Ok(())
    }

    pub fn parties(&self) -> PartySubset {
        self.parties
    }

    /// Alphabet sizes, aligned with the ascending members of `parties()`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size_of(&self, party: usize) -> Option<usize> {
        self.parties.rank_of(party).map(|r| self.sizes[r])
    }

    pub fn cells(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn mass(&self) -> &Mass {
        &self.mass
    }

    /// `Some(n)` when this is a type in `P_n`.
    pub fn denominator(&self) -> Option<u64> {
        match &self.mass {
            Mass::Counts { n, .. } => Some(*n),
            Mass::Real(_) => None,
        }
    }

    pub fn prob(&self, cell: usize) -> f64 {
        match &self.mass {
            Mass::Real(p) => p[cell],
            Mass::Counts { counts, n } => counts[cell] as f64 / *n as f64,
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.cells()).map(|c| self.prob(c)).collect()
    }

    /// Symbol tuple of a cell, aligned with the ascending members.
    pub fn decode(&self, mut cell: usize) -> Vec<u16> {
        let mut out = vec![0u16; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            out[k] = (cell % self.sizes[k]) as u16;
            cell /= self.sizes[k];
        }
        out
    }

    pub fn encode(&self, symbols: &[u16]) -> usize {
        symbols
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&s, &z)| acc * z + s as usize)
    }

    /// Exact marginal on `subset`; counts stay counts.
    pub fn marginal(&self, subset: PartySubset) -> Result<JointDistribution> {
        if subset.is_empty() || !subset.is_subset_of(self.parties) {
            return invalid(format!(
                "marginal subset {subset} is not a nonempty subset of {}",
                self.parties
            ));
        }
        if subset == self.parties {
            return Ok(self.clone());
        }
        let map = self.projector(subset);
        let sizes = map.sizes.clone();
        let cells = map.cells;
        Ok(match &self.mass {
            Mass::Real(p) => {
                let mut out = vec![0.0; cells];
                for (c, &v) in p.iter().enumerate() {
                    out[map.project(c)] += v;
                }
                JointDistribution {
                    parties: subset,
                    sizes,
                    mass: Mass::Real(out),
                }
            }
            Mass::Counts { counts, n } => {
                let mut out = vec![0u64; cells];
                for (c, &v) in counts.iter().enumerate() {
                    out[map.project(c)] += v;
                }
                JointDistribution {
                    parties: subset,
                    sizes,
                    mass: Mass::Counts { counts: out, n: *n },
                }
            }
        })
    }

    /// Cell-index projection onto `subset` (which must lie inside `parties()`).
    pub fn projector(&self, subset: PartySubset) -> Projector {
        Projector::new(self.parties, &self.sizes, subset)
    }

    /// ℓ1 distance to another pmf on the same alphabet.
    pub fn l1_distance(&self, other: &JointDistribution) -> Result<f64> {
        if self.parties != other.parties || self.sizes != other.sizes {
            return invalid("l1 distance needs matching alphabets");
        }
        Ok((0..self.cells())
            .map(|c| (self.prob(c) - other.prob(c)).abs())
            .sum())
    }

    /// Alphabet for a distribution over `{0..m-1}`.
    pub fn alphabet(&self) -> Result<Alphabet> {
        if self.parties != PartySubset::full(self.parties.len()) {
            return invalid("distribution is not over a contiguous party range");
        }
        Alphabet::new(self.sizes.clone())
    }
}

/// Maps joint cells on a ground set to joint cells on a sub-collection.
#[derive(Clone, Debug)]
pub struct Projector {
    /// For each ground coordinate, the stride in the projected index (0 if dropped).
    radix: Vec<usize>,
    strides: Vec<usize>,
    sizes: Vec<usize>,
    cells: usize,
}

impl Projector {
    pub fn new(ground: PartySubset, ground_sizes: &[usize], subset: PartySubset) -> Projector {
        let members = ground.members();
        let mut sizes = Vec::new();
        for (k, &p) in members.iter().enumerate() {
            if subset.contains(p) {
                sizes.push(ground_sizes[k]);
            }
        }
        let mut strides = vec![0usize; members.len()];
        let mut stride = 1usize;
        for k in (0..members.len()).rev() {
            if subset.contains(members[k]) {
                strides[k] = stride;
                stride *= ground_sizes[k];
            }
        }
        Projector {
            radix: ground_sizes.to_vec(),
            strides,
            sizes,
            cells: stride,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn project(&self, mut cell: usize) -> usize {
        let mut out = 0;
        for k in (0..self.radix.len()).rev() {
            let digit = cell % self.radix[k];
            cell /= self.radix[k];
            out += digit * self.strides[k];
        }
        out
    }
}

// ───────────────────────────── Operations ─────────────────────────────

/// Joint type of the rows in `subset`, with denominator `n`.
pub fn empirical_type(seqs: &SequenceMatrix, subset: PartySubset) -> Result<JointDistribution> {
    if subset.is_empty() {
        return invalid("empirical type of an empty subset");
    }
    if !subset.is_subset_of(seqs.alphabet().parties()) {
        return invalid(format!("subset {subset} exceeds the {} parties", seqs.m()));
    }
    let sizes: Vec<usize> = subset.iter().map(|i| seqs.alphabet().size(i)).collect();
    let cells: usize = sizes.iter().product();
    let mut counts = vec![0u64; cells];
    for t in 0..seqs.n() {
        counts[seqs.column_index(subset, t)] += 1;
    }
    JointDistribution::from_counts(subset, sizes, counts)
}

/// Exact marginalization of `dist` onto `subset`.
pub fn marginal(dist: &JointDistribution, subset: PartySubset) -> Result<JointDistribution> {
    dist.marginal(subset)
}

/// `C(n + k - 1, k - 1)`, the number of types of denominator `n` on `k` cells.
pub fn type_count(n: u64, cells: u64) -> u128 {
    if cells == 0 {
        return 0;
    }
    binomial(n as u128 + cells as u128 - 1, cells as u128 - 1)
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Every type in `P_n` over the product alphabet `sizes` (parties `0..sizes.len()`).
pub fn enumerate_types(n: u64, sizes: &[usize]) -> Result<TypeIter> {
    enumerate_types_with_budget(n, sizes, TYPE_BUDGET)
}

pub fn enumerate_types_with_budget(n: u64, sizes: &[usize], budget: u128) -> Result<TypeIter> {
    if n == 0 {
        return invalid("block length must be at least 1");
    }
    if sizes.is_empty() || sizes.len() > MAX_PARTIES || sizes.iter().any(|&s| s == 0) {
        return invalid("alphabet sizes must be nonempty and positive");
    }
    let cells: u128 = sizes.iter().map(|&s| s as u128).product();
    check_budget("joint alphabet size", cells, MAX_JOINT_ALPHABET)?;
    check_budget("type enumeration", type_count(n, cells as u64), budget)?;
    let cells = cells as usize;
    let mut counts = vec![0u64; cells];
    counts[cells - 1] = n;
    Ok(TypeIter {
        parties: PartySubset::full(sizes.len()),
        sizes: sizes.to_vec(),
        counts: Some(counts),
    })
}

/// Weak compositions of `n` in reverse-lexicographic order.
pub struct TypeIter {
    parties: PartySubset,
    sizes: Vec<usize>,
    counts: Option<Vec<u64>>,
}

impl Iterator for TypeIter {
    type Item = JointDistribution;

    fn next(&mut self) -> Option<JointDistribution> {
        let current = self.counts.take()?;
        let out = JointDistribution {
            parties: self.parties,
            sizes: self.sizes.clone(),
            mass: Mass::Counts {
                counts: current.clone(),
                n: current.iter().sum(),
            },
        };
        // advance: move one unit from the rightmost nonzero cell left by one,
        // and gather everything to its right into the last cell.
        let mut next = current;
        let k = next.len();
        if k > 1 {
            if let Some(j) = (1..k).rev().find(|&j| next[j] > 0) {
                let tail: u64 = next[j..].iter().sum();
                for c in next[j..].iter_mut() {
                    *c = 0;
                }
                next[j - 1] += 1;
                next[k - 1] = tail - 1;
                self.counts = Some(next);
            }
        }
        Some(out)
    }
}

/// `n` IID columns drawn from `dist`, deterministic given `seed`.
pub fn sample_iid(dist: &JointDistribution, n: usize, seed: u64) -> Result<SequenceMatrix> {
    let alphabet = dist.alphabet()?;
    if n == 0 {
        return invalid("block length must be at least 1");
    }
    let probs = dist.probs();
    let sampler = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidArgument(format!("cannot sample pmf: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![Vec::with_capacity(n); alphabet.m()];
    for _ in 0..n {
        let symbols = dist.decode(sampler.sample(&mut rng));
        for (row, s) in rows.iter_mut().zip(symbols) {
            row.push(s);
        }
    }
    SequenceMatrix::new(alphabet, rows)
}
