//! The discrete protocol: hashing rounds, the type-class decoder, the
//! one-step omniscience loop, and the recursive driver.
//!
//! Rates are kept as integer multiples of `Δ / lcm(1..m)`, so every update
//! `Δ/|σ_i|` is exact. Each part acts as a single decoding agent holding the
//! rows its members have recovered.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gf2::{solve, AffineSpace};
use crate::hash::{pack_row, row_mask, HashFamily, HashFunction};
use crate::measures::{counts_entropy, EntropyProfile};
use crate::partition::sort_parts_by_entropy;
use crate::region::{in_region_with, r_star_profile, rco_lp_profile, Ground, Rate, RateVector, FLOAT_TOL};
use crate::search::{search, Budget, Query, Unknown};
use crate::types::{empirical_type, Alphabet, PartySubset, SequenceMatrix};

/// Default decoder search effort per decoder call.
pub const DEFAULT_SEARCH_BUDGET: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    /// Exhaustive search over hash-consistent sequences.
    Exact,
    /// Region membership on the true joint type.
    Genie,
}

impl std::str::FromStr for DecoderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DecoderMode::Exact),
            "genie" => Ok(DecoderMode::Genie),
            _ => Err(Error::InvalidArgument(format!("unknown decoder mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub delta: f64,
    pub alpha0: u64,
    /// Growth of `α` per recursion step; `None` uses `m² + 4m + 3`.
    pub c_m_prime: Option<u64>,
    pub mode: DecoderMode,
    pub search_budget: u64,
    /// Abort once total bits exceed this.
    pub bit_budget: Option<u64>,
    /// Hard cap on total rounds. Each OMN call is also capped at
    /// `L + α + m` rounds, past which no activation or merge can occur.
    pub max_rounds: Option<usize>,
    pub tolerance: f64,
}

impl ProtocolConfig {
    pub fn new(delta: f64, mode: DecoderMode) -> Self {
        ProtocolConfig {
            delta,
            alpha0: 1,
            c_m_prime: None,
            mode,
            search_budget: DEFAULT_SEARCH_BUDGET,
            bit_budget: None,
            max_rounds: None,
            tolerance: FLOAT_TOL,
        }
    }

    pub fn growth(&self, m: usize) -> u64 {
        self.c_m_prime.unwrap_or((m * m + 4 * m + 3) as u64)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return invalid(format!("Δ must be positive, got {}", self.delta));
        }
        if self.alpha0 == 0 || self.c_m_prime == Some(0) {
            return invalid("α and its growth factor must be at least 1");
        }
        Ok(())
    }
}

/// `⌈log2|X_M| / Δ⌉ + m`.
pub fn max_rounds_bound(delta: f64, alphabet: &Alphabet) -> Result<usize> {
    if !(delta > 0.0) {
        return invalid("Δ must be positive");
    }
    let log = alphabet.log2_size(alphabet.parties());
    Ok((log / delta - 1e-9).ceil().max(0.0) as usize + alphabet.m())
}

/// Hash rows received from one party, stamped with their round.
#[derive(Clone, Debug, Default)]
pub struct PartyArchive {
    pub rows: Vec<Vec<u64>>,
    pub values: Vec<bool>,
    pub round_of: Vec<usize>,
}

impl PartyArchive {
    /// Rows sent in rounds `≤ round`.
    pub fn prefix(&self, round: usize) -> usize {
        self.round_of.partition_point(|&r| r <= round)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Ack { set: PartySubset },
    Nack,
    Err { reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartDecision {
    pub part: PartySubset,
    pub decision: Decision,
    /// Maximal unions in `R^Δ_CO` of the true type; `None` when there is none.
    pub oracle: Option<PartySubset>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub omn_call: usize,
    pub alpha: u64,
    /// Rates after the round's activations.
    pub rates: RateVector,
    pub activated: Vec<PartySubset>,
    pub hash_bits: Vec<usize>,
    pub decisions: Vec<PartDecision>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BracketCheck {
    pub set: PartySubset,
    pub part: PartySubset,
    pub r_star: f64,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmnRecord {
    pub call: usize,
    pub alpha: u64,
    pub sigma: Vec<PartySubset>,
    pub entropies: Vec<f64>,
    pub family: Vec<PartySubset>,
    pub rates_out: RateVector,
    pub brackets: Vec<BracketCheck>,
    /// Failed validity conditions of the input rates.
    pub invalid_in: Vec<String>,
    /// Failed validity conditions of the output for the merged partition and grown `α`.
    pub invalid_out: Vec<String>,
    /// Members of `family` that are not unions of input parts.
    pub non_unions: Vec<PartySubset>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLedger {
    pub hash: u64,
    pub type_broadcast: u64,
    pub ack: u64,
}

impl BitLedger {
    pub fn total(&self) -> u64 {
        self.hash + self.type_broadcast + self.ack
    }

    pub fn overhead(&self) -> u64 {
        self.type_broadcast + self.ack
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Omniscience,
    DeclaredError { reason: String },
    UndetectedError,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Omniscience => "omniscience",
            Outcome::DeclaredError { .. } => "declared_error",
            Outcome::UndetectedError => "undetected_error",
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Omniscience)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MergeEvent {
    pub round: usize,
    pub omn_call: usize,
    pub set: PartySubset,
    pub parts: Vec<PartySubset>,
    pub sum_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub mode: DecoderMode,
    pub outcome: Outcome,
    pub bits: BitLedger,
    pub total_bits: u64,
    pub rounds: usize,
    pub round_bound: usize,
    pub aborted_on_bit_budget: bool,
    pub merges: Vec<MergeEvent>,
    pub omn_calls: Vec<OmnRecord>,
    pub final_rates: RateVector,
    /// `R_CO(M)` of the joint type of the observations.
    pub rco_type: f64,
    /// Whether each party's recovered matrix equals the observations.
    pub recovered_correct: Vec<bool>,
    pub trace: Vec<RoundRecord>,
    #[serde(skip)]
    pub recovered: Vec<Vec<Option<Vec<u16>>>>,
}

impl RunReport {
    pub fn bits_per_symbol(&self) -> f64 {
        self.total_bits as f64 / self.n as f64
    }

    pub fn excess_rate(&self) -> f64 {
        self.bits_per_symbol() - self.rco_type
    }

    /// Every bracket and validity check recorded during the run holds.
    pub fn checks_hold(&self) -> bool {
        self.omn_calls.iter().all(|o| {
            o.brackets.iter().all(|b| b.ok) && o.invalid_out.is_empty() && o.non_unions.is_empty()
        })
    }
}

/// Everything the error monitor needs besides the observations.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    pub archives: Vec<PartyArchive>,
    pub rounds: Vec<RoundRecord>,
}

/// Protocol state entering a round.
#[derive(Clone, Debug)]
pub struct RoundState {
    pub sigma: Vec<PartySubset>,
    pub entropies: Vec<f64>,
    pub alpha: u64,
    /// Rates in units of `Δ / lcm(1..m)`.
    pub units: Vec<Option<i64>>,
    pub round: usize,
}

/// Inputs of one decoder call.
pub struct DecoderInput<'a> {
    pub part: PartySubset,
    pub sigma: &'a [PartySubset],
    pub rates: &'a [Option<f64>],
    pub archives: &'a [PartyArchive],
    /// The agent's rows, indexed by party; members of `part` must be present.
    pub view: &'a [Option<Vec<u16>>],
    pub sizes: &'a [usize],
    pub n: usize,
    pub delta: f64,
    pub budget: u64,
}

/// Decoder result with the recovered rows of the acknowledged set.
#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub decision: Decision,
    pub rows: Vec<(usize, Vec<u16>)>,
}

fn lcm_upto(m: usize) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=m as i64).fold(1, |l, k| l / gcd(l, k) * k)
}

/// Unions of `own` with nonempty collections of the other active parts.
fn candidate_sets(own: PartySubset, sigma: &[PartySubset], rates: &[Option<f64>]) -> Vec<PartySubset> {
    let others: Vec<PartySubset> = sigma
        .iter()
        .copied()
        .filter(|&p| p != own && p.iter().all(|j| rates[j].is_some()))
        .collect();
    let mut out: Vec<PartySubset> = (1u32..(1 << others.len()))
        .map(|c| {
            others
                .iter()
                .enumerate()
                .filter(|(b, _)| c & (1 << b) != 0)
                .fold(own, |a, (_, &p)| a.union(p))
        })
        .collect();
    out.sort_by_key(|a| (std::cmp::Reverse(a.len()), a.bits()));
    out
}

fn maximal(found: &[PartySubset]) -> Vec<PartySubset> {
    found
        .iter()
        .copied()
        .filter(|a| !found.iter().any(|b| b != a && a.is_subset_of(*b)))
        .collect()
}

fn decision_from(found: &[PartySubset]) -> Decision {
    let max = maximal(found);
    match max.len() {
        0 => Decision::Nack,
        1 => Decision::Ack { set: max[0] },
        _ => Decision::Err {
            reason: format!("{} maximal sets", max.len()),
        },
    }
}

/// The type-class decoder: the maximal `A ⊋ part` with a unique completion
/// matching all hashes whose type puts the rates in `R^Δ_CO(A)`.
pub fn dec(input: &DecoderInput) -> Result<DecodeResult> {
    let rates_bits: Vec<f64> = input.rates.iter().map(|r| r.unwrap_or(-1.0)).collect();
    let known: Vec<(usize, &[u16])> = input
        .part
        .iter()
        .map(|j| {
            input.view[j]
                .as_deref()
                .map(|r| (j, r))
                .ok_or_else(|| Error::InvalidArgument(format!("agent lacks row {}", j + 1)))
        })
        .collect::<Result<_>>()?;
    if input.part.iter().any(|j| input.rates[j].is_none()) {
        return invalid(format!("part {} is inactive", input.part));
    }
    let cosets: Vec<Option<AffineSpace>> = (0..input.sizes.len())
        .map(|i| {
            if input.part.contains(i) || input.rates[i].is_none() {
                return Ok(None);
            }
            let arc = &input.archives[i];
            solve(&arc.rows, &arc.values, &row_mask(input.n, input.sizes[i]))
                .map(Some)
                .ok_or_else(|| Error::Internal(format!("hashes of party {} are inconsistent", i + 1)))
        })
        .collect::<Result<_>>()?;
    let mut budget = Budget::new(input.budget);
    let mut found: Vec<PartySubset> = Vec::new();
    let mut solutions: Vec<(PartySubset, Vec<(usize, Vec<u16>)>)> = Vec::new();
    let mut multiple: Option<PartySubset> = None;
    for a in candidate_sets(input.part, input.sigma, input.rates) {
        let unknown: Vec<Unknown> = a
            .minus(input.part)
            .iter()
            .map(|i| Unknown {
                party: i,
                coset: cosets[i].as_ref().unwrap(),
                hash_rows: &input.archives[i].rows,
                hash_values: &input.archives[i].values,
                exclude: None,
            })
            .collect();
        let query = Query {
            n: input.n,
            a,
            sizes: input.sizes,
            rates: &rates_bits,
            delta: input.delta,
            known: known.clone(),
            unknown,
            max_solutions: 2,
        };
        let sols = search(&query, &mut budget)?;
        match sols.len() {
            0 => {}
            1 => {
                found.push(a);
                solutions.push((a, sols.into_iter().next().unwrap()));
            }
            _ => {
                found.push(a);
                multiple.get_or_insert(a);
            }
        }
    }
    if let Some(a) = multiple {
        return Ok(DecodeResult {
            decision: Decision::Err {
                reason: format!("multiple sequences for {a}"),
            },
            rows: Vec::new(),
        });
    }
    let decision = decision_from(&found);
    let rows = match &decision {
        Decision::Ack { set } => solutions
            .into_iter()
            .find(|(a, _)| a == set)
            .map(|(_, r)| r)
            .unwrap_or_default(),
        _ => Vec::new(),
    };
    Ok(DecodeResult { decision, rows })
}

/// Region-membership decoder on the true type.
fn oracle_sets(
    part: PartySubset,
    sigma: &[PartySubset],
    rates: &[Option<f64>],
    delta: f64,
    profile: &EntropyProfile,
    tol: f64,
) -> Vec<PartySubset> {
    candidate_sets(part, sigma, rates)
        .into_iter()
        .filter(|&a| {
            let vals: Vec<f64> = a.iter().map(|j| rates[j].unwrap()).collect();
            in_region_with(&Ground::parties(a), &vals, delta, profile, tol)
        })
        .collect()
}

struct Run<'a> {
    seqs: &'a SequenceMatrix,
    cfg: &'a ProtocolConfig,
    family: HashFamily,
    n: usize,
    m: usize,
    sizes: Vec<usize>,
    lcm: i64,
    unit: f64,
    profile: EntropyProfile,
    packed: Vec<Vec<u64>>,
    masks: Vec<Vec<u64>>,
    archives: Vec<PartyArchive>,
    /// `views[j][i]`: party `j`'s copy of row `i`.
    views: Vec<Vec<Option<Vec<u16>>>>,
    ledger: BitLedger,
    trace: Vec<RoundRecord>,
    omn_calls: Vec<OmnRecord>,
    merges: Vec<MergeEvent>,
    max_rounds: usize,
    round_bound: usize,
    aborted: bool,
}

enum OmnExit {
    Family(Vec<PartySubset>),
    Declared(String),
}

impl<'a> Run<'a> {
    fn rate(&self, units: Option<i64>) -> Option<f64> {
        units.map(|u| u as f64 * self.unit)
    }

    fn rates(&self, st: &RoundState) -> Vec<Option<f64>> {
        st.units.iter().map(|&u| self.rate(u)).collect()
    }

    fn part_rate(&self, st: &RoundState, p: PartySubset) -> Option<f64> {
        let mut s = 0i64;
        for j in p.iter() {
            s += st.units[j]?;
        }
        Some(s as f64 * self.unit)
    }

    fn rate_vector(&self, st: &RoundState) -> RateVector {
        RateVector {
            rates: self
                .rates(st)
                .into_iter()
                .map(|r| r.map_or(Rate::Inactive, Rate::Active))
                .collect(),
        }
    }

    /// Entropy of part `p`'s type computed from its agent's view.
    fn view_entropy(&self, p: PartySubset) -> f64 {
        let agent = p.first().unwrap();
        let view = &self.views[agent];
        let mut counts: std::collections::HashMap<Vec<u16>, u64> = std::collections::HashMap::new();
        for t in 0..self.n {
            let key: Vec<u16> = p.iter().map(|i| view[i].as_ref().unwrap()[t]).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        let c: Vec<u64> = counts.into_values().collect();
        counts_entropy(&c, self.n as u64)
    }

    fn type_bits(&self, p: PartySubset) -> u64 {
        // ⌈log2 C(n + c − 1, c − 1)⌉ with c = |X_p|
        let c: f64 = p.iter().map(|i| self.sizes[i] as f64).product();
        let n = self.n as f64;
        let ln = ln_binomial(n + c - 1.0, c - 1.0);
        (ln / std::f64::consts::LN_2 - 1e-9).ceil().max(0.0) as u64
    }

    fn active_parts(&self, st: &RoundState) -> usize {
        st.sigma
            .iter()
            .take_while(|p| p.iter().all(|j| st.units[j].is_some()))
            .count()
    }

    fn omn(&mut self, st: &mut RoundState, call: usize) -> Result<OmnExit> {
        let delta = self.cfg.delta;
        let tol = self.cfg.tolerance;
        let call_limit = st
            .round
            .saturating_add(self.round_bound)
            .saturating_add(st.alpha.min(usize::MAX as u64) as usize)
            .saturating_add(self.m);
        let limit = call_limit.min(self.max_rounds);
        loop {
            if st.round >= limit {
                return Ok(OmnExit::Declared(format!("round limit {limit} reached")));
            }
            st.round += 1;
            let l = st.round;
            let s = self.active_parts(st);
            let mut hash_bits = vec![0usize; self.m];
            for p in st.sigma[..s].to_vec() {
                let size = p.len();
                let nbits = (self.n as f64 * delta / size as f64 - 1e-9).ceil().max(0.0) as usize;
                for j in p.iter() {
                    let h = HashFunction::new(self.family.round_seed(l, j), nbits, &self.masks[j]);
                    let vals = h.apply(&self.packed[j]);
                    let arc = &mut self.archives[j];
                    arc.rows.extend(h.rows);
                    arc.values.extend(vals);
                    arc.round_of.extend(std::iter::repeat(l).take(nbits));
                    hash_bits[j] = nbits;
                    self.ledger.hash += nbits as u64;
                    *st.units[j].as_mut().unwrap() += self.lcm / size as i64;
                }
            }
            // activation, in sorted order
            let mut activated = Vec::new();
            let mut s = self.active_parts(st);
            while s < st.sigma.len() {
                let r1 = self.part_rate(st, st.sigma[0]).unwrap();
                let need = st.entropies[0] - st.entropies[s] + st.alpha as f64 * delta;
                if r1 + tol < need {
                    break;
                }
                for j in st.sigma[s].iter() {
                    st.units[j] = Some(0);
                }
                activated.push(st.sigma[s]);
                s += 1;
            }
            let rates = self.rates(st);
            let mut decisions = Vec::with_capacity(s);
            let mut decoded: Vec<Vec<(usize, Vec<u16>)>> = Vec::with_capacity(s);
            for &p in &st.sigma[..s] {
                let oracle_found = oracle_sets(p, &st.sigma, &rates, delta, &self.profile, tol);
                let oracle = match decision_from(&oracle_found) {
                    Decision::Ack { set } => Some(set),
                    _ => None,
                };
                let (decision, rows) = match self.cfg.mode {
                    DecoderMode::Genie => {
                        let d = decision_from(&oracle_found);
                        let rows = match &d {
                            Decision::Ack { set } => set
                                .minus(p)
                                .iter()
                                .map(|i| (i, self.seqs.row(i).to_vec()))
                                .collect(),
                            _ => Vec::new(),
                        };
                        (d, rows)
                    }
                    DecoderMode::Exact => {
                        let agent = p.first().unwrap();
                        let r = dec(&DecoderInput {
                            part: p,
                            sigma: &st.sigma,
                            rates: &rates,
                            archives: &self.archives,
                            view: &self.views[agent],
                            sizes: &self.sizes,
                            n: self.n,
                            delta,
                            budget: self.cfg.search_budget,
                        })?;
                        (r.decision, r.rows)
                    }
                };
                decisions.push(PartDecision {
                    part: p,
                    decision,
                    oracle,
                });
                decoded.push(rows);
            }
            self.ledger.ack += s as u64;
            self.trace.push(RoundRecord {
                round: l,
                omn_call: call,
                alpha: st.alpha,
                rates: self.rate_vector(st),
                activated,
                hash_bits,
                decisions: decisions.clone(),
            });
            if let Some(budget) = self.cfg.bit_budget {
                if self.ledger.total() > budget {
                    self.aborted = true;
                    return Ok(OmnExit::Declared(format!("bit budget {budget} exceeded")));
                }
            }
            if decisions.iter().all(|d| d.decision == Decision::Nack) {
                continue;
            }
            if let Some(d) = decisions
                .iter()
                .find(|d| matches!(d.decision, Decision::Err { .. }))
            {
                return Ok(OmnExit::Declared(format!("decoder error at part {}", d.part)));
            }
            let mut family: Vec<PartySubset> = Vec::new();
            for d in &decisions {
                if let Decision::Ack { set } = d.decision {
                    let agree = decisions
                        .iter()
                        .filter(|e| e.part.is_subset_of(set))
                        .all(|e| e.decision == Decision::Ack { set })
                        && st.sigma.iter().filter(|p| p.is_subset_of(set)).count()
                            == decisions.iter().filter(|e| e.part.is_subset_of(set)).count();
                    if agree && !family.contains(&set) {
                        family.push(set);
                    }
                }
            }
            if family.is_empty() {
                return Ok(OmnExit::Declared("acknowledgements without an omniscience family".into()));
            }
            // each part adopts the rows it decoded
            for (k, &p) in st.sigma[..s].iter().enumerate() {
                if let Decision::Ack { set } = decisions[k].decision {
                    if family.contains(&set) {
                        for j in p.iter() {
                            for (i, row) in &decoded[k] {
                                self.views[j][*i] = Some(row.clone());
                            }
                        }
                    }
                }
            }
            return Ok(OmnExit::Family(family));
        }
    }

    /// Failed validity conditions, evaluated on true types.
    fn validity(&self, sigma: &[PartySubset], units: &[Option<i64>], alpha: u64) -> Vec<String> {
        let delta = self.cfg.delta;
        let tol = self.cfg.tolerance;
        let h: Vec<f64> = sigma.iter().map(|&p| self.profile.h(p)).collect();
        let rates: Vec<Option<f64>> = units.iter().map(|&u| self.rate(u)).collect();
        let part_rate = |p: PartySubset| -> Option<f64> {
            let mut s = 0.0;
            for j in p.iter() {
                s += rates[j]?;
            }
            Some(s)
        };
        let mut out = Vec::new();
        let s = sigma.iter().take_while(|p| part_rate(**p).is_some()).count();
        let ad = alpha as f64 * delta;
        for i in 0..s {
            for j in 0..s {
                let lhs = part_rate(sigma[i]).unwrap() - part_rate(sigma[j]).unwrap();
                if lhs > h[i] - h[j] + ad + tol {
                    out.push(format!("(i) {} vs {}", sigma[i], sigma[j]));
                }
            }
        }
        if s < sigma.len() && s > 0 {
            let r1 = part_rate(sigma[0]).unwrap();
            if r1 >= h[0] - h[s] + ad + tol {
                out.push(format!("(ii) {} should be communicating", sigma[s]));
            }
        }
        for &p in sigma {
            if p.len() >= 2 {
                let vals: Option<Vec<f64>> = p.iter().map(|j| rates[j]).collect();
                let ok = vals.is_some_and(|v| in_region_with(&Ground::parties(p), &v, delta, &self.profile, tol));
                if !ok {
                    out.push(format!("(iii) part {p}"));
                }
            }
        }
        let k = sigma.len();
        for mask in 1u32..(1 << k) {
            if mask.count_ones() < 2 {
                continue;
            }
            let a = (0..k)
                .filter(|b| mask & (1 << b) != 0)
                .fold(PartySubset::empty(), |acc, b| acc.union(sigma[b]));
            let vals: Option<Vec<f64>> = a.iter().map(|j| rates[j]).collect();
            if let Some(v) = vals {
                if in_region_with(&Ground::parties(a), &v, delta, &self.profile, -tol) {
                    out.push(format!("(iv) union {a} already in the region"));
                }
            }
        }
        out
    }
}

fn ln_binomial(n: f64, k: f64) -> f64 {
    fn ln_gamma_int(x: f64) -> f64 {
        // ln((x−1)!) for integral x ≥ 1
        let mut s = 0.0;
        let mut k = 2.0;
        while k < x {
            s += f64::ln(k);
            k += 1.0;
        }
        s
    }
    if k <= 0.0 || k >= n {
        return 0.0;
    }
    if n < 1e6 {
        ln_gamma_int(n + 1.0) - ln_gamma_int(k + 1.0) - ln_gamma_int(n - k + 1.0)
    } else {
        // Stirling for very large alphabets
        let f = |x: f64| x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln();
        f(n) - f(k) - f(n - k)
    }
}

/// Runs the protocol and returns the report.
pub fn rde(seqs: &SequenceMatrix, config: &ProtocolConfig, seed: u64) -> Result<RunReport> {
    rde_with_transcript(seqs, config, seed).map(|(r, _)| r)
}

/// Runs the protocol and also returns the hash archive for the error monitor.
pub fn rde_with_transcript(
    seqs: &SequenceMatrix,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<(RunReport, Transcript)> {
    config.validate()?;
    let m = seqs.m();
    let n = seqs.n();
    let alphabet = seqs.alphabet().clone();
    let sizes = alphabet.sizes().to_vec();
    let full = PartySubset::full(m);
    let joint = empirical_type(seqs, full)?;
    let profile = EntropyProfile::new(&joint, full)?;
    let rco_type = if m <= crate::region::LP_BUDGET {
        rco_lp_profile(&profile, &Ground::parties(full))?.0
    } else {
        f64::NAN
    };
    let round_bound = max_rounds_bound(config.delta, &alphabet)?;
    let lcm = lcm_upto(m);
    let mut run = Run {
        seqs,
        cfg: config,
        family: HashFamily::new(seed),
        n,
        m,
        sizes: sizes.clone(),
        lcm,
        unit: config.delta / lcm as f64,
        profile,
        packed: (0..m).map(|i| pack_row(seqs.row(i), sizes[i])).collect(),
        masks: (0..m).map(|i| row_mask(n, sizes[i])).collect(),
        archives: vec![PartyArchive::default(); m],
        views: (0..m)
            .map(|j| (0..m).map(|i| (i == j).then(|| seqs.row(i).to_vec())).collect())
            .collect(),
        ledger: BitLedger::default(),
        trace: Vec::new(),
        omn_calls: Vec::new(),
        merges: Vec::new(),
        max_rounds: config.max_rounds.unwrap_or(usize::MAX),
        round_bound,
        aborted: false,
    };
    let mut st = RoundState {
        sigma: (0..m).map(PartySubset::singleton).collect(),
        entropies: Vec::new(),
        alpha: config.alpha0,
        units: vec![None; m],
        round: 0,
    };
    let growth = config.growth(m);
    let mut outcome = None;
    let mut call = 0usize;
    while st.sigma.len() > 1 {
        for &p in &st.sigma {
            run.ledger.type_broadcast += run.type_bits(p);
        }
        let sorted = sort_parts_by_entropy(&st.sigma, |p| run.view_entropy(p));
        st.entropies = sorted.iter().map(|&p| run.view_entropy(p)).collect();
        st.sigma = sorted;
        if call == 0 {
            for j in st.sigma[0].iter() {
                st.units[j] = Some(0);
            }
        }
        let invalid_in = run.validity(&st.sigma, &st.units, st.alpha);
        let sigma_in = st.sigma.clone();
        let ent_in = st.entropies.clone();
        let alpha_in = st.alpha;
        let exit = run.omn(&mut st, call)?;
        let family = match exit {
            OmnExit::Family(f) => f,
            OmnExit::Declared(reason) => {
                outcome = Some(Outcome::DeclaredError { reason });
                break;
            }
        };
        // bracket and decomposition checks against the true type
        let mut brackets = Vec::new();
        let mut non_unions = Vec::new();
        let delta = config.delta;
        for &a in &family {
            let parts: Vec<PartySubset> = sigma_in.iter().copied().filter(|p| p.is_subset_of(a)).collect();
            let cover = parts.iter().fold(PartySubset::empty(), |x, p| x.union(*p));
            if cover != a {
                non_unions.push(a);
                continue;
            }
            let rstar = r_star_profile(&run.profile, &Ground::parts(&parts)?)?;
            for (k, &p) in parts.iter().enumerate() {
                let rate = run.part_rate(&st, p).unwrap();
                let lower = rstar[k] - 2.0 * alpha_in as f64 * delta;
                let upper = rstar[k] + (m as f64 + 2.0 * alpha_in as f64) * delta;
                brackets.push(BracketCheck {
                    set: a,
                    part: p,
                    r_star: rstar[k],
                    rate,
                    lower,
                    upper,
                    ok: rate >= lower - config.tolerance && rate <= upper + config.tolerance,
                });
            }
            run.merges.push(MergeEvent {
                round: st.round,
                omn_call: call,
                set: a,
                parts,
                sum_rate: run.part_rate(&st, a).unwrap(),
            });
        }
        let mut next: Vec<PartySubset> = st
            .sigma
            .iter()
            .copied()
            .filter(|p| !family.iter().any(|a| p.is_subset_of(*a)))
            .collect();
        next.extend(family.iter().copied());
        let next_sorted = sort_parts_by_entropy(&next, |p| run.profile.h(p));
        st.alpha = st.alpha.saturating_mul(growth);
        let invalid_out = if next_sorted.len() > 1 {
            run.validity(&next_sorted, &st.units, st.alpha)
        } else {
            Vec::new()
        };
        run.omn_calls.push(OmnRecord {
            call,
            alpha: alpha_in,
            sigma: sigma_in,
            entropies: ent_in,
            family: family.clone(),
            rates_out: run.rate_vector(&st),
            brackets,
            invalid_in,
            invalid_out,
            non_unions,
        });
        st.sigma = next;
        call += 1;
    }
    let recovered_correct: Vec<bool> = (0..m)
        .map(|j| (0..m).all(|i| run.views[j][i].as_deref() == Some(seqs.row(i))))
        .collect();
    let outcome = outcome.unwrap_or(if recovered_correct.iter().all(|&c| c) {
        Outcome::Omniscience
    } else {
        Outcome::UndetectedError
    });
    let final_rates = run.rate_vector(&st);
    let report = RunReport {
        seed,
        n,
        m,
        delta: config.delta,
        mode: config.mode,
        outcome,
        bits: run.ledger,
        total_bits: run.ledger.total(),
        rounds: st.round,
        round_bound,
        aborted_on_bit_budget: run.aborted,
        merges: run.merges,
        omn_calls: run.omn_calls,
        final_rates,
        rco_type,
        recovered_correct,
        trace: run.trace.clone(),
        recovered: run.views,
    };
    Ok((
        report,
        Transcript {
            archives: run.archives,
            rounds: run.trace,
        },
    ))
}
