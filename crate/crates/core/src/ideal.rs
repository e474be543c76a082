//! Event-driven fluid simulation of recursive data exchange with an ideal
//! decoder and continuous rates.
//!
//! Every active part raises its sum-rate at slope 1, split evenly over its
//! members, so the clock is the elapsed sum-rate of any active part. It
//! coincides with the top party's rate until the first merge.

use serde::{Deserialize, Serialize};

use crate::error::{check_budget, invalid, Error, Result};
use crate::measures::EntropyProfile;
use crate::partition::{sort_parts_by_entropy, ENTROPY_TIE_TOL};
use crate::region::{in_region_with, Ground, Rate, RateVector, FLOAT_TOL};
use crate::types::{empirical_type, JointDistribution, PartySubset, SequenceMatrix};

/// Largest number of parties simulated.
pub const IDEAL_BUDGET: usize = 12;

/// Events closer than this in time are simultaneous.
pub const EVENT_TOL: f64 = 1e-12;

/// Decoder outcome of the ideal decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdealDecision {
    Ack(PartySubset),
    Nack,
}

/// The state between two successive events.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluidState {
    /// Parts in descending entropy order.
    pub sigma: Vec<PartySubset>,
    /// `H` of each part's joint type, aligned with `sigma`.
    pub entropies: Vec<f64>,
    /// Per-party rates.
    pub rates: RateVector,
    /// Per-party slope `dR_j/dt`.
    pub slopes: Vec<f64>,
    pub clock: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Activate {
        part: PartySubset,
    },
    Merge {
        set: PartySubset,
        parts: Vec<PartySubset>,
        sum_rate: f64,
    },
    Terminate {
        sum_rate: f64,
    },
}

impl Event {
    pub fn label(&self) -> String {
        match self {
            Event::Activate { part } => format!("activate {part}"),
            Event::Merge { set, .. } => format!("merge {set}"),
            Event::Terminate { .. } => "terminate".to_string(),
        }
    }
}

/// What `next_event` predicts.
#[derive(Clone, Debug, PartialEq)]
pub enum NextEvent {
    /// The first inactive part crosses its activation threshold.
    Activation(usize),
    /// Some union of active parts enters its CO region.
    Merge(PartySubset),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Breakpoint {
    pub time: f64,
    pub rates: RateVector,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MergeRecord {
    pub time: f64,
    pub set: PartySubset,
    /// Parts of the previous partition that combined into `set`.
    pub parts: Vec<PartySubset>,
    /// Per-party rates at the merge.
    pub rates: RateVector,
    pub sum_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub m: usize,
    pub breakpoints: Vec<Breakpoint>,
    pub merges: Vec<MergeRecord>,
    /// Validity checks that failed at event boundaries.
    pub violations: Vec<String>,
}

impl Trajectory {
    pub fn terminal_rates(&self) -> &RateVector {
        &self.breakpoints.last().expect("nonempty trajectory").rates
    }

    pub fn terminal_sum(&self) -> f64 {
        self.terminal_rates().sum()
    }

    /// Time of the first event matching `pred`.
    pub fn event_time(&self, pred: impl Fn(&Event) -> bool) -> Option<f64> {
        self.breakpoints
            .iter()
            .find(|b| b.events.iter().any(&pred))
            .map(|b| b.time)
    }

    /// CSV with columns `time, R_1..R_m, event`; inactive rates are blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for i in 1..=self.m {
            out.push_str(&format!(",R_{i}"));
        }
        out.push_str(",event\n");
        for b in &self.breakpoints {
            out.push_str(&format!("{:.12}", b.time));
            for r in &b.rates.rates {
                match r {
                    Rate::Active(v) => out.push_str(&format!(",{v:.12}")),
                    Rate::Inactive => out.push(','),
                }
            }
            let tags: Vec<String> = b.events.iter().map(Event::label).collect();
            out.push_str(&format!(",{}\n", tags.join("; ")));
        }
        out
    }
}

impl FluidState {
    fn part_rate(&self, p: PartySubset) -> Option<f64> {
        let mut s = 0.0;
        for j in p.iter() {
            s += self.rates.get(j).value()?;
        }
        Some(s)
    }

    /// Number of active parts; active parts form a prefix of `sigma`.
    pub fn active_parts(&self) -> usize {
        self.sigma
            .iter()
            .take_while(|p| self.part_rate(**p).is_some())
            .count()
    }

    fn active_set(&self) -> PartySubset {
        self.sigma[..self.active_parts()]
            .iter()
            .fold(PartySubset::empty(), |a, p| a.union(*p))
    }

    fn rate_values(&self, set: PartySubset) -> Vec<f64> {
        set.iter()
            .map(|j| self.rates.get(j).value().unwrap_or(-1.0))
            .collect()
    }
}

/// Ideal decoder at party `j`: the maximal union `A ⊋ σ(j)` of active parts
/// whose rates lie in `R_CO(A)` for the true distribution.
pub fn dec_ideal(
    j: usize,
    sigma: &[PartySubset],
    rates: &RateVector,
    true_types: &JointDistribution,
) -> Result<IdealDecision> {
    let m = rates.len();
    let profile = EntropyProfile::new(true_types, PartySubset::full(m))?;
    dec_ideal_profile(j, sigma, rates, &profile)
}

fn dec_ideal_profile(
    j: usize,
    sigma: &[PartySubset],
    rates: &RateVector,
    profile: &EntropyProfile,
) -> Result<IdealDecision> {
    let Some(own) = sigma.iter().position(|p| p.contains(j)) else {
        return invalid(format!("party {} is not in the partition", j + 1));
    };
    if !rates.get(j).is_active() {
        return invalid(format!("party {} is inactive", j + 1));
    }
    let active: Vec<usize> = (0..sigma.len())
        .filter(|&k| sigma[k].iter().all(|i| rates.get(i).is_active()))
        .collect();
    let others: Vec<usize> = active.iter().copied().filter(|&k| k != own).collect();
    let mut best: Option<PartySubset> = None;
    // unions containing `own`, largest first
    let mut combos: Vec<u32> = (1..(1u32 << others.len())).collect();
    combos.sort_by_key(|c| std::cmp::Reverse(c.count_ones()));
    for c in combos {
        let a = others
            .iter()
            .enumerate()
            .filter(|(b, _)| c & (1 << b) != 0)
            .fold(sigma[own], |acc, (_, &k)| acc.union(sigma[k]));
        if let Some(b) = best {
            if a.len() < b.len() {
                break;
            }
        }
        let g = Ground::parties(a);
        let vals: Vec<f64> = a.iter().map(|i| rates.get(i).value().unwrap()).collect();
        if in_region_with(&g, &vals, 0.0, profile, FLOAT_TOL) {
            match best {
                None => best = Some(a),
                Some(b) if b.len() == a.len() && a.bits() < b.bits() => best = Some(a),
                _ => {}
            }
        }
    }
    Ok(best.map_or(IdealDecision::Nack, IdealDecision::Ack))
}

/// Earliest activation or local-omniscience time after `state.clock`.
pub fn next_event(state: &FluidState, true_types: &JointDistribution) -> Result<(f64, NextEvent)> {
    let m = state.rates.len();
    let profile = EntropyProfile::new(true_types, PartySubset::full(m))?;
    next_event_profile(state, &profile)
}

fn next_event_profile(state: &FluidState, profile: &EntropyProfile) -> Result<(f64, NextEvent)> {
    let s = state.active_parts();
    let mut best: Option<(f64, NextEvent)> = None;

    // merges: every union of at least two active parts
    let k = s;
    for mask in 1u32..(1 << k) {
        if mask.count_ones() < 2 {
            continue;
        }
        let a = (0..k)
            .filter(|b| mask & (1 << b) != 0)
            .fold(PartySubset::empty(), |acc, b| acc.union(state.sigma[b]));
        let t = region_entry_time(state, profile, a);
        if t.is_finite() {
            let better = match &best {
                None => true,
                Some((bt, NextEvent::Merge(b))) => {
                    t < bt - EVENT_TOL || (t <= bt + EVENT_TOL && a.len() > b.len())
                }
                Some((bt, _)) => t <= bt + EVENT_TOL,
            };
            if better {
                best = Some((t, NextEvent::Merge(a)));
            }
        }
    }

    // the next activation; merges win ties
    if s < state.sigma.len() {
        let r1 = state.part_rate(state.sigma[0]).unwrap_or(0.0);
        let need = state.entropies[0] - state.entropies[s];
        let t = state.clock + (need - r1).max(0.0);
        let better = match &best {
            None => true,
            Some((bt, _)) => t < bt - EVENT_TOL,
        };
        if better {
            best = Some((t, NextEvent::Activation(s)));
        }
    }

    best.ok_or_else(|| {
        Error::Internal(format!(
            "no finite event from clock {} with {} parts",
            state.clock,
            state.sigma.len()
        ))
    })
}

/// First time at which every constraint of `R_CO(a)` holds under the current slopes.
fn region_entry_time(state: &FluidState, profile: &EntropyProfile, a: PartySubset) -> f64 {
    let total = profile.h(a);
    let mut t = state.clock;
    for b in a.proper_subsets() {
        let need = total - profile.h(a.minus(b));
        let mut r = 0.0;
        let mut slope = 0.0;
        for j in b.iter() {
            r += state.rates.get(j).value().unwrap_or(0.0);
            slope += state.slopes[j];
        }
        let deficit = need - r;
        if deficit > FLOAT_TOL {
            if slope <= 0.0 {
                return f64::INFINITY;
            }
            t = t.max(state.clock + deficit / slope);
        }
    }
    t
}

/// Runs the fluid protocol on an exact distribution, used as the joint type.
pub fn run_ideal(dist: &JointDistribution) -> Result<Trajectory> {
    let m = dist.parties().len();
    if dist.parties() != PartySubset::full(m) {
        return invalid("distribution must be over parties 0..m");
    }
    if m < 2 {
        return invalid("at least two parties are required");
    }
    check_budget("ideal simulation parties", m as u128, IDEAL_BUDGET as u128)?;
    let profile = EntropyProfile::new(dist, PartySubset::full(m))?;
    run_ideal_profile(m, &profile)
}

/// Runs the fluid protocol with the joint type of `seqs`.
pub fn run_ideal_seqs(seqs: &SequenceMatrix) -> Result<Trajectory> {
    let t = empirical_type(seqs, seqs.alphabet().parties())?;
    run_ideal(&t)
}

fn run_ideal_profile(m: usize, profile: &EntropyProfile) -> Result<Trajectory> {
    let singles: Vec<PartySubset> = (0..m).map(PartySubset::singleton).collect();
    let sigma = sort_parts_by_entropy(&singles, |p| profile.h(p));
    let mut rates = RateVector {
        rates: vec![Rate::Inactive; m],
    };
    rates.rates[sigma[0].first().unwrap()] = Rate::Active(0.0);
    let mut state = FluidState {
        entropies: sigma.iter().map(|&p| profile.h(p)).collect(),
        sigma,
        rates,
        slopes: vec![0.0; m],
        clock: 0.0,
    };
    let mut traj = Trajectory {
        m,
        breakpoints: Vec::new(),
        merges: Vec::new(),
        violations: Vec::new(),
    };
    let mut events = activate_due(&mut state);
    set_slopes(&mut state);
    traj.breakpoints.push(Breakpoint {
        time: 0.0,
        rates: state.rates.clone(),
        events,
    });
    check_validity(&state, profile, &mut traj.violations);

    let max_events = 4 * m + 4;
    for _ in 0..max_events {
        if state.sigma.len() == 1 {
            return Ok(traj);
        }
        let (t, _) = next_event_profile(&state, profile)?;
        advance(&mut state, t);
        events = Vec::new();

        // merges first, then activations at the same instant
        let family = omniscience_family(&state, profile)?;
        if !family.is_empty() {
            for a in &family {
                let parts: Vec<PartySubset> = state
                    .sigma
                    .iter()
                    .copied()
                    .filter(|p| p.is_subset_of(*a))
                    .collect();
                let sum_rate: f64 = a.iter().map(|j| state.rates.get(j).value().unwrap()).sum();
                traj.merges.push(MergeRecord {
                    time: state.clock,
                    set: *a,
                    parts: parts.clone(),
                    rates: state.rates.clone(),
                    sum_rate,
                });
                events.push(Event::Merge {
                    set: *a,
                    parts,
                    sum_rate,
                });
            }
            merge_parts(&mut state, &family, profile);
        }
        events.extend(activate_due(&mut state));
        set_slopes(&mut state);
        if state.sigma.len() == 1 {
            events.push(Event::Terminate {
                sum_rate: state.rates.sum(),
            });
        }
        if events.is_empty() {
            return Err(Error::Internal(format!(
                "predicted event at {t} did not fire"
            )));
        }
        traj.breakpoints.push(Breakpoint {
            time: state.clock,
            rates: state.rates.clone(),
            events,
        });
        check_validity(&state, profile, &mut traj.violations);
    }
    if state.sigma.len() == 1 {
        Ok(traj)
    } else {
        Err(Error::Internal("event limit reached before omniscience".into()))
    }
}

fn advance(state: &mut FluidState, t: f64) {
    let dt = (t - state.clock).max(0.0);
    for (j, r) in state.rates.rates.iter_mut().enumerate() {
        if let Rate::Active(v) = r {
            *v += state.slopes[j] * dt;
        }
    }
    state.clock = t.max(state.clock);
}

fn set_slopes(state: &mut FluidState) {
    let s = state.active_parts();
    state.slopes.iter_mut().for_each(|v| *v = 0.0);
    for p in &state.sigma[..s] {
        let w = 1.0 / p.len() as f64;
        for j in p.iter() {
            state.slopes[j] = w;
        }
    }
}

/// Activates every inactive part whose threshold has been reached.
fn activate_due(state: &mut FluidState) -> Vec<Event> {
    let mut out = Vec::new();
    loop {
        let s = state.active_parts();
        if s == state.sigma.len() {
            return out;
        }
        let r1 = state.part_rate(state.sigma[0]).unwrap_or(0.0);
        if r1 + EVENT_TOL + ENTROPY_TIE_TOL < state.entropies[0] - state.entropies[s] {
            return out;
        }
        let part = state.sigma[s];
        for j in part.iter() {
            state.rates.rates[j] = Rate::Active(0.0);
        }
        out.push(Event::Activate { part });
    }
}

/// Sets `B` for which every active part inside `B` decodes `(ACK, B)`.
fn omniscience_family(state: &FluidState, profile: &EntropyProfile) -> Result<Vec<PartySubset>> {
    let s = state.active_parts();
    let mut acks: Vec<(PartySubset, PartySubset)> = Vec::new();
    for &p in &state.sigma[..s] {
        let j = p.first().unwrap();
        if let IdealDecision::Ack(a) = dec_ideal_profile(j, &state.sigma, &state.rates, profile)? {
            acks.push((p, a));
        }
    }
    let mut family: Vec<PartySubset> = Vec::new();
    for &(_, a) in &acks {
        if family.contains(&a) {
            continue;
        }
        let all_agree = state.sigma[..s]
            .iter()
            .filter(|p| p.is_subset_of(a))
            .all(|p| acks.iter().any(|(q, b)| q == p && *b == a));
        if all_agree {
            family.push(a);
        }
    }
    if family.is_empty() && !acks.is_empty() {
        return Err(Error::Internal(format!(
            "acknowledgements without a consistent omniscience set at clock {}",
            state.clock
        )));
    }
    Ok(family)
}

fn merge_parts(state: &mut FluidState, family: &[PartySubset], profile: &EntropyProfile) {
    let mut parts: Vec<PartySubset> = state
        .sigma
        .iter()
        .copied()
        .filter(|p| !family.iter().any(|a| p.is_subset_of(*a)))
        .collect();
    parts.extend_from_slice(family);
    state.sigma = sort_parts_by_entropy(&parts, |p| profile.h(p));
    state.entropies = state.sigma.iter().map(|&p| profile.h(p)).collect();
}

/// Records failures of the fluid validity conditions at a boundary.
fn check_validity(state: &FluidState, profile: &EntropyProfile, out: &mut Vec<String>) {
    let s = state.active_parts();
    let t = state.clock;
    for (i, &p) in state.sigma.iter().enumerate() {
        let active: Vec<bool> = p.iter().map(|j| state.rates.get(j).is_active()).collect();
        if active.iter().any(|&a| a) && !active.iter().all(|&a| a) {
            out.push(format!("t={t:.9}: part {p} is partly active"));
        }
        if p.len() >= 2 && i < s {
            let vals = state.rate_values(p);
            if !in_region_with(&Ground::parties(p), &vals, 0.0, profile, FLOAT_TOL) {
                out.push(format!("t={t:.9}: part {p} outside its CO region"));
            }
        }
    }
    let r: Vec<f64> = state.sigma[..s]
        .iter()
        .map(|&p| state.part_rate(p).unwrap())
        .collect();
    for i in 0..s {
        for j in 0..s {
            let lhs = r[i] - r[j];
            let rhs = state.entropies[i] - state.entropies[j];
            if (lhs - rhs).abs() > FLOAT_TOL {
                out.push(format!(
                    "t={t:.9}: rate difference {} vs {} is {lhs:.9}, entropy difference {rhs:.9}",
                    state.sigma[i], state.sigma[j]
                ));
            }
        }
    }
    for k in s..state.sigma.len() {
        if r[0] >= state.entropies[0] - state.entropies[k] + EVENT_TOL + ENTROPY_TIE_TOL {
            out.push(format!(
                "t={t:.9}: part {} should already be communicating",
                state.sigma[k]
            ));
        }
    }
    let _ = state.active_set();
}
