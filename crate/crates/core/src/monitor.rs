//! Genie-side detection of the hash-collision event `ℰ`: some round `l`,
//! set `A` and nonempty `B ⊊ A` admit a tuple that differs from the truth
//! exactly on `B`, puts `R(l)` inside `R^Δ_CO(A)` for its own type, and
//! matches every hash the parties in `B` sent up to round `l`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{solve, AffineSpace};
use crate::hash::row_mask;
use crate::real::{Decision, RunReport, Transcript};
use crate::search::{search, Budget, Query, Unknown};
use crate::types::{PartySubset, SequenceMatrix};

/// Default search effort for one monitor pass.
pub const DEFAULT_MONITOR_BUDGET: u64 = 1 << 26;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    Occurred { round: usize, a: PartySubset, b: PartySubset },
    /// The search budget ran out before a verdict.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mismatch {
    pub round: usize,
    pub part: PartySubset,
    pub decision: Decision,
    pub oracle: Option<PartySubset>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonitorReport {
    pub verdict: Verdict,
    /// Rounds where a decoder output differs from region membership.
    pub mismatches: Vec<Mismatch>,
    pub searched: u64,
}

impl MonitorReport {
    pub fn clean(&self) -> bool {
        self.verdict == Verdict::Clean
    }
}

/// Decoder outputs that disagree with the region-membership oracle.
pub fn oracle_mismatches(report: &RunReport) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for r in &report.trace {
        for d in &r.decisions {
            let agrees = match (&d.decision, d.oracle) {
                (Decision::Ack { set }, Some(o)) => *set == o,
                (Decision::Nack, None) => true,
                _ => false,
            };
            if !agrees {
                out.push(Mismatch {
                    round: r.round,
                    part: d.part,
                    decision: d.decision.clone(),
                    oracle: d.oracle,
                });
            }
        }
    }
    out
}

/// Scans every round of a run for `ℰ`.
pub fn error_event_monitor(
    seqs: &SequenceMatrix,
    report: &RunReport,
    transcript: &Transcript,
    budget: u64,
) -> Result<MonitorReport> {
    let n = seqs.n();
    let m = seqs.m();
    let sizes = seqs.alphabet().sizes().to_vec();
    let masks: Vec<Vec<u64>> = (0..m).map(|i| row_mask(n, sizes[i])).collect();
    let delta = report.delta;
    let mut cosets: HashMap<(usize, usize), AffineSpace> = HashMap::new();
    let mut budget = Budget::new(budget);
    let mismatches = oracle_mismatches(report);
    for rec in &transcript.rounds {
        let l = rec.round;
        let rates: Vec<f64> = (0..m).map(|i| rec.rates.get(i).value().unwrap_or(-1.0)).collect();
        let active = (0..m)
            .filter(|&i| rec.rates.get(i).is_active())
            .fold(PartySubset::empty(), |s, i| s.union(PartySubset::singleton(i)));
        for i in active.iter() {
            let arc = &transcript.archives[i];
            let k = arc.prefix(l);
            if !cosets.contains_key(&(i, k)) {
                let c = solve(&arc.rows[..k], &arc.values[..k], &masks[i])
                    .ok_or_else(|| Error::Internal(format!("party {} hashes inconsistent", i + 1)))?;
                cosets.insert((i, k), c);
            }
        }
        for a in active.nonempty_subsets().filter(|a| a.len() >= 2) {
            for b in a.proper_subsets().filter(|b| !b.is_empty()) {
                let known: Vec<(usize, &[u16])> = a.minus(b).iter().map(|i| (i, seqs.row(i))).collect();
                let unknown: Vec<Unknown> = b
                    .iter()
                    .map(|i| {
                        let arc = &transcript.archives[i];
                        let k = arc.prefix(l);
                        Unknown {
                            party: i,
                            coset: &cosets[&(i, k)],
                            hash_rows: &arc.rows[..k],
                            hash_values: &arc.values[..k],
                            exclude: Some(seqs.row(i)),
                        }
                    })
                    .collect();
                let query = Query {
                    n,
                    a,
                    sizes: &sizes,
                    rates: &rates,
                    delta,
                    known,
                    unknown,
                    max_solutions: 1,
                };
                match search(&query, &mut budget) {
                    Ok(s) if !s.is_empty() => {
                        return Ok(MonitorReport {
                            verdict: Verdict::Occurred { round: l, a, b },
                            mismatches,
                            searched: budget.used,
                        })
                    }
                    Ok(_) => {}
                    Err(Error::ResourceLimit { .. }) => {
                        return Ok(MonitorReport {
                            verdict: Verdict::Inconclusive,
                            mismatches,
                            searched: budget.used,
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(MonitorReport {
        verdict: Verdict::Clean,
        mismatches,
        searched: budget.used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{rde_with_transcript, DecoderMode, ProtocolConfig};
    use crate::scenario::Scenario;
    use crate::types::sample_iid;

    #[test]
    fn clean_runs_match_the_oracle() {
        let d = Scenario::builtin("ex1", 0.2).unwrap().distribution().unwrap();
        let cfg = ProtocolConfig::new(0.25, DecoderMode::Exact);
        let mut clean = 0;
        for seed in 0..20 {
            let x = sample_iid(&d, 32, 40 + seed).unwrap();
            let (r, t) = rde_with_transcript(&x, &cfg, seed).unwrap();
            let mon = error_event_monitor(&x, &r, &t, DEFAULT_MONITOR_BUDGET).unwrap();
            if mon.clean() {
                clean += 1;
                assert!(mon.mismatches.is_empty(), "seed {seed}: {:?}", mon.mismatches);
                assert!(r.outcome.is_success());
            }
        }
        assert!(clean > 10);
    }

    #[test]
    fn short_sequences_collide() {
        // one hash bit per round leaves many colliding candidates
        let d = Scenario::builtin("ex1", 0.2).unwrap().distribution().unwrap();
        let cfg = ProtocolConfig::new(0.25, DecoderMode::Exact);
        let hit = (0..40).any(|seed| {
            let x = sample_iid(&d, 8, seed).unwrap();
            let (r, t) = rde_with_transcript(&x, &cfg, seed).unwrap();
            matches!(
                error_event_monitor(&x, &r, &t, DEFAULT_MONITOR_BUDGET).unwrap().verdict,
                Verdict::Occurred { .. }
            )
        });
        assert!(hit);
    }
}
