//! Seeded Monte Carlo batches, report emission, and randomized cross-checks
//! of the region identities.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::ideal::run_ideal;
use crate::measures::{conditional_entropy, entropy, EntropyProfile};
use crate::monitor::{error_event_monitor, Verdict, DEFAULT_MONITOR_BUDGET};
use crate::partition::{enumerate_partitions, h_sigma_profile, Partition};
use crate::real::{rde_with_transcript, DecoderMode, Outcome, ProtocolConfig};
use crate::region::{
    find_omniscience_subset_profile, finest_dominant_partition, in_region_with, r_star_profile,
    rco_lp, rco_partition_max, Ground, FLOAT_TOL,
};
use crate::scenario::Scenario;
use crate::sk::clopper_pearson_upper;
use crate::types::{sample_iid, JointDistribution, PartySubset};

pub const SCHEMA_VERSION: u32 = 1;

const DATA_TAG: u64 = 0x4441_5441;
const HASH_TAG: u64 = 0x5255_4e53;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Ideal,
    Exact,
    Genie,
}

impl std::fmt::Display for BatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BatchMode::Ideal => "ideal",
            BatchMode::Exact => "exact",
            BatchMode::Genie => "genie",
        })
    }
}

impl std::str::FromStr for BatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(BatchMode::Ideal),
            "exact" => Ok(BatchMode::Exact),
            "genie" => Ok(BatchMode::Genie),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialBatch {
    pub scenario: Scenario,
    pub n: usize,
    /// `None` uses `n^{-1/2}`.
    pub delta: Option<f64>,
    pub master_seed: u64,
    pub seeds: usize,
    pub mode: BatchMode,
    /// Per-run decoder search effort.
    pub search_budget: u64,
    /// Run the collision monitor on each trial.
    pub monitor: bool,
    /// Worker threads; `None` uses every core. Never affects results.
    pub jobs: Option<usize>,
}

impl TrialBatch {
    pub fn new(scenario: Scenario, n: usize, seeds: usize, mode: BatchMode) -> Self {
        TrialBatch {
            scenario,
            n,
            delta: None,
            master_seed: 0,
            seeds,
            mode,
            search_budget: crate::real::DEFAULT_SEARCH_BUDGET,
            monitor: false,
            jobs: None,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / (self.n as f64).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub index: usize,
    pub data_seed: u64,
    pub hash_seed: u64,
    /// `omniscience`, `declared_error`, `undetected_error`, `resource_limit` or `ideal`.
    pub outcome: String,
    pub total_bits: u64,
    pub hash_bits: u64,
    pub overhead_bits: u64,
    pub rounds: usize,
    pub round_bound: usize,
    pub sum_rate: f64,
    pub rco_type: f64,
    /// `clean`, `occurred`, `inconclusive`, or empty without a monitor.
    pub event: String,
    pub checks_hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub n: usize,
    pub delta: f64,
    pub mode: BatchMode,
    pub trials: usize,
    pub successes: usize,
    pub declared: usize,
    pub undetected: usize,
    pub resource_limited: usize,
    /// Failures over trials that finished within budget.
    pub failure_rate: f64,
    pub failure_upper_95: f64,
    pub mean_excess: f64,
    pub mean_overhead_fraction: f64,
    pub max_rounds: usize,
    pub round_bound: usize,
    pub round_violations: usize,
    pub total_bits: u64,
    pub rows: Vec<TrialRow>,
}

impl BatchSummary {
    /// Trials that ended in a protocol outcome.
    pub fn finished(&self) -> usize {
        self.successes + self.declared + self.undetected
    }

    pub fn failures(&self) -> usize {
        self.declared + self.undetected
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(TRIAL_COLUMNS).map_err(|e| Error::Internal(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        write_file(&stem.with_extension("json"), &self.to_json()?)?;
        write_file(&stem.with_extension("csv"), &self.to_csv()?)
    }
}

const TRIAL_COLUMNS: &[&str] = &[
    "index",
    "data_seed",
    "hash_seed",
    "outcome",
    "total_bits",
    "hash_bits",
    "overhead_bits",
    "rounds",
    "round_bound",
    "sum_rate",
    "rco_type",
    "event",
    "checks_hold",
];

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            context: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn run_trial(batch: &TrialBatch, dist: &JointDistribution, index: usize) -> Result<TrialRow> {
    let data_seed = derive_seed(batch.master_seed, &[DATA_TAG, index as u64]);
    let hash_seed = derive_seed(batch.master_seed, &[HASH_TAG, index as u64]);
    let delta = batch.delta();
    let mode = match batch.mode {
        BatchMode::Ideal => {
            let t = run_ideal(dist)?;
            return Ok(TrialRow {
                index,
                data_seed,
                hash_seed,
                outcome: "ideal".into(),
                total_bits: 0,
                hash_bits: 0,
                overhead_bits: 0,
                rounds: 0,
                round_bound: 0,
                sum_rate: t.terminal_sum(),
                rco_type: t.terminal_sum(),
                event: String::new(),
                checks_hold: t.violations.is_empty(),
            });
        }
        BatchMode::Exact => DecoderMode::Exact,
        BatchMode::Genie => DecoderMode::Genie,
    };
    let seqs = sample_iid(dist, batch.n, data_seed)?;
    let mut cfg = ProtocolConfig::new(delta, mode);
    cfg.search_budget = batch.search_budget;
    let round_bound = crate::real::max_rounds_bound(delta, seqs.alphabet())?;
    let (report, transcript) = match rde_with_transcript(&seqs, &cfg, hash_seed) {
        Ok(x) => x,
        Err(Error::ResourceLimit { .. }) => {
            return Ok(TrialRow {
                index,
                data_seed,
                hash_seed,
                outcome: "resource_limit".into(),
                total_bits: 0,
                hash_bits: 0,
                overhead_bits: 0,
                rounds: 0,
                round_bound,
                sum_rate: f64::NAN,
                rco_type: f64::NAN,
                event: "inconclusive".into(),
                checks_hold: true,
            })
        }
        Err(e) => return Err(e),
    };
    let event = if batch.monitor {
        match error_event_monitor(&seqs, &report, &transcript, DEFAULT_MONITOR_BUDGET)?.verdict {
            Verdict::Clean => "clean",
            Verdict::Occurred { .. } => "occurred",
            Verdict::Inconclusive => "inconclusive",
        }
        .to_string()
    } else {
        String::new()
    };
    Ok(TrialRow {
        index,
        data_seed,
        hash_seed,
        outcome: report.outcome.label().into(),
        total_bits: report.total_bits,
        hash_bits: report.bits.hash,
        overhead_bits: report.bits.overhead(),
        rounds: report.rounds,
        round_bound,
        sum_rate: report.bits_per_symbol(),
        rco_type: report.rco_type,
        event,
        checks_hold: report.checks_hold(),
    })
}

/// Runs every trial of `batch`; results do not depend on `jobs`.
pub fn run_batch(batch: &TrialBatch) -> Result<BatchSummary> {
    let dist = batch.scenario.distribution()?;
    let work = |i: usize| run_trial(batch, &dist, i);
    let rows: Vec<TrialRow> = match batch.jobs {
        Some(1) => (0..batch.seeds).map(work).collect::<Result<_>>()?,
        jobs => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            pool.install(|| (0..batch.seeds).into_par_iter().map(work).collect::<Result<_>>())?
        }
    };
    Ok(summarize(batch, rows))
}

fn summarize(batch: &TrialBatch, rows: Vec<TrialRow>) -> BatchSummary {
    let count = |label: &str| rows.iter().filter(|r| r.outcome == label).count();
    let successes = count(Outcome::Omniscience.label());
    let declared = count("declared_error");
    let undetected = count("undetected_error");
    let resource_limited = count("resource_limit");
    let finished = successes + declared + undetected;
    let failures = declared + undetected;
    let ok: Vec<&TrialRow> = rows.iter().filter(|r| r.outcome == "omniscience").collect();
    let mean = |f: &dyn Fn(&TrialRow) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let real: Vec<&TrialRow> = rows.iter().filter(|r| r.outcome != "ideal").collect();
    BatchSummary {
        schema_version: SCHEMA_VERSION,
        scenario: batch.scenario.name.clone(),
        n: batch.n,
        delta: batch.delta(),
        mode: batch.mode,
        trials: rows.len(),
        successes,
        declared,
        undetected,
        resource_limited,
        failure_rate: if finished == 0 {
            f64::NAN
        } else {
            failures as f64 / finished as f64
        },
        failure_upper_95: clopper_pearson_upper(failures as u64, finished as u64, 0.95),
        mean_excess: mean(&|r| r.sum_rate - r.rco_type),
        mean_overhead_fraction: mean(&|r| r.overhead_bits as f64 / r.total_bits.max(1) as f64),
        max_rounds: real.iter().map(|r| r.rounds).max().unwrap_or(0),
        round_bound: real.iter().map(|r| r.round_bound).max().unwrap_or(0),
        round_violations: real.iter().filter(|r| r.rounds > r.round_bound).count(),
        total_bits: rows.iter().map(|r| r.total_bits).sum(),
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkRow {
    pub index: usize,
    pub outcome: String,
    pub k: u64,
    pub k_per_symbol: f64,
    pub ell: f64,
    pub agreement: bool,
    pub secrecy_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub n: usize,
    pub delta: f64,
    pub dkey: f64,
    pub mode: BatchMode,
    pub capacity: f64,
    /// Clopper–Pearson 95% upper limit on the exchange failure rate.
    pub eps_n: f64,
    pub trials: usize,
    pub agreement_rate: f64,
    pub mean_k_per_symbol: f64,
    pub max_secrecy_bound: f64,
    pub rows: Vec<SkRow>,
}

impl SkSummary {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Runs the exchange on every seed, sets `ε_n` from the measured failure
/// count, then extracts keys with the measured transcript length.
pub fn run_sk_batch(batch: &TrialBatch, dkey: f64) -> Result<SkSummary> {
    let mode = match batch.mode {
        BatchMode::Exact => DecoderMode::Exact,
        BatchMode::Genie => DecoderMode::Genie,
        BatchMode::Ideal => return Err(Error::InvalidArgument("key agreement needs a real decoder".into())),
    };
    let dist = batch.scenario.distribution()?;
    let mut cfg = ProtocolConfig::new(batch.delta(), mode);
    cfg.search_budget = batch.search_budget;
    let exchange = |i: usize| -> Result<(crate::types::SequenceMatrix, crate::real::RunReport)> {
        let data_seed = derive_seed(batch.master_seed, &[DATA_TAG, i as u64]);
        let hash_seed = derive_seed(batch.master_seed, &[HASH_TAG, i as u64]);
        let seqs = sample_iid(&dist, batch.n, data_seed)?;
        let r = crate::real::rde(&seqs, &cfg, hash_seed)?;
        Ok((seqs, r))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let runs: Vec<_> = pool.install(|| (0..batch.seeds).into_par_iter().map(exchange).collect::<Result<_>>())?;
    let failures = runs.iter().filter(|(_, r)| !r.outcome.is_success()).count();
    let eps_n = clopper_pearson_upper(failures as u64, runs.len() as u64, 0.95);
    if !(dkey > 2.0 * eps_n) {
        return Err(Error::InvalidArgument(format!(
            "δ = {dkey} must exceed twice the measured error bound {eps_n:.4}; add seeds or raise δ"
        )));
    }
    let mut rows = Vec::with_capacity(runs.len());
    for (i, (seqs, run)) in runs.into_iter().enumerate() {
        let outcome = run.outcome.label().to_string();
        let n = run.n as f64;
        let sk = crate::sk::keys_from_run(&seqs, run, &cfg, dkey, eps_n, crate::sk::LengthModel::Measured)?;
        rows.push(match sk.key {
            Some(k) => SkRow {
                index: i,
                outcome,
                k: k.k,
                k_per_symbol: k.k as f64 / n,
                ell: k.ell,
                agreement: k.agreement,
                secrecy_bound: k.secrecy_bound,
            },
            None => SkRow {
                index: i,
                outcome,
                k: 0,
                k_per_symbol: 0.0,
                ell: 0.0,
                agreement: false,
                secrecy_bound: 0.0,
            },
        });
    }
    let trials = rows.len();
    let frac = |f: &dyn Fn(&SkRow) -> f64| if trials == 0 { f64::NAN } else { rows.iter().map(f).sum::<f64>() / trials as f64 };
    Ok(SkSummary {
        schema_version: SCHEMA_VERSION,
        scenario: batch.scenario.name.clone(),
        n: batch.n,
        delta: batch.delta(),
        dkey,
        mode: batch.mode,
        capacity: crate::sk::sk_capacity(&dist)?,
        eps_n,
        trials,
        agreement_rate: frac(&|r| r.agreement as u8 as f64),
        mean_k_per_symbol: frac(&|r| r.k_per_symbol),
        max_secrecy_bound: rows.iter().map(|r| r.secrecy_bound).fold(0.0, f64::max),
        rows,
    })
}

// ───────────────────────────── oracle suites ─────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    /// Instances whose hypothesis held, for implication suites.
    pub checked: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub failures: usize,
}

impl SuiteResult {
    fn new(name: &str, tolerance: f64) -> Self {
        SuiteResult {
            name: name.into(),
            instances: 0,
            checked: 0,
            max_deviation: 0.0,
            tolerance,
            failures: 0,
        }
    }

    fn deviation(&mut self, d: f64) {
        self.checked += 1;
        let d = d.abs();
        if !(d <= self.tolerance) {
            self.failures += 1;
        }
        if d > self.max_deviation || d.is_nan() {
            self.max_deviation = d;
        }
    }

    fn truth(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleLedger {
    pub schema_version: u32,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl OracleLedger {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

/// A random pmf on `m` parties with alphabet sizes in `2..=max_size`;
/// about a third of the cells are zeroed.
pub fn random_pmf(rng: &mut impl Rng, m: usize, max_size: usize) -> Result<JointDistribution> {
    let sizes: Vec<usize> = (0..m).map(|_| rng.gen_range(2..=max_size)).collect();
    let cells: usize = sizes.iter().product();
    let mut w: Vec<f64> = (0..cells)
        .map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    JointDistribution::from_weights(PartySubset::full(m), sizes, w)
}

fn random_partition(rng: &mut impl Rng, ground: PartySubset, min_parts: usize) -> Result<Partition> {
    let all = enumerate_partitions(ground, min_parts)?;
    Ok(all[rng.gen_range(0..all.len())].clone())
}

fn random_subset(rng: &mut impl Rng, of: PartySubset, min: usize) -> PartySubset {
    let members = of.members();
    loop {
        let s = members
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .fold(PartySubset::empty(), |a, &i| a.union(PartySubset::singleton(i)));
        if s.len() >= min {
            return s;
        }
    }
}

/// `ℍ` of the finest partition of `ground`, party level.
fn h_finest(p: &EntropyProfile, ground: PartySubset) -> f64 {
    let singles: Vec<PartySubset> = ground.iter().map(PartySubset::singleton).collect();
    h_sigma_profile(p, ground, &singles)
}

/// Runs every randomized suite on `count` instances each, plus the
/// built-in scenario checks. A supplied distribution is checked as well.
pub fn oracle_check(extra: Option<&JointDistribution>, count: usize, seed: u64) -> Result<OracleLedger> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id_tol = 1e-10;
    let mut duality = SuiteResult::new("lp_vs_partition", 1e-9);
    let mut weak = SuiteResult::new("weak_duality", 1e-9);
    let mut chain = SuiteResult::new("chain_rule", id_tol);
    let mut mono = SuiteResult::new("conditioning_reduces_entropy", 0.0);
    let mut two = SuiteResult::new("two_part_h_sigma", id_tol);
    let mut l1 = SuiteResult::new("h_sigma_identities", id_tol);
    let mut l2 = SuiteResult::new("pair_split_identity", id_tol);
    let mut l2s = SuiteResult::new("pair_split_sign", 0.0);
    let mut l3 = SuiteResult::new("combining", 0.0);
    let mut l4 = SuiteResult::new("completion", 0.0);
    let mut l5 = SuiteResult::new("subset_monotone", 0.0);
    let mut dich = SuiteResult::new("rstar_dichotomy", 0.0);
    let mut dists: Vec<JointDistribution> = Vec::with_capacity(count + 1);
    if let Some(d) = extra {
        dists.push(d.clone());
    }
    for _ in 0..count {
        let m = rng.gen_range(2..=4);
        dists.push(random_pmf(&mut rng, m, 3)?);
    }
    for dist in &dists {
        let m = dist.parties().len();
        let full = dist.parties();
        let p = EntropyProfile::new(dist, full)?;
        let ground = Ground::parties(full);
        for s in [
            &mut duality, &mut weak, &mut chain, &mut mono, &mut two, &mut l1, &mut l2, &mut l2s, &mut l3,
            &mut l4, &mut dich,
        ] {
            s.instances += 1;
        }
        // two routes to R_CO
        let (lp, _) = rco_lp(dist, &ground)?;
        let (pm, _) = rco_partition_max(dist, &ground)?;
        duality.deviation(lp - pm);
        for sigma in enumerate_partitions(full, 2)? {
            let v = h_sigma_profile(&p, full, sigma.parts());
            weak.deviation((v - lp).max(0.0));
        }
        // entropy identities on a random disjoint pair
        let a = random_subset(&mut rng, full, 1);
        let b = random_subset(&mut rng, full.minus(a), 0);
        chain.deviation(conditional_entropy(dist, a, b)? - (entropy(dist, a.union(b))? - entropy(dist, b)?));
        mono.truth(conditional_entropy(dist, a, b)? <= entropy(dist, a)? + id_tol);
        if !full.minus(a).is_empty() {
            let rest = full.minus(a);
            let v = h_sigma_profile(&p, full, &[a, rest]);
            two.deviation(v - (p.cond(a, rest) + p.cond(rest, a)));
        }
        // H_σ identities on a random subset A
        let aa = random_subset(&mut rng, full, 2);
        let ga = Ground::parties(aa);
        let rs = r_star_profile(&p, &ga)?;
        let hf = h_finest(&p, aa);
        let members = aa.members();
        let r_of = |i: usize| rs[members.iter().position(|&x| x == i).unwrap()];
        let total: f64 = rs.iter().sum();
        l1.deviation(total - hf);
        for &i in &members {
            let si = PartySubset::singleton(i);
            l1.deviation(r_of(i) - (hf - p.cond(aa.minus(si), si)));
            l1.deviation(total - r_of(i) - p.cond(aa.minus(si), si));
            for &j in &members {
                l1.deviation(r_of(i) - r_of(j) - (p.h(si) - p.h(PartySubset::singleton(j))));
            }
        }
        for bb in aa.proper_subsets().filter(|s| !s.is_empty()) {
            let rb: f64 = bb.iter().map(r_of).sum();
            let mut sigma_b: Vec<PartySubset> = bb.iter().map(PartySubset::singleton).collect();
            sigma_b.push(aa.minus(bb));
            let h_sb = h_sigma_profile(&p, aa, &sigma_b);
            l1.deviation(rb - p.cond(bb, aa.minus(bb)) - bb.len() as f64 * (hf - h_sb));
            // the two-set identity needs |B| ≥ 2
            if bb.len() >= 2 {
                let bbar = aa.minus(bb);
                let mut sigma_bbar: Vec<PartySubset> = bbar.iter().map(PartySubset::singleton).collect();
                sigma_bbar.push(bb);
                let h_sbbar = h_sigma_profile(&p, aa, &sigma_bbar);
                let k = bb.len() as f64;
                let kb = bbar.len() as f64;
                let gap = h_sbbar - hf;
                let lhs = rb - h_finest(&p, bb);
                l2.deviation(lhs - k * kb / (k - 1.0) * gap);
                let tol = 1e-10;
                l2s.truth(!(lhs > tol && gap < -tol) && !(lhs < -tol && gap > tol));
            }
        }
        // R* dichotomy on the full set
        let rs_full = r_star_profile(&p, &ground)?;
        let feasible = in_region_with(&ground, &rs_full, 0.0, &p, FLOAT_TOL);
        let attains = (h_finest(&p, full) - pm).abs() <= 1e-9;
        dich.truth(feasible == attains);
        // combining and completion on random rate vectors
        if m >= 2 {
            let sigma = random_partition(&mut rng, full, 2)?;
            let delta = rng.gen_range(0.0..0.3);
            for _ in 0..8 {
                let rates: Vec<f64> = (0..m)
                    .map(|i| {
                        let hi = p.h(PartySubset::singleton(i)) + m as f64 * delta;
                        rng.gen_range(0.3..1.15) * hi
                    })
                    .collect();
                let parts_ok = sigma.parts().iter().all(|&part| {
                    let v: Vec<f64> = part.iter().map(|j| rates[j]).collect();
                    in_region_with(&Ground::parties(part), &v, delta, &p, 0.0)
                });
                let part_rates: Vec<f64> = sigma.parts().iter().map(|q| q.iter().map(|j| rates[j]).sum()).collect();
                let gs = Ground::parts(sigma.parts())?;
                let level_ok = in_region_with(&gs, &part_rates, delta, &p, 0.0);
                let flat_ok = in_region_with(&ground, &rates, delta, &p, 1e-12);
                if parts_ok && level_ok {
                    l3.truth(flat_ok);
                }
                // completion: nonempty B_i inside each part
                let bs: Vec<PartySubset> = sigma.parts().iter().map(|&q| random_subset(&mut rng, q, 1)).collect();
                let ub = bs.iter().fold(PartySubset::empty(), |x, y| x.union(*y));
                let ub_rates: Vec<f64> = ub.iter().map(|j| rates[j]).collect();
                let ub_ok = in_region_with(&Ground::parties(ub), &ub_rates, delta, &p, 0.0);
                if parts_ok && ub_ok {
                    l4.truth(in_region_with(&gs, &part_rates, delta, &p, 1e-12));
                }
            }
        }
    }
    // subset monotonicity on partitions with up to five parts
    for _ in 0..count {
        let m = rng.gen_range(2..=5);
        let dist = random_pmf(&mut rng, m, 2)?;
        let p = EntropyProfile::new(&dist, dist.parties())?;
        let sigma = random_partition(&mut rng, dist.parties(), 2)?;
        l5.instances += 1;
        let gs = Ground::parts(sigma.parts())?;
        let found = find_omniscience_subset_profile(&p, &gs, FLOAT_TOL)?;
        l5.truth(found.is_some_and(|b| b.len() >= 2));
    }
    let mut fdp = SuiteResult::new("builtin_fdp", 0.0);
    for (name, expect) in [("ex1", "{1|2|3}"), ("ex2", "{1,2|3}"), ("ex3", "{1,2,3|4}")] {
        fdp.instances += 1;
        let d = Scenario::builtin(name, 0.2)?.distribution()?;
        let f = finest_dominant_partition(&d, &Ground::parties(d.parties()), 1e-9)?;
        fdp.truth(f.to_string() == expect);
    }
    let mut point = SuiteResult::new("point_mass", 1e-12);
    point.instances += 1;
    let pm = JointDistribution::from_weights(PartySubset::full(3), vec![2, 3, 2], {
        let mut w = vec![0.0; 12];
        w[5] = 1.0;
        w
    })?;
    point.deviation(rco_lp(&pm, &Ground::parties(pm.parties()))?.0);
    Ok(OracleLedger {
        schema_version: SCHEMA_VERSION,
        seed,
        suites: vec![duality, weak, chain, mono, two, l1, l2, l2s, l3, l4, l5, dich, fdp, point],
    })
}
