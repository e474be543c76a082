//! Secret key agreement on top of recursive data exchange: each party hashes
//! its recovered matrix to a length fixed by its own view of the joint type.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::gf2::prefix_mask;
use crate::hash::{pack_matrix, HashFamily, HashFunction};
use crate::measures::entropy;
use crate::real::{max_rounds_bound, rde, Outcome, ProtocolConfig, RunReport};
use crate::region::{rco_lp, rco_lp_profile, Ground};
use crate::types::{empirical_type, JointDistribution, PartySubset, SequenceMatrix};

/// Largest `k` with `nH(P) − l − |X_M| log2(n+1) − 2 log2(1/(δ − 2ε)) + 2 ≥ k`,
/// clamped at zero. `n` is the denominator of `type_`.
pub fn key_length(type_: &JointDistribution, ell: f64, delta: f64, eps_n: f64) -> Result<u64> {
    let Some(n) = type_.denominator() else {
        return invalid("key length needs an empirical type");
    };
    if !(delta - 2.0 * eps_n > 0.0) {
        return invalid(format!("δ = {delta} must exceed 2ε = {}", 2.0 * eps_n));
    }
    let h = entropy(type_, type_.parties())?;
    let cells = type_.cells() as f64;
    let n = n as f64;
    let k = n * h - ell - cells * (n + 1.0).log2() - 2.0 * (1.0 / (delta - 2.0 * eps_n)).log2() + 2.0;
    // guard against k landing a hair below an integer
    Ok((k + 1e-9).floor().max(0.0) as u64)
}

/// `½ √(2^{side + k − min_entropy})`.
pub fn leftover_hash_bound(min_entropy: f64, side_info: f64, k: f64) -> f64 {
    0.5 * (0.5 * (side_info + k - min_entropy)).exp2()
}

/// `H(X_M) − R_CO(M)`.
pub fn sk_capacity(dist: &JointDistribution) -> Result<f64> {
    let ground = Ground::parties(dist.parties());
    let h = entropy(dist, dist.parties())?;
    Ok(h - rco_lp(dist, &ground)?.0)
}

/// `k` hash bits of the whole matrix.
pub fn extract_key(recovered: &SequenceMatrix, k: usize, seed: u64) -> Vec<bool> {
    let (packed, bits) = pack_matrix(recovered);
    HashFunction::new(seed, k, &prefix_mask(bits)).apply(&packed)
}

/// How the public transcript length `l(P)` entering the key length is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthModel {
    /// Bits actually exchanged in the run.
    Measured,
    /// `n R_CO(P) + c2 nΔ + c3 L + c4 log2 n`.
    Analytic { c2: f64, c3: f64, c4: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyMaterial {
    /// One key per party that recovered a full matrix.
    pub keys: Vec<Option<Vec<bool>>>,
    /// Target length computed by each party from its own view.
    pub lengths: Vec<u64>,
    pub k: u64,
    pub delta: f64,
    pub eps_n: f64,
    pub ell: f64,
    /// `2ε + leftover bound`; zero for an empty key.
    pub secrecy_bound: f64,
    pub agreement: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkReport {
    pub key: Option<KeyMaterial>,
    pub run: RunReport,
}

fn ell_for(model: LengthModel, run: &RunReport, type_: &JointDistribution, cfg: &ProtocolConfig) -> Result<f64> {
    Ok(match model {
        LengthModel::Measured => run.total_bits as f64,
        LengthModel::Analytic { c2, c3, c4 } => {
            let n = run.n as f64;
            let profile = crate::measures::EntropyProfile::new(type_, type_.parties())?;
            let rco = rco_lp_profile(&profile, &Ground::parties(type_.parties()))?.0;
            let alphabet = type_.alphabet()?;
            let l = max_rounds_bound(cfg.delta, &alphabet)? as f64;
            n * rco + c2 * n * cfg.delta + c3 * l + c4 * n.log2()
        }
    })
}

/// Runs the exchange, then extracts one key per party.
pub fn run_sk(
    seqs: &SequenceMatrix,
    config: &ProtocolConfig,
    seed: u64,
    delta: f64,
    eps_n: f64,
    model: LengthModel,
) -> Result<SkReport> {
    check_secrecy_target(delta, eps_n)?;
    let run = rde(seqs, config, seed)?;
    keys_from_run(seqs, run, config, delta, eps_n, model)
}

fn check_secrecy_target(delta: f64, eps_n: f64) -> Result<()> {
    if !(delta - 2.0 * eps_n > 0.0) {
        return invalid(format!("δ = {delta} must exceed 2ε = {}", 2.0 * eps_n));
    }
    Ok(())
}

/// Key extraction from a finished exchange; no key after a declared error.
pub fn keys_from_run(
    seqs: &SequenceMatrix,
    run: RunReport,
    config: &ProtocolConfig,
    delta: f64,
    eps_n: f64,
    model: LengthModel,
) -> Result<SkReport> {
    check_secrecy_target(delta, eps_n)?;
    if matches!(run.outcome, Outcome::DeclaredError { .. }) {
        return Ok(SkReport { key: None, run });
    }
    let seed = run.seed;
    let n = seqs.n();
    let m = seqs.m();
    let full = PartySubset::full(m);
    let key_seed = HashFamily::new(seed).key_seed();
    let mut keys = Vec::with_capacity(m);
    let mut lengths = Vec::with_capacity(m);
    let mut ells = Vec::with_capacity(m);
    for view in &run.recovered {
        let rows: Option<Vec<Vec<u16>>> = view.iter().cloned().collect();
        let Some(rows) = rows else {
            keys.push(None);
            lengths.push(0);
            continue;
        };
        let local = SequenceMatrix::new(seqs.alphabet().clone(), rows)?;
        let t = empirical_type(&local, full)?;
        let ell = ell_for(model, &run, &t, config)?;
        let k = key_length(&t, ell, delta, eps_n)?;
        keys.push(Some(extract_key(&local, k as usize, key_seed)));
        lengths.push(k);
        ells.push(ell);
    }
    let agreement = run.outcome.is_success()
        && keys.iter().all(|k| k.is_some() && *k == keys[0]);
    let truth = empirical_type(seqs, full)?;
    let k = lengths.first().copied().unwrap_or(0);
    let ell = ells.first().copied().unwrap_or(0.0);
    let secrecy_bound = if k == 0 {
        0.0
    } else {
        let h = entropy(&truth, full)?;
        let min_entropy = n as f64 * h - truth.cells() as f64 * (n as f64 + 1.0).log2();
        2.0 * eps_n + leftover_hash_bound(min_entropy, ell, k as f64)
    };
    Ok(SkReport {
        key: Some(KeyMaterial {
            keys,
            lengths,
            k,
            delta,
            eps_n,
            ell,
            secrecy_bound,
            agreement,
        }),
        run,
    })
}

/// One-sided Clopper–Pearson upper limit on a failure probability.
pub fn clopper_pearson_upper(failures: u64, trials: u64, confidence: f64) -> f64 {
    if trials == 0 || failures >= trials {
        return 1.0;
    }
    let beta = Beta::new(failures as f64 + 1.0, (trials - failures) as f64)
        .expect("shape parameters are positive");
    beta.inverse_cdf(confidence)
}
