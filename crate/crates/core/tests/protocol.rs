use rde_core::hash::{hash_bits, pack_row, row_mask, HashFunction};
use rde_core::monitor::{error_event_monitor, oracle_mismatches, DEFAULT_MONITOR_BUDGET};
use rde_core::real::{dec, Decision, DecoderInput, PartyArchive};
use rde_core::types::sample_iid;
use rde_core::{
    max_rounds_bound, rde, rde_with_transcript, run_batch, Alphabet, BatchMode, DecoderMode, Outcome, PartySubset,
    ProtocolConfig, Scenario, TrialBatch, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn archive(row: &[u16], q: usize, seed: u64, nbits: usize) -> PartyArchive {
    let h = HashFunction::new(seed, nbits, &row_mask(row.len(), q));
    let values = h.apply(&pack_row(row, q));
    PartyArchive { rows: h.rows, values, round_of: vec![0; nbits] }
}

fn two_party_dec(x1: &[u16], x2: &[u16], rates: [f64; 2], delta: f64, seed: u64, nbits: usize) -> Decision {
    let sigma = [PartySubset::singleton(0), PartySubset::singleton(1)];
    let archives = [PartyArchive::default(), archive(x2, 2, seed, nbits)];
    let view = [Some(x1.to_vec()), None];
    let input = DecoderInput {
        part: sigma[0],
        sigma: &sigma,
        rates: &[Some(rates[0]), Some(rates[1])],
        archives: &archives,
        view: &view,
        sizes: &[2, 2],
        n: x1.len(),
        delta,
        budget: 1 << 20,
    };
    dec(&input).unwrap().decision
}

#[test]
fn identical_rows_ack_unless_the_complement_collides() {
    let x: Vec<u16> = vec![0, 1, 1, 0, 1, 0, 0, 0];
    let not_x: Vec<u16> = x.iter().map(|b| 1 - b).collect();
    let (mut acks, mut errs) = (0, 0);
    for seed in 0..200 {
        // the only tuples at zero conditional entropy are x and its complement
        let collide = hash_bits(&x, 2, seed, 4) == hash_bits(&not_x, 2, seed, 4);
        match two_party_dec(&x, &x, [0.5, 0.5], 0.5, seed, 4) {
            Decision::Ack { set } => {
                assert!(!collide, "seed {seed}");
                assert_eq!(set, PartySubset::full(2));
                acks += 1;
            }
            Decision::Err { .. } => {
                assert!(collide, "seed {seed}");
                errs += 1;
            }
            Decision::Nack => panic!("seed {seed}: NACK at the boundary of the region"),
        }
    }
    assert!(acks > 150 && errs > 0, "{acks} acks, {errs} errs");
}

#[test]
fn rates_below_every_constraint_nack() {
    let x: Vec<u16> = vec![1, 0, 1, 1, 0, 0, 1, 0];
    assert_eq!(two_party_dec(&x, &x, [0.0, 0.0], 0.25, 3, 0), Decision::Nack);
    assert_eq!(two_party_dec(&x, &x, [0.5, 0.1], 0.25, 3, 1), Decision::Nack);
}

#[test]
fn colliding_type_class_members_give_err() {
    // n = 2, one hash bit: find a seed whose hash row is 11 so (0,1) and (1,0) share the hash
    let mask = row_mask(2, 2);
    let seed = (0..1000u64)
        .find(|&s| HashFunction::new(s, 1, &mask).rows[0][0] & 0b11 == 0b11)
        .expect("a seed with hash row 11");
    assert_eq!(hash_bits(&[0, 1], 2, seed, 1), hash_bits(&[1, 0], 2, seed, 1));
    let d = two_party_dec(&[0, 1], &[0, 1], [2.0, 2.0], 0.1, seed, 1);
    assert!(matches!(d, Decision::Err { .. }), "{d:?}");
}

#[test]
fn decoder_rejects_bad_inputs() {
    let sigma = [PartySubset::singleton(0), PartySubset::singleton(1)];
    let archives = [PartyArchive::default(), PartyArchive::default()];
    let mut input = DecoderInput {
        part: sigma[0],
        sigma: &sigma,
        rates: &[None, Some(0.5)],
        archives: &archives,
        view: &[Some(vec![0, 1]), None],
        sizes: &[2, 2],
        n: 2,
        delta: 0.5,
        budget: 1 << 10,
    };
    assert!(dec(&input).is_err());
    input.rates = &[Some(0.5), Some(0.5)];
    input.view = &[None, None];
    assert!(dec(&input).is_err());
}

fn collision_rate(q: usize, n: usize, nbits: usize, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..pairs {
        let x: Vec<u16> = (0..n).map(|_| rng.gen_range(0..q as u16)).collect();
        let mut y = x.clone();
        while y == x {
            y = (0..n).map(|_| rng.gen_range(0..q as u16)).collect();
        }
        let s: u64 = rng.gen();
        hits += (hash_bits(&x, q, s, nbits) == hash_bits(&y, q, s, nbits)) as usize;
    }
    hits as f64 / pairs as f64
}

#[test]
fn hash_family_is_two_universal() {
    let pairs = 10_000;
    let p = 1.0 / 16.0;
    let bound = p + 3.0 * (p * (1.0 - p) / pairs as f64).sqrt();
    for q in [2, 3, 4] {
        let rate = collision_rate(q, 8, 4, pairs, q as u64);
        assert!(rate <= bound, "q = {q}: {rate} > {bound}");
    }
}

#[test]
fn keys_of_distinct_matrices_rarely_collide() {
    use rde_core::extract_key;
    let a = Alphabet::new(vec![2, 3]).unwrap();
    let x = rde_core::SequenceMatrix::new(a.clone(), vec![vec![0, 1, 1, 0], vec![2, 0, 1, 1]]).unwrap();
    let y = rde_core::SequenceMatrix::new(a, vec![vec![0, 1, 1, 0], vec![2, 0, 1, 2]]).unwrap();
    let trials = 1000;
    let hits = (0..trials).filter(|&s| extract_key(&x, 8, s) == extract_key(&y, 8, s)).count();
    let p = 1.0 / 256.0;
    let bound = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    assert!((hits as f64 / trials as f64) <= bound, "{hits} collisions");
}

#[test]
fn monitor_clean_exact_runs_agree_with_the_oracle() {
    let d = Scenario::builtin("ex1", 0.2).unwrap().distribution().unwrap();
    let cfg = ProtocolConfig::new(0.25, DecoderMode::Exact);
    let (mut clean, mut occurred) = (0, 0);
    for seed in 100..130 {
        let x = sample_iid(&d, 32, seed).unwrap();
        let (r, t) = rde_with_transcript(&x, &cfg, seed).unwrap();
        let mon = error_event_monitor(&x, &r, &t, DEFAULT_MONITOR_BUDGET).unwrap();
        match mon.verdict {
            Verdict::Clean => {
                clean += 1;
                assert!(mon.mismatches.is_empty());
                assert_eq!(r.outcome, Outcome::Omniscience);
                assert!(r.checks_hold(), "seed {seed}");
            }
            Verdict::Occurred { .. } => occurred += 1,
            Verdict::Inconclusive => {}
        }
    }
    assert!(clean >= 20, "{clean} clean, {occurred} with a collision");
}

#[test]
fn genie_decisions_are_the_oracle() {
    let d = Scenario::builtin("ex2", 0.2).unwrap().distribution().unwrap();
    let x = sample_iid(&d, 128, 9).unwrap();
    let r = rde(&x, &ProtocolConfig::new(0.125, DecoderMode::Genie), 9).unwrap();
    assert!(oracle_mismatches(&r).is_empty());
    assert!(r.outcome.is_success());
    assert!(r.recovered_correct.iter().all(|&c| c));
}

#[test]
fn exhaustive_binary_pairs_match_the_oracle() {
    // every binary 2-row matrix with n = 4
    let a = Alphabet::new(vec![2, 2]).unwrap();
    let cfg = ProtocolConfig::new(0.5, DecoderMode::Exact);
    let mut clean = 0;
    for code in 0u32..256 {
        let row = |k: u32| (0..4).map(|t| ((code >> (4 * k + t)) & 1) as u16).collect::<Vec<_>>();
        let x = rde_core::SequenceMatrix::new(a.clone(), vec![row(0), row(1)]).unwrap();
        let (r, t) = rde_with_transcript(&x, &cfg, code as u64).unwrap();
        let mon = error_event_monitor(&x, &r, &t, DEFAULT_MONITOR_BUDGET).unwrap();
        if mon.clean() {
            clean += 1;
            assert!(mon.mismatches.is_empty(), "code {code}: {:?}", mon.mismatches);
            assert!(r.outcome.is_success());
        }
    }
    assert!(clean > 0);
}

#[test]
fn round_bound_values() {
    let b = |sizes: Vec<usize>, delta: f64| max_rounds_bound(delta, &Alphabet::new(sizes).unwrap()).unwrap();
    assert_eq!(b(vec![2, 2, 2], 0.25), 15);
    assert_eq!(b(vec![4, 4, 2], 0.25), 23);
    assert_eq!(b(vec![2, 2], 1.0), 4);
}

#[test]
fn batch_counts_and_files() {
    let mut b = TrialBatch::new(Scenario::builtin("ex1", 0.2).unwrap(), 64, 6, BatchMode::Genie);
    b.master_seed = 11;
    let s = run_batch(&b).unwrap();
    assert_eq!(s.trials, 6);
    assert_eq!(s.finished() + s.resource_limited, s.trials);
    assert_eq!(s.rows.len(), 6);
    let dir = std::env::temp_dir().join(format!("rde-batch-{}", std::process::id()));
    let stem = dir.join("nested").join("ex1");
    s.write(&stem).unwrap();
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("index,data_seed,hash_seed,outcome"));
    assert_eq!(csv.lines().count(), 7);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["trials"], 6);
    std::fs::remove_dir_all(dir).unwrap();
}
