mod common;

use common::Pmf;
use proptest::prelude::*;
use rde_core::hash::hash_bits;
use rde_core::region::{in_region_with, rco_lp, rco_lp_profile};
use rde_core::types::{empirical_type, sample_iid};
use rde_core::{
    conditional_entropy, entropy, key_length, r_star, rde, run_batch, BatchMode, DecoderMode, EntropyProfile,
    Ground, JointDistribution, PartySubset, ProtocolConfig, Scenario, TrialBatch,
};

fn pmf() -> impl Strategy<Value = Pmf> {
    pmf_with(2..=4)
}

fn pmf_with(parties: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Pmf> {
    parties
        .prop_flat_map(|m| prop::collection::vec(2usize..=3, m))
        .prop_flat_map(|sizes| {
            let cells: usize = sizes.iter().product();
            let w = prop::collection::vec(prop_oneof![1 => Just(0.0), 2 => 0.01f64..1.0], cells);
            (Just(sizes), w)
        })
        .prop_filter("some mass", |(_, w)| w.iter().any(|&x| x > 0.0))
        .prop_map(|(sizes, w)| {
            let total: f64 = w.iter().sum();
            Pmf { sizes, p: w.into_iter().map(|x| x / total).collect() }
        })
}

fn subset(m: usize) -> impl Strategy<Value = u32> {
    1u32..(1 << m)
}

fn full(d: &JointDistribution) -> Ground {
    Ground::parties(d.parties())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_equals_partition_oracle(p in pmf()) {
        let d = p.to_joint();
        let (lp, _) = rco_lp(&d, &full(&d)).unwrap();
        prop_assert!((lp - p.rco()).abs() < 1e-9, "lp {} oracle {}", lp, p.rco());
    }

    #[test]
    fn lp_rates_are_feasible(p in pmf()) {
        let d = p.to_joint();
        let g = full(&d);
        let (sum, rates) = rco_lp(&d, &g).unwrap();
        let r = rates.values().unwrap();
        prop_assert!((r.iter().sum::<f64>() - sum).abs() < 1e-9);
        let profile = EntropyProfile::new(&d, d.parties()).unwrap();
        prop_assert!(in_region_with(&g, &r, 0.0, &profile, 1e-9));
    }

    #[test]
    fn entropy_matches_oracle(p in pmf(), mask in subset(4)) {
        let d = p.to_joint();
        let mask = mask & p.full();
        prop_assume!(mask != 0);
        let lib = entropy(&d, PartySubset::from_bits(mask)).unwrap();
        prop_assert!((lib - p.h(mask)).abs() < 1e-10);
    }

    #[test]
    fn chain_rule(p in pmf(), a in subset(4), b in subset(4)) {
        let d = p.to_joint();
        let a = PartySubset::from_bits(a & p.full());
        let b = PartySubset::from_bits(b & p.full()).minus(a);
        prop_assume!(!a.is_empty() && !b.is_empty());
        let lhs = entropy(&d, a.union(b)).unwrap();
        let rhs = entropy(&d, a).unwrap() + conditional_entropy(&d, b, a).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn conditioning_reduces_entropy(p in pmf_with(3..=4), labels in prop::collection::vec(0usize..4, 4)) {
        let d = p.to_joint();
        // party i goes to set labels[i]; the first three parties are pinned to distinct sets
        let pick = |k: usize| (0..p.m())
            .filter(|&i| if i < 3 { i == k } else { labels[i] == k })
            .fold(PartySubset::empty(), |s, i| s.union(PartySubset::singleton(i)));
        let (a, b, c) = (pick(0), pick(1), pick(2));
        let less = conditional_entropy(&d, a, b.union(c)).unwrap();
        let more = conditional_entropy(&d, a, b).unwrap();
        prop_assert!(less <= more + 1e-12);
    }

    #[test]
    fn r_star_sums_to_finest_h_sigma(p in pmf()) {
        let d = p.to_joint();
        let rs = r_star(&d, &full(&d)).unwrap().values().unwrap();
        let singles: Vec<u32> = (0..p.m()).map(|i| 1 << i).collect();
        prop_assert!((rs.iter().sum::<f64>() - p.h_sigma(&singles)).abs() < 1e-10);
        for (a, b) in rs.iter().zip(p.r_star()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn region_is_upward_closed(p in pmf(), bump in prop::collection::vec(0.0f64..1.0, 4), delta in 0.0f64..0.3) {
        let d = p.to_joint();
        let g = full(&d);
        let profile = EntropyProfile::new(&d, d.parties()).unwrap();
        let base: Vec<f64> = rco_lp_profile(&profile, &g).unwrap().1.values().unwrap()
            .iter().map(|r| r + p.m() as f64 * delta).collect();
        prop_assert!(in_region_with(&g, &base, delta, &profile, 1e-9));
        let up: Vec<f64> = base.iter().zip(&bump).map(|(r, b)| r + b).collect();
        prop_assert!(in_region_with(&g, &up, delta, &profile, 1e-9));
        let down: Vec<f64> = base.iter().map(|r| r - 1.0).collect();
        prop_assert!(!in_region_with(&g, &down, delta, &profile, 1e-9));
    }

    #[test]
    fn binary_hash_is_linear(x in prop::collection::vec(0u16..2, 1..100), y_seed: u64, seed: u64, nbits in 1usize..40) {
        let y: Vec<u16> = x.iter().enumerate().map(|(i, _)| ((y_seed >> (i % 64)) & 1) as u16).collect();
        let xy: Vec<u16> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let hx = hash_bits(&x, 2, seed, nbits);
        let hy = hash_bits(&y, 2, seed, nbits);
        let hxy = hash_bits(&xy, 2, seed, nbits);
        for k in 0..nbits {
            prop_assert_eq!(hxy[k], hx[k] ^ hy[k]);
        }
    }

    #[test]
    fn key_length_shrinks_with_transcript(c0 in 1u64..40, c1 in 1u64..40, c2 in 0u64..40, l in 0.0f64..50.0, extra in 0.0f64..50.0) {
        let t = JointDistribution::from_counts(PartySubset::full(1), vec![3], vec![c0, c1, c2]).unwrap();
        let k0 = key_length(&t, l, 0.1, 0.01).unwrap();
        let k1 = key_length(&t, l + extra, 0.1, 0.01).unwrap();
        prop_assert!(k1 <= k0);
        let n = (c0 + c1 + c2) as f64;
        prop_assert!(k0 as f64 <= n * 3f64.log2());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn genie_runs_recover_and_account_bits(seed: u64, n in 16usize..200, name in prop::sample::select(vec!["ex1", "ex2", "twin"])) {
        let d = Scenario::builtin(name, 0.2).unwrap().distribution().unwrap();
        let x = sample_iid(&d, n, seed).unwrap();
        let cfg = ProtocolConfig::new(1.0 / (n as f64).sqrt(), DecoderMode::Genie);
        let r = rde(&x, &cfg, seed).unwrap();
        prop_assert!(r.outcome.is_success(), "{:?}", r.outcome);
        prop_assert!(r.recovered_correct.iter().all(|&c| c));
        prop_assert_eq!(r.total_bits, r.bits.total());
        prop_assert_eq!(r.total_bits, r.bits.hash + r.bits.overhead());
        let t = empirical_type(&x, x.alphabet().parties()).unwrap();
        let rco = rco_lp(&t, &Ground::parties(t.parties())).unwrap().0;
        prop_assert!((r.rco_type - rco).abs() < 1e-9);
        prop_assert!(r.bits.hash as f64 >= n as f64 * rco - 1e-6, "hash bits {} below n·R_CO {}", r.bits.hash, n as f64 * rco);
    }

    #[test]
    fn batches_are_deterministic(seed: u64, seeds in 1usize..6) {
        let mut b = TrialBatch::new(Scenario::builtin("ex1", 0.2).unwrap(), 32, seeds, BatchMode::Genie);
        b.master_seed = seed;
        let one = run_batch(&b).unwrap();
        let two = run_batch(&b).unwrap();
        prop_assert_eq!(&one, &two);
        b.master_seed = seed.wrapping_add(1);
        prop_assert_eq!(run_batch(&b).unwrap().rows.len(), seeds);
    }
}
