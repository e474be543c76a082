//! Seeded random binary matrices over GF(2), a 2-universal family, applied
//! to the bit encoding of whole sequences.
//!
//! A row over an alphabet of size `q` is stored as `w = ⌈log2 q⌉` bit planes,
//! each padded to whole words: bit `t` of plane `b` is bit `b` of symbol `t`.
//! Padding bits are outside the valid mask and never influence a hash.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gf2::{parity_and, prefix_mask, words_for};
use crate::types::SequenceMatrix;

/// Bits per symbol; zero for a constant alphabet.
pub fn bits_per_symbol(q: usize) -> usize {
    if q <= 1 {
        0
    } else {
        (usize::BITS - (q - 1).leading_zeros()) as usize
    }
}

/// Words per plane for length `n`.
pub(crate) fn plane_words(n: usize) -> usize {
    words_for(n)
}

/// Packs `row` plane-major into `bits_per_symbol(q) · ⌈n/64⌉` words.
pub fn pack_row(row: &[u16], q: usize) -> Vec<u64> {
    let n = row.len();
    let w = bits_per_symbol(q);
    let pw = plane_words(n);
    let mut out = vec![0u64; w * pw];
    for (t, &s) in row.iter().enumerate() {
        for b in 0..w {
            if (s >> b) & 1 == 1 {
                out[b * pw + t / 64] |= 1 << (t % 64);
            }
        }
    }
    out
}

/// Valid-bit mask of a packed row.
pub fn row_mask(n: usize, q: usize) -> Vec<u64> {
    let pw = plane_words(n);
    let plane = prefix_mask(n);
    let mut out = vec![0u64; bits_per_symbol(q) * pw];
    for chunk in out.chunks_mut(pw) {
        chunk.copy_from_slice(&plane);
    }
    out
}

/// Mixes `tags` into `master`; distinct tag tuples give unrelated seeds.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut z = master ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        z = splitmix(z ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Public randomness for a run: per-round, per-party hash seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    pub seed: u64,
}

const HASH_TAG: u64 = 0x4841_5348;
const KEY_TAG: u64 = 0x4b45_5953;

impl HashFamily {
    pub fn new(seed: u64) -> Self {
        HashFamily { seed }
    }

    pub fn round_seed(&self, round: usize, party: usize) -> u64 {
        derive_seed(self.seed, &[HASH_TAG, round as u64, party as u64])
    }

    pub fn key_seed(&self) -> u64 {
        derive_seed(self.seed, &[KEY_TAG])
    }
}

/// An `nbits`-row binary matrix supported on the valid input bits.
#[derive(Clone, Debug)]
pub struct HashFunction {
    pub rows: Vec<Vec<u64>>,
}

impl HashFunction {
    pub fn new(seed: u64, nbits: usize, valid: &[u64]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..nbits)
            .map(|_| valid.iter().map(|m| rng.next_u64() & m).collect())
            .collect();
        HashFunction { rows }
    }

    pub fn apply(&self, packed: &[u64]) -> Vec<bool> {
        self.rows.iter().map(|r| parity_and(r, packed)).collect()
    }
}

/// `nbits` hash bits of one sequence row over an alphabet of size `q`.
pub fn hash_bits(row: &[u16], q: usize, seed: u64, nbits: usize) -> Vec<bool> {
    let packed = pack_row(row, q);
    HashFunction::new(seed, nbits, &row_mask(row.len(), q)).apply(&packed)
}

/// Packs every row of `seqs` back to back without padding; returns the
/// words and the bit length.
pub fn pack_matrix(seqs: &SequenceMatrix) -> (Vec<u64>, usize) {
    let mut bits: Vec<bool> = Vec::new();
    for (i, row) in seqs.rows().iter().enumerate() {
        let q = seqs.alphabet().size(i);
        let w = bits_per_symbol(q);
        for b in 0..w {
            for &s in row.iter() {
                bits.push((s >> b) & 1 == 1);
            }
        }
    }
    let mut out = vec![0u64; words_for(bits.len())];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    (out, bits.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bits_is_empty() {
        assert!(hash_bits(&[0, 1, 1], 2, 5, 0).is_empty());
    }

    #[test]
    fn deterministic() {
        let row = [0u16, 1, 2, 3, 1, 0];
        assert_eq!(hash_bits(&row, 4, 11, 9), hash_bits(&row, 4, 11, 9));
    }

    #[test]
    fn packing_layout() {
        let p = pack_row(&[1, 2, 3], 4);
        assert_eq!(p, vec![0b101, 0b110]);
        assert_eq!(row_mask(3, 4), vec![0b111, 0b111]);
        assert_eq!(bits_per_symbol(1), 0);
        assert_eq!(bits_per_symbol(2), 1);
        assert_eq!(bits_per_symbol(3), 2);
        assert_eq!(bits_per_symbol(5), 3);
    }

    #[test]
    fn seeds_differ_by_tag() {
        let f = HashFamily::new(1);
        assert_ne!(f.round_seed(1, 0), f.round_seed(0, 1));
        assert_ne!(f.round_seed(1, 0), f.key_seed());
    }
}
