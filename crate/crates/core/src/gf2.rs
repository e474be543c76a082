//! Dense linear algebra over GF(2) on packed `u64` words.

/// Number of words holding `bits` bits.
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

pub(crate) fn parity_and(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).fold(0u32, |acc, (x, y)| acc ^ (x & y).count_ones()) & 1 == 1
}

pub(crate) fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

pub(crate) fn get_bit(v: &[u64], i: usize) -> bool {
    (v[i / 64] >> (i % 64)) & 1 == 1
}

pub(crate) fn set_bit(v: &mut [u64], i: usize) {
    v[i / 64] |= 1 << (i % 64);
}

/// Solutions of `rows · x = rhs` as `particular ⊕ span(basis)`.
#[derive(Clone, Debug)]
pub(crate) struct AffineSpace {
    pub particular: Vec<u64>,
    pub basis: Vec<Vec<u64>>,
}

impl AffineSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Visits every point once in Gray-code order; stops early when `f` returns false.
    pub fn for_each(&self, mut f: impl FnMut(&[u64]) -> bool) {
        let mut x = self.particular.clone();
        if !f(&x) {
            return;
        }
        let d = self.basis.len();
        if d >= 64 {
            // callers guard the size before enumerating
            return;
        }
        for k in 1u64..(1u64 << d) {
            xor_into(&mut x, &self.basis[k.trailing_zeros() as usize]);
            if !f(&x) {
                return;
            }
        }
    }
}

/// Gauss-Jordan elimination over the columns set in `valid`; other
/// columns are fixed at zero. `None` if inconsistent.
pub(crate) fn solve(rows: &[Vec<u64>], rhs: &[bool], valid: &[u64]) -> Option<AffineSpace> {
    let nw = valid.len();
    let ncols = nw * 64;
    let mut mat: Vec<(Vec<u64>, bool)> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let v: Vec<u64> = r.iter().zip(valid).map(|(x, m)| x & m).collect();
            (v, b)
        })
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for col in (0..ncols).filter(|&c| get_bit(valid, c)) {
        let Some(p) = (rank..mat.len()).find(|&r| get_bit(&mat[r].0, col)) else {
            continue;
        };
        mat.swap(rank, p);
        let (prow, pb) = mat[rank].clone();
        for (r, row) in mat.iter_mut().enumerate() {
            if r != rank && get_bit(&row.0, col) {
                xor_into(&mut row.0, &prow);
                row.1 ^= pb;
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if mat[rank..].iter().any(|(_, b)| *b) {
        return None;
    }
    let mut particular = vec![0u64; nw];
    for (r, &c) in pivots.iter().enumerate() {
        if mat[r].1 {
            set_bit(&mut particular, c);
        }
    }
    let mut is_pivot = vec![false; ncols];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let mut basis = Vec::new();
    for f in (0..ncols).filter(|&c| get_bit(valid, c) && !is_pivot[c]) {
        let mut v = vec![0u64; nw];
        set_bit(&mut v, f);
        for (r, &c) in pivots.iter().enumerate() {
            if get_bit(&mat[r].0, f) {
                set_bit(&mut v, c);
            }
        }
        basis.push(v);
    }
    Some(AffineSpace { particular, basis })
}

/// Mask with the low `bits` bits set.
pub(crate) fn prefix_mask(bits: usize) -> Vec<u64> {
    let mut v = vec![u64::MAX; words_for(bits)];
    mask_tail(&mut v, bits);
    v
}

pub(crate) fn mask_tail(v: &mut [u64], bits: usize) {
    let full = bits / 64;
    let rem = bits % 64;
    if rem != 0 && full < v.len() {
        v[full] &= (1u64 << rem) - 1;
        for w in &mut v[full + 1..] {
            *w = 0;
        }
    } else {
        for w in &mut v[full..] {
            *w = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solution_space_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let ncols = rng.gen_range(1..=10);
            let nrows = rng.gen_range(0..=12);
            let rows: Vec<Vec<u64>> = (0..nrows)
                .map(|_| vec![rng.gen::<u64>() & ((1 << ncols) - 1)])
                .collect();
            let x0: u64 = rng.gen::<u64>() & ((1 << ncols) - 1);
            let rhs: Vec<bool> = rows.iter().map(|r| parity_and(r, &[x0])).collect();
            let space = solve(&rows, &rhs, &prefix_mask(ncols)).unwrap();
            let mut seen = Vec::new();
            space.for_each(|x| {
                seen.push(x[0]);
                true
            });
            let mut brute: Vec<u64> = (0..1u64 << ncols)
                .filter(|&x| rows.iter().zip(&rhs).all(|(r, &b)| parity_and(r, &[x]) == b))
                .collect();
            seen.sort_unstable();
            brute.sort_unstable();
            assert_eq!(seen, brute);
        }
    }

    #[test]
    fn inconsistent_system() {
        let rows = vec![vec![1u64], vec![1u64]];
        assert!(solve(&rows, &[true, false], &prefix_mask(1)).is_none());
    }
}
