//! Shannon entropies in bits.

use crate::error::{invalid, Result};
use crate::types::{JointDistribution, Mass, PartySubset};

/// `H(X_subset)` under `dist`, base 2, with `0 log 0 = 0`.
pub fn entropy(dist: &JointDistribution, subset: PartySubset) -> Result<f64> {
    if subset.is_empty() {
        return Ok(0.0);
    }
    Ok(mass_entropy(dist.marginal(subset)?.mass()))
}

/// Entropy of a whole mass vector.
pub fn mass_entropy(mass: &Mass) -> f64 {
    match mass {
        Mass::Real(p) => -p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.log2())
            .sum::<f64>(),
        Mass::Counts { counts, n } => counts_entropy(counts, *n),
    }
}

/// Entropy of the type `counts / n`.
pub fn counts_entropy(counts: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    let s: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let cf = c as f64;
            cf * cf.log2()
        })
        .sum();
    (nf.log2() - s / nf).max(0.0)
}

/// `H(X_target | X_given) = H(X_{target ∪ given}) - H(X_given)`.
///
/// `target ⊆ given` yields 0; any other overlap is rejected.
pub fn conditional_entropy(
    dist: &JointDistribution,
    target: PartySubset,
    given: PartySubset,
) -> Result<f64> {
    if target.is_subset_of(given) {
        return Ok(0.0);
    }
    if !target.is_disjoint(given) {
        return invalid(format!("conditional entropy sets {target} and {given} overlap"));
    }
    let joint = entropy(dist, target.union(given))?;
    let cond = entropy(dist, given)?;
    Ok((joint - cond).max(0.0))
}

/// `h(q) = -q log2 q - (1-q) log2 (1-q)`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return invalid(format!("binary entropy needs q in [0,1], got {q}"));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(q) + term(1.0 - q))
}

/// Entropies of every subset of a ground set, indexed by bitmask.
///
/// Cells for parties outside `ground` are zero.
#[derive(Clone, Debug)]
pub struct EntropyProfile {
    ground: PartySubset,
    values: Vec<f64>,
}

impl EntropyProfile {
    pub fn new(dist: &JointDistribution, ground: PartySubset) -> Result<Self> {
        if !ground.is_subset_of(dist.parties()) {
            return invalid(format!("ground {ground} exceeds {}", dist.parties()));
        }
        let top = (ground.bits() as usize) + 1;
        let mut values = vec![0.0; top];
        for sub in ground.nonempty_subsets() {
            values[sub.bits() as usize] = entropy(dist, sub)?;
        }
        Ok(EntropyProfile { ground, values })
    }

    /// Builds a profile from an entropy oracle evaluated on every nonempty subset.
    pub fn from_fn(ground: PartySubset, mut h: impl FnMut(PartySubset) -> f64) -> Self {
        let top = (ground.bits() as usize) + 1;
        let mut values = vec![0.0; top];
        for sub in ground.nonempty_subsets() {
            values[sub.bits() as usize] = h(sub);
        }
        EntropyProfile { ground, values }
    }

    pub fn ground(&self) -> PartySubset {
        self.ground
    }

    pub fn h(&self, subset: PartySubset) -> f64 {
        debug_assert!(subset.is_subset_of(self.ground));
        self.values[subset.bits() as usize]
    }

    /// `H(X_a | X_b)` for disjoint `a`, `b`.
    pub fn cond(&self, a: PartySubset, b: PartySubset) -> f64 {
        debug_assert!(a.is_disjoint(b));
        (self.h(a.union(b)) - self.h(b)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> PartySubset {
        PartySubset::new(v).unwrap()
    }

    #[test]
    fn uniform_four() {
        let d = JointDistribution::from_probs(set(&[0]), vec![4], vec![0.25; 4]).unwrap();
        assert!((entropy(&d, set(&[0])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_is_zero() {
        let d = JointDistribution::from_probs(set(&[0]), vec![3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(entropy(&d, set(&[0])).unwrap(), 0.0);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let direct = -(0.2f64 * 0.2f64.log2()) - 0.8 * 0.8f64.log2();
        assert!((binary_entropy(0.2).unwrap() - direct).abs() < 1e-15);
        assert!((binary_entropy(0.2).unwrap() - 0.721928).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn overlapping_conditioning_rejected() {
        let d = JointDistribution::from_probs(set(&[0, 1]), vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(conditional_entropy(&d, set(&[0, 1]), set(&[1])).is_err());
        assert_eq!(conditional_entropy(&d, set(&[0, 1]), set(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn counts_match_real() {
        let counts = vec![3u64, 0, 5, 2];
        let dc = JointDistribution::from_counts(set(&[0, 1]), vec![2, 2], counts).unwrap();
        let dr = JointDistribution::from_probs(set(&[0, 1]), vec![2, 2], dc.probs()).unwrap();
        let a = entropy(&dc, set(&[0, 1])).unwrap();
        let b = entropy(&dr, set(&[0, 1])).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
