//! Test-side oracles that avoid the library's entropy and region code.
#![allow(dead_code)]

use rde_core::types::{JointDistribution, PartySubset};

/// A pmf over `sizes.len()` parties, cells in row-major order with party 0 most significant.
#[derive(Clone, Debug)]
pub struct Pmf {
    pub sizes: Vec<usize>,
    pub p: Vec<f64>,
}

impl Pmf {
    pub fn from_fn(sizes: Vec<usize>, f: impl Fn(&[usize]) -> f64) -> Pmf {
        let cells: usize = sizes.iter().product();
        let p: Vec<f64> = (0..cells).map(|c| f(&decode(&sizes, c))).collect();
        let total: f64 = p.iter().sum();
        Pmf { sizes, p: p.into_iter().map(|x| x / total).collect() }
    }

    pub fn from_joint(d: &JointDistribution) -> Pmf {
        Pmf { sizes: d.sizes().to_vec(), p: d.probs() }
    }

    pub fn to_joint(&self) -> JointDistribution {
        JointDistribution::from_probs(PartySubset::full(self.sizes.len()), self.sizes.clone(), self.p.clone())
            .unwrap()
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    /// `H(X_S)` in bits for the party set `mask`.
    pub fn h(&self, mask: u32) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        let mut acc = std::collections::HashMap::<Vec<usize>, f64>::new();
        for (c, &p) in self.p.iter().enumerate() {
            let x = decode(&self.sizes, c);
            let key: Vec<usize> = (0..self.m()).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).collect();
            *acc.entry(key).or_default() += p;
        }
        acc.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    pub fn full(&self) -> u32 {
        (1 << self.m()) - 1
    }

    /// `ℍ_σ` over the full set.
    pub fn h_sigma(&self, parts: &[u32]) -> f64 {
        let t = self.h(self.full());
        parts.iter().map(|&c| t - self.h(c)).sum::<f64>() / (parts.len() as f64 - 1.0)
    }

    /// Max of `ℍ_σ` over every partition with at least two parts.
    pub fn rco(&self) -> f64 {
        set_partitions(self.m())
            .into_iter()
            .filter(|s| s.len() >= 2)
            .map(|s| self.h_sigma(&s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn r_star(&self) -> Vec<f64> {
        let singles: Vec<u32> = (0..self.m()).map(|i| 1 << i).collect();
        let hf = self.h_sigma(&singles);
        let t = self.h(self.full());
        (0..self.m()).map(|i| hf - (t - self.h(1 << i))).collect()
    }
}

fn decode(sizes: &[usize], mut c: usize) -> Vec<usize> {
    let mut x = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        x[k] = c % sizes[k];
        c /= sizes[k];
    }
    x
}

/// All set partitions of `0..m` as bit masks.
pub fn set_partitions(m: usize) -> Vec<Vec<u32>> {
    fn go(i: usize, m: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == m {
            out.push(cur.clone());
            return;
        }
        for k in 0..cur.len() {
            cur[k] |= 1 << i;
            go(i + 1, m, cur, out);
            cur[k] &= !(1 << i);
        }
        cur.push(1 << i);
        go(i + 1, m, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    go(0, m, &mut Vec::new(), &mut out);
    out
}

pub fn h2(q: f64) -> f64 {
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

fn ber(q: f64, v: usize) -> f64 {
    if v == 1 {
        q
    } else {
        1.0 - q
    }
}

/// Hand-built versions of the built-in sources.
pub fn example(name: &str, q: f64) -> Pmf {
    let mut acc: std::collections::HashMap<Vec<usize>, f64> = Default::default();
    let sizes;
    match name {
        "ex1" => {
            sizes = vec![2, 2, 2];
            for w in 0..2 {
                for v in 0..2 {
                    *acc.entry(vec![w, w ^ v, v]).or_default() += 0.5 * ber(q, v);
                }
            }
        }
        "ex2" | "ex3" => {
            let extra = name == "ex3";
            sizes = if extra { vec![4, 4, 2, 2] } else { vec![4, 4, 2] };
            for w1 in 0..2 {
                for w2 in 0..2 {
                    for v1 in 0..2 {
                        for v2 in 0..2 {
                            for w3 in 0..(1 + extra as usize) {
                                let mut x = vec![w1 * 2 + w2, (w1 ^ v1) * 2 + w2, w2 ^ v2];
                                let mut p = 0.25 * ber(q, v1) * ber(q, v2);
                                if extra {
                                    x.push(w3);
                                    p *= 0.5;
                                }
                                *acc.entry(x).or_default() += p;
                            }
                        }
                    }
                }
            }
        }
        _ => panic!("no oracle for {name}"),
    }
    let acc = acc;
    Pmf::from_fn(sizes, move |x| acc.get(x).copied().unwrap_or(0.0))
}
