//! Declarative sources: explicit pmf tables or base variables pushed
//! through deterministic maps, compiled to a [`JointDistribution`].
//!
//! Scenario files are TOML. A construction lists independent base
//! variables and, per party, a tuple of components; each component is
//! either a modular sum of bases or a lookup table over bases.
//!
//! ```toml
//! name = "xor"
//! [[base]]
//! name = "W"
//! bernoulli = 0.5
//! [[base]]
//! name = "V"
//! bernoulli = 0.2
//! [[party]]
//! components = [{ sum = ["W"] }]
//! [[party]]
//! components = [{ sum = ["W", "V"] }]
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{JointDistribution, PartySubset};

/// A probability written as a number or as an `a/b` fraction string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Num(f64),
    Text(String),
}

impl Weight {
    pub fn value(&self) -> Result<f64> {
        match self {
            Weight::Num(v) => Ok(*v),
            Weight::Text(s) => parse_fraction(s),
        }
    }
}

fn parse_fraction(s: &str) -> Result<f64> {
    let bad = || Error::Scenario(format!("cannot parse weight {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseVar {
    pub name: String,
    /// Alphabet size; implied by `pmf` or `bernoulli` when omitted.
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub pmf: Option<Vec<Weight>>,
    /// Shorthand for a binary pmf `(1-p, p)`.
    #[serde(default)]
    pub bernoulli: Option<f64>,
}

impl BaseVar {
    fn pmf(&self) -> Result<Vec<f64>> {
        let p = match (&self.pmf, self.bernoulli) {
            (Some(w), None) => w.iter().map(Weight::value).collect::<Result<Vec<_>>>()?,
            (None, Some(b)) => {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::Scenario(format!("{}: bernoulli outside [0,1]", self.name)));
                }
                vec![1.0 - b, b]
            }
            (None, None) => {
                let k = self.size.ok_or_else(|| {
                    Error::Scenario(format!("{}: give size, pmf or bernoulli", self.name))
                })?;
                vec![1.0 / k as f64; k]
            }
            (Some(_), Some(_)) => {
                return Err(Error::Scenario(format!(
                    "{}: pmf and bernoulli are exclusive",
                    self.name
                )))
            }
        };
        if let Some(k) = self.size {
            if k != p.len() {
                return Err(Error::Scenario(format!("{}: size disagrees with pmf", self.name)));
            }
        }
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Scenario(format!("{}: invalid pmf", self.name)));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Scenario(format!("{}: pmf sums to {total}", self.name)));
        }
        Ok(p.iter().map(|v| v / total).collect())
    }
}

/// One coordinate of a party's observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Component {
    /// Sum modulo the common alphabet size of the listed bases.
    Sum { sum: Vec<String> },
    /// `values[mixed-radix index of inputs]`, with output alphabet `size`.
    Lookup {
        inputs: Vec<String>,
        values: Vec<u16>,
        size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyMap {
    pub components: Vec<Component>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub symbols: Vec<u16>,
    pub p: Weight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    pub sizes: Vec<usize>,
    pub cells: Vec<TableCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub table: Option<PmfTable>,
    #[serde(default, rename = "base")]
    pub bases: Vec<BaseVar>,
    #[serde(default, rename = "party")]
    pub parties: Vec<PartyMap>,
    /// Default block length for runs of this scenario.
    #[serde(default)]
    pub n: Option<usize>,
    /// Default master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Names accepted by [`Scenario::builtin`].
pub const BUILTINS: &[&str] = &["ex1", "ex2", "ex3", "twin", "independent"];

/// Default crossover probability of the built-in examples.
pub const DEFAULT_Q: f64 = 0.2;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::from_toml(&text)
    }

    /// A built-in name, with an optional `:q` suffix (`ex2:0.1`), or a file path.
    pub fn resolve(arg: &str) -> Result<Scenario> {
        let (name, q) = match arg.split_once(':') {
            Some((n, q)) => (
                n,
                Some(q.parse::<f64>().map_err(|_| {
                    Error::Scenario(format!("bad parameter in {arg:?}"))
                })?),
            ),
            None => (arg, None),
        };
        if BUILTINS.contains(&name) {
            Scenario::builtin(name, q.unwrap_or(DEFAULT_Q))
        } else {
            Scenario::from_file(Path::new(arg))
        }
    }

    /// `ex1`: `X1 ~ Ber(1/2)`, `X3 ~ Ber(q)`, `X2 = X1 ⊕ X3`.
    ///
    /// `ex2`: `X1 = (W1, W2)`, `X2 = (W1 ⊕ V1, W2)`, `X3 = W2 ⊕ V2` with
    /// uniform `W`s and `Ber(q)` `V`s. `ex3`: `ex2` plus `X4 = W3` uniform.
    ///
    /// `twin`: two copies of one uniform bit. `independent`: three
    /// independent uniform bits.
    pub fn builtin(name: &str, q: f64) -> Result<Scenario> {
        let uni = |n: &str| BaseVar {
            name: n.into(),
            size: None,
            pmf: None,
            bernoulli: Some(0.5),
        };
        let ber = |n: &str| BaseVar {
            name: n.into(),
            size: None,
            pmf: None,
            bernoulli: Some(q),
        };
        let sum = |v: &[&str]| Component::Sum {
            sum: v.iter().map(|s| s.to_string()).collect(),
        };
        let party = |c: Vec<Component>| PartyMap { components: c };
        let (bases, parties) = match name {
            "ex1" => (
                vec![uni("W"), ber("V")],
                vec![
                    party(vec![sum(&["W"])]),
                    party(vec![sum(&["W", "V"])]),
                    party(vec![sum(&["V"])]),
                ],
            ),
            "ex2" | "ex3" => {
                let mut bases = vec![uni("W1"), uni("W2"), ber("V1"), ber("V2")];
                let mut parties = vec![
                    party(vec![sum(&["W1"]), sum(&["W2"])]),
                    party(vec![sum(&["W1", "V1"]), sum(&["W2"])]),
                    party(vec![sum(&["W2", "V2"])]),
                ];
                if name == "ex3" {
                    bases.push(uni("W3"));
                    parties.push(party(vec![sum(&["W3"])]));
                }
                (bases, parties)
            }
            "twin" => (
                vec![uni("W")],
                vec![party(vec![sum(&["W"])]), party(vec![sum(&["W"])])],
            ),
            "independent" => (
                vec![uni("A"), uni("B"), uni("C")],
                vec![
                    party(vec![sum(&["A"])]),
                    party(vec![sum(&["B"])]),
                    party(vec![sum(&["C"])]),
                ],
            ),
            other => return Err(Error::Scenario(format!("unknown built-in {other:?}"))),
        };
        Ok(Scenario {
            name: if name.starts_with("ex") && q != DEFAULT_Q {
                format!("{name}:{q}")
            } else {
                name.to_string()
            },
            table: None,
            bases,
            parties,
            n: None,
            seed: None,
        })
    }

    /// Compiles the source to a normalized pmf over parties `0..m`.
    pub fn distribution(&self) -> Result<JointDistribution> {
        match (&self.table, self.parties.is_empty()) {
            (Some(t), true) => compile_table(t),
            (None, false) => compile_construction(&self.bases, &self.parties),
            _ => Err(Error::Scenario(
                "give exactly one of a pmf table or a base-variable construction".into(),
            )),
        }
    }
}

fn compile_table(t: &PmfTable) -> Result<JointDistribution> {
    let m = t.sizes.len();
    let cells: usize = t.sizes.iter().product();
    let mut w = vec![0.0; cells];
    for c in &t.cells {
        if c.symbols.len() != m {
            return Err(Error::Scenario("table cell has the wrong arity".into()));
        }
        let mut idx = 0usize;
        for (s, &z) in c.symbols.iter().zip(&t.sizes) {
            if *s as usize >= z {
                return Err(Error::Scenario(format!("symbol {s} outside alphabet {z}")));
            }
            idx = idx * z + *s as usize;
        }
        w[idx] += c.p.value()?;
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Scenario(format!("table sums to {total}")));
    }
    JointDistribution::from_weights(PartySubset::full(m), t.sizes.clone(), w)
}

fn compile_construction(bases: &[BaseVar], parties: &[PartyMap]) -> Result<JointDistribution> {
    let index: HashMap<&str, usize> = bases
        .iter()
        .enumerate()
        .map(|(k, b)| (b.name.as_str(), k))
        .collect();
    if index.len() != bases.len() {
        return Err(Error::Scenario("duplicate base variable names".into()));
    }
    let pmfs: Vec<Vec<f64>> = bases.iter().map(BaseVar::pmf).collect::<Result<_>>()?;
    let bsizes: Vec<usize> = pmfs.iter().map(Vec::len).collect();
    let lookup = |n: &str| {
        index
            .get(n)
            .copied()
            .ok_or_else(|| Error::Scenario(format!("unknown base variable {n:?}")))
    };

    // component alphabet sizes and party alphabet sizes
    let mut comp_sizes: Vec<Vec<usize>> = Vec::new();
    for p in parties {
        if p.components.is_empty() {
            return Err(Error::Scenario("a party needs at least one component".into()));
        }
        let mut sizes = Vec::new();
        for c in &p.components {
            match c {
                Component::Sum { sum } => {
                    let ks: Vec<usize> = sum
                        .iter()
                        .map(|n| lookup(n).map(|k| bsizes[k]))
                        .collect::<Result<_>>()?;
                    if ks.is_empty() || ks.iter().any(|&k| k != ks[0]) {
                        return Err(Error::Scenario(
                            "a sum component needs bases of one common size".into(),
                        ));
                    }
                    sizes.push(ks[0]);
                }
                Component::Lookup {
                    inputs,
                    values,
                    size,
                } => {
                    let span: usize = inputs
                        .iter()
                        .map(|n| lookup(n).map(|k| bsizes[k]))
                        .product::<Result<usize>>()?;
                    if values.len() != span || values.iter().any(|&v| v as usize >= *size) {
                        return Err(Error::Scenario("lookup table shape mismatch".into()));
                    }
                    sizes.push(*size);
                }
            }
        }
        comp_sizes.push(sizes);
    }
    let psizes: Vec<usize> = comp_sizes.iter().map(|s| s.iter().product()).collect();
    let cells: usize = psizes.iter().product();
    let base_cells: usize = bsizes.iter().product();
    if base_cells > 1 << 22 {
        return Err(Error::ResourceLimit {
            budget: "base-variable product alphabet",
            requested: base_cells as u128,
            limit: 1 << 22,
        });
    }
    let mut w = vec![0.0; cells];
    let mut digits = vec![0usize; bases.len()];
    for bc in 0..base_cells {
        let mut rem = bc;
        let mut p = 1.0;
        for k in (0..bases.len()).rev() {
            digits[k] = rem % bsizes[k];
            rem /= bsizes[k];
            p *= pmfs[k][digits[k]];
        }
        if p == 0.0 {
            continue;
        }
        let mut cell = 0usize;
        for (party, sizes) in parties.iter().zip(&comp_sizes) {
            let mut sym = 0usize;
            for (c, &z) in party.components.iter().zip(sizes) {
                let v = match c {
                    Component::Sum { sum } => {
                        sum.iter().map(|n| digits[index[n.as_str()]]).sum::<usize>() % z
                    }
                    Component::Lookup { inputs, values, .. } => {
                        let i = inputs.iter().fold(0usize, |acc, n| {
                            let k = index[n.as_str()];
                            acc * bsizes[k] + digits[k]
                        });
                        values[i] as usize
                    }
                };
                sym = sym * z + v;
            }
            let party_size: usize = sizes.iter().product();
            cell = cell * party_size + sym;
        }
        w[cell] += p;
    }
    JointDistribution::from_weights(PartySubset::full(parties.len()), psizes, w)
}
