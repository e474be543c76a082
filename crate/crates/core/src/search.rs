//! Exhaustive search for completions of a partial sequence tuple: rows for
//! the unknown parties that match every received hash and whose joint type
//! with the known rows puts the rates inside `R^Δ_CO(A)`.
//!
//! Unknown parties are fixed one at a time. Each step enumerates either the
//! hash coset of the next party or its conditional type classes below the
//! entropy budget, whichever is smaller, and prunes with every region
//! constraint whose value is already determined by the fixed rows.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gf2::{parity_and, AffineSpace};
use crate::hash::{bits_per_symbol, pack_row, plane_words, row_mask};
use crate::region::FLOAT_TOL;
use crate::types::PartySubset;

/// Hash constraints and search options for one unknown party.
pub(crate) struct Unknown<'a> {
    pub party: usize,
    pub coset: &'a AffineSpace,
    pub hash_rows: &'a [Vec<u64>],
    pub hash_values: &'a [bool],
    /// Candidates equal to this row are skipped.
    pub exclude: Option<&'a [u16]>,
}

pub(crate) struct Query<'a> {
    pub n: usize,
    pub a: PartySubset,
    pub sizes: &'a [usize],
    /// Per-party rates in bits; only members of `a` are read.
    pub rates: &'a [f64],
    pub delta: f64,
    pub known: Vec<(usize, &'a [u16])>,
    pub unknown: Vec<Unknown<'a>>,
    pub max_solutions: usize,
}

/// Rows of the unknown parties, in party order.
pub(crate) type Solution = Vec<(usize, Vec<u16>)>;

/// Search effort counter shared across calls.
pub(crate) struct Budget {
    pub used: u64,
    pub limit: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { used: 0, limit }
    }

    fn charge(&mut self, amount: f64) -> Result<()> {
        let req = self.used as f64 + amount;
        if req > self.limit as f64 {
            return Err(Error::ResourceLimit {
                budget: "decoder search",
                requested: req.min(u128::MAX as f64) as u128,
                limit: self.limit as u128,
            });
        }
        self.used = req as u64;
        Ok(())
    }
}

struct Tables {
    xlogx: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl Tables {
    fn new(n: usize) -> Self {
        let xlogx = (0..=n)
            .map(|k| if k == 0 { 0.0 } else { k as f64 * (k as f64).log2() })
            .collect();
        let mut ln_fact = vec![0.0; n + 1];
        for k in 1..=n {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        Tables { xlogx, ln_fact }
    }
}

/// Fixed rows and the derived position grouping.
struct Node {
    rows: Vec<Option<Vec<u16>>>,
    fmask: u32,
    /// Group of each position: positions sharing the fixed-row symbols.
    group_of: Vec<usize>,
    group_sizes: Vec<usize>,
    group_masks: Vec<Vec<u64>>,
    /// Joint symbols of the fixed parties for each group, in `a`'s order.
    group_symbols: Vec<Vec<u16>>,
    /// Entropy of every subset of the fixed set, by local mask.
    h: Vec<f64>,
}

struct Ctx<'a, 'q> {
    q: &'q Query<'a>,
    members: Vec<usize>,
    /// `R_T − |T|Δ` by local mask.
    slack: Vec<f64>,
    tables: Tables,
    pw: usize,
}

impl<'a, 'q> Ctx<'a, 'q> {
    fn local(&self, party: usize) -> usize {
        self.members.iter().position(|&p| p == party).unwrap()
    }

    fn full_local(&self) -> u32 {
        (1u32 << self.members.len()) - 1
    }

    fn entropy_of_counts(&self, counts: impl Iterator<Item = usize>) -> f64 {
        let n = self.q.n;
        let mut s = 0.0;
        for c in counts {
            s += self.tables.xlogx[c];
        }
        (self.tables.xlogx[n] - s) / n as f64
    }

    fn build_node(&self, rows: Vec<Option<Vec<u16>>>, fmask: u32, h_prev: Option<(&[f64], usize)>) -> Node {
        let n = self.q.n;
        let fixed: Vec<usize> = (0..self.members.len()).filter(|b| fmask & (1 << b) != 0).collect();
        let mut index: HashMap<Vec<u16>, usize> = HashMap::new();
        let mut group_of = vec![0usize; n];
        let mut group_symbols: Vec<Vec<u16>> = Vec::new();
        let mut group_sizes: Vec<usize> = Vec::new();
        for t in 0..n {
            let key: Vec<u16> = fixed
                .iter()
                .map(|&b| rows[self.members[b]].as_ref().unwrap()[t])
                .collect();
            let g = *index.entry(key.clone()).or_insert_with(|| {
                group_symbols.push(key);
                group_sizes.push(0);
                group_sizes.len() - 1
            });
            group_of[t] = g;
            group_sizes[g] += 1;
        }
        let mut group_masks = vec![vec![0u64; self.pw]; group_sizes.len()];
        for t in 0..n {
            group_masks[group_of[t]][t / 64] |= 1 << (t % 64);
        }
        let mut h = vec![f64::NAN; 1 << self.members.len()];
        h[0] = 0.0;
        if let Some((prev, _)) = h_prev {
            for (m, v) in prev.iter().enumerate() {
                if !v.is_nan() {
                    h[m] = *v;
                }
            }
        }
        // fill any missing subset entropies directly from the rows
        for sub in 1..=fmask {
            if sub & !fmask != 0 || !h[sub as usize].is_nan() {
                continue;
            }
            let cols: Vec<usize> = (0..self.members.len()).filter(|b| sub & (1 << b) != 0).collect();
            let mut cnt: HashMap<Vec<u16>, usize> = HashMap::new();
            for t in 0..n {
                let key: Vec<u16> = cols
                    .iter()
                    .map(|&b| rows[self.members[b]].as_ref().unwrap()[t])
                    .collect();
                *cnt.entry(key).or_insert(0) += 1;
            }
            h[sub as usize] = self.entropy_of_counts(cnt.into_values());
        }
        Node {
            rows,
            fmask,
            group_of,
            group_sizes,
            group_masks,
            group_symbols,
            h,
        }
    }
}

pub(crate) fn search(query: &Query, budget: &mut Budget) -> Result<Vec<Solution>> {
    let members = query.a.members();
    let k = members.len();
    let mut slack = vec![0.0; 1 << k];
    for (mask, v) in slack.iter_mut().enumerate() {
        let mut r = 0.0;
        let mut c = 0usize;
        for (b, &p) in members.iter().enumerate() {
            if mask & (1 << b) != 0 {
                r += query.rates[p];
                c += 1;
            }
        }
        *v = r - c as f64 * query.delta;
    }
    let ctx = Ctx {
        q: query,
        members,
        slack,
        tables: Tables::new(query.n),
        pw: plane_words(query.n),
    };
    // rate-only constraints: H(X_T|X_{A∖T}) ≥ 0 requires nonnegative slack
    let full = ctx.full_local();
    for t in 1..full {
        if ctx.slack[t as usize] < -FLOAT_TOL {
            return Ok(Vec::new());
        }
    }
    let mut rows: Vec<Option<Vec<u16>>> = vec![None; query.sizes.len()];
    let mut fmask = 0u32;
    for &(p, r) in &query.known {
        rows[p] = Some(r.to_vec());
        fmask |= 1 << ctx.local(p);
    }
    let node = ctx.build_node(rows, fmask, None);
    if node.fmask == full {
        return Ok(if region_holds(&ctx, &node.h) {
            vec![Vec::new()]
        } else {
            Vec::new()
        });
    }
    // constraints already determined by the known rows
    if !prune_ok(&ctx, &node.h, node.fmask) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let remaining: Vec<usize> = (0..query.unknown.len()).collect();
    descend(&ctx, &node, &remaining, budget, &mut out)?;
    Ok(out)
}

fn region_holds(ctx: &Ctx, h: &[f64]) -> bool {
    prune_ok(ctx, h, ctx.full_local())
}

/// Every constraint `T ⊇ A∖F` is determined once `F` is fixed:
/// `H(X_T|X_{A∖T}) = H(X_A) − H(X_{A∖T}) ≥ H(X_F) − H(X_{A∖T})`.
fn prune_ok(ctx: &Ctx, h: &[f64], fmask: u32) -> bool {
    let full = ctx.full_local();
    let hf = h[fmask as usize];
    let mut g = fmask;
    while g != 0 {
        if g != full {
            let t = full & !g;
            if ctx.slack[t as usize] + FLOAT_TOL < hf - h[g as usize] {
                return false;
            }
        }
        g = (g - 1) & fmask;
    }
    true
}

fn descend(
    ctx: &Ctx,
    node: &Node,
    remaining: &[usize],
    budget: &mut Budget,
    out: &mut Vec<Solution>,
) -> Result<()> {
    let full = ctx.full_local();
    let bound = ctx.slack[(full & !node.fmask) as usize];
    let nb = bound.max(0.0) * ctx.q.n as f64 + FLOAT_TOL * ctx.q.n as f64;

    // pick the unknown with the fewest candidates
    let mut best: Option<(usize, f64, bool)> = None;
    for (pos, &u) in remaining.iter().enumerate() {
        let unk = &ctx.q.unknown[u];
        let coset = if unk.coset.dim() >= 63 {
            f64::INFINITY
        } else {
            (1u64 << unk.coset.dim()) as f64
        };
        let qsz = ctx.q.sizes[unk.party];
        let cap = coset.min(best.map_or(f64::INFINITY, |b| b.1));
        let typed = type_side_count(ctx, node, qsz, nb, cap);
        let (cost, use_coset) = if coset <= typed { (coset, true) } else { (typed, false) };
        if best.map_or(true, |b| cost < b.1) {
            best = Some((pos, cost, use_coset));
        }
    }
    let (pos, cost, use_coset) = best.expect("nonempty remaining");
    if !cost.is_finite() {
        return Err(Error::ResourceLimit {
            budget: "decoder search",
            requested: u128::MAX,
            limit: budget.limit as u128,
        });
    }
    budget.charge(cost)?;
    let u = remaining[pos];
    let rest: Vec<usize> = remaining.iter().copied().filter(|&r| r != u).collect();
    let unk = &ctx.q.unknown[u];
    let party = unk.party;
    let qsz = ctx.q.sizes[party];
    let w = bits_per_symbol(qsz);
    let valid = row_mask(ctx.q.n, qsz);
    let exclude = unk.exclude.map(|r| pack_row(r, qsz));
    let li = ctx.local(party);
    let new_mask = node.fmask | (1 << li);

    let mut err: Option<Error> = None;
    let mut visit = |packed: &[u64]| -> bool {
        if let Some(ex) = &exclude {
            if ex.as_slice() == packed {
                return true;
            }
        }
        let Some(counts) = symbol_counts(ctx, node, packed, qsz, w, &valid) else {
            return true;
        };
        let Some(h) = extend_entropies(ctx, node, &counts, qsz, li, bound) else {
            return true;
        };
        if !prune_ok(ctx, &h, new_mask) {
            return true;
        }
        let row = unpack(packed, ctx.q.n, w, ctx.pw);
        if new_mask == full {
            let mut sol: Solution = Vec::new();
            for unk in &ctx.q.unknown {
                if unk.party == party {
                    sol.push((party, row.clone()));
                } else {
                    sol.push((unk.party, node.rows[unk.party].clone().unwrap()));
                }
            }
            sol.sort_by_key(|(p, _)| *p);
            out.push(sol);
            return out.len() < ctx.q.max_solutions;
        }
        let mut rows = node.rows.clone();
        rows[party] = Some(row);
        let child = ctx.build_node(rows, new_mask, Some((&h, new_mask as usize)));
        if let Err(e) = descend(ctx, &child, &rest, budget, out) {
            err = Some(e);
            return false;
        }
        out.len() < ctx.q.max_solutions
    };

    if use_coset {
        unk.coset.for_each(|x| visit(x));
    } else {
        for_each_type_side(ctx, node, qsz, nb, &mut |row: &[u16]| {
            let packed = pack_row(row, qsz);
            if unk
                .hash_rows
                .iter()
                .zip(unk.hash_values)
                .any(|(r, &v)| parity_and(r, &packed) != v)
            {
                return true;
            }
            visit(&packed)
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// `counts[g·q + s]`, or `None` if the packed row holds an invalid symbol.
fn symbol_counts(
    ctx: &Ctx,
    node: &Node,
    packed: &[u64],
    q: usize,
    w: usize,
    valid: &[u64],
) -> Option<Vec<usize>> {
    let pw = ctx.pw;
    let ng = node.group_sizes.len();
    let mut counts = vec![0usize; ng * q];
    if w == 0 {
        for g in 0..ng {
            counts[g * q] = node.group_sizes[g];
        }
        return Some(counts);
    }
    let mut sym = vec![0u64; pw];
    for s in 0..(1usize << w) {
        for (i, word) in sym.iter_mut().enumerate() {
            let mut m = valid[i];
            for b in 0..w {
                let plane = packed[b * pw + i];
                m &= if (s >> b) & 1 == 1 { plane } else { !plane };
            }
            *word = m;
        }
        if s >= q {
            if sym.iter().any(|&x| x != 0) {
                return None;
            }
            continue;
        }
        for g in 0..ng {
            let c: u32 = node.group_masks[g]
                .iter()
                .zip(&sym)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            counts[g * q + s] = c as usize;
        }
    }
    Some(counts)
}

/// Entropies of every subset of `F ∪ {i}` containing `i`, or `None` if the
/// conditional entropy exceeds `bound`.
fn extend_entropies(
    ctx: &Ctx,
    node: &Node,
    counts: &[usize],
    q: usize,
    li: usize,
    bound: f64,
) -> Option<Vec<f64>> {
    let n = ctx.q.n as f64;
    let x = &ctx.tables.xlogx;
    let ng = node.group_sizes.len();
    let mut cost = 0.0;
    for g in 0..ng {
        cost += x[node.group_sizes[g]];
        for s in 0..q {
            cost -= x[counts[g * q + s]];
        }
    }
    let hcond = cost / n;
    if hcond > bound + FLOAT_TOL {
        return None;
    }
    let mut h = node.h.clone();
    let fmask = node.fmask;
    let ibit = 1u32 << li;
    h[(fmask | ibit) as usize] = node.h[fmask as usize] + hcond;
    let fixed: Vec<usize> = (0..ctx.members.len()).filter(|b| fmask & (1 << b) != 0).collect();
    // proper subsets G0 ⊊ F: H(X_{G0 ∪ i}) by aggregating counts
    let mut g0 = fmask;
    loop {
        g0 = (g0.wrapping_sub(1)) & fmask;
        if g0 == fmask {
            break;
        }
        let sel: Vec<usize> = fixed
            .iter()
            .enumerate()
            .filter(|(_, &b)| g0 & (1 << b) != 0)
            .map(|(k, _)| k)
            .collect();
        let mut agg: HashMap<(Vec<u16>, usize), usize> = HashMap::new();
        for g in 0..ng {
            let key: Vec<u16> = sel.iter().map(|&k| node.group_symbols[g][k]).collect();
            for s in 0..q {
                let c = counts[g * q + s];
                if c > 0 {
                    *agg.entry((key.clone(), s)).or_insert(0) += c;
                }
            }
        }
        let mut s = 0.0;
        for c in agg.values() {
            s += x[*c];
        }
        h[(g0 | ibit) as usize] = (x[ctx.q.n] - s) / n;
        if g0 == 0 {
            break;
        }
    }
    Some(h)
}

fn unpack(packed: &[u64], n: usize, w: usize, pw: usize) -> Vec<u16> {
    (0..n)
        .map(|t| {
            let mut s = 0u16;
            for b in 0..w {
                if (packed[b * pw + t / 64] >> (t % 64)) & 1 == 1 {
                    s |= 1 << b;
                }
            }
            s
        })
        .collect()
}

/// Minimal completion cost of a partial composition: the rest in one symbol.
fn partial_cost(x: &[f64], total: usize, assigned: &[usize], rem: usize) -> f64 {
    x[total] - assigned.iter().map(|&k| x[k]).sum::<f64>() - x[rem]
}

/// Number of rows whose conditional type given the groups costs at most
/// `nb` bits in total; stops once the count exceeds `cap`.
fn type_side_count(ctx: &Ctx, node: &Node, q: usize, nb: f64, cap: f64) -> f64 {
    let mut total = 0.0;
    let mut comp: Vec<Vec<usize>> = vec![Vec::new(); node.group_sizes.len()];
    count_groups(ctx, node, q, nb, cap, 0, 0.0, 0.0, &mut comp, &mut total);
    total
}

#[allow(clippy::too_many_arguments)]
fn count_groups(
    ctx: &Ctx,
    node: &Node,
    q: usize,
    nb: f64,
    cap: f64,
    g: usize,
    spent: f64,
    ln_mult: f64,
    comp: &mut Vec<Vec<usize>>,
    total: &mut f64,
) {
    if *total > cap {
        return;
    }
    if g == node.group_sizes.len() {
        *total += ln_mult.exp();
        return;
    }
    let ng = node.group_sizes[g];
    let mut cur = Vec::with_capacity(q);
    compositions(&ctx.tables.xlogx, ng, q, nb - spent, &mut cur, &mut |c, cost| {
        let lm = ctx.tables.ln_fact[ng] - c.iter().map(|&k| ctx.tables.ln_fact[k]).sum::<f64>();
        comp[g] = c.to_vec();
        count_groups(ctx, node, q, nb, cap, g + 1, spent + cost, ln_mult + lm, comp, total);
        *total <= cap
    });
}

/// Weak compositions of `total` into `q` parts with cost `xlogx(total) − Σ xlogx(k)` ≤ `limit`.
fn compositions(
    x: &[f64],
    total: usize,
    q: usize,
    limit: f64,
    cur: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize], f64) -> bool,
) -> bool {
    let assigned: usize = cur.iter().sum();
    let rem = total - assigned;
    if cur.len() + 1 == q {
        cur.push(rem);
        let cost = x[total] - cur.iter().map(|&k| x[k]).sum::<f64>();
        let go = if cost <= limit + 1e-9 { f(cur, cost) } else { true };
        cur.pop();
        return go;
    }
    if q == 1 {
        return f(&[total], 0.0);
    }
    for k in 0..=rem {
        cur.push(k);
        let lb = partial_cost(x, total, cur, rem - k);
        let go = if lb <= limit + 1e-9 {
            compositions(x, total, q, limit, cur, f)
        } else {
            true
        };
        cur.pop();
        if !go {
            return false;
        }
    }
    true
}

/// Visits every row whose conditional type given the groups costs at most `nb` bits.
fn for_each_type_side(ctx: &Ctx, node: &Node, q: usize, nb: f64, f: &mut dyn FnMut(&[u16]) -> bool) {
    let n = ctx.q.n;
    let positions: Vec<Vec<usize>> = {
        let mut p = vec![Vec::new(); node.group_sizes.len()];
        for t in 0..n {
            p[node.group_of[t]].push(t);
        }
        p
    };
    let mut row = vec![0u16; n];
    let mut comps: Vec<Vec<usize>> = vec![Vec::new(); positions.len()];
    type_groups(ctx, &positions, q, nb, 0, 0.0, &mut comps, &mut row, f);
}

#[allow(clippy::too_many_arguments)]
fn type_groups(
    ctx: &Ctx,
    positions: &[Vec<usize>],
    q: usize,
    nb: f64,
    g: usize,
    spent: f64,
    comps: &mut Vec<Vec<usize>>,
    row: &mut Vec<u16>,
    f: &mut dyn FnMut(&[u16]) -> bool,
) -> bool {
    if g == positions.len() {
        return arrange(positions, comps, 0, row, f);
    }
    let ng = positions[g].len();
    let mut cur = Vec::with_capacity(q);
    compositions(&ctx.tables.xlogx, ng, q, nb - spent, &mut cur, &mut |c, cost| {
        comps[g] = c.to_vec();
        type_groups(ctx, positions, q, nb, g + 1, spent + cost, comps, row, f)
    })
}

/// Every placement of the chosen symbol counts within each group, depth-first.
fn arrange(
    positions: &[Vec<usize>],
    comps: &[Vec<usize>],
    g: usize,
    row: &mut Vec<u16>,
    f: &mut dyn FnMut(&[u16]) -> bool,
) -> bool {
    if g == positions.len() {
        return f(row);
    }
    let mut left = comps[g].clone();
    place(&positions[g], 0, &mut left, row, &mut |row| arrange(positions, comps, g + 1, row, f))
}

fn place(
    pos: &[usize],
    idx: usize,
    left: &mut [usize],
    row: &mut Vec<u16>,
    f: &mut dyn FnMut(&mut Vec<u16>) -> bool,
) -> bool {
    if idx == pos.len() {
        return f(row);
    }
    for s in 0..left.len() {
        if left[s] > 0 {
            left[s] -= 1;
            row[pos[idx]] = s as u16;
            let go = place(pos, idx + 1, left, row, f);
            left[s] += 1;
            if !go {
                return false;
            }
        }
    }
    true
}
