//! Merge candidates with cached local deltas.
//!
//! A merge delta splits into a per-variable global term (partition choice
//! and cell-distribution prior, which depend only on J_k and G) and a local
//! term that depends on the two parts alone. The local terms are cached per
//! pair. Merging two parts of one variable changes the local terms of every
//! other variable only through the cells of those two parts, so those are
//! patched in place rather than recomputed.

use rustc_hash::FxHashMap;

use super::work::{WorkGrid, NONE};
use crate::cost::{merge_local, pool_gain, prior_part_loss, GridView};
use crate::dataset::VariableKind;
use crate::grid::CellKey;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Candidate {
    pub var: usize,
    /// Surviving part (the lower id).
    pub a: u32,
    pub b: u32,
    pub delta: f64,
}

pub(crate) struct MergeEngine {
    frozen: Vec<bool>,
    /// Row-major `cap × cap` table per variable; only `[a][b]` with `a < b`
    /// is meaningful.
    local: Vec<Vec<f64>>,
    cap: Vec<usize>,
}

impl MergeEngine {
    pub fn new(g: &WorkGrid, frozen: &[bool]) -> Self {
        let k = g.n_variables();
        let mut eng = MergeEngine {
            frozen: frozen.to_vec(),
            local: Vec::with_capacity(k),
            cap: (0..k).map(|v| g.capacity(v)).collect(),
        };
        for var in 0..k {
            let cap = eng.cap[var];
            if eng.frozen[var] {
                eng.local.push(Vec::new());
                continue;
            }
            let mut table = vec![0.0; cap * cap];
            match g.kind(var) {
                VariableKind::Numerical => {
                    let mut p = g.first(var);
                    while p != NONE {
                        let q = g.next(var, p);
                        if q != NONE {
                            table[p as usize * cap + q as usize] = merge_local(g, var, p, q);
                        }
                        p = q;
                    }
                }
                VariableKind::Categorical => fill_categorical(g, var, &mut table, cap),
            }
            eng.local.push(table);
        }
        eng
    }

    #[inline]
    fn slot(&self, var: usize, a: u32, b: u32) -> usize {
        debug_assert!(a < b);
        a as usize * self.cap[var] + b as usize
    }

    /// Cheapest legal merge by cached deltas. Ties go to the lowest
    /// (variable, a, b).
    fn scan(&self, g: &WorkGrid) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for var in 0..g.n_variables() {
            if self.frozen[var] || g.n_parts(var) < 2 {
                continue;
            }
            let global = prior_part_loss(g, var);
            let mut consider = |a: u32, b: u32| {
                let delta = global + self.local[var][self.slot(var, a, b)];
                if best.is_none_or(|c| delta < c.delta) {
                    best = Some(Candidate { var, a, b, delta });
                }
            };
            match g.kind(var) {
                VariableKind::Numerical => {
                    // ids of live intervals increase along the chain
                    let mut p = g.first(var);
                    while p != NONE {
                        let q = g.next(var, p);
                        if q != NONE {
                            consider(p, q);
                        }
                        p = q;
                    }
                }
                VariableKind::Categorical => {
                    let live = g.live_parts(var);
                    for (i, &a) in live.iter().enumerate() {
                        for &b in &live[i + 1..] {
                            consider(a, b);
                        }
                    }
                }
            }
        }
        best
    }

    /// The cheapest merge, with its cached delta confirmed against a direct
    /// evaluation. A stale entry is corrected and the scan repeated.
    pub fn select(&mut self, g: &WorkGrid) -> Option<Candidate> {
        loop {
            let mut c = self.scan(g)?;
            let cached = self.local[c.var][self.slot(c.var, c.a, c.b)];
            let exact = merge_local(g, c.var, c.a, c.b);
            if (exact - cached).abs() <= 1e-9 * (1.0 + exact.abs()) {
                c.delta += exact - cached;
                return Some(c);
            }
            let slot = self.slot(c.var, c.a, c.b);
            self.local[c.var][slot] = exact;
        }
    }

    pub fn apply(&mut self, g: &mut WorkGrid, c: &Candidate) {
        let (k, a, b) = (c.var, c.a, c.b);
        for l in 0..g.n_variables() {
            if l != k && !self.frozen[l] && g.n_parts(l) >= 2 {
                self.patch_other(g, k, a, b, l);
            }
        }
        g.apply_merge(k, a, b);
        match g.kind(k) {
            VariableKind::Numerical => {
                let mut p = g.first(k);
                while p != NONE {
                    let q = g.next(k, p);
                    if q != NONE && (p == a || q == a) {
                        let s = self.slot(k, p, q);
                        self.local[k][s] = merge_local(g, k, p, q);
                    }
                    p = q;
                }
            }
            VariableKind::Categorical => {
                for e in g.live_parts(k) {
                    if e != a {
                        let (lo, hi) = (a.min(e), a.max(e));
                        let s = self.slot(k, lo, hi);
                        self.local[k][s] = merge_local(g, k, lo, hi);
                    }
                }
            }
        }
    }

    /// Updates the cached cell terms of variable `l` for the merge of parts
    /// `a` and `b` of variable `k`, before it is applied.
    fn patch_other(&mut self, g: &WorkGrid, k: usize, a: u32, b: u32, l: usize) {
        let comb = g.dataset().combinatorics();
        let (sk, sl) = (g.stride(k), g.stride(l));
        let mut split: FxHashMap<(CellKey, u32), (u64, u64)> = FxHashMap::default();
        for (part, is_a) in [(a, true), (b, false)] {
            for key in g.row_keys(k, part) {
                let dl = g.digit(key, l);
                let s = key - part as CellKey * sk - dl as CellKey * sl;
                let e = split.entry((s, dl)).or_insert((0, 0));
                if is_a {
                    e.0 += g.cell(key);
                } else {
                    e.1 += g.cell(key);
                }
            }
        }
        let mut groups: FxHashMap<CellKey, Vec<(u32, u64, u64)>> = FxHashMap::default();
        for ((s, dl), (xa, xb)) in split {
            groups.entry(s).or_default().push((dl, xa, xb));
        }
        let mut keys: Vec<CellKey> = groups.keys().copied().collect();
        keys.sort_unstable();
        let change = |c: (u64, u64), d: (u64, u64)| {
            pool_gain(comb, c.0 + c.1, d.0 + d.1) - pool_gain(comb, c.0, d.0) - pool_gain(comb, c.1, d.1)
        };
        let cap = self.cap[l];
        let table = &mut self.local[l];
        for s in keys {
            let mut items = groups.remove(&s).expect("key from map");
            if items.len() < 2 {
                continue;
            }
            items.sort_unstable_by_key(|t| t.0);
            match g.kind(l) {
                VariableKind::Categorical => {
                    for i in 0..items.len() {
                        for j in i + 1..items.len() {
                            let (c, d) = (items[i], items[j]);
                            table[c.0 as usize * cap + d.0 as usize] -= change((c.1, c.2), (d.1, d.2));
                        }
                    }
                }
                VariableKind::Numerical => {
                    for i in 0..items.len() {
                        let c = items[i];
                        let nx = g.next(l, c.0);
                        if let Some(d) = items[i + 1..].iter().find(|t| t.0 == nx) {
                            table[c.0 as usize * cap + d.0 as usize] -= change((c.1, c.2), (d.1, d.2));
                        }
                    }
                }
            }
        }
    }
}

/// Local deltas of every pair of live groups of a categorical variable.
fn fill_categorical(g: &WorkGrid, var: usize, table: &mut [f64], cap: usize) {
    let ds = g.dataset();
    let comb = ds.combinatorics();
    let live = g.live_parts(var);
    for (i, &a) in live.iter().enumerate() {
        for &b in &live[i + 1..] {
            table[a as usize * cap + b as usize] = crate::cost::merge_part_terms(
                comb,
                VariableKind::Categorical,
                (g.part_total(var, a), g.part_values(var, a)),
                (g.part_total(var, b), g.part_values(var, b)),
            );
        }
    }
    let s = g.stride(var);
    let mut groups: FxHashMap<CellKey, Vec<(u32, u64)>> = FxHashMap::default();
    for &p in &live {
        for key in g.row_keys(var, p) {
            groups.entry(key - p as CellKey * s).or_default().push((p, g.cell(key)));
        }
    }
    let mut keys: Vec<CellKey> = groups.keys().copied().collect();
    keys.sort_unstable();
    for rest in keys {
        let items = &groups[&rest];
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let ((pa, xa), (pb, xb)) = (items[i], items[j]);
                table[pa as usize * cap + pb as usize] -= pool_gain(comb, xa, xb);
            }
        }
    }
}
