//! Mutable grid used while optimizing. Part ids are stable for the lifetime
//! of a `WorkGrid`: merged or emptied parts are marked dead instead of
//! renumbering, so cell keys never have to be rewritten. Numerical parts
//! are kept in value order through prev/next links.

use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::cost::{GridView, Profile};
use crate::dataset::{Dataset, VariableKind};
use crate::grid::{CellKey, GridModel};

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) struct WorkGrid {
    ds: Arc<Dataset>,
    radix: Vec<CellKey>,
    strides: Vec<CellKey>,
    atom_part: Vec<Vec<u32>>,
    alive: Vec<Vec<bool>>,
    n_alive: Vec<usize>,
    next: Vec<Vec<u32>>,
    prev: Vec<Vec<u32>>,
    totals: Vec<Vec<u64>>,
    values: Vec<Vec<u64>>,
    cells: FxHashMap<CellKey, u64>,
    rows: Vec<Vec<FxHashSet<CellKey>>>,
    grid_size: f64,
}

impl WorkGrid {
    pub fn from_model(m: &GridModel) -> Self {
        let k = m.n_variables();
        let mut rows = Vec::with_capacity(k);
        let mut next = Vec::with_capacity(k);
        let mut prev = Vec::with_capacity(k);
        for var in 0..k {
            let j = m.n_parts(var);
            rows.push(
                (0..j)
                    .map(|p| m.row(var, p).iter().copied().collect::<FxHashSet<_>>())
                    .collect(),
            );
            next.push(
                (0..j as u32)
                    .map(|p| if p + 1 < j as u32 { p + 1 } else { NONE })
                    .collect(),
            );
            prev.push((0..j as u32).map(|p| if p > 0 { p - 1 } else { NONE }).collect());
        }
        let mut g = WorkGrid {
            ds: m.dataset().clone(),
            radix: m.shape().iter().map(|&j| j as CellKey).collect(),
            strides: m.strides().to_vec(),
            atom_part: m.partitions().iter().map(|p| p.atom_part().to_vec()).collect(),
            alive: m.shape().iter().map(|&j| vec![true; j]).collect(),
            n_alive: m.shape(),
            next,
            prev,
            totals: (0..k).map(|v| m.part_totals(v).to_vec()).collect(),
            values: (0..k)
                .map(|v| (0..m.n_parts(v)).map(|p| m.part_value_count(v, p)).collect())
                .collect(),
            cells: m.cell_map().clone(),
            rows,
            grid_size: 0.0,
        };
        g.refresh_size();
        g
    }

    /// Compacts the live part ids (in ascending order) into a `GridModel`.
    pub fn to_model(&self) -> GridModel {
        let assignments = (0..self.n_variables())
            .map(|var| {
                let mut compact = vec![NONE; self.alive[var].len()];
                let mut c = 0u32;
                for (p, &live) in self.alive[var].iter().enumerate() {
                    if live {
                        compact[p] = c;
                        c += 1;
                    }
                }
                self.atom_part[var].iter().map(|&p| compact[p as usize]).collect()
            })
            .collect();
        GridModel::from_assignments(self.ds.clone(), assignments).expect("working grid keeps partitions valid")
    }

    fn refresh_size(&mut self) {
        self.grid_size = self.n_alive.iter().map(|&j| j as f64).product();
    }

    pub fn n_variables(&self) -> usize {
        self.radix.len()
    }

    pub fn kind(&self, var: usize) -> VariableKind {
        self.ds.kind(var)
    }

    #[inline]
    pub fn digit(&self, key: CellKey, var: usize) -> u32 {
        ((key / self.strides[var]) % self.radix[var]) as u32
    }

    #[cfg(test)]
    pub fn is_alive(&self, var: usize, p: u32) -> bool {
        self.alive[var][p as usize]
    }

    /// Live part ids of `var` in ascending order.
    pub fn live_parts(&self, var: usize) -> Vec<u32> {
        (0..self.alive[var].len() as u32)
            .filter(|&p| self.alive[var][p as usize])
            .collect()
    }

    /// Number of part ids ever allocated for `var`.
    pub fn capacity(&self, var: usize) -> usize {
        self.alive[var].len()
    }

    pub fn next(&self, var: usize, p: u32) -> u32 {
        self.next[var][p as usize]
    }

    pub fn first(&self, var: usize) -> u32 {
        (0..self.alive[var].len() as u32)
            .find(|&p| self.alive[var][p as usize] && self.prev[var][p as usize] == NONE)
            .unwrap_or(NONE)
    }

    pub fn atom_parts(&self, var: usize) -> &[u32] {
        &self.atom_part[var]
    }

    /// Index of `p` among the live parts of `var`.
    pub fn compact_index(&self, var: usize, p: u32) -> usize {
        self.alive[var][..p as usize].iter().filter(|&&a| a).count()
    }

    pub fn row_keys(&self, var: usize, p: u32) -> impl Iterator<Item = CellKey> + '_ {
        self.rows[var][p as usize].iter().copied()
    }

    fn add_cell(&mut self, key: CellKey, x: u64) {
        let c = self.cells.entry(key).or_insert(0);
        let fresh = *c == 0;
        *c += x;
        if fresh {
            for l in 0..self.radix.len() {
                let d = self.digit(key, l) as usize;
                self.rows[l][d].insert(key);
            }
        }
    }

    fn sub_cell(&mut self, key: CellKey, x: u64) {
        let c = self.cells.get_mut(&key).expect("cell exists");
        debug_assert!(*c >= x);
        *c -= x;
        if *c == 0 {
            self.cells.remove(&key);
            for l in 0..self.radix.len() {
                let d = self.digit(key, l) as usize;
                self.rows[l][d].remove(&key);
            }
        }
    }

    fn kill(&mut self, var: usize, p: u32) {
        self.alive[var][p as usize] = false;
        self.n_alive[var] -= 1;
        let (pr, nx) = (self.prev[var][p as usize], self.next[var][p as usize]);
        if pr != NONE {
            self.next[var][pr as usize] = nx;
        }
        if nx != NONE {
            self.prev[var][nx as usize] = pr;
        }
        self.prev[var][p as usize] = NONE;
        self.next[var][p as usize] = NONE;
        self.refresh_size();
    }

    /// Folds part `b` into part `a`.
    pub fn apply_merge(&mut self, var: usize, a: u32, b: u32) {
        let s = self.strides[var];
        let keys: Vec<CellKey> = self.rows[var][b as usize].iter().copied().collect();
        for key in keys {
            let x = self.cells[&key];
            self.sub_cell(key, x);
            self.add_cell(key - b as CellKey * s + a as CellKey * s, x);
        }
        for p in self.atom_part[var].iter_mut() {
            if *p == b {
                *p = a;
            }
        }
        let (nb, mb) = (self.totals[var][b as usize], self.values[var][b as usize]);
        self.totals[var][a as usize] += nb;
        self.values[var][a as usize] += mb;
        self.totals[var][b as usize] = 0;
        self.values[var][b as usize] = 0;
        self.kill(var, b);
    }

    /// Moves the atoms summarized by `profile` from part `p` to part `q`. A
    /// part left without atoms dies.
    pub fn apply_transfer(&mut self, var: usize, atoms: &[u32], profile: &Profile, p: u32, q: u32) {
        let s = self.strides[var];
        for &(rest, x) in &profile.entries {
            self.sub_cell(rest + p as CellKey * s, x);
            self.add_cell(rest + q as CellKey * s, x);
        }
        for &a in atoms {
            debug_assert_eq!(self.atom_part[var][a as usize], p);
            self.atom_part[var][a as usize] = q;
        }
        self.totals[var][p as usize] -= profile.records;
        self.totals[var][q as usize] += profile.records;
        self.values[var][p as usize] -= profile.atoms;
        self.values[var][q as usize] += profile.atoms;
        if self.values[var][p as usize] == 0 {
            self.kill(var, p);
        }
    }
}

impl GridView for WorkGrid {
    fn dataset(&self) -> &Dataset {
        &self.ds
    }
    fn n_parts(&self, var: usize) -> usize {
        self.n_alive[var]
    }
    fn grid_size(&self) -> f64 {
        self.grid_size
    }
    fn part_total(&self, var: usize, part: u32) -> u64 {
        self.totals[var][part as usize]
    }
    fn part_values(&self, var: usize, part: u32) -> u64 {
        self.values[var][part as usize]
    }
    fn stride(&self, var: usize) -> CellKey {
        self.strides[var]
    }
    fn cell(&self, key: CellKey) -> u64 {
        self.cells.get(&key).copied().unwrap_or(0)
    }
    fn row_len(&self, var: usize, part: u32) -> usize {
        self.rows[var][part as usize].len()
    }
    fn for_each_row_key(&self, var: usize, part: u32, f: &mut dyn FnMut(CellKey)) {
        for &k in &self.rows[var][part as usize] {
            f(k)
        }
    }
    fn atom_part(&self, var: usize, atom: usize) -> u32 {
        self.atom_part[var][atom]
    }
}
