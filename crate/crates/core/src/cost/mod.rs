//! The MAP cost criterion of a data grid model and its incremental deltas.
//!
//! cost(M) = Σ_{k∈K_N} log N + Σ_{k∈K_C} log V_k + Σ_{k∈K_C} log B(V_k, J_k)
//!         + log C(N+G−1, G−1)
//!         + Σ_{k∈K_C} Σ_j log C(N_jk + m_jk − 1, m_jk − 1)
//!         + log N! − Σ_cells log N_cell!
//!         + Σ_k Σ_j log N_jk! − Σ_{k∈K_C} Σ_v log n_vk!
//!
//! The delta functions are written against [`GridView`] so the optimizer's
//! mutable working grid and the immutable [`GridModel`] share one
//! implementation.

mod combinatorics;

pub use combinatorics::{ln_gamma, ln_gamma_shift, log_b, log_binomial, log_factorial, Combinatorics};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, VariableKind};
use crate::error::{Error, Result};
use crate::grid::{CellKey, GridModel};

/// Per-term decomposition of cost(M), in nats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub prior_numerical_part_counts: f64,
    pub prior_categorical_group_counts: f64,
    pub prior_partition_choice: f64,
    pub prior_cell_distribution: f64,
    pub prior_group_value_distribution: f64,
    pub likelihood_cells: f64,
    pub likelihood_within_parts: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn components(&self) -> [f64; 7] {
        [
            self.prior_numerical_part_counts,
            self.prior_categorical_group_counts,
            self.prior_partition_choice,
            self.prior_cell_distribution,
            self.prior_group_value_distribution,
            self.likelihood_cells,
            self.likelihood_within_parts,
        ]
    }

    pub fn prior(&self) -> f64 {
        self.components()[..5].iter().sum()
    }

    pub fn likelihood(&self) -> f64 {
        self.likelihood_cells + self.likelihood_within_parts
    }
}

/// Full evaluation of the criterion. Sums run over sorted counts so the
/// result depends only on the model, not on its construction history.
pub fn cost(model: &GridModel) -> CostBreakdown {
    let ds = model.dataset();
    let comb = ds.combinatorics();
    let n = ds.n_records() as u64;
    let mut b = CostBreakdown::default();
    for k in 0..model.n_variables() {
        let col = ds.column(k);
        let j = model.n_parts(k) as u64;
        match col.kind() {
            VariableKind::Numerical => b.prior_numerical_part_counts += (n as f64).ln(),
            VariableKind::Categorical => {
                let v = col.n_atoms() as u64;
                b.prior_categorical_group_counts += (v as f64).ln();
                b.prior_partition_choice += comb.log_b(v, j);
                for part in 0..j as usize {
                    b.prior_group_value_distribution +=
                        comb.log_group_prior(model.part_total(k, part), model.part_value_count(k, part));
                }
            }
        }
    }
    b.prior_cell_distribution = comb.log_cell_prior(n, model.grid_size());

    let mut counts: Vec<u64> = model.cell_map().values().copied().collect();
    counts.sort_unstable();
    b.likelihood_cells = comb.log_factorial(n) - counts.iter().map(|&c| comb.log_factorial(c)).sum::<f64>();

    let mut within = 0.0;
    for k in 0..model.n_variables() {
        for &t in model.part_totals(k) {
            within += comb.log_factorial(t);
        }
    }
    for col in ds.columns() {
        if col.kind() == VariableKind::Categorical {
            for atom in 0..col.n_atoms() {
                within -= comb.log_factorial(col.atom_count(atom));
            }
        }
    }
    b.likelihood_within_parts = within;
    b.total = b.components().iter().sum();
    b
}

/// Read access to a grid, by part id. Part ids need not be compact.
pub(crate) trait GridView {
    fn dataset(&self) -> &Dataset;
    /// Current J_k.
    fn n_parts(&self, var: usize) -> usize;
    fn grid_size(&self) -> f64;
    fn part_total(&self, var: usize, part: u32) -> u64;
    fn part_values(&self, var: usize, part: u32) -> u64;
    fn stride(&self, var: usize) -> CellKey;
    fn cell(&self, key: CellKey) -> u64;
    fn row_len(&self, var: usize, part: u32) -> usize;
    fn for_each_row_key(&self, var: usize, part: u32, f: &mut dyn FnMut(CellKey));
    fn atom_part(&self, var: usize, atom: usize) -> u32;
}

impl GridView for GridModel {
    fn dataset(&self) -> &Dataset {
        GridModel::dataset(self)
    }
    fn n_parts(&self, var: usize) -> usize {
        GridModel::n_parts(self, var)
    }
    fn grid_size(&self) -> f64 {
        GridModel::grid_size(self)
    }
    fn part_total(&self, var: usize, part: u32) -> u64 {
        GridModel::part_total(self, var, part as usize)
    }
    fn part_values(&self, var: usize, part: u32) -> u64 {
        self.part_value_count(var, part as usize)
    }
    fn stride(&self, var: usize) -> CellKey {
        self.strides()[var]
    }
    fn cell(&self, key: CellKey) -> u64 {
        self.cell_map().get(&key).copied().unwrap_or(0)
    }
    fn row_len(&self, var: usize, part: u32) -> usize {
        self.row(var, part as usize).len()
    }
    fn for_each_row_key(&self, var: usize, part: u32, f: &mut dyn FnMut(CellKey)) {
        for &k in self.row(var, part as usize) {
            f(k)
        }
    }
    fn atom_part(&self, var: usize, atom: usize) -> u32 {
        self.partition(var).atom_part()[atom]
    }
}

/// lf(x + y) − lf(x) − lf(y): the log-factorial gain of pooling two counts.
#[inline]
pub(crate) fn pool_gain(comb: &Combinatorics, x: u64, y: u64) -> f64 {
    if x == 0 || y == 0 {
        return 0.0;
    }
    comb.log_factorial(x + y) - comb.log_factorial(x) - comb.log_factorial(y)
}

/// Change of the J-dependent global terms (partition choice and cell
/// distribution) when variable `var` loses one part.
pub(crate) fn prior_part_loss<V: GridView + ?Sized>(g: &V, var: usize) -> f64 {
    let ds = g.dataset();
    let comb = ds.combinatorics();
    let n = ds.n_records() as u64;
    let j = g.n_parts(var);
    let size = g.grid_size();
    let shrunk = size / j as f64 * (j - 1) as f64;
    let mut d = comb.log_cell_prior(n, shrunk) - comb.log_cell_prior(n, size);
    if ds.kind(var) == VariableKind::Categorical {
        let v = ds.column(var).n_atoms() as u64;
        d += comb.log_b(v, j as u64 - 1) - comb.log_b(v, j as u64);
    }
    d
}

/// Part-level terms of merging two parts with totals/value counts.
pub(crate) fn merge_part_terms(
    comb: &Combinatorics,
    kind: VariableKind,
    (na, ma): (u64, u64),
    (nb, mb): (u64, u64),
) -> f64 {
    let mut d = pool_gain(comb, na, nb);
    if kind == VariableKind::Categorical {
        d += comb.log_group_prior(na + nb, ma + mb) - comb.log_group_prior(na, ma) - comb.log_group_prior(nb, mb);
    }
    d
}

/// −Σ_rest pool_gain(n_a,rest, n_b,rest): the cell likelihood change of
/// merging parts `a` and `b`, scanning the smaller row.
pub(crate) fn merge_cell_term<V: GridView + ?Sized>(g: &V, var: usize, a: u32, b: u32) -> f64 {
    let comb = g.dataset().combinatorics();
    let s = g.stride(var);
    let (small, other) = if g.row_len(var, a) <= g.row_len(var, b) {
        (a, b)
    } else {
        (b, a)
    };
    let mut acc = 0.0;
    g.for_each_row_key(var, small, &mut |key| {
        let partner = key - small as CellKey * s + other as CellKey * s;
        let y = g.cell(partner);
        if y > 0 {
            acc -= pool_gain(comb, g.cell(key), y);
        }
    });
    acc
}

/// Merge delta without the J-dependent global terms.
pub(crate) fn merge_local<V: GridView + ?Sized>(g: &V, var: usize, a: u32, b: u32) -> f64 {
    let comb = g.dataset().combinatorics();
    merge_part_terms(
        comb,
        g.dataset().kind(var),
        (g.part_total(var, a), g.part_values(var, a)),
        (g.part_total(var, b), g.part_values(var, b)),
    ) + merge_cell_term(g, var, a, b)
}

pub(crate) fn merge_delta_view<V: GridView + ?Sized>(g: &V, var: usize, a: u32, b: u32) -> f64 {
    prior_part_loss(g, var) + merge_local(g, var, a, b)
}

/// Records of some atoms of one variable, aggregated by their cell key with
/// that variable's digit zeroed.
#[derive(Clone, Debug, Default)]
pub(crate) struct Profile {
    pub entries: Vec<(CellKey, u64)>,
    pub records: u64,
    pub atoms: u64,
}

impl Profile {
    pub fn of_atoms<V: GridView + ?Sized>(g: &V, var: usize, atoms: &[u32]) -> Profile {
        let ds = g.dataset();
        let mut index: FxHashMap<CellKey, usize> = FxHashMap::default();
        let mut p = Profile {
            atoms: atoms.len() as u64,
            ..Profile::default()
        };
        for &atom in atoms {
            for &rec in ds.atom_records(var, atom as usize) {
                let rest = rest_key(g, var, rec as usize);
                let slot = *index.entry(rest).or_insert_with(|| {
                    p.entries.push((rest, 0));
                    p.entries.len() - 1
                });
                p.entries[slot].1 += 1;
                p.records += 1;
            }
        }
        p
    }
}

/// Cell key of a record with the digit of `var` zeroed.
pub(crate) fn rest_key<V: GridView + ?Sized>(g: &V, var: usize, rec: usize) -> CellKey {
    let ds = g.dataset();
    (0..ds.n_variables())
        .filter(|&l| l != var)
        .map(|l| g.atom_part(l, ds.column(l).atom_of(rec) as usize) as CellKey * g.stride(l))
        .sum()
}

/// Cell likelihood change of moving `profile` from part `p` to part `q`,
/// reading current counts through `count`.
pub(crate) fn transfer_cell_term(
    comb: &Combinatorics,
    profile: &[(CellKey, u64)],
    p_off: CellKey,
    q_off: CellKey,
    count: impl Fn(CellKey) -> u64,
) -> f64 {
    let lf = |x| comb.log_factorial(x);
    let mut acc = 0.0;
    for &(rest, x) in profile {
        let cp = count(rest + p_off);
        let cq = count(rest + q_off);
        debug_assert!(cp >= x);
        acc -= lf(cp - x) - lf(cp) + lf(cq + x) - lf(cq);
    }
    acc
}

/// Part-level terms of moving `n` records over `atoms` atoms from part
/// (np, mp) to part (nq, mq). An emptied categorical part drops its
/// group-prior term.
pub(crate) fn transfer_part_terms(
    comb: &Combinatorics,
    kind: VariableKind,
    (np, mp): (u64, u64),
    (nq, mq): (u64, u64),
    n: u64,
    atoms: u64,
) -> f64 {
    let lf = |x| comb.log_factorial(x);
    let mut d = lf(np - n) + lf(nq + n) - lf(np) - lf(nq);
    if kind == VariableKind::Categorical {
        d += comb.log_group_prior(np - n, mp - atoms) + comb.log_group_prior(nq + n, mq + atoms)
            - comb.log_group_prior(np, mp)
            - comb.log_group_prior(nq, mq);
    }
    d
}

pub(crate) fn transfer_delta_view<V: GridView + ?Sized>(g: &V, var: usize, profile: &Profile, p: u32, q: u32) -> f64 {
    let ds = g.dataset();
    let comb = ds.combinatorics();
    let kind = ds.kind(var);
    let s = g.stride(var);
    let pv = g.part_values(var, p);
    let mut d = transfer_part_terms(
        comb,
        kind,
        (g.part_total(var, p), pv),
        (g.part_total(var, q), g.part_values(var, q)),
        profile.records,
        profile.atoms,
    ) + transfer_cell_term(comb, &profile.entries, p as CellKey * s, q as CellKey * s, |k| {
        g.cell(k)
    });
    if pv == profile.atoms {
        d += prior_part_loss(g, var);
    }
    d
}

/// cost(merge_parts(model, var, a, b)) − cost(model), evaluated locally.
pub fn delta_merge(model: &GridModel, var: usize, a: usize, b: usize) -> Result<f64> {
    model.check_merge(var, a, b)?;
    Ok(merge_delta_view(model, var, a as u32, b as u32))
}

/// cost(move_value(model, var, value_id, from, to)) − cost(model), evaluated
/// locally.
pub fn delta_move(model: &GridModel, var: usize, value_id: usize, from: usize, to: usize) -> Result<f64> {
    model.dataset().expect_kind(var, VariableKind::Categorical)?;
    for part in [from, to] {
        if part >= model.n_parts(var) {
            return Err(Error::PartOutOfRange {
                variable: model.dataset().name(var).to_string(),
                index: part,
                parts: model.n_parts(var),
            });
        }
    }
    if from == to {
        return Err(Error::IllegalEdit("source and target part are the same".into()));
    }
    if model.partition(var).atom_part().get(value_id).copied() != Some(from as u32) {
        return Err(Error::IllegalEdit(format!("value {value_id} is not in part {from}")));
    }
    let profile = Profile::of_atoms(model, var, &[value_id as u32]);
    Ok(transfer_delta_view(model, var, &profile, from as u32, to as u32))
}

/// cost(move_boundary(model, var, boundary, new_rank)) − cost(model),
/// evaluated locally.
pub fn delta_boundary(model: &GridModel, var: usize, boundary: usize, new_rank: u32) -> Result<f64> {
    let (atoms, from, to) = model.boundary_move_atoms(var, boundary, new_rank)?;
    let profile = Profile::of_atoms(model, var, &atoms);
    Ok(transfer_delta_view(model, var, &profile, from, to))
}
