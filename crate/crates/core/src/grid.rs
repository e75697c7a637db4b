//! Data grid models: one partition per variable plus the sparse cell counts.
//!
//! Cells are keyed by a mixed-radix packing of the part-index tuple,
//! `key = Σ_k part_k · stride_k` with `stride_k = Π_{i<k} J_i`. Only non-empty
//! cells are stored.

use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::dataset::{Column, Dataset, VariableKind};
use crate::error::{Error, Result};

pub type CellKey = u128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Part {
    /// Ranks `lo_rank .. hi_rank` (1-based, exclusive end).
    Interval { lo_rank: u32, hi_rank: u32 },
    /// Sorted value ids.
    ValueGroup { value_ids: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariablePartition {
    variable: usize,
    kind: VariableKind,
    atom_part: Vec<u32>,
    parts: Vec<Part>,
}

impl VariablePartition {
    /// Builds a partition from an atom → part map. Part ids must be compact;
    /// numerical parts must be contiguous runs of tie-blocks numbered in
    /// value order.
    pub fn from_atom_parts(column: &Column, variable: usize, atom_part: Vec<u32>) -> Result<Self> {
        let n_atoms = column.n_atoms();
        if atom_part.len() != n_atoms {
            return Err(Error::InvalidPartition(format!(
                "{} assignments for {n_atoms} atoms",
                atom_part.len()
            )));
        }
        let n_parts = atom_part.iter().max().map_or(0, |&m| m as usize + 1);
        let parts = match column {
            Column::Numerical(col) => {
                let mut parts = Vec::with_capacity(n_parts);
                for (i, &p) in atom_part.iter().enumerate() {
                    let block = col.blocks()[i];
                    if i == 0 {
                        if p != 0 {
                            return Err(Error::InvalidPartition("first interval must have id 0".into()));
                        }
                    } else {
                        let prev = atom_part[i - 1];
                        if p != prev && p != prev + 1 {
                            return Err(Error::InvalidPartition(
                                "intervals must be contiguous and numbered in order".into(),
                            ));
                        }
                    }
                    if p as usize == parts.len() {
                        parts.push(Part::Interval {
                            lo_rank: block.first_rank,
                            hi_rank: block.end_rank(),
                        });
                    } else if let Some(Part::Interval { hi_rank, .. }) = parts.last_mut() {
                        *hi_rank = block.end_rank();
                    }
                }
                parts
            }
            Column::Categorical(_) => {
                let mut groups = vec![Vec::new(); n_parts];
                for (v, &p) in atom_part.iter().enumerate() {
                    groups[p as usize].push(v as u32);
                }
                if groups.iter().any(Vec::is_empty) {
                    return Err(Error::InvalidPartition("empty value group".into()));
                }
                groups
                    .into_iter()
                    .map(|value_ids| Part::ValueGroup { value_ids })
                    .collect()
            }
        };
        Ok(VariablePartition {
            variable,
            kind: column.kind(),
            atom_part,
            parts,
        })
    }

    pub fn variable(&self) -> usize {
        self.variable
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    /// J_k.
    pub fn n_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn atom_part(&self) -> &[u32] {
        &self.atom_part
    }

    /// Atoms of part `j`, ascending.
    pub fn atoms_of(&self, j: usize) -> Vec<u32> {
        (0..self.atom_part.len() as u32)
            .filter(|&a| self.atom_part[a as usize] == j as u32)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct GridModel {
    dataset: Arc<Dataset>,
    partitions: Vec<VariablePartition>,
    strides: Vec<CellKey>,
    cells: FxHashMap<CellKey, u64>,
    part_totals: Vec<Vec<u64>>,
    part_values: Vec<Vec<u64>>,
    rows: Vec<Vec<Vec<CellKey>>>,
}

pub(crate) fn strides_for(parts: impl IntoIterator<Item = usize>) -> Result<Vec<CellKey>> {
    let mut strides = Vec::new();
    let mut acc: CellKey = 1;
    for j in parts {
        strides.push(acc);
        acc = acc
            .checked_mul(j as CellKey)
            .ok_or_else(|| Error::GridTooLarge("more than 2^128".into()))?;
    }
    Ok(strides)
}

impl GridModel {
    /// M_∅: a single part per variable, a single cell holding all N records.
    pub fn null_model(dataset: Arc<Dataset>) -> Self {
        let assignments = dataset.columns().iter().map(|c| vec![0u32; c.n_atoms()]).collect();
        Self::from_assignments(dataset, assignments).expect("null partition is valid")
    }

    /// Starting grid with at most `max_parts` parts per variable:
    /// equal-frequency intervals (tie-blocks kept whole) and categorical
    /// values dealt round-robin by descending count.
    pub fn initial_model(dataset: Arc<Dataset>, max_parts: usize) -> Result<Self> {
        if max_parts == 0 {
            return Err(Error::InvalidArgument("max_parts must be at least 1".into()));
        }
        let assignments = dataset
            .columns()
            .iter()
            .map(|col| match col {
                Column::Numerical(_) => equal_frequency(col, dataset.n_records(), max_parts, None),
                Column::Categorical(c) => {
                    let mut order: Vec<u32> = (0..c.values().len() as u32).collect();
                    order.sort_by(|&a, &b| c.counts()[b as usize].cmp(&c.counts()[a as usize]).then(a.cmp(&b)));
                    round_robin(&order, max_parts)
                }
            })
            .collect();
        Self::from_assignments(dataset, assignments)
    }

    /// Builds a model from scratch by counting every record.
    pub fn from_assignments(dataset: Arc<Dataset>, assignments: Vec<Vec<u32>>) -> Result<Self> {
        if assignments.len() != dataset.n_variables() {
            return Err(Error::InvalidPartition(format!(
                "{} partitions for {} variables",
                assignments.len(),
                dataset.n_variables()
            )));
        }
        let partitions = assignments
            .into_iter()
            .enumerate()
            .map(|(k, a)| VariablePartition::from_atom_parts(dataset.column(k), k, a))
            .collect::<Result<Vec<_>>>()?;
        Self::from_partitions(dataset, partitions)
    }

    pub(crate) fn from_partitions(dataset: Arc<Dataset>, partitions: Vec<VariablePartition>) -> Result<Self> {
        let strides = strides_for(partitions.iter().map(VariablePartition::n_parts))?;
        let mut cells: FxHashMap<CellKey, u64> = FxHashMap::default();
        for rec in 0..dataset.n_records() {
            let key = partitions
                .iter()
                .zip(&strides)
                .map(|(p, &s)| p.atom_part[dataset.column(p.variable).atom_of(rec) as usize] as CellKey * s)
                .sum();
            *cells.entry(key).or_insert(0) += 1;
        }
        Ok(Self::assemble(dataset, partitions, strides, cells))
    }

    fn assemble(
        dataset: Arc<Dataset>,
        partitions: Vec<VariablePartition>,
        strides: Vec<CellKey>,
        cells: FxHashMap<CellKey, u64>,
    ) -> Self {
        let mut part_totals = Vec::with_capacity(partitions.len());
        let mut part_values = Vec::with_capacity(partitions.len());
        for p in &partitions {
            let col = dataset.column(p.variable);
            let mut totals = vec![0u64; p.n_parts()];
            let mut values = vec![0u64; p.n_parts()];
            for (atom, &j) in p.atom_part.iter().enumerate() {
                totals[j as usize] += col.atom_count(atom);
                values[j as usize] += 1;
            }
            part_totals.push(totals);
            part_values.push(values);
        }
        let mut rows: Vec<Vec<Vec<CellKey>>> = partitions.iter().map(|p| vec![Vec::new(); p.n_parts()]).collect();
        let mut keys: Vec<CellKey> = cells.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            for (k, p) in partitions.iter().enumerate() {
                let digit = (key / strides[k]) % p.n_parts() as CellKey;
                rows[k][digit as usize].push(key);
            }
        }
        GridModel {
            dataset,
            partitions,
            strides,
            cells,
            part_totals,
            part_values,
            rows,
        }
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn n_variables(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition(&self, var: usize) -> &VariablePartition {
        &self.partitions[var]
    }

    pub fn partitions(&self) -> &[VariablePartition] {
        &self.partitions
    }

    pub fn n_parts(&self, var: usize) -> usize {
        self.partitions[var].n_parts()
    }

    /// Σ_k J_k.
    pub fn total_parts(&self) -> usize {
        self.partitions.iter().map(VariablePartition::n_parts).sum()
    }

    /// J_1 … J_K.
    pub fn shape(&self) -> Vec<usize> {
        self.partitions.iter().map(VariablePartition::n_parts).collect()
    }

    /// G = Π_k J_k, as a float (it may exceed every integer type the
    /// criterion needs).
    pub fn grid_size(&self) -> f64 {
        self.partitions.iter().map(|p| p.n_parts() as f64).product()
    }

    /// N_jk.
    pub fn part_total(&self, var: usize, part: usize) -> u64 {
        self.part_totals[var][part]
    }

    pub fn part_totals(&self, var: usize) -> &[u64] {
        &self.part_totals[var]
    }

    /// m_jk: number of atoms (values or tie-blocks) in the part.
    pub fn part_value_count(&self, var: usize, part: usize) -> u64 {
        self.part_values[var][part]
    }

    pub fn n_nonempty_cells(&self) -> usize {
        self.cells.len()
    }

    pub(crate) fn strides(&self) -> &[CellKey] {
        &self.strides
    }

    pub(crate) fn cell_map(&self) -> &FxHashMap<CellKey, u64> {
        &self.cells
    }

    pub(crate) fn row(&self, var: usize, part: usize) -> &[CellKey] {
        &self.rows[var][part]
    }

    pub fn encode(&self, tuple: &[usize]) -> CellKey {
        tuple.iter().zip(&self.strides).map(|(&j, &s)| j as CellKey * s).sum()
    }

    pub fn decode(&self, key: CellKey) -> Vec<usize> {
        self.partitions
            .iter()
            .zip(&self.strides)
            .map(|(p, &s)| ((key / s) % p.n_parts() as CellKey) as usize)
            .collect()
    }

    /// Count of the cell at the given part-index tuple.
    pub fn cell_count(&self, tuple: &[usize]) -> u64 {
        self.cells.get(&self.encode(tuple)).copied().unwrap_or(0)
    }

    /// Non-empty cells as (part tuple, count), in key order.
    pub fn cells(&self) -> Vec<(Vec<usize>, u64)> {
        let mut keys: Vec<_> = self.cells.iter().map(|(&k, &c)| (k, c)).collect();
        keys.sort_unstable();
        keys.into_iter().map(|(k, c)| (self.decode(k), c)).collect()
    }

    /// Raw-value bounds of an interval, cut halfway between neighbouring
    /// values; the outer ends are infinite.
    pub fn interval_bounds(&self, var: usize, part: usize) -> Option<(f64, f64)> {
        let col = self.dataset.column(var).as_numerical()?;
        let atoms = &self.partitions[var].atom_part;
        let first = atoms.partition_point(|&p| (p as usize) < part);
        let end = atoms.partition_point(|&p| (p as usize) <= part);
        if first == end {
            return None;
        }
        let lo = if first == 0 {
            f64::NEG_INFINITY
        } else {
            col.cut_before(first)
        };
        let hi = if end == atoms.len() {
            f64::INFINITY
        } else {
            col.cut_before(end)
        };
        Some((lo, hi))
    }

    /// Short human-readable name of a part: `]lo, hi]` for an interval, the
    /// most frequent values in braces for a group.
    pub fn part_label(&self, var: usize, part: usize) -> String {
        match &self.partitions[var].parts[part] {
            Part::Interval { .. } => {
                let (lo, hi) = self.interval_bounds(var, part).expect("interval has blocks");
                interval_label(lo, hi)
            }
            Part::ValueGroup { value_ids } => {
                let col = self.dataset.column(var);
                let mut vals: Vec<(String, u64)> = value_ids
                    .iter()
                    .map(|&v| (col.atom_label(v as usize), col.atom_count(v as usize)))
                    .collect();
                sort_by_frequency(&mut vals, |v| (v.0.as_str(), v.1));
                group_label(vals.iter().map(|v| v.0.as_str()), vals.len())
            }
        }
    }

    /// Part of variable `var` holding record `rec`.
    pub fn part_of_record(&self, var: usize, rec: usize) -> usize {
        self.partitions[var].atom_part[self.dataset.column(var).atom_of(rec) as usize] as usize
    }

    fn check_part(&self, var: usize, part: usize) -> Result<()> {
        if var >= self.n_variables() {
            return Err(Error::InvalidArgument(format!("variable index {var} out of range")));
        }
        if part >= self.n_parts(var) {
            return Err(Error::PartOutOfRange {
                variable: self.dataset.name(var).to_string(),
                index: part,
                parts: self.n_parts(var),
            });
        }
        Ok(())
    }

    pub(crate) fn check_merge(&self, var: usize, a: usize, b: usize) -> Result<()> {
        self.check_part(var, a)?;
        self.check_part(var, b)?;
        if a == b {
            return Err(Error::IllegalEdit("cannot merge a part with itself".into()));
        }
        if self.dataset.kind(var) == VariableKind::Numerical && a.abs_diff(b) != 1 {
            return Err(Error::IllegalEdit(format!("intervals {a} and {b} are not adjacent")));
        }
        Ok(())
    }

    /// Rebuilds the model with new atom assignments, carrying the cell counts
    /// over through `remap` (old tuple → new tuple) rather than recounting.
    fn remapped(
        &self,
        var: usize,
        atom_part: Vec<u32>,
        remap: impl Fn(u32) -> u32,
        moves: &[(u32, u32, u32)],
    ) -> Result<Self> {
        // moves: (record, old part, new part) applied in the old key space first
        let mut cells = self.cells.clone();
        let stride = self.strides[var];
        for &(rec, from, to) in moves {
            let key = self.record_key(rec as usize);
            debug_assert_eq!((key / stride) % self.n_parts(var) as CellKey, from as CellKey);
            let new_key = key - from as CellKey * stride + to as CellKey * stride;
            let c = cells.get_mut(&key).expect("record cell exists");
            *c -= 1;
            if *c == 0 {
                cells.remove(&key);
            }
            *cells.entry(new_key).or_insert(0) += 1;
        }
        let mut partitions = self.partitions.clone();
        partitions[var] = VariablePartition::from_atom_parts(self.dataset.column(var), var, atom_part)?;
        let strides = strides_for(partitions.iter().map(VariablePartition::n_parts))?;
        let old_j = self.n_parts(var) as CellKey;
        let mut remapped: FxHashMap<CellKey, u64> = FxHashMap::default();
        remapped.reserve(cells.len());
        for (key, count) in cells {
            let mut new_key: CellKey = 0;
            for (k, p) in self.partitions.iter().enumerate() {
                let mut digit = ((key / self.strides[k]) % p.n_parts() as CellKey) as u32;
                if k == var {
                    debug_assert!((digit as CellKey) < old_j);
                    digit = remap(digit);
                }
                new_key += digit as CellKey * strides[k];
            }
            *remapped.entry(new_key).or_insert(0) += count;
        }
        Ok(Self::assemble(self.dataset.clone(), partitions, strides, remapped))
    }

    fn record_key(&self, rec: usize) -> CellKey {
        self.partitions
            .iter()
            .zip(&self.strides)
            .map(|(p, &s)| p.atom_part[self.dataset.column(p.variable).atom_of(rec) as usize] as CellKey * s)
            .sum()
    }

    /// Merges parts `a` and `b` of variable `var`. The merged part takes the
    /// lower index; higher indices shift down by one.
    pub fn merge_parts(&self, var: usize, a: usize, b: usize) -> Result<Self> {
        self.check_merge(var, a, b)?;
        let (lo, hi) = (a.min(b) as u32, a.max(b) as u32);
        let remap = move |j: u32| match j.cmp(&hi) {
            std::cmp::Ordering::Less => j,
            std::cmp::Ordering::Equal => lo,
            std::cmp::Ordering::Greater => j - 1,
        };
        let atom_part = self.partitions[var].atom_part.iter().map(|&j| remap(j)).collect();
        self.remapped(var, atom_part, remap, &[])
    }

    /// Moves categorical value `value_id` from part `from` to part `to`. A
    /// part left empty is deleted and later indices shift down.
    pub fn move_value(&self, var: usize, value_id: usize, from: usize, to: usize) -> Result<Self> {
        self.dataset.expect_kind(var, VariableKind::Categorical)?;
        self.check_part(var, from)?;
        self.check_part(var, to)?;
        if from == to {
            return Err(Error::IllegalEdit("source and target part are the same".into()));
        }
        let current = self.partitions[var].atom_part.get(value_id).copied();
        if current != Some(from as u32) {
            return Err(Error::IllegalEdit(format!("value {value_id} is not in part {from}")));
        }
        let emptied = self.part_values[var][from] == 1;
        let moves: Vec<(u32, u32, u32)> = self
            .dataset
            .atom_records(var, value_id)
            .iter()
            .map(|&r| (r, from as u32, to as u32))
            .collect();
        let from = from as u32;
        let remap = move |j: u32| if emptied && j > from { j - 1 } else { j };
        let mut atom_part = self.partitions[var].atom_part.clone();
        atom_part[value_id] = to as u32;
        let atom_part = atom_part.into_iter().map(remap).collect();
        self.remapped(var, atom_part, remap, &moves)
    }

    /// Moves the boundary between interval `boundary` and `boundary + 1` so
    /// the right interval starts at `new_rank`.
    pub fn move_boundary(&self, var: usize, boundary: usize, new_rank: u32) -> Result<Self> {
        let (moved, from, to) = self.boundary_move_atoms(var, boundary, new_rank)?;
        let mut atom_part = self.partitions[var].atom_part.clone();
        let mut moves = Vec::new();
        for &atom in &moved {
            atom_part[atom as usize] = to;
            moves.extend(
                self.dataset
                    .atom_records(var, atom as usize)
                    .iter()
                    .map(|&r| (r, from, to)),
            );
        }
        self.remapped(var, atom_part, |j| j, &moves)
    }

    /// Tie-blocks that change interval when boundary `boundary` moves to
    /// `new_rank`, with the source and target interval.
    pub(crate) fn boundary_move_atoms(
        &self,
        var: usize,
        boundary: usize,
        new_rank: u32,
    ) -> Result<(Vec<u32>, u32, u32)> {
        self.dataset.expect_kind(var, VariableKind::Numerical)?;
        let col = self.dataset.column(var).as_numerical().expect("checked kind");
        if boundary + 1 >= self.n_parts(var) {
            return Err(Error::IllegalEdit(format!("no boundary {boundary}")));
        }
        let (left_lo, current) = match self.partitions[var].parts[boundary] {
            Part::Interval { lo_rank, hi_rank } => (lo_rank, hi_rank),
            Part::ValueGroup { .. } => unreachable!(),
        };
        let right_hi = match self.partitions[var].parts[boundary + 1] {
            Part::Interval { hi_rank, .. } => hi_rank,
            Part::ValueGroup { .. } => unreachable!(),
        };
        if new_rank <= left_lo || new_rank >= right_hi {
            return Err(Error::IllegalEdit(format!("rank {new_rank} would empty an interval")));
        }
        let new_block = col
            .block_starting_at(new_rank)
            .ok_or_else(|| Error::IllegalEdit(format!("rank {new_rank} would split a tie-block")))?;
        let cur_block = col.block_starting_at(current).expect("interval edge on a block");
        let b = boundary as u32;
        Ok(if new_block < cur_block {
            ((new_block as u32..cur_block as u32).collect(), b, b + 1)
        } else {
            ((cur_block as u32..new_block as u32).collect(), b + 1, b)
        })
    }

    /// Checks every structural invariant against a from-scratch rebuild.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::from_partitions(self.dataset.clone(), self.partitions.clone())?;
        if rebuilt.cells != self.cells {
            return Err(Error::InvalidPartition("cell counts differ from a rebuild".into()));
        }
        if rebuilt.part_totals != self.part_totals || rebuilt.part_values != self.part_values {
            return Err(Error::InvalidPartition("part totals differ from a rebuild".into()));
        }
        let total: u64 = self.cells.values().sum();
        if total != self.dataset.n_records() as u64 || self.cells.len() > self.dataset.n_records() {
            return Err(Error::InvalidPartition("cell counts do not sum to N".into()));
        }
        for (k, totals) in self.part_totals.iter().enumerate() {
            for (j, &t) in totals.iter().enumerate() {
                let from_cells: u64 = self.rows[k][j].iter().map(|key| self.cells[key]).sum();
                if from_cells != t {
                    return Err(Error::InvalidPartition(format!(
                        "N_jk mismatch for variable {k} part {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Equal-frequency cut of a numerical column into at most `max_parts`
/// intervals. A tie-block goes to the interval containing its midpoint, so
/// blocks are never split. `jitter` shifts each cut by the given fraction of
/// the nominal interval width.
pub(crate) fn equal_frequency(col: &Column, n: usize, max_parts: usize, jitter: Option<&[f64]>) -> Vec<u32> {
    let blocks = col.as_numerical().expect("numerical column").blocks();
    let parts = max_parts.min(blocks.len()).max(1);
    let width = n as f64 / parts as f64;
    let mut cuts: Vec<f64> = (1..parts)
        .map(|i| i as f64 * width + jitter.map_or(0.0, |j| j[i - 1]) * width)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(blocks.len());
    let mut seen = 0f64;
    let mut raw_prev = None;
    let mut part = 0u32;
    for b in blocks {
        let mid = seen + b.len as f64 / 2.0;
        let raw = cuts.partition_point(|&c| c <= mid);
        if let Some(prev) = raw_prev {
            if raw != prev {
                part += 1;
            }
        }
        raw_prev = Some(raw);
        out.push(part);
        seen += b.len as f64;
    }
    out
}

/// Deals `order` round-robin into at most `max_parts` groups.
pub(crate) fn round_robin(order: &[u32], max_parts: usize) -> Vec<u32> {
    let groups = max_parts.min(order.len()).max(1);
    let mut out = vec![0u32; order.len()];
    for (i, &v) in order.iter().enumerate() {
        out[v as usize] = (i % groups) as u32;
    }
    out
}

pub(crate) fn interval_label(lo: f64, hi: f64) -> String {
    format!("]{lo}, {hi}]")
}

/// Descending count, then value text.
pub(crate) fn sort_by_frequency<T>(items: &mut [T], key: impl Fn(&T) -> (&str, u64)) {
    items.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb.1.cmp(&ka.1).then_with(|| ka.0.cmp(kb.0))
    });
}

/// The first few of `names` (already in display order) in braces, with a
/// count of the rest.
pub(crate) fn group_label<'a>(names: impl Iterator<Item = &'a str>, total: usize) -> String {
    const SHOWN: usize = 3;
    let mut shown: Vec<String> = names.take(SHOWN).map(str::to_string).collect();
    if total > SHOWN {
        shown.push(format!("+{}", total - SHOWN));
    }
    format!("{{{}}}", shown.join(", "))
}
