//! Agglomerative simplification of an optimized grid, one merge at a time,
//! down to a single part per variable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::cost;
use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::optimizer::{MergeEngine, WorkGrid};

/// One merge. Part indices are positions among the variable's parts just
/// before the merge; the merged part takes `result` (the lower of the two)
/// and every part above the higher index shifts down by one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub step: usize,
    pub variable: String,
    pub parts: (usize, usize),
    pub result: usize,
    pub delta: f64,
    pub cost_after: f64,
    pub info_ratio_after: f64,
}

#[derive(Clone, Debug)]
pub struct MergeHierarchy {
    base: GridModel,
    records: Vec<MergeRecord>,
    cost_opt: f64,
    cost_null: f64,
}

/// Where to stop along the hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub enum Granularity {
    /// The first model with at most this many parts in total.
    TotalParts(usize),
    /// The first model where each listed variable has at most its count.
    PartsPerVariable(BTreeMap<String, usize>),
    /// The coarsest model whose information ratio is at least this.
    InfoRatio(f64),
}

/// (cost(M) − cost(M_∅)) / (cost(M*) − cost(M_∅)), clamped to [0, 1]. A
/// degenerate optimum equal to the null model scores 1.
pub fn information_ratio(cost_m: f64, cost_opt: f64, cost_null: f64) -> f64 {
    let span = cost_opt - cost_null;
    if span == 0.0 {
        return 1.0;
    }
    ((cost_m - cost_null) / span).clamp(0.0, 1.0)
}

/// Neumaier-compensated running sum.
struct Running {
    sum: f64,
    comp: f64,
}

impl Running {
    fn add(&mut self, x: f64) -> f64 {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        t + self.comp
    }
}

/// Merges the cheapest pair over all non-frozen variables at every step,
/// whatever the sign of its delta, until each of them has one part.
pub fn build_hierarchy(m_star: &GridModel, frozen: &[bool]) -> MergeHierarchy {
    let ds = m_star.dataset();
    let mut mask = vec![false; m_star.n_variables()];
    for (m, &f) in mask.iter_mut().zip(frozen) {
        *m = f;
    }
    let cost_opt = cost(m_star).total;
    let cost_null = cost(&GridModel::null_model(ds.clone())).total;
    let mut g = WorkGrid::from_model(m_star);
    let mut eng = MergeEngine::new(&g, &mask);
    let mut running = Running {
        sum: cost_opt,
        comp: 0.0,
    };
    let mut records = Vec::new();
    while let Some(c) = eng.select(&g) {
        let (a, b) = (g.compact_index(c.var, c.a), g.compact_index(c.var, c.b));
        eng.apply(&mut g, &c);
        let cost_after = running.add(c.delta);
        records.push(MergeRecord {
            step: records.len() + 1,
            variable: ds.name(c.var).to_string(),
            parts: (a, b),
            result: a,
            delta: c.delta,
            cost_after,
            info_ratio_after: information_ratio(cost_after, cost_opt, cost_null),
        });
    }
    // the last model is M_∅ itself; store its cost rather than the rounded sum
    if g.to_model().total_parts() == g.n_variables() {
        if let Some(last) = records.last_mut() {
            last.cost_after = cost_null;
            last.info_ratio_after = 0.0;
        }
    }
    MergeHierarchy {
        base: m_star.clone(),
        records,
        cost_opt,
        cost_null,
    }
}

/// Step selection over a record list, shared by in-memory hierarchies and
/// stored documents. `names` and `shape` describe the base model.
pub(crate) fn select_step(
    target: &Granularity,
    names: &[&str],
    mut shape: Vec<usize>,
    records: &[MergeRecord],
    info_ratio_at: impl Fn(usize) -> f64,
) -> Result<usize> {
    let steps = records.len();
    let index = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    };
    match target {
        Granularity::InfoRatio(r) => {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::Unreachable(format!("information ratio {r} is outside [0, 1]")));
            }
            Ok((0..=steps).rev().find(|&s| info_ratio_at(s) >= *r).unwrap_or(0))
        }
        Granularity::TotalParts(n) => {
            let total: usize = shape.iter().sum();
            if total.saturating_sub(steps) > *n {
                return Err(Error::Unreachable(format!(
                    "the coarsest model has {} parts, more than {n}",
                    total - steps
                )));
            }
            Ok(total.saturating_sub(*n).min(steps))
        }
        Granularity::PartsPerVariable(want) => {
            let mut limits = Vec::new();
            for (name, &count) in want {
                let var = index(name)?;
                let top = shape[var];
                if count == 0 || count > top {
                    return Err(Error::Unreachable(format!(
                        "{name}: {count} parts requested, the optimum has {top}"
                    )));
                }
                limits.push((var, count));
            }
            let ok = |shape: &[usize]| limits.iter().all(|&(v, c)| shape[v] <= c);
            if ok(&shape) {
                return Ok(0);
            }
            for (i, r) in records.iter().enumerate() {
                shape[index(&r.variable)?] -= 1;
                if ok(&shape) {
                    return Ok(i + 1);
                }
            }
            Err(Error::Unreachable(
                "requested part counts are below the frozen floor".into(),
            ))
        }
    }
}

impl MergeHierarchy {
    /// Reassembles a hierarchy from stored parts, checking that every record
    /// is a legal merge of the model it applies to.
    pub fn from_records(base: GridModel, records: Vec<MergeRecord>, cost_opt: f64, cost_null: f64) -> Result<Self> {
        let h = MergeHierarchy {
            base,
            records,
            cost_opt,
            cost_null,
        };
        let mut shape = h.base.shape();
        for (i, r) in h.records.iter().enumerate() {
            let var = h.base.dataset().variable_index(&r.variable)?;
            let (a, b) = r.parts;
            if r.step != i + 1 || a >= b || b >= shape[var] || r.result != a {
                return Err(Error::Document(format!("merge record {} is not a legal merge", i + 1)));
            }
            if h.base.partition(var).kind() == crate::VariableKind::Numerical && b != a + 1 {
                return Err(Error::Document(format!(
                    "merge record {} joins non-adjacent intervals",
                    i + 1
                )));
            }
            shape[var] -= 1;
        }
        Ok(h)
    }

    pub fn base(&self) -> &GridModel {
        &self.base
    }

    pub fn records(&self) -> &[MergeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cost_opt(&self) -> f64 {
        self.cost_opt
    }

    pub fn cost_null(&self) -> f64 {
        self.cost_null
    }

    /// Cost after `step` merges (step 0 is the base model).
    pub fn cost_at(&self, step: usize) -> f64 {
        if step == 0 {
            self.cost_opt
        } else {
            self.records[step - 1].cost_after
        }
    }

    pub fn info_ratio_at(&self, step: usize) -> f64 {
        if step == 0 {
            information_ratio(self.cost_opt, self.cost_opt, self.cost_null)
        } else {
            self.records[step - 1].info_ratio_after
        }
    }

    /// Part counts per variable after `step` merges.
    pub fn shape_at(&self, step: usize) -> Result<Vec<usize>> {
        let mut shape = self.base.shape();
        for r in &self.records[..step.min(self.records.len())] {
            shape[self.base.dataset().variable_index(&r.variable)?] -= 1;
        }
        Ok(shape)
    }

    /// Number of merges to replay for `target`.
    pub fn step_for(&self, target: &Granularity) -> Result<usize> {
        let ds = self.base.dataset();
        let names: Vec<&str> = (0..ds.n_variables()).map(|k| ds.name(k)).collect();
        select_step(target, &names, self.base.shape(), &self.records, |s| {
            self.info_ratio_at(s)
        })
    }

    /// Atom → part assignments after replaying `step` merges.
    pub fn assignments_at(&self, step: usize) -> Result<Vec<Vec<u32>>> {
        if step > self.records.len() {
            return Err(Error::Unreachable(format!(
                "step {step} beyond the {} recorded merges",
                self.records.len()
            )));
        }
        let ds = self.base.dataset();
        let mut assign: Vec<Vec<u32>> = self.base.partitions().iter().map(|p| p.atom_part().to_vec()).collect();
        for r in &self.records[..step] {
            let var = ds.variable_index(&r.variable)?;
            let (a, b) = (r.parts.0 as u32, r.parts.1 as u32);
            for j in assign[var].iter_mut() {
                if *j == b {
                    *j = a;
                } else if *j > b {
                    *j -= 1;
                }
            }
        }
        Ok(assign)
    }

    pub fn model_at_step(&self, step: usize) -> Result<GridModel> {
        GridModel::from_assignments(self.base.dataset().clone(), self.assignments_at(step)?)
    }

    pub fn model_at(&self, target: &Granularity) -> Result<GridModel> {
        self.model_at_step(self.step_for(target)?)
    }

    /// (total parts, information ratio) for the base model and after each
    /// merge.
    pub fn pareto_curve(&self) -> Vec<(usize, f64)> {
        let total = self.base.total_parts();
        (0..=self.records.len())
            .map(|s| (total - s, self.info_ratio_at(s)))
            .collect()
    }
}
