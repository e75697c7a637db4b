//! The JSON result of a training run: the optimal grid with readable part
//! descriptions, its cost, the merge hierarchy and the optimizer report. A
//! document plus the original table is enough to rebuild every model along
//! the hierarchy.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::{cost, CostBreakdown};
use crate::dataset::{Dataset, Schema, VariableKind};
use crate::error::{Error, Result};
use crate::grid::{group_label, interval_label, sort_by_frequency, GridModel, Part};
use crate::hierarchy::{information_ratio, select_step, Granularity, MergeHierarchy, MergeRecord};
use crate::insights::{typicality, InsightMatrix, TypicalityRanking};
use crate::optimizer::{OptimizationReport, OptimizerConfig, RoundReport};

pub const FORMAT_VERSION: &str = "datagrid-result/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub kind: VariableKind,
    /// Distinct values (categorical) or distinct raw values (numerical).
    pub distinct_values: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub dropped_rows: usize,
    pub schema: Schema,
    pub variables: Vec<VariableSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartDescription {
    pub label: String,
    pub records: u64,
    /// Interval bounds: `lower < x <= upper`, `null` when unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalDescription>,
    /// Group members by descending count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<ValueCount>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalDescription {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// 1-based ranks `first_rank .. end_rank` (exclusive end).
    pub first_rank: u32,
    pub end_rank: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDescription {
    pub variable: String,
    pub kind: VariableKind,
    pub parts: Vec<PartDescription>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub total_parts: usize,
    pub info_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyDescription {
    pub frozen: Vec<String>,
    pub cost_opt: f64,
    pub cost_null: f64,
    pub records: Vec<MergeRecord>,
    pub pareto: Vec<ParetoPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDescription {
    pub config: OptimizerConfig,
    pub best_round: Option<usize>,
    pub best_cost: f64,
    pub rounds: Vec<RoundReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format_version: String,
    pub dataset: DatasetSummary,
    pub model: Vec<PartitionDescription>,
    pub cost: CostBreakdown,
    pub hierarchy: HierarchyDescription,
    pub optimizer: OptimizerDescription,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typicality: Option<Vec<TypicalityRanking>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrices: Vec<InsightMatrix>,
}

/// One level of the hierarchy, rebuilt from the document alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedModel {
    pub step: usize,
    pub total_parts: usize,
    pub info_ratio: f64,
    pub cost: f64,
    pub partitions: Vec<PartitionDescription>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DocumentOptions {
    /// Keep per-round wall times; off by default so reruns are byte-identical.
    pub wall_times: bool,
    /// Precompute a typicality ranking for every categorical group.
    pub typicality: bool,
}

fn describe_partition(model: &GridModel, var: usize) -> PartitionDescription {
    let ds = model.dataset();
    let col = ds.column(var);
    let p = model.partition(var);
    let parts = p
        .parts()
        .iter()
        .enumerate()
        .map(|(j, part)| {
            let mut d = PartDescription {
                label: model.part_label(var, j),
                records: model.part_total(var, j),
                interval: None,
                values: None,
            };
            match part {
                Part::Interval { lo_rank, hi_rank } => {
                    let (lo, hi) = model.interval_bounds(var, j).expect("interval has blocks");
                    d.interval = Some(IntervalDescription {
                        lower: lo.is_finite().then_some(lo),
                        upper: hi.is_finite().then_some(hi),
                        first_rank: *lo_rank,
                        end_rank: *hi_rank,
                    });
                }
                Part::ValueGroup { value_ids } => {
                    let mut vals: Vec<ValueCount> = value_ids
                        .iter()
                        .map(|&v| ValueCount {
                            value: col.atom_label(v as usize),
                            count: col.atom_count(v as usize),
                        })
                        .collect();
                    sort_by_frequency(&mut vals, |v| (v.value.as_str(), v.count));
                    d.values = Some(vals);
                }
            }
            d
        })
        .collect();
    PartitionDescription {
        variable: ds.name(var).to_string(),
        kind: col.kind(),
        parts,
    }
}

/// The part covering `a` and the part after it, or `a` and `b` pooled.
fn merge_descriptions(a: &PartDescription, b: &PartDescription) -> Option<PartDescription> {
    let records = a.records + b.records;
    match (&a.interval, &b.interval, &a.values, &b.values) {
        (Some(lo), Some(hi), None, None) => {
            let interval = IntervalDescription {
                lower: lo.lower,
                upper: hi.upper,
                first_rank: lo.first_rank,
                end_rank: hi.end_rank,
            };
            Some(PartDescription {
                label: interval_label(
                    interval.lower.unwrap_or(f64::NEG_INFINITY),
                    interval.upper.unwrap_or(f64::INFINITY),
                ),
                records,
                interval: Some(interval),
                values: None,
            })
        }
        (None, None, Some(va), Some(vb)) => {
            let mut values: Vec<ValueCount> = va.iter().chain(vb).cloned().collect();
            sort_by_frequency(&mut values, |v| (v.value.as_str(), v.count));
            Some(PartDescription {
                label: group_label(values.iter().map(|v| v.value.as_str()), values.len()),
                records,
                interval: None,
                values: Some(values),
            })
        }
        _ => None,
    }
}

impl ResultDocument {
    pub fn build(
        config: &OptimizerConfig,
        report: &OptimizationReport,
        hierarchy: &MergeHierarchy,
        frozen: &[String],
        options: DocumentOptions,
    ) -> Result<Self> {
        let model = &report.best_model;
        let ds = model.dataset();
        let rounds = report
            .rounds
            .iter()
            .map(|r| RoundReport {
                wall_time_secs: r.wall_time_secs.filter(|_| options.wall_times),
                ..r.clone()
            })
            .collect();
        let typ = if options.typicality {
            let mut all = Vec::new();
            for var in 0..model.n_variables() {
                if ds.kind(var) == VariableKind::Categorical && model.n_parts(var) >= 2 {
                    for c in 0..model.n_parts(var) {
                        all.push(typicality(model, var, c)?);
                    }
                }
            }
            Some(all)
        } else {
            None
        };
        Ok(ResultDocument {
            format_version: FORMAT_VERSION.to_string(),
            dataset: DatasetSummary {
                records: ds.n_records(),
                dropped_rows: ds.dropped_rows(),
                schema: ds.schema().clone(),
                variables: (0..ds.n_variables())
                    .map(|k| VariableSummary {
                        name: ds.name(k).to_string(),
                        kind: ds.kind(k),
                        distinct_values: ds.column(k).n_atoms(),
                    })
                    .collect(),
            },
            model: (0..model.n_variables()).map(|k| describe_partition(model, k)).collect(),
            cost: cost(model),
            hierarchy: HierarchyDescription {
                frozen: frozen.to_vec(),
                cost_opt: hierarchy.cost_opt(),
                cost_null: hierarchy.cost_null(),
                records: hierarchy.records().to_vec(),
                pareto: hierarchy
                    .pareto_curve()
                    .into_iter()
                    .map(|(total_parts, info_ratio)| ParetoPoint {
                        total_parts,
                        info_ratio,
                    })
                    .collect(),
            },
            optimizer: OptimizerDescription {
                config: config.clone(),
                best_round: report.best_round,
                best_cost: report.best_cost,
                rounds,
            },
            typicality: typ,
            matrices: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ResultDocument = serde_json::from_str(text)?;
        doc.check_version()?;
        Ok(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let doc: ResultDocument = serde_json::from_reader(BufReader::new(f))?;
        doc.check_version()?;
        Ok(doc)
    }

    fn check_version(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "format version {:?}, expected {FORMAT_VERSION:?}",
                self.format_version
            )));
        }
        Ok(())
    }

    /// Checks that `ds` is the table this document was trained on, as far
    /// as the summary can tell.
    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        let same = ds.n_records() == self.dataset.records
            && ds.n_variables() == self.dataset.variables.len()
            && self.dataset.variables.iter().enumerate().all(|(k, v)| {
                ds.name(k) == v.name && ds.kind(k) == v.kind && ds.column(k).n_atoms() == v.distinct_values
            });
        if !same {
            return Err(Error::Document(
                "the table does not match the document's dataset summary".into(),
            ));
        }
        Ok(())
    }

    /// Rebuilds the optimal model over the original table.
    pub fn model(&self, ds: Arc<Dataset>) -> Result<GridModel> {
        self.check_dataset(&ds)?;
        let mut assignments = Vec::with_capacity(ds.n_variables());
        for (k, desc) in self.model.iter().enumerate() {
            let col = ds.column(k);
            let atom_part: Vec<u32> = match desc.kind {
                VariableKind::Categorical => {
                    let mut owner: HashMap<&str, u32> = HashMap::new();
                    for (j, p) in desc.parts.iter().enumerate() {
                        for v in p.values.iter().flatten() {
                            owner.insert(&v.value, j as u32);
                        }
                    }
                    (0..col.n_atoms())
                        .map(|a| {
                            let label = col.atom_label(a);
                            owner.get(label.as_str()).copied().ok_or_else(|| {
                                Error::Document(format!("value {label:?} of {} is in no group", desc.variable))
                            })
                        })
                        .collect::<Result<_>>()?
                }
                VariableKind::Numerical => {
                    let starts: Vec<u32> =
                        desc.parts
                            .iter()
                            .map(|p| {
                                p.interval.as_ref().map(|i| i.first_rank).ok_or_else(|| {
                                    Error::Document(format!("interval of {} without ranks", desc.variable))
                                })
                            })
                            .collect::<Result<_>>()?;
                    let num = col.as_numerical().expect("kind checked against the summary");
                    num.blocks()
                        .iter()
                        .map(|b| starts.partition_point(|&s| s <= b.first_rank) as u32 - 1)
                        .collect()
                }
            };
            assignments.push(atom_part);
        }
        GridModel::from_assignments(ds, assignments)
    }

    pub fn cost_at(&self, step: usize) -> f64 {
        match step {
            0 => self.hierarchy.cost_opt,
            s => self.hierarchy.records[s - 1].cost_after,
        }
    }

    pub fn info_ratio_at(&self, step: usize) -> f64 {
        match step {
            0 => information_ratio(
                self.hierarchy.cost_opt,
                self.hierarchy.cost_opt,
                self.hierarchy.cost_null,
            ),
            s => self.hierarchy.records[s - 1].info_ratio_after,
        }
    }

    /// Number of merges to replay for `target`.
    pub fn step_for(&self, target: &Granularity) -> Result<usize> {
        let names: Vec<&str> = self.model.iter().map(|p| p.variable.as_str()).collect();
        let shape = self.model.iter().map(|p| p.parts.len()).collect();
        select_step(target, &names, shape, &self.hierarchy.records, |s| {
            self.info_ratio_at(s)
        })
    }

    /// Part descriptions after replaying `step` merges.
    pub fn partitions_at(&self, step: usize) -> Result<Vec<PartitionDescription>> {
        let records = &self.hierarchy.records;
        if step > records.len() {
            return Err(Error::Unreachable(format!(
                "step {step} beyond the {} recorded merges",
                records.len()
            )));
        }
        let mut parts = self.model.clone();
        for r in &records[..step] {
            let p = parts
                .iter_mut()
                .find(|p| p.variable == r.variable)
                .ok_or_else(|| Error::UnknownVariable(r.variable.clone()))?;
            let (a, b) = r.parts;
            if a >= b || b >= p.parts.len() {
                return Err(Error::Document(format!("merge record {} is not a legal merge", r.step)));
            }
            let upper = p.parts.remove(b);
            let merged = merge_descriptions(&p.parts[a], &upper)
                .ok_or_else(|| Error::Document(format!("merge record {} mixes part kinds", r.step)))?;
            p.parts[a] = merged;
        }
        Ok(parts)
    }

    /// The model at `target`, described without the original table.
    pub fn simplify(&self, target: &Granularity) -> Result<SimplifiedModel> {
        let step = self.step_for(target)?;
        let partitions = self.partitions_at(step)?;
        Ok(SimplifiedModel {
            step,
            total_parts: partitions.iter().map(|p| p.parts.len()).sum(),
            info_ratio: self.info_ratio_at(step),
            cost: self.cost_at(step),
            partitions,
        })
    }

    /// Rebuilds the model and the merge hierarchy over the original table.
    pub fn hierarchy(&self, ds: Arc<Dataset>) -> Result<MergeHierarchy> {
        let model = self.model(ds)?;
        MergeHierarchy::from_records(
            model,
            self.hierarchy.records.clone(),
            self.hierarchy.cost_opt,
            self.hierarchy.cost_null,
        )
    }
}
