//! Datasets with a planted grid, and partition agreement scores for checking
//! that the optimizer recovers it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RawColumn, Schema, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::grid::GridModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedVariable {
    pub name: String,
    pub kind: VariableKind,
    pub parts: usize,
    /// Distinct values per group; ignored for numerical variables, whose
    /// part `j` draws uniformly from `[j, j + 1)`.
    #[serde(default = "one")]
    pub values_per_part: usize,
}

fn one() -> usize {
    1
}

impl PlantedVariable {
    pub fn categorical(name: impl Into<String>, parts: usize, values_per_part: usize) -> Self {
        PlantedVariable {
            name: name.into(),
            kind: VariableKind::Categorical,
            parts,
            values_per_part,
        }
    }

    pub fn numerical(name: impl Into<String>, parts: usize) -> Self {
        PlantedVariable {
            name: name.into(),
            kind: VariableKind::Numerical,
            parts,
            values_per_part: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CellDistribution {
    /// (1 − ε)/D on each of the D = min_k J_k diagonal cells (i, i, …, i),
    /// plus ε spread evenly over every cell.
    DiagonalDominant { noise: f64 },
    /// One probability per cell, in cell order with the first variable
    /// varying fastest.
    Explicit { probabilities: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub variables: Vec<PlantedVariable>,
    pub cells: CellDistribution,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlantedPartition {
    Categorical {
        name: String,
        /// Planted group of every value, generated or not.
        value_part: BTreeMap<String, usize>,
    },
    Numerical {
        name: String,
        /// Interior cut points, ascending.
        cuts: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub variables: Vec<PlantedPartition>,
}

impl PlantSpec {
    pub fn diagonal(variables: Vec<PlantedVariable>, noise: f64, n: usize, seed: u64) -> Self {
        PlantSpec {
            variables,
            cells: CellDistribution::DiagonalDominant { noise },
            n,
            seed,
        }
    }

    fn grid_size(&self) -> usize {
        self.variables.iter().map(|v| v.parts).product()
    }

    /// Cell probabilities in generation order.
    pub fn cell_probabilities(&self) -> Result<Vec<f64>> {
        let g = self.grid_size();
        match &self.cells {
            CellDistribution::DiagonalDominant { noise } => {
                if !(0.0..=1.0).contains(noise) {
                    return Err(Error::InvalidArgument(format!("noise {noise} is outside [0, 1]")));
                }
                let d = self.variables.iter().map(|v| v.parts).min().unwrap_or(1);
                let mut p = vec![noise / g as f64; g];
                let diag_step: usize = {
                    // index of (1, 1, …, 1): the sum of the strides
                    let mut stride = 1;
                    let mut s = 0;
                    for v in &self.variables {
                        s += stride;
                        stride *= v.parts;
                    }
                    s
                };
                for i in 0..d {
                    p[i * diag_step] += (1.0 - noise) / d as f64;
                }
                Ok(p)
            }
            CellDistribution::Explicit { probabilities } => {
                if probabilities.len() != g {
                    return Err(Error::InvalidArgument(format!(
                        "{} cell probabilities for a grid of {g} cells",
                        probabilities.len()
                    )));
                }
                if probabilities.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                    return Err(Error::InvalidArgument("cell probabilities must be non-negative".into()));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "cell probabilities sum to {sum}, not 1"
                    )));
                }
                Ok(probabilities.clone())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.variables.len() < 2 {
            return Err(Error::InvalidArgument(
                "a planted grid needs at least two variables".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        for v in &self.variables {
            if v.parts == 0 {
                return Err(Error::InvalidArgument(format!("{}: at least one part", v.name)));
            }
            if v.kind == VariableKind::Categorical && v.values_per_part == 0 {
                return Err(Error::InvalidArgument(format!(
                    "{}: {} parts but no values to fill them",
                    v.name, v.parts
                )));
            }
        }
        if self
            .variables
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.parts))
            .is_none_or(|g| g > 1 << 24)
        {
            return Err(Error::InvalidArgument("planted grid has too many cells".into()));
        }
        Ok(())
    }
}

fn value_name(var: &PlantedVariable, part: usize, i: usize) -> String {
    format!("{}{}", var.name, part * var.values_per_part + i)
}

/// Draws `spec.n` records: a cell from the cell distribution, then a value
/// uniformly within each of the cell's parts.
pub fn generate(spec: &PlantSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let probs = spec.cell_probabilities()?;
    let cells = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.variables.len();
    let mut cat: Vec<Vec<String>> = vec![Vec::with_capacity(spec.n); k];
    let mut num: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.n); k];
    for _ in 0..spec.n {
        let mut idx = cells.sample(&mut rng);
        for (var, v) in spec.variables.iter().enumerate() {
            let part = idx % v.parts;
            idx /= v.parts;
            match v.kind {
                VariableKind::Categorical => {
                    let i = rng.random_range(0..v.values_per_part);
                    cat[var].push(value_name(v, part, i));
                }
                VariableKind::Numerical => num[var].push(part as f64 + rng.random::<f64>()),
            }
        }
    }
    let schema = Schema::new(
        spec.variables
            .iter()
            .map(|v| VariableSpec::new(v.name.clone(), v.kind))
            .collect(),
    )?;
    let raw = spec
        .variables
        .iter()
        .enumerate()
        .map(|(var, v)| match v.kind {
            VariableKind::Categorical => RawColumn::Categorical(std::mem::take(&mut cat[var])),
            VariableKind::Numerical => RawColumn::Numerical(std::mem::take(&mut num[var])),
        })
        .collect();
    let ds = Dataset::from_columns(schema, raw)?;
    let truth = GroundTruth {
        variables: spec
            .variables
            .iter()
            .map(|v| match v.kind {
                VariableKind::Categorical => PlantedPartition::Categorical {
                    name: v.name.clone(),
                    value_part: (0..v.parts)
                        .flat_map(|p| (0..v.values_per_part).map(move |i| (p, i)))
                        .map(|(p, i)| (value_name(v, p, i), p))
                        .collect(),
                },
                VariableKind::Numerical => PlantedPartition::Numerical {
                    name: v.name.clone(),
                    cuts: (1..v.parts).map(|j| j as f64).collect(),
                },
            })
            .collect(),
    };
    Ok((ds, truth))
}

impl GroundTruth {
    fn planted(&self, name: &str) -> Result<&PlantedPartition> {
        self.variables
            .iter()
            .find(|p| match p {
                PlantedPartition::Categorical { name: n, .. } | PlantedPartition::Numerical { name: n, .. } => {
                    n == name
                }
            })
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Planted part of every atom (value or tie-block) of `var`.
    pub fn atom_labels(&self, ds: &Dataset, var: usize) -> Result<Vec<usize>> {
        let col = ds.column(var);
        match self.planted(ds.name(var))? {
            PlantedPartition::Categorical { value_part, .. } => {
                ds.expect_kind(var, VariableKind::Categorical)?;
                let c = col.as_categorical().expect("checked kind");
                c.values()
                    .iter()
                    .map(|v| {
                        value_part
                            .get(v)
                            .copied()
                            .ok_or_else(|| Error::InvalidArgument(format!("value {v} is not in the ground truth")))
                    })
                    .collect()
            }
            PlantedPartition::Numerical { cuts, .. } => {
                ds.expect_kind(var, VariableKind::Numerical)?;
                let c = col.as_numerical().expect("checked kind");
                Ok(c.blocks()
                    .iter()
                    .map(|b| cuts.partition_point(|&cut| cut <= b.value))
                    .collect())
            }
        }
    }

    /// ARI between the planted and the model's partition of `var`, over its
    /// atoms.
    pub fn recovery(&self, model: &GridModel, var: usize) -> Result<f64> {
        let truth = self.atom_labels(model.dataset(), var)?;
        let found: Vec<usize> = model.partition(var).atom_part().iter().map(|&p| p as usize).collect();
        adjusted_rand_index(&truth, &found)
    }
}

fn pairs(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index of two labelings of the same elements. Two labelings
/// that are both trivial in the same way (the expected index already equals
/// the maximum) score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "partitions of {} and {} elements",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Convenience for tests and the demo: generate and wrap in an `Arc`.
pub fn generate_shared(spec: &PlantSpec) -> Result<(Arc<Dataset>, GroundTruth)> {
    generate(spec).map(|(d, t)| (Arc::new(d), t))
}
