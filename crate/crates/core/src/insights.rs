//! Reading a grid: how typical each value is of its group, and where the
//! mutual information between two variables sits.

use serde::{Deserialize, Serialize};

use crate::cost::{transfer_delta_view, Profile};
use crate::dataset::VariableKind;
use crate::error::{Error, Result};
use crate::grid::GridModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityEntry {
    pub value: String,
    pub typicality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityRanking {
    pub variable: String,
    pub cluster: usize,
    /// Descending typicality; ties by value text.
    pub entries: Vec<TypicalityEntry>,
}

/// τ(v, c) = 1/(1 − P(c)) · Σ_{c' ≠ c} P(c') · [cost after moving v from c
/// to c' − cost], with P(c) = N_c / N.
pub fn typicality(model: &GridModel, var: usize, cluster: usize) -> Result<TypicalityRanking> {
    let ds = model.dataset();
    ds.expect_kind(var, VariableKind::Categorical)?;
    let j = model.n_parts(var);
    if j < 2 {
        return Err(Error::InvalidArgument(format!(
            "typicality needs at least two groups; {} has one",
            ds.name(var)
        )));
    }
    if cluster >= j {
        return Err(Error::PartOutOfRange {
            variable: ds.name(var).to_string(),
            index: cluster,
            parts: j,
        });
    }
    let n = ds.n_records() as f64;
    let weight = |p: usize| model.part_total(var, p) as f64 / n;
    let norm = 1.0 - weight(cluster);
    let col = ds.column(var);
    let mut entries: Vec<TypicalityEntry> = model
        .partition(var)
        .atoms_of(cluster)
        .into_iter()
        .map(|v| {
            let prof = Profile::of_atoms(model, var, &[v]);
            let sum: f64 = (0..j)
                .filter(|&q| q != cluster)
                .map(|q| weight(q) * transfer_delta_view(model, var, &prof, cluster as u32, q as u32))
                .sum();
            TypicalityEntry {
                value: col.atom_label(v as usize),
                typicality: sum / norm,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.typicality
            .total_cmp(&a.typicality)
            .then_with(|| a.value.cmp(&b.value))
    });
    Ok(TypicalityRanking {
        variable: ds.name(var).to_string(),
        cluster,
        entries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Frequency,
    Cmi,
    Contrast,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSelection {
    pub variable: String,
    pub part: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsightMatrix {
    pub kind: MatrixKind,
    pub row_variable: String,
    pub row_labels: Vec<String>,
    pub col_variable: String,
    pub col_labels: Vec<String>,
    /// Fixed parts of the other variables, or the target part of a contrast.
    pub selection: Vec<PartSelection>,
    pub values: Vec<Vec<f64>>,
    /// Records behind the matrix: the slice size, or N for a contrast.
    pub total: u64,
    pub total_mi: f64,
}

impl InsightMatrix {
    /// CSV with part labels as the header row and first column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![format!("{} \\ {}", self.row_variable, self.col_variable)];
        header.extend(self.col_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Document(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 strings"))
    }
}

/// p_ij · ln(p_ij / (p_i p_j)) from counts, with 0 · log 0 = 0. The ratio
/// is formed from integer products so exact independence gives exactly 0.
fn mi_term(nij: u64, ni: u64, nj: u64, n: u64) -> f64 {
    if nij == 0 {
        return 0.0;
    }
    let num = nij as u128 * n as u128;
    let den = ni as u128 * nj as u128;
    nij as f64 / n as f64 * (num as f64 / den as f64).ln()
}

/// Plug-in mutual information of a contingency table, in nats.
pub fn plugin_mutual_information(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..table.first().map_or(0, Vec::len))
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &x) in r.iter().enumerate() {
            mi += mi_term(x, rows[i], cols[j], n);
        }
    }
    mi
}

fn labels(model: &GridModel, var: usize) -> Vec<String> {
    (0..model.n_parts(var)).map(|p| model.part_label(var, p)).collect()
}

fn check_var(model: &GridModel, var: usize) -> Result<()> {
    if var >= model.n_variables() {
        return Err(Error::InvalidArgument(format!("variable index {var} out of range")));
    }
    Ok(())
}

/// Cell counts of the (row, col) table restricted to the selected parts of
/// every other variable.
fn slice_counts(model: &GridModel, row: usize, col: usize, selection: &[(usize, usize)]) -> Result<Vec<Vec<u64>>> {
    check_var(model, row)?;
    check_var(model, col)?;
    if row == col {
        return Err(Error::InvalidArgument("row and column variables must differ".into()));
    }
    let mut fixed = vec![None; model.n_variables()];
    for &(var, part) in selection {
        check_var(model, var)?;
        if var == row || var == col || fixed[var].is_some() {
            return Err(Error::InvalidArgument(format!(
                "selection names {} twice or as a matrix axis",
                model.dataset().name(var)
            )));
        }
        if part >= model.n_parts(var) {
            return Err(Error::PartOutOfRange {
                variable: model.dataset().name(var).to_string(),
                index: part,
                parts: model.n_parts(var),
            });
        }
        fixed[var] = Some(part);
    }
    if let Some(missing) = (0..model.n_variables()).find(|&v| v != row && v != col && fixed[v].is_none()) {
        return Err(Error::InvalidArgument(format!(
            "selection must fix a part of {}",
            model.dataset().name(missing)
        )));
    }
    let mut counts = vec![vec![0u64; model.n_parts(col)]; model.n_parts(row)];
    for (tuple, n) in model.cells() {
        if fixed.iter().zip(&tuple).all(|(f, &t)| f.is_none_or(|p| p == t)) {
            counts[tuple[row]][tuple[col]] += n;
        }
    }
    Ok(counts)
}

fn named_selection(model: &GridModel, selection: &[(usize, usize)]) -> Vec<PartSelection> {
    let mut sel: Vec<PartSelection> = selection
        .iter()
        .map(|&(v, p)| PartSelection {
            variable: model.dataset().name(v).to_string(),
            part: p,
        })
        .collect();
    sel.sort_by_key(|s| model.dataset().variable_index(&s.variable).unwrap_or(usize::MAX));
    sel
}

/// Counts of the (row, col) parts within the selected slice.
pub fn frequency_matrix(
    model: &GridModel,
    row: usize,
    col: usize,
    selection: &[(usize, usize)],
) -> Result<InsightMatrix> {
    let counts = slice_counts(model, row, col, selection)?;
    let total = counts.iter().flatten().sum();
    Ok(InsightMatrix {
        kind: MatrixKind::Frequency,
        row_variable: model.dataset().name(row).to_string(),
        row_labels: labels(model, row),
        col_variable: model.dataset().name(col).to_string(),
        col_labels: labels(model, col),
        selection: named_selection(model, selection),
        total_mi: plugin_mutual_information(&counts),
        values: counts.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect(),
        total,
    })
}

/// Contribution of each (row, col) cell to the mutual information of the
/// selected slice. Probabilities are relative to the slice; a positive entry
/// marks an excess of co-occurrence, a negative one a deficit.
pub fn cmi_matrix(model: &GridModel, row: usize, col: usize, selection: &[(usize, usize)]) -> Result<InsightMatrix> {
    let counts = slice_counts(model, row, col, selection)?;
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("the selected slice holds no records".into()));
    }
    let rows: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..model.n_parts(col))
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    let values: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, &x)| mi_term(x, rows[i], cols[j], total))
                .collect()
        })
        .collect();
    Ok(InsightMatrix {
        kind: MatrixKind::Cmi,
        row_variable: model.dataset().name(row).to_string(),
        row_labels: labels(model, row),
        col_variable: model.dataset().name(col).to_string(),
        col_labels: labels(model, col),
        selection: named_selection(model, selection),
        total_mi: values.iter().flatten().sum(),
        values,
        total,
    })
}

/// Contribution of each (row, col) cell to the information that part
/// `target_part` of `target` carries about the (row, col) pair, over the whole
/// dataset: p(t, i, j) · ln[p(t, i, j) / (p(i, j) p(t))]. Other variables are
/// summed out.
pub fn contrast_matrix(
    model: &GridModel,
    target: usize,
    target_part: usize,
    row: usize,
    col: usize,
) -> Result<InsightMatrix> {
    for v in [target, row, col] {
        check_var(model, v)?;
    }
    if target == row || target == col || row == col {
        return Err(Error::InvalidArgument("contrast needs three distinct variables".into()));
    }
    if target_part >= model.n_parts(target) {
        return Err(Error::PartOutOfRange {
            variable: model.dataset().name(target).to_string(),
            index: target_part,
            parts: model.n_parts(target),
        });
    }
    let (jr, jc) = (model.n_parts(row), model.n_parts(col));
    let mut joint = vec![vec![0u64; jc]; jr];
    let mut within = vec![vec![0u64; jc]; jr];
    for (tuple, n) in model.cells() {
        joint[tuple[row]][tuple[col]] += n;
        if tuple[target] == target_part {
            within[tuple[row]][tuple[col]] += n;
        }
    }
    let n = model.dataset().n_records() as u64;
    let nt = model.part_total(target, target_part);
    let values: Vec<Vec<f64>> = (0..jr)
        .map(|i| (0..jc).map(|j| mi_term(within[i][j], joint[i][j], nt, n)).collect())
        .collect();
    Ok(InsightMatrix {
        kind: MatrixKind::Contrast,
        row_variable: model.dataset().name(row).to_string(),
        row_labels: labels(model, row),
        col_variable: model.dataset().name(col).to_string(),
        col_labels: labels(model, col),
        selection: named_selection(model, &[(target, target_part)]),
        total_mi: values.iter().flatten().sum(),
        values,
        total: n,
    })
}
