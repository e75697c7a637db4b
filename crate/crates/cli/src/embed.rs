//! Matrices precomputed into a result document so a viewer never needs the
//! table.

use anyhow::{bail, Result};
use datagrid::{cmi_matrix, contrast_matrix, frequency_matrix, GridModel, InsightMatrix};

/// Keeps documents of high-dimensional grids to a readable size.
const MAX_MATRICES: usize = 512;

/// Every combination of one part per variable in `vars`.
fn selections(model: &GridModel, vars: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for &v in vars {
        out = out
            .into_iter()
            .flat_map(|sel: Vec<(usize, usize)>| {
                (0..model.n_parts(v)).map(move |p| {
                    let mut s = sel.clone();
                    s.push((v, p));
                    s
                })
            })
            .collect();
    }
    out
}

/// Frequency and CMI matrices for every variable pair and every slice of the
/// remaining variables, then contrast matrices for every part of every third
/// variable.
pub fn matrices(model: &GridModel) -> Result<Vec<InsightMatrix>> {
    let k = model.n_variables();
    let mut out = Vec::new();
    for row in 0..k {
        for col in row + 1..k {
            let others: Vec<usize> = (0..k).filter(|&v| v != row && v != col).collect();
            for sel in selections(model, &others) {
                let freq = frequency_matrix(model, row, col, &sel)?;
                if freq.total > 0 {
                    out.push(freq);
                    out.push(cmi_matrix(model, row, col, &sel)?);
                }
            }
            for &target in &others {
                for part in 0..model.n_parts(target) {
                    out.push(contrast_matrix(model, target, part, row, col)?);
                }
            }
            if out.len() > MAX_MATRICES {
                bail!(
                    "embedding would store more than {MAX_MATRICES} matrices; export the ones you need with \
                     the cmi, contrast and freq commands instead"
                );
            }
        }
    }
    Ok(out)
}
