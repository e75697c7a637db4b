//! Independent reference implementations for the integration tests. Nothing
//! here calls into the crate's cost code: factorials are naive log sums,
//! Stirling numbers are exact integers, and cells are counted record by
//! record.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use datagrid::{Dataset, GridModel, RawColumn, Schema, VariableKind, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn lf(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub fn lbinom(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    lf(n) - lf(k) - lf(n - k)
}

/// S(n, k) exactly, for n small enough to fit u128.
pub fn stirling2(n: usize, k: usize) -> u128 {
    let mut t = vec![vec![0u128; n + 1]; n + 1];
    t[0][0] = 1;
    for i in 1..=n {
        for j in 1..=i {
            t[i][j] = j as u128 * t[i - 1][j] + t[i - 1][j - 1];
        }
    }
    if k > n {
        0
    } else {
        t[n][k]
    }
}

pub fn log_b(v: usize, j: usize) -> f64 {
    let s: u128 = (1..=j.min(v)).map(|i| stirling2(v, i)).sum();
    (s as f64).ln()
}

/// The criterion evaluated term by term from the records.
pub fn oracle_cost(model: &GridModel) -> f64 {
    let ds = model.dataset();
    let n = ds.n_records() as u64;
    let k = ds.n_variables();
    let mut total = 0.0;
    let mut g = 1u64;
    for var in 0..k {
        g *= model.n_parts(var) as u64;
    }
    // prior
    for var in 0..k {
        let col = ds.column(var);
        let j = model.n_parts(var);
        match ds.kind(var) {
            VariableKind::Numerical => total += (n as f64).ln(),
            VariableKind::Categorical => {
                let v = col.n_atoms();
                total += (v as f64).ln();
                total += log_b(v, j);
                for part in 0..j {
                    let members: Vec<usize> = (0..v)
                        .filter(|&a| model.partition(var).atom_part()[a] as usize == part)
                        .collect();
                    let m = members.len() as u64;
                    let nj: u64 = members.iter().map(|&a| col.atom_count(a)).sum();
                    total += lbinom(nj + m - 1, m - 1);
                }
            }
        }
    }
    total += lbinom(n + g - 1, g - 1);
    // likelihood
    let mut cells: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut part_n: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); k];
    let mut value_n: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); k];
    for rec in 0..n as usize {
        let tuple: Vec<usize> = (0..k).map(|v| model.part_of_record(v, rec)).collect();
        for v in 0..k {
            *part_n[v].entry(tuple[v]).or_insert(0) += 1;
            *value_n[v].entry(ds.column(v).atom_of(rec)).or_insert(0) += 1;
        }
        *cells.entry(tuple).or_insert(0) += 1;
    }
    total += lf(n);
    total -= cells.values().map(|&c| lf(c)).sum::<f64>();
    for v in 0..k {
        total += part_n[v].values().map(|&c| lf(c)).sum::<f64>();
        if ds.kind(v) == VariableKind::Categorical {
            total -= value_n[v].values().map(|&c| lf(c)).sum::<f64>();
        }
    }
    total
}

pub fn dataset(vars: Vec<(&str, RawColumn)>) -> Arc<Dataset> {
    let specs = vars
        .iter()
        .map(|(name, c)| {
            let kind = match c {
                RawColumn::Categorical(_) => VariableKind::Categorical,
                RawColumn::Numerical(_) => VariableKind::Numerical,
            };
            VariableSpec::new(*name, kind)
        })
        .collect();
    let raw = vars.into_iter().map(|(_, c)| c).collect();
    Arc::new(Dataset::from_columns(Schema::new(specs).unwrap(), raw).unwrap())
}

pub fn cat(values: &[&str]) -> RawColumn {
    RawColumn::Categorical(values.iter().map(|s| s.to_string()).collect())
}

/// A small random dataset: `n` records, each variable categorical or
/// numerical at random with at most `max_values` distinct values.
pub fn random_small(rng: &mut ChaCha8Rng, n: usize, k: usize, max_values: usize) -> Arc<Dataset> {
    let vars: Vec<(String, RawColumn)> = (0..k)
        .map(|i| {
            let v = rng.random_range(1..=max_values);
            let col = if rng.random_bool(0.5) {
                RawColumn::Categorical((0..n).map(|_| format!("v{}", rng.random_range(0..v))).collect())
            } else {
                RawColumn::Numerical((0..n).map(|_| rng.random_range(0..v) as f64).collect())
            };
            (format!("x{i}"), col)
        })
        .collect();
    dataset(vars.iter().map(|(n, c)| (n.as_str(), c.clone())).collect())
}

/// Every partition of `n` items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<u32>, max: u32, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for label in 0..=max + 1 {
            if i == 0 && label > 0 {
                break;
            }
            cur.push(label);
            rec(i + 1, n, cur, if i == 0 { 0 } else { max.max(label) }, out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// Every split of `n` ordered items into contiguous runs.
pub fn compositions(n: usize) -> Vec<Vec<u32>> {
    (0..1u64 << n.saturating_sub(1))
        .map(|mask| {
            let mut part = 0u32;
            (0..n)
                .map(|i| {
                    if i > 0 && mask >> (i - 1) & 1 == 1 {
                        part += 1;
                    }
                    part
                })
                .collect()
        })
        .collect()
}

/// Every partition of every variable.
pub fn all_assignments(ds: &Dataset) -> Vec<Vec<Vec<u32>>> {
    let per_var: Vec<Vec<Vec<u32>>> = (0..ds.n_variables())
        .map(|v| {
            let a = ds.column(v).n_atoms();
            match ds.kind(v) {
                VariableKind::Categorical => set_partitions(a),
                VariableKind::Numerical => compositions(a),
            }
        })
        .collect();
    let mut out = vec![vec![]];
    for options in per_var {
        let mut next = Vec::new();
        for prefix in &out {
            for o in &options {
                let mut p = prefix.clone();
                p.push(o.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub fn random_model(rng: &mut ChaCha8Rng, ds: &Arc<Dataset>) -> GridModel {
    let all = all_assignments(ds);
    let pick = all[rng.random_range(0..all.len())].clone();
    GridModel::from_assignments(ds.clone(), pick).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plug-in mutual information from probabilities, as a textbook would.
pub fn plugin_mi(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    let nf = n as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64 / nf).collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64 / nf)
        .collect();
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / nf;
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

/// Spearman rank correlation (no tie correction needed for continuous scores).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
