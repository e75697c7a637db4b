//! Acceptance suite: one line per criterion, nonzero exit if any fails.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use datagrid::synthetic::generate_shared;
use datagrid::{
    build_hierarchy, cmi_matrix, contrast_matrix, cost, delta_boundary, delta_merge, delta_move, typicality,
    vns_optimize, CellDistribution, Dataset, DocumentOptions, GridModel, OptimizerConfig, Part, PlantSpec,
    PlantedVariable, ResultDocument, VariableKind,
};
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    check(
        t < limit,
        format!("took {:.1}s, limit {:.0}s", t.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn toy_cost() -> Outcome {
    let start = Instant::now();
    let ds = dataset(vec![("u", cat(&["a", "b"])), ("v", cat(&["x", "y"]))]);
    let c = cost(&GridModel::null_model(ds)).total;
    let expected = 4.0 * 2f64.ln() + 2.0 * 3f64.ln();
    check((c - expected).abs() <= 1e-9, format!("cost {c}, expected {expected}"))?;
    check((c - 4.969813).abs() <= 1e-6, format!("cost {c} is not 4.969813"))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("cost(M_null) = {c:.9}, |err| = {:.1e}", (c - expected).abs()))
}

/// Legal boundary positions of `model`'s variable `var`: (boundary, new rank).
fn boundary_moves(model: &GridModel, var: usize) -> Vec<(usize, u32)> {
    let col = model.dataset().column(var).as_numerical().expect("numerical");
    let parts = model.partition(var).parts();
    let mut out = Vec::new();
    for b in 0..parts.len().saturating_sub(1) {
        let (Part::Interval { lo_rank, hi_rank: cur }, Part::Interval { hi_rank: right_hi, .. }) =
            (&parts[b], &parts[b + 1])
        else {
            unreachable!()
        };
        for blk in col.blocks() {
            let r = blk.first_rank;
            if r > *lo_rank && r < *right_hi && r != *cur {
                out.push((b, r));
            }
        }
    }
    out
}

fn delta_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(2024);
    let (mut datasets, mut checks, mut worst) = (0, 0usize, 0.0f64);
    while datasets < 120 {
        let n = rng.random_range(1..=8);
        let ds = random_small(&mut rng, n, 2, 3);
        datasets += 1;
        for assign in all_assignments(&ds) {
            let m = GridModel::from_assignments(ds.clone(), assign).unwrap();
            let base = cost(&m).total;
            let base_oracle = oracle_cost(&m);
            worst = worst.max((base - base_oracle).abs());
            let mut record = |delta: f64, after: &GridModel| {
                let full = cost(after).total - base;
                let oracle = oracle_cost(after) - base_oracle;
                worst = worst.max((delta - full).abs()).max((delta - oracle).abs());
                checks += 1;
            };
            for var in 0..2 {
                let j = m.n_parts(var);
                for a in 0..j {
                    for b in 0..j {
                        if a == b || (ds.kind(var) == VariableKind::Numerical && a.abs_diff(b) != 1) {
                            continue;
                        }
                        record(delta_merge(&m, var, a, b).unwrap(), &m.merge_parts(var, a, b).unwrap());
                    }
                }
                match ds.kind(var) {
                    VariableKind::Categorical => {
                        for (v, &p) in m.partition(var).atom_part().iter().enumerate() {
                            for q in 0..j {
                                if q != p as usize {
                                    let d = delta_move(&m, var, v, p as usize, q).unwrap();
                                    record(d, &m.move_value(var, v, p as usize, q).unwrap());
                                }
                            }
                        }
                    }
                    VariableKind::Numerical => {
                        for (b, r) in boundary_moves(&m, var) {
                            let d = delta_boundary(&m, var, b, r).unwrap();
                            record(d, &m.move_boundary(var, b, r).unwrap());
                        }
                    }
                }
            }
        }
    }
    check(worst <= 1e-9, format!("max |Δ − recompute| = {worst:.3e}"))?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("{datasets} datasets, {checks} edits, max |err| = {worst:.2e}"))
}

fn planted_2d() -> PlantSpec {
    PlantSpec::diagonal(
        vec![
            PlantedVariable::categorical("row", 3, 10),
            PlantedVariable::categorical("col", 3, 10),
        ],
        0.05,
        5000,
        11,
    )
}

fn planted_3d() -> PlantSpec {
    PlantSpec::diagonal(
        vec![
            PlantedVariable::categorical("a", 2, 10),
            PlantedVariable::categorical("b", 2, 10),
            PlantedVariable::numerical("x", 2),
        ],
        0.05,
        20000,
        12,
    )
}

fn recovery(spec: &PlantSpec) -> Result<(Vec<f64>, f64), String> {
    let start = Instant::now();
    let (ds, truth) = generate_shared(spec).map_err(|e| e.to_string())?;
    let config = OptimizerConfig {
        seed: 1,
        ..OptimizerConfig::default()
    };
    let rep = vns_optimize(ds.clone(), &config).map_err(|e| e.to_string())?;
    let aris = (0..ds.n_variables())
        .map(|k| truth.recovery(&rep.best_model, k).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((aris, start.elapsed().as_secs_f64()))
}

fn planted_recovery() -> Outcome {
    let (a2, t2) = recovery(&planted_2d())?;
    check(a2.iter().all(|&a| a == 1.0), format!("2D ARI {a2:?}"))?;
    check(t2 < 120.0, format!("2D took {t2:.1}s"))?;
    let (a3, t3) = recovery(&planted_3d())?;
    check(a3.iter().all(|&a| a >= 0.95), format!("3D ARI {a3:?}"))?;
    check(t3 < 120.0, format!("3D took {t3:.1}s"))?;
    Ok(format!("2D ARI {a2:?} in {t2:.2}s; 3D ARI {a3:?} in {t3:.2}s"))
}

fn regularization() -> Outcome {
    let mut null_runs = 0;
    for seed in 0..5 {
        let spec = PlantSpec::diagonal(
            vec![
                PlantedVariable::categorical("a", 10, 1),
                PlantedVariable::categorical("b", 10, 1),
            ],
            1.0,
            1000,
            100 + seed,
        );
        let (ds, _) = generate_shared(&spec).map_err(|e| e.to_string())?;
        let rep = vns_optimize(
            ds,
            &OptimizerConfig {
                seed,
                ..OptimizerConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        if rep.best_model.total_parts() == 2 {
            null_runs += 1;
        }
    }
    check(null_runs >= 4, format!("M_null in {null_runs}/5 runs"))?;
    Ok(format!("M_null returned in {null_runs}/5 runs"))
}

/// Hierarchy checks on one base model; `exhaustive` also scans every legal
/// merge at every step. Steps where the information ratio rises are returned
/// rather than treated as errors so the remaining checks still run.
fn hierarchy_checks(base: &GridModel, exhaustive: bool) -> Result<Vec<(usize, f64, f64)>, String> {
    let h = build_hierarchy(base, &[]);
    let expected: usize = base.shape().iter().map(|j| j - 1).sum();
    check(h.len() == expected, format!("{} records, expected {expected}", h.len()))?;
    check(h.info_ratio_at(0) == 1.0, format!("IR(M*) = {}", h.info_ratio_at(0)))?;
    check(
        h.info_ratio_at(h.len()) == 0.0,
        format!("IR(end) = {}", h.info_ratio_at(h.len())),
    )?;
    let rises: Vec<(usize, f64, f64)> = (1..=h.len())
        .filter(|&s| h.info_ratio_at(s) > h.info_ratio_at(s - 1))
        .map(|s| (s, h.info_ratio_at(s - 1), h.info_ratio_at(s)))
        .collect();
    let end = h.model_at_step(h.len()).map_err(|e| e.to_string())?;
    let end_cost = cost(&end).total;
    check(
        (end_cost - h.cost_null()).abs() <= 1e-9,
        format!("replayed end cost {end_cost} vs {}", h.cost_null()),
    )?;
    if exhaustive {
        for (s, r) in h.records().iter().enumerate() {
            let m = h.model_at_step(s).map_err(|e| e.to_string())?;
            let mut best = f64::INFINITY;
            for var in 0..m.n_variables() {
                let j = m.n_parts(var);
                for a in 0..j {
                    for b in a + 1..j {
                        if let Ok(d) = delta_merge(&m, var, a, b) {
                            best = best.min(d);
                        }
                    }
                }
            }
            check(
                (r.delta - best).abs() <= 1e-9,
                format!("step {}: Δ {} but min {best}", r.step, r.delta),
            )?;
            let var = m.dataset().variable_index(&r.variable).map_err(|e| e.to_string())?;
            let after = m.merge_parts(var, r.parts.0, r.parts.1).map_err(|e| e.to_string())?;
            let full = cost(&after).total - cost(&m).total;
            check(
                (r.delta - full).abs() <= 1e-9,
                format!("step {}: Δ {} vs recompute {full}", r.step, r.delta),
            )?;
        }
    }
    Ok(rises)
}

fn hierarchy() -> Outcome {
    let (mut small, mut skipped) = (0, 0);
    let mut rises = Vec::new();
    for i in 0..20u64 {
        let vars = if i % 2 == 0 {
            vec![
                PlantedVariable::categorical("a", 3, 2),
                PlantedVariable::numerical("x", 2),
            ]
        } else {
            vec![
                PlantedVariable::categorical("a", 2, 2),
                PlantedVariable::categorical("b", 2, 2),
                PlantedVariable::numerical("x", 2),
            ]
        };
        let (ds, _) = generate_shared(&PlantSpec::diagonal(vars, 0.3, 150, 500 + i)).map_err(|e| e.to_string())?;
        let config = OptimizerConfig {
            vns_rounds: 3,
            seed: i,
            ..OptimizerConfig::default()
        };
        let m_star = vns_optimize(ds, &config).map_err(|e| e.to_string())?.best_model;
        if m_star.shape().iter().all(|&j| j == 1) {
            skipped += 1;
            continue;
        }
        for (s, from, to) in hierarchy_checks(&m_star, true).map_err(|e| format!("small instance {i}: {e}"))? {
            rises.push(format!("small {i} step {s}: {from:.4}->{to:.4}"));
        }
        small += 1;
    }
    check(small >= 15, format!("only {small} small instances had structure"))?;
    let mut planted = 0;
    for (name, spec) in [("2D", planted_2d()), ("3D", planted_3d())] {
        let (ds, _) = generate_shared(&spec).map_err(|e| e.to_string())?;
        let m_star = vns_optimize(ds, &OptimizerConfig::default())
            .map_err(|e| e.to_string())?
            .best_model;
        for (s, from, to) in hierarchy_checks(&m_star, true).map_err(|e| format!("planted {name}: {e}"))? {
            rises.push(format!("planted {name} step {s}: {from:.4}->{to:.4}"));
        }
        planted += 1;
    }
    check(
        rises.is_empty(),
        format!(
            "counts, endpoints, min-Δ scan and replay hold on all {} optima, but IR rises after a \
             negative-Δ merge on {} step(s): {}",
            small + planted,
            rises.len(),
            rises.join("; ")
        ),
    )?;
    Ok(format!(
        "{small} small ({skipped} null optima skipped) and {planted} planted optima: counts, endpoints, monotone IR, min-Δ scan, replay"
    ))
}

fn cmi() -> Outcome {
    let indep = dataset(vec![
        ("r", cat(&["a", "a", "b", "b"])),
        ("c", cat(&["x", "y", "x", "y"])),
    ]);
    let m = GridModel::from_assignments(indep, vec![vec![0, 1], vec![0, 1]]).unwrap();
    let c = cmi_matrix(&m, 0, 1, &[]).map_err(|e| e.to_string())?;
    check(
        c.values.iter().flatten().all(|&v| v == 0.0),
        "independence table has a nonzero entry",
    )?;
    check(c.total_mi == 0.0, "independence total is not 0")?;

    let diag = dataset(vec![
        ("r", cat(&["a", "a", "b", "b"])),
        ("c", cat(&["x", "x", "y", "y"])),
    ]);
    let m = GridModel::from_assignments(diag, vec![vec![0, 1], vec![0, 1]]).unwrap();
    let c = cmi_matrix(&m, 0, 1, &[]).map_err(|e| e.to_string())?;
    check(
        (c.total_mi - 2f64.ln()).abs() <= 1e-12,
        format!("diagonal total {}", c.total_mi),
    )?;

    let mut rng = rng(5);
    let mut worst = 0.0f64;
    let mut min_total = f64::INFINITY;
    for _ in 0..200 {
        let ds = random_small(&mut rng, 60, 3, 4);
        let m = random_model(&mut rng, &ds);
        for (row, col, other) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
            for part in 0..m.n_parts(other) {
                let Ok(c) = cmi_matrix(&m, row, col, &[(other, part)]) else {
                    continue; // empty slice
                };
                let f = datagrid::frequency_matrix(&m, row, col, &[(other, part)]).unwrap();
                let table: Vec<Vec<u64>> = f.values.iter().map(|r| r.iter().map(|&x| x as u64).collect()).collect();
                worst = worst.max((c.total_mi - plugin_mi(&table)).abs());
                min_total = min_total.min(c.total_mi);
            }
        }
    }
    check(worst <= 1e-9, format!("slice MI vs plug-in oracle {worst:.2e}"))?;
    check(min_total >= -1e-12, format!("negative total MI {min_total}"))?;
    Ok(format!(
        "exact zeros, log 2 diagonal, oracle err {worst:.1e}, min total {min_total:.1e}"
    ))
}

/// The direct three-way formula over a count tensor.
fn contrast_oracle(t: &[[[u64; 2]; 2]; 2], s: usize) -> [[f64; 2]; 2] {
    let n: u64 = t.iter().flatten().flatten().sum();
    let nf = n as f64;
    let ps: f64 = t[s].iter().flatten().sum::<u64>() as f64 / nf;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let p = t[s][i][j] as f64 / nf;
            let p12 = (t[0][i][j] + t[1][i][j]) as f64 / nf;
            if p > 0.0 {
                out[i][j] = p * (p / (p12 * ps)).ln();
            }
        }
    }
    out
}

fn tensor_dataset(t: &[[[u64; 2]; 2]; 2]) -> Arc<Dataset> {
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for _ in 0..t[s][i][j] {
                    a.push(format!("s{s}"));
                    b.push(format!("i{i}"));
                    c.push(format!("j{j}"));
                }
            }
        }
    }
    let col = |v: Vec<String>| datagrid::RawColumn::Categorical(v);
    dataset(vec![("s", col(a)), ("r", col(b)), ("c", col(c))])
}

fn contrast() -> Outcome {
    let t = [[[30, 5], [7, 12]], [[4, 9], [11, 6]]];
    let ds = tensor_dataset(&t);
    let m = GridModel::from_assignments(
        ds.clone(),
        (0..3).map(|k| (0..ds.column(k).n_atoms() as u32).collect()).collect(),
    )
    .unwrap();
    // first appearance order matches s0/s1, i0/i1, j0/j1
    let mut worst = 0.0f64;
    let mut three_way = 0.0;
    let mut oracle_three_way = 0.0;
    for s in 0..2 {
        let c = contrast_matrix(&m, 0, s, 1, 2).map_err(|e| e.to_string())?;
        let o = contrast_oracle(&t, s);
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((c.values[i][j] - o[i][j]).abs());
                oracle_three_way += o[i][j];
            }
        }
        three_way += c.total_mi;
    }
    check(worst <= 1e-12, format!("contrast vs oracle {worst:.2e}"))?;
    check((three_way - oracle_three_way).abs() <= 1e-9, "three-way sum differs")?;

    let single = GridModel::from_assignments(ds, vec![vec![0, 0], vec![0, 1], vec![0, 1]]).unwrap();
    let c = contrast_matrix(&single, 0, 0, 1, 2).map_err(|e| e.to_string())?;
    check(
        c.values.iter().flatten().all(|&v| v == 0.0),
        "single-part target gives nonzero contrast",
    )?;
    Ok(format!("2×2×2 oracle err {worst:.1e}; single-part target all zero"))
}

fn typicality_check() -> Outcome {
    // J = 2: the general formula reduces to the move delta
    let mut rng = rng(9);
    let mut worst_reduction = 0.0f64;
    let mut worst_full = 0.0f64;
    for _ in 0..30 {
        let vals: Vec<String> = (0..80).map(|_| format!("v{}", rng.random_range(0..6))).collect();
        let other: Vec<String> = (0..80).map(|_| format!("w{}", rng.random_range(0..3))).collect();
        let ds = dataset(vec![
            ("a", datagrid::RawColumn::Categorical(vals)),
            ("b", datagrid::RawColumn::Categorical(other)),
        ]);
        let va = ds.column(0).n_atoms();
        let vb = ds.column(1).n_atoms() as u32;
        for j in [2u32, 3] {
            if va < j as usize {
                continue;
            }
            let assign: Vec<u32> = (0..va as u32).map(|v| v % j).collect();
            let m = GridModel::from_assignments(ds.clone(), vec![assign, (0..vb).collect()]).unwrap();
            let base = cost(&m).total;
            let n = ds.n_records() as f64;
            for c in 0..j as usize {
                let t = typicality(&m, 0, c).map_err(|e| e.to_string())?;
                let pc = m.part_total(0, c) as f64 / n;
                for e in &t.entries {
                    let v = ds.column(0).as_categorical().unwrap().value_id(&e.value).unwrap() as usize;
                    let mut full = 0.0;
                    for q in (0..j as usize).filter(|&q| q != c) {
                        let moved = m.move_value(0, v, c, q).unwrap();
                        full += m.part_total(0, q) as f64 / n * (cost(&moved).total - base);
                    }
                    full /= 1.0 - pc;
                    worst_full = worst_full.max((e.typicality - full).abs());
                    if j == 2 {
                        let d = delta_move(&m, 0, v, c, 1 - c).unwrap();
                        worst_reduction = worst_reduction.max((e.typicality - d).abs());
                    }
                }
            }
        }
    }
    check(
        worst_reduction <= 1e-9,
        format!("J=2 reduction err {worst_reduction:.2e}"),
    )?;
    check(worst_full <= 1e-9, format!("full recompute err {worst_full:.2e}"))?;

    // native vs foreign: both values sit in cluster 0; "native" follows the
    // cluster's conditional, "foreign" the other cluster's
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut push = |value: &str, dist: [u32; 2]| {
        for (w, &k) in dist.iter().enumerate() {
            for _ in 0..k {
                a.push(value.to_string());
                b.push(format!("w{w}"));
            }
        }
    };
    for v in ["n1", "n2", "n3"] {
        push(v, [90, 10]);
    }
    push("native", [90, 10]);
    push("foreign", [10, 90]);
    for v in ["o1", "o2", "o3", "o4"] {
        push(v, [10, 90]);
    }
    let ds = dataset(vec![
        ("a", datagrid::RawColumn::Categorical(a)),
        ("b", datagrid::RawColumn::Categorical(b)),
    ]);
    let col = ds.column(0).as_categorical().unwrap();
    let assign: Vec<u32> = col.values().iter().map(|v| u32::from(v.starts_with('o'))).collect();
    let m = GridModel::from_assignments(ds.clone(), vec![assign, vec![0, 1]]).unwrap();
    let t = typicality(&m, 0, 0).map_err(|e| e.to_string())?;
    let tau = |name: &str| t.entries.iter().find(|e| e.value == name).unwrap().typicality;
    check(
        tau("native") > tau("foreign"),
        format!("native {} <= foreign {}", tau("native"), tau("foreign")),
    )?;
    Ok(format!(
        "J=2 err {worst_reduction:.1e}, full recompute err {worst_full:.1e}, τ(native) {:.1} > τ(foreign) {:.1}",
        tau("native"),
        tau("foreign")
    ))
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn delta_jsd() -> Outcome {
    let p1 = [0.4, 0.3, 0.2, 0.1];
    let p2 = [0.1, 0.2, 0.3, 0.4];
    let (w1, w2) = (0.6, 0.4);
    // cell order: the first variable (the two clusters) varies fastest
    let mut probs = Vec::new();
    for j in 0..4 {
        probs.push(w1 * p1[j]);
        probs.push(w2 * p2[j]);
    }
    let spec = PlantSpec {
        variables: vec![
            PlantedVariable::categorical("c", 2, 1),
            PlantedVariable::categorical("y", 4, 1),
        ],
        cells: CellDistribution::Explicit { probabilities: probs },
        n: 100_000,
        seed: 3,
    };
    let (ds, _) = generate_shared(&spec).map_err(|e| e.to_string())?;
    let ids = |k: usize| (0..ds.column(k).n_atoms() as u32).collect::<Vec<_>>();
    let m = GridModel::from_assignments(ds.clone(), vec![ids(0), ids(1)]).unwrap();
    let n = ds.n_records() as f64;
    let delta = delta_merge(&m, 0, 0, 1).map_err(|e| e.to_string())?;
    let mix: Vec<f64> = (0..4).map(|j| w1 * p1[j] + w2 * p2[j]).collect();
    let jsd = entropy(&mix) - w1 * entropy(&p1) - w2 * entropy(&p2);
    let ratio = delta / n / jsd;
    check(
        (ratio - 1.0).abs() <= 0.15,
        format!("Δ/N = {:.5}, JSD = {jsd:.5}", delta / n),
    )?;
    Ok(format!(
        "Δ/N = {:.5}, weighted JSD = {jsd:.5}, ratio {ratio:.4}",
        delta / n
    ))
}

fn scaling_family(n: usize) -> PlantSpec {
    PlantSpec::diagonal(
        vec![
            PlantedVariable::numerical("x", 4),
            PlantedVariable::categorical("c", 4, 10),
        ],
        0.2,
        n,
        13,
    )
}

fn train_document(ds: Arc<Dataset>, config: &OptimizerConfig) -> Result<String, String> {
    let rep = vns_optimize(ds, config).map_err(|e| e.to_string())?;
    let h = build_hierarchy(&rep.best_model, &[]);
    let doc = ResultDocument::build(config, &rep, &h, &[], DocumentOptions::default()).map_err(|e| e.to_string())?;
    doc.to_json().map_err(|e| e.to_string())
}

fn determinism_and_scaling() -> Outcome {
    let (ds, _) = generate_shared(&planted_3d()).map_err(|e| e.to_string())?;
    let config = OptimizerConfig {
        seed: 99,
        ..OptimizerConfig::default()
    };
    let a = train_document(ds.clone(), &config)?;
    let b = train_document(ds, &config)?;
    check(a == b, "reruns produced different documents")?;

    let mut times = Vec::new();
    for n in [50_000, 200_000] {
        let (ds, _) = generate_shared(&scaling_family(n)).map_err(|e| e.to_string())?;
        let start = Instant::now();
        vns_optimize(ds, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        times.push(start.elapsed().as_secs_f64());
    }
    let ratio = times[1] / times[0];
    check(
        ratio <= 16.0,
        format!("time ratio {ratio:.2} ({:.2}s vs {:.2}s)", times[1], times[0]),
    )?;
    Ok(format!(
        "byte-identical reruns ({} bytes); t(2e5)/t(5e4) = {:.2}s/{:.2}s = {ratio:.2}",
        a.len(),
        times[1],
        times[0]
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("cost oracle", toy_cost),
        ("exhaustive delta equivalence", delta_equivalence),
        ("planted recovery", planted_recovery),
        ("regularization", regularization),
        ("hierarchy", hierarchy),
        ("cmi", cmi),
        ("contrast", contrast),
        ("typicality", typicality_check),
        ("delta-JSD asymptotics", delta_jsd),
        ("determinism and scaling", determinism_and_scaling),
    ];
    let only: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail}) [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({why}) [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
