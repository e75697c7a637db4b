//! Plants a 3 × 3 structure in a categorical × numerical table, recovers it,
//! then coarsens it along the merge hierarchy.
//!
//! `cargo run --release -p datagrid --example planted`

use datagrid::synthetic::generate_shared;
use datagrid::{
    build_hierarchy, cmi_matrix, typicality, vns_optimize, Granularity, OptimizerConfig, PlantSpec, PlantedVariable,
};

fn main() -> datagrid::Result<()> {
    let spec = PlantSpec::diagonal(
        vec![
            PlantedVariable::categorical("shop", 3, 6),
            PlantedVariable::numerical("price", 3),
        ],
        0.1,
        5000,
        7,
    );
    let (ds, truth) = generate_shared(&spec)?;

    let config = OptimizerConfig::default();
    let report = vns_optimize(ds.clone(), &config)?;
    let best = &report.best_model;
    println!("optimum: shape {:?}, cost {:.3}", best.shape(), report.best_cost);
    for k in 0..ds.n_variables() {
        println!("  {} recovered with ARI {:.3}", ds.name(k), truth.recovery(best, k)?);
        for j in 0..best.n_parts(k) {
            println!("    {}", best.part_label(k, j));
        }
    }

    let ranking = typicality(best, 0, 0)?;
    let top: Vec<&str> = ranking.entries.iter().take(3).map(|e| e.value.as_str()).collect();
    println!("most typical values of the first shop group: {top:?}");

    let cmi = cmi_matrix(best, 0, 1, &[])?;
    println!(
        "mutual information between shop and price parts: {:.4} nats",
        cmi.total_mi
    );

    let hierarchy = build_hierarchy(best, &config.frozen_mask(&ds)?);
    for (parts, ratio) in hierarchy.pareto_curve() {
        println!("  {parts} parts keep {:.1}% of the information", 100.0 * ratio);
    }
    let coarse = hierarchy.model_at(&Granularity::InfoRatio(0.5))?;
    println!("coarsest grid keeping half the information: shape {:?}", coarse.shape());
    Ok(())
}
