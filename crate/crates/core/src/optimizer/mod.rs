//! Search for the MAP grid: greedy bottom-up merging, post-optimization by
//! value and boundary moves, and independent randomized restarts.

mod merge;
mod moves;
mod work;

pub(crate) use merge::MergeEngine;
pub(crate) use work::WorkGrid;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::cost;
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};
use crate::grid::{equal_frequency, round_robin, GridModel};

/// Greedy/post-optimization alternations per round are capped here.
const MAX_OUTER_ITERATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub vns_rounds: usize,
    pub seed: u64,
    /// Parts per variable in the starting grids; ⌈√N⌉ when unset.
    pub max_initial_parts: Option<usize>,
    pub post_opt_sweeps: usize,
    /// Variables held at a single part and never edited.
    pub freeze: BTreeSet<String>,
    /// Worker threads for concurrent rounds; the global pool when unset.
    pub threads: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            vns_rounds: 10,
            seed: 0,
            max_initial_parts: None,
            post_opt_sweeps: 2,
            freeze: BTreeSet::new(),
            threads: None,
        }
    }
}

impl OptimizerConfig {
    pub fn initial_parts(&self, n_records: usize) -> usize {
        self.max_initial_parts
            .unwrap_or_else(|| (n_records as f64).sqrt().ceil() as usize)
            .max(1)
    }

    /// Checks the settings against a dataset and returns the frozen mask.
    pub fn frozen_mask(&self, ds: &Dataset) -> Result<Vec<bool>> {
        if self.vns_rounds == 0 {
            return Err(Error::InvalidArgument("vns_rounds must be at least 1".into()));
        }
        if self.max_initial_parts == Some(0) {
            return Err(Error::InvalidArgument("max_initial_parts must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        frozen_mask(ds, &self.freeze)
    }
}

pub(crate) fn frozen_mask<S: AsRef<str>>(ds: &Dataset, names: impl IntoIterator<Item = S>) -> Result<Vec<bool>> {
    let mut mask = vec![false; ds.n_variables()];
    for name in names {
        mask[ds.variable_index(name.as_ref())?] = true;
    }
    Ok(mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub seed: u64,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub merges: usize,
    pub moves: usize,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizationReport {
    pub best_model: GridModel,
    pub best_cost: f64,
    /// Round that produced the best model; `None` when no round beat the
    /// null model and it was kept instead.
    pub best_round: Option<usize>,
    pub null_cost: f64,
    pub rounds: Vec<RoundReport>,
}

/// Applies the cheapest merge over all non-frozen variables while it strictly
/// lowers the cost.
pub fn greedy_merge_optimize(model: &GridModel, frozen: &[bool]) -> GridModel {
    let mut g = WorkGrid::from_model(model);
    greedy(&mut g, &mask_or_default(model, frozen));
    g.to_model()
}

/// Value moves for categorical variables and boundary moves for numerical
/// ones, one variable at a time in schema order, for up to `sweeps` rounds.
pub fn post_optimize(model: &GridModel, sweeps: usize, frozen: &[bool]) -> GridModel {
    let mut g = WorkGrid::from_model(model);
    moves::post_optimize(&mut g, sweeps, &mask_or_default(model, frozen));
    g.to_model()
}

fn mask_or_default(model: &GridModel, frozen: &[bool]) -> Vec<bool> {
    let mut mask = vec![false; model.n_variables()];
    for (m, &f) in mask.iter_mut().zip(frozen) {
        *m = f;
    }
    mask
}

fn greedy(g: &mut WorkGrid, frozen: &[bool]) -> usize {
    let mut eng = MergeEngine::new(g, frozen);
    let mut merges = 0;
    while let Some(c) = eng.select(g) {
        if c.delta >= 0.0 {
            break;
        }
        eng.apply(g, &c);
        merges += 1;
    }
    merges
}

/// Seed of round `round` under master seed `seed`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    // splitmix64 finalizer over the offset seed
    let mut z = seed.wrapping_add((round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A starting grid with at most `max_parts` parts per variable: values are
/// shuffled before being dealt round-robin into groups, interval cuts are
/// jittered by up to half an interval width. Frozen variables get one part.
pub fn randomized_initial_model(ds: Arc<Dataset>, max_parts: usize, frozen: &[bool], seed: u64) -> Result<GridModel> {
    if max_parts == 0 {
        return Err(Error::InvalidArgument("max_parts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignments = ds
        .columns()
        .iter()
        .enumerate()
        .map(|(k, col)| {
            if frozen.get(k).copied().unwrap_or(false) {
                return vec![0u32; col.n_atoms()];
            }
            match col {
                Column::Categorical(c) => {
                    let mut order: Vec<u32> = (0..c.values().len() as u32).collect();
                    order.shuffle(&mut rng);
                    round_robin(&order, max_parts)
                }
                Column::Numerical(_) => {
                    let jitter: Vec<f64> = (0..max_parts).map(|_| rng.random_range(-0.5..0.5)).collect();
                    equal_frequency(col, ds.n_records(), max_parts, Some(&jitter))
                }
            }
        })
        .collect();
    GridModel::from_assignments(ds, assignments)
}

// Bare wasm has no clock; rounds there report no wall time.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn clock() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn clock() -> Option<std::time::Instant> {
    None
}

/// One restart: greedy merging and post-optimization alternate until
/// neither changes the grid.
fn run_round(
    ds: &Arc<Dataset>,
    config: &OptimizerConfig,
    frozen: &[bool],
    round: usize,
) -> Result<(RoundReport, GridModel)> {
    let start = clock();
    let seed = round_seed(config.seed, round);
    let init = randomized_initial_model(ds.clone(), config.initial_parts(ds.n_records()), frozen, seed)?;
    let initial_cost = cost(&init).total;
    let mut g = WorkGrid::from_model(&init);
    let (mut merges, mut moved, mut iterations) = (0, 0, 0);
    while iterations < MAX_OUTER_ITERATIONS {
        iterations += 1;
        merges += greedy(&mut g, frozen);
        let m = moves::post_optimize(&mut g, config.post_opt_sweeps, frozen);
        moved += m;
        if m == 0 {
            break;
        }
    }
    let model = g.to_model();
    let report = RoundReport {
        round,
        seed,
        initial_cost,
        final_cost: cost(&model).total,
        merges,
        moves: moved,
        iterations,
        wall_time_secs: start.map(|t| t.elapsed().as_secs_f64()),
    };
    Ok((report, model))
}

#[cfg(feature = "parallel")]
fn run_rounds(ds: &Arc<Dataset>, config: &OptimizerConfig, frozen: &[bool]) -> Result<Vec<(RoundReport, GridModel)>> {
    use rayon::prelude::*;
    let job = || {
        (0..config.vns_rounds)
            .into_par_iter()
            .map(|r| run_round(ds, config, frozen, r))
            .collect::<Result<Vec<_>>>()
    };
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_rounds(ds: &Arc<Dataset>, config: &OptimizerConfig, frozen: &[bool]) -> Result<Vec<(RoundReport, GridModel)>> {
    (0..config.vns_rounds)
        .map(|r| run_round(ds, config, frozen, r))
        .collect()
}

/// Multi-start search. Rounds are independent; the result is the cheapest
/// final grid (lowest round on ties), or the null model if it is cheaper
/// still.
pub fn vns_optimize(ds: Arc<Dataset>, config: &OptimizerConfig) -> Result<OptimizationReport> {
    let frozen = config.frozen_mask(&ds)?;
    let results = run_rounds(&ds, config, &frozen)?;
    let null = GridModel::null_model(ds.clone());
    let null_cost = cost(&null).total;
    let mut best: Option<(usize, f64)> = None;
    for (i, (r, _)) in results.iter().enumerate() {
        if best.is_none_or(|(_, c)| r.final_cost < c) {
            best = Some((i, r.final_cost));
        }
    }
    let (best_idx, best_cost) = best.expect("at least one round");
    let mut rounds = Vec::with_capacity(results.len());
    let mut best_model = None;
    for (i, (r, m)) in results.into_iter().enumerate() {
        if i == best_idx {
            best_model = Some(m);
        }
        rounds.push(r);
    }
    let (best_model, best_cost, best_round) = if null_cost < best_cost {
        (null, null_cost, None)
    } else {
        (best_model.expect("best round kept"), best_cost, Some(best_idx))
    };
    Ok(OptimizationReport {
        best_model,
        best_cost,
        best_round,
        null_cost,
        rounds,
    })
}
