//! Parameter-free K-dimensional data grid coclustering.
//!
//! A data grid model partitions every variable at once (intervals for
//! numerical variables, value groups for categorical ones); the Cartesian
//! product of the parts is a grid of cells whose counts estimate the joint
//! distribution. The best grid minimizes a MAP cost criterion, found here by
//! greedy agglomerative merging with move-based post-optimization inside a
//! multi-start search. The optimum can then be coarsened along a merge
//! hierarchy and inspected through typicality rankings and mutual-information
//! matrices.

pub mod cost;
pub mod dataset;
pub mod document;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod insights;
pub mod optimizer;
pub mod synthetic;

pub use cost::{cost, delta_boundary, delta_merge, delta_move, CostBreakdown};
pub use dataset::{load_table, read_table, Dataset, RawColumn, Schema, VariableKind, VariableSpec};
pub use document::{DocumentOptions, ResultDocument, SimplifiedModel, FORMAT_VERSION};
pub use error::{Error, Result};
pub use grid::{GridModel, Part, VariablePartition};
pub use hierarchy::{build_hierarchy, information_ratio, Granularity, MergeHierarchy, MergeRecord};
pub use insights::{
    cmi_matrix, contrast_matrix, frequency_matrix, typicality, InsightMatrix, MatrixKind, TypicalityRanking,
};
pub use optimizer::{
    greedy_merge_optimize, post_optimize, vns_optimize, OptimizationReport, OptimizerConfig, RoundReport,
};
pub use synthetic::{adjusted_rand_index, generate, CellDistribution, GroundTruth, PlantSpec, PlantedVariable};
