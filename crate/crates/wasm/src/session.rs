//! Everything the page does, in plain Rust so it runs under native tests.

use std::sync::Arc;

use datagrid::synthetic::generate_shared;
use datagrid::{
    build_hierarchy, cmi_matrix, contrast_matrix, frequency_matrix, read_table, typicality, vns_optimize, Dataset,
    DocumentOptions, Granularity, GridModel, GroundTruth, InsightMatrix, MatrixKind, MergeHierarchy, OptimizerConfig,
    PlantSpec, Result, ResultDocument, Schema, TypicalityRanking, VariableKind,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize)]
pub struct VariableView {
    pub name: String,
    pub kind: VariableKind,
    pub parts: usize,
    pub labels: Vec<String>,
}

/// What the page shows next to the heatmap.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub records: usize,
    pub step: usize,
    pub steps: usize,
    pub total_parts: usize,
    pub info_ratio: f64,
    pub cost: f64,
    pub cost_null: f64,
    pub variables: Vec<VariableView>,
    /// (total parts, information ratio) along the hierarchy.
    pub pareto: Vec<(usize, f64)>,
    /// ARI of each variable against the planted partition, at this step.
    pub recovery: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct MatrixRequest {
    pub kind: MatrixKind,
    pub row: usize,
    pub col: usize,
    /// Parts fixed on the other variables (frequency and CMI).
    #[serde(default)]
    pub selection: Vec<(usize, usize)>,
    /// (variable, part) whose contrast is shown.
    #[serde(default)]
    pub target: Option<(usize, usize)>,
}

pub struct Session {
    doc: ResultDocument,
    hierarchy: MergeHierarchy,
    truth: Option<GroundTruth>,
    step: usize,
    model: GridModel,
}

impl Session {
    fn train(ds: Arc<Dataset>, config: &OptimizerConfig, truth: Option<GroundTruth>) -> Result<Session> {
        let frozen = config.frozen_mask(&ds)?;
        let report = vns_optimize(ds, config)?;
        let hierarchy = build_hierarchy(&report.best_model, &frozen);
        let freeze: Vec<String> = config.freeze.iter().cloned().collect();
        let doc = ResultDocument::build(config, &report, &hierarchy, &freeze, DocumentOptions::default())?;
        Ok(Session {
            doc,
            model: report.best_model,
            hierarchy,
            truth,
            step: 0,
        })
    }

    pub fn generate(spec: &PlantSpec, config: &OptimizerConfig) -> Result<Session> {
        let (ds, truth) = generate_shared(spec)?;
        Self::train(ds, config, Some(truth))
    }

    pub fn from_table(text: &str, schema: &Schema, config: &OptimizerConfig) -> Result<Session> {
        let ds = read_table(text.as_bytes(), schema)?;
        Self::train(Arc::new(ds), config, None)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn model(&self) -> &GridModel {
        &self.model
    }

    pub fn set_step(&mut self, step: usize) -> Result<()> {
        self.model = self.hierarchy.model_at_step(step)?;
        self.step = step;
        Ok(())
    }

    /// Moves to the coarsest level keeping at least `ratio` of the
    /// information and returns its step.
    pub fn set_info_ratio(&mut self, ratio: f64) -> Result<usize> {
        let step = self.hierarchy.step_for(&Granularity::InfoRatio(ratio))?;
        self.set_step(step)?;
        Ok(step)
    }

    pub fn summary(&self) -> Result<Summary> {
        let ds = self.model.dataset();
        let recovery = match &self.truth {
            Some(t) => Some(
                (0..ds.n_variables())
                    .map(|k| t.recovery(&self.model, k))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };
        Ok(Summary {
            records: ds.n_records(),
            step: self.step,
            steps: self.hierarchy.len(),
            total_parts: self.model.total_parts(),
            info_ratio: self.hierarchy.info_ratio_at(self.step),
            cost: self.hierarchy.cost_at(self.step),
            cost_null: self.hierarchy.cost_null(),
            variables: (0..ds.n_variables())
                .map(|k| VariableView {
                    name: ds.name(k).to_string(),
                    kind: ds.kind(k),
                    parts: self.model.n_parts(k),
                    labels: (0..self.model.n_parts(k))
                        .map(|j| self.model.part_label(k, j))
                        .collect(),
                })
                .collect(),
            pareto: self.hierarchy.pareto_curve(),
            recovery,
        })
    }

    pub fn matrix(&self, req: &MatrixRequest) -> Result<InsightMatrix> {
        match req.kind {
            MatrixKind::Frequency => frequency_matrix(&self.model, req.row, req.col, &req.selection),
            MatrixKind::Cmi => cmi_matrix(&self.model, req.row, req.col, &req.selection),
            MatrixKind::Contrast => {
                let (t, p) = req
                    .target
                    .ok_or_else(|| datagrid::Error::InvalidArgument("a contrast matrix needs a target part".into()))?;
                contrast_matrix(&self.model, t, p, req.row, req.col)
            }
        }
    }

    pub fn typicality(&self, var: usize, cluster: usize) -> Result<TypicalityRanking> {
        typicality(&self.model, var, cluster)
    }

    /// The result document of the optimum, as the command-line tool writes it.
    pub fn document(&self) -> Result<String> {
        self.doc.to_json()
    }
}
