mod embed;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use datagrid::synthetic::PlantedPartition;
use datagrid::{
    build_hierarchy, cmi_matrix, contrast_matrix, frequency_matrix, generate, load_table, typicality, vns_optimize,
    CellDistribution, Dataset, DocumentOptions, Granularity, GridModel, InsightMatrix, OptimizerConfig, PlantSpec,
    PlantedVariable, ResultDocument, Schema, VariableKind, VariableSpec,
};

#[derive(Parser)]
#[command(name = "datagrid", version, about = "Parameter-free data grid coclustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the best grid for a table and write a result document.
    Train(TrainArgs),
    /// Coarsen a trained grid along its merge hierarchy.
    Simplify(SimplifyArgs),
    /// Rank the values of one categorical group by typicality.
    Typicality(TypicalityArgs),
    /// Per-cell contributions to the mutual information of two variables.
    Cmi(PairArgs),
    /// Per-cell contributions of one part of a third variable.
    Contrast(ContrastArgs),
    /// Record counts of two variables' parts.
    Freq(PairArgs),
    /// Write a table with planted structure plus its ground truth.
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct SchemaArgs {
    /// Variable as name:kind (kind is categorical or numerical), in column order.
    #[arg(long = "var", value_name = "NAME:KIND")]
    vars: Vec<String>,
    /// JSON schema file: {"variables": [{"name", "kind"}], "delimiter", "has_header"}.
    #[arg(long, value_name = "FILE", conflicts_with = "vars")]
    config: Option<PathBuf>,
    /// Field separator: a single character, or `tab`.
    #[arg(long, value_name = "CHAR")]
    delimiter: Option<String>,
    /// The table has no header row.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct TrainArgs {
    table: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    vns_rounds: usize,
    /// Parts per variable in the starting grids (default ⌈√N⌉).
    #[arg(long)]
    max_initial_parts: Option<usize>,
    /// Keep this variable at a single part during training and at its
    /// trained parts during simplification.
    #[arg(long, value_name = "NAME")]
    freeze: Vec<String>,
    /// Worker threads for the search rounds.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Precompute typicality rankings for every categorical group.
    #[arg(long)]
    typicality: bool,
    /// Store frequency, CMI and contrast matrices of the optimum in the document.
    #[arg(long)]
    embed_matrices: bool,
    /// Keep per-round wall times (makes the output run-dependent).
    #[arg(long)]
    wall_times: bool,
}

#[derive(Args, Default)]
#[group(multiple = false)]
struct GranularityArgs {
    /// Stop at this many parts in total.
    #[arg(long, value_name = "N")]
    clusters: Option<usize>,
    /// Stop once each listed variable has at most its count, e.g. a=3,b=2.
    #[arg(long, value_name = "NAME=K,...")]
    per_var: Option<String>,
    /// Stop at the coarsest model keeping at least this information ratio.
    #[arg(long, value_name = "R")]
    info_ratio: Option<f64>,
}

#[derive(Args)]
struct SimplifyArgs {
    result: PathBuf,
    #[command(flatten)]
    granularity: GranularityArgs,
    /// Simplified model report (JSON); standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Pareto curve of (parts, information ratio) as CSV.
    #[arg(long, value_name = "FILE")]
    pareto: Option<PathBuf>,
}

#[derive(Args)]
struct TypicalityArgs {
    result: PathBuf,
    table: PathBuf,
    #[arg(long)]
    variable: String,
    /// Group index at the chosen granularity.
    #[arg(long)]
    cluster: usize,
    /// Keep only the first T values.
    #[arg(long, value_name = "T")]
    top: Option<usize>,
    #[command(flatten)]
    granularity: GranularityArgs,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixOutput {
    #[command(flatten)]
    granularity: GranularityArgs,
    /// Matrix CSV; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the matrix as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    result: PathBuf,
    table: PathBuf,
    #[arg(long)]
    row: String,
    #[arg(long)]
    col: String,
    /// Fix a part of another variable, as name=part (repeatable).
    #[arg(long, value_name = "NAME=PART")]
    select: Vec<String>,
    #[command(flatten)]
    output: MatrixOutput,
}

#[derive(Args)]
struct ContrastArgs {
    result: PathBuf,
    table: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    part: usize,
    #[arg(long)]
    row: String,
    #[arg(long)]
    col: String,
    #[command(flatten)]
    output: MatrixOutput,
}

#[derive(Args)]
struct GenArgs {
    /// Planted variable as name:categorical:parts:values_per_part or
    /// name:numerical:parts.
    #[arg(long = "var", value_name = "SPEC", required_unless_present = "spec")]
    vars: Vec<String>,
    /// Full generator spec as JSON instead of --var/--noise/--records.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["vars", "noise", "records", "cells"])]
    spec: Option<PathBuf>,
    /// Share of records spread uniformly over all cells.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// JSON array of cell probabilities, first variable fastest; replaces the diagonal.
    #[arg(long, value_name = "FILE")]
    cells: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    records: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Field separator of the written table.
    #[arg(long, value_name = "CHAR")]
    delimiter: Option<String>,
    /// The table; the ground truth goes to <out>.truth.json.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn parse_delimiter(text: &str) -> Result<char> {
    match text {
        "tab" | "\\t" | "\t" => Ok('\t'),
        _ => {
            let mut chars = text.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => bail!("delimiter must be a single character, got {text:?}"),
            }
        }
    }
}

impl SchemaArgs {
    fn resolve(&self) -> Result<Schema> {
        let mut schema = if let Some(path) = &self.config {
            Schema::from_json_file(path)?
        } else {
            if self.vars.is_empty() {
                bail!("give the columns with --var name:kind or a --config file");
            }
            let specs = self
                .vars
                .iter()
                .map(|v| VariableSpec::parse(v))
                .collect::<datagrid::Result<Vec<_>>>()?;
            Schema::new(specs)?
        };
        if let Some(d) = &self.delimiter {
            schema = schema.with_delimiter(parse_delimiter(d)?);
        }
        if self.no_header {
            schema = schema.with_header(false);
        }
        Ok(schema)
    }
}

impl GranularityArgs {
    fn target(&self) -> Result<Option<Granularity>> {
        if let Some(n) = self.clusters {
            return Ok(Some(Granularity::TotalParts(n)));
        }
        if let Some(r) = self.info_ratio {
            return Ok(Some(Granularity::InfoRatio(r)));
        }
        if let Some(spec) = &self.per_var {
            let mut want = BTreeMap::new();
            for item in spec.split(',').filter(|s| !s.is_empty()) {
                let (name, count) = item
                    .split_once('=')
                    .ok_or_else(|| anyhow!("expected name=count in --per-var, got {item:?}"))?;
                let count = count.trim().parse().with_context(|| format!("bad count in {item:?}"))?;
                want.insert(name.trim().to_string(), count);
            }
            if want.is_empty() {
                bail!("--per-var lists no variables");
            }
            return Ok(Some(Granularity::PartsPerVariable(want)));
        }
        Ok(None)
    }
}

/// Writes to the file, or to standard output when there is none.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let schema = args.schema.resolve()?;
    let ds = Arc::new(load_table(&args.table, &schema)?);
    let config = OptimizerConfig {
        vns_rounds: args.vns_rounds,
        seed: args.seed,
        max_initial_parts: args.max_initial_parts,
        freeze: args.freeze.iter().cloned().collect::<BTreeSet<_>>(),
        threads: args.threads,
        ..OptimizerConfig::default()
    };
    let frozen = config.frozen_mask(&ds)?;
    let report = vns_optimize(ds.clone(), &config)?;
    let hierarchy = build_hierarchy(&report.best_model, &frozen);
    let options = DocumentOptions {
        wall_times: args.wall_times,
        typicality: args.typicality,
    };
    let mut doc = ResultDocument::build(&config, &report, &hierarchy, &args.freeze, options)?;
    if args.embed_matrices {
        doc.matrices = embed::matrices(&report.best_model)?;
    }
    doc.write(&args.out)?;
    eprintln!(
        "{} records, shape {:?}, cost {:.6} (null {:.6}), {} merges recorded",
        ds.n_records(),
        report.best_model.shape(),
        report.best_cost,
        report.null_cost,
        hierarchy.len()
    );
    Ok(())
}

fn simplify(args: SimplifyArgs) -> Result<()> {
    let doc = ResultDocument::read(&args.result)?;
    let target = args
        .granularity
        .target()?
        .ok_or_else(|| anyhow!("choose one of --clusters, --per-var or --info-ratio"))?;
    let simplified = doc.simplify(&target)?;
    let shape: Vec<usize> = simplified.partitions.iter().map(|p| p.parts.len()).collect();
    eprintln!(
        "step {}: {} parts {:?}, information ratio {}",
        simplified.step, simplified.total_parts, shape, simplified.info_ratio
    );
    let mut text = serde_json::to_string_pretty(&simplified)?;
    text.push('\n');
    write_text(args.out.as_deref(), &text)?;
    if let Some(path) = &args.pareto {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(["step", "total_parts", "info_ratio", "cost"])?;
        for (step, p) in doc.hierarchy.pareto.iter().enumerate() {
            w.write_record([
                step.to_string(),
                p.total_parts.to_string(),
                p.info_ratio.to_string(),
                doc.cost_at(step).to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// The document, its table, and the model at the requested granularity.
fn load_model(result: &Path, table: &Path, granularity: &GranularityArgs) -> Result<(ResultDocument, GridModel)> {
    let doc = ResultDocument::read(result)?;
    let ds: Arc<Dataset> = Arc::new(load_table(table, &doc.dataset.schema)?);
    let model = match granularity.target()? {
        None => doc.model(ds)?,
        Some(target) => doc.hierarchy(ds)?.model_at(&target)?,
    };
    Ok((doc, model))
}

fn variable(model: &GridModel, name: &str) -> Result<usize> {
    Ok(model.dataset().variable_index(name)?)
}

fn typicality_cmd(args: TypicalityArgs) -> Result<()> {
    let (_, model) = load_model(&args.result, &args.table, &args.granularity)?;
    let var = variable(&model, &args.variable)?;
    let ranking = typicality(&model, var, args.cluster)?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["rank", "value", "typicality"])?;
    let top = args.top.unwrap_or(usize::MAX);
    for (i, e) in ranking.entries.iter().take(top).enumerate() {
        w.write_record([(i + 1).to_string(), e.value.clone(), e.typicality.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix(m: &InsightMatrix, out: &MatrixOutput) -> Result<()> {
    write_text(out.out.as_deref(), &m.to_csv()?)?;
    if let Some(path) = &out.json {
        let mut text = serde_json::to_string_pretty(m)?;
        text.push('\n');
        write_text(Some(path), &text)?;
    }
    Ok(())
}

fn pair_cmd(args: PairArgs, frequency: bool) -> Result<()> {
    let (_, model) = load_model(&args.result, &args.table, &args.output.granularity)?;
    let row = variable(&model, &args.row)?;
    let col = variable(&model, &args.col)?;
    let mut selection = Vec::new();
    for item in &args.select {
        let (name, part) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("expected name=part in --select, got {item:?}"))?;
        let part = part.parse().with_context(|| format!("bad part index in {item:?}"))?;
        selection.push((variable(&model, name)?, part));
    }
    let m = if frequency {
        frequency_matrix(&model, row, col, &selection)?
    } else {
        cmi_matrix(&model, row, col, &selection)?
    };
    write_matrix(&m, &args.output)
}

fn contrast_cmd(args: ContrastArgs) -> Result<()> {
    let (_, model) = load_model(&args.result, &args.table, &args.output.granularity)?;
    let m = contrast_matrix(
        &model,
        variable(&model, &args.target)?,
        args.part,
        variable(&model, &args.row)?,
        variable(&model, &args.col)?,
    )?;
    write_matrix(&m, &args.output)
}

fn parse_planted(spec: &str) -> Result<PlantedVariable> {
    let fields: Vec<&str> = spec.split(':').collect();
    let number = |s: &str| -> Result<usize> { s.parse().with_context(|| format!("bad number {s:?} in {spec:?}")) };
    match fields.as_slice() {
        [name, kind, parts, per] if kind.parse::<VariableKind>().ok() == Some(VariableKind::Categorical) => {
            Ok(PlantedVariable::categorical(*name, number(parts)?, number(per)?))
        }
        [name, kind, parts] if kind.parse::<VariableKind>().ok() == Some(VariableKind::Numerical) => {
            Ok(PlantedVariable::numerical(*name, number(parts)?))
        }
        _ => bail!("expected name:categorical:parts:values_per_part or name:numerical:parts, got {spec:?}"),
    }
}

fn gen_synthetic(args: GenArgs) -> Result<()> {
    let spec = if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str::<PlantSpec>(&text).with_context(|| format!("bad generator spec in {}", path.display()))?
    } else {
        let variables = args.vars.iter().map(|v| parse_planted(v)).collect::<Result<Vec<_>>>()?;
        let cells = match &args.cells {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                CellDistribution::Explicit {
                    probabilities: serde_json::from_str(&text)
                        .with_context(|| format!("{} is not a JSON array of numbers", path.display()))?,
                }
            }
            None => CellDistribution::DiagonalDominant { noise: args.noise },
        };
        PlantSpec {
            variables,
            cells,
            n: args.records,
            seed: args.seed,
        }
    };
    let (ds, truth) = generate(&spec)?;
    let ds = match &args.delimiter {
        Some(d) => ds.with_delimiter(parse_delimiter(d)?)?,
        None => ds,
    };
    ds.write_table(&args.out)?;
    let mut truth_path = args.out.clone().into_os_string();
    truth_path.push(".truth.json");
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    write_text(Some(Path::new(&truth_path)), &text)?;
    let planted: Vec<usize> = truth
        .variables
        .iter()
        .map(|p| match p {
            PlantedPartition::Categorical { value_part, .. } => value_part.values().max().map_or(0, |m| m + 1),
            PlantedPartition::Numerical { cuts, .. } => cuts.len() + 1,
        })
        .collect();
    eprintln!("{} records, planted shape {planted:?}", ds.n_records());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Simplify(a) => simplify(a),
        Command::Typicality(a) => typicality_cmd(a),
        Command::Cmi(a) => pair_cmd(a, false),
        Command::Freq(a) => pair_cmd(a, true),
        Command::Contrast(a) => contrast_cmd(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("datagrid: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
