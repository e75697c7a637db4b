//! Typed tables: numerical variables become rank statistics with tie-blocks,
//! categorical variables become dictionary codes.
//!
//! Every variable is also exposed through a uniform "atom" view: an atom is a
//! categorical value or a numerical tie-block (a run of equal raw values).
//! Partitions are maps from atoms to parts, so every record sharing an atom
//! always lands in the same part.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::Combinatorics;
use crate::error::{Error, Result};

/// Category assigned to empty categorical fields.
pub const MISSING: &str = "⟨missing⟩";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Numerical,
    Categorical,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Numerical => "numerical",
            VariableKind::Categorical => "categorical",
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VariableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "numerical" | "num" | "numeric" => Ok(VariableKind::Numerical),
            "categorical" | "cat" => Ok(VariableKind::Categorical),
            other => Err(Error::Schema(format!("unknown variable kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind) -> Self {
        VariableSpec {
            name: name.into(),
            kind,
        }
    }

    /// Parses the `name:kind` form used on the command line.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, kind) = spec
            .rsplit_once(':')
            .ok_or_else(|| Error::Schema(format!("expected name:kind, got `{spec}`")))?;
        Ok(VariableSpec::new(name, kind.parse()?))
    }
}

fn default_delimiter() -> char {
    '\t'
}

fn default_header() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<VariableSpec>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_header")]
    pub has_header: bool,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema {
            variables,
            delimiter: default_delimiter(),
            has_header: default_header(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_delimiter(mut self, delimiter: char) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    /// Reads the JSON sidecar form `{"variables":[{"name":..,"kind":..}],"delimiter":..}`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = serde_json::from_reader(file)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.len() < 2 {
            return Err(Error::Schema("at least two variables are required".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if v.name.is_empty() {
                return Err(Error::Schema(format!("variable {i} has an empty name")));
            }
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }
}

/// A maximal run of equal raw values, occupying ranks `first_rank ..
/// first_rank + len` (1-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TieBlock {
    pub value: f64,
    pub first_rank: u32,
    pub len: u32,
}

impl TieBlock {
    /// One past the last rank of the block.
    pub fn end_rank(&self) -> u32 {
        self.first_rank + self.len
    }
}

#[derive(Clone, Debug)]
pub struct CategoricalColumn {
    values: Vec<String>,
    counts: Vec<u64>,
    codes: Vec<u32>,
}

impl CategoricalColumn {
    fn encode(raw: Vec<String>) -> Self {
        let mut lookup = rustc_hash::FxHashMap::default();
        let mut values = Vec::new();
        let mut counts = Vec::new();
        let codes = raw
            .into_iter()
            .map(|s| {
                let s = if s.is_empty() { MISSING.to_string() } else { s };
                let next = values.len() as u32;
                let id = *lookup.entry(s.clone()).or_insert_with(|| {
                    values.push(s);
                    counts.push(0);
                    next
                });
                counts[id as usize] += 1;
                id
            })
            .collect();
        CategoricalColumn { values, counts, codes }
    }

    /// Dictionary in first-appearance order.
    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn value_id(&self, value: &str) -> Option<u32> {
        self.values.iter().position(|v| v == value).map(|i| i as u32)
    }
}

#[derive(Clone, Debug)]
pub struct NumericalColumn {
    blocks: Vec<TieBlock>,
    block_of: Vec<u32>,
    ranks: Vec<u32>,
}

impl NumericalColumn {
    fn encode(raw: &[f64]) -> Self {
        let n = raw.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        // stable: equal values keep record order inside their block
        order.sort_by(|&a, &b| raw[a as usize].total_cmp(&raw[b as usize]));
        let mut ranks = vec![0u32; n];
        let mut block_of = vec![0u32; n];
        let mut blocks: Vec<TieBlock> = Vec::new();
        for (pos, &rec) in order.iter().enumerate() {
            let value = raw[rec as usize];
            let rank = pos as u32 + 1;
            match blocks.last_mut() {
                Some(b) if b.value == value => b.len += 1,
                _ => blocks.push(TieBlock {
                    value,
                    first_rank: rank,
                    len: 1,
                }),
            }
            ranks[rec as usize] = rank;
            block_of[rec as usize] = blocks.len() as u32 - 1;
        }
        NumericalColumn {
            blocks,
            block_of,
            ranks,
        }
    }

    /// Tie-blocks in ascending value order.
    pub fn blocks(&self) -> &[TieBlock] {
        &self.blocks
    }

    /// 1-based rank of each record.
    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn block_of(&self) -> &[u32] {
        &self.block_of
    }

    pub fn value(&self, record: usize) -> f64 {
        self.blocks[self.block_of[record] as usize].value
    }

    /// Index of the block starting at `rank`, if any.
    pub fn block_starting_at(&self, rank: u32) -> Option<usize> {
        self.blocks.binary_search_by_key(&rank, |b| b.first_rank).ok()
    }

    /// Raw-value cut between block `i - 1` and block `i`.
    pub fn cut_before(&self, i: usize) -> f64 {
        (self.blocks[i - 1].value + self.blocks[i].value) / 2.0
    }
}

#[derive(Clone, Debug)]
pub enum Column {
    Categorical(CategoricalColumn),
    Numerical(NumericalColumn),
}

impl Column {
    pub fn kind(&self) -> VariableKind {
        match self {
            Column::Categorical(_) => VariableKind::Categorical,
            Column::Numerical(_) => VariableKind::Numerical,
        }
    }

    /// Number of atoms: values (categorical) or tie-blocks (numerical).
    pub fn n_atoms(&self) -> usize {
        match self {
            Column::Categorical(c) => c.values.len(),
            Column::Numerical(c) => c.blocks.len(),
        }
    }

    pub fn atom_of(&self, record: usize) -> u32 {
        match self {
            Column::Categorical(c) => c.codes[record],
            Column::Numerical(c) => c.block_of[record],
        }
    }

    pub fn atom_count(&self, atom: usize) -> u64 {
        match self {
            Column::Categorical(c) => c.counts[atom],
            Column::Numerical(c) => c.blocks[atom].len as u64,
        }
    }

    pub fn atoms(&self) -> &[u32] {
        match self {
            Column::Categorical(c) => &c.codes,
            Column::Numerical(c) => &c.block_of,
        }
    }

    pub fn atom_label(&self, atom: usize) -> String {
        match self {
            Column::Categorical(c) => c.values[atom].clone(),
            Column::Numerical(c) => c.blocks[atom].value.to_string(),
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match self {
            Column::Categorical(c) => Some(c),
            Column::Numerical(_) => None,
        }
    }

    pub fn as_numerical(&self) -> Option<&NumericalColumn> {
        match self {
            Column::Numerical(c) => Some(c),
            Column::Categorical(_) => None,
        }
    }
}

/// Raw input for one variable, before encoding.
#[derive(Clone, Debug)]
pub enum RawColumn {
    Categorical(Vec<String>),
    Numerical(Vec<f64>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Categorical(v) => v.len(),
            RawColumn::Numerical(v) => v.len(),
        }
    }
}

/// Records grouped by atom (CSR layout).
#[derive(Clone, Debug)]
struct AtomIndex {
    offsets: Vec<usize>,
    records: Vec<u32>,
}

impl AtomIndex {
    fn build(column: &Column) -> Self {
        let mut offsets = vec![0usize; column.n_atoms() + 1];
        for &a in column.atoms() {
            offsets[a as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let mut fill = offsets.clone();
        let mut records = vec![0u32; column.atoms().len()];
        for (rec, &a) in column.atoms().iter().enumerate() {
            records[fill[a as usize]] = rec as u32;
            fill[a as usize] += 1;
        }
        AtomIndex { offsets, records }
    }
}

#[derive(Debug)]
pub struct Dataset {
    schema: Schema,
    n_records: usize,
    columns: Vec<Column>,
    atom_index: Vec<AtomIndex>,
    dropped_rows: usize,
    comb: Combinatorics,
}

impl Dataset {
    /// Encodes already-parsed columns, given in schema order.
    pub fn from_columns(schema: Schema, raw: Vec<RawColumn>) -> Result<Self> {
        Self::build(schema, raw, 0)
    }

    fn build(schema: Schema, raw: Vec<RawColumn>, dropped_rows: usize) -> Result<Self> {
        schema.validate()?;
        if raw.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns supplied for {} variables",
                raw.len(),
                schema.len()
            )));
        }
        let n_records = raw.first().map(RawColumn::len).unwrap_or(0);
        if n_records == 0 {
            return Err(Error::NoRows { dropped: dropped_rows });
        }
        let mut columns = Vec::with_capacity(raw.len());
        for (spec, col) in schema.variables.iter().zip(raw) {
            if col.len() != n_records {
                return Err(Error::Schema(format!(
                    "column `{}` has {} values, expected {n_records}",
                    spec.name,
                    col.len()
                )));
            }
            let column = match (spec.kind, col) {
                (VariableKind::Categorical, RawColumn::Categorical(v)) => {
                    Column::Categorical(CategoricalColumn::encode(v))
                }
                (VariableKind::Numerical, RawColumn::Numerical(v)) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Schema(format!(
                            "column `{}` contains non-finite values",
                            spec.name
                        )));
                    }
                    Column::Numerical(NumericalColumn::encode(&v))
                }
                (kind, _) => {
                    return Err(Error::Schema(format!(
                        "column `{}` does not match its declared kind {kind}",
                        spec.name
                    )))
                }
            };
            columns.push(column);
        }
        let atom_index = columns.iter().map(AtomIndex::build).collect();
        let max_atoms = columns.iter().map(Column::n_atoms).max().unwrap_or(0);
        let comb = Combinatorics::with_capacity(n_records + max_atoms + 2);
        Ok(Dataset {
            schema,
            n_records,
            columns,
            atom_index,
            dropped_rows,
            comb,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// N.
    pub fn n_records(&self) -> usize {
        self.n_records
    }

    /// K.
    pub fn n_variables(&self) -> usize {
        self.columns.len()
    }

    /// Rows discarded at load time because a numerical field did not parse.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column(&self, var: usize) -> &Column {
        &self.columns[var]
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn kind(&self, var: usize) -> VariableKind {
        self.columns[var].kind()
    }

    pub fn name(&self, var: usize) -> &str {
        &self.schema.variables[var].name
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.schema
            .variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Records holding `atom` of variable `var`.
    pub fn atom_records(&self, var: usize, atom: usize) -> &[u32] {
        let idx = &self.atom_index[var];
        &idx.records[idx.offsets[atom]..idx.offsets[atom + 1]]
    }

    pub fn combinatorics(&self) -> &Combinatorics {
        &self.comb
    }

    pub(crate) fn expect_kind(&self, var: usize, kind: VariableKind) -> Result<()> {
        let actual = self.kind(var);
        if actual != kind {
            return Err(Error::WrongKind {
                name: self.name(var).to_string(),
                expected: kind.as_str(),
                actual: actual.as_str(),
            });
        }
        Ok(())
    }

    /// Value dictionary of a categorical variable, by descending count then
    /// value text.
    pub fn value_counts(&self, name: &str) -> Result<Vec<(String, u64)>> {
        let var = self.variable_index(name)?;
        self.expect_kind(var, VariableKind::Categorical)?;
        let col = self.columns[var].as_categorical().expect("checked kind");
        let mut out: Vec<(String, u64)> = col
            .values
            .iter()
            .cloned()
            .zip(col.counts.iter().copied())
            .filter(|(_, c)| *c > 0)
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// The same records, to be written with another field separator.
    pub fn with_delimiter(mut self, delimiter: char) -> Result<Self> {
        self.schema = self.schema.with_delimiter(delimiter);
        self.schema.validate()?;
        Ok(self)
    }

    /// Writes the records back as a delimited table, header included when the
    /// schema declares one.
    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(self.schema.delimiter as u8)
            .from_writer(out);
        if self.schema.has_header {
            w.write_record(self.schema.variables.iter().map(|v| v.name.as_str()))?;
        }
        let mut row = Vec::with_capacity(self.columns.len());
        for rec in 0..self.n_records {
            row.clear();
            for col in &self.columns {
                row.push(match col {
                    Column::Categorical(c) => c.values[c.codes[rec] as usize].clone(),
                    Column::Numerical(c) => c.value(rec).to_string(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// Reads a delimited UTF-8 table according to `schema`.
///
/// Rows whose numerical fields do not parse as finite reals are dropped and
/// counted; empty categorical fields become [`MISSING`].
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, schema)
}

pub fn read_table(input: impl std::io::Read, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(false)
        .from_reader(input);
    let expected: Vec<String> = schema.variables.iter().map(|v| v.name.clone()).collect();
    if schema.has_header {
        let found: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if found != expected {
            return Err(Error::HeaderMismatch { expected, found });
        }
    }
    let mut raw: Vec<RawColumn> = schema
        .variables
        .iter()
        .map(|v| match v.kind {
            VariableKind::Categorical => RawColumn::Categorical(Vec::new()),
            VariableKind::Numerical => RawColumn::Numerical(Vec::new()),
        })
        .collect();
    let mut dropped = 0usize;
    let mut numbers = vec![0f64; schema.len()];
    for row in reader.records() {
        let row = row?;
        if row.len() != schema.len() {
            return Err(Error::Schema(format!(
                "row with {} fields, expected {}",
                row.len(),
                schema.len()
            )));
        }
        let mut usable = true;
        for (i, v) in schema.variables.iter().enumerate() {
            if v.kind == VariableKind::Numerical {
                match row[i].trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => numbers[i] = x,
                    _ => {
                        usable = false;
                        break;
                    }
                }
            }
        }
        if !usable {
            dropped += 1;
            continue;
        }
        for (i, col) in raw.iter_mut().enumerate() {
            match col {
                RawColumn::Categorical(v) => v.push(row[i].to_string()),
                RawColumn::Numerical(v) => v.push(numbers[i]),
            }
        }
    }
    Dataset::build(schema.clone(), raw, dropped)
}
