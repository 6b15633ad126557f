//! Tabular ingestion: schema files, CSV corpora, validation, and the
//! with/without-directive split.
//!
//! The interchange format is a CSV of design points plus a TOML sidecar
//! schema declaring variables (name, unit, kind, min/max range) and
//! directives (named options with ordered discrete domains). Directive
//! columns are named `dir.<directive>.<option>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest value representable by the default Q20.12 row encoding; schema
/// ranges default to [0, this] so every valid sample is encodable.
pub fn default_max_value() -> f64 {
    (1u64 << 20) as f64 - 1.0 / 4096.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Integer,
    Real,
}

/// One declared variable: a named, bounded, non-negative quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub kind: VarKind,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSchema {
    pub name: String,
    /// Ordered domain; the position of a value is its 4-bit encode ordinal.
    pub domain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub name: String,
    pub options: Vec<OptionSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectiveSchema {
    pub directives: Vec<Directive>,
}

/// One design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlsSample {
    pub project_id: String,
    /// Benchmark grouping key, from a `benchmark` CSV column when present,
    /// else derived from `project_id` at split time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directives: Option<BTreeMap<String, BTreeMap<String, String>>>,
}

/// A validated, immutable collection of samples under one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub variables: Vec<VariableSchema>,
    pub directive_schema: Option<DirectiveSchema>,
    pub samples: Vec<HlsSample>,
    pub part_id: String,
}

fn validate_variables(variables: &[VariableSchema]) -> Result<()> {
    if variables.is_empty() {
        return Err(Error::Schema("schema declares no variables".into()));
    }
    let mut seen = BTreeSet::new();
    for v in variables {
        if !seen.insert(v.name.as_str()) {
            return Err(Error::Schema(format!("duplicate variable name {}", v.name)));
        }
        if v.min < 0.0 {
            return Err(Error::Schema(format!(
                "variable {}: min {} is negative",
                v.name, v.min
            )));
        }
        if v.min > v.max {
            return Err(Error::Schema(format!(
                "variable {}: min {} exceeds max {}",
                v.name, v.min, v.max
            )));
        }
        if v.max > default_max_value() {
            return Err(Error::Schema(format!(
                "variable {}: max {} exceeds the encodable range {}",
                v.name,
                v.max,
                default_max_value()
            )));
        }
    }
    Ok(())
}

fn validate_directive_schema(schema: &DirectiveSchema) -> Result<()> {
    let mut seen = BTreeSet::new();
    for d in &schema.directives {
        if !seen.insert(d.name.as_str()) {
            return Err(Error::Schema(format!("duplicate directive name {}", d.name)));
        }
        if d.options.is_empty() || d.options.len() > 8 {
            return Err(Error::Schema(format!(
                "directive {}: {} options, must be 1..=8 to fit a 32-bit row",
                d.name,
                d.options.len()
            )));
        }
        let mut opt_seen = BTreeSet::new();
        for o in &d.options {
            if !opt_seen.insert(o.name.as_str()) {
                return Err(Error::Schema(format!(
                    "directive {}: duplicate option {}",
                    d.name, o.name
                )));
            }
            if o.domain.is_empty() || o.domain.len() > 16 {
                return Err(Error::Schema(format!(
                    "option {}.{}: domain size {} must be 1..=16 for a 4-bit code",
                    d.name,
                    o.name,
                    o.domain.len()
                )));
            }
            let mut dom_seen = BTreeSet::new();
            for v in &o.domain {
                if !dom_seen.insert(v.as_str()) {
                    return Err(Error::Schema(format!(
                        "option {}.{}: duplicate domain value {v:?}",
                        d.name, o.name
                    )));
                }
            }
        }
    }
    Ok(())
}

impl Corpus {
    /// Build and validate a corpus from parts.
    pub fn new(
        variables: Vec<VariableSchema>,
        directive_schema: Option<DirectiveSchema>,
        samples: Vec<HlsSample>,
        part_id: String,
    ) -> Result<Self> {
        validate_variables(&variables)?;
        if let Some(ds) = &directive_schema {
            validate_directive_schema(ds)?;
        }
        let corpus = Corpus {
            variables,
            directive_schema,
            samples,
            part_id,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSchema> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Corpus("empty corpus".into()));
        }
        for (i, sample) in self.samples.iter().enumerate() {
            for var in &self.variables {
                let v = sample.values.get(&var.name).ok_or_else(|| Error::Cell {
                    row: i + 1,
                    column: var.name.clone(),
                    message: "missing variable".into(),
                })?;
                if !v.is_finite() || *v < var.min || *v > var.max {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: var.name.clone(),
                        message: format!("value {v} out of range [{}, {}]", var.min, var.max),
                    });
                }
                if var.kind == VarKind::Integer && v.fract() != 0.0 {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: var.name.clone(),
                        message: format!("value {v} is not an integer"),
                    });
                }
            }
            if let Some(dirs) = &sample.directives {
                let schema = self.directive_schema.as_ref().ok_or_else(|| {
                    Error::Corpus(format!(
                        "sample {} carries directives but the schema declares none",
                        sample.project_id
                    ))
                })?;
                for (dname, settings) in dirs {
                    let directive = schema
                        .directives
                        .iter()
                        .find(|d| &d.name == dname)
                        .ok_or_else(|| {
                            Error::Schema(format!("unknown directive {dname}"))
                        })?;
                    for option in &directive.options {
                        let v = settings.get(&option.name).ok_or_else(|| Error::Cell {
                            row: i + 1,
                            column: format!("dir.{dname}.{}", option.name),
                            message: "missing directive option".into(),
                        })?;
                        if !option.domain.contains(v) {
                            return Err(Error::Cell {
                                row: i + 1,
                                column: format!("dir.{dname}.{}", option.name),
                                message: format!("value {v:?} not in domain"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Benchmark key for a sample: explicit column value if present, else
    /// the `project_id` prefix before the first `-`.
    pub fn benchmark_key(sample: &HlsSample) -> String {
        if let Some(b) = &sample.benchmark {
            return b.clone();
        }
        sample
            .project_id
            .split('-')
            .next()
            .unwrap_or(&sample.project_id)
            .to_string()
    }
}

// ---------------------------------------------------------------------------
// Schema file (TOML sidecar)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SchemaFile {
    #[serde(default)]
    part_id: Option<String>,
    #[serde(default, rename = "variable")]
    variables: Vec<VariableFile>,
    #[serde(default, rename = "directive")]
    directives: Vec<DirectiveFile>,
}

#[derive(Deserialize)]
struct VariableFile {
    name: String,
    #[serde(default)]
    unit: String,
    #[serde(default)]
    kind: Option<VarKind>,
    #[serde(default)]
    min: Option<f64>,
    #[serde(default)]
    max: Option<f64>,
}

#[derive(Deserialize)]
struct DirectiveFile {
    name: String,
    #[serde(rename = "option")]
    options: Vec<OptionFile>,
}

#[derive(Deserialize)]
struct OptionFile {
    name: String,
    domain: Vec<DomainValue>,
}

/// Domain entries may be written as strings, integers, floats, or booleans;
/// all are canonicalized to their string form.
#[derive(Deserialize)]
#[serde(untagged)]
enum DomainValue {
    S(String),
    I(i64),
    F(f64),
    B(bool),
}

impl DomainValue {
    fn canonical(&self) -> String {
        match self {
            DomainValue::S(s) => s.clone(),
            DomainValue::I(i) => i.to_string(),
            DomainValue::F(f) => f.to_string(),
            DomainValue::B(b) => b.to_string(),
        }
    }
}

/// Parsed sidecar schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub part_id: String,
    pub variables: Vec<VariableSchema>,
    pub directive_schema: Option<DirectiveSchema>,
}

impl Schema {
    pub fn of_corpus(corpus: &Corpus) -> Self {
        Schema {
            part_id: corpus.part_id.clone(),
            variables: corpus.variables.clone(),
            directive_schema: corpus.directive_schema.clone(),
        }
    }
}

/// Load and validate a schema file.
pub fn load_schema(path: &Path) -> Result<Schema> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_schema(&text)
}

/// Parse schema TOML text.
pub fn parse_schema(text: &str) -> Result<Schema> {
    let file: SchemaFile =
        toml::from_str(text).map_err(|e| Error::Schema(format!("schema parse: {e}")))?;
    let variables: Vec<VariableSchema> = file
        .variables
        .into_iter()
        .map(|v| VariableSchema {
            name: v.name,
            unit: v.unit,
            kind: v.kind.unwrap_or(VarKind::Real),
            min: v.min.unwrap_or(0.0),
            max: v.max.unwrap_or_else(default_max_value),
        })
        .collect();
    validate_variables(&variables)?;
    let directive_schema = if file.directives.is_empty() {
        None
    } else {
        let ds = DirectiveSchema {
            directives: file
                .directives
                .into_iter()
                .map(|d| Directive {
                    name: d.name,
                    options: d
                        .options
                        .into_iter()
                        .map(|o| OptionSchema {
                            name: o.name,
                            domain: o.domain.iter().map(|v| v.canonical()).collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        validate_directive_schema(&ds)?;
        Some(ds)
    };
    Ok(Schema {
        part_id: file.part_id.unwrap_or_default(),
        variables,
        directive_schema,
    })
}

// ---------------------------------------------------------------------------
// CSV load / save
// ---------------------------------------------------------------------------

const PROJECT_COLUMN: &str = "project";
const BENCHMARK_COLUMN: &str = "benchmark";

/// Load a corpus from a CSV of design points plus its sidecar schema.
/// Row order is preserved; every cell is validated against the schema with
/// row/column coordinates on failure.
pub fn load_corpus(csv_path: &Path, schema_path: &Path) -> Result<Corpus> {
    let schema = load_schema(schema_path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let mut var_cols = Vec::with_capacity(schema.variables.len());
    for var in &schema.variables {
        let idx = index_of(&var.name).ok_or_else(|| {
            Error::Corpus(format!("missing column {} in {}", var.name, csv_path.display()))
        })?;
        var_cols.push(idx);
    }
    let project_col = index_of(PROJECT_COLUMN);
    let benchmark_col = index_of(BENCHMARK_COLUMN);
    // (directive, option, column) triples; directive columns are optional.
    let mut dir_cols: Vec<(usize, usize, usize)> = Vec::new();
    if let Some(ds) = &schema.directive_schema {
        for (di, d) in ds.directives.iter().enumerate() {
            for (oi, o) in d.options.iter().enumerate() {
                if let Some(col) = index_of(&format!("dir.{}.{}", d.name, o.name)) {
                    dir_cols.push((di, oi, col));
                }
            }
        }
    }

    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let mut values = BTreeMap::new();
        for (var, &col) in schema.variables.iter().zip(&var_cols) {
            let cell = record.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                row,
                column: var.name.clone(),
                message: format!("unparseable cell {cell:?}"),
            })?;
            values.insert(var.name.clone(), v);
        }
        let mut directives: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        if let Some(ds) = &schema.directive_schema {
            for (di, oi, col) in &dir_cols {
                let cell = record.get(*col).unwrap_or("");
                if cell.is_empty() {
                    continue;
                }
                let d = &ds.directives[*di];
                directives
                    .entry(d.name.clone())
                    .or_default()
                    .insert(d.options[*oi].name.clone(), cell.to_string());
            }
            // a partially filled directive is a malformed row
            for (dname, settings) in &directives {
                let d = ds.directives.iter().find(|d| &d.name == dname).unwrap();
                if settings.len() != d.options.len() {
                    return Err(Error::Cell {
                        row,
                        column: format!("dir.{dname}"),
                        message: format!(
                            "{} of {} options present",
                            settings.len(),
                            d.options.len()
                        ),
                    });
                }
            }
        }
        let project_id = project_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row{row}"));
        let benchmark = benchmark_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        samples.push(HlsSample {
            project_id,
            benchmark,
            values,
            directives: if directives.is_empty() {
                None
            } else {
                Some(directives)
            },
        });
    }
    Corpus::new(
        schema.variables,
        schema.directive_schema,
        samples,
        schema.part_id,
    )
}

fn format_value(v: f64, kind: VarKind) -> String {
    match kind {
        VarKind::Integer => format!("{}", v as i64),
        VarKind::Real => format!("{v}"),
    }
}

/// Write a corpus back to CSV: fixed column order (project, benchmark when
/// present, schema variables, directive options), reals in shortest
/// round-trip form. Output is byte-reproducible for a given corpus.
pub fn save_corpus(corpus: &Corpus, csv_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path)?;
    let any_benchmark = corpus.samples.iter().any(|s| s.benchmark.is_some());
    let mut header = vec![PROJECT_COLUMN.to_string()];
    if any_benchmark {
        header.push(BENCHMARK_COLUMN.to_string());
    }
    for v in &corpus.variables {
        header.push(v.name.clone());
    }
    if let Some(ds) = &corpus.directive_schema {
        for d in &ds.directives {
            for o in &d.options {
                header.push(format!("dir.{}.{}", d.name, o.name));
            }
        }
    }
    writer.write_record(&header)?;
    for sample in &corpus.samples {
        let mut record = vec![sample.project_id.clone()];
        if any_benchmark {
            record.push(sample.benchmark.clone().unwrap_or_default());
        }
        for v in &corpus.variables {
            record.push(format_value(sample.values[&v.name], v.kind));
        }
        if let Some(ds) = &corpus.directive_schema {
            for d in &ds.directives {
                for o in &d.options {
                    let cell = sample
                        .directives
                        .as_ref()
                        .and_then(|dirs| dirs.get(&d.name))
                        .and_then(|settings| settings.get(&o.name))
                        .cloned()
                        .unwrap_or_default();
                    record.push(cell);
                }
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Remove variables that take a single value across all samples. Returns the
/// filtered corpus and the dropped column names in schema order.
pub fn drop_constant_columns(corpus: &Corpus) -> Result<(Corpus, Vec<String>)> {
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for var in &corpus.variables {
        let first = corpus.samples[0].values[&var.name];
        let constant = corpus.samples.iter().all(|s| s.values[&var.name] == first);
        if constant {
            dropped.push(var.name.clone());
        } else {
            kept.push(var.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Corpus("no varying variables".into()));
    }
    if dropped.is_empty() {
        return Ok((corpus.clone(), dropped));
    }
    let samples = corpus
        .samples
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.values.retain(|name, _| kept.iter().any(|v| &v.name == name));
            s
        })
        .collect();
    let filtered = Corpus::new(
        kept,
        corpus.directive_schema.clone(),
        samples,
        corpus.part_id.clone(),
    )?;
    Ok((filtered, dropped))
}

/// Split into the directive-free corpus (`None` when every sample carries
/// directives) and per-benchmark directive-bearing corpora. Every sample in
/// a benchmark group must use the same directive set; each group's schema is
/// restricted to the directives it uses.
pub fn split_by_directives(
    corpus: &Corpus,
) -> Result<(Option<Corpus>, BTreeMap<String, Corpus>)> {
    let mut plain: Vec<HlsSample> = Vec::new();
    let mut groups: BTreeMap<String, Vec<HlsSample>> = BTreeMap::new();
    for sample in &corpus.samples {
        match &sample.directives {
            None => plain.push(sample.clone()),
            Some(_) => groups
                .entry(Corpus::benchmark_key(sample))
                .or_default()
                .push(sample.clone()),
        }
    }

    let mut grouped = BTreeMap::new();
    for (benchmark, samples) in groups {
        let names: BTreeSet<String> = samples[0]
            .directives
            .as_ref()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        for s in &samples {
            let here: BTreeSet<String> =
                s.directives.as_ref().unwrap().keys().cloned().collect();
            if here != names {
                return Err(Error::Corpus(format!(
                    "benchmark {benchmark}: sample {} uses {} directives, group uses {}",
                    s.project_id,
                    here.len(),
                    names.len()
                )));
            }
        }
        let schema = corpus
            .directive_schema
            .as_ref()
            .ok_or_else(|| Error::Corpus("directive samples without a schema".into()))?;
        let restricted = DirectiveSchema {
            directives: schema
                .directives
                .iter()
                .filter(|d| names.contains(&d.name))
                .cloned()
                .collect(),
        };
        if restricted.directives.len() != names.len() {
            return Err(Error::Schema(format!(
                "benchmark {benchmark} uses directives missing from the schema"
            )));
        }
        grouped.insert(
            benchmark.clone(),
            Corpus::new(
                corpus.variables.clone(),
                Some(restricted),
                samples,
                corpus.part_id.clone(),
            )?,
        );
    }

    let plain_corpus = if plain.is_empty() {
        None
    } else {
        Some(Corpus::new(
            corpus.variables.clone(),
            None,
            plain,
            corpus.part_id.clone(),
        )?)
    };
    Ok((plain_corpus, grouped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::tempdir;

    fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    const TOY_SCHEMA: &str = r#"
part_id = "toy"

[[variable]]
name = "Clk-estimated"
unit = "ns"
kind = "real"

[[variable]]
name = "BRAM"
unit = "count"
kind = "integer"

[[variable]]
name = "DSP"
unit = "count"
kind = "integer"
"#;

    #[test]
    fn load_single_row() {
        let dir = tempdir().unwrap();
        let schema = write_file(dir.path(), "schema.toml", TOY_SCHEMA);
        let csv = write_file(
            dir.path(),
            "data.csv",
            "project,Clk-estimated,BRAM,DSP\nio1-l2n1n1-l4n1n1,8.419,32,5\n",
        );
        let corpus = load_corpus(&csv, &schema).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.part_id, "toy");
        let s = &corpus.samples[0];
        assert_eq!(s.project_id, "io1-l2n1n1-l4n1n1");
        assert_eq!(s.values["Clk-estimated"], 8.419);
        assert_eq!(s.values["BRAM"], 32.0);
        assert_eq!(s.values["DSP"], 5.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempdir().unwrap();
        let schema = write_file(dir.path(), "schema.toml", TOY_SCHEMA);
        let csv = write_file(dir.path(), "data.csv", "project,Clk-estimated,BRAM,DSP\n");
        let err = load_corpus(&csv, &schema).unwrap_err();
        assert!(err.to_string().contains("empty corpus"), "{err}");
    }

    #[test]
    fn out_of_range_cell_reports_coordinates() {
        let dir = tempdir().unwrap();
        let schema = write_file(dir.path(), "schema.toml", TOY_SCHEMA);
        let csv = write_file(
            dir.path(),
            "data.csv",
            "project,Clk-estimated,BRAM,DSP\np,1.0,-1,5\n",
        );
        match load_corpus(&csv, &schema).unwrap_err() {
            Error::Cell { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "BRAM");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_column_is_an_error() {
        let dir = tempdir().unwrap();
        let schema = write_file(dir.path(), "schema.toml", TOY_SCHEMA);
        let csv = write_file(dir.path(), "data.csv", "project,Clk-estimated,BRAM\np,1,2\n");
        let err = load_corpus(&csv, &schema).unwrap_err();
        assert!(err.to_string().contains("missing column DSP"), "{err}");
    }

    fn toy_corpus(rows: &[(f64, f64, f64)]) -> Corpus {
        let variables = vec![
            VariableSchema {
                name: "a".into(),
                unit: String::new(),
                kind: VarKind::Real,
                min: 0.0,
                max: 1000.0,
            },
            VariableSchema {
                name: "b".into(),
                unit: String::new(),
                kind: VarKind::Real,
                min: 0.0,
                max: 1000.0,
            },
            VariableSchema {
                name: "c".into(),
                unit: String::new(),
                kind: VarKind::Real,
                min: 0.0,
                max: 1000.0,
            },
        ];
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, (a, b, c))| HlsSample {
                project_id: format!("p{i}"),
                benchmark: None,
                values: BTreeMap::from([
                    ("a".to_string(), *a),
                    ("b".to_string(), *b),
                    ("c".to_string(), *c),
                ]),
                directives: None,
            })
            .collect();
        Corpus::new(variables, None, samples, "toy".into()).unwrap()
    }

    #[test]
    fn drop_constant_columns_filters_and_reports() {
        let corpus = toy_corpus(&[(1.0, 5.0, 2.0), (1.0, 6.0, 2.0), (1.0, 7.0, 2.0)]);
        let (filtered, dropped) = drop_constant_columns(&corpus).unwrap();
        assert_eq!(dropped, vec!["a".to_string(), "c".to_string()]);
        assert_eq!(filtered.variables.len(), 1);
        assert_eq!(filtered.variables[0].name, "b");
        // idempotent
        let (again, dropped2) = drop_constant_columns(&filtered).unwrap();
        assert!(dropped2.is_empty());
        assert_eq!(again, filtered);
    }

    #[test]
    fn drop_constant_columns_identity_when_all_vary() {
        let corpus = toy_corpus(&[(1.0, 5.0, 2.0), (2.0, 6.0, 3.0)]);
        let (same, dropped) = drop_constant_columns(&corpus).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(same, corpus);
    }

    #[test]
    fn drop_constant_columns_rejects_fully_constant() {
        let corpus = toy_corpus(&[(1.0, 5.0, 2.0), (1.0, 5.0, 2.0)]);
        let err = drop_constant_columns(&corpus).unwrap_err();
        assert!(err.to_string().contains("no varying variables"));
    }

    fn directive_schema() -> DirectiveSchema {
        DirectiveSchema {
            directives: vec![
                Directive {
                    name: "l1".into(),
                    options: vec![OptionSchema {
                        name: "pipeline".into(),
                        domain: vec!["off".into(), "on".into()],
                    }],
                },
                Directive {
                    name: "l2".into(),
                    options: vec![OptionSchema {
                        name: "unroll".into(),
                        domain: vec!["1".into(), "2".into(), "4".into()],
                    }],
                },
            ],
        }
    }

    fn sample_with_dirs(project: &str, dirs: &[(&str, &str, &str)]) -> HlsSample {
        let mut directives: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (d, o, v) in dirs {
            directives
                .entry(d.to_string())
                .or_default()
                .insert(o.to_string(), v.to_string());
        }
        HlsSample {
            project_id: project.to_string(),
            benchmark: None,
            values: BTreeMap::from([("a".to_string(), 1.0)]),
            directives: if directives.is_empty() {
                None
            } else {
                Some(directives)
            },
        }
    }

    fn one_var() -> Vec<VariableSchema> {
        vec![VariableSchema {
            name: "a".into(),
            unit: String::new(),
            kind: VarKind::Real,
            min: 0.0,
            max: 10.0,
        }]
    }

    #[test]
    fn split_groups_by_benchmark_prefix() {
        let corpus = Corpus::new(
            one_var(),
            Some(directive_schema()),
            vec![
                sample_with_dirs("plainproj", &[]),
                sample_with_dirs("bicg-v1", &[("l1", "pipeline", "on")]),
                sample_with_dirs("bicg-v2", &[("l1", "pipeline", "off")]),
                sample_with_dirs("gemm-v1", &[("l1", "pipeline", "on"), ("l2", "unroll", "4")]),
            ],
            "toy".into(),
        )
        .unwrap();
        let (plain, groups) = split_by_directives(&corpus).unwrap();
        let plain = plain.unwrap();
        assert_eq!(plain.len(), 1);
        assert!(plain.directive_schema.is_none());
        assert_eq!(groups.len(), 2);
        assert_eq!(groups["bicg"].len(), 2);
        assert_eq!(
            groups["bicg"].directive_schema.as_ref().unwrap().directives.len(),
            1
        );
        assert_eq!(
            groups["gemm"].directive_schema.as_ref().unwrap().directives.len(),
            2
        );
    }

    #[test]
    fn split_without_directives_returns_whole_corpus() {
        let corpus = toy_corpus(&[(1.0, 2.0, 3.0), (4.0, 5.0, 6.0)]);
        let (plain, groups) = split_by_directives(&corpus).unwrap();
        assert_eq!(plain.unwrap().len(), 2);
        assert!(groups.is_empty());
    }

    #[test]
    fn split_rejects_inconsistent_directive_sets() {
        let corpus = Corpus::new(
            one_var(),
            Some(directive_schema()),
            vec![
                sample_with_dirs("bicg-v1", &[("l1", "pipeline", "on")]),
                sample_with_dirs("bicg-v2", &[("l1", "pipeline", "on"), ("l2", "unroll", "2")]),
                sample_with_dirs("plain", &[]),
            ],
            "toy".into(),
        )
        .unwrap();
        let err = split_by_directives(&corpus).unwrap_err();
        assert!(err.to_string().contains("bicg"), "{err}");
    }

    #[test]
    fn save_load_roundtrip_preserves_corpus() {
        let dir = tempdir().unwrap();
        let corpus = Corpus::new(
            one_var(),
            Some(directive_schema()),
            vec![
                sample_with_dirs("bicg-v1", &[("l1", "pipeline", "on"), ("l2", "unroll", "2")]),
                sample_with_dirs("plain", &[]),
            ],
            "toy".into(),
        )
        .unwrap();
        let csv = dir.path().join("out.csv");
        save_corpus(&corpus, &csv).unwrap();
        let schema_text = r#"
part_id = "toy"
[[variable]]
name = "a"
max = 10.0

[[directive]]
name = "l1"
[[directive.option]]
name = "pipeline"
domain = ["off", "on"]

[[directive]]
name = "l2"
[[directive.option]]
name = "unroll"
domain = [1, 2, 4]
"#;
        let schema = write_file(dir.path(), "schema.toml", schema_text);
        let back = load_corpus(&csv, &schema).unwrap();
        assert_eq!(back, corpus);
        // saving again is byte-identical
        let csv2 = dir.path().join("out2.csv");
        save_corpus(&back, &csv2).unwrap();
        assert_eq!(fs::read(&csv).unwrap(), fs::read(&csv2).unwrap());
    }

    #[test]
    fn schema_rejects_bad_ranges_and_domains() {
        assert!(parse_schema(
            "[[variable]]\nname = \"x\"\nmin = 5.0\nmax = 1.0\n"
        )
        .is_err());
        assert!(parse_schema(
            "[[variable]]\nname = \"x\"\nmin = -1.0\n"
        )
        .is_err());
        let nine_options: String = (0..9)
            .map(|i| format!("[[directive.option]]\nname = \"o{i}\"\ndomain = [1]\n"))
            .collect();
        let text = format!(
            "[[variable]]\nname = \"x\"\n\n[[directive]]\nname = \"d\"\n{nine_options}"
        );
        assert!(parse_schema(&text).is_err());
    }
}
