//! Mixed-type tabular data: CSV ingestion with type inference, correlation
//! ranking for variable selection, and pairwise summaries for the variable
//! matrix view.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

/// Numeric columns with at most this many distinct integral values are
/// treated as categorical codes.
pub const CATEGORICAL_MAX_DISTINCT: usize = 10;

/// Default cap on the number of points kept for a continuous/continuous pair.
pub const DEFAULT_SAMPLE_CAP: usize = 2000;

const RESERVOIR_SEED: u64 = 0x5eed_ca5e;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("duplicate header name {0:?}")]
    DuplicateHeader(String),
    #[error("empty header name in column {0}")]
    EmptyHeader(usize),
    #[error("no data rows left after dropping {dropped} incomplete rows")]
    NoRows { dropped: usize },
    #[error("categorical column {0:?} has a single distinct value")]
    SingleCategory(String),
    #[error("column {0:?} is declared continuous but holds non-numeric values")]
    NonNumericContinuous(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("at least {need} variables required, got {got}")]
    TooFewVariables { need: usize, got: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariableKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VariableKind::Continuous, categories: None }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self { name: name.into(), kind: VariableKind::Categorical, categories: Some(categories) }
    }

    /// Number of categories, or 0 for continuous variables.
    pub fn cardinality(&self) -> usize {
        self.categories.as_ref().map_or(0, Vec::len)
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == VariableKind::Categorical
    }
}

/// Column-typed table. Categorical cells hold the category index as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetDoc", into = "DatasetDoc")]
pub struct MixedDataset {
    variables: Vec<VariableSpec>,
    columns: Vec<Vec<f64>>,
    dropped_rows: usize,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    variables: Vec<VariableSpec>,
    rows: Vec<Vec<f64>>,
    #[serde(default)]
    dropped_rows: usize,
}

impl From<MixedDataset> for DatasetDoc {
    fn from(ds: MixedDataset) -> Self {
        let rows = (0..ds.row_count()).map(|r| ds.row(r)).collect();
        DatasetDoc { variables: ds.variables, rows, dropped_rows: ds.dropped_rows }
    }
}

impl TryFrom<DatasetDoc> for MixedDataset {
    type Error = DatasetError;

    fn try_from(doc: DatasetDoc) -> Result<Self, Self::Error> {
        let d = doc.variables.len();
        let mut columns = vec![Vec::with_capacity(doc.rows.len()); d];
        for (i, row) in doc.rows.iter().enumerate() {
            if row.len() != d {
                return Err(DatasetError::Invalid(format!("row {i} has {} values, expected {d}", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                columns[c].push(*v);
            }
        }
        let mut ds = MixedDataset::from_columns(doc.variables, columns)?;
        ds.dropped_rows = doc.dropped_rows;
        Ok(ds)
    }
}

impl MixedDataset {
    /// Builds a dataset from typed columns, checking every invariant.
    pub fn from_columns(variables: Vec<VariableSpec>, columns: Vec<Vec<f64>>) -> Result<Self, DatasetError> {
        if variables.len() != columns.len() {
            return Err(DatasetError::Invalid(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(DatasetError::Invalid("empty variable name".into()));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(DatasetError::DuplicateHeader(v.name.clone()));
            }
            match (v.kind, &v.categories) {
                (VariableKind::Categorical, Some(c)) if c.len() >= 2 => {}
                (VariableKind::Categorical, _) => return Err(DatasetError::SingleCategory(v.name.clone())),
                (VariableKind::Continuous, None) => {}
                (VariableKind::Continuous, Some(_)) => {
                    return Err(DatasetError::Invalid(format!("continuous {:?} carries categories", v.name)))
                }
            }
        }
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(DatasetError::NoRows { dropped: 0 });
        }
        for (v, col) in variables.iter().zip(&columns) {
            if col.len() != n {
                return Err(DatasetError::Invalid(format!("column {:?} has {} rows, expected {n}", v.name, col.len())));
            }
            let card = v.cardinality();
            for &x in col {
                if !x.is_finite() {
                    return Err(DatasetError::Invalid(format!("non-finite value in {:?}", v.name)));
                }
                if v.is_categorical() && (x < 0.0 || x.fract() != 0.0 || x as usize >= card) {
                    return Err(DatasetError::Invalid(format!("category index {x} out of range in {:?}", v.name)));
                }
            }
        }
        Ok(Self { variables, columns, dropped_rows: 0 })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, idx: usize) -> &VariableSpec {
        &self.variables[idx]
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, DatasetError> {
        self.index_of(name).ok_or_else(|| DatasetError::UnknownVariable(name.to_string()))
    }

    /// Category indices of a categorical column.
    pub fn codes(&self, idx: usize) -> Vec<usize> {
        self.columns[idx].iter().map(|&v| v as usize).collect()
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
        Self { variables: self.variables.clone(), columns, dropped_rows: self.dropped_rows }
    }
}

/// Regression encoding of a column: continuous columns as-is, categorical
/// columns as indicators for every category but the first.
pub fn encode_column(ds: &MixedDataset, idx: usize) -> Vec<(String, Vec<f64>)> {
    let spec = ds.variable(idx);
    let col = ds.column(idx);
    match &spec.categories {
        None => vec![(spec.name.clone(), col.to_vec())],
        Some(labels) => labels
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, label)| {
                let ind = col.iter().map(|&v| if v as usize == k { 1.0 } else { 0.0 }).collect();
                (format!("{}={}", spec.name, label), ind)
            })
            .collect(),
    }
}

/// Design matrix with a leading intercept column.
pub fn design_matrix(rows: usize, columns: &[&[f64]]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(rows, columns.len() + 1, |r, c| if c == 0 { 1.0 } else { columns[c - 1][r] })
}

/// Parses a comma-separated, UTF-8 CSV with a header row and infers a kind per
/// column. Rows containing an empty cell are dropped and counted.
pub fn load_csv(bytes: &[u8], overrides: &BTreeMap<String, VariableKind>) -> Result<MixedDataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(DatasetError::EmptyHeader(i));
        }
        if !seen.insert(h.as_str()) {
            return Err(DatasetError::DuplicateHeader(h.clone()));
        }
    }
    if let Some(unknown) = overrides.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(DatasetError::UnknownVariable(unknown.clone()));
    }

    let d = header.len();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.iter().any(str::is_empty) {
            dropped += 1;
            continue;
        }
        for (c, v) in record.iter().enumerate() {
            cells[c].push(v.to_string());
        }
    }
    if cells.first().map_or(true, Vec::is_empty) {
        return Err(DatasetError::NoRows { dropped });
    }

    let mut variables = Vec::with_capacity(d);
    let mut columns = Vec::with_capacity(d);
    for (name, raw) in header.into_iter().zip(cells) {
        let (spec, col) = infer_column(name, &raw, overrides)?;
        variables.push(spec);
        columns.push(col);
    }
    let mut ds = MixedDataset::from_columns(variables, columns)?;
    ds.dropped_rows = dropped;
    Ok(ds)
}

/// CSV text with a header row. Categorical cells hold their labels;
/// continuous cells use the shortest round-tripping decimal form.
pub fn to_csv(ds: &MixedDataset) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ds.variables.iter().map(|v| v.name.as_str())).expect("in-memory write");
    for r in 0..ds.row_count() {
        let row: Vec<String> = ds
            .variables
            .iter()
            .zip(&ds.columns)
            .map(|(v, c)| match &v.categories {
                Some(cats) => cats[c[r] as usize].clone(),
                None => format!("{}", c[r]),
            })
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, csv::Position::line);
    DatasetError::Csv { line, message: e.to_string() }
}

fn infer_column(
    name: String,
    raw: &[String],
    overrides: &BTreeMap<String, VariableKind>,
) -> Result<(VariableSpec, Vec<f64>), DatasetError> {
    let numeric: Option<Vec<f64>> = raw
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let forced = overrides.get(&name).copied();

    let kind = match (forced, &numeric) {
        (Some(k), _) => k,
        (None, None) => VariableKind::Categorical,
        (None, Some(values)) => {
            let mut distinct = HashSet::new();
            let mut integral = true;
            for v in values {
                integral &= v.fract() == 0.0;
                distinct.insert(canonical_bits(*v));
                if distinct.len() > CATEGORICAL_MAX_DISTINCT {
                    break;
                }
            }
            if integral && distinct.len() <= CATEGORICAL_MAX_DISTINCT {
                VariableKind::Categorical
            } else {
                VariableKind::Continuous
            }
        }
    };

    match kind {
        VariableKind::Continuous => match numeric {
            Some(values) => Ok((VariableSpec::continuous(name), values)),
            None => Err(DatasetError::NonNumericContinuous(name)),
        },
        VariableKind::Categorical => {
            let (labels, codes) = match numeric {
                // Numeric codes keep their numeric order so that index 0 is the
                // smallest code.
                Some(values) => {
                    let mut uniq: Vec<f64> = Vec::new();
                    let mut seen = HashSet::new();
                    for &v in &values {
                        if seen.insert(canonical_bits(v)) {
                            uniq.push(v);
                        }
                    }
                    uniq.sort_by(f64::total_cmp);
                    let index: HashMap<u64, usize> =
                        uniq.iter().enumerate().map(|(i, v)| (canonical_bits(*v), i)).collect();
                    let codes = values.iter().map(|v| index[&canonical_bits(*v)] as f64).collect();
                    (uniq.iter().map(|v| format_number(*v)).collect::<Vec<_>>(), codes)
                }
                None => {
                    let mut labels: Vec<String> = Vec::new();
                    let mut index: HashMap<&str, usize> = HashMap::new();
                    let mut codes = Vec::with_capacity(raw.len());
                    for s in raw {
                        let next = labels.len();
                        let code = *index.entry(s.as_str()).or_insert_with(|| {
                            labels.push(s.clone());
                            next
                        });
                        codes.push(code as f64);
                    }
                    (labels, codes)
                }
            };
            if labels.len() < 2 {
                return Err(DatasetError::SingleCategory(name));
            }
            Ok((VariableSpec::categorical(name, labels), codes))
        }
    }
}

fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0.0f64.to_bits()
    } else {
        v.to_bits()
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub variable: String,
    pub r: f64,
    /// Set when one of the two columns is constant; `r` is then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub outcome: String,
    pub entries: Vec<CorrelationEntry>,
}

/// Pearson correlation of every other variable with `outcome`, categorical
/// columns taken as their category indices. Sorted by |r| descending, ties by
/// name.
pub fn pearson_correlations(ds: &MixedDataset, outcome: &str) -> Result<CorrelationReport, DatasetError> {
    let target = ds.require(outcome)?;
    let y = ds.column(target);
    let mut entries: Vec<CorrelationEntry> = (0..ds.variables().len())
        .filter(|&j| j != target)
        .map(|j| {
            let r = stats::pearson(ds.column(j), y);
            CorrelationEntry {
                variable: ds.variable(j).name.clone(),
                r: r.unwrap_or(0.0),
                constant: r.is_none(),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.r.abs()
            .total_cmp(&a.r.abs())
            .then_with(|| a.variable.cmp(&b.variable))
    });
    Ok(CorrelationReport { outcome: outcome.to_string(), entries })
}

/// Names of the `n` most correlated variables (all of them if fewer).
pub fn top_n(report: &CorrelationReport, n: usize) -> Vec<String> {
    report.entries.iter().take(n).map(|e| e.variable.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    fn of(values: &mut [f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            min: values[0],
            q1: stats::quantile_sorted(values, 0.25),
            median: stats::quantile_sorted(values, 0.5),
            q3: stats::quantile_sorted(values, 0.75),
            max: values[values.len() - 1],
            mean: stats::mean(values),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryGroup {
    pub category: String,
    pub count: usize,
    /// Absent for categories with no rows.
    pub stats: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PairSummary {
    CatCat {
        row_variable: String,
        col_variable: String,
        row_categories: Vec<String>,
        col_categories: Vec<String>,
        counts: Vec<Vec<u64>>,
    },
    CatCont {
        categorical: String,
        continuous: String,
        groups: Vec<CategoryGroup>,
    },
    ContCont {
        x_variable: String,
        y_variable: String,
        /// Number of rows the sample was drawn from.
        total: usize,
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    pub variables: Vec<String>,
    /// `cells[i][j]` summarises (variables[i], variables[j]).
    pub cells: Vec<Vec<PairSummary>>,
}

/// Full (non-triangular) matrix of pairwise summaries over `vars`.
pub fn pairwise_summaries(ds: &MixedDataset, vars: &[String], sample_cap: usize) -> Result<PairMatrix, DatasetError> {
    if vars.len() < 2 {
        return Err(DatasetError::TooFewVariables { need: 2, got: vars.len() });
    }
    let idx: Vec<usize> = vars.iter().map(|v| ds.require(v)).collect::<Result<_, _>>()?;
    let cells = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| pair_summary(ds, i, j, sample_cap)).collect())
        .collect();
    Ok(PairMatrix { variables: vars.to_vec(), cells })
}

fn pair_summary(ds: &MixedDataset, i: usize, j: usize, cap: usize) -> PairSummary {
    let (vi, vj) = (ds.variable(i), ds.variable(j));
    match (vi.kind, vj.kind) {
        (VariableKind::Categorical, VariableKind::Categorical) => {
            let mut counts = vec![vec![0u64; vj.cardinality()]; vi.cardinality()];
            for (a, b) in ds.column(i).iter().zip(ds.column(j)) {
                counts[*a as usize][*b as usize] += 1;
            }
            PairSummary::CatCat {
                row_variable: vi.name.clone(),
                col_variable: vj.name.clone(),
                row_categories: vi.categories.clone().unwrap_or_default(),
                col_categories: vj.categories.clone().unwrap_or_default(),
                counts,
            }
        }
        (VariableKind::Continuous, VariableKind::Continuous) => {
            let n = ds.row_count();
            let (xs, ys) = (ds.column(i), ds.column(j));
            let points = reservoir(n, cap).into_iter().map(|r| [xs[r], ys[r]]).collect();
            PairSummary::ContCont { x_variable: vi.name.clone(), y_variable: vj.name.clone(), total: n, points }
        }
        _ => {
            let (cat, cont) = if vi.is_categorical() { (i, j) } else { (j, i) };
            let spec = ds.variable(cat);
            let mut buckets = vec![Vec::new(); spec.cardinality()];
            for (c, v) in ds.column(cat).iter().zip(ds.column(cont)) {
                buckets[*c as usize].push(*v);
            }
            let groups = spec
                .categories
                .iter()
                .flatten()
                .zip(buckets.iter_mut())
                .map(|(label, values)| CategoryGroup {
                    category: label.clone(),
                    count: values.len(),
                    stats: BoxStats::of(values),
                })
                .collect();
            PairSummary::CatCont {
                categorical: spec.name.clone(),
                continuous: ds.variable(cont).name.clone(),
                groups,
            }
        }
    }
}

/// Fixed-seed reservoir sample of row indices, returned in ascending order.
fn reservoir(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESERVOIR_SEED);
    let mut picked: Vec<usize> = (0..cap).collect();
    for r in cap..n {
        let k = rng.random_range(0..=r);
        if k < cap {
            picked[k] = r;
        }
    }
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> BTreeMap<String, VariableKind> {
        BTreeMap::new()
    }

    #[test]
    fn binary_column_is_categorical() {
        let mut csv = String::from("flag\n");
        for i in 0..100 {
            csv.push_str(&format!("{}\n", i % 2));
        }
        let ds = load_csv(csv.as_bytes(), &no_overrides()).unwrap();
        assert_eq!(ds.variable(0).kind, VariableKind::Categorical);
        assert_eq!(ds.variable(0).categories.as_deref(), Some(&["0".to_string(), "1".to_string()][..]));
    }

    #[test]
    fn numeric_codes_sorted_even_if_seen_out_of_order() {
        let ds = load_csv(b"g\n3\n1\n2\n1\n", &no_overrides()).unwrap();
        assert_eq!(ds.variable(0).categories.clone().unwrap(), vec!["1", "2", "3"]);
        assert_eq!(ds.column(0), &[2.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn distinct_reals_are_continuous() {
        let mut csv = String::from("x\n");
        for i in 0..100 {
            csv.push_str(&format!("{}\n", i as f64 * 0.37 + 0.01));
        }
        let ds = load_csv(csv.as_bytes(), &no_overrides()).unwrap();
        assert_eq!(ds.variable(0).kind, VariableKind::Continuous);
    }

    #[test]
    fn many_distinct_integers_are_continuous() {
        let mut csv = String::from("age\n");
        for i in 0..11 {
            csv.push_str(&format!("{}\n", 20 + i));
        }
        let ds = load_csv(csv.as_bytes(), &no_overrides()).unwrap();
        assert_eq!(ds.variable(0).kind, VariableKind::Continuous);
    }

    #[test]
    fn strings_keep_first_appearance_order() {
        let ds = load_csv(b"smoke,x\nnever,1.5\ncurrent,2.5\nnever,3.5\nformer,0.5\n", &no_overrides()).unwrap();
        assert_eq!(ds.variable(0).categories.clone().unwrap(), vec!["never", "current", "former"]);
        assert_eq!(ds.column(0), &[0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = load_csv(b"age,age,bmi\n1,2,3\n", &no_overrides()).unwrap_err();
        assert_eq!(err, DatasetError::DuplicateHeader("age".into()));
    }

    #[test]
    fn rows_with_empty_cells_are_dropped() {
        let ds = load_csv(b"a,b\n1.5,2.5\n,3.5\n2.5,\n4.5,5.5\n", &no_overrides()).unwrap();
        assert_eq!(ds.row_count(), 2);
        assert_eq!(ds.dropped_rows(), 2);
        let err = load_csv(b"a,b\n,1\n", &no_overrides()).unwrap_err();
        assert_eq!(err, DatasetError::NoRows { dropped: 1 });
    }

    #[test]
    fn single_category_rejected() {
        let err = load_csv(b"a,b\nx,1.5\nx,2.5\n", &no_overrides()).unwrap_err();
        assert_eq!(err, DatasetError::SingleCategory("a".into()));
    }

    #[test]
    fn overrides_force_kind() {
        let mut o = BTreeMap::new();
        o.insert("a".to_string(), VariableKind::Continuous);
        o.insert("b".to_string(), VariableKind::Categorical);
        let ds = load_csv(b"a,b\n0,1.5\n1,2.5\n0,1.5\n", &o).unwrap();
        assert_eq!(ds.variable(0).kind, VariableKind::Continuous);
        assert_eq!(ds.variable(1).cardinality(), 2);
        o.insert("c".to_string(), VariableKind::Continuous);
        assert!(matches!(load_csv(b"a,b\n0,1\n", &o), Err(DatasetError::UnknownVariable(_))));
        let mut o = BTreeMap::new();
        o.insert("s".to_string(), VariableKind::Continuous);
        assert!(matches!(load_csv(b"s\nx\ny\n", &o), Err(DatasetError::NonNumericContinuous(_))));
    }

    #[test]
    fn ragged_row_is_a_csv_error() {
        assert!(matches!(load_csv(b"a,b\n1,2\n3\n", &no_overrides()), Err(DatasetError::Csv { .. })));
    }

    fn cont_ds(cols: &[(&str, Vec<f64>)]) -> MixedDataset {
        MixedDataset::from_columns(
            cols.iter().map(|(n, _)| VariableSpec::continuous(*n)).collect(),
            cols.iter().map(|(_, c)| c.clone()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pearson_examples() {
        let ds = cont_ds(&[
            ("x", vec![1.0, 2.0, 3.0]),
            ("y", vec![2.0, 4.0, 7.0]),
            ("neg", vec![-1.0, -2.0, -3.0]),
            ("same", vec![1.0, 2.0, 3.0]),
            ("flat", vec![5.0, 5.0, 5.0]),
        ]);
        let rep = pearson_correlations(&ds, "x").unwrap();
        let get = |n: &str| rep.entries.iter().find(|e| e.variable == n).unwrap().clone();
        assert_eq!(get("same").r, 1.0);
        assert_eq!(get("neg").r, -1.0);
        // Independent evaluation: sxy = 5, sxx = 2, syy = 12.666…
        assert!((get("y").r - 0.993_399_267_798_783).abs() < 1e-12);
        let flat = get("flat");
        assert_eq!(flat.r, 0.0);
        assert!(flat.constant);
        assert!(matches!(pearson_correlations(&ds, "nope"), Err(DatasetError::UnknownVariable(_))));
    }

    #[test]
    fn top_n_orders_and_clamps() {
        let rep = CorrelationReport {
            outcome: "y".into(),
            entries: vec![],
        };
        assert!(top_n(&rep, 3).is_empty());
        let ds = cont_ds(&[
            ("y", vec![1.0, 2.0, 3.0, 4.0]),
            ("bmi", vec![1.0, 2.0, 3.0, 4.0]),
            ("age", vec![-1.0, -2.0, -3.0, -4.0]),
            ("w", vec![1.0, 3.0, 2.0, 4.0]),
        ]);
        let rep = pearson_correlations(&ds, "y").unwrap();
        // |r| ties between bmi and age break by name.
        assert_eq!(top_n(&rep, 2), vec!["age", "bmi"]);
        assert_eq!(top_n(&rep, 99).len(), 3);
    }

    #[test]
    fn pair_kinds_and_counts() {
        let n = 200;
        let sex: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let smoke: Vec<f64> = (0..n).map(|i| ((i / 3) % 2) as f64).collect();
        let bmi: Vec<f64> = (0..n).map(|i| 20.0 + (i as f64 * 0.731).sin() * 5.0).collect();
        let age: Vec<f64> = (0..n).map(|i| 30.0 + i as f64 * 0.1).collect();
        let two = || vec!["0".to_string(), "1".to_string()];
        let ds = MixedDataset::from_columns(
            vec![
                VariableSpec::categorical("sex", two()),
                VariableSpec::categorical("smoke", two()),
                VariableSpec::continuous("bmi"),
                VariableSpec::continuous("age"),
            ],
            vec![sex, smoke, bmi, age],
        )
        .unwrap();
        let vars: Vec<String> = ["sex", "smoke", "bmi", "age"].iter().map(|s| s.to_string()).collect();
        let m = pairwise_summaries(&ds, &vars, 50).unwrap();
        assert_eq!(m.cells.len(), 4);
        assert!(m.cells.iter().all(|r| r.len() == 4));
        match &m.cells[0][1] {
            PairSummary::CatCat { counts, .. } => {
                assert_eq!(counts.len(), 2);
                assert_eq!(counts.iter().flatten().sum::<u64>(), n as u64);
            }
            other => panic!("unexpected {other:?}"),
        }
        match &m.cells[2][0] {
            PairSummary::CatCont { groups, categorical, .. } => {
                assert_eq!(categorical, "sex");
                assert_eq!(groups.len(), 2);
                for g in groups {
                    let s = g.stats.as_ref().unwrap();
                    assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        match &m.cells[2][3] {
            PairSummary::ContCont { points, total, .. } => {
                assert_eq!(points.len(), 50);
                assert_eq!(*total, n);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m, pairwise_summaries(&ds, &vars, 50).unwrap());
        assert!(pairwise_summaries(&ds, &vars[..1], 50).is_err());
        assert!(pairwise_summaries(&ds, &["sex".into(), "zzz".into()], 50).is_err());
    }

    #[test]
    fn cont_cont_cap_at_large_n() {
        let n = 100_000;
        let ds = cont_ds(&[
            ("bmi", (0..n).map(|i| i as f64).collect()),
            ("age", (0..n).map(|i| (i * 7 % 13) as f64 + 0.5).collect()),
        ]);
        let m = pairwise_summaries(&ds, &["bmi".into(), "age".into()], DEFAULT_SAMPLE_CAP).unwrap();
        match &m.cells[0][1] {
            PairSummary::ContCont { points, .. } => {
                assert_eq!(points.len(), 2000);
                assert!(points.windows(2).all(|w| w[0][0] < w[1][0]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let ds = load_csv(b"g,x\na,1.5\nb,2.5\na,0.25\n", &no_overrides()).unwrap();
        let text = serde_json::to_string(&ds).unwrap();
        assert!(text.contains("\"rows\""));
        let back: MixedDataset = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ds);
        let bad = r#"{"variables":[{"name":"g","kind":"Categorical","categories":["a","b"]}],"rows":[[2]]}"#;
        assert!(serde_json::from_str::<MixedDataset>(bad).is_err());
    }
}
