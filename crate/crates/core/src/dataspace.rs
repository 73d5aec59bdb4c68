//! Labeled datasets, CSV/ARFF ingestion, stratified train/test splits and
//! stratified k-fold plans.
//!
//! Attribute values are stored row-major as `f64`. Categorical attributes hold
//! their level index, so every learner sees a single numeric matrix and looks
//! at [`AttrKind`] to decide how to treat a column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file is empty")]
    EmptyFile,
    #[error("label column not found")]
    MissingLabelColumn,
    #[error("row at line {0} has a different number of fields")]
    RaggedRow(usize),
    #[error("missing value at line {0}")]
    MissingValue(usize),
    #[error("unsupported attribute type for `{0}`")]
    UnsupportedAttributeType(String),
    #[error("parse error at line {0}")]
    ParseError(usize),
    #[error("dataset needs at least two distinct classes")]
    SingleClass,
    #[error("too few instances for the requested split")]
    TooFewInstances,
    #[error("fold count {k} is invalid for {n} instances")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttrKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

impl AttrKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, AttrKind::Numeric)
    }

    pub fn level_count(&self) -> Option<usize> {
        match self {
            AttrKind::Numeric => None,
            AttrKind::Categorical { levels } => Some(levels.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttrKind,
}

impl Attribute {
    pub fn numeric(name: &str) -> Self {
        Self { name: name.into(), kind: AttrKind::Numeric }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: AttrKind::Categorical { levels: levels.iter().map(|s| s.to_string()).collect() },
        }
    }
}

/// Builds an all-numeric dataset with classes named "0".."n_classes-1".
pub fn numeric_dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Dataset, DataError> {
    let d = rows.first().map_or(0, Vec::len);
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(
        "inline",
        (0..d).map(|a| Attribute::numeric(&format!("x{a}"))).collect(),
        rows,
        labels,
        (0..n_classes).map(|c| c.to_string()).collect(),
    )
}

/// An immutable labeled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    attributes: Vec<Attribute>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    label_name: String,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<Attribute>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(DataError::Invalid(format!("row {i} has wrong arity")));
            }
            for (v, attr) in row.iter().zip(&attributes) {
                match &attr.kind {
                    AttrKind::Numeric if !v.is_finite() => {
                        return Err(DataError::Invalid(format!("row {i}: non-finite value")))
                    }
                    AttrKind::Categorical { levels }
                        if v.fract() != 0.0 || *v < 0.0 || (*v as usize) >= levels.len() =>
                    {
                        return Err(DataError::Invalid(format!(
                            "row {i}: level out of range for `{}`",
                            attr.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DataError::Invalid(format!("label {bad} out of range")));
        }
        Ok(Self {
            name: name.into(),
            attributes,
            rows,
            labels,
            class_names,
            label_name: "class".to_string(),
        })
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Per-class instance counts, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// A new dataset keeping only the given attribute columns.
    pub fn project(&self, attrs: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            attributes: attrs.iter().map(|&a| self.attributes[a].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| attrs.iter().map(|&a| r[a]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Serializes to CSV with a header row and the label as last column.
    ///
    /// Numeric values are written with Rust's shortest round-trip formatting,
    /// so reloading with [`load_csv`] restores them bit for bit.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.label_name);
        out.push_str(&header.join(","));
        out.push('\n');
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            for (v, attr) in row.iter().zip(&self.attributes) {
                match &attr.kind {
                    AttrKind::Numeric => write!(out, "{v:?}").unwrap(),
                    AttrKind::Categorical { levels } => out.push_str(&levels[*v as usize]),
                }
                out.push(',');
            }
            out.push_str(&self.class_names[label]);
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Which column of a CSV file holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    Last,
}

pub fn load_csv(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    has_header: bool,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &name, label, has_header)
}

pub fn parse_csv(
    text: &str,
    name: &str,
    label: &LabelColumn,
    has_header: bool,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    let mut width = None;
    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => return Err(DataError::RaggedRow(line)),
            _ => {}
        }
        if has_header && header.is_none() {
            header = Some(fields);
        } else {
            records.push((line, fields));
        }
    }
    let width = width.ok_or(DataError::EmptyFile)?;
    if records.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(_) => return Err(DataError::MissingLabelColumn),
        LabelColumn::Last => width - 1,
        LabelColumn::Name(n) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == n))
            .ok_or(DataError::MissingLabelColumn)?,
    };
    let names: Vec<String> = match &header {
        Some(h) => h.clone(),
        None => (0..width).map(|i| format!("attr{i}")).collect(),
    };

    for (line, fields) in &records {
        if fields.iter().any(|f| f == "?") {
            return Err(DataError::MissingValue(*line));
        }
    }

    let mut attributes = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for col in (0..width).filter(|&c| c != label_idx) {
        let parsed: Option<Vec<f64>> = records
            .iter()
            .map(|(_, f)| f[col].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) => {
                attributes.push(Attribute {
                    name: names[col].clone(),
                    kind: AttrKind::Numeric,
                });
                columns.push(values);
            }
            None => {
                let (levels, codes) = encode_first_appearance(records.iter().map(|(_, f)| &f[col]));
                attributes.push(Attribute {
                    name: names[col].clone(),
                    kind: AttrKind::Categorical { levels },
                });
                columns.push(codes.into_iter().map(|c| c as f64).collect());
            }
        }
    }
    let (class_names, labels) =
        encode_first_appearance(records.iter().map(|(_, f)| &f[label_idx]));
    if class_names.len() < 2 {
        return Err(DataError::SingleClass);
    }
    let rows = (0..records.len())
        .map(|r| columns.iter().map(|c| c[r]).collect())
        .collect();
    Ok(Dataset::new(name, attributes, rows, labels, class_names)?
        .with_label_name(names[label_idx].clone()))
}

fn encode_first_appearance<'a>(values: impl Iterator<Item = &'a String>) -> (Vec<String>, Vec<usize>) {
    let mut levels: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut codes = Vec::new();
    for v in values {
        let code = match index.get(v.as_str()) {
            Some(&c) => c,
            None => {
                levels.push(v.clone());
                index.insert(v.as_str(), levels.len() - 1);
                levels.len() - 1
            }
        };
        codes.push(code);
    }
    (levels, codes)
}

pub fn load_arff(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path)?;
    parse_arff(&text)
}

/// Parses the numeric + nominal subset of ARFF.
///
/// The label is the attribute named `class` (case-insensitive) when present,
/// otherwise the last attribute. It must be nominal.
pub fn parse_arff(text: &str) -> Result<Dataset, DataError> {
    let mut relation = String::new();
    let mut decls: Vec<(String, AttrKind)> = Vec::new();
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut in_data = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            let fields = split_arff_fields(line);
            rows.push((line_no, fields));
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(line["@relation".len()..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            let rest = line["@attribute".len()..].trim();
            let (name, spec) = take_arff_name(rest).ok_or(DataError::ParseError(line_no))?;
            let spec = spec.trim();
            let kind = if spec.starts_with('{') {
                let inner = spec
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or(DataError::ParseError(line_no))?;
                let levels: Vec<String> = split_arff_fields(inner);
                if levels.is_empty() {
                    return Err(DataError::ParseError(line_no));
                }
                AttrKind::Categorical { levels }
            } else {
                match spec.to_ascii_lowercase().as_str() {
                    "numeric" | "real" | "integer" => AttrKind::Numeric,
                    _ => return Err(DataError::UnsupportedAttributeType(name)),
                }
            };
            decls.push((name, kind));
        } else if lower.starts_with("@data") {
            in_data = true;
        } else {
            return Err(DataError::ParseError(line_no));
        }
    }
    if decls.is_empty() || rows.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let label_idx = decls
        .iter()
        .position(|(n, _)| n.eq_ignore_ascii_case("class"))
        .unwrap_or(decls.len() - 1);
    let class_names = match &decls[label_idx].1 {
        AttrKind::Categorical { levels } => levels.clone(),
        AttrKind::Numeric => {
            return Err(DataError::UnsupportedAttributeType(decls[label_idx].0.clone()))
        }
    };

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line_no, fields) in &rows {
        if fields.len() != decls.len() {
            return Err(DataError::RaggedRow(*line_no));
        }
        let mut row = Vec::with_capacity(decls.len() - 1);
        for (j, (field, (_, kind))) in fields.iter().zip(&decls).enumerate() {
            if field == "?" {
                return Err(DataError::MissingValue(*line_no));
            }
            let value = match kind {
                AttrKind::Numeric => field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or(DataError::ParseError(*line_no))?,
                AttrKind::Categorical { levels } => levels
                    .iter()
                    .position(|l| l == field)
                    .ok_or(DataError::ParseError(*line_no))? as f64,
            };
            if j == label_idx {
                labels.push(value as usize);
            } else {
                row.push(value);
            }
        }
        features.push(row);
    }
    let distinct = {
        let mut seen = vec![false; class_names.len()];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(DataError::SingleClass);
    }
    let label_name = decls[label_idx].0.clone();
    let attributes = decls
        .into_iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, (name, kind))| Attribute { name, kind })
        .collect();
    Ok(Dataset::new(relation, attributes, features, labels, class_names)?.with_label_name(label_name))
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn take_arff_name(rest: &str) -> Option<(String, &str)> {
    let rest = rest.trim_start();
    let quote = rest.chars().next()?;
    if quote == '\'' || quote == '"' {
        let end = rest[1..].find(quote)? + 1;
        Some((rest[1..end].to_string(), &rest[end + 1..]))
    } else {
        let end = rest.find(char::is_whitespace)?;
        Some((rest[..end].to_string(), &rest[end..]))
    }
}

fn split_arff_fields(line: &str) -> Vec<String> {
    line.split(',')
        .map(|f| unquote(f.trim()).to_string())
        .filter(|f| !f.is_empty())
        .collect()
}

fn class_buckets(data: &Dataset, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut buckets = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        buckets[l].push(i);
    }
    for b in &mut buckets {
        b.shuffle(rng);
    }
    buckets
}

/// Stratified random split into `(train, test)`.
///
/// The test side receives `round(test_fraction * n)` instances, apportioned to
/// classes by largest remainder. Every class with at least two instances is
/// represented on both sides.
pub fn split_train_test(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = split_indices(data, test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Index form of [`split_train_test`]; both lists are sorted ascending.
pub fn split_indices(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "test fraction {test_fraction} not in (0,1)"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(DataError::TooFewInstances);
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let counts = data.class_counts();
    let quotas = apportion(&counts, n_test);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = class_buckets(data, &mut rng);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (bucket, &q) in buckets.iter().zip(&quotas) {
        test.extend_from_slice(&bucket[..q]);
        train.extend_from_slice(&bucket[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits `total` across classes proportionally to `counts`, keeping at least
/// one instance of every class with two or more members on each side where
/// the total allows it.
fn apportion(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 * total as f64 / n as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            left -= 1;
        }
    }

    // Each class with >= 2 instances should appear on both sides.
    loop {
        let lacking = (0..counts.len()).find(|&c| counts[c] >= 2 && quotas[c] == 0);
        let overfull = (0..counts.len()).find(|&c| counts[c] >= 2 && quotas[c] == counts[c]);
        match (lacking, overfull) {
            (Some(c), _) => {
                let donor = (0..counts.len())
                    .filter(|&d| quotas[d] > 1 || (quotas[d] == 1 && counts[d] == 1))
                    .max_by_key(|&d| (quotas[d], std::cmp::Reverse(d)));
                match donor {
                    Some(d) => {
                        quotas[d] -= 1;
                        quotas[c] += 1;
                    }
                    None => break,
                }
            }
            (None, Some(c)) => {
                let taker = (0..counts.len())
                    .filter(|&d| counts[d] - quotas[d] > 1 || (counts[d] == 1 && quotas[d] == 0))
                    .max_by_key(|&d| (counts[d] - quotas[d], std::cmp::Reverse(d)));
                match taker {
                    Some(d) => {
                        quotas[d] += 1;
                        quotas[c] -= 1;
                    }
                    None => break,
                }
            }
            (None, None) => break,
        }
    }
    quotas
}

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    fold_of: Vec<usize>,
}

impl FoldPlan {
    pub fn from_assignment(k: usize, fold_of: Vec<usize>) -> Result<Self, DataError> {
        if k < 2 || fold_of.iter().any(|&f| f >= k) {
            return Err(DataError::Invalid("fold index out of range".into()));
        }
        Ok(Self { k, fold_of })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn valid_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold plan: a seeded shuffle within each class followed by a
/// single round-robin pass over the classes in index order.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    let n = data.len();
    if k < 2 || k > n {
        return Err(DataError::KTooLarge { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = class_buckets(data, &mut rng);
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for bucket in &buckets {
        for &i in bucket {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, fold_of })
}
