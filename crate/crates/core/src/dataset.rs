//! Labeled (drug, drug, cell line) triplets and the CSV format they live in.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::canonical_key;

/// An unordered drug pair plus a cell line, stored in canonical form:
/// lowercased keys with `drug_a <= drug_b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub drug_a: String,
    pub drug_b: String,
    pub cell: String,
}

impl Triplet {
    pub fn new(drug_a: &str, drug_b: &str, cell: &str) -> Self {
        let a = canonical_key(drug_a);
        let b = canonical_key(drug_b);
        let (drug_a, drug_b) = if a <= b { (a, b) } else { (b, a) };
        Triplet {
            drug_a,
            drug_b,
            cell: canonical_key(cell),
        }
    }

    pub fn drugs(&self) -> [&str; 2] {
        [&self.drug_a, &self.drug_b]
    }

    pub fn has_drug(&self, key: &str) -> bool {
        self.drug_a == key || self.drug_b == key
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.drug_a, self.drug_b, self.cell)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTriplet {
    pub triplet: Triplet,
    pub label: u8,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    drug_a: String,
    drug_b: String,
    cell_line: String,
    label: u8,
}

/// Reads `drug_a,drug_b,cell_line,label`. Rows are canonicalized; a repeated
/// triplet keeps its first occurrence.
pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledTriplet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_csv(&text).map_err(|e| match e {
        Error::Validation(msg) => Error::validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_labeled_csv(text: &str) -> Result<Vec<LabeledTriplet>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::validation(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["drug_a", "drug_b", "cell_line", "label"] {
        return Err(Error::validation(format!(
            "bad dataset header {:?}, expected drug_a,drug_b,cell_line,label",
            headers
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut duplicates = 0usize;
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::validation(format!("row {}: {e}", i + 2)))?;
        if row.label > 1 {
            return Err(Error::validation(format!(
                "row {}: label must be 0 or 1, got {}",
                i + 2,
                row.label
            )));
        }
        let triplet = Triplet::new(&row.drug_a, &row.drug_b, &row.cell_line);
        if triplet.drug_a == triplet.drug_b {
            return Err(Error::validation(format!(
                "row {}: drug pair must be two distinct drugs",
                i + 2
            )));
        }
        if !seen.insert(triplet.clone()) {
            duplicates += 1;
            continue;
        }
        out.push(LabeledTriplet {
            triplet,
            label: row.label,
        });
    }
    if duplicates > 0 {
        log::warn!("dropped {duplicates} repeated triplets (first occurrence kept)");
    }
    Ok(out)
}

/// Reads triplets to score from a CSV with `drug_a`, `drug_b` and
/// `cell_line` columns and an optional `label` column; other columns are
/// ignored.
pub fn load_query_csv(path: impl AsRef<Path>) -> Result<Vec<(Triplet, Option<u8>)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_query_csv(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn parse_query_csv(text: &str) -> Result<Vec<(Triplet, Option<u8>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::validation(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(a), Some(b), Some(c)) = (col("drug_a"), col("drug_b"), col("cell_line")) else {
        return Err(Error::validation("query CSV needs drug_a, drug_b and cell_line columns"));
    };
    let label = col("label");
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::validation(format!("row {}: {e}", i + 2)))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let t = Triplet::new(field(a), field(b), field(c));
        if t.drug_a.is_empty() || t.drug_b.is_empty() || t.cell.is_empty() {
            return Err(Error::validation(format!("row {}: empty entity name", i + 2)));
        }
        let l = match label.map(field) {
            None | Some("") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            Some(other) => return Err(Error::validation(format!("row {}: bad label {other:?}", i + 2))),
        };
        out.push((t, l));
    }
    Ok(out)
}

pub fn write_labeled_csv(path: impl AsRef<Path>, rows: &[LabeledTriplet]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("drug_a,drug_b,cell_line,label\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&r.triplet.drug_a),
            csv_field(&r.triplet.drug_b),
            csv_field(&r.triplet.cell),
            r.label
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Keeps triplets with at least one element in the language model's token
/// vocabulary.
pub fn filter_by_token_vocab(
    rows: Vec<LabeledTriplet>,
    tokens: &BTreeSet<String>,
) -> Vec<LabeledTriplet> {
    rows.into_iter()
        .filter(|r| {
            let t = &r.triplet;
            tokens.contains(&t.drug_a) || tokens.contains(&t.drug_b) || tokens.contains(&t.cell)
        })
        .collect()
}

/// One row of the classifier's input: original rows have unit weight,
/// synthetic rows are positives carrying their likelihood weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub triplet: Triplet,
    pub label: u8,
    pub weight: f64,
    pub is_synthetic: bool,
}

impl TrainingExample {
    pub fn original(row: &LabeledTriplet) -> Self {
        TrainingExample {
            triplet: row.triplet.clone(),
            label: row.label,
            weight: 1.0,
            is_synthetic: false,
        }
    }
}

pub type TrainingSet = Vec<TrainingExample>;

#[derive(Debug, Serialize, Deserialize)]
struct TrainingRow {
    drug_a: String,
    drug_b: String,
    cell_line: String,
    label: u8,
    weight: f64,
    is_synthetic: bool,
}

/// `drug_a,drug_b,cell_line,label,weight,is_synthetic`.
pub fn training_csv(rows: &[TrainingExample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in rows {
        w.serialize(TrainingRow {
            drug_a: e.triplet.drug_a.clone(),
            drug_b: e.triplet.drug_b.clone(),
            cell_line: e.triplet.cell.clone(),
            label: e.label,
            weight: e.weight,
            is_synthetic: e.is_synthetic,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_training_csv(path: impl AsRef<Path>, rows: &[TrainingExample]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, training_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Reads a training set, checking labels and weights; repeated triplets are
/// rejected.
pub fn read_training_csv(path: impl AsRef<Path>) -> Result<TrainingSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_training_csv(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn parse_training_csv(text: &str) -> Result<TrainingSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<TrainingRow>().enumerate() {
        let row: TrainingRow = row.map_err(|e| Error::validation(format!("row {}: {e}", i + 2)))?;
        let triplet = Triplet::new(&row.drug_a, &row.drug_b, &row.cell_line);
        let ok = row.label <= 1
            && row.weight > 0.0
            && row.weight <= 1.0
            && triplet.drug_a != triplet.drug_b
            && (!row.is_synthetic || row.label == 1);
        if !ok {
            return Err(Error::validation(format!("row {}: invalid training row", i + 2)));
        }
        if !seen.insert(triplet.clone()) {
            return Err(Error::validation(format!("row {}: repeated triplet {triplet}", i + 2)));
        }
        out.push(TrainingExample {
            triplet,
            label: row.label,
            weight: row.weight,
            is_synthetic: row.is_synthetic,
        });
    }
    Ok(out)
}

/// Originals followed by the synthetic rows whose triplet is not already in
/// the original dataset.
pub fn merge_datasets(original: &[LabeledTriplet], synthetic: &[TrainingExample]) -> TrainingSet {
    let seen: HashSet<&Triplet> = original.iter().map(|r| &r.triplet).collect();
    original
        .iter()
        .map(TrainingExample::original)
        .chain(synthetic.iter().filter(|e| !seen.contains(&e.triplet)).cloned())
        .collect()
}
