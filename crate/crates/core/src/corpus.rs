//! Labeled corpus ingestion and stratified fold construction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 3;

/// The three target classes, with fixed canonical indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hate = 0,
    Offensive = 1,
    Ok = 2,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Hate, Label::Offensive, Label::Ok];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Hate => "hate",
            Label::Offensive => "offensive",
            Label::Ok => "ok",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hate" => Ok(Label::Hate),
            "offensive" => Ok(Label::Offensive),
            "ok" => Ok(Label::Ok),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// An ordered, immutable collection of labeled documents.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    class_counts: [usize; NUM_CLASSES],
}

impl Corpus {
    /// Builds a corpus, checking that ids are unique and texts non-empty.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        let mut class_counts = [0; NUM_CLASSES];
        for (row, doc) in documents.iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::MalformedRow {
                    row: row + 1,
                    message: format!("duplicate document id {:?}", doc.id),
                });
            }
            if doc.text.trim().is_empty() {
                return Err(Error::MalformedRow {
                    row: row + 1,
                    message: "empty text".into(),
                });
            }
            class_counts[doc.label.index()] += 1;
        }
        Ok(Corpus {
            documents,
            class_counts,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        self.class_counts
    }

    pub fn labels(&self) -> Vec<Label> {
        self.documents.iter().map(|d| d.label).collect()
    }

    /// Number of classes with at least one document.
    pub fn classes_present(&self) -> usize {
        self.class_counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Which columns of a delimited file hold the text and the label, and how
/// raw label values map onto the three classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub text_column: String,
    pub label_column: String,
    pub label_map: BTreeMap<String, Label>,
    /// Optional column used as document id; row numbers are used otherwise.
    #[serde(default)]
    pub id_column: Option<String>,
    /// Field delimiter. When absent, `.tsv`/`.tab` files use tab and all
    /// other files use comma.
    #[serde(default)]
    pub delimiter: Option<char>,
}

impl ColumnMapping {
    fn delimiter_for(&self, path: &Path) -> u8 {
        if let Some(d) = self.delimiter {
            return d as u8;
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => b'\t',
            _ => b',',
        }
    }
}

/// Reads a delimited file with a header row into a [`Corpus`].
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_corpus(path: &Path, mapping: &ColumnMapping) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter_for(path))
        .has_headers(true)
        .flexible(false)
        .from_reader(file);

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(Error::EmptyCorpus),
        Err(e) => {
            return Err(Error::MalformedRow {
                row: 0,
                message: e.to_string(),
            })
        }
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let text_col = column(&mapping.text_column)?;
    let label_col = column(&mapping.label_column)?;
    let id_col = mapping.id_column.as_deref().map(column).transpose()?;

    let mut documents = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let field = |col: usize| {
            record.get(col).ok_or_else(|| Error::MalformedRow {
                row,
                message: format!("missing field {col}"),
            })
        };
        let raw_label = field(label_col)?;
        let label = *mapping
            .label_map
            .get(raw_label.trim())
            .ok_or_else(|| Error::InvalidLabel {
                row,
                value: raw_label.to_string(),
            })?;
        let text = field(text_col)?.to_string();
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => format!("row{row}"),
        };
        documents.push(Document { id, text, label });
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Corpus::new(documents)
}

/// Assignment of every corpus document to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment over a label sequence.
///
/// Indices of each class are shuffled with the seed and dealt round-robin;
/// the dealing position carries over between classes so fold sizes also
/// stay within one of each other.
pub fn stratify(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFolds {
            k,
            reason: "k must be at least 2".into(),
        });
    }
    let mut groups: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, label) in labels.iter().enumerate() {
        groups[label.index()].push(i);
    }
    if let Some((label, smallest)) = Label::ALL
        .iter()
        .map(|l| (*l, groups[l.index()].len()))
        .filter(|&(_, n)| n > 0)
        .min_by_key(|&(_, n)| n)
    {
        if smallest < k {
            return Err(Error::InvalidFolds {
                k,
                reason: format!("class {label} has only {smallest} members"),
            });
        }
    } else {
        return Err(Error::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut position = 0;
    for group in groups.iter_mut() {
        group.shuffle(&mut rng);
        for &idx in group.iter() {
            assignment[idx] = position % k;
            position += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        assignment,
        seed,
    })
}

pub fn stratified_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment> {
    stratify(&corpus.labels(), k, seed)
}

/// Accuracy of always predicting the most frequent class.
pub fn majority_baseline(corpus: &Corpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let max = corpus.class_counts.iter().copied().max().unwrap_or(0);
    Ok(max as f64 / corpus.len() as f64)
}
