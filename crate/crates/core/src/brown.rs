//! Brown cluster lexicons and cluster-path features.
//!
//! The lexicon is read from a pre-induced cluster file with one
//! `bitstring<TAB>word<TAB>count` line per word. Unigram features expand
//! each path into its even-length prefixes; bigram and trigram features
//! join full paths.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAX_PATH_LEN: usize = 16;
pub const UNKNOWN: &str = "<UNK>";

/// A validated cluster path: 1 to 16 binary digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterPath(String);

impl ClusterPath {
    pub fn parse(bits: &str) -> std::result::Result<Self, String> {
        if bits.is_empty() {
            return Err("empty cluster path".into());
        }
        if bits.len() > MAX_PATH_LEN {
            return Err(format!("cluster path longer than {MAX_PATH_LEN} bits"));
        }
        if let Some(c) = bits.chars().find(|&c| c != '0' && c != '1') {
            return Err(format!("non-binary character {c:?} in cluster path"));
        }
        Ok(ClusterPath(bits.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Prefixes of length 2, 4, ..., 16 that fit, plus the full path;
/// distinct, shortest first.
pub fn prefixes(path: &ClusterPath) -> Vec<String> {
    let bits = path.as_str();
    let mut out: Vec<String> = (2..=MAX_PATH_LEN)
        .step_by(2)
        .filter(|&p| p <= bits.len())
        .map(|p| bits[..p].to_string())
        .collect();
    if out.last().map(String::as_str) != Some(bits) {
        out.push(bits.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrownLexicon {
    word_to_path: HashMap<String, ClusterPath>,
    cluster_count: usize,
}

impl BrownLexicon {
    /// Parses cluster-file contents. Later duplicates of a word are ignored.
    pub fn parse(contents: &str) -> Result<Self> {
        let mut word_to_path = HashMap::new();
        let mut clusters = HashSet::new();
        for (i, line) in contents.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| Error::MalformedClusterLine {
                line: line_no,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(malformed(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let path = ClusterPath::parse(cols[0]).map_err(malformed)?;
            if cols[1].is_empty() {
                return Err(malformed("empty word".into()));
            }
            cols[2]
                .trim()
                .parse::<u64>()
                .map_err(|_| malformed(format!("count {:?} is not an integer", cols[2])))?;
            clusters.insert(path.clone());
            word_to_path.entry(cols[1].to_string()).or_insert(path);
        }
        if word_to_path.is_empty() {
            return Err(Error::EmptyClusterFile);
        }
        Ok(BrownLexicon {
            word_to_path,
            cluster_count: clusters.len(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BrownLexicon::parse(&contents)
    }

    pub fn path_of(&self, word: &str) -> Option<&ClusterPath> {
        self.word_to_path.get(word)
    }

    /// Number of distinct cluster paths.
    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn word_count(&self) -> usize {
        self.word_to_path.len()
    }
}

pub fn load_clusters(path: &Path) -> Result<BrownLexicon> {
    BrownLexicon::load(path)
}

/// Cluster features for a token sequence. Tokens missing from the lexicon
/// become [`UNKNOWN`].
pub fn cluster_ngrams(tokens: &[String], lexicon: &BrownLexicon, n: usize) -> Result<Vec<String>> {
    if !(1..=3).contains(&n) {
        return Err(Error::OutOfRange {
            what: "cluster n-gram order",
            value: n,
            expected: "1..=3",
        });
    }
    let paths: Vec<Option<&ClusterPath>> = tokens.iter().map(|t| lexicon.path_of(t)).collect();
    if n == 1 {
        let mut out = Vec::new();
        for p in paths {
            match p {
                Some(p) => out.extend(prefixes(p)),
                None => out.push(UNKNOWN.to_string()),
            }
        }
        return Ok(out);
    }
    let full: Vec<&str> = paths
        .iter()
        .map(|p| p.map_or(UNKNOWN, ClusterPath::as_str))
        .collect();
    Ok(full.windows(n).map(|w| w.join(" ")).collect())
}
