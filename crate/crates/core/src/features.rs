//! Surface feature spaces, vocabularies and sparse count vectors.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::brown::{cluster_ngrams, BrownLexicon};
use crate::error::{Error, Result};
use crate::preprocess::ProcessedText;

/// One of the sixteen base feature spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSpaceSpec {
    CharNgram(usize),
    WordNgram(usize),
    SkipBigram(usize),
    ClusterNgram(usize),
}

impl FeatureSpaceSpec {
    pub fn new_char(n: usize) -> Result<Self> {
        check_range("character n-gram order", n, 2, 8, "2..=8")?;
        Ok(FeatureSpaceSpec::CharNgram(n))
    }

    pub fn new_word(n: usize) -> Result<Self> {
        check_range("word n-gram order", n, 1, 3, "1..=3")?;
        Ok(FeatureSpaceSpec::WordNgram(n))
    }

    pub fn new_skip(k: usize) -> Result<Self> {
        check_range("skip distance", k, 1, 3, "1..=3")?;
        Ok(FeatureSpaceSpec::SkipBigram(k))
    }

    pub fn new_cluster(n: usize) -> Result<Self> {
        check_range("cluster n-gram order", n, 1, 3, "1..=3")?;
        Ok(FeatureSpaceSpec::ClusterNgram(n))
    }

    /// The sixteen base spaces in canonical order: char 2 to 8, word 1 to 3,
    /// skip 1 to 3, cluster 1 to 3.
    pub fn all() -> Vec<FeatureSpaceSpec> {
        let mut v: Vec<_> = (2..=8).map(FeatureSpaceSpec::CharNgram).collect();
        v.extend((1..=3).map(FeatureSpaceSpec::WordNgram));
        v.extend((1..=3).map(FeatureSpaceSpec::SkipBigram));
        v.extend((1..=3).map(FeatureSpaceSpec::ClusterNgram));
        v
    }

    pub fn name(&self) -> String {
        match self {
            FeatureSpaceSpec::CharNgram(n) => format!("char{n}"),
            FeatureSpaceSpec::WordNgram(n) => format!("word{n}"),
            FeatureSpaceSpec::SkipBigram(k) => format!("skip{k}"),
            FeatureSpaceSpec::ClusterNgram(n) => format!("brown{n}"),
        }
    }

    /// Human-readable row title used in result tables.
    pub fn title(&self) -> String {
        fn ordinal(n: usize) -> &'static str {
            match n {
                1 => "unigrams",
                2 => "bigrams",
                3 => "trigrams",
                _ => "",
            }
        }
        match *self {
            FeatureSpaceSpec::CharNgram(n) if n <= 3 => format!("Character {}", ordinal(n)),
            FeatureSpaceSpec::CharNgram(n) => format!("Character {n}-grams"),
            FeatureSpaceSpec::WordNgram(n) => format!("Word {}", ordinal(n)),
            FeatureSpaceSpec::SkipBigram(k) => format!("{k}-skip Word bigrams"),
            FeatureSpaceSpec::ClusterNgram(n) => format!("Brown cluster {}", ordinal(n)),
        }
    }

    pub fn needs_clusters(&self) -> bool {
        matches!(self, FeatureSpaceSpec::ClusterNgram(_))
    }

    /// Extracts this space's feature multiset from a processed document.
    pub fn extract(&self, text: &ProcessedText, lexicon: Option<&BrownLexicon>) -> Result<Vec<String>> {
        match *self {
            FeatureSpaceSpec::CharNgram(n) => char_ngrams(&text.normalized, n),
            FeatureSpaceSpec::WordNgram(n) => word_ngrams(&text.tokens, n),
            FeatureSpaceSpec::SkipBigram(k) => skip_bigrams(&text.tokens, k),
            FeatureSpaceSpec::ClusterNgram(n) => {
                let lexicon = lexicon.ok_or_else(|| {
                    Error::Config(format!("feature space {} requires a cluster lexicon", self.name()))
                })?;
                cluster_ngrams(&text.tokens, lexicon, n)
            }
        }
    }
}

fn check_range(what: &'static str, value: usize, lo: usize, hi: usize, expected: &'static str) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::OutOfRange {
            what,
            value,
            expected,
        });
    }
    Ok(())
}

impl fmt::Display for FeatureSpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureSpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::UnknownName(s.to_string()))?;
        let (kind, num) = s.split_at(split);
        let n: usize = num.parse().map_err(|_| Error::UnknownName(s.to_string()))?;
        match kind {
            "char" => FeatureSpaceSpec::new_char(n),
            "word" => FeatureSpaceSpec::new_word(n),
            "skip" => FeatureSpaceSpec::new_skip(n),
            "brown" | "cluster" => FeatureSpaceSpec::new_cluster(n),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl TryFrom<String> for FeatureSpaceSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSpaceSpec> for String {
    fn from(spec: FeatureSpaceSpec) -> String {
        spec.name()
    }
}

/// One or more base spaces vectorized into a single vocabulary. With more
/// than one space, feature strings are prefixed by `name:` to keep the
/// spaces disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    specs: Vec<FeatureSpaceSpec>,
}

impl FeatureSet {
    pub fn single(spec: FeatureSpaceSpec) -> Self {
        FeatureSet { specs: vec![spec] }
    }

    pub fn combined(specs: Vec<FeatureSpaceSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::EmptySelection("feature set has no spaces"));
        }
        Ok(FeatureSet { specs })
    }

    pub fn specs(&self) -> &[FeatureSpaceSpec] {
        &self.specs
    }

    pub fn needs_clusters(&self) -> bool {
        self.specs.iter().any(FeatureSpaceSpec::needs_clusters)
    }

    pub fn name(&self) -> String {
        match self.specs.as_slice() {
            [one] => one.name(),
            _ if self.specs == FeatureSpaceSpec::all() => "all".to_string(),
            many => many.iter().map(|s| s.name()).collect::<Vec<_>>().join("+"),
        }
    }

    pub fn extract(&self, text: &ProcessedText, lexicon: Option<&BrownLexicon>) -> Result<Vec<String>> {
        match self.specs.as_slice() {
            [one] => one.extract(text, lexicon),
            many => {
                let mut out = Vec::new();
                for spec in many {
                    let prefix = spec.name();
                    out.extend(
                        spec.extract(text, lexicon)?
                            .into_iter()
                            .map(|f| format!("{prefix}:{f}")),
                    );
                }
                Ok(out)
            }
        }
    }
}

/// Every contiguous length-`n` character substring, spaces included.
pub fn char_ngrams(text: &str, n: usize) -> Result<Vec<String>> {
    check_range("character n-gram order", n, 2, 8, "2..=8")?;
    let chars: Vec<char> = text.chars().collect();
    Ok(chars.windows(n).map(|w| w.iter().collect()).collect())
}

/// Contiguous token windows of length `n`, joined by single spaces.
pub fn word_ngrams(tokens: &[String], n: usize) -> Result<Vec<String>> {
    check_range("word n-gram order", n, 1, 3, "1..=3")?;
    Ok(tokens.windows(n).map(|w| w.join(" ")).collect())
}

/// Ordered token pairs with exactly `k` tokens between them.
pub fn skip_bigrams(tokens: &[String], k: usize) -> Result<Vec<String>> {
    check_range("skip distance", k, 1, 3, "1..=3")?;
    Ok(tokens
        .iter()
        .zip(tokens.iter().skip(k + 1))
        .map(|(a, b)| format!("{a} {b}"))
        .collect())
}

/// Feature-string to dense-index map, indices assigned in lexicographic
/// order of the feature strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    features: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from feature multisets of the training documents.
    pub fn build<'a, I>(multisets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&'a str, u64> = HashMap::new();
        let mut docs = 0;
        for features in multisets {
            docs += 1;
            for f in features {
                *counts.entry(f.as_str()).or_insert(0) += 1;
            }
        }
        if docs == 0 {
            return Err(Error::EmptySelection("no training documents for vocabulary"));
        }
        let mut entries: Vec<(&str, u64)> = counts.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let features: Vec<String> = entries.iter().map(|(f, _)| f.to_string()).collect();
        let counts = entries.iter().map(|&(_, c)| c).collect();
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        Ok(Vocabulary {
            features,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn feature(&self, index: usize) -> Option<&str> {
        self.features.get(index).map(String::as_str)
    }

    /// Total occurrences of a feature across the training documents.
    pub fn training_count(&self, index: usize) -> Option<u64> {
        self.counts.get(index).copied()
    }

    /// Writes `index<TAB>feature<TAB>training_count` lines.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, (f, c)) in self.features.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{i}\t{f}\t{c}")?;
        }
        Ok(())
    }

    /// Counts in-vocabulary features; unknown features are dropped.
    pub fn vectorize(&self, features: &[String]) -> SparseVector {
        let mut indices: Vec<usize> = features.iter().filter_map(|f| self.get(f)).collect();
        indices.sort_unstable();
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(indices.len());
        for i in indices {
            match entries.last_mut() {
                Some((last, count)) if *last == i => *count += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        SparseVector { entries }
    }
}

/// Sparse vector with strictly increasing indices and positive values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector::default()
    }

    /// Builds a vector from arbitrary `(index, value)` pairs, summing
    /// duplicate indices and dropping zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((last, acc)) if *last == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { entries }
    }

    /// Dense-to-sparse conversion keeping the non-zero entries.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One past the largest index, or zero when empty.
    pub fn min_dimension(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i + 1)
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(i, v)| (i, v * factor)).collect())
    }

    /// Replaces every count by 1.
    pub fn binarized(&self) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|&(i, _)| (i, 1.0)).collect(),
        }
    }

    pub fn add(&self, other: &SparseVector) -> SparseVector {
        let mut pairs = self.entries.clone();
        pairs.extend_from_slice(&other.entries);
        SparseVector::from_pairs(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn signed_values_survive_conversion() {
        let v = SparseVector::from_dense(&[-0.5, 0.0, 2.0]);
        assert_eq!(v.entries(), &[(0, -0.5), (2, 2.0)]);
        assert_eq!(v.scaled(-2.0).entries(), &[(0, 1.0), (2, -4.0)]);
        assert!(SparseVector::from_pairs(vec![(1, 1.0), (1, -1.0)]).is_empty());
    }

    #[test]
    fn char_ngram_examples() {
        assert_eq!(char_ngrams("yo hi", 2).unwrap(), s(&["yo", "o ", " h", "hi"]));
        assert!(char_ngrams("hi", 8).unwrap().is_empty());
        assert!(char_ngrams("hi", 1).is_err());
        assert!(char_ngrams("hi", 9).is_err());
        // characters, not bytes
        assert_eq!(char_ngrams("éé", 2).unwrap(), s(&["éé"]));
    }

    #[test]
    fn word_and_skip_examples() {
        let t = s(&["a", "b", "c"]);
        assert_eq!(word_ngrams(&t, 2).unwrap(), s(&["a b", "b c"]));
        assert!(word_ngrams(&s(&["a"]), 3).unwrap().is_empty());
        assert!(word_ngrams(&t, 0).is_err());
        assert!(word_ngrams(&t, 4).is_err());
        assert_eq!(skip_bigrams(&s(&["a", "b", "c", "d"]), 1).unwrap(), s(&["a c", "b d"]));
        assert!(skip_bigrams(&s(&["a", "b"]), 1).unwrap().is_empty());
        assert!(skip_bigrams(&t, 0).is_err());
        assert!(skip_bigrams(&t, 4).is_err());
    }

    #[test]
    fn spec_parsing_and_ranges() {
        let all = FeatureSpaceSpec::all();
        assert_eq!(all.len(), 16);
        for spec in &all {
            assert_eq!(spec.name().parse::<FeatureSpaceSpec>().unwrap(), *spec);
        }
        assert!("char1".parse::<FeatureSpaceSpec>().is_err());
        assert!("char9".parse::<FeatureSpaceSpec>().is_err());
        assert!("word4".parse::<FeatureSpaceSpec>().is_err());
        assert!("skip0".parse::<FeatureSpaceSpec>().is_err());
        assert!("brown4".parse::<FeatureSpaceSpec>().is_err());
        assert!("bogus2".parse::<FeatureSpaceSpec>().is_err());
        assert_eq!(FeatureSpaceSpec::CharNgram(4).title(), "Character 4-grams");
        assert_eq!(FeatureSpaceSpec::SkipBigram(2).title(), "2-skip Word bigrams");
        assert_eq!(FeatureSet::combined(all).unwrap().name(), "all");
    }

    #[test]
    fn vocabulary_examples() {
        let docs = [
            char_ngrams("ab", 2).unwrap(),
            char_ngrams("bc", 2).unwrap(),
        ];
        let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(vocab.len(), 2);
        assert_eq!(vocab.get("ab"), Some(0));
        assert_eq!(vocab.get("bc"), Some(1));
        let again = Vocabulary::build(docs.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(vocab, again);
        assert!(Vocabulary::build(std::iter::empty::<&[String]>()).is_err());

        let mut out = Vec::new();
        vocab.dump(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0\tab\t1\n1\tbc\t1\n");
    }

    #[test]
    fn vectorize_drops_unknown() {
        let vocab = Vocabulary::build([s(&["ab"])].iter().map(Vec::as_slice)).unwrap();
        assert_eq!(vocab.vectorize(&s(&["ab", "ab", "zz"])).entries(), &[(0, 2.0)]);
        assert!(vocab.vectorize(&[]).is_empty());
        assert_eq!(vocab.len(), 1);
    }

    #[test]
    fn combined_set_prefixes() {
        let text = ProcessedText::new("ab cd");
        let set = FeatureSet::combined(vec![
            FeatureSpaceSpec::CharNgram(4),
            FeatureSpaceSpec::WordNgram(2),
        ])
        .unwrap();
        assert_eq!(
            set.extract(&text, None).unwrap(),
            s(&["char4:ab c", "char4:b cd", "word2:ab cd"])
        );
        let brown = FeatureSet::single(FeatureSpaceSpec::ClusterNgram(1));
        assert!(brown.extract(&text, None).is_err());
    }

    fn brute_substrings(s: &str, n: usize) -> Vec<String> {
        let chars: Vec<char> = s.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        while start + n <= chars.len() {
            let mut g = String::new();
            for c in &chars[start..start + n] {
                g.push(*c);
            }
            out.push(g);
            start += 1;
        }
        out
    }

    fn tokens_strategy() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-c]{1,3}", 0..12)
    }

    proptest! {
        #[test]
        fn char_ngrams_match_brute_force(text in "[a-c é]{0,60}", n in 2usize..=8) {
            let got = char_ngrams(&text, n).unwrap();
            prop_assert_eq!(got.len(), text.chars().count().saturating_sub(n - 1));
            prop_assert_eq!(got, brute_substrings(&text, n));
        }

        #[test]
        fn skip_and_word_cardinalities(tokens in tokens_strategy(), n in 1usize..=3, k in 1usize..=3) {
            prop_assert_eq!(word_ngrams(&tokens, n).unwrap().len(), tokens.len().saturating_sub(n - 1));
            prop_assert_eq!(skip_bigrams(&tokens, k).unwrap().len(), tokens.len().saturating_sub(k + 1));
        }

        #[test]
        fn vectorize_sorted_and_linear(
            train in prop::collection::vec(tokens_strategy(), 1..5),
            a in tokens_strategy(),
            b in tokens_strategy(),
        ) {
            let vocab = Vocabulary::build(train.iter().map(Vec::as_slice)).unwrap();
            let size = vocab.len();
            let va = vocab.vectorize(&a);
            let vb = vocab.vectorize(&b);
            for v in [&va, &vb] {
                prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
                prop_assert!(v.entries().iter().all(|&(i, c)| i < size && c > 0.0));
            }
            let mut union = a.clone();
            union.extend(b.iter().cloned());
            prop_assert_eq!(vocab.vectorize(&union), va.add(&vb));
            prop_assert_eq!(vocab.len(), size);
        }

        #[test]
        fn vocabulary_is_lexicographic(train in prop::collection::vec(tokens_strategy(), 1..5)) {
            let vocab = Vocabulary::build(train.iter().map(Vec::as_slice)).unwrap();
            let all: Vec<String> = (0..vocab.len()).map(|i| vocab.feature(i).unwrap().to_string()).collect();
            let mut expected: Vec<String> = train.concat();
            expected.sort();
            expected.dedup();
            prop_assert_eq!(&sorted(all.clone()), &all);
            prop_assert_eq!(all, expected);
        }
    }
}
