//! Base classifiers: a feature set, the vocabulary built from its training
//! documents, and the linear model trained on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brown::BrownLexicon;
use crate::corpus::{Corpus, Label};
use crate::error::Result;
use crate::features::{FeatureSet, SparseVector, Vocabulary};
use crate::kernel_svm::RbfParams;
use crate::linear_svm::{self, ClassSupport, LinearModel, ProbMap, SvmParams};
use crate::preprocess::ProcessedText;

/// Knobs shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub svm: SvmParams,
    pub prob_map: ProbMap,
    /// Use 0/1 presence instead of raw counts.
    pub binary: bool,
    pub rbf: RbfParams,
    pub inner_k: usize,
    /// Whether the all-features classifier counts toward the oracle.
    pub oracle_includes_combined: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            svm: SvmParams::default(),
            prob_map: ProbMap::Softmax,
            binary: false,
            rbf: RbfParams::default(),
            inner_k: 5,
            oracle_includes_combined: true,
        }
    }
}

/// A corpus with every document normalized and tokenized once.
pub struct PreparedCorpus<'a> {
    corpus: &'a Corpus,
    texts: Vec<ProcessedText>,
    lexicon: Option<&'a BrownLexicon>,
}

impl<'a> PreparedCorpus<'a> {
    pub fn new(corpus: &'a Corpus, lexicon: Option<&'a BrownLexicon>) -> Self {
        let texts = corpus
            .documents()
            .par_iter()
            .map(|d| ProcessedText::new(&d.text))
            .collect();
        PreparedCorpus {
            corpus,
            texts,
            lexicon,
        }
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn lexicon(&self) -> Option<&'a BrownLexicon> {
        self.lexicon
    }

    pub fn text(&self, i: usize) -> &ProcessedText {
        &self.texts[i]
    }

    pub fn label(&self, i: usize) -> Label {
        self.corpus.documents()[i].label
    }

    pub fn labels(&self, indices: &[usize]) -> Vec<Label> {
        indices.iter().map(|&i| self.label(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn extract(&self, set: &FeatureSet, i: usize) -> Result<Vec<String>> {
        set.extract(&self.texts[i], self.lexicon)
    }
}

/// A linear classifier bound to its feature set and vocabulary.
#[derive(Debug, Clone)]
pub struct BaseModel {
    features: FeatureSet,
    vocab: Vocabulary,
    model: LinearModel,
    binary: bool,
}

impl BaseModel {
    /// Builds the vocabulary from `train` only and fits the model.
    pub fn fit(data: &PreparedCorpus<'_>, features: &FeatureSet, train: &[usize], settings: &Settings, seed: u64) -> Result<Self> {
        let multisets = train
            .iter()
            .map(|&i| data.extract(features, i))
            .collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::build(multisets.iter().map(Vec::as_slice))?;
        let x: Vec<SparseVector> = multisets
            .iter()
            .map(|m| {
                let v = vocab.vectorize(m);
                if settings.binary {
                    v.binarized()
                } else {
                    v
                }
            })
            .collect();
        let y = data.labels(train);
        let params = SvmParams { seed, ..settings.svm };
        let model = linear_svm::train(&x, &y, vocab.len(), &params)?;
        Ok(BaseModel {
            features: features.clone(),
            vocab,
            model,
            binary: settings.binary,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn vectorize(&self, data: &PreparedCorpus<'_>, i: usize) -> Result<SparseVector> {
        let v = self.vocab.vectorize(&data.extract(&self.features, i)?);
        Ok(if self.binary { v.binarized() } else { v })
    }

    pub fn supports(&self, data: &PreparedCorpus<'_>, indices: &[usize], map: ProbMap) -> Result<Vec<ClassSupport>> {
        indices
            .iter()
            .map(|&i| self.model.class_probabilities(&self.vectorize(data, i)?, map))
            .collect()
    }

    pub fn predict(&self, data: &PreparedCorpus<'_>, indices: &[usize]) -> Result<Vec<Label>> {
        indices
            .iter()
            .map(|&i| self.model.predict(&self.vectorize(data, i)?))
            .collect()
    }
}

/// Mixes a base seed with a sequence of discriminators (splitmix64).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Stable 64-bit FNV-1a hash of a name, for seed derivation.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
