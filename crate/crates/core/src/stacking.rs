//! Stacked generalization: out-of-fold class supports from the base
//! classifiers become dense meta-features for a second-tier classifier.
//!
//! Columns are ordered classifier-major then class, named
//! `spec{i}_class{j}`.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratify, Label, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureSpaceSpec, SparseVector};
use crate::kernel_svm::{self, KernelModel};
use crate::linear_svm::{self, LinearModel, SvmParams};
use crate::pipeline::{derive_seed, name_hash, BaseModel, PreparedCorpus, Settings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub specs: Vec<FeatureSpaceSpec>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Corpus index of each row.
    pub instances: Vec<usize>,
}

impl MetaDataset {
    pub fn width(&self) -> usize {
        self.specs.len() * NUM_CLASSES
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        meta_header(self.specs.len())
    }

    /// Delimited dump: one `spec{i}_class{j}` column per value, then `label`.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = self.header();
        header.push("label".into());
        writeln!(out, "{}", header.join("\t"))?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            fields.push(label.name().into());
            writeln!(out, "{}", fields.join("\t"))?;
        }
        Ok(())
    }
}

pub fn meta_header(classifiers: usize) -> Vec<String> {
    (0..classifiers)
        .flat_map(|i| (0..NUM_CLASSES).map(move |j| format!("spec{i}_class{j}")))
        .collect()
}

/// Record of which training instances built the model behind each meta
/// row, used to prove the meta-features are out-of-fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageAudit {
    /// Training indices of each inner fold's base models.
    pub fold_training_sets: Vec<Vec<usize>>,
    /// Inner fold whose models produced each meta row.
    pub row_fold: Vec<usize>,
    pub instances: Vec<usize>,
}

impl LeakageAudit {
    /// Fails if any meta row came from a model trained on that row's instance.
    pub fn verify(&self) -> Result<()> {
        let sets: Vec<HashSet<usize>> = self
            .fold_training_sets
            .iter()
            .map(|s| s.iter().copied().collect())
            .collect();
        for (&instance, &fold) in self.instances.iter().zip(&self.row_fold) {
            if sets[fold].contains(&instance) {
                return Err(Error::Leakage(format!(
                    "instance {instance} was in the training set of inner fold {fold}"
                )));
            }
        }
        Ok(())
    }
}

fn seed_for(seed: u64, inner_fold: u64, set: &FeatureSet) -> u64 {
    derive_seed(seed, &[inner_fold, name_hash(&set.name())])
}

fn fit_all(data: &PreparedCorpus<'_>, specs: &[FeatureSpaceSpec], train: &[usize], settings: &Settings, seed: impl Fn(&FeatureSet) -> u64 + Sync) -> Result<Vec<BaseModel>> {
    specs
        .par_iter()
        .map(|&spec| {
            let set = FeatureSet::single(spec);
            BaseModel::fit(data, &set, train, settings, seed(&set))
        })
        .collect()
}

/// Out-of-fold meta-features for `train` via inner stratified CV.
pub fn generate_meta_features(
    data: &PreparedCorpus<'_>,
    train: &[usize],
    specs: &[FeatureSpaceSpec],
    inner_k: usize,
    seed: u64,
    settings: &Settings,
) -> Result<(MetaDataset, LeakageAudit)> {
    if specs.is_empty() {
        return Err(Error::EmptySelection("no base feature spaces"));
    }
    let labels = data.labels(train);
    let folds = stratify(&labels, inner_k, seed)?;
    let width = specs.len() * NUM_CLASSES;

    let per_fold: Vec<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)> = (0..inner_k)
        .into_par_iter()
        .map(|f| {
            let inner_train: Vec<usize> = folds.train_indices(f).into_iter().map(|p| train[p]).collect();
            let held_out: Vec<usize> = folds.test_indices(f);
            let held_instances: Vec<usize> = held_out.iter().map(|&p| train[p]).collect();
            let models = fit_all(data, specs, &inner_train, settings, |set| seed_for(seed, f as u64 + 1, set))?;
            let rows = meta_rows(data, &models, &held_instances, settings)?;
            Ok((inner_train, held_out, rows))
        })
        .collect::<Result<_>>()?;

    let mut rows = vec![Vec::new(); train.len()];
    let mut row_fold = vec![0; train.len()];
    let mut fold_training_sets = Vec::with_capacity(inner_k);
    for (f, (inner_train, held_out, fold_rows)) in per_fold.into_iter().enumerate() {
        for (p, row) in held_out.into_iter().zip(fold_rows) {
            rows[p] = row;
            row_fold[p] = f;
        }
        fold_training_sets.push(inner_train);
    }
    debug_assert!(rows.iter().all(|r| r.len() == width));

    let audit = LeakageAudit {
        fold_training_sets,
        row_fold,
        instances: train.to_vec(),
    };
    audit.verify()?;
    Ok((
        MetaDataset {
            specs: specs.to_vec(),
            rows,
            labels,
            instances: train.to_vec(),
        },
        audit,
    ))
}

fn meta_rows(data: &PreparedCorpus<'_>, models: &[BaseModel], instances: &[usize], settings: &Settings) -> Result<Vec<Vec<f64>>> {
    let supports = models
        .iter()
        .map(|m| m.supports(data, instances, settings.prob_map))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..instances.len())
        .map(|r| supports.iter().flat_map(|s| s[r].0).collect())
        .collect())
}

/// Base models trained on the full outer-training slice, one per spec.
pub fn train_base_models(data: &PreparedCorpus<'_>, train: &[usize], specs: &[FeatureSpaceSpec], seed: u64, settings: &Settings) -> Result<Vec<BaseModel>> {
    fit_all(data, specs, train, settings, |set| seed_for(seed, 0, set))
}

/// Test-side meta-features from full-trained base models, in the same
/// column order as [`generate_meta_features`].
pub fn meta_features_for_test(data: &PreparedCorpus<'_>, models: &[BaseModel], test: &[usize], settings: &Settings) -> Result<MetaDataset> {
    let specs = models
        .iter()
        .map(|m| match m.features().specs() {
            [one] => Ok(*one),
            _ => Err(Error::Config("meta-features need single-space base models".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaDataset {
        specs,
        rows: meta_rows(data, models, test, settings)?,
        labels: data.labels(test),
        instances: test.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaKind {
    Linear,
    Rbf,
}

impl MetaKind {
    pub fn name(self) -> &'static str {
        match self {
            MetaKind::Linear => "linear",
            MetaKind::Rbf => "rbf",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            MetaKind::Linear => "Linear SVM meta-classifier",
            MetaKind::Rbf => "RBF-kernel SVM meta-classifier",
        }
    }
}

impl fmt::Display for MetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(MetaKind::Linear),
            "rbf" => Ok(MetaKind::Rbf),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetaModel {
    Linear(LinearModel),
    Rbf(KernelModel),
}

impl MetaModel {
    pub fn predict(&self, row: &[f64], settings: &Settings) -> Result<Label> {
        match self {
            MetaModel::Linear(m) => {
                if row.len() != m.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim(),
                        found: row.len(),
                    });
                }
                m.predict(&SparseVector::from_dense(row))
            }
            MetaModel::Rbf(m) => Ok(m.predict(row, settings.prob_map)?.0),
        }
    }

    pub fn predict_all(&self, meta: &MetaDataset, settings: &Settings) -> Result<Vec<Label>> {
        meta.rows.iter().map(|r| self.predict(r, settings)).collect()
    }
}

pub fn train_meta(meta: &MetaDataset, kind: MetaKind, settings: &Settings, seed: u64) -> Result<MetaModel> {
    let width = meta.width();
    if let Some(r) = meta.rows.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: r.len(),
        });
    }
    match kind {
        MetaKind::Linear => {
            let x: Vec<SparseVector> = meta.rows.iter().map(|r| SparseVector::from_dense(r)).collect();
            let params = SvmParams { seed, ..settings.svm };
            Ok(MetaModel::Linear(linear_svm::train(&x, &meta.labels, width, &params)?))
        }
        MetaKind::Rbf => Ok(MetaModel::Rbf(kernel_svm::train_rbf(&meta.rows, &meta.labels, &settings.rbf)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};

    fn toy() -> Corpus {
        let words = [(Label::Hate, "vile"), (Label::Offensive, "damn"), (Label::Ok, "lovely")];
        let mut docs = Vec::new();
        for i in 0..30 {
            let (label, w) = words[i % 3];
            docs.push(Document {
                id: format!("d{i}"),
                text: format!("{w} filler{} common", i % 4),
                label,
            });
        }
        Corpus::new(docs).unwrap()
    }

    #[test]
    fn header_order() {
        assert_eq!(meta_header(2), ["spec0_class0", "spec0_class1", "spec0_class2", "spec1_class0", "spec1_class1", "spec1_class2"]);
        assert_eq!(meta_header(16).len(), 48);
    }

    #[test]
    fn two_specs_give_width_six_and_are_reproducible() {
        let corpus = toy();
        let data = PreparedCorpus::new(&corpus, None);
        let train: Vec<usize> = (0..corpus.len()).collect();
        let specs = [FeatureSpaceSpec::WordNgram(1), FeatureSpaceSpec::CharNgram(3)];
        let settings = Settings::default();
        let (meta, audit) = generate_meta_features(&data, &train, &specs, 3, 11, &settings).unwrap();
        assert_eq!(meta.width(), 6);
        assert!(meta.rows.iter().all(|r| r.len() == 6));
        for row in &meta.rows {
            for block in row.chunks(3) {
                assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        audit.verify().unwrap();
        let (again, _) = generate_meta_features(&data, &train, &specs, 3, 11, &settings).unwrap();
        assert_eq!(meta, again);
    }

    #[test]
    fn audit_detects_leakage() {
        let audit = LeakageAudit {
            fold_training_sets: vec![vec![1, 2], vec![0, 3]],
            row_fold: vec![0, 0],
            instances: vec![0, 2],
        };
        assert!(audit.verify().is_err());
    }

    #[test]
    fn test_side_matches_direct_supports() {
        let corpus = toy();
        let data = PreparedCorpus::new(&corpus, None);
        let train: Vec<usize> = (0..24).collect();
        let test: Vec<usize> = (24..30).collect();
        let settings = Settings::default();
        let models = train_base_models(&data, &train, &[FeatureSpaceSpec::WordNgram(1)], 5, &settings).unwrap();
        let meta = meta_features_for_test(&data, &models, &test[..1], &settings).unwrap();
        assert_eq!(meta.width(), 3);
        assert_eq!(meta.header(), meta_header(1));
        let direct = models[0].supports(&data, &test[..1], settings.prob_map).unwrap();
        assert_eq!(meta.rows[0], direct[0].0.to_vec());
    }

    #[test]
    fn one_hot_base_gives_perfect_linear_meta() {
        let one_hot = |l: Label| {
            let mut r = vec![0.0; 3];
            r[l.index()] = 1.0;
            r
        };
        let labels: Vec<Label> = (0..30).map(|i| Label::ALL[i % 3]).collect();
        let meta = MetaDataset {
            specs: vec![FeatureSpaceSpec::WordNgram(1)],
            rows: labels.iter().map(|&l| one_hot(l)).collect(),
            labels: labels.clone(),
            instances: (0..30).collect(),
        };
        let settings = Settings::default();
        for kind in [MetaKind::Linear, MetaKind::Rbf] {
            let model = train_meta(&meta, kind, &settings, 1).unwrap();
            for l in Label::ALL {
                assert_eq!(model.predict(&one_hot(l), &settings).unwrap(), l);
            }
        }
    }

    #[test]
    fn mismatched_width_rejected() {
        let meta = MetaDataset {
            specs: vec![FeatureSpaceSpec::WordNgram(1)],
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            labels: vec![Label::Hate, Label::Ok],
            instances: vec![0, 1],
        };
        assert!(train_meta(&meta, MetaKind::Linear, &Settings::default(), 1).is_err());
    }
}
