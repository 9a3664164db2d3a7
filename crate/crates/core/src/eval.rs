//! Cross-validated evaluation: pooled metrics, oracle accuracy and
//! learning curves.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratify, Label, NUM_CLASSES};
use crate::ensemble::{DecisionProfile, FusionRule};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureSpaceSpec};
use crate::pipeline::{derive_seed, name_hash, BaseModel, PreparedCorpus, Settings};
use crate::stacking::{self, MetaKind};

/// Precision, recall and F1 of one class. `ill_defined` is set when a
/// zero denominator forced a metric to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub ill_defined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class metrics from a confusion matrix (rows gold, columns predicted).
pub fn per_class_metrics(confusion: &[Vec<u64>]) -> Result<Vec<ClassMetrics>> {
    let n = confusion.len();
    if let Some(row) = confusion.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: row.len(),
        });
    }
    Ok((0..n)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
            let mut ill_defined = false;
            let mut ratio = |num: f64, den: u64| {
                if den == 0 {
                    ill_defined = true;
                    0.0
                } else {
                    num / den as f64
                }
            };
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                ill_defined = true;
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                ill_defined,
            }
        })
        .collect())
}

fn macro_average(metrics: &[ClassMetrics]) -> Averages {
    let n = metrics.len() as f64;
    Averages {
        precision: metrics.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: metrics.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: metrics.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

fn weighted_average(metrics: &[ClassMetrics]) -> Averages {
    let total: u64 = metrics.iter().map(|m| m.support).sum();
    let w = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            metrics.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
        }
    };
    Averages {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
    }
}

/// Fraction of instances that at least one classifier labels correctly.
pub fn oracle_accuracy(predictions: &[Vec<Label>], gold: &[Label]) -> Result<f64> {
    if predictions.is_empty() || gold.is_empty() {
        return Err(Error::EmptySelection("oracle needs predictions and gold labels"));
    }
    if let Some(row) = predictions.iter().find(|p| p.len() != gold.len()) {
        return Err(Error::LengthMismatch(format!(
            "prediction row of length {} against {} gold labels",
            row.len(),
            gold.len()
        )));
    }
    let hits = (0..gold.len())
        .filter(|&i| predictions.iter().any(|p| p[i] == gold[i]))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

pub fn accuracy(predicted: &[Label], gold: &[Label]) -> f64 {
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    hits as f64 / gold.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub seed: u64,
    pub k: usize,
    pub instances: u64,
    pub accuracy: f64,
    /// Rows are gold labels, columns predictions, in canonical class order.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub fold_accuracies: Vec<f64>,
}

impl EvaluationReport {
    /// Pools predictions across folds. `fold_of[i]` is the fold of instance `i`.
    pub fn from_predictions(method: &str, seed: u64, k: usize, gold: &[Label], predicted: &[Label], fold_of: &[usize]) -> Result<Self> {
        if gold.len() != predicted.len() || gold.len() != fold_of.len() {
            return Err(Error::LengthMismatch("gold, predictions and folds differ in length".into()));
        }
        if gold.is_empty() {
            return Err(Error::EmptySelection("no predictions to evaluate"));
        }
        let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (g, p) in gold.iter().zip(predicted) {
            confusion[g.index()][p.index()] += 1;
        }
        let mut fold_hits = vec![(0usize, 0usize); k];
        for ((g, p), &f) in gold.iter().zip(predicted).zip(fold_of) {
            let entry = fold_hits.get_mut(f).ok_or_else(|| Error::LengthMismatch(format!("fold index {f} >= k={k}")))?;
            entry.1 += 1;
            if g == p {
                entry.0 += 1;
            }
        }
        let fold_accuracies = fold_hits
            .iter()
            .map(|&(h, n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
            .collect();
        let rows: Vec<Vec<u64>> = confusion.iter().map(|r| r.to_vec()).collect();
        let per_class = per_class_metrics(&rows)?;
        let trace: u64 = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
        Ok(EvaluationReport {
            method: method.to_string(),
            seed,
            k,
            instances: gold.len() as u64,
            accuracy: trace as f64 / gold.len() as f64,
            confusion,
            macro_avg: macro_average(&per_class),
            weighted_avg: weighted_average(&per_class),
            per_class,
            fold_accuracies,
        })
    }

    pub fn class_metrics(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.index()]
    }

    pub fn fold_std(&self) -> f64 {
        std_dev(&self.fold_accuracies)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Confusion matrix as tab-separated text with gold labels down the side.
    pub fn write_confusion_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names = Label::ALL.map(|l| l.name());
        writeln!(out, "gold\\predicted\t{}", names.join("\t"))?;
        for label in Label::ALL {
            let counts: Vec<String> = self.confusion[label.index()].iter().map(u64::to_string).collect();
            writeln!(out, "{}\t{}", label.name(), counts.join("\t"))?;
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// What to evaluate under cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Always predict the most frequent class of the training fold.
    Majority,
    Single(FeatureSet),
    Fusion { rule: FusionRule, specs: Vec<FeatureSpaceSpec> },
    Stack { kind: MetaKind, specs: Vec<FeatureSpaceSpec> },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Majority => "majority".into(),
            Method::Single(set) => set.name(),
            Method::Fusion { rule, .. } => format!("fusion-{rule}"),
            Method::Stack { kind, .. } => format!("stack-{kind}"),
        }
    }

    pub fn needs_clusters(&self) -> bool {
        match self {
            Method::Majority => false,
            Method::Single(set) => set.needs_clusters(),
            Method::Fusion { specs, .. } | Method::Stack { specs, .. } => specs.iter().any(|s| s.needs_clusters()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Seed of the model for `set` trained on outer fold `fold`.
pub fn base_seed(seed: u64, fold: usize, set: &FeatureSet) -> u64 {
    derive_seed(seed, &[fold as u64, name_hash(&set.name())])
}

pub(crate) fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, &[0x5eed, fold as u64])
}

/// One single-space model per spec, seeded exactly as the corresponding
/// [`Method::Single`] run on the same fold.
pub fn fit_fold_models(data: &PreparedCorpus<'_>, train: &[usize], specs: &[FeatureSpaceSpec], fold: usize, seed: u64, settings: &Settings) -> Result<Vec<BaseModel>> {
    specs
        .par_iter()
        .map(|&spec| {
            let set = FeatureSet::single(spec);
            BaseModel::fit(data, &set, train, settings, base_seed(seed, fold, &set))
        })
        .collect()
}

/// Trains on `train` and predicts `test` for one fold.
pub fn fold_predictions(data: &PreparedCorpus<'_>, method: &Method, train: &[usize], test: &[usize], fold: usize, seed: u64, settings: &Settings) -> Result<Vec<Label>> {
    match method {
        Method::Majority => {
            let mut counts = [0.0; NUM_CLASSES];
            for &i in train {
                counts[data.label(i).index()] += 1.0;
            }
            let label = Label::ALL[crate::linear_svm::argmax(&counts)];
            Ok(vec![label; test.len()])
        }
        Method::Single(set) => BaseModel::fit(data, set, train, settings, base_seed(seed, fold, set))?.predict(data, test),
        Method::Fusion { rule, specs } => {
            let models = fit_fold_models(data, train, specs, fold, seed, settings)?;
            let supports = models
                .iter()
                .map(|m| m.supports(data, test, settings.prob_map))
                .collect::<Result<Vec<_>>>()?;
            (0..test.len())
                .map(|r| {
                    let profile = DecisionProfile::new(supports.iter().map(|s| s[r].0).collect())?;
                    Ok(rule.combine(&profile))
                })
                .collect()
        }
        Method::Stack { kind, specs } => {
            let fs = fold_seed(seed, fold);
            let (meta_train, _) = stacking::generate_meta_features(data, train, specs, settings.inner_k, fs, settings)?;
            let models = fit_fold_models(data, train, specs, fold, seed, settings)?;
            let meta_test = stacking::meta_features_for_test(data, &models, test, settings)?;
            let meta = stacking::train_meta(&meta_train, *kind, settings, fs)?;
            meta.predict_all(&meta_test, settings)
        }
    }
}

/// k-fold stratified cross-validation with pooled metrics.
pub fn cross_validate(data: &PreparedCorpus<'_>, method: &Method, k: usize, seed: u64, settings: &Settings) -> Result<EvaluationReport> {
    let folds = stratify(&data.corpus().labels(), k, seed)?;
    let per_fold: Vec<(Vec<usize>, Vec<Label>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let predicted = fold_predictions(data, method, &train, &test, f, seed, settings)?;
            Ok((test, predicted))
        })
        .collect::<Result<_>>()?;
    pooled_report(data, &method.name(), seed, k, &folds.assignment, &per_fold)
}

pub(crate) fn pooled_report(data: &PreparedCorpus<'_>, name: &str, seed: u64, k: usize, fold_of: &[usize], per_fold: &[(Vec<usize>, Vec<Label>)]) -> Result<EvaluationReport> {
    let n = data.len();
    let mut predicted = vec![Label::Hate; n];
    for (test, preds) in per_fold {
        for (&i, &p) in test.iter().zip(preds) {
            predicted[i] = p;
        }
    }
    let gold = data.corpus().labels();
    EvaluationReport::from_predictions(name, seed, k, &gold, &predicted, fold_of)
}

/// A learning-curve training size: a fraction of each training fold or an
/// absolute instance count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrainSize {
    Fraction(f64),
    Count(usize),
}

impl std::str::FromStr for TrainSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::UnknownName(s.to_string());
        if let Some(pct) = s.strip_suffix('%') {
            let p: f64 = pct.trim().parse().map_err(|_| bad())?;
            return Ok(TrainSize::Fraction(p / 100.0));
        }
        if s.contains('.') {
            return Ok(TrainSize::Fraction(s.parse().map_err(|_| bad())?));
        }
        Ok(TrainSize::Count(s.parse().map_err(|_| bad())?))
    }
}

impl TrainSize {
    fn resolve(self, available: usize) -> Result<usize> {
        match self {
            TrainSize::Fraction(f) if f > 0.0 && f <= 1.0 => Ok(((f * available as f64).round() as usize).max(1)),
            TrainSize::Fraction(f) => Err(Error::Config(format!("training fraction {f} outside (0, 1]"))),
            TrainSize::Count(n) if n >= 1 && n <= available => Ok(n),
            TrainSize::Count(n) => Err(Error::OutOfRange {
                what: "learning-curve training size",
                value: n,
                expected: "at most the training-fold size",
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Mean number of training instances per fold.
    pub train_size: f64,
    /// Pooled accuracy over all test folds.
    pub accuracy: f64,
    pub fold_std: f64,
}

/// Stratified sample of `size` indices from `train`, in corpus order.
fn subsample(data: &PreparedCorpus<'_>, train: &[usize], size: usize, seed: u64) -> Vec<usize> {
    if size >= train.len() {
        return train.to_vec();
    }
    let mut groups: [Vec<usize>; NUM_CLASSES] = Default::default();
    for &i in train {
        groups[data.label(i).index()].push(i);
    }
    // Largest-remainder allocation of `size` across classes.
    let total = train.len() as f64;
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * size as f64 / total).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut missing = size - take.iter().sum::<usize>();
    for &c in order.iter().cycle().take(NUM_CLASSES * 2) {
        if missing == 0 {
            break;
        }
        if take[c] < groups[c].len() {
            take[c] += 1;
            missing -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(size);
    for (g, &t) in groups.iter_mut().zip(&take) {
        g.shuffle(&mut rng);
        out.extend_from_slice(&g[..t]);
    }
    out.sort_unstable();
    out
}

/// Accuracy as a function of training-set size; folds and seeds match
/// [`cross_validate`] so the full-size point reproduces it exactly.
pub fn learning_curve(data: &PreparedCorpus<'_>, method: &Method, sizes: &[TrainSize], k: usize, seed: u64, settings: &Settings) -> Result<Vec<CurvePoint>> {
    let folds = stratify(&data.corpus().labels(), k, seed)?;
    let fold_train: Vec<Vec<usize>> = (0..k).map(|f| folds.train_indices(f)).collect();
    let min_train = fold_train.iter().map(Vec::len).min().unwrap_or(0);
    for s in sizes {
        s.resolve(min_train)?;
    }
    sizes
        .iter()
        .enumerate()
        .map(|(si, size)| {
            let per_fold: Vec<(Vec<usize>, Vec<Label>, usize)> = (0..k)
                .into_par_iter()
                .map(|f| {
                    let train = &fold_train[f];
                    let n = size.resolve(train.len())?;
                    let sample = subsample(data, train, n, derive_seed(seed, &[0xc0de, si as u64, f as u64]));
                    let test = folds.test_indices(f);
                    let preds = fold_predictions(data, method, &sample, &test, f, seed, settings)?;
                    Ok((test, preds, sample.len()))
                })
                .collect::<Result<_>>()?;
            let pairs: Vec<(Vec<usize>, Vec<Label>)> = per_fold.iter().map(|(t, p, _)| (t.clone(), p.clone())).collect();
            let report = pooled_report(data, &method.name(), seed, k, &folds.assignment, &pairs)?;
            let train_size = per_fold.iter().map(|(_, _, n)| *n as f64).sum::<f64>() / k as f64;
            Ok(CurvePoint {
                train_size,
                accuracy: report.accuracy,
                fold_std: report.fold_std(),
            })
        })
        .collect()
}
