//! Experiment orchestration behind the command-line tool: loading inputs,
//! running one method or the full results table, and writing outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{top_features, RankedFeature};
use crate::brown::BrownLexicon;
use crate::config::Config;
use crate::corpus::{load_corpus, stratify, Corpus, Label};
use crate::ensemble::{DecisionProfile, FusionRule};
use crate::error::{Error, Result};
use crate::eval::{self, base_seed, cross_validate, fit_fold_models, fold_predictions, fold_seed, CurvePoint, EvaluationReport, Method};
use crate::features::{FeatureSet, FeatureSpaceSpec, Vocabulary};
use crate::pipeline::{derive_seed, name_hash, BaseModel, PreparedCorpus};
use crate::plot;
use crate::stacking::{self, MetaKind};

/// The corpus and, when configured, the cluster lexicon.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub lexicon: Option<BrownLexicon>,
}

impl Inputs {
    pub fn load(config: &Config) -> Result<Self> {
        let corpus = load_corpus(&config.data.path, &config.data.mapping())?;
        let lexicon = config.brown.path.as_deref().map(BrownLexicon::load).transpose()?;
        Ok(Inputs { corpus, lexicon })
    }

    pub fn prepare(&self) -> PreparedCorpus<'_> {
        PreparedCorpus::new(&self.corpus, self.lexicon.as_ref())
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_report(out: &Path, report: &EvaluationReport, plot: bool) -> Result<()> {
    write_file(&out.join("report.json"), report.to_json()? + "\n")?;
    let mut tsv = Vec::new();
    report.write_confusion_tsv(&mut tsv).expect("writing to memory");
    write_file(&out.join("confusion.tsv"), tsv)?;
    if plot {
        write_file(&out.join("confusion.svg"), plot::confusion_svg(report))?;
    }
    Ok(())
}

/// Cross-validates the configured method and writes `report.json` and
/// `confusion.tsv` under `out`.
pub fn run_experiment(config: &Config, out: &Path, plot: bool) -> Result<EvaluationReport> {
    let method = config.method()?;
    config.validate(method.needs_clusters())?;
    let inputs = Inputs::load(config)?;
    let data = inputs.prepare();
    let report = cross_validate(&data, &method, config.k, config.seed, &config.settings())?;
    ensure_dir(out)?;
    write_report(out, &report, plot)?;
    if config.run.dump_meta {
        if let Method::Stack { specs, .. } = &method {
            let meta = meta_dump(&data, config, specs)?;
            let mut buf = Vec::new();
            meta.dump(&mut buf).expect("writing to memory");
            write_file(&out.join("meta_features.tsv"), buf)?;
        }
    }
    Ok(report)
}

/// Training-side meta-features of the first outer fold.
fn meta_dump(data: &PreparedCorpus<'_>, config: &Config, specs: &[FeatureSpaceSpec]) -> Result<stacking::MetaDataset> {
    let folds = stratify(&data.corpus().labels(), config.k, config.seed)?;
    let train = folds.train_indices(0);
    let settings = config.settings();
    let (meta, _) = stacking::generate_meta_features(data, &train, specs, settings.inner_k, fold_seed(config.seed, 0), &settings)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub description: String,
    pub accuracy: f64,
    pub fold_std: f64,
    pub seed: u64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn get(&self, method: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Tab-separated table, accuracies in percent to two decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tdescription\taccuracy_pct\tfold_std_pct\tseed\tk\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.2}\t{:.2}\t{}\t{}",
                r.method,
                r.description,
                r.accuracy * 100.0,
                r.fold_std * 100.0,
                r.seed,
                r.k
            )
            .unwrap();
        }
        out
    }
}

/// Everything computed by [`run_all`].
#[derive(Debug, Clone)]
pub struct RunAll {
    pub table: ResultsTable,
    /// One report per table row, in the same order.
    pub reports: Vec<EvaluationReport>,
}

impl RunAll {
    pub fn report(&self, method: &str) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    /// The most accurate row other than the oracle; earlier rows win ties.
    pub fn best(&self) -> &EvaluationReport {
        self.reports
            .iter()
            .filter(|r| r.method != ORACLE)
            .fold(None::<&EvaluationReport>, |best, r| match best {
                Some(b) if b.accuracy >= r.accuracy => Some(b),
                _ => Some(r),
            })
            .expect("table has rows")
    }
}

pub const ORACLE: &str = "oracle";
pub const MAJORITY: &str = "majority";

struct FoldOutcome {
    test: Vec<usize>,
    /// Predictions in table order, without the oracle.
    predictions: Vec<Vec<Label>>,
}

/// Single spaces, the combined space, every fusion rule, both
/// meta-classifiers, the majority baseline and the oracle, all over the same
/// folds. Single-space rows equal what [`cross_validate`] reports for them.
pub fn run_all_on(data: &PreparedCorpus<'_>, config: &Config) -> Result<RunAll> {
    let specs = config.features.specs();
    if specs.is_empty() {
        return Err(Error::Config("features.spaces is empty".into()));
    }
    let settings = config.settings();
    let (seed, k) = (config.seed, config.k);
    let combined = FeatureSet::combined(specs.clone())?;

    let mut methods: Vec<(String, String)> = vec![(MAJORITY.into(), "Majority class baseline".into())];
    methods.extend(specs.iter().map(|s| (s.name(), s.title())));
    methods.push((combined.name(), "All features combined".into()));
    methods.extend(FusionRule::ALL.iter().map(|r| (Method::Fusion { rule: *r, specs: vec![] }.name(), r.title().to_string())));
    methods.extend([MetaKind::Linear, MetaKind::Rbf].iter().map(|m| (Method::Stack { kind: *m, specs: vec![] }.name(), m.title().to_string())));

    let folds = stratify(&data.corpus().labels(), k, seed)?;
    let mut outcomes = Vec::with_capacity(k);
    // Folds run one after another so only one fold's models are held at a
    // time; work inside a fold is parallel.
    for f in 0..k {
        let train = folds.train_indices(f);
        let test = folds.test_indices(f);
        let mut predictions = Vec::with_capacity(methods.len());
        predictions.push(fold_predictions(data, &Method::Majority, &train, &test, f, seed, &settings)?);

        let models = fit_fold_models(data, &train, &specs, f, seed, &settings)?;
        for m in &models {
            predictions.push(m.predict(data, &test)?);
        }
        let combined_model = BaseModel::fit(data, &combined, &train, &settings, base_seed(seed, f, &combined))?;
        predictions.push(combined_model.predict(data, &test)?);
        drop(combined_model);

        let supports = models
            .iter()
            .map(|m| m.supports(data, &test, settings.prob_map))
            .collect::<Result<Vec<_>>>()?;
        let profiles = (0..test.len())
            .map(|r| DecisionProfile::new(supports.iter().map(|s| s[r].0).collect()))
            .collect::<Result<Vec<_>>>()?;
        for rule in FusionRule::ALL {
            predictions.push(profiles.iter().map(|p| rule.combine(p)).collect());
        }

        let fs = fold_seed(seed, f);
        let (meta_train, _) = stacking::generate_meta_features(data, &train, &specs, settings.inner_k, fs, &settings)?;
        let meta_test = stacking::meta_features_for_test(data, &models, &test, &settings)?;
        for kind in [MetaKind::Linear, MetaKind::Rbf] {
            let meta = stacking::train_meta(&meta_train, kind, &settings, fs)?;
            predictions.push(meta.predict_all(&meta_test, &settings)?);
        }
        outcomes.push(FoldOutcome { test, predictions });
    }

    let mut reports = Vec::with_capacity(methods.len() + 1);
    for (m, (name, _)) in methods.iter().enumerate() {
        let per_fold: Vec<(Vec<usize>, Vec<Label>)> = outcomes.iter().map(|o| (o.test.clone(), o.predictions[m].clone())).collect();
        reports.push(eval::pooled_report(data, name, seed, k, &folds.assignment, &per_fold)?);
    }

    // The oracle predicts the gold label whenever any member is right and
    // the first member's label otherwise, so its report carries the oracle
    // accuracy and a matching confusion matrix.
    let members = specs.len() + usize::from(settings.oracle_includes_combined);
    let oracle_per_fold: Vec<(Vec<usize>, Vec<Label>)> = outcomes
        .iter()
        .map(|o| {
            let member_preds = &o.predictions[1..1 + members];
            let preds = o
                .test
                .iter()
                .enumerate()
                .map(|(r, &i)| {
                    let gold = data.label(i);
                    if member_preds.iter().any(|p| p[r] == gold) {
                        gold
                    } else {
                        member_preds[0][r]
                    }
                })
                .collect();
            (o.test.clone(), preds)
        })
        .collect();
    let oracle = eval::pooled_report(data, ORACLE, seed, k, &folds.assignment, &oracle_per_fold)?;
    debug_assert_eq!(
        Some(oracle.accuracy),
        eval::oracle_accuracy(&(1..1 + members).map(|m| pooled_predictions(data, &outcomes, m)).collect::<Vec<_>>(), &data.corpus().labels()).ok()
    );
    reports.push(oracle);
    methods.push((ORACLE.into(), format!("Oracle over {members} classifiers")));

    let rows = methods
        .iter()
        .zip(&reports)
        .map(|((name, description), r)| ResultRow {
            method: name.clone(),
            description: description.clone(),
            accuracy: r.accuracy,
            fold_std: r.fold_std(),
            seed,
            k,
        })
        .collect();
    Ok(RunAll {
        table: ResultsTable { rows },
        reports,
    })
}

fn pooled_predictions(data: &PreparedCorpus<'_>, outcomes: &[FoldOutcome], method: usize) -> Vec<Label> {
    let mut out = vec![Label::Hate; data.len()];
    for o in outcomes {
        for (&i, &p) in o.test.iter().zip(&o.predictions[method]) {
            out[i] = p;
        }
    }
    out
}

/// Validates, loads inputs, runs [`run_all_on`] and writes
/// `results_table.tsv`, `reports.json`, plus `report.json` and
/// `confusion.tsv` for the best non-oracle row.
pub fn run_all(config: &Config, out: &Path, plot: bool) -> Result<RunAll> {
    config.validate(config.features.specs().iter().any(FeatureSpaceSpec::needs_clusters))?;
    let inputs = Inputs::load(config)?;
    let data = inputs.prepare();
    let result = run_all_on(&data, config)?;
    ensure_dir(out)?;
    write_file(&out.join("results_table.tsv"), result.table.to_tsv())?;
    write_file(&out.join("reports.json"), serde_json::to_string_pretty(&result.reports)? + "\n")?;
    write_report(out, result.best(), plot)?;
    Ok(result)
}

/// Learning curve of the configured method over `run.curve_sizes`, written
/// to `learning_curve.tsv` (and `.svg` when plotting).
pub fn run_learning_curve(config: &Config, out: &Path, plot: bool) -> Result<Vec<CurvePoint>> {
    let method = config.method()?;
    config.validate(method.needs_clusters())?;
    let sizes = config.curve_sizes()?;
    let inputs = Inputs::load(config)?;
    let data = inputs.prepare();
    let points = eval::learning_curve(&data, &method, &sizes, config.k, config.seed, &config.settings())?;
    ensure_dir(out)?;
    let mut tsv = String::from("train_size\taccuracy_pct\tfold_std_pct\tseed\n");
    for p in &points {
        writeln!(tsv, "{:.1}\t{:.2}\t{:.2}\t{}", p.train_size, p.accuracy * 100.0, p.fold_std * 100.0, config.seed).unwrap();
    }
    write_file(&out.join("learning_curve.tsv"), tsv)?;
    if plot {
        write_file(&out.join("learning_curve.svg"), plot::learning_curve_svg(&method.name(), &points))?;
    }
    Ok(points)
}

/// A model trained on the whole corpus, for analysis rather than evaluation.
pub fn full_model(data: &PreparedCorpus<'_>, set: &FeatureSet, config: &Config) -> Result<BaseModel> {
    let all: Vec<usize> = (0..data.len()).collect();
    BaseModel::fit(data, set, &all, &config.settings(), derive_seed(config.seed, &[name_hash(&set.name())]))
}

pub fn analyze(data: &PreparedCorpus<'_>, config: &Config, set: &FeatureSet, class: Label, top: usize, negative: bool) -> Result<Vec<RankedFeature>> {
    let model = full_model(data, set, config)?;
    top_features(model.model(), model.vocabulary(), class, top, negative)
}

/// Vocabulary of `set` over the whole corpus.
pub fn full_vocabulary(data: &PreparedCorpus<'_>, set: &FeatureSet) -> Result<Vocabulary> {
    let multisets = (0..data.len()).map(|i| data.extract(set, i)).collect::<Result<Vec<_>>>()?;
    Vocabulary::build(multisets.iter().map(Vec::as_slice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, SyntheticSpec};

    fn setup() -> (Inputs, Config) {
        let corpus = synthetic::corpus(&SyntheticSpec {
            per_class: [15, 20, 25],
            signal: 0.8,
            seed: 5,
        });
        let lexicon = BrownLexicon::parse(&synthetic::cluster_file(5)).unwrap();
        let mut config = Config::with_data("unused.tsv");
        config.k = 3;
        config.stacking.inner_k = 2;
        config.seed = 11;
        (
            Inputs {
                corpus,
                lexicon: Some(lexicon),
            },
            config,
        )
    }

    #[test]
    fn run_all_rows_match_cross_validation() {
        let (inputs, mut config) = setup();
        config.features.spaces = Some(vec![FeatureSpaceSpec::WordNgram(1), FeatureSpaceSpec::CharNgram(3), FeatureSpaceSpec::ClusterNgram(1)]);
        let data = inputs.prepare();
        let settings = config.settings();
        let all = run_all_on(&data, &config).unwrap();
        // majority + 3 singles + combined + 4 fusion + 2 meta + oracle
        assert_eq!(all.table.rows.len(), 12);
        assert!(all.table.rows.iter().all(|r| r.seed == 11));
        for spec in config.features.specs() {
            let cv = cross_validate(&data, &Method::Single(FeatureSet::single(spec)), 3, 11, &settings).unwrap();
            assert_eq!(all.report(&spec.name()).unwrap(), &cv);
        }
        let stack = cross_validate(&data, &Method::Stack { kind: MetaKind::Rbf, specs: config.features.specs() }, 3, 11, &settings).unwrap();
        assert_eq!(all.report("stack-rbf").unwrap(), &stack);
        let fusion = cross_validate(&data, &Method::Fusion { rule: FusionRule::Borda, specs: config.features.specs() }, 3, 11, &settings).unwrap();
        assert_eq!(all.report("fusion-borda").unwrap(), &fusion);
        let combined = FeatureSet::combined(config.features.specs()).unwrap();
        let cv = cross_validate(&data, &Method::Single(combined.clone()), 3, 11, &settings).unwrap();
        assert_eq!(all.report(&combined.name()).unwrap(), &cv);

        let oracle = all.table.get(ORACLE).unwrap().accuracy;
        for spec in config.features.specs() {
            assert!(oracle >= all.table.get(&spec.name()).unwrap().accuracy);
        }
        assert_eq!(all.table.to_tsv(), run_all_on(&data, &config).unwrap().table.to_tsv());
    }

    #[test]
    fn default_run_all_has_twenty_five_rows() {
        let (inputs, mut config) = setup();
        config.k = 2;
        let data = inputs.prepare();
        let all = run_all_on(&data, &config).unwrap();
        assert_eq!(all.table.rows.len(), 25);
        assert_eq!(all.table.rows[17].method, "all");
        assert_eq!(all.table.rows.last().unwrap().description, "Oracle over 17 classifiers");
        let tsv = all.table.to_tsv();
        assert_eq!(tsv.lines().count(), 26);
    }

    #[test]
    fn analysis_lists_class_words() {
        let (inputs, config) = setup();
        let data = inputs.prepare();
        let top = analyze(&data, &config, &FeatureSet::single(FeatureSpaceSpec::WordNgram(1)), Label::Ok, 5, false).unwrap();
        assert!(!top.is_empty());
        let ok_words = ["lovely", "weekend", "coffee", "sunshine", "friends", "music", "happy", "garden"];
        assert!(ok_words.contains(&top[0].feature.as_str()), "{:?}", top[0]);
        let vocab = full_vocabulary(&data, &FeatureSet::single(FeatureSpaceSpec::WordNgram(1))).unwrap();
        assert!(vocab.get("lovely").is_some());
        assert!(vocab.get("@someone").is_none());
    }
}
