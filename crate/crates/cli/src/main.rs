//! Command-line front end: preprocessing previews, cross-validated
//! experiments, the full results table, learning curves and weight analysis.

use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hateclass::config::{Config, MethodKind};
use hateclass::ensemble::FusionRule;
use hateclass::experiment::{self, Inputs};
use hateclass::features::{FeatureSet, FeatureSpaceSpec};
use hateclass::preprocess::ProcessedText;
use hateclass::stacking::MetaKind;
use hateclass::Label;

#[derive(Parser)]
#[command(name = "hateclass", version, about = "Hate speech / offensive language / ok text classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print each document's normalized text.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Show the raw text next to the normalized text.
        #[arg(long)]
        show: bool,
    },
    /// Cross-validate one method and write report.json and confusion.tsv.
    Run(Common),
    /// Run every single space, the combined space, all fusion rules, both
    /// meta-classifiers, the baseline and the oracle.
    RunAll(Common),
    /// Accuracy against training-set size.
    LearningCurve {
        #[command(flatten)]
        common: Common,
        /// Training sizes such as 10%, 0.5 or 2000 (comma separated).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<String>,
    },
    /// Rank features by their weight in a model trained on the whole corpus.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        class: Label,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// List the most negative weights instead.
        #[arg(long)]
        negative: bool,
    },
    /// Write the vocabulary of a feature set over the whole corpus.
    DumpVocab(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data file; overrides data.path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Brown cluster file; overrides brown.path.
    #[arg(long)]
    brown: Option<PathBuf>,
    /// Output directory (or file for dump-vocab).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Feature spaces such as char4 or word1 (comma separated or repeated).
    #[arg(long = "space", value_delimiter = ',')]
    spaces: Vec<FeatureSpaceSpec>,
    /// single, fusion, stack or majority.
    #[arg(long)]
    method: Option<MethodKind>,
    /// vote, mean, median or borda; implies --method fusion.
    #[arg(long)]
    fusion: Option<FusionRule>,
    /// linear or rbf; implies --method stack.
    #[arg(long)]
    meta: Option<MetaKind>,
    /// Binary feature presence instead of counts.
    #[arg(long)]
    binary: bool,
    /// Write the training-side meta-features of the first fold.
    #[arg(long)]
    dump_meta: bool,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut config = match (&self.config, &self.data) {
            (Some(path), _) => Config::load(path).with_context(|| format!("loading config {}", path.display()))?,
            (None, Some(data)) => Config::with_data(data),
            (None, None) => bail!("either --config or --data is required"),
        };
        if let Some(data) = &self.data {
            config.data.path = data.clone();
        }
        if let Some(brown) = &self.brown {
            config.brown.path = Some(brown.clone());
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
        if !self.spaces.is_empty() {
            config.features.spaces = Some(self.spaces.clone());
        }
        if self.binary {
            config.features.binary = true;
        }
        if let Some(rule) = self.fusion {
            config.run.fusion = rule;
            config.run.method = MethodKind::Fusion;
        }
        if let Some(meta) = self.meta {
            config.run.meta = meta;
            config.run.method = MethodKind::Stack;
        }
        if let Some(method) = self.method {
            config.run.method = method;
        }
        if self.dump_meta {
            config.run.dump_meta = true;
        }
        if let Some(jobs) = config.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .context("configuring worker threads")?;
        }
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The single feature set named by `--space`, or by the config.
    fn feature_set(&self, config: &Config) -> Result<FeatureSet> {
        let specs = config.features.specs();
        Ok(match specs.as_slice() {
            [one] => FeatureSet::single(*one),
            _ => FeatureSet::combined(specs)?,
        })
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Preprocess { common, show } => {
            let config = common.config()?;
            let corpus = hateclass::corpus::load_corpus(&config.data.path, &config.data.mapping())?;
            for doc in corpus.documents() {
                let processed = ProcessedText::new(&doc.text);
                if show {
                    writeln!(out, "{}\t{}\t{}", doc.id, doc.text.replace(['\t', '\n'], " "), processed.normalized)?;
                } else {
                    writeln!(out, "{}\t{}", doc.id, processed.normalized)?;
                }
            }
        }
        Command::Run(common) => {
            let config = common.config()?;
            let dir = common.out_dir();
            let report = experiment::run_experiment(&config, &dir, common.plot)?;
            writeln!(out, "{}\taccuracy {}%\tfold std {}\tseed {}", report.method, pct(report.accuracy), pct(report.fold_std()), report.seed)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::RunAll(common) => {
            let config = common.config()?;
            let dir = common.out_dir();
            let result = experiment::run_all(&config, &dir, common.plot)?;
            out.write_all(result.table.to_tsv().as_bytes())?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::LearningCurve { common, sizes } => {
            let mut config = common.config()?;
            if !sizes.is_empty() {
                config.run.curve_sizes = sizes;
            }
            let dir = common.out_dir();
            let points = experiment::run_learning_curve(&config, &dir, common.plot)?;
            for p in points {
                writeln!(out, "{:.1}\t{}\t{}", p.train_size, pct(p.accuracy), pct(p.fold_std))?;
            }
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Analyze {
            common,
            class,
            top,
            negative,
        } => {
            let config = common.config()?;
            let set = common.feature_set(&config)?;
            config.validate(set.needs_clusters())?;
            let inputs = Inputs::load(&config)?;
            let ranked = experiment::analyze(&inputs.prepare(), &config, &set, class, top, negative)?;
            writeln!(out, "rank\tfeature\tweight")?;
            for r in ranked {
                writeln!(out, "{}\t{}\t{:.6}", r.rank, r.feature, r.weight)?;
            }
        }
        Command::DumpVocab(common) => {
            let config = common.config()?;
            let set = common.feature_set(&config)?;
            config.validate(set.needs_clusters())?;
            let inputs = Inputs::load(&config)?;
            let vocab = experiment::full_vocabulary(&inputs.prepare(), &set)?;
            match &common.out {
                Some(path) => {
                    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    vocab.dump(BufWriter::new(file))?;
                    writeln!(out, "{} features written to {}", vocab.len(), path.display())?;
                }
                None => vocab.dump(&mut out)?,
            }
        }
    }
    out.flush()?;
    Ok(())
}
