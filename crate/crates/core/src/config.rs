//! Experiment configuration.
//!
//! The file is TOML. Every table is optional except `[data]`, and unknown
//! keys are rejected:
//!
//! ```toml
//! version = 1            # schema version, required
//! seed = 42
//! k = 10
//! jobs = 4               # worker threads; omit for all cores
//!
//! [data]
//! path = "tweets.csv"    # relative paths resolve against the config file
//! text_column = "text"
//! label_column = "label"
//! id_column = "id"       # optional
//! delimiter = ","        # optional; inferred from the extension
//! [data.label_map]
//! hate = "hate"
//! offensive = "offensive"
//! ok = "ok"
//!
//! [brown]
//! path = "clusters.txt"  # required whenever a brown space is used
//!
//! [features]
//! spaces = ["char4"]     # omit for all sixteen spaces
//! binary = false
//!
//! [svm]
//! c = 1.0
//! tol = 1e-4
//! max_epochs = 1000
//! prob_map = "softmax"   # or "minmax"
//!
//! [rbf]
//! c = 1.0
//! gamma = 0.02           # omit for 1 / width
//! tol = 1e-3
//! cache_mb = 512
//!
//! [stacking]
//! inner_k = 5
//!
//! [run]
//! method = "single"      # single | fusion | stack | majority
//! fusion = "mean"        # vote | mean | median | borda
//! meta = "rbf"           # linear | rbf
//! oracle_include_combined = true
//! dump_meta = false
//! curve_sizes = ["10%", "50%", "100%"]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnMapping, Label};
use crate::ensemble::FusionRule;
use crate::error::{Error, Result};
use crate::eval::{Method, TrainSize};
use crate::features::{FeatureSet, FeatureSpaceSpec};
use crate::kernel_svm::RbfParams;
use crate::linear_svm::{ProbMap, SvmParams};
use crate::pipeline::Settings;
use crate::stacking::MetaKind;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub data: DataConfig,
    #[serde(default)]
    pub brown: BrownConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default)]
    pub rbf: RbfConfig,
    #[serde(default)]
    pub stacking: StackingConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "default_text_column")]
    pub text_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_label_map")]
    pub label_map: BTreeMap<String, Label>,
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default)]
    pub delimiter: Option<char>,
}

fn default_text_column() -> String {
    "text".into()
}

fn default_label_column() -> String {
    "label".into()
}

fn default_label_map() -> BTreeMap<String, Label> {
    Label::ALL.iter().map(|l| (l.name().to_string(), *l)).collect()
}

impl DataConfig {
    pub fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            text_column: self.text_column.clone(),
            label_column: self.label_column.clone(),
            label_map: self.label_map.clone(),
            id_column: self.id_column.clone(),
            delimiter: self.delimiter,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    /// `None` selects all sixteen spaces.
    #[serde(default)]
    pub spaces: Option<Vec<FeatureSpaceSpec>>,
    #[serde(default)]
    pub binary: bool,
}

impl FeaturesConfig {
    pub fn specs(&self) -> Vec<FeatureSpaceSpec> {
        self.spaces.clone().unwrap_or_else(FeatureSpaceSpec::all)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub prob_map: ProbMap,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let p = SvmParams::default();
        SvmConfig {
            c: p.c,
            tol: p.tol,
            max_epochs: p.max_epochs,
            prob_map: ProbMap::Softmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfConfig {
    pub c: f64,
    pub gamma: Option<f64>,
    pub tol: f64,
    pub cache_mb: usize,
}

impl Default for RbfConfig {
    fn default() -> Self {
        let p = RbfParams::default();
        RbfConfig {
            c: p.c,
            gamma: p.gamma,
            tol: p.tol,
            cache_mb: p.cache_mb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackingConfig {
    pub inner_k: usize,
}

impl Default for StackingConfig {
    fn default() -> Self {
        StackingConfig { inner_k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Single,
    Fusion,
    Stack,
    Majority,
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(MethodKind::Single),
            "fusion" => Ok(MethodKind::Fusion),
            "stack" | "stacking" | "meta" => Ok(MethodKind::Stack),
            "majority" | "baseline" => Ok(MethodKind::Majority),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: MethodKind,
    pub fusion: FusionRule,
    pub meta: MetaKind,
    pub oracle_include_combined: bool,
    pub dump_meta: bool,
    pub curve_sizes: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: MethodKind::Single,
            fusion: FusionRule::Mean,
            meta: MetaKind::Rbf,
            oracle_include_combined: true,
            dump_meta: false,
            curve_sizes: (1..=10).map(|i| format!("{}%", i * 10)).collect(),
        }
    }
}

impl Config {
    /// A configuration with every default and the given data file.
    pub fn with_data(path: impl Into<PathBuf>) -> Self {
        Config {
            version: CONFIG_VERSION,
            seed: DEFAULT_SEED,
            k: default_k(),
            jobs: None,
            data: DataConfig {
                path: path.into(),
                text_column: default_text_column(),
                label_column: default_label_column(),
                label_map: default_label_map(),
                id_column: None,
                delimiter: None,
            },
            brown: BrownConfig::default(),
            features: FeaturesConfig::default(),
            svm: SvmConfig::default(),
            rbf: RbfConfig::default(),
            stacking: StackingConfig::default(),
            run: RunConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (this build reads version {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    /// Reads a config file; relative data and cluster paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Config::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.data.path = base.join(&config.data.path);
        config.brown.path = config.brown.path.map(|p| base.join(p));
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn settings(&self) -> Settings {
        Settings {
            svm: SvmParams {
                c: self.svm.c,
                tol: self.svm.tol,
                max_epochs: self.svm.max_epochs,
                seed: self.seed,
            },
            prob_map: self.svm.prob_map,
            binary: self.features.binary,
            rbf: RbfParams {
                c: self.rbf.c,
                gamma: self.rbf.gamma,
                tol: self.rbf.tol,
                max_iter: None,
                cache_mb: self.rbf.cache_mb,
            },
            inner_k: self.stacking.inner_k,
            oracle_includes_combined: self.run.oracle_include_combined,
        }
    }

    /// The method selected by `[run]` over `[features]`.
    pub fn method(&self) -> Result<Method> {
        let specs = self.features.specs();
        if specs.is_empty() {
            return Err(Error::Config("features.spaces is empty".into()));
        }
        Ok(match self.run.method {
            MethodKind::Majority => Method::Majority,
            MethodKind::Single => match specs.as_slice() {
                [one] => Method::Single(FeatureSet::single(*one)),
                _ => Method::Single(FeatureSet::combined(specs)?),
            },
            MethodKind::Fusion => Method::Fusion {
                rule: self.run.fusion,
                specs,
            },
            MethodKind::Stack => Method::Stack {
                kind: self.run.meta,
                specs,
            },
        })
    }

    pub fn curve_sizes(&self) -> Result<Vec<TrainSize>> {
        if self.run.curve_sizes.is_empty() {
            return Err(Error::Config("run.curve_sizes is empty".into()));
        }
        self.run
            .curve_sizes
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Config(format!("bad learning-curve size {s:?}"))))
            .collect()
    }

    /// Checks everything that can be checked without reading the data.
    /// `needs_clusters` says whether the requested work uses a brown space.
    pub fn validate(&self, needs_clusters: bool) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.stacking.inner_k < 2 {
            return Err(Error::Config(format!("stacking.inner_k must be at least 2, got {}", self.stacking.inner_k)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        positive("svm.c", self.svm.c)?;
        positive("svm.tol", self.svm.tol)?;
        positive("rbf.c", self.rbf.c)?;
        positive("rbf.tol", self.rbf.tol)?;
        if let Some(g) = self.rbf.gamma {
            positive("rbf.gamma", g)?;
        }
        if self.svm.max_epochs == 0 {
            return Err(Error::Config("svm.max_epochs must be at least 1".into()));
        }
        if self.data.label_map.is_empty() {
            return Err(Error::Config("data.label_map is empty".into()));
        }
        if needs_clusters && self.brown.path.is_none() {
            return Err(Error::Config(
                "a brown cluster space is requested but brown.path is not set; \
                 add a [brown] table with the cluster file path or pass --brown"
                    .into(),
            ));
        }
        Ok(())
    }
}
