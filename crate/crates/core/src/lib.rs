//! Three-class text classification (hate speech, offensive language,
//! neither) from sparse surface features, with linear SVM base classifiers,
//! fusion rules, stacked meta-classifiers and a cross-validation harness.

pub mod analysis;
pub mod brown;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod kernel_svm;
pub mod linear_svm;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod stacking;
pub mod synthetic;

pub use config::Config;
pub use corpus::{Corpus, Document, Label};
pub use error::{Error, Result};
pub use eval::{EvaluationReport, Method};
pub use features::{FeatureSet, FeatureSpaceSpec, SparseVector, Vocabulary};
pub use linear_svm::LinearModel;
