//! Counterfactual data augmentation for imbalanced sentence labeling.
//!
//! The crate covers the whole bench: corpus formats, sentence splitting with
//! majority labels, verb morphology, the augmentation operators and their
//! scheduler, a linear-chain CRF, a bag-of-embeddings classifier with
//! embedding-space adversarial training, and token-level evaluation.

pub mod augment;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod experiment;
pub mod eval;
pub mod fixture;
pub mod morph;
pub mod senttok;
pub mod textclf;

pub use corpus::{Dataset, Document, LabelSchema, Span, Token};
pub use error::{Error, Result};
pub use morph::{AntonymLexicon, Tense, VerbLexicon};
pub use senttok::{LabeledSentence, SentenceSplitter};
pub use augment::{AugmentConfig, AugmentMethod, AugmentedSample};
pub use crf::CrfModel;
pub use eval::{MetricsReport, Comparison};
pub use experiment::{ExperimentSpec, ModelKind, TrainedModel};
pub use textclf::TextClassifier;
