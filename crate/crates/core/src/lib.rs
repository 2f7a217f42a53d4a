//! Framework layer for aspect-based sentiment analysis (ABSA).
//!
//! The crate covers the whole life of an ABSA experiment: reading and
//! converting annotated corpora, managing datasets, checking run
//! configurations, training the bundled baseline predictors, persisting
//! checkpoints, ensembling predictors, summarizing metrics across trials,
//! augmenting training data and running the annotation service.
//!
//! Three subtasks are modelled:
//!
//! * ATE: aspect term extraction,
//! * ASC: aspect sentiment classification,
//! * ATESC: joint extraction and classification (end-to-end ABSA).

pub mod annotation;
pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod ensemble;
pub mod hub;
pub mod metrics;
pub mod training;

mod task;

pub use config::{LcfMode, RunConfig};
pub use corpus::{AbsaExample, AscTriple, AspectSpan, Corpus, EncodingKind, Polarity};
pub use dataset::{DatasetHandle, DatasetRegistry};
pub use task::TaskKind;
pub use training::{EvalResult, Inference, Predictor, SpanPrediction, TrainedModel};

/// Version string written into checkpoint metadata.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the cache root.
pub const CACHE_ENV: &str = "ABSAKIT_CACHE";

/// Environment variable naming the default hub manifest.
pub const HUB_ENV: &str = "ABSAKIT_HUB_URL";

/// Root directory for downloaded datasets and checkpoints.
///
/// `ABSAKIT_CACHE` wins; otherwise `$HOME/.cache/absakit`, falling back to
/// `./.absakit` when no home directory is known.
pub fn cache_root() -> std::path::PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return dir.into();
    }
    match std::env::var_os("HOME") {
        Some(home) => std::path::Path::new(&home).join(".cache").join("absakit"),
        None => std::path::PathBuf::from(".absakit"),
    }
}
