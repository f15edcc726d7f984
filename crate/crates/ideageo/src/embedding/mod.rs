//! From-scratch paragraph-vector training and inference.
//!
//! Documents and words share one embedding space of dimension `dim`
//! (400 by default). Training runs stochastic gradient descent on the
//! negative-sampling objective in [`objective`]; the PV-DM mode predicts
//! each word from the mean of its document vector and in-window context
//! words, PV-DBOW from the document vector alone.

pub mod objective;
mod train;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::corpus::{CorpusError, Document, Vocabulary};
use crate::linalg::Mat;

/// Optimization passes used when inferring vectors for unseen texts.
pub const DEFAULT_INFER_STEPS: usize = 50;
/// Learning rate used when inferring vectors for unseen texts.
pub const DEFAULT_INFER_RATE: f64 = 0.025;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("duplicate document id '{0}'")]
    DuplicateDocumentId(String),
    #[error("no token of the input is in the vocabulary")]
    AllTokensUnknown,
    #[error("unknown document id '{0}'")]
    UnknownDocument(String),
    #[error("training produced non-finite parameters")]
    NonFiniteModel,
}

/// Paragraph-vector training mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Distributed memory: document vector plus context words predict the
    /// target word.
    PvDm,
    /// Distributed bag of words: the document vector alone predicts sampled
    /// words.
    PvDbow,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainMode::PvDm => f.write_str("pv-dm"),
            TrainMode::PvDbow => f.write_str("pv-dbow"),
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pv-dm" | "pvdm" | "dm" => Ok(TrainMode::PvDm),
            "pv-dbow" | "pvdbow" | "dbow" => Ok(TrainMode::PvDbow),
            other => Err(format!("unknown mode '{other}' (expected pv-dm or pv-dbow)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub initial_rate: f64,
    pub final_rate: f64,
    pub negatives: usize,
    pub mode: TrainMode,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
    /// Training workers. One worker (the default) is bit-reproducible;
    /// more workers share unsynchronized updates and are not.
    pub workers: usize,
    /// Vocabulary cutoff; `None` selects 2 for corpora of 50+ documents and
    /// 1 below that.
    pub min_count: Option<usize>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 400,
            window: 5,
            epochs: 20,
            initial_rate: 0.025,
            final_rate: 1e-4,
            negatives: 5,
            mode: TrainMode::PvDm,
            subsample_threshold: 1e-3,
            seed: 1,
            workers: 1,
            min_count: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |msg: &str| Err(EmbeddingError::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.initial_rate > 0.0) || !(self.final_rate > 0.0) {
            return fail("learning rates must be positive");
        }
        if self.final_rate > self.initial_rate {
            return fail("final_rate must not exceed initial_rate");
        }
        if self.subsample_threshold < 0.0 {
            return fail("subsample_threshold must be non-negative");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// Per-epoch mean training loss, kept for diagnostics; not persisted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub epoch_loss: Vec<f64>,
}

/// A trained paragraph-vector model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub(crate) vocabulary: Vocabulary,
    pub(crate) config: EmbeddingConfig,
    pub(crate) word_vectors: Mat,
    pub(crate) output_vectors: Mat,
    pub(crate) doc_vectors: Mat,
    pub(crate) doc_ids: Vec<String>,
    pub(crate) doc_index: HashMap<String, usize>,
    pub(crate) stats: TrainStats,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn word_vectors(&self) -> &Mat {
        &self.word_vectors
    }

    pub fn output_vectors(&self) -> &Mat {
        &self.output_vectors
    }

    pub fn doc_vectors(&self) -> &Mat {
        &self.doc_vectors
    }

    pub fn stats(&self) -> &TrainStats {
        &self.stats
    }

    /// Trained vector of a training document.
    pub fn document_vector(&self, doc_id: &str) -> Result<&[f64], EmbeddingError> {
        let idx = self
            .doc_index
            .get(doc_id)
            .ok_or_else(|| EmbeddingError::UnknownDocument(doc_id.to_string()))?;
        Ok(self.doc_vectors.row(*idx))
    }

    /// Reassembles a model from persisted parts; used by model file loading.
    pub(crate) fn from_parts(
        vocabulary: Vocabulary,
        config: EmbeddingConfig,
        word_vectors: Mat,
        output_vectors: Mat,
        doc_vectors: Mat,
        doc_ids: Vec<String>,
    ) -> Self {
        let doc_index = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        EmbeddingModel {
            vocabulary,
            config,
            word_vectors,
            output_vectors,
            doc_vectors,
            doc_ids,
            doc_index,
            stats: TrainStats::default(),
        }
    }
}

/// Trains a model on `documents` by SGD over the negative-sampling
/// objective. Single-worker training is bit-reproducible for a fixed seed.
pub fn train(
    documents: &[Document],
    config: &EmbeddingConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    train::run_training(documents, config)
}

/// Infers a vector for an unseen token sequence: word and output vectors are
/// frozen while a fresh document vector is optimized for `steps` passes.
/// Deterministic for a given model.
pub fn infer_vector(
    model: &EmbeddingModel,
    tokens: &[String],
    steps: usize,
    rate: f64,
) -> Result<Vec<f64>, EmbeddingError> {
    train::run_inference(model, tokens, steps, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn tiny_corpus() -> Vec<Document> {
        let texts = [
            "red green blue red green",
            "blue red blue green red",
            "cat dog bird cat dog",
            "dog cat dog bird bird",
        ];
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), t))
            .collect()
    }

    fn small_config() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 8,
            epochs: 5,
            seed: 7,
            min_count: Some(1),
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn training_is_bit_reproducible_single_worker() {
        let docs = tiny_corpus();
        let config = small_config();
        let a = train(&docs, &config).unwrap();
        let b = train(&docs, &config).unwrap();
        assert_eq!(a.doc_vectors, b.doc_vectors);
        assert_eq!(a.word_vectors, b.word_vectors);
        assert_eq!(a.output_vectors, b.output_vectors);
    }

    #[test]
    fn trained_model_is_finite_everywhere() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        assert!(model.word_vectors().is_finite());
        assert!(model.output_vectors().is_finite());
        assert!(model.doc_vectors().is_finite());
    }

    #[test]
    fn pv_dbow_mode_trains_too() {
        let config = EmbeddingConfig {
            mode: TrainMode::PvDbow,
            ..small_config()
        };
        let model = train(&tiny_corpus(), &config).unwrap();
        assert_eq!(model.doc_vectors().rows(), 4);
        assert!(model.doc_vectors().is_finite());
    }

    #[test]
    fn document_vector_lookup() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        assert_eq!(model.doc_ids()[2], "d2");
        let row = model.document_vector("d2").unwrap();
        assert_eq!(row, model.doc_vectors().row(2), "row order matches doc_ids");
        assert!(matches!(
            model.document_vector("nope"),
            Err(EmbeddingError::UnknownDocument(_))
        ));
    }

    #[test]
    fn duplicate_doc_ids_are_rejected() {
        let docs = vec![Document::new("same", "a b c"), Document::new("same", "d e f")];
        assert!(matches!(
            train(&docs, &small_config()),
            Err(EmbeddingError::DuplicateDocumentId(_))
        ));
    }

    #[test]
    fn empty_vocabulary_propagates() {
        let docs = vec![Document::new("d0", "one"), Document::new("d1", "two")];
        let config = EmbeddingConfig {
            min_count: Some(5),
            ..small_config()
        };
        assert!(matches!(
            train(&docs, &config),
            Err(EmbeddingError::Corpus(_))
        ));
    }

    #[test]
    fn infer_steps_zero_returns_initialization() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        let tokens: Vec<String> = vec!["red".into(), "green".into()];
        let v0 = infer_vector(&model, &tokens, 0, 0.025).unwrap();
        let other_tokens: Vec<String> = vec!["cat".into()];
        let v0_again = infer_vector(&model, &other_tokens, 0, 0.025).unwrap();
        assert_eq!(v0, v0_again, "initialization depends only on the seed");
        let trained = infer_vector(&model, &tokens, 5, 0.025).unwrap();
        assert_ne!(v0, trained);
    }

    #[test]
    fn infer_rejects_unknown_tokens() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        let tokens: Vec<String> = vec!["zebra".into(), "quark".into()];
        assert!(matches!(
            infer_vector(&model, &tokens, 5, 0.025),
            Err(EmbeddingError::AllTokensUnknown)
        ));
    }

    #[test]
    fn inference_is_deterministic() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        let tokens: Vec<String> = vec!["red".into(), "blue".into(), "green".into()];
        let a = infer_vector(&model, &tokens, 10, 0.025).unwrap();
        let b = infer_vector(&model, &tokens, 10, 0.025).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let docs = tiny_corpus();
        for broken in [
            EmbeddingConfig { dim: 0, ..small_config() },
            EmbeddingConfig { epochs: 0, ..small_config() },
            EmbeddingConfig { window: 0, ..small_config() },
            EmbeddingConfig { workers: 0, ..small_config() },
            EmbeddingConfig { final_rate: 1.0, ..small_config() },
            EmbeddingConfig { subsample_threshold: -1.0, ..small_config() },
        ] {
            assert!(matches!(
                train(&docs, &broken),
                Err(EmbeddingError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn loss_is_tracked_per_epoch() {
        let model = train(&tiny_corpus(), &small_config()).unwrap();
        assert_eq!(model.stats().epoch_loss.len(), 5);
        assert!(model.stats().epoch_loss.iter().all(|l| l.is_finite()));
    }
}
