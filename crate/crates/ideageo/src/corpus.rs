//! Text normalization, vocabulary construction, and negative-sampling
//! statistics. Everything here is deterministic: the same input always
//! produces the same tokens, indices, and weights.

use std::collections::HashMap;

use thiserror::Error;

/// Exponent applied to term counts when building the noise distribution for
/// negative sampling.
pub const DEFAULT_SAMPLING_POWER: f64 = 0.75;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no term occurs at least {min_count} times in the corpus")]
    EmptyVocabulary { min_count: usize },
}

/// One tokenized text with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Document {
            id: id.into(),
            tokens: tokenize(text),
        }
    }

    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            tokens,
        }
    }
}

/// Term statistics for a corpus: contiguous 0-based indices, raw counts, and
/// the unigram^power sampling weights used for negative sampling.
///
/// Indices are assigned by descending count, ties broken by term order, so a
/// vocabulary is a pure function of the corpus and `min_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_count: u64,
    sampling_weights: Vec<f64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of in-vocabulary token occurrences in the source corpus.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    /// Noise distribution built at construction time with
    /// [`DEFAULT_SAMPLING_POWER`].
    pub fn sampling_weights(&self) -> &[f64] {
        &self.sampling_weights
    }

    /// Relative corpus frequency of the term at `index`.
    pub fn frequency(&self, index: usize) -> f64 {
        self.counts[index] as f64 / self.total_count as f64
    }

    /// Rebuilds a vocabulary from persisted terms and counts, preserving
    /// index order.
    pub(crate) fn from_parts(terms: Vec<String>, counts: Vec<u64>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let total_count = counts.iter().sum();
        let mut vocab = Vocabulary {
            terms,
            counts,
            index,
            total_count,
            sampling_weights: Vec::new(),
        };
        vocab.sampling_weights = negative_sampling_weights(&vocab, DEFAULT_SAMPLING_POWER);
        vocab
    }
}

/// Lowercases and splits on runs of non-alphanumeric characters
/// (Unicode-aware). No stemming, no stop-word removal; empty input yields an
/// empty token list.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    raw_text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Builds the vocabulary of all terms occurring at least `min_count` times.
pub fn build_vocabulary(
    documents: &[Document],
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for doc in documents {
        for token in &doc.tokens {
            *freq.entry(token.as_str()).or_insert(0) += 1;
        }
    }

    let mut entries: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, count)| count >= min_count as u64)
        .collect();
    if entries.is_empty() {
        return Err(CorpusError::EmptyVocabulary { min_count });
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let terms: Vec<String> = entries.iter().map(|(t, _)| (*t).to_owned()).collect();
    let counts: Vec<u64> = entries.iter().map(|&(_, c)| c).collect();
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let total_count = counts.iter().sum();

    let mut vocab = Vocabulary {
        terms,
        counts,
        index,
        total_count,
        sampling_weights: Vec::new(),
    };
    vocab.sampling_weights = negative_sampling_weights(&vocab, DEFAULT_SAMPLING_POWER);
    Ok(vocab)
}

/// Default `min_count` policy: drop singletons only when the corpus is large
/// enough that they are noise rather than signal.
pub fn default_min_count(n_documents: usize) -> usize {
    if n_documents < 50 {
        1
    } else {
        2
    }
}

/// Noise distribution for negative sampling: `count_i^power / sum_j
/// count_j^power`. Sums to 1 within 1e-9.
pub fn negative_sampling_weights(vocabulary: &Vocabulary, power: f64) -> Vec<f64> {
    let powered: Vec<f64> = vocabulary
        .counts
        .iter()
        .map(|&c| (c as f64).powf(power))
        .collect();
    let total: f64 = powered.iter().sum();
    powered.into_iter().map(|p| p / total).collect()
}
