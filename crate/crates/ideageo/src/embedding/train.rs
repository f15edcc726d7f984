//! Stochastic-gradient training loop and the frozen-model inference path.
//!
//! Parameters live in [`ParamMatrix`], whose cells are relaxed atomics:
//! single-worker runs (the default) touch them from one thread in a fixed
//! order and are bit-reproducible; multi-worker runs perform unsynchronized
//! shared updates in the classic hogwild style and are therefore
//! nondeterministic.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::{log_sigmoid, sigmoid};
use super::{EmbeddingConfig, EmbeddingError, EmbeddingModel, TrainMode, TrainStats};
use crate::corpus::{
    build_vocabulary, default_min_count, negative_sampling_weights, Document, Vocabulary,
    DEFAULT_SAMPLING_POWER,
};
use crate::linalg::Mat;

const TRAIN_RNG_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const INFER_RNG_SALT: u64 = 0x1DEA_5EED_0F00_D5A1;

/// Row-major parameter matrix over `f64` bits in relaxed atomics.
pub(super) struct ParamMatrix {
    rows: usize,
    cols: usize,
    data: Vec<AtomicU64>,
}

impl ParamMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        let data = (0..rows * cols)
            .map(|_| AtomicU64::new(0.0f64.to_bits()))
            .collect();
        ParamMatrix { rows, cols, data }
    }

    /// Uniform init in `(-0.5/cols, +0.5/cols)`, filled row by row so the
    /// random stream is position-stable.
    fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = cols as f64;
        let data = (0..rows * cols)
            .map(|_| AtomicU64::new(((rng.gen::<f64>() - 0.5) / scale).to_bits()))
            .collect();
        ParamMatrix { rows, cols, data }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        f64::from_bits(self.data[r * self.cols + c].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, r: usize, c: usize, delta: f64) {
        let i = r * self.cols + c;
        let v = f64::from_bits(self.data[i].load(Ordering::Relaxed)) + delta;
        self.data[i].store(v.to_bits(), Ordering::Relaxed);
    }

    fn to_mat(&self) -> Mat {
        let data = self
            .data
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect();
        Mat::from_vec(self.rows, self.cols, data)
    }
}

/// Cumulative-probability table for drawing negative samples.
pub(super) struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    pub(super) fn new(vocabulary: &Vocabulary) -> Self {
        let weights = negative_sampling_weights(vocabulary, DEFAULT_SAMPLING_POWER);
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        NoiseTable { cumulative }
    }

    /// Draws one vocabulary index, rejecting `exclude` (redraw, bounded).
    fn draw(&self, rng: &mut ChaCha8Rng, exclude: usize) -> Option<usize> {
        if self.cumulative.len() < 2 {
            return None;
        }
        for _ in 0..64 {
            let u: f64 = rng.gen();
            let idx = self
                .cumulative
                .partition_point(|&c| c <= u)
                .min(self.cumulative.len() - 1);
            if idx != exclude {
                return Some(idx);
            }
        }
        None
    }
}

struct TrainContext<'a> {
    config: &'a EmbeddingConfig,
    mode: TrainMode,
    dim: usize,
    word_vectors: &'a ParamMatrix,
    output_vectors: &'a ParamMatrix,
    doc_vectors: &'a ParamMatrix,
    noise: &'a NoiseTable,
    /// Per-term probability of keeping an occurrence, 1.0 when subsampling
    /// is off.
    keep_probability: Vec<f64>,
    subsample: bool,
    processed: AtomicU64,
    total_units: u64,
}

impl TrainContext<'_> {
    fn rate_at(&self, unit: u64) -> f64 {
        let progress = unit as f64 / self.total_units.max(1) as f64;
        let rate = self.config.initial_rate
            + (self.config.final_rate - self.config.initial_rate) * progress;
        rate.max(self.config.final_rate)
    }
}

pub(super) fn run_training(
    documents: &[Document],
    config: &EmbeddingConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    config.validate()?;
    if documents.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let mut doc_ids = Vec::with_capacity(documents.len());
    let mut seen = std::collections::HashSet::new();
    for doc in documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(EmbeddingError::DuplicateDocumentId(doc.id.clone()));
        }
        doc_ids.push(doc.id.clone());
    }

    let min_count = config
        .min_count
        .unwrap_or_else(|| default_min_count(documents.len()));
    let vocabulary = build_vocabulary(documents, min_count)?;

    // Token sequences restricted to the vocabulary.
    let sequences: Vec<Vec<usize>> = documents
        .iter()
        .map(|doc| {
            doc.tokens
                .iter()
                .filter_map(|t| vocabulary.index_of(t))
                .collect()
        })
        .collect();
    let total_positions: u64 = sequences.iter().map(|s| s.len() as u64).sum();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let word_vectors = ParamMatrix::uniform(vocabulary.len(), config.dim, &mut init_rng);
    let doc_vectors = ParamMatrix::uniform(documents.len(), config.dim, &mut init_rng);
    let output_vectors = ParamMatrix::zeros(vocabulary.len(), config.dim);

    let subsample = config.subsample_threshold > 0.0;
    let keep_probability: Vec<f64> = (0..vocabulary.len())
        .map(|i| {
            if !subsample {
                return 1.0;
            }
            let f = vocabulary.frequency(i);
            (config.subsample_threshold / f).sqrt().min(1.0)
        })
        .collect();

    let noise = NoiseTable::new(&vocabulary);
    let ctx = TrainContext {
        config,
        mode: config.mode,
        dim: config.dim,
        word_vectors: &word_vectors,
        output_vectors: &output_vectors,
        doc_vectors: &doc_vectors,
        noise: &noise,
        keep_probability,
        subsample,
        processed: AtomicU64::new(0),
        total_units: total_positions * config.epochs as u64,
    };

    let workers = config.workers.max(1).min(documents.len());
    let mut worker_rngs: Vec<ChaCha8Rng> = (0..workers)
        .map(|w| ChaCha8Rng::seed_from_u64(config.seed ^ TRAIN_RNG_SALT.wrapping_add(w as u64)))
        .collect();
    let shards = shard_ranges(documents.len(), workers);

    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for _epoch in 0..config.epochs {
        let mut totals = vec![(0.0f64, 0u64); workers];
        if workers == 1 {
            totals[0] = train_shard(&ctx, &sequences, shards[0].clone(), &mut worker_rngs[0]);
        } else {
            std::thread::scope(|scope| {
                let ctx = &ctx;
                let sequences = &sequences;
                for ((rng, total), shard) in worker_rngs
                    .iter_mut()
                    .zip(totals.iter_mut())
                    .zip(shards.iter())
                {
                    let shard = shard.clone();
                    scope.spawn(move || {
                        *total = train_shard(ctx, sequences, shard, rng);
                    });
                }
            });
        }
        let loss_sum: f64 = totals.iter().map(|(l, _)| l).sum();
        let examples: u64 = totals.iter().map(|(_, n)| n).sum();
        epoch_loss.push(if examples > 0 {
            loss_sum / examples as f64
        } else {
            0.0
        });
    }

    let model = EmbeddingModel {
        vocabulary,
        config: config.clone(),
        word_vectors: word_vectors.to_mat(),
        output_vectors: output_vectors.to_mat(),
        doc_vectors: doc_vectors.to_mat(),
        doc_index: doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect(),
        doc_ids,
        stats: TrainStats { epoch_loss },
    };
    if !model.word_vectors.is_finite()
        || !model.output_vectors.is_finite()
        || !model.doc_vectors.is_finite()
    {
        return Err(EmbeddingError::NonFiniteModel);
    }
    Ok(model)
}

fn shard_ranges(n_docs: usize, workers: usize) -> Vec<std::ops::Range<usize>> {
    (0..workers)
        .map(|w| {
            let start = n_docs * w / workers;
            let end = n_docs * (w + 1) / workers;
            start..end
        })
        .collect()
}

/// Trains one shard for one epoch; returns (loss sum, example count).
fn train_shard(
    ctx: &TrainContext<'_>,
    sequences: &[Vec<usize>],
    shard: std::ops::Range<usize>,
    rng: &mut ChaCha8Rng,
) -> (f64, u64) {
    let dim = ctx.dim;
    let mut h = vec![0.0; dim];
    let mut grad_h = vec![0.0; dim];
    let mut kept: Vec<(u64, usize)> = Vec::new();
    let mut loss_sum = 0.0;
    let mut examples = 0u64;

    for doc_idx in shard {
        let sequence = &sequences[doc_idx];
        if sequence.is_empty() {
            continue;
        }
        let base = ctx
            .processed
            .fetch_add(sequence.len() as u64, Ordering::Relaxed);

        kept.clear();
        for (scan, &word) in sequence.iter().enumerate() {
            if ctx.subsample && rng.gen::<f64>() >= ctx.keep_probability[word] {
                continue;
            }
            kept.push((base + scan as u64, word));
        }

        for pos in 0..kept.len() {
            let (unit, target) = kept[pos];
            let rate = ctx.rate_at(unit);

            // Hidden vector: document vector alone (PV-DBOW) or the mean of
            // the document vector and the in-window context words (PV-DM).
            let window_lo;
            let window_hi;
            match ctx.mode {
                TrainMode::PvDbow => {
                    window_lo = pos;
                    window_hi = pos;
                }
                TrainMode::PvDm => {
                    window_lo = pos.saturating_sub(ctx.config.window);
                    window_hi = (pos + ctx.config.window).min(kept.len() - 1);
                }
            }
            for c in 0..dim {
                h[c] = ctx.doc_vectors.get(doc_idx, c);
            }
            let mut parts = 1usize;
            for k in window_lo..=window_hi {
                if k == pos {
                    continue;
                }
                let word = kept[k].1;
                for c in 0..dim {
                    h[c] += ctx.word_vectors.get(word, c);
                }
                parts += 1;
            }
            if parts > 1 {
                let inv = 1.0 / parts as f64;
                for c in 0..dim {
                    h[c] *= inv;
                }
            }

            grad_h.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;

            // Positive target.
            let mut dot = 0.0;
            for c in 0..dim {
                dot += ctx.output_vectors.get(target, c) * h[c];
            }
            loss -= log_sigmoid(dot);
            let g = sigmoid(dot) - 1.0;
            for c in 0..dim {
                let o = ctx.output_vectors.get(target, c);
                grad_h[c] += g * o;
                ctx.output_vectors.add(target, c, -rate * g * h[c]);
            }

            // Negatives.
            for _ in 0..ctx.config.negatives {
                let Some(neg) = ctx.noise.draw(rng, target) else {
                    break;
                };
                let mut dot = 0.0;
                for c in 0..dim {
                    dot += ctx.output_vectors.get(neg, c) * h[c];
                }
                loss -= log_sigmoid(-dot);
                let g = sigmoid(dot);
                for c in 0..dim {
                    let o = ctx.output_vectors.get(neg, c);
                    grad_h[c] += g * o;
                    ctx.output_vectors.add(neg, c, -rate * g * h[c]);
                }
            }

            // Mean composition: every contributor receives the full hidden
            // gradient (the usual averaged-CBOW update convention).
            let step = -rate;
            for c in 0..dim {
                ctx.doc_vectors.add(doc_idx, c, step * grad_h[c]);
            }
            if ctx.mode == TrainMode::PvDm {
                for k in window_lo..=window_hi {
                    if k == pos {
                        continue;
                    }
                    let word = kept[k].1;
                    for c in 0..dim {
                        ctx.word_vectors.add(word, c, step * grad_h[c]);
                    }
                }
            }

            loss_sum += loss;
            examples += 1;
        }
    }
    (loss_sum, examples)
}

/// Optimizes a fresh document vector against the frozen model.
pub(super) fn run_inference(
    model: &EmbeddingModel,
    tokens: &[String],
    steps: usize,
    rate: f64,
) -> Result<Vec<f64>, EmbeddingError> {
    let sequence: Vec<usize> = tokens
        .iter()
        .filter_map(|t| model.vocabulary.index_of(t))
        .collect();
    if sequence.is_empty() {
        return Err(EmbeddingError::AllTokensUnknown);
    }
    let dim = model.config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ INFER_RNG_SALT);
    let mut doc: Vec<f64> = (0..dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    if steps == 0 {
        return Ok(doc);
    }

    let noise = NoiseTable::new(&model.vocabulary);
    let mut h = vec![0.0; dim];
    let mut grad_h = vec![0.0; dim];

    // Rate decays linearly to the model's floor, mirroring training.
    let total_units = (steps * sequence.len()).max(1) as f64;
    let floor = model.config.final_rate.min(rate);
    let mut unit = 0usize;

    for _step in 0..steps {
        for pos in 0..sequence.len() {
            let step_rate = rate + (floor - rate) * (unit as f64 / total_units);
            unit += 1;
            let target = sequence[pos];
            let (window_lo, window_hi) = match model.config.mode {
                TrainMode::PvDbow => (pos, pos),
                TrainMode::PvDm => (
                    pos.saturating_sub(model.config.window),
                    (pos + model.config.window).min(sequence.len() - 1),
                ),
            };
            h.copy_from_slice(&doc);
            let mut parts = 1usize;
            for k in window_lo..=window_hi {
                if k == pos {
                    continue;
                }
                let row = model.word_vectors.row(sequence[k]);
                for c in 0..dim {
                    h[c] += row[c];
                }
                parts += 1;
            }
            if parts > 1 {
                let inv = 1.0 / parts as f64;
                for v in h.iter_mut() {
                    *v *= inv;
                }
            }

            grad_h.iter_mut().for_each(|g| *g = 0.0);
            let out = model.output_vectors.row(target);
            let mut dot = 0.0;
            for c in 0..dim {
                dot += out[c] * h[c];
            }
            let g = sigmoid(dot) - 1.0;
            for c in 0..dim {
                grad_h[c] += g * out[c];
            }
            for _ in 0..model.config.negatives {
                let Some(neg) = noise.draw(&mut rng, target) else {
                    break;
                };
                let out = model.output_vectors.row(neg);
                let mut dot = 0.0;
                for c in 0..dim {
                    dot += out[c] * h[c];
                }
                let g = sigmoid(dot);
                for c in 0..dim {
                    grad_h[c] += g * out[c];
                }
            }

            // Word and output vectors are frozen; only the document vector
            // receives the hidden gradient.
            for c in 0..dim {
                doc[c] -= step_rate * grad_h[c];
            }
        }
    }
    Ok(doc)
}
