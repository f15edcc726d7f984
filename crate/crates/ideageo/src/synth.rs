//! Synthetic sessions with planted ground truth.
//!
//! Participants belong to hidden background clusters with cluster-specific
//! vocabularies; posts diffuse tokens along the social network; final-design
//! scores follow a planted unimodal utility over the projected problem
//! space. The generator runs the same embed/infer/project pipeline the CLI
//! uses, so the recorded peak location is reproducible downstream.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{ring_lattice, AllocationError, BackgroundProfile, Condition};
use crate::corpus::Document;
use crate::embedding::{EmbeddingConfig, DEFAULT_INFER_RATE, DEFAULT_INFER_STEPS};
use crate::pipeline::{embed_session, PipelineError, FINAL_DOC_PREFIX, POST_DOC_PREFIX};
use crate::session_io::{FinalDesign, GroupSpec, Post, Session};

const SHARED_VOCAB_SIZE: usize = 12;
/// Probability that a token of a post is borrowed from a neighbor's
/// previous-day posts instead of the participant's own vocabulary.
const NEIGHBOR_BLEND: f64 = 0.15;
/// Probability that an own-vocabulary token comes from the shared pool.
const SHARED_MIX: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_participants: usize,
    pub n_groups: usize,
    pub n_background_clusters: usize,
    pub days: usize,
    /// Poisson rate of posts per participant per day.
    pub posts_per_participant_day: f64,
    pub topic_vocab_size: usize,
    /// Peak location as fractions of the final-design bounding box.
    pub peak_fraction: [f64; 2],
    /// Utility width as a fraction of the larger bounding-box side.
    pub utility_width_fraction: f64,
    pub utility_base: f64,
    pub utility_amplitude: f64,
    /// Standard deviation of per-evaluator score noise.
    pub score_noise: f64,
    pub evaluators: usize,
    pub finals_per_participant: usize,
    pub embedding: EmbeddingConfig,
    pub name: String,
    pub task: String,
}

impl SynthConfig {
    /// Default configuration with all randomness tied to `seed`.
    pub fn new(seed: u64) -> Self {
        SynthConfig {
            seed,
            n_participants: 66,
            n_groups: 3,
            n_background_clusters: 3,
            days: 10,
            posts_per_participant_day: 1.0,
            topic_vocab_size: 40,
            peak_fraction: [0.5, 0.5],
            utility_width_fraction: 0.35,
            utility_base: 1.0,
            utility_amplitude: 4.0,
            score_noise: 0.15,
            evaluators: 3,
            finals_per_participant: 2,
            embedding: EmbeddingConfig {
                seed,
                ..EmbeddingConfig::default()
            },
            name: format!("synthetic-{seed}"),
            task: "open-ended collective design task".into(),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.n_groups == 0 {
            return fail("n_groups must be positive".into());
        }
        if self.n_participants / self.n_groups < 5 {
            return fail(format!(
                "{} participants in {} groups leaves groups too small for a degree-4 lattice",
                self.n_participants, self.n_groups
            ));
        }
        if self.n_background_clusters == 0 {
            return fail("n_background_clusters must be positive".into());
        }
        if self.days == 0 {
            return fail("days must be positive".into());
        }
        if self.posts_per_participant_day < 0.0 {
            return fail("posts_per_participant_day must be non-negative".into());
        }
        if self.topic_vocab_size == 0 {
            return fail("topic_vocab_size must be positive".into());
        }
        if !(self.utility_width_fraction > 0.0) {
            return fail("utility_width_fraction must be positive".into());
        }
        if self.utility_amplitude < 0.0 {
            return fail("utility_amplitude must be non-negative".into());
        }
        if self.score_noise < 0.0 {
            return fail("score_noise must be non-negative".into());
        }
        if self.evaluators == 0 {
            return fail("evaluators must be positive".into());
        }
        if !(1..=3).contains(&self.finals_per_participant) {
            return fail("finals_per_participant must be between 1 and 3".into());
        }
        Ok(())
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::new(1)
    }
}

/// Everything the generator knows that the pipeline is supposed to recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema_version: u32,
    pub seed: u64,
    pub cluster_of: BTreeMap<String, usize>,
    pub groups: Vec<TruthGroup>,
    pub utility: UtilityTruth,
    pub embedding: EmbeddingTruth,
    pub infer: InferTruth,
    pub counts: CountsTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthGroup {
    pub id: usize,
    pub condition: String,
    pub members: Vec<String>,
    /// Participant seated on each node of the group's ring lattice.
    pub placement: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTruth {
    /// Peak location in projection coordinates.
    pub peak: [f64; 2],
    pub width: f64,
    pub base: f64,
    pub amplitude: f64,
    pub score_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTruth {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub mode: String,
    pub subsample_threshold: f64,
    pub initial_rate: f64,
    pub final_rate: f64,
    pub seed: u64,
    pub workers: usize,
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferTruth {
    pub steps: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTruth {
    pub participants: usize,
    pub posts: usize,
    pub final_designs: usize,
}

/// Generates a session plus its ground truth. Deterministic per seed.
pub fn generate_session(config: &SynthConfig) -> Result<(Session, GroundTruth), SynthError> {
    config.validate()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let mut background_rng = ChaCha8Rng::seed_from_u64(seeder.gen());
    let mut placement_rng = ChaCha8Rng::seed_from_u64(seeder.gen());
    let mut post_rng = ChaCha8Rng::seed_from_u64(seeder.gen());
    let mut final_rng = ChaCha8Rng::seed_from_u64(seeder.gen());
    let mut score_rng = ChaCha8Rng::seed_from_u64(seeder.gen());

    let n = config.n_participants;
    let width = (n as f64).log10().ceil().max(2.0) as usize;
    let ids: Vec<String> = (1..=n).map(|i| format!("p{i:0width$}")).collect();
    let clusters: Vec<usize> = (0..n).map(|i| i % config.n_background_clusters).collect();

    let participants: Vec<BackgroundProfile> = (0..n)
        .map(|i| {
            let tokens = own_tokens(&mut background_rng, clusters[i], config, 40);
            BackgroundProfile {
                participant_id: ids[i].clone(),
                major: format!("major-{}", clusters[i]),
                background_vector: Vec::new(),
                raw_text: tokens.join(" "),
            }
        })
        .collect();

    // Round-robin group membership; conditions cycle through the three
    // experimental arms.
    let condition_cycle = [Condition::Clustered, Condition::Random, Condition::Dispersed];
    let mut member_indices: Vec<Vec<usize>> = vec![Vec::new(); config.n_groups];
    for i in 0..n {
        member_indices[i % config.n_groups].push(i);
    }
    let mut groups = Vec::with_capacity(config.n_groups);
    let mut placements: Vec<Vec<usize>> = Vec::with_capacity(config.n_groups);
    for (g, members) in member_indices.iter().enumerate() {
        let condition = condition_cycle[g % condition_cycle.len()];
        let placement = seat_by_cluster(members, &clusters, condition, &mut placement_rng);
        groups.push(GroupSpec {
            id: g + 1,
            condition,
            degree: 4,
            members: members.iter().map(|&i| ids[i].clone()).collect(),
        });
        placements.push(placement);
    }

    // Daily posts with neighbor diffusion along each group's lattice.
    let mut posts = Vec::new();
    let mut post_counter = 0usize;
    let mut previous_day_tokens: HashMap<usize, Vec<String>> = HashMap::new();
    let mut history: HashMap<usize, Vec<String>> = HashMap::new();
    for day in 1..=config.days {
        let mut today_tokens: HashMap<usize, Vec<String>> = HashMap::new();
        for (g, placement) in placements.iter().enumerate() {
            let network = ring_lattice(placement.len(), groups[g].degree)?;
            for (node, &participant) in placement.iter().enumerate() {
                let n_posts = poisson(&mut post_rng, config.posts_per_participant_day);
                for _ in 0..n_posts {
                    let len = post_rng.gen_range(16..=32);
                    let mut tokens = Vec::with_capacity(len);
                    for _ in 0..len {
                        let borrow = day > 1 && post_rng.gen::<f64>() < NEIGHBOR_BLEND;
                        let token = if borrow {
                            let nbrs = network.neighbors(node);
                            let pick = nbrs[post_rng.gen_range(0..nbrs.len())];
                            let source = placement[pick];
                            match previous_day_tokens.get(&source) {
                                Some(pool) if !pool.is_empty() => {
                                    pool[post_rng.gen_range(0..pool.len())].clone()
                                }
                                _ => own_token(&mut post_rng, clusters[participant], config),
                            }
                        } else {
                            own_token(&mut post_rng, clusters[participant], config)
                        };
                        tokens.push(token);
                    }
                    post_counter += 1;
                    today_tokens
                        .entry(participant)
                        .or_default()
                        .extend(tokens.iter().cloned());
                    history
                        .entry(participant)
                        .or_default()
                        .extend(tokens.iter().cloned());
                    posts.push(Post {
                        id: format!("i{post_counter:05}"),
                        participant_id: ids[participant].clone(),
                        day,
                        text: tokens.join(" "),
                    });
                }
            }
        }
        previous_day_tokens = today_tokens;
    }

    // Final designs are selections from the participant's own posted ideas:
    // tokens sampled from their post history, topped up from their own
    // vocabulary when history is thin.
    let mut finals = Vec::new();
    for i in 0..n {
        for k in 1..=config.finals_per_participant {
            let len = final_rng.gen_range(12..=24);
            let pool = history.get(&i);
            let tokens: Vec<String> = (0..len)
                .map(|_| match pool {
                    Some(p) if !p.is_empty() && final_rng.gen::<f64>() < 0.8 => {
                        p[final_rng.gen_range(0..p.len())].clone()
                    }
                    _ => own_token(&mut final_rng, clusters[i], config),
                })
                .collect();
            finals.push(FinalDesign {
                id: format!("f-{}-{k}", ids[i]),
                participant_id: ids[i].clone(),
                text: tokens.join(" "),
                scores: Vec::new(),
            });
        }
    }

    let mut session = Session {
        name: config.name.clone(),
        task: config.task.clone(),
        days: config.days,
        groups,
        participants,
        posts,
        final_designs: finals,
    };

    // Run the standard pipeline to place final designs in projection space,
    // then score them with the planted utility.
    let model = embed_session(&session, &config.embedding)?;
    let mut all_vectors: Vec<Vec<f64>> = session
        .posts
        .iter()
        .map(|p| {
            model
                .document_vector(&format!("{POST_DOC_PREFIX}{}", p.id))
                .map(|v| v.to_vec())
        })
        .collect::<Result<_, _>>()
        .map_err(PipelineError::from)?;
    let n_posts = all_vectors.len();
    for design in &session.final_designs {
        let v = model
            .document_vector(&format!("{FINAL_DOC_PREFIX}{}", design.id))
            .map_err(PipelineError::from)?;
        all_vectors.push(v.to_vec());
    }
    let projection = crate::analytics::pca_fit(&all_vectors, 2).map_err(PipelineError::from)?;
    let final_points: Vec<[f64; 2]> = projection.points[n_posts..]
        .iter()
        .map(|p| [p[0], p[1]])
        .collect();

    let (mut x_min, mut x_max) = (f64::MAX, f64::MIN);
    let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
    for p in &final_points {
        x_min = x_min.min(p[0]);
        x_max = x_max.max(p[0]);
        y_min = y_min.min(p[1]);
        y_max = y_max.max(p[1]);
    }
    let span = (x_max - x_min).max(y_max - y_min);
    // The peak is planted at per-axis quantiles of the design points, so the
    // default (0.5, 0.5) sits where the point density is central rather than
    // at the (possibly sparse) bounding-box center.
    let peak = [
        coordinate_quantile(&final_points, 0, config.peak_fraction[0]),
        coordinate_quantile(&final_points, 1, config.peak_fraction[1]),
    ];
    let utility_width = if span > 0.0 {
        config.utility_width_fraction * span
    } else {
        1.0
    };

    for (design, point) in session.final_designs.iter_mut().zip(&final_points) {
        let d2 = (point[0] - peak[0]).powi(2) + (point[1] - peak[1]).powi(2);
        let utility = config.utility_base
            + config.utility_amplitude * (-d2 / (2.0 * utility_width * utility_width)).exp();
        design.scores = (0..config.evaluators)
            .map(|_| {
                let noisy = utility + config.score_noise * standard_normal(&mut score_rng);
                noisy.clamp(1.0, 5.0)
            })
            .collect();
    }

    let truth = GroundTruth {
        schema_version: 1,
        seed: config.seed,
        cluster_of: (0..n).map(|i| (ids[i].clone(), clusters[i])).collect(),
        groups: session
            .groups
            .iter()
            .zip(&placements)
            .map(|(g, placement)| TruthGroup {
                id: g.id,
                condition: g.condition.to_string(),
                members: g.members.clone(),
                placement: placement.iter().map(|&i| ids[i].clone()).collect(),
            })
            .collect(),
        utility: UtilityTruth {
            peak,
            width: utility_width,
            base: config.utility_base,
            amplitude: config.utility_amplitude,
            score_noise: config.score_noise,
        },
        embedding: EmbeddingTruth {
            dim: config.embedding.dim,
            window: config.embedding.window,
            epochs: config.embedding.epochs,
            negatives: config.embedding.negatives,
            mode: config.embedding.mode.to_string(),
            subsample_threshold: config.embedding.subsample_threshold,
            initial_rate: config.embedding.initial_rate,
            final_rate: config.embedding.final_rate,
            seed: config.embedding.seed,
            workers: config.embedding.workers,
            min_count: config.embedding.min_count,
        },
        infer: InferTruth {
            steps: DEFAULT_INFER_STEPS,
            rate: DEFAULT_INFER_RATE,
        },
        counts: CountsTruth {
            participants: n,
            posts: session.posts.len(),
            final_designs: session.final_designs.len(),
        },
    };

    Ok((session, truth))
}

/// Seats a group's members on ring nodes using the true cluster labels:
/// contiguous blocks for `Clustered`, round-robin interleaving for
/// `Dispersed`, a shuffle for `Random`. Returns global participant indices
/// in node order.
fn seat_by_cluster(
    members: &[usize],
    clusters: &[usize],
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut sorted: Vec<usize> = members.to_vec();
    sorted.sort_by_key(|&i| (clusters[i], i));
    match condition {
        Condition::Clustered => sorted,
        Condition::Random => {
            let mut shuffled = sorted;
            use rand::seq::SliceRandom;
            shuffled.shuffle(rng);
            shuffled
        }
        Condition::Dispersed => {
            let mut by_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &i in &sorted {
                by_cluster.entry(clusters[i]).or_default().push(i);
            }
            let mut pools: Vec<Vec<usize>> = by_cluster.into_values().collect();
            let mut out = Vec::with_capacity(members.len());
            let mut cursor = 0;
            let n_pools = pools.len();
            while out.len() < members.len() {
                if let Some(next) = pools[cursor % n_pools].pop() {
                    out.push(next);
                }
                cursor += 1;
            }
            out
        }
    }
}

fn own_token(rng: &mut ChaCha8Rng, cluster: usize, config: &SynthConfig) -> String {
    if rng.gen::<f64>() < SHARED_MIX {
        format!("common{:02}", rng.gen_range(0..SHARED_VOCAB_SIZE))
    } else {
        format!("c{cluster}w{:02}", rng.gen_range(0..config.topic_vocab_size))
    }
}

fn own_tokens(
    rng: &mut ChaCha8Rng,
    cluster: usize,
    config: &SynthConfig,
    len: usize,
) -> Vec<String> {
    (0..len).map(|_| own_token(rng, cluster, config)).collect()
}

fn coordinate_quantile(points: &[[f64; 2]], axis: usize, q: f64) -> f64 {
    let mut values: Vec<f64> = points.iter().map(|p| p[axis]).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] * (1.0 - frac) + values[hi] * frac
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Benchmark corpus with two disjoint topic vocabularies; returns documents
/// and their 0/1 topic labels.
pub fn two_topic_corpus(
    seed: u64,
    docs_per_topic: usize,
    vocab_per_topic: usize,
) -> (Vec<Document>, Vec<usize>) {
    two_topic_corpus_with(seed, docs_per_topic, vocab_per_topic, 20, 40)
}

/// [`two_topic_corpus`] with an explicit document length range.
pub fn two_topic_corpus_with(
    seed: u64,
    docs_per_topic: usize,
    vocab_per_topic: usize,
    min_len: usize,
    max_len: usize,
) -> (Vec<Document>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(docs_per_topic * 2);
    let mut labels = Vec::with_capacity(docs_per_topic * 2);
    for topic in 0..2usize {
        for d in 0..docs_per_topic {
            let len = rng.gen_range(min_len..=max_len);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("t{topic}w{:02}", rng.gen_range(0..vocab_per_topic)))
                .collect();
            docs.push(Document::from_tokens(format!("t{topic}d{d:03}"), tokens));
            labels.push(topic);
        }
    }
    (docs, labels)
}
