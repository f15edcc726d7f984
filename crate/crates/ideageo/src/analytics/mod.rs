//! Idea-distance analytics: distance matrices, per-day diversity series,
//! group comparisons, and the PCA projection of the problem space.

mod mwu;
mod pca;

pub use mwu::{compare_groups, mann_whitney_u, TestResult};
pub use pca::{pca_fit, pca_transform, Projection};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{euclidean, Mat};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no vectors supplied")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("id/vector count mismatch: {ids} ids, {vectors} vectors")]
    CountMismatch { ids: usize, vectors: usize },
    #[error("need at least {needed} vectors, found {found}")]
    TooFewVectors { needed: usize, found: usize },
    #[error("degenerate input: all vectors are identical")]
    DegenerateInput,
    #[error("requested {requested} components but dimension is {dim}")]
    TooManyComponents { requested: usize, dim: usize },
    #[error("insufficient data: each sample needs at least one non-missing value")]
    InsufficientData,
}

/// One posted idea with its embedding vector attached.
#[derive(Debug, Clone, PartialEq)]
pub struct IdeaRecord {
    pub id: String,
    pub participant_id: String,
    /// Group label; 0 marks posts by participants outside any group.
    pub group: usize,
    /// 1-based working day.
    pub day: usize,
    pub text: String,
    pub vector: Vec<f64>,
}

/// Symmetric matrix of pairwise Euclidean distances with row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    values: Mat,
}

impl DistanceMatrix {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_ideas(ideas: &[IdeaRecord]) -> Result<Self, AnalyticsError> {
        let ids = ideas.iter().map(|i| i.id.clone()).collect();
        let vectors: Vec<Vec<f64>> = ideas.iter().map(|i| i.vector.clone()).collect();
        distance_matrix(ids, &vectors)
    }
}

/// Pairwise Euclidean distance matrix over `vectors`, labelled by `ids`.
pub fn distance_matrix(
    ids: Vec<String>,
    vectors: &[Vec<f64>],
) -> Result<DistanceMatrix, AnalyticsError> {
    if vectors.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    if ids.len() != vectors.len() {
        return Err(AnalyticsError::CountMismatch {
            ids: ids.len(),
            vectors: vectors.len(),
        });
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(AnalyticsError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let n = vectors.len();
    let mut values = Mat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&vectors[i], &vectors[j]);
            values.set(i, j, d);
            values.set(j, i, d);
        }
    }
    Ok(DistanceMatrix { ids, values })
}

/// Mean pairwise Euclidean distance among one group's ideas for each working
/// day `1..=days`. Days with fewer than two ideas yield `None`.
pub fn daily_average_distance(
    ideas: &[IdeaRecord],
    group: usize,
    days: usize,
) -> Vec<Option<f64>> {
    (1..=days)
        .map(|day| {
            let day_vectors: Vec<&Vec<f64>> = ideas
                .iter()
                .filter(|i| i.group == group && i.day == day)
                .map(|i| &i.vector)
                .collect();
            mean_pairwise_distance(&day_vectors)
        })
        .collect()
}

fn mean_pairwise_distance(vectors: &[&Vec<f64>]) -> Option<f64> {
    let n = vectors.len();
    if n < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += euclidean(vectors[i], vectors[j]);
        }
    }
    Some(total / (n * (n - 1) / 2) as f64)
}

/// Number of posted ideas per group per day, for days `1..=days`. Groups
/// absent from `ideas` are absent from the map.
pub fn daily_counts(ideas: &[IdeaRecord], days: usize) -> BTreeMap<usize, Vec<u64>> {
    let mut out: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for idea in ideas {
        let series = out.entry(idea.group).or_insert_with(|| vec![0; days]);
        if idea.day >= 1 && idea.day <= days {
            series[idea.day - 1] += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idea(id: &str, group: usize, day: usize, vector: Vec<f64>) -> IdeaRecord {
        IdeaRecord {
            id: id.into(),
            participant_id: format!("p-{id}"),
            group,
            day,
            text: String::new(),
            vector,
        }
    }

    #[test]
    fn distance_matrix_three_four_five() {
        let m = distance_matrix(
            vec!["a".into(), "b".into()],
            &[vec![0.0, 0.0], vec![3.0, 4.0]],
        )
        .unwrap();
        assert_eq!(m.value(0, 0), 0.0);
        assert_eq!(m.value(0, 1), 5.0);
        assert_eq!(m.value(1, 0), 5.0);
        assert_eq!(m.value(1, 1), 0.0);
    }

    #[test]
    fn distance_matrix_single_vector() {
        let m = distance_matrix(vec!["a".into()], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.value(0, 0), 0.0);
    }

    #[test]
    fn distance_matrix_duplicates_are_zero() {
        let m = distance_matrix(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0], vec![1.0, 2.0]],
        )
        .unwrap();
        assert_eq!(m.value(0, 1), 0.0);
    }

    #[test]
    fn distance_matrix_rejects_mixed_dims() {
        let err = distance_matrix(
            vec!["a".into(), "b".into()],
            &[vec![0.0, 0.0], vec![1.0, 2.0, 3.0]],
        )
        .unwrap_err();
        assert!(matches!(err, AnalyticsError::DimensionMismatch { .. }));
    }

    #[test]
    fn daily_average_distance_examples() {
        let ideas = vec![
            idea("a", 1, 1, vec![0.0, 0.0]),
            idea("b", 1, 1, vec![3.0, 4.0]),
            idea("c", 1, 2, vec![0.0, 0.0]),
            idea("d", 1, 2, vec![3.0, 4.0]),
            idea("e", 1, 2, vec![6.0, 8.0]),
            idea("f", 1, 3, vec![1.0, 1.0]),
        ];
        let series = daily_average_distance(&ideas, 1, 4);
        assert_eq!(series[0], Some(5.0));
        assert!((series[1].unwrap() - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(series[2], None, "one idea is not a pair");
        assert_eq!(series[3], None);
    }

    #[test]
    fn daily_counts_empty_session() {
        let counts = daily_counts(&[], 10);
        assert!(counts.is_empty());
    }

    #[test]
    fn daily_counts_constant_session() {
        let mut ideas = Vec::new();
        for group in 1..=3 {
            for day in 1..=10 {
                for k in 0..10 {
                    ideas.push(idea(&format!("g{group}d{day}k{k}"), group, day, vec![0.0]));
                }
            }
        }
        let counts = daily_counts(&ideas, 10);
        for group in 1..=3 {
            assert_eq!(counts[&group], vec![10; 10]);
        }
    }

    proptest! {
        #[test]
        fn distance_matrix_is_symmetric_with_zero_diagonal(
            vectors in proptest::collection::vec(
                proptest::collection::vec(-100.0f64..100.0, 3), 2..12),
        ) {
            let ids = (0..vectors.len()).map(|i| i.to_string()).collect();
            let m = distance_matrix(ids, &vectors).unwrap();
            for i in 0..m.len() {
                prop_assert_eq!(m.value(i, i), 0.0);
                for j in 0..m.len() {
                    prop_assert!((m.value(i, j) - m.value(j, i)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn daily_average_distance_is_translation_invariant(
            coords in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 4..10),
            shift in (-20.0f64..20.0, -20.0f64..20.0),
        ) {
            let base: Vec<IdeaRecord> = coords
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| idea(&i.to_string(), 1, 1 + i % 2, vec![x, y]))
                .collect();
            let shifted: Vec<IdeaRecord> = base
                .iter()
                .map(|r| IdeaRecord {
                    vector: vec![r.vector[0] + shift.0, r.vector[1] + shift.1],
                    ..r.clone()
                })
                .collect();
            let a = daily_average_distance(&base, 1, 2);
            let b = daily_average_distance(&shifted, 1, 2);
            for (x, y) in a.iter().zip(&b) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (None, None) => {}
                    _ => prop_assert!(false, "missing-value pattern changed"),
                }
            }
        }

        #[test]
        fn daily_average_distance_is_order_invariant(
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut ideas: Vec<IdeaRecord> = (0..9)
                .map(|i| idea(&i.to_string(), 1, 1 + i % 3, vec![i as f64, (i * i) as f64]))
                .collect();
            let original = daily_average_distance(&ideas, 1, 3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            ideas.shuffle(&mut rng);
            let shuffled = daily_average_distance(&ideas, 1, 3);
            for (a, b) in original.iter().zip(&shuffled) {
                match (a, b) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "missing-value pattern changed"),
                }
            }
        }
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vectors: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let ids = (0..vectors.len()).map(|i| i.to_string()).collect();
        let m = distance_matrix(ids, &vectors).unwrap();
        for _ in 0..1000 {
            let i = rng.gen_range(0..vectors.len());
            let j = rng.gen_range(0..vectors.len());
            let k = rng.gen_range(0..vectors.len());
            assert!(m.value(i, j) <= m.value(i, k) + m.value(k, j) + 1e-9);
        }
    }
}
