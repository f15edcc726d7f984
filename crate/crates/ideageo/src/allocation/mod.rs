//! Participant placement on the clustered regular network under the three
//! background-distribution conditions, plus balanced group formation.

mod network;

pub use network::{ring_lattice, Network};

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cosine, euclidean};

/// Evaluated swaps without improvement before the local search gives up.
const SWAP_BUDGET_FACTOR: usize = 50;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("invalid ring lattice: n={n}, k={k} (need n > k >= 2 and k even)")]
    InvalidLattice { n: usize, k: usize },
    #[error("background vector of '{participant_id}' has zero norm")]
    ZeroVector { participant_id: String },
    #[error("background vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("group has {group} members but the network has {network} nodes")]
    SizeMismatch { group: usize, network: usize },
    #[error("cannot split {profiles} profiles into {groups} groups")]
    TooFewProfiles { profiles: usize, groups: usize },
    #[error("allocation references unknown participant '{id}'")]
    UnknownParticipant { id: String },
}

/// How participant backgrounds are distributed over the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Similar backgrounds placed as social neighbors.
    Clustered,
    /// Placement ignores background.
    Random,
    /// Dissimilar backgrounds placed as social neighbors.
    Dispersed,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Clustered => "clustered",
            Condition::Random => "random",
            Condition::Dispersed => "dispersed",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clustered" => Ok(Condition::Clustered),
            "random" => Ok(Condition::Random),
            "dispersed" => Ok(Condition::Dispersed),
            other => Err(format!(
                "unknown condition '{other}' (expected clustered, random, or dispersed)"
            )),
        }
    }
}

/// A participant's embedded background plus categorical major.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundProfile {
    pub participant_id: String,
    pub major: String,
    pub background_vector: Vec<f64>,
    pub raw_text: String,
}

/// A node-to-participant placement for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub condition: Condition,
    /// `placement[node]` is the participant seated on that node.
    pub placement: Vec<String>,
    /// Mean similarity over all network edges.
    pub score: f64,
}

/// Blended background similarity: `(1-w) * cosine(vectors) + w * [same
/// major]`. Errors if either vector has zero norm.
pub fn similarity(
    a: &BackgroundProfile,
    b: &BackgroundProfile,
    major_weight: f64,
) -> Result<f64, AllocationError> {
    if a.background_vector.len() != b.background_vector.len() {
        return Err(AllocationError::DimensionMismatch {
            expected: a.background_vector.len(),
            found: b.background_vector.len(),
        });
    }
    let cos = cosine(&a.background_vector, &b.background_vector).ok_or_else(|| {
        let id = if a.background_vector.iter().all(|&x| x == 0.0) {
            &a.participant_id
        } else {
            &b.participant_id
        };
        AllocationError::ZeroVector {
            participant_id: id.clone(),
        }
    })?;
    let same_major = if a.major == b.major { 1.0 } else { 0.0 };
    Ok((1.0 - major_weight) * cos + major_weight * same_major)
}

/// Splits profiles into `n_groups` groups whose sizes differ by at most one,
/// balancing the amount of within-group background variation: a greedy swap
/// search minimizes the spread (max - min) of within-group mean pairwise
/// distance. Deterministic for a fixed seed.
pub fn partition_groups(
    profiles: &[BackgroundProfile],
    n_groups: usize,
    seed: u64,
) -> Result<Vec<Vec<BackgroundProfile>>, AllocationError> {
    if n_groups == 0 || profiles.len() < n_groups {
        return Err(AllocationError::TooFewProfiles {
            profiles: profiles.len(),
            groups: n_groups,
        });
    }
    let n = profiles.len();
    let dist = pairwise_distances(profiles)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let base = n / n_groups;
    let remainder = n % n_groups;
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
    let mut cursor = 0;
    for g in 0..n_groups {
        let size = base + usize::from(g < remainder);
        groups.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let spread = |groups: &[Vec<usize>]| -> f64 {
        let means: Vec<f64> = groups.iter().map(|g| group_mean_distance(g, &dist)).collect();
        let max = means.iter().cloned().fold(f64::MIN, f64::max);
        let min = means.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    };

    let mut current = spread(&groups);
    for _ in 0..200 {
        let mut improved = false;
        for ga in 0..n_groups {
            for gb in (ga + 1)..n_groups {
                for ia in 0..groups[ga].len() {
                    for ib in 0..groups[gb].len() {
                        let a = groups[ga][ia];
                        let b = groups[gb][ib];
                        groups[ga][ia] = b;
                        groups[gb][ib] = a;
                        let trial = spread(&groups);
                        if trial < current - 1e-12 {
                            current = trial;
                            improved = true;
                        } else {
                            groups[ga][ia] = a;
                            groups[gb][ib] = b;
                        }
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut result: Vec<Vec<BackgroundProfile>> = groups
        .into_iter()
        .map(|g| {
            let mut members: Vec<BackgroundProfile> =
                g.into_iter().map(|i| profiles[i].clone()).collect();
            members.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
            members
        })
        .collect();
    result.sort_by(|a, b| a[0].participant_id.cmp(&b[0].participant_id));
    Ok(result)
}

fn pairwise_distances(profiles: &[BackgroundProfile]) -> Result<Vec<Vec<f64>>, AllocationError> {
    let n = profiles.len();
    let dim = profiles[0].background_vector.len();
    for p in profiles {
        if p.background_vector.len() != dim {
            return Err(AllocationError::DimensionMismatch {
                expected: dim,
                found: p.background_vector.len(),
            });
        }
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&profiles[i].background_vector, &profiles[j].background_vector);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok(dist)
}

fn group_mean_distance(members: &[usize], dist: &[Vec<f64>]) -> f64 {
    let n = members.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += dist[members[i]][members[j]];
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Places one group onto the network under the given condition.
///
/// `Random` draws a uniform bijection from the seed. `Clustered` maximizes
/// and `Dispersed` minimizes the total edge similarity, via greedy seeding
/// followed by pairwise-swap local search (an extra seeded restart guards
/// against poor greedy starts).
pub fn allocate(
    group: &[BackgroundProfile],
    network: &Network,
    condition: Condition,
    major_weight: f64,
    seed: u64,
) -> Result<Allocation, AllocationError> {
    let n = network.n();
    if group.len() != n {
        return Err(AllocationError::SizeMismatch {
            group: group.len(),
            network: n,
        });
    }
    let sim = similarity_matrix(group, major_weight)?;
    let edges = network.edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let assignment: Vec<usize> = match condition {
        Condition::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        }
        Condition::Clustered | Condition::Dispersed => {
            let maximize = condition == Condition::Clustered;
            let mut candidates: Vec<usize> = (0..n).collect();
            candidates.sort_by(|&a, &b| group[a].participant_id.cmp(&group[b].participant_id));

            let greedy = greedy_seed(network, &sim, &candidates, maximize);
            let mut best = local_search(network, &sim, greedy, maximize);
            let mut best_total = placement_total(&edges, &sim, &best);

            let mut restart: Vec<usize> = (0..n).collect();
            restart.shuffle(&mut rng);
            let restart = local_search(network, &sim, restart, maximize);
            let restart_total = placement_total(&edges, &sim, &restart);
            let better = if maximize {
                restart_total > best_total + 1e-12
            } else {
                restart_total < best_total - 1e-12
            };
            if better {
                best = restart;
                best_total = restart_total;
            }
            let _ = best_total;
            best
        }
    };

    let total = placement_total(&edges, &sim, &assignment);
    Ok(Allocation {
        condition,
        placement: assignment
            .iter()
            .map(|&p| group[p].participant_id.clone())
            .collect(),
        score: total / edges.len() as f64,
    })
}

/// Mean edge similarity of an existing placement.
pub fn neighbor_similarity(
    allocation: &Allocation,
    group: &[BackgroundProfile],
    network: &Network,
    major_weight: f64,
) -> Result<f64, AllocationError> {
    let by_id: HashMap<&str, &BackgroundProfile> = group
        .iter()
        .map(|p| (p.participant_id.as_str(), p))
        .collect();
    let seated = |node: usize| -> Result<&BackgroundProfile, AllocationError> {
        let id = &allocation.placement[node];
        by_id
            .get(id.as_str())
            .copied()
            .ok_or_else(|| AllocationError::UnknownParticipant { id: id.clone() })
    };
    let edges = network.edges();
    let mut total = 0.0;
    for &(i, j) in &edges {
        total += similarity(seated(i)?, seated(j)?, major_weight)?;
    }
    Ok(total / edges.len() as f64)
}

fn similarity_matrix(
    group: &[BackgroundProfile],
    major_weight: f64,
) -> Result<Vec<Vec<f64>>, AllocationError> {
    let n = group.len();
    let mut sim = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = similarity(&group[i], &group[j], major_weight)?;
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    Ok(sim)
}

/// Fills nodes in index order; each node takes the unplaced participant with
/// the best total similarity to its already-seated neighbors. Candidates are
/// scanned in participant-id order, so ties go to the lowest id.
fn greedy_seed(
    network: &Network,
    sim: &[Vec<f64>],
    candidates_by_id: &[usize],
    maximize: bool,
) -> Vec<usize> {
    let n = network.n();
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for node in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for &cand in candidates_by_id {
            if used[cand] {
                continue;
            }
            let score: f64 = network
                .neighbors(node)
                .iter()
                .filter(|&&nb| assignment[nb] != usize::MAX)
                .map(|&nb| sim[cand][assignment[nb]])
                .sum();
            let better = match best {
                None => true,
                Some((_, b)) => {
                    if maximize {
                        score > b
                    } else {
                        score < b
                    }
                }
            };
            if better {
                best = Some((cand, score));
            }
        }
        let (chosen, _) = best.expect("candidate available for every node");
        assignment[node] = chosen;
        used[chosen] = true;
    }
    assignment
}

/// Pairwise-swap (2-opt) local search to a local optimum of the total edge
/// similarity, with an evaluation budget of `SWAP_BUDGET_FACTOR * n^2` since
/// the last improvement.
fn local_search(
    network: &Network,
    sim: &[Vec<f64>],
    mut assignment: Vec<usize>,
    maximize: bool,
) -> Vec<usize> {
    let n = network.n();
    let budget = SWAP_BUDGET_FACTOR * n * n;
    let mut since_improvement = 0usize;
    loop {
        let mut best_delta = 0.0;
        let mut best_pair: Option<(usize, usize)> = None;
        for u in 0..n {
            for v in (u + 1)..n {
                let delta = swap_delta(network, sim, &assignment, u, v);
                let gain = if maximize { delta } else { -delta };
                if gain > best_delta + 1e-12 {
                    best_delta = gain;
                    best_pair = Some((u, v));
                }
                since_improvement += 1;
                if best_pair.is_none() && since_improvement > budget {
                    return assignment;
                }
            }
        }
        match best_pair {
            Some((u, v)) => {
                assignment.swap(u, v);
                since_improvement = 0;
            }
            None => return assignment,
        }
    }
}

/// Change in total edge similarity if the occupants of nodes `u` and `v`
/// swap. The u-v edge itself (if present) is unaffected.
fn swap_delta(network: &Network, sim: &[Vec<f64>], assignment: &[usize], u: usize, v: usize) -> f64 {
    let pu = assignment[u];
    let pv = assignment[v];
    let mut delta = 0.0;
    for &w in network.neighbors(u) {
        if w == v {
            continue;
        }
        let pw = assignment[w];
        delta += sim[pv][pw] - sim[pu][pw];
    }
    for &w in network.neighbors(v) {
        if w == u {
            continue;
        }
        let pw = assignment[w];
        delta += sim[pu][pw] - sim[pv][pw];
    }
    delta
}

fn placement_total(edges: &[(usize, usize)], sim: &[Vec<f64>], assignment: &[usize]) -> f64 {
    edges
        .iter()
        .map(|&(i, j)| sim[assignment[i]][assignment[j]])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn profile(id: &str, major: &str, vector: Vec<f64>) -> BackgroundProfile {
        BackgroundProfile {
            participant_id: id.into(),
            major: major.into(),
            background_vector: vector,
            raw_text: String::new(),
        }
    }

    /// Two orthogonal clusters of three identical profiles each.
    fn two_cluster_six() -> Vec<BackgroundProfile> {
        vec![
            profile("a1", "alpha", vec![1.0, 0.0]),
            profile("a2", "alpha", vec![1.0, 0.0]),
            profile("a3", "alpha", vec![1.0, 0.0]),
            profile("b1", "beta", vec![0.0, 1.0]),
            profile("b2", "beta", vec![0.0, 1.0]),
            profile("b3", "beta", vec![0.0, 1.0]),
        ]
    }

    #[test]
    fn similarity_examples() {
        let a = profile("a", "alpha", vec![1.0, 0.0]);
        let b = profile("b", "beta", vec![0.0, 1.0]);
        let b_alpha = profile("b", "alpha", vec![0.0, 1.0]);
        for w in [0.0, 0.25, 0.5, 1.0] {
            assert!((similarity(&a, &a, w).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(similarity(&a, &b, 0.5).unwrap(), 0.0);
        assert_eq!(similarity(&a, &b_alpha, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn similarity_rejects_zero_vector() {
        let a = profile("a", "alpha", vec![0.0, 0.0]);
        let b = profile("b", "beta", vec![0.0, 1.0]);
        assert!(matches!(
            similarity(&a, &b, 0.25),
            Err(AllocationError::ZeroVector { .. })
        ));
    }

    #[test]
    fn partition_sizes_differ_by_at_most_one() {
        let profiles: Vec<BackgroundProfile> = (0..66)
            .map(|i| {
                profile(
                    &format!("p{i:02}"),
                    "m",
                    vec![(i % 7) as f64, (i % 3) as f64, 1.0],
                )
            })
            .collect();
        let groups = partition_groups(&profiles, 3, 1).unwrap();
        let mut sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![22, 22, 22]);

        let groups = partition_groups(&profiles[..64], 3, 1).unwrap();
        let mut sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![21, 21, 22]);
    }

    #[test]
    fn partition_balances_planted_clusters_better_than_random_median() {
        use rand::SeedableRng;
        // 30 profiles from 3 planted clusters; the returned partition's
        // spread must not exceed the median spread of 1000 random balanced
        // partitions (Monte-Carlo oracle).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut profiles = Vec::new();
        for c in 0..3usize {
            for i in 0..10usize {
                let mut v = vec![0.0; 3];
                v[c] = 4.0;
                for x in v.iter_mut() {
                    *x += rng.gen_range(-0.5..0.5);
                }
                profiles.push(profile(&format!("c{c}p{i}"), "m", v));
            }
        }
        let dist = pairwise_distances(&profiles).unwrap();
        let spread_of = |groups: &[Vec<usize>]| {
            let means: Vec<f64> = groups.iter().map(|g| group_mean_distance(g, &dist)).collect();
            means.iter().cloned().fold(f64::MIN, f64::max)
                - means.iter().cloned().fold(f64::MAX, f64::min)
        };

        let result = partition_groups(&profiles, 3, 7).unwrap();
        let id_to_idx: HashMap<&str, usize> = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.participant_id.as_str(), i))
            .collect();
        let result_idx: Vec<Vec<usize>> = result
            .iter()
            .map(|g| {
                g.iter()
                    .map(|p| id_to_idx[p.participant_id.as_str()])
                    .collect()
            })
            .collect();
        let ours = spread_of(&result_idx);

        let mut random_spreads: Vec<f64> = (0..1000)
            .map(|_| {
                let mut order: Vec<usize> = (0..30).collect();
                order.shuffle(&mut rng);
                let groups: Vec<Vec<usize>> =
                    order.chunks(10).map(|c| c.to_vec()).collect();
                spread_of(&groups)
            })
            .collect();
        random_spreads.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = random_spreads[500];
        assert!(ours <= median, "ours {ours} vs median {median}");
    }

    #[test]
    fn partition_is_deterministic() {
        let profiles: Vec<BackgroundProfile> = (0..10)
            .map(|i| profile(&format!("p{i}"), "m", vec![i as f64, 1.0]))
            .collect();
        let a = partition_groups(&profiles, 2, 5).unwrap();
        let b = partition_groups(&profiles, 2, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clustered_placement_matches_brute_force_on_six_cycle() {
        let group = two_cluster_six();
        let net = ring_lattice(6, 2).unwrap();
        let alloc = allocate(&group, &net, Condition::Clustered, 0.0, 3).unwrap();
        let (best, _) = brute_force_extremes(&group, &net, 0.0);
        assert!((alloc.score - best).abs() < 1e-12, "score {}", alloc.score);
        // Contiguous blocks: exactly two cross-cluster edges.
        assert!((alloc.score - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn dispersed_placement_matches_brute_force_on_six_cycle() {
        let group = two_cluster_six();
        let net = ring_lattice(6, 2).unwrap();
        let alloc = allocate(&group, &net, Condition::Dispersed, 0.0, 3).unwrap();
        let (_, worst) = brute_force_extremes(&group, &net, 0.0);
        assert!((alloc.score - worst).abs() < 1e-12);
        // Alternating: every edge crosses clusters.
        assert!(alloc.score.abs() < 1e-12);
    }

    #[test]
    fn random_placement_is_a_deterministic_bijection() {
        let group: Vec<BackgroundProfile> = (0..8)
            .map(|i| profile(&format!("p{i}"), "m", vec![i as f64 + 1.0, 1.0]))
            .collect();
        let net = ring_lattice(8, 2).unwrap();
        let a = allocate(&group, &net, Condition::Random, 0.25, 11).unwrap();
        let b = allocate(&group, &net, Condition::Random, 0.25, 11).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<&String> = a.placement.iter().collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8, "placement must be a bijection");
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let group = two_cluster_six();
        let net = ring_lattice(8, 2).unwrap();
        assert!(matches!(
            allocate(&group, &net, Condition::Random, 0.25, 1),
            Err(AllocationError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn neighbor_similarity_examples() {
        let net = ring_lattice(6, 2).unwrap();
        let group = two_cluster_six();

        // Contiguous blocks around the cycle: 4 of 6 edges within-cluster.
        let contiguous = Allocation {
            condition: Condition::Clustered,
            placement: ["a1", "a2", "a3", "b1", "b2", "b3"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            score: 0.0,
        };
        let s = neighbor_similarity(&contiguous, &group, &net, 0.0).unwrap();
        assert!((s - 4.0 / 6.0).abs() < 1e-12);

        // Alternating: every edge crosses clusters.
        let alternating = Allocation {
            condition: Condition::Dispersed,
            placement: ["a1", "b1", "a2", "b2", "a3", "b3"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            score: 0.0,
        };
        let s = neighbor_similarity(&alternating, &group, &net, 0.0).unwrap();
        assert!(s.abs() < 1e-12);

        // Identical profiles: 1.0 under every condition.
        let same: Vec<BackgroundProfile> = (0..6)
            .map(|i| profile(&format!("p{i}"), "m", vec![1.0, 1.0]))
            .collect();
        for condition in [Condition::Clustered, Condition::Random, Condition::Dispersed] {
            let alloc = allocate(&same, &net, condition, 0.25, 2).unwrap();
            let s = neighbor_similarity(&alloc, &same, &net, 0.25).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_scores_are_ordered_on_planted_clusters() {
        use rand::SeedableRng;
        let net = ring_lattice(24, 4).unwrap();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let group: Vec<BackgroundProfile> = (0..24)
                .map(|i| {
                    let cluster = i % 2;
                    let mut v = vec![0.0, 0.0];
                    v[cluster] = 1.0;
                    v[1 - cluster] = rng.gen_range(0.0..0.2);
                    profile(&format!("p{i:02}"), &format!("m{cluster}"), v)
                })
                .collect();
            let clustered = allocate(&group, &net, Condition::Clustered, 0.25, seed).unwrap();
            let random = allocate(&group, &net, Condition::Random, 0.25, seed).unwrap();
            let dispersed = allocate(&group, &net, Condition::Dispersed, 0.25, seed).unwrap();
            assert!(
                clustered.score > random.score && random.score > dispersed.score,
                "seed {seed}: {} / {} / {}",
                clustered.score,
                random.score,
                dispersed.score
            );
        }
    }

    /// Exhaustive oracle over all n! placements.
    fn brute_force_extremes(
        group: &[BackgroundProfile],
        net: &Network,
        major_weight: f64,
    ) -> (f64, f64) {
        use itertools::Itertools;
        let sim = similarity_matrix(group, major_weight).unwrap();
        let edges = net.edges();
        let n = group.len();
        let mut best = f64::MIN;
        let mut worst = f64::MAX;
        for perm in (0..n).permutations(n) {
            let total = placement_total(&edges, &sim, &perm);
            let mean = total / edges.len() as f64;
            best = best.max(mean);
            worst = worst.min(mean);
        }
        (best, worst)
    }
}
