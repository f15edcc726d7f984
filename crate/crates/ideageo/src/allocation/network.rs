//! Regular ring-lattice topology: node `i` is adjacent to its `k/2` nearest
//! neighbors on each side of the ring.

use super::AllocationError;

/// Undirected k-regular network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    k: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Network {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// All undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.n * self.k / 2);
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    /// Average local clustering coefficient: for each node, the fraction of
    /// neighbor pairs that are themselves adjacent.
    pub fn clustering_coefficient(&self) -> f64 {
        let mut total = 0.0;
        for nbrs in &self.adjacency {
            let deg = nbrs.len();
            if deg < 2 {
                continue;
            }
            let mut closed = 0usize;
            for a in 0..deg {
                for b in (a + 1)..deg {
                    if self.is_adjacent(nbrs[a], nbrs[b]) {
                        closed += 1;
                    }
                }
            }
            total += closed as f64 / (deg * (deg - 1) / 2) as f64;
        }
        total / self.n as f64
    }
}

/// Builds the ring lattice on `n` nodes with even degree `k`: node `i` is
/// adjacent to `i±1, ..., i±k/2` (mod `n`). Requires `n > k >= 2`.
pub fn ring_lattice(n: usize, k: usize) -> Result<Network, AllocationError> {
    if k < 2 || k % 2 != 0 || n <= k {
        return Err(AllocationError::InvalidLattice { n, k });
    }
    let half = k / 2;
    let adjacency = (0..n)
        .map(|i| {
            let mut nbrs: Vec<usize> = (1..=half)
                .flat_map(|d| [(i + d) % n, (i + n - d) % n])
                .collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            nbrs
        })
        .collect();
    Ok(Network { n, k, adjacency })
}
