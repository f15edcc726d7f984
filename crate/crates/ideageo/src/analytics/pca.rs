//! Principal component analysis via covariance eigendecomposition. The
//! symmetric eigensolver is a cyclic Jacobi iteration, which is exact enough
//! for the moderate dimensions used here (d <= 512).

use super::AnalyticsError;
use crate::linalg::Mat;

const MAX_SWEEPS: usize = 100;

/// A fitted projection: sample mean, orthonormal component rows, eigenvalues
/// in descending order, and the projected input points.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `n_components x d`; each row is one principal axis.
    pub components: Mat,
    pub eigenvalues: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

/// Fits a PCA projection with the top `n_components` axes of the covariance
/// (1/(n-1) convention). Component signs are fixed so that each row's
/// largest-magnitude entry is positive.
pub fn pca_fit(vectors: &[Vec<f64>], n_components: usize) -> Result<Projection, AnalyticsError> {
    if vectors.len() < 2 {
        return Err(AnalyticsError::TooFewVectors {
            needed: 2,
            found: vectors.len(),
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
    if n_components == 0 || n_components > dim {
        return Err(AnalyticsError::TooManyComponents {
            requested: n_components,
            dim,
        });
    }
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Err(AnalyticsError::DegenerateInput);
    }

    let n = vectors.len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut cov = Mat::zeros(dim, dim);
    for row in &centered {
        for i in 0..dim {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..dim {
                let v = cov.get(i, j) + xi * row[j];
                cov.set(i, j, v);
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov.get(i, j) * scale;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let (eigenvalues, eigenvectors) = symmetric_eigen(&cov);

    let mut components = Mat::zeros(n_components, dim);
    let mut top_values = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let mut row: Vec<f64> = eigenvectors.row(k).to_vec();
        fix_sign(&mut row);
        components.row_mut(k).copy_from_slice(&row);
        top_values.push(eigenvalues[k].max(0.0));
    }

    let points = project(&components, &mean, vectors);
    Ok(Projection {
        mean,
        components,
        eigenvalues: top_values,
        points,
    })
}

/// Projects `vectors` into the fitted component space: `(v - mean) . C^T`.
pub fn pca_transform(
    projection: &Projection,
    vectors: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, AnalyticsError> {
    let dim = projection.mean.len();
    for v in vectors {
        if v.len() != dim {
            return Err(AnalyticsError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(project(&projection.components, &projection.mean, vectors))
}

fn project(components: &Mat, mean: &[f64], vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            (0..components.rows())
                .map(|k| {
                    components
                        .row(k)
                        .iter()
                        .zip(v.iter().zip(mean))
                        .map(|(c, (x, m))| c * (x - m))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Flips a component so its largest-magnitude entry is positive.
fn fix_sign(row: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// rows.
pub fn symmetric_eigen(matrix: &Mat) -> (Vec<f64>, Mat) {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols(), "matrix must be square");
    let mut a: Vec<f64> = matrix.as_slice().to_vec();
    let idx = |r: usize, c: usize| r * n + c;

    // Eigenvector accumulator, starts as identity; columns track rotations.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[idx(i, i)] = 1.0;
    }

    let frobenius: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * frobenius.max(1.0);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[idx(p, q)] * a[idx(p, q)];
                }
            }
            s.sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[idx(p, p)] = app - t * apq;
                a[idx(q, q)] = aqq + t * apq;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[idx(i, p)];
                        let aiq = a[idx(i, q)];
                        a[idx(i, p)] = c * aip - s * aiq;
                        a[idx(p, i)] = a[idx(i, p)];
                        a[idx(i, q)] = s * aip + c * aiq;
                        a[idx(q, i)] = a[idx(i, q)];
                    }
                }
                for i in 0..n {
                    let vip = v[idx(i, p)];
                    let viq = v[idx(i, q)];
                    v[idx(i, p)] = c * vip - s * viq;
                    v[idx(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[idx(j, j)].partial_cmp(&a[idx(i, i)]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[idx(i, i)]).collect();
    let mut eigenvectors = Mat::zeros(n, n);
    for (row, &col) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors.set(row, i, v[idx(i, col)]);
        }
    }
    (eigenvalues, eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn collinear_points_have_one_component() {
        // Centered data (-1,-2),(0,0),(1,2): covariance [[1,2],[2,4]],
        // eigenvalues 5 and 0, leading axis (1,2)/sqrt(5).
        let vectors = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let p = pca_fit(&vectors, 2).unwrap();
        assert!((p.eigenvalues[0] - 5.0).abs() < 1e-9);
        assert!(p.eigenvalues[1].abs() < 1e-9);
        let inv_sqrt5 = 1.0 / 5.0f64.sqrt();
        assert!((p.components.get(0, 0) - inv_sqrt5).abs() < 1e-9);
        assert!((p.components.get(0, 1) - 2.0 * inv_sqrt5).abs() < 1e-9);
    }

    #[test]
    fn components_are_orthonormal_and_eigenvalues_sorted() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vectors: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let p = pca_fit(&vectors, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let d = dot(p.components.row(i), p.components.row(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9, "rows {i},{j}: {d}");
            }
        }
        for w in p.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn matches_independent_eigensolver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let vectors: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let p = pca_fit(&vectors, 2).unwrap();
            let (oracle_vals, oracle_vecs) = nalgebra_oracle(&vectors);
            for k in 0..2 {
                assert!(
                    (p.eigenvalues[k] - oracle_vals[k]).abs() < 1e-8,
                    "eigenvalue {k}"
                );
                let ours = p.components.row(k);
                let theirs = &oracle_vecs[k];
                let sign = if dot(ours, theirs) < 0.0 { -1.0 } else { 1.0 };
                for (x, y) in ours.iter().zip(theirs) {
                    assert!((x - sign * y).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn transform_of_inputs_reproduces_points() {
        let vectors = vec![vec![1.0, 0.0, 2.0], vec![0.5, 1.0, -1.0], vec![2.0, 3.0, 0.0]];
        let p = pca_fit(&vectors, 2).unwrap();
        let again = pca_transform(&p, &vectors).unwrap();
        assert_eq!(p.points, again);
    }

    #[test]
    fn transform_of_mean_is_origin() {
        let vectors = vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![2.0, 2.0]];
        let p = pca_fit(&vectors, 2).unwrap();
        let out = pca_transform(&p, &[p.mean.clone()]).unwrap();
        assert!(out[0][0].abs() < 1e-12);
        assert!(out[0][1].abs() < 1e-12);
    }

    #[test]
    fn projected_variance_equals_eigenvalue() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vectors: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let p = pca_fit(&vectors, 2).unwrap();
        let xs: Vec<f64> = p.points.iter().map(|pt| pt[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - p.eigenvalues[0]).abs() < 1e-9);
    }

    #[test]
    fn full_reconstruction_recovers_centered_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let vectors: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let p = pca_fit(&vectors, 4).unwrap();
        for (v, pt) in vectors.iter().zip(&p.points) {
            for j in 0..4 {
                let rebuilt: f64 = (0..4).map(|k| pt[k] * p.components.get(k, j)).sum();
                assert!((rebuilt - (v[j] - p.mean[j])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identical_vectors_are_degenerate() {
        let vectors = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert!(matches!(
            pca_fit(&vectors, 2),
            Err(AnalyticsError::DegenerateInput)
        ));
    }

    #[test]
    fn single_vector_is_rejected() {
        assert!(matches!(
            pca_fit(&[vec![1.0, 2.0]], 2),
            Err(AnalyticsError::TooFewVectors { .. })
        ));
    }

    /// Independent oracle: nalgebra's symmetric eigensolver on the same
    /// covariance matrix.
    fn nalgebra_oracle(vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = vectors.len();
        let d = vectors[0].len();
        let mut mean = vec![0.0; d];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / n as f64;
            }
        }
        let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
        for v in vectors {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (v[i] - mean[i]) * (v[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
            .map(|k| {
                (
                    eig.eigenvalues[k],
                    eig.eigenvectors.column(k).iter().copied().collect(),
                )
            })
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        (
            pairs.iter().map(|(v, _)| *v).collect(),
            pairs.into_iter().map(|(_, v)| v).collect(),
        )
    }
}
