//! Dimensionality reduction ahead of clustering.
//!
//! The reducer is pluggable; [`Pca`] is the deterministic default and
//! [`Passthrough`] is used when vectors arrive already reduced.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{ClusteringError, EmbeddingSet};

#[derive(Debug, Clone)]
pub struct Reduced {
    pub embeddings: EmbeddingSet,
    pub warnings: Vec<String>,
}

pub trait Reducer {
    fn reduce(&self, input: &EmbeddingSet) -> Result<Reduced, ClusteringError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Passthrough;

impl Reducer for Passthrough {
    fn reduce(&self, input: &EmbeddingSet) -> Result<Reduced, ClusteringError> {
        Ok(Reduced {
            embeddings: input.clone(),
            warnings: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pca {
    pub target_dim: usize,
}

impl Reducer for Pca {
    fn reduce(&self, input: &EmbeddingSet) -> Result<Reduced, ClusteringError> {
        reduce_pca(input, self.target_dim)
    }
}

/// Relative eigenvalue floor below which the input counts as variance-free.
const ZERO_VARIANCE_EPS: f64 = 1e-12;

/// Project mean-centred rows onto the top `target_dim` principal components.
///
/// Components are ordered by decreasing eigenvalue (lower index on ties) and
/// each is signed so that its largest-magnitude loading is positive.
pub fn reduce_pca(input: &EmbeddingSet, target_dim: usize) -> Result<Reduced, ClusteringError> {
    let n = input.len();
    let d = input.dim();
    if target_dim > d {
        return Err(ClusteringError::TargetDim {
            target: target_dim,
            dim: d,
        });
    }
    if n < 2 {
        return Err(ClusteringError::TooFewPoints {
            needed: 2,
            got: n,
            constraint: "PCA needs n >= 2",
        });
    }

    let mut mean = vec![0.0; d];
    for row in input.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| input.row(i)[j] - mean[j]);

    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let scale = cov.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut warnings = Vec::new();

    let projected: Vec<Vec<f64>> = if scale <= ZERO_VARIANCE_EPS {
        warnings.push("input has zero variance; returning mean-centred coordinates".to_string());
        (0..n)
            .map(|i| (0..target_dim).map(|j| centered[(i, j)]).collect())
            .collect()
    } else {
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
                .then(a.cmp(&b))
        });
        let mut components = DMatrix::zeros(d, target_dim);
        for (k, &col) in order.iter().take(target_dim).enumerate() {
            let v = eig.eigenvectors.column(col);
            let mut pivot = 0;
            for j in 1..d {
                if v[j].abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[(j, k)] = sign * v[j];
            }
        }
        let y = &centered * components;
        (0..n)
            .map(|i| (0..target_dim).map(|j| y[(i, j)]).collect())
            .collect()
    };

    Ok(Reduced {
        embeddings: EmbeddingSet::new(input.article_ids().to_vec(), projected)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn points_in_the_target_subspace_reconstruct_exactly() {
        // 3-D points lying in the z = 0 plane, reduced to 2-D, keep all distances
        let rows = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![3.0, -1.0, 0.0],
            vec![-2.0, 0.5, 0.0],
        ];
        let e = EmbeddingSet::from_rows(rows.clone()).unwrap();
        let r = reduce_pca(&e, 2).unwrap().embeddings;
        for i in 0..4 {
            for j in 0..4 {
                assert!((dist(&rows[i], &rows[j]) - dist(r.row(i), r.row(j))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_line_projects_onto_unit_diagonal() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, i as f64]).collect();
        let e = EmbeddingSet::from_rows(rows).unwrap();
        let r = reduce_pca(&e, 1).unwrap().embeddings;
        // component (1,1)/√2 with positive sign → coordinate = (x - 2)·√2
        for i in 0..5 {
            let expected = (i as f64 - 2.0) * 2f64.sqrt();
            assert!((r.row(i)[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_projection_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let e = EmbeddingSet::from_rows(rows.clone()).unwrap();
        let r = reduce_pca(&e, 5).unwrap().embeddings;
        for i in 0..10 {
            for j in 0..10 {
                assert!((dist(&rows[i], &rows[j]) - dist(r.row(i), r.row(j))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn errors_and_zero_variance() {
        let e = EmbeddingSet::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(reduce_pca(&e, 3), Err(ClusteringError::TargetDim { .. })));
        let r = reduce_pca(&e, 1).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.embeddings.row(0), &[0.0]);
        let one = EmbeddingSet::from_rows(vec![vec![1.0]]).unwrap();
        assert!(reduce_pca(&one, 1).is_err());
    }

    #[test]
    fn result_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![(i * 7 % 5) as f64, (i * 3 % 4) as f64, i as f64 * 0.5])
            .collect();
        let e = EmbeddingSet::from_rows(rows).unwrap();
        let a = reduce_pca(&e, 2).unwrap().embeddings;
        let b = reduce_pca(&e, 2).unwrap().embeddings;
        assert_eq!(a, b);
    }
}
