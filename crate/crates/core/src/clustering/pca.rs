//! Two-component PCA through a cyclic Jacobi eigen-decomposition.

use serde::{Deserialize, Serialize};

use super::ClusteringError;

pub const MAX_PCA_DIMENSION: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    pub centroid_points: Vec<[f64; 2]>,
    pub explained_variance_ratio: [f64; 2],
}

/// Eigenvalues and column eigenvectors of a symmetric matrix, in decreasing
/// eigenvalue order.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Projects points (and centroids, with the same basis) onto the top two
/// principal components. Each component is signed so that its largest-magnitude
/// loading is positive.
pub fn project_2d(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<Projection2D, ClusteringError> {
    let n = points.len();
    let d = points.first().map(Vec::len).unwrap_or(0);
    if d > MAX_PCA_DIMENSION {
        return Err(ClusteringError::DimensionTooLarge(d));
    }
    if n < 2 || d < 1 {
        return Err(ClusteringError::InvalidInput(format!(
            "projection needs at least 2 points in at least 1 dimension (got {n} x {d})"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in i..d {
                cov[i][j] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let total: f64 = (0..d).map(|i| cov[i][i]).sum();
    if total <= 0.0 {
        return Err(ClusteringError::Degenerate);
    }

    // one feature: its centered values are the only component
    let (values, mut vectors) = if d == 1 {
        (vec![cov[0][0], 0.0], vec![vec![1.0], vec![0.0]])
    } else {
        jacobi_eigen(&cov)
    };
    for vec in vectors.iter_mut().take(2) {
        let lead = vec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, v)| *v)
            .unwrap_or(1.0);
        if lead < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let project = |p: &Vec<f64>| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..d).map(|j| (p[j] - mean[j]) * vectors[c][j]).sum();
        }
        out
    };
    let ratio = |i: usize| (values[i].max(0.0) / total).clamp(0.0, 1.0);
    Ok(Projection2D {
        points: points.iter().map(project).collect(),
        centroid_points: centroids.iter().map(project).collect(),
        explained_variance_ratio: [ratio(0), ratio(1).min(ratio(0))],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]];
        let (vals, vecs) = jacobi_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..3 {
            for j in 0..3 {
                let rebuilt: f64 = (0..3).map(|k| vals[k] * vecs[k][i] * vecs[k][j]).sum();
                assert!((rebuilt - m[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn axis_aligned_points_keep_axes() {
        let pts = vec![vec![-2.0, 0.0], vec![2.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]];
        let p = project_2d(&pts, &[vec![2.0, 0.0]]).unwrap();
        for (a, b) in p.points.iter().zip(&pts) {
            assert!((a[0] - b[0]).abs() < 1e-12);
            assert!((a[1].abs() - b[1].abs()).abs() < 1e-12);
        }
        // variances 8/3 and 2/3
        assert!((p.explained_variance_ratio[0] - 0.8).abs() < 1e-12);
        assert!((p.explained_variance_ratio[1] - 0.2).abs() < 1e-12);
        assert!((p.centroid_points[0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn planar_data_is_fully_explained() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, -1.0, 3.0];
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                (0..3).map(|j| a * u[j] + b * v[j] + 7.0).collect()
            })
            .collect();
        let p = project_2d(&pts, &[]).unwrap();
        let sum = p.explained_variance_ratio[0] + p.explained_variance_ratio[1];
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.explained_variance_ratio[0] >= p.explained_variance_ratio[1]);
    }

    #[test]
    fn degenerate_and_oversized() {
        let same = vec![vec![1.0, 1.0]; 4];
        assert_eq!(project_2d(&same, &[]), Err(ClusteringError::Degenerate));
        let wide = vec![vec![0.0; 51], vec![1.0; 51]];
        assert_eq!(project_2d(&wide, &[]), Err(ClusteringError::DimensionTooLarge(51)));
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let pts = vec![vec![1.0, 1.1], vec![2.0, 1.9], vec![3.0, 3.2], vec![4.0, 3.9]];
        assert_eq!(project_2d(&pts, &[]).unwrap(), project_2d(&pts, &[]).unwrap());
        let p = project_2d(&pts, &[]).unwrap();
        // points increase along both axes, so the first component must too
        assert!(p.points[3][0] > p.points[0][0]);
    }

    #[test]
    fn single_feature_projects_onto_one_axis() {
        let pts = vec![vec![1.0], vec![3.0], vec![5.0]];
        let p = project_2d(&pts, &[vec![2.0]]).unwrap();
        assert_eq!(p.points, vec![[-2.0, 0.0], [0.0, 0.0], [2.0, 0.0]]);
        assert_eq!(p.centroid_points, vec![[-1.0, 0.0]]);
        assert_eq!(p.explained_variance_ratio, [1.0, 0.0]);
    }
}
