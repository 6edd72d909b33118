//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusteringError;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after each assignment step of the winning restart.
    pub wcss_trace: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; lowest index wins ties.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < *w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total weight")
        } else {
            // Every point coincides with a chosen centre.
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iterations: usize) -> KMeansOutcome {
    let k = centroids.len();
    let d = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let mut changed = false;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, dist) = nearest(p, &centroids);
            dists[i] = dist;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }

        // An empty cluster takes the point farthest from its own centroid.
        let mut sizes = vec![0usize; k];
        assignments.iter().for_each(|&a| sizes[a] += 1);
        for cluster in 0..k {
            if sizes[cluster] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[assignments[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                sizes[assignments[i]] -= 1;
                sizes[cluster] = 1;
                assignments[i] = cluster;
                dists[i] = 0.0;
                centroids[cluster] = points[i].clone();
                changed = true;
            }
        }
        trace.push(dists.iter().sum());

        let mut sums = vec![vec![0.0; d]; k];
        for (p, &a) in points.iter().zip(&assignments) {
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if sizes[c] > 0 {
                centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
            }
        }

        if !changed || iterations >= max_iterations {
            break;
        }
    }

    let wcss = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    KMeansOutcome {
        assignments,
        centroids,
        wcss,
        iterations,
        wcss_trace: trace,
    }
}

/// Runs `restarts` seeded k-means++/Lloyd fits (restart `i` seeded with
/// `seed + i`) and keeps the lowest WCSS; earlier restarts win ties.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<KMeansOutcome, ClusteringError> {
    if k == 0 || points.len() < k {
        return Err(ClusteringError::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(ClusteringError::InvalidInput(
            "points must be finite and share one dimension".into(),
        ));
    }
    let mut best: Option<KMeansOutcome> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let init = kmeans_plus_plus(points, k, &mut rng);
        let outcome = lloyd(points, init, max_iterations.max(1));
        if best.as_ref().is_none_or(|b| outcome.wcss < b.wcss) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}
