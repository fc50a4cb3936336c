//! Spherical k-means with silhouette-based choice of k.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::space::{dot, normalize};
use crate::exec::Exec;

const MAX_ITERATIONS: usize = 100;

/// Cosine distance between unit (or zero) vectors, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

pub fn distance_matrix(vectors: &[Vec<f64>], exec: Exec) -> Vec<Vec<f64>> {
    exec.map_range(vectors.len(), |i| {
        vectors.iter().map(|v| cosine_distance(&vectors[i], v)).collect()
    })
}

fn centroid(vectors: &[Vec<f64>], members: impl Iterator<Item = usize>, dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    for i in members {
        for (x, y) in c.iter_mut().zip(&vectors[i]) {
            *x += y;
        }
    }
    normalize(&mut c);
    c
}

fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let s = dot(v, centroid);
        if s > best_sim {
            best = c;
            best_sim = s;
        }
    }
    best
}

/// Relabels clusters 0.. in order of first appearance, dropping empties.
fn compact(labels: &mut [usize]) -> usize {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    for l in labels.iter_mut() {
        if *l >= map.len() {
            map.resize(*l + 1, None);
        }
        let id = *map[*l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        *l = id;
    }
    next
}

/// Farthest-point seeding: the first center is drawn from `rng_seed`, each
/// further center is the point farthest (cosine) from all chosen centers,
/// lowest index on ties. Stops early once every point coincides with a
/// center.
pub fn seed_centers(vectors: &[Vec<f64>], k: usize, rng_seed: u64) -> Vec<usize> {
    if vectors.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut centers = vec![rng.random_range(0..vectors.len())];
    let mut min_dist: Vec<f64> = vectors
        .iter()
        .map(|v| cosine_distance(v, &vectors[centers[0]]))
        .collect();
    while centers.len() < k {
        let mut far = 0;
        for i in 1..vectors.len() {
            if min_dist[i] > min_dist[far] {
                far = i;
            }
        }
        if min_dist[far] <= 1e-12 {
            break;
        }
        centers.push(far);
        for (i, d) in min_dist.iter_mut().enumerate() {
            *d = d.min(cosine_distance(&vectors[i], &vectors[far]));
        }
    }
    centers
}

/// Spherical k-means on unit vectors. Returns compact labels.
pub fn spherical_kmeans(vectors: &[Vec<f64>], k: usize, rng_seed: u64) -> Vec<usize> {
    let n = vectors.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let mut centroids: Vec<Vec<f64>> = seed_centers(vectors, k, rng_seed)
        .into_iter()
        .map(|i| vectors[i].clone())
        .collect();
    let mut labels: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
    for _ in 0..MAX_ITERATIONS {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if labels.contains(&c) {
                *centroid = centroid_of(vectors, &labels, c, dim);
            }
        }
        let next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    compact(&mut labels);
    labels
}

fn centroid_of(vectors: &[Vec<f64>], labels: &[usize], c: usize, dim: usize) -> Vec<f64> {
    centroid(
        vectors,
        labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i),
        dim,
    )
}

/// Merges clusters smaller than `min_size` into the cluster whose centroid
/// is most similar, smallest cluster first, until none remain or only one
/// cluster is left.
pub fn merge_small_clusters(vectors: &[Vec<f64>], labels: &mut [usize], min_size: usize) {
    if vectors.is_empty() {
        return;
    }
    let dim = vectors[0].len();
    loop {
        let k = compact(labels);
        if k <= 1 {
            return;
        }
        let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        let Some(small) = (0..k)
            .filter(|&c| sizes[c] < min_size)
            .min_by_key(|&c| (sizes[c], c))
        else {
            return;
        };
        let centroids: Vec<Vec<f64>> = (0..k).map(|c| centroid_of(vectors, labels, c, dim)).collect();
        let mut target = None;
        let mut best = f64::NEG_INFINITY;
        for c in (0..k).filter(|&c| c != small) {
            let s = dot(&centroids[small], &centroids[c]);
            if s > best {
                best = s;
                target = Some(c);
            }
        }
        let target = target.expect("at least two clusters");
        for l in labels.iter_mut() {
            if *l == small {
                *l = target;
            }
        }
    }
}

/// Per-point silhouette coefficients from a distance matrix. Points in
/// singleton clusters score 0. Returns `None` with fewer than two clusters.
pub fn silhouettes(dist: &[Vec<f64>], labels: &[usize], exec: Exec) -> Option<Vec<f64>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    Some(exec.map_range(labels.len(), |i| {
        let own = labels[i];
        if sizes[own] <= 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        for (j, &l) in labels.iter().enumerate() {
            if j != i {
                sums[l] += dist[i][j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m <= 0.0 {
            0.0
        } else {
            (b - a) / m
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Mean silhouette of the chosen partition; `None` for the one-cluster
    /// fallback.
    pub silhouette: Option<f64>,
    /// Mean silhouette for every k tried, in k order.
    pub scores: Vec<(usize, f64)>,
}

/// Clusters unit vectors, choosing k in `k_range` (capped at `n - 1`) by the
/// largest mean silhouette, smallest k on ties. When no partition has a
/// positive mean silhouette, everything lands in one cluster.
pub fn cluster_vectors(
    vectors: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    min_cluster_size: usize,
    rng_seed: u64,
    exec: Exec,
) -> Clustering {
    let n = vectors.len();
    let single = |scores| Clustering {
        labels: vec![0; n],
        k: usize::from(n > 0),
        silhouette: None,
        scores,
    };
    if n < 3 {
        return single(Vec::new());
    }
    let dist = distance_matrix(vectors, exec);
    let hi = (*k_range.end()).min(n - 1);
    let lo = (*k_range.start()).max(2);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut scores = Vec::new();
    for k in lo..=hi {
        let mut labels = spherical_kmeans(vectors, k, rng_seed);
        merge_small_clusters(vectors, &mut labels, min_cluster_size);
        let Some(s) = silhouettes(&dist, &labels, exec) else {
            continue;
        };
        let mean = s.iter().sum::<f64>() / n as f64;
        scores.push((k, mean));
        if best.as_ref().is_none_or(|(b, _)| mean > *b) {
            best = Some((mean, labels));
        }
    }
    match best {
        Some((mean, labels)) if mean > 0.0 => {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            Clustering {
                labels,
                k,
                silhouette: Some(mean),
                scores,
            }
        }
        _ => single(scores),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        normalize(&mut v);
        v
    }

    #[test]
    fn brute_force_silhouette() {
        let vectors = vec![
            unit(&[1.0, 0.0]),
            unit(&[0.9, 0.1]),
            unit(&[0.1, 0.9]),
            unit(&[0.0, 1.0]),
        ];
        let labels = [0, 0, 1, 1];
        let dist = distance_matrix(&vectors, Exec::Sequential);
        let s = silhouettes(&dist, &labels, Exec::Sequential).unwrap();
        for i in 0..4 {
            let own: Vec<usize> = (0..4).filter(|&j| j != i && labels[j] == labels[i]).collect();
            let other: Vec<usize> = (0..4).filter(|&j| labels[j] != labels[i]).collect();
            let a = own.iter().map(|&j| dist[i][j]).sum::<f64>() / own.len() as f64;
            let b = other.iter().map(|&j| dist[i][j]).sum::<f64>() / other.len() as f64;
            assert!((s[i] - (b - a) / a.max(b)).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&s[i]));
        }
    }

    #[test]
    fn identical_points_fall_back_to_one_cluster() {
        let vectors = vec![unit(&[1.0, 1.0]); 6];
        let c = cluster_vectors(&vectors, 2..=4, 2, 3, Exec::Sequential);
        assert_eq!(c.k, 1);
        assert!(c.labels.iter().all(|&l| l == 0));
        assert!(c.silhouette.is_none());
    }

    #[test]
    fn singletons_are_merged() {
        let vectors = vec![
            unit(&[1.0, 0.0, 0.0]),
            unit(&[1.0, 0.1, 0.0]),
            unit(&[0.0, 1.0, 0.0]),
            unit(&[0.1, 1.0, 0.0]),
            unit(&[0.0, 0.2, 1.0]),
        ];
        let mut labels = vec![0, 0, 1, 1, 2];
        merge_small_clusters(&vectors, &mut labels, 2);
        assert_eq!(labels, [0, 0, 1, 1, 1]);
    }

    #[test]
    fn seeding_is_farthest_point() {
        let vectors = vec![unit(&[1.0, 0.0]), unit(&[1.0, 0.05]), unit(&[0.0, 1.0])];
        let centers = seed_centers(&vectors, 2, 5);
        assert_eq!(centers.len(), 2);
        let far = if centers[0] == 2 { 0 } else { 2 };
        assert_eq!(centers[1], far);
    }
}
