//! Nearest-centroid categorization for columns with predefined categories.

use super::space::{dot, normalize};

/// A near-tie between the best and runner-up candidate for one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    pub index: usize,
    pub best: usize,
    pub runner_up: usize,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Category per vector, `None` when below the similarity floor.
    pub labels: Vec<Option<usize>>,
    pub near_ties: Vec<Margin>,
}

pub const NEAR_TIE_MARGIN: f64 = 0.02;

fn assign(vectors: &[Vec<f64>], centroids: &[Vec<f64>], floor: f64) -> Assignment {
    let mut labels = Vec::with_capacity(vectors.len());
    let mut near_ties = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let sims: Vec<f64> = centroids.iter().map(|c| dot(v, c)).collect();
        let mut best = 0;
        for (c, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = c;
            }
        }
        if sims.is_empty() || sims[best] < floor || sims[best] <= 0.0 {
            labels.push(None);
            continue;
        }
        labels.push(Some(best));
        if let Some((runner_up, s2)) = sims
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != best)
            .fold(None, |acc: Option<(usize, f64)>, (c, &s)| match acc {
                Some((_, b)) if s <= b => acc,
                _ => Some((c, s)),
            })
        {
            if sims[best] - s2 < NEAR_TIE_MARGIN {
                near_ties.push(Margin {
                    index: i,
                    best,
                    runner_up,
                    margin: sims[best] - s2,
                });
            }
        }
    }
    Assignment { labels, near_ties }
}

/// Assigns unit vectors to the most cosine-similar category.
///
/// Centroids start as the normalized seed vectors, are refined once by
/// averaging in the members of the first assignment, and the final
/// assignment uses the refined centroids. Similarities below `floor` (or
/// zero) leave a vector unassigned; ties go to the earlier category.
pub fn nearest_centroid(vectors: &[Vec<f64>], seeds: &[Vec<f64>], floor: f64) -> Assignment {
    let mut centroids: Vec<Vec<f64>> = seeds
        .iter()
        .map(|s| {
            let mut c = s.clone();
            normalize(&mut c);
            c
        })
        .collect();
    let first = assign(vectors, &centroids, floor);
    for (c, centroid) in centroids.iter_mut().enumerate() {
        let members: Vec<&Vec<f64>> = first
            .labels
            .iter()
            .zip(vectors)
            .filter(|(l, _)| **l == Some(c))
            .map(|(_, v)| v)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = (members.len() + 1) as f64;
        for (d, x) in centroid.iter_mut().enumerate() {
            *x = (*x + members.iter().map(|m| m[d]).sum::<f64>()) / n;
        }
        normalize(centroid);
    }
    assign(vectors, &centroids, floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vector_wins_and_orthogonal_is_unassigned() {
        let seeds = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let vectors = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let a = nearest_centroid(&vectors, &seeds, 0.05);
        assert_eq!(a.labels, [Some(0), None]);
    }

    #[test]
    fn ties_prefer_declaration_order_and_are_logged() {
        let seeds = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let a = nearest_centroid(&[vec![1.0, 0.0]], &seeds, 0.05);
        assert_eq!(a.labels, [Some(0)]);
        assert_eq!(a.near_ties.len(), 1);
    }

    #[test]
    fn duplicated_seed_list_changes_nothing() {
        let seeds = vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]];
        let doubled = vec![vec![2.0, 2.0, 0.0], vec![0.0, 0.0, 4.0]];
        let vectors = vec![vec![0.6, 0.8, 0.0], vec![0.0, 0.6, 0.8], vec![0.0, 0.0, 1.0]];
        assert_eq!(
            nearest_centroid(&vectors, &seeds, 0.05),
            nearest_centroid(&vectors, &doubled, 0.05)
        );
    }
}
