//! Theme naming by cluster-contrastive term weights.

const TOP_TERMS: usize = 10;
const LABEL_TERMS: usize = 3;

/// Ranks terms by mean in-theme weight minus mean out-of-theme weight over
/// the column's vectors. Returns the hyphen-joined top three as the label
/// and up to ten positively weighted terms.
pub fn label_theme(members: &[usize], vectors: &[Vec<f64>], terms: &[String]) -> (String, Vec<String>) {
    let weights = contrastive_weights(members, vectors, terms.len());
    let mut order: Vec<usize> = (0..terms.len()).filter(|&t| weights[t] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then_with(|| terms[a].cmp(&terms[b])));
    let top: Vec<String> = order.iter().take(TOP_TERMS).map(|&t| terms[t].clone()).collect();
    let label = top
        .iter()
        .take(LABEL_TERMS)
        .cloned()
        .collect::<Vec<_>>()
        .join("-");
    (label, top)
}

pub fn contrastive_weights(members: &[usize], vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut inside = vec![0.0; dim];
    let mut outside = vec![0.0; dim];
    let mut is_member = vec![false; vectors.len()];
    for &m in members {
        is_member[m] = true;
    }
    for (i, v) in vectors.iter().enumerate() {
        let target = if is_member[i] { &mut inside } else { &mut outside };
        for (x, y) in target.iter_mut().zip(v) {
            *x += y;
        }
    }
    let n_in = members.len().max(1) as f64;
    let n_out = vectors.len() - members.len();
    inside
        .iter()
        .zip(&outside)
        .map(|(i, o)| i / n_in - if n_out == 0 { 0.0 } else { o / n_out as f64 })
        .collect()
}
