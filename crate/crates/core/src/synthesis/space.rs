//! Per-column TF-IDF vector space.

use std::collections::BTreeMap;

use crate::corpus::idf;

/// Dense, L2-normalized TF-IDF vectors for the segments of one column.
///
/// The vocabulary is every term of the column (no frequency filtering);
/// idf uses the column's segment count.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSpace {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl ColumnSpace {
    pub fn build(docs: &[Vec<String>]) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let idf_values: Vec<f64> = df.values().map(|&d| idf(docs.len(), d)).collect();
        let mut space = Self {
            terms,
            idf: idf_values,
            vectors: Vec::new(),
        };
        space.vectors = docs.iter().map(|d| space.vectorize(d)).collect();
        space
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// Normalized TF-IDF vector of `tokens`; tokens outside the column
    /// vocabulary are ignored.
    pub fn vectorize(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for t in tokens {
            if let Ok(i) = self.terms.binary_search(t) {
                v[i] += self.idf[i];
            }
        }
        normalize(&mut v);
        v
    }
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
