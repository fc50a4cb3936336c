//! Search-string evaluation against a quasi-gold standard.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::search::SearchResultRecord;

/// Sensitivity and QGS-precision of one search string.
///
/// Precision is computed against QGS membership only, since full relevance
/// judgments do not exist before screening.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QgsScore {
    pub sensitivity: f64,
    pub precision: f64,
    pub retrieved_count: usize,
    pub qgs_hit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("quasi-gold standard is empty")]
pub struct EmptyQgs;

pub fn evaluate_search_string(
    records: &[SearchResultRecord],
    qgs: &BTreeSet<String>,
) -> Result<QgsScore, EmptyQgs> {
    evaluate_urls(records.iter().map(|r| r.url.as_str()), qgs)
}

/// Scores a set of retrieved normalized URLs. Duplicates count once.
pub fn evaluate_urls<'a>(
    retrieved: impl IntoIterator<Item = &'a str>,
    qgs: &BTreeSet<String>,
) -> Result<QgsScore, EmptyQgs> {
    if qgs.is_empty() {
        return Err(EmptyQgs);
    }
    let retrieved: BTreeSet<&str> = retrieved.into_iter().collect();
    let hits = retrieved.iter().filter(|u| qgs.contains(**u)).count();
    let precision = if retrieved.is_empty() {
        0.0
    } else {
        hits as f64 / retrieved.len() as f64
    };
    Ok(QgsScore {
        sensitivity: hits as f64 / qgs.len() as f64,
        precision,
        retrieved_count: retrieved.len(),
        qgs_hit_count: hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity() {
        let q = set(&["a", "b", "c"]);
        let s = evaluate_urls(["a", "b", "c"], &q).unwrap();
        assert_eq!((s.sensitivity, s.precision), (1.0, 1.0));
    }

    #[test]
    fn half_and_half() {
        let q = set(&["a", "b", "c", "d"]);
        let s = evaluate_urls(["a", "b", "x", "y"], &q).unwrap();
        assert_eq!((s.sensitivity, s.precision), (0.5, 0.5));
        assert_eq!((s.retrieved_count, s.qgs_hit_count), (4, 2));
    }

    #[test]
    fn empty_retrieved_and_empty_qgs() {
        let s = evaluate_urls([], &set(&["a"])).unwrap();
        assert_eq!((s.sensitivity, s.precision), (0.0, 0.0));
        assert_eq!(evaluate_urls(["a"], &BTreeSet::new()), Err(EmptyQgs));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_monotone(
            retrieved in proptest::collection::vec("[a-f]", 0..8),
            qgs in proptest::collection::btree_set("[a-h]", 1..6),
            seed in any::<u64>(),
        ) {
            let base = evaluate_urls(retrieved.iter().map(String::as_str), &qgs).unwrap();
            let mut shuffled = retrieved.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.reverse();
            }
            let again = evaluate_urls(shuffled.iter().map(String::as_str), &qgs).unwrap();
            prop_assert_eq!(base, again);
            for member in &qgs {
                let mut more = retrieved.clone();
                more.push(member.clone());
                let s = evaluate_urls(more.iter().map(String::as_str), &qgs).unwrap();
                prop_assert!(s.sensitivity >= base.sensitivity);
                prop_assert!(s.qgs_hit_count >= base.qgs_hit_count);
                prop_assert!((0.0..=1.0).contains(&s.precision));
            }
        }
    }
}
