//! Sparse document-term matrix and TF-IDF weighting.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::TokenizedDoc;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("every term was filtered out (min_df {min_df}, max_df_ratio {max_df_ratio}); revise the thresholds")]
    AllTermsFiltered { min_df: usize, max_df_ratio: f64 },
    #[error("malformed matrix file: {0}")]
    Parse(String),
}

/// Terms in lexicographic order with their document frequencies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub document_frequency: Vec<usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }
}

/// Sparse rows of `(term index, value)` pairs with ascending term index.
pub type SparseRows<T> = Vec<Vec<(usize, T)>>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentTermMatrix {
    pub docs: Vec<String>,
    pub vocab: Vocabulary,
    pub counts: SparseRows<u32>,
}

impl DocumentTermMatrix {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn count(&self, doc: usize, term: usize) -> u32 {
        self.counts[doc]
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.counts[doc][i].1)
            .unwrap_or(0)
    }

    pub fn row_sum(&self, doc: usize) -> u64 {
        self.counts[doc].iter().map(|&(_, c)| c as u64).sum()
    }

    /// Tab-separated `doc_id term count` lines sorted by doc id then term.
    pub fn to_triplets(&self) -> String {
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.sort_by(|&a, &b| self.docs[a].cmp(&self.docs[b]));
        let mut out = String::new();
        for d in order {
            for &(t, c) in &self.counts[d] {
                out.push_str(&format!("{}\t{}\t{}\n", self.docs[d], self.vocab.terms[t], c));
            }
        }
        out
    }

    /// Tab-separated `term df` lines in vocabulary order.
    pub fn vocab_tsv(&self) -> String {
        self.vocab
            .terms
            .iter()
            .zip(&self.vocab.document_frequency)
            .map(|(t, df)| format!("{t}\t{df}\n"))
            .collect()
    }

    /// Rebuilds a matrix from [`vocab_tsv`](Self::vocab_tsv) and
    /// [`to_triplets`](Self::to_triplets) output, with rows in `docs` order.
    pub fn from_files(docs: &[String], vocab_tsv: &str, triplets: &str) -> Result<Self, CorpusError> {
        let mut vocab = Vocabulary::default();
        for (i, line) in vocab_tsv.lines().enumerate() {
            let (term, df) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::Parse(format!("vocab line {}", i + 1)))?;
            let df = df
                .parse()
                .map_err(|_| CorpusError::Parse(format!("vocab line {} df", i + 1)))?;
            vocab.terms.push(term.to_string());
            vocab.document_frequency.push(df);
        }
        if vocab.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorpusError::Parse("vocabulary not strictly sorted".into()));
        }
        let row_of: HashMap<&str, usize> =
            docs.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let mut counts: SparseRows<u32> = vec![Vec::new(); docs.len()];
        for (i, line) in triplets.lines().enumerate() {
            let bad = || CorpusError::Parse(format!("triplet line {}", i + 1));
            let mut parts = line.split('\t');
            let (Some(d), Some(t), Some(c), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let row = *row_of.get(d).ok_or_else(bad)?;
            let term = vocab.index_of(t).ok_or_else(bad)?;
            let count: u32 = c.parse().map_err(|_| bad())?;
            counts[row].push((term, count));
        }
        for row in &mut counts {
            row.sort_unstable_by_key(|&(t, _)| t);
        }
        Ok(Self {
            docs: docs.to_vec(),
            vocab,
            counts,
        })
    }
}

pub fn build_matrix(
    corpus: &[TokenizedDoc],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<DocumentTermMatrix, CorpusError> {
    build_matrix_with(corpus, min_df, max_df_ratio, Exec::default())
}

/// Counts terms per document and keeps terms whose document frequency lies
/// in `[min_df, max_df_ratio * N]`.
pub fn build_matrix_with(
    corpus: &[TokenizedDoc],
    min_df: usize,
    max_df_ratio: f64,
    exec: Exec,
) -> Result<DocumentTermMatrix, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let per_doc: Vec<BTreeMap<&str, u32>> = exec.map(corpus, |doc| {
        let mut m = BTreeMap::new();
        for t in &doc.tokens {
            *m.entry(t.as_str()).or_insert(0) += 1;
        }
        m
    });

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &per_doc {
        for term in m.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    let vocab = {
        let mut v = Vocabulary::default();
        for (term, count) in df {
            if count >= min_df && count as f64 <= max_df_ratio * n {
                v.terms.push(term.to_string());
                v.document_frequency.push(count);
            }
        }
        v
    };
    if vocab.is_empty() {
        return Err(CorpusError::AllTermsFiltered {
            min_df,
            max_df_ratio,
        });
    }

    let counts = exec.map(&per_doc, |m| {
        m.iter()
            .filter_map(|(term, &c)| vocab.index_of(term).map(|i| (i, c)))
            .collect::<Vec<_>>()
    });
    Ok(DocumentTermMatrix {
        docs: corpus.iter().map(|d| d.doc_id.clone()).collect(),
        vocab,
        counts,
    })
}

/// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn tfidf(m: &DocumentTermMatrix) -> SparseRows<f64> {
    tfidf_with(m, Exec::default())
}

/// `count * idf`, then each row scaled to unit L2 norm. All-zero rows stay
/// empty.
pub fn tfidf_with(m: &DocumentTermMatrix, exec: Exec) -> SparseRows<f64> {
    let idfs: Vec<f64> = m
        .vocab
        .document_frequency
        .iter()
        .map(|&df| idf(m.n_docs(), df))
        .collect();
    exec.map(&m.counts, |row| {
        let mut weighted: Vec<(usize, f64)> =
            row.iter().map(|&(t, c)| (t, c as f64 * idfs[t])).collect();
        normalize_sparse(&mut weighted);
        weighted
    })
}

pub(crate) fn normalize_sparse(row: &mut [(usize, f64)]) {
    let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in row.iter_mut() {
            *w /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, tokens: &[&str]) -> TokenizedDoc {
        TokenizedDoc {
            doc_id: id.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            sentence_spans: vec![(0, tokens.len())],
            sentence_ranges: vec![(0, 0)],
        }
    }

    #[test]
    fn direct_counts() {
        let corpus = [doc("d1", &["a", "a", "b"]), doc("d2", &["b", "c"])];
        let m = build_matrix(&corpus, 1, 1.0).unwrap();
        assert_eq!(m.vocab.terms, ["a", "b", "c"]);
        let dense: Vec<Vec<u32>> = (0..2)
            .map(|d| (0..3).map(|t| m.count(d, t)).collect())
            .collect();
        assert_eq!(dense, [[2, 1, 0], [0, 1, 1]]);
        let m2 = build_matrix(&corpus, 2, 1.0).unwrap();
        assert_eq!(m2.vocab.terms, ["b"]);
    }

    #[test]
    fn errors() {
        assert_eq!(build_matrix(&[], 1, 1.0), Err(CorpusError::EmptyCorpus));
        let corpus = [doc("d1", &["a"]), doc("d2", &["b"])];
        assert!(matches!(
            build_matrix(&corpus, 2, 1.0),
            Err(CorpusError::AllTermsFiltered { .. })
        ));
    }

    #[test]
    fn tfidf_single_and_universal_terms() {
        let m = build_matrix(&[doc("d", &["x"])], 1, 1.0).unwrap();
        assert_eq!(tfidf(&m), vec![vec![(0, 1.0)]]);
        assert_eq!(idf(5, 5), 1.0);
    }

    #[test]
    fn zero_rows_stay_zero() {
        let corpus = [doc("d1", &["a", "b"]), doc("d2", &["a", "b"]), doc("d3", &["z"])];
        let m = build_matrix(&corpus, 2, 1.0).unwrap();
        let w = tfidf(&m);
        assert!(w[2].is_empty());
    }

    #[test]
    fn files_round_trip() {
        let corpus = [doc("d2", &["b", "c", "c"]), doc("d1", &["a", "a", "b"])];
        let m = build_matrix(&corpus, 1, 1.0).unwrap();
        let triplets = m.to_triplets();
        assert!(triplets.starts_with("d1\ta\t2\n"));
        let back = DocumentTermMatrix::from_files(&m.docs, &m.vocab_tsv(), &triplets).unwrap();
        assert_eq!(back, m);
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<TokenizedDoc>> {
        proptest::collection::vec(proptest::collection::vec("[a-f]", 0..12), 1..10).prop_map(|docs| {
            docs.into_iter()
                .enumerate()
                .map(|(i, toks)| {
                    let t: Vec<&str> = toks.iter().map(String::as_str).collect();
                    doc(&format!("d{i:02}"), &t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn row_sums_match_recount(corpus in corpus_strategy(), min_df in 1usize..3) {
            if let Ok(m) = build_matrix(&corpus, min_df, 1.0) {
                for (d, doc) in corpus.iter().enumerate() {
                    let retained = doc.tokens.iter().filter(|t| m.vocab.index_of(t).is_some()).count();
                    prop_assert_eq!(m.row_sum(d), retained as u64);
                }
                for row in tfidf(&m) {
                    if !row.is_empty() {
                        let norm: f64 = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                        prop_assert!((norm - 1.0).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn permuting_docs_permutes_rows(corpus in corpus_strategy(), shift in 0usize..10) {
            let m = build_matrix(&corpus, 1, 0.9);
            let mut rotated = corpus.clone();
            let k = shift % rotated.len();
            rotated.rotate_left(k);
            let r = build_matrix(&rotated, 1, 0.9);
            match (m, r) {
                (Ok(m), Ok(r)) => {
                    prop_assert_eq!(&m.vocab, &r.vocab);
                    for i in 0..corpus.len() {
                        prop_assert_eq!(&m.counts[(i + k) % corpus.len()], &r.counts[i]);
                    }
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false, "one permutation failed"),
            }
        }

        #[test]
        fn exec_modes_agree(corpus in corpus_strategy()) {
            if let Ok(m) = build_matrix_with(&corpus, 1, 1.0, Exec::Sequential) {
                let p = build_matrix_with(&corpus, 1, 1.0, Exec::Parallel).unwrap();
                prop_assert_eq!(&m, &p);
                prop_assert_eq!(tfidf_with(&m, Exec::Sequential), tfidf_with(&p, Exec::Parallel));
            }
        }
    }
}
