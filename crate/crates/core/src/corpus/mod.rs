//! Tokenization, vocabulary, document-term matrix and TF-IDF.

pub mod matrix;
pub mod stem;
pub mod stopwords;
pub mod tokenize;

pub use matrix::{
    build_matrix, build_matrix_with, idf, tfidf, tfidf_with, CorpusError, DocumentTermMatrix,
    SparseRows, Vocabulary,
};
pub use tokenize::{tokenize, TokenizedDoc, Tokenizer};

use crate::exec::Exec;

/// Tokenizes `(doc_id, text)` pairs, preserving input order.
pub fn tokenize_all(tokenizer: &Tokenizer, docs: &[(String, String)], exec: Exec) -> Vec<TokenizedDoc> {
    exec.map(docs, |(id, text)| tokenizer.tokenize(text).with_id(id.clone()))
}
