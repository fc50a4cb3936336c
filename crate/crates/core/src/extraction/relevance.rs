//! Relevance selection from schema-attribute word frequencies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{compile_phrases, count_phrase, SeedLexicon};
use crate::corpus::{TokenizedDoc, Tokenizer};
use crate::protocol::InclusionCriteria;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub doc_id: String,
    pub per_attribute_hits: BTreeMap<String, usize>,
    /// Fraction of schema attributes with at least one seed hit.
    pub score: f64,
    pub token_count: usize,
    pub selected: bool,
}

/// Inclusion criteria with their term lists tokenized.
#[derive(Clone, Debug)]
pub struct CompiledCriteria {
    pub min_token_count: usize,
    pub relevance_threshold: f64,
    pub required: Vec<Vec<String>>,
    pub excluded: Vec<Vec<String>>,
}

impl CompiledCriteria {
    pub fn new(criteria: &InclusionCriteria, tokenizer: &Tokenizer) -> Self {
        Self {
            min_token_count: criteria.min_token_count,
            relevance_threshold: criteria.relevance_threshold,
            required: compile_phrases(&criteria.required_terms, tokenizer),
            excluded: compile_phrases(&criteria.excluded_terms, tokenizer),
        }
    }
}

pub fn score_relevance(
    doc: &TokenizedDoc,
    lexicon: &SeedLexicon,
    criteria: &CompiledCriteria,
) -> RelevanceScore {
    let per_attribute_hits: BTreeMap<String, usize> = lexicon
        .attributes
        .iter()
        .map(|a| {
            let hits = a.phrases.iter().map(|p| count_phrase(&doc.tokens, p)).sum();
            (a.name.clone(), hits)
        })
        .collect();
    let covered = per_attribute_hits.values().filter(|&&h| h > 0).count();
    let score = if lexicon.is_empty() {
        0.0
    } else {
        covered as f64 / lexicon.len() as f64
    };
    let token_count = doc.tokens.len();
    let required_ok = criteria
        .required
        .iter()
        .all(|p| count_phrase(&doc.tokens, p) > 0);
    let excluded_ok = criteria
        .excluded
        .iter()
        .all(|p| count_phrase(&doc.tokens, p) == 0);
    let selected = score >= criteria.relevance_threshold
        && token_count >= criteria.min_token_count
        && required_ok
        && excluded_ok;
    RelevanceScore {
        doc_id: doc.doc_id.clone(),
        per_attribute_hits,
        score,
        token_count,
        selected,
    }
}
