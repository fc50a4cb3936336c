//! Schema-supervised extraction: relevance selection, seeded topic model,
//! sentence segmentation into schema columns and the evidence table.

pub mod lda;
pub mod relevance;
pub mod segment;
pub mod table;

pub use lda::{fit_topics, FitOutcome, TopicError, TopicModel, TopicParams};
pub use relevance::{score_relevance, CompiledCriteria, RelevanceScore};
pub use segment::{segment_document, sentence_scores, Segment, SegmentParams};
pub use table::{build_evidence_table, EvidenceCell, EvidenceRow, EvidenceTable, TableError};

use crate::corpus::Tokenizer;
use crate::protocol::SchemaAttribute;

/// Seed phrases of one attribute, tokenized like document text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeSeeds {
    pub name: String,
    pub phrases: Vec<Vec<String>>,
}

/// Tokenized seed terms for every schema attribute, in schema order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedLexicon {
    pub attributes: Vec<AttributeSeeds>,
}

impl SeedLexicon {
    pub fn from_schema(schema: &[SchemaAttribute], tokenizer: &Tokenizer) -> Self {
        Self {
            attributes: schema
                .iter()
                .map(|a| AttributeSeeds {
                    name: a.name.clone(),
                    phrases: compile_phrases(&a.seed_terms, tokenizer),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

/// Tokenizes phrases, dropping those that leave no tokens.
pub fn compile_phrases(terms: &[String], tokenizer: &Tokenizer) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = terms
        .iter()
        .map(|t| tokenizer.terms(t))
        .filter(|p| !p.is_empty())
        .collect();
    out.dedup();
    out
}

/// Occurrences of `phrase` in `tokens`, overlaps included.
pub fn count_phrase(tokens: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return 0;
    }
    tokens.windows(phrase.len()).filter(|w| *w == phrase).count()
}

/// Marks every token position covered by some occurrence of a phrase.
pub fn covered_positions(tokens: &[String], phrases: &[Vec<String>]) -> Vec<bool> {
    let mut covered = vec![false; tokens.len()];
    for phrase in phrases {
        if phrase.is_empty() || phrase.len() > tokens.len() {
            continue;
        }
        for start in 0..=tokens.len() - phrase.len() {
            if tokens[start..start + phrase.len()] == phrase[..] {
                covered[start..start + phrase.len()].iter_mut().for_each(|c| *c = true);
            }
        }
    }
    covered
}
