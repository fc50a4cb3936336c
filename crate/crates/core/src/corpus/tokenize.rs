//! Word and sentence segmentation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::stopwords;
use crate::protocol::TextConfig;

/// A tokenized document.
///
/// `sentence_spans[i]` is the half-open token range of sentence `i` and
/// `sentence_ranges[i]` its byte range in the source text. Sentences that
/// keep no tokens are dropped, so the spans cover all tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub sentence_spans: Vec<(usize, usize)>,
    pub sentence_ranges: Vec<(usize, usize)>,
}

impl TokenizedDoc {
    pub fn with_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self
    }

    pub fn sentence_tokens(&self, i: usize) -> &[String] {
        let (s, e) = self.sentence_spans[i];
        &self.tokens[s..e]
    }

    /// Verbatim text of sentence `i` in `source`.
    pub fn sentence_text<'a>(&self, i: usize, source: &'a str) -> &'a str {
        let (s, e) = self.sentence_ranges[i];
        &source[s..e]
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_spans.len()
    }
}

#[derive(Clone, Debug)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
    min_token_length: usize,
    stem: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new(stopwords::ENGLISH.iter().map(|s| s.to_string()), 2, false)
    }
}

impl Tokenizer {
    pub fn new(stopwords: impl IntoIterator<Item = String>, min_token_length: usize, stem: bool) -> Self {
        Self {
            stopwords: stopwords.into_iter().map(|w| w.to_lowercase()).collect(),
            min_token_length,
            stem,
        }
    }

    pub fn from_config(cfg: &TextConfig) -> Self {
        match &cfg.stopwords {
            Some(list) => Self::new(list.iter().cloned(), cfg.min_token_length, cfg.stem),
            None => Self::new(
                stopwords::ENGLISH.iter().map(|s| s.to_string()),
                cfg.min_token_length,
                cfg.stem,
            ),
        }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Tokens of a seed term or phrase, processed exactly like document text.
    pub fn terms(&self, phrase: &str) -> Vec<String> {
        self.tokenize(phrase).tokens
    }

    pub fn tokenize(&self, text: &str) -> TokenizedDoc {
        let mut doc = TokenizedDoc::default();
        for (start, end) in sentence_ranges(text) {
            let first = doc.tokens.len();
            for word in words(&text[start..end]) {
                if let Some(tok) = self.accept(word) {
                    doc.tokens.push(tok);
                }
            }
            if doc.tokens.len() > first {
                doc.sentence_spans.push((first, doc.tokens.len()));
                doc.sentence_ranges.push((start, end));
            }
        }
        doc
    }

    fn accept(&self, word: &str) -> Option<String> {
        let lower: String = word
            .chars()
            .flat_map(char::to_lowercase)
            .filter(|c| c.is_alphanumeric())
            .collect();
        if lower.chars().count() < self.min_token_length || self.stopwords.contains(&lower) {
            return None;
        }
        Some(if self.stem { super::stem::stem(&lower) } else { lower })
    }
}

/// Tokenizes with an explicit stopword list and no stemming.
pub fn tokenize(text: &str, stopwords: &HashSet<String>, min_token_length: usize) -> TokenizedDoc {
    Tokenizer::new(stopwords.iter().cloned(), min_token_length, false).tokenize(text)
}

/// Maximal runs of alphanumeric characters.
fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty())
}

/// Trimmed, non-empty sentence byte ranges. Sentences end at a newline or
/// at `.`, `!` or `?` followed by whitespace or end of text.
fn sentence_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let end = match c {
            '\n' | '\r' => Some(i),
            '.' | '!' | '?' => match chars.peek() {
                None => Some(i + 1),
                Some((_, next)) if next.is_whitespace() => Some(i + 1),
                _ => None,
            },
            _ => None,
        };
        if let Some(end) = end {
            push_trimmed(text, start, end, &mut out);
            start = if c == '\n' || c == '\r' { i + 1 } else { end };
        }
    }
    push_trimmed(text, start, text.len(), &mut out);
    out
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    if start >= end {
        return;
    }
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        out.push((start + lead, start + lead + trimmed.len()));
    }
}
