//! Sentence-level segmentation of a page into schema columns.

use serde::{Deserialize, Serialize};

use super::{covered_positions, SeedLexicon, TopicModel};
use crate::corpus::TokenizedDoc;

/// One sentence settled into a schema column: the verbatim text and its
/// descriptive code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub attribute: String,
    pub sentence_index: usize,
    pub text: String,
    pub code: String,
    pub assignment_score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentParams {
    pub min_assignment_score: f64,
    pub seed_weight: f64,
    pub topic_weight: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            min_assignment_score: 0.2,
            seed_weight: 0.5,
            topic_weight: 0.5,
        }
    }
}

const CODE_TERMS: usize = 3;

/// Document-topic proportions used for inference; uniform when the document
/// was not part of the fit.
fn doc_topics(model: &TopicModel, doc_id: &str) -> Vec<f64> {
    match model.doc_index(doc_id) {
        Some(d) => model.theta[d].clone(),
        None => vec![1.0 / model.k as f64; model.k],
    }
}

/// Mean per-token topic posterior `theta_d[k] * phi[k][t]` over the
/// sentence's in-vocabulary tokens; `theta_d` when there are none.
fn sentence_topic_mass(tokens: &[String], model: &TopicModel, theta_d: &[f64]) -> Vec<f64> {
    let mut mass = vec![0.0; model.k];
    let mut n = 0usize;
    for tok in tokens {
        let Some(t) = model.term_index(tok) else { continue };
        let post: Vec<f64> = (0..model.k).map(|k| theta_d[k] * model.phi[k][t]).collect();
        let z: f64 = post.iter().sum();
        if z > 0.0 {
            for (m, p) in mass.iter_mut().zip(post) {
                *m += p / z;
            }
            n += 1;
        }
    }
    if n == 0 {
        return theta_d.to_vec();
    }
    mass.iter_mut().for_each(|m| *m /= n as f64);
    mass
}

/// Score of every sentence against every attribute, `[sentence][attribute]`.
///
/// The score is a convex combination of the fraction of sentence tokens
/// covered by the attribute's seed phrases and the sentence's topic mass
/// on the attribute's seeded topic. Weights are normalized to sum to one.
pub fn sentence_scores(
    doc: &TokenizedDoc,
    lexicon: &SeedLexicon,
    model: &TopicModel,
    params: &SegmentParams,
) -> Vec<Vec<f64>> {
    let theta_d = doc_topics(model, &doc.doc_id);
    let total = params.seed_weight + params.topic_weight;
    let (ws, wt) = (params.seed_weight / total, params.topic_weight / total);
    (0..doc.sentence_count())
        .map(|s| {
            let tokens = doc.sentence_tokens(s);
            let mass = sentence_topic_mass(tokens, model, &theta_d);
            lexicon
                .attributes
                .iter()
                .map(|attr| {
                    let covered = covered_positions(tokens, &attr.phrases)
                        .into_iter()
                        .filter(|&c| c)
                        .count();
                    let hit_rate = covered as f64 / tokens.len() as f64;
                    let topic = model.seed_map.get(&attr.name).copied();
                    let topic_mass = topic.map_or(0.0, |k| mass[k]);
                    ws * hit_rate + wt * topic_mass
                })
                .collect()
        })
        .collect()
}

/// Code label: the sentence's top terms ranked by the topic's phi, ties
/// broken alphabetically, hyphen-joined.
fn code_for(tokens: &[String], model: &TopicModel, topic: Option<usize>) -> String {
    let mut unique: Vec<&String> = tokens.iter().collect();
    unique.sort();
    unique.dedup();
    let weight = |t: &str| {
        topic
            .and_then(|k| model.term_index(t).map(|i| model.phi[k][i]))
            .unwrap_or(0.0)
    };
    unique.sort_by(|a, b| weight(b).total_cmp(&weight(a)).then_with(|| a.cmp(b)));
    unique
        .into_iter()
        .take(CODE_TERMS)
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join("-")
}

/// Assigns each sentence to its best-scoring attribute when that score
/// reaches `min_assignment_score`. Ties go to the attribute declared first.
pub fn segment_document(
    doc: &TokenizedDoc,
    plain_text: &str,
    lexicon: &SeedLexicon,
    model: &TopicModel,
    params: &SegmentParams,
) -> Vec<Segment> {
    let scores = sentence_scores(doc, lexicon, model, params);
    let mut out = Vec::new();
    for (s, row) in scores.iter().enumerate() {
        let Some((best, &score)) = row
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, &f64)>, (i, v)| match acc {
                Some((_, b)) if *v <= *b => acc,
                _ => Some((i, v)),
            })
        else {
            continue;
        };
        if score < params.min_assignment_score {
            continue;
        }
        let attr = &lexicon.attributes[best];
        let tokens = doc.sentence_tokens(s);
        out.push(Segment {
            doc_id: doc.doc_id.clone(),
            attribute: attr.name.clone(),
            sentence_index: s,
            text: doc.sentence_text(s, plain_text).to_string(),
            code: code_for(tokens, model, model.seed_map.get(&attr.name).copied()),
            assignment_score: score,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;
    use crate::extraction::lda::TopicParams;
    use crate::extraction::AttributeSeeds;
    use std::collections::BTreeMap;

    fn lexicon() -> SeedLexicon {
        SeedLexicon {
            attributes: vec![
                AttributeSeeds {
                    name: "issue".into(),
                    phrases: vec![vec!["timeout".into()], vec!["crash".into()]],
                },
                AttributeSeeds {
                    name: "cause".into(),
                    phrases: vec![vec!["load".into()], vec!["retry".into()]],
                },
            ],
        }
    }

    /// A model with uniform phi and theta over the given terms.
    fn uniform_model(terms: &[&str], k: usize, doc_id: &str) -> TopicModel {
        let mut terms: Vec<String> = terms.iter().map(|s| s.to_string()).collect();
        terms.sort();
        let v = terms.len();
        TopicModel {
            k,
            phi: vec![vec![1.0 / v as f64; v]; k],
            theta: vec![vec![1.0 / k as f64; k]],
            docs: vec![doc_id.into()],
            terms,
            seed_map: BTreeMap::from([("issue".into(), 0), ("cause".into(), 1)]),
            params: TopicParams::defaults_for(2, 0),
        }
    }

    #[test]
    fn pure_seed_sentence_goes_to_its_attribute() {
        let t = Tokenizer::default();
        let text = "Timeout crash timeout.";
        let doc = t.tokenize(text).with_id("d");
        let model = uniform_model(&["timeout", "crash", "load", "retry"], 4, "d");
        let segs = segment_document(&doc, text, &lexicon(), &model, &SegmentParams::default());
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].attribute, "issue");
        assert_eq!(segs[0].text, text);
        assert!((segs[0].assignment_score - (0.5 + 0.5 * 0.25)).abs() < 1e-12);
        assert_eq!(segs[0].code, "crash-timeout");
    }

    #[test]
    fn no_hits_and_uniform_mass_stays_unassigned() {
        let t = Tokenizer::default();
        let text = "Weather report sunny.";
        let doc = t.tokenize(text).with_id("d");
        let model = uniform_model(&["weather", "report", "sunny"], 4, "d");
        let segs = segment_document(&doc, text, &lexicon(), &model, &SegmentParams::default());
        assert!(segs.is_empty());
    }

    #[test]
    fn ties_go_to_first_attribute_and_rescaling_is_harmless() {
        let t = Tokenizer::default();
        let text = "timeout load";
        let doc = t.tokenize(text).with_id("d");
        let model = uniform_model(&["timeout", "load"], 2, "d");
        let p = SegmentParams::default();
        let segs = segment_document(&doc, text, &lexicon(), &model, &p);
        assert_eq!(segs[0].attribute, "issue");
        let scaled = SegmentParams {
            seed_weight: 7.0,
            topic_weight: 7.0,
            ..p
        };
        assert_eq!(segment_document(&doc, text, &lexicon(), &model, &scaled), segs);
    }
}
