//! Latent Dirichlet allocation by collapsed Gibbs sampling, supervised by
//! seeded asymmetric topic-word priors.
//!
//! Attribute `i` of the schema owns topic `i`. Each seed token of that
//! attribute gets prior weight `beta * seed_boost` in topic `i` and `beta`
//! everywhere else, and seed tokens start the chain in their own topic.
//! Topics beyond the schema size absorb background vocabulary.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SeedLexicon;
use crate::corpus::DocumentTermMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed_boost: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl TopicParams {
    /// Defaults for a schema of `n_attributes`: `K = n + 2`, `alpha = 50/K`,
    /// `beta = 0.01`, `seed_boost = 25`, 1000 iterations.
    pub fn defaults_for(n_attributes: usize, rng_seed: u64) -> Self {
        let k = n_attributes + 2;
        Self {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            seed_boost: 25.0,
            iterations: 1000,
            rng_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub terms: Vec<String>,
    pub docs: Vec<String>,
    /// Topic x term probabilities.
    pub phi: Vec<Vec<f64>>,
    /// Document x topic probabilities.
    pub theta: Vec<Vec<f64>>,
    /// Attribute name to its seeded topic.
    pub seed_map: BTreeMap<String, usize>,
    pub params: TopicParams,
}

impl TopicModel {
    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.docs.iter().position(|d| d == doc_id)
    }

    /// The `n` most probable terms of topic `k`, ties broken by term.
    pub fn top_terms(&self, k: usize, n: usize) -> Vec<(String, f64)> {
        let mut idx: Vec<usize> = (0..self.terms.len()).collect();
        idx.sort_by(|&a, &b| {
            self.phi[k][b]
                .total_cmp(&self.phi[k][a])
                .then_with(|| self.terms[a].cmp(&self.terms[b]))
        });
        idx.into_iter()
            .take(n)
            .map(|t| (self.terms[t].clone(), self.phi[k][t]))
            .collect()
    }

    /// Position of `term` in topic `k`'s ranking (0 = most probable).
    pub fn rank_of(&self, k: usize, term: &str) -> Option<usize> {
        let t = self.term_index(term)?;
        let p = self.phi[k][t];
        Some(
            (0..self.terms.len())
                .filter(|&o| {
                    let q = self.phi[k][o];
                    q > p || (q == p && self.terms[o] < self.terms[t])
                })
                .count(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("topic count {k} is smaller than the schema size {schema}")]
    TooFewTopics { k: usize, schema: usize },
    #[error("document-term matrix is empty")]
    EmptyMatrix,
    #[error("invalid topic hyperparameter: {0}")]
    BadParameter(String),
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: TopicModel,
    /// Attributes none of whose seed terms survived into the vocabulary.
    pub warnings: Vec<String>,
}

pub fn fit_topics(
    m: &DocumentTermMatrix,
    lexicon: &SeedLexicon,
    params: TopicParams,
) -> Result<FitOutcome, TopicError> {
    let k_topics = params.k;
    if k_topics < lexicon.len() {
        return Err(TopicError::TooFewTopics {
            k: k_topics,
            schema: lexicon.len(),
        });
    }
    if k_topics == 0 {
        return Err(TopicError::BadParameter("k must be >= 1".into()));
    }
    if m.n_docs() == 0 || m.n_terms() == 0 {
        return Err(TopicError::EmptyMatrix);
    }
    if !(params.alpha > 0.0 && params.beta > 0.0 && params.seed_boost > 0.0) {
        return Err(TopicError::BadParameter(
            "alpha, beta and seed_boost must be positive".into(),
        ));
    }

    let n_terms = m.n_terms();
    // Word-major layout: prior and counts for term w, topic k at w * K + k.
    let mut prior = vec![params.beta; n_terms * k_topics];
    let mut warnings = Vec::new();
    let mut seed_map = BTreeMap::new();
    let mut seed_topic: Vec<Option<usize>> = vec![None; n_terms];
    for (topic, attr) in lexicon.attributes.iter().enumerate() {
        seed_map.insert(attr.name.clone(), topic);
        let mut any = false;
        for token in attr.phrases.iter().flatten() {
            if let Some(w) = m.vocab.index_of(token) {
                prior[w * k_topics + topic] = params.beta * params.seed_boost;
                seed_topic[w].get_or_insert(topic);
                any = true;
            }
        }
        if !any {
            warnings.push(format!(
                "no seed term of attribute \"{}\" is in the vocabulary",
                attr.name
            ));
        }
    }
    let mut prior_sum = vec![0.0; k_topics];
    for w in 0..n_terms {
        for (k, s) in prior_sum.iter_mut().enumerate() {
            *s += prior[w * k_topics + k];
        }
    }

    let words: Vec<Vec<usize>> = m
        .counts
        .iter()
        .map(|row| {
            row.iter()
                .flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut n_wk = vec![0u32; n_terms * k_topics];
    let mut n_dk = vec![0u32; m.n_docs() * k_topics];
    let mut n_k = vec![0u32; k_topics];
    let mut z: Vec<Vec<usize>> = words
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let k = seed_topic[w].unwrap_or_else(|| rng.random_range(0..k_topics));
                    n_wk[w * k_topics + k] += 1;
                    n_dk[d * k_topics + k] += 1;
                    n_k[k] += 1;
                    k
                })
                .collect()
        })
        .collect();

    let mut p = vec![0.0f64; k_topics];
    for _ in 0..params.iterations {
        for (d, doc) in words.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                n_wk[w * k_topics + old] -= 1;
                n_dk[d * k_topics + old] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for (k, pk) in p.iter_mut().enumerate() {
                    let wk = w * k_topics + k;
                    total += (n_dk[d * k_topics + k] as f64 + params.alpha)
                        * (n_wk[wk] as f64 + prior[wk])
                        / (n_k[k] as f64 + prior_sum[k]);
                    *pk = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(k_topics - 1);

                z[d][i] = new;
                n_wk[w * k_topics + new] += 1;
                n_dk[d * k_topics + new] += 1;
                n_k[new] += 1;
            }
        }
    }

    let phi = (0..k_topics)
        .map(|k| {
            let denom = n_k[k] as f64 + prior_sum[k];
            (0..n_terms)
                .map(|w| (n_wk[w * k_topics + k] as f64 + prior[w * k_topics + k]) / denom)
                .collect()
        })
        .collect();
    let theta = words
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let denom = doc.len() as f64 + k_topics as f64 * params.alpha;
            (0..k_topics)
                .map(|k| (n_dk[d * k_topics + k] as f64 + params.alpha) / denom)
                .collect()
        })
        .collect();

    Ok(FitOutcome {
        model: TopicModel {
            k: k_topics,
            terms: m.vocab.terms.clone(),
            docs: m.docs.clone(),
            phi,
            theta,
            seed_map,
            params,
        },
        warnings,
    })
}
