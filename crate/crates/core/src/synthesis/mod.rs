//! Theme synthesis: collapses each evidence column's segments into themes,
//! by nearest-centroid categorization for categorical attributes and by
//! spherical k-means for open ones.

pub mod categorize;
pub mod cluster;
pub mod label;
pub mod space;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use categorize::{nearest_centroid, Assignment, NEAR_TIE_MARGIN};
pub use cluster::{cluster_vectors, silhouettes, spherical_kmeans, Clustering};
pub use label::label_theme;
pub use space::ColumnSpace;

use crate::corpus::Tokenizer;
use crate::exec::Exec;
use crate::extraction::{EvidenceTable, Segment};
use crate::protocol::{AttributeMode, ReviewProtocol, SchemaAttribute, SynthesisConfig};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentRef {
    pub doc_id: String,
    pub sentence_index: usize,
}

impl SegmentRef {
    pub fn of(s: &Segment) -> Self {
        Self {
            doc_id: s.doc_id.clone(),
            sentence_index: s.sentence_index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThemeOrigin {
    Categorical,
    Clustered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theme {
    pub attribute: String,
    pub label: String,
    pub member_refs: Vec<SegmentRef>,
    pub top_terms: Vec<String>,
    pub origin: ThemeOrigin,
}

/// A segment whose best and second-best theme scored within
/// [`NEAR_TIE_MARGIN`] cosine of each other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearTie {
    pub member: SegmentRef,
    pub assigned: String,
    pub runner_up: String,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnThemes {
    pub attribute: String,
    pub themes: Vec<Theme>,
    pub unassigned: Vec<SegmentRef>,
    pub near_ties: Vec<NearTie>,
    /// Number of clusters chosen for open columns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<f64>,
}

impl ColumnThemes {
    fn empty(attribute: &str) -> Self {
        Self {
            attribute: attribute.to_string(),
            themes: Vec::new(),
            unassigned: Vec::new(),
            near_ties: Vec::new(),
            chosen_k: None,
            silhouette: None,
        }
    }

    pub fn theme(&self, label: &str) -> Option<&Theme> {
        self.themes.iter().find(|t| t.label == label)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThemeSet {
    pub columns: Vec<ColumnThemes>,
}

impl ThemeSet {
    pub fn column(&self, attribute: &str) -> Option<&ColumnThemes> {
        self.columns.iter().find(|c| c.attribute == attribute)
    }

    pub fn themes(&self) -> impl Iterator<Item = &Theme> {
        self.columns.iter().flat_map(|c| c.themes.iter())
    }

    pub fn theme(&self, attribute: &str, label: &str) -> Option<&Theme> {
        self.column(attribute).and_then(|c| c.theme(label))
    }

    /// Per-column audit CSV: `theme_label, doc_id, sentence_index, code`,
    /// with unassigned segments labelled `(unassigned)`.
    pub fn column_csv(&self, attribute: &str, table: &EvidenceTable) -> Result<String, SynthesisError> {
        let column = self
            .column(attribute)
            .ok_or_else(|| SynthesisError::UnknownAttribute(attribute.to_string()))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| SynthesisError::Csv(e.to_string());
        w.write_record(["theme_label", "doc_id", "sentence_index", "code"])
            .map_err(err)?;
        let rows = column
            .themes
            .iter()
            .flat_map(|t| t.member_refs.iter().map(move |r| (t.label.as_str(), r)))
            .chain(column.unassigned.iter().map(|r| ("(unassigned)", r)));
        for (label, r) in rows {
            let code = table
                .find(&r.doc_id, r.sentence_index)
                .map(|s| s.code.as_str())
                .unwrap_or_default();
            w.write_record([label, &r.doc_id, &r.sentence_index.to_string(), code])
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| SynthesisError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthesisError {
    #[error("attribute {0} is not categorical")]
    NotCategorical(String),
    #[error("attribute {0} is not open")]
    NotOpen(String),
    #[error("empty k range for attribute {0}")]
    EmptyKRange(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Segments in canonical `(doc_id, sentence_index)` order with their tokens.
fn canonical<'a>(cells: &[&'a Segment], tokenizer: &Tokenizer) -> (Vec<&'a Segment>, Vec<Vec<String>>) {
    let mut sorted: Vec<&Segment> = cells.to_vec();
    sorted.sort_by(|a, b| (&a.doc_id, a.sentence_index).cmp(&(&b.doc_id, b.sentence_index)));
    let tokens = sorted.iter().map(|s| tokenizer.tokenize(&s.text).tokens).collect();
    (sorted, tokens)
}

/// Makes labels unique within a column by suffixing repeats.
fn unique_label(label: String, taken: &mut BTreeSet<String>, fallback_index: usize) -> String {
    let base = if label.is_empty() {
        format!("theme-{}", fallback_index + 1)
    } else {
        label
    };
    let mut candidate = base.clone();
    let mut n = 2;
    while !taken.insert(candidate.clone()) {
        candidate = format!("{base}-{n}");
        n += 1;
    }
    candidate
}

/// Assigns each segment of a categorical column to its nearest category.
pub fn categorize_column(
    attribute: &SchemaAttribute,
    cells: &[&Segment],
    tokenizer: &Tokenizer,
    similarity_floor: f64,
) -> Result<ColumnThemes, SynthesisError> {
    if attribute.mode != AttributeMode::Categorical {
        return Err(SynthesisError::NotCategorical(attribute.name.clone()));
    }
    let (segments, tokens) = canonical(cells, tokenizer);
    let space = ColumnSpace::build(&tokens);
    let seeds: Vec<Vec<f64>> = attribute
        .categories
        .iter()
        .map(|c| {
            let toks: Vec<String> = c.seed_terms.iter().flat_map(|t| tokenizer.terms(t)).collect();
            space.vectorize(&toks)
        })
        .collect();
    let assignment = nearest_centroid(&space.vectors, &seeds, similarity_floor);

    let mut out = ColumnThemes::empty(&attribute.name);
    for (c, category) in attribute.categories.iter().enumerate() {
        let members: Vec<usize> = (0..segments.len())
            .filter(|&i| assignment.labels[i] == Some(c))
            .collect();
        if members.is_empty() {
            continue;
        }
        let (_, top_terms) = label_theme(&members, &space.vectors, &space.terms);
        out.themes.push(Theme {
            attribute: attribute.name.clone(),
            label: category.label.clone(),
            member_refs: members.iter().map(|&i| SegmentRef::of(segments[i])).collect(),
            top_terms,
            origin: ThemeOrigin::Categorical,
        });
    }
    out.unassigned = (0..segments.len())
        .filter(|&i| assignment.labels[i].is_none())
        .map(|i| SegmentRef::of(segments[i]))
        .collect();
    out.near_ties = assignment
        .near_ties
        .iter()
        .map(|m| NearTie {
            member: SegmentRef::of(segments[m.index]),
            assigned: attribute.categories[m.best].label.clone(),
            runner_up: attribute.categories[m.runner_up].label.clone(),
            margin: m.margin,
        })
        .collect();
    log_near_ties(&out);
    Ok(out)
}

/// Clusters the segments of an open column into themes.
pub fn cluster_column(
    attribute: &SchemaAttribute,
    cells: &[&Segment],
    tokenizer: &Tokenizer,
    cfg: &SynthesisConfig,
    rng_seed: u64,
    exec: Exec,
) -> Result<ColumnThemes, SynthesisError> {
    if attribute.mode != AttributeMode::Open {
        return Err(SynthesisError::NotOpen(attribute.name.clone()));
    }
    if cfg.k_min > cfg.k_max {
        return Err(SynthesisError::EmptyKRange(attribute.name.clone()));
    }
    let mut out = ColumnThemes::empty(&attribute.name);
    if cells.is_empty() {
        return Ok(out);
    }
    let (segments, tokens) = canonical(cells, tokenizer);
    let space = ColumnSpace::build(&tokens);
    let clustering = cluster_vectors(
        &space.vectors,
        cfg.k_min..=cfg.k_max,
        cfg.min_cluster_size,
        rng_seed,
        exec,
    );

    let mut taken = BTreeSet::new();
    let mut centroids = Vec::new();
    for c in 0..clustering.k {
        let members: Vec<usize> = (0..segments.len()).filter(|&i| clustering.labels[i] == c).collect();
        let (label, top_terms) = label_theme(&members, &space.vectors, &space.terms);
        let mut centroid = vec![0.0; space.dim()];
        for &m in &members {
            for (x, y) in centroid.iter_mut().zip(&space.vectors[m]) {
                *x += y;
            }
        }
        space::normalize(&mut centroid);
        centroids.push(centroid);
        out.themes.push(Theme {
            attribute: attribute.name.clone(),
            label: unique_label(label, &mut taken, c),
            member_refs: members.iter().map(|&i| SegmentRef::of(segments[i])).collect(),
            top_terms,
            origin: ThemeOrigin::Clustered,
        });
    }
    if clustering.k > 1 {
        for (i, v) in space.vectors.iter().enumerate() {
            let own = clustering.labels[i];
            let own_sim = space::dot(v, &centroids[own]);
            let runner = (0..clustering.k)
                .filter(|&c| c != own)
                .map(|c| (c, space::dot(v, &centroids[c])))
                .fold(None, |acc: Option<(usize, f64)>, (c, s)| match acc {
                    Some((_, b)) if s <= b => acc,
                    _ => Some((c, s)),
                });
            if let Some((c, s)) = runner {
                if own_sim - s < NEAR_TIE_MARGIN {
                    out.near_ties.push(NearTie {
                        member: SegmentRef::of(segments[i]),
                        assigned: out.themes[own].label.clone(),
                        runner_up: out.themes[c].label.clone(),
                        margin: own_sim - s,
                    });
                }
            }
        }
    }
    out.chosen_k = Some(clustering.k);
    out.silhouette = clustering.silhouette;
    log_near_ties(&out);
    Ok(out)
}

fn log_near_ties(column: &ColumnThemes) {
    for t in &column.near_ties {
        log::info!(
            "near tie in {}: {}#{} assigned {} over {} (margin {:.4})",
            column.attribute,
            t.member.doc_id,
            t.member.sentence_index,
            t.assigned,
            t.runner_up,
            t.margin
        );
    }
}

/// Synthesizes every column of the table. Columns run independently.
pub fn synthesize(
    table: &EvidenceTable,
    protocol: &ReviewProtocol,
    tokenizer: &Tokenizer,
    exec: Exec,
) -> Result<ThemeSet, SynthesisError> {
    let by_column: BTreeMap<&str, Vec<&Segment>> = table.segments().fold(BTreeMap::new(), |mut m, s| {
        m.entry(s.attribute.as_str()).or_insert_with(Vec::new).push(s);
        m
    });
    let results = exec.map(&protocol.schema, |attr| {
        let cells = by_column.get(attr.name.as_str()).cloned().unwrap_or_default();
        let cfg = protocol.synthesis_for(&attr.name);
        match attr.mode {
            AttributeMode::Categorical => categorize_column(attr, &cells, tokenizer, cfg.similarity_floor),
            AttributeMode::Open => cluster_column(attr, &cells, tokenizer, &cfg, protocol.rng_seed, Exec::Sequential),
        }
    });
    Ok(ThemeSet {
        columns: results.into_iter().collect::<Result<_, _>>()?,
    })
}
