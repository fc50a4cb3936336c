//! The evidence table: selected pages by schema columns.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Segment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceCell {
    pub attribute: String,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub doc_id: String,
    /// One cell per column, in column order.
    pub cells: Vec<EvidenceCell>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub columns: Vec<String>,
    pub rows: Vec<EvidenceRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("segment references unselected document {0}")]
    UnselectedDoc(String),
    #[error("segment references unknown column {0}")]
    UnknownColumn(String),
    #[error("malformed evidence table CSV: {0}")]
    Csv(String),
}

/// Builds the table with rows sorted by doc id and cells in sentence order.
pub fn build_evidence_table(
    selected: &[String],
    columns: &[String],
    segments: Vec<Segment>,
) -> Result<EvidenceTable, TableError> {
    let col_index: BTreeMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let docs: BTreeSet<&str> = selected.iter().map(String::as_str).collect();
    let mut rows: BTreeMap<&str, Vec<Vec<Segment>>> = docs
        .iter()
        .map(|d| (*d, vec![Vec::new(); columns.len()]))
        .collect();
    for seg in segments {
        let c = *col_index
            .get(seg.attribute.as_str())
            .ok_or_else(|| TableError::UnknownColumn(seg.attribute.clone()))?;
        let row = rows
            .get_mut(seg.doc_id.as_str())
            .ok_or_else(|| TableError::UnselectedDoc(seg.doc_id.clone()))?;
        row[c].push(seg);
    }
    let rows = rows
        .into_iter()
        .map(|(doc_id, cells)| EvidenceRow {
            doc_id: doc_id.to_string(),
            cells: cells
                .into_iter()
                .zip(columns)
                .map(|(mut segments, attribute)| {
                    segments.sort_by_key(|s| s.sentence_index);
                    EvidenceCell {
                        attribute: attribute.clone(),
                        segments,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(EvidenceTable {
        columns: columns.to_vec(),
        rows,
    })
}

impl EvidenceTable {
    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.rows
            .iter()
            .flat_map(|r| r.cells.iter().flat_map(|c| c.segments.iter()))
    }

    /// All segments of one column in row order.
    pub fn column(&self, attribute: &str) -> Vec<&Segment> {
        self.segments().filter(|s| s.attribute == attribute).collect()
    }

    pub fn find(&self, doc_id: &str, sentence_index: usize) -> Option<&Segment> {
        self.segments()
            .find(|s| s.doc_id == doc_id && s.sentence_index == sentence_index)
    }

    /// Flat CSV: `doc_id, attribute, sentence_index, code, score, text`.
    pub fn to_csv(&self) -> Result<String, TableError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| TableError::Csv(e.to_string());
        w.write_record(["doc_id", "attribute", "sentence_index", "code", "score", "text"])
            .map_err(err)?;
        for s in self.segments() {
            w.write_record([
                s.doc_id.as_str(),
                s.attribute.as_str(),
                &s.sentence_index.to_string(),
                s.code.as_str(),
                &s.assignment_score.to_string(),
                s.text.as_str(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| TableError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(doc: &str, attr: &str, idx: usize) -> Segment {
        Segment {
            doc_id: doc.into(),
            attribute: attr.into(),
            sentence_index: idx,
            text: format!("{doc} {attr} {idx}"),
            code: "c".into(),
            assignment_score: 0.5,
        }
    }

    fn cols() -> Vec<String> {
        vec!["api".into(), "issue".into()]
    }

    #[test]
    fn zero_segments_gives_empty_cells() {
        let t = build_evidence_table(&["b".into(), "a".into()], &cols(), vec![]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].doc_id, "a");
        assert!(t.rows.iter().all(|r| r.cells.len() == 2 && r.cells.iter().all(|c| c.segments.is_empty())));
    }

    #[test]
    fn one_segment_per_cell() {
        let segs = vec![seg("a", "api", 0), seg("a", "issue", 1), seg("b", "api", 2), seg("b", "issue", 0)];
        let t = build_evidence_table(&["a".into(), "b".into()], &cols(), segs).unwrap();
        assert!(t.rows.iter().all(|r| r.cells.iter().all(|c| c.segments.len() == 1)));
        for r in &t.rows {
            for c in &r.cells {
                assert_eq!(c.segments[0].doc_id, r.doc_id);
                assert_eq!(c.segments[0].attribute, c.attribute);
            }
        }
    }

    #[test]
    fn shuffled_input_gives_same_table() {
        let sorted = vec![seg("a", "api", 0), seg("a", "api", 3), seg("a", "issue", 1), seg("b", "issue", 2)];
        let mut shuffled = sorted.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        let docs = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            build_evidence_table(&docs, &cols(), sorted).unwrap(),
            build_evidence_table(&docs, &cols(), shuffled).unwrap()
        );
    }

    #[test]
    fn rejects_unselected_docs() {
        let r = build_evidence_table(&["a".into()], &cols(), vec![seg("z", "api", 0)]);
        assert_eq!(r, Err(TableError::UnselectedDoc("z".into())));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let t = build_evidence_table(&["a".into()], &cols(), vec![seg("a", "api", 0)]).unwrap();
        let csv = t.to_csv().unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "doc_id,attribute,sentence_index,code,score,text");
        assert_eq!(lines[1], "a,api,0,c,0.5,a api 0");
    }
}
