//! The run report: Markdown for people, JSON for tools.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    Funnel, Pipeline, PipelineError, QgsReport, Stage, CORPUS_JSONL, EVIDENCE_JSON, FETCH_SUMMARY,
    MODEL_JSON, RELEVANCE, REPORT_JSON, REPORT_MD, SEARCH_QGS,
};
use crate::extraction::{EvidenceTable, RelevanceScore};
use crate::harvest::{FetchSummary, WebDocument};
use crate::protocol::{AttributeMode, InclusionCriteria, RuleMiningConfig};
use crate::rules::{AssociationRule, Item, KnowledgeModel};
use crate::synthesis::{SegmentRef, Theme};
use crate::store::read_jsonl;

const EXAMPLES_PER_THEME: usize = 3;
const TOP_RULES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub research_questions: Vec<String>,
    pub protocol_hash: String,
    pub rng_seed: u64,
    pub protocol: ProtocolSummary,
    pub qgs: QgsReport,
    pub funnel: Funnel,
    pub segments: usize,
    pub columns: Vec<ReportColumn>,
    pub rule_count: usize,
    pub top_rules: Vec<AssociationRule>,
    pub provenance: Vec<ThemeProvenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub query_strings: Vec<String>,
    pub engines: Vec<String>,
    pub qgs: Vec<String>,
    pub inclusion: InclusionCriteria,
    pub schema: Vec<SchemaSummary>,
    pub mining: RuleMiningConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaSummary {
    pub name: String,
    pub mode: AttributeMode,
    pub seed_terms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportColumn {
    pub attribute: String,
    pub mode: AttributeMode,
    pub chosen_k: Option<usize>,
    pub silhouette: Option<f64>,
    pub unassigned: usize,
    pub themes: Vec<ReportTheme>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTheme {
    pub label: String,
    pub members: usize,
    pub top_terms: Vec<String>,
    pub examples: Vec<Excerpt>,
}

/// A verbatim sentence of a stored page.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excerpt {
    pub doc_id: String,
    pub url: String,
    pub sentence_index: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThemeProvenance {
    pub attribute: String,
    pub theme: String,
    pub excerpts: Vec<Excerpt>,
}

impl Report {
    /// Excerpts backing a rule item, if the item names a reported theme.
    pub fn excerpts_for(&self, item: &Item) -> Option<&[Excerpt]> {
        self.provenance
            .iter()
            .find(|p| p.attribute == item.attribute && p.theme == item.theme)
            .map(|p| p.excerpts.as_slice())
    }
}

fn fail(message: String) -> PipelineError {
    PipelineError::Stage {
        stage: Stage::Report,
        message,
    }
}

/// Resolves every theme member to the sentence stored in the corpus. A
/// member whose text is not verbatim in its page is an error.
fn excerpts(
    theme: &Theme,
    table: &EvidenceTable,
    corpus: &BTreeMap<String, WebDocument>,
) -> Result<Vec<Excerpt>, PipelineError> {
    theme
        .member_refs
        .iter()
        .map(|SegmentRef { doc_id, sentence_index }| {
            let seg = table
                .find(doc_id, *sentence_index)
                .ok_or_else(|| fail(format!("theme {} member {doc_id}#{sentence_index} is not in the evidence table", theme.label)))?;
            let doc = corpus
                .get(doc_id)
                .ok_or_else(|| fail(format!("page {doc_id} is not in the corpus store")))?;
            if !doc.plain_text.contains(&seg.text) {
                return Err(fail(format!("segment {doc_id}#{sentence_index} is not verbatim in its page")));
            }
            Ok(Excerpt {
                doc_id: doc_id.clone(),
                url: doc.url.clone(),
                sentence_index: *sentence_index,
                text: seg.text.clone(),
            })
        })
        .collect()
}

pub fn build_report(pipeline: &Pipeline) -> Result<Report, PipelineError> {
    let p = pipeline.protocol();
    let records = pipeline.read_records()?;
    let qgs: QgsReport = pipeline.read_json(SEARCH_QGS)?;
    let fetch: FetchSummary = pipeline.read_json(FETCH_SUMMARY)?;
    let relevance: Vec<RelevanceScore> = pipeline.read_json(RELEVANCE)?;
    let table: EvidenceTable = pipeline.read_json(EVIDENCE_JSON)?;
    let model: KnowledgeModel = pipeline.read_json(MODEL_JSON)?;
    let corpus: BTreeMap<String, WebDocument> = read_jsonl::<WebDocument>(&pipeline.path(CORPUS_JSONL))
        .map_err(|e| fail(format!("reading corpus store: {e}")))?
        .into_iter()
        .map(|d| (d.doc_id.clone(), d))
        .collect();

    let mut columns = Vec::new();
    let mut provenance = Vec::new();
    for column in &model.themes.columns {
        let mode = p
            .attribute(&column.attribute)
            .map(|a| a.mode)
            .ok_or_else(|| fail(format!("theme column {} is not in the schema", column.attribute)))?;
        let mut themes = Vec::new();
        for theme in &column.themes {
            let all = excerpts(theme, &table, &corpus)?;
            themes.push(ReportTheme {
                label: theme.label.clone(),
                members: theme.member_refs.len(),
                top_terms: theme.top_terms.clone(),
                examples: all.iter().take(EXAMPLES_PER_THEME).cloned().collect(),
            });
            provenance.push(ThemeProvenance {
                attribute: column.attribute.clone(),
                theme: theme.label.clone(),
                excerpts: all,
            });
        }
        columns.push(ReportColumn {
            attribute: column.attribute.clone(),
            mode,
            chosen_k: column.chosen_k,
            silhouette: column.silhouette,
            unassigned: column.unassigned.len(),
            themes,
        });
    }

    Ok(Report {
        title: p.title.clone(),
        research_questions: p.research_questions.clone(),
        protocol_hash: pipeline.protocol_hash().to_string(),
        rng_seed: p.rng_seed,
        protocol: ProtocolSummary {
            query_strings: p.search.query_strings.clone(),
            engines: p.search.engines.iter().map(|e| e.engine_id.clone()).collect(),
            qgs: p.qgs.clone(),
            inclusion: p.inclusion.clone(),
            schema: p
                .schema
                .iter()
                .map(|a| SchemaSummary {
                    name: a.name.clone(),
                    mode: a.mode,
                    seed_terms: a.seed_terms.clone(),
                })
                .collect(),
            mining: p.mining.clone(),
        },
        qgs,
        funnel: Funnel::compute(&records, &fetch, &relevance, &table),
        segments: table.segments().count(),
        columns,
        rule_count: model.rules.len(),
        top_rules: model.rules.iter().take(TOP_RULES).cloned().collect(),
        provenance,
    })
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn join_items(items: &[Item]) -> String {
    items.iter().map(Item::to_string).collect::<Vec<_>>().join(" & ")
}

pub fn render_markdown(r: &Report) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# {}\n", r.title);

    md.push_str("## Protocol\n\n");
    if !r.research_questions.is_empty() {
        md.push_str("Research questions:\n\n");
        for (i, q) in r.research_questions.iter().enumerate() {
            let _ = writeln!(md, "{}. {}", i + 1, q);
        }
        md.push('\n');
    }
    let _ = writeln!(md, "- Query strings: {}", r.protocol.query_strings.iter().map(|q| format!("`{q}`")).collect::<Vec<_>>().join(", "));
    let _ = writeln!(md, "- Engines: {}", r.protocol.engines.join(", "));
    let _ = writeln!(md, "- Quasi-gold standard: {} URLs", r.protocol.qgs.len());
    let _ = writeln!(
        md,
        "- Inclusion: at least {} tokens, relevance at least {}",
        r.protocol.inclusion.min_token_count, r.protocol.inclusion.relevance_threshold
    );
    let _ = writeln!(
        md,
        "- Mining: min support {}, min confidence {}, itemsets up to {}",
        r.protocol.mining.min_support, r.protocol.mining.min_confidence, r.protocol.mining.max_itemset_size
    );
    let _ = writeln!(md, "- RNG seed: {}", r.rng_seed);
    let _ = writeln!(md, "- Protocol hash: `{}`\n", r.protocol_hash);
    md.push_str("| Attribute | Mode | Seed terms |\n|---|---|---|\n");
    for a in &r.protocol.schema {
        let mode = match a.mode {
            AttributeMode::Categorical => "categorical",
            AttributeMode::Open => "open",
        };
        let _ = writeln!(md, "| {} | {} | {} |", cell(&a.name), mode, cell(&a.seed_terms.join(", ")));
    }

    md.push_str("\n## Search\n\n");
    md.push_str("| Query | Retrieved | QGS hits | Sensitivity | Precision |\n|---|---|---|---|---|\n");
    for q in &r.qgs.per_query {
        match &q.score {
            Some(s) => {
                let _ = writeln!(md, "| {} | {} | {} | {} | {} |", cell(&q.query), q.retrieved, s.qgs_hit_count, pct(s.sensitivity), pct(s.precision));
            }
            None => {
                let _ = writeln!(md, "| {} | {} | n/a | n/a | n/a |", cell(&q.query), q.retrieved);
            }
        }
    }
    if let Some(s) = &r.qgs.combined {
        let _ = writeln!(md, "| (all queries) | {} | {} | {} | {} |", s.retrieved_count, s.qgs_hit_count, pct(s.sensitivity), pct(s.precision));
    }
    for w in &r.qgs.warnings {
        let _ = writeln!(md, "\n> {w}");
    }

    md.push_str("\n## Funnel\n\n| Stage | Pages |\n|---|---|\n");
    let _ = writeln!(md, "| Retrieved | {} |", r.funnel.retrieved);
    let _ = writeln!(md, "| Fetched | {} |", r.funnel.fetched_ok);
    let _ = writeln!(md, "| Selected | {} |", r.funnel.selected);
    let _ = writeln!(md, "| Segmented | {} |", r.funnel.segmented);
    let _ = writeln!(md, "\n{} segments in the evidence table.", r.segments);

    md.push_str("\n## Themes\n");
    for c in &r.columns {
        let _ = write!(md, "\n### {}\n\n", c.attribute);
        if let (Some(k), Some(s)) = (c.chosen_k, c.silhouette) {
            let _ = writeln!(md, "{k} clusters, mean silhouette {s:.3}.\n");
        }
        if c.themes.is_empty() {
            md.push_str("No themes.\n");
        }
        for t in &c.themes {
            let _ = writeln!(md, "- **{}** ({} segments; terms: {})", t.label, t.members, t.top_terms.join(", "));
            for e in &t.examples {
                let _ = writeln!(md, "  - \"{}\" ({})", e.text, e.url);
            }
        }
        if c.unassigned > 0 {
            let _ = writeln!(md, "- (unassigned): {} segments", c.unassigned);
        }
    }

    md.push_str("\n## Rules\n\n");
    if r.top_rules.is_empty() {
        md.push_str("No rules met thresholds.\n");
    } else {
        let _ = writeln!(md, "Top {} of {} rules.\n", r.top_rules.len(), r.rule_count);
        md.push_str("| Antecedent | Consequent | Support | Confidence | Lift |\n|---|---|---|---|---|\n");
        for rule in &r.top_rules {
            let _ = writeln!(
                md,
                "| {} | {} | {:.3} | {:.3} | {:.3} |",
                cell(&join_items(&rule.antecedent)),
                cell(&join_items(&rule.consequent)),
                rule.support,
                rule.confidence,
                rule.lift
            );
        }
    }

    md.push_str("\n## Appendix: provenance\n");
    for p in &r.provenance {
        let _ = write!(md, "\n### {}:{}\n\n", p.attribute, p.theme);
        for e in &p.excerpts {
            let _ = writeln!(md, "- `{}#{}` {}\n  > {}", e.doc_id, e.sentence_index, e.url, e.text);
        }
    }
    md
}

pub(super) fn emit_report(pipeline: &Pipeline) -> Result<Vec<String>, PipelineError> {
    let report = build_report(pipeline)?;
    if !report.funnel.is_monotone() {
        return Err(fail(format!("funnel counts are not monotone: {:?}", report.funnel)));
    }
    pipeline.write(REPORT_MD, render_markdown(&report).as_bytes())?;
    pipeline.write_json(REPORT_JSON, &report)?;
    Ok(vec![format!(
        "{} themes, {} rules",
        report.provenance.len(),
        report.rule_count
    )])
}
