//! The review protocol: every planning decision the pipeline consumes.
//!
//! The protocol is a TOML document. Parsing applies defaults and then runs
//! [`validate_protocol`]; any diagnostic turns into a semantic error that
//! names the offending field.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harvest::url::normalize_url;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("protocol syntax error: {0}")]
    Syntax(String),
    #[error("protocol semantic error: {}", join_diagnostics(.0))]
    Semantic(Vec<Diagnostic>),
    #[error("cannot read protocol {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewProtocol {
    pub title: String,
    #[serde(default)]
    pub research_questions: Vec<String>,
    pub rng_seed: u64,
    pub search: SearchStrategy,
    #[serde(default)]
    pub qgs: Vec<String>,
    #[serde(default)]
    pub inclusion: InclusionCriteria,
    pub schema: Vec<SchemaAttribute>,
    #[serde(default)]
    pub synthesis: Vec<SynthesisConfig>,
    #[serde(default)]
    pub mining: RuleMiningConfig,
    #[serde(default)]
    pub text: TextConfig,
    #[serde(default)]
    pub topics: TopicConfig,
    #[serde(default)]
    pub fetch: FetchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchStrategy {
    pub query_strings: Vec<String>,
    pub engines: Vec<EngineAdapterConfig>,
    #[serde(default = "defaults::max_results_per_query")]
    pub max_results_per_query: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_filters: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineAdapterConfig {
    pub engine_id: String,
    #[serde(flatten)]
    pub kind: EngineKind,
}

/// How an engine adapter obtains results.
///
/// Pointers are RFC 6901 JSON pointers. `results_pointer` locates the result
/// array in a response page; the other pointers are relative to one result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EngineKind {
    JsonRest {
        /// Request URL with `{query}` and optional `{page}`, `{start}`,
        /// `{count}` and `{credential}` placeholders.
        url_template: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        credential_env: Option<String>,
        results_pointer: String,
        url_pointer: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        title_pointer: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snippet_pointer: Option<String>,
        #[serde(default = "defaults::page_size")]
        page_size: usize,
    },
    Fixture {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionCriteria {
    #[serde(default = "defaults::min_token_count")]
    pub min_token_count: usize,
    #[serde(default = "defaults::relevance_threshold")]
    pub relevance_threshold: f64,
    #[serde(default)]
    pub required_terms: Vec<String>,
    #[serde(default)]
    pub excluded_terms: Vec<String>,
}

impl Default for InclusionCriteria {
    fn default() -> Self {
        Self {
            min_token_count: defaults::min_token_count(),
            relevance_threshold: defaults::relevance_threshold(),
            required_terms: Vec::new(),
            excluded_terms: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeMode {
    Categorical,
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaAttribute {
    pub name: String,
    pub seed_terms: Vec<String>,
    pub mode: AttributeMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<Category>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub label: String,
    pub seed_terms: Vec<String>,
}

/// Per-attribute synthesis settings. Attributes without an entry use
/// [`SynthesisConfig::for_attribute`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub attribute: String,
    #[serde(default = "defaults::k_min")]
    pub k_min: usize,
    #[serde(default = "defaults::k_max")]
    pub k_max: usize,
    #[serde(default = "defaults::similarity_floor")]
    pub similarity_floor: f64,
    #[serde(default = "defaults::min_cluster_size")]
    pub min_cluster_size: usize,
}

impl SynthesisConfig {
    pub fn for_attribute(name: &str) -> Self {
        Self {
            attribute: name.to_string(),
            k_min: defaults::k_min(),
            k_max: defaults::k_max(),
            similarity_floor: defaults::similarity_floor(),
            min_cluster_size: defaults::min_cluster_size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleMiningConfig {
    #[serde(default = "defaults::min_support")]
    pub min_support: f64,
    #[serde(default = "defaults::min_confidence")]
    pub min_confidence: f64,
    #[serde(default = "defaults::max_itemset_size")]
    pub max_itemset_size: usize,
}

impl Default for RuleMiningConfig {
    fn default() -> Self {
        Self {
            min_support: defaults::min_support(),
            min_confidence: defaults::min_confidence(),
            max_itemset_size: defaults::max_itemset_size(),
        }
    }
}

/// Tokenizer and document-term matrix settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    /// Replaces the bundled English stopword list when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<Vec<String>>,
    #[serde(default = "defaults::min_token_length")]
    pub min_token_length: usize,
    #[serde(default)]
    pub stem: bool,
    #[serde(default = "defaults::min_df")]
    pub min_df: usize,
    #[serde(default = "defaults::max_df_ratio")]
    pub max_df_ratio: f64,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            stopwords: None,
            min_token_length: defaults::min_token_length(),
            stem: false,
            min_df: defaults::min_df(),
            max_df_ratio: defaults::max_df_ratio(),
        }
    }
}

/// Seeded topic model settings. `k` defaults to `|schema| + 2` and `alpha`
/// to `50 / k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::seed_boost")]
    pub seed_boost: f64,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::min_assignment_score")]
    pub min_assignment_score: f64,
    #[serde(default = "defaults::seed_weight")]
    pub seed_weight: f64,
    #[serde(default = "defaults::topic_weight")]
    pub topic_weight: f64,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            k: None,
            alpha: None,
            beta: defaults::beta(),
            seed_boost: defaults::seed_boost(),
            iterations: defaults::iterations(),
            min_assignment_score: defaults::min_assignment_score(),
            seed_weight: defaults::seed_weight(),
            topic_weight: defaults::topic_weight(),
        }
    }
}

/// Politeness and replay settings for the fetch stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchConfig {
    #[serde(default = "defaults::min_delay_ms")]
    pub min_delay_ms: u64,
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    #[serde(default = "defaults::backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "defaults::timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "defaults::honor_robots")]
    pub honor_robots: bool,
    #[serde(default = "defaults::user_agent")]
    pub user_agent: String,
    #[serde(default = "defaults::max_concurrent_hosts")]
    pub max_concurrent_hosts: usize,
    /// Directory of page snapshots used by offline fetches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            min_delay_ms: defaults::min_delay_ms(),
            max_retries: defaults::max_retries(),
            backoff_base_ms: defaults::backoff_base_ms(),
            timeout_ms: defaults::timeout_ms(),
            honor_robots: defaults::honor_robots(),
            user_agent: defaults::user_agent(),
            max_concurrent_hosts: defaults::max_concurrent_hosts(),
            snapshot_dir: None,
        }
    }
}

pub mod defaults {
    pub fn max_results_per_query() -> usize {
        50
    }
    pub fn page_size() -> usize {
        10
    }
    pub fn min_token_count() -> usize {
        50
    }
    pub fn relevance_threshold() -> f64 {
        0.1
    }
    pub fn min_support() -> f64 {
        0.1
    }
    pub fn min_confidence() -> f64 {
        0.6
    }
    pub fn max_itemset_size() -> usize {
        4
    }
    pub fn k_min() -> usize {
        2
    }
    pub fn k_max() -> usize {
        8
    }
    pub fn similarity_floor() -> f64 {
        0.05
    }
    pub fn min_cluster_size() -> usize {
        2
    }
    pub fn min_token_length() -> usize {
        2
    }
    pub fn min_df() -> usize {
        2
    }
    pub fn max_df_ratio() -> f64 {
        0.9
    }
    pub fn beta() -> f64 {
        0.01
    }
    pub fn seed_boost() -> f64 {
        25.0
    }
    pub fn iterations() -> usize {
        1000
    }
    pub fn min_assignment_score() -> f64 {
        0.2
    }
    pub fn seed_weight() -> f64 {
        0.5
    }
    pub fn topic_weight() -> f64 {
        0.5
    }
    pub fn min_delay_ms() -> u64 {
        1000
    }
    pub fn max_retries() -> u32 {
        3
    }
    pub fn backoff_base_ms() -> u64 {
        500
    }
    pub fn timeout_ms() -> u64 {
        10_000
    }
    pub fn honor_robots() -> bool {
        true
    }
    pub fn user_agent() -> String {
        concat!("webslr/", env!("CARGO_PKG_VERSION")).to_string()
    }
    pub fn max_concurrent_hosts() -> usize {
        4
    }
}

impl ReviewProtocol {
    pub fn attribute(&self, name: &str) -> Option<&SchemaAttribute> {
        self.schema.iter().find(|a| a.name == name)
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.schema.iter().map(|a| a.name.clone()).collect()
    }

    /// Synthesis settings for `name`, falling back to defaults.
    pub fn synthesis_for(&self, name: &str) -> SynthesisConfig {
        self.synthesis
            .iter()
            .find(|s| s.attribute == name)
            .cloned()
            .unwrap_or_else(|| SynthesisConfig::for_attribute(name))
    }

    /// The quasi-gold standard as a set of normalized URLs. Entries that do
    /// not parse are dropped; [`validate_protocol`] reports them.
    pub fn qgs_set(&self) -> BTreeSet<String> {
        self.qgs
            .iter()
            .filter_map(|u| normalize_url(u).ok())
            .collect()
    }

    pub fn topic_count(&self) -> usize {
        self.topics.k.unwrap_or(self.schema.len() + 2)
    }

    pub fn topic_alpha(&self) -> f64 {
        self.topics
            .alpha
            .unwrap_or_else(|| 50.0 / self.topic_count().max(1) as f64)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("protocol serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol serializes to JSON")
    }
}

/// A single validation finding. `code` is stable across releases; `field`
/// is the dotted path of the offending value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}]", self.field, self.message, self.code)
    }
}

/// Parses protocol text, applies defaults, normalizes QGS URLs and rejects
/// documents that violate an invariant.
pub fn parse_protocol(source: &str) -> Result<ReviewProtocol, ProtocolError> {
    let mut protocol: ReviewProtocol =
        toml::from_str(source).map_err(|e| ProtocolError::Syntax(e.to_string()))?;
    for entry in &mut protocol.qgs {
        if let Ok(normalized) = normalize_url(entry) {
            *entry = normalized;
        }
    }
    let diagnostics = validate_protocol(&protocol);
    if diagnostics.is_empty() {
        Ok(protocol)
    } else {
        Err(ProtocolError::Semantic(diagnostics))
    }
}

/// Reads and parses a protocol file. Returns the protocol with the directory
/// that relative paths inside it resolve against.
pub fn load_protocol(path: &Path) -> Result<(ReviewProtocol, PathBuf), ProtocolError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let protocol = parse_protocol(&text)?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((protocol, base))
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn in_half_open_unit(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

/// Checks every protocol invariant and returns one diagnostic per violation.
pub fn validate_protocol(p: &ReviewProtocol) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    if p.title.trim().is_empty() {
        out.push(Diagnostic::new("title.empty", "title", "must not be empty"));
    }

    let search = &p.search;
    if search.query_strings.is_empty() {
        out.push(Diagnostic::new(
            "search.query_strings.empty",
            "search.query_strings",
            "at least one query string required",
        ));
    }
    for (i, q) in search.query_strings.iter().enumerate() {
        if q.trim().is_empty() {
            out.push(Diagnostic::new(
                "search.query_strings.blank",
                format!("search.query_strings[{i}]"),
                "blank query string",
            ));
        }
    }
    if search.max_results_per_query < 1 {
        out.push(Diagnostic::new(
            "search.max_results_per_query.range",
            "search.max_results_per_query",
            "out of range (must be >= 1)",
        ));
    }
    if search.engines.is_empty() {
        out.push(Diagnostic::new(
            "search.engines.empty",
            "search.engines",
            "at least one engine required",
        ));
    }
    let mut engine_ids = HashSet::new();
    for (i, engine) in search.engines.iter().enumerate() {
        let field = format!("search.engines[{i}]");
        if engine.engine_id.trim().is_empty() {
            out.push(Diagnostic::new(
                "search.engine.id_empty",
                format!("{field}.engine_id"),
                "must not be empty",
            ));
        } else if !engine_ids.insert(engine.engine_id.as_str()) {
            out.push(Diagnostic::new(
                "search.engine.id_duplicate",
                format!("{field}.engine_id"),
                format!("duplicate engine id \"{}\"", engine.engine_id),
            ));
        }
        if let EngineKind::JsonRest {
            url_template,
            url_pointer,
            page_size,
            ..
        } = &engine.kind
        {
            if !url_template.contains("{query}") {
                out.push(Diagnostic::new(
                    "search.engine.template_query",
                    format!("{field}.url_template"),
                    "template must contain {query}",
                ));
            }
            if url_pointer.is_empty() {
                out.push(Diagnostic::new(
                    "search.engine.url_pointer",
                    format!("{field}.url_pointer"),
                    "result path for url required",
                ));
            }
            if *page_size == 0 {
                out.push(Diagnostic::new(
                    "search.engine.page_size",
                    format!("{field}.page_size"),
                    "out of range (must be >= 1)",
                ));
            }
        }
    }

    for (i, entry) in p.qgs.iter().enumerate() {
        if normalize_url(entry).is_err() {
            out.push(Diagnostic::new(
                "qgs.invalid_url",
                format!("qgs[{i}]"),
                "invalid URL",
            ));
        }
    }

    if !in_unit(p.inclusion.relevance_threshold) {
        out.push(Diagnostic::new(
            "inclusion.relevance_threshold.range",
            "inclusion.relevance_threshold",
            "out of range [0, 1]",
        ));
    }

    if p.schema.is_empty() {
        out.push(Diagnostic::new(
            "schema.empty",
            "schema",
            "at least one attribute required",
        ));
    }
    let mut names = HashSet::new();
    for (i, attr) in p.schema.iter().enumerate() {
        let field = format!("schema[{i}]");
        if attr.name.trim().is_empty() {
            out.push(Diagnostic::new(
                "schema.name_empty",
                format!("{field}.name"),
                "attribute name must not be empty",
            ));
        } else if !names.insert(attr.name.as_str()) {
            out.push(Diagnostic::new(
                "schema.name_duplicate",
                format!("{field}.name"),
                format!("duplicate attribute name \"{}\"", attr.name),
            ));
        }
        if attr.seed_terms.iter().all(|t| t.trim().is_empty()) {
            out.push(Diagnostic::new(
                "schema.seed_terms_empty",
                format!("{field}.seed_terms"),
                format!("attribute \"{}\" needs at least one seed term", attr.name),
            ));
        }
        match attr.mode {
            AttributeMode::Categorical => {
                if attr.categories.len() < 2 {
                    out.push(Diagnostic::new(
                        "schema.categories_required",
                        format!("{field}.categories"),
                        format!(
                            "categories required: attribute \"{}\" is categorical and needs at least 2",
                            attr.name
                        ),
                    ));
                }
                let mut labels = HashSet::new();
                for (j, cat) in attr.categories.iter().enumerate() {
                    if cat.label.trim().is_empty() || !labels.insert(cat.label.as_str()) {
                        out.push(Diagnostic::new(
                            "schema.category_label",
                            format!("{field}.categories[{j}].label"),
                            format!("category label \"{}\" empty or duplicate", cat.label),
                        ));
                    }
                    if cat.seed_terms.iter().all(|t| t.trim().is_empty()) {
                        out.push(Diagnostic::new(
                            "schema.category_seed_terms",
                            format!("{field}.categories[{j}].seed_terms"),
                            "category needs at least one seed term",
                        ));
                    }
                }
            }
            AttributeMode::Open => {
                if !attr.categories.is_empty() {
                    out.push(Diagnostic::new(
                        "schema.categories_unexpected",
                        format!("{field}.categories"),
                        format!("attribute \"{}\" is open and must not list categories", attr.name),
                    ));
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, s) in p.synthesis.iter().enumerate() {
        let field = format!("synthesis[{i}]");
        if !names.contains(s.attribute.as_str()) {
            out.push(Diagnostic::new(
                "synthesis.unknown_attribute",
                format!("{field}.attribute"),
                format!("references unknown attribute \"{}\"", s.attribute),
            ));
        }
        if !seen.insert(s.attribute.as_str()) {
            out.push(Diagnostic::new(
                "synthesis.duplicate_attribute",
                format!("{field}.attribute"),
                format!("attribute \"{}\" configured more than once", s.attribute),
            ));
        }
        if s.k_min < 2 || s.k_max < s.k_min {
            out.push(Diagnostic::new(
                "synthesis.k_range",
                format!("{field}.k_min"),
                "k range must satisfy 2 <= k_min <= k_max",
            ));
        }
        if !in_unit(s.similarity_floor) {
            out.push(Diagnostic::new(
                "synthesis.similarity_floor.range",
                format!("{field}.similarity_floor"),
                "out of range [0, 1]",
            ));
        }
        if s.min_cluster_size < 1 {
            out.push(Diagnostic::new(
                "synthesis.min_cluster_size.range",
                format!("{field}.min_cluster_size"),
                "out of range (must be >= 1)",
            ));
        }
    }

    if !in_half_open_unit(p.mining.min_support) {
        out.push(Diagnostic::new(
            "mining.min_support.range",
            "mining.min_support",
            "out of range (0, 1]",
        ));
    }
    if !in_half_open_unit(p.mining.min_confidence) {
        out.push(Diagnostic::new(
            "mining.min_confidence.range",
            "mining.min_confidence",
            "out of range (0, 1]",
        ));
    }
    if p.mining.max_itemset_size < 2 {
        out.push(Diagnostic::new(
            "mining.max_itemset_size.range",
            "mining.max_itemset_size",
            "out of range (must be >= 2)",
        ));
    }

    if p.text.min_token_length < 1 {
        out.push(Diagnostic::new(
            "text.min_token_length.range",
            "text.min_token_length",
            "out of range (must be >= 1)",
        ));
    }
    if p.text.min_df < 1 {
        out.push(Diagnostic::new(
            "text.min_df.range",
            "text.min_df",
            "out of range (must be >= 1)",
        ));
    }
    if !in_half_open_unit(p.text.max_df_ratio) {
        out.push(Diagnostic::new(
            "text.max_df_ratio.range",
            "text.max_df_ratio",
            "out of range (0, 1]",
        ));
    }

    let t = &p.topics;
    if let Some(k) = t.k {
        if k < p.schema.len() {
            out.push(Diagnostic::new(
                "topics.k.range",
                "topics.k",
                format!("out of range (must be >= {} schema attributes)", p.schema.len()),
            ));
        }
    }
    if t.k == Some(0) {
        out.push(Diagnostic::new("topics.k.zero", "topics.k", "must be >= 1"));
    }
    if let Some(alpha) = t.alpha {
        if !(alpha > 0.0 && alpha.is_finite()) {
            out.push(Diagnostic::new(
                "topics.alpha.range",
                "topics.alpha",
                "out of range (must be > 0)",
            ));
        }
    }
    if !(t.beta > 0.0 && t.beta.is_finite()) {
        out.push(Diagnostic::new(
            "topics.beta.range",
            "topics.beta",
            "out of range (must be > 0)",
        ));
    }
    if !(t.seed_boost >= 1.0 && t.seed_boost.is_finite()) {
        out.push(Diagnostic::new(
            "topics.seed_boost.range",
            "topics.seed_boost",
            "out of range (must be >= 1)",
        ));
    }
    if t.iterations < 1 {
        out.push(Diagnostic::new(
            "topics.iterations.range",
            "topics.iterations",
            "out of range (must be >= 1)",
        ));
    }
    if !in_unit(t.min_assignment_score) {
        out.push(Diagnostic::new(
            "topics.min_assignment_score.range",
            "topics.min_assignment_score",
            "out of range [0, 1]",
        ));
    }
    if t.seed_weight < 0.0 || t.topic_weight < 0.0 || t.seed_weight + t.topic_weight <= 0.0 {
        out.push(Diagnostic::new(
            "topics.weights.range",
            "topics.seed_weight",
            "combination weights must be non-negative and not both zero",
        ));
    }

    if p.fetch.user_agent.trim().is_empty() {
        out.push(Diagnostic::new(
            "fetch.user_agent.empty",
            "fetch.user_agent",
            "must not be empty",
        ));
    }
    if p.fetch.max_concurrent_hosts < 1 {
        out.push(Diagnostic::new(
            "fetch.max_concurrent_hosts.range",
            "fetch.max_concurrent_hosts",
            "out of range (must be >= 1)",
        ));
    }
    if p.fetch.timeout_ms == 0 {
        out.push(Diagnostic::new(
            "fetch.timeout_ms.range",
            "fetch.timeout_ms",
            "out of range (must be > 0)",
        ));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
title = "Minimal"
rng_seed = 7

[search]
query_strings = ["cloud api failure"]

[[search.engines]]
engine_id = "fx"
kind = "fixture"
path = "results.json"

[[schema]]
name = "issue"
seed_terms = ["failure", "error"]
mode = "open"
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let p = parse_protocol(MINIMAL).unwrap();
        assert_eq!(p.inclusion.relevance_threshold, 0.1);
        assert_eq!(p.inclusion.min_token_count, 50);
        assert_eq!(p.search.max_results_per_query, 50);
        assert_eq!(p.mining.min_support, 0.1);
        assert_eq!(p.mining.min_confidence, 0.6);
        assert_eq!(p.mining.max_itemset_size, 4);
        assert_eq!(p.text.min_df, 2);
        assert_eq!(p.text.max_df_ratio, 0.9);
        assert_eq!(p.topic_count(), 3);
        assert!((p.topic_alpha() - 50.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.topics.beta, 0.01);
        assert_eq!(p.topics.seed_boost, 25.0);
        assert_eq!(p.topics.iterations, 1000);
        assert_eq!(p.fetch.min_delay_ms, 1000);
        assert_eq!(p.fetch.max_retries, 3);
        assert_eq!(p.fetch.timeout_ms, 10_000);
        assert!(p.fetch.honor_robots);
        assert_eq!(p.synthesis_for("issue").similarity_floor, 0.05);
        assert!(validate_protocol(&p).is_empty());
    }

    #[test]
    fn duplicate_attribute_names_are_rejected() {
        let doc = format!(
            "{MINIMAL}\n[[schema]]\nname = \"issue\"\nseed_terms = [\"bug\"]\nmode = \"open\"\n"
        );
        let err = parse_protocol(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"issue\""), "{msg}");
        assert!(msg.contains("schema[1].name"), "{msg}");
    }

    #[test]
    fn categorical_without_categories_is_rejected() {
        let doc = MINIMAL.replace("mode = \"open\"", "mode = \"categorical\"");
        let err = parse_protocol(&doc).unwrap_err();
        assert!(err.to_string().contains("categories required"), "{err}");
    }

    #[test]
    fn syntax_errors_are_distinct() {
        assert!(matches!(
            parse_protocol("title = "),
            Err(ProtocolError::Syntax(_))
        ));
        assert!(matches!(
            parse_protocol("title = \"x\"\nrng_seed = 1\n"),
            Err(ProtocolError::Syntax(_))
        ));
    }

    #[test]
    fn rng_seed_is_required() {
        let doc = MINIMAL.replace("rng_seed = 7", "");
        assert!(matches!(parse_protocol(&doc), Err(ProtocolError::Syntax(_))));
    }

    #[test]
    fn min_support_zero_is_diagnosed() {
        let mut p = parse_protocol(MINIMAL).unwrap();
        p.mining.min_support = 0.0;
        let diags = validate_protocol(&p);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "mining.min_support.range");
        assert_eq!(diags[0].to_string().split(" [").next().unwrap(), "mining.min_support out of range (0, 1]");
    }

    #[test]
    fn invalid_qgs_entry_is_diagnosed() {
        let mut p = parse_protocol(MINIMAL).unwrap();
        p.qgs = vec!["https://example.com/a".into(), "not a url".into()];
        let diags = validate_protocol(&p);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "qgs[1]");
        assert_eq!(diags[0].message, "invalid URL");
    }

    #[test]
    fn qgs_entries_are_normalized_on_parse() {
        let doc = MINIMAL.replace(
            "rng_seed = 7",
            "rng_seed = 7\nqgs = [\"HTTPS://Example.com:443/x?utm_source=a#top\"]",
        );
        let p = parse_protocol(&doc).unwrap();
        assert_eq!(p.qgs, vec!["https://example.com/x".to_string()]);
    }

    #[test]
    fn synthesis_must_reference_existing_attribute_once() {
        let doc = format!(
            "{MINIMAL}\n[[synthesis]]\nattribute = \"issue\"\n[[synthesis]]\nattribute = \"issue\"\n[[synthesis]]\nattribute = \"ghost\"\n"
        );
        let Err(ProtocolError::Semantic(diags)) = parse_protocol(&doc) else {
            panic!("expected semantic error");
        };
        let codes: Vec<_> = diags.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(
            codes,
            ["synthesis.duplicate_attribute", "synthesis.unknown_attribute"]
        );
    }

    #[test]
    fn json_rest_template_needs_query_placeholder() {
        let doc = MINIMAL.replace(
            "kind = \"fixture\"\npath = \"results.json\"",
            "kind = \"json-rest\"\nurl_template = \"https://api.example.com/s?q=x\"\nresults_pointer = \"/items\"\nurl_pointer = \"/link\"",
        );
        let err = parse_protocol(&doc).unwrap_err();
        assert!(err.to_string().contains("{query}"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let p = parse_protocol(MINIMAL).unwrap();
        let again = parse_protocol(&p.to_toml()).unwrap();
        assert_eq!(p, again);
    }
}
