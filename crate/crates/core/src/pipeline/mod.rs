//! Stage orchestration against a work directory.
//!
//! Every stage reads upstream artifacts, writes its own atomically and
//! appends a manifest entry. A stage is skipped when its recorded inputs
//! still match and its outputs are intact, unless forced.
//!
//! Artifact layout under the work directory:
//!
//! | stage | files |
//! |---|---|
//! | search | `search/results.jsonl`, `search/qgs.json` |
//! | fetch | `corpus/corpus.jsonl`, `corpus/corpus.idx.json`, `corpus/fetch_summary.json` |
//! | select | `select/relevance.json`, `select/vocab.tsv`, `select/dtm.tsv` |
//! | extract | `extract/topic_model.json`, `extract/evidence_table.json`, `extract/evidence_table.csv` |
//! | synthesize | `synthesize/themes.json`, `synthesize/themes_<attribute>.csv` |
//! | mine | `mine/model.json`, `mine/rules.csv`, `mine/rules.dot` |
//! | report | `report/report.md`, `report/report.json` |
//!
//! `manifest.jsonl` and the audit copy `protocol.json` sit at the top level.

pub mod manifest;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use serde::{Deserialize, Serialize};

pub use manifest::{EntryStatus, ManifestEntry, RunManifest, MANIFEST_FILE};

use crate::corpus::{build_matrix_with, DocumentTermMatrix, TokenizedDoc, Tokenizer};
use crate::exec::Exec;
use crate::extraction::{
    build_evidence_table, fit_topics, score_relevance, segment_document, CompiledCriteria,
    EvidenceTable, RelevanceScore, SeedLexicon, SegmentParams, TopicParams,
};
use crate::harvest::{
    build_engines, evaluate_urls, fetch_documents, replay_documents, run_search, FetchSummary,
    HttpClient, QgsScore, SearchResultRecord, SnapshotSet, UreqClient,
};
use crate::protocol::{load_protocol, EngineKind, ProtocolError, ReviewProtocol};
use crate::rules::{
    assemble_model, build_transactions, generate_rules, mine_frequent_itemsets, Provenance,
};
use crate::store::{
    atomic_write, read_json, read_jsonl, sha256_file, sha256_hex, write_json, write_jsonl,
    CorpusStore,
};
use crate::synthesis::{synthesize, ThemeSet};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const LOCK_FILE: &str = ".webslr.lock";
pub const PROTOCOL_COPY: &str = "protocol.json";

pub const SEARCH_RESULTS: &str = "search/results.jsonl";
pub const SEARCH_QGS: &str = "search/qgs.json";
pub const CORPUS_DIR: &str = "corpus";
pub const CORPUS_JSONL: &str = "corpus/corpus.jsonl";
pub const CORPUS_INDEX: &str = "corpus/corpus.idx.json";
pub const FETCH_SUMMARY: &str = "corpus/fetch_summary.json";
pub const RELEVANCE: &str = "select/relevance.json";
pub const VOCAB: &str = "select/vocab.tsv";
pub const DTM: &str = "select/dtm.tsv";
pub const TOPIC_MODEL: &str = "extract/topic_model.json";
pub const EVIDENCE_JSON: &str = "extract/evidence_table.json";
pub const EVIDENCE_CSV: &str = "extract/evidence_table.csv";
pub const THEMES_JSON: &str = "synthesize/themes.json";
pub const MODEL_JSON: &str = "mine/model.json";
pub const RULES_CSV: &str = "mine/rules.csv";
pub const RULES_DOT: &str = "mine/rules.dot";
pub const REPORT_MD: &str = "report/report.md";
pub const REPORT_JSON: &str = "report/report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Search,
    Fetch,
    Select,
    Extract,
    Synthesize,
    Mine,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Search,
        Stage::Fetch,
        Stage::Select,
        Stage::Extract,
        Stage::Synthesize,
        Stage::Mine,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Search => "search",
            Stage::Fetch => "fetch",
            Stage::Select => "select",
            Stage::Extract => "extract",
            Stage::Synthesize => "synthesize",
            Stage::Mine => "mine",
            Stage::Report => "report",
        }
    }

    /// Upstream artifacts this stage reads.
    pub fn input_files(self) -> &'static [&'static str] {
        match self {
            Stage::Search => &[],
            Stage::Fetch => &[SEARCH_RESULTS],
            Stage::Select => &[CORPUS_JSONL],
            Stage::Extract => &[RELEVANCE, VOCAB, DTM, CORPUS_JSONL],
            Stage::Synthesize => &[EVIDENCE_JSON],
            Stage::Mine => &[EVIDENCE_JSON, THEMES_JSON],
            Stage::Report => &[
                SEARCH_RESULTS,
                SEARCH_QGS,
                CORPUS_JSONL,
                FETCH_SUMMARY,
                RELEVANCE,
                EVIDENCE_JSON,
                MODEL_JSON,
            ],
        }
    }

    fn fixed_outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Search => &[SEARCH_RESULTS, SEARCH_QGS],
            Stage::Fetch => &[CORPUS_JSONL, CORPUS_INDEX, FETCH_SUMMARY],
            Stage::Select => &[RELEVANCE, VOCAB, DTM],
            Stage::Extract => &[TOPIC_MODEL, EVIDENCE_JSON, EVIDENCE_CSV],
            Stage::Synthesize => &[THEMES_JSON],
            Stage::Mine => &[MODEL_JSON, RULES_CSV, RULES_DOT],
            Stage::Report => &[REPORT_MD, REPORT_JSON],
        }
    }

    /// Files this stage writes, relative to the work directory.
    pub fn output_files(self, protocol: &ReviewProtocol) -> Vec<String> {
        let mut out: Vec<String> = self.fixed_outputs().iter().map(|s| s.to_string()).collect();
        if self == Stage::Synthesize {
            out.extend(protocol.schema.iter().map(|a| theme_csv_path(&a.name)));
        }
        out
    }

    /// The stage that writes `file`.
    pub fn producer_of(file: &str) -> Option<Stage> {
        Stage::ALL
            .into_iter()
            .find(|s| s.fixed_outputs().contains(&file) || (*s == Stage::Synthesize && file.starts_with("synthesize/")))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s}"))
    }
}

pub fn theme_csv_path(attribute: &str) -> String {
    let safe: String = attribute
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("synthesize/themes_{safe}.csv")
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("work directory is locked by another run ({0})")]
    Locked(PathBuf),
    #[error("{stage}: requires stage: {requires}")]
    MissingDependency { stage: Stage, requires: Stage },
    #[error("{stage}: {artifact} does not match the hash recorded by stage {producer}; rerun {producer} or pass --force")]
    HashMismatch {
        stage: Stage,
        artifact: String,
        producer: Stage,
    },
    #[error("{stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status: 1 usage, 2 stage failure, 3 missing dependency.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Protocol(_) => 1,
            PipelineError::MissingDependency { .. } => 3,
            _ => 2,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> PipelineError {
    let context = context.into();
    move |source| PipelineError::Io { context, source }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub status: EntryStatus,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub force: bool,
    pub offline: bool,
    pub exec: Exec,
}

/// Per-query retrieval and QGS scores written by the search stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QgsReport {
    pub qgs_size: usize,
    pub per_query: Vec<QueryScore>,
    /// Score of the union of all queries' results.
    pub combined: Option<QgsScore>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query: String,
    pub retrieved: usize,
    pub score: Option<QgsScore>,
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(workdir: &Path) -> Result<Self, PipelineError> {
        let path = workdir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(io_err(format!("creating {}", path.display()))(e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// One pipeline run against a work directory. Holds the directory lock
/// for its lifetime.
pub struct Pipeline {
    protocol: ReviewProtocol,
    base_dir: PathBuf,
    workdir: PathBuf,
    options: RunOptions,
    protocol_hash: String,
    manifest: RunManifest,
    client: Arc<dyn HttpClient>,
    _lock: Lock,
}

impl Pipeline {
    pub fn open(protocol_path: &Path, workdir: &Path, options: RunOptions) -> Result<Self, PipelineError> {
        let (protocol, base_dir) = load_protocol(protocol_path)?;
        Self::with_protocol(protocol, base_dir, workdir, options)
    }

    pub fn with_protocol(
        protocol: ReviewProtocol,
        base_dir: PathBuf,
        workdir: &Path,
        options: RunOptions,
    ) -> Result<Self, PipelineError> {
        fs::create_dir_all(workdir).map_err(io_err(format!("creating {}", workdir.display())))?;
        let lock = Lock::acquire(workdir)?;
        let manifest = RunManifest::open(workdir).map_err(io_err("reading manifest"))?;
        let protocol_hash = sha256_hex(protocol.to_json().as_bytes());
        let client: Arc<dyn HttpClient> = Arc::new(UreqClient::new(
            &protocol.fetch.user_agent,
            Duration::from_millis(protocol.fetch.timeout_ms),
        ));
        Ok(Self {
            protocol,
            base_dir,
            workdir: workdir.to_path_buf(),
            options,
            protocol_hash,
            manifest,
            client,
            _lock: lock,
        })
    }

    /// Replaces the HTTP client used by live search and fetch.
    pub fn with_client(mut self, client: Arc<dyn HttpClient>) -> Self {
        self.client = client;
        self
    }

    pub fn protocol(&self) -> &ReviewProtocol {
        &self.protocol
    }

    pub fn protocol_hash(&self) -> &str {
        &self.protocol_hash
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.workdir.join(rel)
    }

    pub fn run_all(&mut self) -> Result<Vec<StageReport>, PipelineError> {
        Stage::ALL.into_iter().map(|s| self.run_stage(s)).collect()
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<StageReport, PipelineError> {
        let started_at = Utc::now();
        write_json(&self.path(PROTOCOL_COPY), &self.protocol)
            .map_err(io_err("writing protocol copy"))?;
        let inputs = self.current_inputs(stage)?;

        if !self.options.force {
            if let Some(prev) = self.manifest.latest_success(stage.name()) {
                if prev.inputs == inputs && self.outputs_intact(prev) {
                    let outputs = prev.outputs.clone();
                    let notes = vec!["up-to-date".to_string()];
                    self.record(stage, started_at, inputs, outputs, EntryStatus::UpToDate, notes.clone())?;
                    log::info!("{stage}: up-to-date");
                    return Ok(StageReport {
                        stage,
                        status: EntryStatus::UpToDate,
                        notes,
                    });
                }
            }
        }

        log::info!("{stage}: running");
        match self.execute(stage) {
            Ok(notes) => {
                let mut outputs = BTreeMap::new();
                for rel in stage.output_files(&self.protocol) {
                    let hash = sha256_file(&self.path(&rel)).map_err(io_err(format!("hashing {rel}")))?;
                    outputs.insert(rel, hash);
                }
                self.record(stage, started_at, inputs, outputs, EntryStatus::Ok, notes.clone())?;
                Ok(StageReport {
                    stage,
                    status: EntryStatus::Ok,
                    notes,
                })
            }
            Err(e) => {
                let note = e.to_string();
                self.record(stage, started_at, inputs, BTreeMap::new(), EntryStatus::Failed, vec![note])?;
                Err(e)
            }
        }
    }

    fn record(
        &mut self,
        stage: Stage,
        started_at: chrono::DateTime<Utc>,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
        status: EntryStatus,
        notes: Vec<String>,
    ) -> Result<(), PipelineError> {
        self.manifest
            .append(ManifestEntry {
                stage: stage.name().to_string(),
                started_at,
                finished_at: Utc::now(),
                tool_version: TOOL_VERSION.to_string(),
                rng_seed: self.protocol.rng_seed,
                protocol_hash: self.protocol_hash.clone(),
                inputs,
                outputs,
                status,
                notes,
            })
            .map_err(io_err("appending manifest"))
    }

    fn outputs_intact(&self, entry: &ManifestEntry) -> bool {
        let expected: BTreeSet<String> = entry.outputs.keys().cloned().collect();
        let wanted: BTreeSet<String> = entry
            .stage
            .parse::<Stage>()
            .map(|s| s.output_files(&self.protocol).into_iter().collect())
            .unwrap_or_default();
        expected == wanted
            && entry
                .outputs
                .iter()
                .all(|(rel, hash)| sha256_file(&self.path(rel)).is_ok_and(|h| &h == hash))
    }

    /// Hashes of everything the stage depends on. Fails when an upstream
    /// artifact is missing, or differs from what its producer recorded and
    /// the run is not forced.
    fn current_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut inputs = BTreeMap::new();
        inputs.insert("protocol".to_string(), self.protocol_hash.clone());
        for &rel in stage.input_files() {
            let producer = Stage::producer_of(rel).expect("every input has a producer");
            let path = self.path(rel);
            if !path.is_file() {
                return Err(PipelineError::MissingDependency {
                    stage,
                    requires: producer,
                });
            }
            let hash = sha256_file(&path).map_err(io_err(format!("hashing {rel}")))?;
            let recorded = self
                .manifest
                .latest_success(producer.name())
                .and_then(|e| e.outputs.get(rel));
            if recorded != Some(&hash) && !self.options.force {
                return Err(PipelineError::HashMismatch {
                    stage,
                    artifact: rel.to_string(),
                    producer,
                });
            }
            inputs.insert(rel.to_string(), hash);
        }
        match stage {
            Stage::Search => {
                inputs.insert("mode".into(), self.mode().into());
                for e in &self.protocol.search.engines {
                    if let EngineKind::Fixture { path } = &e.kind {
                        let hash = sha256_file(&self.base_dir.join(path))
                            .unwrap_or_else(|_| "missing".to_string());
                        inputs.insert(format!("engine:{}", e.engine_id), hash);
                    }
                }
            }
            Stage::Fetch => {
                inputs.insert("mode".into(), self.mode().into());
                if let Some(dir) = self.snapshot_dir().filter(|_| self.options.offline) {
                    inputs.insert("snapshots".into(), hash_dir(&dir));
                }
            }
            _ => {}
        }
        Ok(inputs)
    }

    fn mode(&self) -> &'static str {
        if self.options.offline {
            "offline"
        } else {
            "online"
        }
    }

    fn snapshot_dir(&self) -> Option<PathBuf> {
        self.protocol.fetch.snapshot_dir.as_ref().map(|d| self.base_dir.join(d))
    }

    fn tokenizer(&self) -> Tokenizer {
        Tokenizer::from_config(&self.protocol.text)
    }

    fn execute(&self, stage: Stage) -> Result<Vec<String>, PipelineError> {
        match stage {
            Stage::Search => self.search(),
            Stage::Fetch => self.fetch(),
            Stage::Select => self.select(),
            Stage::Extract => self.extract(),
            Stage::Synthesize => self.synthesize(),
            Stage::Mine => self.mine(),
            Stage::Report => report::emit_report(self),
        }
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        atomic_write(&self.path(rel), bytes).map_err(io_err(format!("writing {rel}")))
    }

    fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<(), PipelineError> {
        write_json(&self.path(rel), value).map_err(io_err(format!("writing {rel}")))
    }

    pub(crate) fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T, PipelineError> {
        read_json(&self.path(rel)).map_err(io_err(format!("reading {rel}")))
    }

    pub(crate) fn corpus(&self) -> CorpusStore {
        CorpusStore::new(self.path(CORPUS_DIR))
    }

    pub(crate) fn read_records(&self) -> Result<Vec<SearchResultRecord>, PipelineError> {
        read_jsonl(&self.path(SEARCH_RESULTS)).map_err(io_err(format!("reading {SEARCH_RESULTS}")))
    }

    fn search(&self) -> Result<Vec<String>, PipelineError> {
        let fail = |e: &dyn fmt::Display| PipelineError::Stage {
            stage: Stage::Search,
            message: e.to_string(),
        };
        let (engines, mut warnings) =
            build_engines(&self.protocol, &self.base_dir, self.options.offline, self.client.clone())
                .map_err(|e| fail(&e))?;
        let outcome = run_search(&self.protocol, &engines).map_err(|e| fail(&e))?;
        warnings.extend(outcome.warnings.iter().cloned());

        let qgs = self.protocol.qgs_set();
        let score = |urls: &mut dyn Iterator<Item = &str>| evaluate_urls(urls, &qgs).ok();
        let per_query = self
            .protocol
            .search
            .query_strings
            .iter()
            .map(|q| {
                let urls = outcome.per_query.get(q).cloned().unwrap_or_default();
                QueryScore {
                    query: q.clone(),
                    retrieved: urls.len(),
                    score: score(&mut urls.iter().map(String::as_str)),
                }
            })
            .collect();
        let report = QgsReport {
            qgs_size: qgs.len(),
            per_query,
            combined: score(&mut outcome.records.iter().map(|r| r.url.as_str())),
            warnings: warnings.clone(),
        };
        write_jsonl(&self.path(SEARCH_RESULTS), &outcome.records)
            .map_err(io_err(format!("writing {SEARCH_RESULTS}")))?;
        self.write_json(SEARCH_QGS, &report)?;
        let mut notes = vec![format!("{} unique results", outcome.records.len())];
        notes.extend(warnings);
        Ok(notes)
    }

    fn fetch(&self) -> Result<Vec<String>, PipelineError> {
        let fail = |e: &dyn fmt::Display| PipelineError::Stage {
            stage: Stage::Fetch,
            message: e.to_string(),
        };
        let records = self.read_records()?;
        let tokenizer = self.tokenizer();
        let store = self.corpus();
        let (docs, summary) = if self.options.offline {
            let snapshots = match self.snapshot_dir() {
                Some(dir) => SnapshotSet::load(&dir).map_err(|e| fail(&e))?,
                None => SnapshotSet::empty(),
            };
            let existing = store.read_map().map_err(io_err("reading corpus store"))?;
            let existing = existing.into_values().map(|d| (d.url.clone(), d)).collect();
            replay_documents(&records, &snapshots, &existing, &tokenizer)
        } else {
            fetch_documents(&records, &self.protocol.fetch, self.client.as_ref(), &tokenizer)
                .map_err(|e| fail(&e))?
        };
        store.write(&docs).map_err(io_err("writing corpus store"))?;
        self.write_json(FETCH_SUMMARY, &summary)?;
        Ok(vec![format!("{} of {} pages fetched", summary.ok, summary.attempted)])
    }

    fn select(&self) -> Result<Vec<String>, PipelineError> {
        let exec = self.options.exec;
        let tokenizer = self.tokenizer();
        let lexicon = SeedLexicon::from_schema(&self.protocol.schema, &tokenizer);
        let criteria = CompiledCriteria::new(&self.protocol.inclusion, &tokenizer);
        let docs = self.corpus().read_all().map_err(io_err("reading corpus store"))?;
        let ok: Vec<_> = docs.iter().filter(|d| d.is_ok()).collect();
        let tokenized: Vec<TokenizedDoc> =
            exec.map(&ok, |d| tokenizer.tokenize(&d.plain_text).with_id(d.doc_id.clone()));
        let scores: Vec<RelevanceScore> =
            exec.map(&tokenized, |t| score_relevance(t, &lexicon, &criteria));
        let selected: Vec<TokenizedDoc> = tokenized
            .into_iter()
            .zip(&scores)
            .filter(|(_, s)| s.selected)
            .map(|(t, _)| t)
            .collect();
        if selected.is_empty() {
            return Err(PipelineError::Stage {
                stage: Stage::Select,
                message: format!("none of {} fetched pages met the inclusion criteria", ok.len()),
            });
        }
        let m = build_matrix_with(&selected, self.protocol.text.min_df, self.protocol.text.max_df_ratio, exec)
            .map_err(|e| PipelineError::Stage {
                stage: Stage::Select,
                message: e.to_string(),
            })?;
        self.write_json(RELEVANCE, &scores)?;
        self.write(VOCAB, m.vocab_tsv().as_bytes())?;
        self.write(DTM, m.to_triplets().as_bytes())?;
        Ok(vec![
            format!("{} of {} pages selected", selected.len(), ok.len()),
            format!(
                "selection precedes topic fitting: matrix built from the {} selected pages ({} terms)",
                selected.len(),
                m.n_terms()
            ),
        ])
    }

    fn extract(&self) -> Result<Vec<String>, PipelineError> {
        let fail = |e: &dyn fmt::Display| PipelineError::Stage {
            stage: Stage::Extract,
            message: e.to_string(),
        };
        let exec = self.options.exec;
        let p = &self.protocol;
        let tokenizer = self.tokenizer();
        let lexicon = SeedLexicon::from_schema(&p.schema, &tokenizer);
        let scores: Vec<RelevanceScore> = self.read_json(RELEVANCE)?;
        let ids: Vec<String> = scores.iter().filter(|s| s.selected).map(|s| s.doc_id.clone()).collect();
        let vocab = fs::read_to_string(self.path(VOCAB)).map_err(io_err(format!("reading {VOCAB}")))?;
        let dtm = fs::read_to_string(self.path(DTM)).map_err(io_err(format!("reading {DTM}")))?;
        let m = DocumentTermMatrix::from_files(&ids, &vocab, &dtm).map_err(|e| fail(&e))?;

        let params = TopicParams {
            k: p.topic_count(),
            alpha: p.topic_alpha(),
            beta: p.topics.beta,
            seed_boost: p.topics.seed_boost,
            iterations: p.topics.iterations,
            rng_seed: p.rng_seed,
        };
        let fit = fit_topics(&m, &lexicon, params).map_err(|e| fail(&e))?;
        let model = fit.model;

        let store = self.corpus().read_map().map_err(io_err("reading corpus store"))?;
        let docs = ids
            .iter()
            .map(|id| store.get(id).ok_or_else(|| fail(&format!("selected page {id} missing from corpus store"))))
            .collect::<Result<Vec<_>, _>>()?;
        let seg_params = SegmentParams {
            min_assignment_score: p.topics.min_assignment_score,
            seed_weight: p.topics.seed_weight,
            topic_weight: p.topics.topic_weight,
        };
        let segments: Vec<_> = exec
            .map(&docs, |d| {
                let t = tokenizer.tokenize(&d.plain_text).with_id(d.doc_id.clone());
                segment_document(&t, &d.plain_text, &lexicon, &model, &seg_params)
            })
            .into_iter()
            .flatten()
            .collect();
        let n_segments = segments.len();
        let table = build_evidence_table(&ids, &p.attribute_names(), segments).map_err(|e| fail(&e))?;
        let csv = table.to_csv().map_err(|e| fail(&e))?;

        self.write_json(TOPIC_MODEL, &model)?;
        self.write_json(EVIDENCE_JSON, &table)?;
        self.write(EVIDENCE_CSV, csv.as_bytes())?;
        let mut notes = vec![
            "topic model fitted on selected pages only".to_string(),
            format!("{n_segments} segments over {} rows", table.rows.len()),
        ];
        notes.extend(fit.warnings);
        Ok(notes)
    }

    fn synthesize(&self) -> Result<Vec<String>, PipelineError> {
        let fail = |e: &dyn fmt::Display| PipelineError::Stage {
            stage: Stage::Synthesize,
            message: e.to_string(),
        };
        let table: EvidenceTable = self.read_json(EVIDENCE_JSON)?;
        let themes = synthesize(&table, &self.protocol, &self.tokenizer(), self.options.exec)
            .map_err(|e| fail(&e))?;
        self.write_json(THEMES_JSON, &themes)?;
        for attr in &self.protocol.schema {
            let csv = themes.column_csv(&attr.name, &table).map_err(|e| fail(&e))?;
            self.write(&theme_csv_path(&attr.name), csv.as_bytes())?;
        }
        Ok(themes
            .columns
            .iter()
            .map(|c| format!("{}: {} themes, {} unassigned, {} near ties", c.attribute, c.themes.len(), c.unassigned.len(), c.near_ties.len()))
            .collect())
    }

    fn mine(&self) -> Result<Vec<String>, PipelineError> {
        let fail = |e: &dyn fmt::Display| PipelineError::Stage {
            stage: Stage::Mine,
            message: e.to_string(),
        };
        let p = &self.protocol;
        let table: EvidenceTable = self.read_json(EVIDENCE_JSON)?;
        let themes: ThemeSet = self.read_json(THEMES_JSON)?;
        let transactions = build_transactions(&table, &themes);
        let rules = if transactions.is_empty() {
            Vec::new()
        } else {
            let frequent = mine_frequent_itemsets(
                &transactions,
                p.mining.min_support,
                p.mining.max_itemset_size,
                self.options.exec,
            )
            .map_err(|e| fail(&e))?;
            generate_rules(&frequent, p.mining.min_confidence)
        };
        let n_rules = rules.len();
        let model = assemble_model(
            themes,
            rules,
            Provenance {
                manifest: MANIFEST_FILE.to_string(),
                protocol_hash: self.protocol_hash.clone(),
                rng_seed: p.rng_seed,
            },
        )
        .map_err(|e| fail(&e))?;
        self.write(MODEL_JSON, format!("{}\n", model.to_json()).as_bytes())?;
        self.write(RULES_CSV, model.rules_csv().map_err(|e| fail(&e))?.as_bytes())?;
        self.write(RULES_DOT, model.to_dot().as_bytes())?;
        Ok(vec![format!("{} transactions, {n_rules} rules", transactions.len())])
    }
}

/// Combined hash of every regular file directly inside `dir`.
fn hash_dir(dir: &Path) -> String {
    let Ok(entries) = fs::read_dir(dir) else {
        return "missing".to_string();
    };
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    files.sort();
    let listing: String = files
        .iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            format!("{name}\t{}\n", sha256_file(p).unwrap_or_default())
        })
        .collect();
    sha256_hex(listing.as_bytes())
}

/// Funnel counts from retrieval down to segmented rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub retrieved: usize,
    pub fetched_ok: usize,
    pub selected: usize,
    /// Evidence-table rows with at least one segment.
    pub segmented: usize,
}

impl Funnel {
    pub fn is_monotone(&self) -> bool {
        self.retrieved >= self.fetched_ok && self.fetched_ok >= self.selected && self.selected >= self.segmented
    }

    pub fn compute(
        records: &[SearchResultRecord],
        fetch: &FetchSummary,
        relevance: &[RelevanceScore],
        table: &EvidenceTable,
    ) -> Self {
        Self {
            retrieved: records.len(),
            fetched_ok: fetch.ok,
            selected: relevance.iter().filter(|s| s.selected).count(),
            segmented: table
                .rows
                .iter()
                .filter(|r| r.cells.iter().any(|c| !c.segments.is_empty()))
                .count(),
        }
    }
}
