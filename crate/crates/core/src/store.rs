//! File persistence: atomic writes, JSON Lines and the page corpus store.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::harvest::WebDocument;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CORPUS_INDEX_FILE: &str = "corpus.idx.json";

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> io::Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(io::Error::other)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    atomic_write(path, to_jsonl(items)?.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let f = io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Pages persisted as `corpus.jsonl` in doc id order, with a
/// `corpus.idx.json` map from doc id to byte offset.
#[derive(Clone, Debug)]
pub struct CorpusStore {
    dir: PathBuf,
}

impl CorpusStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.dir.join(CORPUS_FILE)
    }

    pub fn index_path(&self) -> PathBuf {
        self.dir.join(CORPUS_INDEX_FILE)
    }

    pub fn exists(&self) -> bool {
        self.corpus_path().is_file()
    }

    pub fn write(&self, docs: &[WebDocument]) -> io::Result<()> {
        let mut sorted: Vec<&WebDocument> = docs.iter().collect();
        sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut body = String::new();
        let mut index = BTreeMap::new();
        for d in sorted {
            index.insert(d.doc_id.clone(), body.len());
            body.push_str(&serde_json::to_string(d).map_err(io::Error::other)?);
            body.push('\n');
        }
        atomic_write(&self.corpus_path(), body.as_bytes())?;
        write_json(&self.index_path(), &index)
    }

    pub fn read_all(&self) -> io::Result<Vec<WebDocument>> {
        read_jsonl(&self.corpus_path())
    }

    /// Reads every page keyed by doc id, or an empty map if no store exists.
    pub fn read_map(&self) -> io::Result<BTreeMap<String, WebDocument>> {
        if !self.exists() {
            return Ok(BTreeMap::new());
        }
        Ok(self.read_all()?.into_iter().map(|d| (d.doc_id.clone(), d)).collect())
    }

    /// Looks up a single page through the offset index.
    pub fn get(&self, doc_id: &str) -> io::Result<Option<WebDocument>> {
        let index: BTreeMap<String, u64> = read_json(&self.index_path())?;
        let Some(&offset) = index.get(doc_id) else {
            return Ok(None);
        };
        let mut f = io::BufReader::new(fs::File::open(self.corpus_path())?);
        io::Seek::seek(&mut f, io::SeekFrom::Start(offset))?;
        let mut line = String::new();
        f.read_line(&mut line)?;
        serde_json::from_str(&line)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;
    use chrono::DateTime;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, &[1, 2, 3]).unwrap();
        assert_eq!(read_jsonl::<i32>(&p).unwrap(), [1, 2, 3]);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn corpus_store_index() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::new(dir.path());
        let t = Tokenizer::default();
        let at = DateTime::UNIX_EPOCH;
        let docs = vec![
            WebDocument::from_response("http://b.example/", 200, "<p>beta page</p>".into(), at, &t),
            WebDocument::from_response("http://a.example/", 200, "<p>alpha page</p>".into(), at, &t),
        ];
        store.write(&docs).unwrap();
        let all = store.read_all().unwrap();
        assert!(all[0].doc_id < all[1].doc_id);
        for d in &docs {
            assert_eq!(store.get(&d.doc_id).unwrap().as_ref(), Some(d));
        }
        assert_eq!(store.get("nope").unwrap(), None);
        assert_eq!(store.read_map().unwrap().len(), 2);
    }
}
