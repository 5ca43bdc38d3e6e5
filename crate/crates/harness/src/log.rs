//! Append-only JSONL results log.
//!
//! One object per line:
//!
//! ```text
//! {"key":"d01-i1-p1|BFI|bfi_01|mock","ts":1760000000000,"response":{...}}
//! {"key":"d01-i1-p1-s90000|gen|3|mock","ts":...,"generation":{...}}
//! {"key":"d01-i1-p1-s90000|predict|mock","ts":...,"prediction":{...}}
//! ```
//!
//! A crash can leave a partial last line; opening for append drops it.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use synthpersona_core::scoring::ResponseRecord;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{path}: key {key} recorded twice")]
    DuplicateKey { path: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub profile_id: String,
    pub repeat: u32,
    pub backend: String,
    /// `None` when every attempt failed.
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub profile_id: String,
    pub predictor: String,
    /// EXT, AGR, CON, NEU, OPE.
    pub scores: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub key: String,
    /// Milliseconds since the epoch.
    pub ts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionRecord>,
}

pub fn response_key(profile_id: &str, instrument_id: &str, item_id: &str, backend: &str) -> String {
    format!("{profile_id}|{instrument_id}|{item_id}|{backend}")
}

pub fn generation_key(profile_id: &str, repeat: u32, backend: &str) -> String {
    format!("{profile_id}|gen|{repeat}|{backend}")
}

pub fn prediction_key(profile_id: &str, predictor: &str) -> String {
    format!("{profile_id}|predict|{predictor}")
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl LogEntry {
    pub fn response(record: ResponseRecord) -> Self {
        let key = response_key(&record.profile_id, &record.instrument_id, &record.item_id, &record.backend);
        Self { key, ts: now_ms(), response: Some(record), generation: None, prediction: None }
    }

    pub fn generation(record: GenerationRecord) -> Self {
        let key = generation_key(&record.profile_id, record.repeat, &record.backend);
        Self { key, ts: now_ms(), response: None, generation: Some(record), prediction: None }
    }

    pub fn prediction(record: PredictionRecord) -> Self {
        let key = prediction_key(&record.profile_id, &record.predictor);
        Self { key, ts: now_ms(), response: None, generation: None, prediction: Some(record) }
    }
}

/// Parsed log plus the byte length of its intact prefix.
#[derive(Debug, Default)]
pub struct LogContents {
    pub entries: Vec<LogEntry>,
    pub intact_len: u64,
    /// A partial trailing line was ignored.
    pub torn: bool,
}

impl LogContents {
    pub fn keys(&self) -> HashSet<&str> {
        self.entries.iter().map(|e| e.key.as_str()).collect()
    }

    pub fn responses(&self) -> impl Iterator<Item = &ResponseRecord> {
        self.entries.iter().filter_map(|e| e.response.as_ref())
    }

    pub fn generations(&self) -> impl Iterator<Item = &GenerationRecord> {
        self.entries.iter().filter_map(|e| e.generation.as_ref())
    }

    pub fn predictions(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.entries.iter().filter_map(|e| e.prediction.as_ref())
    }
}

/// Reads a log. A missing file is an empty log. Only the final line may be
/// damaged; anything earlier is corruption.
pub fn read_log(path: &Path) -> Result<LogContents, LogError> {
    let io = |source| LogError::Io { path: path.display().to_string(), source };
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes).map_err(io)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LogContents::default()),
        Err(e) => return Err(io(e)),
    };
    let mut out = LogContents::default();
    let mut seen = HashSet::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let end = bytes[offset..].iter().position(|&b| b == b'\n').map(|p| offset + p);
        let line = &bytes[offset..end.unwrap_or(bytes.len())];
        let parsed = serde_json::from_slice::<LogEntry>(line);
        match (parsed, end) {
            (Ok(entry), Some(end)) => {
                if !seen.insert(entry.key.clone()) {
                    return Err(LogError::DuplicateKey { path: path.display().to_string(), key: entry.key });
                }
                out.entries.push(entry);
                offset = end + 1;
                out.intact_len = offset as u64;
            }
            (_, None) => {
                out.torn = true;
                break;
            }
            (Err(e), Some(end)) if end + 1 == bytes.len() => {
                log::warn!("{}:{line_no}: dropping damaged final line ({e})", path.display());
                out.torn = true;
                break;
            }
            (Err(e), Some(_)) => {
                return Err(LogError::Corrupt { path: path.display().to_string(), line: line_no, message: e.to_string() })
            }
        }
    }
    Ok(out)
}

/// Single writer for a log file. Lines are buffered and synced to disk every
/// `batch` records and on [`LogWriter::finish`].
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
    batch: usize,
    pending: usize,
    written: usize,
}

impl LogWriter {
    /// Opens `path` for appending after truncating any torn tail. Returns the
    /// entries already present.
    pub fn resume(path: &Path, batch: usize) -> Result<(Self, LogContents), LogError> {
        let io = |source| LogError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let contents = read_log(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if contents.torn {
            file.set_len(contents.intact_len).map_err(io)?;
        }
        let writer =
            Self { path: path.to_path_buf(), out: BufWriter::with_capacity(1 << 20, file), batch: batch.max(1), pending: 0, written: 0 };
        Ok((writer, contents))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<(), LogError> {
        let io = |source| LogError::Io { path: self.path.display().to_string(), source };
        serde_json::to_writer(&mut self.out, entry).map_err(|e| io(e.into()))?;
        self.out.write_all(b"\n").map_err(io)?;
        self.pending += 1;
        self.written += 1;
        if self.pending >= self.batch {
            self.sync()?;
        }
        Ok(())
    }

    pub fn sync(&mut self) -> Result<(), LogError> {
        let io = |source| LogError::Io { path: self.path.display().to_string(), source };
        self.out.flush().map_err(io)?;
        self.out.get_ref().sync_data().map_err(io)?;
        self.pending = 0;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<usize, LogError> {
        self.sync()?;
        Ok(self.written)
    }
}

/// Entries with timestamps zeroed, sorted by key: equal for two logs that
/// hold the same records in any order.
pub fn canonical_lines(path: &Path) -> Result<Vec<String>, LogError> {
    let mut entries = read_log(path)?.entries;
    entries.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(entries
        .into_iter()
        .map(|mut e| {
            e.ts = 0;
            serde_json::to_string(&e).expect("log entries serialize")
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(item: &str, raw: u8) -> LogEntry {
        LogEntry::response(ResponseRecord::answered("p1", "BFI", item, raw, "mock"))
    }

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs/run.jsonl");
        let (mut w, prior) = LogWriter::resume(&path, 2).unwrap();
        assert!(prior.entries.is_empty());
        for (i, raw) in [3, 4, 5].into_iter().enumerate() {
            w.append(&entry(&format!("bfi_0{i}"), raw)).unwrap();
        }
        assert_eq!(w.finish().unwrap(), 3);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"key\":\"p1|BFI|bfi_09").unwrap();
        drop(f);
        let read = read_log(&path).unwrap();
        assert_eq!((read.entries.len(), read.torn), (3, true));
        let (mut w, prior) = LogWriter::resume(&path, 10).unwrap();
        assert_eq!(prior.entries.len(), 3);
        w.append(&entry("bfi_09", 1)).unwrap();
        w.finish().unwrap();
        let read = read_log(&path).unwrap();
        assert_eq!((read.entries.len(), read.torn), (4, false));
        assert_eq!(read.entries[3].response.as_ref().unwrap().raw, Some(1));
    }

    #[test]
    fn duplicates_and_midfile_damage_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let line = serde_json::to_string(&entry("bfi_01", 2)).unwrap();
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        assert!(matches!(read_log(&path), Err(LogError::DuplicateKey { .. })));
        std::fs::write(&path, format!("garbage\n{line}\n")).unwrap();
        assert!(matches!(read_log(&path), Err(LogError::Corrupt { line: 1, .. })));
    }

    #[test]
    fn canonical_form_ignores_order_and_time() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        let mut e1 = entry("bfi_01", 2);
        let e2 = entry("bfi_02", 3);
        let mut text_a = String::new();
        for e in [&e1, &e2] {
            text_a += &(serde_json::to_string(e).unwrap() + "\n");
        }
        e1.ts += 999;
        let text_b = format!("{}\n{}\n", serde_json::to_string(&e2).unwrap(), serde_json::to_string(&e1).unwrap());
        std::fs::write(&a, text_a).unwrap();
        std::fs::write(&b, text_b).unwrap();
        assert_eq!(canonical_lines(&a).unwrap(), canonical_lines(&b).unwrap());
    }
}
