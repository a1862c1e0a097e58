use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{request_digest, BackendError, ChatBackend, ChatMessage};

/// One JSONL line of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub backend_id: String,
    pub request: Vec<ChatMessage>,
    pub response: String,
}

/// Append-only JSONL sink shared by every backend recording into it.
#[derive(Debug, Clone)]
pub struct Transcript {
    file: Arc<Mutex<File>>,
}

/// Opens (truncating) `sink` for recording.
pub fn record_session(sink: impl AsRef<Path>) -> Result<Transcript, BackendError> {
    let file = OpenOptions::new().create(true).write(true).truncate(true).open(sink)?;
    Ok(Transcript { file: Arc::new(Mutex::new(file)) })
}

impl Transcript {
    pub fn append(&self, record: &TranscriptRecord) -> Result<(), BackendError> {
        let mut line = serde_json::to_string(record).expect("transcript record serializes");
        line.push('\n');
        let mut f = self.file.lock().expect("transcript lock");
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn wrap(&self, inner: Arc<dyn ChatBackend>) -> Arc<dyn ChatBackend> {
        Arc::new(RecordingBackend { inner, transcript: self.clone() })
    }
}

pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    transcript: Transcript,
}

impl ChatBackend for RecordingBackend {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let response = self.inner.complete(messages)?;
        self.transcript.append(&TranscriptRecord {
            digest: request_digest(messages),
            backend_id: self.inner.id().to_string(),
            request: messages.to_vec(),
            response: response.clone(),
        })?;
        Ok(response)
    }
}

/// Answers each request with the next recorded response for its digest.
/// Repeated identical requests are served in recording order.
#[derive(Debug)]
pub struct ReplayBackend {
    id: String,
    queues: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        let mut queues: HashMap<String, VecDeque<String>> = HashMap::new();
        for r in records {
            queues.entry(r.digest).or_default().push_back(r.response);
        }
        ReplayBackend { id: "replay".to_string(), queues: Mutex::new(queues) }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("transcript line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn remaining(&self) -> usize {
        self.queues.lock().expect("replay lock").values().map(VecDeque::len).sum()
    }
}

impl ChatBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let digest = request_digest(messages);
        self.queues
            .lock()
            .expect("replay lock")
            .get_mut(&digest)
            .and_then(VecDeque::pop_front)
            .ok_or(BackendError::ReplayMiss(digest))
    }
}
