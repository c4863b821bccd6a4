//! Question and assignment persistence.
//!
//! Both drivers keep the whole store as one [`StoreDocument`]. Writers are
//! serialized by a gate, build the next document off to the side, persist it,
//! then publish it; readers only ever see published documents and never wait
//! on I/O.
//!
//! The file driver writes `<path>.tmp`, syncs it, and renames it over `<path>`,
//! so an interrupted write leaves the previous document intact.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Assignment, AssignmentId, Question, QuestionId};

/// A captured student response. Only stored when response persistence is on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub question_id: QuestionId,
    pub response_text: String,
    pub feedback_holistic_copy: Option<String>,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("id {0} already exists")]
    DuplicateId(String),
    #[error("id {0} not found")]
    NotFound(String),
    #[error("expected version {expected}, stored version is {actual}")]
    VersionConflict { expected: u64, actual: u64 },
    #[error("response persistence is disabled")]
    PersistenceDisabled,
    #[error("storage I/O failed: {0}")]
    Io(String),
    #[error("store file is corrupt: {0}")]
    Corrupt(String),
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::DuplicateId(_) => "DuplicateId",
            StoreError::NotFound(_) => "NotFound",
            StoreError::VersionConflict { .. } => "VersionConflict",
            StoreError::PersistenceDisabled => "PersistenceDisabled",
            StoreError::Io(_) => "StorageIo",
            StoreError::Corrupt(_) => "StorageCorrupt",
        }
    }
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

/// Persistence contract shared by all drivers.
///
/// Every successful write is visible to the next read on the same handle.
pub trait QuestionStore: Send + Sync {
    fn driver_id(&self) -> &str;

    fn put_question(&self, q: &Question) -> Result<(), StoreError>;

    fn get_question(&self, id: &QuestionId) -> Result<Question, StoreError>;

    /// Compare-and-set: stores `q` as version `expected_version + 1` if the
    /// stored version equals `expected_version`. Returns the stored value.
    fn update_question(&self, q: &Question, expected_version: u64) -> Result<Question, StoreError>;

    /// Questions in insertion order; `Some(id)` keeps only that assignment's.
    fn list_questions(&self, assignment_id: Option<&AssignmentId>) -> Result<Vec<Question>, StoreError>;

    fn put_assignment(&self, a: &Assignment) -> Result<(), StoreError>;

    fn get_assignment(&self, id: &AssignmentId) -> Result<Assignment, StoreError>;

    fn record_response(&self, r: &ResponseRecord) -> Result<(), StoreError>;

    fn responses(&self) -> Result<Vec<ResponseRecord>, StoreError>;

    fn persists_responses(&self) -> bool;
}

/// The whole store as serialized by the file driver.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreDocument {
    pub questions: Vec<Question>,
    pub assignments: Vec<Assignment>,
    pub responses: Vec<ResponseRecord>,
}

#[derive(Debug, Clone, Default)]
struct Snapshot {
    doc: StoreDocument,
    questions: HashMap<QuestionId, usize>,
    assignments: HashMap<AssignmentId, usize>,
}

impl Snapshot {
    fn from_doc(doc: StoreDocument) -> Result<Self, StoreError> {
        let mut questions = HashMap::new();
        for (i, q) in doc.questions.iter().enumerate() {
            if questions.insert(q.id, i).is_some() {
                return Err(StoreError::Corrupt(format!("question {} stored twice", q.id)));
            }
        }
        let mut assignments = HashMap::new();
        for (i, a) in doc.assignments.iter().enumerate() {
            if assignments.insert(a.id, i).is_some() {
                return Err(StoreError::Corrupt(format!("assignment {} stored twice", a.id)));
            }
        }
        Ok(Self {
            doc,
            questions,
            assignments,
        })
    }
}

/// Where published documents go.
pub trait Backend: Send + Sync {
    fn driver_id(&self) -> &'static str;

    fn persist(&self, doc: &StoreDocument) -> Result<(), StoreError>;
}

#[derive(Debug, Default)]
pub struct Memory;

impl Backend for Memory {
    fn driver_id(&self) -> &'static str {
        "memory"
    }

    fn persist(&self, _doc: &StoreDocument) -> Result<(), StoreError> {
        Ok(())
    }
}

#[derive(Debug)]
pub struct JsonFile {
    path: PathBuf,
    sync: bool,
    fail_before_rename: AtomicBool,
}

impl JsonFile {
    fn tmp_path(path: &Path) -> PathBuf {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    }

    fn load(path: &Path) -> Result<StoreDocument, StoreError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(StoreDocument::default()),
            Err(e) => Err(e.into()),
        }
    }
}

impl Backend for JsonFile {
    fn driver_id(&self) -> &'static str {
        "file"
    }

    fn persist(&self, doc: &StoreDocument) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec(doc).map_err(|e| StoreError::Io(e.to_string()))?;
        let tmp = Self::tmp_path(&self.path);
        let mut file = File::create(&tmp)?;
        file.write_all(&bytes)?;
        if self.sync {
            file.sync_all()?;
        }
        drop(file);
        if self.fail_before_rename.swap(false, Ordering::SeqCst) {
            return Err(StoreError::Io("injected failure before rename".into()));
        }
        fs::rename(&tmp, &self.path)?;
        if self.sync {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                // directory fsync is not available everywhere
                let _ = File::open(dir).and_then(|d| d.sync_all());
            }
        }
        Ok(())
    }
}

pub struct DocumentStore<B: Backend> {
    backend: B,
    persist_responses: bool,
    published: RwLock<Arc<Snapshot>>,
    write_gate: Mutex<()>,
}

pub type MemoryStore = DocumentStore<Memory>;
pub type FileStore = DocumentStore<JsonFile>;

impl MemoryStore {
    pub fn new(persist_responses: bool) -> Self {
        Self::with_backend(Memory, Snapshot::default(), persist_responses)
    }
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new(false)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FileStoreOptions {
    pub persist_responses: bool,
    /// fsync the document and its directory on every write.
    pub sync: bool,
}

impl Default for FileStoreOptions {
    fn default() -> Self {
        Self {
            persist_responses: false,
            sync: true,
        }
    }
}

impl FileStore {
    /// Opens the store at `path`, creating nothing until the first write. A
    /// leftover temp file from an interrupted write is discarded.
    pub fn open(path: impl Into<PathBuf>, options: FileStoreOptions) -> Result<Self, StoreError> {
        let path = path.into();
        let tmp = JsonFile::tmp_path(&path);
        if tmp.exists() {
            tracing::warn!(path = %tmp.display(), "discarding temp file from an interrupted write");
            fs::remove_file(&tmp)?;
        }
        let snapshot = Snapshot::from_doc(JsonFile::load(&path)?)?;
        let backend = JsonFile {
            path,
            sync: options.sync,
            fail_before_rename: AtomicBool::new(false),
        };
        Ok(Self::with_backend(backend, snapshot, options.persist_responses))
    }

    pub fn path(&self) -> &Path {
        &self.backend.path
    }

    /// Makes the next write fail after the temp file is written but before it
    /// is renamed into place.
    #[doc(hidden)]
    pub fn inject_failure_before_rename(&self) {
        self.backend.fail_before_rename.store(true, Ordering::SeqCst);
    }
}

impl<B: Backend> DocumentStore<B> {
    fn with_backend(backend: B, snapshot: Snapshot, persist_responses: bool) -> Self {
        Self {
            backend,
            persist_responses,
            published: RwLock::new(Arc::new(snapshot)),
            write_gate: Mutex::new(()),
        }
    }

    fn current(&self) -> Arc<Snapshot> {
        self.published.read().unwrap().clone()
    }

    /// Applies `change` to a copy of the current snapshot, persists it and
    /// publishes it. Nothing is published if `change` or persistence fails.
    fn write<T>(&self, change: impl FnOnce(&mut Snapshot) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let _gate = self.write_gate.lock().unwrap();
        let mut next = (*self.current()).clone();
        let out = change(&mut next)?;
        self.backend.persist(&next.doc)?;
        *self.published.write().unwrap() = Arc::new(next);
        Ok(out)
    }

    pub fn document(&self) -> StoreDocument {
        self.current().doc.clone()
    }
}

impl<B: Backend> QuestionStore for DocumentStore<B> {
    fn driver_id(&self) -> &str {
        self.backend.driver_id()
    }

    fn put_question(&self, q: &Question) -> Result<(), StoreError> {
        self.write(|s| {
            if s.questions.contains_key(&q.id) {
                return Err(StoreError::DuplicateId(q.id.to_string()));
            }
            s.questions.insert(q.id, s.doc.questions.len());
            s.doc.questions.push(q.clone());
            Ok(())
        })
    }

    fn get_question(&self, id: &QuestionId) -> Result<Question, StoreError> {
        let snap = self.current();
        snap.questions
            .get(id)
            .map(|i| snap.doc.questions[*i].clone())
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    fn update_question(&self, q: &Question, expected_version: u64) -> Result<Question, StoreError> {
        self.write(|s| {
            let i = *s
                .questions
                .get(&q.id)
                .ok_or_else(|| StoreError::NotFound(q.id.to_string()))?;
            let stored = &mut s.doc.questions[i];
            if stored.version != expected_version {
                return Err(StoreError::VersionConflict {
                    expected: expected_version,
                    actual: stored.version,
                });
            }
            let next = Question {
                version: stored.version + 1,
                created_at: stored.created_at,
                ..q.clone()
            };
            *stored = next.clone();
            Ok(next)
        })
    }

    fn list_questions(&self, assignment_id: Option<&AssignmentId>) -> Result<Vec<Question>, StoreError> {
        let snap = self.current();
        Ok(snap
            .doc
            .questions
            .iter()
            .filter(|q| assignment_id.is_none() || q.assignment_id.as_ref() == assignment_id)
            .cloned()
            .collect())
    }

    fn put_assignment(&self, a: &Assignment) -> Result<(), StoreError> {
        self.write(|s| {
            if s.assignments.contains_key(&a.id) {
                return Err(StoreError::DuplicateId(a.id.to_string()));
            }
            s.assignments.insert(a.id, s.doc.assignments.len());
            s.doc.assignments.push(a.clone());
            Ok(())
        })
    }

    fn get_assignment(&self, id: &AssignmentId) -> Result<Assignment, StoreError> {
        let snap = self.current();
        snap.assignments
            .get(id)
            .map(|i| snap.doc.assignments[*i].clone())
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    fn record_response(&self, r: &ResponseRecord) -> Result<(), StoreError> {
        if !self.persist_responses {
            return Err(StoreError::PersistenceDisabled);
        }
        self.write(|s| {
            s.doc.responses.push(r.clone());
            Ok(())
        })
    }

    fn responses(&self) -> Result<Vec<ResponseRecord>, StoreError> {
        Ok(self.current().doc.responses.clone())
    }

    fn persists_responses(&self) -> bool {
        self.persist_responses
    }
}
