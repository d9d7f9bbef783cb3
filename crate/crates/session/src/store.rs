//! Concurrent session registry with optional JSONL event logs.
//!
//! Each session has its own writer lock, so submissions to one session never
//! wait on another. Reads go through a `watch` snapshot and never take the
//! writer lock.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use cakecut::oracle::Query;
use cakecut::protocol::PieceList;
use cakecut::Rational;
use serde::Serialize;
use thiserror::Error;
use tokio::sync::watch;

use crate::session::{Event, Phase, Session, SessionConfig, SessionError, SessionResult};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("event log: {0}")]
    Io(#[from] io::Error),
    #[error("event log {path}: line {line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Seat {
    pub id: u32,
    pub name: String,
}

/// Read-side view of a session, republished after every accepted mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub id: String,
    pub phase: Phase,
    pub guests: Vec<Seat>,
    pub secret: Seat,
    pub queries_answered: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<PieceList>,
    /// Only published once the session is complete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<String>>,
    #[serde(skip)]
    pub outstanding: Option<Query>,
    #[serde(skip)]
    pub result: Option<SessionResult>,
}

impl Snapshot {
    fn of(s: &Session) -> Self {
        let cfg = s.config();
        let transcript = s.transcript();
        let complete = s.phase() == Phase::Complete;
        Snapshot {
            id: s.id().to_string(),
            phase: s.phase(),
            guests: s
                .roster()
                .guests()
                .zip(&cfg.guests)
                .map(|(g, name)| Seat {
                    id: g.get(),
                    name: name.clone(),
                })
                .collect(),
            secret: Seat {
                id: s.roster().secret_id(),
                name: cfg.secret.clone(),
            },
            queries_answered: transcript.len(),
            pieces: s.pieces(),
            transcript: complete.then(|| transcript.entries().iter().map(ToString::to_string).collect()),
            outstanding: s.outstanding().cloned(),
            result: s.result().cloned(),
        }
    }

    /// The outstanding query for seat `agent`, if any. The secret seat never
    /// has one.
    pub fn next_query(&self, agent: u32) -> Result<Option<&Query>, SessionError> {
        if agent == self.secret.id {
            return Ok(None);
        }
        if agent == 0 || agent as usize > self.guests.len() {
            return Err(SessionError::Validation(format!("unknown agent {agent}")));
        }
        Ok(self.outstanding.as_ref().filter(|q| q.agent().get() == agent))
    }
}

struct Handle {
    machine: Mutex<Session>,
    view: watch::Sender<Arc<Snapshot>>,
}

pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    log_dir: Option<PathBuf>,
}

impl Default for SessionStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            log_dir: None,
        }
    }

    /// Opens a store backed by `dir`, replaying every `*.jsonl` log in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let store = SessionStore {
            sessions: RwLock::new(HashMap::new()),
            log_dir: Some(dir.clone()),
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let events = read_log(&path)?;
            let session = Session::replay(id.clone(), &events)?;
            store.insert(session);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("poisoned").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn insert(&self, session: Session) -> Arc<Snapshot> {
        let snap = Arc::new(Snapshot::of(&session));
        let (view, _) = watch::channel(snap.clone());
        let handle = Arc::new(Handle {
            machine: Mutex::new(session),
            view,
        });
        self.sessions
            .write()
            .expect("poisoned")
            .insert(snap.id.clone(), handle);
        snap
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, SessionError> {
        self.sessions
            .read()
            .expect("poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    pub fn create(&self, config: SessionConfig) -> Result<Arc<Snapshot>, StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(id.clone(), config)?;
        if let Some(path) = self.log_path(&id) {
            append_events(&path, session.events())?;
        }
        Ok(self.insert(session))
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<Snapshot>, SessionError> {
        Ok(self.handle(id)?.view.borrow().clone())
    }

    pub fn subscribe(&self, id: &str) -> Result<watch::Receiver<Arc<Snapshot>>, SessionError> {
        Ok(self.handle(id)?.view.subscribe())
    }

    pub fn next_query(&self, id: &str, agent: u32) -> Result<Option<Query>, SessionError> {
        let snap = self.snapshot(id)?;
        snap.next_query(agent).map(|q| q.cloned())
    }

    /// Applies `f` to a copy of the session, persists the new events, then
    /// commits. A failed write leaves the session untouched.
    fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<(T, Arc<Snapshot>), StoreError> {
        let handle = self.handle(id)?;
        let mut machine = handle.machine.lock().expect("poisoned");
        let mut next = machine.clone();
        let out = f(&mut next)?;
        if let Some(path) = self.log_path(id) {
            append_events(&path, &next.events()[machine.events().len()..])?;
        }
        *machine = next;
        let snap = Arc::new(Snapshot::of(&machine));
        handle.view.send_replace(snap.clone());
        Ok((out, snap))
    }

    pub fn submit_answer(&self, id: &str, agent: u32, value: Rational) -> Result<Arc<Snapshot>, StoreError> {
        self.mutate(id, |s| s.submit_answer(agent, value)).map(|(_, snap)| snap)
    }

    pub fn submit_choice(&self, id: &str, piece: usize) -> Result<Arc<Snapshot>, StoreError> {
        self.mutate(id, |s| s.submit_choice(piece)).map(|(_, snap)| snap)
    }

    pub fn result(&self, id: &str) -> Result<SessionResult, SessionError> {
        let snap = self.snapshot(id)?;
        snap.result
            .clone()
            .ok_or_else(|| SessionError::Conflict(format!("session is in phase {}, not complete", snap.phase)))
    }
}

fn append_events(path: &Path, events: &[Event]) -> io::Result<()> {
    if events.is_empty() {
        return Ok(());
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    f.write_all(&buf)?;
    f.sync_data()
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|source| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        events.push(e);
    }
    Ok(events)
}
