//! Append-only event log per session plus a periodic snapshot of all sessions.
//!
//! Layout under the data directory:
//! - `sessions/<session_id>.jsonl`: one `created` event then one `answered`
//!   event per accepted step, each fsynced before the answer is acknowledged.
//! - `snapshot.json`: every session's state at some past moment. Recovery
//!   loads it and replays the log lines it has not yet absorbed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::{AcceptedAnswer, SessionState};
use crate::StudyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Created { session: Box<SessionState> },
    Answered { step: usize, answer: AcceptedAnswer },
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    sessions: Vec<SessionState>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StudyError> {
        let root = root.into();
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{session_id}.jsonl"))
    }

    fn snapshot_path(&self) -> PathBuf {
        self.root.join("snapshot.json")
    }

    /// Appends one event and syncs it to disk.
    pub fn append(&self, session_id: &str, event: &Event) -> Result<(), StudyError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.log_path(session_id))?;
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    /// Atomically replaces the snapshot.
    pub fn write_snapshot(&self, sessions: &[SessionState]) -> Result<(), StudyError> {
        let tmp = self.root.join("snapshot.json.tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(
                &mut f,
                &Snapshot {
                    sessions: sessions.to_vec(),
                },
            )?;
            f.sync_all()?;
        }
        fs::rename(tmp, self.snapshot_path())?;
        Ok(())
    }

    /// Rebuilds every session from the snapshot and the logs, in creation order.
    ///
    /// A final log line that does not parse is a write interrupted by a crash:
    /// it is dropped and the file truncated so later appends stay well formed.
    pub fn recover(&self) -> Result<Vec<SessionState>, StudyError> {
        let mut sessions: BTreeMap<String, SessionState> = BTreeMap::new();
        if let Ok(text) = fs::read_to_string(self.snapshot_path()) {
            let snap: Snapshot =
                serde_json::from_str(&text).map_err(|e| StudyError::Corrupt(format!("snapshot: {e}")))?;
            for s in snap.sessions {
                sessions.insert(s.session_id.clone(), s);
            }
        }
        let mut logs: Vec<PathBuf> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            let events = read_log(&path)?;
            let mut iter = events.into_iter();
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let state = match sessions.remove(&id) {
                Some(s) => {
                    // The snapshot already holds the created event and its answers.
                    let absorbed = 1 + s.answers.len();
                    iter.by_ref().take(absorbed).count();
                    s
                }
                None => match iter.next() {
                    Some(Event::Created { session }) => *session,
                    Some(_) => {
                        return Err(StudyError::Corrupt(format!(
                            "{}: first event is not `created`",
                            path.display()
                        )))
                    }
                    // Creation crashed before its event was written.
                    None => continue,
                },
            };
            let mut state = state;
            for ev in iter {
                match ev {
                    Event::Answered { step, answer } => state
                        .accept(step, answer.answer, answer.at_ms)
                        .map_err(|e| StudyError::Corrupt(format!("{}: replay of step {step}: {e}", path.display())))?,
                    Event::Created { .. } => {
                        return Err(StudyError::Corrupt(format!(
                            "{}: repeated `created` event",
                            path.display()
                        )))
                    }
                }
            }
            sessions.insert(id, state);
        }
        let mut out: Vec<SessionState> = sessions.into_values().collect();
        out.sort_by_key(|s| s.seq);
        Ok(out)
    }
}

fn read_log(path: &Path) -> Result<Vec<Event>, StudyError> {
    let mut events = Vec::new();
    let mut valid_len = 0u64;
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let complete = line.ends_with('\n');
        match serde_json::from_str::<Event>(line.trim_end()) {
            Ok(ev) if complete => {
                events.push(ev);
                valid_len += n as u64;
            }
            _ => {
                let mut rest = String::new();
                reader.read_line(&mut rest)?;
                if !rest.is_empty() {
                    return Err(StudyError::Corrupt(format!(
                        "{}: unreadable event mid-log",
                        path.display()
                    )));
                }
                tracing::warn!(path = %path.display(), "dropping torn final event");
                OpenOptions::new().write(true).open(path)?.set_len(valid_len)?;
                break;
            }
        }
    }
    Ok(events)
}
