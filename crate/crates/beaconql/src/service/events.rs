//! Append-only per-session event log.
//!
//! Each line is `{"seq", "tab", "event", "snapshot"}` where `snapshot` is the
//! tab after the event. Bearer tokens are never written.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use beaconql_core::session::{Tab, TabState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub tab: String,
    pub event: String,
    pub snapshot: Tab,
}

#[derive(Debug)]
pub struct EventLog {
    dir: PathBuf,
    seq: AtomicU64,
}

impl EventLog {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(EventLog { dir, seq: AtomicU64::new(0) })
    }

    pub fn path(&self, session: &str) -> PathBuf {
        self.dir.join(format!("{session}.jsonl"))
    }

    /// Creates the session's log so a tab-less session survives a restart.
    pub fn touch(&self, session: &str) -> std::io::Result<()> {
        OpenOptions::new().create(true).append(true).open(self.path(session)).map(drop)
    }

    pub fn append(&self, session: &str, event: &str, tab: &Tab) -> std::io::Result<()> {
        let record = Event {
            seq: self.seq.fetch_add(1, Ordering::Relaxed),
            tab: tab.id.clone(),
            event: event.into(),
            snapshot: tab.clone(),
        };
        let mut line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.path(session))?;
        file.write_all(line.as_bytes())
    }

    /// Last snapshot of every tab of every logged session. A tab caught
    /// mid-execution goes back to its checkpoint.
    pub fn recover(&self) -> std::io::Result<BTreeMap<String, BTreeMap<String, Tab>>> {
        let mut sessions = BTreeMap::new();
        let mut max_seq = 0;
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|x| x != "jsonl") {
                continue;
            }
            let session = path.file_stem().expect("file").to_string_lossy().into_owned();
            let (tabs, seq) = replay(&path)?;
            max_seq = max_seq.max(seq);
            sessions.insert(session, tabs);
        }
        self.seq.store(max_seq + 1, Ordering::Relaxed);
        Ok(sessions)
    }
}

fn replay(path: &Path) -> std::io::Result<(BTreeMap<String, Tab>, u64)> {
    let mut tabs = BTreeMap::new();
    let mut max_seq = 0;
    for line in std::fs::read_to_string(path)?.lines() {
        // A torn final line from a crash is skipped.
        let Ok(event) = serde_json::from_str::<Event>(line) else { continue };
        max_seq = max_seq.max(event.seq);
        tabs.insert(event.tab, event.snapshot);
    }
    for tab in tabs.values_mut() {
        if tab.state == TabState::Executing {
            tab.finish_execution(Err("interrupted".into())).expect("executing");
        }
    }
    Ok((tabs, max_seq))
}
