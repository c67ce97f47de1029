//! Append-only JSONL event log; state is rebuilt by replaying it.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vsearch_core::Vec2;
use vsearch_core::trial::TrialRecord;

use super::model::Mode;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const TRIALS_FILE: &str = "trials.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Session { session_id: String, mode: Mode, seed: u64, contrast: f64, created_at: u64 },
    Trial { trial_id: String, session_id: String, seed: u64, contrast: f64, target_deg: Vec2, start_deg: Vec2 },
    Fixation { trial_id: String, x_deg: f64, y_deg: f64 },
    Response { trial_id: String, x_deg: f64, y_deg: f64, correct: bool },
}

pub struct Store {
    dir: PathBuf,
    events: File,
    trials: File,
}

fn open_append(path: &Path) -> Result<File> {
    OpenOptions::new().create(true).append(true).open(path).with_context(|| format!("opening {}", path.display()))
}

impl Store {
    /// Open (creating if needed) the log under `dir` and return the events so far.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Event>)> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(EVENTS_FILE);
        let mut events = Vec::new();
        if path.exists() {
            let f = BufReader::new(File::open(&path)?);
            for (n, line) in f.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(e) => events.push(e),
                    // A torn final line from an interrupted write is dropped.
                    Err(e) => eprintln!("warning: {}:{}: skipping unreadable event: {e}", path.display(), n + 1),
                }
            }
        }
        let store = Self { events: open_append(&path)?, trials: open_append(&dir.join(TRIALS_FILE))?, dir: dir.to_path_buf() };
        Ok((store, events))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, e: &Event) -> Result<()> {
        let mut line = serde_json::to_string(e)?;
        line.push('\n');
        self.events.write_all(line.as_bytes())?;
        self.events.flush()?;
        Ok(())
    }

    pub fn append_trial(&mut self, r: &TrialRecord) -> Result<()> {
        let mut line = serde_json::to_string(r)?;
        line.push('\n');
        self.trials.write_all(line.as_bytes())?;
        self.trials.flush()?;
        Ok(())
    }

    pub fn sync(&mut self) -> Result<()> {
        self.events.sync_all()?;
        self.trials.sync_all()?;
        Ok(())
    }
}
