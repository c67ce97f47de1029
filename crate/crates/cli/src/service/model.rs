use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use vsearch_core::Vec2;
use vsearch_core::trial::{Outcome, TrialRecord, is_correct_response};

use super::store::Event;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Human,
    Elm,
    Agent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub contrast: f64,
    pub created_at: u64,
    pub trial_ids: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Responded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveTrial {
    pub trial_id: String,
    pub session_id: String,
    pub seed: u64,
    pub contrast: f64,
    pub target_deg: Vec2,
    pub fixations: Vec<Vec2>,
    pub status: Status,
    pub response: Option<Vec2>,
    pub correct: Option<bool>,
}

impl LiveTrial {
    pub fn record(&self, mode: Mode) -> Option<TrialRecord> {
        let response = self.response?;
        Some(TrialRecord {
            seed: self.seed,
            target_deg: self.target_deg,
            fixations_deg: self.fixations.clone(),
            rewards: Vec::new(),
            err_est: Vec::new(),
            outcome: if is_correct_response(response, self.target_deg) { Outcome::Correct } else { Outcome::Error },
            policy: serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            response_deg: Some(response),
        })
    }
}

/// In-memory view of the event log.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    pub sessions: BTreeMap<String, SessionRecord>,
    pub trials: BTreeMap<String, LiveTrial>,
}

impl Registry {
    pub fn apply(&mut self, e: &Event) {
        match e {
            Event::Session { session_id, mode, seed, contrast, created_at } => {
                self.sessions.insert(
                    session_id.clone(),
                    SessionRecord { session_id: session_id.clone(), mode: *mode, seed: *seed, contrast: *contrast, created_at: *created_at, trial_ids: Vec::new() },
                );
            }
            Event::Trial { trial_id, session_id, seed, contrast, target_deg, start_deg } => {
                if let Some(s) = self.sessions.get_mut(session_id) {
                    s.trial_ids.push(trial_id.clone());
                }
                self.trials.insert(
                    trial_id.clone(),
                    LiveTrial {
                        trial_id: trial_id.clone(),
                        session_id: session_id.clone(),
                        seed: *seed,
                        contrast: *contrast,
                        target_deg: *target_deg,
                        fixations: vec![*start_deg],
                        status: Status::Active,
                        response: None,
                        correct: None,
                    },
                );
            }
            Event::Fixation { trial_id, x_deg, y_deg } => {
                if let Some(t) = self.trials.get_mut(trial_id).filter(|t| t.status == Status::Active) {
                    t.fixations.push(Vec2::new(*x_deg, *y_deg));
                }
            }
            Event::Response { trial_id, x_deg, y_deg, correct } => {
                if let Some(t) = self.trials.get_mut(trial_id).filter(|t| t.status == Status::Active) {
                    t.status = Status::Responded;
                    t.response = Some(Vec2::new(*x_deg, *y_deg));
                    t.correct = Some(*correct);
                }
            }
        }
    }

    pub fn next_session_id(&self) -> String {
        format!("s{:06}", self.sessions.len() + 1)
    }

    pub fn next_trial_id(&self) -> String {
        format!("t{:06}", self.trials.len() + 1)
    }
}
