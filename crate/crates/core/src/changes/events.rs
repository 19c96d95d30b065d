//! Change events and the independent sign-off state machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt::{self, Timestamp};

use super::diff::WorkbookDiff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventState {
    AutoLogged,
    PendingReview,
    Approved,
    Rejected,
}

impl EventState {
    pub const ALL: [EventState; 4] = [
        EventState::AutoLogged,
        EventState::PendingReview,
        EventState::Approved,
        EventState::Rejected,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventState::AutoLogged => "auto_logged",
            EventState::PendingReview => "pending_review",
            EventState::Approved => "approved",
            EventState::Rejected => "rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        *self != EventState::PendingReview
    }
}

impl std::str::FromStr for EventState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EventState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown event state {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub reviewer: String,
    #[serde(with = "timefmt")]
    pub decided_at: Timestamp,
    pub verdict: Verdict,
    #[serde(default)]
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub event_id: u64,
    pub file_key: String,
    pub from_snapshot: u64,
    pub to_snapshot: u64,
    #[serde(flatten)]
    pub diff: WorkbookDiff,
    pub author: String,
    #[serde(with = "timefmt")]
    pub detected_at: Timestamp,
    pub triggered_rules: Vec<String>,
    pub state: EventState,
    pub decision: Option<ReviewDecision>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecisionError {
    #[error("event {0} not found")]
    UnknownEvent(u64),
    #[error("event is {0}; only pending_review events accept decisions")]
    NotPending(&'static str),
    #[error("the author of a change cannot review it")]
    SelfReview,
    #[error("a rejection needs a comment")]
    MissingComment,
    #[error("reviewer is required")]
    MissingReviewer,
}

impl DecisionError {
    pub fn code(&self) -> &'static str {
        match self {
            DecisionError::UnknownEvent(_) => "not-found",
            DecisionError::NotPending(_) => "not-pending",
            DecisionError::SelfReview => "self-review",
            DecisionError::MissingComment => "missing-comment",
            DecisionError::MissingReviewer => "missing-reviewer",
        }
    }
}

fn same_person(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

impl ChangeEvent {
    /// Auto-logged without triggers, pending review otherwise.
    pub fn detected(
        event_id: u64,
        file_key: &str,
        (from_snapshot, to_snapshot): (u64, u64),
        diff: WorkbookDiff,
        author: &str,
        detected_at: Timestamp,
        triggered_rules: Vec<String>,
    ) -> Self {
        let state = if triggered_rules.is_empty() {
            EventState::AutoLogged
        } else {
            EventState::PendingReview
        };
        ChangeEvent {
            event_id,
            file_key: file_key.to_string(),
            from_snapshot,
            to_snapshot,
            diff,
            author: author.to_string(),
            detected_at,
            triggered_rules,
            state,
            decision: None,
        }
    }

    /// Checks a decision without applying it.
    pub fn check_decision(&self, decision: &ReviewDecision) -> Result<(), DecisionError> {
        if self.state != EventState::PendingReview {
            return Err(DecisionError::NotPending(self.state.as_str()));
        }
        if decision.reviewer.trim().is_empty() {
            return Err(DecisionError::MissingReviewer);
        }
        if same_person(&decision.reviewer, &self.author) {
            return Err(DecisionError::SelfReview);
        }
        if decision.verdict == Verdict::Rejected && decision.comment.trim().is_empty() {
            return Err(DecisionError::MissingComment);
        }
        Ok(())
    }

    /// Settles a pending event; on error the event is unchanged.
    pub fn decide(&mut self, decision: ReviewDecision) -> Result<(), DecisionError> {
        self.check_decision(&decision)?;
        self.state = match decision.verdict {
            Verdict::Approved => EventState::Approved,
            Verdict::Rejected => EventState::Rejected,
        };
        self.decision = Some(decision);
        Ok(())
    }

    pub fn invariants_hold(&self) -> bool {
        let pending = self.state == EventState::PendingReview;
        let settled = matches!(self.state, EventState::Approved | EventState::Rejected);
        pending == (!self.triggered_rules.is_empty() && self.decision.is_none())
            && settled == self.decision.is_some()
    }
}
