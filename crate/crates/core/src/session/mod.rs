//! The interactive class-building protocol: seeding, candidate expansion,
//! accept/reject with a session-scoped ignore list, polygon selection, model
//! switching and class commitment into a shared single-assignment taxonomy.

mod polygon;
mod taxonomy;
mod workbench;

use std::collections::BTreeSet;

use chrono::{DateTime, SecondsFormat, Utc};
use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use polygon::point_in_polygon;
pub use taxonomy::{ClassRecord, Taxonomy, TaxonomyExport};
pub use workbench::{OutputData, Workbench};

pub const SNAPSHOT_VERSION: u32 = 1;
pub const DEFAULT_K_PER_MEMBER: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown output {0}")]
    UnknownOutput(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("item {0} is on this session's ignore list")]
    ItemIgnored(String),
    #[error("item {item} is already assigned to class {class_id}")]
    ItemAssigned { item: String, class_id: String },
    #[error("item {0} is not in the current candidate or polygon lists")]
    NotSuggested(String),
    #[error("item {0} is not in the current candidate, polygon or member lists")]
    NotListed(String),
    #[error("item {0} is not ignored")]
    NotIgnored(String),
    #[error("the session has no members; seed first")]
    NoMembers,
    #[error("class label must not be empty")]
    EmptyLabel,
    #[error("class label '{0}' is already taken")]
    DuplicateLabel(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid taxonomy document: {0}")]
    InvalidTaxonomy(String),
    #[error("neighbour search failed: {0}")]
    Index(String),
}

/// Broad category of a [`SessionError`], for transport status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    NotFound,
    Conflict,
    Invalid,
    Internal,
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::UnknownOutput(_) => "unknown_output",
            SessionError::UnknownItem(_) => "unknown_item",
            SessionError::ItemIgnored(_) => "item_ignored",
            SessionError::ItemAssigned { .. } => "item_assigned",
            SessionError::NotSuggested(_) => "not_suggested",
            SessionError::NotListed(_) => "not_listed",
            SessionError::NotIgnored(_) => "not_ignored",
            SessionError::NoMembers => "no_members",
            SessionError::EmptyLabel => "empty_label",
            SessionError::DuplicateLabel(_) => "duplicate_label",
            SessionError::InvalidPolygon(_) => "invalid_polygon",
            SessionError::InvalidRequest(_) => "invalid_request",
            SessionError::InvalidTaxonomy(_) => "invalid_taxonomy",
            SessionError::Index(_) => "index_error",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            SessionError::UnknownSession(_) | SessionError::UnknownOutput(_) | SessionError::UnknownItem(_) => {
                ErrorClass::NotFound
            }
            SessionError::ItemIgnored(_)
            | SessionError::ItemAssigned { .. }
            | SessionError::NotSuggested(_)
            | SessionError::NotListed(_)
            | SessionError::NotIgnored(_)
            | SessionError::NoMembers
            | SessionError::DuplicateLabel(_) => ErrorClass::Conflict,
            SessionError::EmptyLabel
            | SessionError::InvalidPolygon(_)
            | SessionError::InvalidRequest(_)
            | SessionError::InvalidTaxonomy(_) => ErrorClass::Invalid,
            SessionError::Index(_) => ErrorClass::Internal,
        }
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant.
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

pub(crate) fn timestamp(clock: &dyn Clock) -> String {
    clock.now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub item_id: String,
    /// Angular distance to the closest member.
    pub score: f64,
    pub via_member: String,
}

/// Ascending score, ties by item id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub entries: Vec<CandidateEntry>,
}

impl CandidateList {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.item_id.as_str()).collect()
    }

    fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.item_id == id)
    }

    fn remove(&mut self, id: &str) {
        self.entries.retain(|e| e.item_id != id);
    }
}

/// Full working state of one session; also its persisted snapshot form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub version: u32,
    pub session_id: String,
    pub active_output_id: String,
    pub seed: Option<String>,
    pub members: IndexSet<String>,
    pub candidates: CandidateList,
    pub polygon_candidates: IndexSet<String>,
    pub ignored: BTreeSet<String>,
    pub k_per_member: usize,
}

impl Session {
    fn new(session_id: String, output_id: String, k_per_member: usize) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            session_id,
            active_output_id: output_id,
            seed: None,
            members: IndexSet::new(),
            candidates: CandidateList::default(),
            polygon_candidates: IndexSet::new(),
            ignored: BTreeSet::new(),
            k_per_member,
        }
    }

    /// Drops items that some session committed since this one last ran.
    fn reconcile(&mut self, taxonomy: &Taxonomy) {
        if taxonomy.assignment.is_empty() {
            return;
        }
        let assigned = |id: &String| taxonomy.assignment.contains_key(id);
        self.members.retain(|id| !assigned(id));
        self.polygon_candidates.retain(|id| !assigned(id));
        self.ignored.retain(|id| !assigned(id));
        self.candidates.entries.retain(|e| !assigned(&e.item_id));
        if self.seed.as_ref().is_some_and(|s| !self.members.contains(s)) {
            self.seed = None;
        }
    }

    fn forget(&mut self, id: &str) {
        self.members.shift_remove(id);
        self.polygon_candidates.shift_remove(id);
        self.candidates.remove(id);
        if self.seed.as_deref() == Some(id) {
            self.seed = None;
        }
    }

    fn reset_working(&mut self) {
        self.seed = None;
        self.members.clear();
        self.candidates = CandidateList::default();
        self.polygon_candidates.clear();
    }
}
