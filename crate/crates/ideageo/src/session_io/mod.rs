//! Session files, validation, embedding-model persistence, and the analysis
//! report.
//!
//! A session is one JSON document (schema version 1): group descriptors,
//! participant registrations, daily posts, and scored final designs. Reports
//! are JSON with a fixed field order, so identical inputs produce identical
//! bytes.

mod model_io;

pub use model_io::{load_model, save_model};

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{BackgroundProfile, Condition};

pub const SESSION_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SESSION_DAYS: usize = 10;

#[derive(Debug, Error)]
pub enum SessionIoError {
    #[error("i/o error on '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse '{path}': {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("'{path}' has schema version {found}, expected {expected}")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("invalid session at {locator}: {problem}")]
    Validation { locator: String, problem: String },
    #[error("'{path}' is not a model file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("'{path}' has unsupported model format version {found}")]
    VersionMismatch { path: PathBuf, found: u32 },
    #[error("'{path}' is truncated")]
    Truncated { path: PathBuf },
}

/// One group of participants working on the shared task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    /// 1-based group label.
    pub id: usize,
    pub condition: Condition,
    /// Network degree for this group's ring lattice.
    pub degree: usize,
    pub members: Vec<String>,
}

/// One posted idea; the embedding vector is attached later by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub id: String,
    pub participant_id: String,
    pub day: usize,
    pub text: String,
}

/// A final design with its per-evaluator Likert scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalDesign {
    pub id: String,
    pub participant_id: String,
    pub text: String,
    pub scores: Vec<f64>,
}

/// An experiment session: participants, groups, daily posts, final designs.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub name: String,
    pub task: String,
    pub days: usize,
    pub groups: Vec<GroupSpec>,
    pub participants: Vec<BackgroundProfile>,
    pub posts: Vec<Post>,
    pub final_designs: Vec<FinalDesign>,
}

impl Session {
    /// Participant id to 1-based group id. Participants outside every group
    /// are absent.
    pub fn membership(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for group in &self.groups {
            for member in &group.members {
                map.insert(member.as_str(), group.id);
            }
        }
        map
    }

    pub fn group(&self, id: usize) -> Option<&GroupSpec> {
        self.groups.iter().find(|g| g.id == id)
    }
}

// --- File representation -------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SessionFile {
    schema_version: u32,
    name: String,
    task: String,
    #[serde(default = "default_days")]
    days: usize,
    groups: Vec<GroupFile>,
    participants: Vec<ParticipantFile>,
    posts: Vec<PostFile>,
    final_designs: Vec<FinalDesignFile>,
}

fn default_days() -> usize {
    DEFAULT_SESSION_DAYS
}

#[derive(Serialize, Deserialize)]
struct GroupFile {
    id: usize,
    condition: Condition,
    #[serde(default = "default_degree")]
    degree: usize,
    members: Vec<String>,
}

fn default_degree() -> usize {
    4
}

#[derive(Serialize, Deserialize)]
struct ParticipantFile {
    id: String,
    major: String,
    #[serde(default)]
    background: String,
}

#[derive(Serialize, Deserialize)]
struct PostFile {
    id: String,
    participant: String,
    day: usize,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct FinalDesignFile {
    id: String,
    participant: String,
    text: String,
    scores: Vec<f64>,
}

/// Loads and validates a session file. Every invariant violation is reported
/// with a record locator.
pub fn load_session(path: &Path) -> Result<Session, SessionIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: SessionFile =
        serde_json::from_str(&text).map_err(|source| SessionIoError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    if file.schema_version != SESSION_SCHEMA_VERSION {
        return Err(SessionIoError::SchemaVersion {
            path: path.to_path_buf(),
            found: file.schema_version,
            expected: SESSION_SCHEMA_VERSION,
        });
    }
    session_from_file(file)
}

fn session_from_file(file: SessionFile) -> Result<Session, SessionIoError> {
    let invalid = |locator: String, problem: String| SessionIoError::Validation {
        locator,
        problem,
    };
    if file.days == 0 {
        return Err(invalid("days".into(), "session length must be at least 1".into()));
    }

    let mut participant_ids = HashSet::new();
    for (i, p) in file.participants.iter().enumerate() {
        if !participant_ids.insert(p.id.as_str()) {
            return Err(invalid(
                format!("participants[{i}] (id={})", p.id),
                "duplicate participant id".into(),
            ));
        }
    }

    let mut seated = HashSet::new();
    for (gi, group) in file.groups.iter().enumerate() {
        for (mi, member) in group.members.iter().enumerate() {
            if !participant_ids.contains(member.as_str()) {
                return Err(invalid(
                    format!("groups[{gi}].members[{mi}] (id={member})"),
                    "unknown participant".into(),
                ));
            }
            if !seated.insert(member.as_str()) {
                return Err(invalid(
                    format!("groups[{gi}].members[{mi}] (id={member})"),
                    "participant assigned to more than one group".into(),
                ));
            }
        }
    }

    let mut post_ids = HashSet::new();
    for (i, post) in file.posts.iter().enumerate() {
        let locator = || format!("posts[{i}] (id={})", post.id);
        if !post_ids.insert(post.id.as_str()) {
            return Err(invalid(locator(), "duplicate post id".into()));
        }
        if !participant_ids.contains(post.participant.as_str()) {
            return Err(invalid(
                locator(),
                format!("unknown participant '{}'", post.participant),
            ));
        }
        if post.day < 1 || post.day > file.days {
            return Err(invalid(
                locator(),
                format!("day {} outside 1..={}", post.day, file.days),
            ));
        }
    }

    let mut design_ids = HashSet::new();
    for (i, design) in file.final_designs.iter().enumerate() {
        let locator = || format!("final_designs[{i}] (id={})", design.id);
        if !design_ids.insert(design.id.as_str()) {
            return Err(invalid(locator(), "duplicate design id".into()));
        }
        if !participant_ids.contains(design.participant.as_str()) {
            return Err(invalid(
                locator(),
                format!("unknown participant '{}'", design.participant),
            ));
        }
        if design.scores.is_empty() {
            return Err(invalid(locator(), "score list is empty".into()));
        }
        if let Some(bad) = design.scores.iter().find(|s| !(1.0..=5.0).contains(*s)) {
            return Err(invalid(locator(), format!("score {bad} outside [1, 5]")));
        }
    }

    Ok(Session {
        name: file.name,
        task: file.task,
        days: file.days,
        groups: file
            .groups
            .into_iter()
            .map(|g| GroupSpec {
                id: g.id,
                condition: g.condition,
                degree: g.degree,
                members: g.members,
            })
            .collect(),
        participants: file
            .participants
            .into_iter()
            .map(|p| BackgroundProfile {
                participant_id: p.id,
                major: p.major,
                background_vector: Vec::new(),
                raw_text: p.background,
            })
            .collect(),
        posts: file
            .posts
            .into_iter()
            .map(|p| Post {
                id: p.id,
                participant_id: p.participant,
                day: p.day,
                text: p.text,
            })
            .collect(),
        final_designs: file
            .final_designs
            .into_iter()
            .map(|d| FinalDesign {
                id: d.id,
                participant_id: d.participant,
                text: d.text,
                scores: d.scores,
            })
            .collect(),
    })
}

/// Writes a session as schema-version-1 JSON. Embedding vectors are not part
/// of the data model and are not written.
pub fn save_session(session: &Session, path: &Path) -> Result<(), SessionIoError> {
    let file = SessionFile {
        schema_version: SESSION_SCHEMA_VERSION,
        name: session.name.clone(),
        task: session.task.clone(),
        days: session.days,
        groups: session
            .groups
            .iter()
            .map(|g| GroupFile {
                id: g.id,
                condition: g.condition,
                degree: g.degree,
                members: g.members.clone(),
            })
            .collect(),
        participants: session
            .participants
            .iter()
            .map(|p| ParticipantFile {
                id: p.participant_id.clone(),
                major: p.major.clone(),
                background: p.raw_text.clone(),
            })
            .collect(),
        posts: session
            .posts
            .iter()
            .map(|p| PostFile {
                id: p.id.clone(),
                participant: p.participant_id.clone(),
                day: p.day,
                text: p.text.clone(),
            })
            .collect(),
        final_designs: session
            .final_designs
            .iter()
            .map(|d| FinalDesignFile {
                id: d.id.clone(),
                participant: d.participant_id.clone(),
                text: d.text.clone(),
                scores: d.scores.clone(),
            })
            .collect(),
    };
    write_json(&file, path)
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), SessionIoError> {
    let mut text =
        serde_json::to_string_pretty(value).expect("serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| SessionIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// --- Analysis report ------------------------------------------------------

/// Consolidated analysis output; serialized field order is the byte order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionReport {
    pub schema_version: u32,
    pub session: SessionSummary,
    pub groups: Vec<GroupReport>,
    pub comparisons: Vec<ComparisonReport>,
    pub projection: ProjectionReport,
    pub best_design: Option<BestDesignReport>,
    pub terrain: Option<TerrainRefs>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionSummary {
    pub name: String,
    pub task: String,
    pub days: usize,
    pub participants: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupReport {
    pub group: usize,
    pub condition: String,
    pub members: usize,
    pub daily_counts: Vec<u64>,
    pub daily_average_distance: Vec<Option<f64>>,
    pub final_designs: usize,
    pub best_design: Option<BestDesignReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BestDesignReport {
    pub design_id: String,
    pub participant_id: String,
    pub group: usize,
    pub condition: String,
    pub mean_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    pub group_a: usize,
    pub group_b: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ProjectionReport {
    pub eigenvalues: Vec<f64>,
    pub posts: Vec<PointReport>,
    pub final_designs: Vec<PointReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointReport {
    pub id: String,
    pub participant_id: String,
    pub group: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<usize>,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TerrainRefs {
    pub grid_file: String,
    pub image_file: String,
}

/// Writes the report; two runs over identical inputs produce identical
/// bytes.
pub fn write_report(report: &SessionReport, path: &Path) -> Result<(), SessionIoError> {
    write_json(report, path)
}

pub fn load_report(path: &Path) -> Result<SessionReport, SessionIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| SessionIoError::Parse {
        path: path.to_path_buf(),
        source,
    })
}
