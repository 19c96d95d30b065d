use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::timefmt::{self, Timestamp};
use crate::workbook::{serialize_canonical, Workbook};

/// SHA-256 of the compact canonical serialization, lowercase hex.
pub fn content_hash(wb: &Workbook) -> String {
    let digest = Sha256::digest(serialize_canonical(wb).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub snapshot_id: u64,
    pub file_key: String,
    #[serde(with = "timefmt")]
    pub taken_at: Timestamp,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub snapshot_id: u64,
    pub file_key: String,
    #[serde(with = "timefmt")]
    pub taken_at: Timestamp,
    pub content_hash: String,
    pub workbook: Workbook,
}

impl Snapshot {
    /// Id 1 for the baseline, otherwise one past `previous`.
    pub fn take(previous: Option<u64>, file_key: &str, workbook: Workbook, at: Timestamp) -> Self {
        Snapshot {
            snapshot_id: previous.map_or(1, |p| p + 1),
            file_key: file_key.to_string(),
            taken_at: at,
            content_hash: content_hash(&workbook),
            workbook,
        }
    }

    pub fn from_parts(header: SnapshotHeader, workbook: Workbook) -> Self {
        Snapshot {
            snapshot_id: header.snapshot_id,
            file_key: header.file_key,
            taken_at: header.taken_at,
            content_hash: header.content_hash,
            workbook,
        }
    }

    pub fn header(&self) -> SnapshotHeader {
        SnapshotHeader {
            snapshot_id: self.snapshot_id,
            file_key: self.file_key.clone(),
            taken_at: self.taken_at,
            content_hash: self.content_hash.clone(),
        }
    }
}
