//! Change control: baseline snapshots, cell-level diffs, alert triggers and
//! independent sign-off of triggered changes.

mod alerts;
mod diff;
mod events;
mod snapshot;
mod store;

pub use alerts::{apply_alert_rules, AlertRuleSet, Trigger, PCT_EPSILON, TEMPLATE_SHEETS, TRIGGER_IDS};
pub use diff::{
    apply_diff, diff, normalize_formula_ws, CellChange, ChangeKind, NamedRangeChange, PatchError, SecurityChange,
    SheetAttributes, SheetChange, SheetChangeKind, WorkbookDiff,
};
pub use events::{ChangeEvent, DecisionError, EventState, ReviewDecision, Verdict};
pub use snapshot::{content_hash, Snapshot, SnapshotHeader};
pub use store::{ChangeStore, MonitoredFile, StoreError, Submission};
