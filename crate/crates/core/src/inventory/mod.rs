//! Inventory of end-user computing applications: records, the tier table of
//! required controls, validation scheduling and the durable registry.

pub mod archive;
pub mod demo;
mod records;
mod store;

pub use records::*;
pub use store::{
    ComplianceRow, CountRow, InventoryError, InventoryStore, NewRecord, PlanItemPatch, RecordPatch, Summary,
    DEFAULT_VALIDATION_FREQUENCY_DAYS,
};
