//! Spreadsheet control framework.
//!
//! Parses workbooks into a canonical model, audits them against design
//! standards and integrity checks, builds remediation plans, tracks cell-level
//! changes through an independent sign-off workflow, and maintains a tiered
//! inventory of end-user computing applications.

pub mod changes;
pub mod docsheet;
pub mod formula;
pub mod ingest;
pub mod integrity;
pub mod inventory;
pub mod jsonl;
pub mod standards;
pub mod timefmt;
pub mod workbook;

pub use workbook::{Cell, CellAddr, CellKey, CellValue, RangeRef, Sheet, Workbook};
