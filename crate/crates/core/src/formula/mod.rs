//! A1 formula grammar: parsing, printing, R1C1 normalization and precedent
//! extraction. Function names are open-world; only the volatile list is
//! closed.

mod ast;
mod parser;
mod print;
mod refs;

pub use ast::{BinaryOp, CellRef, Expr, UnaryOp};
pub use parser::{parse_formula, FormulaError};
pub use print::{normalize_r1c1, print_formula, NormalizedFormula};
pub use refs::{
    expand_precedents, parse_all, precedents, precedents_with, referenced_by,
    referenced_by_parsed, shift_relative, single_cell_refs, ParsedFormulas, Precedents,
    ReferenceIndex, UnparsableFormula, DEFAULT_EXPANSION_CAP, DEFAULT_VOLATILE_FUNCTIONS,
};
