use std::fmt::Write;

use super::ast::{CellRef, Expr, UnaryOp, PREC_PERCENT, PREC_PREFIX};
use crate::workbook::{column_letters, quote_sheet_name, CellAddr};

/// Canonical R1C1-relative text of a formula at a given host cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedFormula {
    pub canonical_text: String,
}

#[derive(Clone, Copy)]
enum RefStyle {
    A1,
    R1C1 { host: CellAddr },
}

/// Prints an AST in A1 notation. Parentheses are emitted for `Group` nodes
/// and wherever operator precedence would otherwise change the tree.
pub fn print_formula(ast: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, ast, 0, RefStyle::A1);
    out
}

/// Rewrites relative references as offsets from `host` (`R[-1]C[2]`) and
/// absolute components as `R{n}`/`C{n}`. Output has no whitespace outside
/// text literals, so string equality is formula equivalence.
pub fn normalize_r1c1(ast: &Expr, host: CellAddr) -> NormalizedFormula {
    let mut out = String::new();
    write_expr(&mut out, ast, 0, RefStyle::R1C1 { host });
    NormalizedFormula { canonical_text: out }
}

fn format_number(n: f64) -> String {
    format!("{n}")
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8, style: RefStyle) {
    let needs_parens = e.precedence() < min_prec;
    if needs_parens {
        out.push('(');
    }
    match e {
        Expr::Number(n) => out.push_str(&format_number(*n)),
        Expr::Text(t) => {
            out.push('"');
            out.push_str(&t.replace('"', "\"\""));
            out.push('"');
        }
        Expr::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Expr::Error(code) => out.push_str(code.as_str()),
        Expr::Ref(r) => {
            write_prefix(out, r);
            write_ref(out, r, style);
        }
        Expr::Range { start, end } => {
            write_prefix(out, start);
            write_ref(out, start, style);
            out.push(':');
            write_ref(out, end, style);
        }
        Expr::Name(name) => match style {
            RefStyle::A1 => out.push_str(name),
            RefStyle::R1C1 { .. } => out.push_str(&name.to_ascii_uppercase()),
        },
        Expr::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_expr(out, arg, 0, style);
            }
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let (lp, rp) = if op.is_right_assoc() {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            write_expr(out, lhs, lp, style);
            out.push_str(op.symbol());
            write_expr(out, rhs, rp, style);
        }
        Expr::Unary { op, operand } => match op {
            UnaryOp::Percent => {
                write_expr(out, operand, PREC_PERCENT, style);
                out.push('%');
            }
            UnaryOp::Neg | UnaryOp::Plus => {
                out.push(if *op == UnaryOp::Neg { '-' } else { '+' });
                write_expr(out, operand, PREC_PREFIX, style);
            }
        },
        Expr::Group(inner) => {
            out.push('(');
            write_expr(out, inner, 0, style);
            out.push(')');
        }
        Expr::Missing => {}
        Expr::Opaque(raw) => out.push_str(raw),
    }
    if needs_parens {
        out.push(')');
    }
}

fn write_prefix(out: &mut String, r: &CellRef) {
    match (&r.book, &r.sheet) {
        (Some(book), Some(sheet)) => {
            let _ = write!(out, "'[{}]{}'!", book.replace('\'', "''"), sheet.replace('\'', "''"));
        }
        (None, Some(sheet)) => {
            out.push_str(&quote_sheet_name(sheet));
            out.push('!');
        }
        _ => {}
    }
}

fn write_ref(out: &mut String, r: &CellRef, style: RefStyle) {
    match style {
        RefStyle::A1 => {
            if r.col_absolute {
                out.push('$');
            }
            out.push_str(&column_letters(r.col));
            if r.row_absolute {
                out.push('$');
            }
            let _ = write!(out, "{}", r.row);
        }
        RefStyle::R1C1 { host } => {
            write_axis(out, 'R', r.row, host.row, r.row_absolute);
            write_axis(out, 'C', r.col, host.col, r.col_absolute);
        }
    }
}

fn write_axis(out: &mut String, axis: char, target: u32, host: u32, absolute: bool) {
    out.push(axis);
    if absolute {
        let _ = write!(out, "{target}");
    } else {
        let delta = i64::from(target) - i64::from(host);
        if delta != 0 {
            let _ = write!(out, "[{delta}]");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::workbook::a1_to_addr;

    fn norm(text: &str, host: &str) -> String {
        normalize_r1c1(&parse_formula(text).unwrap(), a1_to_addr(host).unwrap()).canonical_text
    }

    #[test]
    fn prints_refs() {
        assert_eq!(print_formula(&parse_formula("A1").unwrap()), "A1");
        assert_eq!(print_formula(&parse_formula("$a$1 + b$2").unwrap()), "$A$1+B$2");
        assert_eq!(
            print_formula(&parse_formula("'My Sheet'!A1:B2").unwrap()),
            "'My Sheet'!A1:B2"
        );
    }

    #[test]
    fn round_trips_if() {
        let ast = parse_formula("IF(A1>0,1,-1)").unwrap();
        assert_eq!(parse_formula(&print_formula(&ast)).unwrap(), ast);
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(norm("A1+1", "B1"), "RC[-1]+1");
        assert_eq!(norm("A1+1", "B2"), "R[-1]C[-1]+1");
        assert_eq!(norm("SUM($A$1:A5)", "B5"), "SUM(R1C1:RC[-1])");
        assert_eq!(norm("$B$1", "Z99"), "R1C2");
        assert_eq!(norm("sum( a1 , 2 )", "A2"), "SUM(R[-1]C,2)");
    }

    #[test]
    fn dragged_formulas_normalize_identically() {
        assert_eq!(norm("A2*2", "B2"), norm("A3*2", "B3"));
        assert_ne!(norm("A4+2", "B4"), norm("A3*2", "B3"));
    }

    #[test]
    fn inserts_parens_for_precedence_when_tree_requires() {
        let ast = crate::formula::Expr::binary(
            crate::formula::BinaryOp::Mul,
            crate::formula::Expr::binary(
                crate::formula::BinaryOp::Add,
                crate::formula::Expr::Number(1.0),
                crate::formula::Expr::Number(2.0),
            ),
            crate::formula::Expr::Number(3.0),
        );
        assert_eq!(print_formula(&ast), "(1+2)*3");
    }
}
