//! Formula AST generator. Produced trees are in the parser's image: every
//! child whose operator binds looser than its parent position requires is
//! wrapped in an explicit `Group`.

use euc_core::formula::{BinaryOp, CellRef, Expr, UnaryOp};
use euc_core::workbook::ErrorCode;
use proptest::prelude::*;

const SHEETS: [&str; 5] = ["Data", "My Sheet", "O'Brien", "2024", "Calc_v2"];
const NAMES: [&str; 4] = ["Revenue", "Rate_2024", "CHK_TOTAL", "_hidden.name"];
const FUNCTIONS: [&str; 8] = ["SUM", "IF", "ROUND", "VLOOKUP", "NOW", "MY.FUNC", "LOG10", "X"];

// Binding strength by node shape, written out independently of the crate.
fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 1,
            BinaryOp::Concat => 2,
            BinaryOp::Add | BinaryOp::Sub => 3,
            BinaryOp::Mul | BinaryOp::Div => 4,
            BinaryOp::Pow => 5,
        },
        Expr::Unary {
            op: UnaryOp::Percent,
            ..
        } => 6,
        Expr::Unary { .. } => 7,
        _ => 8,
    }
}

fn at_least(e: Expr, min: u8) -> Expr {
    if strength(&e) < min {
        Expr::Group(Box::new(e))
    } else {
        e
    }
}

fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
    let p = strength(&Expr::binary(op, Expr::Missing, Expr::Missing));
    let (lmin, rmin) = if op == BinaryOp::Pow { (p + 1, p) } else { (p, p + 1) };
    Expr::binary(op, at_least(lhs, lmin), at_least(rhs, rmin))
}

fn cell_ref() -> impl Strategy<Value = CellRef> {
    (
        prop_oneof![3 => 1u32..=30, 1 => 1u32..=16_384],
        prop_oneof![3 => 1u32..=100, 1 => 1u32..=1_048_576],
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(col, row, col_absolute, row_absolute)| CellRef {
            book: None,
            sheet: None,
            col,
            row,
            col_absolute,
            row_absolute,
        })
}

fn qualified_ref() -> impl Strategy<Value = CellRef> {
    (
        cell_ref(),
        prop_oneof![
            4 => Just(None),
            2 => prop::sample::select(&SHEETS[..]).prop_map(|s| Some((None, s.to_string()))),
            1 => prop::sample::select(&SHEETS[..])
                .prop_map(|s| Some((Some("FY22.xlsx".to_string()), s.to_string()))),
        ],
    )
        .prop_map(|(mut r, prefix)| {
            if let Some((book, sheet)) = prefix {
                r.book = book;
                r.sheet = Some(sheet);
            }
            r
        })
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => prop_oneof![
            (0u32..10_000).prop_map(|n| Expr::Number(f64::from(n))),
            (0u32..4096).prop_map(|n| Expr::Number(f64::from(n) / 64.0)),
            Just(Expr::Number(1e21)),
            Just(Expr::Number(1.5e-7)),
        ],
        1 => "[a-z \"'!]{0,6}".prop_map(Expr::Text),
        1 => any::<bool>().prop_map(Expr::Bool),
        1 => prop::sample::select(&ErrorCode::ALL[..]).prop_map(Expr::Error),
        4 => qualified_ref().prop_map(Expr::Ref),
        2 => (qualified_ref(), cell_ref()).prop_map(|(start, end)| Expr::Range { start, end }),
        1 => prop::sample::select(&NAMES[..]).prop_map(|n| Expr::Name(n.to_string())),
        1 => prop::sample::select(&["{1,2;3,4}", "Table1[Amount]"][..])
            .prop_map(|raw| Expr::Opaque(raw.to_string())),
    ]
}

/// Canonical formula ASTs, up to depth ~5.
pub fn formula_ast() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            3 => (prop::sample::select(&BinaryOp::ALL[..]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| binary(op, l, r)),
            1 => (prop::sample::select(&[UnaryOp::Neg, UnaryOp::Plus][..]), inner.clone())
                .prop_map(|(op, e)| Expr::unary(op, at_least(e, 7))),
            1 => inner.clone().prop_map(|e| Expr::unary(UnaryOp::Percent, at_least(e, 6))),
            1 => inner.clone().prop_map(|e| Expr::Group(Box::new(e))),
            2 => (
                prop::sample::select(&FUNCTIONS[..]),
                prop::collection::vec(
                    prop_oneof![6 => inner.clone(), 1 => Just(Expr::Missing)],
                    0..4
                )
            )
                .prop_map(|(name, mut args)| {
                    // A lone omitted argument prints as `F()`, which is a
                    // zero-argument call.
                    if args.len() == 1 && args[0] == Expr::Missing {
                        args.clear();
                    }
                    Expr::Call { name: name.to_string(), args }
                }),
        ]
    })
}

/// Formula ASTs whose references are all relative or absolute within
/// `1..=limit` on both axes, on the host sheet. Used for shift tests.
pub fn local_formula_ast(limit: u32) -> impl Strategy<Value = Expr> {
    let r = (1..=limit, 1..=limit, any::<bool>(), any::<bool>()).prop_map(
        |(col, row, col_absolute, row_absolute)| CellRef {
            book: None,
            sheet: None,
            col,
            row,
            col_absolute,
            row_absolute,
        },
    );
    let leaf = prop_oneof![
        1 => (0u32..100).prop_map(|n| Expr::Number(f64::from(n))),
        3 => r.clone().prop_map(Expr::Ref),
        1 => (r.clone(), r).prop_map(|(start, end)| Expr::Range { start, end }),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (prop::sample::select(&BinaryOp::ALL[..]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| binary(op, l, r)),
            (prop::sample::select(&["SUM", "MAX"][..]), prop::collection::vec(inner, 1..3))
                .prop_map(|(name, args)| Expr::Call { name: name.to_string(), args }),
        ]
    })
}
