use crate::workbook::{CellAddr, ErrorCode};

/// A cell reference exactly as written, including `$` markers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellRef {
    /// External workbook from a `[Book.xlsx]` prefix.
    pub book: Option<String>,
    pub sheet: Option<String>,
    pub col: u32,
    pub row: u32,
    pub col_absolute: bool,
    pub row_absolute: bool,
}

impl CellRef {
    pub fn relative(col: u32, row: u32) -> Self {
        CellRef {
            book: None,
            sheet: None,
            col,
            row,
            col_absolute: false,
            row_absolute: false,
        }
    }

    pub fn absolute(col: u32, row: u32) -> Self {
        CellRef {
            col_absolute: true,
            row_absolute: true,
            ..CellRef::relative(col, row)
        }
    }

    pub fn on_sheet(mut self, sheet: impl Into<String>) -> Self {
        self.sheet = Some(sheet.into());
        self
    }

    pub fn addr(&self) -> CellAddr {
        CellAddr {
            col: self.col,
            row: self.row,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 12] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
        BinaryOp::Concat,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
    ];

    pub fn symbol(&self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
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
        }
    }

    pub fn is_right_assoc(&self) -> bool {
        matches!(self, BinaryOp::Pow)
    }

    pub fn is_arithmetic(&self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Pow
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Plus,
    Neg,
    /// Postfix `%`.
    Percent,
}

pub(crate) const PREC_PERCENT: u8 = 6;
pub(crate) const PREC_PREFIX: u8 = 7;
pub(crate) const PREC_ATOM: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Text(String),
    Bool(bool),
    Error(ErrorCode),
    Ref(CellRef),
    /// `start:end`; only `start` carries a book/sheet prefix.
    Range { start: CellRef, end: CellRef },
    /// Defined name, stored as written.
    Name(String),
    /// Function call; `name` is uppercase.
    Call { name: String, args: Vec<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Group(Box<Expr>),
    /// Omitted function argument, as in `IF(A1,,1)`.
    Missing,
    /// Array constant or structured-table reference kept verbatim.
    Opaque(String),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Expr {
        Expr::Unary {
            op,
            operand: Box::new(operand),
        }
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Call {
            name: name.to_ascii_uppercase(),
            args,
        }
    }

    pub fn group(inner: Expr) -> Expr {
        Expr::Group(Box::new(inner))
    }

    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary {
                op: UnaryOp::Percent,
                ..
            } => PREC_PERCENT,
            Expr::Unary { .. } => PREC_PREFIX,
            _ => PREC_ATOM,
        }
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Call { args, .. } => args.iter().collect(),
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Unary { operand, .. } => vec![operand],
            Expr::Group(inner) => vec![inner],
            _ => Vec::new(),
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    /// Verbatim tokens the parser could not model (array constants, table refs).
    pub fn opaque_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Opaque(raw) = e {
                out.push(raw.as_str());
            }
        });
        out
    }

    /// Rebuilds the tree bottom-up, letting `f` replace reference nodes.
    pub fn map_refs(&self, f: &mut impl FnMut(&CellRef) -> Option<CellRef>) -> Option<Expr> {
        Some(match self {
            Expr::Ref(r) => Expr::Ref(f(r)?),
            Expr::Range { start, end } => Expr::Range {
                start: f(start)?,
                end: f(end)?,
            },
            Expr::Call { name, args } => Expr::Call {
                name: name.clone(),
                args: args
                    .iter()
                    .map(|a| a.map_refs(f))
                    .collect::<Option<Vec<_>>>()?,
            },
            Expr::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.map_refs(f)?, rhs.map_refs(f)?),
            Expr::Unary { op, operand } => Expr::unary(*op, operand.map_refs(f)?),
            Expr::Group(inner) => Expr::group(inner.map_refs(f)?),
            other => other.clone(),
        })
    }
}
