//! Recursive-descent parser for the A1 formula grammar.
//!
//! Precedence, loosest first: comparisons, `&`, `+ -`, `* /`, `^`
//! (right-associative), postfix `%`, prefix `+ -`. Prefix minus binds tighter
//! than `^`, so `-2^2` is `(-2)^2`.

use thiserror::Error;

use super::ast::{BinaryOp, CellRef, Expr, UnaryOp};
use crate::workbook::{column_index, ErrorCode, MAX_ROW};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("bad reference {text:?} at byte {offset}")]
    BadReference { offset: usize, text: String },
}

impl FormulaError {
    pub fn offset(&self) -> usize {
        match self {
            FormulaError::Syntax { offset, .. }
            | FormulaError::UnbalancedParens { offset }
            | FormulaError::BadReference { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Str(String),
    Err(ErrorCode),
    Word(String),
    Quoted(String),
    Book(String),
    Opaque(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    Colon,
    Bang,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
    /// Whether whitespace preceded the token.
    spaced: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '\\')
}

fn lex(text: &str) -> Result<Vec<Spanned>, FormulaError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut spaced = false;
    while i < bytes.len() {
        let c = text[i..].chars().next().expect("in bounds");
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            spaced = true;
            continue;
        }
        let tok = match c {
            '0'..='9' | '.' if c != '.' || bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let (n, len) = lex_number(&text[i..]).ok_or(FormulaError::Syntax {
                    offset: i,
                    message: "malformed number".into(),
                })?;
                i += len;
                Tok::Number(n)
            }
            '"' => {
                let (s, len) = lex_delimited(&text[i..], '"').ok_or(FormulaError::Syntax {
                    offset: i,
                    message: "unterminated string".into(),
                })?;
                i += len;
                Tok::Str(s)
            }
            '\'' => {
                let (s, len) = lex_delimited(&text[i..], '\'').ok_or(FormulaError::Syntax {
                    offset: i,
                    message: "unterminated quoted sheet name".into(),
                })?;
                i += len;
                Tok::Quoted(s)
            }
            '#' => {
                let rest = &text[i..];
                let code = ErrorCode::ALL
                    .into_iter()
                    .filter(|code| {
                        rest.len() >= code.as_str().len()
                            && rest.is_char_boundary(code.as_str().len())
                            && rest[..code.as_str().len()].eq_ignore_ascii_case(code.as_str())
                    })
                    .max_by_key(|code| code.as_str().len())
                    .ok_or(FormulaError::Syntax {
                        offset: i,
                        message: "unknown error literal".into(),
                    })?;
                i += code.as_str().len();
                Tok::Err(code)
            }
            '[' => {
                let close = text[i..].find(']').ok_or(FormulaError::Syntax {
                    offset: i,
                    message: "unterminated workbook prefix".into(),
                })?;
                let inner = text[i + 1..i + close].to_string();
                i += close + 1;
                Tok::Book(inner)
            }
            '{' => {
                let close = text[i..].find('}').ok_or(FormulaError::Syntax {
                    offset: i,
                    message: "unterminated array constant".into(),
                })?;
                let raw = text[i..=i + close].to_string();
                i += close + 1;
                Tok::Opaque(raw)
            }
            c if c.is_alphabetic() || c == '_' || c == '$' || c == '\\' => {
                let len = text[i..]
                    .find(|ch: char| !(is_word_char(ch) || ch.is_alphabetic()))
                    .unwrap_or(text.len() - i);
                let word = &text[i..i + len];
                i += len;
                // Structured table reference: Table1[Column]
                if bytes.get(i) == Some(&b'[') {
                    let close = matching_bracket(&text[i..]).ok_or(FormulaError::Syntax {
                        offset: i,
                        message: "unterminated table reference".into(),
                    })?;
                    let raw = text[start..i + close + 1].to_string();
                    i += close + 1;
                    Tok::Opaque(raw)
                } else {
                    Tok::Word(word.to_string())
                }
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            '!' => {
                i += 1;
                Tok::Bang
            }
            '<' | '>' => {
                let two = text.get(i..i + 2);
                let op = match two {
                    Some("<=") => "<=",
                    Some(">=") => ">=",
                    Some("<>") => "<>",
                    _ if c == '<' => "<",
                    _ => ">",
                };
                i += op.len();
                Tok::Op(op)
            }
            '+' | '-' | '*' | '/' | '^' | '&' | '=' | '%' => {
                i += 1;
                Tok::Op(match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '^' => "^",
                    '&' => "&",
                    '=' => "=",
                    _ => "%",
                })
            }
            other => {
                return Err(FormulaError::Syntax {
                    offset: i,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        out.push(Spanned {
            tok,
            offset: start,
            spaced,
        });
        spaced = false;
    }
    Ok(out)
}

fn matching_bracket(text: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn lex_number(text: &str) -> Option<(f64, usize)> {
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let digits_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > digits_start {
            i = j;
        }
    }
    let n: f64 = text[..i].parse().ok()?;
    n.is_finite().then_some((n, i))
}

/// Reads a `delim`-quoted run with doubled-delimiter escapes.
fn lex_delimited(text: &str, delim: char) -> Option<(String, usize)> {
    let mut out = String::new();
    let mut chars = text.char_indices().skip(1).peekable();
    while let Some((i, c)) = chars.next() {
        if c == delim {
            if chars.peek().map(|&(_, n)| n) == Some(delim) {
                out.push(delim);
                chars.next();
            } else {
                return Some((out, i + c.len_utf8()));
            }
        } else {
            out.push(c);
        }
    }
    None
}

/// Splits `$A$1` into (col, row, col_abs, row_abs); `None` when the word is
/// not shaped like a cell reference.
fn split_cell_word(word: &str) -> Option<(u32, Result<u32, ()>, bool, bool)> {
    let b = word.as_bytes();
    let mut i = 0;
    let col_abs = b.first() == Some(&b'$');
    if col_abs {
        i += 1;
    }
    let letters_start = i;
    while i < b.len() && b[i].is_ascii_alphabetic() {
        i += 1;
    }
    let letters = &word[letters_start..i];
    let row_abs = b.get(i) == Some(&b'$');
    if row_abs {
        i += 1;
    }
    let digits = &word[i..];
    if letters.is_empty()
        || letters.len() > 3
        || digits.is_empty()
        || !digits.bytes().all(|d| d.is_ascii_digit())
    {
        return None;
    }
    let col = column_index(&letters.to_ascii_uppercase())?;
    let row = digits
        .parse::<u32>()
        .ok()
        .filter(|r| (1..=MAX_ROW).contains(r))
        .ok_or(());
    Some((col, row, col_abs, row_abs))
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Spanned> {
        self.toks.get(self.pos + n)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |s| s.offset)
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos).map(|s| &s.tok);
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        if let Some(Tok::Op(op)) = self.peek() {
            if ops.contains(op) {
                self.pos += 1;
                return Some(op);
            }
        }
        None
    }

    fn syntax(&self, message: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn binary_level(
        &mut self,
        ops: &[&'static str],
        next: fn(&mut Self) -> Result<Expr, FormulaError>,
    ) -> Result<Expr, FormulaError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.eat_op(ops) {
            let rhs = next(self)?;
            lhs = Expr::binary(binary_op(op), lhs, rhs);
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Expr, FormulaError> {
        self.binary_level(&["=", "<>", "<", "<=", ">", ">="], Self::concat)
    }

    fn concat(&mut self) -> Result<Expr, FormulaError> {
        self.binary_level(&["&"], Self::additive)
    }

    fn additive(&mut self) -> Result<Expr, FormulaError> {
        self.binary_level(&["+", "-"], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, FormulaError> {
        self.binary_level(&["*", "/"], Self::power)
    }

    fn power(&mut self) -> Result<Expr, FormulaError> {
        let base = self.postfix()?;
        if self.eat_op(&["^"]).is_some() {
            let exponent = self.power()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.prefix()?;
        while self.eat_op(&["%"]).is_some() {
            e = Expr::unary(UnaryOp::Percent, e);
        }
        Ok(e)
    }

    fn prefix(&mut self) -> Result<Expr, FormulaError> {
        match self.eat_op(&["+", "-"]) {
            Some("-") => Ok(Expr::unary(UnaryOp::Neg, self.prefix()?)),
            Some(_) => Ok(Expr::unary(UnaryOp::Plus, self.prefix()?)),
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        let offset = self.offset();
        match self.peek() {
            None => Err(self.syntax("unexpected end of formula")),
            Some(Tok::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Number(*n))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Text(s.clone()))
            }
            Some(Tok::Err(code)) => {
                self.pos += 1;
                Ok(Expr::Error(*code))
            }
            Some(Tok::Opaque(raw)) => {
                self.pos += 1;
                Ok(Expr::Opaque(raw.clone()))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.comparison()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(Expr::group(inner)),
                    None => Err(FormulaError::UnbalancedParens { offset }),
                    Some(_) => {
                        self.pos -= 1;
                        Err(self.syntax("expected ')'"))
                    }
                }
            }
            Some(Tok::RParen) => Err(FormulaError::UnbalancedParens { offset }),
            Some(Tok::Book(book)) => {
                self.pos += 1;
                let book = book.clone();
                match (self.bump(), self.bump()) {
                    (Some(Tok::Word(sheet)), Some(Tok::Bang)) => {
                        self.qualified_ref(Some(book), sheet.clone(), offset)
                    }
                    _ => Err(FormulaError::BadReference {
                        offset,
                        text: format!("[{book}]"),
                    }),
                }
            }
            Some(Tok::Quoted(q)) => {
                self.pos += 1;
                if self.bump() != Some(&Tok::Bang) {
                    return Err(FormulaError::BadReference {
                        offset,
                        text: format!("'{q}'"),
                    });
                }
                let (book, sheet) = split_book(q);
                self.qualified_ref(book, sheet, offset)
            }
            Some(Tok::Word(word)) => {
                self.pos += 1;
                let word = word.clone();
                match self.peek() {
                    Some(Tok::LParen) if !self.toks[self.pos].spaced => {
                        self.pos += 1;
                        self.call(word.to_ascii_uppercase(), offset)
                    }
                    Some(Tok::Bang) => {
                        self.pos += 1;
                        self.qualified_ref(None, word, offset)
                    }
                    _ => self.unqualified_word(word, offset),
                }
            }
            Some(_) => Err(self.syntax("expected an operand")),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, FormulaError> {
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(Expr::Call { name, args });
        }
        loop {
            let arg = match self.peek() {
                Some(Tok::Comma) | Some(Tok::RParen) => Expr::Missing,
                _ => self.comparison()?,
            };
            args.push(arg);
            match self.bump() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => return Ok(Expr::Call { name, args }),
                None => return Err(FormulaError::UnbalancedParens { offset }),
                Some(_) => {
                    self.pos -= 1;
                    return Err(self.syntax("expected ',' or ')' in argument list"));
                }
            }
        }
    }

    fn unqualified_word(&mut self, word: String, offset: usize) -> Result<Expr, FormulaError> {
        if let Some(start) = self.cell_ref(&word, None, None, offset)? {
            return self.maybe_range(start);
        }
        if word.eq_ignore_ascii_case("TRUE") {
            return Ok(Expr::Bool(true));
        }
        if word.eq_ignore_ascii_case("FALSE") {
            return Ok(Expr::Bool(false));
        }
        let valid_name = word
            .chars()
            .next()
            .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '\\')
            && !word.contains('$');
        if valid_name {
            Ok(Expr::Name(word))
        } else {
            Err(FormulaError::BadReference { offset, text: word })
        }
    }

    fn qualified_ref(
        &mut self,
        book: Option<String>,
        sheet: String,
        offset: usize,
    ) -> Result<Expr, FormulaError> {
        let word = match self.bump() {
            Some(Tok::Word(w)) => w.clone(),
            _ => {
                return Err(FormulaError::BadReference {
                    offset,
                    text: format!("{sheet}!"),
                })
            }
        };
        match self.cell_ref(&word, book, Some(sheet.clone()), offset)? {
            Some(start) => self.maybe_range(start),
            None => Err(FormulaError::BadReference {
                offset,
                text: format!("{sheet}!{word}"),
            }),
        }
    }

    fn cell_ref(
        &self,
        word: &str,
        book: Option<String>,
        sheet: Option<String>,
        offset: usize,
    ) -> Result<Option<CellRef>, FormulaError> {
        match split_cell_word(word) {
            None => Ok(None),
            Some((_, Err(()), _, _)) => Err(FormulaError::BadReference {
                offset,
                text: word.to_string(),
            }),
            Some((col, Ok(row), col_absolute, row_absolute)) => Ok(Some(CellRef {
                book,
                sheet,
                col,
                row,
                col_absolute,
                row_absolute,
            })),
        }
    }

    fn maybe_range(&mut self, start: CellRef) -> Result<Expr, FormulaError> {
        if self.peek() != Some(&Tok::Colon) {
            return Ok(Expr::Ref(start));
        }
        let offset = self.offset();
        self.pos += 1;
        let end = match self.bump() {
            Some(Tok::Word(w)) => self.cell_ref(w, None, None, offset)?,
            _ => None,
        };
        match end {
            Some(end) => Ok(Expr::Range { start, end }),
            None => Err(FormulaError::BadReference {
                offset,
                text: "range end".into(),
            }),
        }
    }
}

/// `[Book.xlsx]Sheet` or `C:\dir\[Book.xlsx]Sheet` → (book, sheet).
fn split_book(quoted: &str) -> (Option<String>, String) {
    match (quoted.find('['), quoted.rfind(']')) {
        (Some(open), Some(close)) if open < close => (
            Some(quoted[..close].replacen('[', "", 1).to_string()),
            quoted[close + 1..].to_string(),
        ),
        _ => (None, quoted.to_string()),
    }
}

fn binary_op(op: &str) -> BinaryOp {
    match op {
        "+" => BinaryOp::Add,
        "-" => BinaryOp::Sub,
        "*" => BinaryOp::Mul,
        "/" => BinaryOp::Div,
        "^" => BinaryOp::Pow,
        "&" => BinaryOp::Concat,
        "=" => BinaryOp::Eq,
        "<>" => BinaryOp::Ne,
        "<" => BinaryOp::Lt,
        "<=" => BinaryOp::Le,
        ">" => BinaryOp::Gt,
        ">=" => BinaryOp::Ge,
        _ => unreachable!("lexer only emits known operators"),
    }
}

/// Parses a formula written without its leading `=`.
pub fn parse_formula(text: &str) -> Result<Expr, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        len: text.len(),
    };
    if toks.is_empty() {
        return Err(FormulaError::Syntax {
            offset: 0,
            message: "empty formula".into(),
        });
    }
    let expr = p.comparison()?;
    match p.peek_at(0) {
        None => Ok(expr),
        Some(Spanned {
            tok: Tok::RParen,
            offset,
            ..
        }) => Err(FormulaError::UnbalancedParens { offset: *offset }),
        Some(s) => Err(FormulaError::Syntax {
            offset: s.offset,
            message: "unexpected trailing input".into(),
        }),
    }
}
