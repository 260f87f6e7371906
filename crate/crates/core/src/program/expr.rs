use std::fmt;

/// Maximum expression nesting accepted by validation.
pub const MAX_EXPR_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }
}

const PREFIX_PREC: u8 = 6;
const POSTFIX_PREC: u8 = 7;

/// Expression tree embedded in blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Char(u8),
    Str(String),
    Null,
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    AddrOf(Box<Expr>),
    Deref(Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
}

/// Node kinds usable in "expression contains" queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExprNodeKind {
    IntLiteral,
    FloatLiteral,
    CharLiteral,
    StringLiteral,
    Null,
    Variable,
    Negation,
    LogicalNot,
    Arithmetic,
    Modulo,
    Comparison,
    Logical,
    Call,
    AddressOf,
    Deref,
    Index,
    Member,
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Float(_) | Expr::Char(_) | Expr::Str(_) | Expr::Null | Expr::Var(_) => {
                Vec::new()
            }
            Expr::Unary(_, e) | Expr::AddrOf(e) | Expr::Deref(e) => vec![e],
            Expr::Binary(_, l, r) | Expr::Index(l, r) => vec![l, r],
            Expr::Call(_, args) => args.iter().collect(),
            Expr::Member { base, .. } => vec![base],
        }
    }

    pub fn node_kind(&self) -> ExprNodeKind {
        match self {
            Expr::Int(_) => ExprNodeKind::IntLiteral,
            Expr::Float(_) => ExprNodeKind::FloatLiteral,
            Expr::Char(_) => ExprNodeKind::CharLiteral,
            Expr::Str(_) => ExprNodeKind::StringLiteral,
            Expr::Null => ExprNodeKind::Null,
            Expr::Var(_) => ExprNodeKind::Variable,
            Expr::Unary(UnaryOp::Neg, _) => ExprNodeKind::Negation,
            Expr::Unary(UnaryOp::Not, _) => ExprNodeKind::LogicalNot,
            Expr::Binary(BinaryOp::Rem, ..) => ExprNodeKind::Modulo,
            Expr::Binary(op, ..) if op.is_comparison() => ExprNodeKind::Comparison,
            Expr::Binary(op, ..) if op.is_logical() => ExprNodeKind::Logical,
            Expr::Binary(..) => ExprNodeKind::Arithmetic,
            Expr::Call(..) => ExprNodeKind::Call,
            Expr::AddrOf(_) => ExprNodeKind::AddressOf,
            Expr::Deref(_) => ExprNodeKind::Deref,
            Expr::Index(..) => ExprNodeKind::Index,
            Expr::Member { .. } => ExprNodeKind::Member,
        }
    }

    /// Pre-order walk over this expression and all subexpressions.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Expr)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    pub fn contains(&self, kind: ExprNodeKind) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= e.node_kind() == kind);
        found
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Variable names referenced, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(name) = e {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        });
        out
    }

    /// Every call node as (callee, argument count).
    pub fn calls(&self) -> Vec<(&str, &[Expr])> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Call(name, args) = e {
                out.push((name.as_str(), args.as_slice()));
            }
        });
        out
    }

    pub fn is_lvalue(&self) -> bool {
        matches!(
            self,
            Expr::Var(_) | Expr::Deref(_) | Expr::Index(..) | Expr::Member { .. }
        )
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) | Expr::AddrOf(_) | Expr::Deref(_) => PREFIX_PREC,
            Expr::Index(..) | Expr::Member { .. } | Expr::Call(..) => POSTFIX_PREC,
            _ => u8::MAX,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn escape_char(c: u8, quote: u8, out: &mut String) {
    match c {
        b'\n' => out.push_str("\\n"),
        b'\t' => out.push_str("\\t"),
        b'\r' => out.push_str("\\r"),
        0 => out.push_str("\\0"),
        b'\\' => out.push_str("\\\\"),
        c if c == quote => {
            out.push('\\');
            out.push(c as char);
        }
        c => out.push(c as char),
    }
}

/// Canonical rendering; re-parsing the output yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Float(v) => write!(f, "{v:?}"),
            Expr::Char(c) => {
                let mut s = String::from("'");
                escape_char(*c, b'\'', &mut s);
                s.push('\'');
                f.write_str(&s)
            }
            Expr::Str(text) => {
                let mut s = String::from("\"");
                for b in text.bytes() {
                    escape_char(b, b'"', &mut s);
                }
                s.push('"');
                f.write_str(&s)
            }
            Expr::Null => f.write_str("NULL"),
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                })?;
                e.fmt_operand(f, PREFIX_PREC)
            }
            Expr::AddrOf(e) => {
                f.write_str("&")?;
                // `&&` would lex as logical and
                if matches!(**e, Expr::AddrOf(_)) {
                    write!(f, "({e})")
                } else {
                    e.fmt_operand(f, PREFIX_PREC)
                }
            }
            Expr::Deref(e) => {
                f.write_str("*")?;
                e.fmt_operand(f, PREFIX_PREC)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                l.fmt_operand(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_operand(f, p + 1)
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Index(base, idx) => {
                base.fmt_operand(f, POSTFIX_PREC)?;
                write!(f, "[{idx}]")
            }
            Expr::Member { base, field, arrow } => {
                base.fmt_operand(f, POSTFIX_PREC)?;
                write!(f, "{}{field}", if *arrow { "->" } else { "." })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parenthesises_by_precedence() {
        let e = Expr::binary(
            BinaryOp::Mul,
            Expr::binary(BinaryOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::var("b"),
        );
        assert_eq!(e.to_string(), "(a + 1) * b");
        let e = Expr::binary(
            BinaryOp::Sub,
            Expr::var("a"),
            Expr::binary(BinaryOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::Deref(Box::new(Expr::binary(BinaryOp::Add, Expr::var("p"), Expr::Int(1))));
        assert_eq!(e.to_string(), "*(p + 1)");
        assert_eq!(Expr::Float(2.0).to_string(), "2.0");
        assert_eq!(Expr::Char(b'\n').to_string(), "'\\n'");
    }

    #[test]
    fn queries() {
        let e = Expr::binary(
            BinaryOp::Rem,
            Expr::Call("f".into(), vec![Expr::var("x")]),
            Expr::var("x"),
        );
        assert!(e.contains(ExprNodeKind::Modulo));
        assert!(e.contains(ExprNodeKind::Call));
        assert!(!e.contains(ExprNodeKind::Deref));
        assert_eq!(e.variables(), vec!["x"]);
        assert_eq!(e.depth(), 3);
    }
}
