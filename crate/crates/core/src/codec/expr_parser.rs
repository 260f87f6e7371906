//! Recursive-descent parser for the embedded expression language.
//!
//! Precedence, loosest first: `||`, `&&`, comparisons, `+ -`, `* / %`,
//! prefix `- ! * &`, then postfix call/index/member. Binary operators are
//! left associative.

use std::fmt;

use crate::program::{BinaryOp, Expr, UnaryOp};

/// Parser recursion guard; keeps hostile input from exhausting the stack.
const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ExprParseError {
    /// Byte offset into the expression text.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ExprParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Char(u8),
    Str(String),
    Ident(String),
    Punct(&'static str),
}

const PUNCT: [&str; 24] = [
    "->", "<=", ">=", "==", "!=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "&", "(",
    ")", "[", "]", ",", ".", "=", "?",
];

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| ExprParseError {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if i < bytes.len() && bytes[i] == b'.' {
                is_float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(err(i, "malformed number"));
            }
            let text = &src[start..i];
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| err(start, "malformed number"))?)
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| err(start, "integer literal out of range"))?,
                )
            };
            out.push((tok, start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        if c == b'\'' || c == b'"' {
            let quote = c;
            i += 1;
            let mut text = Vec::new();
            loop {
                let Some(&b) = bytes.get(i) else {
                    return Err(err(start, "unterminated literal"));
                };
                i += 1;
                if b == quote {
                    break;
                }
                if !b.is_ascii() {
                    return Err(err(i - 1, "only ASCII characters are allowed in literals"));
                }
                if b == b'\\' {
                    let Some(&e) = bytes.get(i) else {
                        return Err(err(start, "unterminated literal"));
                    };
                    i += 1;
                    text.push(match e {
                        b'n' => b'\n',
                        b't' => b'\t',
                        b'r' => b'\r',
                        b'0' => 0,
                        b'\\' | b'\'' | b'"' => e,
                        _ => return Err(err(i - 2, "unknown escape sequence")),
                    });
                } else {
                    text.push(b);
                }
            }
            let tok = if quote == b'\'' {
                if text.len() != 1 {
                    return Err(err(start, "character literal must hold exactly one character"));
                }
                Tok::Char(text[0])
            } else {
                Tok::Str(String::from_utf8(text).expect("ASCII only"))
            };
            out.push((tok, start));
            continue;
        }
        match PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                if *p == "=" || *p == "?" {
                    return Err(err(i, "assignment and conditional operators are not expressions here"));
                }
                i += p.len();
                out.push((Tok::Punct(p), start));
            }
            None => return Err(err(i, "unexpected character")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    nesting: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprParseError> {
        Err(ExprParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ExprParseError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn enter(&mut self) -> Result<(), ExprParseError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return self.err("expression nests too deeply");
        }
        Ok(())
    }

    fn binary_level(&mut self, level: u8) -> Result<Expr, ExprParseError> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct(p)) => match (level, *p) {
                    (1, "||") => BinaryOp::Or,
                    (2, "&&") => BinaryOp::And,
                    (3, "<") => BinaryOp::Lt,
                    (3, "<=") => BinaryOp::Le,
                    (3, ">") => BinaryOp::Gt,
                    (3, ">=") => BinaryOp::Ge,
                    (3, "==") => BinaryOp::Eq,
                    (3, "!=") => BinaryOp::Ne,
                    (4, "+") => BinaryOp::Add,
                    (4, "-") => BinaryOp::Sub,
                    (5, "*") => BinaryOp::Mul,
                    (5, "/") => BinaryOp::Div,
                    (5, "%") => BinaryOp::Rem,
                    _ => break,
                },
                _ => break,
            };
            self.pos += 1;
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprParseError> {
        self.enter()?;
        let result = if self.eat("-") {
            Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?))
        } else if self.eat("!") {
            Expr::Unary(UnaryOp::Not, Box::new(self.unary()?))
        } else if self.eat("*") {
            Expr::Deref(Box::new(self.unary()?))
        } else if self.eat("&") {
            Expr::AddrOf(Box::new(self.unary()?))
        } else {
            self.postfix()?
        };
        self.nesting -= 1;
        Ok(result)
    }

    fn postfix(&mut self) -> Result<Expr, ExprParseError> {
        let mut e = self.primary()?;
        loop {
            if self.eat("(") {
                let Expr::Var(name) = e else {
                    return self.err("only named functions can be called");
                };
                let mut args = Vec::new();
                if !self.eat(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                e = Expr::Call(name, args);
            } else if self.eat("[") {
                let idx = self.expr()?;
                self.expect("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.eat(".") || self.eat("->") {
                let arrow = matches!(self.toks[self.pos - 1].0, Tok::Punct("->"));
                match self.peek().cloned() {
                    Some(Tok::Ident(field)) => {
                        self.pos += 1;
                        e = Expr::Member {
                            base: Box::new(e),
                            field,
                            arrow,
                        };
                    }
                    _ => return self.err("expected member name"),
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        Ok(match tok {
            Tok::Int(v) => Expr::Int(v),
            Tok::Float(v) => Expr::Float(v),
            Tok::Char(c) => Expr::Char(c),
            Tok::Str(s) => Expr::Str(s),
            Tok::Ident(name) if name == "NULL" => Expr::Null,
            Tok::Ident(name) => Expr::Var(name),
            Tok::Punct("(") => {
                self.enter()?;
                let e = self.expr()?;
                self.expect(")")?;
                self.nesting -= 1;
                e
            }
            Tok::Punct(p) => {
                self.pos -= 1;
                return self.err(format!("unexpected `{p}`"));
            }
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        self.binary_level(1)
    }
}

/// Parses one complete expression.
pub fn parse_expr(src: &str) -> Result<Expr, ExprParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
        nesting: 0,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}
