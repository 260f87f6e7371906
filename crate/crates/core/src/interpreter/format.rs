//! `printf`/`scanf` style formatting.

use super::memory::Value;
use super::Fault;

/// One piece of a format string.
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Text(Vec<u8>),
    Spec(char),
}

/// Splits a format string into literal text and conversions. Backslash
/// escapes typed into the block (`\n`, `\t`, ...) are decoded here.
pub fn parse_format(format: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut text = Vec::new();
    let mut chars = format.chars();
    let push_char = |text: &mut Vec<u8>, c: char| {
        let mut buf = [0u8; 4];
        text.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
    };
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => text.push(b'\n'),
                Some('t') => text.push(b'\t'),
                Some('r') => text.push(b'\r'),
                Some('0') => text.push(0),
                Some(other) => push_char(&mut text, other),
                None => text.push(b'\\'),
            },
            '%' => match chars.next() {
                Some('%') => text.push(b'%'),
                Some(spec) => {
                    if !text.is_empty() {
                        out.push(Piece::Text(std::mem::take(&mut text)));
                    }
                    out.push(Piece::Spec(spec));
                }
                None => text.push(b'%'),
            },
            c => push_char(&mut text, c),
        }
    }
    if !text.is_empty() {
        out.push(Piece::Text(text));
    }
    out
}

/// Shortest representation that reads back to the same float.
pub fn format_float(f: f64) -> String {
    if f.is_nan() {
        "nan".to_string()
    } else if f.is_infinite() {
        if f > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{f:?}")
    }
}

/// Renders one conversion. `%s` arguments arrive already resolved to bytes.
pub fn render(spec: char, value: &Value, string: Option<Vec<u8>>) -> Result<Vec<u8>, Fault> {
    let mismatch = || Fault::runtime(format!("%{spec} cannot print {}", value.describe()));
    match spec {
        'd' | 'i' => value.as_int().map(|i| i.to_string().into_bytes()).ok_or_else(mismatch),
        'c' => value.as_int().map(|i| vec![i as u8]).ok_or_else(mismatch),
        'f' => match value {
            Value::Float(f) => Ok(format_float(*f).into_bytes()),
            _ => Err(mismatch()),
        },
        's' => string.ok_or_else(mismatch),
        other => Err(Fault::runtime(format!("unsupported conversion %{other}"))),
    }
}

/// Parses one input token for a conversion.
pub fn scan(spec: char, token: &str) -> Result<Value, Fault> {
    let bad = |what: &str| Fault::runtime(format!("expected {what} but read `{token}`"));
    match spec {
        'd' | 'i' => token.parse::<i32>().map(Value::Int).map_err(|_| bad("an integer")),
        'f' => token
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .map(Value::Float)
            .ok_or_else(|| bad("a number")),
        'c' => token.bytes().next().map(Value::Char).ok_or_else(|| bad("a character")),
        other => Err(Fault::runtime(format!("unsupported conversion %{other}"))),
    }
}
