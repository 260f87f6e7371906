use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum pointer nesting accepted by validation.
pub const MAX_POINTER_DEPTH: usize = 4;

/// Static type of a value in the teaching language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Int,
    Float,
    Char,
    Void,
    PointerTo(Box<DataType>),
    ArrayOf(Box<DataType>, usize),
    StructRef(String),
    FileHandle,
}

impl DataType {
    pub fn pointer_to(inner: DataType) -> Self {
        DataType::PointerTo(Box::new(inner))
    }

    pub fn array_of(inner: DataType, len: usize) -> Self {
        DataType::ArrayOf(Box::new(inner), len)
    }

    pub fn is_integral(&self) -> bool {
        matches!(self, DataType::Int | DataType::Char)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, DataType::Int | DataType::Char | DataType::Float)
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, DataType::PointerTo(_))
    }

    /// Pointer or array: anything that can stand for an address.
    pub fn is_address(&self) -> bool {
        matches!(self, DataType::PointerTo(_) | DataType::ArrayOf(..))
    }

    /// Usable as a truth value.
    pub fn is_scalar(&self) -> bool {
        !matches!(self, DataType::StructRef(_) | DataType::Void)
    }

    /// Arrays decay to a pointer to their first element in value contexts.
    pub fn decayed(&self) -> DataType {
        match self {
            DataType::ArrayOf(inner, _) => DataType::PointerTo(inner.clone()),
            other => other.clone(),
        }
    }

    /// Depth of the longest chain of `PointerTo` constructors.
    pub fn pointer_depth(&self) -> usize {
        match self {
            DataType::PointerTo(inner) => 1 + inner.pointer_depth(),
            DataType::ArrayOf(inner, _) => inner.pointer_depth(),
            _ => 0,
        }
    }

    /// Every struct name mentioned anywhere in this type.
    pub fn struct_names(&self) -> Vec<&str> {
        match self {
            DataType::StructRef(name) => vec![name.as_str()],
            DataType::PointerTo(inner) | DataType::ArrayOf(inner, _) => inner.struct_names(),
            _ => Vec::new(),
        }
    }

    /// Type equality as used by the assignment and initialisation checks:
    /// equal after array decay, with `void*` (and `NULL`) matching any pointer.
    pub fn equivalent(&self, other: &DataType) -> bool {
        let (a, b) = (self.decayed(), other.decayed());
        if a == b {
            return true;
        }
        match (&a, &b) {
            (DataType::PointerTo(x), DataType::PointerTo(y)) => {
                **x == DataType::Void || **y == DataType::Void
            }
            _ => false,
        }
    }

    /// Implicit conversion rules for call arguments: numeric types
    /// interconvert, otherwise the types must be equivalent.
    pub fn accepts(&self, value: &DataType) -> bool {
        if self.is_numeric() && value.is_numeric() {
            return true;
        }
        self.equivalent(value)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::Int => f.write_str("int"),
            DataType::Float => f.write_str("float"),
            DataType::Char => f.write_str("char"),
            DataType::Void => f.write_str("void"),
            DataType::FileHandle => f.write_str("FILE*"),
            DataType::StructRef(name) => write!(f, "struct {name}"),
            DataType::PointerTo(inner) => write!(f, "{inner}*"),
            DataType::ArrayOf(..) => {
                let mut dims = Vec::new();
                let mut cur = self;
                while let DataType::ArrayOf(inner, len) = cur {
                    dims.push(*len);
                    cur = inner;
                }
                write!(f, "{cur}")?;
                for d in dims {
                    write!(f, "[{d}]")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid type `{text}`: {reason}")]
pub struct TypeParseError {
    pub text: String,
    pub reason: String,
}

impl FromStr for DataType {
    type Err = TypeParseError;

    /// Parses `base suffix*` where base is `int|float|char|void|FILE*|struct NAME`
    /// and each suffix is `*` or `[N]`. A run of consecutive dimensions is read
    /// the C way (`int[2][3]` is two arrays of three).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| TypeParseError {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let text = s.trim();
        let (mut ty, mut rest) = if let Some(r) = text.strip_prefix("struct") {
            let r = r.trim_start();
            let end = r
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(r.len());
            let name = &r[..end];
            if !is_identifier(name) || !text[6..].starts_with(char::is_whitespace) {
                return Err(err("expected struct name"));
            }
            (DataType::StructRef(name.to_string()), &r[end..])
        } else if let Some(r) = text.strip_prefix("FILE") {
            let r = r.trim_start();
            match r.strip_prefix('*') {
                Some(r) => (DataType::FileHandle, r),
                None => return Err(err("FILE is only usable as FILE*")),
            }
        } else {
            let end = text
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(text.len());
            let base = match &text[..end] {
                "int" => DataType::Int,
                "float" => DataType::Float,
                "char" => DataType::Char,
                "void" => DataType::Void,
                _ => return Err(err("unknown base type")),
            };
            (base, &text[end..])
        };

        loop {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            if let Some(r) = rest.strip_prefix('*') {
                ty = DataType::pointer_to(ty);
                rest = r;
                continue;
            }
            if rest.starts_with('[') {
                let mut dims = Vec::new();
                while let Some(r) = rest.trim_start().strip_prefix('[') {
                    let close = r.find(']').ok_or_else(|| err("unclosed `[`"))?;
                    let len: usize = r[..close]
                        .trim()
                        .parse()
                        .map_err(|_| err("array length must be a non-negative integer"))?;
                    dims.push(len);
                    rest = &r[close + 1..];
                }
                for len in dims.into_iter().rev() {
                    ty = DataType::array_of(ty, len);
                }
                continue;
            }
            return Err(err("unexpected trailing text"));
        }
        Ok(ty)
    }
}

impl Serialize for DataType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DataType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
