//! Rule language: relevance patterns (`cr`) and satisfaction predicates
//! (`cs`), in the JSON shape used by `.rules.json` files.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::program::{BlockKind, DataType, ExprNodeKind};

/// `binding` or `binding.attr`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ref {
    pub binding: String,
    pub attr: Option<String>,
}

impl FromStr for Ref {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (binding, attr) = match s.split_once('.') {
            Some((b, a)) => (b, Some(a)),
            None => (s, None),
        };
        if binding.is_empty() || attr == Some("") {
            return Err(format!("malformed reference `{s}`"));
        }
        Ok(Ref {
            binding: binding.to_string(),
            attr: attr.map(str::to_string),
        })
    }
}

impl TryFrom<String> for Ref {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Ref> for String {
    fn from(r: Ref) -> String {
        r.to_string()
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.attr {
            Some(a) => write!(f, "{}.{a}", self.binding),
            None => f.write_str(&self.binding),
        }
    }
}

/// Where an `exists`/`count_at_least` query looks for blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scope {
    Anywhere,
    /// Strict descendants of the bound block (`@a`).
    Within(String),
    /// Blocks earlier in pre-order that do not enclose the bound block.
    Before(String),
    /// Blocks later in pre-order that are not inside the bound block.
    After(String),
}

impl Scope {
    pub fn binding(&self) -> Option<&str> {
        match self {
            Scope::Anywhere => None,
            Scope::Within(b) | Scope::Before(b) | Scope::After(b) => Some(b),
        }
    }
}

impl Default for Scope {
    fn default() -> Self {
        Scope::Anywhere
    }
}

impl TryFrom<String> for Scope {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let binding = |rest: &str| match rest.strip_prefix('@') {
            Some(b) if !b.is_empty() => Ok(b.to_string()),
            _ => Err(format!("malformed scope `{s}`")),
        };
        if s == "anywhere" {
            Ok(Scope::Anywhere)
        } else if let Some(rest) = s.strip_prefix("before:") {
            binding(rest).map(Scope::Before)
        } else if let Some(rest) = s.strip_prefix("after:") {
            binding(rest).map(Scope::After)
        } else {
            binding(&s).map(Scope::Within)
        }
    }
}

impl From<Scope> for String {
    fn from(s: Scope) -> String {
        match s {
            Scope::Anywhere => "anywhere".into(),
            Scope::Within(b) => format!("@{b}"),
            Scope::Before(b) => format!("before:@{b}"),
            Scope::After(b) => format!("after:@{b}"),
        }
    }
}

/// Families of data types a predicate can ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeClass {
    Int,
    Float,
    Char,
    Void,
    Numeric,
    Integral,
    Pointer,
    Address,
    Array,
    Struct,
    File,
    Scalar,
    /// `char*` or an array of `char`.
    String,
}

impl TypeClass {
    pub fn matches(self, t: &DataType) -> bool {
        match self {
            TypeClass::Int => *t == DataType::Int,
            TypeClass::Float => *t == DataType::Float,
            TypeClass::Char => *t == DataType::Char,
            TypeClass::Void => *t == DataType::Void,
            TypeClass::Numeric => t.is_numeric(),
            TypeClass::Integral => t.is_integral(),
            TypeClass::Pointer => t.is_pointer(),
            TypeClass::Address => t.is_address(),
            TypeClass::Array => matches!(t, DataType::ArrayOf(..)),
            TypeClass::Struct => matches!(t, DataType::StructRef(_)),
            TypeClass::File => *t == DataType::FileHandle,
            TypeClass::Scalar => t.is_scalar(),
            TypeClass::String => t.decayed() == DataType::pointer_to(DataType::Char),
        }
    }
}

/// Test on a single block (the candidate), possibly relating it to
/// blocks bound earlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AttrPred {
    /// The attribute is set (a list attribute must be non-empty).
    Present(String),
    Absent(String),
    /// Canonical attribute text equals `value`.
    Equals { attr: String, value: String },
    /// Canonical attribute text equals that of a bound block's attribute.
    SameAs {
        attr: String,
        #[serde(rename = "ref")]
        reference: Ref,
    },
    /// Some expression in `attr` (`*` for any attribute) has a node of this kind.
    Contains { attr: String, node: ExprNodeKind },
    /// The attribute types, and every type found is in `class`.
    TypeIs { attr: String, class: TypeClass },
    /// The candidate has one of these kinds.
    Is(Vec<BlockKind>),
    /// Some ancestor has one of these kinds.
    Inside(Vec<BlockKind>),
    /// The candidate is a strict descendant of the bound block.
    InsideBinding(String),
    /// The parent has one of these kinds.
    Parent(Vec<BlockKind>),
    TopLevel(bool),
    Not(Box<AttrPred>),
    Any(Vec<AttrPred>),
}

impl AttrPred {
    pub(crate) fn bindings<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            AttrPred::SameAs { reference, .. } => out.push(&reference.binding),
            AttrPred::InsideBinding(b) => out.push(b),
            AttrPred::Not(p) => p.bindings(out),
            AttrPred::Any(ps) => ps.iter().for_each(|p| p.bindings(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matcher {
    pub bind: String,
    /// Empty matches every kind.
    #[serde(default)]
    pub kind: Vec<BlockKind>,
    #[serde(default, rename = "where")]
    pub preds: Vec<AttrPred>,
}

/// Cr: required problem tags plus node matchers. Bindings are the
/// cartesian product of the matchers' candidates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relevance {
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default, rename = "match")]
    pub matchers: Vec<Matcher>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeQuery {
    #[serde(default)]
    pub kind: Vec<BlockKind>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default, rename = "where")]
    pub preds: Vec<AttrPred>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountQuery {
    #[serde(default)]
    pub kind: Vec<BlockKind>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default, rename = "where")]
    pub preds: Vec<AttrPred>,
    pub n: usize,
}

/// Cs: evaluated once per relevance binding.
///
/// Type-based predicates hold vacuously when an operand cannot be typed;
/// missing declarations are reported by their own rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Satisfaction {
    All(Vec<Satisfaction>),
    Any(Vec<Satisfaction>),
    Not(Box<Satisfaction>),
    Exists(NodeQuery),
    CountAtLeast(CountQuery),
    /// Both sides have equivalent types.
    TypeEquals(Ref, Ref),
    /// The right side converts implicitly to the left side's type.
    TypeAccepts(Ref, Ref),
    TypeIs {
        #[serde(rename = "ref")]
        reference: Ref,
        class: TypeClass,
    },
    AttrEquals {
        #[serde(rename = "ref")]
        reference: Ref,
        value: String,
    },
    /// The attribute predicates hold on a bound block.
    Holds {
        binding: String,
        #[serde(rename = "where")]
        preds: Vec<AttrPred>,
    },
    Present(Ref),
    /// Every variable the block mentions is declared in its scope.
    DeclaredBeforeUse(String),
    /// Every function the block calls is defined or built in.
    CalleeDefined(String),
    CallArityMatches(String),
    CallArgsMatch(String),
    /// No expression of the block misuses a type.
    ExprTyped(String),
    FormatArgsMatch(String),
    FormatTypesMatch(String),
    /// A declaration does not repeat a name from the same scope.
    NotRedeclared(String),
    Lvalue(Ref),
}

impl Satisfaction {
    /// Every binding name the predicate mentions.
    pub fn bindings(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        use Satisfaction as S;
        match self {
            S::All(xs) | S::Any(xs) => xs.iter().for_each(|x| x.collect(out)),
            S::Not(x) => x.collect(out),
            S::Exists(NodeQuery { scope, preds, .. })
            | S::CountAtLeast(CountQuery { scope, preds, .. }) => {
                out.extend(scope.binding());
                preds.iter().for_each(|p| p.bindings(out));
            }
            S::TypeEquals(a, b) | S::TypeAccepts(a, b) => {
                out.push(&a.binding);
                out.push(&b.binding);
            }
            S::TypeIs { reference, .. }
            | S::AttrEquals { reference, .. }
            | S::Present(reference)
            | S::Lvalue(reference) => out.push(&reference.binding),
            S::Holds { binding, preds } => {
                out.push(binding);
                preds.iter().for_each(|p| p.bindings(out));
            }
            S::DeclaredBeforeUse(b)
            | S::CalleeDefined(b)
            | S::CallArityMatches(b)
            | S::CallArgsMatch(b)
            | S::ExprTyped(b)
            | S::FormatArgsMatch(b)
            | S::FormatTypesMatch(b)
            | S::NotRedeclared(b) => out.push(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refs_and_scopes_parse() {
        let r: Ref = "a.value".parse().unwrap();
        assert_eq!(r.binding, "a");
        assert_eq!(r.attr.as_deref(), Some("value"));
        assert!("".parse::<Ref>().is_err());
        assert!("a.".parse::<Ref>().is_err());
        for s in ["anywhere", "@f", "before:@x", "after:@m"] {
            let scope = Scope::try_from(s.to_string()).unwrap();
            assert_eq!(String::from(scope), s);
        }
        assert!(Scope::try_from("f".to_string()).is_err());
    }

    #[test]
    fn satisfaction_json_shape() {
        let cs: Satisfaction = serde_json::from_str(
            r#"{"all": [{"type_equals": ["a.target", "a.value"]},
                        {"exists": {"kind": ["ForLoop"], "scope": "@f"}}]}"#,
        )
        .unwrap();
        let mut b = cs.bindings();
        b.sort();
        assert_eq!(b, vec!["a", "a", "f"]);
        assert!(serde_json::from_str::<Satisfaction>(r#"{"exists": {"kinds": []}}"#).is_err());
    }
}
