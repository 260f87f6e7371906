#![allow(dead_code)]

pub mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use tutor_core::codec::parse_solution;
use tutor_core::program::Program;

const EXPRS: &[&str] = &[
    "x", "y", "x + 1", "3.5", "0", "*p", "&x", "&y", "p", "q", "sq(x)", "abs(y)", "x % 2",
    "y / 2.0", "s", "\"t.txt\"", "'c'", "p[0]", "x == y", "sq(1, 2)", "f", "foo(x)", "v",
    "pt.a", "*x",
];
const TYPES: &[&str] = &[
    "int", "float", "char", "int*", "float*", "FILE*", "char*", "int[3]", "void", "struct pt",
];
const VARS: &[&str] = &["x", "y", "p", "q", "f", "s", "v"];
const TAGS: &[&str] = &[
    "applies-function-over-range",
    "requires-conditional",
    "requires-sorting",
    "requires-helper-function",
    "reads-input",
    "prints-result",
    "uses-dynamic-memory",
    "uses-files",
];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn opt_expr<R: Rng>(rng: &mut R) -> Option<&'static str> {
    rng.gen_bool(0.8).then(|| pick(rng, EXPRS))
}

fn args<R: Rng>(rng: &mut R) -> Vec<&'static str> {
    let n = rng.gen_range(0..3);
    (0..n).map(|_| pick(rng, EXPRS)).collect()
}

fn attrs<R: Rng>(rng: &mut R, kind: &str) -> Value {
    let mut a = serde_json::Map::new();
    let mut set = |k: &str, v: Value| {
        a.insert(k.to_string(), v);
    };
    match kind {
        "Declaration" => {
            set("name", json!(pick(rng, VARS)));
            set("type", json!(pick(rng, TYPES)));
            if let Some(e) = opt_expr(rng) {
                set("init", json!(e));
            }
        }
        "Assignment" => {
            set("target", json!(pick(rng, &["x", "y", "p", "*p", "x + 1", "q"])));
            if let Some(e) = opt_expr(rng) {
                set("value", json!(e));
            }
        }
        "If" | "WhileLoop" | "DoWhileLoop" => {
            if let Some(e) = opt_expr(rng) {
                set("cond", json!(e));
            }
        }
        "Switch" => set("on", json!(pick(rng, EXPRS))),
        "Case" => {
            if rng.gen_bool(0.7) {
                set("value", json!(pick(rng, &["0", "1", "'c'"])));
            }
        }
        "ForLoop" => {
            set("var", json!(pick(rng, VARS)));
            set("init", json!(pick(rng, EXPRS)));
            if let Some(e) = opt_expr(rng) {
                set("cond", json!(e));
            }
            set("step", json!(pick(rng, EXPRS)));
        }
        "FunctionDef" => {
            set("name", json!(pick(rng, &["main", "sq", "show"])));
            set("return_type", json!(pick(rng, &["int", "void", "float"])));
            let params = if rng.gen_bool(0.5) {
                json!([{"name": "v", "type": pick(rng, &["int", "float", "int*"])}])
            } else {
                json!([])
            };
            set("params", params);
        }
        "FunctionCall" => {
            set("callee", json!(pick(rng, &["sq", "abs", "foo", "show", "main"])));
            set("args", json!(args(rng)));
        }
        "Return" => {
            if let Some(e) = opt_expr(rng) {
                set("value", json!(e));
            }
        }
        "Preprocessor" => set("directive", json!("#include <stdio.h>")),
        "StructDef" => {
            set("name", json!("pt"));
            set("fields", json!([{"name": "a", "type": "int"}]));
        }
        "FileOp" => {
            let op = pick(rng, &["open", "close", "read", "write"]);
            set("op", json!(op));
            set("handle", json!(pick(rng, &["f", "x"])));
            match op {
                "open" => {
                    set("path", json!(pick(rng, &["\"t.txt\"", "x", "s"])));
                    set("mode", json!(pick(rng, &["r", "w", "a", "x"])));
                }
                "read" | "write" => {
                    set("format", json!(pick(rng, &["%d", "%f %d", "%s"])));
                    set("args", json!(args(rng)));
                }
                _ => {}
            }
        }
        "MemAlloc" => {
            set("target", json!(pick(rng, &["p", "q", "x"])));
            set("type", json!(pick(rng, &["int", "float", "char"])));
            set("count", json!(pick(rng, &["10", "x", "2.5"])));
        }
        "MemFree" => set("target", json!(pick(rng, &["p", "q", "x"]))),
        "Output" | "Input" => {
            set("format", json!(pick(rng, &["%d", "%f", "%d %d", "%s", "x=%%", "%c"])));
            set("args", json!(args(rng)));
        }
        _ => {}
    }
    Value::Object(a)
}

const LEAVES: &[&str] = &[
    "Declaration", "Assignment", "FunctionCall", "Return", "Preprocessor", "StructDef",
    "FileOp", "MemAlloc", "MemFree", "Output", "Input", "Break", "Continue",
];
const CONTAINERS: &[&str] = &["If", "Switch", "ForLoop", "WhileLoop", "DoWhileLoop", "FunctionDef"];

fn blocks<R: Rng>(rng: &mut R, parent: Option<&str>, budget: &mut usize, next: &mut usize) -> Vec<Value> {
    let mut out = Vec::new();
    let want = rng.gen_range(0..=3);
    for _ in 0..want {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        let id = format!("b{next}");
        *next += 1;
        let marker = match parent {
            Some("If") if rng.gen_bool(0.2) => Some("Else"),
            Some("Switch") if rng.gen_bool(0.4) => Some("Case"),
            _ => None,
        };
        let kind = marker.unwrap_or_else(|| {
            if rng.gen_bool(0.35) {
                pick(rng, CONTAINERS)
            } else {
                pick(rng, LEAVES)
            }
        });
        let children = if CONTAINERS.contains(&kind) {
            blocks(rng, Some(kind), budget, next)
        } else {
            Vec::new()
        };
        out.push(json!({"id": id, "kind": kind, "attrs": attrs(rng, kind), "children": children}));
    }
    out
}

/// A random program of at most `max_blocks` blocks drawn from small pools of
/// names, types and expressions so that rules fire often.
pub fn random_program<R: Rng>(rng: &mut R, max_blocks: usize) -> Program {
    let mut budget = max_blocks;
    let mut next = 0;
    let mut top = Vec::new();
    while budget > 0 && rng.gen_bool(0.85) {
        top.extend(blocks(rng, None, &mut budget, &mut next));
    }
    let doc = json!({ "blocks": top });
    parse_solution(&doc.to_string()).expect("generated programs use valid attributes")
}

pub fn random_tags<R: Rng>(rng: &mut R) -> std::collections::BTreeSet<String> {
    TAGS.iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|t| t.to_string())
        .collect()
}
