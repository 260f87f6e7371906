mod common;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use tutor_core::codec::{parse_exercise, parse_expr, parse_solution, serialize_exercise, serialize_solution};
use tutor_core::constraints::starter_kb;
use tutor_core::itest::parse_questions;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    out.sort();
    out
}

fn solution_fixtures() -> Vec<(PathBuf, String)> {
    let mut all = Vec::new();
    for dir in ["tests/fixtures/golden", "tests/fixtures/programs"] {
        for p in files_with_suffix(&root().join(dir), ".sol.json") {
            let text = std::fs::read_to_string(&p).unwrap();
            all.push((p, text));
        }
    }
    all
}

#[test]
fn every_solution_fixture_round_trips() {
    let fixtures = solution_fixtures();
    assert!(fixtures.len() >= 34);
    for (path, text) in fixtures {
        let p = parse_solution(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let once = serialize_solution(&p);
        assert_eq!(parse_solution(&once).unwrap(), p, "{}", path.display());
        assert_eq!(serialize_solution(&parse_solution(&once).unwrap()), once);
    }
}

#[test]
fn exercises_round_trip() {
    let kb = starter_kb();
    let files = files_with_suffix(&root().join("../../content/exercises"), ".exercise.json");
    assert!(!files.is_empty());
    for f in files {
        let ex = parse_exercise(&std::fs::read_to_string(&f).unwrap(), &kb.tag_vocabulary).unwrap();
        let text = serialize_exercise(&ex);
        assert_eq!(parse_exercise(&text, &kb.tag_vocabulary).unwrap(), ex, "{}", f.display());
    }
}

#[test]
fn generated_programs_round_trip() {
    let mut rng = StdRng::seed_from_u64(0xc0dec);
    for _ in 0..1000 {
        let p = common::random_program(&mut rng, 12);
        let text = serialize_solution(&p);
        assert_eq!(parse_solution(&text).unwrap(), p, "{text}");
    }
}

fn random_bytes(rng: &mut StdRng) -> Vec<u8> {
    let len = rng.gen_range(0..256);
    (0..len).map(|_| rng.gen()).collect()
}

/// Flips, inserts or deletes a few bytes of a valid document.
fn mutate(rng: &mut StdRng, base: &[u8]) -> Vec<u8> {
    const INTERESTING: &[u8] = b"{}[]\":,0-9eE.\\ntfalsenull ()*&%";
    let mut v = base.to_vec();
    for _ in 0..rng.gen_range(1..6) {
        let at = rng.gen_range(0..=v.len());
        match rng.gen_range(0..3) {
            0 if at < v.len() => v[at] = INTERESTING[rng.gen_range(0..INTERESTING.len())],
            1 => v.insert(at, INTERESTING[rng.gen_range(0..INTERESTING.len())]),
            _ if at < v.len() => {
                v.remove(at);
            }
            _ => {}
        }
    }
    v
}

#[test]
fn parsers_survive_random_bytes() {
    let mut rng = StdRng::seed_from_u64(0xf022);
    let kb = starter_kb();
    let seeds: Vec<Vec<u8>> = solution_fixtures().into_iter().map(|(_, t)| t.into_bytes()).collect();
    let mut accepted = 0;
    for i in 0..10_000 {
        let bytes = if i % 2 == 0 {
            random_bytes(&mut rng)
        } else {
            mutate(&mut rng, &seeds[i % seeds.len()])
        };
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(p) = parse_solution(&text) {
            accepted += 1;
            assert_eq!(parse_solution(&serialize_solution(&p)).unwrap(), p);
        }
        let _ = parse_exercise(&text, &kb.tag_vocabulary);
        let _ = parse_questions(&text);
        let _ = parse_expr(&text);
    }
    // Some single-byte mutations leave the document valid.
    assert!(accepted > 0);
}

#[test]
fn deep_nesting_is_rejected_not_overflowed() {
    let deep_json = "[".repeat(100_000);
    assert!(parse_solution(&deep_json).is_err());
    let deep_expr = format!("{}1{}", "(".repeat(100_000), ")".repeat(100_000));
    assert!(parse_expr(&deep_expr).is_err());
    let unary = format!("{}x", "-".repeat(100_000));
    assert!(parse_expr(&unary).is_err());
    let mut nested = String::from(r#"{"id": "m", "kind": "FunctionDef", "attrs": {"name": "main", "return_type": "int", "params": []}, "children": ["#);
    for i in 0..200 {
        nested.push_str(&format!(r#"{{"id": "w{i}", "kind": "WhileLoop", "attrs": {{"cond": "1"}}, "children": ["#));
    }
    nested.push_str(&"]}".repeat(201));
    let _ = parse_solution(&format!(r#"{{"blocks": [{nested}]}}"#));
}
