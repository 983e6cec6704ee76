//! Shared fixtures for the binary-level suites: corpus paths, frozen report
//! files, and the command matrix they were generated from.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

pub fn corpus(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/corpus");
    p.push(name);
    p.to_str().unwrap().to_string()
}

pub fn golden(name: &str) -> Vec<u8> {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/golden");
    p.push(name);
    std::fs::read(&p).unwrap_or_else(|e| panic!("missing golden {}: {e}", p.display()))
}

pub fn run(args: &[&str]) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_supertrans"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code().expect("exit code"))
}

pub type MatrixRow = (&'static str, i32, &'static str, &'static str, &'static [&'static str]);

/// (golden file, expected exit, subcommand, scene file, trailing flags)
pub const MATRIX: &[MatrixRow] = &[
    ("check_identity.json", 0, "check-morphism", "identity_point.scene", &["--morphism", "psi"]),
    ("jacobian_square.json", 0, "jacobian", "square_cusp.scene", &["--morphism", "psi"]),
    ("classify_square.json", 0, "classify", "square_cusp.scene", &["--morphism", "psi", "--points", "P"]),
    (
        "transversal_square.json",
        1,
        "transversal",
        "square_cusp.scene",
        &["--morphism", "psi", "--submanifold", "W", "--grid", "G"],
    ),
    (
        "transversal_identity.json",
        0,
        "transversal",
        "identity_point.scene",
        &["--morphism", "psi", "--submanifold", "W", "--points", "P"],
    ),
    (
        "preimage_graph.json",
        0,
        "preimage",
        "graph_solve.scene",
        &["--morphism", "psi", "--submanifold", "W", "--grid", "G"],
    ),
    (
        "preimage_arcs.json",
        0,
        "preimage",
        "parabola_arcs.scene",
        &["--morphism", "psi", "--submanifold", "W", "--grid", "G"],
    ),
    ("error_syntax.json", 2, "check-morphism", "bad_syntax.scene", &["--morphism", "psi"]),
    ("error_parity.json", 2, "check-morphism", "bad_parity.scene", &["--morphism", "bad"]),
    (
        "error_inverse.json",
        2,
        "preimage",
        "bad_inverse.scene",
        &["--morphism", "psi", "--submanifold", "W"],
    ),
    ("error_missing_flag.json", 2, "classify", "square_cusp.scene", &["--morphism", "psi"]),
];

pub fn matrix_args(row: &MatrixRow) -> Vec<String> {
    let mut args = vec![row.2.to_string(), "--scene".to_string(), corpus(row.3)];
    args.extend(row.4.iter().map(|s| s.to_string()));
    args
}

/// Corpus scenes that parse cleanly; the error scenes are excluded by design.
pub const PARSEABLE_SCENES: &[&str] = &[
    "identity_point.scene",
    "square_cusp.scene",
    "graph_solve.scene",
    "parabola_arcs.scene",
];
