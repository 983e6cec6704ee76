//! Deterministic JSON reports.
//!
//! Reports carry no timestamps, no absolute paths, and no platform-dependent
//! text; identical input bytes produce identical output bytes. Exact numbers
//! are serialized as `num/den` strings, floats in shortest round-trip form.

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use supertrans_core::{
    Error, EvenPoint, Mat, Rational, Scalar, SuperDomain, SuperFunction, SuperMorphism,
};

pub const TOOL_NAME: &str = "supertrans";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes: 0 success or true verdict, 1 false verdict, 2 invalid input,
/// 3 internal consistency failure (two criteria that must agree did not).
pub const EXIT_TRUE: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub fn exit_for_error(err: &Error) -> i32 {
    match err {
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

/// Stable machine-readable tag for an error variant.
pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Syntax { .. } => "syntax",
        Error::UnknownVariable(_) => "unknown-variable",
        Error::MissingBinding(_) => "missing-binding",
        Error::OddIndexOutOfRange { .. } => "odd-index-out-of-range",
        Error::ContextMismatch(_) => "context-mismatch",
        Error::ParityViolation(_) => "parity-violation",
        Error::ArityMismatch { .. } => "arity-mismatch",
        Error::DomainMismatch(_) => "domain-mismatch",
        Error::PointOutsideBox(_) => "point-outside-box",
        Error::DivisionByZero => "division-by-zero",
        Error::ChartNotInvertible(_) => "chart-not-invertible",
        Error::PointNotOnFiber(_) => "point-not-on-fiber",
        Error::PointInNoChart(_) => "point-in-no-chart",
        Error::NotTransversal(_) => "not-transversal",
        Error::SingularMatrix(_) => "singular-matrix",
        Error::Invalid(_) => "invalid",
        Error::Internal(_) => "internal",
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("sha256:{:x}", hasher.finalize())
}

/// Common frame every report shares; keys appear in insertion order.
pub struct Report {
    root: Map<String, Value>,
    diagnostics: Vec<Value>,
}

impl Report {
    pub fn new(command: &str, scene_digest: Option<&str>) -> Self {
        let mut root = Map::new();
        root.insert("tool".into(), Value::String(TOOL_NAME.into()));
        root.insert("version".into(), Value::String(TOOL_VERSION.into()));
        root.insert("command".into(), Value::String(command.into()));
        root.insert(
            "scene_digest".into(),
            match scene_digest {
                Some(d) => Value::String(d.into()),
                None => Value::Null,
            },
        );
        Report {
            root,
            diagnostics: Vec::new(),
        }
    }

    pub fn args(&mut self, pairs: &[(&str, Option<&str>)], tolerance: f64) {
        let mut args = Map::new();
        for (key, value) in pairs {
            if let Some(v) = value {
                args.insert((*key).into(), Value::String((*v).into()));
            }
        }
        args.insert("tolerance".into(), float_value(tolerance));
        self.root.insert("args".into(), Value::Object(args));
    }

    pub fn diagnostic(&mut self, line: String) {
        self.diagnostics.push(Value::String(line));
    }

    pub fn result(&mut self, payload: Value) {
        self.root.insert("result".into(), payload);
    }

    pub fn error(&mut self, err: &Error) {
        let mut e = Map::new();
        e.insert("kind".into(), Value::String(error_kind(err).into()));
        e.insert("message".into(), Value::String(err.to_string()));
        self.root.insert("error".into(), Value::Object(e));
    }

    /// Serializes with a trailing newline.
    pub fn finish(mut self) -> Vec<u8> {
        self.root
            .insert("diagnostics".into(), Value::Array(self.diagnostics));
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(self.root))
            .expect("report values are always serializable");
        bytes.push(b'\n');
        bytes
    }
}

pub fn rational_value(r: &Rational) -> Value {
    Value::String(r.to_fraction_string())
}

pub fn scalar_value(s: &Scalar) -> Value {
    Value::String(s.report_string())
}

pub fn float_value(x: f64) -> Value {
    // Shortest round-trip text keeps the value exact and the bytes stable.
    Value::String(format!("{x:?}"))
}

/// Even coordinates of a point, in the context order of `domain`.
pub fn point_value(p: &EvenPoint, domain: &SuperDomain) -> Value {
    let coords = domain
        .context()
        .even_names()
        .iter()
        .map(|n| match p.get(n) {
            Some(s) => scalar_value(s),
            None => Value::Null,
        })
        .collect();
    Value::Array(coords)
}

pub fn interval_value(lo: &Rational, hi: &Rational) -> Value {
    Value::Array(vec![rational_value(lo), rational_value(hi)])
}

pub fn scalar_matrix_value(m: &Mat<Scalar>) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|r| {
                Value::Array((0..m.cols()).map(|c| scalar_value(m.at(r, c))).collect())
            })
            .collect(),
    )
}

pub fn expr_matrix_value(m: &Mat<SuperFunction>) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|r| {
                Value::Array(
                    (0..m.cols())
                        .map(|c| Value::String(m.at(r, c).to_string()))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn dim_value(domain: &SuperDomain) -> Value {
    Value::String(domain.dim().to_string())
}

pub fn domain_value(domain: &SuperDomain) -> Value {
    let mut d = Map::new();
    d.insert("label".into(), Value::String(domain.label().into()));
    d.insert("dim".into(), dim_value(domain));
    d.insert(
        "even".into(),
        Value::Array(
            domain
                .context()
                .even_names()
                .iter()
                .map(|n| Value::String(n.clone()))
                .collect(),
        ),
    );
    d.insert(
        "odd".into(),
        Value::Array(
            domain
                .context()
                .odd_names()
                .iter()
                .map(|n| Value::String(n.clone()))
                .collect(),
        ),
    );
    Value::Object(d)
}

/// Images of a morphism keyed by target coordinate, evens first.
pub fn images_value(m: &SuperMorphism) -> Value {
    let ctx = m.target().context();
    let mut images = Map::new();
    for (name, image) in ctx.even_names().iter().zip(m.even_images()) {
        images.insert(name.clone(), Value::String(image.to_string()));
    }
    for (name, image) in ctx.odd_names().iter().zip(m.odd_images()) {
        images.insert(name.clone(), Value::String(image.to_string()));
    }
    Value::Object(images)
}
