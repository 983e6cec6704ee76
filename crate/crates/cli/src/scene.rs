//! Scene files: the text format that names superdomains, morphisms,
//! submanifolds, grids, and point lists for the command line tool.
//!
//! A scene is a sequence of declarations. References must point at earlier
//! declarations, names are unique across the whole file, and `#` starts a
//! line comment. The same grammar is emitted by [`print_scene`] in a fixed
//! layout, so a parsed scene can be round-tripped through its canonical text.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use supertrans_core::{
    make_morphism, AdaptedChart, Error, EvenPoint, GridSpec, Parity, Rational, Result, Scalar,
    Submanifold, SuperContext, SuperDomain, SuperFunction, SuperMorphism,
};

const KEYWORDS: &[&str] = &[
    "superdomain",
    "morphism",
    "submanifold",
    "grid",
    "points",
    "dim",
    "coords",
    "box",
    "in",
    "chart",
    "map",
    "inverse",
    "keep_even",
    "keep_odd",
    "on",
    "range",
    "step",
];

/// One top-level declaration, in source order.
#[derive(Debug)]
pub enum Decl {
    Domain(SuperDomain),
    Morphism(SuperMorphism),
    Submanifold(Submanifold),
    Grid {
        name: String,
        on: String,
        spec: GridSpec,
    },
    Points {
        name: String,
        tuples: Vec<Vec<Rational>>,
    },
}

impl Decl {
    fn name(&self) -> &str {
        match self {
            Decl::Domain(d) => d.label(),
            Decl::Morphism(m) => m.name(),
            Decl::Submanifold(w) => w.name(),
            Decl::Grid { name, .. } => name,
            Decl::Points { name, .. } => name,
        }
    }
}

/// A fully validated scene.
#[derive(Debug)]
pub struct Scene {
    decls: Vec<Decl>,
}

impl Scene {
    pub fn decls(&self) -> &[Decl] {
        &self.decls
    }

    pub fn domain(&self, name: &str) -> Result<&SuperDomain> {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::Domain(dom) if dom.label() == name => Some(dom),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("no superdomain named `{name}` in the scene")))
    }

    pub fn morphism(&self, name: &str) -> Result<&SuperMorphism> {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::Morphism(m) if m.name() == name => Some(m),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("no morphism named `{name}` in the scene")))
    }

    pub fn submanifold(&self, name: &str) -> Result<&Submanifold> {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::Submanifold(w) if w.name() == name => Some(w),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("no submanifold named `{name}` in the scene")))
    }

    pub fn grid_spec(&self, name: &str) -> Result<&GridSpec> {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::Grid { name: n, spec, .. } if n == name => Some(spec),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("no grid named `{name}` in the scene")))
    }

    pub fn point_tuples(&self, name: &str) -> Result<&[Vec<Rational>]> {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::Points { name: n, tuples } if n == name => Some(tuples.as_slice()),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("no point list named `{name}` in the scene")))
    }

    /// Turns a point list into even points of `domain`, binding tuple entries
    /// to the domain's even coordinates in order.
    pub fn bind_points(&self, name: &str, domain: &SuperDomain) -> Result<Vec<EvenPoint>> {
        let tuples = self.point_tuples(name)?;
        let names = domain.context().even_names();
        let mut out = Vec::with_capacity(tuples.len());
        for (i, tuple) in tuples.iter().enumerate() {
            if tuple.len() != names.len() {
                return Err(Error::Invalid(format!(
                    "point {} of `{name}` has {} coordinates, domain `{}` has {} even",
                    i + 1,
                    tuple.len(),
                    domain.label(),
                    names.len()
                )));
            }
            out.push(EvenPoint::from_pairs(
                names
                    .iter()
                    .zip(tuple)
                    .map(|(n, v)| (n.clone(), Scalar::Exact(v.clone()))),
            ));
        }
        Ok(out)
    }

    fn push(&mut self, decl: Decl) -> Result<()> {
        let name = decl.name();
        if self.decls.iter().any(|d| d.name() == name) {
            return Err(Error::Invalid(format!(
                "duplicate declaration name `{name}`"
            )));
        }
        self.decls.push(decl);
        Ok(())
    }
}

/// Replaces `#` line comments with spaces so byte offsets stay meaningful.
fn blank_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_comment = false;
    for ch in text.chars() {
        if ch == '\n' {
            in_comment = false;
            out.push('\n');
        } else if in_comment || ch == '#' {
            in_comment = true;
            out.push(' ');
        } else {
            out.push(ch);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Punct(char),
    Arrow,
}

struct Sp {
    tok: Tok,
    start: usize,
}

fn lex(text: &str) -> Result<Vec<Sp>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push(Sp {
                tok: Tok::Ident(text[start..i].to_string()),
                start,
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            toks.push(Sp {
                tok: Tok::Int(text[start..i].to_string()),
                start,
            });
        } else if c == '-' && i + 1 < bytes.len() && bytes[i + 1] == b'>' {
            toks.push(Sp {
                tok: Tok::Arrow,
                start: i,
            });
            i += 2;
        } else if "|:;=,()[]{}-/+*^".contains(c) {
            toks.push(Sp {
                tok: Tok::Punct(c),
                start: i,
            });
            i += 1;
        } else {
            return Err(Error::Syntax {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Sp>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|s| s.start)
            .unwrap_or(self.text.len())
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for (i, ch) in self.text.char_indices() {
            if i >= offset {
                break;
            }
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn fail(&self, offset: usize, message: &str) -> Error {
        let (line, col) = self.line_col(offset);
        Error::Syntax {
            position: offset,
            message: format!("line {line}, column {col}: {message}"),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.toks.get(self.pos).map(|s| s.tok.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        let here = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) if s == kw => Ok(()),
            _ => Err(self.fail(here, &format!("expected `{kw}`"))),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<()> {
        let here = self.here();
        match self.bump() {
            Some(Tok::Punct(p)) if p == c => Ok(()),
            _ => Err(self.fail(here, &format!("expected `{c}`"))),
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(p)) if *p == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// A fresh name: an identifier that is not a reserved word.
    fn expect_name(&mut self, what: &str) -> Result<String> {
        let here = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => Ok(s),
            Some(Tok::Ident(s)) => Err(self.fail(here, &format!("`{s}` is a reserved word"))),
            _ => Err(self.fail(here, &format!("expected {what}"))),
        }
    }

    fn expect_nat(&mut self) -> Result<usize> {
        let here = self.here();
        match self.bump() {
            Some(Tok::Int(s)) => s
                .parse()
                .map_err(|_| self.fail(here, "number out of range")),
            _ => Err(self.fail(here, "expected a number")),
        }
    }

    fn expect_rational(&mut self) -> Result<Rational> {
        let here = self.here();
        let negative = self.eat_punct('-');
        let num: i64 = match self.bump() {
            Some(Tok::Int(s)) => s
                .parse()
                .map_err(|_| self.fail(here, "number out of range"))?,
            _ => return Err(self.fail(here, "expected a number")),
        };
        let den: i64 = if self.eat_punct('/') {
            let dh = self.here();
            match self.bump() {
                Some(Tok::Int(s)) => s
                    .parse()
                    .map_err(|_| self.fail(dh, "number out of range"))?,
                _ => return Err(self.fail(dh, "expected a denominator")),
            }
        } else {
            1
        };
        let r = Rational::new(num, den).map_err(|e| self.fail(here, &e.to_string()))?;
        Ok(if negative { -r } else { r })
    }

    fn expect_interval(&mut self) -> Result<(Rational, Rational)> {
        self.expect_punct('[')?;
        let lo = self.expect_rational()?;
        self.expect_punct(',')?;
        let hi = self.expect_rational()?;
        self.expect_punct(']')?;
        Ok((lo, hi))
    }

    /// Collects identifiers until a reserved word or punctuation shows up.
    fn name_run(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        while let Some(Tok::Ident(s)) = self.peek() {
            if KEYWORDS.contains(&s.as_str()) {
                break;
            }
            names.push(s.clone());
            self.pos += 1;
        }
        names
    }

    /// The source span of one expression: everything up to the next `}`,
    /// `;`, or `name =` assignment head.
    fn expr_span(&mut self) -> Result<(usize, usize)> {
        let start = self.here();
        let mut j = self.pos;
        while j < self.toks.len() {
            match &self.toks[j].tok {
                Tok::Punct('}') | Tok::Punct(';') => break,
                Tok::Ident(_)
                    if matches!(
                        self.toks.get(j + 1).map(|s| &s.tok),
                        Some(Tok::Punct('='))
                    ) =>
                {
                    break
                }
                _ => j += 1,
            }
        }
        if j == self.pos {
            return Err(self.fail(start, "expected an expression"));
        }
        let end = self
            .toks
            .get(j)
            .map(|s| s.start)
            .unwrap_or(self.text.len());
        self.pos = j;
        Ok((start, end))
    }

    fn parse_image(&mut self, ctx: &Arc<SuperContext>) -> Result<SuperFunction> {
        let (start, end) = self.expr_span()?;
        supertrans_core::parse_superfunction(self.text[start..end].trim_end(), ctx).map_err(|e| {
            match e {
                Error::Syntax { position, message } => {
                    let at = start + position;
                    let (line, col) = self.line_col(at);
                    Error::Syntax {
                        position: at,
                        message: format!("line {line}, column {col}: {message}"),
                    }
                }
                other => {
                    let (line, col) = self.line_col(start);
                    in_decl(other, &format!("expression at line {line}, column {col}"))
                }
            }
        })
    }

    /// `name = expr` pairs until the closing brace, duplicates rejected.
    fn assign_block(&mut self, ctx: &Arc<SuperContext>) -> Result<Vec<(String, SuperFunction)>> {
        self.expect_punct('{')?;
        let mut out: Vec<(String, SuperFunction)> = Vec::new();
        loop {
            if self.eat_punct('}') {
                return Ok(out);
            }
            let here = self.here();
            let lhs = self.expect_name("a coordinate name")?;
            if out.iter().any(|(n, _)| *n == lhs) {
                return Err(self.fail(here, &format!("`{lhs}` is assigned twice")));
            }
            self.expect_punct('=')?;
            let image = self.parse_image(ctx)?;
            out.push((lhs, image));
            while self.eat_punct(';') {}
        }
    }

    fn superdomain(&mut self) -> Result<SuperDomain> {
        let name = self.expect_name("a superdomain name")?;
        self.expect_keyword("dim")?;
        let even = self.expect_nat()?;
        self.expect_punct('|')?;
        let odd = self.expect_nat()?;
        self.expect_keyword("coords")?;
        let here = self.here();
        let even_names = self.name_run();
        self.expect_punct(';')?;
        let odd_names = self.name_run();
        if even_names.len() != even || odd_names.len() != odd {
            return Err(self.fail(
                here,
                &format!(
                    "superdomain `{name}` declares dim {even}|{odd} but lists {}|{} coordinates",
                    even_names.len(),
                    odd_names.len()
                ),
            ));
        }
        let bounds = if self.at_keyword("box") {
            self.pos += 1;
            let mut intervals = Vec::with_capacity(even);
            for _ in 0..even {
                intervals.push(self.expect_interval()?);
            }
            Some(intervals)
        } else {
            None
        };
        let ctx = SuperContext::new(even_names, odd_names)
            .map_err(|e| in_decl(e, &format!("superdomain `{name}`")))?;
        SuperDomain::new(&name, ctx, bounds).map_err(|e| in_decl(e, &format!("superdomain `{name}`")))
    }

    fn morphism(&mut self, scene: &Scene) -> Result<SuperMorphism> {
        let name = self.expect_name("a morphism name")?;
        self.expect_punct(':')?;
        let src_here = self.here();
        let src_name = self.expect_name("a source superdomain")?;
        let here = self.here();
        match self.bump() {
            Some(Tok::Arrow) => {}
            _ => return Err(self.fail(here, "expected `->`")),
        }
        let dst_here = self.here();
        let dst_name = self.expect_name("a target superdomain")?;
        let src = scene
            .domain(&src_name)
            .map_err(|_| self.fail(src_here, &format!("unknown superdomain `{src_name}`")))?
            .clone();
        let dst = scene
            .domain(&dst_name)
            .map_err(|_| self.fail(dst_here, &format!("unknown superdomain `{dst_name}`")))?
            .clone();
        let assigns = self.assign_block(src.context())?;
        let (even_images, odd_images) =
            collect_images(&assigns, dst.context(), &format!("morphism `{name}`"))?;
        make_morphism(&name, src, dst, even_images, odd_images)
            .map_err(|e| in_decl(e, &format!("morphism `{name}`")))
    }

    fn chart(&mut self, sub_name: &str, index: usize, ambient: &SuperDomain) -> Result<AdaptedChart> {
        let name = if matches!(self.peek(), Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()))
        {
            self.expect_name("a chart name")?
        } else {
            format!("c{index}")
        };
        let what = format!("submanifold `{sub_name}`, chart `{name}`");
        self.expect_punct('{')?;
        self.expect_keyword("map")?;
        let map_assigns = self.assign_block(ambient.context())?;

        // Chart coordinates are declared by the map block; parity comes from
        // the defining expression. A zero image cannot carry parity and will
        // fail the invertibility certificate anyway, so it defaults to even.
        let mut chart_evens = Vec::new();
        let mut chart_odds = Vec::new();
        for (lhs, image) in &map_assigns {
            match image.parity() {
                Parity::Odd => chart_odds.push(lhs.clone()),
                Parity::Even => chart_evens.push(lhs.clone()),
                Parity::Mixed => {
                    return Err(Error::ParityViolation(format!(
                        "{what}: chart coordinate `{lhs}` is defined by a mixed-parity expression"
                    )))
                }
            }
        }
        let chart_ctx = SuperContext::new(chart_evens, chart_odds)
            .map_err(|e| in_decl(e, &what))?;
        let codomain = SuperDomain::new(&name, chart_ctx, None).map_err(|e| in_decl(e, &what))?;

        self.expect_keyword("inverse")?;
        let inv_assigns = self.assign_block(codomain.context())?;
        self.expect_keyword("keep_even")?;
        self.expect_punct('=')?;
        let kept_even = self.expect_nat()?;
        self.expect_punct(';')?;
        self.expect_keyword("keep_odd")?;
        self.expect_punct('=')?;
        let kept_odd = self.expect_nat()?;
        let bounds = if self.at_keyword("box") {
            self.pos += 1;
            let mut intervals = Vec::with_capacity(ambient.dim().even);
            for _ in 0..ambient.dim().even {
                intervals.push(self.expect_interval()?);
            }
            Some(intervals)
        } else {
            None
        };
        self.expect_punct('}')?;

        let neighborhood = SuperDomain::new(ambient.label(), ambient.context().clone(), bounds)
            .map_err(|e| in_decl(e, &what))?;
        let (map_even, map_odd) = collect_images(&map_assigns, codomain.context(), &what)?;
        let map = make_morphism(&name, neighborhood.clone(), codomain.clone(), map_even, map_odd)
            .map_err(|e| in_decl(e, &what))?;
        let (inv_even, inv_odd) = collect_images(&inv_assigns, ambient.context(), &what)?;
        let inverse = make_morphism(
            &format!("{name}_inv"),
            codomain,
            neighborhood.clone(),
            inv_even,
            inv_odd,
        )
        .map_err(|e| in_decl(e, &what))?;
        AdaptedChart::new(&name, neighborhood, map, inverse, kept_even, kept_odd, 1e-9)
            .map_err(|e| in_decl(e, &what))
    }

    fn submanifold(&mut self, scene: &Scene) -> Result<Submanifold> {
        let name = self.expect_name("a submanifold name")?;
        self.expect_keyword("in")?;
        let amb_here = self.here();
        let amb_name = self.expect_name("an ambient superdomain")?;
        let ambient = scene
            .domain(&amb_name)
            .map_err(|_| self.fail(amb_here, &format!("unknown superdomain `{amb_name}`")))?
            .clone();
        self.expect_punct('{')?;
        let mut charts = Vec::new();
        while self.at_keyword("chart") {
            self.pos += 1;
            charts.push(self.chart(&name, charts.len(), &ambient)?);
        }
        self.expect_punct('}')?;
        Submanifold::new(&name, ambient, charts).map_err(|e| in_decl(e, &format!("submanifold `{name}`")))
    }

    fn grid(&mut self, scene: &Scene) -> Result<Decl> {
        let name = self.expect_name("a grid name")?;
        self.expect_keyword("on")?;
        let dom_here = self.here();
        let dom_name = self.expect_name("a superdomain")?;
        let domain = scene
            .domain(&dom_name)
            .map_err(|_| self.fail(dom_here, &format!("unknown superdomain `{dom_name}`")))?;
        let even_names = domain.context().even_names().to_vec();
        let mut clauses = Vec::new();
        while self.at_keyword("range") {
            self.pos += 1;
            let (lo, hi) = self.expect_interval()?;
            self.expect_keyword("step")?;
            let step = self.expect_rational()?;
            clauses.push((lo, hi, step));
        }
        let axes: Vec<(String, Rational, Rational, Rational)> = match clauses.len() {
            n if n == even_names.len() => even_names
                .iter()
                .zip(clauses)
                .map(|(name, (lo, hi, step))| (name.clone(), lo, hi, step))
                .collect(),
            // One clause broadcasts over every even coordinate.
            1 => even_names
                .iter()
                .map(|name| {
                    let (lo, hi, step) = clauses[0].clone();
                    (name.clone(), lo, hi, step)
                })
                .collect(),
            n => {
                return Err(self.fail(
                    dom_here,
                    &format!(
                        "grid `{name}` has {n} range clauses for {} even coordinates",
                        even_names.len()
                    ),
                ))
            }
        };
        let spec = GridSpec::new(axes).map_err(|e| in_decl(e, &format!("grid `{name}`")))?;
        Ok(Decl::Grid {
            name,
            on: dom_name,
            spec,
        })
    }

    fn points(&mut self) -> Result<Decl> {
        let name = self.expect_name("a point list name")?;
        self.expect_punct('=')?;
        self.expect_punct('[')?;
        let mut tuples = Vec::new();
        if !self.eat_punct(']') {
            loop {
                self.expect_punct('(')?;
                let mut tuple = Vec::new();
                if !self.eat_punct(')') {
                    loop {
                        tuple.push(self.expect_rational()?);
                        if self.eat_punct(')') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                tuples.push(tuple);
                if self.eat_punct(']') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        Ok(Decl::Points { name, tuples })
    }
}

/// Reorders an assignment list into context coordinate order, requiring
/// exactly one image per coordinate and nothing else.
fn collect_images(
    assigns: &[(String, SuperFunction)],
    ctx: &Arc<SuperContext>,
    what: &str,
) -> Result<(Vec<SuperFunction>, Vec<SuperFunction>)> {
    let known: BTreeSet<&str> = ctx
        .even_names()
        .iter()
        .chain(ctx.odd_names())
        .map(String::as_str)
        .collect();
    for (lhs, _) in assigns {
        if !known.contains(lhs.as_str()) {
            return Err(Error::Invalid(format!(
                "{what}: `{lhs}` is not a coordinate of the target"
            )));
        }
    }
    let find = |name: &String| -> Result<SuperFunction> {
        assigns
            .iter()
            .find_map(|(lhs, img)| (lhs == name).then(|| img.clone()))
            .ok_or_else(|| Error::Invalid(format!("{what}: no image for coordinate `{name}`")))
    };
    let even = ctx.even_names().iter().map(find).collect::<Result<_>>()?;
    let odd = ctx.odd_names().iter().map(find).collect::<Result<_>>()?;
    Ok((even, odd))
}

/// Prefixes a declaration tag onto the message of a semantic error.
fn in_decl(err: Error, what: &str) -> Error {
    match err {
        Error::UnknownVariable(s) => Error::UnknownVariable(format!("{what}: {s}")),
        Error::ContextMismatch(s) => Error::ContextMismatch(format!("{what}: {s}")),
        Error::ParityViolation(s) => Error::ParityViolation(format!("{what}: {s}")),
        Error::DomainMismatch(s) => Error::DomainMismatch(format!("{what}: {s}")),
        Error::ChartNotInvertible(s) => Error::ChartNotInvertible(format!("{what}: {s}")),
        Error::Invalid(s) => Error::Invalid(format!("{what}: {s}")),
        Error::ArityMismatch { what: w, expected, got } => Error::Invalid(format!(
            "{what}: arity mismatch: expected {expected} {w}, got {got}"
        )),
        other => other,
    }
}

/// Parses and validates a scene file.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let clean = blank_comments(text);
    let toks = lex(&clean)?;
    let mut p = Parser {
        text: &clean,
        toks,
        pos: 0,
    };
    let mut scene = Scene { decls: Vec::new() };
    while !p.done() {
        let here = p.here();
        let kw = match p.bump() {
            Some(Tok::Ident(s)) => s,
            _ => return Err(p.fail(here, "expected a declaration")),
        };
        let decl = match kw.as_str() {
            "superdomain" => Decl::Domain(p.superdomain()?),
            "morphism" => Decl::Morphism(p.morphism(&scene)?),
            "submanifold" => Decl::Submanifold(p.submanifold(&scene)?),
            "grid" => p.grid(&scene)?,
            "points" => p.points()?,
            other => {
                return Err(p.fail(
                    here,
                    &format!("unknown declaration `{other}` (expected superdomain, morphism, submanifold, grid, or points)"),
                ))
            }
        };
        scene.push(decl)?;
    }
    Ok(scene)
}

fn write_box(out: &mut String, bounds: &[(Rational, Rational)]) {
    out.push_str(" box");
    for (lo, hi) in bounds {
        let _ = write!(out, " [{lo}, {hi}]");
    }
}

fn write_assigns(out: &mut String, indent: &str, names: &[String], images: &[SuperFunction]) {
    for (name, image) in names.iter().zip(images) {
        let _ = writeln!(out, "{indent}{name} = {image}");
    }
}

fn write_morphism_body(out: &mut String, indent: &str, m: &SuperMorphism) {
    let ctx = m.target().context();
    write_assigns(out, indent, ctx.even_names(), m.even_images());
    write_assigns(out, indent, ctx.odd_names(), m.odd_images());
}

/// Canonical text of a scene: same declarations, fixed layout, expressions
/// in normal form. Parsing the output yields an equal scene.
pub fn print_scene(scene: &Scene) -> String {
    let mut out = String::new();
    for (i, decl) in scene.decls().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match decl {
            Decl::Domain(d) => {
                let ctx = d.context();
                let dim = d.dim();
                let _ = write!(
                    out,
                    "superdomain {} dim {}|{} coords {} ; {}",
                    d.label(),
                    dim.even,
                    dim.odd,
                    ctx.even_names().join(" "),
                    ctx.odd_names().join(" ")
                );
                // Trailing space harms round-tripping nothing, but keep the
                // text tidy when a sector is empty.
                while out.ends_with(' ') {
                    out.pop();
                }
                if let Some(bounds) = d.bounds() {
                    write_box(&mut out, bounds);
                }
                out.push('\n');
            }
            Decl::Morphism(m) => {
                let _ = writeln!(
                    out,
                    "morphism {} : {} -> {} {{",
                    m.name(),
                    m.source().label(),
                    m.target().label()
                );
                write_morphism_body(&mut out, "  ", m);
                out.push_str("}\n");
            }
            Decl::Submanifold(w) => {
                let _ = writeln!(out, "submanifold {} in {} {{", w.name(), w.ambient().label());
                for chart in w.charts() {
                    let _ = writeln!(out, "  chart {} {{", chart.name());
                    out.push_str("    map {\n");
                    write_morphism_body(&mut out, "      ", chart.map());
                    out.push_str("    }\n    inverse {\n");
                    write_morphism_body(&mut out, "      ", chart.inverse());
                    out.push_str("    }\n");
                    let _ = writeln!(
                        out,
                        "    keep_even = {} ; keep_odd = {}",
                        chart.kept_even(),
                        chart.kept_odd()
                    );
                    if let Some(bounds) = chart.domain().bounds() {
                        out.push_str("   ");
                        write_box(&mut out, bounds);
                        out.push('\n');
                    }
                    out.push_str("  }\n");
                }
                out.push_str("}\n");
            }
            Decl::Grid { name, on, spec } => {
                let _ = write!(out, "grid {name} on {on}");
                for (_, lo, hi, step) in spec.axes() {
                    let _ = write!(out, " range [{lo}, {hi}] step {step}");
                }
                out.push('\n');
            }
            Decl::Points { name, tuples } => {
                let _ = write!(out, "points {name} = [");
                for (i, tuple) in tuples.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push('(');
                    for (j, v) in tuple.iter().enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        let _ = write!(out, "{v}");
                    }
                    out.push(')');
                }
                out.push_str("]\n");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
superdomain X dim 1|1 coords x1 ; e1 box [-2, 2]
superdomain Y dim 1|1 coords y1 ; t1

morphism psi : X -> Y {
  y1 = x1^2
  t1 = e1
}

grid G on X range [-1, 1] step 1/2
points P = [(0), (1/2)]
";

    #[test]
    fn parses_and_resolves_names() {
        let scene = parse_scene(BASIC).unwrap();
        assert_eq!(scene.domain("X").unwrap().dim().even, 1);
        let psi = scene.morphism("psi").unwrap();
        assert_eq!(psi.source().label(), "X");
        assert_eq!(scene.grid_spec("G").unwrap().axes().len(), 1);
        assert_eq!(scene.point_tuples("P").unwrap().len(), 2);
    }

    #[test]
    fn print_then_parse_is_stable() {
        let scene = parse_scene(BASIC).unwrap();
        let once = print_scene(&scene);
        let twice = print_scene(&parse_scene(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn comments_do_not_shift_error_positions() {
        let text = "# leading comment\nsuperdomain X dim 1|0 coords x1 x2 ;";
        let err = parse_scene(text).unwrap_err();
        match err {
            Error::Syntax { message, .. } => assert!(message.contains("line 2")),
            other => panic!("expected a syntax error, got {other}"),
        }
    }

    #[test]
    fn parity_mismatch_names_the_declaration() {
        let text = "\
superdomain X dim 1|1 coords x1 ; e1
superdomain Y dim 1|1 coords y1 ; t1
morphism bad : X -> Y {
  y1 = x1
  t1 = x1
}
";
        let err = parse_scene(text).unwrap_err();
        match err {
            Error::ParityViolation(msg) => assert!(msg.contains("morphism `bad`")),
            other => panic!("expected a parity violation, got {other}"),
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = "\
superdomain X dim 1|0 coords x1 ;
points X = [(0)]
";
        let err = parse_scene(text).unwrap_err();
        assert!(matches!(err, Error::Invalid(msg) if msg.contains("duplicate")));
    }

    #[test]
    fn unresolved_references_are_rejected() {
        let text = "morphism psi : A -> B { }";
        let err = parse_scene(text).unwrap_err();
        match err {
            Error::Syntax { message, .. } => assert!(message.contains("unknown superdomain `A`")),
            other => panic!("expected unknown-domain error, got {other}"),
        }
    }
}
