//! Symbolic smooth functions of even variables.
//!
//! An expression is kept in a canonical normal form at all times: a finite
//! sum of terms `coefficient * generator^k * ...` where a generator is an
//! even variable or an opaque `sin`/`cos`/`exp` atom whose argument is again
//! a normalized expression. Polynomials are fully expanded and terms are
//! sorted by a graded-lexicographic order, so structural equality decides
//! equality of polynomials. Transcendental atoms are never expanded; two
//! expressions that differ only by a trig identity compare unequal, and the
//! randomized evaluation screen in [`SmoothExpr::zeroness`] is the stated
//! soundness backstop for that gap.

mod parse;

pub use parse::parse_expr;
pub(crate) use parse::{parse_ast, Ast};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::EvenPoint;
use crate::rational::Rational;
use crate::scalar::Scalar;

/// A multiplicative generator: an even variable or an opaque transcendental atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    Var(String),
    Sin(Box<SmoothExpr>),
    Cos(Box<SmoothExpr>),
    Exp(Box<SmoothExpr>),
}

impl Generator {
    fn kind_rank(&self) -> u8 {
        match self {
            Generator::Var(_) => 0,
            Generator::Sin(_) => 1,
            Generator::Cos(_) => 2,
            Generator::Exp(_) => 3,
        }
    }

    fn arg(&self) -> Option<&SmoothExpr> {
        match self {
            Generator::Var(_) => None,
            Generator::Sin(a) | Generator::Cos(a) | Generator::Exp(a) => Some(a),
        }
    }
}

/// Orders `x2` before `x10`: compare the alphabetic stem, then the numeric
/// suffix as an integer, then the raw string as a tiebreak.
fn natural_name_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let digits = s.len() - s.bytes().rev().take_while(u8::is_ascii_digit).count();
        match s[digits..].parse::<u64>() {
            Ok(n) => (&s[..digits], Some(n)),
            Err(_) => (s, None),
        }
    }
    let (sa, na) = split(a);
    let (sb, nb) = split(b);
    sa.cmp(sb).then(na.cmp(&nb)).then(a.cmp(b))
}

impl Ord for Generator {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Generator::Var(a), Generator::Var(b)) => natural_name_cmp(a, b),
            _ => self
                .kind_rank()
                .cmp(&other.kind_rank())
                .then_with(|| self.arg().cmp(&other.arg())),
        }
    }
}

impl PartialOrd for Generator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Power product of generators; factors sorted, every power >= 1.
/// The empty product is the unit monomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    factors: Vec<(Generator, u32)>,
}

impl Monomial {
    pub fn unit() -> Self {
        Monomial { factors: Vec::new() }
    }

    pub fn var(name: &str) -> Self {
        Monomial {
            factors: vec![(Generator::Var(name.to_string()), 1)],
        }
    }

    fn generator(g: Generator, pow: u32) -> Self {
        if pow == 0 {
            Monomial::unit()
        } else {
            Monomial {
                factors: vec![(g, pow)],
            }
        }
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(Generator, u32)] {
        &self.factors
    }

    pub fn total_degree(&self) -> u32 {
        self.factors.iter().map(|(_, p)| p).sum()
    }

    /// True when the monomial is exactly the first power of the named variable.
    pub fn is_single_var(&self, name: &str) -> bool {
        matches!(self.factors.as_slice(), [(Generator::Var(v), 1)] if v == name)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Generator, u32)> = Vec::with_capacity(self.factors.len() + other.factors.len());
        let mut ia = self.factors.iter().peekable();
        let mut ib = other.factors.iter().peekable();
        loop {
            match (ia.peek(), ib.peek()) {
                (Some((ga, pa)), Some((gb, pb))) => match ga.cmp(gb) {
                    Ordering::Less => {
                        out.push((ga.clone(), *pa));
                        ia.next();
                    }
                    Ordering::Greater => {
                        out.push((gb.clone(), *pb));
                        ib.next();
                    }
                    Ordering::Equal => {
                        out.push((ga.clone(), pa + pb));
                        ia.next();
                        ib.next();
                    }
                },
                (Some(_), None) => {
                    out.extend(ia.by_ref().cloned());
                    break;
                }
                (None, Some(_)) => {
                    out.extend(ib.by_ref().cloned());
                    break;
                }
                (None, None) => break,
            }
        }
        Monomial { factors: out }
    }
}

/// Graded-lexicographic order: lower total degree first; within a degree,
/// the monomial whose exponent vector is lexicographically smaller (earlier
/// generators more significant, higher powers larger) comes first.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let mut ia = self.factors.iter();
                let mut ib = other.factors.iter();
                loop {
                    match (ia.next(), ib.next()) {
                        (Some((ga, pa)), Some((gb, pb))) => match ga.cmp(gb) {
                            // `self` has a positive power on an earlier generator.
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => match pa.cmp(pb) {
                                Ordering::Equal => continue,
                                ord => return ord,
                            },
                        },
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (None, None) => return Ordering::Equal,
                    }
                }
            })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Outcome of the zero test for expressions with transcendental atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Zeroness {
    /// The normal form is literally zero.
    StructuralZero,
    /// A sample evaluation was nonzero beyond tolerance; the expression is not zero.
    NonZero { witness: EvenPoint, value: f64 },
    /// Not structurally zero, but vanished at every sampled rational point.
    PassedScreen,
}

/// Smooth function of even variables in canonical normal form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct SmoothExpr {
    terms: BTreeMap<Monomial, Rational>,
}

impl SmoothExpr {
    pub fn zero() -> Self {
        SmoothExpr::default()
    }

    pub fn one() -> Self {
        SmoothExpr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        SmoothExpr { terms }
    }

    pub fn var(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(name), Rational::one());
        SmoothExpr { terms }
    }

    pub fn from_int(n: i64) -> Self {
        SmoothExpr::constant(Rational::from_int(n))
    }

    /// sin of a normalized argument; sin(0) folds to 0.
    pub fn sin_of(arg: &SmoothExpr) -> Self {
        if arg.is_zero() {
            return SmoothExpr::zero();
        }
        SmoothExpr::from_monomial(Monomial::generator(Generator::Sin(Box::new(arg.clone())), 1))
    }

    /// cos of a normalized argument; cos(0) folds to 1.
    pub fn cos_of(arg: &SmoothExpr) -> Self {
        if arg.is_zero() {
            return SmoothExpr::one();
        }
        SmoothExpr::from_monomial(Monomial::generator(Generator::Cos(Box::new(arg.clone())), 1))
    }

    /// exp of a normalized argument; exp(0) folds to 1.
    pub fn exp_of(arg: &SmoothExpr) -> Self {
        if arg.is_zero() {
            return SmoothExpr::one();
        }
        SmoothExpr::from_monomial(Monomial::generator(Generator::Exp(Box::new(arg.clone())), 1))
    }

    fn from_monomial(m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, Rational::one());
        SmoothExpr { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map_or(false, |c| c.is_one())
    }

    /// Some(c) when the expression is the constant c (including zero).
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_unit().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    fn insert_term(terms: &mut BTreeMap<Monomial, Rational>, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &SmoothExpr) -> SmoothExpr {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_term(&mut terms, m.clone(), c.clone());
        }
        SmoothExpr { terms }
    }

    pub fn neg(&self) -> SmoothExpr {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect();
        SmoothExpr { terms }
    }

    pub fn sub(&self, other: &SmoothExpr) -> SmoothExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &SmoothExpr) -> SmoothExpr {
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                Self::insert_term(&mut terms, ma.mul(mb), ca * cb);
            }
        }
        SmoothExpr { terms }
    }

    pub fn scale(&self, c: &Rational) -> SmoothExpr {
        if c.is_zero() {
            return SmoothExpr::zero();
        }
        let terms = self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect();
        SmoothExpr { terms }
    }

    pub fn pow(&self, exp: u32) -> SmoothExpr {
        let mut acc = SmoothExpr::one();
        for _ in 0..exp {
            acc = acc.mul(self);
        }
        acc
    }

    /// All variable names occurring anywhere, including inside atom arguments.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for m in self.terms.keys() {
            for (g, _) in &m.factors {
                match g {
                    Generator::Var(v) => {
                        out.insert(v.clone());
                    }
                    _ => g.arg().unwrap().collect_vars(out),
                }
            }
        }
    }

    pub fn occurs_var(&self, name: &str) -> bool {
        self.terms.keys().any(|m| {
            m.factors.iter().any(|(g, _)| match g {
                Generator::Var(v) => v == name,
                _ => g.arg().unwrap().occurs_var(name),
            })
        })
    }

    /// True when any sin/cos/exp atom occurs; evaluation is then approximate.
    pub fn has_transcendental(&self) -> bool {
        self.terms
            .keys()
            .any(|m| m.factors.iter().any(|(g, _)| !matches!(g, Generator::Var(_))))
    }

    /// Symbolic partial derivative with respect to an even variable.
    pub fn diff(&self, var: &str) -> SmoothExpr {
        let mut out = SmoothExpr::zero();
        for (m, c) in &self.terms {
            for (idx, (g, p)) in m.factors.iter().enumerate() {
                let dg = match g {
                    Generator::Var(v) => {
                        if v == var {
                            SmoothExpr::one()
                        } else {
                            continue;
                        }
                    }
                    Generator::Sin(a) => SmoothExpr::cos_of(a).mul(&a.diff(var)),
                    Generator::Cos(a) => SmoothExpr::sin_of(a).neg().mul(&a.diff(var)),
                    Generator::Exp(a) => SmoothExpr::exp_of(a).mul(&a.diff(var)),
                };
                if dg.is_zero() {
                    continue;
                }
                // c * p * g^(p-1) * (other factors) * dg
                let mut rest = Monomial {
                    factors: m
                        .factors
                        .iter()
                        .enumerate()
                        .filter_map(|(j, (gj, pj))| {
                            if j == idx {
                                (*pj > 1).then(|| (gj.clone(), pj - 1))
                            } else {
                                Some((gj.clone(), *pj))
                            }
                        })
                        .collect(),
                };
                rest.factors.sort_by(|a, b| a.0.cmp(&b.0));
                let coeff = c * &Rational::from_int(*p as i64);
                let mut piece = SmoothExpr::from_monomial(rest).scale(&coeff);
                piece = piece.mul(&dg);
                out = out.add(&piece);
            }
        }
        out
    }

    /// Evaluates at a point. Exact rational when the expression is a polynomial
    /// with rational constants; binary64 as soon as a transcendental atom occurs.
    pub fn eval(&self, point: &EvenPoint) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (m, c) in &self.terms {
            let mut term = Scalar::Exact(c.clone());
            for (g, p) in &m.factors {
                let base = match g {
                    Generator::Var(v) => point
                        .get(v)
                        .cloned()
                        .ok_or_else(|| Error::MissingBinding(v.clone()))?,
                    Generator::Sin(a) => Scalar::Approx(a.eval(point)?.to_f64().sin()),
                    Generator::Cos(a) => Scalar::Approx(a.eval(point)?.to_f64().cos()),
                    Generator::Exp(a) => Scalar::Approx(a.eval(point)?.to_f64().exp()),
                };
                let mut powed = base.clone();
                for _ in 1..*p {
                    powed = powed.mul(&base);
                }
                term = term.mul(&powed);
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Zero test: structural on the normal form, with a randomized rational
    /// evaluation screen (16 points, fixed seed) for transcendental mixtures.
    /// A nonzero evaluation certifies the expression is not zero; passing the
    /// screen is evidence, not proof.
    pub fn zeroness(&self, tol: f64) -> Zeroness {
        if self.is_zero() {
            return Zeroness::StructuralZero;
        }
        let vars: Vec<String> = self.vars().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
        for _ in 0..16 {
            let mut point = EvenPoint::new();
            for v in &vars {
                let num = rng.gen_range(-12i64..=12);
                let den = rng.gen_range(1i64..=6);
                point.insert(v.clone(), Scalar::Exact(Rational::new(num, den).unwrap()));
            }
            match self.eval(&point) {
                Ok(Scalar::Exact(r)) => {
                    if !r.is_zero() {
                        let value = r.to_f64();
                        return Zeroness::NonZero { witness: point, value };
                    }
                }
                Ok(Scalar::Approx(x)) => {
                    if x.abs() > tol {
                        return Zeroness::NonZero { witness: point, value: x };
                    }
                }
                Err(_) => {}
            }
        }
        Zeroness::PassedScreen
    }
}

fn fmt_factor(g: &Generator, p: u32, out: &mut String) {
    match g {
        Generator::Var(v) => out.push_str(v),
        Generator::Sin(a) => {
            out.push_str("sin(");
            out.push_str(&a.to_string());
            out.push(')');
        }
        Generator::Cos(a) => {
            out.push_str("cos(");
            out.push_str(&a.to_string());
            out.push(')');
        }
        Generator::Exp(a) => {
            out.push_str("exp(");
            out.push_str(&a.to_string());
            out.push(')');
        }
    }
    if p >= 2 {
        out.push('^');
        out.push_str(&p.to_string());
    }
}

impl fmt::Display for SmoothExpr {
    /// Canonical text: terms in descending graded-lex order; re-parsing the
    /// output reproduces the expression.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut s = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            if m.is_unit() {
                s.push_str(&mag.to_string());
            } else {
                let mut parts: Vec<String> = Vec::new();
                if !mag.is_one() {
                    parts.push(mag.to_string());
                }
                for (g, p) in &m.factors {
                    let mut fs = String::new();
                    fmt_factor(g, *p, &mut fs);
                    parts.push(fs);
                }
                s.push_str(&parts.join("*"));
            }
        }
        write!(f, "{s}")
    }
}
