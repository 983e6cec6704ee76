//! Functions on a superdomain.
//!
//! A superfunction is a finite sum `sum_I f_I(x) theta^I` where each `f_I` is
//! a smooth function of the even coordinates and `theta^I` is a product of
//! distinct odd generators in increasing index order. The odd generators
//! anticommute and square to zero, which makes every positive-degree part
//! nilpotent; composing a smooth function with such a sum therefore reduces
//! to a finite Taylor expansion around the degree-zero part.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::symexpr::{parse_ast, Ast, SmoothExpr};

/// Sorts a list of odd-generator indices, counting transpositions.
/// Returns the resulting sign and the sorted list, or sign 0 and `None` when
/// an index repeats (the product is then zero).
pub fn monomial_normalize(indices: &[usize]) -> (i8, Option<Vec<usize>>) {
    let mut idx = indices.to_vec();
    let mut swaps = 0usize;
    // Insertion sort; the move distance counts adjacent transpositions.
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            swaps += 1;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return (0, None);
    }
    let sign = if swaps % 2 == 0 { 1 } else { -1 };
    (sign, Some(idx))
}

/// Coordinate names of a superdomain: a list of even names and a list of odd
/// names, all distinct. Shared by every function that lives on the domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperContext {
    even: Vec<String>,
    odd: Vec<String>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars
        .next()
        .map_or(false, |c| c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(name, "sin" | "cos" | "exp")
}

impl SuperContext {
    pub fn new(even: Vec<String>, odd: Vec<String>) -> Result<Arc<Self>> {
        if odd.len() > 32 {
            return Err(Error::Invalid(format!(
                "at most 32 odd coordinates are supported, got {}",
                odd.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in even.iter().chain(odd.iter()) {
            if !valid_name(name) {
                return Err(Error::Invalid(format!("bad coordinate name `{name}`")));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Invalid(format!("duplicate coordinate name `{name}`")));
            }
        }
        Ok(Arc::new(SuperContext { even, odd }))
    }

    pub fn even_names(&self) -> &[String] {
        &self.even
    }

    pub fn odd_names(&self) -> &[String] {
        &self.odd
    }

    pub fn even_len(&self) -> usize {
        self.even.len()
    }

    pub fn odd_len(&self) -> usize {
        self.odd.len()
    }

    pub fn even_index(&self, name: &str) -> Option<usize> {
        self.even.iter().position(|v| v == name)
    }

    pub fn odd_index(&self, name: &str) -> Option<usize> {
        self.odd.iter().position(|v| v == name)
    }
}

/// Product of distinct odd generators as an index bitmask; bit i stands for
/// the i-th odd coordinate of the context. Ordered by degree, then by mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OddMonomial(pub u32);

impl OddMonomial {
    pub const UNIT: OddMonomial = OddMonomial(0);

    pub fn degree(self) -> u32 {
        self.0.count_ones()
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| self.0 & (1 << i) != 0)
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }
}

impl Ord for OddMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then(self.0.cmp(&other.0))
    }
}

impl PartialOrd for OddMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign produced by interleaving the sorted products `a` and `b` (disjoint
/// masks) into one sorted product.
fn merge_sign(a: u32, b: u32) -> i8 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// A function on a superdomain in expanded normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperFunction {
    context: Arc<SuperContext>,
    terms: BTreeMap<OddMonomial, SmoothExpr>,
}

impl SuperFunction {
    pub fn zero(context: &Arc<SuperContext>) -> Self {
        SuperFunction {
            context: context.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(context: &Arc<SuperContext>, c: Rational) -> Self {
        Self::from_smooth_unchecked(context, SmoothExpr::constant(c))
    }

    /// Lifts a smooth function of the even coordinates; its variables must
    /// all be even coordinates of the context.
    pub fn from_smooth(context: &Arc<SuperContext>, f: SmoothExpr) -> Result<Self> {
        for v in f.vars() {
            if context.even_index(&v).is_none() {
                return Err(Error::UnknownVariable(v));
            }
        }
        Ok(Self::from_smooth_unchecked(context, f))
    }

    fn from_smooth_unchecked(context: &Arc<SuperContext>, f: SmoothExpr) -> Self {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(OddMonomial::UNIT, f);
        }
        SuperFunction {
            context: context.clone(),
            terms,
        }
    }

    pub fn even_var(context: &Arc<SuperContext>, name: &str) -> Result<Self> {
        context
            .even_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        Ok(Self::from_smooth_unchecked(context, SmoothExpr::var(name)))
    }

    pub fn odd_var(context: &Arc<SuperContext>, name: &str) -> Result<Self> {
        let idx = context
            .odd_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        let mut terms = BTreeMap::new();
        terms.insert(OddMonomial(1 << idx), SmoothExpr::one());
        Ok(SuperFunction {
            context: context.clone(),
            terms,
        })
    }

    pub fn context(&self) -> &Arc<SuperContext> {
        &self.context
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (OddMonomial, &SmoothExpr)> {
        self.terms.iter().map(|(m, f)| (*m, f))
    }

    /// Coefficient of `theta^I`; zero when the monomial is absent.
    pub fn coefficient(&self, m: OddMonomial) -> SmoothExpr {
        self.terms.get(&m).cloned().unwrap_or_else(SmoothExpr::zero)
    }

    fn insert(terms: &mut BTreeMap<OddMonomial, SmoothExpr>, m: OddMonomial, f: SmoothExpr) {
        if f.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(f);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&f);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_same_context(&self, other: &SuperFunction) -> Result<()> {
        if self.context == other.context {
            Ok(())
        } else {
            Err(Error::ContextMismatch(
                "operands live on different superdomains".into(),
            ))
        }
    }

    pub fn add(&self, other: &SuperFunction) -> Result<SuperFunction> {
        self.check_same_context(other)?;
        let mut terms = self.terms.clone();
        for (m, f) in &other.terms {
            Self::insert(&mut terms, *m, f.clone());
        }
        Ok(SuperFunction {
            context: self.context.clone(),
            terms,
        })
    }

    pub fn neg(&self) -> SuperFunction {
        SuperFunction {
            context: self.context.clone(),
            terms: self.terms.iter().map(|(m, f)| (*m, f.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &SuperFunction) -> Result<SuperFunction> {
        self.add(&other.neg())
    }

    /// Product in the Grassmann algebra; coefficients are even and commute,
    /// the odd generators contribute the interleaving sign.
    pub fn mul(&self, other: &SuperFunction) -> Result<SuperFunction> {
        self.check_same_context(other)?;
        let mut terms = BTreeMap::new();
        for (ma, fa) in &self.terms {
            for (mb, fb) in &other.terms {
                if ma.0 & mb.0 != 0 {
                    continue;
                }
                let sign = merge_sign(ma.0, mb.0);
                let mut coeff = fa.mul(fb);
                if sign < 0 {
                    coeff = coeff.neg();
                }
                Self::insert(&mut terms, OddMonomial(ma.0 | mb.0), coeff);
            }
        }
        Ok(SuperFunction {
            context: self.context.clone(),
            terms,
        })
    }

    pub fn scale(&self, c: &Rational) -> SuperFunction {
        if c.is_zero() {
            return SuperFunction::zero(&self.context);
        }
        SuperFunction {
            context: self.context.clone(),
            terms: self.terms.iter().map(|(m, f)| (*m, f.scale(c))).collect(),
        }
    }

    pub fn pow(&self, exp: u32) -> Result<SuperFunction> {
        let mut acc = SuperFunction::constant(&self.context, Rational::one());
        for _ in 0..exp {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn parity(&self) -> Parity {
        let mut any_even = false;
        let mut any_odd = false;
        for m in self.terms.keys() {
            if m.degree() % 2 == 0 {
                any_even = true;
            } else {
                any_odd = true;
            }
        }
        match (any_even, any_odd) {
            (true, true) => Parity::Mixed,
            (false, true) => Parity::Odd,
            // Zero counts as even.
            _ => Parity::Even,
        }
    }

    fn is_even_fn(&self) -> bool {
        self.terms.keys().all(|m| m.degree() % 2 == 0)
    }

    fn is_odd_fn(&self) -> bool {
        self.terms.keys().all(|m| m.degree() % 2 == 1)
    }

    /// Partial derivative along an even coordinate, acting on coefficients.
    pub fn d_even(&self, name: &str) -> Result<SuperFunction> {
        self.context
            .even_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        let mut terms = BTreeMap::new();
        for (m, f) in &self.terms {
            Self::insert(&mut terms, *m, f.diff(name));
        }
        Ok(SuperFunction {
            context: self.context.clone(),
            terms,
        })
    }

    /// Left derivative along an odd coordinate: the generator is moved to the
    /// front of its monomial (one sign per factor passed) and struck.
    pub fn d_odd(&self, name: &str) -> Result<SuperFunction> {
        let k = self
            .context
            .odd_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        let bit = 1u32 << k;
        let mut terms = BTreeMap::new();
        for (m, f) in &self.terms {
            if m.0 & bit == 0 {
                continue;
            }
            let passed = (m.0 & (bit - 1)).count_ones();
            let coeff = if passed % 2 == 0 { f.clone() } else { f.neg() };
            Self::insert(&mut terms, OddMonomial(m.0 & !bit), coeff);
        }
        Ok(SuperFunction {
            context: self.context.clone(),
            terms,
        })
    }

    /// Degree-zero part: the underlying smooth function of the even
    /// coordinates obtained by sending every odd generator to zero.
    pub fn reduce(&self) -> SmoothExpr {
        self.coefficient(OddMonomial::UNIT)
    }

    /// Zero test over all coefficients: structural when the normal form is
    /// empty, otherwise every coefficient goes through the randomized
    /// evaluation screen. Any certified-nonzero coefficient decides.
    pub fn zeroness(&self, tol: f64) -> crate::symexpr::Zeroness {
        use crate::symexpr::Zeroness;
        if self.terms.is_empty() {
            return Zeroness::StructuralZero;
        }
        for f in self.terms.values() {
            match f.zeroness(tol) {
                Zeroness::NonZero { witness, value } => {
                    return Zeroness::NonZero { witness, value }
                }
                Zeroness::StructuralZero | Zeroness::PassedScreen => {}
            }
        }
        Zeroness::PassedScreen
    }

    /// Strict nilpotent part: all terms of positive odd degree.
    pub fn nilpotent_part(&self) -> SuperFunction {
        SuperFunction {
            context: self.context.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() > 0)
                .map(|(m, f)| (*m, f.clone()))
                .collect(),
        }
    }

    /// Applies sin, cos or exp to an even superfunction by finite Taylor
    /// expansion around the degree-zero part: with `a = reduce(f)` and
    /// `nu = f - a` nilpotent, `g(a + nu) = sum_k g_k(a) nu^k / k!` where
    /// `g_k` is the k-th derivative; the sum stops once `nu^k = 0`.
    pub fn apply_transcendental(kind: TranscendentalKind, arg: &SuperFunction) -> Result<SuperFunction> {
        if !arg.is_even_fn() {
            return Err(Error::ParityViolation(format!(
                "{} requires an even argument",
                kind.name()
            )));
        }
        let base = arg.reduce();
        let nu = arg.nilpotent_part();
        let ctx = &arg.context;
        let mut acc = SuperFunction::zero(ctx);
        let mut nu_pow = SuperFunction::constant(ctx, Rational::one());
        let mut factorial = Rational::one();
        let mut k: u32 = 0;
        loop {
            if k > 0 {
                nu_pow = nu_pow.mul(&nu)?;
                factorial = factorial * Rational::from_int(k as i64);
            }
            if nu_pow.is_zero() {
                break;
            }
            let deriv = kind.derivative(&base, k);
            let coeff = factorial.recip().expect("factorial is nonzero");
            let piece = Self::from_smooth_unchecked(ctx, deriv).mul(&nu_pow)?.scale(&coeff);
            acc = acc.add(&piece)?;
            k += 1;
        }
        Ok(acc)
    }

    /// Composes this function with coordinate images: every even coordinate
    /// is replaced by the matching even image, every odd generator by the
    /// matching odd image, and transcendental atoms are pushed through by
    /// nilpotent Taylor expansion. This is the pullback along the morphism
    /// whose coordinate images are given.
    pub fn substitute(
        &self,
        target: &Arc<SuperContext>,
        even_images: &[SuperFunction],
        odd_images: &[SuperFunction],
    ) -> Result<SuperFunction> {
        if even_images.len() != self.context.even_len() {
            return Err(Error::ArityMismatch {
                what: "even images",
                expected: self.context.even_len(),
                got: even_images.len(),
            });
        }
        if odd_images.len() != self.context.odd_len() {
            return Err(Error::ArityMismatch {
                what: "odd images",
                expected: self.context.odd_len(),
                got: odd_images.len(),
            });
        }
        for img in even_images.iter().chain(odd_images) {
            if img.context != *target {
                return Err(Error::ContextMismatch(
                    "coordinate image lives on the wrong superdomain".into(),
                ));
            }
        }
        for (i, img) in even_images.iter().enumerate() {
            if !img.is_even_fn() {
                return Err(Error::ParityViolation(format!(
                    "image of even coordinate `{}` has odd terms",
                    self.context.even[i]
                )));
            }
        }
        for (j, img) in odd_images.iter().enumerate() {
            if !img.is_odd_fn() {
                return Err(Error::ParityViolation(format!(
                    "image of odd coordinate `{}` has even terms",
                    self.context.odd[j]
                )));
            }
        }
        let mut acc = SuperFunction::zero(target);
        for (m, f) in &self.terms {
            let mut piece = self.substitute_smooth(f, target, even_images)?;
            for i in m.indices() {
                piece = piece.mul(&odd_images[i])?;
            }
            acc = acc.add(&piece)?;
        }
        Ok(acc)
    }

    fn substitute_smooth(
        &self,
        f: &SmoothExpr,
        target: &Arc<SuperContext>,
        even_images: &[SuperFunction],
    ) -> Result<SuperFunction> {
        use crate::symexpr::Generator;
        let mut acc = SuperFunction::zero(target);
        for (m, c) in f.terms() {
            let mut piece = SuperFunction::constant(target, c.clone());
            for (g, p) in m.factors() {
                let base = match g {
                    Generator::Var(v) => {
                        let idx = self
                            .context
                            .even_index(v)
                            .ok_or_else(|| Error::UnknownVariable(v.clone()))?;
                        even_images[idx].clone()
                    }
                    Generator::Sin(a) => Self::apply_transcendental(
                        TranscendentalKind::Sin,
                        &self.substitute_smooth(a, target, even_images)?,
                    )?,
                    Generator::Cos(a) => Self::apply_transcendental(
                        TranscendentalKind::Cos,
                        &self.substitute_smooth(a, target, even_images)?,
                    )?,
                    Generator::Exp(a) => Self::apply_transcendental(
                        TranscendentalKind::Exp,
                        &self.substitute_smooth(a, target, even_images)?,
                    )?,
                };
                piece = piece.mul(&base.pow(*p)?)?;
            }
            acc = acc.add(&piece)?;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscendentalKind {
    Sin,
    Cos,
    Exp,
}

impl TranscendentalKind {
    fn name(self) -> &'static str {
        match self {
            TranscendentalKind::Sin => "sin",
            TranscendentalKind::Cos => "cos",
            TranscendentalKind::Exp => "exp",
        }
    }

    /// k-th derivative applied to a smooth argument.
    fn derivative(self, arg: &SmoothExpr, k: u32) -> SmoothExpr {
        match self {
            TranscendentalKind::Exp => SmoothExpr::exp_of(arg),
            TranscendentalKind::Sin => match k % 4 {
                0 => SmoothExpr::sin_of(arg),
                1 => SmoothExpr::cos_of(arg),
                2 => SmoothExpr::sin_of(arg).neg(),
                _ => SmoothExpr::cos_of(arg).neg(),
            },
            TranscendentalKind::Cos => match k % 4 {
                0 => SmoothExpr::cos_of(arg),
                1 => SmoothExpr::sin_of(arg).neg(),
                2 => SmoothExpr::cos_of(arg).neg(),
                _ => SmoothExpr::sin_of(arg),
            },
        }
    }
}

fn lower_super(ast: &Ast, ctx: &Arc<SuperContext>) -> Result<SuperFunction> {
    match ast {
        Ast::Rat(r) => Ok(SuperFunction::constant(ctx, r.clone())),
        Ast::Var(name) => {
            if ctx.even_index(name).is_some() {
                SuperFunction::even_var(ctx, name)
            } else if ctx.odd_index(name).is_some() {
                SuperFunction::odd_var(ctx, name)
            } else {
                Err(Error::UnknownVariable(name.clone()))
            }
        }
        Ast::Neg(a) => Ok(lower_super(a, ctx)?.neg()),
        Ast::Add(a, b) => lower_super(a, ctx)?.add(&lower_super(b, ctx)?),
        Ast::Sub(a, b) => lower_super(a, ctx)?.sub(&lower_super(b, ctx)?),
        Ast::Mul(a, b) => lower_super(a, ctx)?.mul(&lower_super(b, ctx)?),
        Ast::Pow(a, e) => lower_super(a, ctx)?.pow(*e),
        Ast::Sin(a) => {
            SuperFunction::apply_transcendental(TranscendentalKind::Sin, &lower_super(a, ctx)?)
        }
        Ast::Cos(a) => {
            SuperFunction::apply_transcendental(TranscendentalKind::Cos, &lower_super(a, ctx)?)
        }
        Ast::Exp(a) => {
            SuperFunction::apply_transcendental(TranscendentalKind::Exp, &lower_super(a, ctx)?)
        }
    }
}

/// Parses a superfunction literal over the context's coordinates. Same
/// grammar as even expressions; odd coordinates are ordinary atoms and
/// normalization applies the sign rules.
pub fn parse_superfunction(text: &str, ctx: &Arc<SuperContext>) -> Result<SuperFunction> {
    lower_super(&parse_ast(text)?, ctx)
}

impl fmt::Display for SuperFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (i, (m, coeff)) in self.terms.iter().enumerate() {
            let piece = if m.0 == 0 {
                coeff.to_string()
            } else {
                let odd: Vec<&str> = m
                    .indices()
                    .map(|k| self.context.odd[k].as_str())
                    .collect();
                let odd = odd.join("*");
                match coeff.as_constant() {
                    Some(c) if c.is_one() => odd,
                    Some(c) if (-&c).is_one() => format!("-{odd}"),
                    _ => {
                        if coeff.term_count() > 1 {
                            format!("({coeff})*{odd}")
                        } else {
                            format!("{coeff}*{odd}")
                        }
                    }
                }
            };
            if i == 0 {
                out.push_str(&piece);
            } else if let Some(rest) = piece.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(&piece);
            }
        }
        write!(f, "{out}")
    }
}
