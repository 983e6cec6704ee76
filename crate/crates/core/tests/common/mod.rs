//! Shared generators and helpers for the property suites.
#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use supertrans_core::{
    EvenPoint, Rational, Scalar, SmoothExpr, SuperContext, SuperFunction,
};

/// The workhorse context: two even and three odd generators.
pub fn ctx23() -> Arc<SuperContext> {
    SuperContext::new(
        vec!["x1".into(), "x2".into()],
        vec!["e1".into(), "e2".into(), "e3".into()],
    )
    .unwrap()
}

/// Two even, two odd; used where square-ish morphisms are convenient.
pub fn ctx22() -> Arc<SuperContext> {
    SuperContext::new(
        vec!["x1".into(), "x2".into()],
        vec!["e1".into(), "e2".into()],
    )
    .unwrap()
}

pub fn small_rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=3).prop_map(|(n, d)| Rational::new(n, d).unwrap())
}

pub fn nonzero_rational() -> impl Strategy<Value = Rational> {
    (1i64..=6, 1i64..=3, prop::bool::ANY).prop_map(|(n, d, neg)| {
        let r = Rational::new(n, d).unwrap();
        if neg {
            -r
        } else {
            r
        }
    })
}

/// Polynomial in the named variables: up to `terms` monomials, each variable
/// raised to at most `max_pow`.
pub fn smooth_poly(
    vars: &'static [&'static str],
    terms: usize,
    max_pow: u32,
) -> impl Strategy<Value = SmoothExpr> {
    let one_term = (
        small_rational(),
        prop::collection::vec(0..=max_pow, vars.len()),
    );
    prop::collection::vec(one_term, 0..=terms).prop_map(move |entries| {
        let mut acc = SmoothExpr::zero();
        for (coeff, powers) in entries {
            let mut term = SmoothExpr::constant(coeff);
            for (v, p) in vars.iter().zip(powers) {
                term = term.mul(&SmoothExpr::var(v).pow(p));
            }
            acc = acc.add(&term);
        }
        acc
    })
}

/// The product of the odd generators selected by `mask`, in ascending order.
pub fn odd_monomial(ctx: &Arc<SuperContext>, mask: u32) -> SuperFunction {
    let mut acc = SuperFunction::constant(ctx, Rational::one());
    for (i, name) in ctx.odd_names().iter().enumerate() {
        if mask & (1 << i) != 0 {
            acc = acc
                .mul(&SuperFunction::odd_var(ctx, name).unwrap())
                .unwrap();
        }
    }
    acc
}

/// A general superfunction on `ctx`: a few odd monomials with polynomial
/// coefficients in the even variables.
pub fn superfunction(ctx: Arc<SuperContext>) -> impl Strategy<Value = SuperFunction> {
    let n = ctx.odd_names().len() as u32;
    let vars: &'static [&'static str] = &["x1", "x2"];
    prop::collection::vec((0..(1u32 << n), smooth_poly(vars, 2, 2)), 0..=4).prop_map(
        move |entries| {
            let mut acc = SuperFunction::zero(&ctx);
            for (mask, coeff) in entries {
                let term = SuperFunction::from_smooth(&ctx, coeff)
                    .unwrap()
                    .mul(&odd_monomial(&ctx, mask))
                    .unwrap();
                acc = acc.add(&term).unwrap();
            }
            acc
        },
    )
}

/// The part of `f` whose odd monomials have even degree (the even component).
pub fn even_component(f: &SuperFunction) -> SuperFunction {
    let ctx = f.context().clone();
    let mut acc = SuperFunction::zero(&ctx);
    for (mono, coeff) in f.terms() {
        if mono.degree() % 2 == 0 {
            let term = SuperFunction::from_smooth(&ctx, coeff.clone())
                .unwrap()
                .mul(&odd_monomial(&ctx, mono.0))
                .unwrap();
            acc = acc.add(&term).unwrap();
        }
    }
    acc
}

/// The part of `f` whose odd monomials have odd degree (the odd component).
pub fn odd_component(f: &SuperFunction) -> SuperFunction {
    let ctx = f.context().clone();
    let mut acc = SuperFunction::zero(&ctx);
    for (mono, coeff) in f.terms() {
        if mono.degree() % 2 == 1 {
            let term = SuperFunction::from_smooth(&ctx, coeff.clone())
                .unwrap()
                .mul(&odd_monomial(&ctx, mono.0))
                .unwrap();
            acc = acc.add(&term).unwrap();
        }
    }
    acc
}

pub fn rational_point(vars: &'static [&'static str]) -> impl Strategy<Value = EvenPoint> {
    prop::collection::vec(small_rational(), vars.len()).prop_map(move |vals| {
        let mut p = EvenPoint::new();
        for (v, val) in vars.iter().zip(vals) {
            p.insert(v.to_string(), Scalar::Exact(val));
        }
        p
    })
}

/// Independent differentiator: walks monomials directly with the product and
/// chain rules, sharing no code with `SmoothExpr::diff`.
pub fn oracle_diff(f: &SmoothExpr, var: &str) -> SmoothExpr {
    use supertrans_core::Generator;
    let mut out = SmoothExpr::zero();
    for (mono, coeff) in f.terms() {
        let factors = mono.factors();
        for (i, (g, p)) in factors.iter().enumerate() {
            let dg = oracle_diff_generator(g, var);
            if dg.is_zero() {
                continue;
            }
            // coeff * p * g^(p-1) * dg * (other factors unchanged)
            let mut term = SmoothExpr::constant(coeff.clone());
            term = term.scale(&Rational::from_int(*p as i64));
            term = term.mul(&generator_power(g, p - 1));
            term = term.mul(&dg);
            for (j, (h, q)) in factors.iter().enumerate() {
                if j != i {
                    term = term.mul(&generator_power(h, *q));
                }
            }
            out = out.add(&term);
        }
    }

    fn generator_power(g: &Generator, p: u32) -> SmoothExpr {
        let base = match g {
            Generator::Var(v) => SmoothExpr::var(v),
            Generator::Sin(a) => SmoothExpr::sin_of(a),
            Generator::Cos(a) => SmoothExpr::cos_of(a),
            Generator::Exp(a) => SmoothExpr::exp_of(a),
        };
        base.pow(p)
    }

    fn oracle_diff_generator(g: &Generator, var: &str) -> SmoothExpr {
        match g {
            Generator::Var(v) => {
                if v == var {
                    SmoothExpr::one()
                } else {
                    SmoothExpr::zero()
                }
            }
            Generator::Sin(a) => SmoothExpr::cos_of(a).mul(&oracle_diff(a, var)),
            Generator::Cos(a) => SmoothExpr::sin_of(a).neg().mul(&oracle_diff(a, var)),
            Generator::Exp(a) => SmoothExpr::exp_of(a).mul(&oracle_diff(a, var)),
        }
    }

    out
}

/// Independent exact rank: fraction-free-ish row elimination written from
/// scratch for the tests, sharing nothing with the library's rank code.
pub fn oracle_rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let nrows = rows.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    let mut col = 0;
    while rank < nrows && col < ncols {
        let Some(pivot) = (rank..nrows).find(|&r| !rows[r][col].is_zero()) else {
            col += 1;
            continue;
        };
        rows.swap(rank, pivot);
        let lead = rows[rank][col].clone();
        for r in 0..nrows {
            if r == rank || rows[r][col].is_zero() {
                continue;
            }
            let factor = rows[r][col].clone() / lead.clone();
            for c in col..ncols {
                let delta = &factor * &rows[rank][c];
                rows[r][c] = &rows[r][c] - &delta;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}
