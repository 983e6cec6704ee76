//! Acceptance checklist for the whole workspace, one test per item.
//!
//! Each test states its own sample-size floor and asserts it, so shrinking a
//! battery by accident fails the run instead of silently weakening the check.
//! Randomness is seeded; every run exercises the same instances.

mod common;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supertrans_core::{
    check_transversal, classify, codim_check, construct_preimage_affine, defining_submersion,
    is_transversal_at, make_morphism, overlap_consistency, parse_superfunction, scan_preimage,
    standard_immersion, standard_submersion, tangent_matrix, verify_submersion_on_fiber,
    AdaptedChart, Error, EvenPoint, GridSpec, Mat, PointSource, Rational, Scalar, SmoothExpr,
    Submanifold, SuperContext, SuperDomain, SuperFunction, SuperMorphism,
};

const TOL: f64 = 1e-9;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rat(r: &mut ChaCha8Rng) -> Rational {
    Rational::new(r.gen_range(-6i64..=6), r.gen_range(1i64..=3)).unwrap()
}

/// Random polynomial in `vars`: up to `terms` monomials of total degree at
/// most `deg`. `min_deg` = 1 drops constant terms.
fn poly(r: &mut ChaCha8Rng, vars: &[String], terms: usize, deg: u32, min_deg: u32) -> SmoothExpr {
    let count = r.gen_range(0..=terms);
    let mut acc = SmoothExpr::zero();
    for _ in 0..count {
        let mut powers = vec![0u32; vars.len()];
        let mut budget = deg;
        for slot in powers.iter_mut() {
            let p = r.gen_range(0..=budget);
            *slot = p;
            budget -= p;
        }
        if powers.iter().sum::<u32>() < min_deg {
            if vars.is_empty() {
                continue;
            }
            let i = r.gen_range(0..vars.len());
            powers[i] = min_deg;
        }
        let mut term = SmoothExpr::constant(rat(r));
        for (v, p) in vars.iter().zip(powers) {
            term = term.mul(&SmoothExpr::var(v).pow(p));
        }
        acc = acc.add(&term);
    }
    acc
}

/// Random superfunction: up to `terms` odd monomials with polynomial
/// coefficients of total degree at most `deg`.
fn superfun(r: &mut ChaCha8Rng, ctx: &Arc<SuperContext>, terms: usize, deg: u32) -> SuperFunction {
    let n = ctx.odd_len() as u32;
    let evens = ctx.even_names().to_vec();
    let count = r.gen_range(0..=terms);
    let mut acc = SuperFunction::zero(ctx);
    for _ in 0..count {
        let mask = r.gen_range(0..(1u32 << n));
        let coeff = poly(r, &evens, 2, deg, 0);
        let mut term = SuperFunction::from_smooth(ctx, coeff).unwrap();
        for (i, name) in ctx.odd_names().iter().enumerate() {
            if mask & (1 << i) != 0 {
                term = term.mul(&SuperFunction::odd_var(ctx, name).unwrap()).unwrap();
            }
        }
        acc = acc.add(&term).unwrap();
    }
    acc
}

/// Homogeneous component of `f` with the requested parity.
fn component(f: &SuperFunction, odd: bool) -> SuperFunction {
    let ctx = f.context().clone();
    let mut acc = SuperFunction::zero(&ctx);
    for (mono, coeff) in f.terms() {
        if (mono.degree() % 2 == 1) != odd {
            continue;
        }
        let mut term = SuperFunction::from_smooth(&ctx, coeff.clone()).unwrap();
        for (i, name) in ctx.odd_names().iter().enumerate() {
            if mono.0 & (1 << i) != 0 {
                term = term.mul(&SuperFunction::odd_var(&ctx, name).unwrap()).unwrap();
            }
        }
        acc = acc.add(&term).unwrap();
    }
    acc
}

fn rational_point(r: &mut ChaCha8Rng, names: &[String]) -> EvenPoint {
    EvenPoint::from_pairs(names.iter().map(|n| (n.clone(), Scalar::Exact(rat(r)))))
}

fn morph(
    name: &str,
    src: &SuperDomain,
    dst: &SuperDomain,
    evens: &[&str],
    odds: &[&str],
) -> SuperMorphism {
    let ctx = src.context();
    let ev = evens.iter().map(|s| parse_superfunction(s, ctx).unwrap()).collect();
    let od = odds.iter().map(|s| parse_superfunction(s, ctx).unwrap()).collect();
    make_morphism(name, src.clone(), dst.clone(), ev, od).unwrap()
}

/// Morphism with random superfunction images of the required parities.
fn random_morphism(
    r: &mut ChaCha8Rng,
    name: &str,
    src: &SuperDomain,
    dst: &SuperDomain,
    terms: usize,
    deg: u32,
) -> SuperMorphism {
    let sctx = src.context();
    let evens: Vec<SuperFunction> = (0..dst.context().even_len())
        .map(|_| component(&superfun(r, sctx, terms, deg), false))
        .collect();
    let odds: Vec<SuperFunction> = (0..dst.context().odd_len())
        .map(|_| component(&superfun(r, sctx, terms, deg), true))
        .collect();
    make_morphism(name, src.clone(), dst.clone(), evens, odds).unwrap()
}

/// Single-chart submanifold of `ambient` cut out by its last coordinates,
/// presented through an identity-shaped adapted chart.
fn identity_chart_w(ambient: &SuperDomain, keep_even: usize, keep_odd: usize) -> Submanifold {
    let m = ambient.context().even_len();
    let n = ambient.context().odd_len();
    let chart_dom = SuperDomain::standard("C", m, n);
    let amb_ev: Vec<&str> = ambient.context().even_names().iter().map(String::as_str).collect();
    let amb_od: Vec<&str> = ambient.context().odd_names().iter().map(String::as_str).collect();
    let crt_ev: Vec<&str> = chart_dom.context().even_names().iter().map(String::as_str).collect();
    let crt_od: Vec<&str> = chart_dom.context().odd_names().iter().map(String::as_str).collect();
    let map = morph("w_map", ambient, &chart_dom, &amb_ev, &amb_od);
    let inverse = morph("w_inv", &chart_dom, ambient, &crt_ev, &crt_od);
    let chart =
        AdaptedChart::new("c0", ambient.clone(), map, inverse, keep_even, keep_odd, TOL).unwrap();
    Submanifold::new("W", ambient.clone(), vec![chart]).unwrap()
}

fn boxed_standard(label: &str, m: usize, n: usize, half: i64) -> SuperDomain {
    let ctx = SuperDomain::standard(label, m, n).context().clone();
    let bounds = vec![(Rational::from_int(-half), Rational::from_int(half)); m];
    SuperDomain::new(label, ctx, Some(bounds)).unwrap()
}

fn exact(s: &Scalar) -> Rational {
    match s {
        Scalar::Exact(q) => q.clone(),
        Scalar::Approx(v) => panic!("expected exact value, got {v}"),
    }
}

fn exact_rows(m: &Mat<Scalar>) -> Vec<Vec<Rational>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| exact(m.at(i, j))).collect())
        .collect()
}

/// Plain triple-loop product, written here so the comparison in the chain
/// rule check shares nothing with the library's matrix code.
fn rows_mul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let inner = if a.is_empty() { 0 } else { a[0].len() };
    assert_eq!(inner, b.len(), "dimension mismatch in oracle product");
    let cols = if b.is_empty() { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = Rational::from_int(0);
                    for (k, v) in row.iter().enumerate() {
                        acc = &acc + &(v * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Exact row elimination, independent of the library's rank routines.
fn rank_oracle(mut rows: Vec<Vec<Rational>>) -> usize {
    let nrows = rows.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = rows[0].len();
    let mut rank = 0;
    let mut col = 0;
    while rank < nrows && col < ncols {
        let Some(pivot) = (rank..nrows).find(|&i| !rows[i][col].is_zero()) else {
            col += 1;
            continue;
        };
        rows.swap(rank, pivot);
        let lead = rows[rank][col].clone();
        for i in 0..nrows {
            if i == rank || rows[i][col].is_zero() {
                continue;
            }
            let factor = rows[i][col].clone() / lead.clone();
            for c in col..ncols {
                let delta = &factor * &rows[rank][c];
                rows[i][c] = &rows[i][c] - &delta;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

fn assert_same_images(a: &SuperMorphism, b: &SuperMorphism, what: &str) {
    for (x, y) in a
        .even_images()
        .iter()
        .zip(b.even_images())
        .chain(a.odd_images().iter().zip(b.odd_images()))
    {
        assert!(x.sub(y).unwrap().is_zero(), "{what}: images differ");
    }
}

// ---------------------------------------------------------------------------
// 1. Algebra laws on randomized superfunctions.
// ---------------------------------------------------------------------------

#[test]
fn a01_graded_algebra_laws_hold_on_500_random_superfunctions() {
    let mut r = rng(0xA01);
    let mut functions = 0usize;
    for trial in 0..180u32 {
        let n = 1 + (trial as usize % 4);
        let odd_names: Vec<String> = (1..=n).map(|i| format!("e{i}")).collect();
        let ctx = SuperContext::new(vec!["x1".into(), "x2".into()], odd_names).unwrap();
        let f = superfun(&mut r, &ctx, 4, 3);
        let g = superfun(&mut r, &ctx, 4, 3);
        let h = superfun(&mut r, &ctx, 4, 3);
        functions += 3;

        let left = f.mul(&g).unwrap().mul(&h).unwrap();
        let right = f.mul(&g.mul(&h).unwrap()).unwrap();
        assert!(left.sub(&right).unwrap().is_zero(), "associativity failed");

        let left = f.mul(&g.add(&h).unwrap()).unwrap();
        let right = f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap();
        assert!(left.sub(&right).unwrap().is_zero(), "distributivity failed");

        for &pf in &[false, true] {
            for &pg in &[false, true] {
                let a = component(&f, pf);
                let b = component(&g, pg);
                let ab = a.mul(&b).unwrap();
                let ba = b.mul(&a).unwrap();
                let expected = if pf && pg { ba.neg() } else { ba };
                assert!(
                    ab.sub(&expected).unwrap().is_zero(),
                    "graded commutativity failed for parities ({pf}, {pg})"
                );
            }
        }

        for name in ctx.odd_names() {
            let theta = SuperFunction::odd_var(&ctx, name).unwrap();
            assert!(theta.mul(&theta).unwrap().is_zero(), "{name}^2 != 0");
        }

        for name in ctx.odd_names() {
            for &pf in &[false, true] {
                let a = component(&f, pf);
                let left = a.mul(&g).unwrap().d_odd(name).unwrap();
                let da_g = a.d_odd(name).unwrap().mul(&g).unwrap();
                let a_dg = a.mul(&g.d_odd(name).unwrap()).unwrap();
                let right = if pf { da_g.sub(&a_dg).unwrap() } else { da_g.add(&a_dg).unwrap() };
                assert!(
                    left.sub(&right).unwrap().is_zero(),
                    "graded Leibniz failed for d/d{name}"
                );
            }
        }
    }
    assert!(functions >= 500, "battery shrank to {functions} functions");
}

// ---------------------------------------------------------------------------
// 2. Composition laws and pullback contravariance.
// ---------------------------------------------------------------------------

#[test]
fn a02_composition_associates_and_pullbacks_reverse() {
    let mut r = rng(0xA02);
    let mut triples = 0usize;
    for _ in 0..100 {
        let dims: Vec<(usize, usize)> =
            (0..4).map(|_| (r.gen_range(1..=3), r.gen_range(1..=3))).collect();
        let labels = ["A", "B", "C", "D"];
        let doms: Vec<SuperDomain> = dims
            .iter()
            .zip(labels)
            .map(|(&(m, n), l)| SuperDomain::standard(l, m, n))
            .collect();
        let f = random_morphism(&mut r, "f", &doms[0], &doms[1], 2, 2);
        let g = random_morphism(&mut r, "g", &doms[1], &doms[2], 2, 2);
        let h = random_morphism(&mut r, "h", &doms[2], &doms[3], 2, 2);
        triples += 1;

        let left = h.compose(&g.compose(&f).unwrap()).unwrap();
        let right = h.compose(&g).unwrap().compose(&f).unwrap();
        assert_same_images(&left, &right, "associativity");

        let gf = g.compose(&f).unwrap();
        for _ in 0..2 {
            let s = superfun(&mut r, doms[2].context(), 3, 2);
            let joint = gf.pullback(&s).unwrap();
            let staged = f.pullback(&g.pullback(&s).unwrap()).unwrap();
            assert!(joint.sub(&staged).unwrap().is_zero(), "pullback contravariance failed");
        }

        let p = rational_point(&mut r, doms[0].context().even_names());
        let q = f.reduced_map_eval_unchecked(&p).unwrap();
        let via = g.reduced_map_eval_unchecked(&q).unwrap();
        let direct = gf.reduced_map_eval_unchecked(&p).unwrap();
        for name in doms[2].context().even_names() {
            let a = exact(direct.get(name).unwrap());
            let b = exact(via.get(name).unwrap());
            assert!(a == b, "reduced map does not commute with composition at {name}");
        }
    }
    assert!(triples >= 100, "battery shrank to {triples} triples");
}

// ---------------------------------------------------------------------------
// 3. Chain rule for tangent blocks at rational points.
// ---------------------------------------------------------------------------

#[test]
fn a03_tangent_blocks_multiply_along_composites() {
    let mut r = rng(0xA03);
    let mut points = 0usize;
    for _ in 0..100 {
        let dims: Vec<(usize, usize)> =
            (0..3).map(|_| (r.gen_range(1..=3), r.gen_range(1..=3))).collect();
        let labels = ["A", "B", "C"];
        let doms: Vec<SuperDomain> = dims
            .iter()
            .zip(labels)
            .map(|(&(m, n), l)| SuperDomain::standard(l, m, n))
            .collect();
        let psi = random_morphism(&mut r, "psi", &doms[0], &doms[1], 2, 2);
        let phi = random_morphism(&mut r, "phi", &doms[1], &doms[2], 2, 2);
        let composite = phi.compose(&psi).unwrap();

        let p = rational_point(&mut r, doms[0].context().even_names());
        let q = psi.reduced_map_eval_unchecked(&p).unwrap();
        let t_comp = tangent_matrix(&composite, &p).unwrap();
        let t_psi = tangent_matrix(&psi, &p).unwrap();
        let t_phi = tangent_matrix(&phi, &q).unwrap();

        let even = rows_mul(&exact_rows(&t_phi.even), &exact_rows(&t_psi.even));
        let odd = rows_mul(&exact_rows(&t_phi.odd), &exact_rows(&t_psi.odd));
        assert!(exact_rows(&t_comp.even) == even, "even tangent block is not the product");
        assert!(exact_rows(&t_comp.odd) == odd, "odd tangent block is not the product");
        points += 1;
    }
    assert!(points >= 100, "battery shrank to {points} points");
}

// ---------------------------------------------------------------------------
// 4. Standard local models classify as built.
// ---------------------------------------------------------------------------

#[test]
fn a04_standard_local_models_classify_correctly() {
    let mut r = rng(0xA04);
    let mut combos = 0usize;
    for m in 0..=3usize {
        for n in 0..=3usize {
            for extra_even in 0..=3usize {
                for extra_odd in 0..=3usize {
                    let imm = standard_immersion(m, n, extra_even, extra_odd);
                    for _ in 0..5 {
                        let p = rational_point(&mut r, imm.source().context().even_names());
                        let class = classify(&imm, &p, TOL).unwrap();
                        assert!(
                            class.is_immersion(),
                            "immersion model ({m}|{n} + {extra_even}|{extra_odd}) classified {class}"
                        );
                    }
                    let sub = standard_submersion(m, n, extra_even, extra_odd);
                    for _ in 0..5 {
                        let p = rational_point(&mut r, sub.source().context().even_names());
                        let class = classify(&sub, &p, TOL).unwrap();
                        assert!(
                            class.is_submersion(),
                            "submersion model ({m}|{n} + {extra_even}|{extra_odd}) classified {class}"
                        );
                    }
                    combos += 1;
                }
            }
        }
    }
    assert_eq!(combos, 256);
}

// ---------------------------------------------------------------------------
// 5. The two transversality criteria agree on random instances.
// ---------------------------------------------------------------------------

fn ambient_2_2() -> SuperDomain {
    let ctx = SuperContext::new(
        vec!["y1".into(), "y2".into()],
        vec!["t1".into(), "t2".into()],
    )
    .unwrap();
    SuperDomain::new("Y", ctx, None).unwrap()
}

/// Random polynomial morphism into `amb` whose cut coordinates vanish at the
/// origin, so the grid scan always discovers at least one fiber point.
fn random_poly_instance(
    r: &mut ChaCha8Rng,
    src: &SuperDomain,
    amb: &SuperDomain,
    keep_even: usize,
) -> SuperMorphism {
    let evens = src.context().even_names().to_vec();
    let e1 = SuperFunction::odd_var(src.context(), "e1").unwrap();
    let e2 = SuperFunction::odd_var(src.context(), "e2").unwrap();
    let mut even_images = Vec::new();
    for i in 0..2 {
        let min_deg = if i < keep_even { 0 } else { 1 };
        let mut img = poly(r, &evens, 3, 2, min_deg);
        if img.is_zero() && min_deg > 0 {
            img = SmoothExpr::var("x1");
        }
        let mut f = SuperFunction::from_smooth(src.context(), img).unwrap();
        if r.gen_bool(0.3) {
            let nil = SuperFunction::from_smooth(src.context(), poly(r, &evens, 1, 1, 0))
                .unwrap()
                .mul(&e1)
                .unwrap()
                .mul(&e2)
                .unwrap();
            f = f.add(&nil).unwrap();
        }
        even_images.push(f);
    }
    let mut odd_images = Vec::new();
    for _ in 0..2 {
        let a = SuperFunction::from_smooth(src.context(), poly(r, &evens, 2, 1, 0)).unwrap();
        let b = SuperFunction::from_smooth(src.context(), poly(r, &evens, 2, 1, 0)).unwrap();
        odd_images
            .push(a.mul(&e1).unwrap().add(&b.mul(&e2).unwrap()).unwrap());
    }
    make_morphism("psi", src.clone(), amb.clone(), even_images, odd_images).unwrap()
}

fn scan_grid() -> GridSpec {
    let names: Vec<String> = vec!["x1".into(), "x2".into()];
    let two = Rational::from_int(2);
    GridSpec::uniform(&names, &[(-two.clone(), two.clone()), (-two.clone(), two)], 4).unwrap()
}

#[test]
fn a05_rank_and_projection_criteria_agree_on_random_instances() {
    let mut r = rng(0xA05);
    let src = SuperDomain::standard("X", 2, 2);
    let amb = ambient_2_2();
    let grid = scan_grid();
    let mut instances = 0usize;
    let mut nonvacuous = 0usize;
    for _ in 0..100 {
        let keep_even = r.gen_range(0..=2);
        let keep_odd = r.gen_range(0..=2);
        let w = identity_chart_w(&amb, keep_even, keep_odd);
        let psi = random_poly_instance(&mut r, &src, &amb, keep_even);
        let report =
            check_transversal(&psi, &w, &PointSource::Grid(grid.clone()), TOL).unwrap();
        assert!(
            report.agreement,
            "criteria disagreed on a keep {keep_even}|{keep_odd} instance"
        );
        instances += 1;
        if !report.vacuous {
            nonvacuous += 1;
        }
    }
    assert!(instances >= 100, "battery shrank to {instances} instances");
    assert!(nonvacuous >= 50, "only {nonvacuous} instances had fiber points");
}

// ---------------------------------------------------------------------------
// 6. Purely even verdicts against an independent classical checker.
// ---------------------------------------------------------------------------

/// Hand-built even-only instance. `dcols` returns the Jacobian columns at a
/// point, derived by hand per instance, so the span test below shares nothing
/// with the library's differentiation or rank code.
struct EvenInstance {
    name: &'static str,
    source_dim: usize,
    ambient_dim: usize,
    images: &'static [&'static str],
    keep: usize,
    dcols: fn(&[Rational]) -> Vec<Vec<Rational>>,
    /// Known verdict across the sampled fiber; None when it varies per point.
    expected: Option<bool>,
    expect_empty_fiber: bool,
}

fn q(n: i64) -> Rational {
    Rational::from_int(n)
}

fn even_instances() -> Vec<EvenInstance> {
    fn inst(
        name: &'static str,
        source_dim: usize,
        ambient_dim: usize,
        images: &'static [&'static str],
        keep: usize,
        dcols: fn(&[Rational]) -> Vec<Vec<Rational>>,
        expected: Option<bool>,
    ) -> EvenInstance {
        EvenInstance {
            name,
            source_dim,
            ambient_dim,
            images,
            keep,
            dcols,
            expected,
            expect_empty_fiber: false,
        }
    }

    vec![
        inst("line_along_axis", 1, 2, &["x1", "0"], 1, |_| vec![vec![q(1), q(0)]], Some(false)),
        inst("line_across_axis", 1, 2, &["0", "x1"], 1, |_| vec![vec![q(0), q(1)]], Some(true)),
        inst("diagonal_line", 1, 2, &["x1", "x1"], 1, |_| vec![vec![q(1), q(1)]], Some(true)),
        inst(
            "parabola_tangent_to_axis",
            1,
            2,
            &["x1", "x1^2"],
            1,
            |x| vec![vec![q(1), &q(2) * &x[0]]],
            Some(false),
        ),
        inst(
            "parabola_crossing_axis",
            1,
            2,
            &["x1", "x1^2 - 1"],
            1,
            |x| vec![vec![q(1), &q(2) * &x[0]]],
            Some(true),
        ),
        inst(
            "cubic_flat_at_axis",
            1,
            2,
            &["x1", "x1^3"],
            1,
            |x| vec![vec![q(1), &q(3) * &(&x[0] * &x[0])]],
            Some(false),
        ),
        inst("axis_to_origin", 1, 2, &["x1", "0"], 0, |_| vec![vec![q(1), q(0)]], Some(false)),
        inst("crossing_to_origin", 1, 2, &["0", "x1"], 0, |_| vec![vec![q(0), q(1)]], Some(false)),
        inst(
            "identity_plane",
            2,
            2,
            &["x1", "x2"],
            1,
            |_| vec![vec![q(1), q(0)], vec![q(0), q(1)]],
            Some(true),
        ),
        inst(
            "fold_sheet",
            2,
            2,
            &["x1", "x2^2"],
            1,
            |x| vec![vec![q(1), q(0)], vec![q(0), &q(2) * &x[1]]],
            Some(false),
        ),
        inst(
            "shear_plane",
            2,
            2,
            &["x1 + x2", "x2"],
            1,
            |_| vec![vec![q(1), q(0)], vec![q(1), q(1)]],
            Some(true),
        ),
        inst(
            "plane_inside_hyperplane",
            2,
            3,
            &["x1", "x2", "0"],
            2,
            |_| vec![vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]],
            Some(false),
        ),
        inst(
            "graph_over_plane",
            2,
            3,
            &["x1", "x2", "x1 + x2"],
            2,
            |_| vec![vec![q(1), q(0), q(1)], vec![q(0), q(1), q(1)]],
            Some(true),
        ),
        inst(
            "paraboloid_touching_plane",
            2,
            3,
            &["x1", "x2", "x1^2 + x2^2"],
            2,
            |x| {
                vec![
                    vec![q(1), q(0), &q(2) * &x[0]],
                    vec![q(0), q(1), &q(2) * &x[1]],
                ]
            },
            Some(false),
        ),
        inst(
            "space_diagonal",
            1,
            3,
            &["x1", "x1", "x1"],
            2,
            |_| vec![vec![q(1), q(1), q(1)]],
            Some(true),
        ),
        inst(
            "line_inside_coordinate_plane",
            1,
            3,
            &["x1", "2*x1", "0"],
            2,
            |_| vec![vec![q(1), q(2), q(0)]],
            Some(false),
        ),
        inst(
            "squash_to_line",
            2,
            1,
            &["x1 + x2"],
            0,
            |_| vec![vec![q(1)], vec![q(1)]],
            Some(true),
        ),
        inst("constant_map", 1, 1, &["0"], 0, |_| vec![vec![q(0)]], Some(false)),
        inst("stretched_line", 1, 1, &["2*x1"], 0, |_| vec![vec![q(2)]], Some(true)),
        inst(
            "cusp_against_axis",
            1,
            2,
            &["x1^2", "x1^3"],
            1,
            |x| vec![vec![&q(2) * &x[0], &q(3) * &(&x[0] * &x[0])]],
            Some(false),
        ),
        inst(
            "sideways_crossing",
            1,
            2,
            &["x1^2 - 1", "x1"],
            1,
            |x| vec![vec![&q(2) * &x[0], q(1)]],
            Some(true),
        ),
        inst(
            "axes_pair",
            2,
            2,
            &["x1^2 - x2^2", "x1*x2"],
            1,
            |x| {
                vec![
                    vec![&q(2) * &x[0], x[1].clone()],
                    vec![&q(-2) * &x[1], x[0].clone()],
                ]
            },
            None,
        ),
        EvenInstance {
            name: "empty_fiber_curve",
            source_dim: 1,
            ambient_dim: 2,
            images: &["x1", "x1^2 + 1"],
            keep: 1,
            dcols: |x| vec![vec![q(1), &q(2) * &x[0]]],
            expected: Some(true),
            expect_empty_fiber: true,
        },
        inst(
            "tilted_graph_in_space",
            2,
            3,
            &["x1", "x2", "x1^2 - x2"],
            2,
            |x| {
                vec![
                    vec![q(1), q(0), &q(2) * &x[0]],
                    vec![q(0), q(1), q(-1)],
                ]
            },
            Some(true),
        ),
        inst(
            "bent_crossing",
            2,
            2,
            &["x1 + x2^2", "x2 + x1^2"],
            1,
            |x| {
                vec![
                    vec![q(1), &q(2) * &x[0]],
                    vec![&q(2) * &x[1], q(1)],
                ]
            },
            None,
        ),
    ]
}

/// The classical span test: df columns plus the kept coordinate directions
/// must fill the ambient tangent space.
fn classical_verdict(inst: &EvenInstance, coords: &[Rational]) -> bool {
    let d = inst.ambient_dim;
    let cols = (inst.dcols)(coords);
    assert_eq!(cols.len(), inst.source_dim);
    let mut rows = vec![vec![Rational::from_int(0); inst.source_dim + inst.keep]; d];
    for (j, col) in cols.iter().enumerate() {
        assert_eq!(col.len(), d, "{}: hand column has wrong length", inst.name);
        for (i, v) in col.iter().enumerate() {
            rows[i][j] = v.clone();
        }
    }
    for j in 0..inst.keep {
        rows[j][inst.source_dim + j] = Rational::from_int(1);
    }
    rank_oracle(rows) == d
}

fn even_domain(label: &str, prefix: &str, dim: usize) -> SuperDomain {
    let names: Vec<String> = (1..=dim).map(|i| format!("{prefix}{i}")).collect();
    let ctx = SuperContext::new(names, Vec::new()).unwrap();
    SuperDomain::new(label, ctx, None).unwrap()
}

#[test]
fn a06_even_only_verdicts_match_classical_checker() {
    let instances = even_instances();
    assert_eq!(instances.len(), 25);
    let mut compared = 0usize;
    for inst in &instances {
        let src = even_domain("X", "x", inst.source_dim);
        let amb = even_domain("Y", "y", inst.ambient_dim);
        let w = identity_chart_w(&amb, inst.keep, 0);
        let psi = morph("f", &src, &amb, inst.images, &[]);
        let names: Vec<String> = src.context().even_names().to_vec();
        let two = Rational::from_int(2);
        let bounds: Vec<(Rational, Rational)> =
            vec![(-two.clone(), two.clone()); inst.source_dim];
        let grid = GridSpec::uniform(&names, &bounds, 8).unwrap();
        let fiber = scan_preimage(&psi, &w, &grid, TOL).unwrap();

        if inst.expect_empty_fiber {
            assert!(fiber.is_empty(), "{}: expected an empty fiber", inst.name);
            let report =
                check_transversal(&psi, &w, &PointSource::Grid(grid.clone()), TOL).unwrap();
            assert!(report.vacuous && report.overall, "{}: not vacuous", inst.name);
            continue;
        }
        assert!(!fiber.is_empty(), "{}: no fiber points sampled", inst.name);

        for x in &fiber {
            let coords: Vec<Rational> =
                names.iter().map(|n| exact(x.get(n).unwrap())).collect();
            let lib = is_transversal_at(&psi, &w, x, TOL).unwrap().verdict;
            let oracle = classical_verdict(inst, &coords);
            assert!(
                lib == oracle,
                "{}: library said {lib}, classical checker said {oracle} at {x}",
                inst.name
            );
            if let Some(v) = inst.expected {
                assert!(lib == v, "{}: expected {v} at every fiber point", inst.name);
            }
            compared += 1;
        }
    }
    assert!(compared >= 40, "only {compared} fiber points compared");

    // Codimension transport on a transversal instance: the preimage of the
    // plane {y3 = 0} under a graph map has codimension exactly codim W.
    let src = even_domain("X", "x", 2);
    let amb = even_domain("Y", "y", 3);
    let w = identity_chart_w(&amb, 2, 0);
    let psi = morph("f", &src, &amb, &["x1", "x2", "x1 + x2"], &[]);
    let names: Vec<String> = src.context().even_names().to_vec();
    let two = Rational::from_int(2);
    let grid =
        GridSpec::uniform(&names, &[(-two.clone(), two.clone()), (-two.clone(), two)], 8).unwrap();
    let result = construct_preimage_affine(&psi, &w, Some(&grid), TOL).unwrap();
    assert_eq!(result.codim(), w.codim());
    assert_eq!(result.codim(), (1, 0));
    assert!(codim_check(&result, &w));
}

// ---------------------------------------------------------------------------
// 7. Affine preimage construction: exactness, codimension, scans.
// ---------------------------------------------------------------------------

fn assert_affine_instance(
    psi: &SuperMorphism,
    w: &Submanifold,
    grid: &GridSpec,
    what: &str,
) -> supertrans_core::PreimageResult {
    let result = construct_preimage_affine(psi, w, Some(grid), TOL).unwrap();
    assert!(!result.fallback(), "{what}: fell back to the submersion-only presentation");
    assert!(codim_check(&result, w), "{what}: codimension mismatch");
    for chart in result.charts() {
        assert!(chart.diagram_exact(), "{what}: inclusion square does not commute");
    }
    let points = scan_preimage(psi, w, grid, TOL).unwrap();
    for chart in result.charts() {
        for x in &points {
            for (name, expr) in chart.solved_even() {
                let lhs = x.get(name).unwrap();
                let rhs = expr.eval(x).unwrap();
                match (lhs, &rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => {
                        assert!((a - b).is_zero(), "{what}: scan point violates {name} exactly")
                    }
                    _ => assert!(
                        (lhs.to_f64() - rhs.to_f64()).abs() <= TOL,
                        "{what}: scan point violates {name}"
                    ),
                }
            }
        }
    }
    result
}

#[test]
fn a07_affine_preimages_are_exact_and_match_scans() {
    let mut r = rng(0xA07);
    let grid = scan_grid();
    let mut instances = 0usize;

    // The identity instance: the preimage of W under the identity is W itself,
    // presented by vanishing of the cut coordinates.
    let src = boxed_standard("X", 2, 2, 2);
    let psi = SuperMorphism::identity(&src);
    let w = identity_chart_w(&src, 1, 1);
    let result = assert_affine_instance(&psi, &w, &grid, "identity instance");
    assert_eq!(result.codim(), (1, 1));
    instances += 1;

    // The graph instance: x2 and e2 get solved in closed form.
    let amb = ambient_2_2();
    let psi = morph(
        "psi",
        &src,
        &amb,
        &["x1", "x2 + x1^2"],
        &["e1", "x1*e1 + e2"],
    );
    let w = identity_chart_w(&amb, 1, 1);
    let result = assert_affine_instance(&psi, &w, &grid, "graph instance");
    let chart = &result.charts()[0];
    assert_eq!(chart.solved_even().len(), 1);
    assert_eq!(chart.solved_even()[0].0, "x2");
    assert_eq!(chart.solved_even()[0].1.to_string(), "-x1^2");
    assert_eq!(chart.solved_odd().len(), 1);
    assert_eq!(chart.solved_odd()[0].0, "e2");
    assert_eq!(chart.solved_odd()[0].1.to_string(), "-x1*e1");
    instances += 1;

    // Random coordinate-affine battery.
    let evens: Vec<String> = src.context().even_names().to_vec();
    let e1 = SuperFunction::odd_var(src.context(), "e1").unwrap();
    let e2 = SuperFunction::odd_var(src.context(), "e2").unwrap();
    let mut attempts = 0;
    while instances < 22 && attempts < 200 {
        attempts += 1;
        let kept = poly(&mut r, &evens, 3, 1, 0);
        let (c1, c2) = loop {
            let c1 = rat(&mut r);
            let c2 = rat(&mut r);
            if !c1.is_zero() || !c2.is_zero() {
                break (c1, c2);
            }
        };
        let cut = SmoothExpr::var("x1")
            .scale(&c1)
            .add(&SmoothExpr::var("x2").scale(&c2));
        let (u, v) = loop {
            let u = rat(&mut r);
            let v = rat(&mut r);
            if !u.is_zero() || !v.is_zero() {
                break (u, v);
            }
        };
        let kept_odd = {
            let a = SuperFunction::from_smooth(src.context(), poly(&mut r, &evens, 2, 1, 0))
                .unwrap();
            let b = SuperFunction::from_smooth(src.context(), poly(&mut r, &evens, 2, 1, 0))
                .unwrap();
            a.mul(&e1).unwrap().add(&b.mul(&e2).unwrap()).unwrap()
        };
        let cut_odd = e1.scale(&u).add(&e2.scale(&v)).unwrap();
        let psi = make_morphism(
            "psi",
            src.clone(),
            amb.clone(),
            vec![
                SuperFunction::from_smooth(src.context(), kept).unwrap(),
                SuperFunction::from_smooth(src.context(), cut).unwrap(),
            ],
            vec![kept_odd, cut_odd],
        )
        .unwrap();
        let w = identity_chart_w(&amb, 1, 1);
        match construct_preimage_affine(&psi, &w, Some(&grid), TOL) {
            Ok(_) => {
                let result = assert_affine_instance(&psi, &w, &grid, "random affine instance");
                assert_eq!(result.codim(), (1, 1));
                assert_eq!(result.charts()[0].solved_even().len(), 1);
                assert_eq!(result.charts()[0].solved_odd().len(), 1);
                instances += 1;
            }
            Err(Error::NotTransversal(_)) => continue,
            Err(other) => panic!("unexpected failure: {other}"),
        }
    }
    assert!(instances >= 20, "battery shrank to {instances} instances");
}

// ---------------------------------------------------------------------------
// 8. Positive transversality forces fiberwise submersions.
// ---------------------------------------------------------------------------

#[test]
fn a08_positive_transversality_implies_fiber_submersions() {
    let mut r = rng(0xA08);
    let src = SuperDomain::standard("X", 2, 2);
    let amb = ambient_2_2();
    let grid = scan_grid();
    let mut positives = 0usize;
    for _ in 0..60 {
        let keep_even = r.gen_range(0..=2);
        let keep_odd = r.gen_range(0..=2);
        let w = identity_chart_w(&amb, keep_even, keep_odd);
        let psi = random_poly_instance(&mut r, &src, &amb, keep_even);
        let report =
            check_transversal(&psi, &w, &PointSource::Grid(grid.clone()), TOL).unwrap();
        assert!(report.agreement);
        if !report.overall || report.vacuous {
            continue;
        }
        positives += 1;
        let fiber: Vec<EvenPoint> = report.points.iter().map(|rec| rec.point.clone()).collect();
        for ci in 0..w.charts().len() {
            let ds = defining_submersion(&psi, &w, ci, Some(&grid), TOL).unwrap();
            let evidence = verify_submersion_on_fiber(&ds, &fiber, TOL).unwrap();
            assert!(
                evidence.all_pass,
                "defining map fails to submerge at {:?}",
                evidence.witness
            );
        }
    }
    assert!(positives >= 15, "only {positives} positive instances sampled");
}

// ---------------------------------------------------------------------------
// 9. Two-chart gluing and the corrupted negative control.
// ---------------------------------------------------------------------------

fn arc_chart(ambient: &SuperDomain, name: &str, lo: i64, hi: i64, flip: bool) -> AdaptedChart {
    let ctx = SuperDomain::standard("C", 2, 0).context().clone();
    let chart_dom = SuperDomain::new(
        &format!("{name}C"),
        ctx,
        Some(vec![
            (Rational::from_int(lo), Rational::from_int(hi)),
            (Rational::from_int(-6), Rational::from_int(6)),
        ]),
    )
    .unwrap();
    let (cut, back) = if flip {
        ("x2 + x1^2", "x2 - x1^2")
    } else {
        ("x2 - x1^2", "x2 + x1^2")
    };
    let map = morph(name, ambient, &chart_dom, &["x1", cut], &[]);
    let inverse = morph(&format!("{name}_inv"), &chart_dom, ambient, &["x1", back], &[]);
    AdaptedChart::new(name, ambient.clone(), map, inverse, 1, 0, TOL).unwrap()
}

fn parabola_point(t: Rational) -> EvenPoint {
    let sq = &t * &t;
    EvenPoint::from_pairs([
        ("x1".to_string(), Scalar::Exact(t)),
        ("x2".to_string(), Scalar::Exact(sq)),
    ])
}

#[test]
fn a09_arc_charts_glue_and_corruption_is_caught() {
    let ctx = SuperDomain::standard("A", 2, 0).context().clone();
    let ambient = SuperDomain::new(
        "A",
        ctx,
        Some(vec![
            (Rational::from_int(-2), Rational::from_int(2)),
            (Rational::from_int(-1), Rational::from_int(5)),
        ]),
    )
    .unwrap();
    let psi = SuperMorphism::identity(&ambient);
    let names: Vec<String> = vec!["x1".into(), "x2".into()];
    let grid = GridSpec::uniform(
        &names,
        &[
            (Rational::from_int(-2), Rational::from_int(2)),
            (Rational::from_int(-1), Rational::from_int(5)),
        ],
        6,
    )
    .unwrap();

    let w = Submanifold::new(
        "W",
        ambient.clone(),
        vec![arc_chart(&ambient, "left", -2, 1, false), arc_chart(&ambient, "right", -1, 2, false)],
    )
    .unwrap();
    let result = construct_preimage_affine(&psi, &w, Some(&grid), TOL).unwrap();
    assert!(!result.fallback());
    assert_eq!(result.charts().len(), 2);

    // Eight samples spread over the overlap x1 in [-1, 1] of the two arcs.
    let samples: Vec<EvenPoint> = [
        Rational::from_int(-1),
        Rational::new(-3, 4).unwrap(),
        Rational::new(-1, 2).unwrap(),
        Rational::new(-1, 4).unwrap(),
        Rational::new(1, 4).unwrap(),
        Rational::new(1, 2).unwrap(),
        Rational::new(3, 4).unwrap(),
        Rational::from_int(1),
    ]
    .into_iter()
    .map(parabola_point)
    .collect();
    assert_eq!(samples.len(), 8);
    let evidence = overlap_consistency(&result, &samples, TOL).unwrap();
    assert!(evidence.all_pass);
    assert_eq!(evidence.pairs.len(), 2);
    for pair in &evidence.pairs {
        assert_eq!(pair.samples.len(), 8);
        assert!(pair.witness.is_none());
    }

    // Negative control: the right chart cuts out the mirrored locus, so a
    // genuine parabola point must be rejected, naming the offending point.
    let w_bad = Submanifold::new(
        "W",
        ambient.clone(),
        vec![arc_chart(&ambient, "left", -2, 1, false), arc_chart(&ambient, "right", -1, 2, true)],
    )
    .unwrap();
    let result_bad = construct_preimage_affine(&psi, &w_bad, Some(&grid), TOL).unwrap();
    assert_eq!(result_bad.charts().len(), 2);
    let err = overlap_consistency(&result_bad, &[parabola_point(Rational::from_int(1))], TOL)
        .unwrap_err();
    match err {
        Error::PointNotOnFiber(msg) => {
            assert!(msg.contains("x1"), "witness does not name the point: {msg}")
        }
        other => panic!("expected a fiber violation with a witness, got {other}"),
    }
}

// ---------------------------------------------------------------------------
// 10. CLI determinism and scene round-trips.
// ---------------------------------------------------------------------------

#[test]
fn a10_cli_reports_are_deterministic_and_scenes_round_trip() {
    for row in common::MATRIX {
        let args = common::matrix_args(row);
        let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let (stdout, exit) = common::run(&refs);
        assert_eq!(exit, row.1, "{}: wrong exit code", row.0);
        assert_eq!(stdout, common::golden(row.0), "{}: drifted from frozen report", row.0);
        for _ in 0..2 {
            let (again, exit_again) = common::run(&refs);
            assert_eq!(exit_again, exit, "{}: exit code changed between runs", row.0);
            assert_eq!(again, stdout, "{}: report bytes changed between runs", row.0);
        }
    }

    for name in common::PARSEABLE_SCENES {
        let text = std::fs::read_to_string(common::corpus(name)).unwrap();
        let scene = supertrans_cli::parse_scene(&text).unwrap();
        let printed = supertrans_cli::print_scene(&scene);
        let reparsed = supertrans_cli::parse_scene(&printed)
            .unwrap_or_else(|e| panic!("{name}: canonical form failed to parse: {e}"));
        assert_eq!(supertrans_cli::print_scene(&reparsed), printed, "{name}: unstable printer");
    }
}
