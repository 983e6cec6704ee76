//! Constructive preimages of adapted submanifolds.
//!
//! Given a transversal morphism `psi: X -> Y` and a submanifold `W` of `Y`
//! presented by adapted charts, this module builds the preimage `Z = psi^{-1}(W)`
//! as explicit chart data: a domain of the complementary dimension, an inclusion
//! `j: Z -> X`, and a corestriction `psi_hat: Z -> W` making the obvious square
//! commute.  The construction is carried out symbolically, so it only succeeds
//! when the defining equations can be solved in closed form; the supported class
//! is coordinate-affine systems (see [`construct_preimage_affine`]).  Everything
//! else falls back to the defining-submersion presentation, which exists for any
//! transversal morphism.

use std::collections::BTreeMap;

use crate::calculus::{classify, Classification};
use crate::error::{Error, Result};
use crate::geometry::{make_morphism, SuperDomain, SuperMorphism};
use crate::grassmann::{SuperContext, SuperFunction};
use crate::interval::{eval_interval, Interval};
use crate::matrix::{rank_exact, Mat};
use crate::point::EvenPoint;
use crate::rational::Rational;
use crate::scalar::Scalar;
use crate::symexpr::{Generator, SmoothExpr, Zeroness};
use crate::transversality::{
    check_transversal, scan_preimage, AdaptedChart, GridSpec, PointSource, Submanifold,
};

/// Shrink factors tried when certifying a validity box for a defining
/// submersion; the first factor keeps the full source box.
const SHRINK_FACTORS: [(i64, i64); 5] = [(1, 1), (1, 2), (1, 4), (1, 8), (1, 16)];

/// Composite `g = Pr . phi` for an adapted chart `phi: V -> C`, where `Pr`
/// projects the chart codomain onto its last `r` even and `s` odd coordinates.
/// The result is a submersion `V -> R^{r|s}` whose zero locus is exactly the
/// piece of the submanifold seen by the chart.
pub fn projection_after_chart(chart: &AdaptedChart) -> Result<SuperMorphism> {
    let codomain = chart.map().target().clone();
    let ctx = codomain.context().clone();
    let (p, q) = (chart.kept_even(), chart.kept_odd());
    let (r, s) = chart.codim();

    let target = SuperDomain::standard(&format!("cut[{}]", chart.name()), r, s);
    let even_images: Vec<SuperFunction> = ctx.even_names()[p..]
        .iter()
        .map(|name| SuperFunction::even_var(&ctx, name))
        .collect::<Result<_>>()?;
    let odd_images: Vec<SuperFunction> = ctx.odd_names()[q..]
        .iter()
        .map(|name| SuperFunction::odd_var(&ctx, name))
        .collect::<Result<_>>()?;
    let pr = make_morphism(
        &format!("pr[{}]", chart.name()),
        codomain,
        target,
        even_images,
        odd_images,
    )?;
    let g = pr.compose(chart.map())?;

    // A certified chart makes g a submersion automatically; spot-check a small
    // sample anyway so a corrupted certificate cannot slip through.
    let names: Vec<String> = g.source().context().even_names().to_vec();
    let sample_bounds: Vec<(Rational, Rational)> = match g.source().bounds() {
        Some(b) => b.to_vec(),
        None => names
            .iter()
            .map(|_| (Rational::from_int(-1), Rational::from_int(1)))
            .collect(),
    };
    if !names.is_empty() {
        let grid = GridSpec::uniform(&names, &sample_bounds, 2)?;
        for point in grid.points()? {
            let class = classify(&g, &point, crate::scalar::DEFAULT_TOLERANCE)?;
            if !class.is_submersion() {
                return Err(Error::Internal(format!(
                    "projection after certified chart {} fails to be a submersion at {}",
                    chart.name(),
                    point
                )));
            }
        }
    } else if r > 0 {
        return Err(Error::Internal(format!(
            "chart {} cuts {} even equations out of a 0-dimensional body",
            chart.name(),
            r
        )));
    }
    Ok(g)
}

/// The local defining-submersion presentation of a preimage: near the chart
/// `phi` the set `psi^{-1}(W)` is the zero locus of `psi_g = g . psi`.
#[derive(Debug, Clone)]
pub struct DefiningSubmersion {
    chart_index: usize,
    chart_name: String,
    psi_g: SuperMorphism,
    validity_box: Vec<(Rational, Rational)>,
    validity_certified: bool,
    fiber_points: Vec<EvenPoint>,
}

impl DefiningSubmersion {
    /// Index of the chart this presentation belongs to.
    pub fn chart_index(&self) -> usize {
        self.chart_index
    }

    /// Name of the chart this presentation belongs to.
    pub fn chart_name(&self) -> &str {
        &self.chart_name
    }

    /// The composite `g . psi` whose zero locus presents the preimage locally.
    pub fn map(&self) -> &SuperMorphism {
        &self.psi_g
    }

    /// Box in the source even coordinates on which the presentation was
    /// checked.  When [`Self::validity_certified`] is true, interval
    /// arithmetic proves the reduced morphism maps this box into the chart
    /// box, so the zero locus inside it captures the full preimage there.
    pub fn validity_box(&self) -> &[(Rational, Rational)] {
        &self.validity_box
    }

    /// Whether the validity box carries an interval-arithmetic certificate.
    pub fn validity_certified(&self) -> bool {
        self.validity_certified
    }

    /// Fiber points discovered by scanning this chart alone.
    pub fn fiber_points(&self) -> &[EvenPoint] {
        &self.fiber_points
    }
}

/// Build the defining-submersion presentation of `psi^{-1}(W)` for one chart.
///
/// The grid controls the fiber scan; when absent it is derived from the source
/// box with eight divisions per axis.  An unbounded source needs an explicit
/// grid.
pub fn defining_submersion(
    psi: &SuperMorphism,
    w: &Submanifold,
    chart_index: usize,
    grid: Option<&GridSpec>,
    tol: f64,
) -> Result<DefiningSubmersion> {
    let chart = w
        .charts()
        .get(chart_index)
        .ok_or_else(|| Error::Invalid(format!("no chart with index {chart_index}")))?;
    let g = projection_after_chart(chart)?;
    let psi_g = g.compose(psi)?;

    let grid_spec = derive_grid(psi, grid)?;
    let single = Submanifold::new(
        &format!("{}[{}]", w.name(), chart.name()),
        w.ambient().clone(),
        vec![chart.clone()],
    )?;
    let fiber_points = scan_preimage(psi, &single, &grid_spec, tol)?;

    let (validity_box, validity_certified) = certify_validity_box(psi, chart, tol)?;

    Ok(DefiningSubmersion {
        chart_index,
        chart_name: chart.name().to_string(),
        psi_g,
        validity_box,
        validity_certified,
        fiber_points,
    })
}

/// Evidence that a defining submersion really is submersive along its fiber.
#[derive(Debug, Clone)]
pub struct SubmersionEvidence {
    /// Per-point classification with the submersion verdict.
    pub records: Vec<(EvenPoint, Classification, bool)>,
    /// True when every sampled point passed; an empty sample passes vacuously.
    pub all_pass: bool,
    /// First failing point, if any.
    pub witness: Option<EvenPoint>,
}

/// Check that `ds.map()` is a submersion at each given fiber point.
///
/// Points are first verified to lie on the fiber (every reduced component of
/// the composite vanishes within `tol`); a point that does not is an input
/// error, not a failed verdict.
pub fn verify_submersion_on_fiber(
    ds: &DefiningSubmersion,
    points: &[EvenPoint],
    tol: f64,
) -> Result<SubmersionEvidence> {
    let mut records = Vec::new();
    let mut witness = None;
    for point in points {
        let values = ds.psi_g.reduced_map_eval_unchecked(point)?;
        for (_, value) in values.iter() {
            let on = match value {
                Scalar::Exact(r) => r.is_zero(),
                Scalar::Approx(v) => v.abs() <= tol,
            };
            if !on {
                return Err(Error::PointNotOnFiber(format!(
                    "point {point} is not on the zero locus of {}",
                    ds.psi_g.name()
                )));
            }
        }
        let class = classify(&ds.psi_g, point, tol)?;
        let pass = class.is_submersion();
        if !pass && witness.is_none() {
            witness = Some(point.clone());
        }
        records.push((point.clone(), class, pass));
    }
    let all_pass = witness.is_none();
    Ok(SubmersionEvidence {
        records,
        all_pass,
        witness,
    })
}

/// One constructed chart of the preimage `Z = psi^{-1}(W)`.
#[derive(Debug, Clone)]
pub struct PreimageChart {
    chart_index: usize,
    chart_name: String,
    z_domain: SuperDomain,
    inclusion: SuperMorphism,
    corestriction: SuperMorphism,
    w_inclusion: SuperMorphism,
    solved_even: Vec<(String, SmoothExpr)>,
    solved_odd: Vec<(String, SuperFunction)>,
    diagram_exact: bool,
}

impl PreimageChart {
    /// Index of the ambient chart of `W` this preimage chart came from.
    pub fn chart_index(&self) -> usize {
        self.chart_index
    }

    /// Name of the ambient chart of `W` this preimage chart came from.
    pub fn chart_name(&self) -> &str {
        &self.chart_name
    }

    /// The chart domain of `Z`: the kept source coordinates with the source
    /// box restricted to them.
    pub fn domain(&self) -> &SuperDomain {
        &self.z_domain
    }

    /// The inclusion `j: Z -> X`.  Kept coordinates pass through; solved
    /// coordinates are replaced by their solved expressions.
    pub fn inclusion(&self) -> &SuperMorphism {
        &self.inclusion
    }

    /// The corestriction `psi_hat: Z -> W`, expressed in the kept coordinates
    /// of the ambient chart.
    pub fn corestriction(&self) -> &SuperMorphism {
        &self.corestriction
    }

    /// The inclusion `i: W -> Y` of the chart piece of `W`, expressed on the
    /// same kept-coordinate model that [`Self::corestriction`] maps into.
    pub fn w_inclusion(&self) -> &SuperMorphism {
        &self.w_inclusion
    }

    /// Solved even coordinates as `(name, expression in kept evens)`.
    pub fn solved_even(&self) -> &[(String, SmoothExpr)] {
        &self.solved_even
    }

    /// Solved odd coordinates as `(name, odd function on Z)`.
    pub fn solved_odd(&self) -> &[(String, SuperFunction)] {
        &self.solved_odd
    }

    /// True when `i . psi_hat = psi . j` was verified by exact normal forms;
    /// false when transcendental generators forced the randomized zero screen.
    pub fn diagram_exact(&self) -> bool {
        self.diagram_exact
    }
}

/// Result of constructing `psi^{-1}(W)`.
#[derive(Debug, Clone)]
pub struct PreimageResult {
    submersions: Vec<DefiningSubmersion>,
    evidence: Vec<SubmersionEvidence>,
    charts: Vec<PreimageChart>,
    codim: (usize, usize),
    fallback: bool,
    fallback_reason: Option<String>,
}

impl PreimageResult {
    /// Defining-submersion presentations, one per chart of `W`.
    pub fn submersions(&self) -> &[DefiningSubmersion] {
        &self.submersions
    }

    /// Submersion evidence aligned with [`Self::submersions`].
    pub fn evidence(&self) -> &[SubmersionEvidence] {
        &self.evidence
    }

    /// Constructed preimage charts; empty or partial in fallback mode.
    pub fn charts(&self) -> &[PreimageChart] {
        &self.charts
    }

    /// Codimension `(r, s)` of the preimage, equal to that of `W`.
    pub fn codim(&self) -> (usize, usize) {
        self.codim
    }

    /// True when at least one chart could not be solved in closed form and
    /// only the defining-submersion presentation is available for it.
    pub fn fallback(&self) -> bool {
        self.fallback
    }

    /// Why the construction fell back, when it did.
    pub fn fallback_reason(&self) -> Option<&str> {
        self.fallback_reason.as_deref()
    }
}

/// Construct the preimage `Z = psi^{-1}(W)` in closed form.
///
/// Requires `psi` transversal to `W` (checked; rejected otherwise) and the
/// defining systems coordinate-affine: after composing with each chart, the
/// even equations must be affine in some `r` source even coordinates with a
/// constant invertible coefficient block, and the odd equations must be linear
/// in the odd generators with a constant invertible block on some `s` of them.
/// Charts outside this class keep their defining-submersion presentation and
/// the result is flagged as a fallback.
///
/// The grid seeds both the transversality check and the fiber scans; when
/// absent it is derived from the source box with eight divisions per axis.
pub fn construct_preimage_affine(
    psi: &SuperMorphism,
    w: &Submanifold,
    grid: Option<&GridSpec>,
    tol: f64,
) -> Result<PreimageResult> {
    let grid_spec = derive_grid(psi, grid)?;
    let report = check_transversal(psi, w, &PointSource::Grid(grid_spec.clone()), tol)?;
    if !report.agreement {
        return Err(Error::Internal(
            "rank criterion and projection criterion disagree on transversality".to_string(),
        ));
    }
    if !report.overall {
        let witness = report
            .points
            .iter()
            .find(|rec| !rec.direct)
            .map(|rec| rec.point.to_string())
            .unwrap_or_else(|| "unknown point".to_string());
        return Err(Error::NotTransversal(format!(
            "{} is not transversal to {} at {}",
            psi.name(),
            w.name(),
            witness
        )));
    }

    let (r, s) = w.codim();
    let source = psi.source();
    if source.dim().even < r || source.dim().odd < s {
        return Err(Error::NotTransversal(format!(
            "source dimension {} cannot meet codimension {r}|{s} transversally with nonempty fiber",
            source.dim()
        )));
    }

    let mut submersions = Vec::new();
    let mut evidence = Vec::new();
    let mut charts = Vec::new();
    let mut fallback_reason: Option<String> = None;

    for (index, _) in w.charts().iter().enumerate() {
        let ds = defining_submersion(psi, w, index, Some(&grid_spec), tol)?;
        let ev = verify_submersion_on_fiber(&ds, ds.fiber_points(), tol)?;
        if let Some(bad) = &ev.witness {
            return Err(Error::Internal(format!(
                "transversal composite fails to be a submersion on its own fiber at {bad}"
            )));
        }
        match solve_affine_chart(psi, w, index, &ds, tol) {
            Ok(chart) => charts.push(chart),
            Err(SolveFailure::NotAffine(reason)) => {
                if fallback_reason.is_none() {
                    fallback_reason = Some(reason);
                }
            }
            Err(SolveFailure::Hard(err)) => return Err(err),
        }
        submersions.push(ds);
        evidence.push(ev);
    }

    let fallback = charts.len() < w.charts().len();
    Ok(PreimageResult {
        submersions,
        evidence,
        charts,
        codim: (r, s),
        fallback,
        fallback_reason,
    })
}

/// Check that every constructed chart has the expected dimension drop:
/// `dim X - dim Z` must equal the codimension of `W` in `Y`, in both parities.
pub fn codim_check(result: &PreimageResult, w: &Submanifold) -> bool {
    let ambient_drop = (
        w.ambient().dim().even - w.dim().even,
        w.ambient().dim().odd - w.dim().odd,
    );
    if ambient_drop != result.codim() {
        return false;
    }
    result.charts().iter().all(|chart| {
        let x = chart.inclusion().target().dim();
        let z = chart.domain().dim();
        (x.even - z.even, x.odd - z.odd) == result.codim()
    })
}

/// Evidence from comparing two preimage charts on overlap samples.
#[derive(Debug, Clone)]
pub struct OverlapPair {
    /// Indices into [`PreimageResult::charts`] of the compared pair.
    pub charts: (usize, usize),
    /// Per-sample verdicts in input order.
    pub samples: Vec<(EvenPoint, bool)>,
    /// True when every sample agreed.
    pub pass: bool,
    /// First failing sample, if any.
    pub witness: Option<EvenPoint>,
}

/// Evidence that the constructed charts glue: on each overlap sample the two
/// inclusions agree through the transition map.
#[derive(Debug, Clone)]
pub struct OverlapEvidence {
    /// One entry per ordered pair of constructed charts.
    pub pairs: Vec<OverlapPair>,
    /// Conjunction over all pairs.
    pub all_pass: bool,
}

/// Verify that the charts of a constructed preimage agree on overlaps.
///
/// Samples are points of `X` (reduced) expected to lie on both chart
/// presentations; each is checked against the solved equations of both charts
/// first, and rejected as an input error if it lies on only one.  For every
/// ordered pair `(a, b)` the transition `f: Z_a -> Z_b` is formed by reading
/// off `b`'s coordinates through `a`'s inclusion, and the composite
/// `j_b . f` is compared against `j_a` coefficient-wise at each sample.
pub fn overlap_consistency(
    result: &PreimageResult,
    samples: &[EvenPoint],
    tol: f64,
) -> Result<OverlapEvidence> {
    let charts = result.charts();
    if charts.len() < 2 {
        return Err(Error::Invalid(
            "overlap consistency needs at least two constructed charts".to_string(),
        ));
    }

    let mut pairs = Vec::new();
    for a in 0..charts.len() {
        for b in 0..charts.len() {
            if a == b {
                continue;
            }
            let pair = check_overlap_pair(&charts[a], &charts[b], (a, b), samples, tol)?;
            pairs.push(pair);
        }
    }
    let all_pass = pairs.iter().all(|p| p.pass);
    Ok(OverlapEvidence { pairs, all_pass })
}

fn check_overlap_pair(
    chart_a: &PreimageChart,
    chart_b: &PreimageChart,
    indices: (usize, usize),
    samples: &[EvenPoint],
    tol: f64,
) -> Result<OverlapPair> {
    // Transition f: Z_a -> Z_b.  Each coordinate of Z_b names a source
    // coordinate of X, so its pullback under f is that coordinate's image
    // under j_a, re-read on the Z_a context.
    let ctx_b = chart_b.domain().context();
    let x_ctx = chart_a.inclusion().target().context();
    let mut even_images = Vec::new();
    for name in ctx_b.even_names() {
        let pos = x_ctx
            .even_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::Internal(format!("chart coordinate {name} missing from source"))
            })?;
        even_images.push(chart_a.inclusion().even_images()[pos].clone());
    }
    let mut odd_images = Vec::new();
    for name in ctx_b.odd_names() {
        let pos = x_ctx
            .odd_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::Internal(format!("chart coordinate {name} missing from source"))
            })?;
        odd_images.push(chart_a.inclusion().odd_images()[pos].clone());
    }
    let transition = make_morphism(
        &format!("glue[{}->{}]", chart_a.chart_name(), chart_b.chart_name()),
        chart_a.domain().clone(),
        chart_b.domain().clone(),
        even_images,
        odd_images,
    )?;
    let through_b = chart_b.inclusion().compose(&transition)?;

    let mut sample_records = Vec::new();
    let mut witness = None;
    for sample in samples {
        require_on_chart(chart_a, sample, tol)?;
        require_on_chart(chart_b, sample, tol)?;
        let restricted = restrict_point(sample, chart_a.domain())?;
        let mut ok = true;
        for (left, right) in through_b
            .even_images()
            .iter()
            .zip(chart_a.inclusion().even_images())
            .chain(
                through_b
                    .odd_images()
                    .iter()
                    .zip(chart_a.inclusion().odd_images()),
            )
        {
            let diff = left.sub(right)?;
            if !coefficients_vanish_at(&diff, &restricted, tol)? {
                ok = false;
                break;
            }
        }
        if !ok && witness.is_none() {
            witness = Some(sample.clone());
        }
        sample_records.push((sample.clone(), ok));
    }
    let pass = witness.is_none();
    Ok(OverlapPair {
        charts: indices,
        samples: sample_records,
        pass,
        witness,
    })
}

/// Reject a sample that does not satisfy a chart's solved even equations.
fn require_on_chart(chart: &PreimageChart, sample: &EvenPoint, tol: f64) -> Result<()> {
    for (name, expr) in chart.solved_even() {
        let actual = sample
            .get(name)
            .ok_or_else(|| Error::MissingBinding(name.clone()))?;
        let expected = expr.eval(sample)?;
        let diff = actual.sub(&expected);
        let on = match diff {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx(v) => v.abs() <= tol,
        };
        if !on {
            return Err(Error::PointNotOnFiber(format!(
                "sample {sample} violates {name} = {expr} for chart {}",
                chart.chart_name()
            )));
        }
    }
    Ok(())
}

fn restrict_point(sample: &EvenPoint, domain: &SuperDomain) -> Result<EvenPoint> {
    let mut point = EvenPoint::new();
    for name in domain.context().even_names() {
        let value = sample
            .get(name)
            .ok_or_else(|| Error::MissingBinding(name.clone()))?;
        point.insert(name.clone(), value.clone());
    }
    Ok(point)
}

/// Whether every odd-monomial coefficient of `f` vanishes at `point`.
fn coefficients_vanish_at(f: &SuperFunction, point: &EvenPoint, tol: f64) -> Result<bool> {
    for (_, coeff) in f.terms() {
        let value = coeff.eval(point)?;
        let zero = match value {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx(v) => v.abs() <= tol,
        };
        if !zero {
            return Ok(false);
        }
    }
    Ok(true)
}

enum SolveFailure {
    NotAffine(String),
    Hard(Error),
}

impl From<Error> for SolveFailure {
    fn from(err: Error) -> Self {
        SolveFailure::Hard(err)
    }
}

fn solve_affine_chart(
    psi: &SuperMorphism,
    w: &Submanifold,
    chart_index: usize,
    ds: &DefiningSubmersion,
    tol: f64,
) -> std::result::Result<PreimageChart, SolveFailure> {
    let chart = &w.charts()[chart_index];
    let source = psi.source();
    let x_ctx = source.context().clone();
    let (r, s) = chart.codim();
    let system = ds.map();

    // Even sector: each defining equation must be a plain function of the
    // even coordinates, affine in the coordinates we are going to solve for.
    let mut even_eqs = Vec::with_capacity(r);
    for (k, img) in system.even_images().iter().enumerate() {
        if !img.nilpotent_part().is_zero() {
            return Err(SolveFailure::NotAffine(format!(
                "chart {}: even equation {k} has odd-generator terms",
                chart.name()
            )));
        }
        even_eqs.push(img.reduce());
    }

    let even_names = x_ctx.even_names().to_vec();
    let eligible = affine_eligibility(&even_eqs, &even_names);
    let coeffs = linear_coefficients(&even_eqs, &even_names);
    let solved_even_idx = choose_solved_subset(&eligible, &coeffs, r).ok_or_else(|| {
        SolveFailure::NotAffine(format!(
            "chart {}: no {r} even coordinates carry a constant invertible block",
            chart.name()
        ))
    })?;

    // Odd sector: equations must be linear in the odd generators, with a
    // constant invertible block on the coordinates to be solved.
    let odd_names = x_ctx.odd_names().to_vec();
    let mut odd_coeffs: Vec<BTreeMap<usize, SmoothExpr>> = Vec::with_capacity(s);
    for (j, img) in system.odd_images().iter().enumerate() {
        let mut row = BTreeMap::new();
        for (mono, coeff) in img.terms() {
            if mono.degree() != 1 {
                return Err(SolveFailure::NotAffine(format!(
                    "chart {}: odd equation {j} has degree-{} terms",
                    chart.name(),
                    mono.degree()
                )));
            }
            let idx = mono
                .indices()
                .next()
                .expect("degree-1 monomial has an index");
            row.insert(idx, coeff.clone());
        }
        odd_coeffs.push(row);
    }
    let odd_constant: Vec<bool> = (0..odd_names.len())
        .map(|l| {
            odd_coeffs
                .iter()
                .all(|row| row.get(&l).map_or(true, |c| c.as_constant().is_some()))
        })
        .collect();
    let odd_matrix = Mat::from_fn(odd_coeffs.len(), odd_names.len(), |j, l| {
        odd_coeffs[j]
            .get(&l)
            .and_then(SmoothExpr::as_constant)
            .unwrap_or_else(Rational::zero)
    });
    let solved_odd_idx = choose_solved_subset(&odd_constant, &odd_matrix, s).ok_or_else(|| {
        SolveFailure::NotAffine(format!(
            "chart {}: no {s} odd coordinates carry a constant invertible block",
            chart.name()
        ))
    })?;

    // Kept coordinates, in source order, become the Z chart.
    let kept_even: Vec<String> = even_names
        .iter()
        .enumerate()
        .filter(|(i, _)| !solved_even_idx.contains(i))
        .map(|(_, n)| n.clone())
        .collect();
    let kept_odd: Vec<String> = odd_names
        .iter()
        .enumerate()
        .filter(|(i, _)| !solved_odd_idx.contains(i))
        .map(|(_, n)| n.clone())
        .collect();
    let z_ctx = SuperContext::new(kept_even.clone(), kept_odd.clone())?;
    let z_bounds = source.bounds().map(|bounds| {
        even_names
            .iter()
            .zip(bounds)
            .filter(|(n, _)| kept_even.contains(n))
            .map(|(_, b)| b.clone())
            .collect::<Vec<_>>()
    });
    let z_domain = SuperDomain::new(
        &format!("pre[{}]", chart.name()),
        z_ctx.clone(),
        z_bounds,
    )?;

    // Solve the even system A*sigma = -(residual in kept coordinates).
    let a = Mat::from_fn(r, r, |k, j| coeffs.at(k, solved_even_idx[j]).clone());
    let mut residuals = Vec::with_capacity(r);
    for (k, eq) in even_eqs.iter().enumerate() {
        let mut res = eq.clone();
        for (j, &idx) in solved_even_idx.iter().enumerate() {
            let linear = SmoothExpr::var(&even_names[idx]).scale(&a.at(k, j).clone());
            res = res.sub(&linear);
        }
        if res.vars().iter().any(|v| {
            solved_even_idx
                .iter()
                .any(|&idx| even_names[idx] == *v)
        }) {
            return Err(SolveFailure::NotAffine(format!(
                "chart {}: even equation {k} is not affine in the solved coordinates",
                chart.name()
            )));
        }
        residuals.push(SuperFunction::from_smooth(&z_ctx, res.neg())?);
    }
    let sigma_super = solve_linear_super(&a, residuals)?;
    let sigma: Vec<SmoothExpr> = sigma_super.iter().map(SuperFunction::reduce).collect();

    // Images of the X even coordinates on Z, needed both for j and for
    // substituting the solved evens into odd-sector coefficients.
    let mut x_even_on_z = Vec::with_capacity(even_names.len());
    for (i, name) in even_names.iter().enumerate() {
        if let Some(j) = solved_even_idx.iter().position(|&idx| idx == i) {
            x_even_on_z.push(sigma_super[j].clone());
        } else {
            x_even_on_z.push(SuperFunction::even_var(&z_ctx, name)?);
        }
    }
    let zero_odds = vec![SuperFunction::zero(&z_ctx); odd_names.len()];

    // Solve the odd system B*tau = -(kept-coefficient part), with the solved
    // evens substituted into the kept coefficients first.
    let b = Mat::from_fn(s, s, |j, l| odd_matrix.at(j, solved_odd_idx[l]).clone());
    let mut odd_rhs = Vec::with_capacity(s);
    for row in &odd_coeffs {
        let mut acc = SuperFunction::zero(&z_ctx);
        for (&l, coeff) in row {
            if solved_odd_idx.contains(&l) {
                continue;
            }
            let lifted = SuperFunction::from_smooth(&x_ctx, coeff.clone())?;
            let on_z = lifted.substitute(&z_ctx, &x_even_on_z, &zero_odds)?;
            let gen = SuperFunction::odd_var(&z_ctx, &odd_names[l])?;
            acc = acc.add(&on_z.mul(&gen)?)?;
        }
        odd_rhs.push(acc.neg());
    }
    let tau = solve_linear_super(&b, odd_rhs)?;

    // Inclusion j: Z -> X.
    let mut j_odd = Vec::with_capacity(odd_names.len());
    for (i, name) in odd_names.iter().enumerate() {
        if let Some(l) = solved_odd_idx.iter().position(|&idx| idx == i) {
            j_odd.push(tau[l].clone());
        } else {
            j_odd.push(SuperFunction::odd_var(&z_ctx, name)?);
        }
    }
    let inclusion = make_morphism(
        &format!("incl[{}]", chart.name()),
        z_domain.clone(),
        source.clone(),
        x_even_on_z.clone(),
        j_odd,
    )?;

    // Corestriction psi_hat: Z -> W, read off in the kept chart coordinates.
    let (p, q) = (chart.kept_even(), chart.kept_odd());
    let chart_codomain = chart.map().target();
    let c_ctx = chart_codomain.context();
    let w_ctx = SuperContext::new(
        c_ctx.even_names()[..p].to_vec(),
        c_ctx.odd_names()[..q].to_vec(),
    )?;
    let w_local = SuperDomain::new(&format!("model[{}]", chart.name()), w_ctx.clone(), None)?;
    let into_chart = chart.map().compose(psi)?.compose(&inclusion)?;
    let corestriction = make_morphism(
        &format!("corestrict[{}]", chart.name()),
        z_domain.clone(),
        w_local.clone(),
        into_chart.even_images()[..p].to_vec(),
        into_chart.odd_images()[..q].to_vec(),
    )?;

    // Inclusion i: W -> Y through the chart inverse.
    let mut model_even = Vec::with_capacity(p + r);
    for name in &c_ctx.even_names()[..p] {
        model_even.push(SuperFunction::even_var(&w_ctx, name)?);
    }
    model_even.extend(std::iter::repeat_with(|| SuperFunction::zero(&w_ctx)).take(r));
    let mut model_odd = Vec::with_capacity(q + s);
    for name in &c_ctx.odd_names()[..q] {
        model_odd.push(SuperFunction::odd_var(&w_ctx, name)?);
    }
    model_odd.extend(std::iter::repeat_with(|| SuperFunction::zero(&w_ctx)).take(s));
    let flat = make_morphism(
        &format!("flat[{}]", chart.name()),
        w_local.clone(),
        chart_codomain.clone(),
        model_even,
        model_odd,
    )?;
    let w_inclusion = chart.inverse().compose(&flat)?;

    // The square i . psi_hat = psi . j must commute.
    let left = w_inclusion.compose(&corestriction)?;
    let right = psi.compose(&inclusion)?;
    let mut diagram_exact = true;
    for (lhs, rhs) in left
        .even_images()
        .iter()
        .zip(right.even_images())
        .chain(left.odd_images().iter().zip(right.odd_images()))
    {
        let diff = lhs.sub(rhs)?;
        match diff.zeroness(tol) {
            Zeroness::StructuralZero => {}
            Zeroness::PassedScreen => diagram_exact = false,
            Zeroness::NonZero { witness, value } => {
                return Err(SolveFailure::Hard(Error::Internal(format!(
                    "preimage square fails to commute for chart {}: difference {} at {witness} evaluates to {value}",
                    chart.name(),
                    diff
                ))));
            }
        }
    }

    let solved_even = solved_even_idx
        .iter()
        .enumerate()
        .map(|(j, &idx)| (even_names[idx].clone(), sigma[j].clone()))
        .collect();
    let solved_odd = solved_odd_idx
        .iter()
        .enumerate()
        .map(|(l, &idx)| (odd_names[idx].clone(), tau[l].clone()))
        .collect();

    Ok(PreimageChart {
        chart_index,
        chart_name: chart.name().to_string(),
        z_domain,
        inclusion,
        corestriction,
        w_inclusion,
        solved_even,
        solved_odd,
        diagram_exact,
    })
}

/// Which even coordinates occur at most linearly, with constant coefficients,
/// across a system of plain smooth equations.
fn affine_eligibility(system: &[SmoothExpr], names: &[String]) -> Vec<bool> {
    names
        .iter()
        .map(|name| {
            system.iter().all(|eq| {
                eq.terms()
                    .all(|(mono, _)| mono.is_single_var(name) || !monomial_mentions(mono, name))
            })
        })
        .collect()
}

fn monomial_mentions(mono: &crate::symexpr::Monomial, name: &str) -> bool {
    mono.factors().iter().any(|(gen, _)| generator_mentions(gen, name))
}

fn generator_mentions(gen: &Generator, name: &str) -> bool {
    match gen {
        Generator::Var(v) => v == name,
        Generator::Sin(arg) | Generator::Cos(arg) | Generator::Exp(arg) => {
            arg.occurs_var(name)
        }
    }
}

/// Matrix of linear coefficients: entry `(k, i)` is the coefficient of the
/// bare variable `names[i]` in `system[k]`.
fn linear_coefficients(system: &[SmoothExpr], names: &[String]) -> Mat<Rational> {
    Mat::from_fn(system.len(), names.len(), |k, i| {
        system[k]
            .terms()
            .find(|(mono, _)| mono.is_single_var(&names[i]))
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    })
}

/// First (in index-lexicographic order) `size`-subset of eligible columns
/// whose square block has full rank.
fn choose_solved_subset(
    eligible: &[bool],
    coeffs: &Mat<Rational>,
    size: usize,
) -> Option<Vec<usize>> {
    let candidates: Vec<usize> = (0..eligible.len()).filter(|&i| eligible[i]).collect();
    if candidates.len() < size {
        return None;
    }
    if size == 0 {
        return Some(Vec::new());
    }
    let mut pick = vec![0usize; size];
    search_subset(&candidates, coeffs, size, 0, 0, &mut pick)
}

fn search_subset(
    candidates: &[usize],
    coeffs: &Mat<Rational>,
    size: usize,
    depth: usize,
    start: usize,
    pick: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    if depth == size {
        let block = Mat::from_fn(size, size, |k, j| coeffs.at(k, pick[j]).clone());
        if rank_exact(&block) == size {
            return Some(pick.clone());
        }
        return None;
    }
    for pos in start..candidates.len() {
        pick[depth] = candidates[pos];
        if let Some(found) = search_subset(candidates, coeffs, size, depth + 1, pos + 1, pick) {
            return Some(found);
        }
    }
    None
}

/// Solve `a * x = rhs` by exact Gaussian elimination, where the unknowns and
/// right-hand sides are superfunctions and `a` is rational.
fn solve_linear_super(a: &Mat<Rational>, rhs: Vec<SuperFunction>) -> Result<Vec<SuperFunction>> {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    debug_assert_eq!(rhs.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m: Vec<Vec<Rational>> = (0..n)
        .map(|k| (0..n).map(|j| a.at(k, j).clone()).collect())
        .collect();
    let mut b = rhs;

    for col in 0..n {
        let pivot = (col..n)
            .find(|&row| !m[row][col].is_zero())
            .ok_or_else(|| {
                Error::SingularMatrix("solved coordinate block is singular".to_string())
            })?;
        m.swap(col, pivot);
        b.swap(col, pivot);
        let inv = m[col][col].clone().recip()?;
        for j in col..n {
            m[col][j] = &m[col][j] * &inv;
        }
        b[col] = b[col].scale(&inv);
        for row in 0..n {
            if row == col || m[row][col].is_zero() {
                continue;
            }
            let factor = m[row][col].clone();
            for j in col..n {
                let delta = &factor * &m[col][j];
                m[row][j] = &m[row][j] - &delta;
            }
            let delta = b[col].scale(&factor);
            b[row] = b[row].sub(&delta)?;
        }
    }
    Ok(b)
}

fn derive_grid(psi: &SuperMorphism, grid: Option<&GridSpec>) -> Result<GridSpec> {
    if let Some(g) = grid {
        g.validate_for(psi.source())?;
        return Ok(g.clone());
    }
    let names: Vec<String> = psi.source().context().even_names().to_vec();
    match psi.source().bounds() {
        Some(bounds) => GridSpec::uniform(&names, bounds, 8),
        None => {
            if names.is_empty() {
                GridSpec::uniform(&[], &[], 1)
            } else {
                Err(Error::Invalid(
                    "source domain has no box; supply an explicit scan grid".to_string(),
                ))
            }
        }
    }
}

/// Find a sub-box of the source box that interval arithmetic proves is mapped
/// into the chart box by the reduced morphism.  Falls back to the full source
/// box, uncertified, when no shrink factor works.
fn certify_validity_box(
    psi: &SuperMorphism,
    chart: &AdaptedChart,
    tol: f64,
) -> Result<(Vec<(Rational, Rational)>, bool)> {
    let names = psi.source().context().even_names().to_vec();
    let base: Vec<(Rational, Rational)> = match psi.source().bounds() {
        Some(b) => b.to_vec(),
        None => names
            .iter()
            .map(|_| (Rational::from_int(-1), Rational::from_int(1)))
            .collect(),
    };
    let chart_bounds = chart.domain().bounds();
    if chart_bounds.is_none() {
        // Nothing to certify against: the chart box is the whole space.
        return Ok((base, true));
    }
    let chart_bounds = chart_bounds.unwrap();
    let images: Vec<SmoothExpr> = psi.even_images().iter().map(SuperFunction::reduce).collect();

    let half = Rational::new(1, 2).expect("nonzero denominator");
    for (num, den) in SHRINK_FACTORS {
        let factor = Rational::new(num, den).expect("nonzero denominators");
        let candidate: Vec<(Rational, Rational)> = base
            .iter()
            .map(|(lo, hi)| {
                let mid = (lo + hi) * half.clone();
                let radius = (hi - lo) * half.clone() * factor.clone();
                (&mid - &radius, &mid + &radius)
            })
            .collect();
        let env: BTreeMap<String, Interval> = names
            .iter()
            .zip(&candidate)
            .map(|(n, (lo, hi))| (n.clone(), Interval::new(lo.to_f64(), hi.to_f64())))
            .collect();
        let mut inside = true;
        for (img, (lo, hi)) in images.iter().zip(chart_bounds) {
            let range = eval_interval(img, &env)?;
            let target = Interval::new(lo.to_f64(), hi.to_f64());
            if !target.contains(range, tol) {
                inside = false;
                break;
            }
        }
        if inside {
            return Ok((candidate, true));
        }
    }
    Ok((base, false))
}
