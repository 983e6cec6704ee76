//! Transversality of a morphism to a subsupermanifold of its target.
//!
//! The submanifold W is presented by adapted charts: invertible maps to a
//! standard superdomain in which W becomes the vanishing of the last r even
//! and last s odd coordinates, the first p|q coordinates staying as
//! coordinates on W. The tangent space of W at a fiber point is then the
//! span of the first p (even) and q (odd) basis vectors, so the span
//! condition "image of the tangent map plus T_yW covers T_yY" turns into
//! two rank checks on column-concatenated matrices, one per parity sector.
//!
//! Every verdict is computed twice: directly as those rank checks, and
//! independently by composing with the projection onto the defining
//! coordinates and asking for a submersion. The two must agree; callers
//! treat disagreement as an internal error, never as a verdict.

use crate::calculus::{classify, tangent_matrix, Classification};
use crate::error::{Error, Result};
use crate::geometry::{SuperDim, SuperDomain, SuperMorphism};
use crate::matrix::Mat;
use crate::point::EvenPoint;
use crate::rational::Rational;
use crate::scalar::Scalar;
use crate::symexpr::{SmoothExpr, Zeroness};

/// Hard cap on scan grid size, to keep accidental huge grids from hanging.
const MAX_GRID_POINTS: usize = 200_000;
const NEWTON_MAX_ITER: usize = 25;
/// Newton results closer than this (max norm) to a kept point are duplicates.
const NEWTON_DEDUP: f64 = 1e-6;

/// A chart of the ambient domain adapted to the submanifold: an invertible
/// map onto a standard superdomain under which the submanifold is the zero
/// set of the last `r` even and last `s` odd coordinates.
#[derive(Debug, Clone)]
pub struct AdaptedChart {
    name: String,
    /// The chart's neighborhood in the ambient domain (its box).
    domain: SuperDomain,
    /// The chart map, from the neighborhood onto chart coordinates.
    map: SuperMorphism,
    inverse: SuperMorphism,
    kept_even: usize,
    kept_odd: usize,
}

impl AdaptedChart {
    /// Validates the chart data and certifies invertibility by composing the
    /// map with the supplied inverse both ways and checking both composites
    /// against the identity (structurally, or through the evaluation screen
    /// when transcendental atoms are involved).
    pub fn new(
        name: &str,
        domain: SuperDomain,
        map: SuperMorphism,
        inverse: SuperMorphism,
        kept_even: usize,
        kept_odd: usize,
        tol: f64,
    ) -> Result<Self> {
        if !map.source().same_chart(&domain) {
            return Err(Error::DomainMismatch(format!(
                "chart map of `{name}` does not start on its neighborhood"
            )));
        }
        let dim = domain.dim();
        if map.target().dim() != dim {
            return Err(Error::Invalid(format!(
                "chart map of `{name}` must preserve dimension, got {} -> {}",
                dim,
                map.target().dim()
            )));
        }
        if kept_even > dim.even || kept_odd > dim.odd {
            return Err(Error::Invalid(format!(
                "kept coordinate counts {kept_even}|{kept_odd} exceed dimension {dim}"
            )));
        }
        if !inverse.source().same_chart(map.target()) || !inverse.target().same_chart(map.source()) {
            return Err(Error::DomainMismatch(format!(
                "inverse of chart `{name}` does not reverse the chart map"
            )));
        }
        let forward_then_back = inverse.compose(&map)?;
        check_identity(&forward_then_back, tol)
            .map_err(|why| Error::ChartNotInvertible(format!("`{name}`: inverse after map: {why}")))?;
        let back_then_forward = map.compose(&inverse)?;
        check_identity(&back_then_forward, tol)
            .map_err(|why| Error::ChartNotInvertible(format!("`{name}`: map after inverse: {why}")))?;
        Ok(AdaptedChart {
            name: name.to_string(),
            domain,
            map,
            inverse,
            kept_even,
            kept_odd,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &SuperDomain {
        &self.domain
    }

    pub fn map(&self) -> &SuperMorphism {
        &self.map
    }

    pub fn inverse(&self) -> &SuperMorphism {
        &self.inverse
    }

    pub fn kept_even(&self) -> usize {
        self.kept_even
    }

    pub fn kept_odd(&self) -> usize {
        self.kept_odd
    }

    /// Codimension cut out by this chart, `(r, s)`.
    pub fn codim(&self) -> (usize, usize) {
        let dim = self.domain.dim();
        (dim.even - self.kept_even, dim.odd - self.kept_odd)
    }

    /// The reduced defining equations of the submanifold in ambient
    /// coordinates: the last `r` even chart components with odd generators
    /// dropped. A point of the chart box is on the submanifold iff these
    /// vanish there.
    pub fn residuals(&self) -> Vec<SmoothExpr> {
        self.map.even_images()[self.kept_even..]
            .iter()
            .map(|g| g.reduce())
            .collect()
    }

    /// Fiber membership at a point of the ambient reduced space: inside the
    /// chart box and all defining equations vanish (exactly for rational
    /// values, within `tol` otherwise).
    pub fn on_fiber(&self, y: &EvenPoint, tol: f64) -> Result<bool> {
        if !self.domain.contains(y, tol)? {
            return Ok(false);
        }
        for res in self.residuals() {
            let ok = match res.eval(y)? {
                Scalar::Exact(v) => v.is_zero(),
                Scalar::Approx(v) => v.abs() <= tol,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Checks an endomorphism against the identity, coordinate by coordinate.
fn check_identity(m: &SuperMorphism, tol: f64) -> std::result::Result<(), String> {
    let ctx = m.source().context();
    for (k, name) in ctx.even_names().iter().enumerate() {
        let expected = crate::grassmann::SuperFunction::even_var(ctx, name).expect("context name");
        let diff = m.even_images()[k].sub(&expected).expect("same context");
        if let Zeroness::NonZero { witness, value } = diff.zeroness(tol) {
            return Err(format!(
                "even component `{name}` deviates from identity by {value:.3e} at {witness}"
            ));
        }
    }
    for (k, name) in ctx.odd_names().iter().enumerate() {
        let expected = crate::grassmann::SuperFunction::odd_var(ctx, name).expect("context name");
        let diff = m.odd_images()[k].sub(&expected).expect("same context");
        if let Zeroness::NonZero { witness, value } = diff.zeroness(tol) {
            return Err(format!(
                "odd component `{name}` deviates from identity by {value:.3e} at {witness}"
            ));
        }
    }
    Ok(())
}

/// A subsupermanifold of an ambient domain, presented by one or more
/// adapted charts that share the kept-coordinate counts.
#[derive(Debug, Clone)]
pub struct Submanifold {
    name: String,
    ambient: SuperDomain,
    charts: Vec<AdaptedChart>,
}

impl Submanifold {
    pub fn new(name: &str, ambient: SuperDomain, charts: Vec<AdaptedChart>) -> Result<Self> {
        if charts.is_empty() {
            return Err(Error::Invalid(format!(
                "submanifold `{name}` needs at least one chart"
            )));
        }
        for chart in &charts {
            if !chart.domain.same_chart(&ambient) {
                return Err(Error::DomainMismatch(format!(
                    "chart `{}` does not live on ambient {}",
                    chart.name,
                    ambient.label()
                )));
            }
        }
        let (p, q) = (charts[0].kept_even, charts[0].kept_odd);
        for chart in &charts[1..] {
            if chart.kept_even != p || chart.kept_odd != q {
                return Err(Error::Invalid(format!(
                    "charts of `{name}` disagree on kept coordinates: {p}|{q} vs {}|{}",
                    chart.kept_even, chart.kept_odd
                )));
            }
        }
        Ok(Submanifold {
            name: name.to_string(),
            ambient,
            charts,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient(&self) -> &SuperDomain {
        &self.ambient
    }

    pub fn charts(&self) -> &[AdaptedChart] {
        &self.charts
    }

    pub fn dim(&self) -> SuperDim {
        SuperDim::new(self.charts[0].kept_even, self.charts[0].kept_odd)
    }

    /// Codimension `(r, s)` in the ambient domain.
    pub fn codim(&self) -> (usize, usize) {
        self.charts[0].codim()
    }

    /// Index of the first chart whose box contains the point and whose
    /// defining equations hold there; distinguishes "in no chart" from
    /// "in a chart but off the submanifold".
    pub fn locate_on_fiber(&self, y: &EvenPoint, tol: f64) -> Result<usize> {
        let mut in_some_box = false;
        for (i, chart) in self.charts.iter().enumerate() {
            if !chart.domain.contains(y, tol)? {
                continue;
            }
            in_some_box = true;
            if chart.on_fiber(y, tol)? {
                return Ok(i);
            }
        }
        if in_some_box {
            Err(Error::PointNotOnFiber(y.to_string()))
        } else {
            Err(Error::PointInNoChart(y.to_string()))
        }
    }
}

/// A located fiber point: source point, its image, and the chart that
/// certified membership.
#[derive(Debug, Clone)]
pub struct FiberPoint {
    pub source: EvenPoint,
    pub target: EvenPoint,
    pub chart: usize,
}

fn require_matching_target(psi: &SuperMorphism, w: &Submanifold) -> Result<()> {
    if psi.target().same_chart(&w.ambient) {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "`{}` maps into {} but `{}` lives in {}",
            psi.name(),
            psi.target().label(),
            w.name,
            w.ambient.label()
        )))
    }
}

/// Maps the source point and finds the chart in which it sits on the fiber.
pub fn locate_fiber_point(
    psi: &SuperMorphism,
    w: &Submanifold,
    x: &EvenPoint,
    tol: f64,
) -> Result<FiberPoint> {
    require_matching_target(psi, w)?;
    let y = psi.reduced_map_eval(x, tol)?;
    let chart = w.locate_on_fiber(&y, tol)?;
    Ok(FiberPoint {
        source: x.clone(),
        target: y,
        chart,
    })
}

/// Verdict of the direct span-rank criterion at one fiber point.
#[derive(Debug, Clone)]
pub struct DirectVerdict {
    pub chart: usize,
    pub rank_even: usize,
    pub rank_odd: usize,
    pub needed_even: usize,
    pub needed_odd: usize,
    pub verdict: bool,
}

/// Verdict of the projection criterion at one fiber point.
#[derive(Debug, Clone)]
pub struct ProjectionVerdict {
    pub chart: usize,
    pub class: Classification,
    pub verdict: bool,
}

fn basis_columns(rows: usize, cols: usize) -> Mat<Scalar> {
    Mat::from_fn(rows, cols, |r, c| {
        if r == c {
            Scalar::from_int(1)
        } else {
            Scalar::zero()
        }
    })
}

fn direct_verdict(
    psi: &SuperMorphism,
    w: &Submanifold,
    fp: &FiberPoint,
    tol: f64,
) -> Result<DirectVerdict> {
    let chart = &w.charts[fp.chart];
    let composed = chart.map.compose(psi)?;
    let tm = tangent_matrix(&composed, &fp.source)?;
    let dim = w.ambient.dim();
    let e_even = basis_columns(dim.even, chart.kept_even);
    let e_odd = basis_columns(dim.odd, chart.kept_odd);
    let rank_even = tm.even.hstack(&e_even).rank(tol);
    let rank_odd = tm.odd.hstack(&e_odd).rank(tol);
    Ok(DirectVerdict {
        chart: fp.chart,
        rank_even,
        rank_odd,
        needed_even: dim.even,
        needed_odd: dim.odd,
        verdict: rank_even == dim.even && rank_odd == dim.odd,
    })
}

fn projection_verdict(
    psi: &SuperMorphism,
    w: &Submanifold,
    fp: &FiberPoint,
    tol: f64,
) -> Result<ProjectionVerdict> {
    let chart = &w.charts[fp.chart];
    let g = crate::preimage::projection_after_chart(chart)?;
    let psi_y = g.compose(psi)?;
    let class = classify(&psi_y, &fp.source, tol)?;
    Ok(ProjectionVerdict {
        chart: fp.chart,
        class,
        verdict: class.is_submersion(),
    })
}

/// Direct criterion at one point: in chart coordinates, the tangent image
/// together with the kept-coordinate basis must span both sectors.
pub fn is_transversal_at(
    psi: &SuperMorphism,
    w: &Submanifold,
    x: &EvenPoint,
    tol: f64,
) -> Result<DirectVerdict> {
    let fp = locate_fiber_point(psi, w, x, tol)?;
    direct_verdict(psi, w, &fp, tol)
}

/// Independent criterion at one point: transversal iff the composition with
/// the projection onto the defining coordinates is a submersion there.
pub fn is_transversal_via_projection(
    psi: &SuperMorphism,
    w: &Submanifold,
    x: &EvenPoint,
    tol: f64,
) -> Result<ProjectionVerdict> {
    let fp = locate_fiber_point(psi, w, x, tol)?;
    projection_verdict(psi, w, &fp, tol)
}

/// A scan grid: one inclusive range with step per source even coordinate.
#[derive(Debug, Clone)]
pub struct GridSpec {
    axes: Vec<(String, Rational, Rational, Rational)>,
}

impl GridSpec {
    pub fn new(axes: Vec<(String, Rational, Rational, Rational)>) -> Result<Self> {
        for (name, lo, hi, step) in &axes {
            if lo.cmp_value(hi) == std::cmp::Ordering::Greater {
                return Err(Error::Invalid(format!(
                    "grid axis `{name}` has empty range [{lo}, {hi}]"
                )));
            }
            if step.is_zero() || step.is_negative() {
                return Err(Error::Invalid(format!(
                    "grid axis `{name}` needs a positive step"
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    /// Uniform grid over a box: `divisions` steps per axis (so divisions+1
    /// samples); degenerate intervals produce a single sample.
    pub fn uniform(names: &[String], bounds: &[(Rational, Rational)], divisions: u32) -> Result<Self> {
        let axes = names
            .iter()
            .zip(bounds)
            .map(|(n, (lo, hi))| {
                let width = hi - lo;
                let step = if width.is_zero() {
                    Rational::one()
                } else {
                    width * Rational::new(1, divisions.max(1) as i64).unwrap()
                };
                (n.clone(), lo.clone(), hi.clone(), step)
            })
            .collect();
        GridSpec::new(axes)
    }

    pub fn axes(&self) -> &[(String, Rational, Rational, Rational)] {
        &self.axes
    }

    /// The grid must provide exactly the even coordinates of the domain.
    pub(crate) fn validate_for(&self, source: &SuperDomain) -> Result<()> {
        let mut wanted: Vec<&String> = source.context().even_names().iter().collect();
        wanted.sort();
        let mut got: Vec<&String> = self.axes.iter().map(|(n, ..)| n).collect();
        got.sort();
        if wanted != got {
            return Err(Error::Invalid(format!(
                "grid axes do not match the even coordinates of {}",
                source.label()
            )));
        }
        Ok(())
    }

    /// All grid points, ordered lexicographically along the declared axes.
    pub fn points(&self) -> Result<Vec<EvenPoint>> {
        let mut axes_values: Vec<(String, Vec<Rational>)> = Vec::new();
        let mut total: usize = 1;
        for (name, lo, hi, step) in &self.axes {
            let mut values = Vec::new();
            let mut t = lo.clone();
            while t.cmp_value(hi) != std::cmp::Ordering::Greater {
                values.push(t.clone());
                t = &t + step;
                if values.len() > MAX_GRID_POINTS {
                    return Err(Error::Invalid("scan grid is too large".into()));
                }
            }
            total = total.saturating_mul(values.len());
            if total > MAX_GRID_POINTS {
                return Err(Error::Invalid("scan grid is too large".into()));
            }
            axes_values.push((name.clone(), values));
        }
        let mut out = vec![EvenPoint::new()];
        for (name, values) in &axes_values {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for base in &out {
                for v in values {
                    let mut p = base.clone();
                    p.insert(name.clone(), Scalar::Exact(v.clone()));
                    next.push(p);
                }
            }
            out = next;
        }
        Ok(out)
    }
}

/// Finds fiber points over a scan grid. With purely rational defining data
/// the grid points are filtered exactly; as soon as a chart's composed
/// defining equations involve a transcendental atom, grid points seed a
/// damped Newton iteration instead and converged, re-verified roots are
/// returned. The result is sorted and duplicate-free.
pub fn scan_preimage(
    psi: &SuperMorphism,
    w: &Submanifold,
    grid: &GridSpec,
    tol: f64,
) -> Result<Vec<EvenPoint>> {
    require_matching_target(psi, w)?;
    grid.validate_for(psi.source())?;
    let grid_points = grid.points()?;
    let var_names: Vec<String> = psi.source().context().even_names().to_vec();

    let mut exact_hits: Vec<EvenPoint> = Vec::new();
    let mut refined_hits: Vec<EvenPoint> = Vec::new();

    for (ci, chart) in w.charts.iter().enumerate() {
        let composed = chart.map.compose(psi)?;
        let system: Vec<SmoothExpr> = composed.even_images()[chart.kept_even..]
            .iter()
            .map(|g| g.reduce())
            .collect();
        let numeric = system.iter().any(SmoothExpr::has_transcendental);
        if !numeric {
            for x in &grid_points {
                if !psi.source().contains(x, tol)? {
                    continue;
                }
                let y = psi.reduced_map_eval_unchecked(x)?;
                if chart.on_fiber(&y, tol)? && !exact_hits.contains(x) {
                    exact_hits.push(x.clone());
                }
            }
        } else {
            for x in &grid_points {
                let start: Vec<f64> = var_names
                    .iter()
                    .map(|n| x.get(n).expect("grid covers source").to_f64())
                    .collect();
                let Some(root) = newton_refine(&system, &var_names, start, tol) else {
                    continue;
                };
                let candidate = EvenPoint::from_pairs(
                    var_names
                        .iter()
                        .cloned()
                        .zip(root.iter().map(|v| Scalar::Approx(*v))),
                );
                if !psi.source().contains(&candidate, tol)? {
                    continue;
                }
                let y = psi.reduced_map_eval_unchecked(&candidate)?;
                if !chart.on_fiber(&y, tol)? {
                    continue;
                }
                let duplicate = refined_hits
                    .iter()
                    .chain(exact_hits.iter())
                    .any(|kept| max_distance(kept, &candidate, &var_names) < NEWTON_DEDUP);
                if !duplicate {
                    refined_hits.push(candidate);
                }
            }
        }
        let _ = ci;
    }

    let mut all: Vec<EvenPoint> = exact_hits;
    all.extend(refined_hits);
    sort_points(&mut all, &var_names);
    Ok(all)
}

fn max_distance(a: &EvenPoint, b: &EvenPoint, names: &[String]) -> f64 {
    names
        .iter()
        .map(|n| {
            let va = a.get(n).map_or(f64::NAN, Scalar::to_f64);
            let vb = b.get(n).map_or(f64::NAN, Scalar::to_f64);
            (va - vb).abs()
        })
        .fold(0.0, f64::max)
}

fn sort_points(points: &mut [EvenPoint], names: &[String]) {
    points.sort_by(|a, b| {
        for n in names {
            let (Some(va), Some(vb)) = (a.get(n), b.get(n)) else {
                continue;
            };
            let ord = va.sort_cmp(vb);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// Damped Gauss-Newton on the square or rectangular system; `None` when the
/// iteration leaves the representable range or fails to reach tolerance.
fn newton_refine(
    system: &[SmoothExpr],
    vars: &[String],
    mut x: Vec<f64>,
    tol: f64,
) -> Option<Vec<f64>> {
    if system.is_empty() {
        return Some(x);
    }
    let jac: Vec<Vec<SmoothExpr>> = system
        .iter()
        .map(|f| vars.iter().map(|v| f.diff(v)).collect())
        .collect();
    let eval_all = |x: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
        let point = EvenPoint::from_pairs(
            vars.iter()
                .cloned()
                .zip(x.iter().map(|v| Scalar::Approx(*v))),
        );
        let mut res = Vec::with_capacity(system.len());
        for f in system {
            res.push(f.eval(&point).ok()?.to_f64());
        }
        let mut jv = Vec::with_capacity(system.len() * vars.len());
        for row in &jac {
            for f in row {
                jv.push(f.eval(&point).ok()?.to_f64());
            }
        }
        Some((res, jv))
    };
    for _ in 0..NEWTON_MAX_ITER {
        let (res, jv) = eval_all(&x)?;
        let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !worst.is_finite() {
            return None;
        }
        if worst <= tol * 1e-3 {
            break;
        }
        let j = nalgebra::DMatrix::from_row_slice(system.len(), vars.len(), &jv);
        let r = nalgebra::DVector::from_column_slice(&res);
        let svd = j.svd(true, true);
        let step = svd.solve(&r, 1e-12).ok()?;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
            return None;
        }
    }
    let (res, _) = eval_all(&x)?;
    let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (worst <= tol).then_some(x)
}

/// How the points of a report were obtained. Grid-derived verdicts are
/// sample-based and say nothing about unsampled fiber points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictScope {
    SampledGrid,
    ProvidedPoints,
}

/// Where `check_transversal` gets its fiber points.
#[derive(Debug, Clone)]
pub enum PointSource {
    Grid(GridSpec),
    Listed(Vec<EvenPoint>),
}

/// One fiber point with both criteria evaluated.
#[derive(Debug, Clone)]
pub struct PointRecord {
    pub point: EvenPoint,
    pub target: EvenPoint,
    pub chart: String,
    pub rank_even: usize,
    pub rank_odd: usize,
    pub needed_even: usize,
    pub needed_odd: usize,
    pub direct: bool,
    pub projection_class: Classification,
    pub projection: bool,
    /// False marks an internal inconsistency, not a geometric fact.
    pub agreement: bool,
}

#[derive(Debug, Clone)]
pub struct TransversalityReport {
    pub morphism: String,
    pub submanifold: String,
    pub points: Vec<PointRecord>,
    /// Conjunction of per-point verdicts; true when the fiber sample is empty.
    pub overall: bool,
    pub vacuous: bool,
    /// True iff both criteria agreed at every point.
    pub agreement: bool,
    pub scope: VerdictScope,
}

/// Runs both transversality criteria at every fiber point from the given
/// source and assembles the report. Listed points must already be on the
/// fiber; grid sources are scanned first. Criterion disagreement is recorded
/// per point and in the report flag, never resolved silently.
pub fn check_transversal(
    psi: &SuperMorphism,
    w: &Submanifold,
    source: &PointSource,
    tol: f64,
) -> Result<TransversalityReport> {
    require_matching_target(psi, w)?;
    let (points, scope) = match source {
        PointSource::Grid(grid) => (scan_preimage(psi, w, grid, tol)?, VerdictScope::SampledGrid),
        PointSource::Listed(pts) => (pts.clone(), VerdictScope::ProvidedPoints),
    };
    let mut records = Vec::with_capacity(points.len());
    for x in &points {
        let fp = locate_fiber_point(psi, w, x, tol)?;
        let direct = direct_verdict(psi, w, &fp, tol)?;
        let proj = projection_verdict(psi, w, &fp, tol)?;
        records.push(PointRecord {
            point: fp.source,
            target: fp.target,
            chart: w.charts[fp.chart].name.clone(),
            rank_even: direct.rank_even,
            rank_odd: direct.rank_odd,
            needed_even: direct.needed_even,
            needed_odd: direct.needed_odd,
            direct: direct.verdict,
            projection_class: proj.class,
            projection: proj.verdict,
            agreement: direct.verdict == proj.verdict,
        });
    }
    let vacuous = records.is_empty();
    Ok(TransversalityReport {
        morphism: psi.name().to_string(),
        submanifold: w.name.clone(),
        overall: records.iter().all(|r| r.direct),
        agreement: records.iter().all(|r| r.agreement),
        vacuous,
        points: records,
        scope,
    })
}

/// W cut out in `ambient` by the identity chart with the given kept counts.
/// Test scaffolding shared by the modules building on submanifolds.
#[cfg(test)]
pub(crate) fn identity_chart_w(ambient: &SuperDomain, p: usize, q: usize) -> Submanifold {
    let chart_target = SuperDomain::new("C", ambient.context().clone(), None).unwrap();
    let map = SuperMorphism::identity(ambient);
    let inverse = SuperMorphism::identity(&chart_target);
    let chart = AdaptedChart::new("main", ambient.clone(), map, inverse, p, q, 1e-9).unwrap();
    Submanifold::new("W", ambient.clone(), vec![chart]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_morphism;
    use crate::grassmann::{parse_superfunction, SuperContext};

    fn domain(label: &str, even: &[&str], odd: &[&str]) -> SuperDomain {
        let ctx = SuperContext::new(
            even.iter().map(|s| s.to_string()).collect(),
            odd.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        SuperDomain::new(label, ctx, None).unwrap()
    }

    fn morphism(
        name: &str,
        src: &SuperDomain,
        dst: &SuperDomain,
        even: &[&str],
        odd: &[&str],
    ) -> SuperMorphism {
        let ev = even
            .iter()
            .map(|t| parse_superfunction(t, src.context()).unwrap())
            .collect();
        let od = odd
            .iter()
            .map(|t| parse_superfunction(t, src.context()).unwrap())
            .collect();
        make_morphism(name, src.clone(), dst.clone(), ev, od).unwrap()
    }

    fn at(pairs: &[(&str, (i64, i64))]) -> EvenPoint {
        let mut p = EvenPoint::new();
        for (k, (n, d)) in pairs {
            p.insert(k.to_string(), Scalar::Exact(Rational::new(*n, *d).unwrap()));
        }
        p
    }

    #[test]
    fn identity_to_origin_is_transversal() {
        let y = domain("Y", &["x"], &["s1"]);
        let w = identity_chart_w(&y, 0, 0);
        let psi = SuperMorphism::identity(&y);
        let v = is_transversal_at(&psi, &w, &at(&[("x", (0, 1))]), 1e-9).unwrap();
        assert!(v.verdict);
        assert_eq!((v.rank_even, v.rank_odd), (1, 1));
        let pv = is_transversal_via_projection(&psi, &w, &at(&[("x", (0, 1))]), 1e-9).unwrap();
        assert!(pv.verdict);
    }

    #[test]
    fn squared_map_misses_origin_transversality() {
        let x = domain("X", &["x"], &["s1"]);
        let y = domain("Y", &["t"], &["e"]);
        let psi = morphism("sq", &x, &y, &["x^2"], &["s1"]);
        let w = identity_chart_w(&y, 0, 0);
        let v = is_transversal_at(&psi, &w, &at(&[("x", (0, 1))]), 1e-9).unwrap();
        assert!(!v.verdict);
        assert_eq!(v.rank_even, 0);
        assert_eq!(v.rank_odd, 1);
        let pv = is_transversal_via_projection(&psi, &w, &at(&[("x", (0, 1))]), 1e-9).unwrap();
        assert!(!pv.verdict);
    }

    #[test]
    fn mixed_instance_is_transversal_where_expected() {
        // y1 <- x1, y2 <- x2 + x1^2, t1 <- s1, t2 <- x1 s1 + s2;
        // W = {y2 = 0, t2 = 0} kept 1|1
        let x = domain("X", &["x1", "x2"], &["s1", "s2"]);
        let y = domain("Y", &["y1", "y2"], &["t1", "t2"]);
        let psi = morphism(
            "psi",
            &x,
            &y,
            &["x1", "x2 + x1^2"],
            &["s1", "x1*s1 + s2"],
        );
        let w = identity_chart_w(&y, 1, 1);
        let p = at(&[("x1", (1, 1)), ("x2", (-1, 1))]);
        let v = is_transversal_at(&psi, &w, &p, 1e-9).unwrap();
        assert!(v.verdict, "expected transversal, ranks {}|{}", v.rank_even, v.rank_odd);
        assert_eq!((v.rank_even, v.rank_odd), (2, 2));
        let pv = is_transversal_via_projection(&psi, &w, &p, 1e-9).unwrap();
        assert!(pv.verdict);
    }

    #[test]
    fn classical_axis_pair() {
        let t = domain("T", &["t"], &[]);
        let plane = domain("P", &["x1", "x2"], &[]);
        let w = identity_chart_w(&plane, 1, 0);
        // image inside the axis: never transversal
        let tangent = morphism("tangent", &t, &plane, &["t", "0"], &[]);
        let v = is_transversal_at(&tangent, &w, &at(&[("t", (3, 1))]), 1e-9).unwrap();
        assert!(!v.verdict);
        // crossing the axis: transversal at the crossing
        let crossing = morphism("crossing", &t, &plane, &["0", "t"], &[]);
        let v = is_transversal_at(&crossing, &w, &at(&[("t", (0, 1))]), 1e-9).unwrap();
        assert!(v.verdict);
        let pv = is_transversal_via_projection(&crossing, &w, &at(&[("t", (0, 1))]), 1e-9).unwrap();
        assert!(pv.verdict);
    }

    #[test]
    fn off_fiber_and_outside_chart_are_distinguished(){
        let y_ctx = SuperContext::new(vec!["y".into()], vec![]).unwrap();
        let boxed = SuperDomain::new(
            "Y",
            y_ctx,
            Some(vec![(Rational::from_int(-1), Rational::from_int(1))]),
        )
        .unwrap();
        let chart_target = SuperDomain::new("C", boxed.context().clone(), None).unwrap();
        let chart = AdaptedChart::new(
            "main",
            boxed.clone(),
            SuperMorphism::identity(&boxed),
            SuperMorphism::identity(&chart_target),
            0,
            0,
            1e-9,
        )
        .unwrap();
        let ambient = SuperDomain::new("Y", boxed.context().clone(), None).unwrap();
        let w = Submanifold::new("W", ambient.clone(), vec![chart]).unwrap();
        let psi = SuperMorphism::identity(&ambient);
        match is_transversal_at(&psi, &w, &at(&[("y", (1, 2))]), 1e-9) {
            Err(Error::PointNotOnFiber(_)) => {}
            other => panic!("expected off-fiber error, got {other:?}"),
        }
        match is_transversal_at(&psi, &w, &at(&[("y", (5, 1))]), 1e-9) {
            Err(Error::PointInNoChart(_)) => {}
            other => panic!("expected no-chart error, got {other:?}"),
        }
    }

    #[test]
    fn bad_inverse_fails_certification() {
        let y = domain("Y", &["y"], &[]);
        let chart_target = SuperDomain::new("C", y.context().clone(), None).unwrap();
        let map = morphism("phi", &y, &chart_target, &["2*y"], &[]);
        // wrong inverse: y -> y instead of y -> y/2
        let inverse = morphism("phi_inv", &chart_target, &y, &["y"], &[]);
        match AdaptedChart::new("bad", y.clone(), map, inverse, 0, 0, 1e-9) {
            Err(Error::ChartNotInvertible(_)) => {}
            other => panic!("expected certification failure, got {other:?}"),
        }
    }

    #[test]
    fn scan_finds_exact_roots() {
        let x = domain("X", &["x"], &[]);
        let y = domain("Y", &["y"], &[]);
        let psi = morphism("psi", &x, &y, &["x^2 - 1"], &[]);
        let w = identity_chart_w(&y, 0, 0);
        let grid = GridSpec::new(vec![(
            "x".into(),
            Rational::from_int(-2),
            Rational::from_int(2),
            Rational::new(1, 2).unwrap(),
        )])
        .unwrap();
        let pts = scan_preimage(&psi, &w, &grid, 1e-9).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].get("x"), Some(&Scalar::Exact(Rational::from_int(-1))));
        assert_eq!(pts[1].get("x"), Some(&Scalar::Exact(Rational::from_int(1))));
    }

    #[test]
    fn scan_empty_fiber_gives_vacuous_report() {
        let x = domain("X", &["x"], &[]);
        let y = domain("Y", &["y"], &[]);
        let psi = morphism("psi", &x, &y, &["x^2 + 1"], &[]);
        let w = identity_chart_w(&y, 0, 0);
        let grid = GridSpec::new(vec![(
            "x".into(),
            Rational::from_int(-1),
            Rational::from_int(1),
            Rational::new(1, 2).unwrap(),
        )])
        .unwrap();
        let report = check_transversal(&psi, &w, &PointSource::Grid(grid), 1e-9).unwrap();
        assert!(report.vacuous);
        assert!(report.overall);
        assert!(report.agreement);
        assert!(report.points.is_empty());
    }

    #[test]
    fn scan_refines_transcendental_roots() {
        let x = domain("X", &["x"], &[]);
        let y = domain("Y", &["y"], &[]);
        let psi = morphism("psi", &x, &y, &["sin(x)"], &[]);
        let w = identity_chart_w(&y, 0, 0);
        let grid = GridSpec::new(vec![(
            "x".into(),
            Rational::from_int(-1),
            Rational::from_int(1),
            Rational::new(1, 2).unwrap(),
        )])
        .unwrap();
        let pts = scan_preimage(&psi, &w, &grid, 1e-9).unwrap();
        assert_eq!(pts.len(), 1, "expected the single root near 0, got {pts:?}");
        assert!(pts[0].get("x").unwrap().to_f64().abs() < 1e-9);
    }

    #[test]
    fn grid_report_is_sample_scoped() {
        let x = domain("X", &["x1", "x2"], &[]);
        let w = identity_chart_w(&x, 1, 0);
        let psi = SuperMorphism::identity(&x);
        let grid = GridSpec::new(vec![
            (
                "x1".into(),
                Rational::from_int(-1),
                Rational::from_int(1),
                Rational::one(),
            ),
            (
                "x2".into(),
                Rational::from_int(-1),
                Rational::from_int(1),
                Rational::one(),
            ),
        ])
        .unwrap();
        let report = check_transversal(&psi, &w, &PointSource::Grid(grid), 1e-9).unwrap();
        assert_eq!(report.scope, VerdictScope::SampledGrid);
        // fiber points are exactly the three grid points with x2 = 0
        assert_eq!(report.points.len(), 3);
        assert!(report.overall);
        assert!(report.agreement);
    }
}
