//! Superdomains and the maps between them.
//!
//! A morphism is stored as the list of pullbacks of the target coordinates:
//! one even superfunction per even target coordinate and one odd
//! superfunction per odd target coordinate, all living on the source. That
//! data determines the morphism completely, so validating it at construction
//! is the whole well-formedness story; composition is substitution of
//! coordinate images.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grassmann::{Parity, SuperContext, SuperFunction};
use crate::point::EvenPoint;
use crate::rational::Rational;
use crate::scalar::Scalar;

/// Dimension pair of a superdomain, printed as `m|n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuperDim {
    pub even: usize,
    pub odd: usize,
}

impl SuperDim {
    pub fn new(even: usize, odd: usize) -> Self {
        SuperDim { even, odd }
    }
}

impl fmt::Display for SuperDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.even, self.odd)
    }
}

/// An open superdomain: named coordinates plus an optional product box
/// restricting the even coordinates. `None` bounds mean all of the reduced
/// space.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperDomain {
    label: String,
    context: Arc<SuperContext>,
    bounds: Option<Vec<(Rational, Rational)>>,
}

impl SuperDomain {
    pub fn new(
        label: &str,
        context: Arc<SuperContext>,
        bounds: Option<Vec<(Rational, Rational)>>,
    ) -> Result<Self> {
        if let Some(b) = &bounds {
            if b.len() != context.even_len() {
                return Err(Error::ArityMismatch {
                    what: "box intervals",
                    expected: context.even_len(),
                    got: b.len(),
                });
            }
            for (lo, hi) in b {
                if lo.cmp_value(hi) == std::cmp::Ordering::Greater {
                    return Err(Error::Invalid(format!(
                        "empty box interval [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(SuperDomain {
            label: label.to_string(),
            context,
            bounds,
        })
    }

    /// Unbounded domain with generated coordinate names `x1..xm`, `e1..en`.
    pub fn standard(label: &str, even: usize, odd: usize) -> Self {
        let ctx = SuperContext::new(
            (1..=even).map(|i| format!("x{i}")).collect(),
            (1..=odd).map(|i| format!("e{i}")).collect(),
        )
        .expect("generated names are valid");
        SuperDomain {
            label: label.to_string(),
            context: ctx,
            bounds: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn context(&self) -> &Arc<SuperContext> {
        &self.context
    }

    pub fn dim(&self) -> SuperDim {
        SuperDim::new(self.context.even_len(), self.context.odd_len())
    }

    pub fn bounds(&self) -> Option<&[(Rational, Rational)]> {
        self.bounds.as_deref()
    }

    /// Chart identity: same coordinate names in the same order. The label and
    /// the box are presentation data and do not participate.
    pub fn same_chart(&self, other: &SuperDomain) -> bool {
        self.context == other.context
    }

    /// Whether the point's even coordinates lie in the box (closed, with
    /// `tol` slack for approximate values). Points with missing coordinates
    /// are an error, not a miss.
    pub fn contains(&self, point: &EvenPoint, tol: f64) -> Result<bool> {
        let names = self.context.even_names();
        let values = point
            .values_for(names)
            .ok_or_else(|| Error::MissingBinding(format!("point lacks a coordinate of {}", self.label)))?;
        let Some(bounds) = &self.bounds else {
            return Ok(true);
        };
        for (v, (lo, hi)) in values.iter().zip(bounds) {
            let inside = match v {
                Scalar::Exact(r) => {
                    lo.cmp_value(r) != std::cmp::Ordering::Greater
                        && r.cmp_value(hi) != std::cmp::Ordering::Greater
                }
                Scalar::Approx(x) => *x >= lo.to_f64() - tol && *x <= hi.to_f64() + tol,
            };
            if !inside {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A map between superdomains, held as target-coordinate pullbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperMorphism {
    name: String,
    source: SuperDomain,
    target: SuperDomain,
    even_images: Vec<SuperFunction>,
    odd_images: Vec<SuperFunction>,
}

/// Validates and builds a morphism from its coordinate images: counts must
/// match the target dimension, every image must live on the source, and the
/// parity of each image must match its coordinate.
pub fn make_morphism(
    name: &str,
    source: SuperDomain,
    target: SuperDomain,
    even_images: Vec<SuperFunction>,
    odd_images: Vec<SuperFunction>,
) -> Result<SuperMorphism> {
    if even_images.len() != target.dim().even {
        return Err(Error::ArityMismatch {
            what: "even coordinate images",
            expected: target.dim().even,
            got: even_images.len(),
        });
    }
    if odd_images.len() != target.dim().odd {
        return Err(Error::ArityMismatch {
            what: "odd coordinate images",
            expected: target.dim().odd,
            got: odd_images.len(),
        });
    }
    for img in even_images.iter().chain(&odd_images) {
        if img.context() != source.context() {
            return Err(Error::ContextMismatch(format!(
                "coordinate image of `{name}` does not live on source {}",
                source.label()
            )));
        }
    }
    for (k, img) in even_images.iter().enumerate() {
        if !matches!(img.parity(), Parity::Even) {
            return Err(Error::ParityViolation(format!(
                "image of even coordinate `{}` must be even",
                target.context().even_names()[k]
            )));
        }
    }
    for (k, img) in odd_images.iter().enumerate() {
        if !img.is_zero() && !matches!(img.parity(), Parity::Odd) {
            return Err(Error::ParityViolation(format!(
                "image of odd coordinate `{}` must be odd",
                target.context().odd_names()[k]
            )));
        }
    }
    Ok(SuperMorphism {
        name: name.to_string(),
        source,
        target,
        even_images,
        odd_images,
    })
}

impl SuperMorphism {
    pub fn identity(domain: &SuperDomain) -> Self {
        let ctx = domain.context();
        let even_images = ctx
            .even_names()
            .iter()
            .map(|v| SuperFunction::even_var(ctx, v).expect("context name"))
            .collect();
        let odd_images = ctx
            .odd_names()
            .iter()
            .map(|v| SuperFunction::odd_var(ctx, v).expect("context name"))
            .collect();
        SuperMorphism {
            name: format!("id_{}", domain.label()),
            source: domain.clone(),
            target: domain.clone(),
            even_images,
            odd_images,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &SuperDomain {
        &self.source
    }

    pub fn target(&self) -> &SuperDomain {
        &self.target
    }

    pub fn even_images(&self) -> &[SuperFunction] {
        &self.even_images
    }

    pub fn odd_images(&self) -> &[SuperFunction] {
        &self.odd_images
    }

    /// Pullback of a function on the target along this morphism.
    pub fn pullback(&self, f: &SuperFunction) -> Result<SuperFunction> {
        if f.context() != self.target.context() {
            return Err(Error::ContextMismatch(format!(
                "pullback argument does not live on target {}",
                self.target.label()
            )));
        }
        f.substitute(self.source.context(), &self.even_images, &self.odd_images)
    }

    /// `self` after `inner`: for `inner: X -> Y` and `self: Y -> Z` the
    /// composite `X -> Z`. Coordinate images compose contravariantly, by
    /// substituting the inner images into the outer ones. The middle domains
    /// must share the same chart (coordinate names); boxes are not compared.
    pub fn compose(&self, inner: &SuperMorphism) -> Result<SuperMorphism> {
        if !inner.target.same_chart(&self.source) {
            return Err(Error::DomainMismatch(format!(
                "cannot compose: `{}` maps into {} but `{}` starts at {}",
                inner.name,
                inner.target.label(),
                self.name,
                self.source.label()
            )));
        }
        let even_images = self
            .even_images
            .iter()
            .map(|g| inner.pullback_raw(g))
            .collect::<Result<Vec<_>>>()?;
        let odd_images = self
            .odd_images
            .iter()
            .map(|g| inner.pullback_raw(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(SuperMorphism {
            name: format!("{}.{}", self.name, inner.name),
            source: inner.source.clone(),
            target: self.target.clone(),
            even_images,
            odd_images,
        })
    }

    /// Pullback that only requires chart agreement, used by `compose` where
    /// the argument lives on a domain with the same coordinates as the target.
    fn pullback_raw(&self, f: &SuperFunction) -> Result<SuperFunction> {
        f.substitute(self.source.context(), &self.even_images, &self.odd_images)
    }

    /// Value of the reduced (underlying ordinary) map at an even point of the
    /// source. Checks the point against the source box; transcendental images
    /// make coordinates approximate, otherwise they stay exact.
    pub fn reduced_map_eval(&self, point: &EvenPoint, tol: f64) -> Result<EvenPoint> {
        if !self.source.contains(point, tol)? {
            return Err(Error::PointOutsideBox(format!(
                "{point} is not in the box of {}",
                self.source.label()
            )));
        }
        self.reduced_map_eval_unchecked(point)
    }

    /// Same evaluation without the box membership check; scanning code uses
    /// this on grid candidates that may fall outside.
    pub fn reduced_map_eval_unchecked(&self, point: &EvenPoint) -> Result<EvenPoint> {
        let names = self.target.context().even_names();
        let mut out = EvenPoint::new();
        for (name, img) in names.iter().zip(&self.even_images) {
            let value = img.reduce().eval(point)?;
            out.insert(name.clone(), value);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::parse_superfunction;

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

    #[test]
    fn composition_substitutes_images() {
        let x = domain("X", &["x"], &["s1", "s2"]);
        let y = domain("Y", &["y"], &["t1", "t2"]);
        let z = domain("Z", &["z"], &["u1"]);
        let phi = morphism("phi", &x, &y, &["x + s1*s2"], &["s1", "s2"]);
        let psi = morphism("psi", &y, &z, &["y^2"], &["y*t1 + t2"]);
        let comp = psi.compose(&phi).unwrap();
        // (x + s1 s2)^2 = x^2 + 2x s1 s2
        assert_eq!(
            comp.even_images()[0],
            parse_superfunction("x^2 + 2*x*s1*s2", x.context()).unwrap()
        );
        assert_eq!(
            comp.odd_images()[0],
            parse_superfunction("x*s1 + s2", x.context()).unwrap()
        );
    }

    #[test]
    fn identity_laws() {
        let x = domain("X", &["x"], &["s1"]);
        let y = domain("Y", &["y"], &["t1"]);
        let phi = morphism("phi", &x, &y, &["x^2"], &["x*s1"]);
        let idx = SuperMorphism::identity(&x);
        let idy = SuperMorphism::identity(&y);
        let left = idy.compose(&phi).unwrap();
        let right = phi.compose(&idx).unwrap();
        assert_eq!(left.even_images(), phi.even_images());
        assert_eq!(left.odd_images(), phi.odd_images());
        assert_eq!(right.even_images(), phi.even_images());
        assert_eq!(right.odd_images(), phi.odd_images());
    }

    #[test]
    fn wrong_parity_rejected() {
        let x = domain("X", &["x"], &["s1"]);
        let y = domain("Y", &["y"], &["t1"]);
        let ev = vec![parse_superfunction("s1", x.context()).unwrap()];
        let od = vec![parse_superfunction("x*s1", x.context()).unwrap()];
        match make_morphism("bad", x.clone(), y.clone(), ev, od) {
            Err(Error::ParityViolation(_)) => {}
            other => panic!("expected parity violation, got {other:?}"),
        }
    }

    #[test]
    fn image_count_must_match_target() {
        let x = domain("X", &["x"], &[]);
        let y = domain("Y", &["y1", "y2"], &[]);
        let ev = vec![parse_superfunction("x", x.context()).unwrap()];
        match make_morphism("short", x, y, ev, vec![]) {
            Err(Error::ArityMismatch { expected: 2, got: 1, .. }) => {}
            other => panic!("expected arity mismatch, got {other:?}"),
        }
    }

    #[test]
    fn reduced_map_strips_nilpotents() {
        let x = domain("X", &["x"], &["s1", "s2"]);
        let y = domain("Y", &["y"], &["t1", "t2"]);
        let phi = morphism("phi", &x, &y, &["x^2 + x*s1*s2"], &["s1", "s2"]);
        let mut p = EvenPoint::new();
        p.insert("x".into(), Scalar::Exact(Rational::from_int(3)));
        let q = phi.reduced_map_eval(&p, 1e-9).unwrap();
        assert_eq!(q.get("y"), Some(&Scalar::Exact(Rational::from_int(9))));
    }

    #[test]
    fn box_membership_enforced() {
        let ctx = SuperContext::new(vec!["x".into()], vec![]).unwrap();
        let src = SuperDomain::new(
            "X",
            ctx,
            Some(vec![(Rational::from_int(-1), Rational::from_int(1))]),
        )
        .unwrap();
        let dst = domain("Y", &["y"], &[]);
        let phi = make_morphism(
            "phi",
            src.clone(),
            dst,
            vec![parse_superfunction("x", src.context()).unwrap()],
            vec![],
        )
        .unwrap();
        let mut outside = EvenPoint::new();
        outside.insert("x".into(), Scalar::Exact(Rational::from_int(2)));
        match phi.reduced_map_eval(&outside, 1e-9) {
            Err(Error::PointOutsideBox(_)) => {}
            other => panic!("expected out-of-box error, got {other:?}"),
        }
    }
}
