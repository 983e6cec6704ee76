//! First-order data of a morphism: the super Jacobian, its value at points
//! of the reduced space, and the immersion/submersion classification.
//!
//! For a morphism with even images `f` and odd images `g` the Jacobian is
//! the block matrix
//!
//! ```text
//!   [ df/dx   -df/dxi ]
//!   [ dg/dx    dg/dxi ]
//! ```
//!
//! with rows indexed by target coordinates and columns by source
//! coordinates; odd derivatives act from the left. The diagonal blocks are
//! even and the off-diagonal blocks odd, so at a point of the reduced space
//! only the diagonal survives: the tangent map is the pair of reduced
//! diagonal blocks evaluated at the point.

use crate::error::Result;
use crate::geometry::{SuperDomain, SuperMorphism};
use crate::grassmann::SuperFunction;
use crate::matrix::Mat;
use crate::point::EvenPoint;
use crate::scalar::Scalar;

/// The four blocks of the super Jacobian, as functions on the source.
#[derive(Debug, Clone)]
pub struct SuperJacobian {
    /// d(even images)/d(even coords), target-even by source-even.
    pub a: Mat<SuperFunction>,
    /// -d(even images)/d(odd coords), target-even by source-odd.
    pub b: Mat<SuperFunction>,
    /// d(odd images)/d(even coords), target-odd by source-even.
    pub c: Mat<SuperFunction>,
    /// d(odd images)/d(odd coords), target-odd by source-odd.
    pub d: Mat<SuperFunction>,
}

/// Symbolic super Jacobian of a morphism.
pub fn jacobian(psi: &SuperMorphism) -> Result<SuperJacobian> {
    let src = psi.source().context();
    let even_vars: Vec<&str> = src.even_names().iter().map(String::as_str).collect();
    let odd_vars: Vec<&str> = src.odd_names().iter().map(String::as_str).collect();
    let f = psi.even_images();
    let g = psi.odd_images();

    let grid = |images: &[SuperFunction], vars: &[&str], odd: bool, negate: bool| -> Result<Mat<SuperFunction>> {
        let mut data = Vec::with_capacity(images.len() * vars.len());
        for img in images {
            for v in vars {
                let d = if odd { img.d_odd(v)? } else { img.d_even(v)? };
                data.push(if negate { d.neg() } else { d });
            }
        }
        Ok(Mat::new(images.len(), vars.len(), data))
    };

    Ok(SuperJacobian {
        a: grid(f, &even_vars, false, false)?,
        b: grid(f, &odd_vars, true, true)?,
        c: grid(g, &even_vars, false, false)?,
        d: grid(g, &odd_vars, true, false)?,
    })
}

/// Value of the tangent map at a point of the reduced source: the two
/// diagonal blocks of the Jacobian, reduced and evaluated.
#[derive(Debug, Clone)]
pub struct TangentMatrix {
    pub even: Mat<Scalar>,
    pub odd: Mat<Scalar>,
}

pub fn tangent_matrix(psi: &SuperMorphism, point: &EvenPoint) -> Result<TangentMatrix> {
    let jac = jacobian(psi)?;
    let eval = |m: &Mat<SuperFunction>| -> Result<Mat<Scalar>> {
        let mut data = Vec::with_capacity(m.rows() * m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                data.push(m.at(r, c).reduce().eval(point)?);
            }
        }
        Ok(Mat::new(m.rows(), m.cols(), data))
    };
    Ok(TangentMatrix {
        even: eval(&jac.a)?,
        odd: eval(&jac.d)?,
    })
}

/// Ranks of the two blocks of a tangent matrix.
pub fn rank_pair(tm: &TangentMatrix, tol: f64) -> (usize, usize) {
    (tm.even.rank(tol), tm.odd.rank(tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Immersion,
    Submersion,
    /// Both classifications hold; the tangent map is an isomorphism.
    Both,
    Neither,
}

impl Classification {
    pub fn is_submersion(self) -> bool {
        matches!(self, Classification::Submersion | Classification::Both)
    }

    pub fn is_immersion(self) -> bool {
        matches!(self, Classification::Immersion | Classification::Both)
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Immersion => "immersion",
            Classification::Submersion => "submersion",
            Classification::Both => "both",
            Classification::Neither => "neither",
        };
        write!(f, "{s}")
    }
}

/// Classifies the tangent map at one point: an immersion needs both blocks
/// of full column rank, a submersion both blocks of full row rank.
pub fn classify(psi: &SuperMorphism, point: &EvenPoint, tol: f64) -> Result<Classification> {
    let tm = tangent_matrix(psi, point)?;
    let (re, ro) = rank_pair(&tm, tol);
    let src = psi.source().dim();
    let dst = psi.target().dim();
    let immersion = re == src.even && ro == src.odd;
    let submersion = re == dst.even && ro == dst.odd;
    Ok(match (immersion, submersion) {
        (true, true) => Classification::Both,
        (true, false) => Classification::Immersion,
        (false, true) => Classification::Submersion,
        (false, false) => Classification::Neither,
    })
}

/// The local model of an immersion: the inclusion of the first `m|n`
/// coordinates into `m+r|n+s`, with the new coordinates pulled back to zero.
pub fn standard_immersion(m: usize, n: usize, r: usize, s: usize) -> SuperMorphism {
    let src = SuperDomain::standard("M", m, n);
    let dst = SuperDomain::standard("N", m + r, n + s);
    let ctx = src.context().clone();
    let even = (0..m + r)
        .map(|k| {
            if k < m {
                SuperFunction::even_var(&ctx, &format!("x{}", k + 1)).unwrap()
            } else {
                SuperFunction::zero(&ctx)
            }
        })
        .collect();
    let odd = (0..n + s)
        .map(|k| {
            if k < n {
                SuperFunction::odd_var(&ctx, &format!("e{}", k + 1)).unwrap()
            } else {
                SuperFunction::zero(&ctx)
            }
        })
        .collect();
    crate::geometry::make_morphism("std_immersion", src, dst, even, odd)
        .expect("model data is well formed")
}

/// The local model of a submersion: the projection of `m+r|n+s` onto the
/// first `m|n` coordinates.
pub fn standard_submersion(m: usize, n: usize, r: usize, s: usize) -> SuperMorphism {
    let src = SuperDomain::standard("N", m + r, n + s);
    let dst = SuperDomain::standard("M", m, n);
    let ctx = src.context().clone();
    let even = (0..m)
        .map(|k| SuperFunction::even_var(&ctx, &format!("x{}", k + 1)).unwrap())
        .collect();
    let odd = (0..n)
        .map(|k| SuperFunction::odd_var(&ctx, &format!("e{}", k + 1)).unwrap())
        .collect();
    crate::geometry::make_morphism("std_submersion", src, dst, even, odd)
        .expect("model data is well formed")
}
