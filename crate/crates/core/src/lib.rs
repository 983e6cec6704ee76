//! Symbolic kernel for maps between superdomains: Grassmann-valued
//! coordinate functions, super Jacobians, rank classification, transversality
//! tests and preimage charts.

pub mod calculus;
pub mod error;
pub mod geometry;
pub mod grassmann;
pub mod interval;
pub mod matrix;
pub mod point;
pub mod preimage;
pub mod rational;
pub mod scalar;
pub mod symexpr;
pub mod transversality;

pub use calculus::{
    classify, jacobian, rank_pair, standard_immersion, standard_submersion, tangent_matrix,
    Classification, SuperJacobian, TangentMatrix,
};
pub use error::{Error, Result};
pub use geometry::{make_morphism, SuperDim, SuperDomain, SuperMorphism};
pub use grassmann::{
    monomial_normalize, parse_superfunction, OddMonomial, Parity, SuperContext, SuperFunction,
};
pub use interval::{eval_interval, Interval};
pub use matrix::{rank_exact, rank_numeric, Mat};
pub use point::EvenPoint;
pub use preimage::{
    codim_check, construct_preimage_affine, defining_submersion, overlap_consistency,
    projection_after_chart, verify_submersion_on_fiber, DefiningSubmersion, OverlapEvidence,
    OverlapPair, PreimageChart, PreimageResult, SubmersionEvidence,
};
pub use rational::Rational;
pub use scalar::{Scalar, DEFAULT_TOLERANCE};
pub use symexpr::{parse_expr, Generator, Monomial, SmoothExpr, Zeroness};
pub use transversality::{
    check_transversal, is_transversal_at, is_transversal_via_projection, locate_fiber_point,
    scan_preimage, AdaptedChart, DirectVerdict, FiberPoint, GridSpec, PointRecord, PointSource,
    ProjectionVerdict, Submanifold, TransversalityReport, VerdictScope,
};
