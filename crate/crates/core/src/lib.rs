//! Invariant differential geometry of plane and space curves under the
//! affine group hierarchy: Euclidean, similarity, special linear, linear,
//! equi-affine and fully affine transformation groups.
//!
//! The crate is layered:
//!
//! - [`jets`]: truncated derivative arithmetic and bracket determinants,
//!   the computational substrate for every invariant formula;
//! - [`curves`]: analytic curve catalog, affine maps, reparametrizations
//!   and sampled closed curves with spectral differentiation;
//! - [`invariants`]: group-invariant arc-length elements and curvatures,
//!   from the Euclidean frame through the fully affine invariants;
//! - [`variation`]: first and second variation of fully affine arc length,
//!   extremal families and their stability classification;
//! - [`flow`]: invariant curve flows, in particular the fully affine and
//!   equi-affine heat flows, with soliton verification;
//! - [`isoper`]: the fully affine isoperimetric inequality for ovals;
//! - [`cli`]: the `affgeo` command-line front end.

pub mod cli;
pub mod curves;
pub mod error;
pub mod flow;
pub mod invariants;
pub mod isoper;
pub mod jets;
pub mod spectral;
pub mod variation;

pub use error::{Error, Result};
