//! Geometrically nonlinear Kirchhoff-Love shell finite elements.
//!
//! The displacement is interpolated with continuous Lagrange elements, the
//! bending moment with discontinuous symmetric tangential tensors whose
//! normal-normal continuity is reinforced through an edge rotation field, so
//! the moment (and the auxiliary membrane field used against locking) can be
//! condensed element-locally. Distributional angle terms on element edges
//! carry the bending energy of the facetted geometry, which makes kinks and
//! branched cross-sections work without special casing.

pub mod assembly;
pub mod bench;
pub mod dual;
pub mod error;
pub mod geomkin;
pub mod la;
pub mod linsolve;
pub mod material;
pub mod mesh;
pub mod model;
pub mod newton;
pub mod plate;
pub mod postprocess;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};
