//! Isotropic plane-stress material law and the quadratic norms weighting the
//! membrane and moment fields.
//!
//! The inverse-norm density is implemented verbatim as
//! ((1+nu)/E) (tr(A^2) - nu/(2nu+1) tr(A)^2); for nu = 0 it is the exact
//! algebraic dual of the forward norm.

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::la::{m3_ddot, m3_trace, M3};

#[derive(Clone, Copy, Debug)]
pub struct Material {
    pub youngs: f64,
    pub poisson: f64,
    pub thickness: f64,
}

impl Material {
    pub fn new(youngs: f64, poisson: f64, thickness: f64) -> Result<Self> {
        if youngs <= 0.0 {
            return Err(Error::Config(format!("Young's modulus {youngs} must be positive")));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(Error::Config(format!("Poisson ratio {poisson} outside [0, 0.5)")));
        }
        if thickness <= 0.0 {
            return Err(Error::Config(format!("thickness {thickness} must be positive")));
        }
        Ok(Material {
            youngs,
            poisson,
            thickness,
        })
    }
}

/// (E/(1-nu^2)) (nu tr(A)^2 + (1-nu) tr(A^2)) for symmetric tangential A.
pub fn norm_m_density<S: Scalar>(a: &M3<S>, mat: &Material) -> S {
    let nu = mat.poisson;
    let tr = m3_trace(a);
    let tr2 = m3_ddot(a, a);
    tr.mul(&tr)
        .mul_f(nu)
        .add(&tr2.mul_f(1.0 - nu))
        .mul_f(mat.youngs / (1.0 - nu * nu))
}

/// ((1+nu)/E) (tr(A^2) - nu/(2nu+1) tr(A)^2) for symmetric tangential A.
pub fn norm_minv_density<S: Scalar>(a: &M3<S>, mat: &Material) -> S {
    let nu = mat.poisson;
    let tr = m3_trace(a);
    let tr2 = m3_ddot(a, a);
    tr2.sub(&tr.mul(&tr).mul_f(nu / (2.0 * nu + 1.0)))
        .mul_f((1.0 + nu) / mat.youngs)
}

/// Constant 3x3 bilinear-form matrices of the two norms in the orthonormal
/// frame-mode coordinates (a, b, c) with A = a t1t1 + b (t1t2 + t2t1) + c t2t2:
/// tr(A) = a + c, tr(A^2) = a^2 + 2 b^2 + c^2.
pub fn minv_mode_form(mat: &Material) -> [[f64; 3]; 3] {
    let nu = mat.poisson;
    let s = (1.0 + nu) / mat.youngs;
    let q = nu / (2.0 * nu + 1.0);
    [
        [s * (1.0 - q), 0.0, s * (-q)],
        [0.0, 2.0 * s, 0.0],
        [s * (-q), 0.0, s * (1.0 - q)],
    ]
}

/// Plane-stress law applied to the Green strain:
/// Sigma = (E/(1-nu^2)) ((1-nu) E + nu tr(E) P_tau).
pub fn membrane_stress<S: Scalar>(e: &M3<S>, projector: &M3<S>, mat: &Material) -> M3<S> {
    let nu = mat.poisson;
    let c = mat.youngs / (1.0 - nu * nu);
    let tr = m3_trace(e);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            e[i][j]
                .mul_f(1.0 - nu)
                .add(&projector[i][j].mul(&tr).mul_f(nu))
                .mul_f(c)
        })
    })
}
