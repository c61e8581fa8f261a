//! Pointwise nonlinear shell kinematics: deformation gradient, cofactor
//! calculus, deformed frames, Green strain, dihedral angles and the
//! lagged-normal projection. Everything is generic over the AD scalar so the
//! same expressions serve energy evaluation and derivative assembly.
//!
//! The explicit directional-derivative formulas (minor-cofactor contractions
//! and their cross-product form) are provided alongside as an independent
//! route; tests hold the two against each other and against finite
//! differences.

use nalgebra::{Matrix3, Vector3};

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::la::*;

/// Deformation gradient F = P_tau + grad_tau u.
pub fn deformation_gradient<S: Scalar>(projector: &M3<S>, grad_u: &M3<S>) -> M3<S> {
    m3_add(projector, grad_u)
}

/// Cofactor matrix (f64 convenience over the generic kernel).
pub fn cofactor(a: &Matrix3<f64>) -> Matrix3<f64> {
    let m: M3<f64> = std::array::from_fn(|i| std::array::from_fn(|j| a[(i, j)]));
    m3_to_na(&m3_cofactor(&m))
}

/// Green strain E = 1/2 (F^T F - P_tau); tangential by construction.
pub fn green_strain<S: Scalar>(f: &M3<S>, projector: &M3<S>) -> M3<S> {
    let c = m3_mul(&m3_transpose(f), f);
    m3_scale(&m3_sub(&c, projector), &c[0][0].mul_f(0.0).add_f(0.5))
}

/// Green strain from the displacement gradient, algebraically identical to
/// [`green_strain`] with F = P + G but exactly zero at G = 0 (the projector
/// idempotency is used symbolically instead of numerically):
/// E = 1/2 (P G + G^T P + G^T G).
pub fn green_strain_from_grad<S: Scalar>(projector: &M3<S>, grad_u: &M3<S>) -> M3<S> {
    let pg = m3_mul(projector, grad_u);
    let gtg = m3_mul(&m3_transpose(grad_u), grad_u);
    let sym = m3_add(&pg, &m3_transpose(&pg));
    m3_scale(&m3_add(&sym, &gtg), &grad_u[0][0].mul_f(0.0).add_f(0.5))
}

/// Deformed frame vectors and dilations at a point of an edge.
#[derive(Clone, Debug)]
pub struct DeformedFrames<S: Scalar> {
    pub nu_hat: V3<S>,
    pub tau_hat: V3<S>,
    pub mu_hat: V3<S>,
    /// Area dilation J = |cof(F) nu|.
    pub j: S,
    /// Edge length dilation J_b = |F tau_e|.
    pub j_b: S,
}

/// Relative area-dilation tolerance below which the element counts as
/// inverted or collapsed.
pub const J_DEGENERACY_TOL: f64 = 1e-10;

/// Deformed normal, edge tangent and conormal per Eqs. for the pushed-forward
/// frame: nu_hat = cof(F) nu / |..|, tau_hat = F tau / |..|,
/// mu_hat = s (nu_hat x tau_hat).
pub fn deformed_frames<S: Scalar>(
    f: &M3<S>,
    nu: &[f64; 3],
    tau: &[f64; 3],
    conormal_sign: f64,
    element: usize,
) -> Result<DeformedFrames<S>> {
    let like = &f[0][0];
    let nu_c = v3_const(nu, like);
    let tau_c = v3_const(tau, like);
    let cof = m3_cofactor(f);
    let cn = m3_vec(&cof, &nu_c);
    let j = v3_norm(&cn);
    if j.val() <= J_DEGENERACY_TOL {
        return Err(Error::ElementInversion {
            element,
            j: j.val(),
        });
    }
    let nu_hat = v3_scale(&cn, &j.recip());
    let ft = m3_vec(f, &tau_c);
    let j_b = v3_norm(&ft);
    if j_b.val() <= J_DEGENERACY_TOL {
        return Err(Error::ElementInversion {
            element,
            j: j_b.val(),
        });
    }
    let tau_hat = v3_scale(&ft, &j_b.recip());
    let mu_hat = v3_scale(&v3_cross(&nu_hat, &tau_hat), &like.mul_f(0.0).add_f(conormal_sign));
    Ok(DeformedFrames {
        nu_hat,
        tau_hat,
        mu_hat,
        j,
        j_b,
    })
}

/// Deformed unit normal alone (area points).
pub fn deformed_normal<S: Scalar>(f: &M3<S>, nu: &[f64; 3], element: usize) -> Result<(V3<S>, S)> {
    let like = &f[0][0];
    let cn = m3_vec(&m3_cofactor(f), &v3_const(nu, like));
    let j = v3_norm(&cn);
    if j.val() <= J_DEGENERACY_TOL {
        return Err(Error::ElementInversion {
            element,
            j: j.val(),
        });
    }
    Ok((v3_scale(&cn, &j.recip()), j))
}

/// Projection of the lagged averaged normal orthogonal to the deformed edge
/// tangent, re-normalized: P_perp(w) / |P_perp(w)| with P_perp = I - tau tau^T.
pub fn lagged_averaged_normal<S: Scalar>(
    lagged: &[f64; 3],
    tau_hat: &V3<S>,
    edge: usize,
) -> Result<V3<S>> {
    let like = &tau_hat[0];
    let w = v3_const(lagged, like);
    let along = v3_dot(&w, tau_hat);
    let perp = v3_sub(&w, &v3_scale(tau_hat, &along));
    let n = v3_norm(&perp);
    if n.val() <= 1e-8 {
        return Err(Error::ProjectionDegenerate {
            edge,
            norm: n.val(),
        });
    }
    Ok(v3_scale(&perp, &n.recip()))
}

/// arccos clamp tolerance for roundoff at flat dihedrals.
pub const ACOS_CLAMP_TOL: f64 = 1e-10;

/// Angle between the projected lagged normal and the deformed conormal.
pub fn lagged_angle<S: Scalar>(
    lagged: &[f64; 3],
    tau_hat: &V3<S>,
    mu_hat: &V3<S>,
    edge: usize,
) -> Result<S> {
    let nbar = lagged_averaged_normal(lagged, tau_hat, edge)?;
    let d = v3_dot(&nbar, mu_hat);
    d.acos_clamped(ACOS_CLAMP_TOL).ok_or_else(|| {
        Error::Numeric(format!(
            "arccos argument {:.6e} out of range on edge {edge}",
            d.val()
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AngleMode {
    #[default]
    ExactArccos,
    Simplified,
}

/// Signed dihedral-angle difference between reference and deformed
/// configurations of a two-element edge, split over element boundaries:
/// Theta_ref - Theta_def with Theta = angle(<<nu>>, mu_L) + angle(<<nu>>, mu_R) - pi.
/// The simplified form is 2(<<nu_hat>> . mu_hat_L - <<nu>> . mu_L).
#[allow(clippy::too_many_arguments)]
pub fn dihedral_terms(
    tau: &Vector3<f64>,
    tau_hat: &Vector3<f64>,
    nu_l: &Vector3<f64>,
    nu_r: &Vector3<f64>,
    nu_hat_l: &Vector3<f64>,
    nu_hat_r: &Vector3<f64>,
    mode: AngleMode,
) -> Result<f64> {
    let mu_l = nu_l.cross(tau);
    let mu_r = -nu_r.cross(tau);
    let mu_hat_l = nu_hat_l.cross(tau_hat);
    let mu_hat_r = -nu_hat_r.cross(tau_hat);
    let avg_ref = (nu_l + nu_r).normalize();
    let avg_def = (nu_hat_l + nu_hat_r).normalize();
    match mode {
        AngleMode::ExactArccos => {
            let ac = |x: f64| -> Result<f64> {
                x.acos_clamped(ACOS_CLAMP_TOL)
                    .ok_or_else(|| Error::Numeric(format!("arccos argument {x:.6e} out of range")))
            };
            let theta_ref = ac(avg_ref.dot(&mu_l))? + ac(avg_ref.dot(&mu_r))?
                - std::f64::consts::PI;
            let theta_def = ac(avg_def.dot(&mu_hat_l))? + ac(avg_def.dot(&mu_hat_r))?
                - std::f64::consts::PI;
            Ok(theta_ref - theta_def)
        }
        AngleMode::Simplified => Ok(2.0 * (avg_def.dot(&mu_hat_l) - avg_ref.dot(&mu_l))),
    }
}

// ---------------------------------------------------------------------------
// Explicit directional-derivative calculus (minor-cofactor contractions).
// ---------------------------------------------------------------------------

/// A#_ij: the matrix with (A#_ij) : B = d/dt cof(A + tB)_ij at t = 0, built
/// by embedding the cofactor of the 2x2 submatrix with row i, column j
/// removed, with checkerboard sign.
pub fn a_sharp(a: &Matrix3<f64>, i: usize, j: usize) -> Matrix3<f64> {
    let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
    let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
    let sub = [
        [a[(r[0], c[0])], a[(r[0], c[1])]],
        [a[(r[1], c[0])], a[(r[1], c[1])]],
    ];
    // cof of [[a,b],[c,d]] is [[d,-c],[-b,a]].
    let cof = [[sub[1][1], -sub[1][0]], [-sub[0][1], sub[0][0]]];
    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = Matrix3::zeros();
    for (p, &rp) in r.iter().enumerate() {
        for (q, &cq) in c.iter().enumerate() {
            out[(rp, cq)] = sign * cof[p][q];
        }
    }
    out
}

/// Weighted contraction F#_{v,w} = sum_ij w_i v_j A#_ij (second subscript
/// pairs with the reference normal in the derivative formulas).
pub fn f_sharp(f: &Matrix3<f64>, w: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let c = w[i] * v[j];
            if c != 0.0 {
                out += c * a_sharp(f, i, j);
            }
        }
    }
    out
}

/// Cross-product form of F#_{nu,i} : grad_v for a right-handed orthonormal
/// triple (tau, mu, nu): ((grad_v tau) x (F mu) + (F tau) x (grad_v mu))_i.
pub fn f_sharp_nu_contraction_cross(
    f: &Matrix3<f64>,
    grad_v: &Matrix3<f64>,
    tau: &Vector3<f64>,
    mu: &Vector3<f64>,
) -> Vector3<f64> {
    (grad_v * tau).cross(&(f * mu)) + (f * tau).cross(&(grad_v * mu))
}

/// First variations of the deformed frame quantities in direction grad_v:
/// (dJ, d nu_hat, d J_b).
pub struct FrameVariations {
    pub d_j: f64,
    pub d_nu_hat: Vector3<f64>,
    pub d_j_b: f64,
}

pub fn directional_derivatives(
    f: &Matrix3<f64>,
    nu: &Vector3<f64>,
    tau: &Vector3<f64>,
    grad_v: &Matrix3<f64>,
    element: usize,
) -> Result<FrameVariations> {
    let cof = cofactor(f);
    let cn = cof * nu;
    let j = cn.norm();
    if j <= J_DEGENERACY_TOL {
        return Err(Error::ElementInversion { element, j });
    }
    let nu_hat = cn / j;
    let fs_nunu = f_sharp(f, &nu_hat, nu);
    let d_j = fs_nunu.dot(grad_v);
    let mut stack = Vector3::zeros();
    for i in 0..3 {
        let e = Vector3::from_fn(|k, _| if k == i { 1.0 } else { 0.0 });
        stack[i] = f_sharp(f, &e, nu).dot(grad_v);
    }
    let d_nu_hat = (stack - d_j * nu_hat) / j;
    let ft = f * tau;
    let tau_hat = ft / ft.norm();
    let d_j_b = tau_hat.dot(&(grad_v * tau));
    Ok(FrameVariations {
        d_j,
        d_nu_hat,
        d_j_b,
    })
}

trait AcosClamped {
    fn acos_clamped(self, tol: f64) -> Option<f64>;
}
impl AcosClamped for f64 {
    fn acos_clamped(self, tol: f64) -> Option<f64> {
        if self.abs() > 1.0 + tol {
            None
        } else {
            Some(self.clamp(-1.0, 1.0).acos())
        }
    }
}
