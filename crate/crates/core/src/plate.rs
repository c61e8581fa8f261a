//! Linear Kirchhoff plate in hybridized mixed form: scalar deflection w,
//! discontinuous moment tensor and edge rotations on a flat mesh,
//!
//!   L(w, sigma, alpha) = -|sigma|^2
//!     - sum_T [ int_T sigma : hess(w) + sum_E int_E (-dw/dmu + r alpha) sigma_mumu ]
//!     + int f w,
//!
//! which is the classical fourth-order plate saddle problem; the nonlinear
//! shell functional linearizes to exactly this system on a flat plate (up to
//! the material scaling), which the equivalence tests assert entrywise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::la::{m3_ddot, M3};
use crate::linsolve::{solve_symmetric, SymmetricSparse};
use crate::model::{EdgeRole, ShellModel};

/// Plate dof layout over a shell model's mesh: w per scalar Lagrange node,
/// then the shared rotation dofs, then per-element moments (condensed).
pub struct PlateSystem {
    /// Full symmetric system over [w | alpha | sigma] (dense, for the
    /// equivalence tests and small meshes).
    pub k: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub n_w: usize,
    pub n_alpha: usize,
    pub n_sigma: usize,
    /// Essential dofs among [w | alpha].
    pub fixed: Vec<bool>,
}

/// Assemble the hybridized plate system on the model's mesh. The model only
/// provides geometry, spaces and boundary roles; material scalings are not
/// applied (the moment block is the plain L2 norm).
pub fn plate_system(model: &ShellModel, area_load: f64) -> Result<PlateSystem> {
    for el in &model.elements {
        for vp in &el.vol {
            let wnorm: f64 = vp.weingarten.iter().flatten().map(|x| x * x).sum();
            if wnorm > 1e-20 {
                return Err(Error::Config(
                    "plate mode requires a flat mesh (curved element found)".into(),
                ));
            }
        }
    }
    let dm = &model.dofmap;
    let n_w = dm.n_u_nodes;
    let n_alpha = dm.n_alpha;
    let n_sigma = dm.n_sigma;
    let n = n_w + n_alpha + n_sigma;
    let mut k = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);

    for (ei, ectx) in model.elements.iter().enumerate() {
        let eld = &dm.elements[ei];
        let n_s = ectx.n_sigma;
        // Volume: -sigma : hess(w) coupling and -|sigma|^2 block, plus load.
        for vp in &ectx.vol {
            let frob: [[f64; 3]; 3] = frob_form(&vp.modes);
            for d in 0..n_s {
                let gd = dm.n_u_nodes + n_alpha + eld.sigma[d];
                for dd in 0..n_s {
                    let gdd = dm.n_u_nodes + n_alpha + eld.sigma[dd];
                    k[(gd, gdd)] -= 2.0
                        * vp.w
                        * vp.sigma_poly[d]
                        * vp.sigma_poly[dd]
                        * frob[ectx.sigma_modes[d]][ectx.sigma_modes[dd]];
                }
                // -int sigma : hess(w): hess of w at the point is
                // sum_i w_i hess_n[i].
                for (i, h) in vp.hess_n.iter().enumerate() {
                    let gi = eld.u_nodes[i];
                    let c = vp.w
                        * vp.sigma_poly[d]
                        * m3_ddot(&mode_m3(&vp.modes[ectx.sigma_modes[d]]), h);
                    k[(gd, gi)] -= c;
                    k[(gi, gd)] -= c;
                }
            }
            for (i, _) in vp.grad_n.iter().enumerate() {
                let _ = i;
            }
        }
        // Load vector: int f N_i.
        if area_load != 0.0 {
            let sb = model.spaces.lagrange_basis(ectx.shape);
            let domain = match ectx.shape {
                crate::mesh::ElemShape::Tri => crate::quadrature::RefDomain::Tri,
                crate::mesh::ElemShape::Quad => crate::quadrature::RefDomain::Quad,
            };
            let rule = crate::quadrature::quadrature_for(domain, 2 * model.spaces.order + 2)?;
            for (q, p) in rule.points.iter().enumerate() {
                let cd = crate::mesh::chart_data(&model.mesh, ei, p)?;
                let vals = sb.eval(p);
                let w = rule.weights[q] * cd.frame.weight;
                for (i, &gn) in eld.u_nodes.iter().enumerate() {
                    rhs[gn] += w * area_load * vals[i];
                }
            }
        }
        // Edge terms: (-dw/dmu + r alpha) sigma_mumu per incident edge.
        let korder = model.spaces.order;
        for (le, ec) in ectx.edges.iter().enumerate() {
            for ep in &ec.points {
                for d in 0..n_s {
                    let gd = dm.n_u_nodes + n_alpha + eld.sigma[d];
                    let smm = ep.sigma_mumu[d];
                    if smm == 0.0 {
                        continue;
                    }
                    for (i, g) in ep.grad_n.iter().enumerate() {
                        let gi = eld.u_nodes[i];
                        let dwdmu: f64 = (0..3).map(|c| g[c] * ep.mu[c]).sum();
                        let c = ep.w * smm * dwdmu;
                        k[(gd, gi)] += c;
                        k[(gi, gd)] += c;
                    }
                    for b in 0..korder {
                        let ga = dm.n_u_nodes + eld.alpha[le].1[b];
                        let c = ep.w * smm * ec.r_sign * ep.alpha_basis[b];
                        k[(gd, ga)] -= c;
                        k[(ga, gd)] -= c;
                    }
                }
            }
        }
    }

    // Essential constraints: clamped edges fix w and alpha.
    let mut fixed = vec![false; n_w + n_alpha];
    let per_edge = model.spaces.order - 1;
    let base = model.mesh.vertices.len();
    for (me, role) in model.edge_roles.iter().enumerate() {
        if *role != EdgeRole::ClampedWall {
            continue;
        }
        let (lo, hi) = model.mesh.edges[me].vertices;
        fixed[lo] = true;
        fixed[hi] = true;
        for p in 0..per_edge {
            fixed[base + me * per_edge + p] = true;
        }
        for &ad in &dm.alpha_of_edge[me] {
            fixed[n_w + ad] = true;
        }
    }
    Ok(PlateSystem {
        k,
        rhs,
        n_w,
        n_alpha,
        n_sigma,
        fixed,
    })
}

fn frob_form(_modes: &[M3<f64>; 3]) -> [[f64; 3]; 3] {
    // Frobenius products of the orthonormal frame modes are constant.
    [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]
}

fn mode_m3(m: &M3<f64>) -> M3<f64> {
    *m
}

/// Solve the clamped plate for deflections; returns the w vector.
///
/// Moments are condensed element-locally (their block is definite), so the
/// retained sparse system over (w, alpha) factorizes without pivoting.
pub fn plate_solve(model: &ShellModel, area_load: f64) -> Result<Vec<f64>> {
    let dm = &model.dofmap;
    let n_w = dm.n_u_nodes;
    let n_alpha = dm.n_alpha;

    // Essential constraints: clamped edges fix w and alpha.
    let mut fixed = vec![false; n_w + n_alpha];
    let per_edge = model.spaces.order - 1;
    let base = model.mesh.vertices.len();
    for (me, role) in model.edge_roles.iter().enumerate() {
        if *role != EdgeRole::ClampedWall {
            continue;
        }
        let (lo, hi) = model.mesh.edges[me].vertices;
        fixed[lo] = true;
        fixed[hi] = true;
        for p in 0..per_edge {
            fixed[base + me * per_edge + p] = true;
        }
        for &ad in &dm.alpha_of_edge[me] {
            fixed[n_w + ad] = true;
        }
    }
    let mut free_index = vec![usize::MAX; n_w + n_alpha];
    let mut n_free = 0usize;
    for i in 0..n_w + n_alpha {
        if !fixed[i] {
            free_index[i] = n_free;
            n_free += 1;
        }
    }

    let mut matrix = SymmetricSparse::new(n_free);
    let mut rhs = vec![0.0_f64; n_free];

    let korder = model.spaces.order;
    for (ei, ectx) in model.elements.iter().enumerate() {
        let eld = &dm.elements[ei];
        // Flatness guard shared with plate_system.
        for vp in &ectx.vol {
            let wn: f64 = vp.weingarten.iter().flatten().map(|x| x * x).sum();
            if wn > 1e-20 {
                return Err(Error::Config(
                    "plate mode requires a flat mesh (curved element found)".into(),
                ));
            }
        }
        let n_s = ectx.n_sigma;
        let nr_loc = ectx.n_nodes + ectx.n_alpha; // local retained: w nodes + alphas
        let mut kss = DMatrix::<f64>::zeros(n_s, n_s);
        let mut ksr = DMatrix::<f64>::zeros(n_s, nr_loc);
        let mut fr = DVector::<f64>::zeros(nr_loc);
        for vp in &ectx.vol {
            let frob = frob_form(&vp.modes);
            for d in 0..n_s {
                for dd in 0..n_s {
                    kss[(d, dd)] -= 2.0
                        * vp.w
                        * vp.sigma_poly[d]
                        * vp.sigma_poly[dd]
                        * frob[ectx.sigma_modes[d]][ectx.sigma_modes[dd]];
                }
                for (i, h) in vp.hess_n.iter().enumerate() {
                    ksr[(d, i)] -= vp.w
                        * vp.sigma_poly[d]
                        * m3_ddot(&mode_m3(&vp.modes[ectx.sigma_modes[d]]), h);
                }
            }
        }
        for (le, ec) in ectx.edges.iter().enumerate() {
            for ep in &ec.points {
                for d in 0..n_s {
                    let smm = ep.sigma_mumu[d];
                    if smm == 0.0 {
                        continue;
                    }
                    for (i, g) in ep.grad_n.iter().enumerate() {
                        let dwdmu: f64 = (0..3).map(|c| g[c] * ep.mu[c]).sum();
                        ksr[(d, i)] += ep.w * smm * dwdmu;
                    }
                    for b in 0..korder {
                        ksr[(d, ectx.n_nodes + le * korder + b)] -=
                            ep.w * smm * ec.r_sign * ep.alpha_basis[b];
                    }
                }
            }
        }
        if area_load != 0.0 {
            let sb = model.spaces.lagrange_basis(ectx.shape);
            let domain = match ectx.shape {
                crate::mesh::ElemShape::Tri => crate::quadrature::RefDomain::Tri,
                crate::mesh::ElemShape::Quad => crate::quadrature::RefDomain::Quad,
            };
            let rule = crate::quadrature::quadrature_for(domain, 2 * korder + 2)?;
            for (q, p) in rule.points.iter().enumerate() {
                let cd = crate::mesh::chart_data(&model.mesh, ei, p)?;
                let vals = sb.eval(p);
                let w = rule.weights[q] * cd.frame.weight;
                for (i, _) in eld.u_nodes.iter().enumerate() {
                    fr[i] += w * area_load * vals[i];
                }
            }
        }
        // Schur: K_rr - K_rs K_ss^-1 K_sr with K_rr = 0 for the plate.
        let lu = kss.lu();
        let kinv_ksr = lu
            .solve(&ksr)
            .ok_or(Error::SingularCondensation { element: ei })?;
        let k_schur = -ksr.transpose() * kinv_ksr;
        // Local retained dof -> global [w | alpha] index.
        let glob = |loc: usize| -> usize {
            if loc < ectx.n_nodes {
                eld.u_nodes[loc]
            } else {
                let a = loc - ectx.n_nodes;
                n_w + eld.alpha[a / korder].1[a % korder]
            }
        };
        for a in 0..nr_loc {
            let ga = glob(a);
            if fixed[ga] {
                continue;
            }
            rhs[free_index[ga]] += fr[a];
            for b in 0..nr_loc {
                let gb = glob(b);
                if !fixed[gb] {
                    matrix.add(free_index[ga], free_index[gb], k_schur[(a, b)]);
                }
            }
        }
    }

    let (x, _) = solve_symmetric(&matrix, &rhs, false)?;
    let mut w = vec![0.0; n_w];
    for i in 0..n_w {
        if !fixed[i] {
            w[i] = x[free_index[i]];
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Material;
    use crate::mesh::{benchmark_mesh, BenchmarkParams};
    use crate::model::{BcKind, LoadProgram, ProblemSpec, ShellModel, SolverConfig};
    use nalgebra::Vector3;

    fn plate_model(grid: usize, order: usize) -> ShellModel {
        let mesh = benchmark_mesh(
            "flat_plate",
            &BenchmarkParams {
                grid: (grid, grid),
                ..Default::default()
            },
        )
        .unwrap();
        let spec = ProblemSpec {
            material: Material::new(1.0, 0.0, 0.1).unwrap(),
            bcs: vec![(
                "clamped".into(),
                BcKind::Clamped {
                    displacement: Vector3::zeros(),
                },
            )],
            loads: LoadProgram::default(),
            point_constraints: vec![],
        };
        ShellModel::new(mesh, order, spec, SolverConfig::default()).unwrap()
    }

    #[test]
    fn clamped_plate_zero_load_is_zero() {
        let model = plate_model(3, 1);
        let w = plate_solve(&model, 0.0).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
    }

    /// Self-convergence: the center deflection of a k=1 run on a fine grid
    /// matches a k=3 run on a coarse grid to 1e-3 relative.
    #[test]
    fn clamped_plate_self_convergence() {
        let fine = plate_model(64, 1);
        let wf = plate_solve(&fine, 1.0).unwrap();
        let vf = fine
            .mesh
            .vertex_at(&Vector3::new(0.5, 0.5, 0.0), 1e-9)
            .unwrap();
        let center_fine = wf[vf];

        let coarse = plate_model(6, 3);
        let wc = plate_solve(&coarse, 1.0).unwrap();
        let vc = coarse
            .mesh
            .vertex_at(&Vector3::new(0.5, 0.5, 0.0), 1e-9)
            .unwrap();
        let center_coarse = wc[vc];

        let rel = (center_fine - center_coarse).abs() / center_coarse.abs();
        assert!(rel < 1e-3, "rel {rel:.3e}: fine {center_fine:.8e} vs coarse {center_coarse:.8e}");
        assert!(center_coarse.abs() > 1e-6);
    }

    #[test]
    fn curved_mesh_rejected() {
        let mesh = benchmark_mesh(
            "twisted_beam",
            &BenchmarkParams {
                grid: (2, 4),
                ..Default::default()
            },
        )
        .unwrap();
        let spec = ProblemSpec {
            material: Material::new(1.0, 0.0, 0.1).unwrap(),
            bcs: vec![],
            loads: LoadProgram::default(),
            point_constraints: vec![],
        };
        let model = ShellModel::new(mesh, 1, spec, SolverConfig::default()).unwrap();
        assert!(matches!(
            plate_system(&model, 1.0),
            Err(Error::Config(_))
        ));
    }
}
