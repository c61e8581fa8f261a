//! Residual and tangent assembly. The element integrand is written once,
//! generically over the AD scalar: instantiated with `f64` it evaluates the
//! Lagrangian pieces, with [`Dual2`] it yields the exact first and second
//! variations used by Newton. Moment and membrane-aux blocks (and interior
//! displacement dofs) are condensed element-locally; the retained system
//! couples boundary displacement dofs and edge rotations.

use nalgebra::{DMatrix, DVector};

use crate::dual::{tri_idx, Dual2, Scalar};
use crate::error::{Error, Result};
use crate::geomkin::{
    deformation_gradient, deformed_frames, deformed_normal, green_strain_from_grad,
    lagged_averaged_normal, AngleMode, ACOS_CLAMP_TOL,
};
use crate::la::*;
use crate::linsolve::{solve_symmetric, SolveInfo, SymmetricSparse};
use crate::material::norm_m_density;
use crate::model::{ElementCtx, LinearSolverKind, ShellModel, State};

/// Element Lagrangian pieces as functions of the local displacement vector.
pub struct ElementEval<S: Scalar> {
    /// Membrane energy (zero when the locking augmentation replaces it).
    pub membrane: S,
    /// Moment coupling b_d(u): sigma pairs as -sigma^T (b + C alpha).
    pub b: Vec<S>,
    /// Membrane-aux coupling e_d(u): R pairs as +R^T e.
    pub e_pair: Vec<S>,
}

/// Evaluate the element integrand for local displacement values `u_loc`
/// (layout: 3 * node + component).
pub fn element_kernel<S: Scalar>(
    model: &ShellModel,
    ectx: &ElementCtx,
    u_loc: &[S],
    lagged: &[[f64; 3]],
    locking: bool,
) -> Result<ElementEval<S>> {
    let like = &u_loc[0];
    let zero = like.mul_f(0.0);
    let mat = &model.material;
    let t = mat.thickness;
    let mut membrane = zero.clone();
    let mut b: Vec<S> = vec![zero.clone(); ectx.n_sigma];
    let mut e_pair: Vec<S> = if locking {
        vec![zero.clone(); ectx.n_raux]
    } else {
        Vec::new()
    };
    let n_nodes = ectx.n_nodes;

    for vp in &ectx.vol {
        // Surface gradient of u (ambient 3x3).
        let mut grad_u = m3_zero_like(like);
        for i in 0..n_nodes {
            for c in 0..3 {
                let uv = &u_loc[3 * i + c];
                for d in 0..3 {
                    let g = vp.grad_n[i][d];
                    if g != 0.0 {
                        grad_u[c][d] = grad_u[c][d].add(&uv.mul_f(g));
                    }
                }
            }
        }
        let projector = m3_const(&vp.projector, like);
        let f = deformation_gradient(&projector, &grad_u);
        let e = green_strain_from_grad(&projector, &grad_u);
        if locking {
            // <R, E> pairing: e_d = int p_d (S_mode : E).
            let cm: [S; 3] = std::array::from_fn(|m| contract_const(&vp.modes[m], &e));
            for (d, &pd) in vp.raux_poly.iter().enumerate() {
                let c = vp.w * pd;
                e_pair[d] = e_pair[d].add(&cm[ectx.raux_modes[d]].mul_f(c));
            }
        } else {
            let dens = norm_m_density(&e, mat);
            membrane = membrane.add(&dens.mul_f(vp.w * t / 2.0));
        }

        // Deformed normal and the bending volume integrand
        // A = H_nu_hat + (1 - nu . nu_hat) grad_tau nu.
        let (nu_hat, _j) = deformed_normal(&f, &vp.nu, ectx.element)?;
        // Component Hessians are linear in u: H_k = sum_i u[3i+k] hess_n[i].
        let mut a: M3<S> = m3_zero_like(like);
        for k in 0..3 {
            let nk = &nu_hat[k];
            for i in 0..n_nodes {
                let uv = &u_loc[3 * i + k];
                let h = &vp.hess_n[i];
                // a += (u_ik * nu_hat_k) * hess_n[i]
                let c = uv.mul(nk);
                for r in 0..3 {
                    for s in 0..3 {
                        if h[r][s] != 0.0 {
                            a[r][s] = a[r][s].add(&c.mul_f(h[r][s]));
                        }
                    }
                }
            }
        }
        // (1 - nu . nu_hat) * weingarten (zero on flat elements).
        let w_norm: f64 = vp.weingarten.iter().flatten().map(|x| x * x).sum();
        if w_norm > 0.0 {
            let nu_dot = nu_hat[0]
                .mul_f(vp.nu[0])
                .add(&nu_hat[1].mul_f(vp.nu[1]))
                .add(&nu_hat[2].mul_f(vp.nu[2]));
            let fac = nu_dot.neg().add_f(1.0);
            for r in 0..3 {
                for s in 0..3 {
                    if vp.weingarten[r][s] != 0.0 {
                        a[r][s] = a[r][s].add(&fac.mul_f(vp.weingarten[r][s]));
                    }
                }
            }
        }
        let cm: [S; 3] = std::array::from_fn(|m| contract_const(&vp.modes[m], &a));
        for (d, &pd) in vp.sigma_poly.iter().enumerate() {
            let c = vp.w * pd;
            b[d] = b[d].add(&cm[ectx.sigma_modes[d]].mul_f(c));
        }
    }

    // Edge angle terms: b_d -= int g * sigma_mumu_d with
    // g = ref_angle - angle(projected lagged, deformed conormal).
    for ec in &ectx.edges {
        for (q, ep) in ec.points.iter().enumerate() {
            let mut grad_u = m3_zero_like(like);
            for i in 0..n_nodes {
                for c in 0..3 {
                    let uv = &u_loc[3 * i + c];
                    for d in 0..3 {
                        let g = ep.grad_n[i][d];
                        if g != 0.0 {
                            grad_u[c][d] = grad_u[c][d].add(&uv.mul_f(g));
                        }
                    }
                }
            }
            let projector = m3_const(&ep.projector, like);
            let f = deformation_gradient(&projector, &grad_u);
            let frames = deformed_frames(&f, &ep.nu, &ec.tau, ec.conormal_sign, ectx.element)?;
            let w_lag = &lagged[ec.mesh_edge * model.n_edge_q + q];
            let nbar = lagged_averaged_normal(w_lag, &frames.tau_hat, ec.mesh_edge)?;
            let dot = v3_dot(&nbar, &frames.mu_hat);
            let g = match model.config.angle_mode {
                AngleMode::ExactArccos => {
                    let ang = dot.acos_clamped(ACOS_CLAMP_TOL).ok_or_else(|| {
                        Error::Numeric(format!(
                            "arccos argument {:.6e} out of range on edge {}",
                            dot.val(),
                            ec.mesh_edge
                        ))
                    })?;
                    ang.neg().add_f(ep.ref_angle)
                }
                // ref_angle stores arccos(w0 . mu); its cosine restores the dot.
                AngleMode::Simplified => dot.add_f(-ep.ref_angle.cos()),
            };
            for (d, &smm) in ep.sigma_mumu.iter().enumerate() {
                let c = ep.w * smm;
                if c != 0.0 {
                    b[d] = b[d].sub(&g.mul_f(c));
                }
            }
        }
    }

    Ok(ElementEval {
        membrane,
        b,
        e_pair,
    })
}

/// S_m : A for a constant mode tensor.
fn contract_const<S: Scalar>(mode: &M3<f64>, a: &M3<S>) -> S {
    let mut acc = a[0][0].mul_f(mode[0][0]);
    for r in 0..3 {
        for c in 0..3 {
            if r == 0 && c == 0 {
                continue;
            }
            if mode[r][c] != 0.0 {
                acc = acc.add(&a[r][c].mul_f(mode[r][c]));
            }
        }
    }
    acc
}

/// Reference of one local dof into the global fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalDof {
    /// Retained id (boundary-entity displacement or rotation).
    Retained(usize),
    /// Condensed: full displacement dof id (interior node component).
    CondensedU(usize),
    CondensedSigma(usize),
    CondensedRaux(usize),
}

/// Dense local Newton system of one element over [u | alpha | sigma | R].
pub struct LocalSystem {
    pub k: DMatrix<f64>,
    pub r: DVector<f64>,
    pub dofs: Vec<LocalDof>,
}

/// Local dof layout of an element.
pub fn local_dofs(model: &ShellModel, ei: usize, locking: bool) -> Vec<LocalDof> {
    let eld = &model.dofmap.elements[ei];
    let mut dofs = Vec::new();
    for (i, &gn) in eld.u_nodes.iter().enumerate() {
        for c in 0..3 {
            let g = 3 * gn + c;
            if eld.u_node_interior[i] {
                dofs.push(LocalDof::CondensedU(g));
            } else {
                dofs.push(LocalDof::Retained(model.index.u_retained[g].unwrap()));
            }
        }
    }
    for (_, alphas) in &eld.alpha {
        for &ad in alphas {
            dofs.push(LocalDof::Retained(model.index.alpha_retained[ad]));
        }
    }
    for &sd in &eld.sigma {
        dofs.push(LocalDof::CondensedSigma(sd));
    }
    if locking {
        for &rd in &eld.raux {
            dofs.push(LocalDof::CondensedRaux(rd));
        }
    }
    dofs
}

/// Gather the local value of a dof from the state.
pub fn local_value(state: &State, d: &LocalDof) -> f64 {
    match *d {
        LocalDof::Retained(_) => unreachable!("retained values are gathered by field"),
        LocalDof::CondensedU(g) => state.u[g],
        LocalDof::CondensedSigma(g) => state.sigma[g],
        LocalDof::CondensedRaux(g) => state.raux[g],
    }
}

/// Build the dense Newton system of one element at the current state.
pub fn element_system(model: &ShellModel, ei: usize, state: &State) -> Result<LocalSystem> {
    let ectx = &model.elements[ei];
    let eld = &model.dofmap.elements[ei];
    let locking = model.config.locking;
    let n_u = ectx.n_u;
    let n_a = ectx.n_alpha;
    let n_s = ectx.n_sigma;
    let n_r = if locking { ectx.n_raux } else { 0 };
    let n = n_u + n_a + n_s + n_r;
    let off_a = n_u;
    let off_s = n_u + n_a;
    let off_r = off_s + n_s;

    // Seeded displacement values.
    let u_loc: Vec<Dual2> = (0..n_u)
        .map(|i| {
            let gn = eld.u_nodes[i / 3];
            Dual2::variable(state.u[3 * gn + (i % 3)], i, n_u)
        })
        .collect();
    let eval = element_kernel(model, ectx, &u_loc, &state.lagged, locking)?;

    let sigma_loc = DVector::from_iterator(n_s, eld.sigma.iter().map(|&d| state.sigma[d]));
    let alpha_loc = DVector::from_iterator(
        n_a,
        eld.alpha.iter().flat_map(|(_, ds)| ds.iter().map(|&d| state.alpha[d])),
    );
    let raux_loc = if locking {
        DVector::from_iterator(n_r, eld.raux.iter().map(|&d| state.raux[d]))
    } else {
        DVector::zeros(0)
    };

    let mut k = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);

    // Membrane (or aux-coupled) displacement block.
    for i in 0..n_u {
        r[i] += eval.membrane.g[i];
        for j in i..n_u {
            let h = eval.membrane.h[tri_idx(i, j)];
            k[(i, j)] += h;
            if i != j {
                k[(j, i)] += h;
            }
        }
    }
    // Moment coupling: L -= sigma^T (b(u) + C alpha).
    for d in 0..n_s {
        let bd = &eval.b[d];
        let sd = sigma_loc[d];
        r[off_s + d] -= bd.v;
        for i in 0..n_u {
            r[i] -= sd * bd.g[i];
            k[(i, off_s + d)] -= bd.g[i];
            k[(off_s + d, i)] -= bd.g[i];
            for j in i..n_u {
                let h = sd * bd.h[tri_idx(i, j)];
                k[(i, j)] -= h;
                if i != j {
                    k[(j, i)] -= h;
                }
            }
        }
    }
    // Quadratic moment block and rotation coupling.
    let qs = &ectx.q_sigma;
    let c = &ectx.c_sigma_alpha;
    for d in 0..n_s {
        let mut acc = 0.0;
        for dd in 0..n_s {
            acc += qs[(d, dd)] * sigma_loc[dd];
            k[(off_s + d, off_s + dd)] -= qs[(d, dd)];
        }
        r[off_s + d] -= acc;
        for a in 0..n_a {
            r[off_s + d] -= c[(d, a)] * alpha_loc[a];
            k[(off_s + d, off_a + a)] -= c[(d, a)];
            k[(off_a + a, off_s + d)] -= c[(d, a)];
            r[off_a + a] -= c[(d, a)] * sigma_loc[d];
        }
    }
    // Membrane-aux terms: L += R^T e(u) - 1/2 R^T Q_R R.
    if locking {
        let qr = &ectx.q_raux;
        for d in 0..n_r {
            let ed = &eval.e_pair[d];
            let rd = raux_loc[d];
            r[off_r + d] += ed.v;
            for i in 0..n_u {
                r[i] += rd * ed.g[i];
                k[(i, off_r + d)] += ed.g[i];
                k[(off_r + d, i)] += ed.g[i];
                for j in i..n_u {
                    let h = rd * ed.h[tri_idx(i, j)];
                    k[(i, j)] += h;
                    if i != j {
                        k[(j, i)] += h;
                    }
                }
            }
            let mut acc = 0.0;
            for dd in 0..n_r {
                acc += qr[(d, dd)] * raux_loc[dd];
                k[(off_r + d, off_r + dd)] -= qr[(d, dd)];
            }
            r[off_r + d] -= acc;
        }
    }

    // Dead loads on condensed (element-interior) displacement dofs; loads on
    // shared retained dofs are applied once at the global level.
    let lam = state.lambda;
    for i in 0..n_u {
        if eld.u_node_interior[i / 3] {
            let g = 3 * eld.u_nodes[i / 3] + (i % 3);
            r[i] -= lam * model.load_u[g];
        }
    }

    Ok(LocalSystem {
        k,
        r,
        dofs: local_dofs(model, ei, locking),
    })
}

/// Element condensation data retained for back-substitution.
pub struct ElementRecovery {
    pub kll_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub klr: DMatrix<f64>,
    pub rl: DVector<f64>,
    pub l_dofs: Vec<LocalDof>,
    pub r_dofs: Vec<usize>,
}

/// Assembled condensed system over free retained dofs.
pub struct AssembledSystem {
    pub matrix: SymmetricSparse,
    /// Newton right-hand side (-condensed residual with essential folding).
    pub rhs: Vec<f64>,
    pub recovery: Vec<ElementRecovery>,
    /// Norm of the full residual over free retained and condensed dofs.
    pub residual_norm: f64,
    /// Retained residual (free entries only; fixed entries zeroed).
    pub retained_residual: Vec<f64>,
}

/// Assemble the condensed Newton system at the current state.
///
/// `delta_fixed` carries the pending essential updates (target - current) per
/// retained dof, folded into the right-hand side.
pub fn assemble(model: &ShellModel, state: &State, delta_fixed: &[f64]) -> Result<AssembledSystem> {
    let idx = &model.index;
    let n_free = idx.n_free;
    let mut matrix = SymmetricSparse::new(n_free);
    let mut rhs = vec![0.0_f64; n_free];
    let mut retained_residual = vec![0.0_f64; idx.n_retained];
    let mut recovery = Vec::with_capacity(model.elements.len());
    let mut condensed_norm2 = 0.0_f64;

    for ei in 0..model.elements.len() {
        let ls = element_system(model, ei, state)?;
        let n = ls.dofs.len();
        // Partition local dofs.
        let mut l_idx = Vec::new();
        let mut r_idx = Vec::new();
        for (i, d) in ls.dofs.iter().enumerate() {
            match d {
                LocalDof::Retained(_) => r_idx.push(i),
                _ => l_idx.push(i),
            }
        }
        let nl = l_idx.len();
        let nr = r_idx.len();
        let _ = n;
        let kll = DMatrix::from_fn(nl, nl, |a, b| ls.k[(l_idx[a], l_idx[b])]);
        let klr = DMatrix::from_fn(nl, nr, |a, b| ls.k[(l_idx[a], r_idx[b])]);
        let krr = DMatrix::from_fn(nr, nr, |a, b| ls.k[(r_idx[a], r_idx[b])]);
        let rl = DVector::from_fn(nl, |a, _| ls.r[l_idx[a]]);
        let rr = DVector::from_fn(nr, |a, _| ls.r[r_idx[a]]);

        let kll_lu = kll.clone().lu();
        let kll_inv_klr = kll_lu
            .solve(&klr)
            .ok_or(Error::SingularCondensation { element: ei })?;
        let kll_inv_rl = kll_lu
            .solve(&rl)
            .ok_or(Error::SingularCondensation { element: ei })?;
        let k_schur = &krr - klr.transpose() * &kll_inv_klr;
        let r_schur = &rr - klr.transpose() * &kll_inv_rl;

        condensed_norm2 += rl.norm_squared();

        let r_dofs: Vec<usize> = r_idx
            .iter()
            .map(|&i| match ls.dofs[i] {
                LocalDof::Retained(g) => g,
                _ => unreachable!(),
            })
            .collect();

        for (a, &ga) in r_dofs.iter().enumerate() {
            retained_residual[ga] += r_schur[a];
            match idx.free_index[ga] {
                Some(fa) => {
                    for (b, &gb) in r_dofs.iter().enumerate() {
                        match idx.free_index[gb] {
                            Some(fb) => matrix.add(fa, fb, k_schur[(a, b)]),
                            None => {
                                // Fold pending essential update into the rhs.
                                rhs[fa] -= k_schur[(a, b)] * delta_fixed[gb];
                            }
                        }
                    }
                }
                None => {}
            }
        }

        recovery.push(ElementRecovery {
            kll_lu,
            klr,
            rl,
            l_dofs: l_idx.iter().map(|&i| ls.dofs[i]).collect(),
            r_dofs,
        });
    }

    // Dead loads on retained dofs, applied once per global dof.
    let lam = state.lambda;
    for n in 0..model.dofmap.n_u_nodes {
        for c in 0..3 {
            if let Some(g) = idx.u_retained[3 * n + c] {
                retained_residual[g] -= lam * model.load_u[3 * n + c];
            }
        }
    }
    for a in 0..model.dofmap.n_alpha {
        retained_residual[idx.alpha_retained[a]] -= lam * model.load_alpha[a];
    }

    let mut retained_free_norm2 = 0.0;
    for g in 0..idx.n_retained {
        match idx.free_index[g] {
            Some(f) => {
                rhs[f] -= retained_residual[g];
                retained_free_norm2 += retained_residual[g] * retained_residual[g];
            }
            None => retained_residual[g] = 0.0,
        }
    }

    // Gauge regularization of the rotation block, matrix only. For constant
    // moments, chains of elements joining two free edges through parallel
    // conormals make the multiplier functionals linearly dependent; the
    // system stays consistent and the true residual is untouched, so the
    // converged solution is unaffected while exact zero pivots disappear.
    let eps = model.config.alpha_gauge_regularization;
    if eps > 0.0 {
        let mut max_diag = 0.0_f64;
        for f in 0..n_free {
            for &(j, v) in matrix.row(f) {
                if j == f {
                    max_diag = max_diag.max(v.abs());
                }
            }
        }
        if max_diag > 0.0 {
            for a in 0..model.dofmap.n_alpha {
                if let Some(f) = idx.free_index[idx.alpha_retained[a]] {
                    matrix.add(f, f, eps * max_diag);
                }
            }
        }
    }

    Ok(AssembledSystem {
        matrix,
        rhs,
        recovery,
        residual_norm: (retained_free_norm2 + condensed_norm2).sqrt(),
        retained_residual,
    })
}

/// Direct solve of the condensed system.
pub fn solve_linear(model: &ShellModel, sys: &AssembledSystem) -> Result<(Vec<f64>, SolveInfo)> {
    solve_symmetric(
        &sys.matrix,
        &sys.rhs,
        model.config.linear_solver == LinearSolverKind::Dense,
    )
}

/// Apply the retained update and back-substitute the condensed fields.
pub fn apply_update(
    model: &ShellModel,
    state: &mut State,
    sys: &AssembledSystem,
    delta_free: &[f64],
    delta_fixed: &[f64],
    step: f64,
) {
    let idx = &model.index;
    // Retained update per retained id.
    let delta_ret = |g: usize| -> f64 {
        match idx.free_index[g] {
            Some(f) => delta_free[f],
            None => delta_fixed[g],
        }
    };
    // Scatter retained dofs: u-ext then alpha (each retained id appears in
    // exactly one state slot).
    for n in 0..model.dofmap.n_u_nodes {
        for c in 0..3 {
            if let Some(g) = idx.u_retained[3 * n + c] {
                state.u[3 * n + c] += step * delta_ret(g);
            }
        }
    }
    for a in 0..model.dofmap.n_alpha {
        let g = idx.alpha_retained[a];
        state.alpha[a] += step * delta_ret(g);
    }
    // Condensed recovery element by element.
    for rec in &sys.recovery {
        let nr = rec.r_dofs.len();
        let dr = DVector::from_fn(nr, |a, _| delta_ret(rec.r_dofs[a]));
        let rhs = &rec.rl + &rec.klr * dr;
        let dl = rec.kll_lu.solve(&rhs).expect("factorized");
        for (a, d) in rec.l_dofs.iter().enumerate() {
            let v = -step * dl[a];
            match *d {
                LocalDof::CondensedU(g) => state.u[g] += v,
                LocalDof::CondensedSigma(g) => state.sigma[g] += v,
                LocalDof::CondensedRaux(g) => state.raux[g] += v,
                LocalDof::Retained(_) => unreachable!(),
            }
        }
    }
}

/// Energy bookkeeping of one state.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnergyBreakdown {
    pub membrane: f64,
    pub bending_coupling: f64,
    pub moment_quadratic: f64,
    pub locking_aux: f64,
    pub external_work: f64,
}

impl EnergyBreakdown {
    /// Lagrangian value: membrane + aux - moment quadratic - coupling - work.
    pub fn total(&self) -> f64 {
        self.membrane + self.locking_aux
            - self.moment_quadratic
            - self.bending_coupling
            - self.external_work
    }
}

/// Evaluate the Lagrangian pieces at a state (plain f64 path of the kernel).
pub fn assemble_energy(model: &ShellModel, state: &State) -> Result<EnergyBreakdown> {
    let locking = model.config.locking;
    let mut out = EnergyBreakdown::default();
    for (ei, ectx) in model.elements.iter().enumerate() {
        let eld = &model.dofmap.elements[ei];
        let u_loc: Vec<f64> = eld
            .u_nodes
            .iter()
            .flat_map(|&gn| (0..3).map(move |c| (gn, c)))
            .map(|(gn, c)| state.u[3 * gn + c])
            .collect();
        let eval = element_kernel(model, ectx, &u_loc, &state.lagged, locking)?;
        out.membrane += eval.membrane;
        let n_s = ectx.n_sigma;
        let n_r = ectx.n_raux;
        let sigma_loc = DVector::from_iterator(n_s, eld.sigma.iter().map(|&d| state.sigma[d]));
        let alpha_loc = DVector::from_iterator(
            ectx.n_alpha,
            eld.alpha.iter().flat_map(|(_, ds)| ds.iter().map(|&d| state.alpha[d])),
        );
        let b = DVector::from_iterator(n_s, eval.b.iter().cloned());
        out.bending_coupling +=
            (sigma_loc.transpose() * (&b + &ectx.c_sigma_alpha * alpha_loc))[(0, 0)];
        out.moment_quadratic += 0.5 * (sigma_loc.transpose() * &ectx.q_sigma * sigma_loc)[(0, 0)];
        if locking {
            let raux_loc = DVector::from_iterator(n_r, eld.raux.iter().map(|&d| state.raux[d]));
            let e = DVector::from_iterator(n_r, eval.e_pair.iter().cloned());
            out.locking_aux += (raux_loc.transpose() * e)[(0, 0)]
                - 0.5 * (raux_loc.transpose() * &ectx.q_raux * raux_loc)[(0, 0)];
        }
    }
    let mut w = 0.0;
    for (g, &f) in model.load_u.iter().enumerate() {
        w += f * state.u[g];
    }
    for (a, &m) in model.load_alpha.iter().enumerate() {
        w += m * state.alpha[a];
    }
    out.external_work = state.lambda * w;
    Ok(out)
}

/// Membrane energy of a displacement state alone (plain or augmented form).
pub fn membrane_energy(model: &ShellModel, state: &State) -> Result<f64> {
    let e = assemble_energy(model, state)?;
    if model.config.locking {
        Ok(e.locking_aux)
    } else {
        Ok(e.membrane)
    }
}

/// The bending coupling functional B(sigma, u, alpha).
pub fn bending_coupling(model: &ShellModel, state: &State) -> Result<f64> {
    Ok(assemble_energy(model, state)?.bending_coupling)
}

/// Full Lagrangian with breakdown.
pub fn lagrangian(model: &ShellModel, state: &State) -> Result<EnergyBreakdown> {
    assemble_energy(model, state)
}

/// Membrane stress (plane-stress law on the Green strain) at a reference
/// point of an element, in global axes.
pub fn membrane_stress_at(
    model: &ShellModel,
    state: &State,
    element: usize,
    p: &[f64; 2],
) -> Result<nalgebra::Matrix3<f64>> {
    let cd = crate::mesh::chart_data(&model.mesh, element, p)?;
    let sb = model.spaces.lagrange_basis(model.mesh.elements[element].shape);
    let grads_ref = sb.eval_grad(p);
    let eld = &model.dofmap.elements[element];
    let mut grad_u = [[0.0_f64; 3]; 3];
    for (i, &gn) in eld.u_nodes.iter().enumerate() {
        let sg = cd.gplus_t * grads_ref[i];
        for c in 0..3 {
            let uv = state.u[3 * gn + c];
            grad_u[c][0] += uv * sg.x;
            grad_u[c][1] += uv * sg.y;
            grad_u[c][2] += uv * sg.z;
        }
    }
    let proj: M3<f64> =
        std::array::from_fn(|i| std::array::from_fn(|j| cd.frame.projector[(i, j)]));
    let _ = deformation_gradient(&proj, &grad_u);
    let e = crate::geomkin::green_strain_from_grad(&proj, &grad_u);
    let s = crate::material::membrane_stress(&e, &proj, &model.material);
    Ok(m3_to_na(&s))
}

