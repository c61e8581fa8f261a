//! Finite-difference oracles for the assembled residual and tangent: the
//! residual must be the gradient of the Lagrangian and the tangent its
//! (symmetric) Hessian, on random states, for triangles and quadrilaterals
//! of every supported order, flat and warped, including branch edges.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use shellfe::assembly::{assemble_energy, element_system, LocalDof};
use shellfe::material::Material;
use shellfe::mesh::{benchmark_mesh, BenchmarkParams};
use shellfe::model::{
    BcKind, EdgeTraction, LoadProgram, PointLoad, ProblemSpec, ShellModel, SolverConfig, State,
};

/// Full-dof bookkeeping for the raw (uncondensed) system.
struct FullIndex {
    n: usize,
}

enum FullDof {
    U(usize),
    Sigma(usize),
    Alpha(usize),
    Raux(usize),
}

impl FullIndex {
    fn new(model: &ShellModel) -> Self {
        let dm = &model.dofmap;
        let n_raux = if model.config.locking { dm.n_raux } else { 0 };
        FullIndex {
            n: dm.n_u + dm.n_sigma + dm.n_alpha + n_raux,
        }
    }
    fn classify(&self, model: &ShellModel, i: usize) -> FullDof {
        let dm = &model.dofmap;
        if i < dm.n_u {
            FullDof::U(i)
        } else if i < dm.n_u + dm.n_sigma {
            FullDof::Sigma(i - dm.n_u)
        } else if i < dm.n_u + dm.n_sigma + dm.n_alpha {
            FullDof::Alpha(i - dm.n_u - dm.n_sigma)
        } else {
            FullDof::Raux(i - dm.n_u - dm.n_sigma - dm.n_alpha)
        }
    }
    fn get(&self, model: &ShellModel, state: &State, i: usize) -> f64 {
        match self.classify(model, i) {
            FullDof::U(g) => state.u[g],
            FullDof::Sigma(g) => state.sigma[g],
            FullDof::Alpha(g) => state.alpha[g],
            FullDof::Raux(g) => state.raux[g],
        }
    }
    fn set(&self, model: &ShellModel, state: &mut State, i: usize, v: f64) {
        match self.classify(model, i) {
            FullDof::U(g) => state.u[g] = v,
            FullDof::Sigma(g) => state.sigma[g] = v,
            FullDof::Alpha(g) => state.alpha[g] = v,
            FullDof::Raux(g) => state.raux[g] = v,
        }
    }
    fn local_to_full(&self, model: &ShellModel, ei: usize, d: &LocalDof, pos: usize) -> usize {
        // The local layout is [u | alpha | sigma | raux]; LocalDof encodes
        // condensed dofs directly, retained ids need the element maps.
        let dm = &model.dofmap;
        let eld = &dm.elements[ei];
        match d {
            LocalDof::CondensedU(g) => *g,
            LocalDof::CondensedSigma(g) => dm.n_u + *g,
            LocalDof::CondensedRaux(g) => dm.n_u + dm.n_sigma + dm.n_alpha + *g,
            LocalDof::Retained(_) => {
                let n_u = 3 * eld.u_nodes.len();
                if pos < n_u {
                    3 * eld.u_nodes[pos / 3] + pos % 3
                } else {
                    let mut a = pos - n_u;
                    for (_, ds) in &eld.alpha {
                        if a < ds.len() {
                            return dm.n_u + dm.n_sigma + ds[a];
                        }
                        a -= ds.len();
                    }
                    unreachable!()
                }
            }
        }
    }
}

/// Raw residual over all dofs: sum of element gradients plus dead loads.
fn raw_residual(model: &ShellModel, state: &State, fi: &FullIndex) -> DVector<f64> {
    let mut r = DVector::zeros(fi.n);
    for ei in 0..model.elements.len() {
        let ls = element_system(model, ei, state).unwrap();
        for (pos, d) in ls.dofs.iter().enumerate() {
            let full = fi.local_to_full(model, ei, d, pos);
            r[full] += ls.r[pos];
        }
    }
    // element_system carries loads only for condensed interior dofs; add the
    // retained-dof loads once.
    let dm = &model.dofmap;
    for n in 0..dm.n_u_nodes {
        for c in 0..3 {
            if model.index.u_retained[3 * n + c].is_some() {
                r[3 * n + c] -= state.lambda * model.load_u[3 * n + c];
            }
        }
    }
    for a in 0..dm.n_alpha {
        r[dm.n_u + dm.n_sigma + a] -= state.lambda * model.load_alpha[a];
    }
    r
}

fn raw_tangent(model: &ShellModel, state: &State, fi: &FullIndex) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(fi.n, fi.n);
    for ei in 0..model.elements.len() {
        let ls = element_system(model, ei, state).unwrap();
        for (pa, da) in ls.dofs.iter().enumerate() {
            let fa = fi.local_to_full(model, ei, da, pa);
            for (pb, db) in ls.dofs.iter().enumerate() {
                let fb = fi.local_to_full(model, ei, db, pb);
                k[(fa, fb)] += ls.k[(pa, pb)];
            }
        }
    }
    k
}

fn random_state(model: &ShellModel, rng: &mut impl Rng, u_scale: f64) -> State {
    let mut s = model.zero_state();
    s.lambda = 0.7;
    for v in s.u.iter_mut() {
        *v = u_scale * (rng.gen::<f64>() - 0.5);
    }
    for v in s.sigma.iter_mut() {
        *v = 0.5 * (rng.gen::<f64>() - 0.5);
    }
    for v in s.alpha.iter_mut() {
        *v = 0.2 * (rng.gen::<f64>() - 0.5);
    }
    for v in s.raux.iter_mut() {
        *v = 0.5 * (rng.gen::<f64>() - 0.5);
    }
    s
}

/// Two flat triangles forming a unit square, loaded edge tagged "clamped"
/// (the tag name only routes loads in these tests; the bc kind is Free).
fn tri_patch_mesh() -> shellfe::mesh::SurfaceMesh {
    use shellfe::mesh::{build_topology, BoundarySpec, BuildOptions, Element, ElemShape};
    build_topology(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ],
        vec![
            Element {
                shape: ElemShape::Tri,
                nodes: vec![0, 1, 2],
                tag: String::new(),
            },
            Element {
                shape: ElemShape::Tri,
                nodes: vec![0, 2, 3],
                tag: String::new(),
            },
        ],
        &[BoundarySpec::explicit("clamped", vec![(0, 1)])],
        &BuildOptions::default(),
    )
    .unwrap()
}

fn build_model(case: &str, grid: (usize, usize), order: usize, locking: bool) -> ShellModel {
    let mesh = if case == "tri_patch" {
        tri_patch_mesh()
    } else {
        benchmark_mesh(
            case,
            &BenchmarkParams {
                grid,
                h: 1.0,
            },
        )
        .unwrap()
    };
    // Mild loads so the external-work terms participate in the oracle.
    let tag = if case == "tsection" { "loaded" } else { "clamped" };
    let spec = ProblemSpec {
        material: Material::new(12.0, 0.3, 0.25).unwrap(),
        bcs: vec![(tag.to_string(), BcKind::Free)],
        loads: LoadProgram {
            area_load: None,
            tractions: vec![EdgeTraction {
                tag: tag.into(),
                force_per_length: Vector3::new(0.1, -0.2, 0.3),
            }],
            point_loads: vec![PointLoad {
                at: mesh.vertices[0],
                force: Vector3::new(0.05, 0.02, -0.03),
            }],
            moments: vec![],
        },
        point_constraints: vec![],
    };
    let config = SolverConfig {
        locking,
        linear_solver: shellfe::model::LinearSolverKind::Dense,
        ..Default::default()
    };
    ShellModel::new(mesh, order, spec, config).unwrap()
}

fn residual_fd_check(model: &ShellModel, tol: f64, rng: &mut impl Rng) -> f64 {
    let fi = FullIndex::new(model);
    let state = random_state(model, rng, 0.05);
    let r = raw_residual(model, &state, &fi);
    let scale = r.amax().max(1e-12);
    let mut worst: f64 = 0.0;
    // Sample a subset of dofs for speed on the larger meshes.
    let n_sample = fi.n.min(80);
    let mut dofs: Vec<usize> = (0..fi.n).collect();
    dofs.shuffle(rng);
    for &i in dofs.iter().take(n_sample) {
        let x0 = fi.get(model, &state, i);
        let mut best = f64::INFINITY;
        for &e in &[1e-4, 1e-5, 1e-6, 1e-7] {
            let mut sp = state.clone();
            fi.set(model, &mut sp, i, x0 + e);
            let ep = assemble_energy(model, &sp).unwrap().total();
            fi.set(model, &mut sp, i, x0 - e);
            let em = assemble_energy(model, &sp).unwrap().total();
            let fd = (ep - em) / (2.0 * e);
            best = best.min((fd - r[i]).abs() / scale);
        }
        worst = worst.max(best);
    }
    assert!(worst <= tol, "residual FD rel err {worst:.3e} > {tol:.1e}");
    worst
}

fn tangent_fd_check(model: &ShellModel, tol: f64, rng: &mut impl Rng) -> f64 {
    let fi = FullIndex::new(model);
    let state = random_state(model, rng, 0.05);
    let k = raw_tangent(model, &state, &fi);
    // Symmetry.
    let asym = (&k - k.transpose()).amax() / k.amax().max(1e-300);
    assert!(asym <= 1e-10, "tangent asymmetry {asym:.3e}");
    let scale = k.amax().max(1e-12);
    let mut worst: f64 = 0.0;
    let n_sample = fi.n.min(25);
    let mut dofs: Vec<usize> = (0..fi.n).collect();
    dofs.shuffle(rng);
    for &j in dofs.iter().take(n_sample) {
        let x0 = fi.get(model, &state, j);
        let mut best = f64::INFINITY;
        for &e in &[1e-5, 1e-6] {
            let mut sp = state.clone();
            fi.set(model, &mut sp, j, x0 + e);
            let rp = raw_residual(model, &sp, &fi);
            fi.set(model, &mut sp, j, x0 - e);
            let rm = raw_residual(model, &sp, &fi);
            let fd = (rp - rm) / (2.0 * e);
            let col = k.column(j);
            let err = (&fd - col).amax() / scale;
            best = best.min(err);
        }
        worst = worst.max(best);
    }
    assert!(worst <= tol, "tangent FD rel err {worst:.3e} > {tol:.1e}");
    worst
}

#[test]
fn residual_matches_energy_gradient_quads() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for order in [1usize, 2, 3] {
        let model = build_model("cant_shear", (2, 1), order, false);
        residual_fd_check(&model, 1e-6, &mut rng);
    }
}

#[test]
fn residual_matches_energy_gradient_triangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for order in [1usize, 2, 3] {
        let model = build_model("tri_patch", (0, 0), order, false);
        residual_fd_check(&model, 1e-6, &mut rng);
    }
}

#[test]
fn residual_matches_energy_gradient_warped_and_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    // Warped quads (pre-twisted strip).
    let model = build_model("twisted_beam", (1, 2), 1, false);
    residual_fd_check(&model, 1e-6, &mut rng);
    // Branch edge.
    let model = build_model("tsection", (1, 1), 1, false);
    residual_fd_check(&model, 1e-6, &mut rng);
}

#[test]
fn residual_matches_energy_gradient_with_locking_aux() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let model = build_model("cant_shear", (2, 1), 2, true);
    residual_fd_check(&model, 1e-6, &mut rng);
}

#[test]
fn tangent_matches_residual_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for (case, grid, order, locking) in [
        ("cant_shear", (2, 1), 1, false),
        ("cant_shear", (1, 1), 2, false),
        ("cant_shear", (1, 1), 3, false),
        ("twisted_beam", (1, 2), 1, false),
        ("tsection", (1, 1), 1, false),
        ("cant_shear", (1, 1), 2, true),
    ] {
        let model = build_model(case, grid, order, locking);
        tangent_fd_check(&model, 1e-4, &mut rng);
    }
}

#[test]
fn condensed_and_saddle_solutions_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    // Lateral edges are clamped as well: free-to-free multiplier chains are
    // consistently singular for constant moments (see the rotation-gauge
    // regularization in assembly), and this comparison wants both paths
    // strictly regular.
    for (case, grid, order) in [
        ("cant_shear", (2, 2), 1usize),
        ("cant_shear", (2, 2), 2),
        ("cant_shear", (3, 1), 3),
    ] {
        // Clamp one edge so the tangent has no exact rigid null vectors.
        let mesh = benchmark_mesh(case, &BenchmarkParams { grid, h: 1.0 }).unwrap();
        let spec = ProblemSpec {
            material: Material::new(12.0, 0.3, 0.25).unwrap(),
            bcs: vec![
                (
                    "clamped".into(),
                    BcKind::Clamped {
                        displacement: Vector3::zeros(),
                    },
                ),
                (
                    "lateral".into(),
                    BcKind::Clamped {
                        displacement: Vector3::zeros(),
                    },
                ),
            ],
            loads: LoadProgram {
                tractions: vec![EdgeTraction {
                    tag: "loaded".into(),
                    force_per_length: Vector3::new(0.1, -0.2, 0.3),
                }],
                ..Default::default()
            },
            point_constraints: vec![],
        };
        let config = SolverConfig {
            linear_solver: shellfe::model::LinearSolverKind::Dense,
            // Both paths must be strictly regular for an exact comparison.
            alpha_gauge_regularization: 0.0,
            ..Default::default()
        };
        let model = ShellModel::new(mesh, order, spec, config).unwrap();
        let fi = FullIndex::new(&model);
        let mut state = random_state(&model, &mut rng, 0.02);
        // Hold the essential dofs at their prescribed values so both paths
        // see zero essential updates.
        let lam = state.lambda;
        model.apply_prescribed(&mut state, lam);

        // Condensed path.
        let delta_fixed = vec![0.0; model.index.n_retained];
        let sys = shellfe::assembly::assemble(&model, &state, &delta_fixed).unwrap();
        let (dx, _) = shellfe::assembly::solve_linear(&model, &sys).unwrap();

        // Saddle path: full dense Newton system with fixed rows/cols removed.
        let k = raw_tangent(&model, &state, &fi);
        let r = raw_residual(&model, &state, &fi);
        let dm = &model.dofmap;
        let is_fixed = |full: usize| -> bool {
            if full < dm.n_u {
                model.index.u_retained[full]
                    .map(|g| model.index.fixed[g].is_some())
                    .unwrap_or(false)
            } else if full >= dm.n_u + dm.n_sigma && full < dm.n_u + dm.n_sigma + dm.n_alpha {
                let g = model.index.alpha_retained[full - dm.n_u - dm.n_sigma];
                model.index.fixed[g].is_some()
            } else {
                false
            }
        };
        let keep: Vec<usize> = (0..fi.n).filter(|&i| !is_fixed(i)).collect();
        let kr = DMatrix::from_fn(keep.len(), keep.len(), |a, b| k[(keep[a], keep[b])]);
        let rr = DVector::from_fn(keep.len(), |a, _| r[keep[a]]);
        let dzr = kr.lu().solve(&(-rr)).expect("reduced saddle solvable");
        let mut dz = DVector::zeros(fi.n);
        for (a, &i) in keep.iter().enumerate() {
            dz[i] = dzr[a];
        }

        // Compare on free retained dofs.
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for n in 0..dm.n_u_nodes {
            for c in 0..3 {
                if let Some(g) = model.index.u_retained[3 * n + c] {
                    if let Some(f) = model.index.free_index[g] {
                        worst = worst.max((dx[f] - dz[3 * n + c]).abs());
                        scale = scale.max(dz[3 * n + c].abs());
                    }
                }
            }
        }
        for a in 0..dm.n_alpha {
            let g = model.index.alpha_retained[a];
            if let Some(f) = model.index.free_index[g] {
                worst = worst.max((dx[f] - dz[dm.n_u + dm.n_sigma + a]).abs());
                scale = scale.max(dz[dm.n_u + dm.n_sigma + a].abs());
            }
        }
        assert!(
            worst <= 1e-10 * scale.max(1.0),
            "{case} k={order}: condensed vs saddle {worst:.3e} (scale {scale:.3e})"
        );
    }
}
