//! Discrete shell problem: mesh + spaces + material + boundary conditions,
//! with all per-element and per-edge quadrature data precomputed. The model
//! is immutable during solves; the evolving quantities (coefficient vectors,
//! lagged edge normals, load factor) live in [`State`].

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::geomkin::AngleMode;
use crate::la::M3;
use crate::material::{minv_mode_form, Material};
use crate::mesh::{chart_data, EdgeKind, ElemShape, SurfaceMesh};
use crate::mesh::geometry::nodal_surface_operators;
use crate::quadrature::{quadrature_for, QuadratureRule, RefDomain};
use crate::spaces::{
    edge_basis_eval, frame_modes, make_spaces, tangent_frame, DofMap, GlobalNodeOwner, Spaces,
};

#[derive(Clone, Debug, PartialEq)]
pub enum BcKind {
    /// Essential displacement (scaled by the load factor) and zero rotation.
    Clamped { displacement: Vector3<f64> },
    Free,
    /// u . axis = 0 and zero rotation; `axis` is the coordinate normal of the
    /// symmetry plane (0, 1 or 2).
    Symmetry { axis: usize },
}

#[derive(Clone, Debug)]
pub struct EdgeTraction {
    pub tag: String,
    /// Dead force per unit reference length.
    pub force_per_length: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct EdgeMoment {
    pub tag: String,
    /// Prescribed bending moment per unit reference length (natural datum on
    /// the edge rotation).
    pub moment_per_length: f64,
}

#[derive(Clone, Debug)]
pub struct PointLoad {
    pub at: Vector3<f64>,
    pub force: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct PointConstraint {
    pub at: Vector3<f64>,
    pub component: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LoadProgram {
    /// Dead load per unit reference area.
    pub area_load: Option<Vector3<f64>>,
    pub tractions: Vec<EdgeTraction>,
    pub point_loads: Vec<PointLoad>,
    pub moments: Vec<EdgeMoment>,
}

/// Material, load program and boundary conditions of one problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub material: Material,
    pub bcs: Vec<(String, BcKind)>,
    pub loads: LoadProgram,
    pub point_constraints: Vec<PointConstraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LaggedPolicy {
    #[default]
    PerLoadStep,
    PerNewtonIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Reverse-Cuthill-McKee reordered skyline LDL^T.
    #[default]
    Skyline,
    /// Dense LU (small systems, oracle checks).
    Dense,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
    pub max_step_halvings: usize,
    pub max_schedule_refinements: usize,
    pub load_steps: usize,
    /// Explicit strictly increasing schedule ending at 1; overrides
    /// `load_steps` when set.
    pub schedule: Option<Vec<f64>>,
    pub lagged_policy: LaggedPolicy,
    pub angle_mode: AngleMode,
    pub locking: bool,
    pub quad_volume_degree: Option<usize>,
    pub quad_edge_degree: Option<usize>,
    pub linear_solver: LinearSolverKind,
    /// Relative diagonal shift on free rotation dofs (matrix only, never the
    /// residual): fixes the multiplier gauge where free-to-free chains make
    /// the system consistently singular. Zero disables it.
    pub alpha_gauge_regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_iterations: 50,
            max_step_halvings: 10,
            max_schedule_refinements: 5,
            load_steps: 20,
            schedule: None,
            lagged_policy: LaggedPolicy::PerLoadStep,
            angle_mode: AngleMode::ExactArccos,
            locking: false,
            quad_volume_degree: None,
            quad_edge_degree: None,
            linear_solver: LinearSolverKind::Skyline,
            alpha_gauge_regularization: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(s) = &self.schedule {
            let mut prev = 0.0;
            for &l in s {
                if l <= prev {
                    return Err(Error::Config("schedule must be strictly increasing".into()));
                }
                prev = l;
            }
            if (prev - 1.0).abs() > 1e-12 {
                return Err(Error::Config("schedule must end at 1".into()));
            }
        } else if self.load_steps == 0 {
            return Err(Error::Config("need at least one load step".into()));
        }
        Ok(())
    }

    pub fn schedule_vec(&self) -> Vec<f64> {
        match &self.schedule {
            Some(s) => s.clone(),
            None => (1..=self.load_steps)
                .map(|i| i as f64 / self.load_steps as f64)
                .collect(),
        }
    }
}

/// Role of a mesh edge in the bending terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRole {
    Interior,
    Branch,
    /// Angle measured against the fixed reference frame; never updated.
    ClampedWall,
    /// Angle measured against the element's own lagged normal.
    SymmetryWall,
    /// Free and natural-moment edges: the angle term is present (it
    /// transmits prescribed moments into the edge rotation and is inert at
    /// equilibrium on truly free edges where sigma_mumu = 0), measured
    /// against the element's own lagged normal.
    FreeLike,
}

/// Volume quadrature point data of one element.
#[derive(Clone, Debug)]
pub struct VolPoint {
    /// Quadrature weight times surface measure density.
    pub w: f64,
    pub nu: [f64; 3],
    pub projector: M3<f64>,
    pub weingarten: M3<f64>,
    /// Ambient surface gradient of each scalar Lagrange shape function.
    pub grad_n: Vec<[f64; 3]>,
    /// Ambient surface Hessian of each scalar Lagrange shape function.
    pub hess_n: Vec<M3<f64>>,
    /// Moment-space monomial values per moment dof.
    pub sigma_poly: Vec<f64>,
    /// Membrane-aux monomial values per aux dof.
    pub raux_poly: Vec<f64>,
    /// Frame tensor modes at the point.
    pub modes: [M3<f64>; 3],
}

/// Edge quadrature point data of one (element, edge) incidence, indexed by
/// the global edge rule.
#[derive(Clone, Debug)]
pub struct EdgePoint {
    /// Quadrature weight times reference edge length.
    pub w: f64,
    /// Global edge parameter.
    pub s: f64,
    pub nu: [f64; 3],
    pub projector: M3<f64>,
    /// Reference conormal of this element (outward).
    pub mu: [f64; 3],
    /// Reference angle against the shared direction, precomputed.
    pub ref_angle: f64,
    pub grad_n: Vec<[f64; 3]>,
    /// sigma_mumu values per local moment dof.
    pub sigma_mumu: Vec<f64>,
    /// Edge rotation basis values at s.
    pub alpha_basis: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EdgeCtx {
    pub mesh_edge: usize,
    pub role: EdgeRole,
    /// Relative rotation sign of this incidence: +1 on the first incident
    /// element of the edge.
    pub r_sign: f64,
    /// Global edge tangent (lower to higher vertex index).
    pub tau: [f64; 3],
    pub conormal_sign: f64,
    pub points: Vec<EdgePoint>,
}

#[derive(Clone, Debug)]
pub struct ElementCtx {
    pub element: usize,
    pub shape: ElemShape,
    pub n_nodes: usize,
    pub n_u: usize,
    pub n_alpha: usize,
    pub n_sigma: usize,
    pub n_raux: usize,
    /// Frame mode of each moment dof.
    pub sigma_modes: Vec<usize>,
    pub raux_modes: Vec<usize>,
    pub vol: Vec<VolPoint>,
    pub edges: Vec<EdgeCtx>,
    /// Constant moment quadratic block (12/t^3 Gram).
    pub q_sigma: DMatrix<f64>,
    /// Constant membrane-aux quadratic block (1/t Gram).
    pub q_raux: DMatrix<f64>,
    /// Constant moment-rotation coupling (n_sigma x n_alpha).
    pub c_sigma_alpha: DMatrix<f64>,
}

/// Retained-dof numbering and essential constraints.
#[derive(Clone, Debug)]
pub struct GlobalIndex {
    /// Per full u dof: retained id (None for condensed interior dofs).
    pub u_retained: Vec<Option<usize>>,
    /// Per alpha dof: retained id.
    pub alpha_retained: Vec<usize>,
    pub n_retained: usize,
    /// Per retained dof: essential target per unit load factor.
    pub fixed: Vec<Option<f64>>,
    /// Per retained dof: solve index among free dofs.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

#[derive(Clone, Debug)]
pub struct State {
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub raux: Vec<f64>,
    /// Lagged averaged normals per (edge, edge quadrature point).
    pub lagged: Vec<[f64; 3]>,
    pub lambda: f64,
}

pub struct ShellModel {
    pub mesh: SurfaceMesh,
    pub spaces: Spaces,
    pub dofmap: DofMap,
    pub material: Material,
    pub config: SolverConfig,
    pub spec: ProblemSpec,
    pub edge_roles: Vec<EdgeRole>,
    pub elements: Vec<ElementCtx>,
    pub index: GlobalIndex,
    /// Dead load vector over full u dofs (per unit load factor).
    pub load_u: Vec<f64>,
    /// Natural moment vector over alpha dofs (per unit load factor).
    pub load_alpha: Vec<f64>,
    /// Initial shared edge directions (reference configuration).
    pub lagged_init: Vec<[f64; 3]>,
    /// Edge quadrature points per edge.
    pub n_edge_q: usize,
    pub edge_rule: QuadratureRule,
}

impl ShellModel {
    pub fn new(
        mesh: SurfaceMesh,
        order: usize,
        spec: ProblemSpec,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if config.angle_mode == AngleMode::Simplified && mesh.has_kinks_or_branches() {
            return Err(Error::Config(
                "simplified angle expression is not valid on meshes with kinks or branch edges"
                    .into(),
            ));
        }
        let (spaces, dofmap) = make_spaces(&mesh, order)?;
        let material = spec.material;

        // Validate bc tags and build the per-edge role table.
        let mut bc_of_tag: std::collections::BTreeMap<&str, &BcKind> = Default::default();
        for (tag, kind) in &spec.bcs {
            if let Some(prev) = bc_of_tag.insert(tag.as_str(), kind) {
                if prev != kind {
                    return Err(Error::Config(format!(
                        "conflicting boundary conditions on tag '{tag}'"
                    )));
                }
            }
            if mesh.boundary_edges(tag).next().is_none() {
                return Err(Error::Config(format!("boundary tag '{tag}' matches no edge")));
            }
        }
        let mut edge_roles = Vec::with_capacity(mesh.edges.len());
        for edge in &mesh.edges {
            let role = match &edge.kind {
                EdgeKind::Interior => EdgeRole::Interior,
                EdgeKind::Branch => EdgeRole::Branch,
                EdgeKind::Boundary(tag) => match bc_of_tag.get(tag.as_str()) {
                    Some(BcKind::Clamped { .. }) => EdgeRole::ClampedWall,
                    Some(BcKind::Symmetry { .. }) => EdgeRole::SymmetryWall,
                    _ => EdgeRole::FreeLike,
                },
            };
            edge_roles.push(role);
        }

        // Quadrilateral membrane densities reach per-direction degree 4k;
        // the default rule integrates them exactly on affine charts.
        let vol_degree_for = |shape: ElemShape| match config.quad_volume_degree {
            Some(d) => d,
            None => match shape {
                ElemShape::Tri => 2 * order + 2,
                ElemShape::Quad => (2 * order + 2).max(4 * order),
            },
        };
        let edge_degree = config.quad_edge_degree.unwrap_or(2 * order + 1);
        let edge_rule = quadrature_for(RefDomain::Edge, edge_degree)?;
        let n_edge_q = edge_rule.len();

        // First pass: per-element contexts without reference angles; collect
        // per-edge per-qpoint normals to form the shared directions.
        let mut sum_nu: Vec<Vec<Vector3<f64>>> =
            vec![vec![Vector3::zeros(); n_edge_q]; mesh.edges.len()];

        let mut elements = Vec::with_capacity(mesh.elements.len());
        let minv_form = minv_mode_form(&material);
        for (ei, el) in mesh.elements.iter().enumerate() {
            let sb = spaces.lagrange_basis(el.shape);
            let ms = spaces.moment_basis(el.shape);
            let aux = spaces.aux_basis(el.shape);
            let n_nodes = sb.len();
            let n_sigma = ms.len();
            let n_raux = aux.len();
            let sigma_modes: Vec<usize> = ms.entries.iter().map(|e| e.0).collect();
            let raux_modes: Vec<usize> = aux.entries.iter().map(|e| e.0).collect();
            let domain = match el.shape {
                ElemShape::Tri => RefDomain::Tri,
                ElemShape::Quad => RefDomain::Quad,
            };
            let rule = quadrature_for(domain, vol_degree_for(el.shape))?;
            let mut vol = Vec::with_capacity(rule.len());
            let mut q_sigma: DMatrix<f64> = DMatrix::zeros(n_sigma, n_sigma);
            let mut q_raux: DMatrix<f64> = DMatrix::zeros(n_raux, n_raux);
            for (q, p) in rule.points.iter().enumerate() {
                let cd = chart_data(&mesh, ei, p)?;
                let grads_ref = sb.eval_grad(p);
                let hess_ref = sb.eval_hess(p);
                let mut grad_n = Vec::with_capacity(n_nodes);
                let mut hess_n = Vec::with_capacity(n_nodes);
                for i in 0..n_nodes {
                    let (g, h) = nodal_surface_operators(&cd, &grads_ref[i], &hess_ref[i]);
                    grad_n.push([g.x, g.y, g.z]);
                    hess_n.push(mat3_to_arr(&h));
                }
                let sigma_poly = ms.eval_polys(p);
                let raux_poly = aux.eval_polys(p);
                let (t1, t2) = tangent_frame(&cd.frame.jacobian);
                let fm = frame_modes(&t1, &t2);
                let w = rule.weights[q] * cd.frame.weight;
                let t = material.thickness;
                for d in 0..n_sigma {
                    for dd in 0..n_sigma {
                        q_sigma[(d, dd)] += 12.0 / t.powi(3)
                            * w
                            * sigma_poly[d]
                            * sigma_poly[dd]
                            * minv_form[sigma_modes[d]][sigma_modes[dd]];
                    }
                }
                for d in 0..n_raux {
                    for dd in 0..n_raux {
                        q_raux[(d, dd)] += w / t
                            * raux_poly[d]
                            * raux_poly[dd]
                            * minv_form[raux_modes[d]][raux_modes[dd]];
                    }
                }
                vol.push(VolPoint {
                    w,
                    nu: [cd.frame.normal.x, cd.frame.normal.y, cd.frame.normal.z],
                    projector: mat3_to_arr(&cd.frame.projector),
                    weingarten: mat3_to_arr(&cd.frame.weingarten),
                    grad_n,
                    hess_n,
                    sigma_poly,
                    raux_poly,
                    modes: [mat3_to_arr(&fm[0]), mat3_to_arr(&fm[1]), mat3_to_arr(&fm[2])],
                });
            }

            // Edge contexts.
            let mut edges = Vec::with_capacity(el.shape.n_edges());
            let local_edges = el.shape.local_edges();
            let ref_corners: &[[f64; 2]] = match el.shape {
                ElemShape::Tri => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                ElemShape::Quad => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            };
            let mut n_alpha_loc = 0usize;
            for (le, &(a, b)) in local_edges.iter().enumerate() {
                let (ga, gb) = (el.nodes[a], el.nodes[b]);
                let key = (ga.min(gb), ga.max(gb));
                let me = *mesh.edge_index.get(&key).unwrap();
                let inc = mesh.edges[me]
                    .incidences
                    .iter()
                    .find(|i| i.element == ei && i.local_edge == le)
                    .unwrap();
                let aligned = inc.aligned;
                let s_te = inc.conormal_sign;
                let s_first = mesh.edges[me].incidences[0].conormal_sign;
                let tau_v = mesh.edge_tangent(me);
                let elen = mesh.edge_length(me);
                let mut points = Vec::with_capacity(n_edge_q);
                for (q, qp) in edge_rule.points.iter().enumerate() {
                    let s = qp[0];
                    let t_loc = if aligned { s } else { 1.0 - s };
                    let ra = ref_corners[a];
                    let rb = ref_corners[b];
                    let xi = [
                        ra[0] + t_loc * (rb[0] - ra[0]),
                        ra[1] + t_loc * (rb[1] - ra[1]),
                    ];
                    let cd = chart_data(&mesh, ei, &xi)?;
                    let grads_ref = sb.eval_grad(&xi);
                    let mut grad_n = Vec::with_capacity(n_nodes);
                    for g in &grads_ref {
                        let sg = cd.gplus_t * g;
                        grad_n.push([sg.x, sg.y, sg.z]);
                    }
                    let nu = cd.frame.normal;
                    let mu = s_te * nu.cross(&tau_v);
                    let poly = ms.eval_polys(&xi);
                    let (t1, t2) = tangent_frame(&cd.frame.jacobian);
                    let fm = frame_modes(&t1, &t2);
                    let mut sigma_mumu = Vec::with_capacity(n_sigma);
                    for d in 0..n_sigma {
                        let mumu = (mu.transpose() * fm[sigma_modes[d]] * mu)[(0, 0)];
                        sigma_mumu.push(poly[d] * mumu);
                    }
                    sum_nu[me][q] += nu;
                    points.push(EdgePoint {
                        w: edge_rule.weights[q] * elen,
                        s,
                        nu: [nu.x, nu.y, nu.z],
                        projector: mat3_to_arr(&cd.frame.projector),
                        mu: [mu.x, mu.y, mu.z],
                        ref_angle: 0.0,
                        grad_n,
                        sigma_mumu,
                        alpha_basis: edge_basis_eval(order, s),
                    });
                }
                n_alpha_loc += order;
                edges.push(EdgeCtx {
                    mesh_edge: me,
                    role: edge_roles[me],
                    r_sign: s_te * s_first,
                    tau: [tau_v.x, tau_v.y, tau_v.z],
                    conormal_sign: s_te,
                    points,
                });
            }

            elements.push(ElementCtx {
                element: ei,
                shape: el.shape,
                n_nodes,
                n_u: 3 * n_nodes,
                n_alpha: n_alpha_loc,
                n_sigma,
                n_raux,
                sigma_modes,
                raux_modes,
                vol,
                edges,
                q_sigma,
                q_raux,
                c_sigma_alpha: DMatrix::zeros(0, 0), // filled below
            });
        }

        // Shared edge directions and reference angles.
        let mut lagged_init = vec![[0.0_f64; 3]; mesh.edges.len() * n_edge_q];
        for me in 0..mesh.edges.len() {
            for q in 0..n_edge_q {
                // Interior/branch edges: normalized sum over incident
                // elements; single-incidence edges reduce to the own normal.
                let w0 = sum_nu[me][q].normalize();
                lagged_init[me * n_edge_q + q] = [w0.x, w0.y, w0.z];
            }
        }
        for ectx in &mut elements {
            for ec in &mut ectx.edges {
                for (q, p) in ec.points.iter_mut().enumerate() {
                    let w0 = lagged_init[ec.mesh_edge * n_edge_q + q];
                    let dot: f64 = (0..3).map(|i| w0[i] * p.mu[i]).sum();
                    p.ref_angle = dot.clamp(-1.0, 1.0).acos();
                }
            }
        }

        // Moment-rotation coupling blocks.
        for ectx in &mut elements {
            let k = order;
            let mut c = DMatrix::zeros(ectx.n_sigma, ectx.n_alpha);
            for (le, ec) in ectx.edges.iter().enumerate() {
                for p in &ec.points {
                    for d in 0..ectx.n_sigma {
                        for bfun in 0..k {
                            c[(d, le * k + bfun)] +=
                                p.w * ec.r_sign * p.sigma_mumu[d] * p.alpha_basis[bfun];
                        }
                    }
                }
            }
            ectx.c_sigma_alpha = c;
        }

        // Retained numbering: u dofs of non-interior nodes then alpha dofs.
        let node_interior: Vec<bool> = dofmap
            .node_owner
            .iter()
            .map(|o| matches!(o, GlobalNodeOwner::Element(_)))
            .collect();
        let mut u_retained = vec![None; dofmap.n_u];
        let mut n_retained = 0usize;
        for n in 0..dofmap.n_u_nodes {
            if !node_interior[n] {
                for c in 0..3 {
                    u_retained[3 * n + c] = Some(n_retained);
                    n_retained += 1;
                }
            }
        }
        let alpha_retained: Vec<usize> = (0..dofmap.n_alpha).map(|i| n_retained + i).collect();
        n_retained += dofmap.n_alpha;

        // Essential constraints.
        let mut fixed: Vec<Option<f64>> = vec![None; n_retained];
        let mut set_fixed = |id: usize, v: f64| -> Result<()> {
            if let Some(prev) = fixed[id] {
                if (prev - v).abs() > 1e-14 {
                    return Err(Error::Config(format!(
                        "conflicting essential values on retained dof {id}: {prev} vs {v}"
                    )));
                }
            }
            fixed[id] = Some(v);
            Ok(())
        };
        let per_edge = order - 1;
        let edge_node_base = mesh.vertices.len();
        for (tag, kind) in &spec.bcs {
            for me in mesh.boundary_edges(tag) {
                let (lo, hi) = mesh.edges[me].vertices;
                let mut nodes = vec![lo, hi];
                for p in 0..per_edge {
                    nodes.push(edge_node_base + me * per_edge + p);
                }
                match kind {
                    BcKind::Clamped { displacement } => {
                        for &n in &nodes {
                            for c in 0..3 {
                                let id = u_retained[3 * n + c].unwrap();
                                set_fixed(id, displacement[c])?;
                            }
                        }
                        for &ad in &dofmap.alpha_of_edge[me] {
                            set_fixed(alpha_retained[ad], 0.0)?;
                        }
                    }
                    BcKind::Symmetry { axis } => {
                        if *axis > 2 {
                            return Err(Error::Config(format!("symmetry axis {axis} out of range")));
                        }
                        for &n in &nodes {
                            let id = u_retained[3 * n + axis].unwrap();
                            set_fixed(id, 0.0)?;
                        }
                        for &ad in &dofmap.alpha_of_edge[me] {
                            set_fixed(alpha_retained[ad], 0.0)?;
                        }
                    }
                    BcKind::Free => {}
                }
            }
        }
        let diam = mesh_diameter(&mesh);
        for pc in &spec.point_constraints {
            let v = mesh.vertex_at(&pc.at, 1e-8 * diam.max(1.0))?;
            if pc.component > 2 {
                return Err(Error::Config(format!(
                    "point constraint component {} out of range",
                    pc.component
                )));
            }
            let id = u_retained[3 * v + pc.component].unwrap();
            set_fixed(id, pc.value)?;
        }

        let mut free_index = vec![None; n_retained];
        let mut n_free = 0usize;
        for i in 0..n_retained {
            if fixed[i].is_none() {
                free_index[i] = Some(n_free);
                n_free += 1;
            }
        }

        // Dead loads.
        let mut load_u = vec![0.0_f64; dofmap.n_u];
        let mut load_alpha = vec![0.0_f64; dofmap.n_alpha];
        for tr in &spec.loads.tractions {
            if mesh.boundary_edges(&tr.tag).next().is_none() {
                return Err(Error::Config(format!("traction tag '{}' matches no edge", tr.tag)));
            }
            for me in mesh.boundary_edges(&tr.tag) {
                add_edge_traction(
                    &mesh,
                    &spaces,
                    &dofmap,
                    &edge_rule,
                    me,
                    &tr.force_per_length,
                    &mut load_u,
                )?;
            }
        }
        for mo in &spec.loads.moments {
            if mesh.boundary_edges(&mo.tag).next().is_none() {
                return Err(Error::Config(format!("moment tag '{}' matches no edge", mo.tag)));
            }
            for me in mesh.boundary_edges(&mo.tag) {
                let elen = mesh.edge_length(me);
                for (q, qp) in edge_rule.points.iter().enumerate() {
                    let basis = edge_basis_eval(order, qp[0]);
                    for (bfun, &ad) in dofmap.alpha_of_edge[me].iter().enumerate() {
                        load_alpha[ad] +=
                            edge_rule.weights[q] * elen * mo.moment_per_length * basis[bfun];
                    }
                }
            }
        }
        if let Some(f) = &spec.loads.area_load {
            for (ei, el) in mesh.elements.iter().enumerate() {
                let sb = spaces.lagrange_basis(el.shape);
                let domain = match el.shape {
                    ElemShape::Tri => RefDomain::Tri,
                    ElemShape::Quad => RefDomain::Quad,
                };
                let rule = quadrature_for(domain, vol_degree_for(el.shape))?;
                for (q, p) in rule.points.iter().enumerate() {
                    let cd = chart_data(&mesh, ei, p)?;
                    let w = rule.weights[q] * cd.frame.weight;
                    let vals = sb.eval(p);
                    for (i, &gn) in dofmap.elements[ei].u_nodes.iter().enumerate() {
                        for c in 0..3 {
                            load_u[3 * gn + c] += w * vals[i] * f[c];
                        }
                    }
                }
            }
        }
        for pl in &spec.loads.point_loads {
            let v = mesh.vertex_at(&pl.at, 1e-8 * diam.max(1.0))?;
            for c in 0..3 {
                load_u[3 * v + c] += pl.force[c];
            }
        }

        Ok(ShellModel {
            mesh,
            spaces,
            dofmap,
            material,
            config,
            spec,
            edge_roles,
            elements,
            index: GlobalIndex {
                u_retained,
                alpha_retained,
                n_retained,
                fixed,
                free_index,
                n_free,
            },
            load_u,
            load_alpha,
            lagged_init,
            n_edge_q,
            edge_rule,
        })
    }

    pub fn zero_state(&self) -> State {
        State {
            u: vec![0.0; self.dofmap.n_u],
            sigma: vec![0.0; self.dofmap.n_sigma],
            alpha: vec![0.0; self.dofmap.n_alpha],
            raux: vec![0.0; self.dofmap.n_raux],
            lagged: self.lagged_init.clone(),
            lambda: 0.0,
        }
    }

    /// Write the essential values for load factor `lambda` into the state.
    pub fn apply_prescribed(&self, state: &mut State, lambda: f64) {
        state.lambda = lambda;
        for n in 0..self.dofmap.n_u_nodes {
            for c in 0..3 {
                if let Some(id) = self.index.u_retained[3 * n + c] {
                    if let Some(g) = self.index.fixed[id] {
                        state.u[3 * n + c] = lambda * g;
                    }
                }
            }
        }
        for a in 0..self.dofmap.n_alpha {
            let id = self.index.alpha_retained[a];
            if let Some(g) = self.index.fixed[id] {
                state.alpha[a] = lambda * g;
            }
        }
    }

    /// Update the lagged edge directions from the deformed configuration of
    /// `state` (averaged over incident elements per role).
    pub fn update_lagged(&self, state: &mut State) -> Result<()> {
        use crate::dual::Scalar as _;
        let mut new_lagged = state.lagged.clone();
        for (me, edge) in self.mesh.edges.iter().enumerate() {
            if self.edge_roles[me] == EdgeRole::ClampedWall {
                continue;
            }
            let mut sums = vec![Vector3::<f64>::zeros(); self.n_edge_q];
            for inc in &edge.incidences {
                let ectx = &self.elements[inc.element];
                let ec = ectx
                    .edges
                    .iter()
                    .find(|e| e.mesh_edge == me)
                    .expect("incidence context");
                let eld = &self.dofmap.elements[inc.element];
                for (q, p) in ec.points.iter().enumerate() {
                    // grad_u at the edge point.
                    let mut grad_u = [[0.0_f64; 3]; 3];
                    for (i, &gn) in eld.u_nodes.iter().enumerate() {
                        for c in 0..3 {
                            let uv = state.u[3 * gn + c];
                            for d in 0..3 {
                                grad_u[c][d] += uv * p.grad_n[i][d];
                            }
                        }
                    }
                    let f = crate::geomkin::deformation_gradient(&p.projector, &grad_u);
                    let (nu_hat, _) = crate::geomkin::deformed_normal(&f, &p.nu, inc.element)?;
                    sums[q] += Vector3::new(nu_hat[0].val(), nu_hat[1].val(), nu_hat[2].val());
                }
            }
            for (q, s) in sums.iter().enumerate() {
                let n = s.norm();
                if n <= 1e-12 {
                    return Err(Error::Numeric(format!(
                        "averaged normal vanished on edge {me}"
                    )));
                }
                let w = s / n;
                new_lagged[me * self.n_edge_q + q] = [w.x, w.y, w.z];
            }
        }
        state.lagged = new_lagged;
        Ok(())
    }
}

fn add_edge_traction(
    mesh: &SurfaceMesh,
    spaces: &Spaces,
    dofmap: &DofMap,
    edge_rule: &QuadratureRule,
    me: usize,
    force: &Vector3<f64>,
    load_u: &mut [f64],
) -> Result<()> {
    let edge = &mesh.edges[me];
    let inc = &edge.incidences[0];
    let el = &mesh.elements[inc.element];
    let sb = spaces.lagrange_basis(el.shape);
    let ref_corners: &[[f64; 2]] = match el.shape {
        ElemShape::Tri => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        ElemShape::Quad => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    };
    let (a, b) = el.shape.local_edges()[inc.local_edge];
    let elen = mesh.edge_length(me);
    for (q, qp) in edge_rule.points.iter().enumerate() {
        let s = qp[0];
        let t_loc = if inc.aligned { s } else { 1.0 - s };
        let ra = ref_corners[a];
        let rb = ref_corners[b];
        let xi = [
            ra[0] + t_loc * (rb[0] - ra[0]),
            ra[1] + t_loc * (rb[1] - ra[1]),
        ];
        let vals = sb.eval(&xi);
        let w = edge_rule.weights[q] * elen;
        for (i, &gn) in dofmap.elements[inc.element].u_nodes.iter().enumerate() {
            for c in 0..3 {
                load_u[3 * gn + c] += w * vals[i] * force[c];
            }
        }
    }
    Ok(())
}

fn mesh_diameter(mesh: &SurfaceMesh) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in &mesh.vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}

fn mat3_to_arr(m: &nalgebra::Matrix3<f64>) -> M3<f64> {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}
