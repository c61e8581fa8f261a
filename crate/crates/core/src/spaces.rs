//! Finite element spaces and degree-of-freedom enumeration for the four
//! fields: displacement (continuous Lagrange vector, order k), moment tensor
//! (discontinuous symmetric tangential, order k-1), edge rotation (k scalars
//! per mesh edge) and the auxiliary membrane field (like the moment).
//!
//! Moment and membrane-aux tensors are stored as symmetric 2x2 coefficients
//! in an element-local orthonormal tangent frame (three tensor modes per
//! scalar polynomial) and expanded to ambient 3x3 tangential tensors on
//! evaluation.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{chart_data, chart_eval, ElemShape, SurfaceMesh};

/// Entity owning a Lagrange node of the scalar basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeEntity {
    /// Local vertex index.
    Vertex(usize),
    /// (local edge, index along the edge in local traversal order, 1-based).
    Edge(usize, usize),
    Interior,
}

/// Scalar polynomial basis on a reference element, nodal (Lagrange) or modal
/// (monomial) depending on construction.
#[derive(Clone, Debug)]
pub struct ScalarBasis {
    /// Monomial exponents (a, b) for xi^a eta^b.
    monos: Vec<(u32, u32)>,
    /// Row i holds the monomial coefficients of basis function i.
    coeffs: DMatrix<f64>,
    /// Node reference coordinates (empty for modal bases).
    pub nodes: Vec<[f64; 2]>,
    pub entities: Vec<NodeEntity>,
}

impl ScalarBasis {
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_monomials(monos: Vec<(u32, u32)>, nodes: Vec<[f64; 2]>, entities: Vec<NodeEntity>) -> Self {
        let n = nodes.len();
        assert_eq!(n, monos.len());
        let v = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = monos[j];
            nodes[i][0].powi(a as i32) * nodes[i][1].powi(b as i32)
        });
        let coeffs = v.try_inverse().expect("unisolvent node set").transpose();
        ScalarBasis {
            monos,
            coeffs,
            nodes,
            entities,
        }
    }

    pub fn lagrange(shape: ElemShape, k: usize) -> Self {
        assert!((1..=3).contains(&k));
        match shape {
            ElemShape::Tri => {
                let kf = k as f64;
                let mut monos = Vec::new();
                for a in 0..=k as u32 {
                    for b in 0..=(k as u32 - a) {
                        monos.push((a, b));
                    }
                }
                // Nodes: vertices, then edge nodes per local edge in traversal
                // order, then interior.
                let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
                let mut nodes: Vec<[f64; 2]> = verts.to_vec();
                let mut entities: Vec<NodeEntity> =
                    (0..3).map(NodeEntity::Vertex).collect();
                for (le, &(a, b)) in ElemShape::Tri.local_edges().iter().enumerate() {
                    for p in 1..k {
                        let t = p as f64 / kf;
                        let pa = verts[a];
                        let pb = verts[b];
                        nodes.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                        entities.push(NodeEntity::Edge(le, p));
                    }
                }
                if k == 3 {
                    nodes.push([1.0 / 3.0, 1.0 / 3.0]);
                    entities.push(NodeEntity::Interior);
                }
                Self::from_monomials(monos, nodes, entities)
            }
            ElemShape::Quad => {
                let kf = k as f64;
                let mut monos = Vec::new();
                for b in 0..=k as u32 {
                    for a in 0..=k as u32 {
                        monos.push((a, b));
                    }
                }
                let verts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
                let mut nodes: Vec<[f64; 2]> = verts.to_vec();
                let mut entities: Vec<NodeEntity> =
                    (0..4).map(NodeEntity::Vertex).collect();
                for (le, &(a, b)) in ElemShape::Quad.local_edges().iter().enumerate() {
                    for p in 1..k {
                        let t = p as f64 / kf;
                        let pa = verts[a];
                        let pb = verts[b];
                        nodes.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                        entities.push(NodeEntity::Edge(le, p));
                    }
                }
                for j in 1..k {
                    for i in 1..k {
                        nodes.push([i as f64 / kf, j as f64 / kf]);
                        entities.push(NodeEntity::Interior);
                    }
                }
                Self::from_monomials(monos, nodes, entities)
            }
        }
    }

    pub fn eval(&self, p: &[f64; 2]) -> Vec<f64> {
        let m: Vec<f64> = self
            .monos
            .iter()
            .map(|&(a, b)| p[0].powi(a as i32) * p[1].powi(b as i32))
            .collect();
        (0..self.len())
            .map(|i| (0..m.len()).map(|j| self.coeffs[(i, j)] * m[j]).sum())
            .collect()
    }

    pub fn eval_grad(&self, p: &[f64; 2]) -> Vec<Vector2<f64>> {
        let dm: Vec<Vector2<f64>> = self
            .monos
            .iter()
            .map(|&(a, b)| {
                let (af, bf) = (a as f64, b as f64);
                Vector2::new(
                    if a == 0 { 0.0 } else { af * p[0].powi(a as i32 - 1) * p[1].powi(b as i32) },
                    if b == 0 { 0.0 } else { bf * p[0].powi(a as i32) * p[1].powi(b as i32 - 1) },
                )
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let mut g = Vector2::zeros();
                for j in 0..dm.len() {
                    g += self.coeffs[(i, j)] * dm[j];
                }
                g
            })
            .collect()
    }

    pub fn eval_hess(&self, p: &[f64; 2]) -> Vec<Matrix2<f64>> {
        let hm: Vec<Matrix2<f64>> = self
            .monos
            .iter()
            .map(|&(a, b)| {
                let (af, bf) = (a as f64, b as f64);
                let dxx = if a < 2 {
                    0.0
                } else {
                    af * (af - 1.0) * p[0].powi(a as i32 - 2) * p[1].powi(b as i32)
                };
                let dyy = if b < 2 {
                    0.0
                } else {
                    bf * (bf - 1.0) * p[0].powi(a as i32) * p[1].powi(b as i32 - 2)
                };
                let dxy = if a == 0 || b == 0 {
                    0.0
                } else {
                    af * bf * p[0].powi(a as i32 - 1) * p[1].powi(b as i32 - 1)
                };
                Matrix2::new(dxx, dxy, dxy, dyy)
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let mut h = Matrix2::zeros();
                for j in 0..hm.len() {
                    h += self.coeffs[(i, j)] * hm[j];
                }
                h
            })
            .collect()
    }
}


/// Discontinuous symmetric tangential tensor space on one element: each dof
/// is one frame mode (0: t1t1, 1: t1t2+t2t1, 2: t2t2) times a monomial.
///
/// On quadrilaterals the moment space of order m is the HHJ-family
/// enrichment sigma_xx in P_{m+1}(xi) x P_m(eta), sigma_yy in P_m x P_{m+1},
/// sigma_xy in Q_m, so the normal-normal traces of opposite edges are
/// independent; triangles use the full P_m per mode.
#[derive(Clone, Debug)]
pub struct TensorSpace {
    /// (frame mode, xi exponent, eta exponent) per dof.
    pub entries: Vec<(usize, u32, u32)>,
}

impl TensorSpace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn moment(shape: ElemShape, m: usize) -> Self {
        let mut entries = Vec::new();
        match shape {
            ElemShape::Tri => {
                for a in 0..=m as u32 {
                    for b in 0..=(m as u32 - a) {
                        for mode in 0..3 {
                            entries.push((mode, a, b));
                        }
                    }
                }
            }
            ElemShape::Quad => {
                let m = m as u32;
                for a in 0..=m + 1 {
                    for b in 0..=m {
                        entries.push((0, a, b));
                    }
                }
                for a in 0..=m {
                    for b in 0..=m + 1 {
                        entries.push((2, a, b));
                    }
                }
                for a in 0..=m {
                    for b in 0..=m {
                        entries.push((1, a, b));
                    }
                }
            }
        }
        TensorSpace { entries }
    }

    /// Plain product space (membrane-aux): 3 modes x full P_m / Q_m.
    pub fn full(shape: ElemShape, m: usize) -> Self {
        let mut entries = Vec::new();
        match shape {
            ElemShape::Tri => {
                for a in 0..=m as u32 {
                    for b in 0..=(m as u32 - a) {
                        for mode in 0..3 {
                            entries.push((mode, a, b));
                        }
                    }
                }
            }
            ElemShape::Quad => {
                let m = m as u32;
                for a in 0..=m {
                    for b in 0..=m {
                        for mode in 0..3 {
                            entries.push((mode, a, b));
                        }
                    }
                }
            }
        }
        TensorSpace { entries }
    }

    /// Monomial value per dof.
    pub fn eval_polys(&self, p: &[f64; 2]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|&(_, a, b)| p[0].powi(a as i32) * p[1].powi(b as i32))
            .collect()
    }
}

/// 1D Lagrange basis of degree k-1 with k equispaced nodes on [0, 1],
/// parametrized by the global edge coordinate.
pub fn edge_basis_eval(k: usize, s: f64) -> Vec<f64> {
    match k {
        1 => vec![1.0],
        _ => {
            let nodes: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
            (0..k)
                .map(|i| {
                    let mut v = 1.0;
                    for j in 0..k {
                        if j != i {
                            v *= (s - nodes[j]) / (nodes[i] - nodes[j]);
                        }
                    }
                    v
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Continuous vector Lagrange space of the given order.
    LagrangeVector(usize),
    /// Discontinuous symmetric tangential tensors of the given order.
    MomentTensor(usize),
    /// Edge scalar rotations, order k-1 (k scalars per edge).
    EdgeRotation(usize),
    /// Discontinuous symmetric tangential tensors for the membrane
    /// projection, order k-1.
    MembraneAux(usize),
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    pub kind: SpaceKind,
    pub ndof: usize,
    /// Space-level flag: true exactly for the element-local tensor fields.
    pub condensable: bool,
}

#[derive(Clone, Debug)]
pub struct Spaces {
    pub order: usize,
    pub displacement: FeSpace,
    pub moment: FeSpace,
    pub rotation: FeSpace,
    pub membrane_aux: FeSpace,
    /// Scalar bases per shape (index by `basis_index`).
    pub lagrange: Vec<ScalarBasis>,
    pub moment_space: Vec<TensorSpace>,
    pub aux_space: Vec<TensorSpace>,
    shapes: Vec<ElemShape>,
}

impl Spaces {
    pub fn basis_index(&self, shape: ElemShape) -> usize {
        self.shapes.iter().position(|&s| s == shape).unwrap()
    }
    pub fn lagrange_basis(&self, shape: ElemShape) -> &ScalarBasis {
        &self.lagrange[self.basis_index(shape)]
    }
    pub fn moment_basis(&self, shape: ElemShape) -> &TensorSpace {
        &self.moment_space[self.basis_index(shape)]
    }
    pub fn aux_basis(&self, shape: ElemShape) -> &TensorSpace {
        &self.aux_space[self.basis_index(shape)]
    }
}

/// Per-element global dof gather lists.
#[derive(Clone, Debug)]
pub struct ElementDofs {
    /// Scalar Lagrange node ids (global); the 3 displacement dofs of node n
    /// are 3n, 3n+1, 3n+2.
    pub u_nodes: Vec<usize>,
    /// True per local node if it is an element-interior node.
    pub u_node_interior: Vec<bool>,
    /// Rotation dofs per local edge: (mesh edge id, global dof ids in global
    /// edge orientation).
    pub alpha: Vec<(usize, Vec<usize>)>,
    /// Moment dofs, mode-major: mode m polynomial j at 3*j + m... stored flat.
    pub sigma: Vec<usize>,
    pub raux: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_u_nodes: usize,
    pub n_u: usize,
    pub n_sigma: usize,
    pub n_alpha: usize,
    pub n_raux: usize,
    pub elements: Vec<ElementDofs>,
    /// Position of each scalar Lagrange node.
    pub node_positions: Vec<Vector3<f64>>,
    /// Owning mesh entity per scalar node: vertex, mesh edge or element.
    pub node_owner: Vec<GlobalNodeOwner>,
    /// Rotation dofs per mesh edge (k per edge); empty for edges of elements
    /// only when the mesh has no elements.
    pub alpha_of_edge: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlobalNodeOwner {
    Vertex(usize),
    /// (mesh edge, index 1..k-1 along the global edge direction)
    MeshEdge(usize, usize),
    Element(usize),
}

/// Build the four spaces and the dof map for polynomial order k >= 1.
pub fn make_spaces(mesh: &SurfaceMesh, k: usize) -> Result<(Spaces, DofMap)> {
    if k < 1 {
        return Err(Error::Config(format!("polynomial order k = {k} must be >= 1")));
    }
    if k > 3 {
        return Err(Error::Config(format!("polynomial order k = {k} not supported (max 3)")));
    }
    let mut shapes: Vec<ElemShape> = Vec::new();
    for el in &mesh.elements {
        if !shapes.contains(&el.shape) {
            shapes.push(el.shape);
        }
    }
    if shapes.is_empty() {
        return Err(Error::Config("mesh has no elements".into()));
    }
    let lagrange: Vec<ScalarBasis> = shapes.iter().map(|&s| ScalarBasis::lagrange(s, k)).collect();
    let moment_space: Vec<TensorSpace> = shapes
        .iter()
        .map(|&s| TensorSpace::moment(s, k - 1))
        .collect();
    let aux_space: Vec<TensorSpace> = shapes
        .iter()
        .map(|&s| TensorSpace::full(s, k - 1))
        .collect();

    // Global scalar node numbering: vertices, then (k-1) per mesh edge, then
    // element interiors in element order.
    let n_v = mesh.vertices.len();
    let n_e = mesh.edges.len();
    let per_edge = k - 1;
    let mut node_positions: Vec<Vector3<f64>> = mesh.vertices.clone();
    let mut node_owner: Vec<GlobalNodeOwner> = (0..n_v).map(GlobalNodeOwner::Vertex).collect();
    let edge_node_base = n_v;
    for (ei, edge) in mesh.edges.iter().enumerate() {
        let (lo, hi) = edge.vertices;
        for p in 1..k {
            let t = p as f64 / k as f64;
            node_positions.push(mesh.vertices[lo] * (1.0 - t) + mesh.vertices[hi] * t);
            node_owner.push(GlobalNodeOwner::MeshEdge(ei, p));
        }
    }
    let mut interior_base = vec![0usize; mesh.elements.len() + 1];
    let mut next = edge_node_base + n_e * per_edge;
    for (ei, el) in mesh.elements.iter().enumerate() {
        interior_base[ei] = next;
        let sb = &lagrange[shapes.iter().position(|&s| s == el.shape).unwrap()];
        let n_int = sb.entities.iter().filter(|e| **e == NodeEntity::Interior).count();
        for local in 0..n_int {
            // Chart image of the interior lattice node.
            let idx = sb
                .entities
                .iter()
                .enumerate()
                .filter(|(_, e)| **e == NodeEntity::Interior)
                .map(|(i, _)| i)
                .nth(local)
                .unwrap();
            let (pos, _, _) = chart_eval(mesh, ei, &sb.nodes[idx]);
            node_positions.push(pos);
            node_owner.push(GlobalNodeOwner::Element(ei));
        }
        next += n_int;
    }
    interior_base[mesh.elements.len()] = next;
    let n_u_nodes = next;

    // Rotation dofs: k per mesh edge.
    let mut alpha_of_edge: Vec<Vec<usize>> = Vec::with_capacity(n_e);
    for ei in 0..n_e {
        alpha_of_edge.push((0..k).map(|b| ei * k + b).collect());
    }
    let n_alpha = n_e * k;

    // Moment and membrane-aux dofs: per element blocks.
    let mut sigma_base = vec![0usize; mesh.elements.len() + 1];
    let mut raux_base = vec![0usize; mesh.elements.len() + 1];
    let mut acc_s = 0usize;
    let mut acc_r = 0usize;
    for (ei, el) in mesh.elements.iter().enumerate() {
        sigma_base[ei] = acc_s;
        raux_base[ei] = acc_r;
        let si = shapes.iter().position(|&s| s == el.shape).unwrap();
        acc_s += moment_space[si].len();
        acc_r += aux_space[si].len();
    }
    sigma_base[mesh.elements.len()] = acc_s;
    raux_base[mesh.elements.len()] = acc_r;
    let n_sigma = acc_s;
    let n_raux = acc_r;

    let mut elements = Vec::with_capacity(mesh.elements.len());
    for (ei, el) in mesh.elements.iter().enumerate() {
        let sb = &lagrange[shapes.iter().position(|&s| s == el.shape).unwrap()];
        let mut u_nodes = Vec::with_capacity(sb.len());
        let mut u_node_interior = Vec::with_capacity(sb.len());
        let mut n_int_seen = 0usize;
        for (i, ent) in sb.entities.iter().enumerate() {
            let _ = i;
            match *ent {
                NodeEntity::Vertex(lv) => {
                    u_nodes.push(el.nodes[lv]);
                    u_node_interior.push(false);
                }
                NodeEntity::Edge(le, p) => {
                    let (a, b) = el.shape.local_edges()[le];
                    let (ga, gb) = (el.nodes[a], el.nodes[b]);
                    let key = (ga.min(gb), ga.max(gb));
                    let me = *mesh.edge_index.get(&key).unwrap();
                    // Local traversal a->b at fraction p/k; global direction
                    // runs lo->hi.
                    let q = if ga == key.0 { p } else { k - p };
                    u_nodes.push(edge_node_base + me * per_edge + (q - 1));
                    u_node_interior.push(false);
                }
                NodeEntity::Interior => {
                    u_nodes.push(interior_base[ei] + n_int_seen);
                    n_int_seen += 1;
                    u_node_interior.push(true);
                }
            }
        }
        let mut alpha = Vec::with_capacity(el.shape.n_edges());
        for &(a, b) in el.shape.local_edges() {
            let (ga, gb) = (el.nodes[a], el.nodes[b]);
            let key = (ga.min(gb), ga.max(gb));
            let me = *mesh.edge_index.get(&key).unwrap();
            alpha.push((me, alpha_of_edge[me].clone()));
        }
        let si = shapes.iter().position(|&s| s == el.shape).unwrap();
        let sigma: Vec<usize> = (0..moment_space[si].len()).map(|i| sigma_base[ei] + i).collect();
        let raux: Vec<usize> = (0..aux_space[si].len()).map(|i| raux_base[ei] + i).collect();
        elements.push(ElementDofs {
            u_nodes,
            u_node_interior,
            alpha,
            sigma,
            raux,
        });
    }

    let spaces = Spaces {
        order: k,
        displacement: FeSpace {
            kind: SpaceKind::LagrangeVector(k),
            ndof: 3 * n_u_nodes,
            condensable: false,
        },
        moment: FeSpace {
            kind: SpaceKind::MomentTensor(k - 1),
            ndof: n_sigma,
            condensable: true,
        },
        rotation: FeSpace {
            kind: SpaceKind::EdgeRotation(k - 1),
            ndof: n_alpha,
            condensable: false,
        },
        membrane_aux: FeSpace {
            kind: SpaceKind::MembraneAux(k - 1),
            ndof: n_raux,
            condensable: true,
        },
        lagrange,
        moment_space,
        aux_space,
        shapes,
    };
    let dofmap = DofMap {
        n_u_nodes,
        n_u: 3 * n_u_nodes,
        n_sigma,
        n_alpha,
        n_raux,
        elements,
        node_positions,
        node_owner,
        alpha_of_edge,
    };
    Ok((spaces, dofmap))
}

impl DofMap {
    /// Retained dofs per element as counted for the hybridized-condensed
    /// element: non-interior displacement dofs plus edge rotations.
    pub fn retained_per_element(&self, element: usize) -> usize {
        let ed = &self.elements[element];
        let ext = ed.u_node_interior.iter().filter(|&&i| !i).count();
        3 * ext + ed.alpha.iter().map(|(_, d)| d.len()).sum::<usize>()
    }
}

/// Tangent frame columns (t1, t2) from the chart Jacobian. The environment
/// variable SHELLFE_MOMENT_FRAME=dyad switches to normalized Jacobian
/// columns without orthogonalization (mapped-tensor variant) for
/// experiments; the default is the orthonormal frame.
pub fn tangent_frame(jac: &nalgebra::Matrix3x2<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let g1 = jac.column(0).into_owned();
    let g2 = jac.column(1).into_owned();
    let t1 = g1.normalize();
    if std::env::var("SHELLFE_MOMENT_FRAME").as_deref() == Ok("dyad") {
        return (t1, g2.normalize());
    }
    let t2 = (g2 - t1 * g2.dot(&t1)).normalize();
    (t1, t2)
}

/// The three symmetric tensor modes of the element frame.
pub fn frame_modes(t1: &Vector3<f64>, t2: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    [
        t1 * t1.transpose(),
        t1 * t2.transpose() + t2 * t1.transpose(),
        t2 * t2.transpose(),
    ]
}

/// Spec-level shape evaluation helper.
pub enum ShapeEval {
    /// Lagrange values and ambient surface gradients per node.
    Lagrange(Vec<f64>, Vec<Vector3<f64>>),
    /// Ambient symmetric tangential tensors per tensor-space dof.
    Tensor(Vec<Matrix3<f64>>),
    /// Edge scalar values.
    EdgeScalars(Vec<f64>),
}

pub fn eval_shape(
    spaces: &Spaces,
    mesh: &SurfaceMesh,
    kind: SpaceKind,
    element: usize,
    p: &[f64; 2],
) -> Result<ShapeEval> {
    let shape = mesh.elements[element].shape;
    let inside = match shape {
        ElemShape::Tri => p[0] >= -1e-12 && p[1] >= -1e-12 && p[0] + p[1] <= 1.0 + 1e-12,
        ElemShape::Quad => (-1e-12..=1.0 + 1e-12).contains(&p[0]) && (-1e-12..=1.0 + 1e-12).contains(&p[1]),
    };
    if !inside {
        return Err(Error::Config(format!("point {p:?} outside reference {shape:?}")));
    }
    match kind {
        SpaceKind::LagrangeVector(_) => {
            let sb = spaces.lagrange_basis(shape);
            let vals = sb.eval(p);
            let grads_ref = sb.eval_grad(p);
            let cd = chart_data(mesh, element, p)?;
            let grads = grads_ref.iter().map(|g| cd.gplus_t * g).collect();
            Ok(ShapeEval::Lagrange(vals, grads))
        }
        SpaceKind::MomentTensor(_) | SpaceKind::MembraneAux(_) => {
            let ts = match kind {
                SpaceKind::MomentTensor(_) => spaces.moment_basis(shape),
                _ => spaces.aux_basis(shape),
            };
            let vals = ts.eval_polys(p);
            let cd = chart_data(mesh, element, p)?;
            let (t1, t2) = tangent_frame(&cd.frame.jacobian);
            let modes = frame_modes(&t1, &t2);
            let out = ts
                .entries
                .iter()
                .zip(&vals)
                .map(|(&(mode, _, _), &v)| modes[mode] * v)
                .collect();
            Ok(ShapeEval::Tensor(out))
        }
        SpaceKind::EdgeRotation(_) => Ok(ShapeEval::EdgeScalars(edge_basis_eval(
            spaces.order,
            p[0],
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{benchmark_mesh, BenchmarkParams};
    use crate::mesh::topology::{build_topology, BuildOptions, Element};

    fn one_tri() -> SurfaceMesh {
        build_topology(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            vec![Element {
                shape: ElemShape::Tri,
                nodes: vec![0, 1, 2],
                tag: String::new(),
            }],
            &[],
            &BuildOptions::default(),
        )
        .unwrap()
    }

    fn one_quad() -> SurfaceMesh {
        build_topology(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(1.0, 1.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            vec![Element {
                shape: ElemShape::Quad,
                nodes: vec![0, 1, 2, 3],
                tag: String::new(),
            }],
            &[],
            &BuildOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn retained_counts_match_reference_table() {
        // (shape, k, expected retained dofs per condensed element)
        let cases = [
            (true, 1usize, 12usize),
            (false, 1, 16),
            (true, 3, 36),
            (false, 3, 48),
        ];
        for (tri, k, expect) in cases {
            let mesh = if tri { one_tri() } else { one_quad() };
            let (_, dm) = make_spaces(&mesh, k).unwrap();
            assert_eq!(dm.retained_per_element(0), expect, "tri={tri} k={k}");
        }
    }

    #[test]
    fn moment_space_dimensions() {
        // Enriched quad space separates opposite-edge normal-normal traces:
        // dim 5 at lowest order; triangles span constants (dim 3).
        let mesh = one_quad();
        let (sp, dm) = make_spaces(&mesh, 1).unwrap();
        assert_eq!(dm.n_sigma, 5);
        assert_eq!(dm.n_raux, 3);
        assert!(sp.moment.condensable);
        assert!(sp.membrane_aux.condensable);
        assert!(!sp.displacement.condensable);
        assert!(!sp.rotation.condensable);
    }

    #[test]
    fn k1_triangle_barycenter_values() {
        let mesh = one_tri();
        let (sp, _) = make_spaces(&mesh, 1).unwrap();
        let p = [1.0 / 3.0, 1.0 / 3.0];
        if let ShapeEval::Lagrange(vals, grads) =
            eval_shape(&sp, &mesh, SpaceKind::LagrangeVector(1), 0, &p).unwrap()
        {
            for v in &vals {
                assert!((v - 1.0 / 3.0).abs() < 1e-14);
            }
            let sum: Vector3<f64> = grads.iter().sum();
            assert!(sum.norm() < 1e-13);
        } else {
            panic!("wrong eval kind");
        }
    }

    #[test]
    fn constant_moment_basis_spans_plane_tensors() {
        let mesh = one_tri();
        let (sp, _) = make_spaces(&mesh, 1).unwrap();
        if let ShapeEval::Tensor(ts) =
            eval_shape(&sp, &mesh, SpaceKind::MomentTensor(0), 0, &[0.25, 0.25]).unwrap()
        {
            // Triangle at lowest order: three constant modes.
            assert_eq!(ts.len(), 3);
            let e1 = Vector3::x();
            let e2 = Vector3::y();
            assert!((ts[0] - e1 * e1.transpose()).norm() < 1e-14);
            assert!((ts[1] - (e1 * e2.transpose() + e2 * e1.transpose())).norm() < 1e-14);
            assert!((ts[2] - e2 * e2.transpose()).norm() < 1e-14);
        } else {
            panic!("wrong eval kind");
        }
    }

    #[test]
    fn lagrange_interpolation_reproduces_polynomials() {
        // Interpolate a degree-k polynomial at the nodes and compare at
        // random-ish interior points, per shape and order.
        for k in 1..=3usize {
            for tri in [true, false] {
                let mesh = if tri { one_tri() } else { one_quad() };
                let (sp, dm) = make_spaces(&mesh, k).unwrap();
                let shape = mesh.elements[0].shape;
                let sb = sp.lagrange_basis(shape);
                let poly = |x: f64, y: f64| {
                    // total degree <= k in (x, y)
                    match k {
                        1 => 0.3 + 1.2 * x - 0.7 * y,
                        2 => 0.3 + 1.2 * x - 0.7 * y + 0.5 * x * y - 0.9 * x * x,
                        _ => 0.3 + 1.2 * x - 0.7 * y + 0.5 * x * y - 0.9 * x * x + 0.4 * x * x * y
                            - 0.2 * y * y * y,
                    }
                };
                let coeffs: Vec<f64> = (0..sb.len())
                    .map(|i| {
                        let pos = dm.node_positions[dm.elements[0].u_nodes[i]];
                        poly(pos.x, pos.y)
                    })
                    .collect();
                for p in [[0.21, 0.17], [0.05, 0.61], [0.33, 0.29]] {
                    let vals = sb.eval(&p);
                    let vh: f64 = vals.iter().zip(&coeffs).map(|(v, c)| v * c).sum();
                    let (pos, _, _) = chart_eval(&mesh, 0, &p);
                    assert!(
                        (vh - poly(pos.x, pos.y)).abs() < 1e-12,
                        "k={k} tri={tri} p={p:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn branch_edge_rotation_dofs_shared_by_three_elements() {
        let mesh = benchmark_mesh(
            "tsection",
            &BenchmarkParams {
                grid: (2, 2),
                ..Default::default()
            },
        )
        .unwrap();
        let (_, dm) = make_spaces(&mesh, 1).unwrap();
        // Find a branch edge and count gather lists containing its alpha dof.
        let branch = mesh
            .edges
            .iter()
            .position(|e| e.kind == crate::mesh::EdgeKind::Branch)
            .unwrap();
        let dof = dm.alpha_of_edge[branch][0];
        let count = dm
            .elements
            .iter()
            .filter(|ed| ed.alpha.iter().any(|(_, ds)| ds.contains(&dof)))
            .count();
        assert_eq!(count, 3);
    }

    #[test]
    fn shared_edge_nodes_match_between_neighbors() {
        // Two quads sharing an edge; with k = 3 the two edge nodes must be
        // identified consistently despite opposite local traversal.
        let mesh = build_topology(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(1.0, 1.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(2.0, 0.0, 0.0),
                Vector3::new(2.0, 1.0, 0.0),
            ],
            vec![
                Element {
                    shape: ElemShape::Quad,
                    nodes: vec![0, 1, 2, 3],
                    tag: String::new(),
                },
                Element {
                    shape: ElemShape::Quad,
                    nodes: vec![1, 4, 5, 2],
                    tag: String::new(),
                },
            ],
            &[],
            &BuildOptions::default(),
        )
        .unwrap();
        let (sp, dm) = make_spaces(&mesh, 3).unwrap();
        let sb = sp.lagrange_basis(ElemShape::Quad);
        // Collect (global node, position) for both elements and check that a
        // shared global node always has the same chart position.
        let mut seen: std::collections::BTreeMap<usize, Vector3<f64>> = Default::default();
        for ei in 0..2 {
            for (i, &gn) in dm.elements[ei].u_nodes.iter().enumerate() {
                let (pos, _, _) = chart_eval(&mesh, ei, &sb.nodes[i]);
                if let Some(prev) = seen.insert(gn, pos) {
                    assert!((prev - pos).norm() < 1e-13, "node {gn}");
                }
            }
        }
    }
}
