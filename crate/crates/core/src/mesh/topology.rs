//! Facetted mid-surface topology: flat triangles and bilinear (possibly
//! warped) quadrilaterals, with oriented edges, incidence data and boundary
//! region tags.
//!
//! Conventions:
//! - element vertex order induces the element normal (counterclockwise seen
//!   from the +normal side);
//! - the global edge tangent tau_e runs from the lower to the higher vertex
//!   index;
//! - per (element, edge) incidence the stored sign s satisfies
//!   mu = s * (nu x tau_e) pointing out of the element.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElemShape {
    Tri,
    Quad,
}

impl ElemShape {
    pub fn n_vertices(self) -> usize {
        match self {
            ElemShape::Tri => 3,
            ElemShape::Quad => 4,
        }
    }
    pub fn n_edges(self) -> usize {
        self.n_vertices()
    }
    /// Local vertex index pairs of the element edges, in traversal order.
    pub fn local_edges(self) -> &'static [(usize, usize)] {
        match self {
            ElemShape::Tri => &[(0, 1), (1, 2), (2, 0)],
            ElemShape::Quad => &[(0, 1), (1, 2), (2, 3), (3, 0)],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    pub shape: ElemShape,
    pub nodes: Vec<usize>,
    pub tag: String,
}

#[derive(Clone, Copy, Debug)]
pub struct EdgeIncidence {
    pub element: usize,
    pub local_edge: usize,
    /// True if the element traverses the edge from the lower to the higher
    /// global vertex index.
    pub aligned: bool,
    /// Sign s with mu = s * (nu x tau_e) outward.
    pub conormal_sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeKind {
    /// Boundary edge with a region tag (possibly empty).
    Boundary(String),
    Interior,
    /// Shared by more than two elements (branching shells).
    Branch,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Global vertex pair with v0 < v1; tau_e points from v0 to v1.
    pub vertices: (usize, usize),
    pub incidences: Vec<EdgeIncidence>,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// Sorted-vertex-pair lookup into `edges`.
    pub edge_index: BTreeMap<(usize, usize), usize>,
    /// Named probe points.
    pub probes: BTreeMap<String, Vector3<f64>>,
}

pub enum BoundarySel {
    /// Explicit list of (unordered) vertex pairs.
    Edges(Vec<(usize, usize)>),
    /// Predicate on the two edge endpoint coordinates.
    Predicate(Box<dyn Fn(&Vector3<f64>, &Vector3<f64>) -> bool>),
}

pub struct BoundarySpec {
    pub tag: String,
    pub sel: BoundarySel,
}

impl BoundarySpec {
    pub fn explicit(tag: &str, pairs: Vec<(usize, usize)>) -> Self {
        BoundarySpec {
            tag: tag.to_string(),
            sel: BoundarySel::Edges(pairs),
        }
    }
    pub fn predicate(
        tag: &str,
        f: impl Fn(&Vector3<f64>, &Vector3<f64>) -> bool + 'static,
    ) -> Self {
        BoundarySpec {
            tag: tag.to_string(),
            sel: BoundarySel::Predicate(Box::new(f)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OrientationPolicy {
    /// Flip elements (BFS from the lowest element id per patch) until
    /// neighbors agree; elements opposing a provided reference direction are
    /// flipped as well.
    #[default]
    Normalize,
    /// Any disagreement is an error.
    Reject,
}

#[derive(Default)]
pub struct BuildOptions {
    pub orientation: OrientationPolicy,
    /// Optional global hint: element normals are required/normalized to have
    /// a positive dot product with this direction.
    pub reference_up: Option<Vector3<f64>>,
}

pub fn build_topology(
    vertices: Vec<Vector3<f64>>,
    elements: Vec<Element>,
    boundary_specs: &[BoundarySpec],
    options: &BuildOptions,
) -> Result<SurfaceMesh> {
    let mut elements = elements;
    let n_v = vertices.len();
    let mut used = vec![false; n_v];
    for (ei, el) in elements.iter().enumerate() {
        if el.nodes.len() != el.shape.n_vertices() {
            return Err(Error::Topology(format!(
                "element {ei} has {} nodes for shape {:?}",
                el.nodes.len(),
                el.shape
            )));
        }
        for &n in &el.nodes {
            if n >= n_v {
                return Err(Error::Topology(format!(
                    "element {ei} references vertex {n} out of {n_v}"
                )));
            }
            used[n] = true;
        }
        let mut sorted = el.nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != el.nodes.len() {
            return Err(Error::Topology(format!("element {ei} repeats a vertex")));
        }
    }
    if let Some(v) = used.iter().position(|&u| !u) {
        return Err(Error::Topology(format!(
            "dangling vertex {v}: referenced by no element"
        )));
    }

    // First pass: raw edge incidences (element, local edge, aligned flag).
    let collect_edges = |elements: &[Element]| -> BTreeMap<(usize, usize), Vec<(usize, usize, bool)>> {
        let mut map: BTreeMap<(usize, usize), Vec<(usize, usize, bool)>> = BTreeMap::new();
        for (ei, el) in elements.iter().enumerate() {
            for (le, &(a, b)) in el.shape.local_edges().iter().enumerate() {
                let (ga, gb) = (el.nodes[a], el.nodes[b]);
                let key = (ga.min(gb), ga.max(gb));
                map.entry(key).or_default().push((ei, le, ga == key.0));
            }
        }
        map
    };

    // Orientation pass on non-branch interior edges.
    let raw = collect_edges(&elements);
    let mut flip = vec![false; elements.len()];
    {
        // Adjacency over 2-incidence edges; neighbors must traverse the
        // shared edge in opposite directions once flips are applied.
        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); elements.len()];
        for inc in raw.values() {
            if inc.len() == 2 {
                let (e0, _, a0) = inc[0];
                let (e1, _, a1) = inc[1];
                // same_needed: whether e0 and e1 must carry the same flip flag
                let same = a0 != a1;
                adj[e0].push((e1, same));
                adj[e1].push((e0, same));
            }
        }
        let mut seen = vec![false; elements.len()];
        for start in 0..elements.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = vec![start];
            while let Some(e) = queue.pop() {
                for &(o, same) in &adj[e] {
                    let want = if same { flip[e] } else { !flip[e] };
                    if !seen[o] {
                        seen[o] = true;
                        flip[o] = want;
                        queue.push(o);
                    } else if flip[o] != want {
                        // Moebius-like inconsistency; cannot be normalized.
                        return Err(Error::Topology(
                            "mesh orientation cannot be made consistent (non-orientable patch)"
                                .into(),
                        ));
                    }
                }
            }
        }
        // A consistent mesh never needs flips: flips arise exactly when some
        // 2-incidence edge is traversed the same way by both neighbors.
        if flip.iter().any(|&f| f) && options.orientation == OrientationPolicy::Reject {
            for (key, inc) in &raw {
                if inc.len() == 2 && inc[0].2 == inc[1].2 {
                    return Err(Error::Orientation { v0: key.0, v1: key.1 });
                }
            }
            return Err(Error::Topology("inconsistent element orientation".into()));
        }
    }

    // Reference-up normalization/rejection uses the element normal at the
    // reference centroid.
    if let Some(up) = options.reference_up {
        for (ei, el) in elements.iter().enumerate() {
            let n = facet_normal(&vertices, el);
            let effective = if flip[ei] { -n } else { n };
            if effective.dot(&up) < 0.0 {
                match options.orientation {
                    OrientationPolicy::Normalize => flip[ei] = !flip[ei],
                    OrientationPolicy::Reject => {
                        return Err(Error::Topology(format!(
                            "element {ei} normal opposes the reference direction"
                        )))
                    }
                }
            }
        }
    }
    for (ei, el) in elements.iter_mut().enumerate() {
        if flip[ei] {
            // Reversing the cyclic order flips the induced normal while
            // keeping vertex 0 first.
            el.nodes[1..].reverse();
        }
    }

    // Re-collect after flips and verify pairwise consistency.
    let raw = collect_edges(&elements);
    let mut edges = Vec::with_capacity(raw.len());
    let mut edge_index = BTreeMap::new();
    for (key, inc) in raw {
        if inc.len() == 2 {
            let (_, _, a0) = inc[0];
            let (_, _, a1) = inc[1];
            if a0 == a1 {
                return Err(Error::Orientation { v0: key.0, v1: key.1 });
            }
        }
        let kind = match inc.len() {
            1 => EdgeKind::Boundary(String::new()),
            2 => EdgeKind::Interior,
            _ => EdgeKind::Branch,
        };
        let idx = edges.len();
        edge_index.insert(key, idx);
        edges.push(Edge {
            vertices: key,
            incidences: inc
                .into_iter()
                .map(|(element, local_edge, aligned)| EdgeIncidence {
                    element,
                    local_edge,
                    aligned,
                    conormal_sign: 0.0,
                })
                .collect(),
            kind,
        });
    }

    let mut mesh = SurfaceMesh {
        vertices,
        elements,
        edges,
        edge_index,
        probes: BTreeMap::new(),
    };
    mesh.compute_conormal_signs()?;
    mesh.attach_boundary_tags(boundary_specs)?;
    Ok(mesh)
}

/// Normal of the facet plane at the reference centroid (exact for flat
/// triangles; the mean-plane normal for warped quads).
fn facet_normal(vertices: &[Vector3<f64>], el: &Element) -> Vector3<f64> {
    let p: Vec<&Vector3<f64>> = el.nodes.iter().map(|&n| &vertices[n]).collect();
    let n = match el.shape {
        ElemShape::Tri => (p[1] - p[0]).cross(&(p[2] - p[0])),
        ElemShape::Quad => (p[2] - p[0]).cross(&(p[3] - p[1])),
    };
    n.normalize()
}

impl SurfaceMesh {
    fn compute_conormal_signs(&mut self) -> Result<()> {
        let mut signs: Vec<Vec<f64>> = Vec::with_capacity(self.edges.len());
        for edge in &self.edges {
            let (lo, hi) = edge.vertices;
            let tau = (self.vertices[hi] - self.vertices[lo]).normalize();
            let mid = 0.5 * (self.vertices[lo] + self.vertices[hi]);
            let mut s_edge = Vec::with_capacity(edge.incidences.len());
            for inc in &edge.incidences {
                let el = &self.elements[inc.element];
                let nu = facet_normal(&self.vertices, el);
                let centroid = el
                    .nodes
                    .iter()
                    .map(|&n| self.vertices[n])
                    .sum::<Vector3<f64>>()
                    / el.nodes.len() as f64;
                let mu0 = nu.cross(&tau);
                let outward = mid - centroid;
                let d = mu0.dot(&outward);
                if !d.is_finite() || d.abs() < 1e-12 * outward.norm().max(1e-300) {
                    return Err(Error::Geometry {
                        element: inc.element,
                        what: "cannot orient conormal (degenerate element)".into(),
                    });
                }
                s_edge.push(if d > 0.0 { 1.0 } else { -1.0 });
            }
            signs.push(s_edge);
        }
        for (edge, s_edge) in self.edges.iter_mut().zip(signs) {
            for (inc, s) in edge.incidences.iter_mut().zip(s_edge) {
                inc.conormal_sign = s;
            }
        }
        Ok(())
    }

    fn attach_boundary_tags(&mut self, specs: &[BoundarySpec]) -> Result<()> {
        for spec in specs {
            match &spec.sel {
                BoundarySel::Edges(pairs) => {
                    for &(a, b) in pairs {
                        let key = (a.min(b), a.max(b));
                        let idx = *self.edge_index.get(&key).ok_or_else(|| {
                            Error::Topology(format!(
                                "boundary spec '{}' names missing edge ({a}, {b})",
                                spec.tag
                            ))
                        })?;
                        self.tag_edge(idx, &spec.tag)?;
                    }
                }
                BoundarySel::Predicate(f) => {
                    let hits: Vec<usize> = self
                        .edges
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| {
                            matches!(e.kind, EdgeKind::Boundary(_))
                                && f(&self.vertices[e.vertices.0], &self.vertices[e.vertices.1])
                        })
                        .map(|(i, _)| i)
                        .collect();
                    for idx in hits {
                        self.tag_edge(idx, &spec.tag)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn tag_edge(&mut self, idx: usize, tag: &str) -> Result<()> {
        let verts = self.edges[idx].vertices;
        match &mut self.edges[idx].kind {
            EdgeKind::Boundary(t) => {
                if !t.is_empty() && t != tag {
                    return Err(Error::Topology(format!(
                        "edge {verts:?} tagged both '{t}' and '{tag}'"
                    )));
                }
                *t = tag.to_string();
                Ok(())
            }
            _ => Err(Error::Topology(format!(
                "boundary spec '{tag}' selects non-boundary edge {verts:?}"
            ))),
        }
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn boundary_edges<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.edges.iter().enumerate().filter_map(move |(i, e)| {
            matches!(&e.kind, EdgeKind::Boundary(t) if t == tag).then_some(i)
        })
    }

    pub fn edge_tangent(&self, edge: usize) -> Vector3<f64> {
        let (lo, hi) = self.edges[edge].vertices;
        (self.vertices[hi] - self.vertices[lo]).normalize()
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let (lo, hi) = self.edges[edge].vertices;
        (self.vertices[hi] - self.vertices[lo]).norm()
    }

    /// True if the mesh has branch edges or interior kinks (reference
    /// dihedral angle above roundoff); the simplified angle expression is
    /// forbidden on such meshes.
    pub fn has_kinks_or_branches(&self) -> bool {
        for edge in &self.edges {
            match edge.kind {
                EdgeKind::Branch => return true,
                EdgeKind::Interior => {
                    let n0 = facet_normal(&self.vertices, &self.elements[edge.incidences[0].element]);
                    let n1 = facet_normal(&self.vertices, &self.elements[edge.incidences[1].element]);
                    if n0.dot(&n1) < 1.0 - 1e-9 {
                        return true;
                    }
                }
                EdgeKind::Boundary(_) => {}
            }
        }
        false
    }

    pub fn register_probe(&mut self, name: &str, p: Vector3<f64>) {
        self.probes.insert(name.to_string(), p);
    }

    /// Vertex closest to `p`; errors if farther than `tol`.
    pub fn vertex_at(&self, p: &Vector3<f64>, tol: f64) -> Result<usize> {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm();
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.0 <= tol {
            Ok(best.1)
        } else {
            Err(Error::Topology(format!(
                "no vertex within {tol:.2e} of ({}, {}, {})",
                p.x, p.y, p.z
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tris() -> (Vec<Vector3<f64>>, Vec<Element>) {
        let vertices = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let elements = vec![
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
        ];
        (vertices, elements)
    }

    #[test]
    fn two_coplanar_triangles_share_one_interior_edge() {
        let (v, e) = unit_tris();
        let mesh = build_topology(v, e, &[], &BuildOptions::default()).unwrap();
        assert_eq!(mesh.edges.len(), 5);
        let interior: Vec<&Edge> = mesh
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Interior)
            .collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].incidences.len(), 2);
        // mu_L = -mu_R on a coplanar interior edge: equal normals force
        // opposite conormal signs.
        let s0 = interior[0].incidences[0].conormal_sign;
        let s1 = interior[0].incidences[1].conormal_sign;
        assert_eq!(s0 * s1, -1.0);
    }

    #[test]
    fn t_section_branch_edge_has_three_incidences() {
        // Three rectangles sharing the line x=0, z=0 (two horizontal, one
        // vertical web).
        let vertices = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(-1.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.0, 1.0, -1.0),
        ];
        let elements = vec![
            Element {
                shape: ElemShape::Quad,
                nodes: vec![0, 2, 3, 1],
                tag: "right".into(),
            },
            Element {
                shape: ElemShape::Quad,
                nodes: vec![4, 0, 1, 5],
                tag: "left".into(),
            },
            Element {
                shape: ElemShape::Quad,
                nodes: vec![6, 0, 1, 7],
                tag: "web".into(),
            },
        ];
        let mesh = build_topology(vertices, elements, &[], &BuildOptions::default()).unwrap();
        let branch = mesh.edge_between(0, 1).unwrap();
        assert_eq!(mesh.edges[branch].kind, EdgeKind::Branch);
        assert_eq!(mesh.edges[branch].incidences.len(), 3);
    }

    #[test]
    fn clockwise_quad_normalized_or_rejected_per_policy() {
        let vertices = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let cw = vec![Element {
            shape: ElemShape::Quad,
            nodes: vec![0, 3, 2, 1],
            tag: String::new(),
        }];
        let opts = BuildOptions {
            orientation: OrientationPolicy::Normalize,
            reference_up: Some(Vector3::z()),
        };
        let mesh = build_topology(vertices.clone(), cw.clone(), &[], &opts).unwrap();
        assert_eq!(facet_normal(&mesh.vertices, &mesh.elements[0]).z, 1.0);
        let opts = BuildOptions {
            orientation: OrientationPolicy::Reject,
            reference_up: Some(Vector3::z()),
        };
        assert!(build_topology(vertices, cw, &[], &opts).is_err());
    }

    #[test]
    fn dangling_vertex_is_a_topology_error() {
        let (mut v, e) = unit_tris();
        v.push(Vector3::new(5.0, 5.0, 5.0));
        assert!(matches!(
            build_topology(v, e, &[], &BuildOptions::default()),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn inconsistent_neighbor_orientation_rejected() {
        let (v, mut e) = unit_tris();
        e[1].nodes = vec![0, 3, 2]; // flipped second triangle
        let opts = BuildOptions {
            orientation: OrientationPolicy::Reject,
            reference_up: None,
        };
        assert!(build_topology(v.clone(), e.clone(), &[], &opts).is_err());
        // Normalize fixes it.
        let mesh = build_topology(v, e, &[], &BuildOptions::default()).unwrap();
        let edge = mesh.edge_between(0, 2).unwrap();
        assert_eq!(mesh.edges[edge].kind, EdgeKind::Interior);
    }

    #[test]
    fn rebuild_is_idempotent() {
        let (v, e) = unit_tris();
        let mesh = build_topology(v, e, &[], &BuildOptions::default()).unwrap();
        let mesh2 = build_topology(
            mesh.vertices.clone(),
            mesh.elements.clone(),
            &[],
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(mesh.edges.len(), mesh2.edges.len());
        for (a, b) in mesh.edges.iter().zip(&mesh2.edges) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.incidences.len(), b.incidences.len());
            for (ia, ib) in a.incidences.iter().zip(&b.incidences) {
                assert_eq!(ia.conormal_sign, ib.conormal_sign);
                assert_eq!(ia.aligned, ib.aligned);
            }
        }
    }
}
