//! Pointwise reference geometry of a facetted element: chart Jacobian, unit
//! normal, tangent projector, Weingarten map and the chart-derivative data
//! needed to evaluate surface gradients and Hessians of nodal fields.
//!
//! Triangles are affine; quadrilaterals are bilinear and may be warped, in
//! which case the normal varies over the element and the Weingarten map is
//! nonzero.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::topology::{ElemShape, SurfaceMesh};

/// Reference frame data at one point of an element.
#[derive(Clone, Debug)]
pub struct GeometryFrame {
    /// Chart Jacobian d x / d xi (3x2).
    pub jacobian: Matrix3x2<f64>,
    /// Unit element normal nu.
    pub normal: Vector3<f64>,
    /// Tangent projector P_tau = I - nu nu^T.
    pub projector: Matrix3<f64>,
    /// Reference Weingarten map grad_tau nu (3x3, tangential, symmetric).
    pub weingarten: Matrix3<f64>,
    /// Surface measure density |g1 x g2| at the point.
    pub weight: f64,
}

/// Full chart data used by assembly: frame plus pseudo-inverse and its
/// reference derivatives.
#[derive(Clone, Debug)]
pub struct ChartData {
    pub frame: GeometryFrame,
    /// G^+ = (G^T G)^{-1} G^T (2x3); maps ambient increments to reference.
    pub gplus: Matrix2x3<f64>,
    /// (G^+)^T = G (G^T G)^{-1} (3x2).
    pub gplus_t: Matrix3x2<f64>,
    /// d/d xi_a of (G^+)^T, a = 0, 1 (each 3x2); zero on triangles and flat
    /// quads in uniform parametrization.
    pub dgplus_t: [Matrix3x2<f64>; 2],
    /// Second chart derivative d^2 X / d xi d eta (bilinear warp vector).
    pub warp: Vector3<f64>,
}

fn chart_nodes(mesh: &SurfaceMesh, element: usize) -> Vec<Vector3<f64>> {
    mesh.elements[element]
        .nodes
        .iter()
        .map(|&n| mesh.vertices[n])
        .collect()
}

/// Chart evaluation: position and Jacobian columns at reference point.
pub fn chart_eval(
    mesh: &SurfaceMesh,
    element: usize,
    p: &[f64; 2],
) -> (Vector3<f64>, Matrix3x2<f64>, Vector3<f64>) {
    let x = chart_nodes(mesh, element);
    match mesh.elements[element].shape {
        ElemShape::Tri => {
            let pos = x[0] + (x[1] - x[0]) * p[0] + (x[2] - x[0]) * p[1];
            let mut g = Matrix3x2::zeros();
            g.set_column(0, &(x[1] - x[0]));
            g.set_column(1, &(x[2] - x[0]));
            (pos, g, Vector3::zeros())
        }
        ElemShape::Quad => {
            let (xi, eta) = (p[0], p[1]);
            let pos = x[0] * (1.0 - xi) * (1.0 - eta)
                + x[1] * xi * (1.0 - eta)
                + x[2] * xi * eta
                + x[3] * (1.0 - xi) * eta;
            let g1 = (x[1] - x[0]) * (1.0 - eta) + (x[2] - x[3]) * eta;
            let g2 = (x[3] - x[0]) * (1.0 - xi) + (x[2] - x[1]) * xi;
            let warp = x[0] - x[1] + x[2] - x[3];
            let mut g = Matrix3x2::zeros();
            g.set_column(0, &g1);
            g.set_column(1, &g2);
            (pos, g, warp)
        }
    }
}

pub fn chart_data(mesh: &SurfaceMesh, element: usize, p: &[f64; 2]) -> Result<ChartData> {
    let (_, g, warp) = chart_eval(mesh, element, p);
    let g1 = g.column(0).into_owned();
    let g2 = g.column(1).into_owned();
    let cross = g1.cross(&g2);
    let area2 = cross.norm();
    let scale = g1.norm_squared().max(g2.norm_squared());
    if area2 <= 1e-12 * scale {
        return Err(Error::Geometry {
            element,
            what: format!("chart Jacobian rank deficient at ({}, {})", p[0], p[1]),
        });
    }
    let normal = cross / area2;
    let projector = Matrix3::identity() - normal * normal.transpose();

    let c = g.transpose() * g; // metric, 2x2
    let ci = c
        .try_inverse()
        .ok_or_else(|| Error::Geometry {
            element,
            what: "metric not invertible".into(),
        })?;
    let gplus_t = g * ci; // 3x2
    let gplus = gplus_t.transpose();

    // Derivatives of the Jacobian columns: dG/dxi = [0 | warp], dG/deta =
    // [warp | 0] for bilinear charts, zero for affine triangles.
    let dg = [
        {
            let mut m = Matrix3x2::zeros();
            m.set_column(1, &warp);
            m
        },
        {
            let mut m = Matrix3x2::zeros();
            m.set_column(0, &warp);
            m
        },
    ];

    let mut dgplus_t = [Matrix3x2::zeros(); 2];
    let mut dnormal = [Vector3::zeros(); 2];
    for a in 0..2 {
        let dga = dg[a];
        let dc: Matrix2<f64> = dga.transpose() * g + g.transpose() * dga;
        let dci = -ci * dc * ci;
        dgplus_t[a] = dga * ci + g * dci;
        let dcross = dga.column(0).cross(&g2) + g1.cross(&dga.column(1).into_owned());
        dnormal[a] = (dcross - normal * normal.dot(&dcross)) / area2;
    }

    // Weingarten: grad_tau nu = sum_a (d nu / d xi_a) (G^+ row a).
    let mut weingarten = Matrix3::zeros();
    for a in 0..2 {
        weingarten += dnormal[a] * gplus.row(a);
    }

    Ok(ChartData {
        frame: GeometryFrame {
            jacobian: g,
            normal,
            projector,
            weingarten,
            weight: area2,
        },
        gplus,
        gplus_t,
        dgplus_t,
        warp,
    })
}

/// Spec-level accessor: reference frame quantities at a point.
pub fn geometry_frame(mesh: &SurfaceMesh, element: usize, p: &[f64; 2]) -> Result<GeometryFrame> {
    Ok(chart_data(mesh, element, p)?.frame)
}

/// Surface gradient (3-vector) and surface Hessian (3x3) operators of a
/// scalar nodal shape function with reference gradient `dn` and reference
/// Hessian `d2n`, at the chart point described by `cd`.
pub fn nodal_surface_operators(
    cd: &ChartData,
    dn: &Vector2<f64>,
    d2n: &Matrix2<f64>,
) -> (Vector3<f64>, Matrix3<f64>) {
    let grad = cd.gplus_t * dn;
    // H = sum_a d_a((G^+)^T dN) (G^+ row a), with
    // d_a((G^+)^T dN) = (d_a (G^+)^T) dN + (G^+)^T (d_a dN).
    let drop_chart_terms = std::env::var("SHELLFE_SIMPLE_HESSIAN").is_ok();
    let mut hess = Matrix3::zeros();
    for a in 0..2 {
        let da = if drop_chart_terms {
            cd.gplus_t * d2n.column(a).into_owned()
        } else {
            cd.dgplus_t[a] * dn + cd.gplus_t * d2n.column(a).into_owned()
        };
        hess += da * cd.gplus.row(a);
    }
    (grad, hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::{build_topology, BuildOptions, Element};

    fn single(shape: ElemShape, pts: &[[f64; 3]]) -> SurfaceMesh {
        let vertices = pts.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
        let elements = vec![Element {
            shape,
            nodes: (0..pts.len()).collect(),
            tag: String::new(),
        }];
        build_topology(vertices, elements, &[], &BuildOptions::default()).unwrap()
    }

    #[test]
    fn flat_triangle_frame() {
        let mesh = single(
            ElemShape::Tri,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        );
        let f = geometry_frame(&mesh, 0, &[0.2, 0.3]).unwrap();
        assert!((f.normal - Vector3::z()).norm() < 1e-14);
        assert!((f.projector - Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))).norm() < 1e-14);
        assert!(f.weingarten.norm() < 1e-14);
        assert!((f.weight - 1.0).abs() < 1e-14);
    }

    #[test]
    fn planar_skewed_quad_has_zero_weingarten() {
        let mesh = single(
            ElemShape::Quad,
            &[[0.0, 0.0, 0.0], [2.0, 0.1, 0.0], [2.3, 1.4, 0.0], [-0.2, 1.0, 0.0]],
        );
        for p in [[0.1, 0.2], [0.7, 0.9], [0.5, 0.5]] {
            let f = geometry_frame(&mesh, 0, &p).unwrap();
            assert!(f.weingarten.norm() < 1e-13, "{:?}", f.weingarten);
            assert!((f.normal - Vector3::z()).norm() < 1e-14);
        }
    }

    /// Warped quad: Weingarten map checked against central finite differences
    /// of the normal over the geometry map, and structural invariants.
    #[test]
    fn warped_quad_weingarten_matches_fd() {
        let mesh = single(
            ElemShape::Quad,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.3], [1.1, 1.0, -0.1], [0.0, 1.2, 0.2]],
        );
        for p in [[0.3, 0.4], [0.6, 0.8]] {
            let cd = chart_data(&mesh, 0, &p).unwrap();
            let f = &cd.frame;
            // Structural: unit normal, symmetric tangential Weingarten.
            assert!((f.normal.norm() - 1.0).abs() < 1e-14);
            assert!((f.weingarten * f.normal).norm() < 1e-13);
            assert!((f.normal.transpose() * f.weingarten).norm() < 1e-13);
            assert!((f.weingarten - f.weingarten.transpose()).norm() < 1e-10);

            // FD of nu over the chart: d nu/d xi_a, composed with G^+.
            let e = 1e-6;
            let mut w_fd = Matrix3::zeros();
            for a in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[a] += e;
                pm[a] -= e;
                let np = geometry_frame(&mesh, 0, &pp).unwrap().normal;
                let nm = geometry_frame(&mesh, 0, &pm).unwrap().normal;
                let d = (np - nm) / (2.0 * e);
                w_fd += d * cd.gplus.row(a);
            }
            let rel = (f.weingarten - w_fd).norm() / f.weingarten.norm();
            assert!(rel < 1e-8, "rel err {rel}");
        }
    }

    #[test]
    fn degenerate_jacobian_reported() {
        // Collinear triangle assembled by hand; build_topology would already
        // reject it while orienting conormals.
        let mesh = SurfaceMesh {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(2.0, 0.0, 0.0),
            ],
            elements: vec![Element {
                shape: ElemShape::Tri,
                nodes: vec![0, 1, 2],
                tag: String::new(),
            }],
            edges: Vec::new(),
            edge_index: Default::default(),
            probes: Default::default(),
        };
        assert!(matches!(
            geometry_frame(&mesh, 0, &[0.3, 0.3]),
            Err(Error::Geometry { .. })
        ));
    }
}
