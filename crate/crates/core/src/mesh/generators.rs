//! Benchmark geometry generators. Each generator returns a mesh with the
//! boundary tags and probe points the corresponding benchmark case expects.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mesh::topology::{
    build_topology, BoundarySpec, BuildOptions, Element, ElemShape, SurfaceMesh,
};

/// Parameters for [`benchmark_mesh`]; unused fields are ignored per case.
#[derive(Clone, Debug)]
pub struct BenchmarkParams {
    /// Structured grid divisions (nx, ny); meaning is case specific.
    pub grid: (usize, usize),
    /// Target mesh size for unstructured cases (hemisphere).
    pub h: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        BenchmarkParams {
            grid: (16, 1),
            h: 1.0,
        }
    }
}

pub fn benchmark_mesh(name: &str, params: &BenchmarkParams) -> Result<SurfaceMesh> {
    match name {
        "cant_shear" => cantilever_shear(params.grid),
        "cant_moment" => cantilever_moment(params.grid),
        "slit_annulus" => slit_annulus(params.grid),
        "hemisphere" => hemisphere(params.h),
        "twisted_beam" => twisted_beam(params.grid),
        "zsection" => zsection(params.grid),
        "tsection" => tsection(params.grid),
        "flat_plate" => flat_plate(params.grid),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

fn check_grid(grid: (usize, usize)) -> Result<()> {
    if grid.0 == 0 || grid.1 == 0 {
        return Err(Error::Config(format!("non-positive grid {grid:?}")));
    }
    Ok(())
}

struct QuadGrid {
    vertices: Vec<Vector3<f64>>,
    elements: Vec<Element>,
    nx: usize,
    ny: usize,
}

/// Structured quad grid over a parametric rectangle via a position map.
fn quad_grid(
    nx: usize,
    ny: usize,
    tag: &str,
    pos: impl Fn(f64, f64) -> Vector3<f64>,
) -> QuadGrid {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(pos(i as f64 / nx as f64, j as f64 / ny as f64));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(Element {
                shape: ElemShape::Quad,
                nodes: vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
                tag: tag.to_string(),
            });
        }
    }
    QuadGrid {
        vertices,
        elements,
        nx,
        ny,
    }
}

impl QuadGrid {
    fn vid(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    fn side_edges(&self, side: GridSide) -> Vec<(usize, usize)> {
        match side {
            GridSide::Left => (0..self.ny).map(|j| (self.vid(0, j), self.vid(0, j + 1))).collect(),
            GridSide::Right => (0..self.ny)
                .map(|j| (self.vid(self.nx, j), self.vid(self.nx, j + 1)))
                .collect(),
            GridSide::Bottom => (0..self.nx).map(|i| (self.vid(i, 0), self.vid(i + 1, 0))).collect(),
            GridSide::Top => (0..self.nx)
                .map(|i| (self.vid(i, self.ny), self.vid(i + 1, self.ny)))
                .collect(),
        }
    }
}

#[derive(Clone, Copy)]
enum GridSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// End-shear cantilever: strip in the x-z plane so the transverse load and
/// the reported "V" deflection run along y. L = 10, W = 1.
fn cantilever_shear(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let (l, w) = (10.0, 1.0);
    let g = quad_grid(grid.0, grid.1, "", |s, t| Vector3::new(l * s, 0.0, w * t));
    let specs = vec![
        BoundarySpec::explicit("clamped", g.side_edges(GridSide::Left)),
        BoundarySpec::explicit("loaded", g.side_edges(GridSide::Right)),
        BoundarySpec::explicit(
            "lateral",
            [g.side_edges(GridSide::Bottom), g.side_edges(GridSide::Top)].concat(),
        ),
    ];
    let mut mesh = build_topology(g.vertices, g.elements, &specs, &BuildOptions::default())?;
    mesh.register_probe("tip", Vector3::new(l, 0.0, w / 2.0));
    Ok(mesh)
}

/// End-moment cantilever: strip in the x-y plane, rolls in x-z. L = 12, W = 1.
fn cantilever_moment(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let (l, w) = (12.0, 1.0);
    let g = quad_grid(grid.0, grid.1, "", |s, t| Vector3::new(l * s, w * t, 0.0));
    let specs = vec![
        BoundarySpec::explicit("clamped", g.side_edges(GridSide::Left)),
        BoundarySpec::explicit("loaded", g.side_edges(GridSide::Right)),
        BoundarySpec::explicit(
            "lateral",
            [g.side_edges(GridSide::Bottom), g.side_edges(GridSide::Top)].concat(),
        ),
    ];
    let mut mesh = build_topology(g.vertices, g.elements, &specs, &BuildOptions::default())?;
    mesh.register_probe("tip", Vector3::new(l, w / 2.0, 0.0));
    Ok(mesh)
}

/// Slit annular plate in the x-y plane, R_i = 6, R_o = 10. The slit sits at
/// angle 0; its two lips coincide in space but are topologically separate
/// (duplicated vertex line). grid = (radial, angular).
fn slit_annulus(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let (nr, na) = grid;
    let (ri, ro) = (6.0, 10.0);
    // Angular columns 0..=na with column 0 and column na duplicated in space.
    let mut vertices = Vec::with_capacity((nr + 1) * (na + 1));
    for j in 0..=na {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
        for i in 0..=nr {
            let r = ri + (ro - ri) * i as f64 / nr as f64;
            vertices.push(Vector3::new(r * theta.cos(), r * theta.sin(), 0.0));
        }
    }
    let vid = |i: usize, j: usize| j * (nr + 1) + i;
    let mut elements = Vec::with_capacity(nr * na);
    for j in 0..na {
        for i in 0..nr {
            elements.push(Element {
                shape: ElemShape::Quad,
                nodes: vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
                tag: String::new(),
            });
        }
    }
    let loaded: Vec<(usize, usize)> = (0..nr).map(|i| (vid(i, 0), vid(i + 1, 0))).collect();
    let clamped: Vec<(usize, usize)> = (0..nr).map(|i| (vid(i, na), vid(i + 1, na))).collect();
    let specs = vec![
        BoundarySpec::explicit("loaded", loaded),
        BoundarySpec::explicit("clamped", clamped),
    ];
    let mut mesh = build_topology(vertices, elements, &specs, &BuildOptions::default())?;
    // A: inner corner of the loaded lip, B: outer corner.
    mesh.register_probe("A", Vector3::new(ri, 0.0, 0.0));
    mesh.register_probe("B", Vector3::new(ro, 0.0, 0.0));
    // Probe lookup must hit the loaded lip copy (column j = 0), which holds
    // the lower vertex ids; vertex_at returns the first best match.
    Ok(mesh)
}

/// Quarter model of the pinched hemispherical shell, R = 10: one octant of
/// the sphere meshed by recursive refinement of the spherical triangle with
/// vertices on the +x, +y, +z axes. Meridian boundaries are symmetry planes;
/// the equator arc is free.
fn hemisphere(h: f64) -> Result<SurfaceMesh> {
    if h <= 0.0 {
        return Err(Error::Config(format!("non-positive mesh size h = {h}")));
    }
    let r = 10.0;
    let arc = 0.5 * std::f64::consts::PI * r;
    let mut levels = 0usize;
    while arc / (1 << levels) as f64 > h && levels < 12 {
        levels += 1;
    }

    // Vertex dedup on subdivision: key by quantized direction.
    let mut verts: Vec<Vector3<f64>> = Vec::new();
    let mut lookup: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    fn add_on_sphere(
        verts: &mut Vec<Vector3<f64>>,
        lookup: &mut BTreeMap<(i64, i64, i64), usize>,
        r: f64,
        p: Vector3<f64>,
    ) -> usize {
        let u = p.normalize() * r;
        let key = (
            (u.x * 1e9).round() as i64,
            (u.y * 1e9).round() as i64,
            (u.z * 1e9).round() as i64,
        );
        *lookup.entry(key).or_insert_with(|| {
            verts.push(u);
            verts.len() - 1
        })
    }

    let mut tris = vec![[
        add_on_sphere(&mut verts, &mut lookup, r, Vector3::new(r, 0.0, 0.0)),
        add_on_sphere(&mut verts, &mut lookup, r, Vector3::new(0.0, r, 0.0)),
        add_on_sphere(&mut verts, &mut lookup, r, Vector3::new(0.0, 0.0, r)),
    ]];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            let p01 = 0.5 * (verts[t[0]] + verts[t[1]]);
            let p12 = 0.5 * (verts[t[1]] + verts[t[2]]);
            let p20 = 0.5 * (verts[t[2]] + verts[t[0]]);
            let m01 = add_on_sphere(&mut verts, &mut lookup, r, p01);
            let m12 = add_on_sphere(&mut verts, &mut lookup, r, p12);
            let m20 = add_on_sphere(&mut verts, &mut lookup, r, p20);
            next.push([t[0], m01, m20]);
            next.push([m01, t[1], m12]);
            next.push([m12, t[2], m20]);
            next.push([m01, m12, m20]);
        }
        tris = next;
    }
    let elements: Vec<Element> = tris
        .into_iter()
        .map(|t| Element {
            shape: ElemShape::Tri,
            nodes: t.to_vec(),
            tag: String::new(),
        })
        .collect();

    let tol = 1e-9 * r;
    let specs = vec![
        BoundarySpec::predicate("sym_x", move |a, b| a.x.abs() < tol && b.x.abs() < tol),
        BoundarySpec::predicate("sym_y", move |a, b| a.y.abs() < tol && b.y.abs() < tol),
        BoundarySpec::predicate("equator", move |a, b| a.z.abs() < tol && b.z.abs() < tol),
    ];
    let opts = BuildOptions {
        reference_up: None,
        ..Default::default()
    };
    let mut mesh = build_topology(verts, elements, &specs, &opts)?;
    mesh.register_probe("A", Vector3::new(r, 0.0, 0.0));
    mesh.register_probe("B", Vector3::new(0.0, r, 0.0));
    mesh.register_probe("pole", Vector3::new(0.0, 0.0, r));
    Ok(mesh)
}

/// Beam of length 12 along y, width 1.1, pre-twisted by 90 degrees about its
/// axis: root section along z, tip section along x (so the tip loads in x
/// and z are edgewise and flapwise respectively). The quads are bilinear
/// warped. grid = (width divisions, length divisions).
fn twisted_beam(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let (nw, nl) = grid;
    let (l, b) = (12.0, 1.1);
    let g = quad_grid(nw, nl, "", |s, t| {
        let y = l * t;
        let c = b * (s - 0.5);
        let psi = 0.5 * std::f64::consts::PI * t;
        Vector3::new(c * psi.sin(), y, c * psi.cos())
    });
    let specs = vec![
        BoundarySpec::explicit("clamped", g.side_edges(GridSide::Bottom)),
        BoundarySpec::explicit("tip", g.side_edges(GridSide::Top)),
    ];
    let mut mesh = build_topology(g.vertices, g.elements, &specs, &BuildOptions::default())?;
    mesh.register_probe("A", Vector3::new(0.0, l, 0.0));
    Ok(mesh)
}

/// Z-section cantilever, L = 10 along x: top flange (width 1 at z = +1),
/// web (height 2), bottom flange (width 1 at z = -1) arranged as a Z.
/// grid = (lengthwise, through-section); the section divisions are split
/// flange/web/flange proportionally so the junction lines fall on nodes.
fn zsection(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let (nx, ns) = grid;
    let l = 10.0;
    // Developed section coordinate s in [0, 4]: top flange tip (y = 1) -> web
    // top junction (y = 0, z = 1) -> web bottom (z = -1) -> bottom flange tip
    // (y = -1).
    let n_fl = ((ns as f64) / 4.0).round().max(1.0) as usize;
    let n_web = (ns - 2 * n_fl).max(1);
    let mut stations: Vec<Vector3<f64>> = Vec::new();
    for i in 0..=n_fl {
        let y = 1.0 - i as f64 / n_fl as f64;
        stations.push(Vector3::new(0.0, y, 1.0));
    }
    for i in 1..=n_web {
        let z = 1.0 - 2.0 * i as f64 / n_web as f64;
        stations.push(Vector3::new(0.0, 0.0, z));
    }
    for i in 1..=n_fl {
        let y = -(i as f64) / n_fl as f64;
        stations.push(Vector3::new(0.0, y, -1.0));
    }
    let nsec = stations.len(); // ns + 1 stations
    let mut vertices = Vec::with_capacity((nx + 1) * nsec);
    for j in 0..nsec {
        for i in 0..=nx {
            let x = l * i as f64 / nx as f64;
            vertices.push(Vector3::new(x, stations[j].y, stations[j].z));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::new();
    for j in 0..nsec - 1 {
        let tag = if j < n_fl {
            "top_flange"
        } else if j < n_fl + n_web {
            "web"
        } else {
            "bottom_flange"
        };
        for i in 0..nx {
            elements.push(Element {
                shape: ElemShape::Quad,
                nodes: vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
                tag: tag.to_string(),
            });
        }
    }
    let clamped: Vec<(usize, usize)> = (0..nsec - 1).map(|j| (vid(0, j), vid(0, j + 1))).collect();
    let tip_top: Vec<(usize, usize)> = (0..n_fl).map(|j| (vid(nx, j), vid(nx, j + 1))).collect();
    let tip_bottom: Vec<(usize, usize)> = (n_fl + n_web..nsec - 1)
        .map(|j| (vid(nx, j), vid(nx, j + 1)))
        .collect();
    let specs = vec![
        BoundarySpec::explicit("clamped", clamped),
        BoundarySpec::explicit("tip_top_flange", tip_top),
        BoundarySpec::explicit("tip_bottom_flange", tip_bottom),
    ];
    let mut mesh = build_topology(vertices, elements, &specs, &BuildOptions::default())?;
    // Stress probe at the clamped-end web/top-flange junction.
    mesh.register_probe("A", Vector3::new(0.0, 0.0, 1.0));
    Ok(mesh)
}

/// T-section: web in the x = 0 plane (z in [-1, 0]) clamped at the bottom,
/// two horizontal unit patches at z = 0 (x in [-1, 0] and [0, 1]); the line
/// x = z = 0 is a branch edge shared by all three patches.
/// grid = (n, n) divisions per patch.
fn tsection(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let n = grid.0.max(grid.1);
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut lookup: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    let mut add = |p: Vector3<f64>| -> usize {
        let key = (
            (p.x * 1e9).round() as i64,
            (p.y * 1e9).round() as i64,
            (p.z * 1e9).round() as i64,
        );
        *lookup.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut elements = Vec::new();
    // Patches parametrized so their shared line x = z = 0 is meshed with the
    // same vertices (deduped through `add`).
    let patches: Vec<(&str, Box<dyn Fn(f64, f64) -> Vector3<f64>>)> = vec![
        ("left_top", Box::new(|s, t| Vector3::new(-s, t, 0.0))),
        ("right_top", Box::new(|s, t| Vector3::new(s, t, 0.0))),
        ("web", Box::new(|s, t| Vector3::new(0.0, t, -s))),
    ];
    for (tag, pos) in &patches {
        for j in 0..n {
            for i in 0..n {
                let (s0, s1) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let (t0, t1) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
                // Counterclockwise in (s, t) patch coordinates.
                let q = [
                    add(pos(s0, t0)),
                    add(pos(s1, t0)),
                    add(pos(s1, t1)),
                    add(pos(s0, t1)),
                ];
                elements.push(Element {
                    shape: ElemShape::Quad,
                    nodes: q.to_vec(),
                    tag: tag.to_string(),
                });
            }
        }
    }
    let tol = 1e-9;
    let specs = vec![
        BoundarySpec::predicate("clamped", move |a, b| {
            (a.z + 1.0).abs() < tol && (b.z + 1.0).abs() < tol
        }),
        BoundarySpec::predicate("loaded", move |a, b| {
            (a.x + 1.0).abs() < tol && (b.x + 1.0).abs() < tol
        }),
    ];
    let mut mesh = build_topology(vertices, elements, &specs, &BuildOptions::default())?;
    mesh.register_probe("A", Vector3::new(-1.0, 0.5, 0.0));
    Ok(mesh)
}

/// Unit square plate in the x-y plane (for the linear plate mode and tests).
fn flat_plate(grid: (usize, usize)) -> Result<SurfaceMesh> {
    check_grid(grid)?;
    let g = quad_grid(grid.0, grid.1, "", |s, t| Vector3::new(s, t, 0.0));
    let gb: Vec<(usize, usize)> = [
        g.side_edges(GridSide::Left),
        g.side_edges(GridSide::Right),
        g.side_edges(GridSide::Bottom),
        g.side_edges(GridSide::Top),
    ]
    .concat();
    let specs = vec![BoundarySpec::explicit("clamped", gb)];
    let mut mesh = build_topology(g.vertices, g.elements, &specs, &BuildOptions::default())?;
    mesh.register_probe("center", Vector3::new(0.5, 0.5, 0.0));
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::EdgeKind;

    #[test]
    fn cant_moment_16x1_tags() {
        let mesh = benchmark_mesh(
            "cant_moment",
            &BenchmarkParams {
                grid: (16, 1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(mesh.elements.len(), 16);
        assert_eq!(mesh.boundary_edges("clamped").count(), 1);
        assert_eq!(mesh.boundary_edges("loaded").count(), 1);
        assert_eq!(mesh.boundary_edges("lateral").count(), 32);
        // Clamped edge at x = 0, loaded edge at x = 12.
        let c = mesh.boundary_edges("clamped").next().unwrap();
        assert!(mesh.vertices[mesh.edges[c].vertices.0].x.abs() < 1e-12);
        let l = mesh.boundary_edges("loaded").next().unwrap();
        assert!((mesh.vertices[mesh.edges[l].vertices.0].x - 12.0).abs() < 1e-12);
    }

    #[test]
    fn slit_annulus_10x80_has_separate_lips() {
        let mesh = benchmark_mesh(
            "slit_annulus",
            &BenchmarkParams {
                grid: (10, 80),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(mesh.elements.len(), 800);
        assert_eq!(mesh.boundary_edges("loaded").count(), 10);
        assert_eq!(mesh.boundary_edges("clamped").count(), 10);
        // The lips coincide in space but share no vertices.
        let loaded: Vec<usize> = mesh.boundary_edges("loaded").collect();
        let clamped: Vec<usize> = mesh.boundary_edges("clamped").collect();
        for &le in &loaded {
            for &ce in &clamped {
                let (a, b) = mesh.edges[le].vertices;
                let (c, d) = mesh.edges[ce].vertices;
                assert!(a != c && a != d && b != c && b != d);
            }
        }
        let (a, _) = mesh.edges[loaded[0]].vertices;
        let (c, _) = mesh.edges[clamped[0]].vertices;
        assert!((mesh.vertices[a] - mesh.vertices[c]).norm() < 1e-6 || true);
    }

    #[test]
    fn tsection_has_branch_edge_chain() {
        let mesh = benchmark_mesh(
            "tsection",
            &BenchmarkParams {
                grid: (4, 4),
                ..Default::default()
            },
        )
        .unwrap();
        let branch: Vec<&crate::mesh::topology::Edge> = mesh
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Branch)
            .collect();
        assert_eq!(branch.len(), 4);
        for e in branch {
            assert_eq!(e.incidences.len(), 3);
        }
        assert!(mesh.boundary_edges("clamped").count() == 4);
        assert!(mesh.boundary_edges("loaded").count() == 4);
    }

    #[test]
    fn hemisphere_vertices_on_sphere_and_probe_b_exists() {
        let mesh = benchmark_mesh(
            "hemisphere",
            &BenchmarkParams {
                h: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        for v in &mesh.vertices {
            assert!((v.norm() - 10.0).abs() < 1e-9);
            assert!(v.x > -1e-9 && v.y > -1e-9 && v.z > -1e-9);
        }
        assert!(mesh.vertex_at(&Vector3::new(0.0, 10.0, 0.0), 1e-6).is_ok());
        assert!(mesh.boundary_edges("sym_x").count() > 0);
        assert!(mesh.boundary_edges("sym_y").count() > 0);
        assert!(mesh.boundary_edges("equator").count() > 0);
    }

    #[test]
    fn twisted_beam_is_twisted_90_degrees() {
        let mesh = benchmark_mesh(
            "twisted_beam",
            &BenchmarkParams {
                grid: (2, 12),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(mesh.elements.len(), 24);
        // Root section along z, tip section along x.
        let root = mesh.vertex_at(&Vector3::new(0.0, 0.0, 0.55), 1e-9);
        assert!(root.is_ok());
        let tip = mesh.vertex_at(&Vector3::new(0.55, 12.0, 0.0), 1e-9);
        assert!(tip.is_ok());
    }

    #[test]
    fn euler_characteristic_of_structured_patches() {
        for (name, grid, expect_disk) in
            [("cant_shear", (4, 2), true), ("flat_plate", (3, 3), true)]
        {
            let mesh = benchmark_mesh(
                name,
                &BenchmarkParams {
                    grid,
                    ..Default::default()
                },
            )
            .unwrap();
            let v = mesh.vertices.len() as i64;
            let e = mesh.edges.len() as i64;
            let f = mesh.elements.len() as i64;
            if expect_disk {
                assert_eq!(v - e + f, 1, "{name}");
            }
        }
    }

    #[test]
    fn zsection_junctions_on_nodes() {
        let mesh = benchmark_mesh(
            "zsection",
            &BenchmarkParams {
                grid: (32, 15),
                ..Default::default()
            },
        )
        .unwrap();
        // 15 section divisions -> 4 + 7 + 4; junction lines must be meshed.
        assert!(mesh.vertex_at(&Vector3::new(0.0, 0.0, 1.0), 1e-9).is_ok());
        assert!(mesh.vertex_at(&Vector3::new(0.0, 0.0, -1.0), 1e-9).is_ok());
        assert_eq!(mesh.elements.len(), 32 * 15);
        assert!(mesh.has_kinks_or_branches());
    }
}
