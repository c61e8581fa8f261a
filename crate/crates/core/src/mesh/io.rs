//! Mesh JSON format: arrays `vertices` [[x,y,z]...], `elements`
//! [{"shape","nodes","tag"}...], `boundaries` {tag: [[v0,v1]...]}, probe
//! points under `probes` as {"name": [x,y,z]}.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::topology::{
    build_topology, BoundarySpec, BuildOptions, EdgeKind, Element, ElemShape, SurfaceMesh,
};

#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 3]>,
    elements: Vec<ElementRecord>,
    boundaries: BTreeMap<String, Vec<[usize; 2]>>,
    #[serde(default)]
    probes: BTreeMap<String, [f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct ElementRecord {
    shape: String,
    nodes: Vec<usize>,
    #[serde(default)]
    tag: String,
}

pub fn save_mesh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    let mut boundaries: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
    for edge in &mesh.edges {
        if let EdgeKind::Boundary(tag) = &edge.kind {
            if !tag.is_empty() {
                boundaries
                    .entry(tag.clone())
                    .or_default()
                    .push([edge.vertices.0, edge.vertices.1]);
            }
        }
    }
    let file = MeshFile {
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        elements: mesh
            .elements
            .iter()
            .map(|e| ElementRecord {
                shape: match e.shape {
                    ElemShape::Tri => "tri".into(),
                    ElemShape::Quad => "quad".into(),
                },
                nodes: e.nodes.clone(),
                tag: e.tag.clone(),
            })
            .collect(),
        boundaries,
        probes: mesh
            .probes
            .iter()
            .map(|(k, v)| (k.clone(), [v.x, v.y, v.z]))
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format(format!("serialize: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<SurfaceMesh> {
    let text = std::fs::read_to_string(path)?;
    let file: MeshFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("parse: {e}")))?;
    let vertices: Vec<Vector3<f64>> = file
        .vertices
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]))
        .collect();
    let elements: Vec<Element> = file
        .elements
        .into_iter()
        .map(|e| {
            let shape = match e.shape.as_str() {
                "tri" => Ok(ElemShape::Tri),
                "quad" => Ok(ElemShape::Quad),
                other => Err(Error::Format(format!("unknown element shape '{other}'"))),
            }?;
            Ok(Element {
                shape,
                nodes: e.nodes,
                tag: e.tag,
            })
        })
        .collect::<Result<_>>()?;
    let specs: Vec<BoundarySpec> = file
        .boundaries
        .into_iter()
        .map(|(tag, pairs)| {
            BoundarySpec::explicit(&tag, pairs.iter().map(|p| (p[0], p[1])).collect())
        })
        .collect();
    let mut mesh = build_topology(vertices, elements, &specs, &BuildOptions::default())?;
    for (name, p) in file.probes {
        mesh.register_probe(&name, Vector3::new(p[0], p[1], p[2]));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators::{benchmark_mesh, BenchmarkParams};

    #[test]
    fn roundtrip_preserves_topology_and_tags() {
        let mesh = benchmark_mesh(
            "tsection",
            &BenchmarkParams {
                grid: (2, 2),
                ..Default::default()
            },
        )
        .unwrap();
        let dir = std::env::temp_dir().join("shellfe_mesh_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tsection.json");
        save_mesh(&mesh, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices.len(), mesh.vertices.len());
        assert_eq!(back.elements.len(), mesh.elements.len());
        assert_eq!(back.edges.len(), mesh.edges.len());
        assert_eq!(
            back.boundary_edges("clamped").count(),
            mesh.boundary_edges("clamped").count()
        );
        assert_eq!(back.probes.len(), mesh.probes.len());
        for (e0, e1) in mesh.edges.iter().zip(&back.edges) {
            assert_eq!(e0.vertices, e1.vertices);
            assert_eq!(e0.kind, e1.kind);
        }
    }
}
