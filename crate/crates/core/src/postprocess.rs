//! Probe evaluation on the reference mesh: displacement at arbitrary points,
//! membrane stress in global axes, and per-region moment magnitudes used as
//! a bending-curvature indicator.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{chart_eval, ElemShape};
use crate::model::{ShellModel, State};
use crate::spaces::{frame_modes, tangent_frame};

/// Locate a physical point on the reference mesh: returns (element,
/// reference coordinates). When several elements contain the point
/// (junctions, coincident slit lips), the one whose region tag equals
/// `prefer_tag` wins, then the lowest element id.
pub fn locate_point(
    model: &ShellModel,
    p: &Vector3<f64>,
    prefer_tag: Option<&str>,
) -> Result<(usize, [f64; 2])> {
    let mesh = &model.mesh;
    let mut hits: Vec<(usize, [f64; 2])> = Vec::new();
    for ei in 0..mesh.elements.len() {
        if let Some(xi) = invert_chart(model, ei, p) {
            hits.push((ei, xi));
        }
    }
    if hits.is_empty() {
        return Err(Error::ProbeNotFound(format!("({}, {}, {})", p.x, p.y, p.z)));
    }
    if let Some(tag) = prefer_tag {
        if let Some(h) = hits.iter().find(|(ei, _)| mesh.elements[*ei].tag == tag) {
            return Ok(*h);
        }
    }
    Ok(hits[0])
}

/// Newton inversion of the (affine or bilinear) chart; `None` if the point
/// is not on this element.
fn invert_chart(model: &ShellModel, ei: usize, p: &Vector3<f64>) -> Option<[f64; 2]> {
    let mesh = &model.mesh;
    let diam = {
        let el = &mesh.elements[ei];
        let mut d = 0.0_f64;
        for i in 0..el.nodes.len() {
            for j in i + 1..el.nodes.len() {
                d = d.max((mesh.vertices[el.nodes[i]] - mesh.vertices[el.nodes[j]]).norm());
            }
        }
        d
    };
    let mut xi = Vector2::new(0.4, 0.4);
    for _ in 0..30 {
        let (x, g, _) = chart_eval(mesh, ei, &[xi.x, xi.y]);
        let r = p - x;
        if r.norm() < 1e-11 * diam.max(1.0) {
            break;
        }
        // Least-squares step in the tangent plane.
        let gtg = g.transpose() * g;
        let rhs = g.transpose() * r;
        let d = gtg.try_inverse()? * rhs;
        xi += d;
        if !xi.x.is_finite() || !xi.y.is_finite() {
            return None;
        }
        xi.x = xi.x.clamp(-0.5, 1.5);
        xi.y = xi.y.clamp(-0.5, 1.5);
    }
    let (x, _, _) = chart_eval(mesh, ei, &[xi.x, xi.y]);
    if (p - x).norm() > 1e-8 * diam.max(1.0) {
        return None;
    }
    let tol = 1e-9;
    let inside = match mesh.elements[ei].shape {
        ElemShape::Tri => xi.x >= -tol && xi.y >= -tol && xi.x + xi.y <= 1.0 + tol,
        ElemShape::Quad => (-tol..=1.0 + tol).contains(&xi.x) && (-tol..=1.0 + tol).contains(&xi.y),
    };
    inside.then_some([xi.x.clamp(0.0, 1.0), xi.y.clamp(0.0, 1.0)])
}

/// Displacement at a physical point of the reference surface.
pub fn probe_displacement(
    model: &ShellModel,
    state: &State,
    p: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    // Vertices match directly (and deterministically resolve coincident
    // geometry such as slit lips to the lowest vertex id).
    let diam = model
        .mesh
        .vertices
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.norm()))
        .max(1.0);
    if let Ok(v) = model.mesh.vertex_at(p, 1e-9 * diam) {
        return Ok(Vector3::new(state.u[3 * v], state.u[3 * v + 1], state.u[3 * v + 2]));
    }
    let (ei, xi) = locate_point(model, p, None)?;
    let sb = model.spaces.lagrange_basis(model.mesh.elements[ei].shape);
    let vals = sb.eval(&xi);
    let eld = &model.dofmap.elements[ei];
    let mut u = Vector3::zeros();
    for (i, &gn) in eld.u_nodes.iter().enumerate() {
        for c in 0..3 {
            u[c] += vals[i] * state.u[3 * gn + c];
        }
    }
    Ok(u)
}

/// Membrane stress tensor (plane-stress law on the Green strain) at a
/// physical point, reported in global axes. `prefer_tag` selects the
/// evaluation side at junctions.
pub fn membrane_stress_probe(
    model: &ShellModel,
    state: &State,
    p: &Vector3<f64>,
    prefer_tag: Option<&str>,
) -> Result<Matrix3<f64>> {
    let (ei, xi) = locate_point(model, p, prefer_tag)?;
    crate::assembly::membrane_stress_at(model, state, ei, &xi)
}

/// Moment field evaluated at a reference point of an element (ambient 3x3).
pub fn moment_at(
    model: &ShellModel,
    state: &State,
    element: usize,
    xi: &[f64; 2],
) -> Result<Matrix3<f64>> {
    let mesh = &model.mesh;
    let shape = mesh.elements[element].shape;
    let ts = model.spaces.moment_basis(shape);
    let polys = ts.eval_polys(xi);
    let cd = crate::mesh::chart_data(mesh, element, xi)?;
    let (t1, t2) = tangent_frame(&cd.frame.jacobian);
    let modes = frame_modes(&t1, &t2);
    let eld = &model.dofmap.elements[element];
    let mut s = Matrix3::zeros();
    for (d, &(mode, _, _)) in ts.entries.iter().enumerate() {
        s += state.sigma[eld.sigma[d]] * polys[d] * modes[mode];
    }
    Ok(s)
}

/// Maximum Frobenius norm of the moment field over the volume quadrature
/// points of all elements with the given region tag; proportional to the
/// bending curvature change and zero on branches that only rotate rigidly.
pub fn curvature_indicator(model: &ShellModel, state: &State, tag: &str) -> Result<f64> {
    let mut worst = 0.0_f64;
    let mut found = false;
    for (ei, el) in model.mesh.elements.iter().enumerate() {
        if el.tag != tag {
            continue;
        }
        found = true;
        let rule = match el.shape {
            ElemShape::Tri => [[0.25, 0.25], [0.5, 0.25], [0.25, 0.5]],
            ElemShape::Quad => [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]],
        };
        for xi in rule {
            let s = moment_at(model, state, ei, &xi)?;
            worst = worst.max(s.norm());
        }
    }
    if !found {
        return Err(Error::Config(format!("no element tagged '{tag}'")));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Material;
    use crate::mesh::{benchmark_mesh, BenchmarkParams};
    use crate::model::*;

    fn model() -> ShellModel {
        let mesh = benchmark_mesh(
            "twisted_beam",
            &BenchmarkParams {
                grid: (2, 4),
                ..Default::default()
            },
        )
        .unwrap();
        let spec = ProblemSpec {
            material: Material::new(2.9e7, 0.22, 0.32).unwrap(),
            bcs: vec![(
                "clamped".into(),
                BcKind::Clamped {
                    displacement: Vector3::zeros(),
                },
            )],
            loads: LoadProgram::default(),
            point_constraints: vec![],
        };
        ShellModel::new(mesh, 1, spec, SolverConfig::default()).unwrap()
    }

    #[test]
    fn locate_point_on_warped_quads() {
        let m = model();
        // A chart image of a known reference point must be recovered.
        let (x, _, _) = chart_eval(&m.mesh, 5, &[0.3, 0.7]);
        let (ei, xi) = locate_point(&m, &x, None).unwrap();
        let (x2, _, _) = chart_eval(&m.mesh, ei, &xi);
        assert!((x - x2).norm() < 1e-9);
        assert!(locate_point(&m, &Vector3::new(50.0, 0.0, 0.0), None).is_err());
    }

    #[test]
    fn zero_state_probes_are_zero() {
        let m = model();
        let state = m.zero_state();
        let u = probe_displacement(&m, &state, &Vector3::new(0.0, 12.0, 0.0)).unwrap();
        assert!(u.norm() == 0.0);
        let s = membrane_stress_probe(&m, &state, &Vector3::new(0.0, 6.0, 0.0), None).unwrap();
        assert!(s.norm() == 0.0);
    }

    #[test]
    fn uniaxial_stretch_stress_closed_form() {
        // Flat plate stretched along x: Sigma_xx = E (lambda^2 - 1)/2 at nu = 0.
        let mesh = benchmark_mesh(
            "flat_plate",
            &BenchmarkParams {
                grid: (2, 2),
                ..Default::default()
            },
        )
        .unwrap();
        let spec = ProblemSpec {
            material: Material::new(7.0, 0.0, 0.1).unwrap(),
            bcs: vec![],
            loads: LoadProgram::default(),
            point_constraints: vec![],
        };
        let m = ShellModel::new(mesh, 1, spec, SolverConfig::default()).unwrap();
        let mut state = m.zero_state();
        let lambda = 1.1;
        for n in 0..m.dofmap.n_u_nodes {
            let x = m.dofmap.node_positions[n].x;
            state.u[3 * n] = (lambda - 1.0) * x;
        }
        let s = membrane_stress_probe(&m, &state, &Vector3::new(0.4, 0.6, 0.0), None).unwrap();
        let expect = 7.0 * (lambda * lambda - 1.0) / 2.0;
        assert!((s[(0, 0)] - expect).abs() < 1e-12);
        assert!(s[(1, 1)].abs() < 1e-12);
    }
}
