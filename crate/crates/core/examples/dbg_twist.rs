use nalgebra::Vector3;
use shellfe::material::Material;
use shellfe::mesh::{benchmark_mesh, BenchmarkParams};
use shellfe::model::*;
use shellfe::newton::run_load_steps;
use shellfe::postprocess::probe_displacement;

fn run(vol_deg: Option<usize>, edge_deg: Option<usize>, t: f64, f: Vector3<f64>) -> f64 {
    let mesh = benchmark_mesh("twisted_beam", &BenchmarkParams { grid: (4, 24), h: 1.0 }).unwrap();
    let spec = ProblemSpec {
        material: Material::new(2.9e7, 0.22, t).unwrap(),
        bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
        loads: LoadProgram {
            point_loads: vec![PointLoad { at: Vector3::new(0.0, 12.0, 0.0), force: f }],
            ..Default::default()
        },
        point_constraints: vec![],
    };
    let config = SolverConfig {
        load_steps: 2,
        quad_volume_degree: vol_deg,
        quad_edge_degree: edge_deg,
        ..Default::default()
    };
    let model = ShellModel::new(mesh, 1, spec, config).unwrap();
    let mut state = model.zero_state();
    run_load_steps(&model, &mut state).unwrap();
    let u = probe_displacement(&model, &state, &Vector3::new(0.0, 12.0, 0.0)).unwrap();
    u.dot(&f.normalize())
}

fn main() {
    let thin = Vector3::new(1e-6, 0.0, 0.0);
    for (vd, ed) in [(Some(2), None), (None, None), (Some(6), None), (Some(8), Some(5)), (Some(12), Some(9))] {
        let ua = run(vd, ed, 0.0032, thin);
        println!("vol {vd:?} edge {ed:?}: U_A x 10^3 = {:.4}", ua * 1e3);
    }
}
