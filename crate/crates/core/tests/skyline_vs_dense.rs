use nalgebra::Vector3;
use shellfe::linsolve::solve_symmetric;
use shellfe::material::Material;
use shellfe::mesh::{benchmark_mesh, BenchmarkParams};
use shellfe::model::*;

#[test]
fn skyline_matches_dense_on_assembled_system() {
    let mesh = benchmark_mesh("cant_shear", &BenchmarkParams { grid: (4, 1), ..Default::default() }).unwrap();
    let spec = ProblemSpec {
        material: Material::new(1.2e6, 0.0, 0.1).unwrap(),
        bcs: vec![
            ("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() }),
            ("lateral".into(), BcKind::Symmetry { axis: 2 }),
        ],
        loads: LoadProgram {
            tractions: vec![EdgeTraction { tag: "loaded".into(), force_per_length: Vector3::new(0.0, 4.0, 0.0) }],
            ..Default::default()
        },
        point_constraints: vec![],
    };
    let model = ShellModel::new(mesh, 1, spec, SolverConfig::default()).unwrap();
    let mut state = model.zero_state();
    state.lambda = 0.05;
    let delta_fixed = vec![0.0; model.index.n_retained];
    let sys = shellfe::assembly::assemble(&model, &state, &delta_fixed).unwrap();
    eprintln!("symmetry error of condensed matrix: {:.3e}", sys.matrix.symmetry_error());
    let (xs, is_) = solve_symmetric(&sys.matrix, &sys.rhs, false).unwrap();
    let (xd, id_) = solve_symmetric(&sys.matrix, &sys.rhs, true).unwrap();
    eprintln!("skyline rel res {:.3e}, dense rel res {:.3e}", is_.relative_residual, id_.relative_residual);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..xs.len() {
        worst = worst.max((xs[i] - xd[i]).abs());
        scale = scale.max(xd[i].abs());
    }
    eprintln!("worst diff {:.3e} scale {:.3e}", worst, scale);
    assert!(worst < 1e-8 * scale.max(1.0));
}
