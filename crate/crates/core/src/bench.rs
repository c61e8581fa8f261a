//! Benchmark case registry and run orchestration: each case bundles
//! geometry, material, boundary conditions, load program, probes and
//! published reference values; runs emit deterministic load-deflection CSV
//! and can be checked against the references.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geomkin::AngleMode;
use crate::material::Material;
use crate::mesh::{benchmark_mesh, BenchmarkParams};
use crate::model::*;
use crate::newton::SolveReport;
use crate::postprocess::{membrane_stress_probe, probe_displacement};

/// What a reference check reads from the report.
#[derive(Clone, Debug)]
pub enum Metric {
    /// Displacement component (0 = U, 1 = V, 2 = W) at a named probe.
    Displacement { probe: String, component: usize },
    /// Global-axes Sigma_xx at a named probe, evaluated on the element side
    /// with the given region tag.
    StressXx { probe: String, prefer_tag: Option<String> },
}

#[derive(Clone, Debug)]
pub struct RefCheck {
    pub name: String,
    pub lambda: f64,
    pub metric: Metric,
    pub expected: f64,
    pub tol: f64,
    /// Provenance of the expected value (published table or derived oracle).
    pub source: String,
}

/// A registered benchmark definition.
pub struct BenchmarkCase {
    pub name: String,
    pub geometry: String,
    pub params: BenchmarkParams,
    pub order: usize,
    pub steps: usize,
    pub material: Material,
    pub bcs: Vec<(String, BcKind)>,
    pub loads: LoadProgram,
    pub point_constraints: Vec<PointConstraint>,
    /// Probe names whose displacements are tabulated per step.
    pub probes: Vec<String>,
    /// Stress probes: (column name, probe, preferred region tag).
    pub stress_probes: Vec<(String, String, Option<String>)>,
    pub checks: Vec<RefCheck>,
}

/// Per-case overrides accepted by the runner.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub order: Option<usize>,
    pub grid: Option<(usize, usize)>,
    pub h: Option<f64>,
    pub steps: Option<usize>,
    pub angle_mode: Option<AngleMode>,
    pub locking: Option<bool>,
}

/// One row of the load-deflection table.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub step: usize,
    pub lambda: f64,
    /// Values in CSV column order.
    pub values: Vec<f64>,
    pub newton_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub case: String,
    /// Column names after step and lambda (before newton_iters).
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub solve: SolveReport,
}

pub struct CaseRun {
    pub report: RunReport,
    pub model: ShellModel,
    pub state: State,
}

pub fn case_names() -> Vec<&'static str> {
    vec![
        "cant_shear",
        "cant_moment",
        "slit_annulus",
        "hemisphere",
        "hemisphere_large",
        "twisted_beam",
        "twisted_beam_px_lin",
        "twisted_beam_thick_pz",
        "zsection",
        "tsection",
        "flat_plate",
    ]
}

pub fn get_case(name: &str) -> Result<BenchmarkCase> {
    let disp = |name: &str, lambda: f64, probe: &str, comp: usize, expected: f64, tol: f64, source: &str| RefCheck {
        name: name.into(),
        lambda,
        metric: Metric::Displacement {
            probe: probe.into(),
            component: comp,
        },
        expected,
        tol,
        source: source.into(),
    };
    match name {
        "cant_shear" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "cant_shear".into(),
            params: BenchmarkParams {
                grid: (16, 1),
                h: 1.0,
            },
            order: 1,
            steps: 20,
            material: Material::new(1.2e6, 0.0, 0.1)?,
            bcs: vec![
                ("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() }),
                ("lateral".into(), BcKind::Symmetry { axis: 2 }),
            ],
            loads: LoadProgram {
                tractions: vec![EdgeTraction {
                    tag: "loaded".into(),
                    force_per_length: Vector3::new(0.0, 4.0, 0.0),
                }],
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec!["tip".into()],
            stress_probes: vec![],
            checks: vec![
                disp("shear_U_half", 0.5, "tip", 0, -1.608, 0.02, "end-shear deflection table, row 0.50"),
                disp("shear_V_half", 0.5, "tip", 1, 4.940, 0.02, "end-shear deflection table, row 0.50"),
                disp("shear_U_full", 1.0, "tip", 0, -3.292, 0.02, "end-shear deflection table, row 1.00"),
                disp("shear_V_full", 1.0, "tip", 1, 6.708, 0.02, "end-shear deflection table, row 1.00"),
            ],
        }),
        "cant_moment" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "cant_moment".into(),
            params: BenchmarkParams {
                grid: (16, 1),
                h: 1.0,
            },
            order: 1,
            steps: 20,
            material: Material::new(1.2e6, 0.0, 0.1)?,
            bcs: vec![
                ("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() }),
                ("lateral".into(), BcKind::Symmetry { axis: 1 }),
            ],
            loads: LoadProgram {
                moments: vec![EdgeMoment {
                    tag: "loaded".into(),
                    moment_per_length: 50.0 * std::f64::consts::PI / 3.0,
                }],
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec!["tip".into()],
            stress_probes: vec![],
            checks: vec![
                disp("moment_W_0.05", 0.05, "tip", 2, 1.870, 0.005, "end-moment deflection table, row 0.05"),
                disp("moment_U_half", 0.5, "tip", 0, -12.000, 0.05, "end-moment deflection table, row 0.50"),
                disp("moment_W_half", 0.5, "tip", 2, 7.652, 0.05, "end-moment deflection table, row 0.50"),
                disp("moment_U_full", 1.0, "tip", 0, -12.000, 0.05, "end-moment deflection table, row 1.00 (analytic roll-up)"),
                disp("moment_W_full", 1.0, "tip", 2, 0.000, 0.05, "end-moment deflection table, row 1.00 (analytic roll-up)"),
            ],
        }),
        "slit_annulus" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "slit_annulus".into(),
            params: BenchmarkParams {
                grid: (10, 80),
                h: 1.0,
            },
            order: 1,
            steps: 20,
            material: Material::new(2.1e8, 0.0, 0.03)?,
            bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
            loads: LoadProgram {
                tractions: vec![EdgeTraction {
                    tag: "loaded".into(),
                    // Maximal line load along the free lip (width R_o - R_i = 4).
                    force_per_length: Vector3::new(0.0, 0.0, 4.034 / 4.0),
                }],
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec!["A".into(), "B".into()],
            stress_probes: vec![],
            checks: vec![disp(
                "slit_W_B",
                1.0,
                "B",
                2,
                13.8224,
                0.1,
                "slit annular plate table (p1, 10x80)",
            )],
        }),
        "hemisphere" | "hemisphere_large" => {
            let large = name == "hemisphere_large";
            let p = if large { 400.0 } else { 1.0 };
            Ok(BenchmarkCase {
                name: name.into(),
                geometry: "hemisphere".into(),
                params: BenchmarkParams {
                    grid: (0, 0),
                    h: 0.5,
                },
                order: 1,
                steps: if large { 25 } else { 4 },
                material: Material::new(6.825e7, 0.3, 0.04)?,
                bcs: vec![
                    ("sym_x".into(), BcKind::Symmetry { axis: 0 }),
                    ("sym_y".into(), BcKind::Symmetry { axis: 1 }),
                ],
                loads: LoadProgram {
                    point_loads: vec![
                        PointLoad {
                            at: Vector3::new(10.0, 0.0, 0.0),
                            force: Vector3::new(-p, 0.0, 0.0),
                        },
                        PointLoad {
                            at: Vector3::new(0.0, 10.0, 0.0),
                            force: Vector3::new(0.0, p, 0.0),
                        },
                    ],
                    ..Default::default()
                },
                // Gauge the remaining vertical translation at the pole; the
                // reaction is exactly zero for the in-plane load pair.
                point_constraints: vec![PointConstraint {
                    at: Vector3::new(0.0, 0.0, 10.0),
                    component: 2,
                    value: 0.0,
                }],
                probes: vec!["A".into(), "B".into()],
                stress_probes: vec![],
                checks: vec![disp(
                    if large { "hemisphere_large_V_B" } else { "hemisphere_V_B" },
                    1.0,
                    "B",
                    1,
                    if large { 3.8560 } else { 0.092 },
                    if large { 0.05 } else { 0.002 },
                    "pinched-hemisphere radial-deflection tables (p1, h = 0.5)",
                )],
            })
        }
        "twisted_beam" | "twisted_beam_px_lin" | "twisted_beam_thick_pz" => {
            let (t, force, steps, check) = match name {
                "twisted_beam" => (
                    0.0032,
                    Vector3::new(1e-3, 0.0, 0.0),
                    10,
                    disp("twisted_U_A", 1.0, "A", 0, 4.538, 0.01, "twisted-beam table, t=0.0032, P_x=1e-3, 4x24"),
                ),
                "twisted_beam_px_lin" => (
                    0.0032,
                    Vector3::new(1e-6, 0.0, 0.0),
                    2,
                    disp("twisted_lin_U_A", 1.0, "A", 0, 5.470e-3, 0.01e-3, "twisted-beam table, t=0.0032, P_x=1e-6, 4x24"),
                ),
                _ => (
                    0.32,
                    Vector3::new(0.0, 0.0, 1.0),
                    2,
                    disp("twisted_thick_W_A", 1.0, "A", 2, 1.822e-3, 0.01e-3, "twisted-beam table, t=0.32, P_z=1, 4x24"),
                ),
            };
            Ok(BenchmarkCase {
                name: name.into(),
                geometry: "twisted_beam".into(),
                params: BenchmarkParams {
                    grid: (4, 24),
                    h: 1.0,
                },
                order: 1,
                steps,
                material: Material::new(2.9e7, 0.22, t)?,
                bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
                loads: LoadProgram {
                    point_loads: vec![PointLoad {
                        at: Vector3::new(0.0, 12.0, 0.0),
                        force,
                    }],
                    ..Default::default()
                },
                point_constraints: vec![],
                probes: vec!["A".into()],
                stress_probes: vec![],
                checks: vec![check],
            })
        }
        "zsection" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "zsection".into(),
            params: BenchmarkParams {
                grid: (32, 15),
                h: 1.0,
            },
            order: 1,
            steps: 10,
            material: Material::new(2.1e11, 0.3, 0.1)?,
            bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
            loads: LoadProgram {
                // Torque 1.2e6 about the beam axis as a force couple on the
                // flange tip edges (lever arm 2).
                tractions: vec![
                    EdgeTraction {
                        tag: "tip_top_flange".into(),
                        force_per_length: Vector3::new(0.0, -6.0e5, 0.0),
                    },
                    EdgeTraction {
                        tag: "tip_bottom_flange".into(),
                        force_per_length: Vector3::new(0.0, 6.0e5, 0.0),
                    },
                ],
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec![],
            stress_probes: vec![("Sxx_A".into(), "A".into(), Some("web".into()))],
            checks: vec![RefCheck {
                name: "zsection_Sxx_A".into(),
                lambda: 1.0,
                metric: Metric::StressXx {
                    probe: "A".into(),
                    prefer_tag: Some("web".into()),
                },
                expected: -1.0777e8,
                tol: 1e6,
                source: "Z-section membrane-stress table (p1, 32x15)".into(),
            }],
        }),
        "tsection" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "tsection".into(),
            params: BenchmarkParams {
                grid: (4, 4),
                h: 1.0,
            },
            order: 1,
            steps: 20,
            material: Material::new(6.0e6, 0.0, 0.1)?,
            bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
            loads: LoadProgram {
                tractions: vec![EdgeTraction {
                    tag: "loaded".into(),
                    force_per_length: Vector3::new(0.0, 0.0, -1000.0),
                }],
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec!["A".into()],
            stress_probes: vec![],
            checks: vec![],
        }),
        "flat_plate" => Ok(BenchmarkCase {
            name: name.into(),
            geometry: "flat_plate".into(),
            params: BenchmarkParams {
                grid: (8, 8),
                h: 1.0,
            },
            order: 1,
            steps: 4,
            material: Material::new(1.0e4, 0.0, 0.1)?,
            bcs: vec![("clamped".into(), BcKind::Clamped { displacement: Vector3::zeros() })],
            loads: LoadProgram {
                area_load: Some(Vector3::new(0.0, 0.0, 1.0)),
                ..Default::default()
            },
            point_constraints: vec![],
            probes: vec!["center".into()],
            stress_probes: vec![],
            checks: vec![],
        }),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

/// Build the model for a case with overrides applied.
pub fn build_case_model(case: &BenchmarkCase, ov: &Overrides) -> Result<ShellModel> {
    let mut params = case.params.clone();
    if let Some(g) = ov.grid {
        params.grid = g;
    }
    if let Some(h) = ov.h {
        params.h = h;
    }
    let order = ov.order.unwrap_or(case.order);
    let mesh = benchmark_mesh(&case.geometry, &params)?;
    let spec = ProblemSpec {
        material: case.material,
        bcs: case.bcs.clone(),
        loads: case.loads.clone(),
        point_constraints: case.point_constraints.clone(),
    };
    let config = SolverConfig {
        load_steps: ov.steps.unwrap_or(case.steps),
        angle_mode: ov.angle_mode.unwrap_or(AngleMode::ExactArccos),
        // Lowest order does not lock; higher orders get the projection.
        locking: ov.locking.unwrap_or(order >= 2),
        ..Default::default()
    };
    ShellModel::new(mesh, order, spec, config)
}

/// Run a registered case and tabulate the probes per converged load step.
pub fn run_case(name: &str, ov: &Overrides) -> Result<CaseRun> {
    let case = get_case(name)?;
    let model = build_case_model(&case, ov)?;

    let mut columns = Vec::new();
    for p in &case.probes {
        for c in ["U", "V", "W"] {
            columns.push(format!("{c}_{p}"));
        }
    }
    for (col, _, _) in &case.stress_probes {
        columns.push(col.clone());
    }

    // The schedule walk mirrors run_load_steps but records probe values
    // after every converged step.
    let mut rows = vec![ReportRow {
        step: 0,
        lambda: 0.0,
        values: vec![0.0; columns.len()],
        newton_iterations: 0,
    }];
    let mut state = model.zero_state();
    let mut solve = SolveReport::default();
    let mut step_idx = 0usize;
    let mut worklist: Vec<(f64, usize)> = model
        .config
        .schedule_vec()
        .into_iter()
        .rev()
        .map(|l| (l, 0usize))
        .collect();
    let mut lambda_prev = 0.0;
    while let Some((lambda, depth)) = worklist.pop() {
        let mut trial = state.clone();
        match crate::newton::newton_solve(&model, &mut trial, lambda) {
            Ok(nr) => {
                state = trial;
                if model.config.lagged_policy == LaggedPolicy::PerLoadStep {
                    model.update_lagged(&mut state)?;
                }
                let energy = crate::assembly::assemble_energy(&model, &state)?;
                let (min_pivot, n_nonpos) = nr
                    .history
                    .last()
                    .map(|h| (h.min_pivot, h.n_nonpositive_pivots))
                    .unwrap_or((f64::NAN, 0));
                solve.steps.push(crate::newton::StepRecord {
                    lambda,
                    newton_iterations: nr.iterations,
                    residual_norm: nr.history.last().map(|h| h.residual_norm).unwrap_or(0.0),
                    energy,
                    min_pivot,
                    n_nonpositive_pivots: n_nonpos,
                    residual_history: nr.history.iter().map(|h| h.residual_norm).collect(),
                });
                step_idx += 1;
                let mut values = Vec::with_capacity(columns.len());
                for p in &case.probes {
                    let at = *model
                        .mesh
                        .probes
                        .get(p)
                        .ok_or_else(|| Error::ProbeNotFound(p.clone()))?;
                    let u = probe_displacement(&model, &state, &at)?;
                    values.extend_from_slice(&[u.x, u.y, u.z]);
                }
                for (_, probe, prefer) in &case.stress_probes {
                    let at = *model
                        .mesh
                        .probes
                        .get(probe)
                        .ok_or_else(|| Error::ProbeNotFound(probe.clone()))?;
                    let s = membrane_stress_probe(&model, &state, &at, prefer.as_deref())?;
                    values.push(s[(0, 0)]);
                }
                rows.push(ReportRow {
                    step: step_idx,
                    lambda,
                    values,
                    newton_iterations: nr.iterations,
                });
                lambda_prev = lambda;
            }
            Err(e) => {
                if depth >= model.config.max_schedule_refinements {
                    return Err(Error::LoadStepFailed {
                        lambda,
                        source: Box::new(e),
                    });
                }
                let mid = 0.5 * (lambda_prev + lambda);
                worklist.push((lambda, depth + 1));
                worklist.push((mid, depth + 1));
            }
        }
    }

    Ok(CaseRun {
        report: RunReport {
            case: name.to_string(),
            columns,
            rows,
            solve,
        },
        model,
        state,
    })
}

/// Write the load-deflection curve as CSV with a stable header and
/// deterministic number formatting (10 significant digits).
pub fn emit_curve(report: &RunReport, path: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Config("report has no rows".into()));
    }
    let mut out = String::new();
    out.push_str("step,lambda");
    for c in &report.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",newton_iters\n");
    for row in &report.rows {
        out.push_str(&format!("{},{}", row.step, fmt(row.lambda)));
        for v in &row.values {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push_str(&format!(",{}\n", row.newton_iterations));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// No report row at the check's load factor.
    Skipped,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub got: Option<f64>,
    pub expected: f64,
    pub tol: f64,
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct CheckSummary {
    pub results: Vec<CheckResult>,
    pub passed: bool,
}

/// Evaluate the registered reference checks against a run report.
pub fn compare_reference(report: &RunReport, case: &BenchmarkCase) -> CheckSummary {
    let mut results = Vec::new();
    let mut passed = true;
    for check in &case.checks {
        let row = report
            .rows
            .iter()
            .find(|r| (r.lambda - check.lambda).abs() <= 1e-12);
        let Some(row) = row else {
            results.push(CheckResult {
                name: check.name.clone(),
                status: CheckStatus::Skipped,
                got: None,
                expected: check.expected,
                tol: check.tol,
                source: check.source.clone(),
            });
            continue;
        };
        let col = match &check.metric {
            Metric::Displacement { probe, component } => {
                let name = format!("{}_{probe}", ["U", "V", "W"][*component]);
                report.columns.iter().position(|c| *c == name)
            }
            Metric::StressXx { probe, .. } => {
                let name = format!("Sxx_{probe}");
                report.columns.iter().position(|c| *c == name)
            }
        };
        let Some(col) = col else {
            results.push(CheckResult {
                name: check.name.clone(),
                status: CheckStatus::Fail,
                got: None,
                expected: check.expected,
                tol: check.tol,
                source: check.source.clone(),
            });
            passed = false;
            continue;
        };
        let got = row.values[col];
        let ok = (got - check.expected).abs() <= check.tol;
        if !ok {
            passed = false;
        }
        results.push(CheckResult {
            name: check.name.clone(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            got: Some(got),
            expected: check.expected,
            tol: check.tol,
            source: check.source.clone(),
        });
    }
    CheckSummary { results, passed }
}

/// Convenience: probe map of the final row.
pub fn final_value(report: &RunReport, column: &str) -> Option<f64> {
    let col = report.columns.iter().position(|c| c == column)?;
    report.rows.last().map(|r| r.values[col])
}

/// Stable probe ordering helper for reporting.
pub fn probes_of(model: &ShellModel) -> BTreeMap<String, Vector3<f64>> {
    model.mesh.probes.clone()
}
