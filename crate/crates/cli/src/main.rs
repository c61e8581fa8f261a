//! Benchmark harness: `shellbench run` executes a registered case and writes
//! the load-deflection CSV; `shellbench verify` checks the run against the
//! published reference values and exits nonzero on any miss.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shellfe::bench::{self, CheckStatus, Overrides};
use shellfe::geomkin::AngleMode;

#[derive(Parser)]
#[command(name = "shellbench", about = "Nonlinear shell benchmark runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark case and write its load-deflection curve.
    Run(RunArgs),
    /// Run a case and evaluate its reference checks (exit 1 on failure).
    Verify(VerifyArgs),
    /// List registered cases.
    Cases,
    /// Generate a benchmark mesh and write it as JSON.
    Mesh(MeshArgs),
}

#[derive(Args)]
struct CaseArgs {
    /// Registered case name (see `shellbench cases`).
    #[arg(long)]
    case: String,
    /// Polynomial order k.
    #[arg(long)]
    order: Option<usize>,
    /// Structured grid "AxB" or mesh size "h=<v>".
    #[arg(long)]
    grid: Option<String>,
    /// Number of uniform load steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Dihedral angle expression.
    #[arg(long, value_parser = ["exact", "simplified"])]
    angle: Option<String>,
    /// Membrane locking augmentation.
    #[arg(long, value_parser = ["on", "off"])]
    locking: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Optional CSV output alongside the checks.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    case: String,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<(Option<(usize, usize)>, Option<f64>), String> {
    if let Some(h) = s.strip_prefix("h=") {
        let v: f64 = h.parse().map_err(|e| format!("bad mesh size '{h}': {e}"))?;
        return Ok((None, Some(v)));
    }
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 2 {
        return Err(format!("grid '{s}' is neither AxB nor h=<v>"));
    }
    let a: usize = parts[0].parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
    let b: usize = parts[1].parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
    Ok((Some((a, b)), None))
}

fn overrides_from(args: &CaseArgs) -> Result<Overrides, String> {
    let mut ov = Overrides {
        order: args.order,
        steps: args.steps,
        ..Default::default()
    };
    if let Some(g) = &args.grid {
        let (grid, h) = parse_grid(g)?;
        ov.grid = grid;
        ov.h = h;
    }
    if let Some(a) = &args.angle {
        ov.angle_mode = Some(match a.as_str() {
            "simplified" => AngleMode::Simplified,
            _ => AngleMode::ExactArccos,
        });
    }
    if let Some(l) = &args.locking {
        ov.locking = Some(l == "on");
    }
    Ok(ov)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Cases => {
            for name in bench::case_names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh(args) => {
            let case = bench::get_case(&args.case).map_err(|e| e.to_string())?;
            let mut params = case.params.clone();
            if let Some(g) = &args.grid {
                let (grid, h) = parse_grid(g)?;
                if let Some(grid) = grid {
                    params.grid = grid;
                }
                if let Some(h) = h {
                    params.h = h;
                }
            }
            let mesh = shellfe::mesh::benchmark_mesh(&case.geometry, &params)
                .map_err(|e| e.to_string())?;
            shellfe::mesh::save_mesh(&mesh, &args.out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} vertices, {} elements, {} edges)",
                args.out.display(),
                mesh.vertices.len(),
                mesh.elements.len(),
                mesh.edges.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let ov = overrides_from(&args.case)?;
            let t0 = std::time::Instant::now();
            let run = bench::run_case(&args.case.case, &ov).map_err(|e| e.to_string())?;
            bench::emit_curve(&run.report, &args.out).map_err(|e| e.to_string())?;
            let last = run.report.rows.last().unwrap();
            println!(
                "{}: {} steps in {:.2?}; wrote {}",
                args.case.case,
                run.report.rows.len() - 1,
                t0.elapsed(),
                args.out.display()
            );
            for (c, v) in run.report.columns.iter().zip(&last.values) {
                println!("  final {c} = {v:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let ov = overrides_from(&args.case)?;
            let case = bench::get_case(&args.case.case).map_err(|e| e.to_string())?;
            let t0 = std::time::Instant::now();
            let run = bench::run_case(&args.case.case, &ov).map_err(|e| e.to_string())?;
            if let Some(out) = &args.out {
                bench::emit_curve(&run.report, out).map_err(|e| e.to_string())?;
            }
            let summary = bench::compare_reference(&run.report, &case);
            println!("{} ({:.2?}):", args.case.case, t0.elapsed());
            if summary.results.is_empty() {
                println!("  no registered reference checks");
            }
            for r in &summary.results {
                match r.status {
                    CheckStatus::Pass => println!(
                        "  PASS {}: {:.6} vs {:.6} (tol {:.1e}) [{}]",
                        r.name,
                        r.got.unwrap(),
                        r.expected,
                        r.tol,
                        r.source
                    ),
                    CheckStatus::Fail => println!(
                        "  FAIL {}: got {:?} expected {:.6} (tol {:.1e}) [{}]",
                        r.name, r.got, r.expected, r.tol, r.source
                    ),
                    CheckStatus::Skipped => println!(
                        "  SKIP {}: no row at the requested load factor [{}]",
                        r.name, r.source
                    ),
                }
            }
            Ok(if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
