//! Newton iteration with step damping and load stepping with lagged-normal
//! updates. Failed steps first halve the Newton step (on residual increase or
//! element inversion), then bisect the load schedule up to a bounded
//! refinement depth.

use crate::assembly::{apply_update, assemble, solve_linear, AssembledSystem, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::model::{LaggedPolicy, ShellModel, State};

/// Per-iteration record of one Newton solve.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub residual_norm: f64,
    pub step: f64,
    pub min_pivot: f64,
    pub n_nonpositive_pivots: usize,
}

#[derive(Clone, Debug, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// Residual norm the convergence was measured against.
    pub reference_residual: f64,
}

/// Solve the equilibrium at load factor `lambda` starting from `state`.
/// On success the state holds the converged configuration.
pub fn newton_solve(model: &ShellModel, state: &mut State, lambda: f64) -> Result<NewtonReport> {
    let cfg = &model.config;
    // Pending essential updates: prescribed values scale with lambda.
    let mut delta_fixed = vec![0.0_f64; model.index.n_retained];
    {
        let idx = &model.index;
        for n in 0..model.dofmap.n_u_nodes {
            for c in 0..3 {
                if let Some(g) = idx.u_retained[3 * n + c] {
                    if let Some(target) = idx.fixed[g] {
                        delta_fixed[g] = lambda * target - state.u[3 * n + c];
                    }
                }
            }
        }
        for a in 0..model.dofmap.n_alpha {
            let g = idx.alpha_retained[a];
            if let Some(target) = idx.fixed[g] {
                delta_fixed[g] = lambda * target - state.alpha[a];
            }
        }
    }
    state.lambda = lambda;

    let mut report = NewtonReport::default();
    let mut sys = assemble(model, state, &delta_fixed)?;
    let r0 = sys.residual_norm;
    report.reference_residual = r0;
    let tol = cfg.abs_tol.max(cfg.rel_tol * r0);

    let mut prev_norm = r0;
    let mut best_norm = r0;
    let mut stall = 0usize;
    for it in 0..cfg.max_iterations {
        if sys.residual_norm <= tol {
            report.converged = true;
            return Ok(report);
        }
        // Roundoff floor: several iterations without progress after at least
        // five orders of residual reduction count as converged.
        if sys.residual_norm <= 1e-5 * r0 && stall >= 3 {
            report.converged = true;
            return Ok(report);
        }
        let (delta, info) = solve_linear(model, &sys)?;

        // Damped update. Step halving guards against element inversion and
        // degenerate lagged projections; a residual increase triggers one
        // halving attempt, after which the full step is accepted anyway
        // (the residual of a healthy Newton path is not monotone far from
        // the solution). Divergence is caught by the watchdog below.
        let mut candidates: Vec<(State, AssembledSystem, f64)> = Vec::new();
        let mut step = 1.0_f64;
        let mut halvings = 0usize;
        let accepted = loop {
            let mut trial = state.clone();
            apply_update(model, &mut trial, &sys, &delta, &delta_fixed, step);
            let trial_ok = if model.config.lagged_policy == LaggedPolicy::PerNewtonIteration {
                model.update_lagged(&mut trial).is_ok()
            } else {
                true
            };
            let result = if trial_ok {
                assemble(model, &trial, &zero_like(&delta_fixed))
            } else {
                Err(Error::Numeric("lagged update failed".into()))
            };
            match result {
                Ok(next_sys) => {
                    if next_sys.residual_norm < prev_norm || next_sys.residual_norm <= tol {
                        break Some((trial, next_sys, step));
                    }
                    candidates.push((trial, next_sys, step));
                    // One decrease-seeking halving; then trust the full step.
                    if candidates.len() >= 2 {
                        let (t, s, st) = candidates.swap_remove(0);
                        break Some((t, s, st));
                    }
                }
                Err(Error::ElementInversion { .. })
                | Err(Error::ProjectionDegenerate { .. })
                | Err(Error::Numeric(_)) => {}
                Err(e) => return Err(e),
            }
            halvings += 1;
            if halvings > cfg.max_step_halvings {
                break candidates.pop();
            }
            step *= 0.5;
        };
        let Some((trial, next_sys, used_step)) = accepted else {
            report.iterations = it + 1;
            return Err(Error::Nonconvergence {
                iterations: it + 1,
                history: report.history.iter().map(|h| h.residual_norm).collect(),
            });
        };
        // Watchdog: residual exploding or non-finite means this load step is
        // hopeless; surface it for schedule refinement.
        if !next_sys.residual_norm.is_finite() || next_sys.residual_norm > 1e8 * r0.max(cfg.abs_tol)
        {
            return Err(Error::Nonconvergence {
                iterations: it + 1,
                history: report.history.iter().map(|h| h.residual_norm).collect(),
            });
        }
        *state = trial;
        // Essential updates are consumed by the first full step.
        for d in delta_fixed.iter_mut() {
            *d *= 1.0 - used_step;
        }
        sys = next_sys;
        prev_norm = sys.residual_norm;
        if sys.residual_norm < 0.7 * best_norm {
            best_norm = sys.residual_norm;
            stall = 0;
        } else {
            stall += 1;
        }
        report.iterations = it + 1;
        report.history.push(IterationRecord {
            residual_norm: sys.residual_norm,
            step: used_step,
            min_pivot: info.min_pivot,
            n_nonpositive_pivots: info.n_nonpositive_pivots,
        });
    }
    if sys.residual_norm <= tol {
        report.converged = true;
        return Ok(report);
    }
    Err(Error::Nonconvergence {
        iterations: cfg.max_iterations,
        history: report.history.iter().map(|h| h.residual_norm).collect(),
    })
}

fn zero_like(v: &[f64]) -> Vec<f64> {
    vec![0.0; v.len()]
}

/// One converged load step in a run.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub lambda: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub energy: EnergyBreakdown,
    /// From the last linear solve of the step.
    pub min_pivot: f64,
    pub n_nonpositive_pivots: usize,
    /// Newton residual history of the step.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    pub schedule_refinements: usize,
}

/// Run the load schedule; after each converged step the lagged edge normals
/// are refreshed per the configured policy. Failed steps refine the schedule
/// by bisection up to the configured depth.
pub fn run_load_steps(model: &ShellModel, state: &mut State) -> Result<SolveReport> {
    let cfg = &model.config;
    let mut report = SolveReport::default();
    let mut worklist: Vec<(f64, usize)> = cfg
        .schedule_vec()
        .into_iter()
        .rev()
        .map(|l| (l, 0usize))
        .collect();
    let mut lambda_prev = 0.0_f64;
    while let Some((lambda, depth)) = worklist.pop() {
        let mut trial = state.clone();
        match newton_solve(model, &mut trial, lambda) {
            Ok(nr) => {
                *state = trial;
                if cfg.lagged_policy == LaggedPolicy::PerLoadStep {
                    model.update_lagged(state)?;
                }
                let energy = crate::assembly::assemble_energy(model, state)?;
                let (min_pivot, n_nonpos) = nr
                    .history
                    .last()
                    .map(|h| (h.min_pivot, h.n_nonpositive_pivots))
                    .unwrap_or((f64::NAN, 0));
                report.steps.push(StepRecord {
                    lambda,
                    newton_iterations: nr.iterations,
                    residual_norm: nr.history.last().map(|h| h.residual_norm).unwrap_or(0.0),
                    energy,
                    min_pivot,
                    n_nonpositive_pivots: n_nonpos,
                    residual_history: nr.history.iter().map(|h| h.residual_norm).collect(),
                });
                lambda_prev = lambda;
            }
            Err(e) => {
                if depth >= cfg.max_schedule_refinements {
                    return Err(Error::LoadStepFailed {
                        lambda,
                        source: Box::new(e),
                    });
                }
                // Bisect towards the last converged factor.
                let mid = 0.5 * (lambda_prev + lambda);
                worklist.push((lambda, depth + 1));
                worklist.push((mid, depth + 1));
            }
        }
    }
    Ok(report)
}

/// Recover the condensed fields from the retained ones at the current state
/// by one local solve (used after external state edits; regular Newton steps
/// already back-substitute).
pub fn recover_condensed(model: &ShellModel, state: &mut State) -> Result<()> {
    let delta_fixed = vec![0.0; model.index.n_retained];
    let sys: AssembledSystem = assemble(model, state, &delta_fixed)?;
    // Zero retained update: local back-substitution relaxes sigma/R/u_int
    // onto their stationarity equations linearized at the current state.
    let delta = vec![0.0; model.index.n_free];
    apply_update(model, state, &sys, &delta, &delta_fixed, 1.0);
    Ok(())
}
