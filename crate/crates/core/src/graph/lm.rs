//! Levenberg-Marquardt over the pose variables of a [`MappingGraph`].

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use super::{assemble_normal_equations, solve_block_system, MappingGraph};
use crate::clock::Clock;
use crate::error::{Error, Result};

/// Lower bound for diagonal entries used in the damping term.
const DAMPING_FLOOR: f64 = 1e-6;
const MIN_LAMBDA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    pub max_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub relative_tolerance: f64,
    pub step_tolerance: f64,
    /// Fixed reduction order for bit-reproducible results; configured
    /// through the runtime section rather than here.
    #[serde(skip)]
    pub deterministic: bool,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            max_iterations: 50,
            initial_lambda: 1e-5,
            max_lambda: 1e10,
            lambda_up: 10.0,
            lambda_down: 0.1,
            relative_tolerance: 1e-6,
            step_tolerance: 1e-8,
            deterministic: true,
        }
    }
}

/// One linear solve attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Total error after the attempt (the unchanged error when rejected).
    pub error: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroError,
    NoFreeVariables,
    RelativeDecrease,
    SmallStep,
    MaxIterations,
    LambdaLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerReport {
    /// Number of relinearizations.
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    /// Seconds; zero where no clock is available.
    pub wall_time: f64,
}

impl OptimizerReport {
    /// Errors after each accepted step, starting with the initial error.
    pub fn accepted_errors(&self) -> Vec<f64> {
        std::iter::once(self.initial_error)
            .chain(self.trace.iter().filter(|r| r.accepted).map(|r| r.error))
            .collect()
    }
}

/// Minimizes the total graph error in place. All factors are relinearized at
/// every accepted estimate. On a solver failure at maximum damping the poses
/// are restored to their values on entry.
pub fn optimize(graph: &mut MappingGraph, settings: &LmSettings) -> Result<OptimizerReport> {
    let clock = Clock::start();
    let ordered = settings.deterministic;
    let fixed = graph.gauge_fixed_mask();
    let initial_poses = graph.poses.clone();
    let initial_updates = graph.updates.clone();
    let initial_error = graph.error(ordered);
    let mut report = OptimizerReport {
        iterations: 0,
        initial_error,
        final_error: initial_error,
        trace: Vec::new(),
        termination: Termination::MaxIterations,
        wall_time: 0.0,
    };
    let finish = |mut report: OptimizerReport, termination| {
        report.termination = termination;
        report.wall_time = clock.seconds();
        Ok(report)
    };
    if initial_error == 0.0 {
        return finish(report, Termination::ZeroError);
    }
    if fixed.iter().all(|&f| f) {
        return finish(report, Termination::NoFreeVariables);
    }

    let mut error = initial_error;
    let mut lambda = settings.initial_lambda;
    let mut attempts = 0;
    while report.iterations < settings.max_iterations {
        report.iterations += 1;
        let linearized = graph.linearize(&graph.poses, ordered);
        let system = assemble_normal_equations(&linearized, &fixed);
        loop {
            let step = solve_block_system(&system.damped(lambda, DAMPING_FLOOR));
            let delta = match step {
                Ok(delta) => delta,
                Err(Error::NotPositiveDefinite { .. }) => {
                    lambda *= settings.lambda_up;
                    if lambda > settings.max_lambda {
                        graph.commit(initial_poses, initial_updates);
                        return Err(Error::SolverFailed { lambda });
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let step_norm = delta.iter().map(Vector6::norm_squared).sum::<f64>().sqrt();
            attempts += 1;
            if step_norm < settings.step_tolerance {
                report.trace.push(TraceRecord {
                    iteration: attempts,
                    error,
                    lambda,
                    step_norm,
                    accepted: false,
                });
                report.final_error = error;
                return finish(report, Termination::SmallStep);
            }
            let (poses, updates) = graph.retracted(&system.variables, &delta);
            let candidate = graph.error_at(&poses, ordered);
            if candidate < error {
                graph.commit(poses, updates);
                let decrease = (error - candidate) / error;
                error = candidate;
                report.final_error = error;
                report.trace.push(TraceRecord {
                    iteration: attempts,
                    error,
                    lambda,
                    step_norm,
                    accepted: true,
                });
                lambda = (lambda * settings.lambda_down).max(MIN_LAMBDA);
                if decrease < settings.relative_tolerance || error == 0.0 {
                    return finish(report, Termination::RelativeDecrease);
                }
                break;
            }
            report.trace.push(TraceRecord {
                iteration: attempts,
                error,
                lambda,
                step_norm,
                accepted: false,
            });
            lambda *= settings.lambda_up;
            if lambda > settings.max_lambda {
                return finish(report, Termination::LambdaLimit);
            }
        }
    }
    finish(report, Termination::MaxIterations)
}
