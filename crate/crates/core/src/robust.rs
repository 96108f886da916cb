//! The cutting-plane loop for the robust divergence angle.
//!
//! Starting from the pool `{0}`, each iteration solves the decision-maker's
//! problem on the pool (its value is the upper bound), asks the adversary for
//! the worst grid scenario at that angle (its value is a candidate lower
//! bound) and adds the scenario to the pool. The loop stops once the bounds
//! are within `epsilon`.

use std::io::Write;

use log::{debug, info, warn};
use serde::Serialize;

use crate::adversary::{build_graph, solve_rcspp, AdversaryResult, DeviationGrid};
use crate::beam::{Angle, LinkParams};
use crate::dmp::{AngleGrid, DmpSolver};
use crate::error::{invalid, Error, Result};
use crate::uncertainty::{format_microrad_list, Scenario, ScenarioPool, UncertaintySpec};

/// Relative slack on the upper-bound monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Relative amount by which the chord value may undercut the exact pool
/// minimum before a note is recorded.
pub const CHORD_SLACK_NOTE: f64 = 1e-6;
/// Default points per interval for the local DMP refinement.
pub const DEFAULT_REFINE_FACTOR: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub link: LinkParams,
    pub uncertainty: UncertaintySpec,
    pub angle_grid: AngleGrid,
    pub deviation_grid: DeviationGrid,
    /// Convergence tolerance on `UB - LB` [bit/s].
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Local DMP refinement factor; `<= 1` disables refinement.
    pub refine_factor: usize,
}

impl SolverConfig {
    pub fn new(
        link: LinkParams,
        uncertainty: UncertaintySpec,
        angle_grid: AngleGrid,
        deviation_grid: DeviationGrid,
        epsilon: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        let config = Self {
            link,
            uncertainty,
            angle_grid,
            deviation_grid,
            epsilon,
            max_iterations,
            refine_factor: DEFAULT_REFINE_FACTOR,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_refine_factor(mut self, factor: usize) -> Self {
        self.refine_factor = factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if self.max_iterations < 1 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        self.deviation_grid.check(&self.uncertainty)
    }

    /// Worst grid scenario at `theta`.
    pub fn adversary(&self, theta: Angle) -> Result<AdversaryResult> {
        adversary_on(self, &self.deviation_grid, theta)
    }
}

fn adversary_on(
    config: &SolverConfig,
    grid: &DeviationGrid,
    theta: Angle,
) -> Result<AdversaryResult> {
    let graph = build_graph(&config.uncertainty, grid, &config.link, theta)?;
    Ok(solve_rcspp(&graph, grid.budget_steps()))
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(rename = "theta_dmp_rad")]
    pub theta_dmp: f64,
    /// DMP value from the chord approximation [bit/s].
    pub ub: f64,
    /// Exact minimum sum rate over the pool at `theta_dmp` [bit/s].
    pub pool_value: f64,
    #[serde(serialize_with = "scenario_microrad")]
    pub adversary_scenario: Scenario,
    pub adversary_value: f64,
    pub lb_best: f64,
    /// Whether the adversary scenario was new to the pool.
    pub added: bool,
}

fn scenario_microrad<S: serde::Serializer>(
    s: &Scenario,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(s.to_microrad())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct RobustResult {
    /// Angle from the last DMP solve.
    pub theta_star: Angle,
    /// Angle at which the best lower bound was attained.
    pub theta_best_lb: Angle,
    pub ub_final: f64,
    pub lb_final: f64,
    pub trace: Vec<IterationRecord>,
    pub pool_final: ScenarioPool,
    pub status: Status,
    pub notes: Vec<String>,
}

impl RobustResult {
    pub fn gap(&self) -> f64 {
        self.ub_final - self.lb_final
    }
}

/// Runs the cutting-plane loop to tolerance.
///
/// Fails with [`Error::UpperBoundIncreased`] if the upper bound rises by more
/// than [`MONOTONE_SLACK`] relative between iterations.
pub fn solve_robust(config: &SolverConfig) -> Result<RobustResult> {
    config.validate()?;
    let spec = config.uncertainty;
    let mut pool = ScenarioPool::with_zero_scenario(spec);
    let mut dmp = DmpSolver::new(config.link, config.angle_grid, config.refine_factor);
    let mut grid = config.deviation_grid;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut notes = Vec::new();
    let mut lb = f64::NEG_INFINITY;
    let mut theta_best_lb = None;
    let mut refined_after_stall = false;
    let mut status = Status::IterationLimit;

    for iteration in 1..=config.max_iterations {
        let d = dmp.solve(&pool)?;
        let ub = d.approx_value;
        let theta = d.theta_star;
        if let Some(prev) = trace.last() {
            if ub > prev.ub + MONOTONE_SLACK * prev.ub.abs() {
                return Err(Error::UpperBoundIncreased {
                    iteration,
                    previous: prev.ub,
                    current: ub,
                });
            }
        }
        if ub < d.true_value_on_pool * (1.0 - CHORD_SLACK_NOTE) {
            notes.push(format!(
                "iteration {iteration}: chord value {ub:e} undercuts the exact pool minimum {:e}",
                d.true_value_on_pool
            ));
        }

        let adv = adversary_on(config, &grid, theta)?;
        if adv.worst_sum_rate > lb {
            lb = adv.worst_sum_rate;
            theta_best_lb = Some(theta);
        }
        let added = pool.insert(adv.worst_scenario.clone())?;
        debug!(
            "iteration {iteration}: theta {:e} urad, UB {ub:e}, adversary {:e}, LB {lb:e}",
            theta.microrad(),
            adv.worst_sum_rate
        );
        trace.push(IterationRecord {
            iteration,
            theta_dmp: theta.rad(),
            ub,
            pool_value: d.true_value_on_pool,
            adversary_scenario: adv.worst_scenario,
            adversary_value: adv.worst_sum_rate,
            lb_best: lb,
            added,
        });

        if ub - lb <= config.epsilon {
            status = Status::Converged;
            break;
        }
        if !added {
            if refined_after_stall {
                notes.push(format!(
                    "iteration {iteration}: adversary repeated a pool scenario after refinement; residual gap {:e} bit/s",
                    ub - lb
                ));
                break;
            }
            refined_after_stall = true;
            let factor = config.refine_factor.max(1) * 10;
            dmp.set_refine_factor(factor);
            match DeviationGrid::new(&spec, grid.step() / 2.0) {
                Ok(finer) => grid = finer,
                Err(e) => notes.push(format!("deviation grid not refined: {e}")),
            }
            let note = format!(
                "iteration {iteration}: adversary repeated a pool scenario with gap {:e} bit/s; refine factor {factor}, deviation step {:e} rad",
                ub - lb,
                grid.step()
            );
            warn!("{note}");
            notes.push(note);
        }
    }

    let last = trace.last().expect("at least one iteration");
    let result = RobustResult {
        theta_star: Angle::from_rad(last.theta_dmp)?,
        theta_best_lb: theta_best_lb.expect("lower bound set on the first iteration"),
        ub_final: last.ub,
        lb_final: lb,
        status,
        notes,
        pool_final: pool,
        trace,
    };
    info!(
        "{:?} after {} iterations: theta* {:e} urad, UB {:e}, LB {:e}",
        result.status,
        result.trace.len(),
        result.theta_star.microrad(),
        result.ub_final,
        result.lb_final
    );
    Ok(result)
}

/// Writes the trace as `iter,theta_murad,ub_gbps,lb_gbps,adversary_scenario_murad_list`.
pub fn write_trace<W: Write>(mut out: W, trace: &[IterationRecord]) -> Result<()> {
    writeln!(
        out,
        "iter,theta_murad,ub_gbps,lb_gbps,adversary_scenario_murad_list"
    )?;
    for r in trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{}",
            r.iteration,
            r.theta_dmp * 1e6,
            r.ub * 1e-9,
            r.lb_best * 1e-9,
            format_microrad_list(&r.adversary_scenario)
        )?;
    }
    Ok(())
}
