//! The three batch experiments behind the command-line tool. Each writes its
//! artifacts into an output directory; rows are produced in parallel and
//! written in a fixed order, so reruns are byte-identical.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::build_graph;
use crate::baselines::{
    average_deviation_angle, robust_angle, small_angle, worst_case_of, Scheme, SchemeAngle,
};
use crate::beam::sum_rate;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::robust::{write_trace, RobustResult, Status};
use crate::stats::BoxStats;
use crate::uncertainty::{format_microrad_list, write_pool, Sample};

const GBPS: f64 = 1e-9;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Debug, Serialize)]
struct SolveSummary<'a> {
    slots: usize,
    status: Status,
    iterations: usize,
    theta_star_murad: f64,
    theta_best_lb_murad: f64,
    ub_gbps: f64,
    lb_gbps: f64,
    gap_gbps: f64,
    epsilon_gbps: f64,
    pool_size: usize,
    notes: &'a [String],
}

/// Runs the cutting-plane loop at `solve_time_slots`; writes `trace.csv`,
/// `result.json`, `pool.csv` and, with `dump_graph`, the layered graph at
/// the final angle as `graph.csv`.
pub fn run_solve(
    config: &ExperimentConfig,
    out_dir: &Path,
    dump_graph: bool,
) -> Result<RobustResult> {
    let slots = config.solve_time_slots;
    let solver = config.solver_config(slots)?;
    let (_, result) = robust_angle(&solver)?;

    let mut trace = create(out_dir, "trace.csv")?;
    write_trace(&mut trace, &result.trace)?;
    trace.flush()?;

    let summary = SolveSummary {
        slots,
        status: result.status,
        iterations: result.trace.len(),
        theta_star_murad: result.theta_star.microrad(),
        theta_best_lb_murad: result.theta_best_lb.microrad(),
        ub_gbps: result.ub_final * GBPS,
        lb_gbps: result.lb_final * GBPS,
        gap_gbps: result.gap() * GBPS,
        epsilon_gbps: config.epsilon_gbps,
        pool_size: result.pool_final.len(),
        notes: &result.notes,
    };
    let mut json = create(out_dir, "result.json")?;
    serde_json::to_writer_pretty(&mut json, &summary).map_err(std::io::Error::from)?;
    writeln!(json)?;
    json.flush()?;

    let mut pool = create(out_dir, "pool.csv")?;
    write_pool(&mut pool, &result.pool_final)?;
    pool.flush()?;

    if dump_graph {
        let graph = build_graph(
            &solver.uncertainty,
            &solver.deviation_grid,
            &solver.link,
            result.theta_star,
        )?;
        let mut out = create(out_dir, "graph.csv")?;
        graph.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(result)
}

/// Worst-case rate of one scheme at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub slots: usize,
    pub scheme: Scheme,
    pub theta: f64,
    /// [bit/s]
    pub worst_sum_rate: f64,
}

impl SweepRow {
    pub fn per_slot(&self) -> f64 {
        self.worst_sum_rate / self.slots as f64
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Three rows (RA, SA, AA) per horizon, horizons in config order.
    pub rows: Vec<SweepRow>,
    /// Robust solve per horizon.
    pub robust: Vec<RobustResult>,
}

/// Scheme angles for horizon `slots`; RA first.
fn scheme_angles(
    config: &ExperimentConfig,
    slots: usize,
) -> Result<(Vec<SchemeAngle>, RobustResult)> {
    let solver = config.solver_config(slots)?;
    let (ra, robust) = robust_angle(&solver)?;
    let sa = small_angle(&solver.angle_grid);
    let aa = average_deviation_angle(&solver.link, &solver.uncertainty, &solver.angle_grid)?;
    Ok((vec![ra, sa, aa], robust))
}

/// Worst-case rate of RA, SA and AA for every horizon in `time_slots`;
/// writes `worst_case.csv`.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<SweepReport> {
    let per_t = config
        .time_slots
        .par_iter()
        .map(|&slots| {
            let solver = config.solver_config(slots)?;
            let (angles, robust) = scheme_angles(config, slots)?;
            let rows = angles
                .iter()
                .map(|a| {
                    Ok(SweepRow {
                        slots,
                        scheme: a.scheme,
                        theta: a.theta.rad(),
                        worst_sum_rate: worst_case_of(a.theta, &solver)?.worst_sum_rate,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            info!(
                "T = {slots}: robust solve {:?} in {} iterations",
                robust.status,
                robust.trace.len()
            );
            Ok((rows, robust))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SweepReport {
        rows: Vec::new(),
        robust: Vec::new(),
    };
    for (rows, robust) in per_t {
        report.rows.extend(rows);
        report.robust.push(robust);
    }
    let mut out = create(out_dir, "worst_case.csv")?;
    writeln!(
        out,
        "T,scheme,theta_murad,worst_sum_rate_gbps,per_slot_gbps"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e}",
            r.slots,
            r.scheme,
            r.theta * 1e6,
            r.worst_sum_rate * GBPS,
            r.per_slot() * GBPS
        )?;
    }
    out.flush()?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MonteCarloRow {
    pub index: usize,
    pub seed: u64,
    pub sample: Sample,
    /// Sum rate [bit/s] per scheme, in the order of [`MonteCarloReport::schemes`].
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub theta_murad: f64,
    /// Box statistics of the sum rate [Gbit/s].
    pub stats: BoxStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub slots: usize,
    pub base_seed: u64,
    pub count: usize,
    pub lb_final_gbps: f64,
    pub epsilon_gbps: f64,
    pub robust_status: Status,
    /// Samples whose RA sum rate is below `LB - epsilon`.
    pub ra_below_guarantee: usize,
    pub duplicate_scenarios: usize,
    pub total_attempts: u64,
    pub max_attempts_single: u64,
    pub schemes: Vec<SchemeSummary>,
    #[serde(skip)]
    pub rows: Vec<MonteCarloRow>,
}

/// Samples `monte_carlo_count` members of the set at `monte_carlo_time_slots`
/// (seed `seed + i` for sample `i`) and evaluates each scheme's sum rate on
/// them; writes `montecarlo.csv` and `stats.json`. Nothing is written if any
/// sample exhausts the attempt limit.
pub fn run_montecarlo(config: &ExperimentConfig, out_dir: &Path) -> Result<MonteCarloReport> {
    let slots = config.monte_carlo_time_slots;
    let solver = config.solver_config(slots)?;
    let (angles, robust) = scheme_angles(config, slots)?;
    let spec = solver.uncertainty;

    let samples = (0..config.monte_carlo_count)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            config
                .sampler
                .sample(&spec, seed, config.max_attempts)
                .map(|s| (i, seed, s))
        })
        .collect::<Vec<_>>();
    let mut exhausted = 0u64;
    let mut ok = Vec::with_capacity(samples.len());
    for s in samples {
        match s {
            Ok(v) => ok.push(v),
            Err(Error::SamplingExhausted { attempts }) => exhausted += attempts,
            Err(e) => return Err(e),
        }
    }
    if exhausted > 0 {
        let spent: u64 = exhausted + ok.iter().map(|(_, _, s)| s.attempts).sum::<u64>();
        return Err(Error::SamplingExhausted { attempts: spent });
    }

    let rows = ok
        .into_par_iter()
        .map(|(index, seed, sample)| {
            let rates = angles
                .iter()
                .map(|a| sum_rate(&solver.link, a.theta, &sample.scenario))
                .collect::<Result<Vec<_>>>()?;
            Ok(MonteCarloRow {
                index,
                seed,
                sample,
                rates,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    let duplicate_scenarios = rows
        .iter()
        .filter(|r| {
            let key: Vec<u64> = r
                .sample
                .scenario
                .deviations()
                .iter()
                .map(|d| d.rad().to_bits())
                .collect();
            !seen.insert(key)
        })
        .count();
    let guarantee = robust.lb_final - solver.epsilon;
    let schemes = angles
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let gbps: Vec<f64> = rows.iter().map(|r| r.rates[k] * GBPS).collect();
            Ok(SchemeSummary {
                scheme: a.scheme,
                theta_murad: a.theta.microrad(),
                stats: BoxStats::from_samples(&gbps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = MonteCarloReport {
        slots,
        base_seed: config.seed,
        count: rows.len(),
        lb_final_gbps: robust.lb_final * GBPS,
        epsilon_gbps: config.epsilon_gbps,
        robust_status: robust.status,
        ra_below_guarantee: rows.iter().filter(|r| r.rates[0] < guarantee).count(),
        duplicate_scenarios,
        total_attempts: rows.iter().map(|r| r.sample.attempts).sum(),
        max_attempts_single: rows.iter().map(|r| r.sample.attempts).max().unwrap_or(0),
        schemes,
        rows,
    };

    let mut out = create(out_dir, "montecarlo.csv")?;
    let names: Vec<String> = angles
        .iter()
        .map(|a| format!("{}_gbps", a.scheme.to_string().to_lowercase()))
        .collect();
    writeln!(
        out,
        "index,seed,attempts,{},scenario_murad_list",
        names.join(",")
    )?;
    for r in &report.rows {
        let rates: Vec<String> = r.rates.iter().map(|v| format!("{:e}", v * GBPS)).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.index,
            r.seed,
            r.sample.attempts,
            rates.join(","),
            format_microrad_list(&r.sample.scenario)
        )?;
    }
    out.flush()?;
    let mut json = create(out_dir, "stats.json")?;
    serde_json::to_writer_pretty(&mut json, &report).map_err(std::io::Error::from)?;
    writeln!(json)?;
    json.flush()?;
    Ok(report)
}
