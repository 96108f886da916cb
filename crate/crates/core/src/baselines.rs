//! Reference angles and worst-case evaluation of a fixed angle.
//!
//! SA is the smallest admissible angle. AA maximizes the slot rate for the
//! deviation obtained by spreading the whole budget evenly over the slots;
//! it is found by a log-spaced scan followed by golden-section search.

use std::fmt;

use serde::Serialize;

use crate::adversary::AdversaryResult;
use crate::beam::{slot_rate, Angle, Deviation, LinkParams};
use crate::dmp::AngleGrid;
use crate::error::Result;
use crate::robust::{solve_robust, RobustResult, SolverConfig};
use crate::uncertainty::UncertaintySpec;

/// Points of the coarse log-spaced scan.
pub const SCAN_POINTS: usize = 1000;
/// Relative bracket width at which golden-section search stops.
pub const GOLDEN_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    /// Robust angle.
    RA,
    /// Smallest angle.
    SA,
    /// Average-deviation angle.
    AA,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RA, Scheme::SA, Scheme::AA];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::RA => "RA",
            Scheme::SA => "SA",
            Scheme::AA => "AA",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeAngle {
    pub scheme: Scheme,
    pub theta: Angle,
}

pub fn small_angle(grid: &AngleGrid) -> SchemeAngle {
    SchemeAngle {
        scheme: Scheme::SA,
        theta: Angle::from_rad(grid.alpha()).expect("grid bounds are positive"),
    }
}

/// Angle maximizing the slot rate at deviation `d_total / T`.
pub fn average_deviation_angle(
    params: &LinkParams,
    spec: &UncertaintySpec,
    grid: &AngleGrid,
) -> Result<SchemeAngle> {
    let d_bar = Deviation::from_rad(spec.d_total() / spec.slots() as f64)?;
    let theta = maximize_on_log_scale(
        |theta| slot_rate(params, Angle::from_rad(theta)?, d_bar),
        grid.alpha(),
        grid.omega(),
    )?;
    Ok(SchemeAngle {
        scheme: Scheme::AA,
        theta: Angle::from_rad(theta)?,
    })
}

/// Maximizer of `f` on `[lo, hi]`: the best of [`SCAN_POINTS`] log-spaced
/// points (smallest on ties), polished by golden-section search between its
/// neighbours.
pub(crate) fn maximize_on_log_scale<F>(f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (hi / lo).ln();
    let point = |k: usize| {
        if k == SCAN_POINTS - 1 {
            hi
        } else {
            lo * (ratio * k as f64 / (SCAN_POINTS - 1) as f64).exp()
        }
    };
    let mut best = (0, f(lo)?);
    for k in 1..SCAN_POINTS {
        let v = f(point(k))?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let (k, scan_value) = best;
    let a = point(k.saturating_sub(1));
    let b = point((k + 1).min(SCAN_POINTS - 1));
    let (x, v) = golden_section(&f, a, b)?;
    Ok(if v > scan_value { x } else { point(k) })
}

fn golden_section<F>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > GOLDEN_REL_TOL * 0.5 * (a + b) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Worst grid scenario for a fixed angle.
pub fn worst_case_of(theta: Angle, config: &SolverConfig) -> Result<AdversaryResult> {
    config.adversary(theta)
}

/// Robust angle from the cutting-plane loop, with the full solver result.
pub fn robust_angle(config: &SolverConfig) -> Result<(SchemeAngle, RobustResult)> {
    let r = solve_robust(config)?;
    Ok((
        SchemeAngle {
            scheme: Scheme::RA,
            theta: r.theta_star,
        },
        r,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AngleGrid {
        AngleGrid::from_microrad(0.01, 1000.0, 5000).unwrap()
    }

    #[test]
    fn sa_is_grid_start() {
        let g = grid();
        let sa = small_angle(&g);
        assert_eq!(sa.scheme, Scheme::SA);
        assert_eq!(sa.theta.rad(), g.alpha());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, _) = golden_section(&|x: f64| Ok(-(x - 2.5).powi(2)), 1.0, 4.0).unwrap();
        assert!((x - 2.5).abs() < 1e-5);
    }

    #[test]
    fn log_scan_prefers_smallest_on_plateau() {
        let x = maximize_on_log_scale(|_| Ok(1.0), 1.0, 10.0).unwrap();
        assert_eq!(x, 1.0);
    }

    #[test]
    fn aa_is_a_local_maximum() {
        let p = LinkParams::reference();
        let spec = UncertaintySpec::with_budget_fraction(10, 1e-6, 0.4).unwrap();
        let aa = average_deviation_angle(&p, &spec, &grid()).unwrap();
        let d = Deviation::from_rad(spec.d_total() / 10.0).unwrap();
        let at = |t: f64| slot_rate(&p, Angle::from_rad(t).unwrap(), d).unwrap();
        let t = aa.theta.rad();
        assert!(at(t) >= at(0.999 * t));
        assert!(at(t) >= at(1.001 * t));
    }
}
