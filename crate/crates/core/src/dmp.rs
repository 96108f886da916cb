//! Decision-maker's problem: the angle maximizing the minimum sum rate over a
//! finite scenario pool.
//!
//! The angle range is cut into `M` equal intervals. On each interval every
//! scenario's sum-rate curve is replaced by its chord through the two
//! endpoint values, and the max-min of those lines is solved exactly: the
//! lower envelope of lines is concave, so its maximum sits at an interval
//! endpoint or at a crossing of two lines. The best interval wins.
//!
//! Sum rates are cached per `(angle, deviation)` pair so that adjacent
//! intervals and repeated solves with a growing pool share evaluations.

use std::collections::HashMap;

use crate::beam::{slot_rate, Angle, Deviation, LinkParams};
use crate::error::{invalid, Error, Result};
use crate::uncertainty::{Scenario, ScenarioPool};

/// `M` equal intervals tiling `[alpha, omega]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    alpha: f64,
    omega: f64,
    intervals: usize,
}

impl AngleGrid {
    /// Bounds in radians.
    pub fn new(alpha: f64, omega: f64, intervals: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(omega.is_finite() && omega > alpha) {
            return Err(invalid("omega", format!("must exceed alpha, got {omega}")));
        }
        if intervals == 0 {
            return Err(invalid("angle_intervals", "must be at least 1"));
        }
        Ok(Self {
            alpha,
            omega,
            intervals,
        })
    }

    pub fn from_microrad(alpha: f64, omega: f64, intervals: usize) -> Result<Self> {
        Self::new(alpha * 1e-6, omega * 1e-6, intervals)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Grid point `k` in `0..=M`; point `M` is exactly `omega`.
    pub fn point(&self, k: usize) -> f64 {
        if k >= self.intervals {
            self.omega
        } else {
            self.alpha + k as f64 * (self.omega - self.alpha) / self.intervals as f64
        }
    }

    /// Endpoints of 1-based interval `m`.
    pub fn interval(&self, m: usize) -> (f64, f64) {
        (self.point(m - 1), self.point(m))
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.alpha && theta <= self.omega
    }

    /// The same range cut `factor` times finer around interval `m`: covers
    /// intervals `m - 1 ..= m + 1` (clipped to the range).
    pub fn refined_around(&self, m: usize, factor: usize) -> Result<AngleGrid> {
        let first = m.saturating_sub(2);
        let last = (m + 1).min(self.intervals);
        AngleGrid::new(
            self.point(first),
            self.point(last),
            (last - first) * factor.max(1),
        )
    }
}

/// The chord of one scenario's sum-rate curve over one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordLine {
    /// 1-based interval index.
    pub interval: usize,
    /// Position of the scenario in the pool.
    pub scenario: usize,
    pub alpha_m: f64,
    pub omega_m: f64,
    pub value_at_alpha: f64,
    pub value_at_omega: f64,
    /// Rate per radian.
    pub slope: f64,
}

impl ChordLine {
    pub fn new(
        interval: usize,
        scenario: usize,
        (alpha_m, omega_m): (f64, f64),
        value_at_alpha: f64,
        value_at_omega: f64,
    ) -> Self {
        Self {
            interval,
            scenario,
            alpha_m,
            omega_m,
            value_at_alpha,
            value_at_omega,
            slope: (value_at_omega - value_at_alpha) / (omega_m - alpha_m),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if theta == self.omega_m {
            self.value_at_omega
        } else {
            self.value_at_alpha + self.slope * (theta - self.alpha_m)
        }
    }
}

/// Slot rates keyed by the exact bit patterns of angle and deviation.
#[derive(Debug, Clone)]
pub struct RateCache {
    params: LinkParams,
    rates: HashMap<(u64, u64), f64>,
}

impl RateCache {
    pub fn new(params: LinkParams) -> Self {
        Self {
            params,
            rates: HashMap::new(),
        }
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    pub fn slot_rate(&mut self, theta: f64, d: Deviation) -> Result<f64> {
        let key = (theta.to_bits(), d.rad().to_bits());
        if let Some(&v) = self.rates.get(&key) {
            return Ok(v);
        }
        let v = slot_rate(&self.params, Angle::from_rad(theta)?, d)?;
        self.rates.insert(key, v);
        Ok(v)
    }

    /// Same value, bit for bit, as [`crate::beam::sum_rate`].
    pub fn sum_rate(&mut self, theta: f64, s: &Scenario) -> Result<f64> {
        let mut acc = 0.0;
        for &d in s.deviations() {
            acc += self.slot_rate(theta, d)?;
        }
        Ok(acc)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Chord of `scenario`'s sum rate over interval `m` of `grid`.
pub fn chord(
    params: &LinkParams,
    scenario: &Scenario,
    grid: &AngleGrid,
    m: usize,
) -> Result<ChordLine> {
    if m == 0 || m > grid.intervals {
        return Err(invalid(
            "interval",
            format!("must be in 1..={}, got {m}", grid.intervals),
        ));
    }
    let mut cache = RateCache::new(*params);
    let (a, b) = grid.interval(m);
    let va = cache.sum_rate(a, scenario)?;
    let vb = cache.sum_rate(b, scenario)?;
    Ok(ChordLine::new(m, 0, (a, b), va, vb))
}

fn envelope(lines: &[ChordLine], theta: f64) -> f64 {
    lines
        .iter()
        .map(|l| l.eval(theta))
        .fold(f64::INFINITY, f64::min)
}

/// Maximizes the lower envelope of `lines` over their shared interval.
/// Returns `(theta, value)`; ties go to the smaller angle.
pub fn solve_interval(lines: &[ChordLine]) -> Result<(f64, f64)> {
    let first = lines.first().ok_or(Error::Empty("chord line set"))?;
    let (a, b) = (first.alpha_m, first.omega_m);
    if lines.iter().any(|l| l.alpha_m != a || l.omega_m != b) {
        return Err(invalid("lines", "chords must share one interval"));
    }
    let mut best = (a, envelope(lines, a));
    let mut consider = |theta: f64| {
        let v = envelope(lines, theta);
        if v > best.1 || (v == best.1 && theta < best.0) {
            best = (theta, v);
        }
    };
    consider(b);
    for (i, p) in lines.iter().enumerate() {
        for q in &lines[i + 1..] {
            let ds = p.slope - q.slope;
            if ds == 0.0 {
                continue;
            }
            let theta = a + (q.value_at_alpha - p.value_at_alpha) / ds;
            if theta > a && theta < b {
                consider(theta);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmpResult {
    pub theta_star: Angle,
    /// Max-min of the chord approximation [bit/s].
    pub approx_value: f64,
    /// Exact minimum sum rate over the pool at `theta_star` [bit/s].
    pub true_value_on_pool: f64,
    /// 1-based winning interval on the coarse grid.
    pub winning_interval: usize,
    /// Whether `theta_star` came from the local refinement pass.
    pub refined: bool,
}

/// Solves the decision-maker's problem with a reusable rate cache.
#[derive(Debug, Clone)]
pub struct DmpSolver {
    grid: AngleGrid,
    refine_factor: usize,
    cache: RateCache,
}

impl DmpSolver {
    /// `refine_factor <= 1` disables the local refinement pass.
    pub fn new(params: LinkParams, grid: AngleGrid, refine_factor: usize) -> Self {
        Self {
            grid,
            refine_factor,
            cache: RateCache::new(params),
        }
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn refine_factor(&self) -> usize {
        self.refine_factor
    }

    pub fn set_refine_factor(&mut self, factor: usize) {
        self.refine_factor = factor;
    }

    pub fn cache_mut(&mut self) -> &mut RateCache {
        &mut self.cache
    }

    pub fn solve(&mut self, pool: &ScenarioPool) -> Result<DmpResult> {
        if pool.is_empty() {
            return Err(Error::Empty("scenario pool"));
        }
        let coarse = self.solve_on(&self.grid.clone(), pool)?;
        let (theta, approx_value, refined) = if self.refine_factor > 1 {
            let local = self.grid.refined_around(coarse.0, self.refine_factor)?;
            let (_, theta, value) = self.solve_on(&local, pool)?;
            (theta, value, true)
        } else {
            (coarse.1, coarse.2, false)
        };
        let mut true_value_on_pool = f64::INFINITY;
        for s in pool.scenarios() {
            true_value_on_pool = true_value_on_pool.min(self.cache.sum_rate(theta, s)?);
        }
        Ok(DmpResult {
            theta_star: Angle::from_rad(theta)?,
            approx_value,
            true_value_on_pool,
            winning_interval: coarse.0,
            refined,
        })
    }

    /// Returns `(m, theta_m, R_m)` of the best interval of `grid`.
    fn solve_on(&mut self, grid: &AngleGrid, pool: &ScenarioPool) -> Result<(usize, f64, f64)> {
        let n = grid.intervals;
        // curves[s][k]: sum rate of scenario s at grid point k
        let mut curves = Vec::with_capacity(pool.len());
        for s in pool.scenarios() {
            let mut row = Vec::with_capacity(n + 1);
            for k in 0..=n {
                row.push(self.cache.sum_rate(grid.point(k), s)?);
            }
            curves.push(row);
        }
        let mut best: Option<(usize, f64, f64)> = None;
        let mut lines = Vec::with_capacity(pool.len());
        for m in 1..=n {
            let bounds = grid.interval(m);
            lines.clear();
            lines.extend(
                curves
                    .iter()
                    .enumerate()
                    .map(|(s, c)| ChordLine::new(m, s, bounds, c[m - 1], c[m])),
            );
            let (theta, value) = solve_interval(&lines)?;
            if best.is_none_or(|(_, _, v)| value > v) {
                best = Some((m, theta, value));
            }
        }
        Ok(best.expect("at least one interval"))
    }
}

/// One-shot solve with a fresh cache.
pub fn solve_dmp(
    params: &LinkParams,
    pool: &ScenarioPool,
    grid: &AngleGrid,
    refine_factor: usize,
) -> Result<DmpResult> {
    DmpSolver::new(*params, *grid, refine_factor).solve(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::sum_rate;
    use crate::uncertainty::UncertaintySpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(values: (f64, f64), bounds: (f64, f64)) -> ChordLine {
        ChordLine::new(1, 0, bounds, values.0, values.1)
    }

    #[test]
    fn grid_tiles_range_exactly() {
        let g = AngleGrid::from_microrad(0.01, 1000.0, 5000).unwrap();
        assert_eq!(g.interval(1).0, g.alpha());
        assert_eq!(g.interval(5000).1, g.omega());
        for m in 1..5000 {
            assert_eq!(g.interval(m).1, g.interval(m + 1).0);
        }
        assert!(AngleGrid::new(1e-6, 1e-6, 3).is_err());
        assert!(AngleGrid::new(0.0, 1e-6, 3).is_err());
        assert!(AngleGrid::new(1e-7, 1e-6, 0).is_err());
    }

    #[test]
    fn flat_chord() {
        let l = line((5.0, 5.0), (1.0, 2.0));
        assert_eq!(l.slope, 0.0);
        assert_eq!(l.eval(1.5), 5.0);
    }

    #[test]
    fn chord_interpolates_endpoints_exactly() {
        let p = LinkParams::reference();
        let grid = AngleGrid::from_microrad(0.01, 1000.0, 1000).unwrap();
        let s = Scenario::from_microrad(&[0.0, 1.0, 2.0]).unwrap();
        for m in [1, 2, 37, 1000] {
            let c = chord(&p, &s, &grid, m).unwrap();
            let (a, b) = grid.interval(m);
            let ea = sum_rate(&p, Angle::from_rad(a).unwrap(), &s).unwrap();
            let eb = sum_rate(&p, Angle::from_rad(b).unwrap(), &s).unwrap();
            assert_eq!(c.eval(a), ea);
            assert_eq!(c.eval(b), eb);
        }
        assert!(chord(&p, &s, &grid, 0).is_err());
        assert!(chord(&p, &s, &grid, 1001).is_err());
    }

    #[test]
    fn chord_midpoint_tracks_the_curve() {
        let p = LinkParams::reference();
        let grid = AngleGrid::from_microrad(0.01, 1000.0, 1000).unwrap();
        let s = Scenario::from_microrad(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        for m in [10, 100, 500, 900] {
            let c = chord(&p, &s, &grid, m).unwrap();
            let (a, b) = grid.interval(m);
            let mid = 0.5 * (a + b);
            let f = |x: f64| sum_rate(&p, Angle::from_rad(x).unwrap(), &s).unwrap();
            // interpolation error is at most h^2/8 max|f''|
            let h = b - a;
            let k = h / 16.0;
            let curvature = (0..=16)
                .map(|j| {
                    let x = a + j as f64 * k;
                    ((f(x + k) - 2.0 * f(x) + f(x - k)) / (k * k)).abs()
                })
                .fold(0.0, f64::max);
            let bound = 2.0 * curvature * h * h / 8.0;
            assert!((c.eval(mid) - f(mid)).abs() <= bound, "m={m}");
        }
    }

    #[test]
    fn single_rising_line_peaks_at_right_end() {
        let (t, v) = solve_interval(&[line((1.0, 3.0), (0.0, 1.0))]).unwrap();
        assert_eq!((t, v), (1.0, 3.0));
    }

    #[test]
    fn crossing_lines_peak_at_intersection() {
        let up = line((0.0, 2.0), (0.0, 1.0));
        let down = line((2.0, 0.0), (0.0, 1.0));
        let (t, v) = solve_interval(&[up, down]).unwrap();
        assert!((t - 0.5).abs() < 1e-15);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_line_set_is_rejected() {
        assert!(matches!(solve_interval(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn random_lines_agree_with_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let bounds = (2.0, 3.0);
            let lines: Vec<ChordLine> = (0..5)
                .map(|_| line((rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)), bounds))
                .collect();
            let (theta, value) = solve_interval(&lines).unwrap();
            let n = 1_000_000;
            let step = (bounds.1 - bounds.0) / n as f64;
            let (mut bt, mut bv) = (bounds.0, f64::NEG_INFINITY);
            for k in 0..=n {
                let t = bounds.0 + k as f64 * step;
                let v = lines
                    .iter()
                    .map(|l| l.eval(t))
                    .fold(f64::INFINITY, f64::min);
                if v > bv {
                    (bt, bv) = (t, v);
                }
            }
            let steepest = lines.iter().map(|l| l.slope.abs()).fold(0.0, f64::max);
            assert!(value >= bv - 1e-12 * bv.abs());
            assert!(value - bv <= steepest * step);
            assert!((theta - bt).abs() <= step);
        }
    }

    #[test]
    fn zero_pool_picks_smallest_angle() {
        let p = LinkParams::reference();
        let spec = UncertaintySpec::with_budget_fraction(4, 1e-6, 0.4).unwrap();
        let pool = ScenarioPool::with_zero_scenario(spec);
        let grid = AngleGrid::from_microrad(0.01, 1000.0, 500).unwrap();
        let r = solve_dmp(&p, &pool, &grid, 1).unwrap();
        assert_eq!(r.theta_star.rad(), grid.alpha());
        assert_eq!(r.winning_interval, 1);
        let r = solve_dmp(&p, &pool, &grid, 100).unwrap();
        assert_eq!(r.theta_star.rad(), grid.alpha());
    }

    #[test]
    fn empty_pool_is_rejected() {
        let p = LinkParams::reference();
        let spec = UncertaintySpec::with_budget_fraction(4, 1e-6, 0.4).unwrap();
        let grid = AngleGrid::from_microrad(0.01, 1000.0, 50).unwrap();
        let err = solve_dmp(&p, &ScenarioPool::new(spec), &grid, 1).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn refined_grid_covers_neighbours() {
        let g = AngleGrid::new(1.0, 11.0, 10).unwrap();
        let r = g.refined_around(5, 100).unwrap();
        assert_eq!((r.alpha(), r.omega(), r.intervals()), (4.0, 7.0, 300));
        let r = g.refined_around(1, 10).unwrap();
        assert_eq!((r.alpha(), r.omega(), r.intervals()), (1.0, 3.0, 20));
        let r = g.refined_around(10, 10).unwrap();
        assert_eq!((r.alpha(), r.omega(), r.intervals()), (9.0, 11.0, 20));
    }
}
