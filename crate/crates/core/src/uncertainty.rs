//! The deviation uncertainty set: first-slot bound, consecutive-gap bound and
//! a total budget, plus membership checks, random members and CSV I/O.

use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam::Deviation;
use crate::error::{invalid, Error, Result};

/// Absolute slack [rad] on every membership comparison.
pub const MEMBERSHIP_SLACK: f64 = 1e-15;

/// Default attempt cap for the rejection sampler. Acceptance at ten slots
/// with the reference budget is about 2e-7 per draw.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000_000;

/// The uncertainty set: `T` slots, per-slot gap `d_gap` and total budget
/// `d_total` (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    slots: usize,
    d_gap: f64,
    d_total: f64,
}

impl UncertaintySpec {
    pub fn new(slots: usize, d_gap: f64, d_total: f64) -> Result<Self> {
        if slots == 0 {
            return Err(invalid("time_slots", "must be at least 1"));
        }
        if !(d_gap.is_finite() && d_gap > 0.0) {
            return Err(invalid("d_gap", format!("must be positive, got {d_gap}")));
        }
        if !(d_total.is_finite() && d_total > 0.0) {
            return Err(invalid(
                "d_total",
                format!("must be positive, got {d_total}"),
            ));
        }
        if d_total >= slots as f64 * d_gap {
            return Err(invalid(
                "d_total",
                format!(
                    "must be below T * d_gap = {} rad, got {d_total} rad",
                    slots as f64 * d_gap
                ),
            ));
        }
        Ok(Self {
            slots,
            d_gap,
            d_total,
        })
    }

    /// Budget given as a fraction of `T * d_gap`.
    pub fn with_budget_fraction(slots: usize, d_gap: f64, fraction: f64) -> Result<Self> {
        Self::new(slots, d_gap, fraction * slots as f64 * d_gap)
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn d_gap(&self) -> f64 {
        self.d_gap
    }

    pub fn d_total(&self) -> f64 {
        self.d_total
    }

    /// The same set with every angle multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.slots, self.d_gap * factor, self.d_total * factor)
    }
}

/// A sequence of per-slot deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    deviations: Vec<Deviation>,
}

impl Scenario {
    pub fn new(deviations: Vec<Deviation>) -> Self {
        Self { deviations }
    }

    pub fn zeros(slots: usize) -> Self {
        Self::new(vec![Deviation::ZERO; slots])
    }

    pub fn from_rad(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Deviation::from_rad(v))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn from_microrad(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Deviation::from_microrad(v))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.deviations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn deviations(&self) -> &[Deviation] {
        &self.deviations
    }

    pub fn to_microrad(&self) -> Vec<f64> {
        self.deviations.iter().map(|d| d.rad() * 1e6).collect()
    }

    pub fn total(&self) -> f64 {
        self.deviations.iter().map(|d| d.rad()).sum()
    }

    /// Bitwise equality of the deviation values.
    pub fn same_as(&self, other: &Scenario) -> bool {
        self.len() == other.len()
            && self
                .deviations
                .iter()
                .zip(&other.deviations)
                .all(|(a, b)| a.rad().to_bits() == b.rad().to_bits())
    }
}

/// Which defining constraint of the set a scenario breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `d_1 <= d_gap`
    FirstSlot,
    /// `|d_{t+1} - d_t| <= d_gap`, reported with the 1-based `t`
    Gap,
    /// `sum d_t <= d_total`
    Budget,
    /// `d_t >= 0`
    NonNegative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    /// 1-based slot number; 0 for the budget.
    pub slot: usize,
    /// Amount [rad] by which the bound is exceeded.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Member,
    Violations(Vec<Violation>),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member)
    }
}

/// Checks a scenario against every constraint of the set.
pub fn membership(spec: &UncertaintySpec, s: &Scenario) -> Result<Membership> {
    if s.len() != spec.slots {
        return Err(Error::Shape {
            expected: spec.slots,
            got: s.len(),
        });
    }
    let d: Vec<f64> = s.deviations.iter().map(|d| d.rad()).collect();
    let mut violations = Vec::new();
    for (t, &v) in d.iter().enumerate() {
        if v < -MEMBERSHIP_SLACK {
            violations.push(Violation {
                constraint: Constraint::NonNegative,
                slot: t + 1,
                excess: -v,
            });
        }
    }
    if d[0] > spec.d_gap + MEMBERSHIP_SLACK {
        violations.push(Violation {
            constraint: Constraint::FirstSlot,
            slot: 1,
            excess: d[0] - spec.d_gap,
        });
    }
    for (t, w) in d.windows(2).enumerate() {
        let step = (w[1] - w[0]).abs();
        if step > spec.d_gap + MEMBERSHIP_SLACK {
            violations.push(Violation {
                constraint: Constraint::Gap,
                slot: t + 1,
                excess: step - spec.d_gap,
            });
        }
    }
    let total: f64 = d.iter().sum();
    if total > spec.d_total + MEMBERSHIP_SLACK {
        violations.push(Violation {
            constraint: Constraint::Budget,
            slot: 0,
            excess: total - spec.d_total,
        });
    }
    Ok(if violations.is_empty() {
        Membership::Member
    } else {
        Membership::Violations(violations)
    })
}

/// A random member of the set together with the number of draws it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scenario: Scenario,
    pub attempts: u64,
}

/// Uniform-and-reject sampler: every slot is drawn uniformly on
/// `[0, d_total]` and the draw is kept only if it is a member.
///
/// A draw is abandoned as soon as one of its prefixes violates a
/// constraint; since the slots are independent this leaves the accepted
/// distribution unchanged.
pub fn sample_scenario(spec: &UncertaintySpec, seed: u64, max_attempts: u64) -> Result<Sample> {
    if max_attempts == 0 {
        return Err(invalid("max_attempts", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0; spec.slots];
    let gap = spec.d_gap + MEMBERSHIP_SLACK;
    let budget = spec.d_total + MEMBERSHIP_SLACK;
    'attempt: for attempt in 1..=max_attempts {
        let mut total = 0.0;
        for t in 0..spec.slots {
            let v = rng.gen::<f64>() * spec.d_total;
            let ok = if t == 0 {
                v <= gap
            } else {
                (v - draw[t - 1]).abs() <= gap
            };
            total += v;
            if !ok || total > budget {
                continue 'attempt;
            }
            draw[t] = v;
        }
        let scenario = Scenario::from_rad(&draw)?;
        debug_assert!(membership(spec, &scenario)?.is_member());
        return Ok(Sample {
            scenario,
            attempts: attempt,
        });
    }
    Err(Error::SamplingExhausted {
        attempts: max_attempts,
    })
}

/// Sequential sampler: `d_1` uniform on `[0, d_gap]`, each later slot
/// uniform on the window the gap constraint allows, rejected only on the
/// budget. Much faster for long horizons but its distribution differs from
/// [`sample_scenario`].
pub fn sample_sequential(spec: &UncertaintySpec, seed: u64, max_attempts: u64) -> Result<Sample> {
    if max_attempts == 0 {
        return Err(invalid("max_attempts", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0; spec.slots];
    'attempt: for attempt in 1..=max_attempts {
        let mut total = 0.0;
        for t in 0..spec.slots {
            let (lo, hi) = if t == 0 {
                (0.0, spec.d_gap)
            } else {
                (
                    (draw[t - 1] - spec.d_gap).max(0.0),
                    draw[t - 1] + spec.d_gap,
                )
            };
            let v = lo + rng.gen::<f64>() * (hi - lo);
            total += v;
            if total > spec.d_total {
                continue 'attempt;
            }
            draw[t] = v;
        }
        return Ok(Sample {
            scenario: Scenario::from_rad(&draw)?,
            attempts: attempt,
        });
    }
    Err(Error::SamplingExhausted {
        attempts: max_attempts,
    })
}

/// Sampling scheme used for Monte Carlo evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Rejection,
    Sequential,
}

impl SamplerKind {
    pub fn sample(self, spec: &UncertaintySpec, seed: u64, max_attempts: u64) -> Result<Sample> {
        match self {
            SamplerKind::Rejection => sample_scenario(spec, seed, max_attempts),
            SamplerKind::Sequential => sample_sequential(spec, seed, max_attempts),
        }
    }
}

/// A finite, duplicate-free collection of members of one uncertainty set.
#[derive(Debug, Clone)]
pub struct ScenarioPool {
    spec: UncertaintySpec,
    scenarios: Vec<Scenario>,
}

impl ScenarioPool {
    pub fn new(spec: UncertaintySpec) -> Self {
        Self {
            spec,
            scenarios: Vec::new(),
        }
    }

    /// A pool holding only the no-deviation scenario.
    pub fn with_zero_scenario(spec: UncertaintySpec) -> Self {
        let mut pool = Self::new(spec);
        pool.scenarios.push(Scenario::zeros(spec.slots));
        pool
    }

    pub fn spec(&self) -> &UncertaintySpec {
        &self.spec
    }

    /// Adds a member. Returns `Ok(false)` for a duplicate and an error for a
    /// scenario outside the set.
    pub fn insert(&mut self, s: Scenario) -> Result<bool> {
        if let Membership::Violations(v) = membership(&self.spec, &s)? {
            return Err(invalid(
                "scenario",
                format!("not a member of the uncertainty set: {v:?}"),
            ));
        }
        if self.contains(&s) {
            return Ok(false);
        }
        self.scenarios.push(s);
        Ok(true)
    }

    pub fn contains(&self, s: &Scenario) -> bool {
        self.scenarios.iter().any(|p| p.same_as(s))
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// `a;b;c` list of microradian values in round-trip scientific notation.
pub fn format_microrad_list(s: &Scenario) -> String {
    s.to_microrad()
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One CSV row of `T` microradian values.
pub fn scenario_csv_row(s: &Scenario) -> String {
    s.to_microrad()
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_scenario_row(line: &str) -> Result<Scenario> {
    let values = line
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{f:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::from_microrad(&values)
}

/// Writes a pool as CSV with a `d1,...,dT` header, values in microradians.
pub fn write_pool<W: Write>(mut out: W, pool: &ScenarioPool) -> Result<()> {
    let header = (1..=pool.spec.slots)
        .map(|t| format!("d{t}"))
        .collect::<Vec<_>>()
        .join(",");
    writeln!(out, "{header}")?;
    for s in &pool.scenarios {
        writeln!(out, "{}", scenario_csv_row(s))?;
    }
    Ok(())
}

/// Reads a pool written by [`write_pool`], re-validating every row.
pub fn read_pool<R: BufRead>(input: R, spec: UncertaintySpec) -> Result<ScenarioPool> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))??;
    if header.split(',').count() != spec.slots {
        return Err(Error::Parse(format!(
            "header has {} columns, expected {}",
            header.split(',').count(),
            spec.slots
        )));
    }
    let mut pool = ScenarioPool::new(spec);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pool.insert(parse_scenario_row(&line)?)?;
    }
    Ok(pool)
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.to_microrad().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "] urad")
    }
}
