//! Worst-case deviation scenario for a fixed divergence angle.
//!
//! Deviations are restricted to multiples of a step `delta`. A scenario then
//! corresponds to a source-to-sink path through a layered graph whose layer
//! `t` holds one node per reachable deviation index `0..=t*G`, arcs join
//! indices at most `G` apart, each arc weighs the slot rate at its
//! destination deviation and consumes the destination index as resource.
//! The minimum sum rate is the shortest path whose resource stays within
//! `B = floor(d_total / delta)`, found here by a backward dynamic program over
//! `(slot, index, budget used)` states.
//!
//! Ties between equal-rate paths go to the lexicographically largest index
//! sequence. Path costs are compared on weights quantized to a common
//! fixed-point grid (2^-48 of the largest weight), so equal multisets of
//! weights always compare equal regardless of summation order.

use std::io::Write;

use crate::beam::{slot_rate, Angle, Deviation, LinkParams};
use crate::error::{invalid, Error, Result};
use crate::uncertainty::{Scenario, UncertaintySpec};

/// Relative slack used when flooring `d_gap / delta` and `d_total / delta`.
const FLOOR_SLACK: f64 = 1e-9;
const QUANT_BITS: i32 = 48;
const UNREACHABLE: u64 = u64::MAX;

/// Largest number of candidate sequences [`brute_force_worst_case`] accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Deviation step and the derived gap and budget step counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationGrid {
    step: f64,
    gap_steps: usize,
    budget_steps: usize,
}

impl DeviationGrid {
    pub fn new(spec: &UncertaintySpec, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(
                "deviation_step",
                format!("must be positive, got {step}"),
            ));
        }
        let gap_steps = floor_ratio(spec.d_gap(), step);
        let budget_steps = floor_ratio(spec.d_total(), step);
        if gap_steps < 1 {
            return Err(invalid(
                "deviation_step",
                format!("step {step} rad exceeds d_gap {} rad", spec.d_gap()),
            ));
        }
        if budget_steps >= spec.slots() * gap_steps {
            return Err(invalid(
                "deviation_step",
                format!(
                    "budget steps {budget_steps} must be below T * G = {}",
                    spec.slots() * gap_steps
                ),
            ));
        }
        Ok(Self {
            step,
            gap_steps,
            budget_steps,
        })
    }

    /// Ten steps per gap.
    pub fn default_for(spec: &UncertaintySpec) -> Result<Self> {
        Self::new(spec, spec.d_gap() / 10.0)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn gap_steps(&self) -> usize {
        self.gap_steps
    }

    pub fn budget_steps(&self) -> usize {
        self.budget_steps
    }

    pub fn deviation(&self, index: usize) -> Deviation {
        Deviation::from_rad(index as f64 * self.step).expect("grid deviations are non-negative")
    }

    /// Checks that the step counts agree with `spec`.
    pub fn check(&self, spec: &UncertaintySpec) -> Result<()> {
        let fresh = Self::new(spec, self.step)?;
        if fresh != *self {
            return Err(invalid(
                "deviation_grid",
                format!("inconsistent with uncertainty set: {self:?} vs {fresh:?}"),
            ));
        }
        Ok(())
    }
}

fn floor_ratio(x: f64, step: f64) -> usize {
    let r = x / step;
    (r * (1.0 + FLOOR_SLACK)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Source,
    /// Deviation index `index` in 1-based slot `slot`.
    Slot {
        slot: usize,
        index: usize,
    },
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: Node,
    pub to: Node,
    pub weight: f64,
    pub resource: usize,
}

/// The layered graph for one angle. Arc weights depend only on the
/// destination index, so one slot-rate evaluation per index is stored.
#[derive(Debug, Clone)]
pub struct LayeredGraph {
    slots: usize,
    gap_steps: usize,
    grid: DeviationGrid,
    theta: Angle,
    weights: Vec<f64>,
    quantized: Vec<u64>,
}

impl LayeredGraph {
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn theta(&self) -> Angle {
        self.theta
    }

    pub fn grid(&self) -> &DeviationGrid {
        &self.grid
    }

    /// Slot rate [bit/s] of any arc entering deviation index `index`.
    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn quantized(&self) -> &[u64] {
        &self.quantized
    }

    /// Number of nodes in 1-based slot `t`.
    pub fn layer_len(&self, t: usize) -> usize {
        1 + t * self.gap_steps
    }

    pub fn node_count(&self) -> usize {
        2 + (1..=self.slots).map(|t| self.layer_len(t)).sum::<usize>()
    }

    /// Successor indices of index `i` (or of the source when `i == 0` and
    /// `t == 0`) in slot `t + 1`.
    fn window(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.gap_steps)..=i + self.gap_steps
    }

    pub fn out_degree(&self, node: Node) -> usize {
        match node {
            Node::Source => self.gap_steps + 1,
            Node::Slot { slot, .. } if slot == self.slots => 1,
            Node::Slot { index, .. } => self.window(index).count(),
            Node::Sink => 0,
        }
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        let first = (0..=self.gap_steps).map(move |i| self.arc(Node::Source, 1, i));
        let middle = (1..self.slots).flat_map(move |t| {
            (0..self.layer_len(t)).flat_map(move |i| {
                self.window(i)
                    .map(move |j| self.arc(Node::Slot { slot: t, index: i }, t + 1, j))
            })
        });
        let last = (0..self.layer_len(self.slots)).map(move |i| Arc {
            from: Node::Slot {
                slot: self.slots,
                index: i,
            },
            to: Node::Sink,
            weight: 0.0,
            resource: 0,
        });
        first.chain(middle).chain(last)
    }

    fn arc(&self, from: Node, slot: usize, index: usize) -> Arc {
        Arc {
            from,
            to: Node::Slot { slot, index },
            weight: self.weights[index],
            resource: index,
        }
    }

    pub fn arc_count(&self) -> usize {
        self.arcs().count()
    }

    /// Writes `t,i,i_hat,weight_bit_per_s,resource`; the source is slot 0,
    /// arcs into the sink carry `sink` as target index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,i,i_hat,weight_bit_per_s,resource")?;
        for arc in self.arcs() {
            let (t, i) = match arc.from {
                Node::Source => (0, 0),
                Node::Slot { slot, index } => (slot, index),
                Node::Sink => unreachable!("sink has no out-arcs"),
            };
            let target = match arc.to {
                Node::Slot { index, .. } => index.to_string(),
                _ => "sink".to_string(),
            };
            writeln!(out, "{t},{i},{target},{:e},{}", arc.weight, arc.resource)?;
        }
        Ok(())
    }
}

/// Builds the layered graph at angle `theta`; one slot-rate evaluation per
/// deviation index.
pub fn build_graph(
    spec: &UncertaintySpec,
    grid: &DeviationGrid,
    params: &LinkParams,
    theta: Angle,
) -> Result<LayeredGraph> {
    grid.check(spec)?;
    let max_index = spec.slots() * grid.gap_steps;
    let weights = (0..=max_index)
        .map(|i| slot_rate(params, theta, grid.deviation(i)))
        .collect::<Result<Vec<_>>>()?;
    let quantized = quantize(&weights);
    Ok(LayeredGraph {
        slots: spec.slots(),
        gap_steps: grid.gap_steps,
        grid: *grid,
        theta,
        weights,
        quantized,
    })
}

fn quantize(weights: &[f64]) -> Vec<u64> {
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0; weights.len()];
    }
    let quantum = max * 2f64.powi(-QUANT_BITS);
    weights
        .iter()
        .map(|w| (w / quantum).round() as u64)
        .collect()
}

/// The adversary's scenario for one angle.
#[derive(Debug, Clone)]
pub struct AdversaryResult {
    pub theta: Angle,
    pub worst_scenario: Scenario,
    /// Deviation index per slot.
    pub indices: Vec<usize>,
    /// Sum rate [bit/s] of `worst_scenario`, accumulated in slot order.
    pub worst_sum_rate: f64,
    /// Budget steps consumed, `sum(indices)`.
    pub budget_used: usize,
    /// Largest slot-rate change between adjacent grid indices up to the
    /// largest index used [bit/s]; bounds the per-slot discretization error.
    pub grid_rate_jump: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RcsppStats {
    /// `(slot, index, budget)` states evaluated.
    pub states: usize,
}

/// Minimum-weight source-to-sink path with total resource at most `budget`.
pub fn solve_rcspp(graph: &LayeredGraph, budget: usize) -> AdversaryResult {
    solve_rcspp_with_stats(graph, budget).0
}

pub fn solve_rcspp_with_stats(
    graph: &LayeredGraph,
    budget: usize,
) -> (AdversaryResult, RcsppStats) {
    let slots = graph.slots;
    let g = graph.gap_steps;
    let wq = graph.quantized();
    let width = budget + 1;
    let mut stats = RcsppStats::default();

    // cost[t-1][i * width + b]: cheapest completion from node (t, i) having
    // consumed b steps including i itself.
    let mut cost: Vec<Vec<u64>> = (1..=slots)
        .map(|t| vec![UNREACHABLE; graph.layer_len(t) * width])
        .collect();
    for i in 0..graph.layer_len(slots).min(width) {
        for b in i..=budget {
            stats.states += 1;
            cost[slots - 1][i * width + b] = 0;
        }
    }
    for t in (1..slots).rev() {
        let (head, tail) = cost.split_at_mut(t);
        let here = &mut head[t - 1];
        let next = &tail[0];
        let next_len = graph.layer_len(t + 1);
        for i in 0..graph.layer_len(t).min(width) {
            for b in i..=budget {
                stats.states += 1;
                let mut best = UNREACHABLE;
                for j in graph.window(i) {
                    if j >= next_len || b + j > budget {
                        break;
                    }
                    let rest = next[j * width + b + j];
                    if rest != UNREACHABLE {
                        best = best.min(wq[j] + rest);
                    }
                }
                here[i * width + b] = best;
            }
        }
    }

    // Forward decode, taking the largest index among equal-cost successors.
    let mut indices = Vec::with_capacity(slots);
    let mut used = 0usize;
    let mut prev: Option<usize> = None;
    for t in 1..=slots {
        let candidates = match prev {
            None => 0..=g,
            Some(i) => graph.window(i),
        };
        let layer_len = graph.layer_len(t);
        let mut choice: Option<(u64, usize)> = None;
        for j in candidates {
            if j >= layer_len || used + j > budget {
                break;
            }
            let rest = cost[t - 1][j * width + used + j];
            if rest == UNREACHABLE {
                continue;
            }
            let total = wq[j] + rest;
            if choice.is_none_or(|(c, _)| total <= c) {
                choice = Some((total, j));
            }
        }
        let (_, j) = choice.expect("the all-zero path is always feasible");
        indices.push(j);
        used += j;
        prev = Some(j);
    }
    (finish(graph, indices), stats)
}

fn finish(graph: &LayeredGraph, indices: Vec<usize>) -> AdversaryResult {
    let worst_scenario = Scenario::new(indices.iter().map(|&i| graph.grid.deviation(i)).collect());
    let worst_sum_rate = indices.iter().fold(0.0, |acc, &i| acc + graph.weights[i]);
    let top = indices.iter().copied().max().unwrap_or(0);
    let grid_rate_jump = graph.weights[..=top.min(graph.weights.len() - 1)]
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(0.0, f64::max);
    AdversaryResult {
        theta: graph.theta,
        worst_scenario,
        budget_used: indices.iter().sum(),
        indices,
        worst_sum_rate,
        grid_rate_jump,
    }
}

/// Exhaustive search over every grid sequence satisfying the set's
/// constraints. Reference for [`solve_rcspp`] on small instances.
pub fn brute_force_worst_case(
    spec: &UncertaintySpec,
    grid: &DeviationGrid,
    params: &LinkParams,
    theta: Angle,
) -> Result<AdversaryResult> {
    let slots = spec.slots();
    let g = grid.gap_steps;
    let sequences = ((1 + slots * g) as f64).powi(slots as i32);
    if sequences > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            sequences,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let graph = build_graph(spec, grid, params, theta)?;
    let budget = grid.budget_steps;
    let wq = graph.quantized();

    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut seq = vec![0usize; slots];
    // odometer over all index tuples in increasing lexicographic order
    loop {
        let feasible = seq[0] <= g
            && seq.windows(2).all(|w| w[0].abs_diff(w[1]) <= g)
            && seq.iter().sum::<usize>() <= budget;
        if feasible {
            let cost: u64 = seq.iter().map(|&i| wq[i]).sum();
            if best.as_ref().is_none_or(|(c, _)| cost <= *c) {
                best = Some((cost, seq.clone()));
            }
        }
        let mut k = slots;
        loop {
            if k == 0 {
                let (_, indices) = best.expect("the zero sequence is feasible");
                return Ok(finish(&graph, indices));
            }
            k -= 1;
            if seq[k] < slots * g {
                seq[k] += 1;
                break;
            }
            seq[k] = 0;
        }
    }
}
