//! Nonuniform time grids for emission times and detection delays.
//!
//! Both grid kinds share one construction: a dense region resolving the
//! drive pulse, a geometric stretch, and a uniform tail that resolves the
//! fastest decay (and, on delay grids, any detuning beat) out to a fixed
//! number of lifetimes of the slowest emitter. Trapezoid weights are stored
//! alongside the nodes so integrals over either axis are a dot product.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::trapezoid_weights;
use crate::tls::PulseSpec;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid nodes must be finite and strictly ascending (index {0})")]
    NotAscending(usize),
    #[error("invalid grid request: {0}")]
    BadRequest(String),
}

/// Ascending time nodes with matching trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, GridError> {
        if nodes.len() < 2 {
            return Err(GridError::TooFewNodes(nodes.len()));
        }
        for i in 0..nodes.len() {
            if !nodes[i].is_finite() || (i > 0 && nodes[i] <= nodes[i - 1]) {
                return Err(GridError::NotAscending(i));
            }
        }
        let weights = trapezoid_weights(&nodes);
        Ok(TimeGrid { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }

    /// Number of leading nodes with node value <= t (tolerating roundoff).
    pub fn prefix_len(&self, t: f64) -> usize {
        let eps = 1e-12 * (1.0 + t.abs());
        self.nodes.partition_point(|&x| x <= t + eps)
    }
}

/// Resolution and extent knobs, all dimensionless multiples of the physical
/// scales they refine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    /// Dense step during the pulse: sigma / this.
    pub pulse_step_divisor: f64,
    /// Tail step in units of the fastest lifetime: this / gamma_max.
    pub tail_step: f64,
    /// Geometric ratio between dense and tail steps.
    pub stretch_ratio: f64,
    /// Grid extent past the last pulse in slowest lifetimes: this / gamma_min.
    pub tail_extent: f64,
    /// Steps per radian of the fastest explicit oscillation:
    /// step <= 1 / (this * max_frequency).
    pub oscillation_points: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            pulse_step_divisor: 8.0,
            tail_step: 0.05,
            stretch_ratio: 1.08,
            tail_extent: 12.0,
            oscillation_points: 10.0,
        }
    }
}

impl GridSettings {
    fn validate(&self) -> Result<(), GridError> {
        let ok = self.pulse_step_divisor >= 1.0
            && self.tail_step > 0.0
            && self.stretch_ratio > 1.0
            && self.tail_extent > 0.0
            && self.oscillation_points > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GridError::BadRequest(format!("bad settings {self:?}")))
        }
    }

    fn tail_cap(&self, gamma_max: f64, max_frequency: f64) -> f64 {
        let mut cap = self.tail_step / gamma_max;
        if max_frequency > 0.0 {
            cap = cap.min(1.0 / (self.oscillation_points * max_frequency));
        }
        cap
    }
}

/// dense [start, dense_end] at `fine`, then per stage a geometric stretch
/// up to that stage's cap followed by uniform steps until the stage
/// boundary. Stages are (boundary, cap) pairs with ascending boundaries
/// and non-decreasing caps; the last boundary is the grid end and lands on
/// an exact node, as does `dense_end`.
fn build_nodes(
    start: f64,
    dense_end: f64,
    fine: f64,
    ratio: f64,
    stages: &[(f64, f64)],
) -> Vec<f64> {
    let end = stages.last().unwrap().0;
    let fine = fine.min(stages[0].1);
    let dense_span = dense_end - start;
    let n_dense = (dense_span / fine).ceil().max(1.0) as usize;
    let mut nodes: Vec<f64> = (0..=n_dense)
        .map(|i| start + dense_span * i as f64 / n_dense as f64)
        .collect();

    let mut h = fine;
    let mut t = dense_end;
    for (s, &(boundary, cap)) in stages.iter().enumerate() {
        let boundary = boundary.min(end);
        let last = s == stages.len() - 1;
        while h < cap {
            h = (h * ratio).min(cap);
            let next = t + h;
            if next >= boundary {
                break;
            }
            nodes.push(next);
            t = next;
        }
        if t >= boundary {
            continue;
        }
        if last {
            // land exactly on the end
            let n_tail = ((boundary - t) / cap).ceil().max(1.0) as usize;
            let step = (boundary - t) / n_tail as f64;
            nodes.extend((1..=n_tail).map(|i| t + step * i as f64));
            t = boundary;
        } else {
            while t + cap < boundary {
                t += cap;
                nodes.push(t);
            }
        }
    }
    // stretch arithmetic can leave near-duplicate neighbors; drop them
    nodes.dedup_by(|b, a| *b - *a < 1e-13 * (1.0 + a.abs()));
    nodes
}

/// Step-cap stages past the dense region: resolve the fastest decay until
/// it has died out (e^-35 of its start), then relax to the slowest decay's
/// scale. Any explicit oscillation must stay resolved throughout.
fn tail_stages(
    dense_end: f64,
    end: f64,
    gamma_min: f64,
    gamma_max: f64,
    max_frequency: f64,
    s: &GridSettings,
) -> Vec<(f64, f64)> {
    let cap_fast = s.tail_cap(gamma_max, max_frequency);
    let cap_slow = s.tail_cap(gamma_min, max_frequency);
    let relax_at = dense_end + 35.0 / gamma_max;
    if cap_slow > 1.5 * cap_fast && relax_at < end {
        vec![(relax_at, cap_fast), (end, cap_slow)]
    } else {
        vec![(end, cap_fast)]
    }
}

/// Sort and merge overlapping or touching intervals.
fn merged_windows(mut spans: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Dense sampling on each window, stage-capped steps across the gaps and
/// the final tail out to `end`. Windows must be merged and sorted.
fn island_nodes(
    windows: &[(f64, f64)],
    fine: f64,
    end: f64,
    gamma_min: f64,
    gamma_max: f64,
    max_frequency: f64,
    s: &GridSettings,
) -> Vec<f64> {
    let mut nodes: Vec<f64> = Vec::new();
    for (i, &(ws, we)) in windows.iter().enumerate() {
        let stop = windows.get(i + 1).map_or(end, |n| n.0);
        let stages = tail_stages(we, stop, gamma_min, gamma_max, max_frequency, s);
        let seg = build_nodes(ws, we, fine, s.stretch_ratio, &stages);
        let skip = usize::from(!nodes.is_empty());
        nodes.extend(seg.into_iter().skip(skip));
    }
    nodes
}

fn check_gammas(gamma_min: f64, gamma_max: f64) -> Result<(), GridError> {
    if !(gamma_min > 0.0) || gamma_max < gamma_min {
        return Err(GridError::BadRequest(format!(
            "need 0 < gamma_min <= gamma_max, got {gamma_min}, {gamma_max}"
        )));
    }
    Ok(())
}

/// Grid over emission times. Dense across each pulse support, coarse
/// between well-separated pulses, extends until every emitter has decayed
/// away after the last pulse.
pub fn emission_grid(
    pulses: &[PulseSpec],
    gamma_min: f64,
    gamma_max: f64,
    max_frequency: f64,
    s: &GridSettings,
) -> Result<TimeGrid, GridError> {
    s.validate()?;
    if pulses.is_empty() {
        return Err(GridError::BadRequest("no pulses given".into()));
    }
    check_gammas(gamma_min, gamma_max)?;
    let windows =
        merged_windows(pulses.iter().map(|p| (p.support_start(), p.support_end())).collect());
    let sigma_min = pulses.iter().map(|p| p.sigma()).fold(f64::MAX, f64::min);
    let fine = sigma_min / s.pulse_step_divisor;
    let end = windows.last().unwrap().1 + s.tail_extent / gamma_min;
    TimeGrid::from_nodes(island_nodes(&windows, fine, end, gamma_min, gamma_max, max_frequency, s))
}

/// Grid over detection delays tau >= 0. The prefix (the stored part of
/// every correlator row) must cover the window in which any emission-time
/// row still overlaps a pulse; past it all correlators evolve freely and
/// coarse sampling suffices.
pub fn delay_grid(
    prefix_span: f64,
    sigma_min: f64,
    gamma_min: f64,
    gamma_max: f64,
    max_frequency: f64,
    s: &GridSettings,
) -> Result<TimeGrid, GridError> {
    delay_grid_windows(&[(0.0, prefix_span)], prefix_span, sigma_min, gamma_min, gamma_max, max_frequency, s)
}

/// Delay grid with the dense sampling restricted to the given windows,
/// for pairs whose pulses are far apart: rows cross a pulse only for tau
/// inside a window, so the stretches between are sampled at the decay
/// scale. Windows must start at 0, ascend, and end at `prefix_span`.
pub fn delay_grid_windows(
    windows: &[(f64, f64)],
    prefix_span: f64,
    sigma_min: f64,
    gamma_min: f64,
    gamma_max: f64,
    max_frequency: f64,
    s: &GridSettings,
) -> Result<TimeGrid, GridError> {
    s.validate()?;
    if !(prefix_span > 0.0) || !(sigma_min > 0.0) {
        return Err(GridError::BadRequest(format!(
            "need positive prefix_span and sigma, got {prefix_span}, {sigma_min}"
        )));
    }
    check_gammas(gamma_min, gamma_max)?;
    let windows = merged_windows(windows.to_vec());
    let sane = windows.first().is_some_and(|w| w.0 == 0.0)
        && windows.iter().all(|w| w.1 > w.0)
        && windows.last().is_some_and(|w| (w.1 - prefix_span).abs() <= 1e-9 * prefix_span);
    if !sane {
        return Err(GridError::BadRequest(format!(
            "delay windows {windows:?} must run from 0 to the prefix span {prefix_span}"
        )));
    }
    let fine = sigma_min / s.pulse_step_divisor;
    let end = prefix_span + s.tail_extent / gamma_min;
    TimeGrid::from_nodes(island_nodes(&windows, fine, end, gamma_min, gamma_max, max_frequency, s))
}

/// Grid shape summary attached to run outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_time: usize,
    pub n_delay: usize,
    pub time_start: f64,
    pub time_end: f64,
    pub delay_end: f64,
}

impl GridMeta {
    pub fn of(time: &TimeGrid, delay: &TimeGrid) -> Self {
        GridMeta {
            n_time: time.len(),
            n_delay: delay.len(),
            time_start: time.first(),
            time_end: time.last(),
            delay_end: delay.last(),
        }
    }
}
