//! Run-level observables: limit-cycle detection and summaries.

use serde::Serialize;

use crate::config::Model;
use crate::synapses::WeightStats;
use crate::trace::{CalciumLedger, SimTrace};
use crate::Tick;

/// Compatibility values at or below this count as balanced.
pub const CMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub period: Option<usize>,
    pub onset: Option<Tick>,
    pub method: String,
}

const CYCLE_METHOD: &str =
    "exact state recurrence over the recorded tail, at least two full periods";

/// Finds the smallest period `p <= max_period` that holds from some onset
/// through the end of `history`, together with its earliest onset.
///
/// `history[k]` is the state at tick `k`. A period only counts if the
/// recurrence is observed over at least two full periods.
pub fn detect_cycle<S: PartialEq>(history: &[S], max_period: usize) -> CycleReport {
    let none = CycleReport {
        period: None,
        onset: None,
        method: CYCLE_METHOD.into(),
    };
    if history.is_empty() || max_period == 0 {
        return none;
    }
    let last = history.len() - 1;
    for p in 1..=max_period.min(last) {
        let mut onset = last - p + 1;
        while onset > 0 && history[onset - 1] == history[onset - 1 + p] {
            onset -= 1;
        }
        if last - onset >= 2 * p {
            return CycleReport {
                period: Some(p),
                onset: Some(onset as Tick),
                method: CYCLE_METHOD.into(),
            };
        }
    }
    none
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmpStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: Model,
    pub seed: u64,
    pub config_hash: String,
    pub n_neurons: usize,
    pub t_max: usize,
    pub mean_firing_fraction: f64,
    /// Model A only.
    pub cmp: Option<CmpStats>,
    /// Share of ticks with nonzero compatibility (model A only).
    pub incompatible_fraction: Option<f64>,
    pub cycle: CycleReport,
    pub final_weights: Option<WeightStats>,
    pub calcium: Option<CalciumLedger>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn cmp_stats(values: &[f64]) -> Option<CmpStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(CmpStats {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    })
}

/// Aggregates a trace. `max_period` bounds the cycle search.
pub fn summarize(trace: &SimTrace, max_period: usize) -> Summary {
    let t_max = trace.records.len();
    let mean_firing_fraction = if t_max == 0 {
        0.0
    } else {
        trace
            .records
            .iter()
            .map(|r| r.firing_total as f64)
            .sum::<f64>()
            / (t_max as f64 * trace.n_neurons as f64)
    };
    let cmps: Vec<f64> = trace
        .records
        .iter()
        .filter_map(|r| r.vascular.as_ref().map(|v| v.cmp))
        .collect();
    let incompatible_fraction = (!cmps.is_empty())
        .then(|| cmps.iter().filter(|&&c| c > CMP_EPS).count() as f64 / cmps.len() as f64);
    Summary {
        model: trace.model,
        seed: trace.seed,
        config_hash: trace.config_hash.clone(),
        n_neurons: trace.n_neurons,
        t_max,
        mean_firing_fraction,
        cmp: cmp_stats(&cmps),
        incompatible_fraction,
        cycle: detect_cycle(&trace.states, max_period),
        final_weights: trace.final_weights,
        calcium: trace.calcium,
    }
}
