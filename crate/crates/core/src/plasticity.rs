//! Adapting synapses: a look-back window over spike trains and the
//! four-case strengthen/weaken rule.
//!
//! A synapse carries exactly the spikes of its presynaptic neuron, so the
//! history keeps one shift register per neuron (bit 0 = latest tick) and
//! every synapse reads its presynaptic register.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigReport;
use crate::neurons::NeuronState;
use crate::synapses::SynapseGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlasticityParams {
    /// Look-back window in ticks.
    pub window: usize,
    /// High-frequency criterion, as a fraction of the window.
    pub f_hi: f64,
    /// Low-rate criterion for the postsynaptic neuron.
    pub f_lo: f64,
    pub delta_w: f64,
    /// Minimum share of presynaptic spikes followed by a postsynaptic spike one tick later.
    pub corr_min: f64,
    pub update_period: u64,
    /// Only update synapses whose covering astrocyte is active.
    pub gate_by_astro_active: bool,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        Self {
            window: 20,
            f_hi: 0.25,
            f_lo: 0.1,
            delta_w: 0.02,
            corr_min: 0.5,
            update_period: 20,
            gate_by_astro_active: false,
        }
    }
}

impl PlasticityParams {
    pub(crate) fn check(&self, report: &mut ConfigReport) {
        if self.window == 0 || self.window > SpikeHistory::MAX_WINDOW {
            report.push(
                "plasticity.window",
                format!("must lie in 1..={}", SpikeHistory::MAX_WINDOW),
            );
        }
        if !(self.f_hi > 0.0 && self.f_hi <= 1.0) {
            report.push("plasticity.f_hi", "must lie in (0, 1]");
        }
        if !(self.f_lo >= 0.0 && self.f_lo < 1.0) {
            report.push("plasticity.f_lo", "must lie in [0, 1)");
        }
        if self.f_lo >= self.f_hi {
            report.push("plasticity.f_lo", "must be below plasticity.f_hi");
        }
        if !(self.delta_w >= 0.0 && self.delta_w <= 0.1) {
            report.push("plasticity.delta_w", "must lie in [0, 0.1]");
        }
        if !(self.corr_min > 0.0 && self.corr_min <= 1.0) {
            report.push("plasticity.corr_min", "must lie in (0, 1]");
        }
        if self.update_period == 0 {
            report.push("plasticity.update_period", "must be positive");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    ExcitationSuccess,
    ExcitationFailure,
    InhibitionSuccess,
    InhibitionFailure,
    NoChange,
}

impl Outcome {
    pub fn strengthens(self) -> bool {
        matches!(self, Self::ExcitationSuccess | Self::InhibitionSuccess)
    }

    pub fn weakens(self) -> bool {
        matches!(self, Self::ExcitationFailure | Self::InhibitionFailure)
    }
}

/// Per-neuron firing registers holding the last `window + 1` ticks.
#[derive(Debug, Clone)]
pub struct SpikeHistory {
    window: usize,
    bits: Vec<u64>,
    recorded: usize,
}

impl SpikeHistory {
    pub const MAX_WINDOW: usize = 63;

    pub fn new(n: usize, window: usize) -> Self {
        assert!((1..=Self::MAX_WINDOW).contains(&window));
        Self {
            window,
            bits: vec![0; n],
            recorded: 0,
        }
    }

    fn mask(&self) -> u64 {
        (1u64 << self.window) - 1
    }

    fn capacity(&self) -> usize {
        self.window + 1
    }

    /// Appends one tick of firing observations.
    pub fn record(&mut self, fired: &NeuronState) {
        assert_eq!(fired.len(), self.bits.len());
        let keep = (1u64 << self.capacity()) - 1;
        for (b, &v) in self.bits.iter_mut().zip(&fired.values) {
            *b = ((*b << 1) | u64::from(v == 1)) & keep;
        }
        self.recorded += 1;
    }

    /// Entries held per neuron (saturates at `window + 1`).
    pub fn len(&self) -> usize {
        self.recorded.min(self.capacity())
    }

    pub fn is_empty(&self) -> bool {
        self.recorded == 0
    }

    /// True once a full window plus the following tick is available.
    pub fn is_full(&self) -> bool {
        self.recorded >= self.capacity()
    }

    /// The spike train a synapse from `source` saw over the window, oldest first.
    pub fn presyn_buffer(&self, source: usize) -> Vec<bool> {
        let held = self.recorded.min(self.window);
        (0..held)
            .rev()
            .map(|k| self.bits[source] >> k & 1 == 1)
            .collect()
    }

    /// Presynaptic spike frequency over the `window` ticks before the latest one.
    pub fn pre_freq(&self, source: usize) -> f64 {
        f64::from(((self.bits[source] >> 1) & self.mask()).count_ones()) / self.window as f64
    }

    /// Firing frequency over the latest `window` ticks.
    pub fn post_freq(&self, target: usize) -> f64 {
        f64::from((self.bits[target] & self.mask()).count_ones()) / self.window as f64
    }

    /// Share of `source`'s spikes that `target` followed one tick later.
    pub fn correlation(&self, source: usize, target: usize) -> f64 {
        let pre = (self.bits[source] >> 1) & self.mask();
        let n_pre = pre.count_ones();
        if n_pre == 0 {
            return 0.0;
        }
        f64::from((pre & self.bits[target]).count_ones()) / f64::from(n_pre)
    }
}

/// The four-case rule.
pub fn classify(
    weight: f64,
    pre_freq: f64,
    post_freq: f64,
    corr: f64,
    params: &PlasticityParams,
) -> Outcome {
    if pre_freq < params.f_hi || weight == 0.0 {
        return Outcome::NoChange;
    }
    if weight > 0.0 {
        if post_freq >= params.f_hi && corr >= params.corr_min {
            Outcome::ExcitationSuccess
        } else {
            Outcome::ExcitationFailure
        }
    } else if post_freq <= params.f_lo {
        Outcome::InhibitionSuccess
    } else {
        Outcome::InhibitionFailure
    }
}

/// Classifies every synapse; `gate[e] == false` forces `NoChange`.
pub fn classify_all(
    graph: &SynapseGraph,
    history: &SpikeHistory,
    params: &PlasticityParams,
    gate: Option<&[bool]>,
) -> Vec<Outcome> {
    let targets = graph.edge_targets();
    let (src, w) = (graph.sources(), graph.weights());
    (0..graph.edge_count())
        .into_par_iter()
        .map(|e| {
            if gate.is_some_and(|g| !g[e]) {
                return Outcome::NoChange;
            }
            let (s, t) = (src[e] as usize, targets[e] as usize);
            classify(
                w[e],
                history.pre_freq(s),
                history.post_freq(t),
                history.correlation(s, t),
                params,
            )
        })
        .collect()
}

/// One row of the plasticity log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateReport {
    pub t: u64,
    pub n_strengthened: usize,
    pub n_weakened: usize,
    pub mean_abs_weight: f64,
}

fn adjust(w: f64, outcome: Outcome, delta: f64) -> f64 {
    // a weight clamped to zero has lost its sign class and stays silent
    if w == 0.0 {
        return w;
    }
    let step = if outcome.strengthens() {
        delta
    } else if outcome.weakens() {
        -delta
    } else {
        return w;
    };
    if w > 0.0 {
        (w + step).clamp(0.0, 1.0)
    } else {
        (w - step).clamp(-1.0, 0.0)
    }
}

/// Moves each weight's magnitude by `delta_w` per its outcome, never flipping sign.
pub fn apply(
    graph: &mut SynapseGraph,
    outcomes: &[Outcome],
    params: &PlasticityParams,
    t: u64,
) -> UpdateReport {
    assert_eq!(outcomes.len(), graph.edge_count());
    let mut report = UpdateReport {
        t,
        n_strengthened: 0,
        n_weakened: 0,
        mean_abs_weight: 0.0,
    };
    for (w, &o) in graph.weights_mut().iter_mut().zip(outcomes) {
        let next = adjust(*w, o, params.delta_w);
        if next != *w {
            if o.strengthens() {
                report.n_strengthened += 1;
            } else {
                report.n_weakened += 1;
            }
        }
        *w = next;
    }
    let ws = graph.weights();
    if !ws.is_empty() {
        report.mean_abs_weight = ws.iter().map(|w| w.abs()).sum::<f64>() / ws.len() as f64;
    }
    report
}
