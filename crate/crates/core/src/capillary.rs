//! Thirty-branch capillary tree with activity-triggered dilation.
//!
//! Branches are numbered `1..=30`. Branch `j` in `1..=14` is a joint whose
//! children are `2j + 1` and `2j + 2`, which gives two roots (1, 2) and four
//! layers of 2, 4, 8 and 16 branches. Baseline flow halves at every split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigReport, Result, SimError};
use crate::rng::RngStream;
use crate::Tick;

pub const N_BRANCHES: usize = 30;
pub const N_JOINTS: usize = 14;
const ROOT_FLOW: f64 = 800.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapillaryParams {
    /// A branch triggers when strictly more than this many of its neurons fire.
    pub n_firing: usize,
    /// Ticks from trigger to dilation onset.
    pub delta_t: Tick,
    /// Dilation length in ticks.
    pub d_c: Tick,
    pub dilation_factor: f64,
    /// Randomize which neurons supply which branch.
    pub shuffle_assignment: bool,
}

impl Default for CapillaryParams {
    fn default() -> Self {
        Self {
            n_firing: 20,
            delta_t: 2,
            d_c: 20,
            dilation_factor: 4.0,
            shuffle_assignment: false,
        }
    }
}

impl CapillaryParams {
    pub(crate) fn check(&self, per_branch: usize, report: &mut ConfigReport) {
        if self.n_firing == 0 {
            report.push("capillary.n_firing", "must be positive");
        }
        if self.n_firing > per_branch {
            report.push(
                "capillary.n_firing",
                format!("must not exceed the {per_branch} neurons per branch"),
            );
        }
        if self.d_c == 0 {
            report.push("capillary.d_c", "must be positive");
        }
        if !(self.dilation_factor.is_finite() && self.dilation_factor > 0.0) {
            report.push("capillary.dilation_factor", "must be a positive real");
        }
    }
}

/// Baseline flow of a 1-based branch index.
pub fn baseline_flow(branch: usize) -> f64 {
    assert!((1..=N_BRANCHES).contains(&branch));
    // layer k (0-based) holds branches 2^(k+1)-1 ..= 2^(k+2)-2
    let layer = (branch + 1).ilog2() - 1;
    ROOT_FLOW / f64::from(1u32 << layer)
}

/// Sum over the 14 joints of `|flow_j - flow_{2j+1} - flow_{2j+2}|`.
///
/// `flows[k]` is the flow of branch `k + 1`.
pub fn compatibility_of(flows: &[f64; N_BRANCHES]) -> f64 {
    (1..=N_JOINTS)
        .map(|j| (flows[j - 1] - flows[2 * j] - flows[2 * j + 1]).abs())
        .sum()
}

#[derive(Debug, Clone)]
pub struct CapillaryTree {
    baseline: [f64; N_BRANCHES],
    dilated_until: [Option<Tick>; N_BRANCHES],
    /// activation tick -> branches (0-based) activating then
    pending: BTreeMap<Tick, Vec<usize>>,
    supplied: Vec<Vec<usize>>,
    now: Tick,
    factor: f64,
}

impl CapillaryTree {
    /// Builds the tree and assigns `n_neurons / 30` neurons to each branch.
    ///
    /// Assignment is contiguous unless `params.shuffle_assignment` is set.
    pub fn build(n_neurons: usize, params: &CapillaryParams, rng: &mut RngStream) -> Result<Self> {
        if n_neurons == 0 || !n_neurons.is_multiple_of(N_BRANCHES) {
            return Err(SimError::BranchDivisibility {
                n: n_neurons,
                branches: N_BRANCHES,
            });
        }
        let mut order: Vec<usize> = (0..n_neurons).collect();
        if params.shuffle_assignment {
            order.shuffle(rng);
        }
        let per = n_neurons / N_BRANCHES;
        let supplied = order.chunks(per).map(<[usize]>::to_vec).collect();
        let mut baseline = [0.0; N_BRANCHES];
        for (k, b) in baseline.iter_mut().enumerate() {
            *b = baseline_flow(k + 1);
        }
        Ok(Self {
            baseline,
            dilated_until: [None; N_BRANCHES],
            pending: BTreeMap::new(),
            supplied,
            now: 0,
            factor: params.dilation_factor,
        })
    }

    /// Neurons supplied by the 1-based `branch`.
    pub fn supplied(&self, branch: usize) -> &[usize] {
        &self.supplied[branch - 1]
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Registers the firing counts seen at tick `t` and activates any dilation due at `t`.
    pub fn observe_firing(&mut self, counts: &[usize], t: Tick, params: &CapillaryParams) {
        assert_eq!(counts.len(), N_BRANCHES);
        for (k, &c) in counts.iter().enumerate() {
            if c > params.n_firing {
                self.pending.entry(t + params.delta_t).or_default().push(k);
            }
        }
        self.advance_to(t, params.d_c);
    }

    /// Activates every pending dilation with activation tick `<= t`.
    pub fn advance_to(&mut self, t: Tick, d_c: Tick) {
        while let Some(entry) = self.pending.first_entry() {
            if *entry.key() > t {
                break;
            }
            let (at, branches) = entry.remove_entry();
            let until = at + d_c - 1;
            for k in branches {
                let slot = &mut self.dilated_until[k];
                *slot = Some(slot.map_or(until, |u| u.max(until)));
            }
        }
        self.now = self.now.max(t);
    }

    pub fn is_dilated(&self, branch: usize, t: Tick) -> bool {
        self.dilated_until[branch - 1].is_some_and(|u| u >= t)
    }

    pub fn current_flow(&self, branch: usize, t: Tick) -> f64 {
        let base = self.baseline[branch - 1];
        if self.is_dilated(branch, t) {
            base * self.factor
        } else {
            base
        }
    }

    pub fn flow_snapshot(&self, t: Tick) -> [f64; N_BRANCHES] {
        let mut out = [0.0; N_BRANCHES];
        for (k, f) in out.iter_mut().enumerate() {
            *f = self.current_flow(k + 1, t);
        }
        out
    }

    pub fn compatibility(&self, t: Tick) -> f64 {
        compatibility_of(&self.flow_snapshot(t))
    }

    pub fn pending_len(&self) -> usize {
        self.pending.values().map(Vec::len).sum()
    }
}
