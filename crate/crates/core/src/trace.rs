//! Per-tick records and their CSV forms.
//!
//! Schemas (header row first, fixed column order, reals with 17 significant
//! digits):
//!
//! * model A `trace.csv`: `t,cmp,flow_1..flow_30,firing_branch_mean,firing_total`
//! * model B `trace.csv`: `t,firing_total,firing_fraction,row_1..row_L,weight_mean,mean_abs_weight`
//! * model B `astro.csv`: `t,n_active_astro,mean_state,n_overactive,queue_depth`
//! * model B `plasticity.csv`: `t,n_strengthened,n_weakened,mean_abs_weight`
//! * `states.csv`: `t,n_1..n_N` with `0/1` (binary) or `-1/1` (bipolar) entries

use std::fmt::Write as _;

use serde::Serialize;

use crate::astro::AstroSummary;
use crate::capillary::N_BRANCHES;
use crate::config::Model;
use crate::neurons::Encoding;
use crate::plasticity::UpdateReport;
use crate::synapses::WeightStats;
use crate::Tick;

pub const SCHEMA_VERSION: u32 = 1;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct VascularRecord {
    pub cmp: f64,
    pub flows: [f64; N_BRANCHES],
    pub branch_counts: [u16; N_BRANCHES],
}

impl VascularRecord {
    /// Average firing count per branch.
    pub fn firing_branch_mean(&self) -> f64 {
        self.branch_counts
            .iter()
            .map(|&c| f64::from(c))
            .sum::<f64>()
            / N_BRANCHES as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlialRecord {
    /// Firing neurons in each lattice row.
    pub rows: Vec<u16>,
    pub astro: AstroSummary,
    pub weight_mean: f64,
    pub mean_abs_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: Tick,
    pub firing_total: usize,
    pub vascular: Option<VascularRecord>,
    pub glial: Option<GlialRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CalciumLedger {
    pub enqueued: u64,
    pub delivered: u64,
    pub in_flight: u64,
}

/// Everything recorded during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub model: Model,
    pub n_neurons: usize,
    pub seed: u64,
    pub config_hash: String,
    pub encoding: Encoding,
    /// One record per tick `1..=t_max`.
    pub records: Vec<TickRecord>,
    /// Firing bits per tick, `states[k]` is tick `k` (index 0 is the initial state).
    pub states: Vec<Vec<u8>>,
    pub plasticity_log: Vec<UpdateReport>,
    pub calcium: Option<CalciumLedger>,
    /// Weight statistics at run end (model B).
    pub final_weights: Option<WeightStats>,
}

impl SimTrace {
    pub fn trace_csv(&self) -> String {
        match self.model {
            Model::Neurovascular => self.vascular_csv(),
            Model::Neuroglial | Model::PureNeuron => self.glial_csv(),
        }
    }

    fn vascular_csv(&self) -> String {
        let mut out = String::from("t,cmp");
        for b in 1..=N_BRANCHES {
            let _ = write!(out, ",flow_{b}");
        }
        out.push_str(",firing_branch_mean,firing_total\n");
        for r in &self.records {
            let v = r.vascular.as_ref().expect("model A record");
            let _ = write!(out, "{},{}", r.t, fmt_real(v.cmp));
            for f in &v.flows {
                let _ = write!(out, ",{}", fmt_real(*f));
            }
            let _ = writeln!(
                out,
                ",{},{}",
                fmt_real(v.firing_branch_mean()),
                r.firing_total
            );
        }
        out
    }

    fn glial_csv(&self) -> String {
        let n_rows = self
            .records
            .first()
            .and_then(|r| r.glial.as_ref())
            .map_or(0, |g| g.rows.len());
        let mut out = String::from("t,firing_total,firing_fraction");
        for u in 1..=n_rows {
            let _ = write!(out, ",row_{u}");
        }
        out.push_str(",weight_mean,mean_abs_weight\n");
        for r in &self.records {
            let g = r.glial.as_ref().expect("model B record");
            let frac = r.firing_total as f64 / self.n_neurons as f64;
            let _ = write!(out, "{},{},{}", r.t, r.firing_total, fmt_real(frac));
            for c in &g.rows {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(
                out,
                ",{},{}",
                fmt_real(g.weight_mean),
                fmt_real(g.mean_abs_weight)
            );
        }
        out
    }

    /// `None` for model A.
    pub fn astro_csv(&self) -> Option<String> {
        if !self.model.is_b() {
            return None;
        }
        let mut out = String::from("t,n_active_astro,mean_state,n_overactive,queue_depth\n");
        for r in &self.records {
            let a = r.glial.as_ref()?.astro;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.t,
                a.n_active,
                fmt_real(a.mean_state),
                a.n_overactive,
                a.queue_depth
            );
        }
        Some(out)
    }

    /// `None` for model A.
    pub fn plasticity_csv(&self) -> Option<String> {
        if !self.model.is_b() {
            return None;
        }
        let mut out = String::from("t,n_strengthened,n_weakened,mean_abs_weight\n");
        for u in &self.plasticity_log {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                u.t,
                u.n_strengthened,
                u.n_weakened,
                fmt_real(u.mean_abs_weight)
            );
        }
        Some(out)
    }

    pub fn states_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.n_neurons {
            let _ = write!(out, ",n_{i}");
        }
        out.push('\n');
        let off = match self.encoding {
            Encoding::Bipolar => "-1",
            Encoding::Binary => "0",
        };
        for (t, s) in self.states.iter().enumerate() {
            out.push_str(&t.to_string());
            for &b in s {
                out.push(',');
                out.push_str(if b == 1 { "1" } else { off });
            }
            out.push('\n');
        }
        out
    }
}
