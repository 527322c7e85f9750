//! Astrocyte grid: calcium links with distance delays, activation from
//! effective spikes plus accumulated calcium, and regulation of neuron input.
//!
//! Calcium packets travel on a timing wheel. Every link delay is at most
//! `round(delay_scale * cutoff)`, so a wheel with one more slot than the
//! largest delay never wraps onto an undelivered slot.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigReport, Result, SimError};
use crate::neurons::NeuronState;
use crate::rng::RngStream;
use crate::synapses::SynapseGraph;
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AstroParams {
    pub grid_side: usize,
    /// Link probability is `min(1, rho_scale / distance)`.
    pub rho_scale: f64,
    /// Delay ticks per unit distance.
    pub delay_scale: f64,
    /// No links beyond this distance.
    pub cutoff: f64,
    pub theta_act: f64,
    pub theta_over: f64,
    pub k_excite: f64,
    pub k_inhibit: f64,
    pub spike_gain: f64,
    pub ca_gain: f64,
    /// Share of an active astrocyte's state sent to each linked neighbour per tick.
    pub ca_emit_fraction: f64,
    /// Ticks over which delivered calcium keeps counting toward input.
    pub window_accum: usize,
}

impl Default for AstroParams {
    fn default() -> Self {
        Self {
            grid_side: 60,
            rho_scale: 1.0,
            delay_scale: 2.0,
            cutoff: 10.0,
            theta_act: 3.0,
            theta_over: 8.0,
            k_excite: 0.5,
            k_inhibit: 0.5,
            spike_gain: 1.0,
            ca_gain: 1.0,
            ca_emit_fraction: 0.001,
            window_accum: 10,
        }
    }
}

impl AstroParams {
    pub(crate) fn check(&self, report: &mut ConfigReport) {
        if self.grid_side == 0 {
            report.push("astro.grid_side", "must be positive");
        }
        let positive = [
            ("astro.rho_scale", self.rho_scale, true),
            ("astro.delay_scale", self.delay_scale, false),
            ("astro.cutoff", self.cutoff, false),
            ("astro.theta_act", self.theta_act, false),
            ("astro.theta_over", self.theta_over, false),
            ("astro.k_excite", self.k_excite, true),
            ("astro.k_inhibit", self.k_inhibit, true),
            ("astro.spike_gain", self.spike_gain, true),
            ("astro.ca_gain", self.ca_gain, true),
        ];
        for (k, v, zero_ok) in positive {
            let ok = v.is_finite() && (v > 0.0 || (zero_ok && v == 0.0));
            if !ok {
                report.push(k, "must be a positive real");
            }
        }
        if self.theta_over <= self.theta_act {
            report.push("astro.theta_over", "must exceed astro.theta_act");
        }
        if !(self.ca_emit_fraction > 0.0 && self.ca_emit_fraction <= 1.0) {
            report.push("astro.ca_emit_fraction", "must lie in (0, 1]");
        }
        if self.window_accum == 0 {
            report.push("astro.window_accum", "must be positive");
        }
    }

    fn max_delay(&self) -> usize {
        ((self.delay_scale * self.cutoff).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub a: u32,
    pub b: u32,
    pub delay: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AstroSummary {
    pub n_active: usize,
    pub mean_state: f64,
    pub n_overactive: usize,
    pub queue_depth: u64,
}

#[derive(Debug, Clone)]
pub struct AstrocyteGrid {
    side: usize,
    states: Vec<f64>,
    links: Vec<Link>,
    adj_offsets: Vec<usize>,
    adj: Vec<(u32, u32)>,
    wheel: Vec<Vec<f64>>,
    wheel_counts: Vec<u64>,
    recent: Vec<Vec<f64>>,
    enqueued: u64,
    delivered: u64,
    last_delivery: Option<Tick>,
}

impl AstrocyteGrid {
    /// Samples calcium links for every unordered pair within the cutoff.
    pub fn build(params: &AstroParams, rng: &mut RngStream) -> Self {
        let side = params.grid_side;
        let n = side * side;
        let reach = params.cutoff.floor() as isize;
        let mut links = Vec::new();
        for a in 0..n {
            let (ai, aj) = ((a / side) as isize, (a % side) as isize);
            for di in 0..=reach {
                for dj in -reach..=reach {
                    if di == 0 && dj <= 0 {
                        continue;
                    }
                    let (bi, bj) = (ai + di, aj + dj);
                    if bi >= side as isize || bj < 0 || bj >= side as isize {
                        continue;
                    }
                    let d = ((di * di + dj * dj) as f64).sqrt();
                    if d > params.cutoff {
                        continue;
                    }
                    let p = (params.rho_scale / d).min(1.0);
                    if rng.chance(p) {
                        let b = (bi as usize) * side + bj as usize;
                        let delay = ((params.delay_scale * d).round() as u32).max(1);
                        links.push(Link {
                            a: a as u32,
                            b: b as u32,
                            delay,
                        });
                    }
                }
            }
        }
        Self::from_links(params, links)
    }

    /// Builds a grid with an explicit link list (delays taken as given).
    pub fn from_links(params: &AstroParams, links: Vec<Link>) -> Self {
        let side = params.grid_side;
        let n = side * side;
        let mut degree = vec![0usize; n];
        for l in &links {
            degree[l.a as usize] += 1;
            degree[l.b as usize] += 1;
        }
        let mut adj_offsets = vec![0; n + 1];
        for i in 0..n {
            adj_offsets[i + 1] = adj_offsets[i] + degree[i];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u32); adj_offsets[n]];
        for l in &links {
            adj[fill[l.a as usize]] = (l.b, l.delay);
            fill[l.a as usize] += 1;
            adj[fill[l.b as usize]] = (l.a, l.delay);
            fill[l.b as usize] += 1;
        }
        for i in 0..n {
            adj[adj_offsets[i]..adj_offsets[i + 1]].sort_unstable();
        }
        let longest = links.iter().map(|l| l.delay as usize).max().unwrap_or(0);
        let slots = params.max_delay().max(longest) + 1;
        Self {
            side,
            states: vec![0.0; n],
            links,
            adj_offsets,
            adj,
            wheel: vec![vec![0.0; n]; slots],
            wheel_counts: vec![0; slots],
            recent: vec![vec![0.0; n]; params.window_accum],
            enqueued: 0,
            delivered: 0,
            last_delivery: None,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.side + j
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Linked neighbours of `a` with their delays.
    pub fn neighbours(&self, a: usize) -> &[(u32, u32)] {
        &self.adj[self.adj_offsets[a]..self.adj_offsets[a + 1]]
    }

    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    /// Packets enqueued but not yet delivered.
    pub fn queue_depth(&self) -> u64 {
        self.enqueued - self.delivered
    }

    /// Moves the packets due at `t` into the accumulation window.
    ///
    /// Must be called once per tick, in order.
    pub fn deliver(&mut self, t: Tick) {
        if let Some(last) = self.last_delivery {
            assert_eq!(
                t,
                last + 1,
                "calcium deliveries must advance one tick at a time"
            );
        }
        self.last_delivery = Some(t);
        let slot = (t as usize) % self.wheel.len();
        let row = (t as usize) % self.recent.len();
        std::mem::swap(&mut self.recent[row], &mut self.wheel[slot]);
        self.wheel[slot].iter_mut().for_each(|x| *x = 0.0);
        self.delivered += std::mem::take(&mut self.wheel_counts[slot]);
    }

    /// Calcium delivered to `a` within the accumulation window.
    pub fn accumulated(&self, a: usize) -> f64 {
        self.recent.iter().map(|row| row[a]).sum()
    }

    /// Recomputes every state from its input, then emits calcium from active astrocytes.
    pub fn step(&mut self, effective: &[u32], t: Tick, params: &AstroParams) {
        assert_eq!(effective.len(), self.states.len());
        for (a, &count) in effective.iter().enumerate() {
            let input = params.spike_gain * f64::from(count) + params.ca_gain * self.accumulated(a);
            self.states[a] = if input > params.theta_act { input } else { 0.0 };
        }
        let slots = self.wheel.len();
        for a in 0..self.states.len() {
            let g = self.states[a];
            if g <= 0.0 {
                continue;
            }
            let amount = params.ca_emit_fraction * g;
            for &(b, delay) in &self.adj[self.adj_offsets[a]..self.adj_offsets[a + 1]] {
                let slot = (t as usize + delay as usize) % slots;
                self.wheel[slot][b as usize] += amount;
                self.wheel_counts[slot] += 1;
                self.enqueued += 1;
            }
        }
    }

    /// Delivers every in-flight packet immediately, without affecting states.
    pub fn flush_pending(&mut self) {
        for (row, count) in self.wheel.iter_mut().zip(self.wheel_counts.iter_mut()) {
            row.iter_mut().for_each(|x| *x = 0.0);
            self.delivered += std::mem::take(count);
        }
    }

    pub fn summary(&self, params: &AstroParams) -> AstroSummary {
        let active: Vec<f64> = self.states.iter().copied().filter(|&g| g > 0.0).collect();
        AstroSummary {
            n_active: active.len(),
            mean_state: self.states.iter().sum::<f64>() / self.states.len() as f64,
            n_overactive: active.iter().filter(|&&g| g > params.theta_over).count(),
            queue_depth: self.queue_depth(),
        }
    }
}

/// Which four astrocytes serve each neuron and which of them covers each synapse.
#[derive(Debug, Clone)]
pub struct NeuronAstroMap {
    lattice_side: usize,
    astros: Vec<[u32; 4]>,
    /// Covering astrocyte of every synapse, in graph storage order.
    edge_astro: Vec<u32>,
    /// Quarter (0..4) of every synapse within its target's afferent list.
    edge_quarter: Vec<u8>,
}

impl NeuronAstroMap {
    /// Places neurons on a square lattice interleaved with the astrocyte grid.
    ///
    /// Neuron `p = u * L + v` maps to astrocytes `(2u, 2v)`, `(2u+1, 2v)`,
    /// `(2u, 2v+1)` and `(2u+1, 2v+1)`; its afferent synapses are dealt to
    /// them round-robin.
    pub fn build(n_neurons: usize, grid: &AstrocyteGrid, graph: &SynapseGraph) -> Result<Self> {
        let side = n_neurons.isqrt();
        if side * side != n_neurons || 2 * side > grid.side() || n_neurons == 0 {
            return Err(SimError::Lattice {
                n: n_neurons,
                side: grid.side(),
            });
        }
        assert_eq!(graph.n(), n_neurons);
        let astros: Vec<[u32; 4]> = (0..n_neurons)
            .map(|p| {
                let (u, v) = (p / side, p % side);
                [
                    (2 * u, 2 * v),
                    (2 * u + 1, 2 * v),
                    (2 * u, 2 * v + 1),
                    (2 * u + 1, 2 * v + 1),
                ]
                .map(|(i, j)| grid.index(i, j) as u32)
            })
            .collect();
        let mut edge_astro = Vec::with_capacity(graph.edge_count());
        let mut edge_quarter = Vec::with_capacity(graph.edge_count());
        for (p, quad) in astros.iter().enumerate() {
            for k in 0..graph.in_degree(p) {
                edge_quarter.push((k % 4) as u8);
                edge_astro.push(quad[k % 4]);
            }
        }
        Ok(Self {
            lattice_side: side,
            astros,
            edge_astro,
            edge_quarter,
        })
    }

    pub fn lattice_side(&self) -> usize {
        self.lattice_side
    }

    pub fn astrocytes_of(&self, neuron: usize) -> [u32; 4] {
        self.astros[neuron]
    }

    pub fn edge_astrocyte(&self, edge: usize) -> u32 {
        self.edge_astro[edge]
    }

    /// Edge indices of the synapses of `neuron` covered by its `r`-th astrocyte.
    pub fn quarter(&self, graph: &SynapseGraph, neuron: usize, r: usize) -> Vec<usize> {
        graph
            .afferent_range(neuron)
            .filter(|&e| usize::from(self.edge_quarter[e]) == r)
            .collect()
    }
}

/// A presynaptic spike is effective when its sign matches the postsynaptic outcome.
pub fn is_effective(weight: f64, post_fires_next: bool) -> bool {
    (weight > 0.0 && post_fires_next) || (weight < 0.0 && !post_fires_next)
}

/// Counts effective spikes per astrocyte for spikes emitted at `t` (`pre`)
/// judged by the postsynaptic states at `t + 1` (`post`).
pub fn sense_spikes(
    map: &NeuronAstroMap,
    graph: &SynapseGraph,
    pre: &NeuronState,
    post: &NeuronState,
    n_astro: usize,
) -> Vec<u32> {
    let mut counts = vec![0u32; n_astro];
    let (src, w) = (graph.sources(), graph.weights());
    for p in 0..graph.n() {
        let fires = post.fires(p);
        for e in graph.afferent_range(p) {
            if pre.fires(src[e] as usize) && is_effective(w[e], fires) {
                counts[map.edge_astro[e] as usize] += 1;
            }
        }
    }
    counts
}

/// Contribution of one astrocyte state to its neuron's input.
pub fn regulation(g: f64, params: &AstroParams) -> f64 {
    if g <= 0.0 {
        0.0
    } else if g <= params.theta_over {
        params.k_excite * g
    } else {
        -params.k_inhibit * g
    }
}

/// Per-neuron sum of the regulated contributions of its four astrocytes.
pub fn regulate(map: &NeuronAstroMap, grid: &AstrocyteGrid, params: &AstroParams) -> Vec<f64> {
    map.astros
        .iter()
        .map(|quad| {
            quad.iter()
                .map(|&a| regulation(grid.states[a as usize], params))
                .sum()
        })
        .collect()
}
