//! Synapse graph generation.
//!
//! Each neuron draws an afferent synapse count from a normal distribution
//! centred on `s_ave`. A `p_loc` fraction of those synapses is materialized
//! as explicit local edges; the remainder stays implicit and only scales the
//! external noise a neuron receives (see [`crate::neurons::sample_noise`]).

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigReport, Result, SimError};
use crate::rng::RngStream;
use crate::trace::fmt_real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynapseParams {
    /// Mean afferent synapse count per neuron.
    pub s_ave: f64,
    /// Degree standard deviation; `s_ave / 5` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_deg: Option<f64>,
    /// Fraction of a neuron's synapses that come from inside the simulated population.
    pub p_loc: f64,
    /// Local shift: weights are uniform on `[2*mu - 1, 1]`.
    pub mu: f64,
    pub allow_self: bool,
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self {
            s_ave: 50.0,
            sigma_deg: None,
            p_loc: 0.8,
            mu: 0.0,
            allow_self: false,
        }
    }
}

impl SynapseParams {
    pub fn sigma(&self) -> f64 {
        self.sigma_deg.unwrap_or(self.s_ave / 5.0)
    }

    pub(crate) fn normalize(&mut self) {
        if self.sigma_deg.is_none() {
            self.sigma_deg = Some(self.s_ave / 5.0);
        }
    }

    pub(crate) fn check(&self, n_neurons: usize, report: &mut ConfigReport) {
        if !(self.s_ave.is_finite() && self.s_ave > 0.0) {
            report.push("synapse.s_ave", "must be a positive real");
        }
        if !(self.sigma().is_finite() && self.sigma() >= 0.0) {
            report.push("synapse.sigma_deg", "must be a non-negative real");
        }
        if !(0.0..=1.0).contains(&self.p_loc) {
            report.push("synapse.p_loc", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mu) {
            report.push("synapse.mu", "must lie in [0, 1]");
        }
        if !self.allow_self && self.s_ave.is_finite() && self.p_loc.is_finite() {
            let local = (self.s_ave * self.p_loc).round_ties_even();
            if local > n_neurons.saturating_sub(1) as f64 {
                report.push(
                    "synapse.s_ave",
                    format!(
                        "round(s_ave * p_loc) = {local} exceeds the {} available sources",
                        n_neurons.saturating_sub(1)
                    ),
                );
            }
        }
    }

    fn weight_floor(&self) -> f64 {
        2.0 * self.mu - 1.0
    }
}

/// Sparse directed graph stored by target: entry `(i, j)` is the synapse from `j` to `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseGraph {
    n: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    weights: Vec<f64>,
    external: Vec<u32>,
}

/// Aggregates over all stored weights; `None` fields when the graph has no edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightStats {
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
}

/// Draws one afferent degree per neuron from `Normal(s_ave, sigma_deg)`.
pub fn sample_degrees(n: usize, params: &SynapseParams, rng: &mut RngStream) -> Vec<usize> {
    let cap = if params.allow_self {
        n
    } else {
        n.saturating_sub(1)
    } as f64;
    let sigma = params.sigma();
    let normal = (sigma > 0.0).then(|| Normal::new(params.s_ave, sigma).expect("finite sigma"));
    (0..n)
        .map(|_| {
            let raw = match &normal {
                Some(d) => d.sample(rng),
                None => params.s_ave,
            };
            raw.round_ties_even().clamp(0.0, cap) as usize
        })
        .collect()
}

/// Materializes the local part of every neuron's afferent degree as edges.
pub fn build_graph(
    n: usize,
    degrees: &[usize],
    params: &SynapseParams,
    rng: &mut RngStream,
) -> Result<SynapseGraph> {
    assert_eq!(degrees.len(), n, "one degree per neuron");
    let available = if params.allow_self {
        n
    } else {
        n.saturating_sub(1)
    };
    let floor = params.weight_floor();
    let span = 1.0 - floor;

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut sources = Vec::new();
    let mut weights = Vec::new();
    let mut external = Vec::with_capacity(n);
    // stamp[j] == i + 1 marks j as already chosen for target i
    let mut stamp = vec![0usize; n];

    for (target, &degree) in degrees.iter().enumerate() {
        let local = (degree as f64 * params.p_loc).round_ties_even() as usize;
        if local > available {
            return Err(SimError::DegreeTooLarge {
                target,
                requested: local,
                available,
            });
        }
        let mut placed = 0;
        while placed < local {
            let src = rng.index(n);
            if (src == target && !params.allow_self) || stamp[src] == target + 1 {
                continue;
            }
            stamp[src] = target + 1;
            sources.push(src as u32);
            weights.push(floor + span * rng.uniform());
            placed += 1;
        }
        offsets.push(sources.len());
        external.push((degree - local.min(degree)) as u32);
    }

    Ok(SynapseGraph {
        n,
        offsets,
        sources,
        weights,
        external,
    })
}

impl SynapseGraph {
    /// Builds a graph from explicit `(target, source, weight)` triples.
    ///
    /// Edges keep their order within each target. External counts are zero.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], allow_self: bool) -> Result<Self> {
        let bad = |reason: String| SimError::Malformed {
            what: "edge list".into(),
            reason,
        };
        let mut by_target: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(t, s, w) in edges {
            if t >= n || s >= n {
                return Err(bad(format!("edge ({t}, {s}) out of range for {n} neurons")));
            }
            if t == s && !allow_self {
                return Err(bad(format!("self edge on neuron {t}")));
            }
            if !(-1.0..=1.0).contains(&w) {
                return Err(bad(format!("weight {w} on ({t}, {s}) outside [-1, 1]")));
            }
            if by_target[t].iter().any(|&(js, _)| js as usize == s) {
                return Err(bad(format!("duplicate edge ({t}, {s})")));
            }
            by_target[t].push((s as u32, w));
        }
        let mut offsets = vec![0];
        let mut sources = Vec::with_capacity(edges.len());
        let mut weights = Vec::with_capacity(edges.len());
        for row in by_target {
            for (s, w) in row {
                sources.push(s);
                weights.push(w);
            }
            offsets.push(sources.len());
        }
        Ok(Self {
            n,
            offsets,
            sources,
            weights,
            external: vec![0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    /// Edge index range of `target`'s afferent synapses.
    pub fn afferent_range(&self, target: usize) -> std::ops::Range<usize> {
        self.offsets[target]..self.offsets[target + 1]
    }

    pub fn in_degree(&self, target: usize) -> usize {
        self.offsets[target + 1] - self.offsets[target]
    }

    /// `(source, weight)` pairs of `target`'s afferent synapses.
    pub fn afferent(&self, target: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.afferent_range(target);
        self.sources[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&s, &w)| (s as usize, w))
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Number of non-local synapses of each neuron (modeled as noise).
    pub fn external_counts(&self) -> &[u32] {
        &self.external
    }

    /// Target neuron of every edge, in storage order.
    pub fn edge_targets(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.edge_count());
        for t in 0..self.n {
            out.extend(std::iter::repeat_n(t as u32, self.in_degree(t)));
        }
        out
    }

    /// `sum_j S_ij * x_j` for one target.
    pub fn weighted_input(&self, target: usize, x: &[f64]) -> f64 {
        let r = self.afferent_range(target);
        self.sources[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&s, &w)| w * x[s as usize])
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,source,weight\n");
        for t in 0..self.n {
            for (s, w) in self.afferent(t) {
                let _ = writeln!(out, "{t},{s},{}", fmt_real(w));
            }
        }
        out
    }

    pub fn from_csv(n: usize, text: &str, allow_self: bool) -> Result<Self> {
        let bad = |line: usize, reason: &str| SimError::Malformed {
            what: "edge csv".into(),
            reason: format!("line {line}: {reason}"),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "target,source,weight" => {}
            _ => return Err(bad(1, "expected header `target,source,weight`")),
        }
        let mut edges = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad(i + 1, "expected three columns"));
            }
            let t = cols[0].parse().map_err(|_| bad(i + 1, "bad target"))?;
            let s = cols[1].parse().map_err(|_| bad(i + 1, "bad source"))?;
            let w = cols[2].parse().map_err(|_| bad(i + 1, "bad weight"))?;
            edges.push((t, s, w));
        }
        Self::from_edges(n, &edges, allow_self)
    }
}

pub fn weight_stats(g: &SynapseGraph) -> WeightStats {
    let count = g.weights.len();
    if count == 0 {
        return WeightStats {
            mean: None,
            min: None,
            max: None,
            count,
        };
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &w in &g.weights {
        lo = lo.min(w);
        hi = hi.max(w);
        sum += w;
    }
    WeightStats {
        mean: Some(sum / count as f64),
        min: Some(lo),
        max: Some(hi),
        count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn params(s_ave: f64, sigma: f64, p_loc: f64, mu: f64) -> SynapseParams {
        SynapseParams {
            s_ave,
            sigma_deg: Some(sigma),
            p_loc,
            mu,
            allow_self: false,
        }
    }

    #[test]
    fn zero_sigma_gives_exact_degrees() {
        let mut rng = derive_stream(1, "deg");
        let d = sample_degrees(100, &params(50.0, 0.0, 0.8, 0.0), &mut rng);
        assert!(d.iter().all(|&k| k == 50));
    }

    #[test]
    fn degree_mean_within_five_standard_errors() {
        let mut rng = derive_stream(42, "deg");
        let d = sample_degrees(2400, &params(50.0, 10.0, 0.8, 0.0), &mut rng);
        let mean = d.iter().sum::<usize>() as f64 / 2400.0;
        let se = 10.0 / 2400f64.sqrt();
        assert!((mean - 50.0).abs() < 5.0 * se, "mean {mean}");
    }

    #[test]
    fn degrees_are_clamped() {
        let mut rng = derive_stream(3, "deg");
        let d = sample_degrees(500, &params(2.0, 5.0, 0.8, 0.0), &mut rng);
        assert!(d.contains(&0));
        let d = sample_degrees(10, &params(50.0, 5.0, 0.8, 0.0), &mut rng);
        assert!(d.iter().all(|&k| k <= 9));
    }

    #[test]
    fn zero_locality_means_no_edges() {
        let p = params(50.0, 10.0, 0.0, 0.0);
        let mut rng = derive_stream(1, "g");
        let deg = sample_degrees(200, &p, &mut rng);
        let g = build_graph(200, &deg, &p, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
        for i in 0..200 {
            assert_eq!(g.external_counts()[i] as usize, deg[i]);
        }
    }

    #[test]
    fn unshifted_weights_span_minus_one_to_one() {
        let p = params(40.0, 0.0, 1.0, 0.0);
        let mut rng = derive_stream(5, "g");
        let g = build_graph(300, &vec![40; 300], &p, &mut rng).unwrap();
        let s = weight_stats(&g);
        assert!(s.min.unwrap() >= -1.0 && s.min.unwrap() < -0.99);
        assert!(s.max.unwrap() <= 1.0 && s.max.unwrap() > 0.99);
    }

    #[test]
    fn full_shift_gives_unit_weights() {
        let p = params(10.0, 0.0, 1.0, 1.0);
        let mut rng = derive_stream(5, "g");
        let g = build_graph(50, &vec![10; 50], &p, &mut rng).unwrap();
        assert!(g.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn local_degree_and_no_duplicates() {
        let p = params(30.0, 8.0, 0.7, 0.2);
        let mut rng = derive_stream(9, "g");
        let deg = sample_degrees(150, &p, &mut rng);
        let g = build_graph(150, &deg, &p, &mut rng).unwrap();
        for i in 0..150 {
            let expect = (deg[i] as f64 * 0.7).round_ties_even() as usize;
            assert_eq!(g.in_degree(i), expect);
            let mut srcs: Vec<usize> = g.afferent(i).map(|(s, _)| s).collect();
            assert!(!srcs.contains(&i));
            srcs.sort_unstable();
            srcs.dedup();
            assert_eq!(srcs.len(), expect);
        }
    }

    #[test]
    fn too_many_local_sources_is_an_error() {
        let p = params(10.0, 0.0, 1.0, 0.0);
        let mut rng = derive_stream(1, "g");
        let err = build_graph(5, &[10, 1, 1, 1, 1], &p, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            SimError::DegreeTooLarge {
                requested: 10,
                available: 4,
                ..
            }
        ));
    }

    #[test]
    fn empty_and_all_ones_stats() {
        let g = SynapseGraph::from_edges(3, &[], false).unwrap();
        let s = weight_stats(&g);
        assert_eq!(s.count, 0);
        assert_eq!(s.mean, None);

        let edges: Vec<_> = (0..10)
            .map(|k| (k % 5, (k % 5 + 1 + k / 5) % 5, 1.0))
            .collect();
        let g = SynapseGraph::from_edges(5, &edges, false).unwrap();
        let s = weight_stats(&g);
        assert_eq!(
            (s.mean, s.min, s.max, s.count),
            (Some(1.0), Some(1.0), Some(1.0), 10)
        );
    }

    #[test]
    fn shifted_mean_converges() {
        // 2400 neurons x 50 local synapses = 120000 edges
        let p = params(50.0, 0.0, 1.0, 0.05);
        let mut rng = derive_stream(11, "g");
        let g = build_graph(2400, &vec![50; 2400], &p, &mut rng).unwrap();
        let s = weight_stats(&g);
        assert_eq!(s.count, 120_000);
        let se = (2.0 / 12f64.sqrt()) / (120_000f64).sqrt();
        assert!((s.mean.unwrap() - 0.05).abs() < 5.0 * se, "{:?}", s.mean);
    }

    #[test]
    fn construction_is_pure_in_its_inputs() {
        let p = params(20.0, 4.0, 0.8, 0.1);
        let build = || {
            let mut rng = derive_stream(77, "g");
            let deg = sample_degrees(100, &p, &mut rng);
            build_graph(100, &deg, &p, &mut rng).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = params(12.0, 3.0, 0.9, 0.3);
        let mut rng = derive_stream(8, "g");
        let deg = sample_degrees(40, &p, &mut rng);
        let g = build_graph(40, &deg, &p, &mut rng).unwrap();
        let back = SynapseGraph::from_csv(40, &g.to_csv(), false).unwrap();
        assert_eq!(back.sources(), g.sources());
        assert_eq!(back.weights(), g.weights());
    }

    #[test]
    fn csv_rejects_duplicates_and_bad_header() {
        let text = "target,source,weight\n0,1,0.5\n0,1,0.25\n";
        assert!(SynapseGraph::from_csv(2, text, false).is_err());
        assert!(SynapseGraph::from_csv(2, "a,b,c\n", false).is_err());
    }
}
