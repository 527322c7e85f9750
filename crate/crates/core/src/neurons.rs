//! Neuron state vectors and the two synchronous update rules.
//!
//! Model A neurons are bipolar (`-1` resting, `+1` firing) and follow the
//! Hopfield sign rule. Model B neurons are binary (`0`/`1`) and follow the
//! half-sign rule with astrocyte input, a threshold and noise, after which a
//! refractory mask forbids firing on two consecutive ticks.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigReport;
use crate::rng::{derive_stream, RngStream};
use crate::synapses::SynapseGraph;
use crate::Tick;

/// Neurons per noise stream. Fixed so draws do not depend on the worker count.
pub const NOISE_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    Bipolar,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronState {
    pub values: Vec<i8>,
    pub encoding: Encoding,
}

impl NeuronState {
    pub fn new(values: Vec<i8>, encoding: Encoding) -> Self {
        debug_assert!(values.iter().all(|&v| match encoding {
            Encoding::Bipolar => v == -1 || v == 1,
            Encoding::Binary => v == 0 || v == 1,
        }));
        Self { values, encoding }
    }

    pub fn resting(n: usize, encoding: Encoding) -> Self {
        let v = match encoding {
            Encoding::Bipolar => -1,
            Encoding::Binary => 0,
        };
        Self::new(vec![v; n], encoding)
    }

    /// Each neuron fires independently with probability `p_fire`.
    pub fn random(n: usize, encoding: Encoding, p_fire: f64, rng: &mut RngStream) -> Self {
        let (on, off) = match encoding {
            Encoding::Bipolar => (1, -1),
            Encoding::Binary => (1, 0),
        };
        let values = (0..n)
            .map(|_| if rng.chance(p_fire) { on } else { off })
            .collect();
        Self::new(values, encoding)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `+1` in either encoding means firing.
    pub fn fires(&self, i: usize) -> bool {
        self.values[i] == 1
    }

    /// Firing bits as `0`/`1` regardless of encoding.
    pub fn firing_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&v| u8::from(v == 1)).collect()
    }

    pub fn total_firing(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub base_mean: f64,
    /// Per-external-synapse std; a neuron's noise std is `base_std * sqrt(external count)`.
    pub base_std: f64,
    pub pulse_mean: f64,
    /// Inclusive tick range where the noise mean becomes `pulse_mean`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_window: Option<(Tick, Tick)>,
    pub neg_pulse_mean: f64,
    /// Optional inhibitory pulse; takes precedence over `pulse_window` where they overlap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_pulse_window: Option<(Tick, Tick)>,
    /// Std of the model B noise term.
    pub eta_std: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            base_mean: 0.0,
            base_std: 0.3,
            pulse_mean: 1.0,
            pulse_window: Some((101, 105)),
            neg_pulse_mean: -1.0,
            neg_pulse_window: None,
            eta_std: 0.0,
        }
    }
}

impl NoiseParams {
    pub(crate) fn check(&self, report: &mut ConfigReport) {
        for (k, v) in [
            ("noise.base_mean", self.base_mean),
            ("noise.pulse_mean", self.pulse_mean),
            ("noise.neg_pulse_mean", self.neg_pulse_mean),
        ] {
            if !v.is_finite() {
                report.push(k, "must be finite");
            }
        }
        for (k, v) in [
            ("noise.base_std", self.base_std),
            ("noise.eta_std", self.eta_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                report.push(k, "must be a non-negative real");
            }
        }
        for (k, w) in [
            ("noise.pulse_window", self.pulse_window),
            ("noise.neg_pulse_window", self.neg_pulse_window),
        ] {
            if let Some((a, b)) = w {
                if a > b {
                    report.push(k, "t_start must be <= t_end");
                }
            }
        }
    }

    /// Noise mean in effect at tick `t`.
    pub fn mean_at(&self, t: Tick) -> f64 {
        let inside = |w: Option<(Tick, Tick)>| w.is_some_and(|(a, b)| (a..=b).contains(&t));
        if inside(self.neg_pulse_window) {
            self.neg_pulse_mean
        } else if inside(self.pulse_window) {
            self.pulse_mean
        } else {
            self.base_mean
        }
    }
}

/// Thresholds and initial firing probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    /// Model A threshold subtracted inside the sign rule.
    pub phi_a: f64,
    /// Model B threshold `phi_p` (uniform across neurons).
    pub phi_b: f64,
    pub init_fire_a: f64,
    pub init_fire_b: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            phi_a: 0.0,
            phi_b: 1.2,
            init_fire_a: 0.25,
            init_fire_b: 0.5,
        }
    }
}

impl NeuronParams {
    pub(crate) fn check(&self, report: &mut ConfigReport) {
        for (k, v) in [("neuron.phi_a", self.phi_a), ("neuron.phi_b", self.phi_b)] {
            if !v.is_finite() {
                report.push(k, "must be finite");
            }
        }
        for (k, v) in [
            ("neuron.init_fire_a", self.init_fire_a),
            ("neuron.init_fire_b", self.init_fire_b),
        ] {
            if !(0.0..=1.0).contains(&v) {
                report.push(k, "must lie in [0, 1]");
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub phi: Vec<f64>,
}

impl ThresholdVector {
    pub fn uniform(n: usize, phi: f64) -> Self {
        Self { phi: vec![phi; n] }
    }
}

fn sign_fires(x: f64) -> bool {
    // sgn(0) counts as firing
    x >= 0.0
}

/// Synchronous Hopfield update: `s_i <- sgn(sum_j S_ij s_j + noise_i - threshold)`.
pub fn step_bipolar(
    state: &NeuronState,
    graph: &SynapseGraph,
    noise: &[f64],
    threshold: f64,
) -> NeuronState {
    assert_eq!(state.encoding, Encoding::Bipolar);
    let (src, w) = (graph.sources(), graph.weights());
    let prev = &state.values;
    let values = (0..state.len())
        .into_par_iter()
        .map(|i| {
            let r = graph.afferent_range(i);
            let h: f64 = src[r.clone()]
                .iter()
                .zip(&w[r])
                .map(|(&j, &wij)| wij * f64::from(prev[j as usize]))
                .sum();
            if sign_fires(h + noise[i] - threshold) {
                1
            } else {
                -1
            }
        })
        .collect();
    NeuronState::new(values, Encoding::Bipolar)
}

/// Half-sign update with astrocyte input, then the refractory mask.
pub fn step_binary(
    state: &NeuronState,
    graph: &SynapseGraph,
    astro_contrib: &[f64],
    phi: &ThresholdVector,
    eta: &[f64],
) -> NeuronState {
    assert_eq!(state.encoding, Encoding::Binary);
    let (src, w) = (graph.sources(), graph.weights());
    let prev = &state.values;
    let values = (0..state.len())
        .into_par_iter()
        .map(|p| {
            if prev[p] == 1 {
                return 0;
            }
            let r = graph.afferent_range(p);
            let h: f64 = src[r.clone()]
                .iter()
                .zip(&w[r])
                .filter(|(&q, _)| prev[q as usize] == 1)
                .map(|(_, &tqp)| tqp)
                .sum();
            i8::from(sign_fires(h + astro_contrib[p] - phi.phi[p] + eta[p]))
        })
        .collect();
    NeuronState::new(values, Encoding::Binary)
}

fn chunked_normals(
    seed: u64,
    label: &str,
    t: Tick,
    n: usize,
    f: impl Fn(usize, f64) -> f64 + Sync,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out.par_chunks_mut(NOISE_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = derive_stream(seed, &format!("{label}/{t}/{c}"));
            for (k, slot) in chunk.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *slot = f(c * NOISE_CHUNK + k, z);
            }
        });
    out
}

/// External-input noise for model A at tick `t`.
///
/// Neuron `i` receives `Normal(mean_t, base_std * sqrt(ext_counts[i]))`.
pub fn sample_noise(seed: u64, t: Tick, params: &NoiseParams, ext_counts: &[u32]) -> Vec<f64> {
    let mean = params.mean_at(t);
    chunked_normals(seed, "noise", t, ext_counts.len(), |i, z| {
        mean + params.base_std * f64::from(ext_counts[i]).sqrt() * z
    })
}

/// The model B noise term `eta ~ Normal(0, eta_std)` per neuron.
pub fn sample_eta(seed: u64, t: Tick, eta_std: f64, n: usize) -> Vec<f64> {
    if eta_std == 0.0 {
        return vec![0.0; n];
    }
    chunked_normals(seed, "eta", t, n, |_, z| eta_std * z)
}

pub fn firing_count(state: &NeuronState, subset: impl IntoIterator<Item = usize>) -> usize {
    subset.into_iter().filter(|&i| state.fires(i)).count()
}
