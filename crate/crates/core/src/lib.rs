//! Discrete-time simulation of two coupled brain-network models.
//!
//! * **Model A** couples a bipolar Hopfield-style neuron population to a
//!   30-branch capillary tree whose branches dilate when enough of their
//!   neurons fire; the imbalance of flow at the tree's joints is tracked as
//!   the compatibility metric.
//! * **Model B** couples a binary neuron population with a refractory rule
//!   to a 60x60 astrocyte grid that senses effective spikes, exchanges
//!   delayed calcium signals, regulates neuron input, and slowly adapts
//!   synaptic weights.
//!
//! One tick is one millisecond. Runs are fully determined by the config and
//! its seed.

pub mod analysis;
pub mod astro;
pub mod capillary;
pub mod config;
pub mod engine;
pub mod error;
pub mod neurons;
pub mod plasticity;
pub mod rng;
pub mod synapses;
pub mod trace;

/// Simulation time in 1 ms ticks.
pub type Tick = u64;

pub use analysis::{detect_cycle, summarize, CycleReport, Summary};
pub use config::{Model, SimConfig, ValidConfig};
pub use engine::{run, run_model_a, run_model_b, ModelA, ModelB};
pub use error::{ConfigReport, Result, SimError};
pub use rng::{derive_stream, RngStream};
pub use trace::SimTrace;
