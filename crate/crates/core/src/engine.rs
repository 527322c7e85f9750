//! Tick loops for both models.
//!
//! Model A, per tick `t`:
//! 1. sample external noise (pulse windows applied)
//! 2. synchronous bipolar update
//! 3. per-branch firing counts drive the capillary trigger logic
//! 4. record flows and compatibility
//!
//! Model B, per tick `t`:
//! 1. deliver calcium due at `t`
//! 2. sense effective spikes emitted at `t - 2` against outcomes at `t - 1`
//! 3. astrocyte update and calcium emission
//! 4. regulation into per-neuron astrocyte input (zero when uncoupled)
//! 5. binary update with refractory mask
//! 6. plasticity record, and classify/apply on update ticks (coupled only)
//! 7. record row counts
//!
//! All randomness comes from labeled streams, and per-tick noise is drawn in
//! fixed-size neuron chunks, so results do not depend on the worker count.

use crate::astro::{self, AstroSummary, AstrocyteGrid, NeuronAstroMap};
use crate::capillary::{CapillaryTree, N_BRANCHES};
use crate::config::{Model, SimConfig, ValidConfig};
use crate::error::{Result, SimError};
use crate::neurons::{self, Encoding, NeuronState, ThresholdVector};
use crate::plasticity::{self, SpikeHistory};
use crate::rng::derive_stream;
use crate::synapses::{self, SynapseGraph};
use crate::trace::{CalciumLedger, GlialRecord, SimTrace, TickRecord, VascularRecord};
use crate::Tick;

fn checked(cfg: &SimConfig) -> Result<ValidConfig> {
    cfg.validate().map_err(SimError::Config)
}

fn build_synapses(cfg: &ValidConfig) -> Result<SynapseGraph> {
    let n = cfg.n();
    let degrees = synapses::sample_degrees(
        n,
        &cfg.synapse,
        &mut derive_stream(cfg.seed, "synapse/degrees"),
    );
    synapses::build_graph(
        n,
        &degrees,
        &cfg.synapse,
        &mut derive_stream(cfg.seed, "synapse/edges"),
    )
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Neurovascular model state.
pub struct ModelA {
    cfg: ValidConfig,
    graph: SynapseGraph,
    tree: CapillaryTree,
    state: NeuronState,
    t: Tick,
}

impl ModelA {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let cfg = checked(cfg)?;
        let graph = build_synapses(&cfg)?;
        let tree = CapillaryTree::build(
            cfg.n(),
            &cfg.capillary,
            &mut derive_stream(cfg.seed, "capillary/assign"),
        )?;
        let state = NeuronState::random(
            cfg.n(),
            Encoding::Bipolar,
            cfg.neuron.init_fire_a,
            &mut derive_stream(cfg.seed, "init/a"),
        );
        Ok(Self {
            cfg,
            graph,
            tree,
            state,
            t: 0,
        })
    }

    /// Replaces the generated synapse graph (same neuron count).
    pub fn with_graph(mut self, graph: SynapseGraph) -> Self {
        assert_eq!(graph.n(), self.cfg.n());
        self.graph = graph;
        self
    }

    pub fn with_state(mut self, state: NeuronState) -> Self {
        assert_eq!(state.encoding, Encoding::Bipolar);
        assert_eq!(state.len(), self.cfg.n());
        self.state = state;
        self
    }

    pub fn config(&self) -> &ValidConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &SynapseGraph {
        &self.graph
    }

    pub fn tree(&self) -> &CapillaryTree {
        &self.tree
    }

    pub fn state(&self) -> &NeuronState {
        &self.state
    }

    pub fn tick(&self) -> Tick {
        self.t
    }

    /// Advances one tick and returns its record.
    pub fn step(&mut self) -> TickRecord {
        let t = self.t + 1;
        let noise = neurons::sample_noise(
            self.cfg.seed,
            t,
            &self.cfg.noise,
            self.graph.external_counts(),
        );
        self.state = neurons::step_bipolar(&self.state, &self.graph, &noise, self.cfg.neuron.phi_a);

        let mut counts = [0u16; N_BRANCHES];
        let mut as_usize = [0usize; N_BRANCHES];
        for (k, c) in counts.iter_mut().enumerate() {
            let n = neurons::firing_count(&self.state, self.tree.supplied(k + 1).iter().copied());
            *c = n as u16;
            as_usize[k] = n;
        }
        self.tree.observe_firing(&as_usize, t, &self.cfg.capillary);
        let flows = self.tree.flow_snapshot(t);
        self.t = t;
        TickRecord {
            t,
            firing_total: self.state.total_firing(),
            vascular: Some(VascularRecord {
                cmp: crate::capillary::compatibility_of(&flows),
                flows,
                branch_counts: counts,
            }),
            glial: None,
        }
    }

    pub fn run(mut self) -> SimTrace {
        let workers = self.cfg.workers;
        with_workers(workers, move || {
            let mut records = Vec::with_capacity(self.cfg.t_max as usize);
            let mut states = vec![self.state.firing_bits()];
            for _ in 0..self.cfg.t_max {
                records.push(self.step());
                states.push(self.state.firing_bits());
            }
            SimTrace {
                model: self.cfg.model,
                n_neurons: self.cfg.n(),
                seed: self.cfg.seed,
                config_hash: self.cfg.hash(),
                encoding: Encoding::Bipolar,
                records,
                states,
                plasticity_log: Vec::new(),
                calcium: None,
                final_weights: None,
            }
        })
    }
}

pub fn run_model_a(cfg: &SimConfig) -> Result<SimTrace> {
    let mut cfg = cfg.clone();
    cfg.model = Model::Neurovascular;
    Ok(ModelA::new(&cfg)?.run())
}

struct Glia {
    grid: AstrocyteGrid,
    map: NeuronAstroMap,
}

/// Neuroglial model state (coupled or neurons only).
pub struct ModelB {
    cfg: ValidConfig,
    coupled: bool,
    graph: SynapseGraph,
    glia: Option<Glia>,
    history: SpikeHistory,
    phi: ThresholdVector,
    state: NeuronState,
    prev: Option<NeuronState>,
    t: Tick,
    plasticity_log: Vec<plasticity::UpdateReport>,
    lattice_side: usize,
}

impl ModelB {
    pub fn new(cfg: &SimConfig, coupled: bool) -> Result<Self> {
        let cfg = checked(cfg)?;
        let n = cfg.n();
        let graph = build_synapses(&cfg)?;
        let glia = if coupled {
            let grid =
                AstrocyteGrid::build(&cfg.astro, &mut derive_stream(cfg.seed, "astro/links"));
            let map = NeuronAstroMap::build(n, &grid, &graph)?;
            Some(Glia { grid, map })
        } else {
            None
        };
        let state = NeuronState::random(
            n,
            Encoding::Binary,
            cfg.neuron.init_fire_b,
            &mut derive_stream(cfg.seed, "init/b"),
        );
        Ok(Self {
            history: SpikeHistory::new(n, cfg.plasticity.window),
            phi: ThresholdVector::uniform(n, cfg.neuron.phi_b),
            lattice_side: n.isqrt(),
            cfg,
            coupled,
            graph,
            glia,
            state,
            prev: None,
            t: 0,
            plasticity_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ValidConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &SynapseGraph {
        &self.graph
    }

    pub fn grid(&self) -> Option<&AstrocyteGrid> {
        self.glia.as_ref().map(|g| &g.grid)
    }

    pub fn grid_mut(&mut self) -> Option<&mut AstrocyteGrid> {
        self.glia.as_mut().map(|g| &mut g.grid)
    }

    pub fn state(&self) -> &NeuronState {
        &self.state
    }

    pub fn tick(&self) -> Tick {
        self.t
    }

    pub fn plasticity_log(&self) -> &[plasticity::UpdateReport] {
        &self.plasticity_log
    }

    /// Advances one tick and returns its record.
    pub fn step(&mut self) -> TickRecord {
        let t = self.t + 1;
        let n = self.cfg.n();

        let contrib = match &mut self.glia {
            Some(glia) => {
                glia.grid.deliver(t);
                let effective = match &self.prev {
                    Some(prev) => astro::sense_spikes(
                        &glia.map,
                        &self.graph,
                        prev,
                        &self.state,
                        glia.grid.len(),
                    ),
                    None => vec![0; glia.grid.len()],
                };
                glia.grid.step(&effective, t, &self.cfg.astro);
                astro::regulate(&glia.map, &glia.grid, &self.cfg.astro)
            }
            None => vec![0.0; n],
        };

        let eta = neurons::sample_eta(self.cfg.seed, t, self.cfg.noise.eta_std, n);
        let next = neurons::step_binary(&self.state, &self.graph, &contrib, &self.phi, &eta);
        self.prev = Some(std::mem::replace(&mut self.state, next));

        if let Some(glia) = &self.glia {
            self.history.record(&self.state);
            let params = &self.cfg.plasticity;
            if t.is_multiple_of(params.update_period) && self.history.is_full() {
                let gate: Option<Vec<bool>> = params.gate_by_astro_active.then(|| {
                    (0..self.graph.edge_count())
                        .map(|e| glia.grid.states()[glia.map.edge_astrocyte(e) as usize] > 0.0)
                        .collect()
                });
                let outcomes =
                    plasticity::classify_all(&self.graph, &self.history, params, gate.as_deref());
                let report = plasticity::apply(&mut self.graph, &outcomes, params, t);
                self.plasticity_log.push(report);
            }
        }

        self.t = t;
        let side = self.lattice_side;
        let rows = (0..side)
            .map(|u| neurons::firing_count(&self.state, u * side..(u + 1) * side) as u16)
            .collect();
        let stats = synapses::weight_stats(&self.graph);
        let ws = self.graph.weights();
        let mean_abs = if ws.is_empty() {
            0.0
        } else {
            ws.iter().map(|w| w.abs()).sum::<f64>() / ws.len() as f64
        };
        let astro = self
            .glia
            .as_ref()
            .map_or(AstroSummary::default(), |g| g.grid.summary(&self.cfg.astro));
        TickRecord {
            t,
            firing_total: self.state.total_firing(),
            vascular: None,
            glial: Some(GlialRecord {
                rows,
                astro,
                weight_mean: stats.mean.unwrap_or(0.0),
                mean_abs_weight: mean_abs,
            }),
        }
    }

    pub fn calcium(&self) -> Option<CalciumLedger> {
        self.grid().map(|g| CalciumLedger {
            enqueued: g.enqueued(),
            delivered: g.delivered(),
            in_flight: g.queue_depth(),
        })
    }

    pub fn run(mut self) -> SimTrace {
        let workers = self.cfg.workers;
        with_workers(workers, move || {
            let mut records = Vec::with_capacity(self.cfg.t_max as usize);
            let mut states = vec![self.state.firing_bits()];
            for _ in 0..self.cfg.t_max {
                records.push(self.step());
                states.push(self.state.firing_bits());
            }
            SimTrace {
                model: if self.coupled {
                    Model::Neuroglial
                } else {
                    Model::PureNeuron
                },
                n_neurons: self.cfg.n(),
                seed: self.cfg.seed,
                config_hash: self.cfg.hash(),
                encoding: Encoding::Binary,
                calcium: self.calcium(),
                final_weights: Some(synapses::weight_stats(&self.graph)),
                records,
                states,
                plasticity_log: self.plasticity_log,
            }
        })
    }
}

pub fn run_model_b(cfg: &SimConfig, coupled: bool) -> Result<SimTrace> {
    let mut cfg = cfg.clone();
    cfg.model = if coupled {
        Model::Neuroglial
    } else {
        Model::PureNeuron
    };
    Ok(ModelB::new(&cfg, coupled)?.run())
}

/// Runs whichever model `cfg.model` names.
pub fn run(cfg: &SimConfig) -> Result<SimTrace> {
    match cfg.model {
        Model::Neurovascular => run_model_a(cfg),
        Model::Neuroglial => run_model_b(cfg, true),
        Model::PureNeuron => run_model_b(cfg, false),
    }
}
