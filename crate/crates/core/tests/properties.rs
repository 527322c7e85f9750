//! Whole-run invariants and randomized checks of the update rules.

use nvsim::capillary::{self, N_BRANCHES};
use nvsim::neurons::{self, Encoding, NeuronState, ThresholdVector};
use nvsim::synapses::SynapseGraph;
use nvsim::{detect_cycle, run_model_a, run_model_b, summarize, Model, ModelB, SimConfig};
use proptest::prelude::*;

fn model_a(t_max: u64) -> SimConfig {
    let mut cfg = SimConfig::for_model(Model::Neurovascular);
    cfg.t_max = t_max;
    cfg
}

#[test]
fn unit_dilation_keeps_flow_balanced() {
    let mut cfg = model_a(300);
    cfg.capillary.n_firing = 5;
    cfg.capillary.dilation_factor = 1.0;
    let trace = run_model_a(&cfg).unwrap();
    assert!(trace
        .records
        .iter()
        .all(|r| r.vascular.as_ref().unwrap().cmp == 0.0));
    let s = summarize(&trace, 10);
    assert_eq!(s.incompatible_fraction, Some(0.0));
    assert!(s.mean_firing_fraction > 0.1, "network must actually fire");
}

#[test]
fn non_negative_weights_hold_all_firing() {
    let mut cfg = model_a(100);
    cfg.synapse.mu = 0.5;
    cfg.noise.base_std = 0.0;
    cfg.noise.pulse_window = None;
    cfg.neuron.init_fire_a = 1.0;
    let trace = run_model_a(&cfg).unwrap();
    assert!(trace.records.iter().all(|r| r.firing_total == 2400));
    let cycle = detect_cycle(&trace.states, 10);
    assert_eq!((cycle.period, cycle.onset), (Some(1), Some(0)));
}

#[test]
fn resting_network_summary() {
    let mut cfg = SimConfig::for_model(Model::PureNeuron);
    cfg.t_max = 50;
    cfg.neuron.init_fire_b = 0.0;
    let trace = run_model_b(&cfg, false).unwrap();
    let s = summarize(&trace, 10);
    assert_eq!(s.mean_firing_fraction, 0.0);
    assert_eq!(s.cmp, None);
    assert_eq!(s.cycle.period, Some(1));
}

#[test]
fn coupling_raises_firing_at_defaults() {
    for seed in 1..=5 {
        let mut cfg = SimConfig::for_model(Model::Neuroglial);
        cfg.seed = seed;
        cfg.t_max = 300;
        let pure = summarize(&run_model_b(&cfg, false).unwrap(), 10).mean_firing_fraction;
        let coupled = summarize(&run_model_b(&cfg, true).unwrap(), 10).mean_firing_fraction;
        assert!(coupled > pure, "seed {seed}: coupled {coupled} pure {pure}");
    }
}

#[test]
fn frozen_weights_match_learning_run_until_first_update() {
    let mut cfg = SimConfig::for_model(Model::Neuroglial);
    cfg.t_max = 80;
    let learning = run_model_b(&cfg, true).unwrap();
    cfg.plasticity.delta_w = 0.0;
    let frozen = run_model_b(&cfg, true).unwrap();

    let first = learning
        .plasticity_log
        .first()
        .expect("an update happened")
        .t as usize;
    assert_eq!(learning.states[..=first], frozen.states[..=first]);
    assert_ne!(
        learning.states, frozen.states,
        "learning should change the trajectory"
    );
    assert!(frozen.records.windows(2).all(|w| {
        let (a, b) = (w[0].glial.as_ref().unwrap(), w[1].glial.as_ref().unwrap());
        a.weight_mean == b.weight_mean
    }));
}

#[test]
fn trace_row_counts_match_states() {
    let mut cfg = SimConfig::for_model(Model::Neuroglial);
    cfg.t_max = 40;
    let trace = run_model_b(&cfg, true).unwrap();
    for (k, r) in trace.records.iter().enumerate() {
        let bits = &trace.states[k + 1];
        let rows = &r.glial.as_ref().unwrap().rows;
        for (u, &c) in rows.iter().enumerate() {
            let expect: u32 = bits[u * 30..(u + 1) * 30]
                .iter()
                .map(|&b| u32::from(b))
                .sum();
            assert_eq!(u32::from(c), expect);
        }
        assert_eq!(
            rows.iter().map(|&c| c as usize).sum::<usize>(),
            r.firing_total
        );
    }
}

#[test]
fn csv_row_count_and_header() {
    let trace = run_model_a(&model_a(30)).unwrap();
    let csv = trace.trace_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 31);
    assert!(lines[0].starts_with("t,cmp,flow_1,"));
    assert!(lines[0].ends_with(",flow_30,firing_branch_mean,firing_total"));
}

#[test]
fn calcium_ledger_balances_mid_run() {
    let cfg = SimConfig::for_model(Model::Neuroglial);
    let mut m = ModelB::new(&cfg, true).unwrap();
    for _ in 0..60 {
        m.step();
        let c = m.calcium().unwrap();
        assert_eq!(c.enqueued, c.delivered + c.in_flight);
    }
}

fn brute_cmp(flows: &[f64; N_BRANCHES]) -> f64 {
    // joint j (1-based) feeds branches 2j+1 and 2j+2
    let f = |b: usize| flows[b - 1];
    (1..=14usize)
        .map(|j| (f(j) - f(2 * j + 1) - f(2 * j + 2)).abs())
        .sum()
}

proptest! {
    #[test]
    fn compatibility_matches_definition(flows in prop::array::uniform30(0.0f64..5000.0)) {
        let c = capillary::compatibility_of(&flows);
        prop_assert!(c >= 0.0);
        prop_assert!((c - brute_cmp(&flows)).abs() <= 1e-9 * c.max(1.0));
    }

    #[test]
    fn scaled_baseline_is_balanced(scale in 1e-3f64..1e3) {
        let flows: [f64; N_BRANCHES] = std::array::from_fn(|k| capillary::baseline_flow(k + 1) * scale);
        prop_assert_eq!(capillary::compatibility_of(&flows), 0.0);
    }

    #[test]
    fn binary_update_respects_refractory(
        n in 2usize..12,
        seed_edges in prop::collection::vec((0usize..12, 0usize..12, -1.0f64..=1.0), 0..60),
        fired in prop::collection::vec(any::<bool>(), 12),
        astro in -2.0f64..2.0,
    ) {
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (t, s, w) in seed_edges {
            let (t, s) = (t % n, s % n);
            if t != s && !edges.iter().any(|e| e.0 == t && e.1 == s) {
                edges.push((t, s, w));
            }
        }
        let graph = SynapseGraph::from_edges(n, &edges, false).unwrap();
        let state = NeuronState::new(fired[..n].iter().map(|&b| i8::from(b)).collect(), Encoding::Binary);
        let next = neurons::step_binary(&state, &graph, &vec![astro; n], &ThresholdVector::uniform(n, 0.3), &vec![0.0; n]);
        for i in 0..n {
            if state.values[i] == 1 {
                prop_assert_eq!(next.values[i], 0);
            } else {
                let h: f64 = edges.iter().filter(|e| e.0 == i && state.values[e.1] == 1).map(|e| e.2).sum();
                prop_assert_eq!(next.values[i], i8::from(h + astro - 0.3 >= 0.0));
            }
        }
    }

    #[test]
    fn bipolar_update_matches_sign_rule(
        weights in prop::collection::vec(-1.0f64..=1.0, 20),
        bits in prop::collection::vec(any::<bool>(), 5),
        noise in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let mut edges = Vec::new();
        let mut k = 0;
        for t in 0..5 {
            for s in 0..5 {
                if s != t {
                    edges.push((t, s, weights[k]));
                    k += 1;
                }
            }
        }
        let graph = SynapseGraph::from_edges(5, &edges, false).unwrap();
        let s: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
        let next = neurons::step_bipolar(&NeuronState::new(s.clone(), Encoding::Bipolar), &graph, &noise, 0.0);
        for i in 0..5 {
            let h: f64 = edges.iter().filter(|e| e.0 == i).map(|e| e.2 * f64::from(s[e.1])).sum();
            prop_assert_eq!(next.values[i], if h + noise[i] >= 0.0 { 1 } else { -1 });
        }
    }

    #[test]
    fn config_round_trips_through_toml(mu in 0.0f64..1.0, n_firing in 1usize..80, k in 0.0f64..2.0, seed in any::<u64>()) {
        let mut cfg = SimConfig::default();
        cfg.synapse.mu = mu;
        cfg.capillary.n_firing = n_firing;
        cfg.astro.k_excite = k;
        cfg.seed = seed;
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.validate().unwrap().hash(), cfg.validate().unwrap().hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn short_runs_are_reproducible(seed in any::<u64>(), mu in 0.0f64..0.3) {
        let mut cfg = model_a(40);
        cfg.seed = seed;
        cfg.synapse.mu = mu;
        let a = run_model_a(&cfg).unwrap().trace_csv();
        cfg.workers = 3;
        prop_assert_eq!(a, run_model_a(&cfg).unwrap().trace_csv());
    }
}
