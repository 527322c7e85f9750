//! Run configuration.
//!
//! Config files are TOML restricted to flat dotted key paths, e.g.
//!
//! ```toml
//! model = "a"
//! seed = 7
//! capillary.n_firing = 25
//! synapse.mu = 0.05
//! ```
//!
//! Any key can also be set from the environment as
//! `NVSIM_<SECTION>__<FIELD>` (e.g. `NVSIM_CAPILLARY__N_FIRING=25`) or, for
//! top-level keys, `NVSIM_<FIELD>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::astro::AstroParams;
use crate::capillary::{CapillaryParams, N_BRANCHES};
use crate::error::{ConfigReport, Result, SimError};
use crate::neurons::{NeuronParams, NoiseParams};
use crate::plasticity::PlasticityParams;
use crate::synapses::SynapseParams;

pub const ENV_PREFIX: &str = "NVSIM_";

pub const REFERENCE_NEURONS_A: usize = 2400;
pub const REFERENCE_NEURONS_B: usize = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// Neurons coupled to the capillary tree.
    #[serde(rename = "a")]
    Neurovascular,
    /// Neurons coupled to the astrocyte grid, with adaptive synapses.
    #[serde(rename = "b-coupled")]
    Neuroglial,
    /// The model B neuron population alone.
    #[serde(rename = "b-pure")]
    PureNeuron,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Neurovascular => "a",
            Model::Neuroglial => "b-coupled",
            Model::PureNeuron => "b-pure",
        }
    }

    pub fn reference_neurons(self) -> usize {
        match self {
            Model::Neurovascular => REFERENCE_NEURONS_A,
            Model::Neuroglial | Model::PureNeuron => REFERENCE_NEURONS_B,
        }
    }

    pub fn is_b(self) -> bool {
        !matches!(self, Model::Neurovascular)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "a" => Ok(Model::Neurovascular),
            "b-coupled" => Ok(Model::Neuroglial),
            "b-pure" => Ok(Model::PureNeuron),
            other => Err(format!(
                "unknown model `{other}` (expected a, b-coupled or b-pure)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub model: Model,
    /// Defaults to 2400 for model A and 900 for model B.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_neurons: Option<usize>,
    pub seed: u64,
    /// Number of 1 ms ticks to simulate.
    pub t_max: u64,
    /// Worker threads for per-tick fan-out; 0 uses every available core.
    /// Results do not depend on this value.
    pub workers: usize,
    /// Longest period searched by cycle detection.
    pub max_period: usize,
    pub synapse: SynapseParams,
    pub neuron: NeuronParams,
    pub noise: NoiseParams,
    pub capillary: CapillaryParams,
    pub astro: AstroParams,
    pub plasticity: PlasticityParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: Model::Neurovascular,
            n_neurons: None,
            seed: 1,
            t_max: 500,
            workers: 1,
            max_period: 10,
            synapse: SynapseParams::default(),
            neuron: NeuronParams::default(),
            noise: NoiseParams::default(),
            capillary: CapillaryParams::default(),
            astro: AstroParams::default(),
            plasticity: PlasticityParams::default(),
        }
    }
}

/// A config that passed validation, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    cfg: SimConfig,
    pub warnings: Vec<String>,
}

impl std::ops::Deref for ValidConfig {
    type Target = SimConfig;

    fn deref(&self) -> &SimConfig {
        &self.cfg
    }
}

impl ValidConfig {
    pub fn n(&self) -> usize {
        self.cfg.n_neurons.expect("filled during validation")
    }

    pub fn into_inner(self) -> SimConfig {
        self.cfg
    }

    /// Canonical TOML serialization of the resolved config.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.cfg).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

impl SimConfig {
    pub fn for_model(model: Model) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn n(&self) -> usize {
        self.n_neurons.unwrap_or(self.model.reference_neurons())
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> std::result::Result<ValidConfig, ConfigReport> {
        let mut cfg = self.clone();
        cfg.n_neurons = Some(cfg.n());
        cfg.synapse.normalize();
        let n = cfg.n();
        let mut report = ConfigReport::default();
        let mut warnings = Vec::new();

        if n == 0 {
            report.push("n_neurons", "must be positive");
        }
        if cfg.t_max < 1 {
            report.push("t_max", "t_max must be ≥ 1");
        }
        if cfg.max_period < 1 {
            report.push("max_period", "must be ≥ 1");
        }
        match cfg.model {
            Model::Neurovascular => {
                if !n.is_multiple_of(N_BRANCHES) {
                    report.push(
                        "n_neurons",
                        format!("{n} is not divisible by the {N_BRANCHES} capillary branches"),
                    );
                }
            }
            Model::Neuroglial | Model::PureNeuron => {
                let side = n.isqrt();
                if side * side != n || 2 * side > cfg.astro.grid_side {
                    report.push(
                        "n_neurons",
                        format!(
                            "{n} is not a square lattice fitting the {0}x{0} astrocyte grid",
                            cfg.astro.grid_side
                        ),
                    );
                }
            }
        }
        if n != cfg.model.reference_neurons() && report.is_empty() {
            warnings.push(format!(
                "non-reference scale: {n} neurons (model {} uses {})",
                cfg.model,
                cfg.model.reference_neurons()
            ));
        }

        cfg.synapse.check(n, &mut report);
        cfg.neuron.check(&mut report);
        cfg.noise.check(&mut report);
        // the per-branch bound only means something when the tree exists
        let per_branch = match cfg.model {
            Model::Neurovascular => (n / N_BRANCHES).max(1),
            _ => usize::MAX,
        };
        cfg.capillary.check(per_branch, &mut report);
        cfg.astro.check(&mut report);
        cfg.plasticity.check(&mut report);

        if report.is_empty() {
            Ok(ValidConfig { cfg, warnings })
        } else {
            Err(report)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    // optional fields filled in so that serialization shows every key
    fn all_fields_set() -> Self {
        let mut full = Self {
            n_neurons: Some(0),
            ..Self::default()
        };
        full.synapse.sigma_deg = Some(0.0);
        full.noise.pulse_window = Some((0, 0));
        full.noise.neg_pulse_window = Some((0, 0));
        full
    }

    /// Every settable flat key path.
    pub fn key_paths() -> Vec<String> {
        let table = Value::try_from(Self::all_fields_set()).expect("config serializes");
        let mut out = Vec::new();
        collect_paths(&table, "", &mut out);
        out
    }

    /// Sets one flat key path from its textual value.
    ///
    /// The text is read as a TOML value; bare words are taken as strings.
    /// Numbers written into integer fields are rounded.
    pub fn set_path(&mut self, key: &str, raw: &str) -> Result<()> {
        let valid = Self::key_paths();
        if !valid.iter().any(|k| k == key) {
            return Err(SimError::UnknownKey {
                key: key.to_string(),
                valid,
            });
        }
        let value = parse_scalar(raw);
        self.set_value(key, value)
    }

    /// Sets a numeric key, rounding when the field is an integer.
    pub fn set_number(&mut self, key: &str, x: f64) -> Result<()> {
        let valid = Self::key_paths();
        if !valid.iter().any(|k| k == key) {
            return Err(SimError::UnknownKey {
                key: key.to_string(),
                valid,
            });
        }
        self.set_value(key, Value::Float(x))
    }

    fn set_value(&mut self, key: &str, value: Value) -> Result<()> {
        let bad = |reason: String| SimError::BadValue {
            key: key.to_string(),
            reason,
        };
        let mut root = Value::try_from(&*self).expect("config serializes");
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().expect("non-empty key");
        let mut table: &mut Table = root.as_table_mut().expect("table root");
        for p in parents {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .ok_or_else(|| bad("not a section".into()))?;
        }
        let template = Self::template_for(key);
        let coerced = coerce(value, template.as_ref()).map_err(bad)?;
        table.insert(last.to_string(), coerced);
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        Ok(())
    }

    fn template_for(key: &str) -> Option<Value> {
        let mut v = Value::try_from(Self::all_fields_set()).ok()?;
        for p in key.split('.') {
            v = v.as_table()?.get(p)?.clone();
        }
        Some(v)
    }

    /// Applies `NVSIM_*` overrides from `vars`; returns the keys that were set.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<Vec<String>>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut set = Vec::new();
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let rest = k.as_ref().strip_prefix(ENV_PREFIX)?;
                Some((
                    rest.to_ascii_lowercase().replace("__", "."),
                    v.as_ref().to_string(),
                ))
            })
            .collect();
        pairs.sort();
        for (key, value) in pairs {
            self.set_path(&key, &value)?;
            set.push(key);
        }
        Ok(set)
    }
}

fn collect_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Table(t) = v {
        for (k, child) in t {
            let path = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            if child.is_table() {
                collect_paths(child, &path, out);
            } else {
                out.push(path);
            }
        }
    }
}

fn parse_scalar(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn coerce(value: Value, template: Option<&Value>) -> std::result::Result<Value, String> {
    match (template, value) {
        (Some(Value::Integer(_)), Value::Float(x)) => {
            let r = x.round();
            if !r.is_finite() || r < i64::MIN as f64 || r > i64::MAX as f64 {
                return Err(format!("{x} is not representable as an integer"));
            }
            Ok(Value::Integer(r as i64))
        }
        (Some(Value::Float(_)), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (_, v) => Ok(v),
    }
}
