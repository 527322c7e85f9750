use std::fmt;

use thiserror::Error;

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Flat key path, e.g. `capillary.n_firing`.
    pub path: String,
    pub message: String,
}

/// Every violation found while validating a config, in field order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigReport {
    pub violations: Vec<Violation>,
}

impl ConfigReport {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n{0}")]
    Config(ConfigReport),
    #[error("{n} neurons cannot be split evenly over {branches} capillary branches")]
    BranchDivisibility { n: usize, branches: usize },
    #[error("neuron {target}: {requested} local synapses requested but only {available} distinct sources exist")]
    DegreeTooLarge {
        target: usize,
        requested: usize,
        available: usize,
    },
    #[error("{n} neurons do not form a square lattice that fits a {side}x{side} astrocyte grid")]
    Lattice { n: usize, side: usize },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String, valid: Vec<String> },
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
