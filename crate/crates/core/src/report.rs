//! Empirical constant estimates shared by the verification modules.

use crate::linalg::CMat;

/// A matrix attached to a report under a short name, e.g. `"x"` or `"f"`.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: CMat,
}

impl NamedMatrix {
    pub fn new(name: impl Into<String>, matrix: CMat) -> Self {
        Self { name: name.into(), matrix }
    }
}

/// An empirical constant with the instance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantReport {
    pub constant: f64,
    /// Zero for deterministic estimates.
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub witness: Vec<NamedMatrix>,
    pub notes: Vec<String>,
}

impl ConstantReport {
    pub fn new(constant: f64, samples: u64, seed: u64) -> Self {
        Self { constant, std_error: 0.0, samples, seed, witness: Vec::new(), notes: Vec::new() }
    }

    pub fn with_witness(mut self, witness: Vec<NamedMatrix>) -> Self {
        self.witness = witness;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
