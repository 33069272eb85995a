use crate::CliError;
use fairsample::fairness::{DEFAULT_CAP, DEFAULT_INNER_LOOPS};
use fairsample::gmqaoa::supported_architectures;
use fairsample::ising::PROBLEM_NAMES;
use fairsample::topology::BackendTopology;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Kinds of noise a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Noiseless,
    /// Replace the final state with the uniform mixture with probability `p`.
    Global,
    /// Uniform Pauli noise after every gate.
    Depolarizing,
    /// Over-rotation of every phase, in radians.
    Coherent,
    /// ZZ phase after every CNOT, in radians.
    ZzAfterCnot,
    /// Symmetric readout flips.
    Readout,
    /// Calibration data of every configured backend, over all embeddings.
    Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub kind: NoiseKind,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AngleSource {
    Table,
    GridSearch { steps: usize },
}

fn default_shots() -> u64 {
    40960
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_noise() -> Vec<NoiseSweep> {
    vec![NoiseSweep {
        kind: NoiseKind::Noiseless,
        values: vec![],
    }]
}
fn default_angles() -> AngleSource {
    AngleSource::Table
}
fn default_inner() -> usize {
    DEFAULT_INNER_LOOPS
}
fn default_cap() -> u64 {
    DEFAULT_CAP
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment matrix, read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<String>,
    /// Architectures per problem; problems not listed use all of theirs.
    #[serde(default)]
    pub architectures: BTreeMap<String, Vec<String>>,
    /// Bundled backend names or paths to backend JSON files.
    #[serde(default)]
    pub backends: Vec<String>,
    #[serde(default = "default_noise")]
    pub noise: Vec<NoiseSweep>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_angles")]
    pub angles: AngleSource,
    #[serde(default = "default_inner")]
    pub nsrfs_inner: usize,
    #[serde(default = "default_cap")]
    pub nsrfs_cap: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problems: Vec::new(),
            architectures: BTreeMap::new(),
            backends: Vec::new(),
            noise: default_noise(),
            shots: default_shots(),
            seeds: default_seeds(),
            angles: default_angles(),
            nsrfs_inner: default_inner(),
            nsrfs_cap: default_cap(),
            output: default_output(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.nsrfs_inner == 0 {
            return bad("nsrfs_inner must be at least 1".into());
        }
        for p in &self.problems {
            if !PROBLEM_NAMES.contains(&p.as_str()) {
                return bad(format!("unknown problem {p:?}"));
            }
        }
        for (p, archs) in &self.architectures {
            if !self.problems.contains(p) {
                return bad(format!("architectures given for unlisted problem {p:?}"));
            }
            for a in archs {
                if !supported_architectures(p).contains(&a.as_str()) {
                    return bad(format!("problem {p} has no circuit for architecture {a}"));
                }
            }
        }
        for s in &self.noise {
            let needs_values = !matches!(s.kind, NoiseKind::Noiseless | NoiseKind::Backend);
            if needs_values && s.values.is_empty() {
                return bad(format!("noise sweep {:?} has no values", s.kind));
            }
            let probability = matches!(s.kind, NoiseKind::Global | NoiseKind::Depolarizing | NoiseKind::Readout);
            if let Some(v) = s.values.iter().find(|v| !v.is_finite() || (probability && !(0.0..=1.0).contains(*v))) {
                return bad(format!("noise sweep {:?} has invalid value {v}", s.kind));
            }
            if s.kind == NoiseKind::Backend && self.backends.is_empty() {
                return bad("backend noise requested but no backends configured".into());
            }
        }
        if let AngleSource::GridSearch { steps: 0 } = self.angles {
            return bad("grid search needs at least one step".into());
        }
        Ok(())
    }

    /// Architectures to run for `problem`, in order.
    pub fn architectures_for(&self, problem: &str) -> Vec<String> {
        match self.architectures.get(problem) {
            Some(a) => a.clone(),
            None => supported_architectures(problem).iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn load_backends(&self) -> Result<Vec<BackendTopology>, CliError> {
        self.backends
            .iter()
            .map(|b| {
                if BackendTopology::bundled_names().contains(&b.as_str()) {
                    return BackendTopology::bundled(b).map_err(|e| CliError::Config(e.to_string()));
                }
                let text = std::fs::read_to_string(b).map_err(|e| CliError::Config(format!("{b}: {e}")))?;
                BackendTopology::from_json(&text).map_err(|e| CliError::Config(format!("{b}: {e}")))
            })
            .collect()
    }
}
