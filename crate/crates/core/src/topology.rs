//! Backend coupling graphs with calibration data, architecture embeddings and
//! the aggregate error of a placed circuit.

use crate::circuit::{Circuit, GateKind};
use crate::gmqaoa::Architecture;
use crate::simulator::{InstanceRate, NoiseModel, ReadoutError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("no calibration for gate {gate} on qubits {qubits:?}")]
    MissingGateError { gate: String, qubits: Vec<usize> },
    #[error("no readout calibration for qubit {0}")]
    MissingReadout(usize),
    #[error("edge ({0}, {1}) references a qubit outside the backend")]
    BadEdge(usize, usize),
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("embedding maps {got} wires but the circuit has {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("unknown bundled backend {0:?}")]
    UnknownBackend(String),
    #[error("invalid backend file: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateError {
    pub gate: GateKind,
    pub qubits: Vec<usize>,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitReadout {
    pub q: usize,
    pub p01: f64,
    pub p10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendTopology {
    pub name: String,
    #[serde(rename = "qubits")]
    pub qubit_count: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub gate_errors: Vec<GateError>,
    #[serde(default, rename = "readout")]
    pub readout_errors: Vec<QubitReadout>,
    #[serde(default, rename = "qv")]
    pub quantum_volume: Option<u32>,
    #[serde(default, rename = "date")]
    pub snapshot_date: Option<String>,
}

const BUNDLED: [(&str, &str); 2] = [
    ("line5", include_str!("../data/backends/line5.json")),
    ("tee5", include_str!("../data/backends/tee5.json")),
];

impl BackendTopology {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let b: Self = serde_json::from_str(text).map_err(|e| TopologyError::Json(e.to_string()))?;
        b.validate()?;
        Ok(b)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("backend serializes")
    }

    /// Names of the backends shipped with the crate.
    pub fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    pub fn bundled(name: &str) -> Result<Self, TopologyError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text))
            .unwrap_or_else(|| Err(TopologyError::UnknownBackend(name.to_string())))
    }

    /// A backend with the given coupling map and no calibration data.
    pub fn from_edges(name: &str, qubit_count: usize, edges: &[(usize, usize)]) -> Self {
        Self {
            name: name.to_string(),
            qubit_count,
            edges: edges.to_vec(),
            gate_errors: Vec::new(),
            readout_errors: Vec::new(),
            quantum_volume: None,
            snapshot_date: None,
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        for &(a, b) in &self.edges {
            if a >= self.qubit_count || b >= self.qubit_count || a == b {
                return Err(TopologyError::BadEdge(a, b));
            }
        }
        let probs = self
            .gate_errors
            .iter()
            .map(|g| g.e)
            .chain(self.readout_errors.iter().flat_map(|r| [r.p01, r.p10]));
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(TopologyError::BadProbability(p));
            }
        }
        Ok(())
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.qubit_count];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    /// Error rate of `gate` on backend `qubits`; two-qubit entries match either order.
    pub fn gate_error(&self, gate: GateKind, qubits: &[usize]) -> Result<f64, TopologyError> {
        self.gate_errors
            .iter()
            .find(|g| {
                g.gate == gate
                    && (g.qubits == qubits
                        || (qubits.len() == 2 && g.qubits.len() == 2 && g.qubits[0] == qubits[1] && g.qubits[1] == qubits[0]))
            })
            .map(|g| g.e)
            .ok_or_else(|| TopologyError::MissingGateError {
                gate: gate.name().to_string(),
                qubits: qubits.to_vec(),
            })
    }

    pub fn readout(&self, q: usize) -> Result<ReadoutError, TopologyError> {
        self.readout_errors
            .iter()
            .find(|r| r.q == q)
            .map(|r| ReadoutError { p01: r.p01, p10: r.p10 })
            .ok_or(TopologyError::MissingReadout(q))
    }
}

/// How symmetric copies of an architecture are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingConvention {
    /// Two-wire lines count each backend edge once; every other shape counts
    /// all injective edge-preserving maps.
    #[default]
    UnorderedPairs,
    AllMaps,
    /// One embedding per distinct image edge set.
    DistinctSubgraphs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub architecture: Architecture,
    pub mapping: Vec<usize>,
}

impl Embedding {
    pub fn label(&self) -> String {
        self.mapping
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    fn image_edges(&self) -> BTreeSet<(usize, usize)> {
        self.architecture
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (self.mapping[a], self.mapping[b]);
                (x.min(y), x.max(y))
            })
            .collect()
    }
}

/// Wire order in which every wire after the first touches an earlier one.
fn search_order(arch: &Architecture) -> Vec<usize> {
    let adj = arch.adjacency();
    let mut order = vec![0];
    let mut seen = vec![false; arch.wires];
    seen[0] = true;
    let mut i = 0;
    while i < order.len() {
        for &v in &adj[order[i]] {
            if !seen[v] {
                seen[v] = true;
                order.push(v);
            }
        }
        i += 1;
    }
    order.extend((0..arch.wires).filter(|&w| !seen[w]));
    order
}

pub fn enumerate_embeddings(
    backend: &BackendTopology,
    arch: &Architecture,
    convention: EmbeddingConvention,
) -> Vec<Embedding> {
    if arch.wires > backend.qubit_count || arch.wires == 0 {
        return Vec::new();
    }
    let order = search_order(arch);
    let arch_adj = arch.adjacency();
    let adj = backend.adjacency();

    fn extend(
        depth: usize,
        order: &[usize],
        arch_adj: &[BTreeSet<usize>],
        adj: &[BTreeSet<usize>],
        mapping: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if depth == order.len() {
            out.push(mapping.iter().map(|m| m.unwrap()).collect());
            return;
        }
        let w = order[depth];
        for q in 0..adj.len() {
            if used[q] {
                continue;
            }
            let ok = arch_adj[w]
                .iter()
                .all(|&v| mapping[v].is_none_or(|mq| adj[q].contains(&mq)));
            if ok {
                mapping[w] = Some(q);
                used[q] = true;
                extend(depth + 1, order, arch_adj, adj, mapping, used, out);
                mapping[w] = None;
                used[q] = false;
            }
        }
    }

    let mut maps: Vec<Vec<usize>> = (0..backend.qubit_count)
        .into_par_iter()
        .map(|start| {
            let mut mapping = vec![None; arch.wires];
            let mut used = vec![false; backend.qubit_count];
            mapping[order[0]] = Some(start);
            used[start] = true;
            let mut out = Vec::new();
            extend(1, &order, &arch_adj, &adj, &mut mapping, &mut used, &mut out);
            out
        })
        .flatten()
        .collect();
    maps.sort();

    let embeddings = maps.into_iter().map(|mapping| Embedding {
        architecture: arch.clone(),
        mapping,
    });
    match convention {
        EmbeddingConvention::AllMaps => embeddings.collect(),
        EmbeddingConvention::UnorderedPairs => {
            if arch.wires == 2 && arch.edges.len() == 1 {
                embeddings.filter(|e| e.mapping[0] < e.mapping[1]).collect()
            } else {
                embeddings.collect()
            }
        }
        EmbeddingConvention::DistinctSubgraphs => {
            let mut seen = BTreeSet::new();
            embeddings.filter(|e| seen.insert(e.image_edges())).collect()
        }
    }
}

/// Backend qubits touched by the circuit's measurements, in wire order.
fn measured_qubits(circuit: &Circuit, embedding: &Embedding) -> Vec<usize> {
    circuit
        .measured_wires()
        .iter()
        .chain(circuit.ancilla_wires().iter())
        .map(|&w| embedding.mapping[w])
        .collect()
}

/// `1 - Π(1 - e_i) Π(1 - m_i)` over placed gates and measured qubits.
pub fn aggregate_error(
    circuit: &Circuit,
    embedding: &Embedding,
    backend: &BackendTopology,
) -> Result<f64, TopologyError> {
    if embedding.mapping.len() != circuit.n() {
        return Err(TopologyError::WidthMismatch {
            got: embedding.mapping.len(),
            expected: circuit.n(),
        });
    }
    let mut success = 1.0;
    for g in circuit.gates() {
        let qubits: Vec<usize> = g.wires().iter().map(|&w| embedding.mapping[w]).collect();
        success *= 1.0 - backend.gate_error(g.kind(), &qubits)?;
    }
    for q in measured_qubits(circuit, embedding) {
        let r = backend.readout(q)?;
        success *= 1.0 - 0.5 * (r.p01 + r.p10);
    }
    Ok((1.0 - success).clamp(0.0, 1.0))
}

/// Aggregate error implied by a synthetic noise model.
pub fn aggregate_error_of_noise(circuit: &Circuit, noise: &NoiseModel) -> f64 {
    let gates: f64 = circuit
        .gates()
        .iter()
        .map(|g| 1.0 - noise.rate_for(g))
        .product();
    let readout: f64 = circuit
        .measured_wires()
        .iter()
        .chain(circuit.ancilla_wires().iter())
        .map(|&w| {
            let r = noise.readout_for(w);
            1.0 - 0.5 * (r.p01 + r.p10)
        })
        .product();
    (1.0 - gates * readout * (1.0 - noise.global_depolarizing)).clamp(0.0, 1.0)
}

/// Noise model for `circuit` placed on `backend` through `embedding`.
pub fn noise_from_backend(
    circuit: &Circuit,
    embedding: &Embedding,
    backend: &BackendTopology,
    seed: u64,
) -> Result<NoiseModel, TopologyError> {
    let mut rates: BTreeMap<(GateKind, Vec<usize>), f64> = BTreeMap::new();
    for g in circuit.gates() {
        let wires = g.wires();
        let qubits: Vec<usize> = wires.iter().map(|&w| embedding.mapping[w]).collect();
        let e = backend.gate_error(g.kind(), &qubits)?;
        rates.insert((g.kind(), wires), e);
    }
    let readout = (0..circuit.n())
        .map(|w| backend.readout(embedding.mapping[w]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NoiseModel {
        instance_depolarizing: rates
            .into_iter()
            .map(|((gate, wires), p)| InstanceRate { gate, wires, p })
            .collect(),
        readout,
        seed,
        ..NoiseModel::default()
    })
}
