//! Grover-mixer QAOA circuits compiled onto small coupling graphs, plus the
//! angle grid search.

mod parity;
mod route;

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{self, Circuit, CircuitError, Gate};
use crate::ising::{builtin_problem, fix_q0_up, ground_states, IsingError, IsingModel};
use parity::{NetOp, NetSpec};
pub use route::Placement;

/// Widest architecture the compiler accepts.
pub const MAX_ARCH_WIRES: usize = 8;

#[derive(Debug, Error)]
pub enum GmqaoaError {
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
    #[error("model needs {model} wires but the architecture has {wires}")]
    TooWide { model: usize, wires: usize },
    #[error("ancilla requested but the architecture has no spare wire")]
    NoSpareWire,
    #[error("no placement leaves a spare wire next to two logical wires")]
    NoAncillaSite,
    #[error("terms cannot be routed on this architecture")]
    Unroutable,
    #[error("routing search space too large")]
    TooLarge,
    #[error("mixer network search failed")]
    MixerSearch,
    #[error("problem {problem:?} is not compiled for architecture {architecture:?}")]
    Unsupported { problem: String, architecture: String },
    #[error("angle lists must have equal, non-zero length")]
    BadAngles,
    #[error("placement does not match the model or architecture")]
    BadPlacement,
    #[error(transparent)]
    Ising(#[from] IsingError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl From<route::RouteError> for GmqaoaError {
    fn from(e: route::RouteError) -> Self {
        match e {
            route::RouteError::Unroutable => GmqaoaError::Unroutable,
            route::RouteError::TooLarge => GmqaoaError::TooLarge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub wires: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Architecture {
    pub const NAMES: [&'static str; 5] = ["2L", "3L", "4L", "4T", "5T"];

    pub fn new(name: &str, wires: usize, edges: Vec<(usize, usize)>) -> Result<Self, GmqaoaError> {
        let arch = Self {
            name: name.to_string(),
            wires,
            edges,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn named(name: &str) -> Result<Self, GmqaoaError> {
        let edges = match name {
            "2L" => vec![(0, 1)],
            "3L" => vec![(0, 1), (1, 2)],
            "4L" => vec![(0, 1), (1, 2), (2, 3)],
            "4T" => vec![(0, 1), (1, 2), (1, 3)],
            "5T" => vec![(0, 1), (1, 2), (1, 3), (3, 4)],
            _ => return Err(GmqaoaError::UnknownArchitecture(name.to_string())),
        };
        let wires = edges.iter().map(|&(a, b)| a.max(b)).max().unwrap() + 1;
        Self::new(name, wires, edges)
    }

    /// Path on `k` wires.
    pub fn line(k: usize) -> Self {
        Self {
            name: format!("{k}L"),
            wires: k,
            edges: (1..k).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), GmqaoaError> {
        let bad = |m: &str| Err(GmqaoaError::BadArchitecture(m.to_string()));
        if self.wires == 0 || self.wires > MAX_ARCH_WIRES {
            return bad("wire count out of range");
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a >= self.wires || b >= self.wires || a == b {
                return bad("edge out of range");
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return bad("duplicate edge");
            }
        }
        let adj = self.adjacency();
        let mut reached = vec![false; self.wires];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(w) = stack.pop() {
            for &x in &adj[w] {
                if !reached[x] {
                    reached[x] = true;
                    stack.push(x);
                }
            }
        }
        if reached.contains(&false) {
            return bad("graph is disconnected");
        }
        Ok(())
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.wires];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&e| e == (a, b) || e == (b, a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleParams {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl AngleParams {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self, GmqaoaError> {
        if betas.is_empty() || betas.len() != gammas.len() {
            return Err(GmqaoaError::BadAngles);
        }
        Ok(Self { betas, gammas })
    }

    pub fn single(beta: f64, gamma: f64) -> Self {
        Self {
            betas: vec![beta],
            gammas: vec![gamma],
        }
    }

    pub fn rounds(&self) -> usize {
        self.betas.len()
    }

    /// Published one-round angles for a built-in problem.
    pub fn table(problem: &str) -> Option<Self> {
        let (b, g) = match problem {
            "a" => (-1.0 / 2.0, -11.0 / 12.0),
            "b" => (-11.0 / 15.0, -17.0 / 60.0),
            "c" => (-23.0 / 60.0, 1.0 / 15.0),
            "d" => (-5.0 / 12.0, 1.0 / 10.0),
            "e" => (-23.0 / 60.0, 3.0 / 5.0),
            _ => return None,
        };
        Some(Self::single(b * PI, g * PI))
    }
}

/// Architectures each built-in problem is compiled for.
pub fn supported_architectures(problem: &str) -> &'static [&'static str] {
    match problem {
        "a" | "b" => &["4L", "4T", "5T"],
        "c" => &["5T"],
        "d" => &["3L"],
        "e" | "f" => &["2L"],
        _ => &[],
    }
}

/// Whether a built-in row uses the clean-ancilla mixer.
pub fn uses_ancilla_by_default(problem: &str, architecture: &str) -> bool {
    matches!(problem, "a" | "b") && architecture == "5T"
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    Fixed,
    /// Exponent `coeff * β_round / π`.
    Beta(usize, f64),
    /// Exponent `coeff * γ_round / π`.
    Gamma(usize, f64),
}

/// A compiled gate list whose phase exponents are linear in the angles.
#[derive(Debug, Clone)]
pub struct CircuitTemplate {
    wires: usize,
    rounds: usize,
    gates: Vec<(Gate, Param)>,
    perm: Vec<usize>,
    measured: Vec<usize>,
    ancillas: BTreeSet<usize>,
}

impl CircuitTemplate {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn uses_ancilla(&self) -> bool {
        !self.ancillas.is_empty()
    }

    pub fn instantiate(&self, angles: &AngleParams) -> Result<Circuit, GmqaoaError> {
        if angles.rounds() != self.rounds || angles.gammas.len() != self.rounds {
            return Err(GmqaoaError::BadAngles);
        }
        let mut c = Circuit::new(self.wires);
        for &(g, p) in &self.gates {
            let e = match p {
                Param::Fixed => None,
                Param::Beta(r, k) => Some(k * angles.betas[r] / PI),
                Param::Gamma(r, k) => Some(k * angles.gammas[r] / PI),
            };
            c.append(match (g, e) {
                (Gate::Phase { wire, .. }, Some(exponent)) => Gate::Phase { exponent, wire },
                _ => g,
            })?;
        }
        c.set_readout(self.perm.clone(), self.measured.clone(), self.ancillas.clone())?;
        Ok(c)
    }
}

fn beta_phase(round: usize, coeff: f64, wire: usize) -> (Gate, Param) {
    (Gate::phase(0.0, wire), Param::Beta(round, coeff))
}

fn gamma_phase(round: usize, coeff: f64, wire: usize) -> (Gate, Param) {
    (Gate::phase(0.0, wire), Param::Gamma(round, coeff))
}

fn fixed(g: Gate) -> (Gate, Param) {
    (g, Param::Fixed)
}

struct MixerPlan {
    gates: Vec<(Gate, Param)>,
    end: Placement,
    cnots: usize,
    ancilla: Option<usize>,
}

/// Compute-AND of wires `a`, `b` into clean wire `h`, up to a phase on the controls.
fn and_gadget(a: usize, b: usize, h: usize) -> Vec<Gate> {
    vec![
        Gate::H(h),
        Gate::T(h),
        Gate::cnot(a, h),
        Gate::Tdg(h),
        Gate::cnot(b, h),
        Gate::T(h),
        Gate::cnot(a, h),
        Gate::Tdg(h),
        Gate::H(h),
    ]
}

fn occupied(p: &Placement) -> Vec<usize> {
    (0..p.len()).filter(|&w| p[w].is_some()).collect()
}

/// Mixer from a given placement: the multi-controlled phase becomes a parity
/// network on the architecture, optionally around an AND into a spare wire.
fn plan_mixer(
    arch: &Architecture,
    placement: &Placement,
    round: usize,
    ancilla: bool,
) -> Result<Option<MixerPlan>, GmqaoaError> {
    let logical = occupied(placement);
    let m = logical.len();
    let mut head = Vec::new();
    let tail_layers = |end: &Placement, gates: &mut Vec<(Gate, Param)>| {
        for w in occupied(end) {
            gates.push(fixed(Gate::X(w)));
        }
        for w in occupied(end) {
            gates.push(fixed(Gate::H(w)));
        }
    };
    if m == 1 && !ancilla {
        let w = logical[0];
        let gates = vec![fixed(Gate::H(w)), beta_phase(round, 1.0, w), fixed(Gate::H(w))];
        return Ok(Some(MixerPlan {
            gates,
            end: placement.clone(),
            cnots: 0,
            ancilla: None,
        }));
    }
    for &w in &logical {
        head.push(fixed(Gate::H(w)));
    }
    for &w in &logical {
        head.push(fixed(Gate::X(w)));
    }
    let var_of = |w: usize| logical.iter().position(|&x| x == w).unwrap();
    let start: Vec<u32> = (0..arch.wires)
        .map(|w| if placement[w].is_some() { 1 << var_of(w) } else { 0 })
        .collect();

    let finish = |spec: &NetSpec, ops: &[NetOp], extra_cnots: usize| -> (Placement, usize) {
        let rows = parity::final_rows(spec, ops);
        let mut end = vec![None; arch.wires];
        for w in 0..arch.wires {
            if spec.fixed.contains(&w) {
                end[w] = placement[w];
            } else if rows[w] != 0 {
                let v = rows[w].trailing_zeros() as usize;
                if v < m {
                    end[w] = placement[logical[v]];
                }
            }
        }
        (end, parity::cnot_count(ops) + extra_cnots)
    };
    let weight = |spec: &NetSpec, i: usize| {
        let size = spec.targets[i].count_ones() as i32;
        let vars = spec.targets.iter().fold(0u32, |a, &t| a | t).count_ones() as i32;
        let sign = if size % 2 == 1 { 1.0 } else { -1.0 };
        -sign / 2f64.powi(vars - 1)
    };
    let emit = |spec: &NetSpec, ops: &[NetOp], gates: &mut Vec<(Gate, Param)>| {
        for op in ops {
            gates.push(match *op {
                NetOp::Cnot(c, t) => fixed(Gate::cnot(c, t)),
                NetOp::Phase(w, i) => beta_phase(round, weight(spec, i), w),
            });
        }
    };

    if !ancilla {
        let spec = NetSpec {
            wires: arch.wires,
            edges: arch.edges.clone(),
            start,
            targets: parity::submasks((1u32 << m) - 1),
            fixed: vec![],
        };
        let ops = parity::synthesize(&spec).ok_or(GmqaoaError::MixerSearch)?;
        let (end, cnots) = finish(&spec, &ops, 0);
        let mut gates = head;
        emit(&spec, &ops, &mut gates);
        tail_layers(&end, &mut gates);
        return Ok(Some(MixerPlan {
            gates,
            end,
            cnots,
            ancilla: None,
        }));
    }

    let adj = arch.adjacency();
    let mut best: Option<(usize, NetSpec, Arc<Vec<NetOp>>, usize, usize, usize)> = None;
    for h in (0..arch.wires).filter(|&w| placement[w].is_none()) {
        let near: Vec<usize> = adj[h].iter().copied().filter(|&w| placement[w].is_some()).collect();
        for (i, &r3) in near.iter().enumerate() {
            for &r4 in &near[i + 1..] {
                let mut rows = start.clone();
                rows[h] = 1 << m;
                let keep = logical
                    .iter()
                    .filter(|&&w| w != r3 && w != r4)
                    .fold(1u32 << m, |acc, &w| acc | 1 << var_of(w));
                let spec = NetSpec {
                    wires: arch.wires,
                    edges: arch.edges.clone(),
                    start: rows,
                    targets: parity::submasks(keep),
                    fixed: vec![h, r3, r4],
                };
                let Some(ops) = parity::synthesize(&spec) else {
                    continue;
                };
                let cost = parity::cnot_count(&ops) + 6;
                if best.as_ref().is_none_or(|b| cost < b.0) {
                    best = Some((cost, spec, ops, h, r3, r4));
                }
            }
        }
    }
    let Some((_, spec, ops, h, r3, r4)) = best else {
        return Ok(None);
    };
    let (end, cnots) = finish(&spec, &ops, 6);
    let mut gates = head;
    let and = and_gadget(r3, r4, h);
    gates.extend(and.iter().copied().map(fixed));
    emit(&spec, &ops, &mut gates);
    gates.extend(and.iter().rev().map(|g| fixed(g.inverse())));
    tail_layers(&end, &mut gates);
    Ok(Some(MixerPlan {
        gates,
        end,
        cnots,
        ancilla: Some(h),
    }))
}

fn quadratic_terms(model: &IsingModel) -> (Vec<(usize, usize)>, Vec<f64>) {
    let pairs = model.quadratic.iter().map(|&(i, j, _)| (i.min(j), i.max(j))).collect();
    let coeffs = model.quadratic.iter().map(|&(_, _, c)| c).collect();
    (pairs, coeffs)
}

fn check_fit(model: &IsingModel, arch: &Architecture) -> Result<(), GmqaoaError> {
    model.validate()?;
    arch.validate()?;
    if model.n > arch.wires {
        return Err(GmqaoaError::TooWide {
            model: model.n,
            wires: arch.wires,
        });
    }
    Ok(())
}

fn check_placement(p: &[Option<usize>], n: usize, arch: &Architecture) -> Result<(), GmqaoaError> {
    let labels: BTreeSet<usize> = p.iter().flatten().copied().collect();
    let count = p.iter().flatten().count();
    if p.len() != arch.wires || count != n || labels.len() != n || labels.iter().any(|&l| l >= n) {
        return Err(GmqaoaError::BadPlacement);
    }
    Ok(())
}

/// Compile `rounds` rounds of the Grover-mixer QAOA for a reduced model.
pub fn compile_template(
    model: &IsingModel,
    arch: &Architecture,
    rounds: usize,
    allow_ancilla: bool,
) -> Result<CircuitTemplate, GmqaoaError> {
    check_fit(model, arch)?;
    if rounds == 0 {
        return Err(GmqaoaError::BadAngles);
    }
    let m = model.n;
    if allow_ancilla && m >= arch.wires {
        return Err(GmqaoaError::NoSpareWire);
    }
    let (pairs, coeffs) = quadratic_terms(model);
    let mut gates = Vec::new();
    let mut ancillas = BTreeSet::new();
    let mut current: Option<Placement> = None;
    for r in 0..rounds {
        let sources = match &current {
            Some(p) => vec![p.clone()],
            None => route::all_placements(m, arch.wires),
        };
        let routes = route::route(arch, m, &pairs, &sources)?;
        let mut best: Option<(usize, route::Route, MixerPlan)> = None;
        let mut plans: HashMap<Placement, Option<(usize, Placement)>> = HashMap::new();
        for rt in routes {
            if best.as_ref().is_some_and(|b| rt.cost >= b.0) {
                break;
            }
            let plan = plan_mixer(arch, &rt.end, r, allow_ancilla)?;
            plans.insert(rt.end.clone(), plan.as_ref().map(|p| (p.cnots, p.end.clone())));
            if let Some(plan) = plan {
                let total = rt.cost + plan.cnots;
                if best.as_ref().is_none_or(|b| total < b.0) {
                    best = Some((total, rt, plan));
                }
            }
        }
        let (_, rt, plan) = best.ok_or(GmqaoaError::NoAncillaSite)?;
        if r == 0 {
            for w in occupied(&rt.start) {
                gates.push(fixed(Gate::H(w)));
            }
        }
        let wire_of = |l: usize| rt.start.iter().position(|&x| x == Some(l)).unwrap();
        for &(i, h) in &model.linear {
            gates.push(gamma_phase(r, -2.0 * h, wire_of(i)));
        }
        for op in &rt.ops {
            gates.push(match *op {
                route::RouteOp::Cnot(c, t) => fixed(Gate::cnot(c, t)),
                route::RouteOp::Term { wire, term } => gamma_phase(r, -2.0 * coeffs[term], wire),
            });
        }
        gates.extend(plan.gates);
        ancillas.extend(plan.ancilla);
        current = Some(plan.end);
    }
    let end = current.unwrap();
    let (perm, measured) = readout_of(&end);
    Ok(CircuitTemplate {
        wires: arch.wires,
        rounds,
        gates,
        perm,
        measured,
        ancillas,
    })
}

/// Readout permutation (spare wires labelled after the logicals) and measured wires.
fn readout_of(p: &Placement) -> (Vec<usize>, Vec<usize>) {
    let m = p.iter().flatten().count();
    let mut spare = m;
    let perm = p
        .iter()
        .map(|slot| {
            slot.unwrap_or_else(|| {
                spare += 1;
                spare - 1
            })
        })
        .collect();
    (perm, occupied(p))
}

fn fragment(arch: &Architecture, gates: Vec<Gate>, p: &Placement, ancilla: Option<usize>) -> Result<Circuit, GmqaoaError> {
    let mut c = Circuit::from_gates(arch.wires, gates)?;
    let (perm, measured) = readout_of(p);
    c.set_readout(perm, measured, ancilla.into_iter().collect())?;
    Ok(c)
}

/// One Hadamard per wire.
pub fn build_state_prep(n: usize) -> Circuit {
    Circuit::from_gates(n, (0..n).map(Gate::H)).expect("wires in range")
}

/// Phase separator `e^{-iγH}` starting from `current` (wire → logical).
/// Returns the fragment and the placement it leaves behind.
pub fn build_phase_separator(
    model: &IsingModel,
    gamma: f64,
    arch: &Architecture,
    current: &[Option<usize>],
) -> Result<(Circuit, Placement), GmqaoaError> {
    check_fit(model, arch)?;
    check_placement(current, model.n, arch)?;
    let (pairs, coeffs) = quadratic_terms(model);
    let routes = route::route(arch, model.n, &pairs, &[current.to_vec()])?;
    let rt = &routes[0];
    let mut gates = Vec::new();
    for &(i, h) in &model.linear {
        let w = current.iter().position(|&x| x == Some(i)).unwrap();
        gates.push(Gate::phase(-2.0 * gamma * h / PI, w));
    }
    for op in &rt.ops {
        gates.push(match *op {
            route::RouteOp::Cnot(c, t) => Gate::cnot(c, t),
            route::RouteOp::Term { wire, term } => Gate::phase(-2.0 * gamma * coeffs[term] / PI, wire),
        });
    }
    Ok((fragment(arch, gates, &rt.end, None)?, rt.end.clone()))
}

/// Grover mixer `e^{-iβ|+⟩⟨+|}` on the `n` logical wires of `current`.
pub fn build_grover_mixer(
    n: usize,
    beta: f64,
    arch: &Architecture,
    current: &[Option<usize>],
    allow_ancilla: bool,
) -> Result<(Circuit, Placement), GmqaoaError> {
    arch.validate()?;
    check_placement(current, n, arch)?;
    if allow_ancilla && n >= arch.wires {
        return Err(GmqaoaError::NoSpareWire);
    }
    let plan = plan_mixer(arch, &current.to_vec(), 0, allow_ancilla)?.ok_or(GmqaoaError::NoAncillaSite)?;
    let angles = AngleParams::single(beta, 0.0);
    let gates = plan
        .gates
        .iter()
        .map(|&(g, p)| match (g, p) {
            (Gate::Phase { wire, .. }, Param::Beta(_, k)) => Gate::phase(k * angles.betas[0] / PI, wire),
            _ => g,
        })
        .collect();
    Ok((fragment(arch, gates, &plan.end, plan.ancilla)?, plan.end))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    pub circuit: Circuit,
    pub architecture: Architecture,
    pub problem: String,
    pub angles: Option<AngleParams>,
    pub uses_ancilla: bool,
    /// Qubit 0 of `model` was fixed up and is not on the circuit.
    pub fixed_q0: bool,
    /// The model the circuit samples, before any qubit fixing.
    pub model: IsingModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    problem: String,
    architecture: Architecture,
    beta: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    uses_ancilla: bool,
    fixed_q0: bool,
    readout_perm: Vec<usize>,
    measured_wires: Vec<usize>,
    ancilla_wires: Vec<usize>,
    model: IsingModel,
}

impl CompiledCircuit {
    /// Model over the circuit's logical bits.
    pub fn circuit_model(&self) -> Result<IsingModel, GmqaoaError> {
        Ok(if self.fixed_q0 {
            fix_q0_up(&self.model)?
        } else {
            self.model.clone()
        })
    }

    pub fn to_qasm(&self) -> String {
        circuit::to_qasm(&self.circuit)
    }

    pub fn sidecar_json(&self) -> String {
        let sidecar = Sidecar {
            problem: self.problem.clone(),
            architecture: self.architecture.clone(),
            beta: self.angles.as_ref().map(|a| a.betas.clone()),
            gamma: self.angles.as_ref().map(|a| a.gammas.clone()),
            uses_ancilla: self.uses_ancilla,
            fixed_q0: self.fixed_q0,
            readout_perm: self.circuit.readout_perm().to_vec(),
            measured_wires: self.circuit.measured_wires().to_vec(),
            ancilla_wires: self.circuit.ancilla_wires().iter().copied().collect(),
            model: self.model.clone(),
        };
        serde_json::to_string_pretty(&sidecar).expect("serializable")
    }

    /// Rebuild from QASM text and its JSON sidecar.
    pub fn from_parts(qasm: &str, sidecar: &str) -> Result<Self, GmqaoaError> {
        let s: Sidecar = serde_json::from_str(sidecar)
            .map_err(|e| GmqaoaError::BadArchitecture(format!("sidecar: {e}")))?;
        let mut circuit = circuit::from_qasm(qasm)?;
        circuit.set_readout(s.readout_perm, s.measured_wires, s.ancilla_wires.into_iter().collect())?;
        let angles = match (s.beta, s.gamma) {
            (Some(b), Some(g)) => Some(AngleParams::new(b, g)?),
            _ => None,
        };
        Ok(Self {
            circuit,
            architecture: s.architecture,
            problem: s.problem,
            angles,
            uses_ancilla: s.uses_ancilla,
            fixed_q0: s.fixed_q0,
            model: s.model,
        })
    }

    /// Noiseless expectation of the model and ground-state probability.
    pub fn evaluate(&self) -> Result<(f64, f64), GmqaoaError> {
        let probs = circuit::logical_distribution(&self.circuit)?;
        score(&probs, &self.circuit_model()?)
    }
}

fn score(probs: &[f64], model: &IsingModel) -> Result<(f64, f64), GmqaoaError> {
    let energies = model.energies()?;
    let gs = ground_states(model)?;
    let e = probs.iter().zip(&energies).map(|(p, e)| p * e).sum();
    let g = gs.states.iter().map(|s| probs[s.index()]).sum();
    Ok((e, g))
}

type TemplateCache = Mutex<HashMap<String, Arc<CircuitTemplate>>>;

fn cached_template(
    model: &IsingModel,
    arch: &Architecture,
    rounds: usize,
    ancilla: bool,
) -> Result<Arc<CircuitTemplate>, GmqaoaError> {
    static CACHE: OnceLock<TemplateCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = serde_json::to_string(&(model, arch, rounds, ancilla)).expect("serializable");
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(compile_template(model, arch, rounds, ancilla)?);
    cache.lock().unwrap().insert(key, t.clone());
    Ok(t)
}

/// Circuit for a built-in problem on one of its architectures.
pub fn build_full_circuit(
    problem: &str,
    arch: &Architecture,
    angles: &AngleParams,
) -> Result<CompiledCircuit, GmqaoaError> {
    let unsupported = || GmqaoaError::Unsupported {
        problem: problem.to_string(),
        architecture: arch.name.clone(),
    };
    if !supported_architectures(problem).contains(&arch.name.as_str())
        || Architecture::named(&arch.name)? != *arch
    {
        return Err(unsupported());
    }
    let model = builtin_problem(problem)?;
    if problem == "f" {
        let circuit = Circuit::from_gates(2, [Gate::H(0), Gate::X(1), Gate::cnot(0, 1)])?;
        return Ok(CompiledCircuit {
            circuit,
            architecture: arch.clone(),
            problem: problem.to_string(),
            angles: None,
            uses_ancilla: false,
            fixed_q0: false,
            model,
        });
    }
    compile_model(&model, arch, angles, true, uses_ancilla_by_default(problem, &arch.name))
}

/// Compile an arbitrary model, optionally fixing qubit 0 up first.
pub fn compile_model(
    model: &IsingModel,
    arch: &Architecture,
    angles: &AngleParams,
    fix_q0: bool,
    allow_ancilla: bool,
) -> Result<CompiledCircuit, GmqaoaError> {
    let reduced = if fix_q0 { fix_q0_up(model)? } else { model.clone() };
    let template = cached_template(&reduced, arch, angles.rounds(), allow_ancilla)?;
    Ok(CompiledCircuit {
        circuit: template.instantiate(angles)?,
        architecture: arch.clone(),
        problem: model.label().to_string(),
        angles: Some(angles.clone()),
        uses_ancilla: template.uses_ancilla(),
        fixed_q0: fix_q0,
        model: model.clone(),
    })
}

/// Output distribution of the uncompiled algorithm, by direct state-vector algebra.
pub fn reference_distribution(model: &IsingModel, angles: &AngleParams) -> Result<Vec<f64>, GmqaoaError> {
    let energies = model.energies()?;
    let dim = energies.len();
    let amp = 1.0 / (dim as f64).sqrt();
    let mut psi = vec![Complex64::new(amp, 0.0); dim];
    for (&beta, &gamma) in angles.betas.iter().zip(&angles.gammas) {
        for (a, &e) in psi.iter_mut().zip(&energies) {
            *a *= Complex64::from_polar(1.0, -gamma * e);
        }
        let overlap: Complex64 = psi.iter().sum::<Complex64>() * amp;
        let k = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -beta)) * overlap * amp;
        for a in psi.iter_mut() {
            *a -= k;
        }
    }
    Ok(psi.iter().map(|a| a.norm_sqr()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub angles: AngleParams,
    pub expectation: f64,
    pub gsp: f64,
}

/// Grid points `β = -π + iπ/steps` (i < steps) and `γ = -π + jπ/steps` (j < 2 steps).
pub fn angle_grid(steps: usize) -> Vec<(f64, f64)> {
    let step = PI / steps as f64;
    (0..steps)
        .flat_map(|i| (0..2 * steps).map(move |j| (-PI + i as f64 * step, -PI + j as f64 * step)))
        .collect()
}

/// Minimise the noiseless expectation over the grid for the circuit of a
/// (reduced) model; ties go to higher GSP, then smaller (β, γ).
pub fn grid_search_model(
    model: &IsingModel,
    arch: &Architecture,
    steps: usize,
    allow_ancilla: bool,
) -> Result<GridResult, GmqaoaError> {
    if steps == 0 {
        return Err(GmqaoaError::BadAngles);
    }
    let template = cached_template(model, arch, 1, allow_ancilla)?;
    let grid = angle_grid(steps);
    let scored: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&(b, g)| {
            let c = template.instantiate(&AngleParams::single(b, g))?;
            let probs = circuit::logical_distribution(&c)?;
            score(&probs, model)
        })
        .collect::<Result<_, GmqaoaError>>()?;
    Ok(pick_best(&grid, &scored))
}

pub(crate) fn pick_best(grid: &[(f64, f64)], scored: &[(f64, f64)]) -> GridResult {
    const TOL: f64 = 1e-12;
    let mut best = 0;
    for i in 1..grid.len() {
        let (e, g) = scored[i];
        let (be, bg) = scored[best];
        if e < be - TOL || ((e - be).abs() <= TOL && g > bg + TOL) {
            best = i;
        }
    }
    GridResult {
        angles: AngleParams::single(grid[best].0, grid[best].1),
        expectation: scored[best].0,
        gsp: scored[best].1,
    }
}

/// Grid search for a built-in problem on its first listed architecture.
pub fn grid_search_angles(problem: &str, steps: usize) -> Result<GridResult, GmqaoaError> {
    let arch_name = supported_architectures(problem)
        .first()
        .filter(|_| problem != "f")
        .ok_or_else(|| GmqaoaError::Unsupported {
            problem: problem.to_string(),
            architecture: String::new(),
        })?;
    let arch = Architecture::named(arch_name)?;
    let reduced = fix_q0_up(&builtin_problem(problem)?)?;
    grid_search_model(&reduced, &arch, steps, uses_ancilla_by_default(problem, arch_name))
}
