//! Statevector simulation, shot sampling and trajectory noise.
//!
//! Amplitude index bit `n - 1 - w` holds wire `w`, so wire 0 is the most
//! significant bit and the leftmost character of a bitstring.

use crate::circuit::{Circuit, Gate, GateKind};
use crate::ising::IsingModel;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use thiserror::Error;

pub const MAX_WIRES: usize = 24;
pub const MAX_CALIBRATION_WIRES: usize = 6;
pub const DEFAULT_SHOTS: u64 = 40960;
pub const DEFAULT_MAX_CONDITION: f64 = 1e8;
const CHUNK_SHOTS: u64 = 4096;
const TRAJECTORY_CACHE_LIMIT: usize = 8192;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{0} wires exceeds the simulator capacity of {MAX_WIRES}")]
    Capacity(usize),
    #[error("state has {state} wires but the model has {model} qubits")]
    DimensionMismatch { state: usize, model: usize },
    #[error("probability {name} = {value} is outside [0, 1]")]
    BadProbability { name: String, value: f64 },
    #[error("calibration register of {0} wires exceeds {MAX_CALIBRATION_WIRES}")]
    CalibrationSize(usize),
    #[error("outcome {key:?} does not match a {n}-bit register")]
    BadOutcome { key: String, n: usize },
    #[error("calibration matrix is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("malformed calibration CSV: {0}")]
    CalibrationCsv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn phase_matrix(theta: f64) -> Mat2 {
    [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, theta)]]
}

/// Single-qubit unitary for `gate` with `delta` radians of over-rotation.
fn single_qubit_matrix(gate: &Gate, delta: f64) -> Mat2 {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};
    let rotation = |nx: f64, nz: f64| {
        let half = (PI + delta) / 2.0;
        let (s, c) = half.sin_cos();
        let ic = Complex64::new(0.0, c);
        [
            [ic + s * nz, Complex64::new(s * nx, 0.0)],
            [Complex64::new(s * nx, 0.0), ic - s * nz],
        ]
    };
    match *gate {
        Gate::H(_) => rotation(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        Gate::X(_) => rotation(1.0, 0.0),
        Gate::T(_) => phase_matrix(FRAC_PI_4 + delta),
        Gate::Tdg(_) => phase_matrix(-FRAC_PI_4 + delta),
        Gate::Phase { exponent, .. } => phase_matrix(PI * exponent + delta),
        _ => unreachable!("not a single-qubit gate"),
    }
}

impl Statevector {
    pub fn zero(n: usize) -> Result<Self, SimError> {
        if n > MAX_WIRES {
            return Err(SimError::Capacity(n));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self, SimError> {
        if n > MAX_WIRES {
            return Err(SimError::Capacity(n));
        }
        assert_eq!(amps.len(), 1 << n, "amplitude count must be 2^n");
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, wire: usize) -> usize {
        1 << (self.n - 1 - wire)
    }

    fn apply_1q(&mut self, wire: usize, m: &Mat2) {
        let mask = self.mask(wire);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let a = self.amps[i];
                let b = self.amps[i | mask];
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | mask] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_diag_11(&mut self, a: usize, b: usize, phase: Complex64) {
        let m = self.mask(a) | self.mask(b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp *= phase;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let c = self.mask(control);
        let t = self.mask(target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let ma = self.mask(a);
        let mb = self.mask(b);
        for i in 0..self.amps.len() {
            if i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, (i & !ma) | mb);
            }
        }
    }

    fn apply_zz(&mut self, a: usize, b: usize, phi: f64) {
        let ma = self.mask(a);
        let mb = self.mask(b);
        let same = Complex64::from_polar(1.0, -phi / 2.0);
        let diff = same.conj();
        for (i, amp) in self.amps.iter_mut().enumerate() {
            let parity = ((i & ma != 0) as u8) ^ ((i & mb != 0) as u8);
            *amp *= if parity == 0 { same } else { diff };
        }
    }

    /// Apply Pauli `p` (1 = X, 2 = Y, 3 = Z) to `wire`.
    fn apply_pauli(&mut self, wire: usize, p: u8) {
        let mask = self.mask(wire);
        match p {
            1 => {
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            2 => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        let a = self.amps[i];
                        let b = self.amps[i | mask];
                        self.amps[i] = -i_unit * b;
                        self.amps[i | mask] = i_unit * a;
                    }
                }
            }
            3 => {
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *amp = -*amp;
                    }
                }
            }
            _ => {}
        }
    }

    pub fn apply(&mut self, gate: &Gate) {
        self.apply_noisy(gate, 0.0, 0.0);
    }

    fn apply_noisy(&mut self, gate: &Gate, delta: f64, zz: f64) {
        match *gate {
            Gate::H(q) | Gate::X(q) if delta == 0.0 => {
                let m = if matches!(gate, Gate::H(_)) {
                    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                    [[h, h], [h, -h]]
                } else {
                    [[ZERO, ONE], [ONE, ZERO]]
                };
                self.apply_1q(q, &m);
            }
            Gate::H(q) | Gate::X(q) | Gate::T(q) | Gate::Tdg(q) | Gate::Phase { wire: q, .. } => {
                let m = single_qubit_matrix(gate, delta);
                self.apply_1q(q, &m);
            }
            Gate::CPhase {
                exponent,
                control,
                target,
            } => {
                let phase = Complex64::from_polar(1.0, std::f64::consts::PI * exponent + delta);
                self.apply_diag_11(control, target, phase);
            }
            Gate::Cnot { control, target } => {
                self.apply_cnot(control, target);
                if zz != 0.0 {
                    self.apply_zz(control, target, zz);
                }
            }
            Gate::Swap(a, b) => self.apply_swap(a, b),
        }
    }
}

pub fn simulate(circuit: &Circuit) -> Result<Statevector, SimError> {
    let mut s = Statevector::zero(circuit.n())?;
    for g in circuit.gates() {
        s.apply(g);
    }
    Ok(s)
}

/// Simulate with the deterministic (coherent and ZZ) parts of `noise` only.
pub fn simulate_coherent(circuit: &Circuit, noise: &NoiseModel) -> Result<Statevector, SimError> {
    let mut s = Statevector::zero(circuit.n())?;
    for g in circuit.gates() {
        s.apply_noisy(g, noise.coherent_overrotation, noise.zz_after_cnot);
    }
    Ok(s)
}

pub fn expectation(state: &Statevector, model: &IsingModel) -> Result<f64, SimError> {
    if state.n() != model.n {
        return Err(SimError::DimensionMismatch {
            state: state.n(),
            model: model.n,
        });
    }
    Ok(state
        .amps
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * model.energy_index(k))
        .sum())
}

/// Energy expectation of a distribution indexed like the model's basis states.
pub fn expectation_of(probs: &[f64], model: &IsingModel) -> Result<f64, SimError> {
    if probs.len() != 1 << model.n {
        return Err(SimError::DimensionMismatch {
            state: probs.len().trailing_zeros() as usize,
            model: model.n,
        });
    }
    Ok(probs
        .iter()
        .enumerate()
        .map(|(k, p)| p * model.energy_index(k))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadoutError {
    /// Probability of reading 1 when the wire holds 0.
    pub p01: f64,
    /// Probability of reading 0 when the wire holds 1.
    pub p10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRate {
    pub gate: GateKind,
    pub wires: Vec<usize>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub gate_depolarizing: BTreeMap<GateKind, f64>,
    /// Rates for specific gate placements; these take precedence over `gate_depolarizing`.
    pub instance_depolarizing: Vec<InstanceRate>,
    pub coherent_overrotation: f64,
    pub zz_after_cnot: f64,
    /// Per-wire readout flips; wires past the end are read perfectly.
    pub readout: Vec<ReadoutError>,
    pub global_depolarizing: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// The same depolarizing rate after every gate kind.
    pub fn depolarizing(p: f64) -> Self {
        let kinds = [
            GateKind::H,
            GateKind::X,
            GateKind::T,
            GateKind::Tdg,
            GateKind::Phase,
            GateKind::CPhase,
            GateKind::Cnot,
            GateKind::Swap,
        ];
        Self {
            gate_depolarizing: kinds.into_iter().map(|k| (k, p)).collect(),
            ..Self::default()
        }
    }

    pub fn global(p: f64) -> Self {
        Self {
            global_depolarizing: p,
            ..Self::default()
        }
    }

    pub fn coherent(delta: f64) -> Self {
        Self {
            coherent_overrotation: delta,
            ..Self::default()
        }
    }

    pub fn uniform_readout(n: usize, p01: f64, p10: f64) -> Self {
        Self {
            readout: vec![ReadoutError { p01, p10 }; n],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let check = |name: String, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(SimError::BadProbability { name, value })
            }
        };
        for (k, &p) in &self.gate_depolarizing {
            check(format!("gate_depolarizing[{}]", k.name()), p)?;
        }
        for r in &self.instance_depolarizing {
            check(format!("instance_depolarizing[{}]", r.gate.name()), r.p)?;
        }
        for (w, r) in self.readout.iter().enumerate() {
            check(format!("readout[{w}].p01"), r.p01)?;
            check(format!("readout[{w}].p10"), r.p10)?;
        }
        check("global_depolarizing".into(), self.global_depolarizing)?;
        if !self.coherent_overrotation.is_finite() || !self.zz_after_cnot.is_finite() {
            return Err(SimError::BadProbability {
                name: "coherent".into(),
                value: f64::NAN,
            });
        }
        Ok(())
    }

    /// Depolarizing probability applied after `gate`.
    pub fn rate_for(&self, gate: &Gate) -> f64 {
        let wires = gate.wires();
        let kind = gate.kind();
        for r in &self.instance_depolarizing {
            if r.gate == kind
                && (r.wires == wires
                    || (wires.len() == 2 && r.wires.len() == 2 && r.wires[0] == wires[1] && r.wires[1] == wires[0]))
            {
                return r.p;
            }
        }
        self.gate_depolarizing.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn readout_for(&self, wire: usize) -> ReadoutError {
        self.readout.get(wire).copied().unwrap_or_default()
    }

    fn has_gate_noise(&self) -> bool {
        self.coherent_overrotation != 0.0
            || self.zz_after_cnot != 0.0
            || self.gate_depolarizing.values().any(|&p| p > 0.0)
            || self.instance_depolarizing.iter().any(|r| r.p > 0.0)
    }
}

/// Shot counts keyed by measured bitstring, in `measured_wires` order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountsHistogram {
    pub shots: u64,
    #[serde(default)]
    pub discarded: u64,
    pub counts: BTreeMap<String, u64>,
}

/// Real-valued counts, as produced by measurement-error mitigation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuasiCounts {
    pub shots: f64,
    #[serde(default)]
    pub discarded: f64,
    pub counts: BTreeMap<String, f64>,
}

/// Read access shared by integer and real-valued histograms.
pub trait Counts {
    fn total(&self) -> f64;
    fn entries(&self) -> Vec<(&str, f64)>;
}

impl Counts for CountsHistogram {
    fn total(&self) -> f64 {
        self.shots as f64
    }
    fn entries(&self) -> Vec<(&str, f64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v as f64)).collect()
    }
}

impl Counts for QuasiCounts {
    fn total(&self) -> f64 {
        self.shots
    }
    fn entries(&self) -> Vec<(&str, f64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v)).collect()
    }
}

impl CountsHistogram {
    pub fn merge(&mut self, other: &CountsHistogram) {
        self.shots += other.shots;
        self.discarded += other.discarded;
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
    }

    /// Empirical distribution over an `n`-bit register, indexed with bit 0 most significant.
    pub fn distribution(&self, n: usize) -> Result<Vec<f64>, SimError> {
        to_vector(self, n).map(|v| {
            let t = self.shots.max(1) as f64;
            v.into_iter().map(|c| c / t).collect()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histogram serializes")
    }
}

impl QuasiCounts {
    pub fn distribution(&self, n: usize) -> Result<Vec<f64>, SimError> {
        to_vector(self, n).map(|v| v.into_iter().map(|c| c / self.shots).collect())
    }
}

fn to_vector(counts: &impl Counts, n: usize) -> Result<Vec<f64>, SimError> {
    let mut v = vec![0.0; 1 << n];
    for (k, c) in counts.entries() {
        let idx = parse_outcome(k, n)?;
        v[idx] += c;
    }
    Ok(v)
}

fn parse_outcome(key: &str, n: usize) -> Result<usize, SimError> {
    let bad = || SimError::BadOutcome {
        key: key.to_string(),
        n,
    };
    if key.len() != n {
        return Err(bad());
    }
    key.chars().try_fold(0usize, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(bad()),
    })
}

fn bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|b| if (index >> (n - 1 - b)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cdf.last().unwrap();
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Independent stream for chunk `chunk` of a run seeded with `seed`.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

type Pattern = Vec<(u32, u8)>;

struct Engine<'a> {
    circuit: &'a Circuit,
    noise: &'a NoiseModel,
    rates: Vec<f64>,
    prefix: Option<Vec<Statevector>>,
    base_cdf: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(circuit: &'a Circuit, noise: &'a NoiseModel) -> Result<Self, SimError> {
        let rates: Vec<f64> = circuit.gates().iter().map(|g| noise.rate_for(g)).collect();
        let any_errors = rates.iter().any(|&p| p > 0.0);
        let mut s = Statevector::zero(circuit.n())?;
        let cache_prefix = any_errors && (circuit.gates().len() + 1) << circuit.n() <= 1 << 22;
        let mut prefix = cache_prefix.then(|| vec![s.clone()]);
        for g in circuit.gates() {
            s.apply_noisy(g, noise.coherent_overrotation, noise.zz_after_cnot);
            if let Some(p) = prefix.as_mut() {
                p.push(s.clone());
            }
        }
        Ok(Self {
            circuit,
            noise,
            rates,
            prefix,
            base_cdf: cdf(&s.probabilities()),
        })
    }

    fn trajectory(&self, pattern: &Pattern) -> Vec<f64> {
        let first = pattern[0].0 as usize;
        let (mut s, start) = match &self.prefix {
            Some(p) => (p[first].clone(), first),
            None => (Statevector::zero(self.circuit.n()).unwrap(), 0),
        };
        let mut next = 0;
        for (i, g) in self.circuit.gates().iter().enumerate().skip(start) {
            s.apply_noisy(g, self.noise.coherent_overrotation, self.noise.zz_after_cnot);
            if next < pattern.len() && pattern[next].0 as usize == i {
                let p = pattern[next].1;
                let wires = g.wires();
                if wires.len() == 1 {
                    s.apply_pauli(wires[0], p);
                } else {
                    s.apply_pauli(wires[0], p >> 2);
                    s.apply_pauli(wires[1], p & 3);
                }
                next += 1;
            }
        }
        cdf(&s.probabilities())
    }

    fn run_chunk(&self, shots: u64, rng: &mut ChaCha8Rng) -> HashMap<usize, u64> {
        let n = self.circuit.n();
        let mut cache: HashMap<Pattern, Vec<f64>> = HashMap::new();
        let mut out: HashMap<usize, u64> = HashMap::new();
        let readout: Vec<ReadoutError> = (0..n).map(|w| self.noise.readout_for(w)).collect();
        let noisy_readout = readout.iter().any(|r| r.p01 > 0.0 || r.p10 > 0.0);
        let mut pattern: Pattern = Vec::new();
        for _ in 0..shots {
            let mut idx = if self.noise.global_depolarizing > 0.0
                && rng.random::<f64>() < self.noise.global_depolarizing
            {
                rng.random_range(0..1usize << n)
            } else {
                pattern.clear();
                for (i, g) in self.circuit.gates().iter().enumerate() {
                    let p = self.rates[i];
                    if p > 0.0 && rng.random::<f64>() < p {
                        let choices = if g.is_two_qubit() { 15 } else { 3 };
                        pattern.push((i as u32, rng.random_range(1..=choices)));
                    }
                }
                if pattern.is_empty() {
                    draw(&self.base_cdf, rng)
                } else if let Some(c) = cache.get(&pattern) {
                    draw(c, rng)
                } else {
                    let c = self.trajectory(&pattern);
                    let idx = draw(&c, rng);
                    if cache.len() < TRAJECTORY_CACHE_LIMIT {
                        cache.insert(pattern.clone(), c);
                    }
                    idx
                }
            };
            if noisy_readout {
                for (w, r) in readout.iter().enumerate() {
                    let mask = 1 << (n - 1 - w);
                    let flip = if idx & mask == 0 { r.p01 } else { r.p10 };
                    if flip > 0.0 && rng.random::<f64>() < flip {
                        idx ^= mask;
                    }
                }
            }
            *out.entry(idx).or_insert(0) += 1;
        }
        out
    }
}

/// Sample `shots` outcomes; `noise = None` samples the ideal distribution.
pub fn sample(
    circuit: &Circuit,
    noise: Option<&NoiseModel>,
    shots: u64,
    seed: u64,
) -> Result<CountsHistogram, SimError> {
    let noiseless = NoiseModel::noiseless();
    let noise = noise.unwrap_or(&noiseless);
    noise.validate()?;
    let engine = Engine::new(circuit, noise)?;
    let chunks = shots.div_ceil(CHUNK_SHOTS);
    let raw: Vec<HashMap<usize, u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = CHUNK_SHOTS.min(shots - c * CHUNK_SHOTS);
            let mut rng = substream(seed, c);
            engine.run_chunk(size, &mut rng)
        })
        .collect();

    let n = circuit.n();
    let anc_mask: usize = circuit
        .ancilla_wires()
        .iter()
        .fold(0, |acc, &w| acc | (1 << (n - 1 - w)));
    let measured = circuit.measured_wires();
    let mut hist = CountsHistogram::default();
    let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
    for chunk in raw {
        for (idx, c) in chunk {
            *merged.entry(idx).or_insert(0) += c;
        }
    }
    for (idx, c) in merged {
        if idx & anc_mask != 0 {
            hist.discarded += c;
            continue;
        }
        let key: String = measured
            .iter()
            .map(|&w| if (idx >> (n - 1 - w)) & 1 == 1 { '1' } else { '0' })
            .collect();
        *hist.counts.entry(key).or_insert(0) += c;
        hist.shots += c;
    }
    Ok(hist)
}

/// Column-stochastic readout matrix: `m[(i, j)] = P(measure i | prepared j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    pub n: usize,
    pub m: DMatrix<f64>,
}

impl CalibrationMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            m: DMatrix::identity(1 << n, 1 << n),
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.m.column_iter().map(|c| c.sum()).collect()
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.m.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Row-major CSV with a header naming the prepared states.
    pub fn to_csv(&self) -> String {
        let d = 1 << self.n;
        let mut s = String::from("measured");
        for j in 0..d {
            let _ = write!(s, ",{}", bitstring(j, self.n));
        }
        s.push('\n');
        for i in 0..d {
            s.push_str(&bitstring(i, self.n));
            for j in 0..d {
                let _ = write!(s, ",{}", self.m[(i, j)]);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let bad = |m: &str| SimError::CalibrationCsv(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let d = header.split(',').count() - 1;
        if d == 0 || !d.is_power_of_two() {
            return Err(bad("column count is not a power of two"));
        }
        let n = d.trailing_zeros() as usize;
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            let line = lines.next().ok_or_else(|| bad("missing rows"))?;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != d + 1 {
                return Err(bad("ragged row"));
            }
            for j in 0..d {
                m[(i, j)] = cells[j + 1].trim().parse().map_err(|_| bad("bad number"))?;
            }
        }
        Ok(Self { n, m })
    }
}

/// Readout-only calibration matrix in the infinite-shot limit.
pub fn exact_calibration_matrix(n: usize, noise: &NoiseModel) -> Result<CalibrationMatrix, SimError> {
    if n > MAX_CALIBRATION_WIRES {
        return Err(SimError::CalibrationSize(n));
    }
    let d = 1 << n;
    let m = DMatrix::from_fn(d, d, |i, j| {
        (0..n)
            .map(|w| {
                let bit = n - 1 - w;
                let r = noise.readout_for(w);
                match ((j >> bit) & 1, (i >> bit) & 1) {
                    (0, 0) => 1.0 - r.p01,
                    (0, _) => r.p01,
                    (_, 1) => 1.0 - r.p10,
                    _ => r.p10,
                }
            })
            .product()
    });
    Ok(CalibrationMatrix { n, m })
}

pub fn build_calibration_matrix(
    n: usize,
    noise: &NoiseModel,
    shots_per_state: u64,
) -> Result<CalibrationMatrix, SimError> {
    if n > MAX_CALIBRATION_WIRES {
        return Err(SimError::CalibrationSize(n));
    }
    let prep_noise = NoiseModel {
        global_depolarizing: 0.0,
        ..noise.clone()
    };
    let d = 1 << n;
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let gates = (0..n)
            .filter(|w| (j >> (n - 1 - w)) & 1 == 1)
            .map(Gate::X);
        let circuit = Circuit::from_gates(n, gates).expect("wires in range");
        let seed = noise.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(j as u64);
        let noisy = prep_noise.has_gate_noise() || prep_noise.readout.iter().any(|r| r.p01 > 0.0 || r.p10 > 0.0);
        let hist = sample(&circuit, noisy.then_some(&prep_noise), shots_per_state, seed)?;
        for (k, c) in &hist.counts {
            m[(parse_outcome(k, n)?, j)] = *c as f64 / hist.shots as f64;
        }
    }
    Ok(CalibrationMatrix { n, m })
}

/// Invert readout noise: solve `M x = c`, clip negatives and restore the total.
pub fn mitigate(
    counts: &impl Counts,
    cal: &CalibrationMatrix,
    max_condition: f64,
) -> Result<QuasiCounts, SimError> {
    let cond = cal.condition_number();
    if !cond.is_finite() || cond > max_condition {
        return Err(SimError::IllConditioned(cond));
    }
    let n = cal.n;
    let c = nalgebra::DVector::from_vec(to_vector(counts, n)?);
    let x = cal
        .m
        .clone()
        .lu()
        .solve(&c)
        .ok_or(SimError::IllConditioned(f64::INFINITY))?;
    let total = counts.total();
    let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    let scale = if sum > 0.0 { total / sum } else { 0.0 };
    let counts = clipped
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (bitstring(i, n), v * scale))
        .collect();
    Ok(QuasiCounts {
        shots: total,
        discarded: 0.0,
        counts,
    })
}

/// Total-variation distance between two distributions of equal length.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
