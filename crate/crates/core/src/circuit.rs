//! Gate-level circuits with readout permutation and ancilla tracking.
//!
//! Phase shifts are stored by exponent: `PhaseShift(e)` is `diag(1, e^{iπe})`,
//! i.e. `Z^e`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {gate} uses wire {wire} but the circuit has {n} wires")]
    WireOutOfRange { gate: String, wire: usize, n: usize },
    #[error("gate {0} repeats a wire")]
    RepeatedWire(String),
    #[error("readout permutation is not a bijection on {0} wires")]
    BadPermutation(usize),
    #[error("wire {0} is both measured and an ancilla")]
    MeasuredAncilla(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("circuits measure {0} and {1} logical bits")]
    DimensionMismatch(usize, usize),
    #[error("ancilla post-selection has zero probability")]
    EmptyPostSelection,
    #[error(transparent)]
    Simulation(#[from] crate::simulator::SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    T,
    Tdg,
    #[serde(rename = "u1")]
    Phase,
    #[serde(rename = "cu1")]
    CPhase,
    #[serde(rename = "cx")]
    Cnot,
    Swap,
}

impl GateKind {
    /// OpenQASM 2.0 gate name.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Phase => "u1",
            GateKind::CPhase => "cu1",
            GateKind::Cnot => "cx",
            GateKind::Swap => "swap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "h" => GateKind::H,
            "x" => GateKind::X,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "u1" => GateKind::Phase,
            "cu1" => GateKind::CPhase,
            "cx" => GateKind::Cnot,
            "swap" => GateKind::Swap,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::CPhase | GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    T(usize),
    Tdg(usize),
    Phase { exponent: f64, wire: usize },
    CPhase { exponent: f64, control: usize, target: usize },
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
}

impl Gate {
    pub fn phase(exponent: f64, wire: usize) -> Self {
        Gate::Phase { exponent, wire }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::X(_) => GateKind::X,
            Gate::T(_) => GateKind::T,
            Gate::Tdg(_) => GateKind::Tdg,
            Gate::Phase { .. } => GateKind::Phase,
            Gate::CPhase { .. } => GateKind::CPhase,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Swap(..) => GateKind::Swap,
        }
    }

    /// Wires in operand order, control first.
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::T(q) | Gate::Tdg(q) => vec![q],
            Gate::Phase { wire, .. } => vec![wire],
            Gate::CPhase {
                control, target, ..
            }
            | Gate::Cnot { control, target } => vec![control, target],
            Gate::Swap(a, b) => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind().arity() == 2
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Gate::Phase { exponent, .. } | Gate::CPhase { exponent, .. } => Some(exponent),
            _ => None,
        }
    }

    /// The same gate acting on relabelled wires.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Self {
        match *self {
            Gate::H(q) => Gate::H(map(q)),
            Gate::X(q) => Gate::X(map(q)),
            Gate::T(q) => Gate::T(map(q)),
            Gate::Tdg(q) => Gate::Tdg(map(q)),
            Gate::Phase { exponent, wire } => Gate::Phase {
                exponent,
                wire: map(wire),
            },
            Gate::CPhase {
                exponent,
                control,
                target,
            } => Gate::CPhase {
                exponent,
                control: map(control),
                target: map(target),
            },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(control),
                target: map(target),
            },
            Gate::Swap(a, b) => Gate::Swap(map(a), map(b)),
        }
    }

    /// Inverse gate, up to global phase.
    pub fn inverse(&self) -> Self {
        match *self {
            Gate::T(q) => Gate::Tdg(q),
            Gate::Tdg(q) => Gate::T(q),
            Gate::Phase { exponent, wire } => Gate::Phase {
                exponent: -exponent,
                wire,
            },
            Gate::CPhase {
                exponent,
                control,
                target,
            } => Gate::CPhase {
                exponent: -exponent,
                control,
                target,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub rotations: usize,
    pub cnots: usize,
}

impl std::ops::Add for GateCounts {
    type Output = GateCounts;
    fn add(self, o: GateCounts) -> GateCounts {
        GateCounts {
            rotations: self.rotations + o.rotations,
            cnots: self.cnots + o.cnots,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    readout_perm: Vec<usize>,
    ancilla_wires: BTreeSet<usize>,
    measured_wires: Vec<usize>,
}

impl Circuit {
    /// Empty circuit on `n` wires, all measured, identity readout.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gates: Vec::new(),
            readout_perm: (0..n).collect(),
            ancilla_wires: BTreeSet::new(),
            measured_wires: (0..n).collect(),
        }
    }

    pub fn from_gates(n: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self, CircuitError> {
        let mut c = Self::new(n);
        for g in gates {
            c.append(g)?;
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn readout_perm(&self) -> &[usize] {
        &self.readout_perm
    }

    pub fn ancilla_wires(&self) -> &BTreeSet<usize> {
        &self.ancilla_wires
    }

    pub fn measured_wires(&self) -> &[usize] {
        &self.measured_wires
    }

    pub fn append(&mut self, gate: Gate) -> Result<&mut Self, CircuitError> {
        let wires = gate.wires();
        for &w in &wires {
            if w >= self.n {
                return Err(CircuitError::WireOutOfRange {
                    gate: gate.kind().name().to_string(),
                    wire: w,
                    n: self.n,
                });
            }
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(CircuitError::RepeatedWire(gate.kind().name().to_string()));
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Append every gate of `other`, which must have the same width.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self, CircuitError> {
        for &g in &other.gates {
            self.append(g)?;
        }
        Ok(self)
    }

    /// Set readout: `perm[w]` is the logical label of wire `w`.
    pub fn set_readout(
        &mut self,
        perm: Vec<usize>,
        measured: Vec<usize>,
        ancillas: BTreeSet<usize>,
    ) -> Result<(), CircuitError> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n {
            return Err(CircuitError::BadPermutation(self.n));
        }
        for &p in &perm {
            if p >= self.n || seen[p] {
                return Err(CircuitError::BadPermutation(self.n));
            }
            seen[p] = true;
        }
        for &w in measured.iter().chain(ancillas.iter()) {
            if w >= self.n {
                return Err(CircuitError::WireOutOfRange {
                    gate: "measure".into(),
                    wire: w,
                    n: self.n,
                });
            }
        }
        if let Some(&w) = measured.iter().find(|w| ancillas.contains(w)) {
            return Err(CircuitError::MeasuredAncilla(w));
        }
        self.readout_perm = perm;
        self.measured_wires = measured;
        self.ancilla_wires = ancillas;
        Ok(())
    }

    /// For each raw output position, the logical label it carries.
    pub fn logical_labels(&self) -> Vec<usize> {
        self.measured_wires
            .iter()
            .map(|&w| self.readout_perm[w])
            .collect()
    }

    /// Reorder a raw output bitstring into logical order.
    pub fn to_logical(&self, raw: &str) -> String {
        let labels = self.logical_labels();
        let mut ranked: Vec<usize> = labels.clone();
        ranked.sort_unstable();
        let mut out = vec!['0'; labels.len()];
        for (c, &l) in raw.chars().zip(&labels) {
            let pos = ranked.binary_search(&l).unwrap();
            out[pos] = c;
        }
        out.into_iter().collect()
    }
}

pub fn append(mut circuit: Circuit, gate: Gate) -> Result<Circuit, CircuitError> {
    circuit.append(gate)?;
    Ok(circuit)
}

/// Single-qubit gates count as rotations. A SWAP counts as three CNOTs and a
/// controlled phase as two CNOTs and three rotations.
pub fn count_gates(circuit: &Circuit) -> GateCounts {
    let mut c = GateCounts::default();
    for g in circuit.gates() {
        match g.kind() {
            GateKind::Cnot => c.cnots += 1,
            GateKind::Swap => c.cnots += 3,
            GateKind::CPhase => {
                c.cnots += 2;
                c.rotations += 3;
            }
            _ => c.rotations += 1,
        }
    }
    c
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub fn to_qasm(circuit: &Circuit) -> String {
    let mut s = String::new();
    s.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{}];", circuit.n());
    if !circuit.measured_wires().is_empty() {
        let _ = writeln!(s, "creg c[{}];", circuit.measured_wires().len());
    }
    if !circuit.ancilla_wires().is_empty() {
        let _ = writeln!(s, "creg anc[{}];", circuit.ancilla_wires().len());
    }
    for g in circuit.gates() {
        let _ = match *g {
            Gate::H(q) | Gate::X(q) | Gate::T(q) | Gate::Tdg(q) => {
                writeln!(s, "{} q[{}];", g.kind().name(), q)
            }
            Gate::Phase { exponent, wire } => {
                writeln!(s, "u1({}*pi) q[{}];", fmt_num(exponent), wire)
            }
            Gate::CPhase {
                exponent,
                control,
                target,
            } => writeln!(s, "cu1({}*pi) q[{}],q[{}];", fmt_num(exponent), control, target),
            Gate::Cnot { control, target } => writeln!(s, "cx q[{}],q[{}];", control, target),
            Gate::Swap(a, b) => writeln!(s, "swap q[{}],q[{}];", a, b),
        };
    }
    let labels = circuit.logical_labels();
    let mut ranked = labels.clone();
    ranked.sort_unstable();
    for (&w, l) in circuit.measured_wires().iter().zip(&labels) {
        let bit = ranked.binary_search(l).unwrap();
        let _ = writeln!(s, "measure q[{}] -> c[{}];", w, bit);
    }
    for (i, &w) in circuit.ancilla_wires().iter().enumerate() {
        let _ = writeln!(s, "measure q[{}] -> anc[{}];", w, i);
    }
    for &w in circuit.ancilla_wires() {
        let _ = writeln!(s, "// postselect q[{}]=0", w);
    }
    s
}

struct ExprParser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl<'a> ExprParser<'a> {
    fn eval(src: &'a str) -> Result<f64, String> {
        let mut p = ExprParser {
            chars: src.chars().peekable(),
        };
        let v = p.sum()?;
        p.skip_ws();
        match p.chars.next() {
            None => Ok(v),
            Some(c) => Err(format!("unexpected {c:?} in expression")),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some('+') => {
                    self.chars.next();
                    v += self.product()?;
                }
                Some('-') => {
                    self.chars.next();
                    v -= self.product()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some('*') => {
                    self.chars.next();
                    v *= self.unary()?;
                }
                Some('/') => {
                    self.chars.next();
                    v /= self.unary()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        self.skip_ws();
        match self.chars.peek() {
            Some('-') => {
                self.chars.next();
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.chars.next();
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        self.skip_ws();
        match self.chars.peek().copied() {
            Some('(') => {
                self.chars.next();
                let v = self.sum()?;
                self.skip_ws();
                if self.chars.next() != Some(')') {
                    return Err("missing ')'".into());
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let mut id = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        id.push(c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                if id == "pi" {
                    Ok(std::f64::consts::PI)
                } else {
                    Err(format!("unknown identifier {id:?}"))
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let mut num = String::new();
                while let Some(&c) = self.chars.peek() {
                    let exp_sign = (c == '-' || c == '+') && num.ends_with(['e', 'E']);
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        num.push(c);
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                num.parse().map_err(|_| format!("bad number {num:?}"))
            }
            other => Err(format!("unexpected {other:?} in expression")),
        }
    }
}

/// Exponent of a `u1`/`cu1` angle; `k*pi` forms are recovered exactly.
fn angle_to_exponent(expr: &str) -> Result<f64, String> {
    let t = expr.trim();
    if let Some(head) = t.strip_suffix("*pi") {
        if let Ok(v) = head.trim().parse::<f64>() {
            return Ok(v);
        }
    }
    Ok(ExprParser::eval(t)? / std::f64::consts::PI)
}

fn parse_operand(s: &str, reg: &str) -> Result<usize, String> {
    let s = s.trim();
    let inner = s
        .strip_prefix(reg)
        .and_then(|r| r.trim().strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected {reg}[i], found {s:?}"))?;
    inner
        .trim()
        .parse()
        .map_err(|_| format!("bad index in {s:?}"))
}

fn parse_register(s: &str) -> Result<(String, usize), String> {
    let s = s.trim();
    let open = s.find('[').ok_or_else(|| format!("bad register {s:?}"))?;
    let name = s[..open].trim().to_string();
    let size = s[open + 1..]
        .strip_suffix(']')
        .and_then(|x| x.trim().parse().ok())
        .ok_or_else(|| format!("bad register {s:?}"))?;
    Ok((name, size))
}

/// Parse the OpenQASM 2.0 subset written by [`to_qasm`].
pub fn from_qasm(text: &str) -> Result<Circuit, CircuitError> {
    let err = |line: usize, message: String| CircuitError::Parse { line, message };
    let mut statements: Vec<(usize, String)> = Vec::new();
    let mut ancillas = BTreeSet::new();
    let mut pending = String::new();
    let mut pending_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let (code, comment) = match raw.find("//") {
            Some(p) => (&raw[..p], Some(raw[p + 2..].trim())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            if let Some(rest) = c.strip_prefix("postselect") {
                let (lhs, rhs) = rest
                    .split_once('=')
                    .ok_or_else(|| err(lineno, "malformed postselect".into()))?;
                if rhs.trim() != "0" {
                    return Err(err(lineno, "only post-selection on 0 is supported".into()));
                }
                ancillas.insert(parse_operand(lhs, "q").map_err(|m| err(lineno, m))?);
            }
        }
        for piece in code.split_inclusive(';') {
            if pending.trim().is_empty() {
                pending_line = lineno;
            }
            pending.push_str(piece);
            if piece.ends_with(';') {
                let stmt = pending.trim().trim_end_matches(';').trim().to_string();
                if !stmt.is_empty() {
                    statements.push((pending_line, stmt));
                }
                pending.clear();
            }
        }
    }
    if !pending.trim().is_empty() {
        return Err(err(pending_line, "missing ';'".into()));
    }

    let mut n: Option<usize> = None;
    let mut creg_c: Option<String> = None;
    let mut gates = Vec::new();
    let mut measures: Vec<(usize, usize)> = Vec::new();
    for (line, stmt) in &statements {
        let line = *line;
        let (head, rest) = match stmt.find(|c: char| c.is_whitespace() || c == '(') {
            Some(p) => (&stmt[..p], stmt[p..].trim()),
            None => (stmt.as_str(), ""),
        };
        match head {
            "OPENQASM" => {
                if rest != "2.0" {
                    return Err(err(line, format!("unsupported version {rest}")));
                }
            }
            "include" => {}
            "qreg" => {
                if n.is_some() {
                    return Err(err(line, "only one qreg is supported".into()));
                }
                let (name, size) = parse_register(rest).map_err(|m| err(line, m))?;
                if name != "q" {
                    return Err(err(line, format!("quantum register must be named q, found {name}")));
                }
                n = Some(size);
            }
            "creg" => {
                let (name, _) = parse_register(rest).map_err(|m| err(line, m))?;
                if creg_c.is_none() {
                    creg_c = Some(name);
                }
            }
            "barrier" => {}
            "measure" => {
                let (q, c) = rest
                    .split_once("->")
                    .ok_or_else(|| err(line, "measure needs '->'".into()))?;
                let wire = parse_operand(q, "q").map_err(|m| err(line, m))?;
                let (creg, _) = parse_register(c).map_err(|m| err(line, m))?;
                if Some(&creg) == creg_c.as_ref() && creg != "anc" {
                    let bit = parse_operand(c, &creg).map_err(|m| err(line, m))?;
                    measures.push((wire, bit));
                }
            }
            name => {
                let kind = GateKind::from_name(name)
                    .ok_or_else(|| err(line, format!("unsupported gate {name:?}")))?;
                let (param, operands) = if let Some(r) = rest.strip_prefix('(') {
                    let close = r
                        .rfind(')')
                        .ok_or_else(|| err(line, "missing ')'".into()))?;
                    (Some(&r[..close]), r[close + 1..].trim())
                } else {
                    (None, rest)
                };
                let wires = operands
                    .split(',')
                    .map(|o| parse_operand(o, "q"))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| err(line, m))?;
                if wires.len() != kind.arity() {
                    return Err(err(line, format!("{name} takes {} operands", kind.arity())));
                }
                let needs_param = matches!(kind, GateKind::Phase | GateKind::CPhase);
                if needs_param != param.is_some() {
                    return Err(err(line, format!("wrong parameter list for {name}")));
                }
                let exponent = match param {
                    Some(p) => angle_to_exponent(p).map_err(|m| err(line, m))?,
                    None => 0.0,
                };
                gates.push(match kind {
                    GateKind::H => Gate::H(wires[0]),
                    GateKind::X => Gate::X(wires[0]),
                    GateKind::T => Gate::T(wires[0]),
                    GateKind::Tdg => Gate::Tdg(wires[0]),
                    GateKind::Phase => Gate::phase(exponent, wires[0]),
                    GateKind::CPhase => Gate::CPhase {
                        exponent,
                        control: wires[0],
                        target: wires[1],
                    },
                    GateKind::Cnot => Gate::cnot(wires[0], wires[1]),
                    GateKind::Swap => Gate::Swap(wires[0], wires[1]),
                });
            }
        }
    }
    let n = n.ok_or_else(|| err(1, "missing qreg".into()))?;
    let mut circuit = Circuit::from_gates(n, gates)?;
    let (measured, perm) = if measures.is_empty() {
        let measured: Vec<usize> = (0..n).filter(|w| !ancillas.contains(w)).collect();
        (measured, (0..n).collect())
    } else {
        let mut perm = vec![usize::MAX; n];
        let mut used = vec![false; n];
        for &(w, b) in &measures {
            if b >= n || used[b] || perm[w] != usize::MAX {
                return Err(CircuitError::BadPermutation(n));
            }
            perm[w] = b;
            used[b] = true;
        }
        let mut free = (0..n).filter(|b| !used[*b]);
        for p in perm.iter_mut().filter(|p| **p == usize::MAX) {
            *p = free.next().unwrap();
        }
        (measures.iter().map(|&(w, _)| w).collect(), perm)
    };
    circuit.set_readout(perm, measured, ancillas)?;
    Ok(circuit)
}

/// Distribution over logical bitstrings from `|0…0⟩`, conditioned on every
/// ancilla reading 0. Indexed with logical bit 0 most significant.
pub fn logical_distribution(circuit: &Circuit) -> Result<Vec<f64>, CircuitError> {
    let state = crate::simulator::simulate(circuit)?;
    logical_distribution_of(circuit, &state.probabilities())
}

pub(crate) fn logical_distribution_of(
    circuit: &Circuit,
    probs: &[f64],
) -> Result<Vec<f64>, CircuitError> {
    let n = circuit.n();
    let labels = circuit.logical_labels();
    let mut ranked = labels.clone();
    ranked.sort_unstable();
    let m = labels.len();
    let positions: Vec<(usize, usize)> = circuit
        .measured_wires()
        .iter()
        .zip(&labels)
        .map(|(&w, l)| (n - 1 - w, m - 1 - ranked.binary_search(l).unwrap()))
        .collect();
    let anc_mask: usize = circuit
        .ancilla_wires()
        .iter()
        .fold(0, |acc, &w| acc | (1 << (n - 1 - w)));
    let mut out = vec![0.0; 1 << m];
    let mut kept = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        if idx & anc_mask != 0 {
            continue;
        }
        let mut li = 0;
        for &(src, dst) in &positions {
            li |= ((idx >> src) & 1) << dst;
        }
        out[li] += p;
        kept += p;
    }
    if kept <= 0.0 {
        return Err(CircuitError::EmptyPostSelection);
    }
    for p in &mut out {
        *p /= kept;
    }
    Ok(out)
}

pub fn equivalent(c1: &Circuit, c2: &Circuit, tol: f64) -> Result<bool, CircuitError> {
    let m1 = c1.measured_wires().len();
    let m2 = c2.measured_wires().len();
    if m1 != m2 {
        return Err(CircuitError::DimensionMismatch(m1, m2));
    }
    let d1 = logical_distribution(c1)?;
    let d2 = logical_distribution(c2)?;
    Ok(d1.iter().zip(&d2).all(|(a, b)| (a - b).abs() <= tol))
}
