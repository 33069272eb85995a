//! Ising Hamiltonians `H = -Σ J_ij z_i z_j - Σ h_i z_i` over spins `z = (-1)^bit`.
//!
//! Bit 0 is spin up. Bit strings are written with qubit 0 as the leftmost
//! character.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest model that [`ground_states`] will enumerate.
pub const MAX_ENUMERATION_QUBITS: usize = 24;

/// Energies closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum IsingError {
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("coupling ({0}, {0}) is a self-interaction")]
    SelfCoupling(usize),
    #[error("duplicate coupling between qubits {0} and {1}")]
    DuplicateCoupling(usize, usize),
    #[error("duplicate field on qubit {0}")]
    DuplicateField(usize),
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("model must have at least one qubit")]
    Empty,
    #[error("spin configuration has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("invalid spin character {0:?}")]
    InvalidBit(char),
    #[error("{n} qubits exceeds the enumeration bound of {MAX_ENUMERATION_QUBITS}")]
    TooLarge { n: usize },
    #[error("model is not symmetric under a global spin flip")]
    NotFlipSymmetric,
    #[error("model has a linear term on qubit 0")]
    FieldOnFixedQubit,
    #[error("model has a single qubit; nothing remains after fixing qubit 0")]
    NothingToReduce,
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub n: usize,
    pub quadratic: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub linear: Vec<(usize, f64)>,
    #[serde(default)]
    pub label: Option<String>,
}

/// A spin assignment, stored as bits with `false` = up.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinConfig {
    bits: Vec<bool>,
}

impl SpinConfig {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn parse(s: &str) -> Result<Self, IsingError> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(IsingError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { bits })
    }

    /// Configuration for basis index `index`, qubit 0 in the most significant bit.
    pub fn from_index(index: usize, n: usize) -> Self {
        let bits = (0..n).map(|q| (index >> (n - 1 - q)) & 1 == 1).collect();
        Self { bits }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn spin(&self, q: usize) -> f64 {
        if self.bits[q] {
            -1.0
        } else {
            1.0
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

impl std::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SpinConfig {
    type Err = IsingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateSet {
    pub energy: f64,
    pub states: Vec<SpinConfig>,
}

impl GroundStateSet {
    pub fn degeneracy(&self) -> usize {
        self.states.len()
    }

    pub fn contains(&self, s: &SpinConfig) -> bool {
        self.states.binary_search(s).is_ok()
    }

    pub fn strings(&self) -> Vec<String> {
        self.states.iter().map(|s| s.to_string()).collect()
    }
}

impl IsingModel {
    pub fn new(
        n: usize,
        quadratic: Vec<(usize, usize, f64)>,
        linear: Vec<(usize, f64)>,
        label: Option<String>,
    ) -> Result<Self, IsingError> {
        let model = Self {
            n,
            quadratic,
            linear,
            label,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), IsingError> {
        if self.n == 0 {
            return Err(IsingError::Empty);
        }
        let check = |q: usize| {
            if q >= self.n {
                Err(IsingError::IndexOutOfRange {
                    index: q,
                    n: self.n,
                })
            } else {
                Ok(())
            }
        };
        let mut pairs = std::collections::BTreeSet::new();
        for &(i, j, c) in &self.quadratic {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(IsingError::SelfCoupling(i));
            }
            if !c.is_finite() {
                return Err(IsingError::NonFinite);
            }
            if !pairs.insert((i.min(j), i.max(j))) {
                return Err(IsingError::DuplicateCoupling(i.min(j), i.max(j)));
            }
        }
        let mut fields = std::collections::BTreeSet::new();
        for &(i, h) in &self.linear {
            check(i)?;
            if !h.is_finite() {
                return Err(IsingError::NonFinite);
            }
            if !fields.insert(i) {
                return Err(IsingError::DuplicateField(i));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("")
    }

    /// Energy of the basis state with index `index` (qubit 0 most significant).
    pub fn energy_index(&self, index: usize) -> f64 {
        let z = |q: usize| {
            if (index >> (self.n - 1 - q)) & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let quad: f64 = self.quadratic.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum();
        let lin: f64 = self.linear.iter().map(|&(i, h)| h * z(i)).sum();
        -quad - lin
    }

    /// All `2^n` energies indexed by basis state.
    pub fn energies(&self) -> Result<Vec<f64>, IsingError> {
        if self.n > MAX_ENUMERATION_QUBITS {
            return Err(IsingError::TooLarge { n: self.n });
        }
        Ok((0..1usize << self.n).map(|k| self.energy_index(k)).collect())
    }

    /// True when the ground-state set is closed under a global flip and no fields are present.
    pub fn is_flip_symmetric(&self) -> Result<bool, IsingError> {
        let gs = ground_states(self)?;
        Ok(gs.states.iter().all(|s| gs.contains(&s.flipped()))
            && self.linear.iter().all(|&(_, h)| h.abs() <= DEGENERACY_TOL))
    }
}

pub fn energy(model: &IsingModel, s: &SpinConfig) -> Result<f64, IsingError> {
    if s.len() != model.n {
        return Err(IsingError::LengthMismatch {
            got: s.len(),
            expected: model.n,
        });
    }
    let quad: f64 = model
        .quadratic
        .iter()
        .map(|&(i, j, c)| c * s.spin(i) * s.spin(j))
        .sum();
    let lin: f64 = model.linear.iter().map(|&(i, h)| h * s.spin(i)).sum();
    Ok(-quad - lin)
}

pub fn ground_states(model: &IsingModel) -> Result<GroundStateSet, IsingError> {
    let energies = model.energies()?;
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let states = energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e - min <= DEGENERACY_TOL)
        .map(|(k, _)| SpinConfig::from_index(k, model.n))
        .collect();
    Ok(GroundStateSet {
        energy: min,
        states,
    })
}

/// Fix qubit 0 to spin up and drop it from the model.
pub fn fix_q0_up(model: &IsingModel) -> Result<IsingModel, IsingError> {
    model.validate()?;
    if model.n < 2 {
        return Err(IsingError::NothingToReduce);
    }
    if model
        .linear
        .iter()
        .any(|&(i, h)| i == 0 && h.abs() > DEGENERACY_TOL)
    {
        return Err(IsingError::FieldOnFixedQubit);
    }
    if !model.is_flip_symmetric()? {
        return Err(IsingError::NotFlipSymmetric);
    }
    let mut fields = vec![0.0; model.n - 1];
    let mut quadratic = Vec::new();
    for &(i, j, c) in &model.quadratic {
        match (i, j) {
            (0, k) | (k, 0) => fields[k - 1] += c,
            _ => quadratic.push((i - 1, j - 1, c)),
        }
    }
    for &(i, h) in &model.linear {
        if i > 0 {
            fields[i - 1] += h;
        }
    }
    let linear = fields
        .into_iter()
        .enumerate()
        .filter(|(_, h)| *h != 0.0)
        .collect();
    IsingModel::new(model.n - 1, quadratic, linear, model.label.clone())
}

/// Names of the built-in problems, in order.
pub const PROBLEM_NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn builtin_problem(name: &str) -> Result<IsingModel, IsingError> {
    let (n, quadratic): (usize, Vec<(usize, usize, f64)>) = match name {
        "a" => (
            5,
            vec![
                (0, 1, 1.0),
                (0, 2, 1.0),
                (0, 3, -1.0),
                (1, 2, 1.0),
                (1, 4, -1.0),
                (2, 3, 1.0),
                (2, 4, 1.0),
                (3, 4, 1.0),
            ],
        ),
        "b" => (
            5,
            vec![
                (0, 1, 2.0),
                (0, 2, 1.0),
                (0, 3, 2.0),
                (0, 4, 1.0),
                (1, 2, -2.0),
                (1, 3, -1.0),
                (1, 4, 1.0),
                (2, 3, 1.0),
                (2, 4, 2.0),
                (3, 4, -2.0),
            ],
        ),
        "c" => (
            6,
            vec![
                (0, 2, 1.0),
                (1, 3, 1.0),
                (2, 3, -1.0),
                (2, 4, 1.0),
                (2, 5, -1.0),
                (3, 4, 1.0),
                (3, 5, -1.0),
                (4, 5, 1.0),
            ],
        ),
        "d" => (
            4,
            vec![(0, 1, 1.0), (1, 2, -1.0), (1, 3, -1.0), (2, 3, -1.0)],
        ),
        "e" => (3, vec![(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)]),
        "f" => (2, vec![(0, 1, -1.0)]),
        other => return Err(IsingError::UnknownProblem(other.to_string())),
    };
    IsingModel::new(n, quadratic, Vec::new(), Some(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> SpinConfig {
        SpinConfig::parse(x).unwrap()
    }

    #[test]
    fn problem_f_energies() {
        let f = builtin_problem("f").unwrap();
        assert_eq!(energy(&f, &s("01")).unwrap(), -1.0);
        assert_eq!(energy(&f, &s("00")).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let f = builtin_problem("f").unwrap();
        assert!(matches!(
            energy(&f, &s("010")),
            Err(IsingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_spin_aligns_with_field() {
        let m = IsingModel::new(1, vec![], vec![(0, 1.0)], None).unwrap();
        assert_eq!(ground_states(&m).unwrap().strings(), vec!["0"]);
    }

    #[test]
    fn index_round_trip() {
        for k in 0..32 {
            assert_eq!(SpinConfig::from_index(k, 5).index(), k);
        }
        assert_eq!(SpinConfig::from_index(1, 4).to_string(), "0001");
    }

    #[test]
    fn reduction_of_d() {
        let d = fix_q0_up(&builtin_problem("d").unwrap()).unwrap();
        assert_eq!(d.n, 3);
        assert_eq!(d.linear, vec![(0, 1.0)]);
        assert_eq!(d.quadratic, vec![(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)]);
    }

    #[test]
    fn reduction_rejects_fields() {
        let m = IsingModel::new(2, vec![(0, 1, 1.0)], vec![(1, 0.5)], None).unwrap();
        assert_eq!(fix_q0_up(&m), Err(IsingError::NotFlipSymmetric));
        let m = IsingModel::new(2, vec![(0, 1, 1.0)], vec![(0, 0.5)], None).unwrap();
        assert_eq!(fix_q0_up(&m), Err(IsingError::FieldOnFixedQubit));
    }

    #[test]
    fn invalid_models() {
        assert_eq!(
            IsingModel::new(2, vec![(0, 2, 1.0)], vec![], None),
            Err(IsingError::IndexOutOfRange { index: 2, n: 2 })
        );
        assert_eq!(
            IsingModel::new(2, vec![(0, 1, 1.0), (1, 0, 1.0)], vec![], None),
            Err(IsingError::DuplicateCoupling(0, 1))
        );
        assert!(builtin_problem("g").is_err());
    }

    #[test]
    fn json_layout() {
        let f = builtin_problem("f").unwrap();
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"n": 2, "quadratic": [[0, 1, -1.0]], "linear": [], "label": "f"})
        );
        let back: IsingModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);
    }
}
