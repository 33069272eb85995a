#![allow(dead_code)]
//! Dense reference implementations used as test oracles. Nothing here calls
//! the library's simulator.

use fairsample::circuit::{Circuit, Gate};
use fairsample::ising::IsingModel;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

pub fn apply(state: &mut [C], n: usize, g: &Gate) {
    let bit = |w: usize| 1usize << (n - 1 - w);
    let phase = |s: &mut [C], mask: usize, z: C| {
        for (i, a) in s.iter_mut().enumerate() {
            if i & mask == mask {
                *a *= z;
            }
        }
    };
    match *g {
        Gate::H(w) => {
            let b = bit(w);
            let r = 1.0 / 2f64.sqrt();
            for i in 0..state.len() {
                if i & b == 0 {
                    let (x, y) = (state[i], state[i | b]);
                    state[i] = (x + y) * r;
                    state[i | b] = (x - y) * r;
                }
            }
        }
        Gate::X(w) => {
            let b = bit(w);
            for i in 0..state.len() {
                if i & b == 0 {
                    state.swap(i, i | b);
                }
            }
        }
        Gate::T(w) => phase(state, bit(w), C::from_polar(1.0, PI / 4.0)),
        Gate::Tdg(w) => phase(state, bit(w), C::from_polar(1.0, -PI / 4.0)),
        Gate::Phase { exponent, wire } => phase(state, bit(wire), C::from_polar(1.0, PI * exponent)),
        Gate::CPhase {
            exponent,
            control,
            target,
        } => phase(state, bit(control) | bit(target), C::from_polar(1.0, PI * exponent)),
        Gate::Cnot { control, target } => {
            let (c, t) = (bit(control), bit(target));
            for i in 0..state.len() {
                if i & c != 0 && i & t == 0 {
                    state.swap(i, i | t);
                }
            }
        }
        Gate::Swap(a, b) => {
            let (x, y) = (bit(a), bit(b));
            for i in 0..state.len() {
                if i & x != 0 && i & y == 0 {
                    state.swap(i, i ^ x ^ y);
                }
            }
        }
    }
}

pub fn run(c: &Circuit) -> Vec<C> {
    let n = c.n();
    let mut s = vec![C::new(0.0, 0.0); 1 << n];
    s[0] = C::new(1.0, 0.0);
    for g in c.gates() {
        apply(&mut s, n, g);
    }
    s
}

/// Distribution over logical bitstrings after readout relabelling and
/// post-selection on the ancillas.
pub fn logical_probs(c: &Circuit) -> Vec<f64> {
    let n = c.n();
    let amps = run(c);
    let measured = c.measured_wires().to_vec();
    let labels: Vec<usize> = measured.iter().map(|&w| c.readout_perm()[w]).collect();
    let m = measured.len();
    let mut out = vec![0.0; 1 << m];
    let mut kept = 0.0;
    for (idx, a) in amps.iter().enumerate() {
        let bit = |w: usize| (idx >> (n - 1 - w)) & 1;
        if c.ancilla_wires().iter().any(|&w| bit(w) == 1) {
            continue;
        }
        let mut logical = 0;
        for (k, &w) in measured.iter().enumerate() {
            let rank = labels.iter().filter(|&&l| l < labels[k]).count();
            logical |= bit(w) << (m - 1 - rank);
        }
        out[logical] += a.norm_sqr();
        kept += a.norm_sqr();
    }
    out.iter().map(|p| p / kept).collect()
}

fn energies(model: &IsingModel) -> Vec<f64> {
    let n = model.n;
    (0..1usize << n)
        .map(|idx| {
            let z = |q: usize| 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1) as f64;
            let quad: f64 = model.quadratic.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum();
            let lin: f64 = model.linear.iter().map(|&(i, h)| h * z(i)).sum();
            -quad - lin
        })
        .collect()
}

fn matvec(m: &[Vec<C>], v: &[C]) -> Vec<C> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Hadamard layer as an explicit matrix.
pub fn hadamard_matrix(n: usize) -> Vec<Vec<C>> {
    let d = 1usize << n;
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| C::new(if (i & j).count_ones() % 2 == 0 { s } else { -s }, 0.0))
                .collect()
        })
        .collect()
}

/// `Id - (1 - e^{-iβ}) |F⟩⟨F|` with `|F⟩` the uniform superposition.
pub fn mixer_matrix(n: usize, beta: f64) -> Vec<Vec<C>> {
    let d = 1usize << n;
    let k = (C::new(1.0, 0.0) - C::from_polar(1.0, -beta)) / d as f64;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { C::new(1.0, 0.0) - k } else { -k })
                .collect()
        })
        .collect()
}

/// Final state of the uncompiled algorithm.
pub fn qaoa_state(model: &IsingModel, betas: &[f64], gammas: &[f64]) -> Vec<C> {
    let n = model.n;
    let e = energies(model);
    let mut zero = vec![C::new(0.0, 0.0); 1 << n];
    zero[0] = C::new(1.0, 0.0);
    let mut s = matvec(&hadamard_matrix(n), &zero);
    for (&b, &g) in betas.iter().zip(gammas) {
        for (a, &en) in s.iter_mut().zip(&e) {
            *a *= C::from_polar(1.0, -g * en);
        }
        s = matvec(&mixer_matrix(n, b), &s);
    }
    s
}

pub fn qaoa_probs(model: &IsingModel, betas: &[f64], gammas: &[f64]) -> Vec<f64> {
    qaoa_state(model, betas, gammas).iter().map(|a| a.norm_sqr()).collect()
}

pub fn model_energies(model: &IsingModel) -> Vec<f64> {
    energies(model)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
