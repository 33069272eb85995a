//! Pearson χ² over ground-state counts and the number of shots needed to
//! reject fair sampling (NSRFS).

use crate::circuit::Circuit;
use crate::ising::GroundStateSet;
use crate::simulator::{substream, Counts};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

pub const DEFAULT_INNER_LOOPS: usize = 1000;
pub const DEFAULT_CAP: u64 = 1 << 30;
pub const DEFAULT_SIGNIFICANCE: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum FairnessError {
    #[error("no shots were retained")]
    NoShots,
    #[error("χ² needs at least two ground states, found {0}")]
    TooFewStates(usize),
    #[error("no ground state was observed")]
    NoGroundStates,
    #[error("outcome {0:?} does not match the readout width")]
    BadOutcome(String),
}

/// Result of NSRFS: a shot count or the cap sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nsrfs {
    Shots(u64),
    Capped,
}

impl Nsrfs {
    pub fn value(self) -> Option<u64> {
        match self {
            Nsrfs::Shots(n) => Some(n),
            Nsrfs::Capped => None,
        }
    }

    pub fn is_capped(self) -> bool {
        self == Nsrfs::Capped
    }
}

impl std::fmt::Display for Nsrfs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Nsrfs::Shots(n) => write!(f, "{n}"),
            Nsrfs::Capped => f.write_str("CAPPED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub gsp: f64,
    pub chi2: f64,
    pub dof: usize,
    pub nsrfs: Nsrfs,
    pub aggregate_error: f64,
    pub ground_state_counts: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Ground states reachable by a circuit, in logical bit order.
///
/// With `fixed_q0` the circuit omits qubit 0, so only states with qubit 0 up
/// are targets and their leading bit is dropped.
pub fn target_states(ground_set: &GroundStateSet, fixed_q0: bool) -> Vec<String> {
    ground_set
        .strings()
        .into_iter()
        .filter_map(|s| {
            if fixed_q0 {
                s.strip_prefix('0').map(str::to_string)
            } else {
                Some(s)
            }
        })
        .collect()
}

/// Counts per target ground state and the retained total, after readout mapping.
pub fn ground_state_counts(
    counts: &impl Counts,
    ground_set: &GroundStateSet,
    readout: &Circuit,
    fixed_q0: bool,
) -> Result<(Vec<f64>, f64), FairnessError> {
    let targets = target_states(ground_set, fixed_q0);
    let width = readout.measured_wires().len();
    let mut o = vec![0.0; targets.len()];
    for (key, c) in counts.entries() {
        if key.len() != width {
            return Err(FairnessError::BadOutcome(key.to_string()));
        }
        let logical = readout.to_logical(key);
        if let Ok(i) = targets.binary_search(&logical) {
            o[i] += c;
        }
    }
    Ok((o, counts.total()))
}

pub fn gsp(
    counts: &impl Counts,
    ground_set: &GroundStateSet,
    readout: &Circuit,
    fixed_q0: bool,
) -> Result<f64, FairnessError> {
    let (o, total) = ground_state_counts(counts, ground_set, readout, fixed_q0)?;
    if total <= 0.0 {
        return Err(FairnessError::NoShots);
    }
    Ok(o.iter().sum::<f64>() / total)
}

/// Pearson χ² against equal expected counts; returns `(χ², k = d - 1)`.
pub fn chi2_stat(o: &[f64]) -> Result<(f64, usize), FairnessError> {
    let d = o.len();
    if d < 2 {
        return Err(FairnessError::TooFewStates(d));
    }
    let total: f64 = o.iter().sum();
    if total <= 0.0 {
        return Err(FairnessError::NoGroundStates);
    }
    let e = total / d as f64;
    Ok((o.iter().map(|x| (x - e) * (x - e) / e).sum(), d - 1))
}

/// Upper-tail critical value of χ² with `k` degrees of freedom.
pub fn chi2_critical(k: usize, significance: f64) -> f64 {
    assert!(k >= 1, "χ² needs k >= 1");
    assert!(significance > 0.0 && significance < 1.0);
    let a = k as f64 / 2.0;
    let tail = 1.0 - significance;
    let upper = |x: f64| gamma_ur(a, x / 2.0);
    let mut lo = 0.0;
    let mut hi = k as f64 + 10.0;
    while upper(hi) > tail {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if upper(mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn chi2_uniform(counts: &[u64], n: u64) -> f64 {
    let e = n as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - e;
            d * d / e
        })
        .sum()
}

/// One multinomial draw of `n` samples over `weights`.
fn multinomial(n: u64, weights: &[f64], rng: &mut impl rand::Rng, out: &mut [u64]) {
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if i == last {
            out[i] = left;
            left = 0;
        } else if left == 0 || w <= 0.0 {
            out[i] = 0;
        } else {
            let p = (w / mass).clamp(0.0, 1.0);
            let k = Binomial::new(left, p).expect("valid binomial").sample(rng);
            out[i] = k;
            left -= k;
        }
        mass -= w;
    }
}

/// Stream ids for synthetic draws; sampling chunks use the low range.
const NSRFS_STREAMS: u64 = 1 << 63;

struct MedianChi2<'a> {
    weights: &'a [f64],
    inner: usize,
    seed: u64,
    calls: u64,
}

impl MedianChi2<'_> {
    fn at(&mut self, n: u64) -> f64 {
        let mut rng = substream(self.seed, NSRFS_STREAMS | self.calls);
        self.calls += 1;
        let mut counts = vec![0; self.weights.len()];
        let mut values: Vec<f64> = (0..self.inner)
            .map(|_| {
                multinomial(n, self.weights, &mut rng, &mut counts);
                chi2_uniform(&counts, n)
            })
            .collect();
        values.sort_by(f64::total_cmp);
        values[(values.len() - 1) / 2]
    }
}

/// NSRFS from observed ground-state counts `o`.
pub fn nsrfs_from_counts(o: &[f64], inner: usize, seed: u64, cap: u64) -> Result<Nsrfs, FairnessError> {
    let d = o.len();
    if d < 2 {
        return Err(FairnessError::TooFewStates(d));
    }
    let total: f64 = o.iter().sum();
    if total <= 0.0 {
        return Err(FairnessError::NoGroundStates);
    }
    let weights: Vec<f64> = o.iter().map(|x| x / total).collect();
    let critical = chi2_critical(d - 1, DEFAULT_SIGNIFICANCE);

    if weights.iter().filter(|&&w| w > 0.0).count() == 1 {
        let n = ((critical / (d - 1) as f64).ceil() as u64).max(2);
        return Ok(if n > cap { Nsrfs::Capped } else { Nsrfs::Shots(n) });
    }

    let mut median = MedianChi2 {
        weights: &weights,
        inner: inner.max(1),
        seed,
        calls: 0,
    };
    let mut n: u64 = 2;
    while median.at(n) < critical {
        n *= 2;
        if n > cap {
            return Ok(Nsrfs::Capped);
        }
    }
    let mut upper = n;
    let mut lower = n / 2;
    while upper - lower > 2 {
        n = (upper + lower) / 2;
        if median.at(n) < critical {
            lower = n;
        } else {
            upper = n;
        }
    }
    Ok(Nsrfs::Shots(n))
}

pub fn nsrfs(
    counts: &impl Counts,
    ground_set: &GroundStateSet,
    readout: &Circuit,
    fixed_q0: bool,
    inner: usize,
    seed: u64,
    cap: u64,
) -> Result<Nsrfs, FairnessError> {
    let (o, _) = ground_state_counts(counts, ground_set, readout, fixed_q0)?;
    nsrfs_from_counts(&o, inner, seed, cap)
}

/// Options for [`fairness_report`].
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub inner: usize,
    pub seed: u64,
    pub cap: u64,
    pub aggregate_error: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            inner: DEFAULT_INNER_LOOPS,
            seed: 0,
            cap: DEFAULT_CAP,
            aggregate_error: 0.0,
        }
    }
}

pub fn fairness_report(
    counts: &impl Counts,
    ground_set: &GroundStateSet,
    readout: &Circuit,
    fixed_q0: bool,
    opts: ReportOptions,
) -> Result<FairnessReport, FairnessError> {
    let (o, total) = ground_state_counts(counts, ground_set, readout, fixed_q0)?;
    if total <= 0.0 {
        return Err(FairnessError::NoShots);
    }
    let observed: f64 = o.iter().sum();
    let (chi2, dof) = chi2_stat(&o)?;
    let nsrfs = nsrfs_from_counts(&o, opts.inner, opts.seed, opts.cap)?;
    Ok(FairnessReport {
        gsp: observed / total,
        chi2,
        dof,
        nsrfs,
        aggregate_error: opts.aggregate_error,
        weights: o.iter().map(|x| x / observed).collect(),
        ground_state_counts: o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_examples() {
        assert_eq!(chi2_stat(&[30.0, 10.0]).unwrap(), (10.0, 1));
        assert_eq!(chi2_stat(&[7.0, 7.0, 7.0]).unwrap(), (0.0, 2));
        let (x, _) = chi2_stat(&[74.0 * 0.6, 74.0 * 0.4]).unwrap();
        assert!((x - 2.96).abs() < 0.005);
        let (x, _) = chi2_stat(&[44.0, 30.0]).unwrap();
        assert!(x < 3.841);
        assert_eq!(chi2_stat(&[5.0]), Err(FairnessError::TooFewStates(1)));
        assert_eq!(chi2_stat(&[0.0, 0.0]), Err(FairnessError::NoGroundStates));
    }

    #[test]
    fn single_observed_state() {
        let n = nsrfs_from_counts(&[10.0, 0.0], 100, 1, DEFAULT_CAP).unwrap();
        assert_eq!(n, Nsrfs::Shots(4));
        let n = nsrfs_from_counts(&[0.0, 3.0, 0.0], 100, 1, DEFAULT_CAP).unwrap();
        assert_eq!(n, Nsrfs::Shots(3));
    }

    #[test]
    fn uniform_weights_are_capped() {
        let n = nsrfs_from_counts(&[100.0, 100.0, 100.0], 1000, 9, DEFAULT_CAP).unwrap();
        assert_eq!(n, Nsrfs::Capped);
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = substream(4, 0);
        let mut out = vec![0; 4];
        for n in [0, 1, 17, 1 << 30] {
            multinomial(n, &[0.1, 0.0, 0.6, 0.3], &mut rng, &mut out);
            assert_eq!(out.iter().sum::<u64>(), n);
            assert_eq!(out[1], 0);
        }
    }

    #[test]
    fn critical_values_increase() {
        let mut prev = 0.0;
        for k in 1..10 {
            let c = chi2_critical(k, 0.95);
            assert!(c > prev);
            assert!(chi2_critical(k, 0.99) > c);
            prev = c;
        }
    }
}
