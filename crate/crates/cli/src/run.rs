use crate::config::{AngleSource, ExperimentConfig, NoiseKind};
use crate::CliError;
use fairsample::circuit::Circuit;
use fairsample::fairness::{fairness_report, Nsrfs, ReportOptions};
use fairsample::gmqaoa::{
    build_full_circuit, grid_search_model, uses_ancilla_by_default, AngleParams, Architecture, CompiledCircuit,
};
use fairsample::ising::{fix_q0_up, ground_states};
use fairsample::simulator::{sample, NoiseModel, ReadoutError};
use fairsample::topology::{
    aggregate_error, aggregate_error_of_noise, enumerate_embeddings, noise_from_backend, BackendTopology, Embedding,
    EmbeddingConvention,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One experiment: one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub architecture: String,
    pub backend: String,
    pub embedding: String,
    pub shots: u64,
    pub discarded: Option<u64>,
    pub gsp: Option<f64>,
    pub chi2: Option<f64>,
    pub dof: Option<usize>,
    /// Shot count or `CAPPED`.
    pub nsrfs: Option<String>,
    pub capped: Option<bool>,
    pub aggregate_error: Option<f64>,
    /// Radians, `;`-separated per round.
    pub beta: String,
    pub gamma: String,
    pub seed: u64,
    pub error: String,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }

    /// Finite NSRFS, if any.
    pub fn nsrfs_value(&self) -> Option<f64> {
        if self.capped == Some(true) {
            return None;
        }
        self.nsrfs.as_deref().and_then(|s| s.parse().ok())
    }
}

#[derive(Debug, Clone)]
enum NoisePoint {
    Synthetic(NoiseKind, f64),
    Backend(usize, Embedding),
}

struct Cell {
    pair: usize,
    noise: NoisePoint,
    seed: u64,
}

struct Pair {
    problem: String,
    architecture: String,
    compiled: Result<CompiledCircuit, String>,
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn compile_pair(problem: &str, arch_name: &str, source: &AngleSource) -> Result<CompiledCircuit, String> {
    let arch = Architecture::named(arch_name).map_err(|e| e.to_string())?;
    let angles = match source {
        _ if problem == "f" => AngleParams::single(0.0, 0.0),
        AngleSource::Table => AngleParams::table(problem).ok_or("no tabulated angles")?,
        AngleSource::GridSearch { steps } => {
            let model = fairsample::ising::builtin_problem(problem).map_err(|e| e.to_string())?;
            let reduced = fix_q0_up(&model).map_err(|e| e.to_string())?;
            grid_search_model(&reduced, &arch, *steps, uses_ancilla_by_default(problem, arch_name))
                .map_err(|e| e.to_string())?
                .angles
        }
    };
    build_full_circuit(problem, &arch, &angles).map_err(|e| e.to_string())
}

fn synthetic_noise(kind: NoiseKind, value: f64, circuit: &Circuit) -> NoiseModel {
    match kind {
        NoiseKind::Noiseless | NoiseKind::Backend => NoiseModel::noiseless(),
        NoiseKind::Global => NoiseModel::global(value),
        NoiseKind::Depolarizing => NoiseModel::depolarizing(value),
        NoiseKind::Coherent => NoiseModel::coherent(value),
        NoiseKind::ZzAfterCnot => NoiseModel {
            zz_after_cnot: value,
            ..NoiseModel::noiseless()
        },
        NoiseKind::Readout => NoiseModel {
            readout: vec![ReadoutError { p01: value, p10: value }; circuit.n()],
            ..NoiseModel::noiseless()
        },
    }
}

fn kind_label(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::Noiseless => "noiseless",
        NoiseKind::Global => "global",
        NoiseKind::Depolarizing => "depolarizing",
        NoiseKind::Coherent => "coherent",
        NoiseKind::ZzAfterCnot => "zz_after_cnot",
        NoiseKind::Readout => "readout",
        NoiseKind::Backend => "backend",
    }
}

fn run_cell(cell: &Cell, pair: &Pair, backends: &[BackendTopology], config: &ExperimentConfig) -> ResultRow {
    let (backend, embedding) = match &cell.noise {
        NoisePoint::Synthetic(NoiseKind::Noiseless, _) => ("synthetic".to_string(), "noiseless".to_string()),
        NoisePoint::Synthetic(k, v) => ("synthetic".to_string(), format!("{}={v}", kind_label(*k))),
        NoisePoint::Backend(b, e) => (backends[*b].name.clone(), e.label()),
    };
    let mut row = ResultRow {
        problem: pair.problem.clone(),
        architecture: pair.architecture.clone(),
        backend,
        embedding,
        shots: config.shots,
        discarded: None,
        gsp: None,
        chi2: None,
        dof: None,
        nsrfs: None,
        capped: None,
        aggregate_error: None,
        beta: String::new(),
        gamma: String::new(),
        seed: cell.seed,
        error: String::new(),
    };
    let compiled = match &pair.compiled {
        Ok(c) => c,
        Err(e) => {
            row.error = e.clone();
            return row;
        }
    };
    if let Some(a) = &compiled.angles {
        row.beta = joined(&a.betas);
        row.gamma = joined(&a.gammas);
    }
    if let Err(e) = fill_row(&mut row, cell, compiled, backends, config) {
        row.error = e;
    }
    row
}

fn fill_row(
    row: &mut ResultRow,
    cell: &Cell,
    compiled: &CompiledCircuit,
    backends: &[BackendTopology],
    config: &ExperimentConfig,
) -> Result<(), String> {
    let circuit = &compiled.circuit;
    let (mut noise, agg) = match &cell.noise {
        NoisePoint::Synthetic(kind, v) => {
            let n = synthetic_noise(*kind, *v, circuit);
            let agg = aggregate_error_of_noise(circuit, &n);
            (n, agg)
        }
        NoisePoint::Backend(b, e) => {
            let n = noise_from_backend(circuit, e, &backends[*b], cell.seed).map_err(|e| e.to_string())?;
            let agg = aggregate_error(circuit, e, &backends[*b]).map_err(|e| e.to_string())?;
            (n, agg)
        }
    };
    noise.seed = cell.seed;
    let hist = sample(circuit, Some(&noise), config.shots, cell.seed).map_err(|e| e.to_string())?;
    row.discarded = Some(hist.discarded);
    let gs = ground_states(&compiled.model).map_err(|e| e.to_string())?;
    let opts = ReportOptions {
        inner: config.nsrfs_inner,
        seed: cell.seed,
        cap: config.nsrfs_cap,
        aggregate_error: agg,
    };
    let report = fairness_report(&hist, &gs, circuit, compiled.fixed_q0, opts).map_err(|e| e.to_string())?;
    row.gsp = Some(report.gsp);
    row.chi2 = Some(report.chi2);
    row.dof = Some(report.dof);
    row.nsrfs = Some(report.nsrfs.to_string());
    row.capped = Some(report.nsrfs == Nsrfs::Capped);
    row.aggregate_error = Some(report.aggregate_error);
    Ok(())
}

/// Run every cell of the matrix. Rows come back in configuration order:
/// problem, architecture, noise point, seed. Failures are recorded in the
/// `error` column and do not stop the run.
pub fn run_experiments(config: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    config.validate()?;
    let backends = config.load_backends()?;

    let names: Vec<(String, String)> = config
        .problems
        .iter()
        .flat_map(|p| config.architectures_for(p).into_iter().map(move |a| (p.clone(), a)))
        .collect();
    let pairs: Vec<Pair> = names
        .par_iter()
        .map(|(p, a)| Pair {
            problem: p.clone(),
            architecture: a.clone(),
            compiled: compile_pair(p, a, &config.angles),
        })
        .collect();

    let mut cells = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let mut points = Vec::new();
        for sweep in &config.noise {
            match sweep.kind {
                NoiseKind::Noiseless => points.push(NoisePoint::Synthetic(NoiseKind::Noiseless, 0.0)),
                NoiseKind::Backend => {
                    let Ok(arch) = Architecture::named(&pair.architecture) else { continue };
                    for (b, backend) in backends.iter().enumerate() {
                        for e in enumerate_embeddings(backend, &arch, EmbeddingConvention::UnorderedPairs) {
                            points.push(NoisePoint::Backend(b, e));
                        }
                    }
                }
                kind => points.extend(sweep.values.iter().map(|&v| NoisePoint::Synthetic(kind, v))),
            }
        }
        for noise in points {
            for &seed in &config.seeds {
                cells.push(Cell {
                    pair: i,
                    noise: noise.clone(),
                    seed,
                });
            }
        }
    }

    Ok(cells
        .par_iter()
        .map(|c| run_cell(c, &pairs[c.pair], &backends, config))
        .collect())
}

/// CSV text of the rows, without any header comment.
pub fn csv_body(rows: &[ResultRow]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub const COLUMNS: [&str; 16] = [
    "problem",
    "architecture",
    "backend",
    "embedding",
    "shots",
    "discarded",
    "gsp",
    "chi2",
    "dof",
    "nsrfs",
    "capped",
    "aggregate_error",
    "beta",
    "gamma",
    "seed",
    "error",
];

/// Write the rows after a `#` comment line carrying the generation time.
pub fn write_csv(rows: &[ResultRow], out: &mut impl Write) -> Result<(), CliError> {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "# fairsample results, generated at unix time {secs}")?;
    out.write_all(csv_body(rows)?.as_bytes())?;
    Ok(())
}

/// Parse a results file, skipping `#` comment lines.
pub fn read_csv(text: &str) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
