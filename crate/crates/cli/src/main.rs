use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use fairsample::circuit::count_gates;
use fairsample::fairness::{fairness_report, ReportOptions, DEFAULT_INNER_LOOPS};
use fairsample::gmqaoa::{
    build_full_circuit, grid_search_model, supported_architectures, uses_ancilla_by_default, AngleParams,
    Architecture,
};
use fairsample::ising::{builtin_problem, fix_q0_up, ground_states, PROBLEM_NAMES};
use fairsample::simulator::{
    exact_calibration_matrix, mitigate, CalibrationMatrix, CountsHistogram, NoiseModel, DEFAULT_MAX_CONDITION,
};
use fairsample::topology::{enumerate_embeddings, BackendTopology, EmbeddingConvention};
use fairsample_cli::{emit_plot, read_csv, run_experiments, write_csv, ExperimentConfig, PlotSpec, Predictor};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fairsample", version, about = "Fair ground-state sampling experiments with Grover-mixer QAOA")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; replaces the configured seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per experiment.
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in problems.
    Problems,
    /// Compile a problem's circuit to OpenQASM plus a JSON sidecar.
    Compile {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        arch: Option<String>,
        /// Mixer angle in radians; defaults to the tabulated value.
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Grid search for the angles minimising the expected energy.
    OptimizeAngles {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        arch: Option<String>,
        /// Grid points per π.
        #[arg(long, default_value_t = 60)]
        steps: usize,
    },
    /// Run the experiment matrix of `--config` and write results.csv.
    Run,
    /// Fairness report for a counts file produced by a problem's circuit.
    Fairness {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long, default_value_t = DEFAULT_INNER_LOOPS)]
        inner: usize,
    },
    /// Count or list the embeddings of the architectures on a backend.
    Embeddings {
        /// Bundled backend name or backend JSON file.
        #[arg(long)]
        backend: String,
        /// List the embeddings of one architecture instead of counting all.
        #[arg(long)]
        arch: Option<String>,
    },
    /// Undo readout errors in a counts file.
    Mitigate {
        #[arg(long)]
        counts: PathBuf,
        /// Calibration matrix CSV.
        #[arg(long, conflicts_with_all = ["p01", "p10"])]
        calibration: Option<PathBuf>,
        #[arg(long)]
        p01: Option<f64>,
        #[arg(long)]
        p10: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_CONDITION)]
        max_condition: f64,
    },
    /// Scatter NSRFS against a predictor from a results file.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "gsp")]
        predictor: Predictor,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, default_value = "")]
        title: String,
    },
}

enum Outcome {
    Done,
    Partial(usize),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("{n} experiment(s) failed; see the error column");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn arch_for(problem: &str, arch: Option<&str>) -> Result<Architecture> {
    let name = match arch {
        Some(a) => a,
        None => supported_architectures(problem)
            .first()
            .copied()
            .ok_or_else(|| anyhow!("unknown problem {problem:?}"))?,
    };
    Ok(Architecture::named(name)?)
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_backend(name: &str) -> Result<BackendTopology> {
    if BackendTopology::bundled_names().contains(&name) {
        return Ok(BackendTopology::bundled(name)?);
    }
    Ok(BackendTopology::from_json(&read(Path::new(name))?)?)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Problems => {
            for name in PROBLEM_NAMES {
                let m = builtin_problem(name)?;
                let gs = ground_states(&m)?;
                let up: Vec<String> = gs.strings().into_iter().filter(|s| s.starts_with('0')).collect();
                println!(
                    "{name}  qubits={}  degeneracy={}  energy={}  architectures={}  ground states (q0 up): {}",
                    m.n,
                    gs.degeneracy(),
                    gs.energy,
                    supported_architectures(name).join(","),
                    up.join(" ")
                );
            }
        }
        Command::Compile {
            problem,
            arch,
            beta,
            gamma,
        } => {
            let arch = arch_for(problem, arch.as_deref())?;
            let angles = match (beta, gamma) {
                (Some(b), Some(g)) => AngleParams::single(*b, *g),
                (None, None) => AngleParams::table(problem).unwrap_or_else(|| AngleParams::single(0.0, 0.0)),
                _ => bail!("give both --beta and --gamma or neither"),
            };
            let c = build_full_circuit(problem, &arch, &angles)?;
            let counts = count_gates(&c.circuit);
            let (e, gsp) = c.evaluate()?;
            eprintln!(
                "{problem} on {}: {} rotations, {} CNOTs, expectation {e:.4}, GSP {gsp:.4}",
                arch.name, counts.rotations, counts.cnots
            );
            match &cli.out {
                Some(dir) => {
                    let stem = format!("{problem}_{}", arch.name);
                    let q = write_out(dir, &format!("{stem}.qasm"), &c.to_qasm())?;
                    let s = write_out(dir, &format!("{stem}.json"), &c.sidecar_json())?;
                    eprintln!("wrote {} and {}", q.display(), s.display());
                }
                None => print!("{}", c.to_qasm()),
            }
        }
        Command::OptimizeAngles { problem, arch, steps } => {
            if problem == "f" {
                bail!("problem f has no angles");
            }
            let arch = arch_for(problem, arch.as_deref())?;
            let reduced = fix_q0_up(&builtin_problem(problem)?)?;
            let r = grid_search_model(&reduced, &arch, *steps, uses_ancilla_by_default(problem, &arch.name))?;
            let pi = std::f64::consts::PI;
            let out = serde_json::json!({
                "problem": problem,
                "architecture": arch.name,
                "beta": r.angles.betas[0],
                "gamma": r.angles.gammas[0],
                "beta_over_pi": r.angles.betas[0] / pi,
                "gamma_over_pi": r.angles.gammas[0] / pi,
                "expectation": r.expectation,
                "gsp": r.gsp,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Run => {
            let path = cli.config.as_ref().ok_or_else(|| anyhow!("run needs --config"))?;
            let mut config = ExperimentConfig::from_json(&read(path)?)?;
            if let Some(s) = cli.seed {
                config.seeds = vec![s];
            }
            if let Some(s) = cli.shots {
                config.shots = s;
            }
            let rows = run_experiments(&config)?;
            let dir = cli.out.clone().unwrap_or_else(|| config.output.clone());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let file = dir.join("results.csv");
            let mut f = std::fs::File::create(&file).with_context(|| format!("writing {}", file.display()))?;
            write_csv(&rows, &mut f)?;
            let failed = rows.iter().filter(|r| r.failed()).count();
            eprintln!("{} rows written to {}", rows.len(), file.display());
            if failed > 0 {
                return Ok(Outcome::Partial(failed));
            }
        }
        Command::Fairness {
            counts,
            problem,
            arch,
            inner,
        } => {
            let hist: CountsHistogram = serde_json::from_str(&read(counts)?)?;
            let arch = arch_for(problem, arch.as_deref())?;
            let angles = AngleParams::table(problem).unwrap_or_else(|| AngleParams::single(0.0, 0.0));
            let c = build_full_circuit(problem, &arch, &angles)?;
            let gs = ground_states(&c.model)?;
            let opts = ReportOptions {
                inner: *inner,
                seed: cli.seed.unwrap_or(0),
                ..ReportOptions::default()
            };
            let report = fairness_report(&hist, &gs, &c.circuit, c.fixed_q0, opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Embeddings { backend, arch } => {
            let b = load_backend(backend)?;
            match arch {
                Some(a) => {
                    let a = Architecture::named(a)?;
                    for e in enumerate_embeddings(&b, &a, EmbeddingConvention::UnorderedPairs) {
                        println!("{}", e.label());
                    }
                }
                None => {
                    for name in Architecture::NAMES {
                        let a = Architecture::named(name)?;
                        let n = enumerate_embeddings(&b, &a, EmbeddingConvention::UnorderedPairs).len();
                        println!("{name}\t{n}");
                    }
                }
            }
        }
        Command::Mitigate {
            counts,
            calibration,
            p01,
            p10,
            max_condition,
        } => {
            let hist: CountsHistogram = serde_json::from_str(&read(counts)?)?;
            let n = hist
                .counts
                .keys()
                .next()
                .map(|k| k.len())
                .ok_or_else(|| anyhow!("counts file has no outcomes"))?;
            let cal = match (calibration, p01, p10) {
                (Some(path), _, _) => CalibrationMatrix::from_csv(&read(path)?)?,
                (None, Some(a), Some(b)) => exact_calibration_matrix(n, &NoiseModel::uniform_readout(n, *a, *b))?,
                _ => bail!("give --calibration or both --p01 and --p10"),
            };
            let fixed = mitigate(&hist, &cal, *max_condition)?;
            println!("{}", serde_json::to_string_pretty(&fixed)?);
        }
        Command::Plot {
            results,
            predictor,
            degree,
            title,
        } => {
            let rows = read_csv(&read(results)?)?;
            let spec = PlotSpec {
                predictor: *predictor,
                fit_degree: *degree,
                title: title.clone(),
            };
            let plot = emit_plot(&rows, &spec)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let svg = write_out(&dir, "plot.svg", &plot.svg)?;
            write_out(&dir, "plot.csv", &plot.csv)?;
            eprintln!("wrote {}", svg.display());
            if let Some(fit) = &plot.fit {
                if fit.excluded_capped > 0 {
                    eprintln!("{} capped row(s) left out of the fit", fit.excluded_capped);
                }
                println!("{}", serde_json::to_string_pretty(fit)?);
            }
        }
    }
    Ok(Outcome::Done)
}
