//! Experiment runner behind the `fairsample` command.

pub mod config;
pub mod plot;
pub mod run;
pub mod trend;

pub use config::{AngleSource, ExperimentConfig, NoiseKind, NoiseSweep};
pub use plot::{emit_plot, PlotOutput, PlotSpec};
pub use run::{csv_body, read_csv, run_experiments, write_csv, ResultRow, COLUMNS};
pub use trend::{fit_trend, Predictor, TrendFit};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("need at least {need} rows with finite NSRFS, have {have}")]
    InsufficientRows { need: usize, have: usize },
    #[error("nothing to plot")]
    EmptyPlot,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
