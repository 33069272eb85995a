use crate::run::ResultRow;
use crate::CliError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Gsp,
    AggregateError,
}

impl Predictor {
    pub fn of(self, row: &ResultRow) -> Option<f64> {
        match self {
            Predictor::Gsp => row.gsp,
            Predictor::AggregateError => row.aggregate_error,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Predictor::Gsp => "ground-state probability",
            Predictor::AggregateError => "aggregate error",
        }
    }
}

impl FromStr for Predictor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gsp" => Ok(Predictor::Gsp),
            "aggregate_error" | "aggregate-error" => Ok(Predictor::AggregateError),
            other => Err(format!("unknown predictor {other:?}; use gsp or aggregate_error")),
        }
    }
}

/// Least-squares polynomial of `log10(nsrfs)` against a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub predictor: Predictor,
    pub degree: usize,
    /// Constant term first.
    pub coefficients: Vec<f64>,
    pub points: usize,
    /// Rows left out because NSRFS hit the cap.
    pub excluded_capped: usize,
    /// Predictor range of the fitted points.
    pub x_range: (f64, f64),
}

impl TrendFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Sign of the change of the fitted curve across the data range.
    pub fn slope_sign(&self) -> f64 {
        let d = self.eval(self.x_range.1) - self.eval(self.x_range.0);
        if d.abs() < 1e-12 {
            0.0
        } else {
            d.signum()
        }
    }
}

/// Points `(x, log10 nsrfs)` usable for a fit, plus the number of capped rows.
pub fn fit_points(rows: &[ResultRow], predictor: Predictor) -> (Vec<(f64, f64)>, usize) {
    let mut capped = 0;
    let mut pts = Vec::new();
    for r in rows.iter().filter(|r| !r.failed()) {
        if r.capped == Some(true) {
            capped += 1;
            continue;
        }
        if let (Some(x), Some(n)) = (predictor.of(r), r.nsrfs_value()) {
            pts.push((x, n.log10()));
        }
    }
    (pts, capped)
}

pub fn fit_trend(rows: &[ResultRow], predictor: Predictor, degree: usize) -> Result<TrendFit, CliError> {
    if !(1..=2).contains(&degree) {
        return Err(CliError::Config(format!("fit degree must be 1 or 2, got {degree}")));
    }
    let (pts, excluded_capped) = fit_points(rows, predictor);
    if pts.len() < degree + 2 {
        return Err(CliError::InsufficientRows {
            need: degree + 2,
            have: pts.len(),
        });
    }
    let x = DMatrix::from_fn(pts.len(), degree + 1, |i, j| pts[i].0.powi(j as i32));
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let beta = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| CliError::Config(format!("least squares failed: {e}")))?;
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(TrendFit {
        predictor,
        degree,
        coefficients: beta.iter().copied().collect(),
        points: pts.len(),
        excluded_capped,
        x_range: (lo, hi),
    })
}
