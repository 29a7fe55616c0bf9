//! Least-squares fits of algebraic and exponential decay in log space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// `η(n) = C n^{−α}`.
    Algebraic,
    /// `η(n) = C e^{−βn}`.
    Exponential,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Algebraic => "algebraic",
            Model::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: Model,
    /// `α` or `β`; positive means decay.
    pub rate: f64,
    pub prefactor: f64,
    /// `None` when the log values do not vary.
    pub r_squared: Option<f64>,
    pub n_min: f64,
    pub points: usize,
}

fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, Option<f64>)> {
    let m = x.len() as f64;
    let xm = x.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit abscissae do not vary".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Ok((0.0, y[0], None));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_tot: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok((slope, intercept, r2))
}

fn usable(points: &[(f64, f64)], n_min: f64) -> Result<Vec<(f64, f64)>> {
    let window: Vec<_> = points.iter().copied().filter(|&(n, _)| n >= n_min).collect();
    let kept: Vec<_> = window.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    if kept.len() < window.len() {
        log::warn!("dropped {} non-positive values before the log fit", window.len() - kept.len());
    }
    if kept.len() < 2 {
        return Err(Error::TooFewPoints(kept.len()));
    }
    Ok(kept)
}

fn fit(points: &[(f64, f64)], n_min: f64, model: Model) -> Result<FitResult> {
    let kept = usable(points, n_min)?;
    let x: Vec<f64> = kept
        .iter()
        .map(|&(n, _)| match model {
            Model::Algebraic => n.ln(),
            Model::Exponential => n,
        })
        .collect();
    let y: Vec<f64> = kept.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, intercept, r_squared) = ols(&x, &y)?;
    Ok(FitResult { model, rate: -slope, prefactor: intercept.exp(), r_squared, n_min, points: kept.len() })
}

/// OLS of `log η` on `log n` over points with `n ≥ n_min`.
pub fn fit_algebraic(points: &[(f64, f64)], n_min: f64) -> Result<FitResult> {
    fit(points, n_min, Model::Algebraic)
}

/// OLS of `log η` on `n` over points with `n ≥ n_min`.
pub fn fit_exponential(points: &[(f64, f64)], n_min: f64) -> Result<FitResult> {
    fit(points, n_min, Model::Exponential)
}

/// Higher `R²` wins; an exact tie goes to the algebraic model.
pub fn select_model(alg: &FitResult, exp: &FitResult) -> Option<Model> {
    match (alg.r_squared, exp.r_squared) {
        (None, None) => None,
        (Some(_), None) => Some(Model::Algebraic),
        (None, Some(_)) => Some(Model::Exponential),
        (Some(a), Some(e)) => Some(if e > a { Model::Exponential } else { Model::Algebraic }),
    }
}

/// One row of the rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub quantity: String,
    pub alpha: f64,
    pub r2_alg: Option<f64>,
    pub beta: f64,
    pub r2_exp: Option<f64>,
    /// `None` for constant sequences.
    pub best: Option<Model>,
    pub formula: String,
}

/// Fits both models; sequences without variation are reported as constant
/// with zero rates.
pub fn fit_quantity(quantity: &str, points: &[(f64, f64)], n_min: f64) -> Result<RateRow> {
    let alg = fit_algebraic(points, n_min)?;
    let exp = fit_exponential(points, n_min)?;
    let best = select_model(&alg, &exp);
    let (alpha, beta) = if best.is_none() { (0.0, 0.0) } else { (alg.rate, exp.rate) };
    let formula = match best {
        None => format!("{:.4e} (constant)", alg.prefactor),
        Some(Model::Algebraic) => format!("{:.4e} n^({:.4})", alg.prefactor, -alg.rate),
        Some(Model::Exponential) => format!("{:.4e} exp({:.4} n)", exp.prefactor, -exp.rate),
    };
    Ok(RateRow { quantity: quantity.to_string(), alpha, r2_alg: alg.r_squared, beta, r2_exp: exp.r_squared, best, formula })
}
