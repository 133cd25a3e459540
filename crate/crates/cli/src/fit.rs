//! Least-squares convergence laws for `t_f(N) − t_f^(c)`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `log(t_f − t_c) = a + b N`
    Exponential,
    /// `log(t_f − t_c) = a + b log N`
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub model: FitModel,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} converged rows above the continuous time, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

/// Input row: `(N, t_f, converged)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRow {
    pub n: f64,
    pub t_f: f64,
    pub converged: bool,
}

pub const MIN_ROWS: usize = 5;

pub fn fit_convergence(rows: &[FitRow], t_c: f64, model: FitModel) -> Result<ConvergenceFit, FitError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && r.t_f > t_c && r.n > 0.0)
        .map(|r| {
            let x = match model {
                FitModel::Exponential => r.n,
                FitModel::Polynomial => r.n.ln(),
            };
            (x, (r.t_f - t_c).ln())
        })
        .collect();
    if pts.len() < MIN_ROWS {
        return Err(FitError::InsufficientData { needed: MIN_ROWS, got: pts.len() });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ConvergenceFit { model, intercept, slope, r_squared, points: pts.len() })
}
