//! Full-order solve on the active dofs and algebraic residuals.

use std::time::{Duration, Instant};

use crate::assembly::SystemPair;
use crate::error::{Error, Result};
use crate::geometry::ParameterPoint;
use crate::sparse::to_dvector;

#[derive(Debug, Clone)]
pub struct FomSolution {
    pub mu: ParameterPoint,
    /// Background dof vector, zero outside the active set.
    pub u: Vec<f64>,
    pub solve_time: Duration,
}

/// Dense Cholesky solve of `A(μ)` restricted to the active dofs.
pub fn solve_fom(sys: &SystemPair) -> Result<FomSolution> {
    if sys.active_dofs.is_empty() {
        return Err(Error::EmptyActiveSet { mu: sys.mu });
    }
    let start = Instant::now();
    let block = sys.matrix.principal_block(&sys.active_dofs);
    let rhs = to_dvector(&sys.active_dofs.iter().map(|&i| sys.load[i]).collect::<Vec<_>>());
    let chol = block.cholesky().ok_or(Error::NotPositiveDefinite { mu: sys.mu })?;
    let x = chol.solve(&rhs);
    let mut u = vec![0.0; sys.dim()];
    for (k, &i) in sys.active_dofs.iter().enumerate() {
        u[i] = x[k];
    }
    Ok(FomSolution { mu: sys.mu, u, solve_time: start.elapsed() })
}

/// `r = f − A u` over all background dofs.
pub fn residual(sys: &SystemPair, u: &[f64]) -> Vec<f64> {
    let au = sys.matrix.mul_vec(u);
    sys.load.iter().zip(au).map(|(f, a)| f - a).collect()
}
