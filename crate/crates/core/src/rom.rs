//! Offline reduced operators and the hyper-reduced online solve.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::assembly::{evaluate_entries, PhysicsParams};
use crate::deim::{DeimOperator, UnionPattern};
use crate::error::{Error, Result};
use crate::geometry::{BackgroundMesh, ParameterPoint};
use crate::sparse::CsrMatrix;

/// Everything the online phase needs besides the mesh and physics.
#[derive(Debug, Clone)]
pub struct RomOffline {
    /// `N × n_keep` POD modes.
    pub modes: DMatrix<f64>,
    pub pattern: UnionPattern,
    pub deim_a: DeimOperator,
    pub deim_f: DeimOperator,
    /// `Vᵀ𝔸_jV`, one per matrix DEIM basis vector.
    pub reduced_a: Vec<DMatrix<f64>>,
    /// `Vᵀ𝔽_j`, one per vector DEIM basis vector.
    pub reduced_f: Vec<DVector<f64>>,
    /// Matrix entries sampled online, in DEIM index order.
    pub plan_matrix: Vec<(usize, usize)>,
    pub plan_vector: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RomSolution {
    pub mu: ParameterPoint,
    pub n: usize,
    pub u_hat: DVector<f64>,
    pub u_lifted: Vec<f64>,
    /// DEIM coefficients of `A(μ)` and `f(μ)`.
    pub coeff_a: Vec<f64>,
    pub coeff_f: Vec<f64>,
    /// Wall time of sampling, coefficients, reduced solve and lift.
    pub online_time: Duration,
}

pub fn build_rom_offline(
    modes: DMatrix<f64>,
    pattern: UnionPattern,
    deim_a: DeimOperator,
    deim_f: DeimOperator,
) -> RomOffline {
    let vt = modes.transpose();
    let reduced_a: Vec<DMatrix<f64>> = deim_a
        .basis
        .column_iter()
        .map(|col| {
            let basis_matrix = pattern.matrix(col.as_slice());
            let block = &vt * basis_matrix.mul_dense(&modes);
            (&block + block.transpose()) * 0.5
        })
        .collect();
    let reduced_f: Vec<DVector<f64>> = deim_f.basis.column_iter().map(|col| &vt * col).collect();
    RomOffline::from_parts(modes, pattern, deim_a, deim_f, reduced_a, reduced_f)
}

impl RomOffline {
    /// Assembles the offline data from precomputed reduced blocks.
    pub fn from_parts(
        modes: DMatrix<f64>,
        pattern: UnionPattern,
        deim_a: DeimOperator,
        deim_f: DeimOperator,
        reduced_a: Vec<DMatrix<f64>>,
        reduced_f: Vec<DVector<f64>>,
    ) -> Self {
        assert_eq!(reduced_a.len(), deim_a.len());
        assert_eq!(reduced_f.len(), deim_f.len());
        let plan_matrix = deim_a.indices.iter().map(|&k| pattern.upper_entry(k)).collect();
        let plan_vector = deim_f.indices.clone();
        Self { modes, pattern, deim_a, deim_f, reduced_a, reduced_f, plan_matrix, plan_vector }
    }

    pub fn n_keep(&self) -> usize {
        self.modes.ncols()
    }

    /// Online solve with the leading `n` modes.
    pub fn solve(&self, mesh: &BackgroundMesh, phys: &PhysicsParams, mu: ParameterPoint, n: usize) -> Result<RomSolution> {
        if n == 0 || n > self.n_keep() {
            return Err(Error::ModeCount { n, max: self.n_keep() });
        }
        let start = Instant::now();
        let sampled = evaluate_entries(mesh, mu, phys, &self.plan_matrix, &self.plan_vector);
        let samples_a: Vec<f64> = sampled
            .matrix
            .iter()
            .zip(&self.deim_a.indices)
            .map(|(v, &k)| v * self.pattern.upper_weight(k))
            .collect();
        let coeff_a = self.deim_a.coefficients(&samples_a);
        let coeff_f = self.deim_f.coefficients(&sampled.vector);

        let mut a_hat = DMatrix::zeros(n, n);
        for (c, block) in coeff_a.iter().zip(&self.reduced_a) {
            a_hat += block.view((0, 0), (n, n)) * *c;
        }
        let mut f_hat = DVector::zeros(n);
        for (c, block) in coeff_f.iter().zip(&self.reduced_f) {
            f_hat += block.rows(0, n) * *c;
        }
        let u_hat = a_hat.lu().solve(&f_hat).ok_or(Error::SingularReducedSystem { mu, n })?;
        if u_hat.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularReducedSystem { mu, n });
        }
        let u_lifted = (self.modes.columns(0, n) * &u_hat).as_slice().to_vec();
        let online_time = start.elapsed();
        Ok(RomSolution { mu, n, u_hat, u_lifted, coeff_a, coeff_f, online_time })
    }

    /// `A_Deim(μ)` on the union pattern.
    pub fn deim_matrix(&self, coeff_a: &[f64]) -> CsrMatrix {
        self.pattern.matrix(&self.deim_a.reconstruct(coeff_a))
    }

    /// `f_Deim(μ)`.
    pub fn deim_vector(&self, coeff_f: &[f64]) -> Vec<f64> {
        self.deim_f.reconstruct(coeff_f)
    }
}
