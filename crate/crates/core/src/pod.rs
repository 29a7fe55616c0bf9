//! Proper orthogonal decomposition with a mass-weighted snapshot correlation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{assemble_system, PhysicsParams};
use crate::error::{Error, Result};
use crate::fom::solve_fom;
use crate::geometry::{build_cut_geometry, BackgroundMesh, ParameterPoint};
use crate::sparse::CsrMatrix;

/// Relative threshold below which correlation eigenvalues are never
/// turned into modes.
pub const SPECTRUM_FLOOR: f64 = 1e-14;

/// Relative threshold below which singular values of the weighted snapshot
/// matrix are rounding noise and reported as zero energy.
pub const SINGULAR_FLOOR: f64 = 1e-14;

/// FOM solutions as columns, extended by zero outside each active set.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub matrix: DMatrix<f64>,
    pub params: Vec<ParameterPoint>,
}

/// Solves the FOM at every parameter (in parallel) and stacks the solutions.
pub fn collect_snapshots(
    mesh: &BackgroundMesh,
    params: &[ParameterPoint],
    phys: &PhysicsParams,
) -> Result<SnapshotSet> {
    if params.is_empty() {
        return Err(Error::ZeroSnapshots);
    }
    let columns = params
        .par_iter()
        .map(|&mu| {
            let geom = build_cut_geometry(mesh, mu);
            let sys = assemble_system(mesh, &geom, phys)?;
            Ok(solve_fom(&sys)?.u)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(mesh.num_vertices(), params.len(), |i, j| columns[j][i]);
    Ok(SnapshotSet { matrix, params: params.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `N × n_keep`, M-orthonormal columns in decreasing energy order.
    pub modes: DMatrix<f64>,
    /// Eigenvalues of `SᵀMS`, descending, zero below the noise floor.
    pub sigma: Vec<f64>,
    pub epsilon_pod: f64,
    /// Smallest `n` whose captured energy reaches `1 − ε_pod`.
    pub n_max: usize,
}

impl PodBasis {
    /// Number of stored modes (may exceed `n_max` when a floor was requested).
    pub fn retained(&self) -> usize {
        self.modes.ncols()
    }
}

/// Builds the basis for the correlation matrix `C = SᵀMS`.
///
/// With `M = LLᵀ`, the eigenpairs of `C` are the squared singular values and
/// right singular vectors of `LᵀS`, and `φ_k = S v_k / √σ_k = L⁻ᵀ u_k`. The
/// thin SVD is used instead of forming `C` so that small eigenvalues keep
/// their accuracy and the modes stay M-orthonormal to rounding.
///
/// `min_modes` lets the caller keep more than `n_max` modes (capped by the
/// number of non-negligible eigenvalues) so that larger sweep sizes remain
/// available.
pub fn build_pod(snapshots: &DMatrix<f64>, mass: &CsrMatrix, epsilon_pod: f64, min_modes: usize) -> Result<PodBasis> {
    if snapshots.ncols() == 0 {
        return Err(Error::ZeroSnapshots);
    }
    if snapshots.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let dense_mass = mass.to_dense();
    let chol = dense_mass.cholesky().ok_or(Error::InvalidInput("mass matrix is not positive definite".into()))?;
    let lt = chol.l().transpose();
    let weighted = &lt * snapshots;
    let svd = weighted.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = &svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let top = s[order[0]];
    if !(top > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let mut sigma: Vec<f64> =
        order.iter().map(|&k| if s[k] < SINGULAR_FLOOR * top { 0.0 } else { s[k] * s[k] }).collect();
    // C has n_train eigenvalues; those beyond the rank of LᵀS are zero
    sigma.resize(snapshots.ncols(), 0.0);
    let positive = sigma.iter().take_while(|&&x| x > SPECTRUM_FLOOR * sigma[0]).count();

    let total: f64 = sigma.iter().sum();
    let mut captured = 0.0;
    let mut n_max = positive;
    for (k, x) in sigma.iter().enumerate().take(positive) {
        captured += x;
        if captured / total >= 1.0 - epsilon_pod {
            n_max = k + 1;
            break;
        }
    }
    let keep = n_max.max(min_modes).min(positive);

    let mut modes = DMatrix::zeros(snapshots.nrows(), keep);
    for (col, &k) in order.iter().take(keep).enumerate() {
        let uk: DVector<f64> = u.column(k).into_owned();
        let mut phi = lt.solve_upper_triangular(&uk).expect("Cholesky factor is invertible");
        // fix the sign so that the largest entry is positive
        let (imax, _) = phi.iter().enumerate().fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if phi[imax] < 0.0 {
            phi.neg_mut();
        }
        modes.set_column(col, &phi);
    }
    Ok(PodBasis { modes, sigma, epsilon_pod, n_max })
}

/// `Σ_{k>n} σ_k / Σ_k σ_k`.
pub fn tail_energy(sigma: &[f64], n: usize) -> Result<f64> {
    if n > sigma.len() {
        return Err(Error::ModeCount { n, max: sigma.len() });
    }
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let tail: f64 = sigma[n..].iter().sum();
    Ok((tail / total).clamp(0.0, 1.0))
}

/// `Σ_i ‖u_i − P_n u_i‖²_M` with the M-orthogonal projection onto the first
/// `n` modes; the offline oracle for the tail energy.
pub fn projection_error(snapshots: &DMatrix<f64>, mass: &CsrMatrix, modes: &DMatrix<f64>, n: usize) -> f64 {
    let vn = modes.columns(0, n);
    let ms = mass.mul_dense(snapshots);
    let coeff = vn.transpose() * &ms;
    let err = snapshots - vn * coeff;
    let merr = mass.mul_dense(&err);
    err.component_mul(&merr).sum()
}
