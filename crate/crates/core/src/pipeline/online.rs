use std::time::Instant;

use rayon::prelude::*;

use super::artifacts::OfflineArtifacts;
use super::config::Config;
use super::offline::test_parameters;
use super::report::SweepReport;
use crate::assembly::{assemble_norm_matrix, assemble_system};
use crate::error::{Error, Result};
use crate::estimators::{
    active_diagonal_range, alpha_star, combined_bound, effectivity, eta_deim_matrix, eta_deim_vector,
    eta_residual_active, eta_residual_jacobi, eta_residual_plain, rayleigh_ratio_check, true_errors, BoundTerms,
    EstimatorRecord,
};
use crate::fom::{residual, solve_fom};
use crate::geometry::{build_cut_geometry, BackgroundMesh, ParameterPoint};
use crate::pod::tail_energy;
use crate::sparse::norm2;

/// Largest singular value of the leading `n` modes, for each `n` in the list.
pub fn mode_norms(artifacts: &OfflineArtifacts, n_list: &[usize]) -> Vec<f64> {
    n_list.iter().map(|&n| artifacts.pod.modes.columns(0, n).into_owned().singular_values().max()).collect()
}

fn sweep_parameter(
    artifacts: &OfflineArtifacts,
    config: &Config,
    mesh: &BackgroundMesh,
    mu: ParameterPoint,
    norms: &[f64],
) -> Result<Vec<EstimatorRecord>> {
    let phys = &config.physics;
    let start = Instant::now();
    let geom = build_cut_geometry(mesh, mu);
    let sys = assemble_system(mesh, &geom, phys)?;
    let fom = solve_fom(&sys)?;
    let fom_seconds = start.elapsed().as_secs_f64();

    let norm = assemble_norm_matrix(mesh, &geom, phys)?;
    let diag = sys.matrix.diagonal();
    let (d_min, d_max) = active_diagonal_range(&diag, &sys.active_dofs);
    let alpha = alpha_star(phys.lambda, config.tolerances.c_inv);
    let rom = &artifacts.rom;

    let mut records = Vec::with_capacity(config.sweep.n_list.len());
    for (&n, &norm_vn) in config.sweep.n_list.iter().zip(norms) {
        let sol = rom.solve(mesh, phys, mu, n)?;
        let a_deim = rom.deim_matrix(&sol.coeff_a);
        let f_deim = rom.deim_vector(&sol.coeff_f);
        let eta_a = eta_deim_matrix(&sys.matrix, &a_deim)?;
        let eta_f = eta_deim_vector(&sys.load, &f_deim)?;
        let r = residual(&sys, &sol.u_lifted);
        let eta_2a = eta_residual_plain(&r);
        let eta_2b = eta_residual_jacobi(&r, &diag, config.tolerances.eps_safe);
        let eta_2a_active = eta_residual_active(&r, &sys.active_dofs);
        let (e_rel, e_t) = true_errors(&fom.u, &sol.u_lifted, &norm)?;
        let terms = BoundTerms {
            residual_active: eta_2a_active,
            matrix_error: sys.matrix.frobenius_distance(&a_deim),
            vector_error: sys.load.iter().zip(&f_deim).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            u_rom_norm: norm2(&sol.u_lifted),
        };
        let bound = combined_bound(&terms, alpha, norm_vn);

        if eta_2a_active > eta_2a {
            return Err(Error::Invariant { mu, n, what: format!("active residual {eta_2a_active} > plain {eta_2a}") });
        }
        if eta_2a > 0.0 {
            let margins = rayleigh_ratio_check(eta_2a, eta_2b, d_min, d_max)?;
            if !margins.holds() {
                return Err(Error::Invariant {
                    mu,
                    n,
                    what: format!(
                        "Rayleigh ratio {} outside [{}, {}]",
                        margins.ratio, margins.lower, margins.upper
                    ),
                });
            }
        }
        if e_t > bound {
            log::warn!("combined bound violated at {mu}, n = {n}: e_T = {e_t:e} > {bound:e}");
        }

        records.push(EstimatorRecord {
            r: mu.r,
            theta: mu.theta,
            n,
            e_rel,
            e_t,
            eta_a,
            eta_f,
            eta_2a,
            eta_2b,
            eta_2a_active,
            eta_pod: tail_energy(&artifacts.pod.sigma, n)?,
            theta_2a: effectivity(eta_2a, e_rel),
            theta_2b: effectivity(eta_2b, e_rel),
            theta_2a_active: effectivity(eta_2a_active, e_rel),
            bound,
            d_min,
            d_max,
            fom_seconds,
            rom_seconds: sol.online_time.as_secs_f64(),
        });
    }
    Ok(records)
}

/// FOM and ROM solves plus all estimators for every test parameter and
/// every `n` of the sweep list.
pub fn run_online_sweep(artifacts: &OfflineArtifacts, config: &Config) -> Result<SweepReport> {
    config.validate()?;
    let mesh = config.mesh()?;
    if mesh.num_vertices() != artifacts.rom.modes.nrows() {
        return Err(Error::InvalidInput("artifacts were built on a different mesh".into()));
    }
    let n_keep = artifacts.rom.n_keep();
    if let Some(&n) = config.sweep.n_list.iter().find(|&&n| n > n_keep) {
        return Err(Error::ModeCount { n, max: n_keep });
    }
    let norms = mode_norms(artifacts, &config.sweep.n_list);
    let params = test_parameters(config);
    let records: Vec<EstimatorRecord> = params
        .par_iter()
        .map(|&mu| sweep_parameter(artifacts, config, &mesh, mu, &norms))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut report = SweepReport::from_records(records, &config.sweep)?;
    report.offline_seconds = Some(artifacts.timings.total);
    report.sigma = artifacts.pod.sigma.clone();
    Ok(report)
}
