// All estimators and the combined bound at one parameter, next to the true
// errors.

use cutrom::assembly::{assemble_norm_matrix, assemble_system};
use cutrom::error::Result;
use cutrom::estimators::{
    active_diagonal_range, alpha_star, combined_bound, eta_deim_matrix, eta_deim_vector, eta_residual_active,
    eta_residual_jacobi, eta_residual_plain, rayleigh_ratio_check, true_errors, BoundTerms,
};
use cutrom::fom::{residual, solve_fom};
use cutrom::geometry::{build_cut_geometry, ParameterPoint};
use cutrom::pipeline::online::mode_norms;
use cutrom::pipeline::{run_offline, Config};
use cutrom::sparse::norm2;

pub fn run() -> Result<()> {
    let mut config = Config::default();
    config.sampling.n_train = 150;
    config.sweep.n_list = vec![2, 4, 8, 12];
    let art = run_offline(&config)?;
    let mesh = config.mesh()?;
    let phys = &config.physics;
    let mu = ParameterPoint::new(1.16, 1.02)?;
    let geom = build_cut_geometry(&mesh, mu);
    let sys = assemble_system(&mesh, &geom, phys)?;
    let norm = assemble_norm_matrix(&mesh, &geom, phys)?;
    let u_fom = solve_fom(&sys)?.u;
    let diag = sys.matrix.diagonal();
    let (d_min, d_max) = active_diagonal_range(&diag, &sys.active_dofs);
    let alpha = alpha_star(phys.lambda, config.tolerances.c_inv);
    let norms = mode_norms(&art, &config.sweep.n_list);

    println!("alpha* = {alpha}, d in [{d_min:.3}, {d_max:.3}]");
    println!("  n     e_rel       e_T     eta_A     eta_f    eta_2a    eta_2b  eta_2a|A     bound");
    for (&n, &vn) in config.sweep.n_list.iter().zip(&norms) {
        let sol = art.rom.solve(&mesh, phys, mu, n)?;
        let a_deim = art.rom.deim_matrix(&sol.coeff_a);
        let f_deim = art.rom.deim_vector(&sol.coeff_f);
        let r = residual(&sys, &sol.u_lifted);
        let (e_rel, e_t) = true_errors(&u_fom, &sol.u_lifted, &norm)?;
        let eta_2a = eta_residual_plain(&r);
        let eta_2b = eta_residual_jacobi(&r, &diag, config.tolerances.eps_safe);
        let eta_act = eta_residual_active(&r, &sys.active_dofs);
        let terms = BoundTerms {
            residual_active: eta_act,
            matrix_error: sys.matrix.frobenius_distance(&a_deim),
            vector_error: sys.load.iter().zip(&f_deim).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            u_rom_norm: norm2(&sol.u_lifted),
        };
        let bound = combined_bound(&terms, alpha, vn);
        assert!(rayleigh_ratio_check(eta_2a, eta_2b, d_min, d_max)?.holds());
        println!(
            "{n:3} {e_rel:9.2e} {e_t:9.2e} {:9.2e} {:9.2e} {eta_2a:9.2e} {eta_2b:9.2e} {eta_act:9.2e} {bound:9.2e}",
            eta_deim_matrix(&sys.matrix, &a_deim)?,
            eta_deim_vector(&sys.load, &f_deim)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
