// Offline phase on a small training set, then hyper-reduced online solves
// compared with the full-order solution.

use cutrom::assembly::assemble_system;
use cutrom::error::Result;
use cutrom::fom::solve_fom;
use cutrom::geometry::{build_cut_geometry, ParameterPoint};
use cutrom::pipeline::{run_offline, Config};

pub fn run() -> Result<()> {
    let mut config = Config::default();
    config.sampling.n_train = 150;
    config.sweep.n_list = vec![2, 4, 8, 12];
    let art = run_offline(&config)?;
    let mesh = config.mesh()?;
    let mu = ParameterPoint::new(1.04, 1.17)?;
    let sys = assemble_system(&mesh, &build_cut_geometry(&mesh, mu), &config.physics)?;
    let fom = solve_fom(&sys)?;
    let u_norm = fom.u.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("FOM {mu}: {:.3} ms", fom.solve_time.as_secs_f64() * 1e3);
    for &n in &config.sweep.n_list {
        let sol = art.rom.solve(&mesh, &config.physics, mu, n)?;
        let err = sol.u_lifted.iter().zip(&fom.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("ROM n = {n:2}: e_rel = {:.3e}, {:.3} ms", err / u_norm, sol.online_time.as_secs_f64() * 1e3);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
