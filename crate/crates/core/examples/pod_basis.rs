// POD of 60 snapshots: energy spectrum, tail energy and the matching
// projection error of the training set.

use cutrom::assembly::{assemble_mass_matrix, PhysicsParams};
use cutrom::error::Result;
use cutrom::geometry::{build_background_mesh, BoxDomain};
use cutrom::pipeline::offline::sample_parameters;
use cutrom::pod::{build_pod, collect_snapshots, projection_error, tail_energy};

pub fn run() -> Result<()> {
    let mesh = build_background_mesh(BoxDomain::square(-1.2, 1.2), 0.125)?;
    let params = sample_parameters(7, 60, [1.0, 1.2]);
    let snapshots = collect_snapshots(&mesh, &params, &PhysicsParams::default())?;
    let mass = assemble_mass_matrix(&mesh);
    let pod = build_pod(&snapshots.matrix, &mass, 1e-6, 12)?;
    println!("n_max = {} at eps = {:e}, {} modes kept", pod.n_max, pod.epsilon_pod, pod.retained());
    let total: f64 = pod.sigma.iter().sum();
    for n in [1, 2, 4, 8, 12] {
        let tail = tail_energy(&pod.sigma, n)?;
        let measured = projection_error(&snapshots.matrix, &mass, &pod.modes, n) / total;
        println!("n = {n:2}: sigma_n = {:.3e}, tail {tail:.6e}, projection {measured:.6e}", pod.sigma[n - 1]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
