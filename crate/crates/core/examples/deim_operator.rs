// DEIM approximation of the load vector and the stiffness matrix from 40
// training systems, checked at an unseen parameter.

use nalgebra::{DMatrix, DVector};

use cutrom::assembly::{assemble_system, PhysicsParams};
use cutrom::deim::{build_deim_operator, DeimKind, UnionPattern};
use cutrom::error::Result;
use cutrom::geometry::{build_background_mesh, build_cut_geometry, BoxDomain, ParameterPoint};
use cutrom::pipeline::offline::sample_parameters;

pub fn run() -> Result<()> {
    let mesh = build_background_mesh(BoxDomain::square(-1.2, 1.2), 0.125)?;
    let phys = PhysicsParams::default();
    let systems = sample_parameters(3, 40, [1.0, 1.2])
        .into_iter()
        .map(|mu| assemble_system(&mesh, &build_cut_geometry(&mesh, mu), &phys))
        .collect::<Result<Vec<_>>>()?;

    let pattern = UnionPattern::build(systems.iter().map(|s| &s.matrix))?;
    let mut sa = DMatrix::zeros(pattern.upper_len(), systems.len());
    for (j, s) in systems.iter().enumerate() {
        sa.set_column(j, &DVector::from_vec(pattern.vectorize(&s.matrix)));
    }
    let sf = DMatrix::from_fn(mesh.num_vertices(), systems.len(), |i, j| systems[j].load[i]);
    let deim_a = build_deim_operator(&sa, 1e-14, systems.len(), DeimKind::Matrix)?;
    let deim_f = build_deim_operator(&sf, 1e-14, systems.len(), DeimKind::Vector)?;
    println!("pattern: {} entries ({} in the upper triangle)", pattern.len(), pattern.upper_len());
    println!("l_A = {} (cond {:.2e}), l_f = {} (cond {:.2e})", deim_a.len(), deim_a.condition, deim_f.len(), deim_f.condition);

    let mu = ParameterPoint::new(1.13, 1.04)?;
    let sys = assemble_system(&mesh, &build_cut_geometry(&mesh, mu), &phys)?;
    let half = pattern.vectorize(&sys.matrix);
    let samples: Vec<f64> = deim_a.indices.iter().map(|&k| half[k]).collect();
    let a_deim = pattern.matrix(&deim_a.reconstruct(&deim_a.coefficients(&samples)));
    let samples: Vec<f64> = deim_f.indices.iter().map(|&k| sys.load[k]).collect();
    let f_deim = deim_f.reconstruct(&deim_f.coefficients(&samples));
    let f_norm = sys.load.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f_err = sys.load.iter().zip(&f_deim).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    println!("{mu}: eta_A = {:.3e}", sys.matrix.frobenius_distance(&a_deim) / sys.matrix.frobenius_norm());
    println!("{mu}: eta_f = {:.3e}", f_err / f_norm);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
