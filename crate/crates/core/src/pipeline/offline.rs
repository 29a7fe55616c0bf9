use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::artifacts::{OfflineArtifacts, OfflineTimings};
use super::config::Config;
use crate::assembly::{assemble_mass_matrix, assemble_system, SystemPair};
use crate::deim::{build_deim_operator, DeimKind, UnionPattern};
use crate::error::Result;
use crate::fom::solve_fom;
use crate::geometry::{build_cut_geometry, ParameterPoint};
use crate::pod::build_pod;
use crate::rom::build_rom_offline;

/// `count` i.i.d. uniform points on `[lo, hi]²` from a ChaCha8 stream.
pub fn sample_parameters(seed: u64, count: usize, interval: [f64; 2]) -> Vec<ParameterPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = interval;
    (0..count)
        .map(|_| {
            let r = lo + (hi - lo) * rng.random::<f64>();
            let theta = lo + (hi - lo) * rng.random::<f64>();
            ParameterPoint { r, theta }
        })
        .collect()
}

pub fn training_parameters(config: &Config) -> Vec<ParameterPoint> {
    sample_parameters(config.sampling.seed, config.sampling.n_train, config.sampling.param_interval)
}

/// Test parameters use `seed + 1` so they are independent of the training set.
pub fn test_parameters(config: &Config) -> Vec<ParameterPoint> {
    sample_parameters(config.sampling.seed.wrapping_add(1), config.sampling.n_test, config.sampling.param_interval)
}

/// Snapshots, POD basis, both DEIM operators and the reduced blocks.
pub fn run_offline(config: &Config) -> Result<OfflineArtifacts> {
    config.validate()?;
    let start = Instant::now();
    let mesh = config.mesh()?;
    let phys = &config.physics;
    let train_params = training_parameters(config);

    let t = Instant::now();
    let solved: Vec<(SystemPair, Vec<f64>)> = train_params
        .par_iter()
        .map(|&mu| {
            let geom = build_cut_geometry(&mesh, mu);
            let sys = assemble_system(&mesh, &geom, phys)?;
            let u = solve_fom(&sys)?.u;
            Ok((sys, u))
        })
        .collect::<Result<_>>()?;
    let snapshots = DMatrix::from_fn(mesh.num_vertices(), solved.len(), |i, j| solved[j].1[i]);
    let snapshot_time = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mass = assemble_mass_matrix(&mesh);
    let min_modes = config.sweep.n_list.last().copied().unwrap_or(1);
    let pod = build_pod(&snapshots, &mass, config.tolerances.eps_pod, min_modes)?;
    let pod_time = t.elapsed().as_secs_f64();
    log::info!(
        "POD: n_max = {} at eps = {:e}, {} modes kept, sigma_1 = {:e}",
        pod.n_max,
        pod.epsilon_pod,
        pod.retained(),
        pod.sigma[0]
    );

    let t = Instant::now();
    let pattern = UnionPattern::build(solved.iter().map(|(s, _)| &s.matrix))?;
    let mut matrix_snapshots = DMatrix::zeros(pattern.upper_len(), solved.len());
    for (j, (sys, _)) in solved.iter().enumerate() {
        matrix_snapshots.set_column(j, &DVector::from_vec(pattern.vectorize(&sys.matrix)));
    }
    let load_snapshots = DMatrix::from_fn(mesh.num_vertices(), solved.len(), |i, j| solved[j].0.load[i]);
    drop(solved);
    let l_cap = config.l_cap();
    let deim_a = build_deim_operator(&matrix_snapshots, config.tolerances.eps_deim_a, l_cap, DeimKind::Matrix)?;
    let deim_f = build_deim_operator(&load_snapshots, config.tolerances.eps_deim_f, l_cap, DeimKind::Vector)?;
    let deim_time = t.elapsed().as_secs_f64();
    log::info!(
        "DEIM: pattern {} of {} entries, l_A = {} (cond {:.3e}), l_f = {} (cond {:.3e})",
        pattern.len(),
        mesh.num_vertices().pow(2),
        deim_a.len(),
        deim_a.condition,
        deim_f.len(),
        deim_f.condition
    );

    let t = Instant::now();
    let rom = build_rom_offline(pod.modes.clone(), pattern, deim_a, deim_f);
    let reduced_time = t.elapsed().as_secs_f64();

    let timings = OfflineTimings {
        snapshots: snapshot_time,
        pod: pod_time,
        deim: deim_time,
        reduced: reduced_time,
        total: start.elapsed().as_secs_f64(),
    };
    Ok(OfflineArtifacts { config_hash: config.hash(), train_params, pod, rom, timings })
}
