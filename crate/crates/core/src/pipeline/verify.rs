//! Invariant suite behind the `verify` command.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::artifacts::OfflineArtifacts;
use super::config::Config;
use super::offline::{sample_parameters, test_parameters, training_parameters};
use super::online::run_online_sweep;
use super::report::{fmt_f64, SweepReport};
use crate::assembly::{
    assemble_mass_matrix, assemble_norm_matrix, assemble_system, coercivity_constant, DirichletData, PhysicsParams,
};
use crate::error::{io_err, Error, Result};
use crate::fom::solve_fom;
use crate::geometry::{build_cut_geometry, BackgroundMesh, ElementClass, ParameterPoint};
use crate::pod::{collect_snapshots, projection_error, tail_energy};

pub const PATCH_TOL: f64 = 1e-10;
pub const TAIL_TOL: f64 = 1e-8;
pub const DEIM_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// One CSV row per test parameter: class counts, area and perimeter.
    pub geometry_csv: String,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Largest nodal error of the FOM against the exact linear solution
/// `1 + 2x + 3y` with `f = 0`, over the given parameters.
pub fn patch_test_error(mesh: &BackgroundMesh, base: &PhysicsParams, params: &[ParameterPoint]) -> Result<f64> {
    let g = DirichletData { c0: 1.0, cx: 2.0, cy: 3.0, cxy: 0.0 };
    let phys = PhysicsParams { f_const: 0.0, g_dirichlet: g, ..base.clone() };
    let errors = params
        .par_iter()
        .map(|&mu| {
            let sys = assemble_system(mesh, &build_cut_geometry(mesh, mu), &phys)?;
            let u = solve_fom(&sys)?.u;
            Ok(sys.active_dofs.iter().map(|&i| (u[i] - g.eval(mesh.vertices[i])).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// Number of nonzero matrix or load entries outside the active set.
pub fn inactive_nonzeros(mesh: &BackgroundMesh, phys: &PhysicsParams, mu: ParameterPoint) -> Result<usize> {
    let sys = assemble_system(mesh, &build_cut_geometry(mesh, mu), phys)?;
    let mut active = vec![false; sys.dim()];
    for &i in &sys.active_dofs {
        active[i] = true;
    }
    let matrix = sys.matrix.triplets().filter(|&(i, j, v)| (!active[i] || !active[j]) && v != 0.0).count();
    let load = sys.load.iter().enumerate().filter(|&(i, &v)| !active[i] && v != 0.0).count();
    Ok(matrix + load)
}

/// Relative mismatch between the tail energy and the measured projection
/// error of the training snapshots, for each `n`.
pub fn tail_identity_mismatch(
    snapshots: &nalgebra::DMatrix<f64>,
    mass: &crate::sparse::CsrMatrix,
    artifacts: &OfflineArtifacts,
    ns: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let sigma = &artifacts.pod.sigma;
    let total: f64 = sigma.iter().sum();
    ns.iter()
        .map(|&n| {
            let tail = tail_energy(sigma, n)?;
            let measured = projection_error(snapshots, mass, &artifacts.pod.modes, n) / total;
            let mismatch = if tail > 0.0 { (measured - tail).abs() / tail } else { measured.abs() };
            Ok((n, mismatch))
        })
        .collect()
}

/// Largest deviation of the DEIM reconstructions from the assembled
/// operators at the interpolation indices, as `(matrix, vector)`.
pub fn deim_interpolation_error(
    mesh: &BackgroundMesh,
    phys: &PhysicsParams,
    artifacts: &OfflineArtifacts,
    mu: ParameterPoint,
) -> Result<(f64, f64)> {
    let rom = &artifacts.rom;
    let sys = assemble_system(mesh, &build_cut_geometry(mesh, mu), phys)?;
    let half = rom.pattern.vectorize(&sys.matrix);
    let samples: Vec<f64> = rom.deim_a.indices.iter().map(|&k| half[k]).collect();
    let rec = rom.deim_a.reconstruct(&rom.deim_a.coefficients(&samples));
    let err_a = rom.deim_a.indices.iter().map(|&k| (rec[k] - half[k]).abs()).fold(0.0, f64::max);
    let samples: Vec<f64> = rom.deim_f.indices.iter().map(|&k| sys.load[k]).collect();
    let rec = rom.deim_f.reconstruct(&rom.deim_f.coefficients(&samples));
    let err_f = rom.deim_f.indices.iter().map(|&k| (rec[k] - sys.load[k]).abs()).fold(0.0, f64::max);
    Ok((err_a, err_f))
}

pub fn geometry_summary(mesh: &BackgroundMesh, params: &[ParameterPoint]) -> String {
    let mut out = String::from("r,theta,inside,cut,outside,ghost_facets,degenerate,area,exact_area,perimeter\n");
    for &mu in params {
        let g = build_cut_geometry(mesh, mu);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(mu.r),
            fmt_f64(mu.theta),
            g.count(ElementClass::Inside),
            g.count(ElementClass::Cut),
            g.count(ElementClass::Outside),
            g.ghost_facets.len(),
            g.degenerate_cuts.len(),
            fmt_f64(g.area()),
            fmt_f64(mu.ellipse_area()),
            fmt_f64(g.perimeter())
        );
    }
    out
}

fn sweep_checks(sweep: Result<SweepReport>) -> Result<Vec<Check>> {
    match sweep {
        Ok(report) => {
            let recs = &report.records;
            let worst_ratio = recs
                .iter()
                .filter(|r| r.eta_2a > 0.0)
                .map(|r| {
                    let ratio = r.eta_2b / r.eta_2a;
                    (1.0 / r.d_max.sqrt() - ratio).max(ratio - 1.0 / r.d_min.sqrt())
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let active_ok = recs.iter().all(|r| r.eta_2a_active <= r.eta_2a);
            let worst_bound = recs.iter().map(|r| r.e_t / r.bound).fold(0.0, f64::max);
            Ok(vec![
                Check::new(
                    "rayleigh_sandwich",
                    worst_ratio <= 1e-12,
                    format!("{} records, worst excursion {worst_ratio:e}", recs.len()),
                ),
                Check::new(
                    "theorem_bound",
                    report.bound_violations == 0,
                    format!("{} violations, max e_T/bound {worst_bound:e}", report.bound_violations),
                ),
                Check::new("active_le_plain", active_ok, format!("{} records", recs.len())),
            ])
        }
        Err(Error::Invariant { mu, n, what }) => {
            let detail = format!("sweep aborted at {mu}, n = {n}: {what}");
            let name = if what.starts_with("Rayleigh") { "rayleigh_sandwich" } else { "active_le_plain" };
            Ok(vec![Check::new(name, false, detail)])
        }
        Err(e) => Err(e),
    }
}

/// Checks every invariant on `artifacts` built from `config`, including a
/// full online sweep.
pub fn run_verify(config: &Config, artifacts: &OfflineArtifacts) -> Result<VerifyReport> {
    config.validate()?;
    let mesh = config.mesh()?;
    let phys = &config.physics;
    let mut checks = Vec::new();

    let patch_params = sample_parameters(config.sampling.seed.wrapping_add(2), 5, config.sampling.param_interval);
    let err = patch_test_error(&mesh, phys, &patch_params)?;
    checks.push(Check::new("patch_test", err <= PATCH_TOL, format!("max nodal error {err:e}")));

    let test = test_parameters(config);
    let nonzeros: usize =
        test.par_iter().map(|&mu| inactive_nonzeros(&mesh, phys, mu)).collect::<Result<Vec<_>>>()?.iter().sum();
    checks.push(Check::new(
        "zero_ghost_rows",
        nonzeros == 0,
        format!("{nonzeros} nonzero entries outside the active sets of {} parameters", test.len()),
    ));

    let spd = test
        .par_iter()
        .map(|&mu| {
            let geom = build_cut_geometry(&mesh, mu);
            let sys = assemble_system(&mesh, &geom, phys)?;
            let norm = assemble_norm_matrix(&mesh, &geom, phys)?;
            Ok((sys.matrix.asymmetry() / sys.matrix.frobenius_norm(), coercivity_constant(&sys, &norm)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>();
    match spd {
        Ok(v) => {
            let asym = v.iter().map(|p| p.0).fold(0.0, f64::max);
            let coer = v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                "spd",
                asym <= SYMMETRY_TOL && coer > 0.0,
                format!("max relative asymmetry {asym:e}, min coercivity constant {coer:e}"),
            ));
        }
        Err(e @ Error::NotPositiveDefinite { .. }) => checks.push(Check::new("spd", false, e.to_string())),
        Err(e) => return Err(e),
    }

    let snapshots = collect_snapshots(&mesh, &training_parameters(config), phys)?;
    let mass = assemble_mass_matrix(&mesh);
    let mismatch = tail_identity_mismatch(&snapshots.matrix, &mass, artifacts, &config.sweep.n_list)?;
    let worst = mismatch.iter().map(|p| p.1).fold(0.0, f64::max);
    checks.push(Check::new("pod_tail_identity", worst <= TAIL_TOL, format!("max relative mismatch {worst:e}")));

    let deim = test
        .par_iter()
        .map(|&mu| deim_interpolation_error(&mesh, phys, artifacts, mu))
        .collect::<Result<Vec<_>>>()?;
    let (ea, ef) = deim.iter().fold((0.0f64, 0.0f64), |(a, f), &(x, y)| (a.max(x), f.max(y)));
    checks.push(Check::new(
        "deim_interpolation",
        ea <= DEIM_TOL && ef <= DEIM_TOL,
        format!("max error at indices: matrix {ea:e}, vector {ef:e}"),
    ));

    checks.extend(sweep_checks(run_online_sweep(artifacts, config))?);
    Ok(VerifyReport { checks, geometry_csv: geometry_summary(&mesh, &test) })
}

pub fn write_geometry_summary(report: &VerifyReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let path = dir.join("geometry_summary.csv");
    fs::write(&path, &report.geometry_csv).map_err(io_err(format!("writing {}", path.display())))
}
