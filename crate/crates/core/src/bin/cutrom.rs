use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cutrom::assembly::assemble_system;
use cutrom::fom::solve_fom;
use cutrom::geometry::{build_cut_geometry, ElementClass, ParameterPoint};
use cutrom::pipeline::report::fmt_f64;
use cutrom::pipeline::verify::write_geometry_summary;
use cutrom::pipeline::{
    emit_report, load_artifacts, load_config, load_records, run_offline, run_online_sweep, run_verify, save_artifacts,
    Config, SweepReport,
};

#[derive(Parser)]
#[command(name = "cutrom", version, about = "POD-DEIM reduced order models on cut meshes")]
struct Cli {
    /// Worker threads for the parallel maps (defaults to all cores).
    #[arg(long, env = "CUTROM_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `sampling.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.sampling.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Snapshots, POD, DEIM and reduced operators; writes the artifacts.
    Offline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test sweep on saved artifacts; writes the report.
    Online {
        #[arg(long)]
        artifacts: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Offline phase followed by the online sweep.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Runs the invariant suite; exits nonzero on any failure.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for the geometry summary.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Single full-order solve.
    Fom {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        theta: f64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Re-emits tables and figure data from a saved `records.csv`.
    Report {
        /// Report directory holding `records.csv`.
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory, defaults to `--from`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_report(report: &SweepReport, dir: &Path) -> Result<()> {
    emit_report(report, dir)?;
    println!("records      {}", report.records.len());
    println!("fom mean     {:.3e} s", report.timing.fom_mean);
    println!("rom mean     {:.3e} s", report.timing.rom_mean);
    println!("speedup      {:.2}", report.timing.speedup);
    println!("bound fails  {}", report.bound_violations);
    for row in &report.rates {
        println!("{:<22} {}", row.quantity, row.formula);
    }
    println!("report written to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::Offline { cfg, out } => {
            let config = cfg.load()?;
            let out = out.unwrap_or_else(|| config.paths.artifacts.clone());
            let art = run_offline(&config)?;
            save_artifacts(&art, &out)?;
            let m = art.manifest();
            println!("n_max {} (kept {}), l_A {}, l_f {}, {:.1} s", m.n_max, m.n_keep, m.l_a, m.l_f, m.timings.total);
            println!("artifacts written to {}", out.display());
        }
        Command::Online { artifacts, cfg, report } => {
            let config = cfg.load()?;
            let dir = artifacts.unwrap_or_else(|| config.paths.artifacts.clone());
            let art = load_artifacts(&dir, &config.hash())?;
            let rep = run_online_sweep(&art, &config)?;
            write_report(&rep, &report.unwrap_or_else(|| config.paths.reports.clone()))?;
        }
        Command::Sweep { cfg, out, report } => {
            let config = cfg.load()?;
            let art = run_offline(&config)?;
            save_artifacts(&art, &out.unwrap_or_else(|| config.paths.artifacts.clone()))?;
            let rep = run_online_sweep(&art, &config)?;
            write_report(&rep, &report.unwrap_or_else(|| config.paths.reports.clone()))?;
        }
        Command::Verify { cfg, report } => {
            let config = cfg.load()?;
            let art = run_offline(&config)?;
            let rep = run_verify(&config, &art)?;
            for c in &rep.checks {
                println!("{} {:<20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let dir = report.unwrap_or_else(|| config.paths.reports.clone());
            write_geometry_summary(&rep, &dir)?;
            return Ok(rep.all_passed());
        }
        Command::Fom { r, theta, cfg } => {
            let config = cfg.load()?;
            let mu = ParameterPoint::new(r, theta)?;
            let mesh = config.mesh()?;
            let start = Instant::now();
            let geom = build_cut_geometry(&mesh, mu);
            let sys = assemble_system(&mesh, &geom, &config.physics)?;
            let sol = solve_fom(&sys)?;
            let seconds = start.elapsed().as_secs_f64();
            let g = config.physics.g_dirichlet;
            let dev = sys.active_dofs.iter().map(|&i| (sol.u[i] - g.eval(mesh.vertices[i])).abs()).fold(0.0, f64::max);
            println!("mu           ({r}, {theta})");
            println!("dofs         {} active of {}", sys.active_dofs.len(), sys.dim());
            println!(
                "elements     {} inside, {} cut, {} outside",
                geom.count(ElementClass::Inside),
                geom.count(ElementClass::Cut),
                geom.count(ElementClass::Outside)
            );
            println!("area         {} (ellipse {})", fmt_f64(geom.area()), fmt_f64(mu.ellipse_area()));
            println!("max |u - g_D| {dev:e} (exact solution only when f = 0 and g_D is linear)");
            println!("time         {seconds:.3e} s");
        }
        Command::Report { from, cfg, out } => {
            let config = cfg.load()?;
            let records = load_records(&from.join("records.csv"))?;
            if records.is_empty() {
                bail!("{} holds no records", from.display());
            }
            let rep = SweepReport::from_records(records, &config.sweep)?;
            write_report(&rep, &out.unwrap_or(from))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
