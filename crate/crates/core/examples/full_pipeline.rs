// Offline phase, artifact round trip, online sweep and report files for a
// reduced configuration.
//
// Pass a directory as first argument to keep the output; a temporary
// directory is used otherwise.

use std::path::PathBuf;

use cutrom::error::Result;
use cutrom::pipeline::{emit_report, load_artifacts, run_offline, run_online_sweep, save_artifacts, Config};

pub fn run_in(dir: PathBuf) -> Result<()> {
    let mut config = Config::default();
    config.sampling.n_train = 150;
    config.sampling.n_test = 6;
    config.sweep.n_list = vec![2, 4, 6, 8, 10, 15];
    config.sweep.fit_n_min = 2;
    config.sweep.fit_n_min_tail = 2;

    let art = run_offline(&config)?;
    save_artifacts(&art, &dir.join("artifacts"))?;
    let art = load_artifacts(&dir.join("artifacts"), &config.hash())?;
    let report = run_online_sweep(&art, &config)?;
    emit_report(&report, &dir.join("report"))?;

    println!("{} records, speedup {:.1}x", report.records.len(), report.timing.speedup);
    for m in &report.means {
        println!("n = {:2}: e_rel {:.3e}, eta_2a {:.3e}, bound {:.3e}", m.n, m.e_rel, m.eta_2a, m.bound);
    }
    for r in &report.rates {
        println!("{:<20} {}", r.quantity, r.formula);
    }
    println!("written to {}", dir.display());
    Ok(())
}

pub fn run() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("cutrom-example-{}", std::process::id()));
    run_in(dir.clone())?;
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    match std::env::args().nth(1) {
        Some(dir) => run_in(dir.into()),
        None => run(),
    }
}
