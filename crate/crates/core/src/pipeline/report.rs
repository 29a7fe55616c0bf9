//! Aggregation of sweep records and CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::SweepConfig;
use crate::error::{io_err, Error, Result};
use crate::estimators::EstimatorRecord;
use crate::rates::{fit_quantity, Model, RateRow};

/// Arithmetic means over the test parameters at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub n: usize,
    pub e_rel: f64,
    pub eta_a: f64,
    pub eta_f: f64,
    pub eta_2a: f64,
    pub eta_2b: f64,
    pub eta_2a_active: f64,
    pub theta_2a: f64,
    pub theta_2b: f64,
    pub theta_2a_active: f64,
    pub e_t: f64,
    pub bound: f64,
    pub eta_pod: f64,
    pub rom_seconds: f64,
    pub fom_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub fom_mean: f64,
    pub rom_mean: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<EstimatorRecord>,
    pub means: Vec<MeanRow>,
    pub timing: TimingSummary,
    pub rates: Vec<RateRow>,
    /// Records with `e_T` above the combined bound.
    pub bound_violations: usize,
    pub offline_seconds: Option<f64>,
    /// POD spectrum, when available.
    pub sigma: Vec<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

impl SweepReport {
    pub fn from_records(records: Vec<EstimatorRecord>, sweep: &SweepConfig) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no sweep records".into()));
        }
        let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let means: Vec<MeanRow> = ns
            .iter()
            .map(|&n| {
                let rs: Vec<&EstimatorRecord> = records.iter().filter(|r| r.n == n).collect();
                let m = |f: fn(&EstimatorRecord) -> f64| mean(rs.iter().map(|r| f(r)));
                let mo = |f: fn(&EstimatorRecord) -> Option<f64>| mean(rs.iter().filter_map(|r| f(r)));
                MeanRow {
                    n,
                    e_rel: m(|r| r.e_rel),
                    eta_a: m(|r| r.eta_a),
                    eta_f: m(|r| r.eta_f),
                    eta_2a: m(|r| r.eta_2a),
                    eta_2b: m(|r| r.eta_2b),
                    eta_2a_active: m(|r| r.eta_2a_active),
                    theta_2a: mo(|r| r.theta_2a),
                    theta_2b: mo(|r| r.theta_2b),
                    theta_2a_active: mo(|r| r.theta_2a_active),
                    e_t: m(|r| r.e_t),
                    bound: m(|r| r.bound),
                    eta_pod: m(|r| r.eta_pod),
                    rom_seconds: m(|r| r.rom_seconds),
                    fom_seconds: m(|r| r.fom_seconds),
                }
            })
            .collect();

        // FOM time is measured once per parameter and repeated over n
        let fom_mean = mean(records.iter().map(|r| r.fom_seconds));
        let rom_mean = mean(records.iter().map(|r| r.rom_seconds));
        let timing = TimingSummary { fom_mean, rom_mean, speedup: fom_mean / rom_mean };

        let (lo, lo_tail) = (sweep.fit_n_min as f64, sweep.fit_n_min_tail as f64);
        let series = |f: fn(&MeanRow) -> f64| -> Vec<(f64, f64)> { means.iter().map(|m| (m.n as f64, f(m))).collect() };
        let rates = vec![
            fit_quantity("true_rel_error", &series(|m| m.e_rel), lo)?,
            fit_quantity("est_2a_residual", &series(|m| m.eta_2a), lo)?,
            fit_quantity("est_2b_jacobi", &series(|m| m.eta_2b), lo)?,
            fit_quantity("est_3_tail_energy", &series(|m| m.eta_pod), lo_tail)?,
            fit_quantity("est_1a_deim_matrix", &series(|m| m.eta_a), lo_tail)?,
            fit_quantity("est_1b_deim_vector", &series(|m| m.eta_f), lo_tail)?,
        ];
        let bound_violations = records.iter().filter(|r| r.e_t > r.bound).count();
        Ok(Self { records, means, timing, rates, bound_violations, offline_seconds: None, sigma: Vec::new() })
    }

    pub fn rate(&self, quantity: &str) -> Option<&RateRow> {
        self.rates.iter().find(|r| r.quantity == quantity)
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(format!("writing {}", path.display())))
}

pub const RUN4_HEADER: &str =
    "n,e_rel,eta_A,eta_f,eta_2a,eta_2b,eta_2a_active,theta_2a,theta_2b,theta_2a_active,e_T,bound";

const RECORD_HEADER: &str = "r,theta,n,e_rel,e_T,eta_A,eta_f,eta_2a,eta_2b,eta_2a_active,eta_pod,theta_2a,theta_2b,theta_2a_active,bound,d_min,d_max,fom_seconds,rom_seconds";

fn run4_csv(report: &SweepReport) -> String {
    let mut out = format!("{RUN4_HEADER}\n");
    for m in &report.means {
        let values = [
            m.e_rel,
            m.eta_a,
            m.eta_f,
            m.eta_2a,
            m.eta_2b,
            m.eta_2a_active,
            m.theta_2a,
            m.theta_2b,
            m.theta_2a_active,
            m.e_t,
            m.bound,
        ];
        let cols: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{},{}", m.n, cols.join(","));
    }
    out
}

fn records_csv(records: &[EstimatorRecord]) -> String {
    let mut out = format!("{RECORD_HEADER}\n");
    for r in records {
        let cols = [
            fmt_f64(r.r),
            fmt_f64(r.theta),
            r.n.to_string(),
            fmt_f64(r.e_rel),
            fmt_f64(r.e_t),
            fmt_f64(r.eta_a),
            fmt_f64(r.eta_f),
            fmt_f64(r.eta_2a),
            fmt_f64(r.eta_2b),
            fmt_f64(r.eta_2a_active),
            fmt_f64(r.eta_pod),
            fmt_opt(r.theta_2a),
            fmt_opt(r.theta_2b),
            fmt_opt(r.theta_2a_active),
            fmt_f64(r.bound),
            fmt_f64(r.d_min),
            fmt_f64(r.d_max),
            fmt_f64(r.fom_seconds),
            fmt_f64(r.rom_seconds),
        ];
        let _ = writeln!(out, "{}", cols.join(","));
    }
    out
}

fn rates_csv(rates: &[RateRow]) -> String {
    let mut out = String::from("quantity,alpha,r2_alg,beta,r2_exp,best,formula\n");
    for r in rates {
        let best = match r.best {
            None => "constant".to_string(),
            Some(m) => m.to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.quantity,
            fmt_f64(r.alpha),
            fmt_opt(r.r2_alg),
            fmt_f64(r.beta),
            fmt_opt(r.r2_exp),
            best,
            r.formula
        );
    }
    out
}

fn fitted(row: &RateRow, n: f64, reference: &[(f64, f64)]) -> Option<f64> {
    // evaluate the selected model through its prefactor recovered from the data
    let model = row.best?;
    let x = |n: f64| match model {
        Model::Algebraic => -row.alpha * n.ln(),
        Model::Exponential => -row.beta * n,
    };
    let points: Vec<&(f64, f64)> = reference.iter().filter(|p| p.1 > 0.0).collect();
    let offset = points.iter().map(|&&(m, v)| v.ln() - x(m)).sum::<f64>() / points.len() as f64;
    Some((offset + x(n)).exp())
}

fn figure_csv(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Writes `run4.csv`, `tail.csv`, `rates.csv`, `timings.csv`,
/// `records.csv` and the per-figure data files.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    write(dir, "run4.csv", &run4_csv(report))?;
    write(dir, "records.csv", &records_csv(&report.records))?;
    write(dir, "rates.csv", &rates_csv(&report.rates))?;
    write(
        dir,
        "tail.csv",
        &figure_csv("n,eta_pod", report.means.iter().map(|m| vec![m.n.to_string(), fmt_f64(m.eta_pod)])),
    )?;

    let t = &report.timing;
    let mut timings = String::from("metric,value\n");
    let _ = writeln!(timings, "fom_mean_seconds,{}", fmt_f64(t.fom_mean));
    let _ = writeln!(timings, "rom_mean_seconds,{}", fmt_f64(t.rom_mean));
    let _ = writeln!(timings, "speedup,{}", fmt_f64(t.speedup));
    if let Some(s) = report.offline_seconds {
        let _ = writeln!(timings, "offline_seconds,{}", fmt_f64(s));
    }
    write(dir, "timings.csv", &timings)?;

    let m = &report.means;
    let series = |f: fn(&MeanRow) -> f64| -> Vec<(f64, f64)> { m.iter().map(|r| (r.n as f64, f(r))).collect() };
    let fit_col = |name: &str, f: fn(&MeanRow) -> f64, row: &MeanRow| -> String {
        report
            .rate(name)
            .and_then(|rate| fitted(rate, row.n as f64, &series(f)))
            .map(fmt_f64)
            .unwrap_or_default()
    };
    write(
        dir,
        "fig1_solution_errors.csv",
        &figure_csv(
            "n,e_rel,e_T,e_rel_fit",
            m.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.e_rel), fmt_f64(r.e_t), fit_col("true_rel_error", |x| x.e_rel, r)]),
        ),
    )?;
    write(
        dir,
        "fig2_deim_estimators.csv",
        &figure_csv("n,eta_A,eta_f", m.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.eta_a), fmt_f64(r.eta_f)])),
    )?;
    write(
        dir,
        "fig3_residual_tail.csv",
        &figure_csv(
            "n,eta_2a,eta_2b,eta_2a_active,eta_pod,eta_2a_fit,eta_2b_fit,eta_pod_fit",
            m.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.eta_2a),
                    fmt_f64(r.eta_2b),
                    fmt_f64(r.eta_2a_active),
                    fmt_f64(r.eta_pod),
                    fit_col("est_2a_residual", |x| x.eta_2a, r),
                    fit_col("est_2b_jacobi", |x| x.eta_2b, r),
                    fit_col("est_3_tail_energy", |x| x.eta_pod, r),
                ]
            }),
        ),
    )?;
    let logs = |r: &MeanRow| [r.e_rel, r.eta_2a, r.eta_2b, r.eta_pod].map(|v| fmt_f64(v.ln()));
    write(
        dir,
        "fig4_loglog.csv",
        &figure_csv(
            "log_n,log_e_rel,log_eta_2a,log_eta_2b,log_eta_pod",
            m.iter().map(|r| std::iter::once(fmt_f64((r.n as f64).ln())).chain(logs(r)).collect()),
        ),
    )?;
    write(
        dir,
        "fig5_semilog.csv",
        &figure_csv(
            "n,log_e_rel,log_eta_2a,log_eta_2b,log_eta_pod",
            m.iter().map(|r| std::iter::once(r.n.to_string()).chain(logs(r)).collect()),
        ),
    )?;
    write(
        dir,
        "fig6_effectivity.csv",
        &figure_csv(
            "n,theta_2a,theta_2b,theta_2a_active",
            m.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.theta_2a), fmt_f64(r.theta_2b), fmt_f64(r.theta_2a_active)]),
        ),
    )?;
    write(
        dir,
        "fig7_timings.csv",
        &figure_csv(
            "n,rom_ms,fom_ms",
            m.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.rom_seconds * 1e3), fmt_f64(r.fom_seconds * 1e3)]),
        ),
    )?;
    if !report.sigma.is_empty() {
        write(
            dir,
            "pod_spectrum.csv",
            &figure_csv("k,sigma", report.sigma.iter().enumerate().map(|(k, s)| vec![(k + 1).to_string(), fmt_f64(*s)])),
        )?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::InvalidInput(format!("records.csv line {line}: bad number {s:?}")))
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line).map(Some)
    }
}

/// Reads back a `records.csv` written by [`emit_report`].
pub fn load_records(path: &Path) -> Result<Vec<EstimatorRecord>> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RECORD_HEADER => {}
        _ => return Err(Error::InvalidInput(format!("{} has an unexpected header", path.display()))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let line = k + 1;
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 19 {
                return Err(Error::InvalidInput(format!("records.csv line {line}: expected 19 columns")));
            }
            let f = |i: usize| parse_f64(c[i], line);
            Ok(EstimatorRecord {
                r: f(0)?,
                theta: f(1)?,
                n: c[2].trim().parse().map_err(|_| Error::InvalidInput(format!("records.csv line {line}: bad n")))?,
                e_rel: f(3)?,
                e_t: f(4)?,
                eta_a: f(5)?,
                eta_f: f(6)?,
                eta_2a: f(7)?,
                eta_2b: f(8)?,
                eta_2a_active: f(9)?,
                eta_pod: f(10)?,
                theta_2a: parse_opt(c[11], line)?,
                theta_2b: parse_opt(c[12], line)?,
                theta_2a_active: parse_opt(c[13], line)?,
                bound: f(14)?,
                d_min: f(15)?,
                d_max: f(16)?,
                fom_seconds: f(17)?,
                rom_seconds: f(18)?,
            })
        })
        .collect()
}
