// Algebraic and exponential least-squares fits with model selection by R².

use cutrom::error::Result;
use cutrom::rates::fit_quantity;

pub fn run() -> Result<()> {
    let ns: [f64; 10] = [2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0];
    let power: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 3.0 * n.powf(-2.0))).collect();
    let expo: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 0.5 * (-0.1 * n).exp())).collect();
    let tail = [7.38e-4, 1.30e-4, 9.73e-5, 7.90e-5, 6.37e-5, 2.30e-5, 1.48e-5, 9.73e-6, 6.32e-6, 2.37e-6];
    let tail: Vec<(f64, f64)> = ns.iter().copied().zip(tail).collect();
    let constant: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 5.951e-5)).collect();
    for (name, points) in [("power law", &power), ("exponential", &expo), ("tabulated tail", &tail), ("constant", &constant)] {
        let row = fit_quantity(name, points, 2.0)?;
        println!(
            "{name:<15} alpha {:.4} (R² {}), beta {:.4} (R² {}) -> {}",
            row.alpha,
            row.r2_alg.map_or("n/a".into(), |r| format!("{r:.4}")),
            row.beta,
            row.r2_exp.map_or("n/a".into(), |r| format!("{r:.4}")),
            row.formula
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
