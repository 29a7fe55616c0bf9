//! A posteriori estimators, true errors, effectivities and the combined bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParameterPoint;
use crate::sparse::{norm2, CsrMatrix};

/// Slack of the Rayleigh sandwich check.
pub const RAYLEIGH_SLACK: f64 = 1e-12;

/// All per-`(μ, n)` quantities of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub r: f64,
    pub theta: f64,
    pub n: usize,
    pub e_rel: f64,
    pub e_t: f64,
    pub eta_a: f64,
    pub eta_f: f64,
    pub eta_2a: f64,
    pub eta_2b: f64,
    pub eta_2a_active: f64,
    pub eta_pod: f64,
    pub theta_2a: Option<f64>,
    pub theta_2b: Option<f64>,
    pub theta_2a_active: Option<f64>,
    pub bound: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub fom_seconds: f64,
    pub rom_seconds: f64,
}

impl EstimatorRecord {
    pub fn mu(&self) -> ParameterPoint {
        ParameterPoint { r: self.r, theta: self.theta }
    }
}

/// `‖A − A_Deim‖_F / ‖A‖_F`.
pub fn eta_deim_matrix(a: &CsrMatrix, a_deim: &CsrMatrix) -> Result<f64> {
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(a.frobenius_distance(a_deim) / norm)
}

/// `‖f − f_Deim‖₂ / ‖f‖₂`.
pub fn eta_deim_vector(f: &[f64], f_deim: &[f64]) -> Result<f64> {
    let norm = norm2(f);
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(distance(f, f_deim) / norm)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖r‖₂`.
pub fn eta_residual_plain(r: &[f64]) -> f64 {
    norm2(r)
}

/// `√(Σ r_i² / max(|d_i|, ε_safe))`.
pub fn eta_residual_jacobi(r: &[f64], diag: &[f64], eps_safe: f64) -> f64 {
    assert_eq!(r.len(), diag.len());
    r.iter().zip(diag).map(|(ri, di)| ri * ri / di.abs().max(eps_safe)).sum::<f64>().sqrt()
}

/// `‖r|_𝒜‖₂`.
pub fn eta_residual_active(r: &[f64], active: &[usize]) -> f64 {
    active.iter().map(|&i| r[i] * r[i]).sum::<f64>().sqrt()
}

/// `(e_rel, e_T)`: relative Euclidean error and mesh-norm error.
pub fn true_errors(u_fom: &[f64], u_rom: &[f64], norm: &CsrMatrix) -> Result<(f64, f64)> {
    let reference = norm2(u_fom);
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let e: Vec<f64> = u_fom.iter().zip(u_rom).map(|(a, b)| a - b).collect();
    let e_rel = norm2(&e) / reference;
    let e_t = norm.quad_form(&e).max(0.0).sqrt();
    Ok((e_rel, e_t))
}

/// `η / e`, undefined for `e = 0`.
pub fn effectivity(eta: f64, e: f64) -> Option<f64> {
    (e > 0.0).then(|| eta / e)
}

/// `α* = min(1 − 2C_inv²/λ, 1/2, 1)`.
pub fn alpha_star(lambda: f64, c_inv: f64) -> f64 {
    (1.0 - 2.0 * c_inv * c_inv / lambda).min(0.5).min(1.0)
}

/// Inputs of the combined bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `‖r|_𝒜‖₂`.
    pub residual_active: f64,
    /// `‖A − A_Deim‖_F`.
    pub matrix_error: f64,
    /// `‖f − f_Deim‖₂`.
    pub vector_error: f64,
    /// `‖u_N^Deim‖₂`.
    pub u_rom_norm: f64,
}

/// `(1/α*)‖r|_𝒜‖ + (C_A‖V_n‖²/α*)‖A − A_Deim‖_F‖u‖ + (‖V_n‖/α*)‖f − f_Deim‖`
/// with `C_A = ‖V_n‖²`.
pub fn combined_bound(terms: &BoundTerms, alpha_star: f64, norm_vn: f64) -> f64 {
    let c_a = norm_vn * norm_vn;
    (terms.residual_active + c_a * norm_vn * norm_vn * terms.matrix_error * terms.u_rom_norm + norm_vn * terms.vector_error)
        / alpha_star
}

/// Smallest and largest `|A_ii|` over the active dofs.
pub fn active_diagonal_range(diag: &[f64], active: &[usize]) -> (f64, f64) {
    active.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &i| {
        let d = diag[i].abs();
        (lo.min(d), hi.max(d))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighMargins {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

impl RayleighMargins {
    pub fn holds(&self) -> bool {
        self.ratio >= self.lower - RAYLEIGH_SLACK && self.ratio <= self.upper + RAYLEIGH_SLACK
    }
}

/// `1/√d_max ≤ η_2b/η_2a ≤ 1/√d_min`.
pub fn rayleigh_ratio_check(eta_2a: f64, eta_2b: f64, d_min: f64, d_max: f64) -> Result<RayleighMargins> {
    if !(eta_2a > 0.0) {
        return Err(Error::InvalidInput("Rayleigh check needs a nonzero residual".into()));
    }
    Ok(RayleighMargins { ratio: eta_2b / eta_2a, lower: 1.0 / d_max.sqrt(), upper: 1.0 / d_min.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deim_quality_endpoints() {
        let a = CsrMatrix::from_sorted_entries(2, 2, &[(0, 0), (1, 1)], vec![3.0, 4.0]);
        assert_eq!(eta_deim_matrix(&a, &a).unwrap(), 0.0);
        assert_eq!(eta_deim_matrix(&a, &CsrMatrix::zeros(2, 2)).unwrap(), 1.0);
        assert!(eta_deim_matrix(&CsrMatrix::zeros(2, 2), &a).is_err());
        assert_eq!(eta_deim_vector(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(eta_deim_vector(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(eta_deim_vector(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn residual_norms() {
        assert_eq!(eta_residual_plain(&[0.0, 0.0]), 0.0);
        assert_eq!(eta_residual_plain(&[3.0, 4.0, 0.0]), 5.0);
        assert_eq!(eta_residual_jacobi(&[0.0, 0.0], &[1.0, 1.0], 1e-14), 0.0);
        assert!((eta_residual_jacobi(&[1.0, 1.0], &[1.0, 4.0], 1e-14) - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(eta_residual_jacobi(&[1.0], &[0.0], 0.25), 2.0);
        let r = [1.0, 2.0, 2.0];
        assert_eq!(eta_residual_active(&r, &[0, 1, 2]), eta_residual_plain(&r));
        assert_eq!(eta_residual_active(&r, &[]), 0.0);
    }

    #[test]
    fn concentration_case_attains_upper_rayleigh_bound() {
        let r = [1.0, 0.0];
        let d = [2.0, 8.0];
        let eta_2a = eta_residual_plain(&r);
        let eta_2b = eta_residual_jacobi(&r, &d, 1e-14);
        let m = rayleigh_ratio_check(eta_2a, eta_2b, 2.0, 8.0).unwrap();
        assert!((m.ratio - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((m.ratio - m.upper).abs() < 1e-15);
        assert!(m.holds());
    }

    #[test]
    fn equal_diagonal_gives_exact_ratio() {
        let r = [0.3, -1.2, 2.0];
        let d = [4.0; 3];
        let ratio = eta_residual_jacobi(&r, &d, 1e-14) / eta_residual_plain(&r);
        assert!((ratio - 0.5).abs() < 1e-15);
    }

    #[test]
    fn true_error_endpoints() {
        let n = CsrMatrix::from_sorted_entries(2, 2, &[(0, 0), (1, 1)], vec![1.0, 1.0]);
        assert_eq!(true_errors(&[1.0, 2.0], &[1.0, 2.0], &n).unwrap(), (0.0, 0.0));
        assert_eq!(true_errors(&[1.0, 2.0], &[0.0, 0.0], &n).unwrap().0, 1.0);
        assert!(true_errors(&[0.0, 0.0], &[1.0, 0.0], &n).is_err());
    }

    #[test]
    fn effectivity_and_alpha() {
        assert_eq!(effectivity(2.5, 2.5), Some(1.0));
        assert_eq!(effectivity(1.0, 0.0), None);
        assert_eq!(alpha_star(10.0, 1.0), 0.5);
        assert!((alpha_star(2.5, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn bound_vanishes_with_zero_terms() {
        let t = BoundTerms { residual_active: 0.0, matrix_error: 0.0, vector_error: 0.0, u_rom_norm: 3.0 };
        assert_eq!(combined_bound(&t, 0.5, 7.0), 0.0);
        let t = BoundTerms { residual_active: 1.0, matrix_error: 1.0, vector_error: 1.0, u_rom_norm: 1.0 };
        assert_eq!(combined_bound(&t, 0.5, 2.0), (1.0 + 16.0 + 2.0) / 0.5);
    }

    proptest! {
        #[test]
        fn rayleigh_sandwich_holds(r in prop::collection::vec(-10.0f64..10.0, 1..20), seed in prop::collection::vec(0.01f64..100.0, 20)) {
            let d = &seed[..r.len()];
            prop_assume!(r.iter().any(|&x| x != 0.0));
            let active: Vec<usize> = (0..r.len()).collect();
            let (lo, hi) = active_diagonal_range(d, &active);
            let m = rayleigh_ratio_check(eta_residual_plain(&r), eta_residual_jacobi(&r, d, 1e-14), lo, hi).unwrap();
            prop_assert!(m.holds());
            prop_assert!(eta_residual_active(&r, &active[..r.len() / 2]) <= eta_residual_plain(&r));
        }
    }
}
