//! Discrete empirical interpolation for the stiffness matrix and load vector.
//!
//! Matrices are vectorised over the union of the training sparsity patterns.
//! Because every `A(μ)` is symmetric only the upper triangle (`row ≤ col`) is
//! stored, with off-diagonal entries scaled by `√2`; the Euclidean norm of
//! that vector equals the Frobenius norm of the matrix, so the POD of the
//! half-vectors is the same as the POD of the full vectorisation, and every
//! reconstruction is symmetric by construction.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, LU, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest accepted condition number of `PᵀU`.
pub const MAX_CONDITION: f64 = 1e12;

/// Union of structural patterns, symmetric as a set, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionPattern {
    dim: usize,
    entries: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    /// Positions in `entries` with `row ≤ col`: the DEIM coordinates.
    upper: Vec<usize>,
}

impl UnionPattern {
    pub fn build<'a>(matrices: impl IntoIterator<Item = &'a CsrMatrix>) -> Result<Self> {
        let mut dim = None;
        let mut set = std::collections::BTreeSet::new();
        for m in matrices {
            if *dim.get_or_insert(m.nrows()) != m.nrows() || m.nrows() != m.ncols() {
                return Err(Error::InvalidInput("pattern matrices must be square and of equal size".into()));
            }
            for (i, j, _) in m.triplets() {
                set.insert((i, j));
                set.insert((j, i));
            }
        }
        let dim = dim.ok_or_else(|| Error::InvalidInput("no matrices for the union pattern".into()))?;
        Ok(Self::from_entries(dim, set.into_iter().collect()))
    }

    /// Rebuilds a pattern from row-major, symmetric entries.
    pub fn from_entries(dim: usize, entries: Vec<(usize, usize)>) -> Self {
        let index = entries.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        let upper = entries.iter().enumerate().filter(|(_, (i, j))| i <= j).map(|(k, _)| k).collect();
        Self { dim, entries, index, upper }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    /// Length of the half-vectorisation.
    pub fn upper_len(&self) -> usize {
        self.upper.len()
    }

    /// `(row, col)` of half-vector coordinate `k`.
    pub fn upper_entry(&self, k: usize) -> (usize, usize) {
        self.entries[self.upper[k]]
    }

    /// Weight applied to coordinate `k`: `1` on the diagonal, `√2` off it.
    pub fn upper_weight(&self, k: usize) -> f64 {
        let (i, j) = self.upper_entry(k);
        if i == j {
            1.0
        } else {
            SQRT_2
        }
    }

    /// Weighted upper-triangle values of `a` (off-pattern entries ignored).
    pub fn vectorize(&self, a: &CsrMatrix) -> Vec<f64> {
        (0..self.upper.len())
            .map(|k| {
                let (i, j) = self.upper_entry(k);
                self.upper_weight(k) * a.get(i, j)
            })
            .collect()
    }

    /// Symmetric matrix on the full pattern from a weighted half-vector.
    pub fn matrix(&self, half: &[f64]) -> CsrMatrix {
        assert_eq!(half.len(), self.upper.len());
        let mut values = vec![0.0; self.entries.len()];
        for (k, &v) in half.iter().enumerate() {
            let (i, j) = self.upper_entry(k);
            let value = v / self.upper_weight(k);
            values[self.upper[k]] = value;
            if i != j {
                values[self.index[&(j, i)]] = value;
            }
        }
        CsrMatrix::from_sorted_entries(self.dim, self.dim, &self.entries, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeimKind {
    Matrix,
    Vector,
}

#[derive(Debug, Clone)]
pub struct DeimOperator {
    pub kind: DeimKind,
    /// `m × l` left singular vectors.
    pub basis: DMatrix<f64>,
    /// Selected coordinates, in selection order.
    pub indices: Vec<usize>,
    /// All singular values of the snapshot matrix, descending.
    pub singular_values: Vec<f64>,
    pub condition: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn argmax_abs(v: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, x) in v.enumerate() {
        if x.abs() > best.1 {
            best = (k, x.abs());
        }
    }
    best.0
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let (max, min) = (s.max(), s.min());
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

impl DeimOperator {
    /// Reassembles an operator from a basis and indices, refactorising `PᵀU`.
    pub fn from_parts(kind: DeimKind, basis: DMatrix<f64>, indices: Vec<usize>, singular_values: Vec<f64>) -> Result<Self> {
        let l = basis.ncols();
        if l == 0 || indices.len() != l {
            return Err(Error::InvalidInput(format!("{} indices for a basis of {l} columns", indices.len())));
        }
        let ptu = DMatrix::from_fn(l, l, |a, b| basis[(indices[a], b)]);
        let condition = condition_number(&ptu);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditionedDeim { step: l, condition });
        }
        Ok(Self { kind, basis, indices, singular_values, condition, lu: ptu.lu() })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `c = (PᵀU)⁻¹ s`.
    pub fn coefficients(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), self.len());
        self.lu
            .solve(&DVector::from_column_slice(samples))
            .expect("PᵀU was checked to be invertible")
            .as_slice()
            .to_vec()
    }

    /// `U c`.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.len());
        (&self.basis * DVector::from_column_slice(coefficients)).as_slice().to_vec()
    }
}

/// POD of the snapshot columns followed by greedy index selection.
///
/// `l` is the smallest count capturing `1 − eps` of the squared singular
/// value energy, capped by `l_cap` and the numerical rank.
pub fn build_deim_operator(snapshots: &DMatrix<f64>, eps: f64, l_cap: usize, kind: DeimKind) -> Result<DeimOperator> {
    if snapshots.ncols() == 0 {
        return Err(Error::ZeroSnapshots);
    }
    if snapshots.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let svd = SVD::new(snapshots.clone(), true, false);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let u = svd.u.expect("left singular vectors requested");

    let tol = s[0] * f64::EPSILON * snapshots.nrows().max(snapshots.ncols()) as f64;
    let rank = s.iter().take_while(|&&x| x > tol).count().max(1);
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut captured = 0.0;
    let mut l = s.len();
    for (k, x) in s.iter().enumerate() {
        captured += x * x;
        if captured / total >= 1.0 - eps {
            l = k + 1;
            break;
        }
    }
    let l = l.min(rank).min(l_cap.max(1));
    let basis = u.columns(0, l).into_owned();

    let mut indices = vec![argmax_abs(basis.column(0).iter().copied())];
    for k in 1..l {
        let ptu = DMatrix::from_fn(k, k, |a, b| basis[(indices[a], b)]);
        let condition = condition_number(&ptu);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditionedDeim { step: k, condition });
        }
        let rhs = DVector::from_fn(k, |a, _| basis[(indices[a], k)]);
        let c = ptu.lu().solve(&rhs).ok_or(Error::IllConditionedDeim { step: k, condition: f64::INFINITY })?;
        let residual = basis.column(k) - basis.columns(0, k) * c;
        indices.push(argmax_abs(residual.iter().copied()));
    }
    DeimOperator::from_parts(kind, basis, indices, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn diagonal_pattern_and_union() {
        let d = CsrMatrix::from_sorted_entries(3, 3, &[(0, 0), (1, 1), (2, 2)], vec![1.0, 2.0, 3.0]);
        let p = UnionPattern::build([&d]).unwrap();
        assert_eq!(p.entries(), &[(0, 0), (1, 1), (2, 2)]);
        let e = CsrMatrix::from_sorted_entries(3, 3, &[(0, 2)], vec![5.0]);
        let p = UnionPattern::build([&d, &e]).unwrap();
        assert_eq!(p.entries(), &[(0, 0), (0, 2), (1, 1), (2, 0), (2, 2)]);
        assert_eq!(p.upper_len(), 4);
    }

    #[test]
    fn half_vectorisation_is_isometric_and_invertible() {
        let a = CsrMatrix::from_sorted_entries(
            3,
            3,
            &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)],
            vec![2.0, -1.5, -1.5, 3.0, 0.25],
        );
        let p = UnionPattern::build([&a]).unwrap();
        let v = p.vectorize(&a);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - a.frobenius_norm()).abs() < 1e-14);
        assert!(p.matrix(&v).frobenius_distance(&a) < 1e-14);
        assert_eq!(p.matrix(&vec![0.0; p.upper_len()]).frobenius_norm(), 0.0);
    }

    #[test]
    fn rank_one_family_selects_max_entry() {
        let mode = DVector::from_vec(vec![0.1, -0.7, 0.3, 0.2]);
        let s = DMatrix::from_fn(4, 5, |i, j| mode[i] * (j as f64 + 1.0));
        let op = build_deim_operator(&s, 1e-10, 10, DeimKind::Vector).unwrap();
        assert_eq!(op.len(), 1);
        assert_eq!(op.indices, vec![1]);
    }

    #[test]
    fn full_rank_data_is_reconstructed_exactly() {
        let s = random(5, 3, 7);
        let op = build_deim_operator(&s, 1e-300, 10, DeimKind::Vector).unwrap();
        assert_eq!(op.len(), 3);
        for j in 0..3 {
            let samples: Vec<f64> = op.indices.iter().map(|&p| s[(p, j)]).collect();
            let rec = op.reconstruct(&op.coefficients(&samples));
            for i in 0..5 {
                assert!((rec[i] - s[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_and_zero_samples() {
        let op = build_deim_operator(&random(8, 4, 3), 1e-300, 10, DeimKind::Vector).unwrap();
        for j in 0..op.len() {
            let samples: Vec<f64> = op.indices.iter().map(|&p| op.basis[(p, j)]).collect();
            let c = op.coefficients(&samples);
            for (k, ck) in c.iter().enumerate() {
                assert!((ck - if k == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(op.coefficients(&vec![0.0; op.len()]).iter().all(|&c| c == 0.0));
        assert!(op.reconstruct(&vec![0.0; op.len()]).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn training_reconstruction_matches_svd_truncation_when_exact() {
        // the DEIM error equals the projection error when the snapshot lies in span(U)
        let s = random(10, 6, 11);
        let op = build_deim_operator(&s, 1e-300, 6, DeimKind::Vector).unwrap();
        let col = s.column(2);
        let samples: Vec<f64> = op.indices.iter().map(|&p| col[p]).collect();
        let rec = DVector::from_vec(op.reconstruct(&op.coefficients(&samples)));
        let proj = &op.basis * (op.basis.transpose() * col);
        assert!(((&rec - col).norm() - (&proj - col).norm()).abs() < 1e-10);
    }

    #[test]
    fn zero_snapshots_rejected() {
        assert!(build_deim_operator(&DMatrix::zeros(4, 2), 1e-10, 4, DeimKind::Vector).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn interpolation_is_exact_at_selected_indices(seed in 0u64..10_000, rows in 4usize..20, cols in 1usize..6) {
            let s = random(rows, cols, seed);
            let op = build_deim_operator(&s, 1e-12, cols, DeimKind::Vector).unwrap();
            let mut sorted = op.indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), op.len());
            let input = random(rows, 1, seed + 1);
            let samples: Vec<f64> = op.indices.iter().map(|&p| input[p]).collect();
            let rec = op.reconstruct(&op.coefficients(&samples));
            for &p in &op.indices {
                prop_assert!((rec[p] - input[p]).abs() < 1e-10);
            }
        }
    }
}
