//! CutFEM assembly: stiffness matrix, load vector, mesh-dependent norm
//! matrix, background mass matrix and local entry evaluation.
//!
//! Every global entry is accumulated in a fixed order: active triangles in
//! ascending index, then ghost facets in ascending index. The local entry
//! evaluator follows the same order and shares the element kernels, which
//! makes sampled entries bit-identical to the fully assembled ones.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cut_element, is_ghost_facet, BackgroundMesh, BoundaryRule, CutGeometry, ElementClass, ParameterPoint,
};
use crate::sparse::CsrMatrix;

/// Dirichlet datum `g(x, y) = c0 + cx·x + cy·y + cxy·x·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletData {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub cxy: f64,
}

impl DirichletData {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.c0 + self.cx * p[0] + self.cy * p[1] + self.cxy * p[0] * p[1]
    }
}

/// Source, boundary datum and stabilisation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsParams {
    pub f_const: f64,
    pub g_dirichlet: DirichletData,
    /// Nitsche penalty `λ`.
    pub lambda: f64,
    /// Ghost-penalty coefficients `γ_k`, `k = 0, 1, ...`.
    pub gamma: Vec<f64>,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            f_const: 20.0,
            g_dirichlet: DirichletData { c0: 0.5, cx: 0.0, cy: 0.0, cxy: 1.0 },
            lambda: 10.0,
            gamma: vec![0.1, 0.001],
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g >= 0.0)) {
            return Err(Error::InvalidInput(format!("ghost coefficients must be non-negative, got {g}")));
        }
        Ok(())
    }
}

/// Stiffness matrix and load vector on all background dofs.
#[derive(Debug, Clone)]
pub struct SystemPair {
    pub mu: ParameterPoint,
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    /// Vertices of active triangles, ascending.
    pub active_dofs: Vec<usize>,
}

impl SystemPair {
    pub fn dim(&self) -> usize {
        self.load.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct ElementLocal {
    matrix: [[f64; 3]; 3],
    load: [f64; 3],
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Diffusion + Nitsche local matrix and load of one active triangle.
fn element_local(
    mesh: &BackgroundMesh,
    t: usize,
    volume: &[([f64; 2], f64)],
    boundary: Option<&BoundaryRule>,
    phys: &PhysicsParams,
) -> ElementLocal {
    let grads = mesh.p1_gradients(t);
    let mut matrix = [[0.0; 3]; 3];
    let mut load = [0.0; 3];
    for &(p, w) in volume {
        let phi = mesh.p1_values(t, p);
        for a in 0..3 {
            load[a] += w * phys.f_const * phi[a];
            for b in 0..3 {
                matrix[a][b] += w * dot(grads[a], grads[b]);
            }
        }
    }
    if let Some(rule) = boundary {
        let penalty = phys.lambda / mesh.h;
        let dn = grads.map(|g| dot(g, rule.normal));
        for q in 0..2 {
            let (p, w) = (rule.points[q], rule.weights[q]);
            let phi = mesh.p1_values(t, p);
            let g = phys.g_dirichlet.eval(p);
            for a in 0..3 {
                load[a] += w * (penalty * phi[a] - dn[a]) * g;
                for b in 0..3 {
                    matrix[a][b] += w * (penalty * phi[a] * phi[b] - dn[b] * phi[a] - phi[b] * dn[a]);
                }
            }
        }
    }
    ElementLocal { matrix, load }
}

/// Local matrix of the mesh-dependent norm on one active triangle.
fn element_norm_local(
    mesh: &BackgroundMesh,
    t: usize,
    volume: &[([f64; 2], f64)],
    boundary: Option<&BoundaryRule>,
    phys: &PhysicsParams,
) -> [[f64; 3]; 3] {
    let grads = mesh.p1_gradients(t);
    let mut matrix = [[0.0; 3]; 3];
    for &(_, w) in volume {
        for a in 0..3 {
            for b in 0..3 {
                matrix[a][b] += w * dot(grads[a], grads[b]);
            }
        }
    }
    if let Some(rule) = boundary {
        let penalty = phys.lambda / mesh.h;
        for q in 0..2 {
            let phi = mesh.p1_values(t, rule.points[q]);
            for a in 0..3 {
                for b in 0..3 {
                    matrix[a][b] += rule.weights[q] * penalty * phi[a] * phi[b];
                }
            }
        }
    }
    matrix
}

/// Patch vertices and ghost-penalty local matrix of an interior facet.
///
/// Order `k` penalises the jump of the `(k+1)`-th normal derivative. For P1
/// basis functions every derivative of order two or more vanishes, so all
/// `k ≥ 1` contributions are computed and checked to be exactly zero.
fn facet_local(mesh: &BackgroundMesh, f: usize, phys: &PhysicsParams) -> ([usize; 4], [[f64; 4]; 4]) {
    let facet = &mesh.facets[f];
    let [t0, t1] = facet.triangles;
    let opposite = |t: usize| mesh.triangles[t].into_iter().find(|v| !facet.vertices.contains(v)).unwrap();
    let patch = [facet.vertices[0], facet.vertices[1], opposite(t0), opposite(t1)];

    let [pa, pb] = facet.vertices.map(|v| mesh.vertices[v]);
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    let normal = [(pb[1] - pa[1]) / len, (pa[0] - pb[0]) / len];

    let grad_on = |t: usize, v: usize| -> [f64; 2] {
        match mesh.triangles[t].iter().position(|&w| w == v) {
            Some(k) => mesh.p1_gradients(t)[k],
            None => [0.0, 0.0],
        }
    };

    let mut local = [[0.0; 4]; 4];
    for (k, &gamma) in phys.gamma.iter().enumerate() {
        let weight = gamma * mesh.h.powi(2 * k as i32 + 1) * len;
        let jumps: [f64; 4] = if k == 0 {
            patch.map(|v| dot(normal, grad_on(t0, v)) - dot(normal, grad_on(t1, v)))
        } else {
            // P1 Hessians (and higher derivatives) are identically zero
            patch.map(|_| {
                let hessian = [[0.0f64; 2]; 2];
                let dnn = |h: [[f64; 2]; 2]| normal[0] * (h[0][0] * normal[0] + h[0][1] * normal[1])
                    + normal[1] * (h[1][0] * normal[0] + h[1][1] * normal[1]);
                dnn(hessian) - dnn(hessian)
            })
        };
        for a in 0..4 {
            for b in 0..4 {
                let contribution = weight * jumps[a] * jumps[b];
                if k == 0 {
                    local[a][b] += contribution;
                } else {
                    assert_eq!(contribution, 0.0, "higher-order ghost term must vanish for P1");
                }
            }
        }
    }
    (patch, local)
}

fn local_index(tri: &[usize], v: usize) -> usize {
    tri.iter().position(|&w| w == v).expect("vertex belongs to element")
}

fn active_elements_with_rules(
    geom: &CutGeometry,
) -> Result<impl Iterator<Item = (usize, &[([f64; 2], f64)], Option<&BoundaryRule>)>> {
    if geom.boundary_rules.len() != geom.cut.len() {
        let missing = geom.cut.get(geom.boundary_rules.len()).copied().unwrap_or(0);
        return Err(Error::MissingBoundaryRule { element: missing });
    }
    let mut cut_pos = 0;
    Ok(geom.active.iter().zip(&geom.volume_rules).map(move |(&t, vol)| {
        let boundary = if geom.cut.get(cut_pos) == Some(&t) {
            cut_pos += 1;
            geom.boundary_rules[cut_pos - 1].as_ref()
        } else {
            None
        };
        (t, vol.as_slice(), boundary)
    }))
}

fn operator_pattern(mesh: &BackgroundMesh, geom: &CutGeometry, phys: &PhysicsParams) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut rows = vec![Vec::new(); n];
    for &t in &geom.active {
        let tri = mesh.triangles[t];
        for &a in &tri {
            rows[a].extend_from_slice(&tri);
        }
    }
    if phys.gamma.first().is_some_and(|&g| g != 0.0) {
        for &f in &geom.ghost_facets {
            let (patch, _) = facet_local(mesh, f, phys);
            for &a in &patch {
                rows[a].extend_from_slice(&patch);
            }
        }
    }
    CsrMatrix::from_row_patterns(n, rows)
}

fn add_ghost_terms(mesh: &BackgroundMesh, geom: &CutGeometry, phys: &PhysicsParams, matrix: &mut CsrMatrix) {
    if phys.gamma.first().is_none_or(|&g| g == 0.0) {
        return;
    }
    for &f in &geom.ghost_facets {
        let (patch, local) = facet_local(mesh, f, phys);
        for a in 0..4 {
            for b in 0..4 {
                matrix.add_to(patch[a], patch[b], local[a][b]);
            }
        }
    }
}

/// Assembles `A(μ)` and `f(μ)`. Rows and entries of inactive dofs are
/// structurally absent, hence exactly zero.
pub fn assemble_system(mesh: &BackgroundMesh, geom: &CutGeometry, phys: &PhysicsParams) -> Result<SystemPair> {
    let mut matrix = operator_pattern(mesh, geom, phys);
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, volume, boundary) in active_elements_with_rules(geom)? {
        let local = element_local(mesh, t, volume, boundary, phys);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            load[tri[a]] += local.load[a];
            for b in 0..3 {
                matrix.add_to(tri[a], tri[b], local.matrix[a][b]);
            }
        }
    }
    add_ghost_terms(mesh, geom, phys, &mut matrix);
    Ok(SystemPair { mu: geom.mu, matrix, load, active_dofs: geom.active_dofs(mesh) })
}

/// Assembles `N_μ` with `vᵀN_μv = ‖∇v‖²_Ω + (λ/h)‖v‖²_Γ + Σ_k γ_k h^{2k+1}‖⟦∂ⁿ⁽ᵏ⁺¹⁾v⟧‖²`.
pub fn assemble_norm_matrix(mesh: &BackgroundMesh, geom: &CutGeometry, phys: &PhysicsParams) -> Result<CsrMatrix> {
    let mut matrix = operator_pattern(mesh, geom, phys);
    for (t, volume, boundary) in active_elements_with_rules(geom)? {
        let local = element_norm_local(mesh, t, volume, boundary, phys);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                matrix.add_to(tri[a], tri[b], local[a][b]);
            }
        }
    }
    add_ghost_terms(mesh, geom, phys, &mut matrix);
    Ok(matrix)
}

/// P1 mass matrix over the whole background box.
pub fn assemble_mass_matrix(mesh: &BackgroundMesh) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut rows = vec![Vec::new(); n];
    for tri in &mesh.triangles {
        for &a in tri {
            rows[a].extend_from_slice(tri);
        }
    }
    let mut mass = CsrMatrix::from_row_patterns(n, rows);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        for a in 0..3 {
            for b in 0..3 {
                let factor = if a == b { 2.0 } else { 1.0 };
                mass.add_to(tri[a], tri[b], factor * area / 12.0);
            }
        }
    }
    mass
}

/// Values of selected matrix and vector entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEntries {
    pub matrix: Vec<f64>,
    pub vector: Vec<f64>,
}

/// Local evaluator of individual entries of `A(μ)` and `f(μ)`.
///
/// Only the triangles and facets in the shared support of the requested
/// basis functions are classified and integrated; results are cached per
/// element for the lifetime of the evaluator.
pub struct EntryEvaluator<'a> {
    mesh: &'a BackgroundMesh,
    mu: ParameterPoint,
    phys: &'a PhysicsParams,
    elements: HashMap<usize, (ElementClass, Option<ElementLocal>)>,
    facets: HashMap<usize, Option<([usize; 4], [[f64; 4]; 4])>>,
}

impl<'a> EntryEvaluator<'a> {
    pub fn new(mesh: &'a BackgroundMesh, mu: ParameterPoint, phys: &'a PhysicsParams) -> Self {
        Self { mesh, mu, phys, elements: HashMap::new(), facets: HashMap::new() }
    }

    fn element(&mut self, t: usize) -> &(ElementClass, Option<ElementLocal>) {
        let (mesh, mu, phys) = (self.mesh, self.mu, self.phys);
        self.elements.entry(t).or_insert_with(|| {
            let cut = cut_element(mesh, mu, t);
            let local = (cut.class != ElementClass::Outside)
                .then(|| element_local(mesh, t, &cut.volume, cut.boundary.as_ref(), phys));
            (cut.class, local)
        })
    }

    fn ghost_facet(&mut self, f: usize) -> Option<([usize; 4], [[f64; 4]; 4])> {
        if let Some(cached) = self.facets.get(&f) {
            return *cached;
        }
        let facet = self.mesh.facets[f];
        let ghost = facet.interior && {
            let c0 = self.element(facet.triangles[0]).0;
            let c1 = self.element(facet.triangles[1]).0;
            is_ghost_facet(&facet, |t| if t == facet.triangles[0] { c0 } else { c1 })
        };
        let value = ghost.then(|| facet_local(self.mesh, f, self.phys));
        self.facets.insert(f, value);
        value
    }

    /// `A(μ)_ij`.
    pub fn matrix_entry(&mut self, i: usize, j: usize) -> f64 {
        let mesh = self.mesh;
        let mut value = 0.0;
        let (ti, tj) = (&mesh.vertex_triangles[i], &mesh.vertex_triangles[j]);
        for &t in ti.iter().filter(|t| tj.contains(t)) {
            if let (_, Some(local)) = *self.element(t) {
                let tri = mesh.triangles[t];
                value += local.matrix[local_index(&tri, i)][local_index(&tri, j)];
            }
        }
        if self.phys.gamma.first().is_some_and(|&g| g != 0.0) {
            let mut candidates: Vec<usize> = ti.iter().flat_map(|&t| mesh.triangle_facets[t]).collect();
            candidates.sort_unstable();
            candidates.dedup();
            for f in candidates {
                let facet = &mesh.facets[f];
                if !facet.interior {
                    continue;
                }
                let in_patch = |v: usize| facet.triangles.iter().any(|&t| mesh.triangles[t].contains(&v));
                if !in_patch(j) {
                    continue;
                }
                if let Some((patch, local)) = self.ghost_facet(f) {
                    value += local[local_index(&patch, i)][local_index(&patch, j)];
                }
            }
        }
        value
    }

    /// `f(μ)_i`.
    pub fn vector_entry(&mut self, i: usize) -> f64 {
        let mesh = self.mesh;
        let mut value = 0.0;
        for &t in &mesh.vertex_triangles[i] {
            if let (_, Some(local)) = *self.element(t) {
                value += local.load[local_index(&mesh.triangles[t], i)];
            }
        }
        value
    }
}

/// Evaluates selected entries of `A(μ)` and `f(μ)` without global assembly.
pub fn evaluate_entries(
    mesh: &BackgroundMesh,
    mu: ParameterPoint,
    phys: &PhysicsParams,
    matrix_entries: &[(usize, usize)],
    vector_entries: &[usize],
) -> SampledEntries {
    let mut eval = EntryEvaluator::new(mesh, mu, phys);
    let matrix = matrix_entries.iter().map(|&(i, j)| eval.matrix_entry(i, j)).collect();
    let vector = vector_entries.iter().map(|&i| eval.vector_entry(i)).collect();
    SampledEntries { matrix, vector }
}

/// Smallest generalised eigenvalue of `(sym(A), N)` on the active block.
pub fn coercivity_constant(sys: &SystemPair, norm: &CsrMatrix) -> Result<f64> {
    let a = sys.matrix.principal_block(&sys.active_dofs);
    let a = (&a + a.transpose()) * 0.5;
    let n = norm.principal_block(&sys.active_dofs);
    let chol = n.cholesky().ok_or(Error::NotPositiveDefinite { mu: sys.mu })?;
    let l = chol.l();
    // L⁻¹ A L⁻ᵀ
    let x = l.solve_lower_triangular(&a).expect("triangular factor is invertible");
    let y = l.solve_lower_triangular(&x.transpose()).expect("triangular factor is invertible");
    let y: DMatrix<f64> = (&y + y.transpose()) * 0.5;
    Ok(y.symmetric_eigenvalues().min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_background_mesh, build_cut_geometry, BoxDomain};

    fn setup(mu: (f64, f64)) -> (BackgroundMesh, CutGeometry, PhysicsParams) {
        let mesh = build_background_mesh(BoxDomain::square(-1.2, 1.2), 0.125).unwrap();
        let geom = build_cut_geometry(&mesh, ParameterPoint::new(mu.0, mu.1).unwrap());
        (mesh, geom, PhysicsParams::default())
    }

    #[test]
    fn inactive_rows_are_exactly_zero() {
        let (mesh, geom, phys) = setup((1.07, 1.16));
        let sys = assemble_system(&mesh, &geom, &phys).unwrap();
        let mut active = vec![false; sys.dim()];
        for &i in &sys.active_dofs {
            active[i] = true;
        }
        for i in (0..sys.dim()).filter(|&i| !active[i]) {
            assert_eq!(sys.load[i], 0.0);
            assert!(sys.matrix.row(i).0.is_empty());
        }
        for (i, j, _) in sys.matrix.triplets() {
            assert!(active[i] && active[j]);
        }
    }

    #[test]
    fn system_is_symmetric() {
        let (mesh, geom, phys) = setup((1.18, 1.02));
        let sys = assemble_system(&mesh, &geom, &phys).unwrap();
        assert!(sys.matrix.asymmetry() <= 1e-12 * sys.matrix.frobenius_norm());
        let norm = assemble_norm_matrix(&mesh, &geom, &phys).unwrap();
        assert!(norm.asymmetry() <= 1e-12 * norm.frobenius_norm());
    }

    #[test]
    fn norm_of_constant_is_scaled_perimeter() {
        let (mesh, geom, phys) = setup((1.0, 1.0));
        let norm = assemble_norm_matrix(&mesh, &geom, &phys).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        let expected = phys.lambda / mesh.h * geom.perimeter();
        assert!((norm.quad_form(&ones) - expected).abs() <= 1e-10 * expected);
        let exact = phys.lambda / mesh.h * 2.0 * std::f64::consts::PI;
        assert!((norm.quad_form(&ones) - exact).abs() <= 0.02 * exact);
        assert_eq!(norm.quad_form(&vec![0.0; mesh.num_vertices()]), 0.0);
    }

    #[test]
    fn mass_matrix_integrates_box_area() {
        let (mesh, _, _) = setup((1.0, 1.0));
        let mass = assemble_mass_matrix(&mesh);
        let ones = vec![1.0; mesh.num_vertices()];
        assert!((mass.quad_form(&ones) - 5.76).abs() < 1e-10);
        assert!(mass.asymmetry() <= 1e-12 * mass.frobenius_norm());
        let eig = mass.to_dense().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn higher_order_ghost_coefficients_do_not_change_the_matrix() {
        let (mesh, geom, phys) = setup((1.1, 1.1));
        let mut only_first = phys.clone();
        only_first.gamma.truncate(1);
        let mut many = phys.clone();
        many.gamma = vec![0.1, 0.001, 5.0];
        let a = assemble_system(&mesh, &geom, &only_first).unwrap();
        let b = assemble_system(&mesh, &geom, &phys).unwrap();
        let c = assemble_system(&mesh, &geom, &many).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.matrix, c.matrix);
    }

    #[test]
    fn local_entries_match_full_assembly_bitwise() {
        for mu in [(1.0, 1.0), (1.13, 1.04), (1.2, 1.19)] {
            let (mesh, geom, phys) = setup(mu);
            let sys = assemble_system(&mesh, &geom, &phys).unwrap();
            let entries: Vec<(usize, usize)> = sys.matrix.triplets().map(|(i, j, _)| (i, j)).collect();
            let rows: Vec<usize> = (0..sys.dim()).collect();
            let sampled = evaluate_entries(&mesh, geom.mu, &phys, &entries, &rows);
            for (k, (i, j, v)) in sys.matrix.triplets().enumerate() {
                assert_eq!(sampled.matrix[k].to_bits(), v.to_bits(), "entry ({i}, {j})");
            }
            for i in 0..sys.dim() {
                assert_eq!(sampled.vector[i].to_bits(), sys.load[i].to_bits());
            }
        }
    }

    #[test]
    fn disjoint_supports_give_zero() {
        let (mesh, geom, phys) = setup((1.0, 1.0));
        // centre vertex and a far-away corner vertex
        let centre = mesh.vertices.iter().position(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12).unwrap();
        let sampled = evaluate_entries(&mesh, geom.mu, &phys, &[(centre, 0), (centre, 440)], &[0]);
        assert_eq!(sampled.matrix, vec![0.0, 0.0]);
        assert_eq!(sampled.vector, vec![0.0]);
    }

    #[test]
    fn discrete_coercivity_is_positive() {
        let (mesh, geom, phys) = setup((1.05, 1.15));
        let sys = assemble_system(&mesh, &geom, &phys).unwrap();
        let norm = assemble_norm_matrix(&mesh, &geom, &phys).unwrap();
        let alpha = coercivity_constant(&sys, &norm).unwrap();
        assert!(alpha >= 0.05, "alpha = {alpha}");
    }

    #[test]
    fn invalid_physics_rejected() {
        let mut phys = PhysicsParams::default();
        phys.lambda = -1.0;
        assert!(phys.validate().is_err());
        let mut phys = PhysicsParams::default();
        phys.gamma = vec![0.1, -1.0];
        assert!(phys.validate().is_err());
    }
}
